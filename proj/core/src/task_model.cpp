#include "hic/task_model.hpp"

#include <expat.h>

#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "hic/error.hpp"

namespace hic {
namespace {

struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<std::unique_ptr<XmlNode>> children;
  int line = 0;

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

// Builds an element tree with expat. Character data other than whitespace
// and DOCTYPE declarations are rejected: the dialect has neither.
class TreeBuilder {
 public:
  std::unique_ptr<XmlNode> parse(std::string_view text) {
    std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(
        XML_ParserCreate(nullptr), &XML_ParserFree);
    parser_ = parser.get();
    XML_SetUserData(parser_, this);
    XML_SetElementHandler(parser_, &TreeBuilder::on_start, &TreeBuilder::on_end);
    XML_SetCharacterDataHandler(parser_, &TreeBuilder::on_text);
    XML_SetStartDoctypeDeclHandler(parser_, &TreeBuilder::on_doctype);

    const auto status = XML_Parse(parser_, text.data(),
                                  static_cast<int>(text.size()), XML_TRUE);
    if (!error_.empty()) throw ParseError(Errc::kParseError, error_line_, error_);
    if (status != XML_STATUS_OK) {
      throw ParseError(
          Errc::kWellFormednessError,
          static_cast<int>(XML_GetCurrentLineNumber(parser_)),
          XML_ErrorString(XML_GetErrorCode(parser_)));
    }
    return std::move(root_);
  }

 private:
  static void on_start(void* data, const XML_Char* name, const XML_Char** atts) {
    auto* self = static_cast<TreeBuilder*>(data);
    auto node = std::make_unique<XmlNode>();
    node->name = name;
    node->line = static_cast<int>(XML_GetCurrentLineNumber(self->parser_));
    for (int i = 0; atts[i]; i += 2) node->attrs.emplace_back(atts[i], atts[i + 1]);
    XmlNode* raw = node.get();
    if (self->stack_.empty()) {
      self->root_ = std::move(node);
    } else {
      self->stack_.back()->children.push_back(std::move(node));
    }
    self->stack_.push_back(raw);
  }

  static void on_end(void* data, const XML_Char*) {
    static_cast<TreeBuilder*>(data)->stack_.pop_back();
  }

  static void on_text(void* data, const XML_Char* s, int len) {
    auto* self = static_cast<TreeBuilder*>(data);
    for (int i = 0; i < len; ++i) {
      const char c = s[i];
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') {
        self->fail("unexpected text content");
        return;
      }
    }
  }

  static void on_doctype(void* data, const XML_Char*, const XML_Char*,
                         const XML_Char*, int) {
    static_cast<TreeBuilder*>(data)->fail("DOCTYPE declarations are not allowed");
  }

  void fail(std::string reason) {
    if (!error_.empty()) return;
    error_ = std::move(reason);
    error_line_ = static_cast<int>(XML_GetCurrentLineNumber(parser_));
    XML_StopParser(parser_, XML_FALSE);
  }

  XML_Parser parser_ = nullptr;
  std::unique_ptr<XmlNode> root_;
  std::vector<XmlNode*> stack_;
  std::string error_;
  int error_line_ = 0;
};

[[noreturn]] void fail(const XmlNode& node, const std::string& reason) {
  throw ParseError(Errc::kParseError, node.line, reason);
}

void check_attrs(const XmlNode& node, std::initializer_list<std::string_view> allowed,
                 bool allow_namespaces = false) {
  for (const auto& [key, value] : node.attrs) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (allow_namespaces &&
        (key.rfind("xmlns", 0) == 0 || key.rfind("xsi:", 0) == 0)) {
      ok = true;
    }
    if (!ok) fail(node, "unexpected attribute '" + key + "' on <" + node.name + ">");
  }
}

const std::string& required_attr(const XmlNode& node, std::string_view key) {
  const std::string* v = node.attr(key);
  if (!v) {
    fail(node, "<" + node.name + "> requires attribute '" + std::string(key) + "'");
  }
  return *v;
}

void check_leaf(const XmlNode& node) {
  if (!node.children.empty()) {
    fail(*node.children.front(),
         "<" + node.name + "> may not contain <" + node.children.front()->name + ">");
  }
}

bool known_element(std::string_view name) {
  static const std::set<std::string_view> kVocabulary{
      "task_model", "starting_state", "state",    "events",
      "event",      "in_param",       "interaction_call", "method",
      "next_states", "positive",      "negative", "out_param",
      "next_state"};
  return kVocabulary.count(name) > 0;
}

[[noreturn]] void unexpected_child(const XmlNode& parent, const XmlNode& child) {
  if (!known_element(child.name)) fail(child, "unknown element <" + child.name + ">");
  fail(child, "<" + child.name + "> is not allowed inside <" + parent.name + ">");
}

ParamSpec parse_param(const XmlNode& node) {
  check_attrs(node, {"id", "type"});
  check_leaf(node);
  const std::string* type = node.attr("type");
  return {required_attr(node, "id"), type ? *type : std::string()};
}

void push_unique(ParamList& list, ParamSpec p, const XmlNode& node) {
  for (const auto& existing : list) {
    if (existing.id == p.id) fail(node, "duplicate parameter id '" + p.id + "'");
  }
  list.push_back(std::move(p));
}

Branch parse_branch(const XmlNode& node) {
  check_attrs(node, {});
  Branch b;
  bool have_next = false;
  for (const auto& child : node.children) {
    if (child->name == "out_param") {
      push_unique(b.out_params, parse_param(*child), *child);
    } else if (child->name == "next_state") {
      if (have_next) fail(*child, "<" + node.name + "> has more than one <next_state>");
      check_attrs(*child, {"id"});
      check_leaf(*child);
      b.next_state = required_attr(*child, "id");
      have_next = true;
    } else {
      unexpected_child(node, *child);
    }
  }
  if (!have_next) fail(node, "<" + node.name + "> requires a <next_state>");
  return b;
}

InteractionCall parse_call(const XmlNode& node) {
  check_attrs(node, {"id"});
  InteractionCall call;
  call.id = required_attr(node, "id");
  bool have_method = false;
  bool have_next = false;
  for (const auto& child : node.children) {
    if (child->name == "method") {
      if (have_method) fail(*child, "more than one <method>");
      check_attrs(*child, {"id"});
      check_leaf(*child);
      call.bip_method = required_attr(*child, "id");
      have_method = true;
    } else if (child->name == "next_states") {
      if (have_next) fail(*child, "more than one <next_states>");
      check_attrs(*child, {});
      bool pos = false;
      bool neg = false;
      for (const auto& branch : child->children) {
        if (branch->name == "positive") {
          if (pos) fail(*branch, "more than one <positive>");
          call.positive = parse_branch(*branch);
          pos = true;
        } else if (branch->name == "negative") {
          if (neg) fail(*branch, "more than one <negative>");
          call.negative = parse_branch(*branch);
          neg = true;
        } else {
          unexpected_child(*child, *branch);
        }
      }
      if (!pos) fail(*child, "<next_states> requires a <positive> branch");
      if (!neg) fail(*child, "<next_states> requires a <negative> branch");
      have_next = true;
    } else {
      unexpected_child(node, *child);
    }
  }
  if (!have_method) fail(node, "<interaction_call> requires a <method>");
  if (!have_next) fail(node, "<interaction_call> requires <next_states>");
  return call;
}

EventSpec parse_event(const XmlNode& node) {
  check_attrs(node, {"id"});
  EventSpec ev;
  ev.id = required_attr(node, "id");
  bool have_call = false;
  for (const auto& child : node.children) {
    if (child->name == "in_param") {
      push_unique(ev.in_params, parse_param(*child), *child);
    } else if (child->name == "interaction_call") {
      if (have_call) fail(*child, "event '" + ev.id + "' has more than one <interaction_call>");
      ev.call = parse_call(*child);
      have_call = true;
    } else {
      unexpected_child(node, *child);
    }
  }
  if (!have_call) fail(node, "event '" + ev.id + "' requires an <interaction_call>");
  return ev;
}

State parse_state(const XmlNode& node) {
  check_attrs(node, {"id"});
  State st;
  st.id = required_attr(node, "id");
  bool have_events = false;
  for (const auto& child : node.children) {
    if (child->name != "events") unexpected_child(node, *child);
    if (have_events) fail(*child, "state '" + st.id + "' has more than one <events>");
    check_attrs(*child, {});
    have_events = true;
    for (const auto& ev_node : child->children) {
      if (ev_node->name != "event") unexpected_child(*child, *ev_node);
      EventSpec ev = parse_event(*ev_node);
      if (st.find_event(ev.id)) {
        fail(*ev_node, "duplicate event id '" + ev.id + "' in state '" + st.id + "'");
      }
      st.events.push_back(std::move(ev));
    }
  }
  return st;
}

std::string escape_attr(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_param(std::ostringstream& out, const char* tag, const ParamSpec& p,
                 int indent) {
  out << std::string(indent, ' ') << '<' << tag << " id=\"" << escape_attr(p.id) << '"';
  if (!p.type.empty()) out << " type=\"" << escape_attr(p.type) << '"';
  out << " />\n";
}

void write_branch(std::ostringstream& out, const char* tag, const Branch& b,
                  int indent) {
  const std::string pad(indent, ' ');
  out << pad << '<' << tag << ">\n";
  for (const auto& p : b.out_params) write_param(out, "out_param", p, indent + 2);
  out << pad << "  <next_state id=\"" << escape_attr(b.next_state) << "\" />\n";
  out << pad << "</" << tag << ">\n";
}

std::string branch_location(const State& st, const EventSpec& ev, Outcome o) {
  return "state '" + st.id + "' / event '" + ev.id + "' / " + std::string(to_string(o));
}

}  // namespace

std::string_view to_string(Outcome outcome) {
  return outcome == Outcome::kPositive ? "positive" : "negative";
}

Outcome outcome_from_string(std::string_view text) {
  if (text == "positive") return Outcome::kPositive;
  if (text == "negative") return Outcome::kNegative;
  throw Error(Errc::kBadParams, "outcome must be positive or negative, got '" +
                                    std::string(text) + "'");
}

const EventSpec* State::find_event(std::string_view event_id) const {
  for (const auto& e : events) {
    if (e.id == event_id) return &e;
  }
  return nullptr;
}

const State* TaskModel::find_state(std::string_view state_id) const {
  for (const auto& s : states) {
    if (s.id == state_id) return &s;
  }
  return nullptr;
}

TaskModel parse_task_model(std::string_view xml_text, std::string default_model_id) {
  const auto root = TreeBuilder().parse(xml_text);
  if (root->name != "task_model") {
    fail(*root, known_element(root->name)
                    ? "root element must be <task_model>, got <" + root->name + ">"
                    : "unknown element <" + root->name + ">");
  }
  check_attrs(*root, {"id"}, /*allow_namespaces=*/true);

  TaskModel model;
  const std::string* id = root->attr("id");
  model.model_id = id ? *id : std::move(default_model_id);

  bool have_start = false;
  std::set<std::string> seen;
  for (const auto& child : root->children) {
    if (child->name == "starting_state") {
      if (have_start) fail(*child, "more than one <starting_state>");
      check_attrs(*child, {"id"});
      check_leaf(*child);
      model.starting_state = required_attr(*child, "id");
      have_start = true;
    } else if (child->name == "state") {
      State st = parse_state(*child);
      if (!seen.insert(st.id).second) fail(*child, "duplicate state id '" + st.id + "'");
      model.states.push_back(std::move(st));
    } else {
      unexpected_child(*root, *child);
    }
  }
  return model;
}

TaskModel load_task_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string stem = path.filename().string();
  constexpr std::string_view kSuffix = ".task.xml";
  if (stem.size() > kSuffix.size() &&
      stem.compare(stem.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
    stem.resize(stem.size() - kSuffix.size());
  } else {
    stem = path.stem().string();
  }
  return parse_task_model(buf.str(), stem);
}

std::string serialize_task_model(const TaskModel& model) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n";
  out << "<task_model";
  if (!model.model_id.empty()) out << " id=\"" << escape_attr(model.model_id) << '"';
  out << ">\n";
  if (!model.starting_state.empty()) {
    out << "  <starting_state id=\"" << escape_attr(model.starting_state) << "\" />\n";
  }
  for (const auto& st : model.states) {
    out << "  <state id=\"" << escape_attr(st.id) << "\">\n";
    out << "    <events>\n";
    for (const auto& ev : st.events) {
      out << "      <event id=\"" << escape_attr(ev.id) << "\">\n";
      for (const auto& p : ev.in_params) write_param(out, "in_param", p, 8);
      out << "        <interaction_call id=\"" << escape_attr(ev.call.id) << "\">\n";
      out << "          <method id=\"" << escape_attr(ev.call.bip_method) << "\" />\n";
      out << "          <next_states>\n";
      write_branch(out, "positive", ev.call.positive, 12);
      write_branch(out, "negative", ev.call.negative, 12);
      out << "          </next_states>\n";
      out << "        </interaction_call>\n";
      out << "      </event>\n";
    }
    out << "    </events>\n";
    out << "  </state>\n";
  }
  out << "</task_model>\n";
  return out.str();
}

std::vector<Diagnostic> validate(const TaskModel& model) {
  using Severity = Diagnostic::Severity;
  std::vector<Diagnostic> out;
  std::set<StateId> ids;
  for (const auto& st : model.states) {
    if (!ids.insert(st.id).second) {
      out.push_back({Severity::kError, "duplicate-state", "state '" + st.id + "'",
                     "state id declared more than once"});
    }
  }
  if (model.starting_state.empty()) {
    out.push_back({Severity::kError, "missing-starting-state", "task_model",
                   "no <starting_state> declared"});
  } else if (!ids.count(model.starting_state)) {
    out.push_back({Severity::kError, "missing-starting-state", "task_model",
                   "starting state '" + model.starting_state + "' is not defined"});
  }
  for (const auto& st : model.states) {
    std::set<EventId> events;
    for (const auto& ev : st.events) {
      const std::string where = "state '" + st.id + "' / event '" + ev.id + "'";
      if (!events.insert(ev.id).second) {
        out.push_back({Severity::kError, "duplicate-event", where,
                       "event id declared more than once in the state"});
      }
      if (ev.call.bip_method.empty()) {
        out.push_back({Severity::kError, "empty-bip-method", where,
                       "interaction call has no BIP method id"});
      }
      for (Outcome o : {Outcome::kPositive, Outcome::kNegative}) {
        const Branch& b = ev.call.branch(o);
        if (!ids.count(b.next_state)) {
          out.push_back({Severity::kError, "dangling-next-state",
                         branch_location(st, ev, o),
                         "next state '" + b.next_state + "' is not defined"});
        }
      }
    }
  }
  const auto reachable = reachable_states(model);
  if (!reachable.empty()) {
    for (const auto& st : model.states) {
      if (!reachable.count(st.id)) {
        out.push_back({Severity::kWarning, "unreachable-state", "state '" + st.id + "'",
                       "not reachable from '" + model.starting_state + "'"});
      }
    }
  }
  return out;
}

std::size_t error_count(const std::vector<Diagnostic>& diagnostics) {
  std::size_t n = 0;
  for (const auto& d : diagnostics) n += d.severity == Diagnostic::Severity::kError;
  return n;
}

std::set<StateId> reachable_states(const TaskModel& model) {
  std::map<std::string_view, const State*> index;
  for (const auto& st : model.states) index.emplace(st.id, &st);
  std::set<StateId> seen;
  if (!index.count(model.starting_state)) return seen;
  std::deque<const State*> frontier{index.at(model.starting_state)};
  seen.insert(model.starting_state);
  while (!frontier.empty()) {
    const State* st = frontier.front();
    frontier.pop_front();
    for (const auto& ev : st->events) {
      for (const Branch* b : {&ev.call.positive, &ev.call.negative}) {
        auto it = index.find(b->next_state);
        if (it != index.end() && seen.insert(b->next_state).second) {
          frontier.push_back(it->second);
        }
      }
    }
  }
  return seen;
}

std::set<EventId> allowed_events(const TaskModel& model, std::string_view state_id) {
  const State* st = model.find_state(state_id);
  if (!st) throw Error(Errc::kUnknownState, std::string(state_id));
  std::set<EventId> out;
  for (const auto& ev : st->events) out.insert(ev.id);
  return out;
}

const EventSpec& event_spec(const TaskModel& model, std::string_view state_id,
                            std::string_view event_id) {
  const State* st = model.find_state(state_id);
  if (!st) throw Error(Errc::kUnknownState, std::string(state_id));
  const EventSpec* ev = st->find_event(event_id);
  if (!ev) {
    throw Error(Errc::kEventNotAllowed, "event '" + std::string(event_id) +
                                            "' in state '" + std::string(state_id) + "'");
  }
  return *ev;
}

TransitionResult transition(const TaskModel& model, std::string_view state_id,
                            std::string_view event_id, Outcome outcome) {
  const Branch& b = event_spec(model, state_id, event_id).call.branch(outcome);
  return {b.next_state, b.out_params};
}

}  // namespace hic
