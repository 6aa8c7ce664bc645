#include "hic/flightops.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hic/error.hpp"

namespace hic::flightops {
namespace {

constexpr std::array<std::string_view, 8> kFields{
    "flight_id", "airline", "destination", "scheduled_time",
    "estimated_time", "gate", "status", "alert"};

bool known_field(std::string_view f) {
  return std::find(kFields.begin(), kFields.end(), f) != kFields.end();
}

std::string field_value(const Flight& f, std::string_view field) {
  if (field == "flight_id") return f.flight_id;
  if (field == "airline") return f.airline;
  if (field == "destination") return f.destination;
  if (field == "scheduled_time") return f.scheduled_time;
  if (field == "estimated_time") return f.estimated_time;
  if (field == "gate") return f.gate;
  if (field == "status") return std::string(to_string(f.status));
  return f.alert ? "true" : "false";
}

bool derived_alert(FlightStatus s) {
  return s == FlightStatus::kDelayed || s == FlightStatus::kCancelled;
}

std::string bip(std::string_view name) { return std::string(kBipPrefix) + std::string(name); }

// "HH:MM" plus minutes, wrapping at midnight.
std::string add_minutes(const std::string& hhmm, int minutes) {
  int h = 0;
  int m = 0;
  if (std::sscanf(hhmm.c_str(), "%d:%d", &h, &m) != 2) return hhmm;
  int total = ((h * 60 + m + minutes) % 1440 + 1440) % 1440;
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", total / 60, total % 60);
  return buf;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

struct TemplateRequest {
  std::string template_id;
  std::map<std::string, std::string> fields;
};

// "tpl-id key=value ..." or {"id": ..., "fields": {...}}.
TemplateRequest parse_template_param(const nlohmann::json& v) {
  TemplateRequest req;
  if (v.is_string()) {
    const auto words = split_words(v.get<std::string>());
    if (words.empty()) throw Error(Errc::kBadParams, "empty message_template");
    req.template_id = words.front();
    for (std::size_t i = 1; i < words.size(); ++i) {
      const auto eq = words[i].find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(Errc::kBadParams, "expected key=value, got '" + words[i] + "'");
      }
      req.fields[words[i].substr(0, eq)] = words[i].substr(eq + 1);
    }
    return req;
  }
  if (v.is_object() && v.contains("id") && v.at("id").is_string()) {
    req.template_id = v.at("id").get<std::string>();
    const nlohmann::json fields = v.value("fields", nlohmann::json::object());
    for (const auto& [k, f] : fields.items()) {
      req.fields[k] = f.is_string() ? f.get<std::string>() : f.dump();
    }
    return req;
  }
  throw Error(Errc::kBadParams, "message_template must be a string or {id, fields}");
}

}  // namespace

std::string_view to_string(FlightStatus status) {
  switch (status) {
    case FlightStatus::kScheduled: return "scheduled";
    case FlightStatus::kBoarding: return "boarding";
    case FlightStatus::kDeparted: return "departed";
    case FlightStatus::kDelayed: return "delayed";
    case FlightStatus::kCancelled: return "cancelled";
  }
  return "scheduled";
}

FlightStatus flight_status_from_string(std::string_view text) {
  for (auto s : {FlightStatus::kScheduled, FlightStatus::kBoarding, FlightStatus::kDeparted,
                 FlightStatus::kDelayed, FlightStatus::kCancelled}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::kBadParams, "unknown flight status '" + std::string(text) + "'");
}

nlohmann::json flight_to_json(const Flight& f) {
  return {{"flight_id", f.flight_id},           {"airline", f.airline},
          {"destination", f.destination},       {"scheduled_time", f.scheduled_time},
          {"estimated_time", f.estimated_time}, {"gate", f.gate},
          {"status", to_string(f.status)},      {"alert", f.alert}};
}

Flight flight_from_json(const nlohmann::json& j) {
  Flight f;
  try {
    f.flight_id = j.at("flight_id").get<std::string>();
    f.airline = j.at("airline").get<std::string>();
    f.destination = j.value("destination", "");
    f.scheduled_time = j.at("scheduled_time").get<std::string>();
    f.estimated_time = j.value("estimated_time", f.scheduled_time);
    f.gate = j.value("gate", "");
    f.status = flight_status_from_string(j.value("status", "scheduled"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, std::string("flight record: ") + e.what());
  }
  f.alert = derived_alert(f.status);
  return f;
}

Flight apply_patch(Flight flight, const FlightPatch& patch) {
  for (const auto& [field, value] : patch) {
    if (field == "airline") {
      flight.airline = value;
    } else if (field == "destination") {
      flight.destination = value;
    } else if (field == "scheduled_time") {
      flight.scheduled_time = value;
    } else if (field == "estimated_time") {
      flight.estimated_time = value;
    } else if (field == "gate") {
      flight.gate = value;
    } else if (field == "status") {
      flight.status = flight_status_from_string(value);
    } else {
      throw Error(Errc::kBadParams, "field '" + field + "' cannot be patched");
    }
  }
  flight.alert = derived_alert(flight.status);
  return flight;
}

FlightPatch patch_from_json(const nlohmann::json& j) {
  FlightPatch patch;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (!v.is_string()) throw Error(Errc::kBadParams, "patch values must be strings");
      patch[k] = v.get<std::string>();
    }
    return patch;
  }
  if (j.is_string()) {
    for (const auto& w : split_words(j.get<std::string>())) {
      const auto eq = w.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(Errc::kBadParams, "expected field=value, got '" + w + "'");
      }
      patch[w.substr(0, eq)] = w.substr(eq + 1);
    }
    return patch;
  }
  throw Error(Errc::kBadParams, "patch must be an object or a field=value string");
}

FlightStore::FlightStore(const ProfileStore& profiles) : profiles_(profiles) {}

void FlightStore::load_json(const nlohmann::json& flights) {
  const auto& arr = flights.is_object() ? flights.at("flights") : flights;
  if (!arr.is_array()) throw Error(Errc::kConfigError, "flights must be an array");
  std::map<std::string, Flight> loaded;
  for (const auto& j : arr) {
    Flight f = flight_from_json(j);
    std::string id = f.flight_id;
    if (!loaded.emplace(std::move(id), std::move(f)).second) {
      throw Error(Errc::kConfigError, "duplicate flight " + j.at("flight_id").get<std::string>());
    }
  }
  std::unique_lock lock(mutex_);
  flights_ = std::move(loaded);
}

void FlightStore::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigError, "cannot open " + path.string());
  try {
    load_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, path.string() + ": " + e.what());
  }
}

void FlightStore::save_snapshot(const std::filesystem::path& path) const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : all()) arr.push_back(flight_to_json(f));
  std::ofstream out(path);
  if (!out) throw Error(Errc::kConfigError, "cannot write " + path.string());
  out << nlohmann::json{{"flights", arr}}.dump(2) << '\n';
}

std::vector<Flight> FlightStore::query(const FlightFilter& filter) const {
  for (const auto& [field, value] : filter) {
    if (!known_field(field)) throw Error(Errc::kBadFilter, "unknown field '" + field + "'");
  }
  std::shared_lock lock(mutex_);
  std::vector<Flight> out;
  for (const auto& [id, f] : flights_) {
    const bool match = std::all_of(filter.begin(), filter.end(), [&](const auto& kv) {
      return field_value(f, kv.first) == kv.second;
    });
    if (match) out.push_back(f);
  }
  return out;
}

Flight FlightStore::apply_locked(const std::string& flight_id, const FlightPatch& patch) {
  auto it = flights_.find(flight_id);
  if (it == flights_.end()) throw Error(Errc::kUnknownFlight, flight_id);
  it->second = apply_patch(it->second, patch);
  ++updates_;
  return it->second;
}

Flight FlightStore::update_flight(const std::string& actor_id, const std::string& flight_id,
                                  const FlightPatch& patch) {
  if (profiles_.check_right(actor_id, "flight.update") != Decision::kAllow) {
    throw Error(Errc::kRightDenied, "'" + actor_id + "' may not update flights");
  }
  Flight updated;
  UpdateListener listener;
  {
    std::unique_lock lock(mutex_);
    updated = apply_locked(flight_id, patch);
    listener = listener_;
  }
  if (listener) listener(updated);
  return updated;
}

Flight FlightStore::apply_feed(const std::string& flight_id, const FlightPatch& patch) {
  Flight updated;
  UpdateListener listener;
  {
    std::unique_lock lock(mutex_);
    updated = apply_locked(flight_id, patch);
    listener = listener_;
  }
  if (listener) listener(updated);
  return updated;
}

void FlightStore::set_update_listener(UpdateListener listener) {
  std::unique_lock lock(mutex_);
  listener_ = std::move(listener);
}

std::size_t FlightStore::update_count() const {
  std::shared_lock lock(mutex_);
  return updates_;
}

std::vector<std::string> MessageTemplate::placeholders() const {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = body.find('{', pos)) != std::string::npos) {
    const auto close = body.find('}', pos);
    if (close == std::string::npos) break;
    std::string name = body.substr(pos + 1, close - pos - 1);
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    pos = close + 1;
  }
  return out;
}

std::string MessageTemplate::fill(const std::map<std::string, std::string>& fields) const {
  std::string out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find('{', pos);
    const auto close = open == std::string::npos ? open : body.find('}', open);
    if (close == std::string::npos) {
      out += body.substr(pos);
      break;
    }
    out += body.substr(pos, open - pos);
    const std::string name = body.substr(open + 1, close - open - 1);
    auto it = fields.find(name);
    out += it == fields.end() ? body.substr(open, close - open + 1) : it->second;
    pos = close + 1;
  }
  return out;
}

void TemplateStore::load_json(const nlohmann::json& templates) {
  const auto& arr = templates.is_object() ? templates.at("templates") : templates;
  if (!arr.is_array()) throw Error(Errc::kConfigError, "templates must be an array");
  std::map<std::string, MessageTemplate> loaded;
  for (const auto& j : arr) {
    MessageTemplate t;
    try {
      t.template_id = j.at("template_id").get<std::string>();
      const std::string scope = j.at("scope").get<std::string>();
      if (scope != "general" && scope != "specific") {
        throw Error(Errc::kConfigError, "template scope must be general or specific");
      }
      t.scope = scope == "general" ? TemplateScope::kGeneral : TemplateScope::kSpecific;
      t.body = j.at("body").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kConfigError, std::string("template record: ") + e.what());
    }
    std::set<std::string> seen;
    std::size_t pos = 0;
    while ((pos = t.body.find('{', pos)) != std::string::npos) {
      const auto close = t.body.find('}', pos);
      if (close == std::string::npos) break;
      if (!seen.insert(t.body.substr(pos + 1, close - pos - 1)).second) {
        throw Error(Errc::kConfigError, "template " + t.template_id + " repeats a placeholder");
      }
      pos = close + 1;
    }
    std::string id = t.template_id;
    if (!loaded.emplace(std::move(id), std::move(t)).second) {
      throw Error(Errc::kConfigError, "duplicate template " + j.at("template_id").get<std::string>());
    }
  }
  templates_ = std::move(loaded);
}

void TemplateStore::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigError, "cannot open " + path.string());
  try {
    load_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, path.string() + ": " + e.what());
  }
}

const MessageTemplate* TemplateStore::find(const std::string& template_id) const {
  auto it = templates_.find(template_id);
  return it == templates_.end() ? nullptr : &it->second;
}

std::vector<MessageTemplate> TemplateStore::list(TemplateScope scope) const {
  std::vector<MessageTemplate> out;
  for (const auto& [id, t] : templates_) {
    if (t.scope == scope) out.push_back(t);
  }
  return out;
}

DisplayPayload flight_board(const std::vector<Flight>& flights) {
  DisplayPayload p;
  p.title = "Flights";
  p.columns = {{"flight_id", "Flight", 0, 8},     {"status", "Status", 1, 10},
               {"estimated_time", "ETD", 2, 5},   {"gate", "Gate", 3, 4},
               {"scheduled_time", "STD", 4, 5},   {"airline", "Airline", 5, 7},
               {"destination", "Destination", 6, 16}, {"alert", "Alert", 7, 5}};
  for (const auto& f : flights) {
    if (f.alert) p.alert_rows.insert(p.rows.size());
    Row row;
    for (auto field : kFields) row[std::string(field)] = field_value(f, field);
    p.rows.push_back(std::move(row));
  }
  return p;
}

CofosApp::CofosApp(ServiceBus& bus, const ProfileStore& profiles, std::string service_name,
                   std::string core_service)
    : bus_(bus), profiles_(profiles), service_name_(std::move(service_name)),
      core_service_(std::move(core_service)), flights_(profiles) {}

BipOutcome CofosApp::browse(TemplateScope scope, const char* positive_key) {
  const auto list = templates_.list(scope);
  if (list.empty()) return {Outcome::kNegative, {{"no_template", "no templates available"}}};
  std::string ids;
  for (const auto& t : list) ids += (ids.empty() ? "" : ",") + t.template_id;
  return {Outcome::kPositive, {{positive_key, ids}}};
}

BipOutcome CofosApp::compose(const BipContext& ctx, const nlohmann::json& params,
                             TemplateScope scope) {
  if (!params.contains("message_template")) throw Error(Errc::kBadParams, "missing message_template");
  const TemplateRequest req = parse_template_param(params.at("message_template"));
  const MessageTemplate* tpl = templates_.find(req.template_id);
  if (!tpl || tpl->scope != scope) {
    throw Error(Errc::kBadParams, "no " +
                                      std::string(scope == TemplateScope::kGeneral ? "general" : "specific") +
                                      " template '" + req.template_id + "'");
  }
  std::lock_guard lock(mutex_);
  Draft& draft = drafts_[ctx.session_id];
  if (draft.template_id != tpl->template_id) draft = Draft{tpl->template_id, {}};
  for (const auto& [k, v] : req.fields) draft.fields[k] = v;

  std::string missing;
  for (const auto& p : tpl->placeholders()) {
    if (!draft.fields.count(p)) missing += (missing.empty() ? "" : ",") + p;
  }
  if (!missing.empty()) {
    return {Outcome::kNegative, {{"incomplete_message", "missing " + missing}}};
  }
  Message msg;
  msg.seq = messages_.size() + 1;
  msg.author = ctx.actor_id;
  msg.template_id = tpl->template_id;
  for (const char* key : {"flight_id", "flight"}) {
    auto flight = draft.fields.find(key);
    if (flight != draft.fields.end()) {
      msg.flight_id = flight->second;
      break;
    }
  }
  msg.text = tpl->fill(draft.fields);
  messages_.push_back(msg);
  drafts_.erase(ctx.session_id);
  return {Outcome::kPositive, {{"message_sent", msg.text}}};
}

BipOutcome CofosApp::cancel(const BipContext& ctx) {
  std::lock_guard lock(mutex_);
  auto it = drafts_.find(ctx.session_id);
  std::string dropped = it == drafts_.end() ? "" : it->second.template_id;
  if (it != drafts_.end()) drafts_.erase(it);
  return {Outcome::kPositive, {{"cancelled", dropped}}};
}

BipOutcome CofosApp::read_message(const BipContext& ctx) {
  std::lock_guard lock(mutex_);
  std::size_t& cursor = read_cursor_[ctx.actor_id];
  while (cursor < messages_.size() && messages_[cursor].author == ctx.actor_id) ++cursor;
  if (cursor >= messages_.size()) {
    return {Outcome::kNegative, {{"no_message", "no unread messages"}}};
  }
  const Message& m = messages_[cursor++];
  return {Outcome::kPositive, {{"message", m.author + ": " + m.text}}};
}

BipOutcome CofosApp::update(const BipContext& ctx, const nlohmann::json& params) {
  if (!params.contains("flight_id") || !params.at("flight_id").is_string()) {
    throw Error(Errc::kBadParams, "flight_id must be a string");
  }
  const FlightPatch patch = patch_from_json(params.value("patch", nlohmann::json::object()));
  try {
    const Flight f = flights_.update_flight(ctx.actor_id, params.at("flight_id").get<std::string>(), patch);
    return {Outcome::kPositive, {{"flight", flight_to_json(f).dump()}}};
  } catch (const Error& e) {
    if (e.code() == Errc::kUnknownFlight) {
      return {Outcome::kNegative, {{"update_error", e.what()}}};
    }
    throw;
  }
}

std::vector<std::pair<std::string, BipHandler>> CofosApp::bip_handlers() {
  return {
      {bip("Connect"),
       [this](const BipContext& ctx, const nlohmann::json&) {
         if (!profiles_.has_user(ctx.actor_id)) {
           return BipOutcome{Outcome::kNegative, {{"connection_error", "unknown actor"}}};
         }
         return BipOutcome{Outcome::kPositive, {{"welcome", ctx.actor_id}}};
       }},
      {bip("Disconnect"),
       [this](const BipContext& ctx, const nlohmann::json&) {
         std::lock_guard lock(mutex_);
         drafts_.erase(ctx.session_id);
         return BipOutcome{Outcome::kPositive, {{"goodbye", ctx.actor_id}}};
       }},
      {bip("BrowseGeneralTemplates"),
       [this](const BipContext&, const nlohmann::json&) {
         return browse(TemplateScope::kGeneral, "templates");
       }},
      {bip("WriteGeneralMsg"),
       [this](const BipContext& ctx, const nlohmann::json& p) {
         return compose(ctx, p, TemplateScope::kGeneral);
       }},
      {bip("CancelGeneralMsg"), [this](const BipContext& ctx, const nlohmann::json&) { return cancel(ctx); }},
      {bip("BrowseSpecificTemplates"),
       [this](const BipContext&, const nlohmann::json&) {
         return browse(TemplateScope::kSpecific, "templates");
       }},
      {bip("SelectSpecificTemplate"),
       [this](const BipContext& ctx, const nlohmann::json& p) {
         return compose(ctx, p, TemplateScope::kSpecific);
       }},
      {bip("CancelSpecificMsg"), [this](const BipContext& ctx, const nlohmann::json&) { return cancel(ctx); }},
      {bip("ReadMessage"), [this](const BipContext& ctx, const nlohmann::json&) { return read_message(ctx); }},
      {bip("UpdateFlight"),
       [this](const BipContext& ctx, const nlohmann::json& p) { return update(ctx, p); }},
  };
}

void CofosApp::register_bips(InteractionCore& core) {
  for (auto& [id, handler] : bip_handlers()) core.register_bip(id, std::move(handler));
  core.register_app(std::string(kAppId));
}

void CofosApp::forward_updates_to_core() {
  flights_.set_update_listener([this](const Flight& f) {
    DisplayPayload p = flight_board({f});
    p.title = "Flight update " + f.flight_id;
    bus_.invoke(service_name_, core_service_, "BusinessRequest",
                {{"app_id", std::string(kAppId)},
                 {"info", {{"data_class", "flight"}, {"payload", payload_to_json(p)}}}});
  });
}

DisplayPayload CofosApp::board() const { return flight_board(flights_.all()); }

DisplayPayload CofosApp::board_with_message_counts() const {
  const auto flights = flights_.all();
  DisplayPayload counts;
  counts.title = "Messages";
  counts.columns = {{"flight_id", "Flight", 0, 8}, {"msgs", "Msgs", 1, 4}};
  std::map<std::string, int> n;
  {
    std::lock_guard lock(mutex_);
    for (const auto& m : messages_) {
      if (!m.flight_id.empty()) ++n[m.flight_id];
    }
  }
  for (const auto& f : flights) {
    counts.rows.push_back({{"flight_id", f.flight_id}, {"msgs", std::to_string(n[f.flight_id])}});
  }
  return aggregate({flight_board(flights), counts}, JoinSpec{"flight_id"});
}

std::vector<Message> CofosApp::messages() const {
  std::lock_guard lock(mutex_);
  return messages_;
}

bool CofosApp::has_draft(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return drafts_.count(session_id) > 0;
}

ServiceDescriptor CofosApp::descriptor(const std::string& name) {
  ServiceDescriptor d;
  d.name = name;
  d.methods = {{"AppRequest", {{"op", "string"}}, {{"result", "json"}}}};
  return d;
}

RegistrationId CofosApp::register_service() {
  return bus_.register_service(
      descriptor(service_name_),
      [this](const std::string&, const nlohmann::json& params, const CallContext&) {
        return handle(params);
      });
}

nlohmann::json CofosApp::handle(const nlohmann::json& params) {
  const auto& op = params.at("op");
  if (!op.is_string()) throw Error(Errc::kBadParams, "'op' must be a string");
  if (op == "query") {
    FlightFilter filter;
    const nlohmann::json raw = params.value("filter", nlohmann::json::object());
    for (const auto& [k, v] : raw.items()) {
      filter[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : flights_.query(filter)) arr.push_back(flight_to_json(f));
    return {{"result", std::move(arr)}};
  }
  if (op == "update") {
    const Flight f = flights_.update_flight(params.at("actor_id").get<std::string>(),
                                            params.at("flight_id").get<std::string>(),
                                            patch_from_json(params.at("patch")));
    return {{"result", flight_to_json(f)}};
  }
  if (op == "board") return {{"result", payload_to_json(board_with_message_counts())}};
  throw Error(Errc::kBadParams, "unknown op '" + op.get<std::string>() + "'");
}

std::optional<Flight> FlightFeed::step() {
  const auto flights = store_.all();
  if (flights.empty()) return std::nullopt;
  const Flight& f = flights[std::uniform_int_distribution<std::size_t>(0, flights.size() - 1)(rng_)];
  FlightPatch patch;
  switch (std::uniform_int_distribution<int>(0, 3)(rng_)) {
    case 0:
      patch["estimated_time"] =
          add_minutes(f.estimated_time, std::uniform_int_distribution<int>(5, 45)(rng_));
      patch["status"] = "delayed";
      break;
    case 1:
      patch["gate"] = std::string(1, static_cast<char>('A' + std::uniform_int_distribution<int>(0, 5)(rng_))) +
                      std::to_string(std::uniform_int_distribution<int>(1, 40)(rng_));
      break;
    case 2:
      patch["status"] = f.status == FlightStatus::kScheduled ? "boarding" : "departed";
      break;
    default:
      patch["estimated_time"] = f.scheduled_time;
      patch["status"] = "scheduled";
      break;
  }
  return store_.apply_feed(f.flight_id, patch);
}

}  // namespace hic::flightops
