#include "hic/scenario.hpp"

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "hic/error.hpp"

namespace hic {
namespace {

struct Failure {
  std::string message;
};

class Runner {
 public:
  Runner(Middleware& mw, std::uint64_t seed, std::ostream* log)
      : mw_(mw), rng_(seed), log_(log) {}

  void step(const nlohmann::json& s) {
    if (!s.is_object() || s.size() != 1) throw Failure{"a step is an object with one key"};
    const auto& [op, arg] = *s.items().begin();
    if (op == "open") {
      open(arg);
    } else if (op == "resume") {
      const auto cap = capability(arg.at("capability"));
      mw_.core().resume_session(session(arg), arg.at("container").get<std::string>(), cap);
    } else if (op == "action") {
      ActionData a;
      a.session_id = session(arg);
      a.actor_id = arg.value("actor", "");
      a.event_id = arg.at("event").get<std::string>();
      a.params = arg.value("params", nlohmann::json::object());
      record(a.session_id, mw_.core().interaction_request(a));
    } else if (op == "capture") {
      const std::string sid = session(arg);
      RawAction raw{raw_kind_from_string(arg.at("kind").get<std::string>()),
                    arg.at("payload").get<std::string>()};
      record(sid, mw_.container().capture_action(sid, raw));
    } else if (op == "update") {
      mw_.app().flights().apply_feed(arg.at("flight").get<std::string>(),
                                     flightops::patch_from_json(arg.at("patch")));
    } else if (op == "random_walk") {
      random_walk(session(arg), arg.at("steps").get<int>());
    } else if (op == "expect") {
      expect(arg);
    } else {
      throw Failure{"unknown step '" + op + "'"};
    }
  }

 private:
  TerminalCapability capability(const nlohmann::json& j) const {
    return capability_from_json(j, mw_.core().options().presets);
  }

  std::string session(const nlohmann::json& arg) const {
    const std::string name = arg.at("session").get<std::string>();
    const auto it = aliases_.find(name);
    return it == aliases_.end() ? name : it->second;
  }

  void open(const nlohmann::json& arg) {
    const std::string actor = arg.at("actor").get<std::string>();
    const std::string container = arg.value("container", "term-" + actor);
    const std::string app = arg.value("app", "cofos");
    const Session s =
        arg.contains("capability")
            ? mw_.core().open_session(actor, app, container, capability(arg.at("capability")))
            : mw_.core().open_session(actor, app, container);
    aliases_[arg.value("as", s.session_id)] = s.session_id;
    if (log_) *log_ << "open " << actor << " -> " << s.session_id << '\n';
  }

  void record(const std::string& sid, const Notification& n) {
    last_[sid] = n;
    if (log_) {
      *log_ << sid << ' ' << n.event_id << ' ' << to_string(n.status);
      if (n.outcome) *log_ << ' ' << to_string(*n.outcome);
      if (!n.reason_code.empty()) *log_ << ' ' << n.reason_code;
      *log_ << ' ' << n.previous_state << " -> " << n.new_state << '\n';
    }
  }

  void random_walk(const std::string& sid, int steps) {
    for (int i = 0; i < steps; ++i) {
      const auto allowed = mw_.core().session_allowed_events(sid);
      if (allowed.empty()) return;
      std::vector<EventId> events(allowed.begin(), allowed.end());
      const EventId event = events[std::uniform_int_distribution<std::size_t>(0, events.size() - 1)(rng_)];
      const Session s = mw_.core().get_session(sid);
      const auto model = mw_.core().task_model(s.model_id);
      ActionData a;
      a.session_id = sid;
      a.event_id = event;
      for (const auto& p : event_spec(*model, s.current_state, event).in_params) {
        a.params[p.id] = token();
      }
      record(sid, mw_.core().interaction_request(a));
    }
  }

  std::string token() {
    static constexpr const char* kWords[] = {"ops_delay flight=AF101 minutes=20", "gate_change",
                                              "AF101", "status=delayed", "hello", ""};
    return kWords[std::uniform_int_distribution<std::size_t>(0, std::size(kWords) - 1)(rng_)];
  }

  void expect(const nlohmann::json& arg) {
    const std::string sid = session(arg);
    const Session s = mw_.core().get_session(sid);
    std::ostringstream why;
    if (arg.contains("state") && arg.at("state").get<std::string>() != s.current_state) {
      why << "state is '" << s.current_state << "', expected '" << arg.at("state").get<std::string>() << "'";
    }
    if (arg.contains("history") && arg.at("history").get<std::size_t>() != s.history.size()) {
      why << (why.tellp() ? "; " : "") << "history has " << s.history.size() << " records, expected "
          << arg.at("history").get<std::size_t>();
    }
    const bool wants_last = arg.contains("status") || arg.contains("branch") || arg.contains("reason_code");
    if (wants_last) {
      const auto it = last_.find(sid);
      if (it == last_.end()) throw Failure{"no notification yet for " + sid};
      const Notification& n = it->second;
      if (arg.contains("status") && arg.at("status").get<std::string>() != to_string(n.status)) {
        why << (why.tellp() ? "; " : "") << "status is " << to_string(n.status);
      }
      if (arg.contains("branch")) {
        const std::string got = n.outcome ? std::string(to_string(*n.outcome)) : "none";
        if (got != arg.at("branch").get<std::string>()) {
          why << (why.tellp() ? "; " : "") << "branch is " << got;
        }
      }
      if (arg.contains("reason_code") && arg.at("reason_code").get<std::string>() != n.reason_code) {
        why << (why.tellp() ? "; " : "") << "reason_code is '" << n.reason_code << "'";
      }
    }
    if (why.tellp()) throw Failure{why.str()};
  }

  Middleware& mw_;
  std::mt19937_64 rng_;
  std::ostream* log_;
  std::map<std::string, std::string> aliases_;
  std::map<std::string, Notification> last_;
};

}  // namespace

ScenarioResult run_scenario(Middleware& mw, std::string_view script, std::uint64_t seed,
                            std::ostream* log) {
  Runner runner(mw, seed, log);
  ScenarioResult result;
  std::istringstream in{std::string(script)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      runner.step(nlohmann::json::parse(line));
      ++result.steps;
    } catch (const Failure& f) {
      result.message = f.message;
    } catch (const std::exception& e) {
      result.message = e.what();
    }
    if (!result.message.empty()) {
      result.ok = false;
      result.failed_line = number;
      return result;
    }
  }
  return result;
}

ScenarioResult run_scenario_file(Middleware& mw, const std::filesystem::path& path,
                                 std::uint64_t seed, std::ostream* log) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kNotFound, "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return run_scenario(mw, text.str(), seed, log);
}

}  // namespace hic
