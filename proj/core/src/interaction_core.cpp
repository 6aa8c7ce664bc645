#include "hic/interaction_core.hpp"

#include <algorithm>

#include "hic/error.hpp"

namespace hic {
namespace {

nlohmann::json optional_outcome(const std::optional<Outcome>& o) {
  return o ? nlohmann::json(to_string(*o)) : nlohmann::json(nullptr);
}

std::string display_value(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

// Two-column field/value table describing a request outcome.
DisplayPayload notification_payload(const Notification& n) {
  DisplayPayload p;
  p.title = "IMServ " + n.event_id + ": " + std::string(to_string(n.status));
  p.columns = {{"field", "Field", 0, 16}, {"value", "Value", 1, 40}};
  p.rows.push_back({{"field", "status"}, {"value", std::string(to_string(n.status))}});
  p.rows.push_back({{"field", "state"}, {"value", n.new_state}});
  if (n.outcome) p.rows.push_back({{"field", "outcome"}, {"value", std::string(to_string(*n.outcome))}});
  for (const auto& [k, v] : n.out_params.items()) {
    p.rows.push_back({{"field", k}, {"value", display_value(v)}});
  }
  if (n.status == RequestStatus::kRejected) {
    p.alert_rows.insert(p.rows.size());
    p.rows.push_back({{"field", "reason"}, {"value", n.reason_code}});
  }
  return p;
}

const std::string& require_string(const nlohmann::json& params, const char* key) {
  if (!params.contains(key) || !params.at(key).is_string()) {
    throw Error(Errc::kBadParams, std::string("'") + key + "' must be a string");
  }
  return params.at(key).get_ref<const std::string&>();
}

}  // namespace

std::string_view to_string(RequestStatus status) {
  return status == RequestStatus::kAccepted ? "accepted" : "rejected";
}

nlohmann::json Notification::to_json() const {
  return {{"session_id", session_id},   {"actor_id", actor_id},
          {"event_id", event_id},       {"status", to_string(status)},
          {"outcome", optional_outcome(outcome)},
          {"out_params", out_params},   {"previous_state", previous_state},
          {"new_state", new_state},     {"reason_code", reason_code},
          {"reason", reason}};
}

Notification Notification::from_json(const nlohmann::json& j) {
  Notification n;
  n.session_id = j.at("session_id").get<std::string>();
  n.actor_id = j.at("actor_id").get<std::string>();
  n.event_id = j.at("event_id").get<std::string>();
  n.status = j.at("status").get<std::string>() == "accepted" ? RequestStatus::kAccepted
                                                              : RequestStatus::kRejected;
  if (!j.at("outcome").is_null()) n.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  n.out_params = j.at("out_params");
  n.previous_state = j.at("previous_state").get<std::string>();
  n.new_state = j.at("new_state").get<std::string>();
  n.reason_code = j.at("reason_code").get<std::string>();
  n.reason = j.at("reason").get<std::string>();
  return n;
}

nlohmann::json history_to_json(const HistoryRecord& r) {
  return {{"event_id", r.event_id},       {"status", to_string(r.status)},
          {"outcome", optional_outcome(r.outcome)},
          {"out_params", r.out_params},   {"state_after", r.state_after},
          {"reason_code", r.reason_code}, {"at", r.at}};
}

nlohmann::json session_to_json(const Session& s) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : s.history) history.push_back(history_to_json(h));
  return {{"session_id", s.session_id},       {"actor_id", s.actor_id},
          {"app_id", s.app_id},               {"class_id", s.class_id},
          {"model_id", s.model_id},           {"current_state", s.current_state},
          {"container_id", s.container_id},   {"capability", capability_to_json(s.capability)},
          {"history", std::move(history)}};
}

InteractionCore::InteractionCore(EventHeap& heap, ServiceBus& bus, const ProfileStore& profiles,
                                 std::shared_ptr<const Clock> clock, CoreOptions options)
    : heap_(heap), bus_(bus), profiles_(profiles), clock_(std::move(clock)),
      options_(std::move(options)) {}

void InteractionCore::add_task_model(std::shared_ptr<const TaskModel> model) {
  std::unique_lock lock(registry_mutex_);
  std::string id = model->model_id;
  models_.insert_or_assign(std::move(id), std::move(model));
}

bool InteractionCore::has_task_model(const std::string& model_id) const {
  std::shared_lock lock(registry_mutex_);
  return models_.count(model_id) > 0;
}

std::shared_ptr<const TaskModel> InteractionCore::task_model(const std::string& model_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = models_.find(model_id);
  if (it == models_.end()) throw Error(Errc::kUnknownTaskModel, model_id);
  return it->second;
}

void InteractionCore::register_bip(const std::string& method_id, BipHandler handler) {
  std::unique_lock lock(registry_mutex_);
  if (!bips_.emplace(method_id, std::move(handler)).second) {
    throw Error(Errc::kDuplicateBip, method_id);
  }
}

bool InteractionCore::has_bip(const std::string& method_id) const {
  std::shared_lock lock(registry_mutex_);
  return bips_.count(method_id) > 0;
}

void InteractionCore::register_app(const std::string& app_id) {
  std::unique_lock lock(registry_mutex_);
  apps_.insert(app_id);
}

Session InteractionCore::open_session(const std::string& actor_id, const std::string& app_id,
                                      const ComponentId& container_id) {
  return open_session(actor_id, app_id, container_id, options_.presets.get(TerminalKind::kPc));
}

Session InteractionCore::open_session(const std::string& actor_id, const std::string& app_id,
                                      const ComponentId& container_id,
                                      const TerminalCapability& capability) {
  const ClassProfile cls = profiles_.class_of(actor_id);
  const auto model = task_model(cls.task_model_id);
  if (!model->find_state(model->starting_state)) {
    throw Error(Errc::kUnknownTaskModel,
                "model '" + model->model_id + "' has no valid starting state");
  }

  auto slot = std::make_shared<SessionSlot>();
  Session& s = slot->session;
  s.actor_id = actor_id;
  s.app_id = app_id;
  s.class_id = cls.class_id;
  s.model_id = model->model_id;
  s.current_state = model->starting_state;
  s.container_id = container_id;
  s.capability = capability;

  std::unique_lock lock(sessions_mutex_);
  s.session_id = "s-" + std::to_string(next_session_++);
  sessions_.emplace(s.session_id, slot);
  return s;
}

std::shared_ptr<InteractionCore::SessionSlot> InteractionCore::slot(
    const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::kUnknownSession, session_id);
  return it->second;
}

Notification InteractionCore::interaction_request(const ActionData& action) {
  auto sl = slot(action.session_id);
  std::lock_guard request_lock(sl->request_mutex);

  Session snapshot;
  {
    std::lock_guard data_lock(sl->data_mutex);
    snapshot = sl->session;
  }
  const std::string actor = action.actor_id.empty() ? snapshot.actor_id : action.actor_id;

  Notification n;
  n.session_id = snapshot.session_id;
  n.actor_id = actor;
  n.event_id = action.event_id;
  n.previous_state = snapshot.current_state;
  n.new_state = snapshot.current_state;

  auto reject = [&](std::string code, std::string reason) {
    n.status = RequestStatus::kRejected;
    n.reason_code = std::move(code);
    n.reason = std::move(reason);
  };

  // Profile: the actor must be known and of the session's class; personal
  // names for actions resolve to the canonical event id.
  std::optional<ClassProfile> cls;
  if (!profiles_.has_user(actor)) {
    reject("UnknownUser", "actor '" + actor + "' has no profile");
  } else {
    cls = profiles_.class_of(actor);
    if (cls->class_id != snapshot.class_id) {
      reject("ActorClassMismatch", "actor class '" + cls->class_id +
                                       "' differs from session class '" + snapshot.class_id + "'");
    } else {
      n.event_id = profiles_.resolve_alias(actor, action.event_id);
    }
  }

  const auto model = task_model(snapshot.model_id);
  const EventSpec* spec = nullptr;
  if (n.reason_code.empty()) {
    const State* st = model->find_state(snapshot.current_state);
    spec = st ? st->find_event(n.event_id) : nullptr;
    if (!spec) {
      reject("EventNotAllowed", "event '" + n.event_id + "' is not allowed in state '" +
                                    snapshot.current_state + "'");
    }
  }
  if (n.reason_code.empty() &&
      profiles_.check_right(actor, spec->call.bip_method) == Decision::kDeny) {
    reject("RightDenied", "actor '" + actor + "' may not run " + spec->call.bip_method);
  }
  if (n.reason_code.empty()) {
    if (!action.params.is_object()) {
      reject("BadParams", "action params must be an object");
    } else {
      for (const auto& p : spec->in_params) {
        if (!action.params.contains(p.id)) {
          reject("BadParams", "missing in_param '" + p.id + "'");
          break;
        }
      }
    }
  }
  BipHandler handler;
  if (n.reason_code.empty()) {
    std::shared_lock lock(registry_mutex_);
    auto it = bips_.find(spec->call.bip_method);
    if (it == bips_.end()) {
      reject("UnboundBip", "no handler bound to " + spec->call.bip_method);
    } else {
      handler = it->second;
    }
  }
  if (n.reason_code.empty()) {
    try {
      BipOutcome outcome = handler(
          BipContext{snapshot.session_id, actor, snapshot.app_id, n.event_id}, action.params);
      const Branch& branch = spec->call.branch(outcome.branch);
      if (!outcome.out_params.is_object()) {
        throw Error(Errc::kApplicationFault, "out_params must be an object");
      }
      for (const auto& [k, v] : outcome.out_params.items()) {
        const bool declared = std::any_of(branch.out_params.begin(), branch.out_params.end(),
                                          [&](const ParamSpec& p) { return p.id == k; });
        if (!declared) {
          throw Error(Errc::kApplicationFault, "undeclared out_param '" + k + "' on " +
                                                   std::string(to_string(outcome.branch)) +
                                                   " branch");
        }
      }
      n.status = RequestStatus::kAccepted;
      n.outcome = outcome.branch;
      n.out_params = std::move(outcome.out_params);
      n.new_state = branch.next_state;
    } catch (const std::exception& e) {
      reject("BipFault", e.what());
    }
  }

  HistoryRecord record{n.event_id, n.status,      n.outcome,    n.out_params,
                       n.new_state, n.reason_code, clock_->now()};
  SessionBinding target;
  {
    std::lock_guard data_lock(sl->data_mutex);
    sl->session.current_state = n.new_state;
    sl->session.history.push_back(std::move(record));
    target = {sl->session.session_id, sl->session.actor_id, sl->session.app_id, sl->session.container_id,
              sl->session.capability};
  }
  notify(target, n);
  return n;
}

void InteractionCore::notify(const SessionBinding& target, const Notification& n) {
  FieldMap fields{{"kind", std::string("interaction")},
                  {"session_id", n.session_id},
                  {"actor_id", n.actor_id},
                  {"event_id", n.event_id},
                  {"status", std::string(to_string(n.status))},
                  {"outcome", n.outcome ? std::string(to_string(*n.outcome)) : std::string()},
                  {"previous_state", n.previous_state},
                  {"new_state", n.new_state},
                  {"reason_code", n.reason_code},
                  {"out_params", n.out_params.dump()}};
  deliver(target, std::move(fields), notification_payload(n));
}

void InteractionCore::deliver(const SessionBinding& target, FieldMap fields,
                              const DisplayPayload& payload) {
  Event e;
  e.type = "notification";
  e.source = options_.service_name;
  e.targets = {target.container_id};
  e.ttl = options_.notification_ttl;
  e.fields = std::move(fields);
  e.fields["container_id"] = target.container_id;
  {
    // Post and log under one lock so the log mirrors heap order.
    std::lock_guard lock(log_mutex_);
    e.seq = heap_.post(e);
    e.posted_at = heap_.now();
    notification_log_.push_back(event_to_json(e));
  }
  if (!options_.display_service.empty()) {
    bus_.invoke(options_.service_name, options_.display_service, "DisplayRequest",
                {{"session_id", target.session_id}, {"payload", payload_to_json(payload)}});
  }
}

std::size_t InteractionCore::business_request(const std::string& app_id,
                                              const nlohmann::json& info) {
  {
    std::shared_lock lock(registry_mutex_);
    if (!apps_.count(app_id)) throw Error(Errc::kUnknownApp, app_id);
  }
  if (!info.is_object()) throw Error(Errc::kBadParams, "info must be an object");
  const std::string& data_class = require_string(info, "data_class");
  if (!info.contains("payload")) throw Error(Errc::kBadParams, "info lacks 'payload'");
  const DisplayPayload payload = payload_from_json(info.at("payload"));
  const std::string permission = data_class + ".read";

  std::vector<std::shared_ptr<SessionSlot>> slots;
  {
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [id, s] : sessions_) slots.push_back(s);
  }
  std::size_t delivered = 0;
  for (const auto& sl : slots) {
    SessionBinding target;
    {
      std::lock_guard data_lock(sl->data_mutex);
      target = {sl->session.session_id, sl->session.actor_id, sl->session.app_id, sl->session.container_id,
                sl->session.capability};
    }
    if (profiles_.check_right(target.actor_id, permission) != Decision::kAllow) continue;
    deliver(target,
            FieldMap{{"kind", std::string("business")},
                     {"session_id", target.session_id},
                     {"actor_id", target.actor_id},
                     {"app_id", app_id},
                     {"data_class", data_class},
                     {"payload", payload_to_json(payload).dump()}},
            payload);
    ++delivered;
  }
  return delivered;
}

Session InteractionCore::resume_session(const std::string& session_id,
                                        const ComponentId& container_id,
                                        const TerminalCapability& capability) {
  auto sl = slot(session_id);
  std::lock_guard data_lock(sl->data_mutex);
  sl->session.container_id = container_id;
  sl->session.capability = capability;
  return sl->session;
}

Session InteractionCore::get_session(const std::string& session_id) const {
  auto sl = slot(session_id);
  std::lock_guard data_lock(sl->data_mutex);
  return sl->session;
}

std::vector<std::string> InteractionCore::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::set<EventId> InteractionCore::session_allowed_events(const std::string& session_id) const {
  const Session s = get_session(session_id);
  return allowed_events(*task_model(s.model_id), s.current_state);
}

std::optional<SessionBinding> InteractionCore::binding(const std::string& session_id) const {
  std::shared_ptr<SessionSlot> sl;
  {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return std::nullopt;
    sl = it->second;
  }
  std::lock_guard data_lock(sl->data_mutex);
  return SessionBinding{sl->session.session_id, sl->session.actor_id, sl->session.app_id, sl->session.container_id,
                        sl->session.capability};
}

std::vector<nlohmann::json> InteractionCore::notification_log(std::size_t since) const {
  std::lock_guard lock(log_mutex_);
  if (since >= notification_log_.size()) return {};
  return {notification_log_.begin() + static_cast<std::ptrdiff_t>(since),
          notification_log_.end()};
}

std::size_t InteractionCore::notification_count() const {
  std::lock_guard lock(log_mutex_);
  return notification_log_.size();
}

ServiceDescriptor InteractionCore::descriptor(const std::string& name) {
  ServiceDescriptor d;
  d.name = name;
  d.methods = {
      {"InteractionRequest", {{"action", "hic.ActionData"}}, {{"notification", "hic.Notification"}}},
      {"BusinessRequest", {{"app_id", "string"}, {"info", "hic.BusinessInfo"}}, {{"delivered", "int"}}},
      {"OpenSession",
       {{"actor_id", "string"}, {"app_id", "string"}, {"container_id", "string"}},
       {{"session", "hic.Session"}}},
      {"ResumeSession",
       {{"session_id", "string"}, {"container_id", "string"}, {"capability", "hic.TerminalCapability"}},
       {{"session", "hic.Session"}}},
      {"AllowedEvents", {{"session_id", "string"}}, {{"state", "string"}, {"events", "list<string>"}}},
      {"GetSession", {{"session_id", "string"}}, {{"session", "hic.Session"}}},
  };
  return d;
}

RegistrationId InteractionCore::register_service() {
  return bus_.register_service(
      descriptor(options_.service_name),
      [this](const std::string& method, const nlohmann::json& params, const CallContext& ctx) {
        return handle(method, params, ctx);
      });
}

nlohmann::json InteractionCore::handle(const std::string& method, const nlohmann::json& params,
                                       const CallContext&) {
  if (method == "InteractionRequest") {
    const auto& a = params.at("action");
    if (!a.is_object()) throw Error(Errc::kBadParams, "'action' must be an object");
    ActionData action;
    action.actor_id = a.value("actor_id", "");
    action.session_id = require_string(a, "session_id");
    action.event_id = require_string(a, "event_id");
    action.params = a.value("params", nlohmann::json::object());
    return {{"notification", interaction_request(action).to_json()}};
  }
  if (method == "BusinessRequest") {
    return {{"delivered", business_request(require_string(params, "app_id"), params.at("info"))}};
  }
  if (method == "OpenSession") {
    const TerminalCapability cap =
        params.contains("capability")
            ? capability_from_json(params.at("capability"), options_.presets)
            : options_.presets.get(TerminalKind::kPc);
    return {{"session", session_to_json(open_session(require_string(params, "actor_id"),
                                                     require_string(params, "app_id"),
                                                     require_string(params, "container_id"), cap))}};
  }
  if (method == "ResumeSession") {
    return {{"session",
             session_to_json(resume_session(
                 require_string(params, "session_id"), require_string(params, "container_id"),
                 capability_from_json(params.at("capability"), options_.presets)))}};
  }
  if (method == "AllowedEvents") {
    const std::string& id = require_string(params, "session_id");
    const Session s = get_session(id);
    return {{"state", s.current_state}, {"events", session_allowed_events(id)}};
  }
  if (method == "GetSession") {
    return {{"session", session_to_json(get_session(require_string(params, "session_id")))}};
  }
  throw Error(Errc::kUnknownMethod, method);
}

}  // namespace hic
