#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hic/clock.hpp"
#include "hic/event_heap.hpp"
#include "hic/presentation.hpp"
#include "hic/profile_store.hpp"
#include "hic/service_bus.hpp"
#include "hic/task_model.hpp"

namespace hic {

struct BipContext {
  std::string session_id;
  std::string actor_id;
  std::string app_id;
  EventId event_id;
};

struct BipOutcome {
  Outcome branch = Outcome::kPositive;
  nlohmann::json out_params = nlohmann::json::object();
};

// Application primitive bound to a task-model method id. Throwing means the
// BIP could not be executed.
using BipHandler = std::function<BipOutcome(const BipContext&, const nlohmann::json& params)>;

// One encoded behavior. The actor may be a user or an application; the core
// treats both the same way.
struct ActionData {
  std::string actor_id;  // empty: the session's actor
  std::string session_id;
  EventId event_id;
  nlohmann::json params = nlohmann::json::object();
};

enum class RequestStatus { kAccepted, kRejected };
std::string_view to_string(RequestStatus status);

struct HistoryRecord {
  EventId event_id;
  RequestStatus status = RequestStatus::kRejected;
  std::optional<Outcome> outcome;
  nlohmann::json out_params = nlohmann::json::object();
  StateId state_after;
  std::string reason_code;  // empty when accepted
  Ticks at = 0;
};

struct Session {
  std::string session_id;
  std::string actor_id;
  std::string app_id;
  std::string class_id;
  std::string model_id;
  StateId current_state;
  std::vector<HistoryRecord> history;
  ComponentId container_id;
  TerminalCapability capability;
};

struct Notification {
  std::string session_id;
  std::string actor_id;
  EventId event_id;
  RequestStatus status = RequestStatus::kRejected;
  std::optional<Outcome> outcome;
  nlohmann::json out_params = nlohmann::json::object();
  StateId previous_state;
  StateId new_state;
  std::string reason_code;
  std::string reason;

  nlohmann::json to_json() const;
  static Notification from_json(const nlohmann::json& j);
};

// What a container needs to know about a session to render for it.
struct SessionBinding {
  std::string session_id;
  std::string actor_id;
  std::string app_id;
  ComponentId container_id;
  TerminalCapability capability;
};

class SessionDirectory {
 public:
  virtual ~SessionDirectory() = default;
  virtual std::optional<SessionBinding> binding(const std::string& session_id) const = 0;
};

struct CoreOptions {
  Ticks notification_ttl = 60;
  std::string service_name = "IMServ";
  std::string display_service = "ICServ";  // empty: heap notifications only
  CapabilityPresets presets;
};

// IMServ: sessions, the BIP registry and the interaction loop. Requests on
// one session are serialized; distinct sessions run concurrently.
class InteractionCore final : public SessionDirectory {
 public:
  InteractionCore(EventHeap& heap, ServiceBus& bus, const ProfileStore& profiles,
                  std::shared_ptr<const Clock> clock, CoreOptions options = {});
  InteractionCore(const InteractionCore&) = delete;
  InteractionCore& operator=(const InteractionCore&) = delete;

  void add_task_model(std::shared_ptr<const TaskModel> model);
  bool has_task_model(const std::string& model_id) const;
  std::shared_ptr<const TaskModel> task_model(const std::string& model_id) const;

  // Throws Error(kDuplicateBip).
  void register_bip(const std::string& method_id, BipHandler handler);
  bool has_bip(const std::string& method_id) const;
  void register_app(const std::string& app_id);

  // Throws Error(kUnknownUser) or Error(kUnknownTaskModel).
  Session open_session(const std::string& actor_id, const std::string& app_id,
                       const ComponentId& container_id,
                       const TerminalCapability& capability);
  Session open_session(const std::string& actor_id, const std::string& app_id,
                       const ComponentId& container_id);

  // Domain failures come back as rejected notifications; only an unknown
  // session throws (Error(kUnknownSession)).
  Notification interaction_request(const ActionData& action);

  // Pushes `info` ({"data_class", "payload"}) to every open session whose
  // actor holds "<data_class>.read". Returns the number of sessions notified.
  // Throws Error(kUnknownApp) or Error(kBadParams).
  std::size_t business_request(const std::string& app_id, const nlohmann::json& info);

  // Rebinds a session to a new container and capability, keeping state and
  // history. Throws Error(kUnknownSession).
  Session resume_session(const std::string& session_id, const ComponentId& container_id,
                         const TerminalCapability& capability);

  Session get_session(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;
  std::set<EventId> session_allowed_events(const std::string& session_id) const;

  std::optional<SessionBinding> binding(const std::string& session_id) const override;

  // Heap notifications posted so far, oldest first.
  std::vector<nlohmann::json> notification_log(std::size_t since = 0) const;
  std::size_t notification_count() const;

  static ServiceDescriptor descriptor(const std::string& name = "IMServ");
  // Registers the IMServ service on the bus.
  RegistrationId register_service();

  const CoreOptions& options() const { return options_; }

 private:
  struct SessionSlot {
    std::mutex request_mutex;
    mutable std::mutex data_mutex;
    Session session;
  };

  std::shared_ptr<SessionSlot> slot(const std::string& session_id) const;
  void notify(const SessionBinding& target, const Notification& n);
  void deliver(const SessionBinding& target, FieldMap fields, const DisplayPayload& payload);
  nlohmann::json handle(const std::string& method, const nlohmann::json& params,
                        const CallContext& ctx);

  EventHeap& heap_;
  ServiceBus& bus_;
  const ProfileStore& profiles_;
  std::shared_ptr<const Clock> clock_;
  CoreOptions options_;

  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<const TaskModel>> models_;
  std::map<std::string, BipHandler> bips_;
  std::set<std::string> apps_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  std::uint64_t next_session_ = 1;

  mutable std::mutex log_mutex_;
  std::vector<nlohmann::json> notification_log_;
};

nlohmann::json session_to_json(const Session& session);
nlohmann::json history_to_json(const HistoryRecord& record);

}  // namespace hic
