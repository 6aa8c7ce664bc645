#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hic/interaction_core.hpp"
#include "hic/presentation.hpp"
#include "hic/profile_store.hpp"
#include "hic/service_bus.hpp"

namespace hic::flightops {

inline constexpr std::string_view kBipPrefix = "hic.im.business.cofos.bip.common.";
inline constexpr std::string_view kAppId = "cofos";

enum class FlightStatus { kScheduled, kBoarding, kDeparted, kDelayed, kCancelled };
std::string_view to_string(FlightStatus status);
FlightStatus flight_status_from_string(std::string_view text);

struct Flight {
  std::string flight_id;
  std::string airline;
  std::string destination;
  std::string scheduled_time;  // "HH:MM"
  std::string estimated_time;
  std::string gate;
  FlightStatus status = FlightStatus::kScheduled;
  bool alert = false;  // derived: delayed or cancelled

  friend bool operator==(const Flight&, const Flight&) = default;
};

nlohmann::json flight_to_json(const Flight& f);
Flight flight_from_json(const nlohmann::json& j);

// Field name -> exact value. Filterable: every Flight field.
using FlightFilter = std::map<std::string, std::string>;
// Field name -> new value. Patchable: every field except flight_id and alert.
using FlightPatch = std::map<std::string, std::string>;

// Applies a patch to a copy; throws Error(kBadParams) for unknown or
// read-only fields and invalid status values. Recomputes the alert flag.
Flight apply_patch(Flight flight, const FlightPatch& patch);
// Accepts {"field": "value"} or "field=value field=value".
FlightPatch patch_from_json(const nlohmann::json& j);

// Flight database with rights-checked updates.
class FlightStore {
 public:
  using UpdateListener = std::function<void(const Flight&)>;

  explicit FlightStore(const ProfileStore& profiles);

  void load_json(const nlohmann::json& flights);
  void load_file(const std::filesystem::path& path);
  void save_snapshot(const std::filesystem::path& path) const;

  // Throws Error(kBadFilter) for an unknown field. Sorted by flight_id.
  std::vector<Flight> query(const FlightFilter& filter) const;
  std::vector<Flight> all() const { return query({}); }

  // Needs "flight.update"; throws Error(kRightDenied), Error(kUnknownFlight)
  // or Error(kBadParams). Calls the update listener exactly once on success.
  Flight update_flight(const std::string& actor_id, const std::string& flight_id,
                       const FlightPatch& patch);
  // The application's own feed; no rights check.
  Flight apply_feed(const std::string& flight_id, const FlightPatch& patch);

  void set_update_listener(UpdateListener listener);
  std::size_t update_count() const;

 private:
  Flight apply_locked(const std::string& flight_id, const FlightPatch& patch);

  const ProfileStore& profiles_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Flight> flights_;
  std::size_t updates_ = 0;
  UpdateListener listener_;
};

enum class TemplateScope { kGeneral, kSpecific };

struct MessageTemplate {
  std::string template_id;
  TemplateScope scope = TemplateScope::kGeneral;
  std::string body;  // "{name}" slots

  // Placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
  // Missing placeholders stay as "{name}".
  std::string fill(const std::map<std::string, std::string>& fields) const;
};

class TemplateStore {
 public:
  // Throws Error(kConfigError) for repeated ids or repeated placeholders.
  void load_json(const nlohmann::json& templates);
  void load_file(const std::filesystem::path& path);

  const MessageTemplate* find(const std::string& template_id) const;
  std::vector<MessageTemplate> list(TemplateScope scope) const;

 private:
  std::map<std::string, MessageTemplate> templates_;
};

struct Message {
  std::uint64_t seq = 0;
  std::string author;
  std::string template_id;
  std::string flight_id;  // empty when the message is not about a flight
  std::string text;
};

// Flight board columns: flight_id, status, estimated_time, gate,
// scheduled_time, airline, destination, alert (priority order).
DisplayPayload flight_board(const std::vector<Flight>& flights);

// COFOSServ: the flight-operations application, its BIP handlers and its bus
// service. Drafts are kept per session.
class CofosApp {
 public:
  CofosApp(ServiceBus& bus, const ProfileStore& profiles, std::string service_name = "COFOSServ",
           std::string core_service = "IMServ");

  FlightStore& flights() { return flights_; }
  const FlightStore& flights() const { return flights_; }
  TemplateStore& templates() { return templates_; }

  // Binds every handler under its dotted method id.
  void register_bips(InteractionCore& core);
  // The handlers as (method id, handler) pairs.
  std::vector<std::pair<std::string, BipHandler>> bip_handlers();

  RegistrationId register_service();
  static ServiceDescriptor descriptor(const std::string& name = "COFOSServ");

  // Routes accepted flight updates to IMServ.BusinessRequest.
  void forward_updates_to_core();

  DisplayPayload board() const;
  // Board joined with per-flight message counts ("msgs" column).
  DisplayPayload board_with_message_counts() const;

  std::vector<Message> messages() const;
  bool has_draft(const std::string& session_id) const;

 private:
  struct Draft {
    std::string template_id;
    std::map<std::string, std::string> fields;
  };

  BipOutcome browse(TemplateScope scope, const char* positive_key);
  BipOutcome compose(const BipContext& ctx, const nlohmann::json& params, TemplateScope scope);
  BipOutcome cancel(const BipContext& ctx);
  BipOutcome read_message(const BipContext& ctx);
  BipOutcome update(const BipContext& ctx, const nlohmann::json& params);
  nlohmann::json handle(const nlohmann::json& params);

  ServiceBus& bus_;
  const ProfileStore& profiles_;
  std::string service_name_;
  std::string core_service_;
  FlightStore flights_;
  TemplateStore templates_;

  mutable std::mutex mutex_;
  std::map<std::string, Draft> drafts_;
  std::vector<Message> messages_;
  std::map<std::string, std::size_t> read_cursor_;  // actor -> next message index
};

// Seeded random mutations standing in for the live flight database feed.
class FlightFeed {
 public:
  FlightFeed(FlightStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  // Applies one mutation and returns the updated flight (none when empty).
  std::optional<Flight> step();

 private:
  FlightStore& store_;
  std::mt19937_64 rng_;
};

}  // namespace hic::flightops
