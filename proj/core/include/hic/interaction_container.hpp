#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hic/interaction_core.hpp"
#include "hic/presentation.hpp"
#include "hic/profile_store.hpp"
#include "hic/service_bus.hpp"

namespace hic {

enum class RawKind { kGesture, kClick, kText };
std::string_view to_string(RawKind kind);
RawKind raw_kind_from_string(std::string_view text);

// A terminal event before encoding. The payload's first word names the
// widget, gesture or text command; the remaining words are its arguments.
struct RawAction {
  RawKind kind = RawKind::kText;
  std::string payload;

  friend bool operator==(const RawAction&, const RawAction&) = default;
};

struct ActionBinding {
  RawKind kind = RawKind::kText;
  std::string command;
  EventId event_id;
  std::vector<std::string> params;  // positional; the last one takes the rest
};

struct EncodedAction {
  EventId event_id;
  nlohmann::json params = nlohmann::json::object();
};

// Declarative widget/command -> task event table, one per application.
// (kind, command) pairs and event ids are both unique, so the table is a
// bijection.
class BindingTable {
 public:
  BindingTable() = default;
  // {"bindings": [{"kind", "command", "event", "params": [...]}, ...]}.
  // Throws Error(kConfigError) on schema violations or ambiguity.
  static BindingTable from_json(const nlohmann::json& doc);
  static BindingTable load_file(const std::filesystem::path& path);

  // Throws Error(kUnboundAction).
  EncodedAction encode(const RawAction& raw) const;
  RawAction decode(const EncodedAction& action) const;

  const std::vector<ActionBinding>& bindings() const { return bindings_; }

 private:
  std::vector<ActionBinding> bindings_;
};

// ICServ: renders DisplayRequests for the terminals attached to sessions and
// forwards captured terminal actions to IMServ.
class InteractionContainer {
 public:
  InteractionContainer(ServiceBus& bus, const SessionDirectory& sessions,
                       const ProfileStore& profiles, std::string service_name = "ICServ",
                       std::string core_service = "IMServ");

  void set_bindings(const std::string& app_id, BindingTable table);

  // Throws Error(kUnknownSession) or Error(kMalformedPayload).
  RenderedView display_request(const std::string& session_id, const DisplayPayload& payload);

  // Encodes and forwards through IMServ.InteractionRequest. Throws
  // Error(kUnboundAction), Error(kUnknownSession), or the forwarded fault.
  Notification capture_action(const std::string& session_id, const RawAction& raw);

  // Last view rendered for a container and how many views it has received.
  std::optional<RenderedView> last_view(const ComponentId& container_id) const;
  std::size_t views_rendered(const ComponentId& container_id) const;

  static ServiceDescriptor descriptor(const std::string& name = "ICServ");
  RegistrationId register_service();

 private:
  nlohmann::json handle(const std::string& method, const nlohmann::json& params);

  ServiceBus& bus_;
  const SessionDirectory& sessions_;
  const ProfileStore& profiles_;
  std::string service_name_;
  std::string core_service_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, BindingTable> bindings_;
  struct Screen {
    RenderedView last;
    std::size_t count = 0;
  };
  std::map<ComponentId, Screen> screens_;
};

}  // namespace hic
