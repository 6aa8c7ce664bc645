#include "hic/interaction_container.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hic/error.hpp"

namespace hic {
namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(std::move(w));
  return out;
}

[[noreturn]] void config_error(const std::string& reason) {
  throw Error(Errc::kConfigError, "binding table: " + reason);
}

}  // namespace

std::string_view to_string(RawKind kind) {
  switch (kind) {
    case RawKind::kGesture: return "gesture";
    case RawKind::kClick: return "click";
    case RawKind::kText: return "text";
  }
  return "text";
}

RawKind raw_kind_from_string(std::string_view text) {
  if (text == "gesture") return RawKind::kGesture;
  if (text == "click") return RawKind::kClick;
  if (text == "text") return RawKind::kText;
  throw Error(Errc::kBadParams, "unknown raw action kind '" + std::string(text) + "'");
}

BindingTable BindingTable::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("bindings") || !doc.at("bindings").is_array()) {
    config_error("expected {\"bindings\": [...]}");
  }
  BindingTable table;
  std::set<std::pair<RawKind, std::string>> keys;
  std::set<std::string> events;
  for (const auto& b : doc.at("bindings")) {
    ActionBinding binding;
    try {
      binding.kind = raw_kind_from_string(b.at("kind").get<std::string>());
      binding.command = b.at("command").get<std::string>();
      binding.event_id = b.at("event").get<std::string>();
      binding.params = b.value("params", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
      config_error(e.what());
    } catch (const Error& e) {
      config_error(e.what());
    }
    if (binding.command.empty() || split_words(binding.command).size() != 1) {
      config_error("command must be a single word: '" + binding.command + "'");
    }
    if (!keys.emplace(binding.kind, binding.command).second) {
      config_error("duplicate binding for " + std::string(to_string(binding.kind)) + " '" +
                   binding.command + "'");
    }
    if (!events.insert(binding.event_id).second) {
      config_error("event '" + binding.event_id + "' bound twice");
    }
    table.bindings_.push_back(std::move(binding));
  }
  return table;
}

BindingTable BindingTable::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigError, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    config_error(e.what());
  }
}

EncodedAction BindingTable::encode(const RawAction& raw) const {
  const auto words = split_words(raw.payload);
  if (words.empty()) throw Error(Errc::kUnboundAction, "empty terminal action");
  for (const auto& b : bindings_) {
    if (b.kind != raw.kind || b.command != words.front()) continue;
    EncodedAction out{b.event_id, nlohmann::json::object()};
    for (std::size_t i = 0; i < b.params.size() && i + 1 < words.size(); ++i) {
      std::string value = words[i + 1];
      if (i + 1 == b.params.size()) {
        for (std::size_t k = i + 2; k < words.size(); ++k) value += " " + words[k];
      }
      out.params[b.params[i]] = std::move(value);
    }
    return out;
  }
  throw Error(Errc::kUnboundAction, std::string(to_string(raw.kind)) + " '" + words.front() +
                                        "' has no binding");
}

RawAction BindingTable::decode(const EncodedAction& action) const {
  for (const auto& b : bindings_) {
    if (b.event_id != action.event_id) continue;
    RawAction raw{b.kind, b.command};
    for (const auto& p : b.params) {
      if (!action.params.contains(p)) break;
      const auto& v = action.params.at(p);
      raw.payload += " " + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    return raw;
  }
  throw Error(Errc::kUnboundAction, "event '" + action.event_id + "' has no binding");
}

InteractionContainer::InteractionContainer(ServiceBus& bus, const SessionDirectory& sessions,
                                           const ProfileStore& profiles,
                                           std::string service_name, std::string core_service)
    : bus_(bus), sessions_(sessions), profiles_(profiles),
      service_name_(std::move(service_name)), core_service_(std::move(core_service)) {}

void InteractionContainer::set_bindings(const std::string& app_id, BindingTable table) {
  std::unique_lock lock(mutex_);
  bindings_.insert_or_assign(app_id, std::move(table));
}

RenderedView InteractionContainer::display_request(const std::string& session_id,
                                                   const DisplayPayload& payload) {
  const auto target = sessions_.binding(session_id);
  if (!target) throw Error(Errc::kUnknownSession, session_id);
  const std::string actor = target->actor_id;
  RenderedView view = render(payload, target->capability, [&](const std::string& value) {
    return profiles_.has_user(actor) ? profiles_.personal_name(actor, value) : value;
  });
  std::unique_lock lock(mutex_);
  auto& screen = screens_[target->container_id];
  screen.last = view;
  ++screen.count;
  return view;
}

Notification InteractionContainer::capture_action(const std::string& session_id,
                                                  const RawAction& raw) {
  const auto target = sessions_.binding(session_id);
  if (!target) throw Error(Errc::kUnknownSession, session_id);
  EncodedAction encoded;
  {
    std::shared_lock lock(mutex_);
    auto it = bindings_.find(target->app_id);
    if (it == bindings_.end()) {
      throw Error(Errc::kUnboundAction, "no binding table for application '" + target->app_id + "'");
    }
    encoded = it->second.encode(raw);
  }
  const nlohmann::json action{{"actor_id", target->actor_id},
                              {"session_id", session_id},
                              {"event_id", encoded.event_id},
                              {"params", encoded.params}};
  const InvokeResult r =
      bus_.invoke(service_name_, core_service_, "InteractionRequest", {{"action", action}});
  if (!r.ok()) {
    Errc code = r.fault->code;
    if (!r.fault->app_code.empty()) errc_from_string(r.fault->app_code, code);
    throw Error(code, r.fault->message);
  }
  return Notification::from_json(r.payload.at("notification"));
}

std::optional<RenderedView> InteractionContainer::last_view(const ComponentId& container_id) const {
  std::shared_lock lock(mutex_);
  auto it = screens_.find(container_id);
  if (it == screens_.end()) return std::nullopt;
  return it->second.last;
}

std::size_t InteractionContainer::views_rendered(const ComponentId& container_id) const {
  std::shared_lock lock(mutex_);
  auto it = screens_.find(container_id);
  return it == screens_.end() ? 0 : it->second.count;
}

ServiceDescriptor InteractionContainer::descriptor(const std::string& name) {
  ServiceDescriptor d;
  d.name = name;
  d.methods = {
      {"DisplayRequest",
       {{"session_id", "string"}, {"payload", "hic.DisplayPayload"}},
       {{"rendered", "hic.RenderedView"}}},
      {"CaptureAction",
       {{"session_id", "string"}, {"kind", "string"}, {"payload", "string"}},
       {{"notification", "hic.Notification"}}},
  };
  return d;
}

RegistrationId InteractionContainer::register_service() {
  return bus_.register_service(
      descriptor(service_name_),
      [this](const std::string& method, const nlohmann::json& params, const CallContext&) {
        return handle(method, params);
      });
}

nlohmann::json InteractionContainer::handle(const std::string& method,
                                            const nlohmann::json& params) {
  const auto& sid = params.at("session_id");
  if (!sid.is_string()) throw Error(Errc::kBadParams, "'session_id' must be a string");
  if (method == "DisplayRequest") {
    return {{"rendered", view_to_json(display_request(sid.get<std::string>(),
                                                      payload_from_json(params.at("payload"))))}};
  }
  if (method == "CaptureAction") {
    if (!params.at("kind").is_string() || !params.at("payload").is_string()) {
      throw Error(Errc::kBadParams, "'kind' and 'payload' must be strings");
    }
    RawAction raw{raw_kind_from_string(params.at("kind").get<std::string>()),
                  params.at("payload").get<std::string>()};
    return {{"notification", capture_action(sid.get<std::string>(), raw).to_json()}};
  }
  throw Error(Errc::kUnknownMethod, method);
}

}  // namespace hic
