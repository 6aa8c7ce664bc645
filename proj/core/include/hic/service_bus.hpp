#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hic/clock.hpp"
#include "hic/error.hpp"
#include "hic/param_spec.hpp"

namespace hic {

using RegistrationId = std::uint64_t;

struct MethodDescriptor {
  std::string name;
  std::vector<ParamSpec> params;
  std::vector<ParamSpec> results;
};

struct ServiceDescriptor {
  std::string name;
  std::vector<MethodDescriptor> methods;
  std::string endpoint = "inproc";
  Ticks lease = 30;

  const MethodDescriptor* find_method(const std::string& method) const;
};

// A failed invocation. Faults raised by a handler carry code
// kApplicationFault and the handler's own error name in `app_code`.
struct Fault {
  Errc code = Errc::kApplicationFault;
  std::string message;
  std::string app_code;

  nlohmann::json to_json() const;
  static Fault from_json(const nlohmann::json& j);
};

struct InvokeResult {
  std::optional<Fault> fault;
  nlohmann::json payload = nlohmann::json::object();

  bool ok() const { return !fault.has_value(); }
  static InvokeResult success(nlohmann::json payload) {
    return {std::nullopt, std::move(payload)};
  }
  static InvokeResult failure(Fault f) { return {std::move(f), nullptr}; }
};

struct CallContext {
  std::string caller;
};

// Handlers return the result object or throw; hic::Error and any other
// std::exception become application faults.
using Handler = std::function<nlohmann::json(
    const std::string& method, const nlohmann::json& params,
    const CallContext& ctx)>;

struct TraceEntry {
  std::uint64_t index = 0;
  std::string caller;
  std::string service;
  std::string method;
  std::string status;  // "pending", "ok", or the fault code name
  Ticks at = 0;

  nlohmann::json to_json() const;
};

class ServiceBus {
 public:
  explicit ServiceBus(std::shared_ptr<const Clock> clock);
  ServiceBus(const ServiceBus&) = delete;
  ServiceBus& operator=(const ServiceBus&) = delete;

  // Throws Error(kDuplicateName) when the name is live, Error(kBadParams)
  // for duplicate method names or parameter ids.
  RegistrationId register_service(ServiceDescriptor descriptor, Handler handler);
  void deregister(RegistrationId id);

  // Throws Error(kNotFound).
  ServiceDescriptor lookup(const std::string& name) const;
  // Returns the new expiry. Throws Error(kUnknownRegistration).
  Ticks renew_lease(RegistrationId id);
  // Live service names, sorted.
  std::vector<std::string> list_services() const;

  // Never throws for domain failures; every call is traced.
  InvokeResult invoke(const std::string& caller, const std::string& service,
                      const std::string& method, const nlohmann::json& params);

  std::vector<TraceEntry> call_trace(std::size_t since = 0) const;
  std::size_t trace_size() const;

  const Clock& clock() const { return *clock_; }

 private:
  struct Registration {
    RegistrationId id;
    ServiceDescriptor descriptor;
    std::shared_ptr<Handler> handler;
    Ticks expires_at;
  };

  // Requires mutex_ held exclusively.
  void purge_expired_locked() const;
  const Registration* find_live_locked(const std::string& name) const;

  std::shared_ptr<const Clock> clock_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::string, Registration> by_name_;
  RegistrationId next_id_ = 1;

  mutable std::mutex trace_mutex_;
  std::vector<TraceEntry> trace_;
};

}  // namespace hic
