#include "hic/service_bus.hpp"

#include <algorithm>
#include <set>

namespace hic {

const MethodDescriptor* ServiceDescriptor::find_method(
    const std::string& method) const {
  for (const auto& m : methods) {
    if (m.name == method) return &m;
  }
  return nullptr;
}

nlohmann::json Fault::to_json() const {
  nlohmann::json j{{"code", to_string(code)}, {"message", message}};
  if (!app_code.empty()) j["app_code"] = app_code;
  return j;
}

Fault Fault::from_json(const nlohmann::json& j) {
  Fault f;
  f.code = Errc::kTransportError;
  if (!j.is_object()) {
    f.message = "malformed fault payload";
    return f;
  }
  Errc code;
  if (errc_from_string(j.value("code", ""), code)) f.code = code;
  f.message = j.value("message", "");
  f.app_code = j.value("app_code", "");
  return f;
}

nlohmann::json TraceEntry::to_json() const {
  return {{"index", index}, {"caller", caller}, {"service", service},
          {"method", method}, {"status", status}, {"at", at}};
}

ServiceBus::ServiceBus(std::shared_ptr<const Clock> clock)
    : clock_(std::move(clock)) {}

void ServiceBus::purge_expired_locked() const {
  const Ticks now = clock_->now();
  std::erase_if(by_name_,
                [now](const auto& kv) { return kv.second.expires_at <= now; });
}

const ServiceBus::Registration* ServiceBus::find_live_locked(
    const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end() || it->second.expires_at <= clock_->now()) {
    return nullptr;
  }
  return &it->second;
}

RegistrationId ServiceBus::register_service(ServiceDescriptor descriptor,
                                            Handler handler) {
  std::set<std::string> method_names;
  for (const auto& m : descriptor.methods) {
    if (!method_names.insert(m.name).second) {
      throw Error(Errc::kBadParams, "duplicate method " + m.name);
    }
    std::set<std::string> ids;
    for (const auto& p : m.params) {
      if (!ids.insert(p.id).second) {
        throw Error(Errc::kBadParams,
                    "duplicate param id " + p.id + " in " + m.name);
      }
    }
  }
  if (descriptor.lease <= 0) descriptor.lease = 30;

  std::unique_lock lock(mutex_);
  purge_expired_locked();
  if (by_name_.count(descriptor.name)) {
    throw Error(Errc::kDuplicateName, descriptor.name);
  }
  const RegistrationId id = next_id_++;
  const Ticks expires = clock_->now() + descriptor.lease;
  std::string name = descriptor.name;
  by_name_.emplace(std::move(name),
                   Registration{id, std::move(descriptor),
                                std::make_shared<Handler>(std::move(handler)),
                                expires});
  return id;
}

void ServiceBus::deregister(RegistrationId id) {
  std::unique_lock lock(mutex_);
  for (auto it = by_name_.begin(); it != by_name_.end(); ++it) {
    if (it->second.id == id) {
      by_name_.erase(it);
      return;
    }
  }
  throw Error(Errc::kUnknownRegistration, std::to_string(id));
}

ServiceDescriptor ServiceBus::lookup(const std::string& name) const {
  std::shared_lock lock(mutex_);
  const Registration* reg = find_live_locked(name);
  if (!reg) throw Error(Errc::kNotFound, "service " + name);
  return reg->descriptor;
}

Ticks ServiceBus::renew_lease(RegistrationId id) {
  std::unique_lock lock(mutex_);
  purge_expired_locked();
  for (auto& [name, reg] : by_name_) {
    if (reg.id == id) {
      reg.expires_at = clock_->now() + reg.descriptor.lease;
      return reg.expires_at;
    }
  }
  throw Error(Errc::kUnknownRegistration, std::to_string(id));
}

std::vector<std::string> ServiceBus::list_services() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  const Ticks now = clock_->now();
  for (const auto& [name, reg] : by_name_) {
    if (reg.expires_at > now) out.push_back(name);
  }
  return out;
}

InvokeResult ServiceBus::invoke(const std::string& caller,
                                const std::string& service,
                                const std::string& method,
                                const nlohmann::json& params) {
  std::size_t slot;
  {
    std::lock_guard lock(trace_mutex_);
    slot = trace_.size();
    trace_.push_back({slot, caller, service, method, "pending", clock_->now()});
  }
  auto finish = [&](InvokeResult r) {
    std::lock_guard lock(trace_mutex_);
    trace_[slot].status = r.ok() ? "ok" : std::string(to_string(r.fault->code));
    return r;
  };

  std::shared_ptr<Handler> handler;
  const MethodDescriptor* md = nullptr;
  MethodDescriptor md_copy;
  {
    std::shared_lock lock(mutex_);
    const Registration* reg = find_live_locked(service);
    if (!reg) {
      return finish(InvokeResult::failure(
          {Errc::kNotFound, "service " + service + " is not registered", ""}));
    }
    md = reg->descriptor.find_method(method);
    if (!md) {
      return finish(InvokeResult::failure(
          {Errc::kUnknownMethod, service + " has no method " + method, ""}));
    }
    md_copy = *md;
    handler = reg->handler;
  }

  if (!params.is_object()) {
    return finish(InvokeResult::failure(
        {Errc::kBadParams, "params must be an object", ""}));
  }
  for (const auto& p : md_copy.params) {
    if (!params.contains(p.id)) {
      return finish(InvokeResult::failure(
          {Errc::kBadParams, "missing param " + p.id, ""}));
    }
  }

  nlohmann::json result;
  try {
    result = (*handler)(method, params, CallContext{caller});
  } catch (const Error& e) {
    return finish(InvokeResult::failure(
        {Errc::kApplicationFault, e.what(), std::string(to_string(e.code()))}));
  } catch (const std::exception& e) {
    return finish(
        InvokeResult::failure({Errc::kApplicationFault, e.what(), ""}));
  }
  if (!result.is_object()) {
    return finish(InvokeResult::failure(
        {Errc::kApplicationFault, "handler result is not an object", ""}));
  }
  for (const auto& r : md_copy.results) {
    if (!result.contains(r.id)) {
      return finish(InvokeResult::failure(
          {Errc::kApplicationFault, "result lacks " + r.id, ""}));
    }
  }
  return finish(InvokeResult::success(std::move(result)));
}

std::vector<TraceEntry> ServiceBus::call_trace(std::size_t since) const {
  std::lock_guard lock(trace_mutex_);
  if (since >= trace_.size()) return {};
  return {trace_.begin() + static_cast<std::ptrdiff_t>(since), trace_.end()};
}

std::size_t ServiceBus::trace_size() const {
  std::lock_guard lock(trace_mutex_);
  return trace_.size();
}

}  // namespace hic
