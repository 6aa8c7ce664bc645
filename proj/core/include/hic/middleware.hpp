#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hic/clock.hpp"
#include "hic/event_heap.hpp"
#include "hic/flightops.hpp"
#include "hic/interaction_container.hpp"
#include "hic/interaction_core.hpp"
#include "hic/profile_store.hpp"
#include "hic/service_bus.hpp"
#include "hic/tcp_transport.hpp"

namespace hic {

// Daemon configuration. Relative paths resolve against the config file's
// directory.
//
// {
//   "task_models": ["airline.task.xml", ...],
//   "profiles": "profiles.json", "flights": "flights.json",
//   "templates": "templates.json", "bindings": "bindings.json",
//   "capabilities": {"phone": {"max_columns": 3}},
//   "listen": {"host": "127.0.0.1", "port": 7340},
//   "notification_ttl": 60, "feed_interval": 0,
//   "ui_root": "ui"
// }
struct MiddlewareConfig {
  std::vector<std::filesystem::path> task_models;
  std::filesystem::path profiles;
  std::filesystem::path flights;
  std::filesystem::path templates;
  std::filesystem::path bindings;
  nlohmann::json capabilities = nlohmann::json::object();
  std::string host = "127.0.0.1";
  std::uint16_t port = 7340;
  Ticks notification_ttl = 60;
  Ticks feed_interval = 0;  // seconds between random feed updates; 0 is off
  std::filesystem::path ui_root;

  // Throws Error(kConfigError).
  static MiddlewareConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base);
  static MiddlewareConfig load_file(const std::filesystem::path& path);
};

// Heap, bus, profiles, core, container and the flight-operations demo wired
// together and registered as IMServ, ICServ and COFOSServ.
class Middleware {
 public:
  // Loads every fixture named in the config. Throws Error(kConfigError) for
  // an invalid task model and lets ParseError from the loaders through.
  Middleware(const MiddlewareConfig& config, std::shared_ptr<Clock> clock, std::uint64_t seed = 0);
  ~Middleware();
  Middleware(const Middleware&) = delete;
  Middleware& operator=(const Middleware&) = delete;

  EventHeap& heap() { return heap_; }
  ServiceBus& bus() { return bus_; }
  ProfileStore& profiles() { return profiles_; }
  InteractionCore& core() { return *core_; }
  InteractionContainer& container() { return *container_; }
  flightops::CofosApp& app() { return *app_; }
  const Clock& clock() const { return *clock_; }

  // Renews the service leases and expires heap events up to the clock.
  void tick();
  // Runs tick() (and the feed, when enabled) once per second until stopped.
  void start_housekeeping();
  void stop_housekeeping();

  ServerHooks server_hooks();

 private:
  MiddlewareConfig config_;
  std::shared_ptr<Clock> clock_;
  EventHeap heap_;
  ServiceBus bus_;
  ProfileStore profiles_;
  std::unique_ptr<InteractionCore> core_;
  std::unique_ptr<InteractionContainer> container_;
  std::unique_ptr<flightops::CofosApp> app_;
  std::unique_ptr<flightops::FlightFeed> feed_;
  std::vector<std::function<RegistrationId()>> registrars_;
  std::vector<RegistrationId> registrations_;

  std::mutex tick_mutex_;
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
  std::thread housekeeping_;
};

}  // namespace hic
