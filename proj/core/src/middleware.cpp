#include "hic/middleware.hpp"

#include <fstream>

#include "hic/error.hpp"
#include "hic/task_model.hpp"

namespace hic {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

MiddlewareConfig MiddlewareConfig::from_json(const nlohmann::json& doc,
                                             const std::filesystem::path& base) {
  if (!doc.is_object()) throw Error(Errc::kConfigError, "config must be a JSON object");
  MiddlewareConfig c;
  try {
    const auto models = doc.value("task_models", nlohmann::json::array());
    if (!models.is_array()) throw Error(Errc::kConfigError, "task_models must be an array");
    for (const auto& m : models) {
      c.task_models.push_back(resolve(base, m.get<std::string>()));
    }
    const auto path_of = [&](const char* key) -> std::filesystem::path {
      return doc.contains(key) ? resolve(base, doc.at(key).get<std::string>())
                               : std::filesystem::path();
    };
    c.profiles = path_of("profiles");
    c.flights = path_of("flights");
    c.templates = path_of("templates");
    c.bindings = path_of("bindings");
    c.ui_root = path_of("ui_root");
    if (doc.contains("capabilities")) c.capabilities = doc.at("capabilities");
    if (doc.contains("listen")) {
      const auto& l = doc.at("listen");
      c.host = l.value("host", c.host);
      const int port = l.value("port", int{c.port});
      if (port < 0 || port > 65535) throw Error(Errc::kConfigError, "listen.port out of range");
      c.port = static_cast<std::uint16_t>(port);
    }
    c.notification_ttl = doc.value("notification_ttl", c.notification_ttl);
    c.feed_interval = doc.value("feed_interval", c.feed_interval);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, e.what());
  }
  if (c.task_models.empty()) throw Error(Errc::kConfigError, "no task_models listed");
  if (c.profiles.empty()) throw Error(Errc::kConfigError, "no profiles file");
  if (c.notification_ttl <= 0) throw Error(Errc::kConfigError, "notification_ttl must be positive");
  return c;
}

MiddlewareConfig MiddlewareConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigError, "cannot read " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::kConfigError, path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

Middleware::Middleware(const MiddlewareConfig& config, std::shared_ptr<Clock> clock,
                       std::uint64_t seed)
    : config_(config),
      clock_(std::move(clock)),
      bus_(clock_),
      profiles_([this](const std::string& id) { return core_ && core_->has_task_model(id); }) {
  CoreOptions options;
  options.notification_ttl = config.notification_ttl;
  options.presets.apply_overrides(config.capabilities);
  core_ = std::make_unique<InteractionCore>(heap_, bus_, profiles_, clock_, options);

  for (const auto& path : config.task_models) {
    TaskModel model = load_task_model(path);
    const auto diagnostics = validate(model);
    if (error_count(diagnostics) > 0) {
      std::string msg = path.string() + ":";
      for (const auto& d : diagnostics) {
        if (d.severity == Diagnostic::Severity::kError) msg += " " + d.code + "@" + d.location;
      }
      throw Error(Errc::kConfigError, msg);
    }
    core_->add_task_model(std::make_shared<const TaskModel>(std::move(model)));
  }
  profiles_.load_file(config.profiles);

  container_ = std::make_unique<InteractionContainer>(bus_, *core_, profiles_);
  if (!config.bindings.empty()) {
    container_->set_bindings(std::string(flightops::kAppId),
                             BindingTable::load_file(config.bindings));
  }

  app_ = std::make_unique<flightops::CofosApp>(bus_, profiles_);
  if (!config.flights.empty()) app_->flights().load_file(config.flights);
  if (!config.templates.empty()) app_->templates().load_file(config.templates);
  app_->register_bips(*core_);
  app_->forward_updates_to_core();
  if (config.feed_interval > 0) {
    feed_ = std::make_unique<flightops::FlightFeed>(app_->flights(), seed);
  }

  registrars_ = {[this] { return core_->register_service(); },
                 [this] { return container_->register_service(); },
                 [this] { return app_->register_service(); }};
  for (const auto& reg : registrars_) registrations_.push_back(reg());
}

Middleware::~Middleware() { stop_housekeeping(); }

void Middleware::tick() {
  std::lock_guard lock(tick_mutex_);
  for (std::size_t i = 0; i < registrations_.size(); ++i) {
    try {
      bus_.renew_lease(registrations_[i]);
    } catch (const Error& e) {
      // The clock jumped past the lease (a stalled process, a manual clock
      // in tests); come back under a new registration.
      if (e.code() != Errc::kUnknownRegistration) throw;
      registrations_[i] = registrars_[i]();
    }
  }
  const Ticks now = clock_->now();
  if (now >= heap_.now()) heap_.expire(now);
}

void Middleware::start_housekeeping() {
  if (housekeeping_.joinable()) return;
  {
    std::lock_guard lock(stop_mutex_);
    stopping_ = false;
  }
  housekeeping_ = std::thread([this] {
    Ticks last_feed = clock_->now();
    std::unique_lock lock(stop_mutex_);
    while (!stop_cv_.wait_for(lock, std::chrono::seconds(1), [&] { return stopping_; })) {
      lock.unlock();
      tick();
      if (feed_ && clock_->now() - last_feed >= config_.feed_interval) {
        last_feed = clock_->now();
        feed_->step();
      }
      lock.lock();
    }
  });
}

void Middleware::stop_housekeeping() {
  {
    std::lock_guard lock(stop_mutex_);
    stopping_ = true;
  }
  stop_cv_.notify_all();
  if (housekeeping_.joinable()) housekeeping_.join();
}

ServerHooks Middleware::server_hooks() {
  ServerHooks hooks;
  hooks.notifications = [this](std::size_t since) { return core_->notification_log(since); };
  hooks.subscribe = [this](const ComponentId& container_id) {
    return heap_.subscribe(container_id, EventTemplate{});
  };
  hooks.unsubscribe = [this](SubscriptionId id) { heap_.unsubscribe(id); };
  return hooks;
}

}  // namespace hic
