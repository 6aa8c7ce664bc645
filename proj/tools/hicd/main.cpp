// hicd: runs the interaction middleware, replays scenario scripts and prints
// the bus trace.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "hic/error.hpp"
#include "hic/middleware.hpp"
#include "hic/scenario.hpp"
#include "hic/task_model.hpp"
#include "hic/tcp_transport.hpp"

namespace {

constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBind = 3;

std::unique_ptr<hic::Middleware> boot(const std::string& config_path,
                                      std::shared_ptr<hic::Clock> clock, std::uint64_t seed,
                                      hic::MiddlewareConfig* out_config) {
  auto config = hic::MiddlewareConfig::load_file(config_path);
  if (out_config) *out_config = config;
  return std::make_unique<hic::Middleware>(config, std::move(clock), seed);
}

int serve(const std::string& config_path, int port, std::uint64_t seed) {
  // Block termination signals before any thread starts so sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  hic::MiddlewareConfig config;
  std::unique_ptr<hic::Middleware> mw;
  try {
    mw = boot(config_path, std::make_shared<hic::SteadyClock>(), seed, &config);
  } catch (const std::exception& e) {
    std::cerr << "hicd: config: " << e.what() << '\n';
    return kExitConfig;
  }
  hic::ServerOptions options;
  options.host = config.host;
  options.port = port >= 0 ? static_cast<std::uint16_t>(port) : config.port;
  options.ui_root = config.ui_root;
  hic::BusServer server(mw->bus(), options, mw->server_hooks());
  try {
    server.start();
  } catch (const hic::Error& e) {
    std::cerr << "hicd: " << e.what() << '\n';
    return kExitBind;
  }
  mw->start_housekeeping();
  std::cout << "hicd listening on " << options.host << ':' << server.port() << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "hicd stopping" << std::endl;
  server.stop();
  mw->stop_housekeeping();
  return 0;
}

int run_scenario(const std::string& config_path, const std::string& script, std::uint64_t seed,
                 bool quiet) {
  std::unique_ptr<hic::Middleware> mw;
  try {
    mw = boot(config_path, std::make_shared<hic::ManualClock>(0), seed, nullptr);
  } catch (const std::exception& e) {
    std::cerr << "hicd: config: " << e.what() << '\n';
    return kExitConfig;
  }
  hic::ScenarioResult result;
  try {
    result = hic::run_scenario_file(*mw, script, seed, quiet ? nullptr : &std::cout);
  } catch (const hic::Error& e) {
    std::cerr << "hicd: " << e.what() << '\n';
    return kExitConfig;
  }
  if (!result.ok) {
    std::cerr << script << ":" << result.failed_line << ": step failed: " << result.message << '\n';
    return kExitAssertion;
  }
  std::cout << "ok: " << result.steps << " steps" << std::endl;
  return 0;
}

void print_calls(const nlohmann::json& entries) {
  for (const auto& e : entries) {
    std::cout << "call " << e.at("index").get<std::uint64_t>() << " t=" << e.at("at").get<long long>()
              << ' ' << e.at("caller").get<std::string>() << " -> "
              << e.at("service").get<std::string>() << '.' << e.at("method").get<std::string>()
              << ' ' << e.at("status").get<std::string>() << '\n';
  }
}

void print_notes(const nlohmann::json& entries, std::size_t first) {
  std::size_t i = first;
  for (const auto& n : entries) {
    std::cout << "note " << i++ << ' ' << n.dump() << '\n';
  }
}

int trace(const std::string& host, int port, bool follow) {
  try {
    hic::BusClient client(host, static_cast<std::uint16_t>(port));
    const auto call = [&](const std::string& method, const nlohmann::json& params) {
      const auto r = client.invoke(std::string(hic::kMetaService), method, params);
      if (!r.ok()) throw hic::Error(r.fault->code, r.fault->message);
      return r.payload;
    };
    const auto services = call("list_services", nlohmann::json::object()).at("services");
    std::cout << "# hicd trace " << host << ':' << port << '\n' << "# services:";
    for (const auto& s : services) std::cout << ' ' << s.get<std::string>();
    std::cout << std::endl;
    std::size_t calls = 0;
    std::size_t notes = 0;
    while (true) {
      const auto t = call("call_trace", {{"since", calls}}).at("entries");
      print_calls(t);
      calls += t.size();
      const auto n = call("notifications", {{"since", notes}}).at("entries");
      print_notes(n, notes);
      notes += n.size();
      std::cout.flush();
      if (!follow) return 0;
      std::this_thread::sleep_for(std::chrono::milliseconds(500));
    }
  } catch (const hic::Error& e) {
    std::cerr << "hicd: " << e.what() << '\n';
    return kExitBind;
  }
}

int validate_model(const std::string& path) {
  try {
    const auto model = hic::load_task_model(path);
    const auto diagnostics = hic::validate(model);
    for (const auto& d : diagnostics) {
      std::cout << (d.severity == hic::Diagnostic::Severity::kError ? "error " : "warning ")
                << d.code << ' ' << d.location << ": " << d.message << '\n';
    }
    std::cout << model.model_id << ": " << model.states.size() << " states, "
              << hic::error_count(diagnostics) << " errors\n";
    return hic::error_count(diagnostics) == 0 ? 0 : kExitAssertion;
  } catch (const std::exception& e) {
    std::cerr << "hicd: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interaction middleware daemon"};
  app.require_subcommand(1);

  std::string config = "hicd.json";
  int port = -1;
  std::uint64_t seed = 0;

  auto* serve_cmd = app.add_subcommand("serve", "run the middleware and listen on TCP");
  serve_cmd->add_option("--config", config, "daemon config file")->required();
  serve_cmd->add_option("--port", port, "listen port (0 picks one; default from config or 7340)");
  serve_cmd->add_option("--seed", seed, "seed for the flight feed");

  std::string script;
  bool quiet = false;
  auto* run_cmd = app.add_subcommand("run-scenario", "replay a scenario script");
  run_cmd->add_option("script", script, "scenario file")->required();
  run_cmd->add_option("--config", config, "daemon config file")->required();
  run_cmd->add_option("--seed", seed, "seed for random_walk steps");
  run_cmd->add_flag("-q,--quiet", quiet, "only print the verdict");

  std::string host = "127.0.0.1";
  int trace_port = 7340;
  bool follow = false;
  auto* trace_cmd = app.add_subcommand("trace", "print the bus call trace and notifications");
  trace_cmd->add_option("--host", host);
  trace_cmd->add_option("--port", trace_port);
  trace_cmd->add_flag("--follow", follow, "keep polling for new entries");

  std::string model;
  auto* validate_cmd = app.add_subcommand("validate", "parse and check a task model");
  validate_cmd->add_option("model", model, "*.task.xml file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  if (*serve_cmd) return serve(config, port, seed);
  if (*run_cmd) return run_scenario(config, script, seed, quiet);
  if (*trace_cmd) return trace(host, trace_port, follow);
  if (*validate_cmd) return validate_model(model);
  return kExitConfig;
}
