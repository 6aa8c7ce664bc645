#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hic/event_heap.hpp"
#include "hic/service_bus.hpp"

namespace hic {

// Wire protocol: one UTF-8 JSON message per line (or per WebSocket text
// frame).
//   request  {"v":1, "id", "service", "method", "params", ["caller"]}
//   response {"v":1, "id", "status":"ok"|"fault", "payload"}
//   push     {"v":1, "type":"notification", "payload": <heap event>}
// Service "_bus" is answered by the server itself and is not traced:
// list_services, lookup{name}, call_trace{since}, notifications{since},
// subscribe{container_id}.
inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxLineBytes = 1 << 20;
inline constexpr std::string_view kMetaService = "_bus";

nlohmann::json make_response(const nlohmann::json& id, const InvokeResult& result);

struct ServerHooks {
  // Heap notification log entries from `since`.
  std::function<std::vector<nlohmann::json>(std::size_t since)> notifications;
  // Subscribes a container to its heap notifications.
  std::function<Subscription(const ComponentId& container_id)> subscribe;
  std::function<void(SubscriptionId)> unsubscribe;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7340;  // 0 picks an ephemeral port
  std::size_t workers = 4;
  std::size_t max_line = kMaxLineBytes;
  std::filesystem::path ui_root;  // static assets under /ui; empty disables
};

// Serves the bus over TCP. Requests on one connection are pipelined and
// answered out of order; responses carry the request id. The same port
// accepts HTTP: GET /ws upgrades to WebSocket, GET /ui/... serves files.
class BusServer {
 public:
  BusServer(ServiceBus& bus, ServerOptions options, ServerHooks hooks = {});
  ~BusServer();
  BusServer(const BusServer&) = delete;
  BusServer& operator=(const BusServer&) = delete;

  // Binds and listens. Throws Error(kTransportError) when the address is
  // unavailable.
  void start();
  void stop();
  std::uint16_t port() const { return bound_port_; }

 private:
  class Connection;
  class WorkerPool;

  void accept_loop();
  void serve(std::shared_ptr<Connection> conn);
  void serve_lines(const std::shared_ptr<Connection>& conn, std::string buffer);
  void serve_http(const std::shared_ptr<Connection>& conn, std::string buffer);
  void serve_websocket(const std::shared_ptr<Connection>& conn, std::string buffer);
  void dispatch(const std::shared_ptr<Connection>& conn, const std::string& text);
  nlohmann::json meta(const std::shared_ptr<Connection>& conn, const std::string& method,
                      const nlohmann::json& params);

  ServiceBus& bus_;
  ServerOptions options_;
  ServerHooks hooks_;
  int listen_fd_ = -1;
  std::uint16_t bound_port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::unique_ptr<WorkerPool> pool_;

  std::mutex conns_mutex_;
  std::vector<std::weak_ptr<Connection>> conns_;
  std::vector<std::thread> conn_threads_;
};

// Blocking client with request pipelining. Pushed notifications are queued.
class BusClient {
 public:
  // Throws Error(kTransportError) when the connection fails.
  BusClient(const std::string& host, std::uint16_t port);
  ~BusClient();
  BusClient(const BusClient&) = delete;
  BusClient& operator=(const BusClient&) = delete;

  std::future<InvokeResult> invoke_async(const std::string& service, const std::string& method,
                                         const nlohmann::json& params,
                                         const std::string& caller = {});
  InvokeResult invoke(const std::string& service, const std::string& method,
                      const nlohmann::json& params, const std::string& caller = {});
  // Sends a raw line (tests of malformed input).
  void send_line(const std::string& line);
  // Next response or push that was not matched to a pending call.
  std::optional<nlohmann::json> next_unsolicited(std::chrono::milliseconds timeout);

  bool connected() const { return connected_.load(); }

 private:
  void read_loop();

  int fd_ = -1;
  std::atomic<bool> connected_{false};
  std::thread reader_;
  std::mutex write_mutex_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, std::promise<InvokeResult>> pending_;
  std::deque<nlohmann::json> unsolicited_;
};

}  // namespace hic
