#include "hic/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hic/error.hpp"
#include "hic/websocket.hpp"

namespace hic {
namespace {

constexpr std::size_t kMaxHttpHeader = 16 * 1024;

bool send_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Appends whatever is readable; false on EOF or error.
bool recv_some(int fd, std::string& buffer) {
  char chunk[16 * 1024];
  while (true) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
    return true;
  }
}

nlohmann::json fault_response(const nlohmann::json& id, Errc code, const std::string& message) {
  return make_response(id, InvokeResult::failure({code, message, ""}));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string content_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

std::string http_response(int status, const std::string& reason, const std::string& type,
                          const std::string& body) {
  std::ostringstream out;
  out << "HTTP/1.1 " << status << ' ' << reason << "\r\n"
      << "Content-Type: " << type << "\r\n"
      << "Content-Length: " << body.size() << "\r\n"
      << "Connection: close\r\n\r\n"
      << body;
  return out.str();
}

}  // namespace

nlohmann::json make_response(const nlohmann::json& id, const InvokeResult& result) {
  return {{"v", kProtocolVersion},
          {"id", id},
          {"status", result.ok() ? "ok" : "fault"},
          {"payload", result.ok() ? result.payload : result.fault->to_json()}};
}

class BusServer::Connection {
 public:
  Connection(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)) {}
  ~Connection() { ::close(fd_); }

  int fd() const { return fd_; }
  const std::string& peer() const { return peer_; }

  bool send_message(const std::string& text) {
    std::lock_guard lock(write_mutex_);
    if (websocket_) return send_all(fd_, ws::encode_frame(ws::Opcode::kText, text));
    return send_all(fd_, text + "\n");
  }
  bool send_raw(std::string_view bytes) {
    std::lock_guard lock(write_mutex_);
    return send_all(fd_, bytes);
  }
  void set_websocket() {
    std::lock_guard lock(write_mutex_);
    websocket_ = true;
  }
  void shutdown() { ::shutdown(fd_, SHUT_RDWR); }

  std::atomic<bool> open{true};
  std::mutex subs_mutex;
  std::vector<SubscriptionId> subs;
  std::vector<std::thread> pumps;

 private:
  int fd_;
  std::string peer_;
  std::mutex write_mutex_;
  bool websocket_ = false;
};

class BusServer::WorkerPool {
 public:
  explicit WorkerPool(std::size_t n) {
    for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) {
      threads_.emplace_back([this] { run(); });
    }
  }
  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }
  void submit(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      tasks_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

 private:
  void run() {
    while (true) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !tasks_.empty(); });
        if (tasks_.empty()) return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

BusServer::BusServer(ServiceBus& bus, ServerOptions options, ServerHooks hooks)
    : bus_(bus), options_(std::move(options)), hooks_(std::move(hooks)) {}

BusServer::~BusServer() { stop(); }

void BusServer::start() {
  if (running_) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::kTransportError, std::strerror(errno));
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(Errc::kTransportError, "bad listen address " + options_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 64) < 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(Errc::kTransportError,
                "cannot listen on " + options_.host + ":" + std::to_string(options_.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port_ = ntohs(addr.sin_port);
  pool_ = std::make_unique<WorkerPool>(options_.workers);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void BusServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(conns_mutex_);
    for (auto& weak : conns_) {
      if (auto conn = weak.lock()) conn->shutdown();
    }
    threads.swap(conn_threads_);
  }
  for (auto& t : threads) t.join();
  pool_.reset();
}

void BusServer::accept_loop() {
  while (running_) {
    sockaddr_in peer{};
    socklen_t len = sizeof peer;
    const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    char ip[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
    auto conn = std::make_shared<Connection>(
        fd, std::string(ip) + ":" + std::to_string(ntohs(peer.sin_port)));
    std::lock_guard lock(conns_mutex_);
    if (!running_) {
      conn->shutdown();
      return;
    }
    std::erase_if(conns_, [](const auto& w) { return w.expired(); });
    conns_.push_back(conn);
    conn_threads_.emplace_back([this, conn] { serve(conn); });
  }
}

void BusServer::serve(std::shared_ptr<Connection> conn) {
  std::string buffer;
  while (buffer.size() < 4 && buffer.find('\n') == std::string::npos) {
    if (!recv_some(conn->fd(), buffer)) break;
  }
  if (buffer.rfind("GET ", 0) == 0) {
    serve_http(conn, std::move(buffer));
  } else if (!buffer.empty()) {
    serve_lines(conn, std::move(buffer));
  }
  conn->open = false;
  std::vector<std::thread> pumps;
  {
    std::lock_guard lock(conn->subs_mutex);
    for (auto id : conn->subs) {
      if (hooks_.unsubscribe) {
        try {
          hooks_.unsubscribe(id);
        } catch (const Error&) {
        }
      }
    }
    pumps.swap(conn->pumps);
  }
  for (auto& t : pumps) t.join();
  conn->shutdown();
}

void BusServer::serve_lines(const std::shared_ptr<Connection>& conn, std::string buffer) {
  while (true) {
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.size() > options_.max_line) {
        conn->send_message(fault_response(nullptr, Errc::kBadParams, "line exceeds limit").dump());
        return;
      }
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!trim(line).empty()) dispatch(conn, line);
    }
    if (buffer.size() > options_.max_line) {
      conn->send_message(fault_response(nullptr, Errc::kBadParams, "line exceeds limit").dump());
      return;
    }
    if (!running_ || !recv_some(conn->fd(), buffer)) return;
  }
}

void BusServer::serve_http(const std::shared_ptr<Connection>& conn, std::string buffer) {
  std::size_t end;
  while ((end = buffer.find("\r\n\r\n")) == std::string::npos) {
    if (buffer.size() > kMaxHttpHeader || !recv_some(conn->fd(), buffer)) return;
  }
  std::istringstream head(buffer.substr(0, end));
  buffer.erase(0, end + 4);
  std::string request_line;
  std::getline(head, request_line);
  std::istringstream rl(request_line);
  std::string verb, path, version;
  rl >> verb >> path >> version;
  std::map<std::string, std::string> headers;
  std::string line;
  while (std::getline(head, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  if (const auto q = path.find('?'); q != std::string::npos) path.resize(q);

  if (path == "/ws") {
    const auto key = headers.find("sec-websocket-key");
    if (lower(headers["upgrade"]) != "websocket" || key == headers.end()) {
      conn->send_raw(http_response(400, "Bad Request", "text/plain", "websocket upgrade required\n"));
      return;
    }
    conn->send_raw("HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
                   "Connection: Upgrade\r\nSec-WebSocket-Accept: " +
                   ws::accept_key(key->second) + "\r\n\r\n");
    conn->set_websocket();
    serve_websocket(conn, std::move(buffer));
    return;
  }
  if ((path == "/ui" || path.rfind("/ui/", 0) == 0) && !options_.ui_root.empty()) {
    std::string rel = path.size() > 4 ? path.substr(4) : "";
    if (rel.empty() || rel.back() == '/') rel += "index.html";
    if (rel.find("..") == std::string::npos) {
      std::ifstream in(options_.ui_root / rel, std::ios::binary);
      if (in) {
        std::ostringstream body;
        body << in.rdbuf();
        conn->send_raw(http_response(200, "OK", content_type(rel), body.str()));
        return;
      }
    }
  }
  conn->send_raw(http_response(404, "Not Found", "text/plain", "not found\n"));
}

void BusServer::serve_websocket(const std::shared_ptr<Connection>& conn, std::string buffer) {
  std::string message;
  while (true) {
    try {
      while (auto frame = ws::decode_frame(buffer, options_.max_line)) {
        switch (frame->opcode) {
          case ws::Opcode::kText:
          case ws::Opcode::kContinuation:
            message += frame->payload;
            if (message.size() > options_.max_line) {
              conn->send_raw(ws::encode_frame(ws::Opcode::kClose, "\x03\xf1"));
              return;
            }
            if (frame->fin) {
              dispatch(conn, message);
              message.clear();
            }
            break;
          case ws::Opcode::kPing:
            conn->send_raw(ws::encode_frame(ws::Opcode::kPong, frame->payload));
            break;
          case ws::Opcode::kPong:
            break;
          case ws::Opcode::kClose:
            conn->send_raw(ws::encode_frame(ws::Opcode::kClose, frame->payload.substr(0, 2)));
            return;
          default:
            conn->send_raw(ws::encode_frame(ws::Opcode::kClose, "\x03\xeb"));
            return;
        }
      }
    } catch (const Error&) {
      conn->send_raw(ws::encode_frame(ws::Opcode::kClose, "\x03\xf1"));
      return;
    }
    if (!running_ || !recv_some(conn->fd(), buffer)) return;
  }
}

void BusServer::dispatch(const std::shared_ptr<Connection>& conn, const std::string& text) {
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    conn->send_message(fault_response(nullptr, Errc::kBadParams, std::string("invalid JSON: ") + e.what()).dump());
    return;
  }
  const nlohmann::json id = req.is_object() && req.contains("id") ? req.at("id") : nlohmann::json();
  if (!req.is_object() || req.value("v", 0) != kProtocolVersion || !req.contains("id") ||
      !req.contains("service") || !req.at("service").is_string() || !req.contains("method") ||
      !req.at("method").is_string()) {
    conn->send_message(
        fault_response(id, Errc::kBadParams, "expected {v:1, id, service, method, params}").dump());
    return;
  }
  const std::string service = req.at("service").get<std::string>();
  const std::string method = req.at("method").get<std::string>();
  const nlohmann::json params = req.value("params", nlohmann::json::object());
  if (service == kMetaService) {
    InvokeResult r;
    try {
      r = InvokeResult::success(meta(conn, method, params));
    } catch (const Error& e) {
      r = InvokeResult::failure({e.code(), e.what(), ""});
    } catch (const std::exception& e) {
      r = InvokeResult::failure({Errc::kBadParams, e.what(), ""});
    }
    conn->send_message(make_response(id, r).dump());
    return;
  }
  std::string caller = req.contains("caller") && req.at("caller").is_string()
                           ? req.at("caller").get<std::string>()
                           : "tcp:" + conn->peer();
  pool_->submit([this, conn, id, service, method, params, caller = std::move(caller)] {
    const InvokeResult r = bus_.invoke(caller, service, method, params);
    conn->send_message(make_response(id, r).dump());
  });
}

nlohmann::json BusServer::meta(const std::shared_ptr<Connection>& conn, const std::string& method,
                               const nlohmann::json& params) {
  if (method == "list_services") return {{"services", bus_.list_services()}};
  if (method == "lookup") {
    const ServiceDescriptor d = bus_.lookup(params.at("name").get<std::string>());
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : d.methods) {
      nlohmann::json ps = nlohmann::json::array();
      nlohmann::json rs = nlohmann::json::array();
      for (const auto& p : m.params) ps.push_back({{"id", p.id}, {"type", p.type}});
      for (const auto& p : m.results) rs.push_back({{"id", p.id}, {"type", p.type}});
      methods.push_back({{"name", m.name}, {"params", ps}, {"results", rs}});
    }
    return {{"name", d.name}, {"endpoint", d.endpoint}, {"lease", d.lease}, {"methods", methods}};
  }
  if (method == "call_trace") {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : bus_.call_trace(params.value("since", std::size_t{0}))) {
      entries.push_back(e.to_json());
    }
    return {{"entries", std::move(entries)}, {"total", bus_.trace_size()}};
  }
  if (method == "notifications") {
    if (!hooks_.notifications) return {{"entries", nlohmann::json::array()}};
    return {{"entries", hooks_.notifications(params.value("since", std::size_t{0}))}};
  }
  if (method == "subscribe") {
    if (!hooks_.subscribe) throw Error(Errc::kUnknownMethod, "subscriptions are not available");
    const Subscription sub = hooks_.subscribe(params.at("container_id").get<std::string>());
    std::lock_guard lock(conn->subs_mutex);
    conn->subs.push_back(sub.id);
    conn->pumps.emplace_back([conn, queue = sub.queue] {
      while (conn->open && !queue->closed()) {
        if (auto e = queue->pop_for(std::chrono::milliseconds(200))) {
          conn->send_message(nlohmann::json{{"v", kProtocolVersion},
                                            {"type", "notification"},
                                            {"payload", event_to_json(*e)}}
                                 .dump());
        }
      }
    });
    return {{"subscription", sub.id}};
  }
  throw Error(Errc::kUnknownMethod, "_bus has no method " + method);
}

BusClient::BusClient(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw Error(Errc::kTransportError, "cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0) {
    const std::string why = std::strerror(errno);
    if (fd_ >= 0) ::close(fd_);
    throw Error(Errc::kTransportError, "cannot connect to " + host + ":" + service + ": " + why);
  }
  int yes = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
  connected_ = true;
  reader_ = std::thread([this] { read_loop(); });
}

BusClient::~BusClient() {
  ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  ::close(fd_);
}

void BusClient::send_line(const std::string& line) {
  std::lock_guard lock(write_mutex_);
  send_all(fd_, line + "\n");
}

std::future<InvokeResult> BusClient::invoke_async(const std::string& service,
                                                  const std::string& method,
                                                  const nlohmann::json& params,
                                                  const std::string& caller) {
  std::promise<InvokeResult> promise;
  auto future = promise.get_future();
  std::uint64_t id;
  {
    std::lock_guard lock(mutex_);
    if (!connected_) {
      promise.set_value(InvokeResult::failure({Errc::kTransportError, "not connected", ""}));
      return future;
    }
    id = next_id_++;
    pending_.emplace(id, std::move(promise));
  }
  nlohmann::json req{{"v", kProtocolVersion}, {"id", id}, {"service", service},
                     {"method", method},      {"params", params}};
  if (!caller.empty()) req["caller"] = caller;
  bool sent;
  {
    std::lock_guard lock(write_mutex_);
    sent = send_all(fd_, req.dump() + "\n");
  }
  if (!sent) {
    std::lock_guard lock(mutex_);
    auto it = pending_.find(id);
    if (it != pending_.end()) {
      it->second.set_value(InvokeResult::failure({Errc::kTransportError, "send failed", ""}));
      pending_.erase(it);
    }
  }
  return future;
}

InvokeResult BusClient::invoke(const std::string& service, const std::string& method,
                               const nlohmann::json& params, const std::string& caller) {
  return invoke_async(service, method, params, caller).get();
}

std::optional<nlohmann::json> BusClient::next_unsolicited(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return !unsolicited_.empty() || !connected_; });
  if (unsolicited_.empty()) return std::nullopt;
  auto msg = std::move(unsolicited_.front());
  unsolicited_.pop_front();
  return msg;
}

void BusClient::read_loop() {
  std::string buffer;
  while (recv_some(fd_, buffer)) {
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      nlohmann::json msg;
      try {
        msg = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        continue;
      }
      std::lock_guard lock(mutex_);
      const auto id = msg.find("id");
      if (id != msg.end() && id->is_number_unsigned() && pending_.count(id->get<std::uint64_t>())) {
        auto it = pending_.find(id->get<std::uint64_t>());
        const auto& payload = msg.value("payload", nlohmann::json::object());
        it->second.set_value(msg.value("status", "") == "ok"
                                 ? InvokeResult::success(payload)
                                 : InvokeResult::failure(Fault::from_json(payload)));
        pending_.erase(it);
      } else {
        unsolicited_.push_back(std::move(msg));
        cv_.notify_all();
      }
    }
  }
  std::lock_guard lock(mutex_);
  connected_ = false;
  for (auto& [id, p] : pending_) {
    p.set_value(InvokeResult::failure({Errc::kTransportError, "connection closed", ""}));
  }
  pending_.clear();
  cv_.notify_all();
}

}  // namespace hic
