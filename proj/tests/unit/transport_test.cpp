#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>

#include "criteria.hpp"
#include "hic/error.hpp"
#include "hic/middleware.hpp"

namespace hic {
namespace {

// Sends raw bytes and reads until the peer closes or `until` shows up.
std::string raw_exchange(std::uint16_t port, const std::string& request, const std::string& until = {}) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return {};
  }
  timeval tv{5, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  std::size_t off = 0;
  while (off < request.size()) {
    const auto n = ::send(fd, request.data() + off, request.size() - off, MSG_NOSIGNAL);
    if (n <= 0) break;
    off += static_cast<std::size_t>(n);
  }
  std::string out;
  char buf[4096];
  while (until.empty() || out.find(until) == std::string::npos) {
    const auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fd);
  return out;
}

class TransportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerOptions opts;
    opts.port = 0;
    opts.ui_root = testing::fixtures_dir() + "/ui";
    server = std::make_unique<BusServer>(mw.bus(), opts, mw.server_hooks());
    server->start();
    ASSERT_NE(server->port(), 0);
  }
  void TearDown() override { server->stop(); }

  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(0);
  Middleware mw{MiddlewareConfig::load_file(testing::fixtures_dir() + "/hicd.json"), clock, 2};
  std::unique_ptr<BusServer> server;
};

TEST_F(TransportTest, RemoteCallsMatchInProcessCalls) {
  // Two identical middlewares: one driven in-process, one over TCP.
  auto clock2 = std::make_shared<ManualClock>(0);
  Middleware local(MiddlewareConfig::load_file(testing::fixtures_dir() + "/hicd.json"), clock2, 2);
  BusClient client("127.0.0.1", server->port());
  const std::vector<std::tuple<std::string, std::string, nlohmann::json>> calls{
      {"IMServ", "OpenSession", {{"actor_id", "alice"}, {"app_id", "cofos"}, {"container_id", "x"}}},
      {"IMServ", "InteractionRequest",
       {{"action", {{"session_id", "s-1"}, {"event_id", "connect"}, {"params", nlohmann::json::object()}}}}},
      {"IMServ", "InteractionRequest",
       {{"action", {{"session_id", "s-1"}, {"event_id", "fly"}, {"params", nlohmann::json::object()}}}}},
      {"IMServ", "GetSession", {{"session_id", "s-9"}}},
      {"COFOSServ", "AppRequest", {{"op", "board"}}},
      {"Nope", "Nothing", nlohmann::json::object()},
  };
  for (const auto& [svc, method, params] : calls) {
    const InvokeResult remote = client.invoke(svc, method, params, "c1");
    const InvokeResult here = local.bus().invoke("c1", svc, method, params);
    EXPECT_EQ(make_response(1, remote).dump(), make_response(1, here).dump()) << svc << "." << method;
  }
}

TEST_F(TransportTest, PipelinedRequestsCarryTheirIds) {
  BusClient client("127.0.0.1", server->port());
  std::vector<std::future<InvokeResult>> futures;
  for (int i = 0; i < 64; ++i) {
    futures.push_back(client.invoke_async("COFOSServ", "AppRequest",
                                          {{"op", "query"}, {"filter", {{"flight_id", i % 2 ? "AF101" : "LH418"}}}}));
  }
  for (int i = 0; i < 64; ++i) {
    const InvokeResult r = futures[i].get();
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.payload.at("result")[0].at("flight_id"), i % 2 ? "AF101" : "LH418");
  }
}

TEST_F(TransportTest, MalformedRequestsGetFaults) {
  BusClient client("127.0.0.1", server->port());
  client.send_line("{not json");
  auto r = client.next_unsolicited(std::chrono::seconds(5));
  ASSERT_TRUE(r.has_value());
  EXPECT_TRUE(r->at("id").is_null());
  EXPECT_EQ(r->at("status"), "fault");
  EXPECT_EQ(r->at("payload").at("code"), "BadParams");

  client.send_line(R"({"v":2,"id":"q","service":"IMServ","method":"GetSession","params":{}})");
  r = client.next_unsolicited(std::chrono::seconds(5));
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->at("id"), "q");
  EXPECT_EQ(r->at("status"), "fault");

  // The connection survives both.
  EXPECT_TRUE(client.invoke("_bus", "list_services", nlohmann::json::object()).ok());
}

TEST_F(TransportTest, OverlongLineClosesTheConnection) {
  const std::string reply = raw_exchange(server->port(), std::string(kMaxLineBytes + 10, 'x'));
  const auto j = nlohmann::json::parse(reply.substr(0, reply.find('\n')));
  EXPECT_EQ(j.at("status"), "fault");
  EXPECT_TRUE(j.at("id").is_null());
}

TEST_F(TransportTest, MetaServiceIsNotTraced) {
  BusClient client("127.0.0.1", server->port());
  const auto services = client.invoke("_bus", "list_services", nlohmann::json::object());
  ASSERT_TRUE(services.ok());
  std::set<std::string> names;
  for (const auto& s : services.payload.at("services")) names.insert(s.get<std::string>());
  EXPECT_EQ(names, (std::set<std::string>{"COFOSServ", "ICServ", "IMServ"}));
  const auto lookup = client.invoke("_bus", "lookup", {{"name", "IMServ"}});
  ASSERT_TRUE(lookup.ok());
  EXPECT_FALSE(client.invoke("_bus", "lookup", {{"name", "Ghost"}}).ok());
  EXPECT_FALSE(client.invoke("_bus", "reboot", nlohmann::json::object()).ok());

  client.invoke("COFOSServ", "AppRequest", {{"op", "board"}}, "tester");
  const auto trace = client.invoke("_bus", "call_trace", {{"since", 0}});
  ASSERT_TRUE(trace.ok());
  const auto& entries = trace.payload.at("entries");
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].at("service"), "COFOSServ");
  EXPECT_EQ(entries[0].at("caller"), "tester");
}

TEST_F(TransportTest, SubscribedConnectionsReceivePushes) {
  BusClient terminal("127.0.0.1", server->port());
  ASSERT_TRUE(terminal.invoke("_bus", "subscribe", {{"container_id", "console-5"}}).ok());
  BusClient driver("127.0.0.1", server->port());
  const auto opened = driver.invoke("IMServ", "OpenSession",
                                    {{"actor_id", "carol"}, {"app_id", "cofos"}, {"container_id", "console-5"}});
  ASSERT_TRUE(opened.ok());
  const std::string sid = opened.payload.at("session").at("session_id");
  driver.invoke("IMServ", "InteractionRequest",
                {{"action", {{"session_id", sid}, {"event_id", "connect"}, {"params", nlohmann::json::object()}}}});
  const auto push = terminal.next_unsolicited(std::chrono::seconds(5));
  ASSERT_TRUE(push.has_value());
  EXPECT_EQ(push->at("type"), "notification");
  EXPECT_EQ(push->at("payload").at("fields").at("session_id"), sid);
  EXPECT_EQ(push->at("payload").at("fields").at("new_state"), "connected");

  const auto notes = driver.invoke("_bus", "notifications", {{"since", 0}});
  ASSERT_TRUE(notes.ok());
  EXPECT_EQ(notes.payload.at("entries").size(), 1u);
}

TEST_F(TransportTest, ServesUiFilesAndBlocksTraversal) {
  std::ifstream in(testing::fixtures_dir() + "/ui/index.html");
  const std::string index((std::istreambuf_iterator<char>(in)), {});
  const std::string ok = raw_exchange(server->port(), "GET /ui/ HTTP/1.1\r\nHost: x\r\n\r\n");
  EXPECT_EQ(ok.rfind("HTTP/1.1 200", 0), 0u) << ok;
  EXPECT_NE(ok.find(index), std::string::npos);
  EXPECT_EQ(raw_exchange(server->port(), "GET /ui/index.html HTTP/1.1\r\n\r\n").rfind("HTTP/1.1 200", 0), 0u);
  EXPECT_EQ(raw_exchange(server->port(), "GET /ui/../hicd.json HTTP/1.1\r\n\r\n").rfind("HTTP/1.1 404", 0), 0u);
  EXPECT_EQ(raw_exchange(server->port(), "GET /ui/%2e%2e/hicd.json HTTP/1.1\r\n\r\n").rfind("HTTP/1.1 404", 0), 0u);
  EXPECT_EQ(raw_exchange(server->port(), "GET /elsewhere HTTP/1.1\r\n\r\n").rfind("HTTP/1.1 404", 0), 0u);
}

TEST(Transport, BindFailureAndRefusedConnection) {
  auto clock = std::make_shared<ManualClock>(0);
  ServiceBus bus(clock);
  ServerOptions opts;
  opts.port = 0;
  BusServer first(bus, opts);
  first.start();
  opts.port = first.port();
  BusServer second(bus, opts);
  try {
    second.start();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTransportError);
  }
  const std::uint16_t port = first.port();
  first.stop();
  EXPECT_THROW(BusClient("127.0.0.1", port), Error);
}

TEST(Transport, PendingCallsFailWhenTheServerStops) {
  auto clock = std::make_shared<ManualClock>(0);
  ServiceBus bus(clock);
  std::promise<void> entered;
  std::promise<void> release;
  auto released = release.get_future().share();
  ServiceDescriptor d;
  d.name = "Slow";
  d.methods = {{"Wait", {}, {}}};
  bus.register_service(d, [&](const std::string&, const nlohmann::json&, const CallContext&) {
    entered.set_value();
    released.wait();
    return nlohmann::json::object();
  });
  ServerOptions opts;
  opts.port = 0;
  BusServer server(bus, opts);
  server.start();
  BusClient client("127.0.0.1", server.port());
  auto fut = client.invoke_async("Slow", "Wait", nlohmann::json::object());
  entered.get_future().wait();
  std::thread stopper([&] { server.stop(); });
  release.set_value();
  stopper.join();
  const InvokeResult r = fut.get();
  // Either the reply made it out before shutdown or the client saw the drop.
  if (!r.ok()) {
    EXPECT_EQ(r.fault->code, Errc::kTransportError);
  }
}

}  // namespace
}  // namespace hic
