#include <gtest/gtest.h>

#include <thread>

#include "hic/error.hpp"
#include "hic/service_bus.hpp"

namespace hic {
namespace {

ServiceDescriptor imserv() {
  return {"IMServ",
          {{"InteractionRequest", {{"action", "ActionData"}}, {{"notification", "Notification"}}},
           {"BusinessRequest", {{"app_id", "string"}, {"info", "object"}}, {{"delivered", "int"}}}}};
}

Handler echo() {
  return [](const std::string& method, const nlohmann::json& params, const CallContext& ctx) {
    if (method == "InteractionRequest") return nlohmann::json{{"notification", params.at("action")}};
    return nlohmann::json{{"delivered", ctx.caller.size()}};
  };
}

class ServiceBusTest : public ::testing::Test {
 protected:
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(0);
  ServiceBus bus{clock};
};

TEST_F(ServiceBusTest, RegisteredServiceIsDiscoverable) {
  bus.register_service(imserv(), echo());
  const auto d = bus.lookup("IMServ");
  ASSERT_EQ(d.methods.size(), 2u);
  EXPECT_EQ(d.methods[0].name, "InteractionRequest");
  EXPECT_EQ(d.methods[1].name, "BusinessRequest");
}

TEST_F(ServiceBusTest, DuplicateName) {
  bus.register_service(imserv(), echo());
  try {
    bus.register_service(imserv(), echo());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDuplicateName);
  }
}

TEST_F(ServiceBusTest, DuplicateParamIdsRejected) {
  ServiceDescriptor d{"X", {{"m", {{"a", "t"}, {"a", "t"}}, {}}}};
  EXPECT_THROW(bus.register_service(d, echo()), Error);
}

TEST_F(ServiceBusTest, LeaseLapseHidesService) {
  bus.register_service(imserv(), echo());
  clock->advance(29);
  EXPECT_NO_THROW(bus.lookup("IMServ"));
  clock->advance(1);
  try {
    bus.lookup("IMServ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNotFound);
  }
  EXPECT_TRUE(bus.list_services().empty());
  // The name is free again once the lease is gone.
  EXPECT_NO_THROW(bus.register_service(imserv(), echo()));
}

TEST_F(ServiceBusTest, RenewExtendsLease) {
  const auto id = bus.register_service(imserv(), echo());
  clock->advance(20);
  EXPECT_EQ(bus.renew_lease(id), 50);
  clock->advance(20);
  EXPECT_NO_THROW(bus.lookup("IMServ"));
}

TEST_F(ServiceBusTest, RenewUnknownRegistration) {
  try {
    bus.renew_lease(42);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownRegistration);
  }
}

TEST_F(ServiceBusTest, LookupUnknown) { EXPECT_THROW(bus.lookup("nope"), Error); }

TEST_F(ServiceBusTest, ListsExactlyTheRegisteredNames) {
  for (const char* name : {"IMServ", "ICServ", "COFOSServ"}) {
    bus.register_service({name, {{"m", {}, {}}}}, echo());
  }
  EXPECT_EQ(bus.list_services(), (std::vector<std::string>{"COFOSServ", "ICServ", "IMServ"}));
}

TEST_F(ServiceBusTest, DeregisterRemoves) {
  const auto id = bus.register_service(imserv(), echo());
  bus.deregister(id);
  EXPECT_THROW(bus.lookup("IMServ"), Error);
}

TEST_F(ServiceBusTest, InvokeReturnsHandlerResult) {
  bus.register_service({"ICServ", {{"DisplayRequest", {{"data", "DisplayPayload"}}, {{"rendered", "bool"}}}}},
                       [](const std::string&, const nlohmann::json&, const CallContext&) {
                         return nlohmann::json{{"rendered", true}};
                       });
  const auto r = bus.invoke("IMServ", "ICServ", "DisplayRequest", {{"data", {{"rows", 1}}}});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.payload, (nlohmann::json{{"rendered", true}}));
}

TEST_F(ServiceBusTest, FaultsAreValues) {
  bus.register_service(imserv(), [](const std::string&, const nlohmann::json&, const CallContext&) -> nlohmann::json {
    throw Error(Errc::kUnknownSession, "s-9");
  });
  const auto missing = bus.invoke("t", "IMServ", "BusinessRequest", {{"app_id", "x"}});
  ASSERT_FALSE(missing.ok());
  EXPECT_EQ(missing.fault->code, Errc::kBadParams);
  EXPECT_EQ(bus.invoke("t", "IMServ", "Nope", nlohmann::json::object()).fault->code, Errc::kUnknownMethod);
  EXPECT_EQ(bus.invoke("t", "Nope", "m", nlohmann::json::object()).fault->code, Errc::kNotFound);
  EXPECT_EQ(bus.invoke("t", "IMServ", "InteractionRequest", nlohmann::json::array()).fault->code,
            Errc::kBadParams);
  const auto app = bus.invoke("t", "IMServ", "InteractionRequest", {{"action", 1}});
  ASSERT_FALSE(app.ok());
  EXPECT_EQ(app.fault->code, Errc::kApplicationFault);
  EXPECT_EQ(app.fault->app_code, "UnknownSession");
}

TEST_F(ServiceBusTest, ResultMustCarryDeclaredIds) {
  bus.register_service(imserv(), [](const std::string&, const nlohmann::json&, const CallContext&) {
    return nlohmann::json{{"something_else", 1}};
  });
  const auto r = bus.invoke("t", "IMServ", "InteractionRequest", {{"action", 1}});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.fault->code, Errc::kApplicationFault);
}

TEST_F(ServiceBusTest, TraceRecordsEveryInvokeInOrder) {
  bus.register_service(imserv(), echo());
  bus.invoke("a", "IMServ", "InteractionRequest", {{"action", 1}});
  EXPECT_EQ(bus.trace_size(), 1u);
  bus.invoke("b", "IMServ", "Nope", nlohmann::json::object());
  bus.invoke("c", "Ghost", "m", nlohmann::json::object());
  const auto trace = bus.call_trace();
  ASSERT_EQ(trace.size(), 3u);
  EXPECT_EQ(trace[0].caller, "a");
  EXPECT_EQ(trace[0].status, "ok");
  EXPECT_EQ(trace[1].status, "UnknownMethod");
  EXPECT_EQ(trace[2].status, "NotFound");
  for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_EQ(trace[i].index, i);
  EXPECT_EQ(bus.call_trace(2).size(), 1u);
}

TEST_F(ServiceBusTest, ConcurrentInvokesAllTraced) {
  bus.register_service(imserv(), echo());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 250; ++i) {
        bus.invoke("t" + std::to_string(t), "IMServ", "InteractionRequest", {{"action", i}});
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto trace = bus.call_trace();
  ASSERT_EQ(trace.size(), 1000u);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i].index, i);
    EXPECT_EQ(trace[i].status, "ok");
  }
}

// A handler may call back into the bus without deadlocking.
TEST_F(ServiceBusTest, ReentrantInvoke) {
  bus.register_service({"Inner", {{"m", {}, {}}}},
                       [](const std::string&, const nlohmann::json&, const CallContext&) {
                         return nlohmann::json::object();
                       });
  bus.register_service({"Outer", {{"m", {}, {}}}},
                       [this](const std::string&, const nlohmann::json&, const CallContext&) {
                         EXPECT_TRUE(bus.invoke("Outer", "Inner", "m", nlohmann::json::object()).ok());
                         return nlohmann::json::object();
                       });
  EXPECT_TRUE(bus.invoke("t", "Outer", "m", nlohmann::json::object()).ok());
  EXPECT_EQ(bus.trace_size(), 2u);
}

}  // namespace
}  // namespace hic
