#include <gtest/gtest.h>

#include <random>

#include "criteria.hpp"
#include "hic/error.hpp"
#include "hic/middleware.hpp"

namespace hic {
namespace {

BindingTable fixture_bindings() {
  return BindingTable::load_file(testing::fixtures_dir() + "/bindings.json");
}

TEST(BindingTable, SendEncodesToSelectSpecificTemplate) {
  const auto table = fixture_bindings();
  const EncodedAction a = table.encode({RawKind::kText, "send delay_notice flight=AF101 minutes=20"});
  EXPECT_EQ(a.event_id, "select_specific_template");
  EXPECT_EQ(a.params, (nlohmann::json{{"message_template", "delay_notice flight=AF101 minutes=20"}}));
  EXPECT_EQ(table.encode({RawKind::kGesture, "swipe-left"}).event_id, "read_message");
  const EncodedAction u = table.encode({RawKind::kText, "update BA331 gate=C4 status=boarding"});
  EXPECT_EQ(u.params.at("flight_id"), "BA331");
  EXPECT_EQ(u.params.at("patch"), "gate=C4 status=boarding");
}

TEST(BindingTable, UnboundActions) {
  const auto table = fixture_bindings();
  for (const RawAction& raw : {RawAction{RawKind::kText, "dance"}, RawAction{RawKind::kClick, "send x"},
                               RawAction{RawKind::kText, "   "}}) {
    try {
      table.encode(raw);
      FAIL() << raw.payload;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kUnboundAction);
    }
  }
  EXPECT_THROW(table.decode({"no_such_event", {}}), Error);
}

TEST(BindingTable, RejectsAmbiguousTables) {
  const auto bad = [](nlohmann::json doc) {
    try {
      BindingTable::from_json(doc);
      return false;
    } catch (const Error& e) {
      return e.code() == Errc::kConfigError;
    }
  };
  EXPECT_TRUE(bad({{"bindings", {{{"kind", "click"}, {"command", "a"}, {"event", "x"}},
                                 {{"kind", "click"}, {"command", "a"}, {"event", "y"}}}}}));
  EXPECT_TRUE(bad({{"bindings", {{{"kind", "click"}, {"command", "a"}, {"event", "x"}},
                                 {{"kind", "text"}, {"command", "b"}, {"event", "x"}}}}}));
  EXPECT_TRUE(bad({{"bindings", {{{"kind", "blink"}, {"command", "a"}, {"event", "x"}}}}}));
  EXPECT_TRUE(bad({{"bindings", {{{"kind", "click"}, {"command", "two words"}, {"event", "x"}}}}}));
  EXPECT_TRUE(bad({{"nothing", 1}}));
  EXPECT_FALSE(bad({{"bindings", {{{"kind", "click"}, {"command", "a"}, {"event", "x"}},
                                  {{"kind", "text"}, {"command", "a"}, {"event", "y"}}}}}));
}

// decode(encode(raw)) == raw for any single-spaced raw action the table binds.
TEST(BindingTable, EncodeDecodeRoundTrip) {
  const auto table = fixture_bindings();
  std::mt19937_64 rng(17);
  const std::vector<std::string> words{"AF101", "gate=B2", "x", "delay_notice", "minutes=5", "é", "中"};
  for (int i = 0; i < 1000; ++i) {
    const auto& b = table.bindings()[rng() % table.bindings().size()];
    RawAction raw{b.kind, b.command};
    if (!b.params.empty()) {
      const int extra = static_cast<int>(rng() % 5);
      for (int k = 0; k < extra; ++k) raw.payload += " " + words[rng() % words.size()];
    }
    const EncodedAction enc = table.encode(raw);
    EXPECT_EQ(enc.event_id, b.event_id);
    EXPECT_EQ(table.decode(enc), raw) << raw.payload;
  }
}

class ContainerTest : public ::testing::Test {
 protected:
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(0);
  Middleware mw{MiddlewareConfig::load_file(testing::fixtures_dir() + "/hicd.json"), clock, 3};
};

TEST_F(ContainerTest, CaptureActionDrivesTheSession) {
  const Session s = mw.core().open_session("alice", "cofos", "console-1");
  auto& c = mw.container();
  EXPECT_EQ(c.capture_action(s.session_id, {RawKind::kClick, "login"}).new_state, "connected");
  EXPECT_EQ(c.capture_action(s.session_id, {RawKind::kClick, "specific"}).new_state,
            "browsing_specific_templates1");
  const Notification n = c.capture_action(s.session_id, {RawKind::kText, "send gate_change flight=AF205 gate=D7"});
  EXPECT_EQ(n.status, RequestStatus::kAccepted);
  EXPECT_EQ(n.new_state, "connected");
  ASSERT_EQ(mw.app().messages().size(), 1u);
  EXPECT_EQ(mw.app().messages()[0].flight_id, "AF205");
  EXPECT_EQ(c.views_rendered("console-1"), 3u);
  try {
    c.capture_action(s.session_id, {RawKind::kGesture, "shake"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnboundAction);
  }
  EXPECT_EQ(mw.core().get_session(s.session_id).history.size(), 3u);
}

TEST_F(ContainerTest, DisplayRequestForUnknownSession) {
  try {
    mw.container().display_request("s-nope", flightops::flight_board({}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownSession);
  }
  EXPECT_THROW(mw.container().capture_action("s-nope", {RawKind::kClick, "login"}), Error);
  EXPECT_FALSE(mw.container().last_view("console-404").has_value());
  EXPECT_EQ(mw.container().views_rendered("console-404"), 0u);
}

TEST_F(ContainerTest, DisplayRequestUsesPersonalNames) {
  // alice calls flight_id "flight".
  const Session s = mw.core().open_session("alice", "cofos", "console-1");
  DisplayPayload p;
  p.columns = {{"k", "Key", 0, 16}};
  p.rows = {{{"k", "flight_id"}}, {{"k", "gate"}}};
  const RenderedView v = mw.container().display_request(s.session_id, p);
  ASSERT_EQ(v.cells.size(), 2u);
  EXPECT_EQ(v.cells[0][0], "flight");
  EXPECT_EQ(v.cells[1][0], "gate");
  EXPECT_EQ(*mw.container().last_view("console-1"), v);
}

TEST_F(ContainerTest, IcservOverTheBus) {
  const Session s = mw.core().open_session("carol", "cofos", "console-2",
                                           TerminalCapability::preset(TerminalKind::kPda));
  const auto r = mw.bus().invoke("term", "ICServ", "CaptureAction",
                                 {{"session_id", s.session_id}, {"kind", "click"}, {"payload", "login"}});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.payload.at("notification").at("new_state"), "connected");
  const auto d = mw.bus().invoke("term", "ICServ", "DisplayRequest",
                                 {{"session_id", s.session_id}, {"payload", payload_to_json(mw.app().board())}});
  ASSERT_TRUE(d.ok());
  const RenderedView v = view_from_json(d.payload.at("rendered"));
  EXPECT_EQ(v.kind, TerminalKind::kPda);
  EXPECT_EQ(v.columns.size(), 6u);
  const auto bad = mw.bus().invoke("term", "ICServ", "CaptureAction",
                                   {{"session_id", s.session_id}, {"kind", "click"}, {"payload", "fly"}});
  ASSERT_FALSE(bad.ok());
  EXPECT_EQ(bad.fault->app_code, "UnboundAction");
}

}  // namespace
}  // namespace hic
