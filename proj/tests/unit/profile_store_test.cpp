#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "criteria.hpp"
#include "hic/error.hpp"
#include "hic/profile_store.hpp"

namespace hic {
namespace {

const nlohmann::json kDoc = nlohmann::json::parse(R"({
  "classes": [
    {"class_id": "airline", "task_model_id": "airline", "rights": ["flight.read", "flight.update"]},
    {"class_id": "handling", "task_model_id": "handling", "rights": ["flight.read"]}
  ],
  "users": [
    {"user_id": "alice", "class_id": "airline", "preferences": {"terminal": "pc"}},
    {"user_id": "dave", "class_id": "airline"},
    {"user_id": "bob", "class_id": "handling", "aliases": {"shuttle": "AF123"}}
  ]
})");

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kConfigError;
}

TEST(ProfileStore, LoadCountsRecords) {
  ProfileStore store;
  EXPECT_EQ(store.load_json(kDoc), 5u);
  EXPECT_EQ(store.classes().size(), 2u);
  EXPECT_EQ(store.users().size(), 3u);
}

TEST(ProfileStore, UnknownClassIsParseErrorAndLeavesStoreUntouched) {
  ProfileStore store;
  store.load_json(kDoc);
  const auto before = store.users();
  auto bad = kDoc;
  bad["users"].push_back({{"user_id", "eve"}, {"class_id", "pilots"}});
  bad["users"][0]["preferences"]["terminal"] = "phone";
  try {
    store.load_json(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), Errc::kParseError);
  }
  EXPECT_EQ(store.users(), before);
}

TEST(ProfileStore, ReloadIsIdempotent) {
  ProfileStore store;
  store.load_json(kDoc);
  const auto users = store.users();
  const auto classes = store.classes();
  store.load_json(kDoc);
  EXPECT_EQ(store.users(), users);
  EXPECT_EQ(store.classes(), classes);
}

TEST(ProfileStore, UnresolvedTaskModelIsParseError) {
  ProfileStore store([](const std::string& id) { return id == "airline"; });
  EXPECT_THROW(store.load_json(kDoc), ParseError);
}

TEST(ProfileStore, MatchesBruteForceReread) {
  ProfileStore store;
  store.load_file(testing::fixtures_dir() + "/profiles.json");
  std::ifstream in(testing::fixtures_dir() + "/profiles.json");
  const auto doc = nlohmann::json::parse(in);
  ASSERT_EQ(store.users().size(), doc.at("users").size());
  for (const auto& u : doc.at("users")) {
    const auto got = store.get_user(u.at("user_id").get<std::string>());
    EXPECT_EQ(user_to_json(got).at("class_id"), u.at("class_id"));
    EXPECT_EQ(got.preferences, u.value("preferences", std::map<std::string, std::string>{}));
    EXPECT_EQ(got.aliases, u.value("aliases", std::map<std::string, std::string>{}));
  }
  for (const auto& c : doc.at("classes")) {
    const auto got = store.find_class(c.at("class_id").get<std::string>());
    ASSERT_TRUE(got);
    EXPECT_EQ(got->rights, c.at("rights").get<std::set<std::string>>());
  }
}

TEST(ProfileStore, CheckRight) {
  ProfileStore store;
  store.load_json(kDoc);
  EXPECT_EQ(store.check_right("bob", "flight.update"), Decision::kDeny);
  EXPECT_EQ(store.check_right("alice", "flight.update"), Decision::kAllow);
  EXPECT_EQ(code_of([&] { store.check_right("mallory", "flight.read"); }), Errc::kUnknownUser);
}

TEST(ProfileStore, SameClassUsersAgree) {
  ProfileStore store;
  store.load_json(kDoc);
  for (const char* p : {"flight.read", "flight.update", "x", ""}) {
    EXPECT_EQ(store.check_right("alice", p), store.check_right("dave", p)) << p;
  }
}

TEST(ProfileStore, Aliases) {
  ProfileStore store;
  store.load_json(kDoc);
  EXPECT_EQ(store.resolve_alias("alice", "AF123"), "AF123");
  store.set_alias("alice", "shuttle", "AF123");
  EXPECT_EQ(store.resolve_alias("alice", "shuttle"), "AF123");
  EXPECT_EQ(store.personal_name("alice", "AF123"), "shuttle");
  EXPECT_EQ(code_of([&] { store.set_alias("alice", "a", "shuttle"); }), Errc::kAliasChain);
  EXPECT_EQ(code_of([&] { store.set_alias("alice", "AF123", "BA1"); }), Errc::kAliasChain);
  EXPECT_EQ(code_of([&] { store.resolve_alias("ghost", "x"); }), Errc::kUnknownUser);
}

TEST(ProfileStore, AliasChainInFileRejected) {
  auto bad = kDoc;
  bad["users"][2]["aliases"]["bus"] = "shuttle";
  ProfileStore store;
  EXPECT_THROW(store.load_json(bad), ParseError);
}

TEST(ProfileStore, Preferences) {
  ProfileStore store;
  store.load_json(kDoc);
  EXPECT_EQ(store.get_user("alice").preferences.at("terminal"), "pc");
  store.set_preference("alice", "terminal", "pda");
  EXPECT_EQ(store.get_user("alice").preferences.at("terminal"), "pda");
  EXPECT_EQ(code_of([&] { store.set_preference("ghost", "k", "v"); }), Errc::kUnknownUser);
}

TEST(ProfileStoreProperty, ResolveIsIdempotent) {
  ProfileStore store;
  store.load_json(kDoc);
  std::mt19937_64 rng(5);
  const std::vector<std::string> names{"a", "b", "c", "d", "e", "f", "AF1", "AF2"};
  const auto pick = [&] { return names[rng() % names.size()]; };
  for (int i = 0; i < 300; ++i) {
    try {
      store.set_alias("alice", pick(), pick());
    } catch (const Error&) {
    }
    for (const auto& n : names) {
      const auto once = store.resolve_alias("alice", n);
      EXPECT_EQ(store.resolve_alias("alice", once), once);
    }
  }
}

TEST(ProfileStore, ReadersNeverSeePartialRecords) {
  ProfileStore store;
  store.load_json(kDoc);
  std::atomic<bool> stop{false};
  std::thread writer([&] {
    for (int i = 0; i < 2000; ++i) {
      auto doc = kDoc;
      const std::string v = std::to_string(i);
      doc["users"][0]["preferences"] = {{"a", v}, {"b", v}};
      store.load_json(doc);
    }
    stop = true;
  });
  int checked = 0;
  while (!stop) {
    const auto u = store.get_user("alice");
    if (u.preferences.count("a")) {
      EXPECT_EQ(u.preferences.at("a"), u.preferences.at("b"));
      ++checked;
    }
  }
  writer.join();
  EXPECT_GE(checked, 0);
}

}  // namespace
}  // namespace hic
