#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

#include "hic/middleware.hpp"

namespace hic {

// Scripted sessions, one JSON object per line; blank lines and lines starting
// with '#' are skipped. Steps:
//   {"open":    {"actor", "as", "container", ["app"], ["capability"]}}
//   {"resume":  {"session", "container", "capability"}}
//   {"action":  {"session", "event", ["params"], ["actor"]}}
//   {"capture": {"session", "kind", "payload"}}
//   {"update":  {"flight", "patch"}}             feed update, no rights check
//   {"random_walk": {"session", "steps"}}        seeded walk over allowed events
//   {"expect":  {"session", ["state"], ["status"], ["branch"], ["reason_code"],
//                ["history"]}}
// "session" names the alias given by "as". status/branch/reason_code refer to
// the session's latest notification.
struct ScenarioResult {
  bool ok = true;
  std::size_t steps = 0;
  std::size_t failed_line = 0;  // 1-based; 0 when ok
  std::string message;
};

// Throws nothing for script failures; they are reported in the result.
ScenarioResult run_scenario(Middleware& mw, std::string_view script, std::uint64_t seed,
                            std::ostream* log = nullptr);
ScenarioResult run_scenario_file(Middleware& mw, const std::filesystem::path& path,
                                 std::uint64_t seed, std::ostream* log = nullptr);

}  // namespace hic
