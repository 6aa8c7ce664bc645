#pragma once

// The eight acceptance checks. Each returns a verdict with a short detail
// string; the acceptance binary prints them and unit tests assert on them.

#include <cstdint>
#include <string>

namespace hic::testing {

struct Verdict {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Directory holding airline.task.xml, profiles.json, hicd.json, ...
std::string fixtures_dir();

Verdict check_select_fragment();
Verdict check_oracle_replay(int sessions, int steps, std::uint64_t seed);
Verdict check_heap_model(int ops, std::uint64_t seed);
Verdict check_large_model(std::size_t min_lines, std::size_t min_chars);
Verdict check_rights();
Verdict check_actor_interchangeability();
Verdict check_failover();
Verdict check_adaptation(int payloads, std::uint64_t seed);

}  // namespace hic::testing
