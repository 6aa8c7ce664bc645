#pragma once

// Hand-rolled random generators for the property tests.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "hic/presentation.hpp"

namespace hic::testing {

using Rng = std::mt19937_64;

struct ModelShape {
  int min_states = 1;
  int max_states = 8;
  int max_events = 4;
  int max_params = 3;
  // Point some branches at states that do not exist.
  bool dangling = false;
};

// A task-model document, one element per line, with a starting state.
std::string random_task_model_xml(Rng& rng, const ModelShape& shape = {});

// A valid, fully reachable model at least this long, in lines and bytes.
std::string large_task_model_xml(std::size_t min_lines, std::size_t min_chars);

// Mixed ASCII and multi-byte text of 0..max_len code points.
std::string random_text(Rng& rng, std::size_t max_len);

DisplayPayload random_payload(Rng& rng);

// Two or three payloads sharing a "key" column with overlapping key values.
std::vector<DisplayPayload> random_join_sources(Rng& rng);

}  // namespace hic::testing
