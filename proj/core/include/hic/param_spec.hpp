#pragma once

#include <string>
#include <vector>

namespace hic {

// (id, semantic type) pair used by method descriptors and task models. The
// type is an opaque identifier and is never interpreted.
struct ParamSpec {
  std::string id;
  std::string type;

  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

using ParamList = std::vector<ParamSpec>;

}  // namespace hic
