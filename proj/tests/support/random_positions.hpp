#pragma once

#include <vector>

#include "cvrank/rng.hpp"
#include "cvrank/synthetic.hpp"

namespace testing_support {

// Independent random positions; every fourth or so carries extra pieces so
// that change values vary in spread as well as level.
inline std::vector<cvrank::FenRecord> position_walk(cvrank::Rng& rng, std::size_t n, std::size_t pieces) {
  std::vector<cvrank::FenRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cvrank::Rng local = cvrank::Rng::stream(rng(), 0);
    const std::size_t extra = rng.uniform_int(0, 3) == 0 ? pieces + 4 : pieces;
    out.push_back(cvrank::random_position(local, extra));
  }
  return out;
}

}  // namespace testing_support
