#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nlmc/geometry.hpp"

namespace test_support {

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nlmc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random segments strictly inside the unit square.
inline std::vector<nlmc::geometry::Segment> random_segments(unsigned seed, int count, double lmin, double lmax) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<nlmc::geometry::Segment> out;
  while (static_cast<int>(out.size()) < count) {
    const double len = lmin + (lmax - lmin) * u(rng);
    const double th = 3.141592653589793 * u(rng);
    const nlmc::geometry::Point m{u(rng), u(rng)};
    const nlmc::geometry::Point h{0.5 * len * std::cos(th), 0.5 * len * std::sin(th)};
    const nlmc::geometry::Segment s{m - h, m + h};
    auto inside = [](nlmc::geometry::Point p) { return p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0; };
    if (inside(s.a) && inside(s.b)) out.push_back(s);
  }
  return out;
}

}  // namespace test_support
