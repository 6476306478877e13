#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmx/dense.hpp"

namespace hmx {

/// N points in d dimensions, point-major: coords[i*d .. i*d+d) is point i.
struct PointSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> coords;

  std::span<const double> point(std::size_t i) const { return {coords.data() + i * d, d}; }

  void validate() const;

  bool operator==(const PointSet&) const = default;
};

enum class PointFormat { Auto, Text, Binary };

/// Text: one point per line, whitespace or comma separated.
/// Binary: u64 n, u64 d, then n*d little-endian doubles, point-major.
PointSet load_points(const std::string& path, PointFormat format = PointFormat::Auto);
void save_points_binary(const PointSet& pts, const std::string& path);

enum class SynthShape { Grid2d, UniformRandom, Sphere3d };

/// Deterministic synthetic point sets for testing and benchmarks.
/// grid2d ignores the dimension argument (d=2), sphere3d forces d=3.
PointSet synth_points(SynthShape shape, std::size_t n, std::size_t d, std::uint64_t seed);

SynthShape parse_synth_shape(const std::string& name);

}  // namespace hmx
