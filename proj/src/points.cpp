#include "hmx/points.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hmx/io.hpp"
#include "hmx/rng.hpp"

namespace hmx {

void PointSet::validate() const {
  if (n < 1 || d < 1) throw std::invalid_argument("PointSet: n and d must be >= 1");
  if (coords.size() != n * d) throw std::invalid_argument("PointSet: coords length != n*d");
  for (double c : coords)
    if (!std::isfinite(c)) throw std::invalid_argument("PointSet: non-finite coordinate");
}

namespace {

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

PointSet load_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open point file: " + path);
  PointSet pts;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++lineno;
    row.clear();
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      double v;
      const auto* end = tok.data() + tok.size();
      const auto res = std::from_chars(tok.data(), end, v);
      if (res.ec != std::errc{} || res.ptr != end)
        throw io_error(path + ":" + std::to_string(lineno) + ": cannot parse '" + tok + "'");
      if (!std::isfinite(v))
        throw io_error(path + ":" + std::to_string(lineno) + ": non-finite coordinate");
      row.push_back(v);
    }
    if (row.empty()) continue;  // blank line
    if (pts.d == 0) {
      pts.d = row.size();
    } else if (row.size() != pts.d) {
      throw io_error(path + ":" + std::to_string(lineno) + ": ragged row, expected " +
                     std::to_string(pts.d) + " columns, got " + std::to_string(row.size()));
    }
    pts.coords.insert(pts.coords.end(), row.begin(), row.end());
    ++pts.n;
  }
  if (pts.n == 0) throw io_error(path + ": no points");
  return pts;
}

PointSet load_binary(const std::string& path) {
  auto r = ByteReader::from_file(path);
  PointSet pts;
  pts.n = r.u64();
  pts.d = r.u64();
  if (pts.n < 1 || pts.d < 1 || pts.n > (1ULL << 40) || pts.d > (1ULL << 20))
    throw io_error(path + ": implausible point file header");
  pts.coords.resize(pts.n * pts.d);
  r.raw(pts.coords.data(), pts.coords.size() * sizeof(double));
  if (!r.at_end()) throw io_error(path + ": trailing bytes");
  pts.validate();
  return pts;
}

}  // namespace

PointSet load_points(const std::string& path, PointFormat format) {
  if (format == PointFormat::Auto)
    format = ends_with(path, ".bin") ? PointFormat::Binary : PointFormat::Text;
  return format == PointFormat::Binary ? load_binary(path) : load_text(path);
}

void save_points_binary(const PointSet& pts, const std::string& path) {
  ByteWriter w;
  w.u64(pts.n);
  w.u64(pts.d);
  w.raw(pts.coords.data(), pts.coords.size() * sizeof(double));
  w.write_file(path);
}

PointSet synth_points(SynthShape shape, std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_points: n must be >= 1");
  PointSet pts;
  pts.n = n;
  switch (shape) {
    case SynthShape::Grid2d: {
      pts.d = 2;
      std::size_t side = 1;
      while (side * side < n) ++side;
      pts.coords.reserve(2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        pts.coords.push_back(static_cast<double>(i % side));
        pts.coords.push_back(static_cast<double>(i / side));
      }
      break;
    }
    case SynthShape::UniformRandom: {
      if (d < 1) throw std::invalid_argument("synth_points: d must be >= 1");
      pts.d = d;
      Rng rng(seed);
      pts.coords.resize(n * d);
      for (auto& c : pts.coords) c = rng.uniform();
      break;
    }
    case SynthShape::Sphere3d: {
      pts.d = 3;
      Rng rng(seed);
      pts.coords.resize(3 * n);
      for (std::size_t i = 0; i < n; ++i) {
        double x, y, z, norm;
        do {
          x = rng.normal();
          y = rng.normal();
          z = rng.normal();
          norm = std::sqrt(x * x + y * y + z * z);
        } while (norm < 1e-12);
        pts.coords[3 * i] = x / norm;
        pts.coords[3 * i + 1] = y / norm;
        pts.coords[3 * i + 2] = z / norm;
      }
      break;
    }
  }
  return pts;
}

SynthShape parse_synth_shape(const std::string& name) {
  if (name == "grid2d") return SynthShape::Grid2d;
  if (name == "uniform_random") return SynthShape::UniformRandom;
  if (name == "sphere3d") return SynthShape::Sphere3d;
  throw std::invalid_argument("unknown synthetic shape: " + name);
}

}  // namespace hmx
