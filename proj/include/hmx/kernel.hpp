#pragma once

#include <span>
#include <string>

#include "hmx/dense.hpp"
#include "hmx/points.hpp"

namespace hmx {

enum class KernelType { Gaussian, InverseDistance };

/// Symmetric kernel functions.
///
/// Gaussian: exp(-|x-y|^2 / (2 h^2)), h > 0.
/// InverseDistance: 1/|x-y|, with K(x,y) = 1.0 whenever |x-y| = 0. The
/// singular diagonal has no standard convention; a finite value keeps the
/// near blocks well-defined, and it applies to exact duplicates as well.
struct Kernel {
  KernelType type = KernelType::Gaussian;
  double bandwidth = 1.0;  // Gaussian only

  void validate() const;

  static Kernel gaussian(double h) { return {KernelType::Gaussian, h}; }
  static Kernel inverse_distance() { return {KernelType::InverseDistance, 0.0}; }

  std::string describe() const;

  bool operator==(const Kernel&) const = default;
};

double kernel_eval(const Kernel& kernel, std::span<const double> x, std::span<const double> y);

/// result(a,b) = kernel(points[row_idx[a]], points[col_idx[b]]), column-major.
DenseMatrix dense_block(const Kernel& kernel, const PointSet& points,
                        std::span<const index_t> row_idx, std::span<const index_t> col_idx);

/// Parses "gaussian:H" or "invdist".
Kernel parse_kernel(const std::string& spec);

}  // namespace hmx
