#include "hmx/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace hmx {

void Kernel::validate() const {
  if (type == KernelType::Gaussian && !(bandwidth > 0.0))
    throw std::invalid_argument("Gaussian kernel: bandwidth must be > 0");
}

std::string Kernel::describe() const {
  if (type == KernelType::Gaussian) return "gaussian:" + std::to_string(bandwidth);
  return "invdist";
}

double kernel_eval(const Kernel& kernel, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("kernel_eval: point dimension mismatch");
  double dist2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    dist2 += diff * diff;
  }
  switch (kernel.type) {
    case KernelType::Gaussian:
      return std::exp(-dist2 / (2.0 * kernel.bandwidth * kernel.bandwidth));
    case KernelType::InverseDistance:
      return dist2 == 0.0 ? 1.0 : 1.0 / std::sqrt(dist2);
  }
  return 0.0;  // unreachable
}

DenseMatrix dense_block(const Kernel& kernel, const PointSet& points,
                        std::span<const index_t> row_idx, std::span<const index_t> col_idx) {
  for (index_t i : row_idx)
    if (i >= points.n) throw std::invalid_argument("dense_block: row index out of range");
  for (index_t j : col_idx)
    if (j >= points.n) throw std::invalid_argument("dense_block: col index out of range");
  DenseMatrix m(row_idx.size(), col_idx.size());
  for (std::size_t b = 0; b < col_idx.size(); ++b) {
    const auto y = points.point(col_idx[b]);
    double* col = m.col(b);
    for (std::size_t a = 0; a < row_idx.size(); ++a)
      col[a] = kernel_eval(kernel, points.point(row_idx[a]), y);
  }
  return m;
}

Kernel parse_kernel(const std::string& spec) {
  if (spec == "invdist") return Kernel::inverse_distance();
  const std::string prefix = "gaussian:";
  if (spec.rfind(prefix, 0) == 0) {
    const double h = std::stod(spec.substr(prefix.size()));
    Kernel k = Kernel::gaussian(h);
    k.validate();
    return k;
  }
  throw std::invalid_argument("unknown kernel spec: " + spec +
                              " (expected gaussian:H or invdist)");
}

}  // namespace hmx
