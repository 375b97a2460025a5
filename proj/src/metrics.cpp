#include "cimcs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"

namespace cimcs {

Vector masked(const Vector& r, const Bits& sigma) {
  if (static_cast<std::size_t>(r.size()) != sigma.size()) throw DimensionError("r and sigma lengths differ");
  Vector v(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) v[i] = sigma[static_cast<std::size_t>(i)] ? r[i] : 0.0;
  return v;
}

double rmse(const Vector& r, const Bits& sigma, const Vector& x_true, const Bits& xi_true) {
  const auto n = static_cast<std::size_t>(r.size());
  if (sigma.size() != n || static_cast<std::size_t>(x_true.size()) != n || xi_true.size() != n)
    throw DimensionError("rmse: length mismatch");
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double d = (sigma[i] ? r[ii] : 0.0) - (xi_true[i] ? x_true[ii] : 0.0);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

double direction_cosine(const Bits& xi_true, const Bits& sigma) {
  if (xi_true.size() != sigma.size()) throw DimensionError("direction_cosine: length mismatch");
  std::size_t both = 0, nx = 0, ns = 0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    nx += xi_true[i];
    ns += sigma[i];
    both += xi_true[i] & sigma[i];
  }
  if (nx == 0 && ns == 0) return 1.0;
  if (nx == 0 || ns == 0) return 0.0;
  return static_cast<double>(both) / std::sqrt(static_cast<double>(nx) * static_cast<double>(ns));
}

KsResult ks_one_sided(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.empty() || sample_b.empty()) throw ParameterError("ks_one_sided: empty sample");
  std::vector<double> a(sample_a.begin(), sample_a.end()), b(sample_b.begin(), sample_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double m = static_cast<double>(a.size()), n = static_cast<double>(b.size());
  // Merge scan; both ECDFs are evaluated after consuming every copy of a tied value.
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) x = a[i];
    else x = b[j];
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, static_cast<double>(j) / n - static_cast<double>(i) / m);
  }
  const double p = std::exp(-2.0 * m * n * d * d / (m + n));
  return {d, std::min(1.0, p)};
}

double hamiltonian(const Instance& inst, const Vector& r, const Bits& sigma, double lambda) {
  if (static_cast<std::size_t>(r.size()) != inst.n()) throw DimensionError("hamiltonian: r length mismatch");
  const Vector v = masked(r, sigma);
  Vector u;
  kernels::apply(inst.a_mat, v, u);
  return 0.5 * u.squaredNorm() - inst.y.dot(u) + lambda * static_cast<double>(popcount(sigma));
}

}  // namespace cimcs
