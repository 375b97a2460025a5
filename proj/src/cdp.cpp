#include "cimcs/cdp.hpp"

#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"
#include "cimcs/metrics.hpp"

namespace cimcs {

namespace {

std::vector<Eigen::Index> support_of(const Bits& sigma) {
  std::vector<Eigen::Index> s;
  for (std::size_t i = 0; i < sigma.size(); ++i)
    if (sigma[i]) s.push_back(static_cast<Eigen::Index>(i));
  return s;
}

Matrix support_columns(const Matrix& a, const std::vector<Eigen::Index>& s) {
  Matrix as(a.rows(), static_cast<Eigen::Index>(s.size()));
  for (std::size_t k = 0; k < s.size(); ++k) as.col(static_cast<Eigen::Index>(k)) = a.col(s[k]);
  return as;
}

Vector embed(const Vector& rs, const std::vector<Eigen::Index>& s, std::size_t n) {
  Vector r = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < s.size(); ++k) r[s[k]] = rs[static_cast<Eigen::Index>(k)];
  return r;
}

void check(const Instance& inst, const Bits& sigma) {
  if (sigma.size() != inst.n()) throw DimensionError("sigma length does not match N");
}

}  // namespace

Vector solve_signal(const Instance& inst, const Bits& sigma, const Matrix* gram) {
  check(inst, sigma);
  const auto s = support_of(sigma);
  if (s.empty()) return Vector::Zero(static_cast<Eigen::Index>(inst.n()));
  if (s.size() > inst.m())
    throw RankDeficiencyError("support size " + std::to_string(s.size()) + " exceeds M=" + std::to_string(inst.m()),
                              s.size());
  const Matrix as = support_columns(inst.a_mat, s);
  Matrix g;
  if (gram) {
    g.resize(as.cols(), as.cols());
    for (std::size_t q = 0; q < s.size(); ++q)
      for (std::size_t p = 0; p < s.size(); ++p)
        g(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = (*gram)(s[p], s[q]);
  } else {
    g = as.transpose() * as;
  }
  const Vector b = as.transpose() * inst.y;
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success || !(llt.rcond() * kMaxGramCondition >= 1.0))
    throw RankDeficiencyError("support Gram matrix of size " + std::to_string(s.size()) + " is ill-conditioned",
                              s.size());
  Vector rs = llt.solve(b);
  // One step of iterative refinement tightens the stationarity residual.
  rs += llt.solve(b - g * rs);
  return embed(rs, s, inst.n());
}

CdpResult solve_signal_or_fallback(const Instance& inst, const Bits& sigma, const Matrix* gram) {
  try {
    return {solve_signal(inst, sigma, gram), false};
  } catch (const RankDeficiencyError&) {
    const auto s = support_of(sigma);
    const Matrix as = support_columns(inst.a_mat, s);
    Eigen::ColPivHouseholderQR<Matrix> qr(as);
    Vector rs = qr.solve(inst.y);
    return {embed(rs, s, inst.n()), true};
  }
}

double residual_energy(const Instance& inst, const Vector& r, const Bits& sigma, double lambda) {
  return hamiltonian(inst, r, sigma, lambda);
}

Vector energy_gradient(const Instance& inst, const Vector& r, const Bits& sigma) {
  check(inst, sigma);
  const Vector v = masked(r, sigma);
  Vector h;
  kernels::local_field(inst.a_mat, inst.y, v, h);
  Vector g(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) g[i] = sigma[static_cast<std::size_t>(i)] ? h[i] - r[i] : 0.0;
  return g;
}

}  // namespace cimcs
