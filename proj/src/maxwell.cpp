#include "cimcs/maxwell.hpp"

#include <numeric>

#include <boost/random/uniform_int_distribution.hpp>

#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"
#include "cimcs/metrics.hpp"

namespace cimcs {

MaxwellResult maxwell_sweeps(const Instance& inst, Vector r, Bits sigma, double eta, Chi chi, Rng& rng,
                             const MaxwellOptions& opts) {
  const auto n = inst.n();
  if (static_cast<std::size_t>(r.size()) != n || sigma.size() != n)
    throw DimensionError("maxwell_sweeps: r/sigma length does not match N");
  if (!(eta >= 0.0)) throw ParameterError("eta must be >= 0");
  const double lambda = 0.5 * eta * eta;
  const Matrix& a = inst.a_mat;

  // res = y − A(σ∘r), kept current through one column per flip.
  Vector v = masked(r, sigma);
  for (std::size_t i = 0; i < n; ++i)
    if (!sigma[i]) r[static_cast<Eigen::Index>(i)] = 0.0;
  Vector u;
  kernels::apply(a, v, u);

  MaxwellResult out;
  double energy = 0.5 * u.squaredNorm() - inst.y.dot(u) + lambda * static_cast<double>(popcount(sigma));
  Vector res = inst.y - u;
  out.energy_trace.push_back(energy);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  while (out.sweeps < opts.max_sweeps) {
    for (std::size_t k = n; k > 1; --k) {
      boost::random::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(order[k - 1], order[pick(rng)]);
    }
    ++out.sweeps;
    bool any = false;
    for (std::size_t i : order) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double vi = v[ii];
      const double h = a.col(ii).dot(res) + vi;
      const std::uint8_t target = heaviside(f_chi(h, chi) - eta);
      if (target == sigma[i]) continue;
      const double nv = target ? h : 0.0;
      // ℋ restricted to site i: ½v² − v h + λσ.
      const double delta = (0.5 * nv * nv - nv * h + lambda * target) - (0.5 * vi * vi - vi * h + lambda * sigma[i]);
      if (delta > 0.0) {
        ++out.rejected;
        continue;
      }
      sigma[i] = target;
      r[ii] = nv;
      v[ii] = nv;
      res -= (nv - vi) * a.col(ii);
      energy += delta;
      ++out.flips;
      any = true;
      out.energy_trace.push_back(opts.exact_energy_trace ? hamiltonian(inst, r, sigma, lambda) : energy);
    }
    if (!any) {
      out.converged = true;
      break;
    }
  }
  out.sigma = std::move(sigma);
  out.r = std::move(r);
  return out;
}

}  // namespace cimcs
