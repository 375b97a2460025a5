#include "cimcs/hybrid.hpp"

#include <algorithm>
#include <string>

#include "cimcs/cdp.hpp"
#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"
#include "cimcs/lasso.hpp"
#include "cimcs/metrics.hpp"

namespace cimcs {

std::string_view to_string(RInit v) {
  switch (v) {
    case RInit::Zeros:
      return "zeros";
    case RInit::TruthOracle:
      return "truth";
    case RInit::FromLasso:
      return "lasso";
  }
  return "?";
}

RInit r_init_from_string(std::string_view s) {
  if (s == "zeros") return RInit::Zeros;
  if (s == "truth") return RInit::TruthOracle;
  if (s == "lasso") return RInit::FromLasso;
  throw ParameterError("unknown r_init '" + std::string(s) + "'");
}

std::string_view to_string(SupportBackend v) { return v == SupportBackend::Sde ? "sde" : "maxwell"; }

SupportBackend backend_from_string(std::string_view s) {
  if (s == "sde") return SupportBackend::Sde;
  if (s == "maxwell") return SupportBackend::DeterministicMaxwell;
  throw ParameterError("unknown backend '" + std::string(s) + "'");
}

void HybridConfig::validate() const {
  if (!(eta_end >= 0.0) || !(eta_init >= eta_end)) throw ParameterError("need eta_init >= eta_end >= 0");
  if (outer_iters < 1) throw ParameterError("outer_iters must be >= 1");
  if (backend == SupportBackend::Sde) cim.validate();
}

double threshold_at(const HybridConfig& cfg, int t) {
  return std::max(cfg.eta_init * (1.0 - static_cast<double>(t) / cfg.outer_iters), cfg.eta_end);
}

HybridResult run_hybrid(const Instance& inst, const HybridConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(inst.n());
  Vector r = Vector::Zero(n);
  switch (cfg.r_init) {
    case RInit::Zeros:
      break;
    case RInit::TruthOracle:
      r = inst.signal();
      break;
    case RInit::FromLasso:
      r = run_ista(inst, cfg.eta_init, cfg.cim.chi, cfg.lasso_max_iters).y;
      break;
  }

  Matrix gram;
  kernels::gram(inst.a_mat, gram);

  HybridResult out;
  Bits sigma(inst.n(), 0);
  for (std::size_t i = 0; i < inst.n(); ++i) sigma[i] = r[static_cast<Eigen::Index>(i)] != 0.0;
  Bits prev_sigma;
  Vector prev_r;
  bool prev_rd = false;
  for (int t = 0; t < cfg.outer_iters; ++t) {
    const double eta = threshold_at(cfg, t);
    const double lambda = HybridConfig::lambda_of_eta(eta);
    if (cfg.backend == SupportBackend::Sde) {
      sigma = run_support_estimation(inst, r, eta, cfg.cim, rng, nullptr, &gram);
    } else {
      MaxwellResult mr = maxwell_sweeps(inst, r, sigma, eta, cfg.cim.chi, rng, cfg.maxwell);
      out.energy_path.insert(out.energy_path.end(), mr.energy_trace.begin(), mr.energy_trace.end());
      sigma = std::move(mr.sigma);
    }
    bool rd;
    if (sigma == prev_sigma) {
      r = prev_r;
      rd = prev_rd;
    } else {
      CdpResult cr = solve_signal_or_fallback(inst, sigma, &gram);
      r = std::move(cr.r);
      rd = cr.rank_deficient;
      prev_sigma = sigma;
      prev_r = r;
      prev_rd = rd;
    }
    if (rd) ++out.rank_deficient_count;
    const double energy = hamiltonian(inst, r, sigma, lambda);
    if (cfg.backend == SupportBackend::DeterministicMaxwell) out.energy_path.push_back(energy);
    out.trace.push_back({eta, popcount(sigma), energy, rmse(r, sigma, inst.x_true, inst.xi_true), rd});
  }
  out.sigma = std::move(sigma);
  out.r = std::move(r);
  return out;
}

}  // namespace cimcs
