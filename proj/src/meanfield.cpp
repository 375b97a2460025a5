#include "cimcs/meanfield.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cimcs/errors.hpp"
#include "cimcs/quadrature.hpp"

namespace cimcs {

std::string_view to_string(MeModel m) {
  switch (m) {
    case MeModel::CimFinite:
      return "cim_finite";
    case MeModel::CimInfinite:
      return "cim_infinite";
    case MeModel::Lasso:
      return "lasso";
  }
  return "?";
}

MeModel me_model_from_string(std::string_view s) {
  if (s == "cim_finite") return MeModel::CimFinite;
  if (s == "cim_infinite") return MeModel::CimInfinite;
  if (s == "lasso") return MeModel::Lasso;
  throw ParameterError("unknown ME model '" + std::string(s) + "'");
}

std::string_view to_string(Branch b) { return b == Branch::NearZero ? "near_zero" : "non_zero"; }

std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::Stable:
      return "stable";
    case Stability::Neutral:
      return "neutral";
    case Stability::Unstable:
      return "unstable";
  }
  return "?";
}

void MeConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(a > 0.0 && a <= 1.0)) throw ParameterError("a must lie in (0, 1]");
  if (!(beta >= 0.0)) throw ParameterError("beta must be >= 0");
  if (!(eta >= 0.0)) throw ParameterError("eta must be >= 0");
  if (!(as2 > 0.0)) throw ParameterError("as2 must be > 0");
  if (!(k_tilde > 0.0)) throw ParameterError("k_tilde must be > 0");
  if (quad.hermite_order < 8 || quad.cs_grid < 8) throw ParameterError("quadrature orders must be >= 8");
  if (!(fp.tol > 0.0)) throw ParameterError("fixed-point tol must be > 0");
  if (!(fp.damping > 0.0 && fp.damping <= 1.0)) throw ParameterError("damping must lie in (0, 1]");
  dist.validate();
  if (dist.natural_chi() != chi) throw ParameterError("chi is inconsistent with the source distribution");
}

double potential(double c, double s, double p) {
  const double c2 = c * c, s2 = s * s;
  return 0.5 * (1.0 - p) * c2 + 0.5 * (1.0 + p) * s2 + 0.5 * c2 * s2 + 0.25 * c2 * c2 + 0.25 * s2 * s2;
}

// ---------------------------------------------------------------------------
// Finite-A_s amplitude density

namespace {

class DensityEvaluator {
 public:
  explicit DensityEvaluator(const MeConfig& cfg) : cfg_(cfg), gh_(quad::gauss_hermite(cfg.quad.hermite_order)) {}

  BranchMoments evaluate(double h_p, double h_m) const {
    const double b_p = cfg_.k_tilde * (f_chi(h_p, cfg_.chi) - cfg_.eta);
    const double b_m = cfg_.k_tilde * (f_chi(h_m, cfg_.chi) - cfg_.eta);
    BranchMoments out;
    double d = std::max(cfg_.p_pump - 1.0, 0.0) + 0.5;
    for (std::size_t it = 0; it < 200; ++it) {
      const double kappa = 2.0 * cfg_.as2 / d;
      const Sums s = sums(b_p, b_m, kappa);
      out.xi_c = s.c2 / s.z;
      out.xi_s = s.s2 / s.z;
      out.up_prob = s.zp / s.z;
      out.iterations = it + 1;
      const double next = out.xi_c + out.xi_s + 0.5;
      if (std::abs(next - d) <= 1e-13 * next) {
        out.converged = true;
        break;
      }
      d = next;
    }
    return out;
  }

 private:
  struct Sums {
    double z, zp, c2, s2;
  };

  // log ∫ds e^{−κ(½a s² + ¼s⁴)} and the conditional ⟨s²⟩, a = 1+p+c².
  void s_marginal(double c, double kappa, double& log_i, double& s2) const {
    const double ac = 1.0 + cfg_.p_pump + c * c;
    const double q2 = kappa * ac;
    const double eps = 1.0 / (4.0 * kappa * ac * ac);
    double i0, i2;
    if (eps < 1e-4) {
      // ∫e^{−u²/2}(1 − εu⁴ + ε²u⁸/2) du and the u² moment, per √(2π).
      i0 = 1.0 - 3.0 * eps + 52.5 * eps * eps;
      i2 = 1.0 - 15.0 * eps + 472.5 * eps * eps;
    } else {
      i0 = 0.0;
      i2 = 0.0;
      for (std::size_t k = 0; k < gh_.nodes.size(); ++k) {
        const double u = std::numbers::sqrt2 * gh_.nodes[k];
        const double u2 = u * u;
        const double wk = gh_.weights[k] * std::exp(-eps * u2 * u2);
        i0 += wk;
        i2 += wk * u2;
      }
      // Normalize to the same √(2π) convention: √2·Σw = √(2π) at ε = 0.
      i0 *= std::numbers::sqrt2 / std::sqrt(2.0 * std::numbers::pi);
      i2 *= std::numbers::sqrt2 / std::sqrt(2.0 * std::numbers::pi);
    }
    log_i = std::log(i0) - 0.5 * std::log(q2);
    s2 = i2 / (i0 * q2);
  }

  std::vector<double> grid(double b_p, double b_m, double kappa) const {
    const double p1 = 1.0 - cfg_.p_pump;
    const double scale = std::pow(1.0 / kappa, 0.25);
    std::vector<double> stationary;
    for (double r : quad::depressed_cubic_roots(p1, -b_p))
      if (r > 0.0) stationary.push_back(r);
    for (double r : quad::depressed_cubic_roots(p1, -b_m))
      if (r < 0.0) stationary.push_back(r);
    double reach = 1.0;
    for (double r : stationary) reach = std::max(reach, std::abs(r));
    const double half = reach + 2.0 + 6.0 * scale;

    std::vector<double> g;
    const int nu = cfg_.quad.cs_grid;
    g.reserve(static_cast<std::size_t>(nu) + 400);
    for (int i = 0; i < nu; ++i) g.push_back(-half + 2.0 * half * i / (nu - 1));
    g.push_back(0.0);
    for (int k = 0; k <= 48; ++k) {
      const double v = std::pow(10.0, -k / 4.0) * std::min(1.0, half);
      g.push_back(v);
      g.push_back(-v);
    }
    for (double r : stationary) {
      const double curv = std::abs(-p1 - 3.0 * r * r);
      const double w = std::min(curv > 0.0 ? std::sqrt(1.0 / (kappa * curv)) : 2.0 * scale, 2.0 * scale);
      for (int j = -60; j <= 60; ++j) {
        const double c = r + 12.0 * w * j / 60.0;
        if ((r > 0.0 && c > 0.0) || (r < 0.0 && c < 0.0))
          if (std::abs(c) < half) g.push_back(c);
      }
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }

  Sums sums(double b_p, double b_m, double kappa) const {
    const double p1 = 1.0 - cfg_.p_pump;
    const std::vector<double> g = grid(b_p, b_m, kappa);
    const std::size_t n = g.size();
    std::vector<double> ell(n), s2(n);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double c = g[i];
      const double b = c > 0.0 ? b_p : b_m;
      double li;
      s_marginal(c, kappa, li, s2[i]);
      ell[i] = kappa * (c * b - 0.5 * p1 * c * c - 0.25 * c * c * c * c) + li;
      top = std::max(top, ell[i]);
    }
    Sums s{0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double half_dc = 0.5 * (g[i + 1] - g[i]);
      const double f0 = std::exp(ell[i] - top), f1 = std::exp(ell[i + 1] - top);
      const double mass = half_dc * (f0 + f1);
      s.z += mass;
      if (g[i] >= 0.0) s.zp += mass;
      s.c2 += half_dc * (f0 * g[i] * g[i] + f1 * g[i + 1] * g[i + 1]);
      s.s2 += half_dc * (f0 * s2[i] + f1 * s2[i + 1]);
    }
    return s;
  }

  const MeConfig& cfg_;
  quad::Rule gh_;
};

}  // namespace

BranchMoments branch_density_moments(double h_p, double h_m, const MeConfig& cfg) {
  if (!std::isfinite(h_p) || !std::isfinite(h_m)) throw ParameterError("branch_density_moments: non-finite field");
  if (std::isinf(cfg.as2)) throw ParameterError("branch_density_moments needs a finite as2");
  return DensityEvaluator(cfg).evaluate(h_p, h_m);
}

// ---------------------------------------------------------------------------
// Piecewise-linear effective outputs ψ(h_p)

namespace {

struct Piecewise {
  // Pieces: (−∞, t_0), [t_0, t_1), …, [t_{K−1}, ∞); ψ = a0 + a1·h on each.
  std::vector<double> knots;
  std::vector<double> a0, a1;
  bool continuous = false;
  std::vector<double> features;  // h values where ψ changes character

  double jump(std::size_t k) const {
    const double t = knots[k];
    return (a0[k + 1] + a1[k + 1] * t) - (a0[k] + a1[k] * t);
  }
};

Piecewise threshold_output(double theta, Chi chi) {
  Piecewise pw;
  if (chi == Chi::NonNegative) {
    pw.knots = {theta};
    pw.a0 = {0.0, 0.0};
    pw.a1 = {0.0, 1.0};
  } else {
    pw.knots = {-theta, theta};
    pw.a0 = {0.0, 0.0, 0.0};
    pw.a1 = {1.0, 0.0, 1.0};
  }
  pw.features = pw.knots;
  return pw;
}

Piecewise soft_output(double thr, Chi chi) {
  Piecewise pw;
  if (chi == Chi::NonNegative) {
    pw.knots = {thr};
    pw.a0 = {0.0, -thr};
    pw.a1 = {0.0, 1.0};
  } else {
    pw.knots = {-thr, thr};
    pw.a0 = {thr, 0.0, -thr};
    pw.a1 = {1.0, 0.0, 1.0};
  }
  pw.continuous = true;
  pw.features = pw.knots;
  return pw;
}

Piecewise tabulated_output(const MeConfig& cfg, double kappa_u, double h_max, double sigma) {
  const DensityEvaluator dens(cfg);
  auto up = [&](double h) { return dens.evaluate(h, h / kappa_u).up_prob; };
  struct Node {
    double h, p;
  };
  const double tol = cfg.quad.table_tol;
  constexpr std::size_t kMaxNodesPerInterval = 400;

  auto refine = [&](auto&& self, std::vector<Node>& out, Node lo, Node hi, int depth) -> void {
    const double hm = 0.5 * (lo.h + hi.h);
    const Node mid{hm, up(hm)};
    const double lerp = 0.5 * (lo.h * lo.p + hi.h * hi.p);
    // Interpolation error as seen through the z-average of width σ.
    const double seen = std::abs(mid.h * mid.p - lerp) * std::min(1.0, (hi.h - lo.h) / sigma);
    if (depth < 60 && out.size() < kMaxNodesPerInterval && hi.h - lo.h > 1e-12 && seen > tol) {
      self(self, out, lo, mid, depth + 1);
      self(self, out, mid, hi, depth + 1);
    } else {
      out.push_back(mid);
      out.push_back(hi);
    }
  };
  // Coarse nodes include the A_s→∞ switching points so a narrow dip cannot fall between them.
  constexpr int kCoarse = 64;
  std::vector<double> coarse;
  for (int i = 0; i <= kCoarse; ++i) coarse.push_back(-h_max + 2.0 * h_max * i / kCoarse);
  const double theta = 2.0 * cfg.eta / (1.0 + 1.0 / kappa_u);
  for (double t : {0.0, cfg.eta, -cfg.eta, theta, -theta, cfg.eta * kappa_u, -cfg.eta * kappa_u})
    if (std::abs(t) < h_max) coarse.push_back(t);
  std::sort(coarse.begin(), coarse.end());
  coarse.erase(std::unique(coarse.begin(), coarse.end()), coarse.end());

  const auto nc = static_cast<std::ptrdiff_t>(coarse.size());
  std::vector<Node> ends(coarse.size());
  std::vector<std::vector<Node>> parts(coarse.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < nc; ++i) ends[static_cast<std::size_t>(i)] = {coarse[static_cast<std::size_t>(i)], up(coarse[static_cast<std::size_t>(i)])};
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 1; i < nc; ++i) {
    const auto u = static_cast<std::size_t>(i);
    refine(refine, parts[u], ends[u - 1], ends[u], 0);
  }
  std::vector<Node> nodes{ends.front()};
  for (const auto& part : parts) nodes.insert(nodes.end(), part.begin(), part.end());

  Piecewise pw;
  pw.continuous = true;
  const std::size_t k = nodes.size();
  pw.knots.reserve(k);
  for (const auto& nd : nodes) pw.knots.push_back(nd.h);
  pw.a0.push_back(0.0);
  pw.a1.push_back(nodes.front().p);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double y0 = nodes[i].h * nodes[i].p, y1 = nodes[i + 1].h * nodes[i + 1].p;
    const double slope = (y1 - y0) / (nodes[i + 1].h - nodes[i].h);
    pw.a1.push_back(slope);
    pw.a0.push_back(y0 - slope * nodes[i].h);
  }
  pw.a0.push_back(0.0);
  pw.a1.push_back(nodes.back().p);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double d0 = nodes[i].p - 0.5, d1 = nodes[i + 1].p - 0.5;
    if ((d0 < 0.0) != (d1 < 0.0)) pw.features.push_back(nodes[i].h + (nodes[i + 1].h - nodes[i].h) * d0 / (d0 - d1));
  }
  return pw;
}

// z-expectations at h = x + σz.
struct ZMoments {
  double e1;   // E ψ
  double e2;   // E ψ²
  double err;  // E (ψ − x)²
  double s;    // E[zψ]/σ
};

ZMoments z_moments(const Piecewise& pw, double x, double sigma) {
  ZMoments m{0.0, 0.0, 0.0, 0.0};
  const std::size_t kn = pw.knots.size();
  constexpr double kReach = 40.0;
  // Only pieces meeting [x − 40σ, x + 40σ] carry mass.
  const auto first = static_cast<std::size_t>(
      std::upper_bound(pw.knots.begin(), pw.knots.end(), x - kReach * sigma) - pw.knots.begin());
  const auto last = static_cast<std::size_t>(
      std::upper_bound(pw.knots.begin(), pw.knots.end(), x + kReach * sigma) - pw.knots.begin());
  for (std::size_t k = first; k <= last; ++k) {
    const double lo = k == 0 ? -INFINITY : (pw.knots[k - 1] - x) / sigma;
    const double hi = k == kn ? INFINITY : (pw.knots[k] - x) / sigma;
    const auto pm = quad::normal_partial_moments(lo, hi);
    const double c0 = pw.a0[k] + pw.a1[k] * x, c1 = pw.a1[k] * sigma;
    const double d0 = c0 - x;
    m.e1 += c0 * pm.m0 + c1 * pm.m1;
    m.e2 += c0 * c0 * pm.m0 + 2.0 * c0 * c1 * pm.m1 + c1 * c1 * pm.m2;
    m.err += d0 * d0 * pm.m0 + 2.0 * d0 * c1 * pm.m1 + c1 * c1 * pm.m2;
    m.s += pw.a1[k] * pm.m0;
  }
  if (!pw.continuous) {
    for (std::size_t k = first; k < std::min(last + 1, kn); ++k)
      m.s += pw.jump(k) * quad::normal_pdf((pw.knots[k] - x) / sigma) / sigma;
  }
  return m;
}

struct XDomain {
  double lo, hi;
};

XDomain x_domain(const SourceDistribution& d) {
  using K = SourceDistribution::Kind;
  switch (d.kind) {
    case K::GaussianSigned:
      return {-12.0 * std::sqrt(d.sigma2), 12.0 * std::sqrt(d.sigma2)};
    case K::HalfGaussianNonneg:
      return {0.0, 12.0 * std::sqrt(d.sigma2)};
    case K::GammaNonneg:
      return {0.0, d.theta * (d.k + 40.0 + 10.0 * std::sqrt(d.k))};
    case K::BilateralGammaSigned: {
      const double e = d.theta * (d.k + 40.0 + 10.0 * std::sqrt(d.k));
      return {-e, e};
    }
  }
  return {0.0, 0.0};
}

std::vector<double> x_breakpoints(const XDomain& dom, const std::vector<double>& features, double sigma) {
  std::vector<double> bp{dom.lo, dom.hi};
  if (dom.lo < 0.0 && dom.hi > 0.0) bp.push_back(0.0);
  static constexpr std::array<double, 7> kOffsets{-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0};
  for (double t : features)
    for (double o : kOffsets) {
      const double x = t + o * sigma;
      if (x > dom.lo && x < dom.hi) bp.push_back(x);
    }
  return bp;
}

struct Internal {
  double r, q, u, err;  // err = Q − 2R + ⟨x²⟩ carried without cancellation
};

constexpr double kSigmaFloor = 1e-12;
constexpr double kDivergedError = 1e8;

Internal update(MeModel model, const MeConfig& cfg, const Internal& st) {
  const double ratio = cfg.a / cfg.alpha;
  const double sigma = std::max(std::sqrt(cfg.beta * cfg.beta + ratio * std::max(st.err, 0.0)), kSigmaFloor);
  const double kappa_u = 1.0 + ratio * st.u;
  const XDomain dom = x_domain(cfg.dist);

  Piecewise pw;
  switch (model) {
    case MeModel::CimInfinite: {
      const double theta = kappa_u > 0.0 ? 2.0 * cfg.eta / (1.0 + 1.0 / kappa_u) : 0.0;
      pw = threshold_output(theta, cfg.chi);
      break;
    }
    case MeModel::Lasso:
      pw = soft_output(kappa_u * cfg.eta, cfg.chi);
      break;
    case MeModel::CimFinite: {
      if (!(kappa_u > 0.0)) throw ConvergenceError("finite-As equations left the region 1 + aU/alpha > 0");
      const double h_max = std::max(std::abs(dom.lo), std::abs(dom.hi)) + 12.0 * sigma + 1.0;
      pw = tabulated_output(cfg, kappa_u, h_max, sigma);
      break;
    }
  }

  const auto res = quad::integrate(
      [&](double x, double* out) {
        const double g = cfg.dist.pdf(x);
        if (g == 0.0) {
          out[0] = out[1] = out[2] = out[3] = 0.0;
          return;
        }
        const ZMoments zm = z_moments(pw, x, sigma);
        out[0] = g * x * zm.e1;
        out[1] = g * zm.e2;
        out[2] = g * zm.err;
        out[3] = g * zm.s;
      },
      4, x_breakpoints(dom, pw.features, sigma),
      model == MeModel::CimFinite
          ? quad::AdaptiveOptions{std::max(cfg.quad.x_abs_tol, cfg.quad.table_tol),
                                  std::max(cfg.quad.x_rel_tol, cfg.quad.table_tol), cfg.quad.x_max_panels}
          : quad::AdaptiveOptions{cfg.quad.x_abs_tol, cfg.quad.x_rel_tol, cfg.quad.x_max_panels});
  const ZMoments z0 = z_moments(pw, 0.0, sigma);
  const double w0 = (1.0 - cfg.a) / cfg.a;
  return {res.value[0], res.value[1] + w0 * z0.e2, res.value[3] + w0 * z0.s, res.value[2] + w0 * z0.e2};
}

Internal from_state(const MacroState& s, const MeConfig& cfg) {
  const double m2 = second_moment(cfg.dist);
  return {s.r_overlap, s.q_mag, s.u_susc, std::max(s.q_mag - 2.0 * s.r_overlap + m2, 0.0)};
}

}  // namespace

MacroState make_state(double r, double q, double u, const MeConfig& cfg) {
  const double m2 = second_moment(cfg.dist);
  MacroState s;
  s.r_overlap = r;
  s.q_mag = q;
  s.u_susc = u;
  s.w = q - 2.0 * r;
  s.rmse = std::sqrt(std::max(cfg.a * q - 2.0 * cfg.a * r + cfg.a * m2, 0.0));
  s.branch = s.rmse < 0.5 * std::sqrt(cfg.a * m2) ? Branch::NearZero : Branch::NonZero;
  return s;
}

MacroState me_update(MeModel model, const MeConfig& cfg, const MacroState& state) {
  cfg.validate();
  const Internal next = update(model, cfg, from_state(state, cfg));
  return make_state(next.r, next.q, next.u, cfg);
}

MacroState solve_me(MeModel model, const MeConfig& cfg) {
  cfg.validate();
  if (model == MeModel::CimFinite && std::isinf(cfg.as2)) throw ParameterError("finite-As model needs a finite as2");
  const double m2 = second_moment(cfg.dist);
  Internal st;
  if (cfg.warm) {
    st = from_state(*cfg.warm, cfg);
  } else if (cfg.init == MeInit::NearZero) {
    st = {m2, m2, 1.0, 0.0};
  } else {
    st = {1e-6, 1e-6, 1.0, m2 - 1e-6};
  }
  const double d = cfg.fp.damping;
  // The tabulated output is rebuilt every update; its accuracy bounds attainable convergence.
  const double tol = model == MeModel::CimFinite ? std::max(cfg.fp.tol, 10.0 * cfg.quad.table_tol) : cfg.fp.tol;
  MacroState out;
  std::size_t it = 0;
  bool converged = false, diverged = false;
  for (; it < cfg.fp.max_iters; ++it) {
    const Internal nx = update(model, cfg, st);
    const double change =
        std::max({std::abs(nx.r - st.r), std::abs(nx.q - st.q), std::abs(nx.u - st.u), std::abs(nx.err - st.err)});
    st = {(1.0 - d) * st.r + d * nx.r, (1.0 - d) * st.q + d * nx.q, (1.0 - d) * st.u + d * nx.u,
          (1.0 - d) * st.err + d * nx.err};
    if (!std::isfinite(st.r) || !std::isfinite(st.q) || !std::isfinite(st.u) || !(st.err <= kDivergedError * m2)) {
      diverged = true;
      ++it;
      break;
    }
    if (change < tol) {
      converged = true;
      ++it;
      break;
    }
  }
  if (diverged) {
    // Unbounded error: reported as an infinite-RMSE non-zero branch.
    out.r_overlap = out.q_mag = out.u_susc = out.w = out.rmse = INFINITY;
    out.branch = Branch::NonZero;
    out.converged = false;
    out.iterations = it;
    return out;
  }
  out = make_state(st.r, st.q, st.u, cfg);
  // The carried error term is exact where Q − 2R + ⟨x²⟩ cancels.
  out.rmse = std::sqrt(cfg.a * std::max(st.err, 0.0));
  out.branch = out.rmse < 0.5 * std::sqrt(cfg.a * m2) ? Branch::NearZero : Branch::NonZero;
  out.converged = converged;
  out.iterations = it;
  return out;
}

MacroState solve_me_finite_as(const MeConfig& cfg) { return solve_me(MeModel::CimFinite, cfg); }
MacroState solve_me_infinite_as(const MeConfig& cfg) { return solve_me(MeModel::CimInfinite, cfg); }
MacroState solve_me_lasso(const MeConfig& cfg) { return solve_me(MeModel::Lasso, cfg); }

// ---------------------------------------------------------------------------
// Critical points

ScanSolver me_scan_solver(MeModel model, MeConfig base, ScanDirection direction) {
  return [model, base, direction](double a, const std::optional<MacroState>& warm) {
    MeConfig cfg = base;
    cfg.a = a;
    if (warm && std::isfinite(warm->rmse)) cfg.warm = warm;
    cfg.init = direction == ScanDirection::Up ? MeInit::NearZero : MeInit::NonZero;
    return solve_me(model, cfg);
  };
}

CriticalPoint critical_point_scan(const ScanSolver& solver, ScanDirection direction, const ScanOptions& opts) {
  if (!(opts.step > 0.0) || !(opts.a_hi > opts.a_lo)) throw ParameterError("scan needs a_lo < a_hi and step > 0");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((opts.a_hi - opts.a_lo) / opts.step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) grid.push_back(opts.a_lo + opts.step * static_cast<double>(i));
  if (direction == ScanDirection::Down) std::reverse(grid.begin(), grid.end());

  MacroState prev = solver(grid.front(), std::nullopt);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const MacroState cur = solver(grid[i], prev);
    if (std::abs(cur.rmse - prev.rmse) > opts.jump_threshold) {
      double keep = grid[i - 1], jump = grid[i];
      MacroState st = prev;
      while (std::abs(jump - keep) > opts.resolution) {
        const double mid = 0.5 * (keep + jump);
        const MacroState s = solver(mid, st);
        if (std::abs(s.rmse - st.rmse) > opts.jump_threshold) {
          jump = mid;
        } else {
          keep = mid;
          st = s;
        }
      }
      return {true, 0.5 * (keep + jump), st.rmse};
    }
    prev = cur;
  }
  return {};
}

// ---------------------------------------------------------------------------
// Perturbation around perfect reconstruction

namespace {

// Error map ε ↦ (ε/α)[a·T1 + (1−a)·T0] + ⟨x²(1 − P_detect)⟩ at β = 0, threshold θ.
double error_map(const MeConfig& cfg, double theta, double eps) {
  const double ratio = cfg.a / cfg.alpha;
  const double sigma = std::max(std::sqrt(ratio * eps), kSigmaFloor);
  // Detection region in z: F(x + σz) > θ.
  auto region = [&](double x, double& m0, double& m2) {
    const auto up = quad::normal_partial_moments((theta - x) / sigma, INFINITY);
    m0 = up.m0;
    m2 = up.m2;
    if (cfg.chi == Chi::Signed) {
      const auto dn = quad::normal_partial_moments(-INFINITY, (-theta - x) / sigma);
      m0 += dn.m0;
      m2 += dn.m2;
    }
  };
  const XDomain dom = x_domain(cfg.dist);
  std::vector<double> feats{theta};
  if (cfg.chi == Chi::Signed) feats.push_back(-theta);
  const auto res = quad::integrate(
      [&](double x, double* out) {
        const double g = cfg.dist.pdf(x);
        double m0, m2;
        region(x, m0, m2);
        out[0] = g * m2;                  // T1 integrand
        out[1] = g * x * x * (1.0 - m0);  // missed-signal energy
      },
      2, x_breakpoints(dom, feats, sigma), {1e-18, 1e-13, 20000});
  double t0m0, t0m2;
  region(0.0, t0m0, t0m2);
  return (eps / cfg.alpha) * (cfg.a * res.value[0] + (1.0 - cfg.a) * t0m2) + res.value[1];
}

}  // namespace

PerturbationResult perturbation_check(const MeConfig& cfg, double zeta, double neutral_band) {
  cfg.validate();
  if (cfg.beta != 0.0) throw ParameterError("perturbation_check requires beta = 0");
  if (!(zeta > 0.0 && zeta < 1.0)) throw ParameterError("zeta must lie in (0, 1)");
  PerturbationResult out;
  std::array<double, 3> slopes{};
  for (int j = 0; j < 3; ++j) {
    const double z = zeta / std::pow(2.0, j);
    const double theta = z * z;
    const double e1 = 1e-4 * theta * theta, e2 = 2e-4 * theta * theta;
    slopes[static_cast<std::size_t>(j)] = (error_map(cfg, theta, e2) - error_map(cfg, theta, e1)) / (e2 - e1);
    if (j == 0) out.residual = error_map(cfg, theta, 0.0);
  }
  // Corrections are a series in ζ²: two Richardson stages with factors 4 and 16.
  const double r1 = (4.0 * slopes[1] - slopes[0]) / 3.0;
  const double r2 = (4.0 * slopes[2] - slopes[1]) / 3.0;
  out.w_coeff = (16.0 * r2 - r1) / 15.0;
  out.zeta_too_large = out.residual > zeta * zeta * zeta || std::abs(r2 - r1) > 1e-2;
  if (std::abs(out.w_coeff - 1.0) <= neutral_band) out.stability = Stability::Neutral;
  else out.stability = out.w_coeff < 1.0 ? Stability::Stable : Stability::Unstable;
  out.stable = out.stability == Stability::Stable;
  return out;
}

// ---------------------------------------------------------------------------
// Recovery thresholds

double l0_threshold(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  return alpha;
}

double l1_threshold_objective(double z, double alpha, Chi chi) {
  const double kappa = chi == Chi::Signed ? 2.0 : 1.0;
  const double b = (1.0 + z * z) * quad::normal_cdf(-z) - z * quad::normal_pdf(z);
  return (1.0 - (kappa / alpha) * b) / (1.0 + z * z - kappa * b);
}

double l1_weak_threshold(double alpha, Chi chi) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  auto f = [&](double z) {
    const double v = l1_threshold_objective(z, alpha, chi);
    return std::isfinite(v) ? v : -INFINITY;
  };
  constexpr int kScan = 2000;
  constexpr double kZmax = 10.0;
  int best = 0;
  double best_v = -INFINITY;
  for (int i = 0; i <= kScan; ++i) {
    const double v = f(kZmax * i / kScan);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double lo = kZmax * std::max(best - 1, 0) / kScan, hi = kZmax * std::min(best + 1, kScan) / kScan;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > 1e-12) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = f(d);
    }
  }
  return alpha * std::max({best_v, fc, fd});
}

}  // namespace cimcs
