#include "cimcs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <type_traits>

#include "cimcs/errors.hpp"
#include "cimcs/imaging.hpp"
#include "cimcs/lasso.hpp"
#include "cimcs/metrics.hpp"
#include "cimcs/rng.hpp"

namespace cimcs::harness {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<double> finite(double v) {
  if (std::isfinite(v)) return v;
  return std::nullopt;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }
std::string fmt(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); }

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::HybridCim:
      return "hybrid_cim";
    case Method::HybridMaxwell:
      return "hybrid_maxwell";
    case Method::Lasso:
      return "lasso";
    case Method::Sa:
      return "sa";
    case Method::MeCimFinite:
      return "me_cim_finite";
    case Method::MeCimInf:
      return "me_cim_inf";
    case Method::MeLasso:
      return "me_lasso";
    case Method::L1Eq:
      return "l1eq";
    case Method::ZeroFill:
      return "zerofill";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  for (Method m : {Method::HybridCim, Method::HybridMaxwell, Method::Lasso, Method::Sa, Method::MeCimFinite,
                   Method::MeCimInf, Method::MeLasso, Method::L1Eq, Method::ZeroFill})
    if (to_string(m) == s) return m;
  throw ParameterError("unknown method '" + std::string(s) + "'");
}

bool is_me(Method m) { return m == Method::MeCimFinite || m == Method::MeCimInf || m == Method::MeLasso; }

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Trial:
      return "trial";
    case TaskKind::CriticalPoint:
      return "critical_point";
    case TaskKind::OptimalEta:
      return "optimal_eta";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// CSV

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "method", "task",  "n",    "alpha",  "a",    "beta",     "eta",   "eta_init",         "dist",
      "chi",    "as2",   "schedule", "trial", "seed", "rmse",   "direction_cosine", "energy",
      "l0",     "iterations", "converged", "r_overlap", "q_mag", "u_susc", "branch", "wall_time_ms"};
  return cols;
}

std::string csv_header(bool with_wall_time) {
  std::string out;
  const auto& cols = csv_columns();
  const std::size_t count = with_wall_time ? cols.size() : cols.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  return out;
}

std::string csv_row(const RunRecord& r, bool with_wall_time) {
  const std::vector<std::string> fields{std::string(to_string(r.method)),
                                        std::string(to_string(r.task)),
                                        fmt(r.n),
                                        fmt(r.alpha),
                                        fmt(r.a),
                                        fmt(r.beta),
                                        fmt(r.eta),
                                        fmt(r.eta_init),
                                        r.dist,
                                        r.chi,
                                        fmt(r.as2),
                                        r.schedule,
                                        std::to_string(r.trial),
                                        std::to_string(r.seed),
                                        fmt(r.rmse),
                                        fmt(r.direction_cosine),
                                        fmt(r.energy),
                                        fmt(r.l0),
                                        std::to_string(r.iterations),
                                        r.converged ? "1" : "0",
                                        fmt(r.r_overlap),
                                        fmt(r.q_mag),
                                        fmt(r.u_susc),
                                        r.branch,
                                        fmt(r.wall_time_ms)};
  std::string out;
  const std::size_t count = with_wall_time ? fields.size() : fields.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

OrderedCsvWriter::OrderedCsvWriter(std::ostream& out, std::size_t total, bool with_wall_time)
    : out_(out), wall_(with_wall_time), pending_(total) {
  out_ << csv_header(wall_) << '\n';
  out_.flush();
}

void OrderedCsvWriter::submit(std::size_t index, const RunRecord& rec) {
  std::lock_guard<std::mutex> lock(mu_);
  if (index >= pending_.size()) throw DimensionError("OrderedCsvWriter: row index out of range");
  pending_[index] = csv_row(rec, wall_);
  bool wrote = false;
  while (next_ < pending_.size() && pending_[next_]) {
    out_ << *pending_[next_] << '\n';
    pending_[next_].reset();
    ++next_;
    wrote = true;
  }
  if (wrote) out_.flush();
}

// ---------------------------------------------------------------------------
// Execution

namespace {

RunRecord execute(const Task& task) {
  RunRecord rec = task.proto;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    task.fill(rec);
  } catch (const Error&) {
    rec = task.proto;
    rec.converged = false;
  }
  rec.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

template <class Sink>
void run_parallel(const std::vector<Task>& tasks, Sink&& sink) {
  std::exception_ptr failure;
  std::mutex fail_mu;
  const auto count = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < count; ++i) {
    try {
      sink(static_cast<std::size_t>(i), execute(tasks[static_cast<std::size_t>(i)]));
    } catch (...) {
      std::lock_guard<std::mutex> lock(fail_mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void run_tasks(const std::vector<Task>& tasks, std::ostream& out, bool with_wall_time) {
  OrderedCsvWriter writer(out, tasks.size(), with_wall_time);
  run_parallel(tasks, [&](std::size_t i, const RunRecord& r) { writer.submit(i, r); });
}

std::vector<RunRecord> run_tasks(const std::vector<Task>& tasks) {
  std::vector<RunRecord> out(tasks.size());
  run_parallel(tasks, [&](std::size_t i, RunRecord r) { out[i] = std::move(r); });
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

std::uint64_t trial_seed(std::uint64_t base, std::size_t point, std::size_t trial) {
  return derive_seed(base, {static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(trial)});
}

namespace {

constexpr const char* kPhantom = "phantom";

SourceDistribution dist_from_label(const std::string& s) {
  SourceDistribution d;
  d.kind = distribution_kind_from_string(s);
  return d;
}

Chi chi_for(const SweepSpec& spec, const std::string& dist) {
  if (dist == kPhantom) return Chi::Signed;
  return spec.chi.value_or(dist_from_label(dist).natural_chi());
}

bool uses_eta(Method m) { return m != Method::ZeroFill && m != Method::L1Eq; }
bool uses_as2(Method m) { return m == Method::HybridCim || m == Method::MeCimFinite; }
bool is_hybrid(Method m) { return m == Method::HybridCim || m == Method::HybridMaxwell; }

double side_of(std::size_t pixels) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(pixels))));
  return side * side == pixels ? static_cast<double>(side) : -1.0;
}

struct PointParams {
  std::string dist;
  std::size_t n;
  double alpha, a, beta;
};

InstanceParams instance_params(const SweepSpec& spec, const PointParams& p, std::uint64_t seed) {
  InstanceParams ip;
  ip.n = p.n;
  ip.alpha = p.alpha;
  ip.a = p.a;
  ip.beta = p.beta;
  ip.dist = dist_from_label(p.dist);
  ip.chi = chi_for(spec, p.dist);
  ip.seed = seed;
  return ip;
}

HybridConfig hybrid_config(const SweepSpec& spec, Method m, double eta, double eta_init, double as2,
                           PumpSchedule::Kind pump, Chi chi) {
  HybridConfig cfg;
  cfg.eta_init = eta_init;
  cfg.eta_end = eta;
  cfg.outer_iters = spec.outer_iters;
  cfg.r_init = spec.r_init;
  cfg.backend = m == Method::HybridCim ? SupportBackend::Sde : SupportBackend::DeterministicMaxwell;
  cfg.cim.as2 = as2;
  cfg.cim.k_tilde = spec.k_tilde;
  cfg.cim.pump.kind = pump;
  cfg.cim.pump.p_final = spec.p_final;
  cfg.cim.duration = spec.duration.value_or(default_duration(as2));
  cfg.cim.chi = chi;
  return cfg;
}

void fill_vector_metrics(RunRecord& rec, const Instance& inst, const Vector& r, const Bits& sigma, double eta) {
  rec.rmse = finite(rmse(r, sigma, inst.x_true, inst.xi_true));
  rec.direction_cosine = finite(direction_cosine(inst.xi_true, sigma));
  rec.energy = finite(hamiltonian(inst, r, sigma, HybridConfig::lambda_of_eta(eta)));
  rec.l0 = popcount(sigma);
}

Bits nonzero_bits(const Vector& v, double tol = 0.0) {
  Bits b(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) b[static_cast<std::size_t>(i)] = std::abs(v[i]) > tol;
  return b;
}

/// Synthetic-instance methods.
void fill_vector_task(RunRecord& rec, const SweepSpec& spec, const InstanceParams& ip, Method m, double eta,
                      double eta_init, double as2, PumpSchedule::Kind pump, CoolingSchedule::Kind cooling) {
  const Instance inst = synthesize(ip);
  Rng rng = make_rng(derive_seed(ip.seed, {0x5eedULL}));
  switch (m) {
    case Method::HybridCim:
    case Method::HybridMaxwell: {
      const HybridConfig cfg = hybrid_config(spec, m, eta, eta_init, as2, pump, ip.chi);
      if (spec.oracle_support) {
        const Bits sigma = run_support_estimation(inst, inst.x_true, eta, cfg.cim, rng);
        fill_vector_metrics(rec, inst, inst.x_true, sigma, eta);
        rec.iterations = 1;
        rec.converged = true;
        return;
      }
      const HybridResult res = run_hybrid(inst, cfg, rng);
      fill_vector_metrics(rec, inst, res.r, res.sigma, eta);
      rec.iterations = res.trace.size();
      rec.converged = !res.trace.empty() && !res.trace.back().rank_deficient;
      return;
    }
    case Method::Lasso: {
      const IstaResult res = run_ista(inst, eta, ip.chi);
      const Bits sigma = nonzero_bits(res.y);
      fill_vector_metrics(rec, inst, res.y, sigma, eta);
      rec.energy = finite(lasso_objective(inst, res.y, eta));
      rec.iterations = res.iterations;
      rec.converged = res.converged;
      return;
    }
    case Method::Sa: {
      CoolingSchedule sched;
      sched.kind = cooling;
      sched.t0_temp = spec.sa_t0;
      sched.final_temp = spec.sa_final;
      sched.horizon = spec.sa_horizon;
      const SaResult res = run_sa(inst, inst.x_true, HybridConfig::lambda_of_eta(eta), sched, rng);
      fill_vector_metrics(rec, inst, inst.x_true, res.sigma, eta);
      rec.iterations = res.proposals;
      rec.converged = cooling == CoolingSchedule::Kind::Zero ? res.stopped_early : true;
      return;
    }
    case Method::L1Eq: {
      LinearOperator op;
      op.rows = inst.a_mat.rows();
      op.cols = inst.a_mat.cols();
      op.apply = [&inst](const Vector& w, Vector& out) { out.noalias() = inst.a_mat * w; };
      op.adjoint = [&inst](const Vector& d, Vector& out) { out.noalias() = inst.a_mat.transpose() * d; };
      const L1EqResult res = solve_l1_equality(op, inst.y, 0.0, {});
      const Bits sigma = nonzero_bits(res.w, 1e-9);
      rec.rmse = finite(rmse(res.w, sigma, inst.x_true, inst.xi_true));
      rec.direction_cosine = finite(direction_cosine(inst.xi_true, sigma));
      rec.l0 = popcount(sigma);
      rec.iterations = res.outer_iterations;
      rec.converged = res.converged;
      return;
    }
    default:
      throw ParameterError("method '" + std::string(to_string(m)) + "' does not run on synthetic instances");
  }
}

/// Imaging methods: n pixels, α sampling fraction, a Haar sparsity, β k-space noise.
void fill_imaging_task(RunRecord& rec, const SweepSpec& spec, const PointParams& p, std::uint64_t instance_seed,
                       std::uint64_t solver_seed, Method m, double eta, double eta_init) {
  const auto side = static_cast<Eigen::Index>(side_of(p.n));
  Rng inst_rng = make_rng(instance_seed);
  imaging::KSpaceProblem prob;
  prob.rows = prob.cols = side;
  prob.gamma = spec.gamma;
  prob.phantom_haar_sparsity = p.a;
  prob.seed = instance_seed;
  prob.mask = imaging::random_mask(side, side, p.alpha, inst_rng);
  const imaging::Image truth = imaging::synth_phantom(side, side, p.a, inst_rng);
  const Vector y = imaging::observe(prob, truth, p.beta, &inst_rng);
  const Bits support = nonzero_bits(imaging::flatten(imaging::haar2d(truth)), 1e-12);

  auto finish = [&](const imaging::Image& img) {
    rec.rmse = finite(imaging::image_rmse(img, truth));
  };
  if (m == Method::ZeroFill) {
    finish(imaging::zero_fill(prob, y));
    rec.converged = true;
    return;
  }
  const imaging::EffectiveOperators ops(prob, y);
  switch (m) {
    case Method::L1Eq: {
      finish(imaging::reconstruct_l1eq(ops, y));
      rec.converged = true;
      return;
    }
    case Method::Lasso: {
      const imaging::Image img = imaging::reconstruct_lasso(ops, eta);
      finish(img);
      const Bits sigma = nonzero_bits(imaging::flatten(imaging::haar2d(img)), 1e-12);
      rec.direction_cosine = finite(direction_cosine(support, sigma));
      rec.l0 = popcount(sigma);
      rec.converged = true;
      return;
    }
    case Method::HybridCim:
    case Method::HybridMaxwell: {
      const HybridConfig cfg = hybrid_config(spec, m, eta, eta_init, spec.as2.front(), PumpSchedule::Kind::LinearRamp,
                                             Chi::Signed);
      Rng rng = make_rng(solver_seed);
      const imaging::ImagingL0Result res = imaging::reconstruct_l0(ops, cfg, rng);
      finish(res.image);
      rec.direction_cosine = finite(direction_cosine(support, res.sigma));
      rec.energy = finite(imaging::imaging_energy(ops, res.r, res.sigma, HybridConfig::lambda_of_eta(eta)));
      rec.l0 = popcount(res.sigma);
      rec.iterations = res.trace.size();
      rec.converged = res.cg_failures == 0;
      return;
    }
    default:
      throw ParameterError("method '" + std::string(to_string(m)) + "' does not run on the imaging problem");
  }
}

MeModel me_model(Method m) {
  switch (m) {
    case Method::MeCimFinite:
      return MeModel::CimFinite;
    case Method::MeCimInf:
      return MeModel::CimInfinite;
    default:
      return MeModel::Lasso;
  }
}

void fill_me(RunRecord& rec, const MacroState& st) {
  rec.rmse = finite(st.rmse);
  rec.r_overlap = finite(st.r_overlap);
  rec.q_mag = finite(st.q_mag);
  rec.u_susc = finite(st.u_susc);
  rec.branch = std::string(to_string(st.branch));
  rec.iterations = st.iterations;
  rec.converged = st.converged && std::isfinite(st.rmse);
}

}  // namespace

void SweepSpec::validate() const {
  auto need = [](bool ok, const char* key, const std::string& what) {
    if (!ok) throw ParameterError(std::string(key) + ": " + what);
  };
  need(!methods.empty(), "methods", "must not be empty");
  need(!n.empty() && !alpha.empty() && !a.empty() && !beta.empty() && !eta.empty() && !dist.empty() && !as2.empty() &&
           !pump.empty() && !cooling.empty(),
       "grid", "every grid needs at least one value");
  need(trials >= 1, "trials", "must be >= 1");
  need(outer_iters >= 1, "outer_iters", "must be >= 1");
  for (double v : alpha) need(v > 0.0 && v <= 1.0, "alpha", "values must lie in (0, 1]");
  for (double v : a) need(v >= 0.0 && v <= 1.0, "a", "values must lie in [0, 1]");
  for (double v : beta) need(v >= 0.0, "beta", "values must be >= 0");
  for (double v : eta) need(v > 0.0, "eta", "values must be > 0");
  for (double v : eta_init) need(v > 0.0, "eta_init", "values must be > 0");
  for (double v : as2) need(v > 0.0, "as2", "values must be > 0");
  for (std::size_t v : n) need(v >= 1, "n", "values must be >= 1");
  if (oracle_support)
    for (Method m : methods)
      need(m == Method::HybridCim || m == Method::Sa, "oracle_support", "only applies to hybrid_cim and sa");
  for (const auto& d : dist) {
    if (d == kPhantom) {
      need(!chi || *chi == Chi::Signed, "chi", "the phantom problem is signed");
      for (std::size_t v : n) {
        const double side = side_of(v);
        need(side > 0 && imaging::is_power_of_two(static_cast<Eigen::Index>(side)), "n",
             "phantom needs a square power-of-two pixel count, got " + std::to_string(v));
      }
      for (Method m : methods)
        need(m == Method::ZeroFill || m == Method::L1Eq || m == Method::Lasso || is_hybrid(m), "methods",
             "'" + std::string(to_string(m)) + "' does not run on the phantom problem");
      continue;
    }
    SourceDistribution sd;
    try {
      sd = dist_from_label(d);
    } catch (const ParameterError& e) {
      throw ParameterError(std::string("dist: ") + e.what());
    }
    need(!chi || *chi == sd.natural_chi(), "chi",
         "'" + std::string(to_string(*chi)) + "' is inconsistent with dist '" + d + "'");
    for (Method m : methods)
      need(m != Method::ZeroFill, "methods", "zerofill only runs on the phantom problem");
  }
}

std::vector<Task> sweep_tasks(const SweepSpec& spec) {
  spec.validate();
  std::vector<Task> tasks;
  const std::vector<double> eta_init_grid = spec.eta_init;
  std::size_t point = 0;
  for (const auto& dist : spec.dist) {
    const bool phantom = dist == kPhantom;
    const Chi chi = chi_for(spec, dist);
    for (std::size_t ni = 0; ni < spec.n.size(); ++ni)
      for (double alpha : spec.alpha)
        for (double a : spec.a)
          for (double beta : spec.beta) {
            const PointParams pp{dist, spec.n[ni], alpha, a, beta};
            const std::size_t pt = point++;
            for (std::size_t trial = 0; trial < spec.trials; ++trial)
              for (Method m : spec.methods) {
                const bool me = is_me(m);
                if (me && (ni > 0 || trial > 0)) continue;
                const std::vector<double> etas = uses_eta(m) ? spec.eta : std::vector<double>{kInf};
                for (double eta : etas) {
                  const std::vector<double> inits =
                      is_hybrid(m) && !eta_init_grid.empty() && !spec.oracle_support ? eta_init_grid
                                                                                     : std::vector<double>{eta};
                  for (double eta_init : inits) {
                    std::vector<double> as2s{kInf};
                    if (uses_as2(m) && !phantom) as2s = spec.as2;
                    for (double as2 : as2s) {
                      std::vector<std::string> scheds{""};
                      if (m == Method::HybridCim && !phantom) {
                        scheds.clear();
                        for (auto k : spec.pump) scheds.emplace_back(to_string(k));
                      } else if (m == Method::Sa) {
                        scheds.clear();
                        for (auto k : spec.cooling) scheds.emplace_back(to_string(k));
                      }
                      for (const auto& sched : scheds) {
                        RunRecord proto;
                        proto.method = m;
                        if (!me) proto.n = pp.n;
                        proto.alpha = alpha;
                        proto.a = a;
                        proto.beta = beta;
                        proto.eta = finite(eta);
                        if (is_hybrid(m) && !spec.oracle_support) proto.eta_init = eta_init;
                        proto.dist = dist;
                        proto.chi = std::string(to_string(chi));
                        proto.as2 = finite(as2);
                        proto.schedule = sched;
                        proto.trial = trial;
                        const std::uint64_t seed = me ? spec.seed : trial_seed(spec.seed, pt, trial);
                        proto.seed = seed;
                        Task t;
                        t.proto = proto;
                        if (me) {
                          MeConfig cfg;
                          cfg.alpha = alpha;
                          cfg.a = a;
                          cfg.beta = beta;
                          cfg.eta = eta;
                          cfg.chi = chi;
                          cfg.dist = dist_from_label(dist);
                          cfg.as2 = m == Method::MeCimFinite ? as2 : kInf;
                          cfg.p_pump = spec.p_final;
                          cfg.k_tilde = spec.k_tilde;
                          cfg.init = spec.me_init;
                          const MeModel model = me_model(m);
                          t.fill = [cfg, model](RunRecord& rec) { fill_me(rec, solve_me(model, cfg)); };
                        } else if (phantom) {
                          const std::uint64_t inst_seed = trial_seed(spec.seed, pt, 0);
                          t.fill = [spec, pp, inst_seed, seed, m, eta, eta_init](RunRecord& rec) {
                            fill_imaging_task(rec, spec, pp, inst_seed, seed, m, eta, eta_init);
                          };
                        } else {
                          const InstanceParams ip = instance_params(spec, pp, seed);
                          const auto pump = m == Method::HybridCim ? pump_kind_from_string(sched) : spec.pump.front();
                          const auto cooling = m == Method::Sa ? cooling_kind_from_string(sched) : spec.cooling.front();
                          t.fill = [spec, ip, m, eta, eta_init, as2, pump, cooling](RunRecord& rec) {
                            fill_vector_task(rec, spec, ip, m, eta, eta_init, as2, pump, cooling);
                          };
                        }
                        tasks.push_back(std::move(t));
                      }
                    }
                  }
                }
              }
          }
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const std::set<std::string>& sweep_keys() {
  static const std::set<std::string> keys{
      "methods", "n",       "alpha",    "a",          "beta",  "eta",           "eta_init", "dist",
      "chi",     "as2",     "pump",     "cooling",    "r_init", "outer_iters",  "duration", "k_tilde",
      "p_final", "sa_t0",   "sa_final", "sa_horizon", "me_init", "gamma",       "trials",   "seed",
      "oracle_support"};
  return keys;
}

double json_number(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return kInf;
  }
  throw ParameterError(key + ": expected a number");
}

template <class T, class Conv>
std::vector<T> json_list(const nlohmann::json& v, const std::string& key, Conv conv) {
  std::vector<T> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(conv(e));
  } else {
    out.push_back(conv(v));
  }
  if (out.empty()) throw ParameterError(key + ": must not be empty");
  return out;
}

std::string json_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ParameterError(key + ": expected a string");
  return v.get<std::string>();
}

template <class F>
auto keyed(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    if (msg.rfind(key + ":", 0) == 0) throw;
    throw ParameterError(key + ": " + msg);
  }
}

}  // namespace

SweepSpec sweep_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParameterError("sweep: expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!sweep_keys().count(k)) throw ParameterError(k + ": unknown sweep key");
  SweepSpec s;
  auto num = [](const std::string& key) { return [key](const nlohmann::json& e) { return json_number(e, key); }; };
  auto str = [](const std::string& key) { return [key](const nlohmann::json& e) { return json_string(e, key); }; };
  auto has = [&j](const char* k) { return j.contains(k); };

  if (has("methods"))
    s.methods = keyed("methods", [&] {
      std::vector<Method> out;
      for (const auto& v : json_list<std::string>(j["methods"], "methods", str("methods")))
        out.push_back(method_from_string(v));
      return out;
    });
  if (has("n"))
    s.n = json_list<std::size_t>(j["n"], "n", [](const nlohmann::json& e) {
      if (!e.is_number_integer() || e.get<long long>() < 1) throw ParameterError("n: expected positive integers");
      return e.get<std::size_t>();
    });
  if (has("alpha")) s.alpha = json_list<double>(j["alpha"], "alpha", num("alpha"));
  if (has("a")) s.a = json_list<double>(j["a"], "a", num("a"));
  if (has("beta")) s.beta = json_list<double>(j["beta"], "beta", num("beta"));
  if (has("eta")) s.eta = json_list<double>(j["eta"], "eta", num("eta"));
  if (has("eta_init")) s.eta_init = json_list<double>(j["eta_init"], "eta_init", num("eta_init"));
  if (has("as2")) s.as2 = json_list<double>(j["as2"], "as2", num("as2"));
  if (has("dist")) s.dist = json_list<std::string>(j["dist"], "dist", str("dist"));
  if (has("chi")) s.chi = keyed("chi", [&] { return chi_from_string(json_string(j["chi"], "chi")); });
  if (has("pump"))
    s.pump = keyed("pump", [&] {
      std::vector<PumpSchedule::Kind> out;
      for (const auto& v : json_list<std::string>(j["pump"], "pump", str("pump"))) out.push_back(pump_kind_from_string(v));
      return out;
    });
  if (has("cooling"))
    s.cooling = keyed("cooling", [&] {
      std::vector<CoolingSchedule::Kind> out;
      for (const auto& v : json_list<std::string>(j["cooling"], "cooling", str("cooling")))
        out.push_back(cooling_kind_from_string(v));
      return out;
    });
  if (has("r_init")) s.r_init = keyed("r_init", [&] { return r_init_from_string(json_string(j["r_init"], "r_init")); });
  if (has("me_init"))
    s.me_init = keyed("me_init", [&] {
      const auto v = json_string(j["me_init"], "me_init");
      if (v == "near_zero") return MeInit::NearZero;
      if (v == "non_zero") return MeInit::NonZero;
      throw ParameterError("expected near_zero or non_zero");
    });
  auto scalar = [&](const char* key, auto& field) {
    if (!has(key)) return;
    using F = std::remove_reference_t<decltype(field)>;
    if constexpr (std::is_same_v<F, bool>) {
      if (!j[key].is_boolean()) throw ParameterError(std::string(key) + ": expected true or false");
      field = j[key].get<bool>();
    } else if constexpr (std::is_integral_v<F>) {
      if (!j[key].is_number_integer() || (!j[key].is_number_unsigned() && j[key].get<long long>() < 0))
        throw ParameterError(std::string(key) + ": expected a non-negative integer");
      field = j[key].get<F>();
    } else {
      field = json_number(j[key], key);
    }
  };
  scalar("outer_iters", s.outer_iters);
  scalar("k_tilde", s.k_tilde);
  scalar("p_final", s.p_final);
  scalar("sa_t0", s.sa_t0);
  scalar("sa_final", s.sa_final);
  scalar("sa_horizon", s.sa_horizon);
  scalar("gamma", s.gamma);
  scalar("trials", s.trials);
  scalar("seed", s.seed);
  scalar("oracle_support", s.oracle_support);
  if (has("duration")) s.duration = json_number(j["duration"], "duration");
  s.validate();
  return s;
}

nlohmann::json sweep_to_json(const SweepSpec& s) {
  nlohmann::json j;
  auto nums = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) {
      if (std::isfinite(x))
        a.push_back(x);
      else
        a.push_back("inf");
    }
    return a;
  };
  j["methods"] = nlohmann::json::array();
  for (Method m : s.methods) j["methods"].push_back(std::string(to_string(m)));
  j["n"] = s.n;
  j["alpha"] = nums(s.alpha);
  j["a"] = nums(s.a);
  j["beta"] = nums(s.beta);
  j["eta"] = nums(s.eta);
  if (!s.eta_init.empty()) j["eta_init"] = nums(s.eta_init);
  j["dist"] = s.dist;
  if (s.chi) j["chi"] = std::string(to_string(*s.chi));
  j["as2"] = nums(s.as2);
  j["pump"] = nlohmann::json::array();
  for (auto k : s.pump) j["pump"].push_back(std::string(to_string(k)));
  j["cooling"] = nlohmann::json::array();
  for (auto k : s.cooling) j["cooling"].push_back(std::string(to_string(k)));
  j["r_init"] = std::string(to_string(s.r_init));
  j["outer_iters"] = s.outer_iters;
  if (s.duration) j["duration"] = *s.duration;
  j["k_tilde"] = s.k_tilde;
  j["p_final"] = s.p_final;
  j["sa_t0"] = s.sa_t0;
  j["sa_final"] = s.sa_final;
  j["sa_horizon"] = s.sa_horizon;
  j["me_init"] = s.me_init == MeInit::NearZero ? "near_zero" : "non_zero";
  j["gamma"] = s.gamma;
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["oracle_support"] = s.oracle_support;
  return j;
}

// ---------------------------------------------------------------------------
// Threshold search and critical points

EtaSearchResult grid_search_optimal_eta(const std::function<MacroState(double)>& solver, double lo, double hi,
                                        std::size_t points) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ParameterError("grid_search_optimal_eta: need 0 < lo <= hi");
  if (points == 0) throw ParameterError("grid_search_optimal_eta: points must be >= 1");
  EtaSearchResult out;
  auto eval = [&](double eta, MacroState* st) {
    ++out.evaluations;
    MacroState s = solver(eta);
    if (st) *st = s;
    return s.converged && std::isfinite(s.rmse) ? s.rmse : kInf;
  };
  if (lo == hi || points == 1) {
    MacroState st;
    const double v = eval(lo, &st);
    if (!std::isfinite(v)) throw ConvergenceError("grid_search_optimal_eta: no grid point converged");
    out.eta_opt = lo;
    out.rmse_min = v;
    out.state = st;
    return out;
  }
  const double llo = std::log(lo), lhi = std::log(hi);
  std::vector<double> grid(points), vals(points);
  std::vector<MacroState> states(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(points - 1));
    vals[i] = eval(grid[i], &states[i]);
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  if (!std::isfinite(vals[best])) throw ConvergenceError("grid_search_optimal_eta: no grid point converged");
  out.eta_opt = grid[best];
  out.rmse_min = vals[best];
  out.state = states[best];

  // Golden-section search in log η over the neighbouring grid cells.
  double a = std::log(grid[best > 0 ? best - 1 : 0]);
  double b = std::log(grid[std::min(best + 1, points - 1)]);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  MacroState sc, sd;
  double fc = eval(std::exp(c), &sc), fd = eval(std::exp(d), &sd);
  for (int it = 0; it < 40 && (b - a) > 1e-5; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      sd = sc;
      c = b - g * (b - a);
      fc = eval(std::exp(c), &sc);
    } else {
      a = c;
      c = d;
      fc = fd;
      sc = sd;
      d = a + g * (b - a);
      fd = eval(std::exp(d), &sd);
    }
  }
  if (fc < out.rmse_min) {
    out.rmse_min = fc;
    out.eta_opt = std::exp(c);
    out.state = sc;
  }
  if (fd < out.rmse_min) {
    out.rmse_min = fd;
    out.eta_opt = std::exp(d);
    out.state = sd;
  }
  return out;
}

namespace {

Method method_of(MeModel model) {
  switch (model) {
    case MeModel::CimFinite:
      return Method::MeCimFinite;
    case MeModel::CimInfinite:
      return Method::MeCimInf;
    case MeModel::Lasso:
      return Method::MeLasso;
  }
  return Method::MeLasso;
}

RunRecord me_proto(MeModel model, const MeConfig& cfg, const std::string& dist_label, TaskKind kind) {
  RunRecord r;
  r.method = method_of(model);
  r.task = kind;
  r.alpha = cfg.alpha;
  r.a = cfg.a;
  r.beta = cfg.beta;
  r.eta = cfg.eta;
  r.dist = dist_label;
  r.chi = std::string(to_string(cfg.chi));
  if (model == MeModel::CimFinite) r.as2 = finite(cfg.as2);
  return r;
}

}  // namespace

Task optimal_eta_task(MeModel model, MeConfig cfg, std::string dist_label) {
  Task t;
  t.proto = me_proto(model, cfg, dist_label, TaskKind::OptimalEta);
  t.proto.eta.reset();
  t.fill = [model, cfg](RunRecord& rec) {
    const EtaSearchResult res = grid_search_optimal_eta([&](double eta) {
      MeConfig c = cfg;
      c.eta = eta;
      return solve_me(model, c);
    });
    fill_me(rec, res.state);
    rec.eta = res.eta_opt;
    rec.rmse = res.rmse_min;
    rec.iterations = res.evaluations;
  };
  return t;
}

Task critical_point_task(MeModel model, MeConfig cfg, ScanDirection dir, ScanOptions opts, std::string dist_label) {
  Task t;
  t.proto = me_proto(model, cfg, dist_label, TaskKind::CriticalPoint);
  t.proto.a.reset();
  t.proto.schedule = dir == ScanDirection::Up ? "scan_up" : "scan_down";
  t.fill = [model, cfg, dir, opts](RunRecord& rec) {
    const CriticalPoint cp = critical_point_scan(me_scan_solver(model, cfg, dir), dir, opts);
    rec.converged = cp.found;
    if (cp.found) {
      rec.a = cp.a_c;
      rec.rmse = finite(cp.rmse_at_c);
    }
  };
  return t;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

std::vector<double> range(double lo, double hi, double step) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double v = lo + step * k;
    if (v > hi + 1e-9) break;
    out.push_back(std::round(v * 1e9) / 1e9);
  }
  return out;
}

void append(std::vector<Task>& out, std::vector<Task> more) {
  for (auto& t : more) out.push_back(std::move(t));
}

std::vector<Task> preset_fig3(bool desk, std::uint64_t seed, bool finite_as) {
  // ME branches and LASSO against the alternating loop started from the truth, η fixed.
  SweepSpec base;
  base.seed = seed;
  base.dist = desk ? std::vector<std::string>{"half_gaussian"} : std::vector<std::string>{"half_gaussian", "gaussian"};
  base.alpha = desk ? std::vector<double>{0.6} : std::vector<double>{0.6, 0.8};
  base.eta = desk ? std::vector<double>{0.05} : std::vector<double>{0.1, 0.05, 0.01};
  base.a = desk ? std::vector<double>{0.1, 0.3} : range(0.05, 0.95, 0.05);
  base.as2 = {finite_as ? 250.0 : 1e7};
  const Method me = finite_as ? Method::MeCimFinite : Method::MeCimInf;

  std::vector<Task> out;
  SweepSpec near = base;
  near.methods = {me, Method::MeLasso};
  append(out, sweep_tasks(near));
  SweepSpec nonzero = base;
  nonzero.methods = {me};
  nonzero.me_init = MeInit::NonZero;
  append(out, sweep_tasks(nonzero));
  SweepSpec sim = base;
  sim.methods = {Method::HybridCim};
  sim.r_init = RInit::TruthOracle;
  sim.n = {desk ? std::size_t{200} : std::size_t{2000}};
  sim.trials = desk ? 3 : 10;
  append(out, sweep_tasks(sim));
  return out;
}

std::vector<Task> preset_fig4(bool desk) {
  std::vector<Task> out;
  const std::vector<double> alphas = desk ? std::vector<double>{0.3, 0.5, 0.7} : range(0.1, 0.9, 0.1);
  const std::vector<double> etas = desk ? std::vector<double>{0.01} : std::vector<double>{0.1, 0.05, 0.01};
  for (const char* d : {"half_gaussian", "gaussian"})
    for (MeModel model : {MeModel::CimInfinite, MeModel::Lasso})
      for (double eta : etas)
        for (double alpha : alphas) {
          MeConfig cfg;
          cfg.alpha = alpha;
          cfg.eta = eta;
          cfg.dist = dist_from_label(d);
          cfg.chi = cfg.dist.natural_chi();
          out.push_back(critical_point_task(model, cfg, ScanDirection::Up, {}, d));
        }
  return out;
}

std::vector<Task> preset_fig5b(bool desk, std::uint64_t seed) {
  SweepSpec base;
  base.seed = seed;
  base.dist = {"half_gaussian", "gaussian"};
  base.alpha = desk ? std::vector<double>{0.4} : std::vector<double>{0.4, 0.8};
  base.a = desk ? std::vector<double>{0.1, 0.2, 0.3} : range(0.1, 0.9, 0.1);
  base.eta = {0.01};
  std::vector<Task> out;
  SweepSpec me = base;
  me.methods = {Method::MeCimInf, Method::MeLasso};
  append(out, sweep_tasks(me));
  SweepSpec sim = base;
  sim.methods = {Method::HybridCim};
  sim.r_init = RInit::Zeros;
  sim.as2 = {1e7};
  sim.eta_init = desk ? std::vector<double>{0.6} : std::vector<double>{0.01, 0.1, 0.3, 0.6};
  sim.n = {desk ? std::size_t{400} : std::size_t{4000}};
  sim.trials = desk ? 3 : 20;
  append(out, sweep_tasks(sim));
  return out;
}

std::vector<Task> preset_fig6(bool desk) {
  std::vector<Task> out;
  const std::vector<double> betas = desk ? std::vector<double>{0.05} : std::vector<double>{0.01, 0.05, 0.1};
  std::vector<std::pair<double, double>> points;  // (a, α)
  if (desk) {
    points = {{0.2, 0.5}, {0.3, 0.7}};
  } else {
    for (double alpha : range(0.1, 0.9, 0.1))
      for (double a : range(0.1, 0.9, 0.1)) points.emplace_back(a, alpha);
  }
  for (double beta : betas)
    for (auto [a, alpha] : points)
      for (MeModel model : {MeModel::CimInfinite, MeModel::Lasso}) {
        MeConfig cfg;
        cfg.alpha = alpha;
        cfg.a = a;
        cfg.beta = beta;
        cfg.dist = SourceDistribution::half_gaussian();
        cfg.chi = Chi::NonNegative;
        out.push_back(optimal_eta_task(model, cfg, "half_gaussian"));
      }
  return out;
}

std::vector<Task> preset_fig8(bool desk, std::uint64_t seed) {
  SweepSpec base;
  base.seed = seed;
  base.dist = {kPhantom};
  base.n = {desk ? std::size_t{64 * 64} : std::size_t{128 * 128}};
  base.alpha = {desk ? 0.4 : 0.3};
  base.a = {0.134};
  base.beta = {0.0};
  base.gamma = 1e-4;
  std::vector<Task> out;
  SweepSpec once = base;
  once.methods = {Method::ZeroFill, Method::L1Eq};
  append(out, sweep_tasks(once));
  SweepSpec lasso = base;
  lasso.methods = {Method::Lasso};
  lasso.eta = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2};
  append(out, sweep_tasks(lasso));
  SweepSpec l0 = base;
  l0.methods = {desk ? Method::HybridMaxwell : Method::HybridCim};
  l0.r_init = RInit::FromLasso;
  l0.eta = desk ? std::vector<double>{1e-3, 3e-3, 1e-2, 3e-2} : std::vector<double>{1e-3, 2e-3, 4e-3, 1e-2, 3e-2};
  l0.trials = desk ? 2 : 10;
  append(out, sweep_tasks(l0));
  return out;
}

std::vector<Task> preset_fig9(bool desk, std::uint64_t seed) {
  SweepSpec base;
  base.seed = seed;
  base.dist = {"gaussian"};
  base.n = {500};
  base.alpha = {0.6};
  base.a = {0.6};
  base.eta = {0.05};
  base.oracle_support = true;
  base.trials = desk ? 100 : 1000;
  SweepSpec cim = base;
  cim.methods = {Method::HybridCim};
  cim.as2 = {1e7};
  cim.duration = 5.0;
  cim.pump = {PumpSchedule::Kind::Constant, PumpSchedule::Kind::LinearRamp, PumpSchedule::Kind::SquareRamp};
  SweepSpec sa = base;
  sa.methods = {Method::Sa};
  sa.cooling = {CoolingSchedule::Kind::Zero, CoolingSchedule::Kind::ExpCooling, CoolingSchedule::Kind::InvLinear,
                CoolingSchedule::Kind::InvLog};
  sa.sa_horizon = desk ? 1e3 : 1e5;
  std::vector<Task> out = sweep_tasks(cim);
  append(out, sweep_tasks(sa));
  return out;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig3a", "fig3b", "fig4", "fig5b", "fig6", "fig8", "fig9"};
  return names;
}

std::vector<Task> preset_tasks(std::string_view name, bool desk, std::uint64_t seed) {
  if (name == "fig3a") return preset_fig3(desk, seed, true);
  if (name == "fig3b") return preset_fig3(desk, seed, false);
  if (name == "fig4") return preset_fig4(desk);
  if (name == "fig5b") return preset_fig5b(desk, seed);
  if (name == "fig6") return preset_fig6(desk);
  if (name == "fig8") return preset_fig8(desk, seed);
  if (name == "fig9") return preset_fig9(desk, seed);
  throw ParameterError("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Summaries

std::vector<TrialSummary> summarize(const std::vector<RunRecord>& records) {
  std::vector<TrialSummary> out;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    RunRecord key = r;
    key.trial = 0;
    key.seed = 0;
    key.rmse = key.direction_cosine = key.energy = key.r_overlap = key.q_mag = key.u_susc = std::nullopt;
    key.l0.reset();
    key.iterations = 0;
    key.converged = false;
    key.branch.clear();
    key.wall_time_ms = 0.0;
    const std::string k = csv_row(key, false);
    auto [it, inserted] = index.emplace(k, out.size());
    if (inserted) {
      out.push_back({r, 0, 0.0, 0.0});
      values.emplace_back();
    }
    if (r.rmse) values[it->second].push_back(*r.rmse);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    const auto& v = values[g];
    out[g].count = v.size();
    if (v.empty()) {
      out[g].mean_rmse = out[g].std_rmse = kInf;
      continue;
    }
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    out[g].mean_rmse = m;
    out[g].std_rmse = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return out;
}

}  // namespace cimcs::harness
