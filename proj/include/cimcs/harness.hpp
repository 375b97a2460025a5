#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cimcs/cim.hpp"
#include "cimcs/hybrid.hpp"
#include "cimcs/meanfield.hpp"
#include "cimcs/problem.hpp"
#include "cimcs/sa.hpp"
#include "cimcs/types.hpp"

namespace cimcs::harness {

enum class Method { HybridCim, HybridMaxwell, Lasso, Sa, MeCimFinite, MeCimInf, MeLasso, L1Eq, ZeroFill };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);
bool is_me(Method m);

/// What a row reports: one trial, a located critical point, or an optimal-threshold search.
enum class TaskKind { Trial, CriticalPoint, OptimalEta };
std::string_view to_string(TaskKind k);

/// One CSV row. Empty optionals are written as empty fields; non-finite values are never written.
struct RunRecord {
  Method method = Method::HybridCim;
  TaskKind task = TaskKind::Trial;
  std::optional<std::size_t> n;
  std::optional<double> alpha, a, beta, eta, eta_init;
  std::string dist;
  std::string chi;
  std::optional<double> as2;
  std::string schedule;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::optional<double> rmse, direction_cosine, energy;
  std::optional<std::size_t> l0;
  std::size_t iterations = 0;
  bool converged = false;
  std::optional<double> r_overlap, q_mag, u_susc;
  std::string branch;
  double wall_time_ms = 0.0;
};

const std::vector<std::string>& csv_columns();
std::string csv_header(bool with_wall_time = true);
std::string csv_row(const RunRecord& r, bool with_wall_time = true);

/// Serializes rows in task order. Rows finishing out of order are held until every
/// earlier row has been written, so the stream is always a valid CSV prefix.
class OrderedCsvWriter {
 public:
  OrderedCsvWriter(std::ostream& out, std::size_t total, bool with_wall_time = true);
  void submit(std::size_t index, const RunRecord& rec);
  std::size_t written() const { return next_; }

 private:
  std::ostream& out_;
  bool wall_;
  std::vector<std::optional<std::string>> pending_;
  std::size_t next_ = 0;
  std::mutex mu_;
};

/// One unit of work: the parameter fields are set up front, `fill` adds the metrics.
/// Each task builds its own instance and generator.
struct Task {
  RunRecord proto;
  std::function<void(RunRecord&)> fill;
};

/// Runs tasks over an OpenMP dynamic schedule and writes every record in task order.
/// A library error inside a task yields its prototype row with converged=false and empty metrics.
void run_tasks(const std::vector<Task>& tasks, std::ostream& out, bool with_wall_time = true);
std::vector<RunRecord> run_tasks(const std::vector<Task>& tasks);

struct SweepSpec {
  std::vector<Method> methods{Method::HybridCim};
  std::vector<std::size_t> n{200};
  std::vector<double> alpha{0.5};
  std::vector<double> a{0.2};
  std::vector<double> beta{0.0};
  std::vector<double> eta{0.05};
  std::vector<double> eta_init;  // empty: η_init = η
  /// Source densities; "phantom" selects the imaging problem (n = pixels, α = sampling, a = Haar sparsity).
  std::vector<std::string> dist{"gaussian"};
  std::optional<Chi> chi;  // default: the density's natural χ
  std::vector<double> as2{1e7};
  std::vector<PumpSchedule::Kind> pump{PumpSchedule::Kind::LinearRamp};
  std::vector<CoolingSchedule::Kind> cooling{CoolingSchedule::Kind::Zero};
  RInit r_init = RInit::Zeros;
  int outer_iters = 50;
  std::optional<double> duration;  // default: default_duration(A_s²)
  double k_tilde = 0.25;
  double p_final = 1.5;
  double sa_t0 = 0.02;
  double sa_final = 0.00002;
  double sa_horizon = 1e5;
  MeInit me_init = MeInit::NearZero;
  double gamma = 1e-4;  // imaging smoothness weight
  /// hybrid_cim runs one support estimation at r = x instead of the alternating loop.
  bool oracle_support = false;
  std::size_t trials = 1;
  std::uint64_t seed = 0;

  /// Throws ParameterError naming the offending key.
  void validate() const;
};

/// Seed of trial `trial` at instance-grid point `point` (the (dist, n, α, a, β) index):
/// derive_seed(base, {point, trial}). Methods and thresholds at one point share instances.
/// The imaging problem keeps the trial-0 instance for every trial; only the solver generator changes.
std::uint64_t trial_seed(std::uint64_t base, std::size_t point, std::size_t trial);

/// Cartesian product of the grids × trials. ME methods run once per point (trial 0, no n).
std::vector<Task> sweep_tasks(const SweepSpec& spec);

/// Parses a sweep description. Unknown keys and χ/dist mismatches raise ParameterError naming the key.
SweepSpec sweep_from_json(const nlohmann::json& j);
nlohmann::json sweep_to_json(const SweepSpec& spec);

struct EtaSearchResult {
  double eta_opt = 0.0;
  double rmse_min = 0.0;
  std::size_t evaluations = 0;
  MacroState state;  // solve at eta_opt
};

/// Minimum-RMSE η over `points` log-spaced values in [lo, hi], refined by golden-section search
/// in log η between the neighbours of the best grid point. Non-convergent solves are skipped;
/// throws ConvergenceError when none converges.
EtaSearchResult grid_search_optimal_eta(const std::function<MacroState(double)>& solver, double lo = 0.002,
                                        double hi = 0.5, std::size_t points = 48);

/// Row for one optimal-η search of an ME model at cfg (cfg.eta ignored).
Task optimal_eta_task(MeModel model, MeConfig cfg, std::string dist_label);
/// Row for one critical-point scan; a = a_c when found.
Task critical_point_task(MeModel model, MeConfig cfg, ScanDirection dir, ScanOptions opts, std::string dist_label);

const std::vector<std::string>& preset_names();
/// Tasks of a figure preset; `desk` cuts sizes and trial counts.
std::vector<Task> preset_tasks(std::string_view name, bool desk, std::uint64_t seed);

/// Mean and sample standard deviation of the RMSE over trials sharing every other field.
struct TrialSummary {
  RunRecord key;  // first record of the group
  std::size_t count = 0;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
};
std::vector<TrialSummary> summarize(const std::vector<RunRecord>& records);

}  // namespace cimcs::harness
