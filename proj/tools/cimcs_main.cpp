#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cimcs/cim.hpp"
#include "cimcs/errors.hpp"
#include "cimcs/harness.hpp"
#include "cimcs/hybrid.hpp"
#include "cimcs/imaging.hpp"
#include "cimcs/lasso.hpp"
#include "cimcs/meanfield.hpp"
#include "cimcs/metrics.hpp"
#include "cimcs/problem.hpp"
#include "cimcs/sa.hpp"

using namespace cimcs;
namespace h = cimcs::harness;

namespace {

// Instance source shared by the single-run subcommands: a saved directory or fresh synthesis.
struct InstanceOpts {
  std::string dir;
  std::size_t n = 200;
  double alpha = 0.5, a = 0.2, beta = 0.0;
  std::string dist = "gaussian";
  std::string chi;

  void add(CLI::App* app) {
    app->add_option("--instance", dir, "directory written by `synth`");
    app->add_option("--n", n, "signal dimension");
    app->add_option("--alpha", alpha, "compression rate M/N");
    app->add_option("--a", a, "sparseness");
    app->add_option("--beta", beta, "observation noise standard deviation");
    app->add_option("--dist", dist, "gaussian|half_gaussian|gamma|bilateral_gamma");
    app->add_option("--chi", chi, "signed|nonnegative (default: from --dist)");
  }

  InstanceParams params(std::uint64_t seed) const {
    InstanceParams p;
    p.n = n;
    p.alpha = alpha;
    p.a = a;
    p.beta = beta;
    p.dist.kind = distribution_kind_from_string(dist);
    p.chi = chi.empty() ? p.dist.natural_chi() : chi_from_string(chi);
    p.seed = seed;
    return p;
  }

  Instance load(std::uint64_t seed) const { return dir.empty() ? synthesize(params(seed)) : load_instance(dir); }
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw IoError("cannot open " + path);
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

const auto g_start = std::chrono::steady_clock::now();

void write_records(const std::string& path, std::vector<h::RunRecord> recs, bool wall = true) {
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - g_start).count();
  for (auto& r : recs)
    if (r.wall_time_ms == 0.0) r.wall_time_ms = ms;
  Output out(path);
  out.get() << h::csv_header(wall) << '\n';
  for (const auto& r : recs) out.get() << h::csv_row(r, wall) << '\n';
}

h::RunRecord base_record(h::Method m, const Instance& inst, std::uint64_t seed) {
  h::RunRecord r;
  r.method = m;
  r.n = inst.n();
  r.alpha = inst.params.alpha;
  r.a = inst.params.a;
  r.beta = inst.params.beta;
  r.dist = std::string(to_string(inst.params.dist.kind));
  r.chi = std::string(to_string(inst.params.chi));
  r.seed = seed;
  return r;
}

std::optional<double> fin(double v) {
  if (std::isfinite(v)) return v;
  return std::nullopt;
}

void vector_metrics(h::RunRecord& rec, const Instance& inst, const Vector& r, const Bits& sigma, double eta) {
  rec.rmse = fin(rmse(r, sigma, inst.x_true, inst.xi_true));
  rec.direction_cosine = fin(direction_cosine(inst.xi_true, sigma));
  rec.energy = fin(hamiltonian(inst, r, sigma, HybridConfig::lambda_of_eta(eta)));
  rec.l0 = popcount(sigma);
}

MeInit me_init_from_string(const std::string& s) {
  if (s == "near_zero") return MeInit::NearZero;
  if (s == "non_zero") return MeInit::NonZero;
  throw ParameterError("unknown ME init '" + s + "'");
}

// Config values become "--key=value" tokens ahead of the command-line tokens; options keep the last value.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  std::vector<std::string> out;
  for (const auto& [k, v] : j.items()) {
    const std::string key = "--" + k;
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back(key);
    } else if (v.is_string()) {
      out.push_back(key + "=" + v.get<std::string>());
    } else if (v.is_number()) {
      out.push_back(key + "=" + v.dump());
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) {
        if (!joined.empty()) joined += ',';
        joined += e.is_string() ? e.get<std::string>() : e.dump();
      }
      out.push_back(key + "=" + joined);
    } else {
      throw ParameterError("config: unsupported value for '" + k + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  // Pull --config out first so its tokens can sit ahead of the user's.
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }

  CLI::App app{"cimcs: L0-regularized compressed sensing with a simulated coherent Ising machine"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out_path = "-";
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--out", out_path, "output path, - for standard output");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "draw an instance and save it to a directory");
  InstanceOpts synth_inst;
  std::string synth_dir;
  synth_inst.add(synth);
  synth->add_option("--dir", synth_dir, "output directory")->required();
  synth->add_option("--seed", seed, "instance seed");

  // hybrid
  auto* hyb = app.add_subcommand("hybrid", "alternating support / signal estimation");
  InstanceOpts hyb_inst;
  hyb_inst.add(hyb);
  common(hyb);
  double hyb_eta_init = 0.05, hyb_eta_end = 0.05, hyb_as2 = 1e7, hyb_k = 0.25, hyb_p = 1.5;
  double hyb_duration = 0.0;
  int hyb_outer = 50;
  std::string hyb_rinit = "zeros", hyb_backend = "sde", hyb_pump = "linear", hyb_trace;
  std::size_t dump_every = 0;
  hyb->add_option("--eta-init", hyb_eta_init);
  hyb->add_option("--eta-end,--eta", hyb_eta_end);
  hyb->add_option("--outer-iters", hyb_outer);
  hyb->add_option("--r-init", hyb_rinit, "zeros|truth|lasso");
  hyb->add_option("--backend", hyb_backend, "sde|maxwell");
  hyb->add_option("--as2", hyb_as2, "A_s^2 (inf disables the noise)");
  hyb->add_option("--k-tilde", hyb_k);
  hyb->add_option("--p-final", hyb_p);
  hyb->add_option("--pump", hyb_pump, "constant|linear|square");
  hyb->add_option("--duration", hyb_duration, "SDE integration time (default from A_s^2)");
  hyb->add_option("--trace", hyb_trace, "per-iteration trace CSV");
  hyb->add_option("--dump-every", dump_every, "with --trace and --outer-iters 1: amplitude dump every k SDE steps");

  // lasso
  auto* las = app.add_subcommand("lasso", "proximal-gradient LASSO");
  InstanceOpts las_inst;
  las_inst.add(las);
  common(las);
  double las_eta = 0.05;
  las->add_option("--eta", las_eta);

  // sa
  auto* sa = app.add_subcommand("sa", "simulated annealing support estimation at r = x");
  InstanceOpts sa_inst;
  sa_inst.add(sa);
  common(sa);
  double sa_eta = 0.05, sa_t0 = 0.02, sa_final = 0.00002, sa_horizon = 1e5, sa_trace_every = 0.0;
  std::string sa_sched = "zero", sa_trace;
  sa->add_option("--eta", sa_eta, "threshold; lambda = eta^2/2");
  sa->add_option("--schedule", sa_sched, "zero|exp|invlinear|invlog");
  sa->add_option("--t0", sa_t0);
  sa->add_option("--final-temp", sa_final);
  sa->add_option("--horizon", sa_horizon, "sweeps");
  sa->add_option("--trace", sa_trace, "direction-cosine trace CSV");
  sa->add_option("--dump-every", sa_trace_every, "trace interval in sweeps");

  // solve-me / scan-critical share the ME parameters
  struct MeOpts {
    std::string model = "cim_infinite", dist = "gaussian", chi, init = "near_zero";
    double alpha = 0.5, a = 0.2, beta = 0.0, eta = 0.05, as2 = std::numeric_limits<double>::infinity();
    void add(CLI::App* app) {
      app->add_option("--model", model, "cim_finite|cim_infinite|lasso");
      app->add_option("--alpha", alpha);
      app->add_option("--a", a);
      app->add_option("--beta", beta);
      app->add_option("--eta", eta);
      app->add_option("--dist", dist);
      app->add_option("--chi", chi);
      app->add_option("--as2", as2);
      app->add_option("--init", init, "near_zero|non_zero");
    }
    MeConfig config() const {
      MeConfig c;
      c.alpha = alpha;
      c.a = a;
      c.beta = beta;
      c.eta = eta;
      c.dist.kind = distribution_kind_from_string(dist);
      c.chi = chi.empty() ? c.dist.natural_chi() : chi_from_string(chi);
      c.as2 = as2;
      c.init = me_init_from_string(init);
      return c;
    }
  };
  auto* sme = app.add_subcommand("solve-me", "solve the macroscopic equations");
  MeOpts sme_opts;
  sme_opts.add(sme);
  common(sme);

  auto* scan = app.add_subcommand("scan-critical", "locate the critical sparseness along a");
  MeOpts scan_opts;
  scan_opts.add(scan);
  common(scan);
  std::string scan_dir = "up";
  ScanOptions scan_cfg;
  scan->add_option("--direction", scan_dir, "up|down");
  scan->add_option("--a-lo", scan_cfg.a_lo);
  scan->add_option("--a-hi", scan_cfg.a_hi);
  scan->add_option("--step", scan_cfg.step);
  scan->add_option("--jump", scan_cfg.jump_threshold);
  scan->add_option("--resolution", scan_cfg.resolution);

  // thresholds
  auto* thr = app.add_subcommand("thresholds", "L0 and L1 reconstruction thresholds");
  std::vector<double> thr_alpha{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  thr->add_option("--alpha", thr_alpha)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->delimiter(',');
  common(thr);

  // imaging
  auto* img = app.add_subcommand("imaging", "k-space undersampling reconstruction");
  img->require_subcommand(1);
  auto* phantom = img->add_subcommand("synth-phantom", "draw a Haar-sparse phantom and a sampling mask");
  int ph_size = 64;
  double ph_sparsity = 0.134, ph_fraction = 0.4;
  std::string ph_image, ph_mask;
  phantom->add_option("--size", ph_size, "image side (power of two)");
  phantom->add_option("--sparsity", ph_sparsity);
  phantom->add_option("--fraction", ph_fraction, "sampled k-space fraction");
  phantom->add_option("--image", ph_image, "PGM output")->required();
  phantom->add_option("--mask", ph_mask, "mask PGM output");
  phantom->add_option("--seed", seed);

  auto* recon = img->add_subcommand("reconstruct", "reconstruct from simulated undersampled k-space");
  std::string rc_image, rc_mask, rc_method = "l0", rc_out_image, rc_backend = "maxwell";
  double rc_fraction = 0.4, rc_eta = 0.01, rc_eta_init = 0.0, rc_gamma = 1e-4, rc_noise = 0.0;
  int rc_outer = 50;
  recon->add_option("--image", rc_image, "true image (PGM; a .f64 sidecar is preferred)")->required();
  recon->add_option("--mask", rc_mask, "mask PGM; otherwise drawn with --fraction");
  recon->add_option("--fraction", rc_fraction);
  recon->add_option("--method", rc_method, "l0|lasso|l1eq|zerofill");
  recon->add_option("--eta", rc_eta);
  recon->add_option("--eta-init", rc_eta_init, "default: --eta");
  recon->add_option("--gamma", rc_gamma, "smoothness weight");
  recon->add_option("--noise", rc_noise, "k-space noise standard deviation");
  recon->add_option("--backend", rc_backend, "maxwell|sde");
  recon->add_option("--outer-iters", rc_outer);
  recon->add_option("--out-image", rc_out_image, "reconstruction PGM");
  common(recon);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a figure preset or a JSON sweep description");
  std::string sw_preset, sw_spec;
  bool sw_desk = false, sw_no_wall = false;
  sweep->add_option("--preset", sw_preset, "fig3a|fig3b|fig4|fig5b|fig6|fig8|fig9");
  sweep->add_option("--spec", sw_spec, "sweep description JSON");
  sweep->add_flag("--desk", sw_desk, "reduced sizes and trial counts");
  sweep->add_flag("--no-wall-time", sw_no_wall, "omit the wall_time_ms column");
  common(sweep);

  try {
    if (!config_path.empty()) {
      const auto extra = config_tokens(config_path);
      // Subcommand name(s) first, then config tokens, then the rest.
      std::size_t pos = 0;
      while (pos < args.size() && args[pos].rfind("-", 0) != 0) ++pos;
      args.insert(args.begin() + static_cast<long>(pos), extra.begin(), extra.end());
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*synth) {
      const Instance inst = synthesize(synth_inst.params(seed));
      save_instance(inst, synth_dir);
      std::cerr << "wrote " << synth_dir << " (N=" << inst.n() << ", M=" << inst.m() << ")\n";
    } else if (*hyb) {
      const Instance inst = hyb_inst.load(seed);
      HybridConfig cfg;
      cfg.eta_init = hyb_eta_init;
      cfg.eta_end = hyb_eta_end;
      cfg.outer_iters = hyb_outer;
      cfg.r_init = r_init_from_string(hyb_rinit);
      cfg.backend = backend_from_string(hyb_backend);
      cfg.cim.as2 = hyb_as2;
      cfg.cim.k_tilde = hyb_k;
      cfg.cim.pump.kind = pump_kind_from_string(hyb_pump);
      cfg.cim.pump.p_final = hyb_p;
      cfg.cim.duration = hyb_duration > 0.0 ? hyb_duration : default_duration(hyb_as2);
      cfg.cim.chi = inst.params.chi;
      Rng rng = make_rng(derive_seed(seed, {0x5eedULL}));
      h::RunRecord rec = base_record(cfg.backend == SupportBackend::Sde ? h::Method::HybridCim : h::Method::HybridMaxwell,
                                     inst, seed);
      rec.eta = hyb_eta_end;
      rec.eta_init = hyb_eta_init;
      if (cfg.backend == SupportBackend::Sde) {
        rec.as2 = fin(hyb_as2);
        rec.schedule = hyb_pump;
      }
      if (dump_every > 0 && hyb_outer == 1 && !hyb_trace.empty() && cfg.backend == SupportBackend::Sde) {
        // Amplitude dump of one support estimation.
        Output tr(hyb_trace);
        tr.get() << "t,i,c,s\n";
        CimObserver obs;
        obs.every = dump_every;
        obs.on_state = [&](const OpoState& st) {
          for (Eigen::Index i = 0; i < st.c.size(); ++i)
            tr.get() << st.t << ',' << i << ',' << st.c[i] << ',' << st.s[i] << '\n';
        };
        Vector r0 = Vector::Zero(static_cast<Eigen::Index>(inst.n()));
        if (cfg.r_init == RInit::TruthOracle) r0 = inst.signal();
        const Bits sigma = run_support_estimation(inst, r0, hyb_eta_init, cfg.cim, rng, &obs);
        vector_metrics(rec, inst, r0, sigma, hyb_eta_init);
        rec.iterations = 1;
        rec.converged = true;
      } else {
        const HybridResult res = run_hybrid(inst, cfg, rng);
        vector_metrics(rec, inst, res.r, res.sigma, hyb_eta_end);
        rec.iterations = res.trace.size();
        rec.converged = !res.trace.empty() && !res.trace.back().rank_deficient;
        if (!hyb_trace.empty()) {
          Output tr(hyb_trace);
          tr.get() << "iteration,eta,l0,energy,rmse,rank_deficient\n";
          for (std::size_t t = 0; t < res.trace.size(); ++t) {
            const auto& it = res.trace[t];
            tr.get() << t << ',' << it.eta << ',' << it.l0 << ',' << it.energy << ',' << it.rmse << ','
                     << (it.rank_deficient ? 1 : 0) << '\n';
          }
        }
      }
      write_records(out_path, {rec});
    } else if (*las) {
      const Instance inst = las_inst.load(seed);
      const IstaResult res = run_ista(inst, las_eta, inst.params.chi);
      Bits sigma(inst.n());
      for (std::size_t i = 0; i < inst.n(); ++i) sigma[i] = res.y[static_cast<Eigen::Index>(i)] != 0.0;
      h::RunRecord rec = base_record(h::Method::Lasso, inst, seed);
      rec.eta = las_eta;
      vector_metrics(rec, inst, res.y, sigma, las_eta);
      rec.energy = fin(lasso_objective(inst, res.y, las_eta));
      rec.iterations = res.iterations;
      rec.converged = res.converged;
      write_records(out_path, {rec});
    } else if (*sa) {
      const Instance inst = sa_inst.load(seed);
      CoolingSchedule sched;
      sched.kind = cooling_kind_from_string(sa_sched);
      sched.t0_temp = sa_t0;
      sched.final_temp = sa_final;
      sched.horizon = sa_horizon;
      Rng rng = make_rng(derive_seed(seed, {0x5eedULL}));
      const SaResult res = run_sa(inst, inst.x_true, HybridConfig::lambda_of_eta(sa_eta), sched, rng, sa_trace_every);
      h::RunRecord rec = base_record(h::Method::Sa, inst, seed);
      rec.eta = sa_eta;
      rec.schedule = sa_sched;
      vector_metrics(rec, inst, inst.x_true, res.sigma, sa_eta);
      rec.iterations = res.proposals;
      rec.converged = sched.kind == CoolingSchedule::Kind::Zero ? res.stopped_early : true;
      if (!sa_trace.empty()) {
        Output tr(sa_trace);
        tr.get() << "sweep,direction_cosine\n";
        for (const auto& p : res.trace) tr.get() << p.sweep << ',' << p.direction_cosine << '\n';
      }
      write_records(out_path, {rec});
    } else if (*sme) {
      const MeModel model = me_model_from_string(sme_opts.model);
      const MeConfig cfg = sme_opts.config();
      const MacroState st = solve_me(model, cfg);
      h::RunRecord rec;
      rec.method = model == MeModel::CimFinite   ? h::Method::MeCimFinite
                   : model == MeModel::CimInfinite ? h::Method::MeCimInf
                                                   : h::Method::MeLasso;
      rec.alpha = cfg.alpha;
      rec.a = cfg.a;
      rec.beta = cfg.beta;
      rec.eta = cfg.eta;
      rec.dist = sme_opts.dist;
      rec.chi = std::string(to_string(cfg.chi));
      if (model == MeModel::CimFinite) rec.as2 = fin(cfg.as2);
      rec.rmse = fin(st.rmse);
      rec.r_overlap = fin(st.r_overlap);
      rec.q_mag = fin(st.q_mag);
      rec.u_susc = fin(st.u_susc);
      rec.branch = std::string(to_string(st.branch));
      rec.iterations = st.iterations;
      rec.converged = st.converged;
      write_records(out_path, {rec});
    } else if (*scan) {
      const MeModel model = me_model_from_string(scan_opts.model);
      const ScanDirection dir = scan_dir == "down" ? ScanDirection::Down : ScanDirection::Up;
      if (scan_dir != "up" && scan_dir != "down") throw ParameterError("--direction must be up or down");
      const auto recs = h::run_tasks({h::critical_point_task(model, scan_opts.config(), dir, scan_cfg, scan_opts.dist)});
      write_records(out_path, recs);
    } else if (*thr) {
      Output out(out_path);
      out.get() << "alpha,l0_threshold,l1_threshold_nonnegative,l1_threshold_signed\n";
      for (double a : thr_alpha) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", a, l0_threshold(a),
                      l1_weak_threshold(a, Chi::NonNegative), l1_weak_threshold(a, Chi::Signed));
        out.get() << buf << '\n';
      }
    } else if (*phantom) {
      Rng rng = make_rng(seed);
      const auto side = static_cast<Eigen::Index>(ph_size);
      const Bits mask = imaging::random_mask(side, side, ph_fraction, rng);
      const imaging::Image truth = imaging::synth_phantom(side, side, ph_sparsity, rng);
      imaging::write_pgm(ph_image, truth);
      if (!ph_mask.empty()) imaging::write_mask(ph_mask, mask, side, side);
    } else if (*recon) {
      const imaging::Image truth = imaging::read_image(rc_image);
      Rng rng = make_rng(seed);
      imaging::KSpaceProblem prob;
      prob.rows = truth.rows();
      prob.cols = truth.cols();
      prob.gamma = rc_gamma;
      prob.seed = seed;
      if (!rc_mask.empty()) {
        Eigen::Index r = 0, c = 0;
        prob.mask = imaging::read_mask(rc_mask, r, c);
        if (r != prob.rows || c != prob.cols) throw DimensionError("mask and image sizes differ");
      } else {
        prob.mask = imaging::random_mask(prob.rows, prob.cols, rc_fraction, rng);
      }
      const Vector y = imaging::observe(prob, truth, rc_noise, &rng);
      h::RunRecord rec;
      rec.n = static_cast<std::size_t>(truth.size());
      rec.alpha = static_cast<double>(prob.sampled()) / static_cast<double>(truth.size());
      rec.beta = rc_noise;
      rec.dist = "phantom";
      rec.chi = "signed";
      rec.seed = seed;
      imaging::Image result;
      if (rc_method == "zerofill") {
        rec.method = h::Method::ZeroFill;
        result = imaging::zero_fill(prob, y);
        rec.converged = true;
      } else {
        const imaging::EffectiveOperators ops(prob, y);
        if (rc_method == "lasso") {
          rec.method = h::Method::Lasso;
          rec.eta = rc_eta;
          result = imaging::reconstruct_lasso(ops, rc_eta);
          rec.converged = true;
        } else if (rc_method == "l1eq") {
          rec.method = h::Method::L1Eq;
          result = imaging::reconstruct_l1eq(ops, y);
          rec.converged = true;
        } else if (rc_method == "l0") {
          HybridConfig cfg;
          cfg.eta_end = rc_eta;
          cfg.eta_init = rc_eta_init > 0.0 ? rc_eta_init : rc_eta;
          cfg.outer_iters = rc_outer;
          cfg.r_init = RInit::FromLasso;
          cfg.backend = backend_from_string(rc_backend);
          cfg.cim.chi = Chi::Signed;
          rec.method = cfg.backend == SupportBackend::Sde ? h::Method::HybridCim : h::Method::HybridMaxwell;
          rec.eta = cfg.eta_end;
          rec.eta_init = cfg.eta_init;
          const auto res = imaging::reconstruct_l0(ops, cfg, rng, &truth);
          result = res.image;
          rec.l0 = popcount(res.sigma);
          rec.energy = fin(imaging::imaging_energy(ops, res.r, res.sigma, HybridConfig::lambda_of_eta(rc_eta)));
          rec.iterations = res.trace.size();
          rec.converged = res.cg_failures == 0;
        } else {
          throw ParameterError("--method must be l0, lasso, l1eq or zerofill");
        }
      }
      rec.rmse = fin(imaging::image_rmse(result, truth));
      if (!rc_out_image.empty()) imaging::write_pgm(rc_out_image, result);
      write_records(out_path, {rec});
    } else if (*sweep) {
      std::vector<h::Task> tasks;
      if (!sw_preset.empty() && !sw_spec.empty()) throw ParameterError("give either --preset or --spec");
      if (!sw_preset.empty()) {
        tasks = h::preset_tasks(sw_preset, sw_desk, seed);
      } else if (!sw_spec.empty()) {
        std::ifstream in(sw_spec);
        if (!in) throw IoError("cannot open " + sw_spec);
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          throw IoError(sw_spec + ": " + e.what());
        }
        if (!j.contains("seed")) j["seed"] = seed;
        tasks = h::sweep_tasks(h::sweep_from_json(j));
      } else {
        throw ParameterError("sweep needs --preset or --spec");
      }
      Output out(out_path);
      h::run_tasks(tasks, out.get(), !sw_no_wall);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
