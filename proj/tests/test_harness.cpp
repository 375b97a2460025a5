#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "cimcs/errors.hpp"
#include "cimcs/harness.hpp"

using namespace cimcs;
using namespace cimcs::harness;

namespace {

std::string run_csv(const SweepSpec& s) {
  std::ostringstream os;
  run_tasks(sweep_tasks(s), os, false);
  return os.str();
}

std::string param_error(const std::string& text) {
  try {
    (void)sweep_from_json(nlohmann::json::parse(text));
  } catch (const ParameterError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("CSV header is fixed") {
  CHECK(csv_header() ==
        "method,task,n,alpha,a,beta,eta,eta_init,dist,chi,as2,schedule,trial,seed,rmse,direction_cosine,energy,l0,"
        "iterations,converged,r_overlap,q_mag,u_susc,branch,wall_time_ms");
  CHECK(csv_header(false).find("wall_time_ms") == std::string::npos);
}

TEST_CASE("sweep cardinality and seeds") {
  SweepSpec s;
  s.methods = {Method::Lasso};
  s.n = {60};
  s.a = {0.1, 0.2};
  s.trials = 3;
  s.seed = 11;
  const auto tasks = sweep_tasks(s);
  CHECK(tasks.size() == 6);
  CHECK(tasks[0].proto.seed == trial_seed(11, 0, 0));
  CHECK(tasks[1].proto.seed == trial_seed(11, 0, 1));
  CHECK(tasks[3].proto.seed == trial_seed(11, 1, 0));
  CHECK(tasks[3].proto.a == 0.2);

  s.methods = {Method::Lasso, Method::MeLasso};
  CHECK(sweep_tasks(s).size() == 8);  // ME rows once per point
}

TEST_CASE("sweeps are reproducible byte for byte") {
  SweepSpec s;
  s.methods = {Method::HybridMaxwell, Method::Lasso, Method::Sa};
  s.n = {80};
  s.a = {0.2};
  s.trials = 2;
  s.outer_iters = 10;
  s.sa_horizon = 50;
  s.cooling = {CoolingSchedule::Kind::InvLinear};
  s.seed = 3;
  const std::string a = run_csv(s), b = run_csv(s);
  CHECK(a == b);
  CHECK(a.find("nan") == std::string::npos);
  CHECK(a.find("inf") == std::string::npos);
  std::size_t lines = 0;
  for (char c : a) lines += c == '\n';
  CHECK(lines == 1 + 6);
}

TEST_CASE("ordered writer emits a valid prefix") {
  std::ostringstream os;
  OrderedCsvWriter w(os, 3, false);
  RunRecord r;
  w.submit(2, r);
  CHECK(w.written() == 0);
  CHECK(os.str() == csv_header(false) + "\n");
  w.submit(0, r);
  CHECK(w.written() == 1);
  w.submit(1, r);
  CHECK(w.written() == 3);
}

TEST_CASE("non-finite metrics are written as empty fields") {
  RunRecord r;
  r.rmse = std::nan("");
  r.energy = INFINITY;
  const std::string row = csv_row(r, false);
  CHECK(row.find("nan") == std::string::npos);
  CHECK(row.find("inf") == std::string::npos);
}

TEST_CASE("sweep JSON errors name the key") {
  CHECK(param_error(R"({"dist": "half_gaussian", "chi": "signed"})").rfind("chi", 0) == 0);
  CHECK(param_error(R"({"etta": 0.1})").rfind("etta", 0) == 0);
  CHECK(param_error(R"({"n": -3})").rfind("n", 0) == 0);
  CHECK(param_error(R"({"methods": ["nope"]})").rfind("methods", 0) == 0);
  CHECK(param_error(R"({"a": [0.1, 0.2], "eta": 0.01, "trials": 2})").empty());
  const SweepSpec s = sweep_from_json(nlohmann::json::parse(R"({"a": [0.1, 0.2], "eta": 0.01, "trials": 2})"));
  CHECK(sweep_from_json(sweep_to_json(s)).a == s.a);
}

TEST_CASE("optimal eta search") {
  SUBCASE("synthetic minimum") {
    const double target = 0.037;
    const auto solver = [&](double eta) {
      MacroState st;
      st.converged = true;
      st.rmse = 0.1 + std::pow(std::log(eta / target), 2);
      return st;
    };
    const auto res = grid_search_optimal_eta(solver);
    CHECK(res.eta_opt == doctest::Approx(target).epsilon(1e-3));
    CHECK(grid_search_optimal_eta(solver, 0.01, 0.01).eta_opt == 0.01);
  }
  SUBCASE("no convergent point") {
    const auto bad = [](double) { return MacroState{}; };
    CHECK_THROWS_AS(grid_search_optimal_eta(bad), ConvergenceError);
  }
  SUBCASE("noisy ME search beats a dense grid") {
    MeConfig cfg;
    cfg.alpha = 0.6;
    cfg.a = 0.1;
    cfg.beta = 0.1;
    const auto solver = [&](double eta) {
      MeConfig c = cfg;
      c.eta = eta;
      return solve_me(MeModel::CimInfinite, c);
    };
    const auto res = grid_search_optimal_eta(solver);
    double best = 1e300, best_eta = 0.0;
    for (int k = 0; k <= 120; ++k) {
      const double eta = 0.002 * std::pow(250.0, k / 120.0);
      const MacroState st = solver(eta);
      if (st.converged && st.rmse < best) best = st.rmse, best_eta = eta;
    }
    CHECK(res.rmse_min <= best + 1e-9);
    CHECK(res.eta_opt > 0.002);
    CHECK(res.eta_opt < 0.5);
    CHECK(std::abs(std::log(res.eta_opt / best_eta)) < std::log(250.0) / 60.0);
  }
  SUBCASE("noise-free small a prefers the smallest threshold") {
    MeConfig cfg;
    cfg.alpha = 0.6;
    cfg.a = 0.05;
    const auto res = grid_search_optimal_eta([&](double eta) {
      MeConfig c = cfg;
      c.eta = eta;
      return solve_me(MeModel::CimInfinite, c);
    });
    CHECK(res.eta_opt < 0.0025);
  }
}

TEST_CASE("summary statistics over trials") {
  std::vector<RunRecord> recs(3);
  recs[0].rmse = 1.0;
  recs[1].rmse = 2.0;
  recs[2].rmse = 3.0;
  for (std::size_t i = 0; i < 3; ++i) recs[i].trial = i;
  const auto sum = summarize(recs);
  REQUIRE(sum.size() == 1);
  CHECK(sum[0].count == 3);
  CHECK(sum[0].mean_rmse == doctest::Approx(2.0));
  CHECK(sum[0].std_rmse == doctest::Approx(1.0));
}

TEST_CASE("every preset builds") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    CHECK_FALSE(preset_tasks(name, true, 1).empty());
  }
  CHECK_THROWS_AS(preset_tasks("nope", true, 1), ParameterError);
}
