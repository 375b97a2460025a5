// Serial reference kernels against their OpenMP forms.
#include <benchmark/benchmark.h>

#include <boost/random/normal_distribution.hpp>

#include "cimcs/kernels.hpp"
#include "cimcs/rng.hpp"

namespace {

using cimcs::Matrix;
using cimcs::Vector;

struct Data {
  Matrix a;
  Vector y, v, m_vec;
  explicit Data(Eigen::Index n) {
    const Eigen::Index m = n / 2;
    cimcs::Rng rng(42);
    boost::random::normal_distribution<double> nd;
    a.resize(m, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < m; ++i) a(i, j) = nd(rng);
    a.colwise().normalize();
    y.resize(m);
    v.resize(n);
    for (auto& x : y) x = nd(rng);
    for (auto& x : v) x = nd(rng);
    m_vec = y;
  }
};

template <void (*Kernel)(const Matrix&, const Vector&, const Vector&, Vector&)>
void BM_LocalField(benchmark::State& st) {
  const Data d(st.range(0));
  Vector h;
  for (auto _ : st) {
    Kernel(d.a, d.y, d.v, h);
    benchmark::DoNotOptimize(h.data());
  }
}

template <void (*Kernel)(const Matrix&, const Vector&, Vector&)>
void BM_Correlate(benchmark::State& st) {
  const Data d(st.range(0));
  Vector out;
  for (auto _ : st) {
    Kernel(d.a, d.m_vec, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <void (*Kernel)(const Matrix&, Matrix&)>
void BM_Gram(benchmark::State& st) {
  const Data d(st.range(0));
  Matrix g;
  for (auto _ : st) {
    Kernel(d.a, g);
    benchmark::DoNotOptimize(g.data());
  }
}

template <void (*Kernel)(Vector&, Vector&, const Vector&, double, double, double, const Vector&, const Vector&)>
void BM_Wsde(benchmark::State& st) {
  const Data d(st.range(0));
  Vector c = Vector::Zero(d.v.size()), s = Vector::Zero(d.v.size());
  const Vector g2 = d.v.reverse();
  for (auto _ : st) {
    Kernel(c, s, d.v, 1.5, 0.01, 1e-3, d.v, g2);
    benchmark::DoNotOptimize(c.data());
  }
}

}  // namespace

BENCHMARK(BM_LocalField<cimcs::kernels::serial::local_field>)->Arg(500)->Arg(2000)->Arg(4000);
BENCHMARK(BM_LocalField<cimcs::kernels::parallel::local_field>)->Arg(500)->Arg(2000)->Arg(4000);
BENCHMARK(BM_Correlate<cimcs::kernels::serial::correlate>)->Arg(500)->Arg(2000)->Arg(4000);
BENCHMARK(BM_Correlate<cimcs::kernels::parallel::correlate>)->Arg(500)->Arg(2000)->Arg(4000);
BENCHMARK(BM_Gram<cimcs::kernels::serial::gram>)->Arg(500)->Arg(1000);
BENCHMARK(BM_Gram<cimcs::kernels::parallel::gram>)->Arg(500)->Arg(1000);
BENCHMARK(BM_Wsde<cimcs::kernels::serial::wsde_update>)->Arg(4000)->Arg(16384);
BENCHMARK(BM_Wsde<cimcs::kernels::parallel::wsde_update>)->Arg(4000)->Arg(16384);

BENCHMARK_MAIN();
