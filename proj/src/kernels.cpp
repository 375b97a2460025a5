#include "cimcs/kernels.hpp"

#include <cmath>

#include "cimcs/errors.hpp"

namespace cimcs::kernels {

namespace {

void check_cols(const Matrix& a, const Vector& v) {
  if (v.size() != a.cols()) throw DimensionError("vector length does not match matrix columns");
}
void check_rows(const Matrix& a, const Vector& v) {
  if (v.size() != a.rows()) throw DimensionError("vector length does not match matrix rows");
}

inline void opo_step(double& c, double& s, double f, double p, double dt, double inv_as, double g1, double g2) {
  const double r2 = c * c + s * s;
  const double amp = std::sqrt(dt) * inv_as * std::sqrt(r2 + 0.5);
  const double dc = dt * ((-1.0 + p - r2) * c + f) + amp * g1;
  const double ds = dt * ((-1.0 - p - r2) * s) + amp * g2;
  c += dc;
  s += ds;
}

// Row blocks for apply(); each block walks all columns in order.
constexpr Eigen::Index kRowBlock = 64;

}  // namespace

namespace serial {

void correlate(const Matrix& a, const Vector& v, Vector& out) {
  check_rows(a, v);
  out.resize(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) out[j] = a.col(j).dot(v);
}

void apply(const Matrix& a, const Vector& u, Vector& out) {
  check_cols(a, u);
  out.setZero(a.rows());
  for (Eigen::Index b = 0; b < a.rows(); b += kRowBlock) {
    const Eigen::Index len = std::min(kRowBlock, a.rows() - b);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (u[j] == 0.0) continue;
      out.segment(b, len) += u[j] * a.col(j).segment(b, len);
    }
  }
}

void gram(const Matrix& a, Matrix& g) {
  g.resize(a.cols(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i <= j; ++i) g(i, j) = g(j, i) = a.col(i).dot(a.col(j));
}

void local_field(const Matrix& a, const Vector& y, const Vector& v, Vector& h) {
  Vector u;
  apply(a, v, u);
  Vector res = y - u;
  correlate(a, res, h);
  h += v;
}

void wsde_update(Vector& c, Vector& s, const Vector& f, double p, double dt, double inv_as, const Vector& g1,
                 const Vector& g2) {
  const Eigen::Index n = c.size();
  for (Eigen::Index i = 0; i < n; ++i) opo_step(c[i], s[i], f[i], p, dt, inv_as, g1[i], g2[i]);
}

}  // namespace serial

namespace parallel {

void correlate(const Matrix& a, const Vector& v, Vector& out) {
  check_rows(a, v);
  out.resize(a.cols());
  const Eigen::Index n = a.cols();
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) out[j] = a.col(j).dot(v);
}

void apply(const Matrix& a, const Vector& u, Vector& out) {
  check_cols(a, u);
  out.setZero(a.rows());
  const Eigen::Index m = a.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < m; b += kRowBlock) {
    const Eigen::Index len = std::min(kRowBlock, m - b);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (u[j] == 0.0) continue;
      out.segment(b, len) += u[j] * a.col(j).segment(b, len);
    }
  }
}

void gram(const Matrix& a, Matrix& g) {
  const Eigen::Index n = a.cols();
  g.resize(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) g(i, j) = g(j, i) = a.col(i).dot(a.col(j));
}

void local_field(const Matrix& a, const Vector& y, const Vector& v, Vector& h) {
  Vector u;
  apply(a, v, u);
  Vector res = y - u;
  correlate(a, res, h);
  h += v;
}

void wsde_update(Vector& c, Vector& s, const Vector& f, double p, double dt, double inv_as, const Vector& g1,
                 const Vector& g2) {
  const Eigen::Index n = c.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) opo_step(c[i], s[i], f[i], p, dt, inv_as, g1[i], g2[i]);
}

}  // namespace parallel

}  // namespace cimcs::kernels
