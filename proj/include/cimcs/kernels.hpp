#pragma once

#include "cimcs/types.hpp"

// Dense hot loops, each in a serial reference form and an OpenMP form.
// Both forms sum in the same order per output element, so their results are
// bitwise identical regardless of thread count.
namespace cimcs::kernels {

namespace serial {
/// out = Aᵀ v
void correlate(const Matrix& a, const Vector& v, Vector& out);
/// out = A u
void apply(const Matrix& a, const Vector& u, Vector& out);
/// g = AᵀA
void gram(const Matrix& a, Matrix& g);
/// h = Aᵀ(y − A v) + v   (unit-norm columns)
void local_field(const Matrix& a, const Vector& y, const Vector& v, Vector& h);
/// One Euler–Maruyama step of the OPO amplitude equations; g1, g2 are standard normals.
void wsde_update(Vector& c, Vector& s, const Vector& f, double p, double dt, double inv_as, const Vector& g1,
                 const Vector& g2);
}  // namespace serial

namespace parallel {
void correlate(const Matrix& a, const Vector& v, Vector& out);
void apply(const Matrix& a, const Vector& u, Vector& out);
void gram(const Matrix& a, Matrix& g);
void local_field(const Matrix& a, const Vector& y, const Vector& v, Vector& h);
void wsde_update(Vector& c, Vector& s, const Vector& f, double p, double dt, double inv_as, const Vector& g1,
                 const Vector& g2);
}  // namespace parallel

// Library code calls these.
using parallel::apply;
using parallel::correlate;
using parallel::gram;
using parallel::local_field;
using parallel::wsde_update;

}  // namespace cimcs::kernels
