// Reference problems shared across the test suites.
#pragma once

#include <cmath>

#include "wef/elliptic.hpp"
#include "wef/problem.hpp"

namespace refprob {

/// -u'' + cos(x) u on (0, 2pi), Dirichlet.
inline wef::ProblemSpec mathieu() {
  return wef::make_problem(2, 2.0 * M_PI,
                           {wef::term(2, "-1"), wef::term(0, "cos(x)")},
                           wef::boundary_preset("dirichlet", 2));
}

/// -u'' on (0, L), Dirichlet; eigenvalues (k pi / L)^2.
inline wef::ProblemSpec free_laplacian(double length = M_PI) {
  return wef::make_problem(2, length, {wef::term(2, "-1")},
                           wef::boundary_preset("dirichlet", 2));
}

/// -u'' on (0, L), periodic; eigenvalues (2 pi k / L)^2.
inline wef::ProblemSpec free_laplacian_periodic(double length = 2.0 * M_PI) {
  return wef::make_problem(2, length, {wef::term(2, "-1")}, wef::make_periodic());
}

/// u'''' + (cos(x) u')' on (0, 2pi) with u = u'' = 0 at both ends.
inline wef::ProblemSpec fourth_order() {
  return wef::make_problem(4, 2.0 * M_PI,
                           {wef::term(4, "1"), wef::term(2, "cos(x)", true)},
                           wef::boundary_preset("u-and-uxx-zero", 4));
}

/// Floquet-reduced linearized mKdV operator
///   L(mu) u = -(d/dx + i mu)^3 u + (d/dx + i mu)(-3 cn(x; 1/2)^2 u)
/// on one period (0, 4K(1/2)) with periodic boundary conditions.
inline wef::ProblemSpec mkdv(double mu) {
  const double length = 4.0 * wef::elliptic_k(0.5);
  return wef::make_problem(3, length,
                           {wef::term(3, "-1"), wef::term(1, "-3*cn(x,0.5)^2", true)},
                           wef::make_floquet(mu));
}

/// -(d/dx + i mu)^2 u + cos(x) u on (0, 2pi), periodic in the Floquet sense.
inline wef::ProblemSpec mathieu_floquet(double mu) {
  return wef::make_problem(2, 2.0 * M_PI,
                           {wef::term(2, "-1"), wef::term(0, "cos(x)")},
                           wef::make_floquet(mu));
}

} // namespace refprob
