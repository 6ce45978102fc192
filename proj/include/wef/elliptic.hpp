#pragma once

#include <cmath>
#include <limits>

#include "wef/errors.hpp"

namespace wef {

struct JacobiValues {
  double sn;
  double cn;
  double dn;
};

/// Complete elliptic integral of the first kind in the parameter convention,
/// K(m) = pi / (2 * agm(1, sqrt(1 - m))).
inline double elliptic_k(double m) {
  if (!(m >= 0.0 && m < 1.0))
    throw DomainError("elliptic parameter m must lie in [0, 1)");
  double a = 1.0;
  double b = std::sqrt(1.0 - m);
  while (a - b > std::numeric_limits<double>::epsilon() * a) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return M_PI / (a + b); // pi / (2 * agm)
}

/// Jacobi elliptic functions sn, cn, dn in the parameter convention
/// (cn(K(m), m) = 0).  Arithmetic-geometric mean ladder followed by the
/// descending Landen recurrence, which recovers all three functions to
/// machine precision.
inline JacobiValues jacobi(double x, double m) {
  if (!(m >= 0.0 && m < 1.0))
    throw DomainError("elliptic parameter m must lie in [0, 1)");

  // The parameter sequence converges quadratically, so stopping at 1e-8
  // leaves a residual below machine epsilon on the next level.
  constexpr double kStop = 1e-8;
  constexpr int kMaxIter = 16;
  double am[kMaxIter], bm[kMaxIter];

  double a = 1.0;
  double emc = 1.0 - m;
  double c = a;
  int top = 0;
  for (int i = 0; i < kMaxIter; ++i) {
    top = i;
    am[i] = a;
    emc = std::sqrt(emc);
    bm[i] = emc;
    c = 0.5 * (a + emc);
    if (std::abs(a - emc) <= kStop * a) break;
    emc *= a;
    a = c;
  }

  double u = c * x;
  double sn = std::sin(u);
  double cn = std::cos(u);
  double dn = 1.0;
  if (sn != 0.0) {
    a = cn / sn;
    c *= a;
    for (int i = top; i >= 0; --i) {
      const double b = am[i];
      a *= c;
      c *= dn;
      dn = (bm[i] + a) / (b + a);
      a = c / b;
    }
    a = 1.0 / std::sqrt(c * c + 1.0);
    sn = (sn < 0.0) ? -a : a;
    cn = c * sn;
  }
  return {sn, cn, dn};
}

} // namespace wef
