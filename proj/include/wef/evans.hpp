#pragma once

#include <cmath>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/errors.hpp"
#include "wef/odeint.hpp"
#include "wef/problem.hpp"

namespace wef {

/// Evans function value at one spectral point.  The weight w is the
/// Hilbert-Schmidt norm of the Green's kernel (greens module); together
/// they certify that the open disk of radius |e|/w about lambda is free
/// of spectrum.
struct EvansValue {
  Complex lambda;
  Complex e;
  double w = 0.0;

  double bound() const { return std::abs(e) / w; }
};

/// Orthonormal basis for the nullspace of a full-row-rank k x n matrix,
/// returned as the columns of an n x (n-k) matrix N with B N = 0.
/// Deterministic: candidates are the standard basis vectors, accepted
/// greedily by largest residual with ties broken by lowest index.
inline Mat nullspace_basis(const Mat& b) {
  const int k = b.rows(), n = b.cols();
  if (k >= n) throw UserError("nullspace basis requires fewer rows than columns");
  const Mat q = orthonormalize_rows(b); // throws when rank deficient

  std::vector<std::vector<Complex>> accepted;
  // B v = 0 is bilinear, so v must be Hermitian-orthogonal to the
  // conjugated rows of B.
  auto residual = [&](int j) {
    std::vector<Complex> v(static_cast<std::size_t>(n), Complex(0.0));
    v[static_cast<std::size_t>(j)] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (int r = 0; r < k; ++r) {
        Complex dot(0.0);
        for (int c = 0; c < n; ++c) dot += q(r, c) * v[static_cast<std::size_t>(c)];
        for (int c = 0; c < n; ++c) v[static_cast<std::size_t>(c)] -= dot * std::conj(q(r, c));
      }
      for (const auto& a : accepted) {
        Complex dot(0.0);
        for (int c = 0; c < n; ++c) dot += std::conj(a[static_cast<std::size_t>(c)]) * v[static_cast<std::size_t>(c)];
        for (int c = 0; c < n; ++c) v[static_cast<std::size_t>(c)] -= dot * a[static_cast<std::size_t>(c)];
      }
    }
    return v;
  };

  Mat nbasis(n, n - k);
  for (int col = 0; col < n - k; ++col) {
    int best = -1;
    double best_norm = -1.0;
    std::vector<Complex> best_v;
    for (int j = 0; j < n; ++j) {
      std::vector<Complex> v = residual(j);
      double norm2 = 0.0;
      for (const Complex& c : v) norm2 += std::norm(c);
      if (norm2 > best_norm) {
        best_norm = norm2;
        best = j;
        best_v = std::move(v);
      }
    }
    if (best < 0 || best_norm < 1e-20)
      throw NumericalError("nullspace candidate residual collapsed");
    const double inv = 1.0 / std::sqrt(best_norm);
    for (int c = 0; c < n; ++c) nbasis(c, col) = best_v[static_cast<std::size_t>(c)] * inv;
    accepted.push_back(std::move(best_v));
    for (int c = 0; c < n; ++c) accepted.back()[static_cast<std::size_t>(c)] = nbasis(c, col);
  }
  return nbasis;
}

/// E = det(B_R M N_L) for separated boundary conditions.
inline Complex evans_det_separated(const BoundarySpec& bc, const Mat& monodromy) {
  if (bc.kind != BoundaryKind::Separated)
    throw UserError("separated Evans function needs separated boundary conditions");
  const Mat n_left = nullspace_basis(bc.left);
  return determinant(bc.right * monodromy * n_left);
}

/// E = det(M - I) for (Floquet-)periodic boundary conditions.
inline Complex evans_det_periodic(const Mat& monodromy) {
  return determinant(monodromy - Mat::identity(monodromy.rows()));
}

inline Complex evans_det(const BoundarySpec& bc, const Mat& monodromy) {
  return bc.kind == BoundaryKind::Separated ? evans_det_separated(bc, monodromy)
                                            : evans_det_periodic(monodromy);
}

/// Evans function only (weight left at zero; see greens::weight).
inline EvansValue evans_separated(const ProblemSpec& problem, Complex lambda,
                                  double tol) {
  const SystemMatrix sys = companion_system(problem);
  EvansValue v;
  v.lambda = lambda;
  v.e = evans_det_separated(problem.boundary, monodromy(sys, lambda, tol));
  return v;
}

inline EvansValue evans_periodic(const ProblemSpec& problem, Complex lambda,
                                 double tol) {
  if (problem.boundary.kind == BoundaryKind::Separated)
    throw UserError("periodic Evans function needs periodic boundary conditions");
  const SystemMatrix sys = companion_system(problem);
  EvansValue v;
  v.lambda = lambda;
  v.e = evans_det_periodic(monodromy(sys, lambda, tol));
  return v;
}

/// Dispatch on the boundary kind.
inline EvansValue evans(const ProblemSpec& problem, Complex lambda, double tol) {
  return problem.separated() ? evans_separated(problem, lambda, tol)
                             : evans_periodic(problem, lambda, tol);
}

} // namespace wef
