#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/errors.hpp"
#include "wef/expr.hpp"

namespace wef {

/// One additive term of a differential operator, all derivatives taken as
/// D = d/dx + i*mu when a Floquet shift is active:
///   outside form:  c(x) * D^order u
///   inside form:   D( c(x) * D^(order-1) u )
struct OperatorTerm {
  int order = 0;
  Expr coefficient;
  std::string coefficient_source;
  bool inside = false;
};

enum class BoundaryKind { Separated, Periodic, FloquetPeriodic };

/// Boundary conditions: either separated rows B_L u(0) = 0, B_R u(L) = 0
/// (rows orthonormalized on ingestion) or (Floquet-)periodic.
struct BoundarySpec {
  BoundaryKind kind = BoundaryKind::Separated;
  Mat left;      // k x n, orthonormal rows
  Mat right;     // (n-k) x n, orthonormal rows
  double mu = 0.0;
  std::string preset; // non-empty when built from a named preset
};

struct NumericsSpec {
  double tol = 1e-10;
  int quad_nodes = 48;
};

/// Deterministic modified Gram-Schmidt on the rows, in row order.
/// Throws on rank deficiency.
inline Mat orthonormalize_rows(const Mat& b) {
  const int k = b.rows(), n = b.cols();
  Mat q = b;
  for (int r = 0; r < k; ++r) {
    for (int p = 0; p < r; ++p) {
      Complex dot(0.0);
      for (int j = 0; j < n; ++j) dot += std::conj(q(p, j)) * q(r, j);
      for (int j = 0; j < n; ++j) q(r, j) -= dot * q(p, j);
    }
    double norm = 0.0;
    for (int j = 0; j < n; ++j) norm += std::norm(q(r, j));
    norm = std::sqrt(norm);
    if (norm < 1e-10)
      throw UserError("boundary rows are rank deficient (row " +
                      std::to_string(r) + ")");
    for (int j = 0; j < n; ++j) q(r, j) /= norm;
  }
  return q;
}

inline BoundarySpec make_separated(const Mat& left, const Mat& right) {
  const int n = left.cols();
  if (right.cols() != n) throw UserError("boundary rows have mismatched widths");
  const int k = left.rows();
  if (k <= 0 || k >= n || right.rows() != n - k)
    throw UserError("separated boundary needs k rows on the left and n-k on the right "
                    "with 0 < k < n");
  BoundarySpec bc;
  bc.kind = BoundaryKind::Separated;
  bc.left = orthonormalize_rows(left);
  bc.right = orthonormalize_rows(right);
  return bc;
}

inline BoundarySpec make_periodic() {
  BoundarySpec bc;
  bc.kind = BoundaryKind::Periodic;
  return bc;
}

inline BoundarySpec make_floquet(double mu) {
  BoundarySpec bc;
  bc.kind = BoundaryKind::FloquetPeriodic;
  bc.mu = mu;
  return bc;
}

/// Named boundary presets, expanded to explicit rows deterministically.
///   dirichlet      : u = Du = ... = D^(k-1)u = 0 at both ends, k = n/2
///   u-and-uxx-zero : u = D^2 u = 0 at both ends (4th order)
inline BoundarySpec boundary_preset(const std::string& name, int n) {
  auto unit_rows = [n](const std::vector<int>& comps) {
    Mat m(static_cast<int>(comps.size()), n);
    for (int r = 0; r < m.rows(); ++r) m(r, comps[static_cast<std::size_t>(r)]) = 1.0;
    return m;
  };
  BoundarySpec bc;
  if (name == "dirichlet") {
    if (n < 2 || n % 2 != 0)
      throw UserError("dirichlet preset needs an even operator order");
    std::vector<int> comps;
    for (int j = 0; j < n / 2; ++j) comps.push_back(j);
    bc = make_separated(unit_rows(comps), unit_rows(comps));
  } else if (name == "u-and-uxx-zero") {
    if (n != 4) throw UserError("u-and-uxx-zero preset needs a 4th order operator");
    bc = make_separated(unit_rows({0, 2}), unit_rows({0, 2}));
  } else if (name == "periodic") {
    bc = make_periodic();
  } else {
    throw UserError("unknown boundary preset '" + name + "'");
  }
  bc.preset = name;
  return bc;
}

/// A boundary-value eigenproblem on (0, L): an n-th order operator given as
/// a sum of OperatorTerms, boundary conditions, and default numerics.
struct ProblemSpec {
  int order = 2;
  double length = 0.0;
  std::string length_source;
  std::vector<OperatorTerm> terms;
  BoundarySpec boundary;
  NumericsSpec numerics;

  double mu() const {
    return boundary.kind == BoundaryKind::FloquetPeriodic ? boundary.mu : 0.0;
  }

  bool separated() const { return boundary.kind == BoundaryKind::Separated; }

  void validate() const {
    if (order < 1 || order > Mat::kMaxDim)
      throw UserError("operator order must lie in [1, 8]");
    if (!(length > 0.0)) throw UserError("interval length must be positive");
    bool has_leading = false;
    for (const OperatorTerm& t : terms) {
      if (t.order < 0 || t.order > order)
        throw UserError("operator term of derivative order " + std::to_string(t.order) +
                        " exceeds the declared order");
      if (t.inside && t.order < 1)
        throw UserError("inside-applied terms need derivative order >= 1");
      if (t.order == order) has_leading = true;
    }
    if (!has_leading)
      throw UserError("operator has no term of the declared leading order");
    if (separated() && (boundary.left.cols() != order || boundary.right.cols() != order))
      throw UserError("boundary row width does not match the operator order");
  }

  /// True when every coefficient and boundary entry is real, so that real
  /// lambda produce a real Evans function whose sign is meaningful.
  bool is_real() const {
    if (boundary.kind == BoundaryKind::FloquetPeriodic && boundary.mu != 0.0)
      return false;
    for (int i = 0; i < boundary.left.rows(); ++i)
      for (int j = 0; j < boundary.left.cols(); ++j)
        if (boundary.left(i, j).imag() != 0.0) return false;
    for (int i = 0; i < boundary.right.rows(); ++i)
      for (int j = 0; j < boundary.right.cols(); ++j)
        if (boundary.right(i, j).imag() != 0.0) return false;
    for (const OperatorTerm& t : terms) {
      for (int s = 0; s <= 16; ++s) {
        const double x = length * s / 16.0;
        if (std::abs(t.coefficient.eval(Complex(x)).imag()) > 0.0) return false;
      }
    }
    return true;
  }
};

/// Convenience constructor for scalar operators written as coefficient
/// strings, e.g. mathieu_problem() below.
inline ProblemSpec make_problem(int order, double length,
                                std::vector<OperatorTerm> terms,
                                BoundarySpec boundary) {
  ProblemSpec p;
  p.order = order;
  p.length = length;
  p.terms = std::move(terms);
  p.boundary = std::move(boundary);
  p.validate();
  return p;
}

inline OperatorTerm term(int order, const std::string& coeff, bool inside = false) {
  OperatorTerm t;
  t.order = order;
  t.coefficient = Expr::parse(coeff);
  t.coefficient_source = coeff;
  t.inside = inside;
  return t;
}

} // namespace wef
