#pragma once

#include <cmath>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/errors.hpp"
#include "wef/greens.hpp"
#include "wef/odeint.hpp"

namespace wef {

/// Hilbert-Schmidt (Frobenius) norm.
inline double hs_norm(const Mat& a) { return a.frobenius_norm(); }

/// Report of the Hilbert-Schmidt inverse inequality
///   ||A^-1||_HS <= ||A||_HS^(d-1) / (|det A| d^((d-2)/2)).
struct HSReport {
  int dim = 0;
  double norm = 0.0;
  double abs_det = 0.0;
  double bound = 0.0;
  double true_inverse_norm = 0.0; // directly computed for d <= 64
  bool has_true = false;
};

inline HSReport hs_inverse_bound(const Mat& a) {
  if (a.rows() != a.cols()) throw DomainError("inverse bound needs a square matrix");
  HSReport r;
  r.dim = a.rows();
  r.norm = hs_norm(a);
  r.abs_det = std::abs(determinant(a));
  if (!(r.abs_det > 0.0)) throw DomainError("matrix is singular");
  r.bound = std::pow(r.norm, r.dim - 1) /
            (r.abs_det * std::pow(static_cast<double>(r.dim), 0.5 * (r.dim - 2)));
  if (r.dim <= 64) {
    r.true_inverse_norm = hs_norm(inverse(a));
    r.has_true = true;
  }
  return r;
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations; used to
/// expose the singular values sigma_i = eig(A^H A) for verification.
inline std::vector<double> hermitian_eigenvalues(Mat h) {
  const int n = h.rows();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::norm(h(p, q));
    if (off < 1e-28 * (1.0 + h.frobenius_norm())) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const Complex apq = h(p, q);
        const double mag = std::abs(apq);
        if (mag < 1e-30) continue;
        const Complex phase = apq / mag;
        const double app = h(p, p).real();
        const double aqq = h(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // apply J^H H J with J(p,p)=c, J(p,q)=s*phase, J(q,p)=-s*conj(phase), J(q,q)=c
        for (int i = 0; i < n; ++i) {
          const Complex hip = h(i, p);
          const Complex hiq = h(i, q);
          h(i, p) = c * hip - s * std::conj(phase) * hiq;
          h(i, q) = s * phase * hip + c * hiq;
        }
        for (int i = 0; i < n; ++i) {
          const Complex hpi = h(p, i);
          const Complex hqi = h(q, i);
          h(p, i) = c * hpi - s * phase * hqi;
          h(q, i) = s * std::conj(phase) * hpi + c * hqi;
        }
      }
  }
  std::vector<double> eig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = h(i, i).real();
  return eig;
}

/// Squared singular values of A, via the Hermitian eigenproblem of A^H A.
inline std::vector<double> singular_values_squared(const Mat& a) {
  return hermitian_eigenvalues(a.adjoint() * a);
}

struct SystemResolventBound {
  bool unbounded = false;
  double value = 0.0;
};

/// Norm bound for the resolvent under general vector forcing, assembled
/// panel-wise from the Hilbert-Schmidt inverse inequality:
///   || G(x,y) ||_HS <= || U(x) (E 1_{y<x} - P) ||_HS
///                      * || U(y) ||_HS^(d-1) / (|det U(y)| d^((d-2)/2))
/// integrated in the same split-square quadrature as the scalar weight.
/// Looser than the scalar bound by construction.
inline SystemResolventBound system_resolvent_bound(const FundamentalSolution& fund,
                                                   const Mat& p, Complex e,
                                                   const QuadratureSpec& quad) {
  SystemResolventBound result;
  if (std::abs(e) == 0.0) {
    result.unbounded = true;
    return result;
  }
  const int d = fund.order();
  const double dfactor = std::pow(static_cast<double>(d), 0.5 * (d - 2));
  const double length = fund.length();

  auto inv_bound_at = [&](double y) {
    const Mat& u = fund.u_at_node(fund.lower_node(y));
    const double det = std::abs(determinant(u));
    return std::pow(hs_norm(u), d - 1) / (det * dfactor);
  };
  const Mat ei_minus_p = e * Mat::identity(d) - p;
  auto x_factor = [&](double x, bool lower) {
    const Mat& u = fund.u_at_node(fund.lower_node(x));
    return hs_norm(lower ? u * ei_minus_p : u * p);
  };

  auto level_value = [&](int nodes) {
    const detail::DuffyLevel lvl = detail::make_duffy_level(length, nodes);
    const int nq = nodes;
    double sum = 0.0;
    for (int tri = 0; tri < 2; ++tri) {
      const bool lower = tri == 0;
      for (int i = 0; i < nq; ++i) {
        const double axis = lvl.axis[static_cast<std::size_t>(i)];
        const double jac = length * length * lvl.outer.nodes[static_cast<std::size_t>(i)];
        const double axis_factor = lower ? x_factor(axis, true) : inv_bound_at(axis);
        for (int j = 0; j < nq; ++j) {
          const double inner = lvl.inner[static_cast<std::size_t>(i) * nq + j];
          const double inner_factor = lower ? inv_bound_at(inner) : x_factor(inner, false);
          const double w = lvl.outer.weights[static_cast<std::size_t>(i)] *
                           lvl.outer.weights[static_cast<std::size_t>(j)] * jac;
          const double h = axis_factor * inner_factor;
          sum += w * h * h;
        }
      }
    }
    return std::sqrt(sum);
  };

  double value = level_value(quad.nodes);
  if (quad.refine_rel_tol > 0.0) {
    const double fine = level_value(2 * quad.nodes);
    if (std::abs(value - fine) > quad.refine_rel_tol * std::abs(fine) + 1e-14)
      throw QuadratureError("quadrature levels disagree for the system bound",
                            value, fine);
    value = fine;
  }
  result.value = value / std::abs(e);
  return result;
}

/// Quadrature node set matching the kernel assembly, so fundamental
/// solutions built for the weight integrals are node-exact here too.
inline GridSpec quadrature_grid(double length, const QuadratureSpec& quad) {
  std::vector<double> pts{0.0, length};
  auto add_level = [&pts, length](int n) {
    const detail::DuffyLevel lvl = detail::make_duffy_level(length, n);
    pts.insert(pts.end(), lvl.axis.begin(), lvl.axis.end());
    pts.insert(pts.end(), lvl.inner.begin(), lvl.inner.end());
  };
  add_level(quad.nodes);
  if (quad.refine_rel_tol > 0.0) add_level(2 * quad.nodes);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  GridSpec g;
  g.nodes = std::move(pts);
  return g;
}

} // namespace wef
