#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/errors.hpp"
#include "wef/evans.hpp"
#include "wef/odeint.hpp"
#include "wef/problem.hpp"
#include "wef/quadrature.hpp"

namespace wef {

/// Tensor Gauss-Legendre quadrature for the weight integrals: the square
/// [0,L]^2 is split along the diagonal and each triangle is mapped from the
/// unit square by a Duffy-type transform, so the integrand is smooth per
/// panel.  `nodes` is the per-direction count; when refine_rel_tol > 0 the
/// integral is evaluated at `nodes` and `2*nodes` and the two levels must
/// agree to that relative tolerance.
struct QuadratureSpec {
  int nodes = 48;
  double refine_rel_tol = 1e-6;
};

namespace detail {

/// One Duffy level: x = L s_i, y = L s_i t_j on the lower triangle (y < x),
/// mirrored for the upper.  Jacobian L^2 s_i.
struct DuffyLevel {
  QuadratureRule outer;
  std::vector<double> axis;  // L * s_i
  std::vector<double> inner; // L * s_i * t_j, i-major
};

inline DuffyLevel make_duffy_level(double length, int n) {
  DuffyLevel lvl;
  lvl.outer = gauss_legendre(n);
  lvl.axis.resize(static_cast<std::size_t>(n));
  lvl.inner.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double xi = length * lvl.outer.nodes[static_cast<std::size_t>(i)];
    lvl.axis[static_cast<std::size_t>(i)] = xi;
    for (int j = 0; j < n; ++j)
      lvl.inner[static_cast<std::size_t>(i) * n + j] =
          xi * lvl.outer.nodes[static_cast<std::size_t>(j)];
  }
  return lvl;
}

} // namespace detail

/// Green's kernel assembly at one spectral point.
///
/// The kernel is
///   G(x,y) = [U(x) (E I - P) U^-1(y)]_{1n}   for y < x
///          = [-U(x) P U^-1(y)]_{1n}          for y > x
/// with E the Evans determinant and P the adjugate-based projection, finite
/// even at eigenvalues.
///
/// For separated boundary conditions the evaluation goes through boundary
/// solution bundles rather than the literal n x n sandwich: U(x) P U^-1(y)
/// factors as [U(x) N_L] adj(B_R M N_L) [B_R Phi(y->L)], and the y < x
/// branch as [Phi(L->x) N_R] (rho adj(B_L M^-1 N_R)) [B_L U^-1(y)] with the
/// duality constant rho = E / det(B_L M^-1 N_R) obtained from the Abel
/// integral.  Each bundle is a direct integration with no inversion of
/// exponentially graded matrices, which keeps the kernel usable for
/// higher-order operators where U(x)(...)U^-1(y) loses digits to
/// cancellation.
class KernelAssembly {
public:
  enum class Side { Auto, Lower, Upper };

  KernelAssembly(const ProblemSpec& problem, Complex lambda, double tol,
                 const QuadratureSpec& quad)
      : KernelAssembly(std::make_shared<const SystemMatrix>(companion_system(problem)),
                       problem.boundary, lambda, tol, quad) {}

  /// Low-level entry: explicit system and boundary data, optionally with an
  /// injected nullspace basis (used by the basis-invariance checks).
  KernelAssembly(std::shared_ptr<const SystemMatrix> sys, const BoundarySpec& bc,
                 Complex lambda, double tol, const QuadratureSpec& quad,
                 const Mat* injected_null_basis = nullptr)
      : sys_(std::move(sys)), boundary_(bc), lambda_(lambda), tol_(tol), quad_(quad) {
    n_ = sys_->n;
    mu_ = sys_->mu;
    coarse_ = detail::make_duffy_level(sys_->length, quad.nodes);
    if (quad.refine_rel_tol > 0.0)
      fine_ = detail::make_duffy_level(sys_->length, 2 * quad.nodes);

    GridSpec grid = union_grid();
    fund_ = std::make_shared<const FundamentalSolution>(sys_, lambda, grid, tol);
    const Mat& m = fund_->monodromy();

    if (boundary_.kind == BoundaryKind::Separated) {
      const int k = boundary_.left.rows();
      n_left_ = injected_null_basis ? *injected_null_basis
                                    : nullspace_basis(boundary_.left);
      if (injected_null_basis) {
        // the duality constant below needs an orthonormal nullspace basis
        if ((boundary_.left * n_left_).max_abs() > 1e-12 ||
            (n_left_.adjoint() * n_left_ - Mat::identity(n_ - k)).max_abs() > 1e-12)
          throw UserError("injected basis must be an orthonormal nullspace basis");
      }
      n_right_ = nullspace_basis(boundary_.right);

      std::vector<FlowSpec> fwd(1), bwd(2);
      fwd[0].start = boundary_.left; // Z_L = B_L U^-1, rows of the inverse
      fwd[0].adjoint = true;
      bwd[0].start = n_right_;       // Y_R = Phi(L->x) N_R
      bwd[0].adjoint = false;
      bwd[1].start = boundary_.right; // Z_R = B_R Phi(x->L)
      bwd[1].adjoint = true;
      auto fwd_out = integrate_flows(*sys_, lambda, grid, tol, fwd, true);
      auto bwd_out = integrate_flows(*sys_, lambda, grid, tol, bwd, false);
      zl_ = std::move(fwd_out[0]);
      yr_ = std::move(bwd_out[0]);
      zr_ = std::move(bwd_out[1]);

      const Mat x_core = zr_[0] * n_left_; // B_R M N_L
      e_ = determinant(x_core);
      p_ = n_left_ * adjugate(x_core) * zr_[0];
      upper_core_ = adjugate(x_core);

      // duality constant rho = E / det(B_L M^-1 N_R), evaluated without E:
      // rho = (-1)^(k(n-k)) eta_R det(M) / eta_L with det(M) from the Abel
      // trace integral and eta the orientation determinants of the bases.
      const Mat s_core = boundary_.left * yr_[0]; // B_L M^-1 N_R
      const Complex eta_l = basis_orientation(boundary_.left, n_left_);
      const Complex eta_r = basis_orientation(boundary_.right, n_right_);
      const double sign = (k * (n_ - k)) % 2 == 0 ? 1.0 : -1.0;
      rho_ = sign * eta_r * fund_->abel_determinant() / eta_l;
      lower_core_ = rho_ * adjugate(s_core);
    } else {
      const Mat m_minus_i = m - Mat::identity(n_);
      e_ = determinant(m_minus_i);
      p_ = adjugate(m_minus_i) * m;
    }
  }

  Complex lambda() const { return lambda_; }
  Complex evans() const { return e_; }
  const Mat& projection() const { return p_; }
  int order() const { return n_; }
  double mu() const { return mu_; }
  const FundamentalSolution& fundamental() const { return *fund_; }
  const QuadratureSpec& quadrature() const { return quad_; }

  /// E / det(B_L M^-1 N_R); exposed for consistency checks.
  Complex duality_constant() const { return rho_; }

  /// Full matrix kernel; Side::Auto takes the y < x branch on the diagonal.
  Mat matrix_kernel(double x, double y, Side side = Side::Auto) const {
    check_range(x, y);
    const bool lower = (side == Side::Auto) ? (y <= x) : (side == Side::Lower);
    if (boundary_.kind == BoundaryKind::Separated) {
      if (lower) return rows_lower(x) * lower_core_ * bundle_rows(y, true);
      return Complex(-1.0) * (rows_upper(x) * upper_core_ * bundle_rows(y, false));
    }
    const Mat ux = fund_->u(x);
    const Mat uinv_y = fund_->uinv(y);
    if (lower) return ux * (e_ * Mat::identity(n_) - p_) * uinv_y;
    return Complex(-1.0) * (ux * p_ * uinv_y);
  }

  /// Scalar kernel G = (matrix kernel)_{1,n}.
  Complex kernel(double x, double y) const {
    return derivative_kernel(0, x, y);
  }

  /// Kernel of d^j/dx^j composed with the resolvent.  The companion state
  /// carries D = d/dx + i mu derivatives, so plain-x derivatives are
  /// recovered through the binomial relation d^j/dx^j = (D - i mu)^j across
  /// the first j+1 state rows.
  Complex derivative_kernel(int j, double x, double y) const {
    if (j < 0 || j >= n_)
      throw UserError("derivative order must lie in [0, n-1]");
    check_range(x, y);
    const bool lower = y <= x;
    const Mat rows = lower ? rows_lower(x) : rows_upper(x);
    std::array<Complex, Mat::kMaxDim> col{};
    int len = 0;
    column_at(y, lower, false, col, len);
    if (j == 0 || mu_ == 0.0) return contract(rows, j, col, len);
    Complex acc(0.0);
    Complex shift_pow(1.0); // (-i mu)^(j-i)
    for (int i = j; i >= 0; --i) {
      acc += static_cast<double>(binom(j, i)) * shift_pow * contract(rows, i, col, len);
      shift_pow *= Complex(0.0, -mu_);
    }
    return acc;
  }

  /// Weights W_j = (integral of |d^j kernel / b_n(y)|^2 over [0,L]^2)^(1/2)
  /// for j = 0..jmax, all from one sweep over the quadrature nodes.
  std::vector<double> weights(int jmax) const {
    if (jmax < 0 || jmax >= n_)
      throw UserError("derivative order must lie in [0, n-1]");
    std::vector<double> coarse = level_weights(coarse_, jmax);
    if (quad_.refine_rel_tol <= 0.0) return coarse;
    std::vector<double> fine = level_weights(fine_, jmax);
    for (int j = 0; j <= jmax; ++j) {
      const double a = coarse[static_cast<std::size_t>(j)];
      const double b = fine[static_cast<std::size_t>(j)];
      if (std::abs(a - b) > quad_.refine_rel_tol * std::abs(b) + 1e-14)
        throw QuadratureError("quadrature levels disagree for weight " +
                                  std::to_string(j),
                              a, b);
    }
    return fine;
  }

  double weight() const { return weights(0)[0]; }
  double weight_derivative(int j) const { return weights(j)[static_cast<std::size_t>(j)]; }

  EvansValue value() const {
    EvansValue v;
    v.lambda = lambda_;
    v.e = e_;
    v.w = weight();
    return v;
  }

private:
  std::shared_ptr<const SystemMatrix> sys_;
  BoundarySpec boundary_;
  Complex lambda_;
  double tol_;
  QuadratureSpec quad_;
  int n_ = 0;
  double mu_ = 0.0;
  detail::DuffyLevel coarse_, fine_;
  std::shared_ptr<const FundamentalSolution> fund_;
  Mat n_left_, n_right_;
  Mat p_;
  Complex e_;
  Complex rho_{1.0};
  Mat lower_core_; // separated: rho adj(B_L M^-1 N_R), k x k
  Mat upper_core_; // separated: adj(B_R M N_L), (n-k) x (n-k)
  std::vector<Mat> zl_, yr_, zr_; // per-node bundles (separated only)

  static long binom(int n, int k) {
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  /// det of the boundary rows stacked on the conjugated nullspace basis; a
  /// unit-scale orientation factor.
  static Complex basis_orientation(const Mat& rows, const Mat& nullbasis) {
    const int n = rows.cols();
    Mat stack(n, n);
    for (int r = 0; r < rows.rows(); ++r)
      for (int c = 0; c < n; ++c) stack(r, c) = rows(r, c);
    for (int r = 0; r < nullbasis.cols(); ++r)
      for (int c = 0; c < n; ++c)
        stack(rows.rows() + r, c) = std::conj(nullbasis(c, r));
    return determinant(stack);
  }

  void check_range(double x, double y) const {
    if (x < 0.0 || x > sys_->length || y < 0.0 || y > sys_->length)
      throw UserError("kernel arguments must lie in [0, L]");
  }

  GridSpec union_grid() const {
    std::vector<double> pts{0.0, sys_->length};
    auto add_level = [&pts](const detail::DuffyLevel& lvl) {
      pts.insert(pts.end(), lvl.axis.begin(), lvl.axis.end());
      pts.insert(pts.end(), lvl.inner.begin(), lvl.inner.end());
    };
    add_level(coarse_);
    if (quad_.refine_rel_tol > 0.0) add_level(fine_);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    GridSpec g;
    g.nodes = std::move(pts);
    return g;
  }

  bool separated() const { return boundary_.kind == BoundaryKind::Separated; }

  /// x-side factor of the lower branch: Y_R(x) for separated, U(x) periodic.
  Mat rows_lower(double x) const {
    const std::size_t j = fund_->lower_node(x);
    const bool exact = fund_->nodes()[j] == x;
    if (!separated()) return exact ? fund_->u_at_node(j) : fund_->u(x);
    if (exact) return yr_[j];
    const Mat step =
        propagate(*sys_, lambda_, fund_->nodes()[j], x, Mat::identity(n_), tol_);
    return step * yr_[j];
  }

  /// x-side factor of the upper branch: U(x) N_L for separated, U(x) periodic.
  Mat rows_upper(double x) const {
    const std::size_t j = fund_->lower_node(x);
    const bool exact = fund_->nodes()[j] == x;
    if (!separated()) return exact ? fund_->u_at_node(j) : fund_->u(x);
    return (exact ? fund_->u_at_node(j) : fund_->u(x)) * n_left_;
  }

  /// y-side bundle rows: Z_L(y) for the lower branch, Z_R(y) upper.
  Mat bundle_rows(double y, bool lower) const {
    const std::size_t j = fund_->lower_node(y);
    const std::vector<Mat>& z = lower ? zl_ : zr_;
    if (fund_->nodes()[j] == y) return z[j];
    if (lower) {
      // Z_L(y) = Z_L(node) Phi(node->y)^-1
      const Mat step =
          propagate(*sys_, lambda_, fund_->nodes()[j], y, Mat::identity(n_), tol_);
      return z[j] * inverse(step);
    }
    // Z_R(y) = Z_R(node above) Phi(y->node above)
    const std::size_t ja = j + 1;
    const Mat step =
        propagate(*sys_, lambda_, y, fund_->nodes()[ja], Mat::identity(n_), tol_);
    return z[ja] * step;
  }

  /// Matrix kernel columns against e_n, optionally divided by b_n(y).
  /// Fills `col` with `len` entries to be contracted against the x rows.
  void column_at(double y, bool lower, bool divide_bn,
                 std::array<Complex, Mat::kMaxDim>& col, int& len) const {
    Complex bn(1.0);
    if (divide_bn && sys_->leading_coeff) bn = sys_->leading_coeff(y);
    if (separated()) {
      const Mat z = bundle_rows(y, lower);
      const Mat& core = lower ? lower_core_ : upper_core_;
      len = core.rows();
      for (int i = 0; i < len; ++i) {
        Complex acc(0.0);
        for (int k = 0; k < len; ++k) acc += core(i, k) * z(k, n_ - 1);
        col[static_cast<std::size_t>(i)] = (lower ? acc : -acc) / bn;
      }
      return;
    }
    const std::size_t j = fund_->lower_node(y);
    const Mat uinv = fund_->nodes()[j] == y ? fund_->uinv_at_node(j) : fund_->uinv(y);
    len = n_;
    for (int i = 0; i < n_; ++i) {
      Complex acc(0.0);
      for (int k = 0; k < n_; ++k) {
        const Complex v = uinv(k, n_ - 1);
        acc += ((lower && i == k) ? e_ : Complex(0.0)) * v - p_(i, k) * v;
      }
      col[static_cast<std::size_t>(i)] = acc / bn;
    }
  }

  static Complex contract(const Mat& rows, int r,
                          const std::array<Complex, Mat::kMaxDim>& col, int len) {
    Complex acc(0.0);
    for (int k = 0; k < len; ++k) acc += rows(r, k) * col[static_cast<std::size_t>(k)];
    return acc;
  }

  /// All derivative-kernel values 0..jmax at one (rows, col) pair.
  void kernel_stack(const Mat& rows, const std::array<Complex, Mat::kMaxDim>& col,
                    int len, int jmax, std::vector<Complex>& out) const {
    std::array<Complex, Mat::kMaxDim> base;
    for (int r = 0; r <= jmax; ++r) base[static_cast<std::size_t>(r)] = contract(rows, r, col, len);
    for (int j = 0; j <= jmax; ++j) {
      if (j == 0 || mu_ == 0.0) {
        out[static_cast<std::size_t>(j)] = base[static_cast<std::size_t>(j)];
        continue;
      }
      Complex acc(0.0);
      Complex shift_pow(1.0);
      for (int i = j; i >= 0; --i) {
        acc += static_cast<double>(binom(j, i)) * shift_pow * base[static_cast<std::size_t>(i)];
        shift_pow *= Complex(0.0, -mu_);
      }
      out[static_cast<std::size_t>(j)] = acc;
    }
  }

  std::vector<double> level_weights(const detail::DuffyLevel& lvl, int jmax) const {
    const int nq = static_cast<int>(lvl.outer.nodes.size());
    const double len_scale = sys_->length * sys_->length;
    std::vector<double> sums(static_cast<std::size_t>(jmax) + 1, 0.0);
    std::vector<Complex> vals(static_cast<std::size_t>(jmax) + 1);
    std::array<Complex, Mat::kMaxDim> col{};
    int clen = 0;

    // lower triangle: x on the axis, y inside (y < x)
    for (int i = 0; i < nq; ++i) {
      const double x = lvl.axis[static_cast<std::size_t>(i)];
      const Mat rows = rows_lower(x);
      const double jac = len_scale * lvl.outer.nodes[static_cast<std::size_t>(i)];
      for (int j = 0; j < nq; ++j) {
        const double y = lvl.inner[static_cast<std::size_t>(i) * nq + j];
        column_at(y, true, true, col, clen);
        kernel_stack(rows, col, clen, jmax, vals);
        const double w = lvl.outer.weights[static_cast<std::size_t>(i)] *
                         lvl.outer.weights[static_cast<std::size_t>(j)] * jac;
        for (int d = 0; d <= jmax; ++d)
          sums[static_cast<std::size_t>(d)] += w * std::norm(vals[static_cast<std::size_t>(d)]);
      }
    }
    // upper triangle: y on the axis, x inside (x < y)
    for (int i = 0; i < nq; ++i) {
      const double y = lvl.axis[static_cast<std::size_t>(i)];
      column_at(y, false, true, col, clen);
      const double jac = len_scale * lvl.outer.nodes[static_cast<std::size_t>(i)];
      for (int j = 0; j < nq; ++j) {
        const double x = lvl.inner[static_cast<std::size_t>(i) * nq + j];
        const Mat rows = rows_upper(x);
        kernel_stack(rows, col, clen, jmax, vals);
        const double w = lvl.outer.weights[static_cast<std::size_t>(i)] *
                         lvl.outer.weights[static_cast<std::size_t>(j)] * jac;
        for (int d = 0; d <= jmax; ++d)
          sums[static_cast<std::size_t>(d)] += w * std::norm(vals[static_cast<std::size_t>(d)]);
      }
    }
    for (double& s : sums) s = std::sqrt(s);
    return sums;
  }
};

} // namespace wef
