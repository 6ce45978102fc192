#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/errors.hpp"
#include "wef/problem.hpp"

namespace wef {

/// First-order system u' = A(x, lambda) u on [0, L].  When built by
/// companion reduction the state is (u, Du, ..., D^(n-1)u) with
/// D = d/dx + i*mu.
struct SystemMatrix {
  int n = 0;
  double length = 0.0;
  double mu = 0.0;
  bool companion = false;
  std::function<void(double x, Complex lambda, Mat& out)> fill;
  std::function<Complex(double x)> leading_coeff; // b_n(x) of the scalar operator

  Mat operator()(double x, Complex lambda) const {
    Mat a(n, n);
    fill(x, lambda, a);
    return a;
  }
};

namespace detail {

/// Coefficients b_0..b_n of the operator written as sum_j b_j(x) D^j.
/// Inside-applied terms D(c * D^(j-1)) contribute c to b_j and c' to
/// b_(j-1); c' comes from dual-number evaluation.
inline void operator_coefficients(const ProblemSpec& p, double x,
                                  std::vector<Complex>& b) {
  b.assign(static_cast<std::size_t>(p.order) + 1, Complex(0.0));
  for (const OperatorTerm& t : p.terms) {
    if (t.inside) {
      const Dual c = t.coefficient.eval_dual(x);
      b[static_cast<std::size_t>(t.order)] += c.v;
      b[static_cast<std::size_t>(t.order) - 1] += c.d;
    } else {
      b[static_cast<std::size_t>(t.order)] += t.coefficient.eval(Complex(x));
    }
  }
}

} // namespace detail

/// Companion reduction of the eigenvalue equation L u = lambda u over the
/// state (u, Du, ..., D^(n-1)u):
///   d/dx w_k     = w_(k+1) - i mu w_k
///   d/dx w_n     = (lambda u - sum_j b_j w_(j+1)) / b_n - i mu w_n
inline SystemMatrix companion_system(const ProblemSpec& problem) {
  problem.validate();
  const int n = problem.order;
  const double mu = problem.mu();

  SystemMatrix sys;
  sys.n = n;
  sys.length = problem.length;
  sys.mu = mu;
  sys.companion = true;
  // ProblemSpec is copied into the closures so the system owns its data.
  sys.fill = [problem, n, mu](double x, Complex lambda, Mat& a) {
    static thread_local std::vector<Complex> b;
    detail::operator_coefficients(problem, x, b);
    const Complex bn = b[static_cast<std::size_t>(n)];
    if (std::abs(bn) < 1e-14)
      throw UserError("leading coefficient vanishes at x = " + std::to_string(x));
    a = Mat(n, n);
    for (int r = 0; r + 1 < n; ++r) a(r, r + 1) = 1.0;
    a(n - 1, 0) = (lambda - b[0]) / bn;
    for (int j = 1; j < n; ++j) a(n - 1, j) -= b[static_cast<std::size_t>(j)] / bn;
    if (mu != 0.0)
      for (int r = 0; r < n; ++r) a(r, r) -= Complex(0.0, mu);
  };
  sys.leading_coeff = [problem, n](double x) {
    static thread_local std::vector<Complex> b;
    detail::operator_coefficients(problem, x, b);
    return b[static_cast<std::size_t>(n)];
  };
  return sys;
}

/// Node set for dense output; must start at 0 and end at L, strictly
/// increasing.
struct GridSpec {
  std::vector<double> nodes;

  static GridSpec uniform(double length, int count) {
    GridSpec g;
    g.nodes.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
      g.nodes.push_back(length * static_cast<double>(i) / (count - 1));
    g.nodes.back() = length;
    return g;
  }

  static GridSpec endpoints(double length) {
    GridSpec g;
    g.nodes = {0.0, length};
    return g;
  }

  void validate(double length) const {
    if (nodes.size() < 2 || nodes.front() != 0.0 || nodes.back() != length)
      throw UserError("grid must run from 0 to L");
    for (std::size_t i = 1; i < nodes.size(); ++i)
      if (!(nodes[i] > nodes[i - 1]))
        throw UserError("grid nodes must be strictly increasing");
  }

  std::size_t hash() const {
    std::size_t h = 1469598103934665603ull;
    for (double v : nodes) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof v);
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ull;
    }
    return h;
  }
};

/// One rectangular matrix flow carried along the integration:
///   adjoint = false:  dY/dx = A(x) Y     (columns solve the system)
///   adjoint = true:   dZ/dx = -Z A(x)    (rows solve the adjoint relation,
///                                         e.g. Z = C U^-1 stays exact)
struct FlowSpec {
  Mat start;
  bool adjoint = false;
};

namespace detail {

struct OdeState {
  std::vector<Mat> blocks;
  Complex tau = 0.0; // running integral of trace A, for the Abel identity
};

/// Dormand-Prince 5(4) pair with FSAL on a bundle of matrix flows.
/// Integrates from x0 to x1 in an internal increasing variable; when
/// `backward` the system is evaluated at L - xi so callers can anchor flows
/// at the right endpoint.  Output lands exactly on every requested node
/// (steps are clipped, never interpolated).
class Dopri5 {
public:
  Dopri5(const SystemMatrix& sys, Complex lambda, double tol, bool backward,
         const std::vector<bool>& adjoint)
      : sys_(sys), lambda_(lambda), atol_(tol), rtol_(tol), backward_(backward),
        adjoint_(adjoint) {}

  template <class Sink>
  OdeState run(double x0, double x1, OdeState y, Sink&& on_node,
               const std::vector<double>& nodes) {
    std::size_t next_node = 0;
    while (next_node < nodes.size() && nodes[next_node] <= x0) ++next_node;

    if (x1 == x0) return y;
    double x = x0;
    double h_ctrl = std::min(x1 - x0, std::max((x1 - x0) * 1e-2, 1e-8));
    Stage k1 = eval(x, y);
    long steps = 0;

    while (x < x1) {
      const double target =
          (next_node < nodes.size()) ? std::min(nodes[next_node], x1) : x1;
      double h = h_ctrl;
      bool clamped = false;
      if (h >= target - x) {
        h = target - x;
        clamped = true;
      }

      OdeState y5;
      Stage k7;
      double err;
      for (;;) {
        if (++steps > 20000000)
          throw IntegrationError("step count exceeded", user_x(x));
        err = attempt(x, h, y, k1, y5, k7);
        if (err <= 1.0) break;
        clamped = false;
        h *= std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
        const double hmin =
            16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(x), 1.0);
        if (h < hmin) throw IntegrationError("step size underflow", user_x(x));
      }

      x = clamped ? target : x + h;
      y = y5;
      k1 = k7; // FSAL
      const double grow =
          std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-16), -0.2)));
      const double suggested = h * grow;
      h_ctrl = clamped ? std::max(h_ctrl, suggested) : suggested;

      if (next_node < nodes.size() && x == nodes[next_node]) {
        on_node(x, y);
        ++next_node;
      }
    }
    return y;
  }

  OdeState run_fixed(double x0, double x1, OdeState y, int nsteps) {
    const double h = (x1 - x0) / nsteps;
    Stage k1 = eval(x0, y);
    for (int i = 0; i < nsteps; ++i) {
      const double x = x0 + i * h;
      OdeState y5;
      Stage k7;
      attempt(x, h, y, k1, y5, k7);
      y = y5;
      k1 = k7;
    }
    return y;
  }

private:
  struct Stage {
    std::vector<Mat> d;
    Complex dtau;
  };

  const SystemMatrix& sys_;
  Complex lambda_;
  double atol_, rtol_;
  bool backward_;
  std::vector<bool> adjoint_;

  double user_x(double xi) const { return backward_ ? sys_.length - xi : xi; }

  Stage eval(double xi, const OdeState& y) {
    Mat a(sys_.n, sys_.n);
    sys_.fill(user_x(xi), lambda_, a);
    // backward runs integrate in xi = L - x, flipping the sign of d/dx
    const Complex sign = backward_ ? Complex(-1.0) : Complex(1.0);
    Stage s;
    s.d.reserve(y.blocks.size());
    for (std::size_t b = 0; b < y.blocks.size(); ++b) {
      if (adjoint_[b])
        s.d.push_back((-sign) * (y.blocks[b] * a));
      else
        s.d.push_back(sign * (a * y.blocks[b]));
    }
    s.dtau = 0.0;
    for (int i = 0; i < sys_.n; ++i) s.dtau += sign * a(i, i);
    return s;
  }

  static void axpy(OdeState& acc, double c, const Stage& k) {
    for (std::size_t b = 0; b < acc.blocks.size(); ++b) {
      Mat& m = acc.blocks[b];
      const Mat& d = k.d[b];
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) += c * d(i, j);
    }
    acc.tau += c * k.dtau;
  }

  /// One trial step of size h.  Returns the scaled error estimate; fills the
  /// 5th-order result and the FSAL stage.
  double attempt(double x, double h, const OdeState& y0, const Stage& k1,
                 OdeState& y5, Stage& k7) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // 4th-order weights for the error estimate
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    OdeState w = y0;
    axpy(w, h * a21, k1);
    const Stage k2 = eval(x + c2 * h, w);

    w = y0;
    axpy(w, h * a31, k1);
    axpy(w, h * a32, k2);
    const Stage k3 = eval(x + c3 * h, w);

    w = y0;
    axpy(w, h * a41, k1);
    axpy(w, h * a42, k2);
    axpy(w, h * a43, k3);
    const Stage k4 = eval(x + c4 * h, w);

    w = y0;
    axpy(w, h * a51, k1);
    axpy(w, h * a52, k2);
    axpy(w, h * a53, k3);
    axpy(w, h * a54, k4);
    const Stage k5 = eval(x + c5 * h, w);

    w = y0;
    axpy(w, h * a61, k1);
    axpy(w, h * a62, k2);
    axpy(w, h * a63, k3);
    axpy(w, h * a64, k4);
    axpy(w, h * a65, k5);
    const Stage k6 = eval(x + h, w);

    y5 = y0;
    axpy(y5, h * b1, k1);
    axpy(y5, h * b3, k3);
    axpy(y5, h * b4, k4);
    axpy(y5, h * b5, k5);
    axpy(y5, h * b6, k6);
    k7 = eval(x + h, y5);

    double err = 0.0;
    auto scaled = [&](Complex e, Complex v0, Complex v1) {
      const double sc = atol_ + rtol_ * std::max(std::abs(v0), std::abs(v1));
      return std::abs(e) / sc;
    };
    for (std::size_t b = 0; b < y0.blocks.size(); ++b) {
      const Mat& m0 = y0.blocks[b];
      const Mat& m1 = y5.blocks[b];
      for (int i = 0; i < m0.rows(); ++i)
        for (int j = 0; j < m0.cols(); ++j) {
          const Complex e =
              h * (e1 * k1.d[b](i, j) + e3 * k3.d[b](i, j) + e4 * k4.d[b](i, j) +
                   e5 * k5.d[b](i, j) + e6 * k6.d[b](i, j) + e7 * k7.d[b](i, j));
          err = std::max(err, scaled(e, m0(i, j), m1(i, j)));
        }
    }
    const Complex etau = h * (e1 * k1.dtau + e3 * k3.dtau + e4 * k4.dtau +
                              e5 * k5.dtau + e6 * k6.dtau + e7 * k7.dtau);
    err = std::max(err, scaled(etau, y0.tau, y5.tau));
    return err;
  }
};

} // namespace detail

/// Propagator over [from, to]: returns V with U(to) = V * U(from) when
/// seeded with the identity.
inline Mat propagate(const SystemMatrix& sys, Complex lambda, double from,
                     double to, const Mat& u0, double tol) {
  if (to < from) throw UserError("backward propagation is not supported");
  detail::Dopri5 rk(sys, lambda, tol, false, {false});
  detail::OdeState y;
  y.blocks.push_back(u0);
  const std::vector<double> none;
  return rk.run(from, to, y, [](double, const detail::OdeState&) {}, none)
      .blocks[0];
}

/// Fixed-step propagation with the same 5(4) tableau, no error control.
/// Exists for convergence-order verification.
inline Mat propagate_fixed_steps(const SystemMatrix& sys, Complex lambda,
                                 double from, double to, const Mat& u0,
                                 int nsteps) {
  detail::Dopri5 rk(sys, lambda, 1.0, false, {false});
  detail::OdeState y;
  y.blocks.push_back(u0);
  return rk.run_fixed(from, to, y, nsteps).blocks[0];
}

/// Integrate a bundle of rectangular linear flows over the whole grid in one
/// adaptive pass and record every node.  `forward` anchors the flows at
/// x = 0 and fills node values left to right; otherwise they are anchored at
/// x = L and filled right to left.  Result: one vector of per-node matrices
/// per flow, indexed like grid.nodes.
inline std::vector<std::vector<Mat>> integrate_flows(const SystemMatrix& sys,
                                                     Complex lambda,
                                                     const GridSpec& grid,
                                                     double tol,
                                                     const std::vector<FlowSpec>& flows,
                                                     bool forward) {
  grid.validate(sys.length);
  const std::size_t nnodes = grid.nodes.size();
  std::vector<std::vector<Mat>> out(flows.size(), std::vector<Mat>(nnodes));

  std::vector<bool> adjoint;
  detail::OdeState y;
  for (const FlowSpec& f : flows) {
    adjoint.push_back(f.adjoint);
    y.blocks.push_back(f.start);
  }

  std::vector<double> xi_nodes;
  xi_nodes.reserve(nnodes);
  if (forward) {
    xi_nodes.assign(grid.nodes.begin() + 1, grid.nodes.end());
  } else {
    for (std::size_t j = nnodes - 1; j-- > 0;)
      xi_nodes.push_back(sys.length - grid.nodes[j]);
  }

  const std::size_t anchor = forward ? 0 : nnodes - 1;
  for (std::size_t f = 0; f < flows.size(); ++f) out[f][anchor] = flows[f].start;

  std::size_t seen = 0;
  detail::Dopri5 rk(sys, lambda, tol, !forward, adjoint);
  rk.run(0.0, sys.length, y,
         [&](double, const detail::OdeState& s) {
           ++seen;
           const std::size_t idx = forward ? seen : nnodes - 1 - seen;
           for (std::size_t f = 0; f < flows.size(); ++f) out[f][idx] = s.blocks[f];
         },
         xi_nodes);
  if (seen + 1 != nnodes)
    throw IntegrationError("dense output missed a node", sys.length);
  return out;
}

/// Fundamental matrix solution sampled on a node grid, with per-node
/// inverses and the running trace integral.  Immutable once built.
class FundamentalSolution {
public:
  FundamentalSolution(std::shared_ptr<const SystemMatrix> sys, Complex lambda,
                      GridSpec grid, double tol)
      : sys_(std::move(sys)), lambda_(lambda), tol_(tol),
        nodes_(std::move(grid.nodes)) {
    GridSpec g;
    g.nodes = nodes_;
    g.validate(sys_->length);

    u_.reserve(nodes_.size());
    uinv_.reserve(nodes_.size());
    tau_.reserve(nodes_.size());

    detail::Dopri5 rk(*sys_, lambda_, tol_, false, {false});
    detail::OdeState y;
    y.blocks.push_back(Mat::identity(sys_->n));
    u_.push_back(y.blocks[0]);
    uinv_.push_back(y.blocks[0]);
    tau_.push_back(Complex(0.0));

    std::vector<double> interior(nodes_.begin() + 1, nodes_.end());
    rk.run(0.0, sys_->length, y,
           [this](double, const detail::OdeState& s) {
             u_.push_back(s.blocks[0]);
             uinv_.push_back(inverse(s.blocks[0]));
             tau_.push_back(s.tau);
           },
           interior);
    if (u_.size() != nodes_.size())
      throw IntegrationError("dense output missed a node", sys_->length);
  }

  Complex lambda() const { return lambda_; }
  double tol() const { return tol_; }
  int order() const { return sys_->n; }
  double length() const { return sys_->length; }
  const SystemMatrix& system() const { return *sys_; }
  std::shared_ptr<const SystemMatrix> system_ptr() const { return sys_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const Mat& u_at_node(std::size_t j) const { return u_[j]; }
  const Mat& uinv_at_node(std::size_t j) const { return uinv_[j]; }
  Complex trace_integral_at_node(std::size_t j) const { return tau_[j]; }

  const Mat& monodromy() const { return u_.back(); }

  /// det M from the Abel identity, exp of the trace integral; immune to the
  /// conditioning of the monodromy itself.
  Complex abel_determinant() const { return std::exp(tau_.back()); }

  /// Index of the nearest node at or below x.
  std::size_t lower_node(double x) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    if (it == nodes_.begin()) return 0;
    return static_cast<std::size_t>(it - nodes_.begin()) - 1;
  }

  /// U(x) anywhere in [0, L]: exact at nodes, otherwise re-propagated from
  /// the nearest lower node.
  Mat u(double x) const {
    if (x < 0.0 || x > sys_->length)
      throw UserError("evaluation point outside [0, L]");
    const std::size_t j = lower_node(x);
    if (nodes_[j] == x) return u_[j];
    const Mat step = propagate(*sys_, lambda_, nodes_[j], x,
                               Mat::identity(sys_->n), tol_);
    return step * u_[j];
  }

  Mat uinv(double x) const {
    if (x < 0.0 || x > sys_->length)
      throw UserError("evaluation point outside [0, L]");
    const std::size_t j = lower_node(x);
    if (nodes_[j] == x) return uinv_[j];
    return inverse(u(x));
  }

private:
  std::shared_ptr<const SystemMatrix> sys_;
  Complex lambda_;
  double tol_;
  std::vector<double> nodes_;
  std::vector<Mat> u_, uinv_;
  std::vector<Complex> tau_;
};

inline FundamentalSolution fundamental_grid(std::shared_ptr<const SystemMatrix> sys,
                                            Complex lambda, GridSpec grid,
                                            double tol) {
  if (!(tol > 0.0)) throw UserError("integrator tolerance must be positive");
  return FundamentalSolution(std::move(sys), lambda, std::move(grid), tol);
}

inline Mat monodromy(const SystemMatrix& sys, Complex lambda, double tol) {
  return propagate(sys, lambda, 0.0, sys.length, Mat::identity(sys.n), tol);
}

/// Thread-safe per-problem cache of fundamental solutions keyed by
/// (lambda, tol, grid).  Insert-or-get: concurrent builders may race, the
/// first insert wins and everyone sees one shared immutable object.
class FundamentalCache {
public:
  explicit FundamentalCache(std::size_t capacity = 64) : capacity_(capacity) {}

  template <class Builder>
  std::shared_ptr<const FundamentalSolution>
  insert_or_get(Complex lambda, double tol, const GridSpec& grid, Builder&& build) {
    const Key key{lambda.real(), lambda.imag(), tol, grid.hash()};
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = store_.find(key);
      if (it != store_.end()) return it->second;
    }
    std::shared_ptr<const FundamentalSolution> made = build();
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = store_.emplace(key, made);
    if (inserted && store_.size() > capacity_) {
      auto victim = store_.begin();
      if (victim->first == key) ++victim;
      store_.erase(victim);
    }
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return store_.size();
  }

private:
  struct Key {
    double re, im, tol;
    std::size_t grid;
    bool operator<(const Key& o) const {
      if (re != o.re) return re < o.re;
      if (im != o.im) return im < o.im;
      if (tol != o.tol) return tol < o.tol;
      return grid < o.grid;
    }
    bool operator==(const Key& o) const {
      return re == o.re && im == o.im && tol == o.tol && grid == o.grid;
    }
  };

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const FundamentalSolution>> store_;
};

} // namespace wef
