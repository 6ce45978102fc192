#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/errors.hpp"
#include "wef/evans.hpp"
#include "wef/odeint.hpp"
#include "wef/problem.hpp"

namespace wef {

/// Closed counter-clockwise contour in the spectral plane, parameterized by
/// arc length over t in [0, 1).
class Contour {
public:
  static Contour circle(Complex center, double radius) {
    Contour c;
    c.kind_ = Kind::Circle;
    c.center_ = center;
    c.radius_ = radius;
    return c;
  }

  static Contour rectangle(double re_lo, double re_hi, double im_lo, double im_hi) {
    if (!(re_hi > re_lo) || !(im_hi > im_lo))
      throw UserError("rectangle contour needs re_lo < re_hi and im_lo < im_hi");
    Contour c;
    c.kind_ = Kind::Polyline;
    c.points_ = {Complex(re_lo, im_lo), Complex(re_hi, im_lo), Complex(re_hi, im_hi),
                 Complex(re_lo, im_hi), Complex(re_lo, im_lo)};
    c.build_lengths();
    return c;
  }

  static Contour polyline(std::vector<Complex> pts) {
    if (pts.size() < 3) throw UserError("polyline contour needs at least 3 points");
    if (pts.front() != pts.back()) pts.push_back(pts.front());
    Contour c;
    c.kind_ = Kind::Polyline;
    c.points_ = std::move(pts);
    c.build_lengths();
    return c;
  }

  Complex point(double t) const {
    t -= std::floor(t);
    if (kind_ == Kind::Circle) {
      const double phi = 2.0 * M_PI * t;
      return center_ + radius_ * Complex(std::cos(phi), std::sin(phi));
    }
    const double target = t * lengths_.back();
    auto it = std::upper_bound(lengths_.begin(), lengths_.end(), target);
    std::size_t seg = static_cast<std::size_t>(it - lengths_.begin());
    if (seg >= points_.size() - 1) seg = points_.size() - 2;
    const double seg_start = seg == 0 ? 0.0 : lengths_[seg - 1];
    const double seg_len = lengths_[seg] - seg_start;
    const double frac = seg_len > 0.0 ? (target - seg_start) / seg_len : 0.0;
    return points_[seg] + frac * (points_[seg + 1] - points_[seg]);
  }

private:
  enum class Kind { Circle, Polyline };
  Kind kind_ = Kind::Circle;
  Complex center_;
  double radius_ = 1.0;
  std::vector<Complex> points_;
  std::vector<double> lengths_; // cumulative, lengths_[i] = length up to points_[i+1]

  void build_lengths() {
    lengths_.clear();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
      acc += std::abs(points_[i + 1] - points_[i]);
      lengths_.push_back(acc);
    }
  }
};

namespace detail {

inline void require_second_order_dirichlet(const ProblemSpec& p) {
  if (p.order != 2 || !p.separated())
    throw UserError("oracle needs a 2nd-order problem with separated boundary conditions");
  if (!p.is_real()) throw UserError("oracle needs real coefficients");
  auto is_dirichlet_row = [](const Mat& b) {
    return b.rows() == 1 && std::abs(std::abs(b(0, 0)) - 1.0) < 1e-12 &&
           std::abs(b(0, 1)) < 1e-12;
  };
  if (!is_dirichlet_row(p.boundary.left) || !is_dirichlet_row(p.boundary.right))
    throw UserError("oracle needs Dirichlet boundary rows");
}

} // namespace detail

/// Number of eigenvalues strictly below lambda, by counting the zeros of the
/// left shooting solution on (0, L).  Classical oscillation counting.
inline int sturm_count(const ProblemSpec& problem, double lambda,
                       double tol = 1e-10) {
  detail::require_second_order_dirichlet(problem);
  const EvansValue ev = evans(problem, Complex(lambda), tol);
  if (std::abs(ev.e) < 1e-12)
    throw NumericalError("lambda sits numerically on an eigenvalue; the count is ambiguous");

  const auto sys = std::make_shared<const SystemMatrix>(companion_system(problem));
  const int nsamples = 4096;
  const FundamentalSolution fund(sys, Complex(lambda),
                                 GridSpec::uniform(problem.length, nsamples + 1), tol);
  // u_L solves u(0) = 0, u'(0) = 1; its first component is U12.
  int count = 0;
  double prev = fund.u_at_node(1)(0, 1).real();
  for (int i = 2; i <= nsamples; ++i) {
    const double cur = fund.u_at_node(static_cast<std::size_t>(i))(0, 1).real();
    if (cur == 0.0) continue;
    if ((prev < 0.0) != (cur < 0.0)) ++count;
    prev = cur;
  }
  return count;
}

/// Lowest `count` eigenvalues of -u'' + q(x) u with Dirichlet conditions by
/// central differences and Sturm-sequence bisection on the tridiagonal
/// matrix, Richardson-extrapolated over grids N and 2N.  Entirely
/// independent of the shooting/quadrature machinery.
inline std::vector<double> fd_spectrum(const ProblemSpec& problem, int grid_n,
                                       int count) {
  detail::require_second_order_dirichlet(problem);
  if (grid_n < 64) throw UserError("finite-difference oracle needs N >= 64");

  // accept only -u'' + q(x) u
  std::vector<Complex> b;
  for (double x : {0.1 * problem.length, 0.5 * problem.length, 0.9 * problem.length}) {
    detail::operator_coefficients(problem, x, b);
    if (std::abs(b[2] + 1.0) > 1e-12 || std::abs(b[1]) > 1e-12)
      throw UserError("finite-difference oracle supports operators -u'' + q(x) u");
  }

  auto eigs_at = [&](int n) {
    const double h = problem.length / n;
    const double off = -1.0 / (h * h);
    std::vector<double> diag(static_cast<std::size_t>(n) - 1);
    for (int i = 1; i < n; ++i) {
      detail::operator_coefficients(problem, i * h, b);
      diag[static_cast<std::size_t>(i) - 1] = 2.0 / (h * h) + b[0].real();
    }
    double lo = diag[0], hi = diag[0];
    for (double d : diag) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    lo -= 2.0 * std::abs(off);
    hi += 2.0 * std::abs(off);

    auto count_below = [&](double t) {
      int neg = 0;
      double q = 1.0;
      for (std::size_t i = 0; i < diag.size(); ++i) {
        q = diag[i] - t - (i > 0 ? off * off / q : 0.0);
        if (q == 0.0) q = 1e-300;
        if (q < 0.0) ++neg;
      }
      return neg;
    };

    std::vector<double> out;
    for (int k = 1; k <= count; ++k) {
      double a = lo, c = hi;
      for (int it = 0; it < 200 && c - a > 1e-13 * std::max(1.0, std::abs(c)); ++it) {
        const double mid = 0.5 * (a + c);
        (count_below(mid) >= k ? c : a) = mid;
      }
      out.push_back(0.5 * (a + c));
    }
    return out;
  };

  const std::vector<double> coarse = eigs_at(grid_n);
  const std::vector<double> fine = eigs_at(2 * grid_n);
  std::vector<double> extrapolated(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    extrapolated[static_cast<std::size_t>(k)] =
        (4.0 * fine[static_cast<std::size_t>(k)] - coarse[static_cast<std::size_t>(k)]) / 3.0;
  return extrapolated;
}

/// Total multiplicity of Evans-function zeros inside the contour, from the
/// winding number of E along it.  Samples are refined until every phase
/// step is below pi/2, capped at 2^16 evaluations.
inline int winding_count(const ProblemSpec& problem, const Contour& contour,
                         int initial_samples = 64, double tol = 1e-10) {
  if (initial_samples < 8) initial_samples = 8;
  struct Sample {
    double t;
    Complex e;
  };
  auto eval = [&](double t) {
    return Sample{t, evans(problem, contour.point(t), tol).e};
  };

  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(initial_samples));
  for (int i = 0; i < initial_samples; ++i)
    samples.push_back(eval(static_cast<double>(i) / initial_samples));

  constexpr std::size_t kCap = 1 << 16;
  auto phase_step = [](const Sample& a, const Sample& b) {
    return std::arg(b.e / a.e); // principal branch, (-pi, pi]
  };

  for (;;) {
    double max_abs = 0.0;
    for (const Sample& s : samples) max_abs = std::max(max_abs, std::abs(s.e));
    const double floor = std::max(1e-13, 1e-10 * max_abs);
    for (const Sample& s : samples)
      if (std::abs(s.e) < floor)
        throw NumericalError(
            "Evans function nearly vanishes on the contour; perturb the contour");

    std::vector<double> insert_at;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Sample& a = samples[i];
      const Sample& b = samples[(i + 1) % samples.size()];
      const double tb = (i + 1 < samples.size()) ? b.t : b.t + 1.0;
      if (std::abs(phase_step(a, b)) >= M_PI / 2.0)
        insert_at.push_back(0.5 * (a.t + tb));
    }
    if (insert_at.empty()) break;
    if (samples.size() + insert_at.size() > kCap)
      throw NumericalError("winding refinement exceeded the sample cap");
    for (double t : insert_at) samples.push_back(eval(t - std::floor(t)));
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.t < b.t; });
  }

  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    total += phase_step(samples[i], samples[(i + 1) % samples.size()]);
  const double turns = total / (2.0 * M_PI);
  const int winding = static_cast<int>(std::lround(turns));
  if (std::abs(turns - winding) > 0.25)
    throw NumericalError("winding number failed to settle on an integer");
  return winding;
}

} // namespace wef
