#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/errors.hpp"
#include "wef/evans.hpp"
#include "wef/greens.hpp"
#include "wef/problem.hpp"

namespace wef {

/// Open disk about `center` certified to contain no spectrum.
struct ExclusionDisk {
  Complex center;
  double radius = 0.0;
};

/// Weighted Evans value at lambda: E, W, and the certified lower bound
/// |E|/W on the distance from lambda to the spectrum.
inline EvansValue bound(const ProblemSpec& problem, Complex lambda, double tol,
                        const QuadratureSpec& quad) {
  return KernelAssembly(problem, lambda, tol, quad).value();
}

inline ExclusionDisk exclusion_disk(const ProblemSpec& problem, Complex lambda,
                                    double tol, const QuadratureSpec& quad) {
  const EvansValue v = bound(problem, lambda, tol, quad);
  return {lambda, v.bound()};
}

struct SweepPoint {
  double lambda = 0.0;
  Complex e;
  double w = 0.0;
  double bound = 0.0;
};

enum class SweepTermination { Converged, MaxIter, BoundStall };

inline const char* to_string(SweepTermination t) {
  switch (t) {
  case SweepTermination::Converged: return "converged";
  case SweepTermination::MaxIter: return "max-iter";
  case SweepTermination::BoundStall: return "bound-stall";
  }
  return "?";
}

/// Monotone quasi-Newton iteration lambda_{i+1} = lambda_i +- bound(lambda_i).
/// Every consecutive gap equals the previous iterate's certified bound, so
/// the whole swept interval is eigenvalue free.
struct SweepTrace {
  int direction = +1;
  std::vector<SweepPoint> iterates;
  SweepTermination termination = SweepTermination::Converged;

  double limit() const { return iterates.back().lambda; }
};

inline SweepTrace qnewton_sweep(const ProblemSpec& problem, double lambda0,
                                int direction, double tol,
                                const QuadratureSpec& quad,
                                double stop_tol = 1e-10, int max_iter = 100) {
  if (direction != +1 && direction != -1)
    throw UserError("sweep direction must be +1 or -1");
  const bool track_sign = problem.is_real();

  SweepTrace trace;
  trace.direction = direction;
  double lambda = lambda0;
  double sign0 = 0.0;

  for (int iter = 0; iter <= max_iter; ++iter) {
    const EvansValue v = bound(problem, Complex(lambda), tol, quad);
    SweepPoint pt;
    pt.lambda = lambda;
    pt.e = v.e;
    pt.w = v.w;
    pt.bound = v.bound();
    trace.iterates.push_back(pt);

    if (track_sign && pt.bound >= stop_tol) {
      const double s = (v.e.real() > 0.0) ? 1.0 : ((v.e.real() < 0.0) ? -1.0 : 0.0);
      if (sign0 == 0.0) sign0 = s;
      else if (s != 0.0 && s != sign0)
        throw NumericalError(
            "Evans function changed sign along the sweep at lambda = " +
            std::to_string(lambda) + "; a double root was stepped over");
    }

    if (pt.bound < stop_tol) {
      trace.termination = SweepTermination::Converged;
      return trace;
    }
    if (iter == max_iter) break;
    const double next = lambda + direction * pt.bound;
    if (next == lambda) {
      trace.termination = SweepTermination::BoundStall;
      return trace;
    }
    lambda = next;
  }
  trace.termination = SweepTermination::MaxIter;
  return trace;
}

/// Central-difference slope of the weighted Evans function E/W at a real
/// point; near a simple eigenvalue of a 2nd-order separated problem its
/// magnitude is 1.  Higher-order problems get the reported value without
/// any guarantee.
inline double slope_at_eigenvalue(const ProblemSpec& problem, double lambda_star,
                                  double h, double tol, const QuadratureSpec& quad) {
  auto ratio = [&](double x) {
    const EvansValue v = bound(problem, Complex(x), tol, quad);
    return v.e.real() / v.w;
  };
  return (ratio(lambda_star + h) - ratio(lambda_star - h)) / (2.0 * h);
}

/// Coefficients of L[mu + dmu] - L[mu] expanded over plain-x derivatives:
///   sum_j coeff_j(dmu) d^j/dx^j,   coeff_j(dmu) = sum_k beta_{j,k}(x) dmu^k.
/// When every beta_{j,k} for a given j is x-independent the modulus
/// |coeff_j(dmu)| is evaluated exactly; otherwise each power is bounded by
/// its sampled sup over [0, L].
class PerturbationExpansion {
public:
  PerturbationExpansion(const ProblemSpec& problem, double mu)
      : n_(problem.order),
        poly_(static_cast<std::size_t>(n_),
              std::vector<Complex>(static_cast<std::size_t>(n_) + 1, Complex(0.0))),
        sup_(static_cast<std::size_t>(n_),
             std::vector<double>(static_cast<std::size_t>(n_) + 1, 0.0)),
        x_dependent_(static_cast<std::size_t>(n_), false) {
    struct FuncPart {
      Complex scale;
      const Expr* coeff;
      bool derivative;
    };
    std::vector<std::vector<std::vector<FuncPart>>> parts(
        static_cast<std::size_t>(n_),
        std::vector<std::vector<FuncPart>>(static_cast<std::size_t>(n_) + 1));

    const Complex imu(0.0, mu);
    auto add = [&](int j, int k, Complex scale, const OperatorTerm& t, bool deriv) {
      if (scale == Complex(0.0)) return;
      if (t.coefficient.is_constant()) {
        const Complex c = deriv ? Complex(0.0) : t.coefficient.eval(Complex(0.0));
        poly_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] += scale * c;
      } else {
        parts[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].push_back(
            {scale, &t.coefficient, deriv});
      }
    };

    // [c D^s] -> sum_r C(s,r) (i mu)^(s-r) c(x) dx^r, with an extra flag for
    // terms built from c'.
    auto expand_primitive = [&](int s, Complex scale, const OperatorTerm& t,
                                bool deriv, int k) {
      Complex shift(1.0);
      for (int r = s; r >= 0; --r) {
        add(r, k, scale * static_cast<double>(binom(s, r)) * shift, t, deriv);
        shift *= imu;
      }
    };

    for (const OperatorTerm& t : problem.terms) {
      const int p = t.order;
      if (!t.inside) {
        // c (D + i dmu)^p - c D^p
        Complex ik(1.0);
        for (int k = 1; k <= p; ++k) {
          ik *= Complex(0.0, 1.0); // i^k carried into the scale, leaving real dmu^k
          const int q = p - k;
          expand_primitive(q, static_cast<double>(binom(p, q)) * ik, t, false, k);
        }
      } else {
        const int b = p - 1;
        // (D + i dmu)(c (D + i dmu)^b) - D(c D^b)
        //   = sum_{q<b} C(b,q) (i dmu)^(b-q) [c' D^q + c D^(q+1)]
        //   + sum_{q<=b} C(b,q) (i dmu)^(b-q+1) [c D^q]
        Complex ik(1.0);
        for (int k = 1; k <= b; ++k) {
          ik *= Complex(0.0, 1.0);
          const int q = b - k;
          const Complex s = static_cast<double>(binom(b, q)) * ik;
          expand_primitive(q, s, t, true, k);
          expand_primitive(q + 1, s, t, false, k);
        }
        Complex ik2(1.0);
        for (int k = 1; k <= b + 1; ++k) {
          ik2 *= Complex(0.0, 1.0);
          const int q = b - (k - 1);
          expand_primitive(q, static_cast<double>(binom(b, q)) * ik2, t, false, k);
        }
      }
    }

    // sample sups for the x-dependent slots
    constexpr int kSamples = 2048;
    for (int j = 0; j < n_; ++j) {
      bool dep = false;
      for (int k = 1; k <= n_; ++k)
        if (!parts[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].empty())
          dep = true;
      x_dependent_[static_cast<std::size_t>(j)] = dep;
      if (!dep) continue;
      for (int k = 1; k <= n_; ++k) {
        const auto& plist = parts[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        const Complex base = poly_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        double sup = 0.0;
        for (int s = 0; s <= kSamples; ++s) {
          const double x = problem.length * s / kSamples;
          Complex val = base;
          for (const FuncPart& fp : plist) {
            const Dual d = fp.coeff->eval_dual(x);
            val += fp.scale * (fp.derivative ? d.d : d.v);
          }
          sup = std::max(sup, std::abs(val));
        }
        sup_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = sup;
      }
    }
  }

  int order() const { return n_; }
  bool exact(int j) const { return !x_dependent_[static_cast<std::size_t>(j)]; }

  /// Exact polynomial coefficient of dmu^k at derivative order j; only
  /// meaningful when exact(j).
  Complex poly_coefficient(int j, int k) const {
    return poly_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
  }

  /// |coeff_j(dmu)|, or its sampled-sup upper bound.
  double coeff_abs(int j, double dmu) const {
    if (!x_dependent_[static_cast<std::size_t>(j)]) {
      Complex acc(0.0);
      double p = 1.0;
      for (int k = 1; k <= n_; ++k) {
        p *= dmu;
        acc += poly_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] * p;
      }
      return std::abs(acc);
    }
    double acc = 0.0;
    double p = 1.0;
    for (int k = 1; k <= n_; ++k) {
      p *= std::abs(dmu);
      acc += sup_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] * p;
    }
    return acc;
  }

private:
  static long binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  int n_;
  std::vector<std::vector<Complex>> poly_;
  std::vector<std::vector<double>> sup_;
  std::vector<bool> x_dependent_;
};

/// Certified eigenvalue-free region in (dmu, dlambda) about one Floquet base
/// point: every sampled dmu carries the maximal |dlambda| satisfying
///   sum_j |coeff_j(dmu)| W_j/|E| + |dlambda| W_0/|E| < 1.
struct ExtensionRegion {
  double mu_base = 0.0;
  Complex lambda;
  std::vector<double> norm_bounds; // W_j / |E|
  std::vector<std::pair<double, double>> boundary; // (dmu, extent), dmu ascending

  /// Piecewise-linear extent read off the sampled boundary.
  double extent(double dmu) const {
    if (boundary.empty() || dmu < boundary.front().first ||
        dmu > boundary.back().first)
      return 0.0;
    auto it = std::lower_bound(
        boundary.begin(), boundary.end(), dmu,
        [](const std::pair<double, double>& s, double v) { return s.first < v; });
    if (it->first == dmu) return it->second;
    const auto hi = it;
    const auto lo = it - 1;
    const double t = (dmu - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }

  double max_extent() const {
    double m = 0.0;
    for (const auto& s : boundary) m = std::max(m, s.second);
    return m;
  }

  /// Largest offset on each side still reaching height h, by linear
  /// interpolation on the sampled boundary.  Returns {left, right} >= 0, or
  /// {-1, -1} when the diamond does not reach h at all.
  std::pair<double, double> coverage_at(double h) const {
    const double mid = extent(0.0);
    if (mid < h) return {-1.0, -1.0};

    auto walk = [&](int dir) {
      double good_pos = 0.0, good_ext = mid;
      if (dir > 0) {
        for (const auto& s : boundary) {
          if (s.first <= 0.0) continue;
          if (s.second >= h) {
            good_pos = s.first;
            good_ext = s.second;
            continue;
          }
          if (good_ext > s.second)
            good_pos += (good_ext - h) / (good_ext - s.second) * (s.first - good_pos);
          break;
        }
      } else {
        for (std::size_t i = boundary.size(); i-- > 0;) {
          const auto& s = boundary[i];
          if (s.first >= 0.0) continue;
          if (s.second >= h) {
            good_pos = s.first;
            good_ext = s.second;
            continue;
          }
          if (good_ext > s.second)
            good_pos += (good_ext - h) / (good_ext - s.second) * (s.first - good_pos);
          break;
        }
      }
      return std::abs(good_pos);
    };
    return {walk(-1), walk(+1)};
  }
};

/// One extension diamond at the problem's Floquet base point.  When
/// dmu_grid is empty the support of the diamond is bracketed and sampled at
/// 64 points per side.
inline ExtensionRegion extension_region(const ProblemSpec& problem, Complex lambda,
                                        double tol, const QuadratureSpec& quad,
                                        std::vector<double> dmu_grid = {}) {
  if (problem.boundary.kind != BoundaryKind::FloquetPeriodic)
    throw UserError("extension regions need Floquet-periodic boundary conditions");
  const double mu = problem.boundary.mu;
  const int n = problem.order;

  const KernelAssembly assembly(problem, lambda, tol, quad);
  const double abs_e = std::abs(assembly.evans());
  if (abs_e == 0.0)
    throw NumericalError("extension region requested at an eigenvalue");
  const std::vector<double> w = assembly.weights(n - 1);

  ExtensionRegion region;
  region.mu_base = mu;
  region.lambda = lambda;
  region.norm_bounds.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    region.norm_bounds[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] / abs_e;

  const PerturbationExpansion expansion(problem, mu);
  const double w0 = region.norm_bounds[0];
  auto g = [&](double dmu) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      acc += expansion.coeff_abs(j, dmu) * region.norm_bounds[static_cast<std::size_t>(j)];
    return acc;
  };
  auto extent = [&](double dmu) {
    const double slack = 1.0 - g(dmu);
    return slack > 0.0 ? slack / w0 : 0.0;
  };

  if (dmu_grid.empty()) {
    // bracket the first root of g = 1 on each side, then bisect
    auto side_root = [&](double dir) {
      double hi = 1e-3;
      while (g(dir * hi) >= 1.0 && hi > 1e-12) hi *= 0.5; // ultra-narrow diamonds
      while (g(dir * hi) < 1.0 && hi < 1e6) hi *= 2.0;
      if (hi >= 1e6) return dir * hi; // effectively unbounded side
      double lo = hi / 2.0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(dir * mid) < 1.0 ? lo : hi) = mid;
      }
      return dir * lo;
    };
    const double right = side_root(+1.0);
    const double left = side_root(-1.0);
    constexpr int kPerSide = 64;
    for (int s = kPerSide; s >= 1; --s)
      dmu_grid.push_back(left * s / kPerSide);
    dmu_grid.push_back(0.0);
    for (int s = 1; s <= kPerSide; ++s)
      dmu_grid.push_back(right * s / kPerSide);
  } else {
    std::sort(dmu_grid.begin(), dmu_grid.end());
  }

  region.boundary.reserve(dmu_grid.size());
  for (double dmu : dmu_grid) region.boundary.emplace_back(dmu, extent(dmu));
  return region;
}

struct CertifiedRectangle {
  double height = 0.0;   // certified |dlambda| for every mu
  double mu_width = 0.0; // full fundamental domain width
};

/// Largest full-width rectangle inscribed in the union of the diamonds over
/// the periodic mu fundamental domain [0, width).  Bisection on the height;
/// coverage is tested modulo the domain width.
inline CertifiedRectangle rectangle_from_diamonds(const std::vector<ExtensionRegion>& regions,
                                                  double domain_width) {
  if (regions.empty()) throw UserError("no extension regions given");
  if (!(domain_width > 0.0)) throw UserError("domain width must be positive");

  auto covers = [&](double h, double* gap_lo, double* gap_hi) {
    struct Interval {
      double lo, hi;
    };
    std::vector<Interval> intervals;
    for (const ExtensionRegion& r : regions) {
      const auto [left, right] = r.coverage_at(h);
      if (left < 0.0) continue;
      if (left + right >= domain_width) return true;
      double lo = std::fmod(r.mu_base - left, domain_width);
      if (lo < 0.0) lo += domain_width;
      intervals.push_back({lo, lo + left + right});
    }
    if (intervals.empty()) {
      if (gap_lo) *gap_lo = 0.0;
      if (gap_hi) *gap_hi = domain_width;
      return false;
    }
    // unroll one period so wrap-around intervals count near 0
    const std::size_t base_count = intervals.size();
    for (std::size_t i = 0; i < base_count; ++i)
      intervals.push_back({intervals[i].lo - domain_width, intervals[i].hi - domain_width});
    std::sort(intervals.begin(), intervals.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    double pos = 0.0;
    for (const Interval& iv : intervals) {
      if (iv.lo > pos) break;
      pos = std::max(pos, iv.hi);
      if (pos >= domain_width) return true;
    }
    if (gap_lo) *gap_lo = pos;
    double next = domain_width;
    for (const Interval& iv : intervals)
      if (iv.lo > pos) {
        next = std::min(next, iv.lo);
        break;
      }
    if (gap_hi) *gap_hi = next;
    return false;
  };

  double gap_lo = 0.0, gap_hi = 0.0;
  if (!covers(0.0, &gap_lo, &gap_hi))
    throw UserError("diamonds leave a coverage gap in mu: [" + std::to_string(gap_lo) +
                    ", " + std::to_string(gap_hi) + ")");

  double lo = 0.0;
  double hi = 0.0;
  for (const ExtensionRegion& r : regions) hi = std::max(hi, r.max_extent());
  for (int it = 0; it < 100 && hi - lo > 1e-14 * std::max(hi, 1.0); ++it) {
    const double mid = 0.5 * (lo + hi);
    (covers(mid, nullptr, nullptr) ? lo : hi) = mid;
  }
  return {lo, domain_width};
}

} // namespace wef
