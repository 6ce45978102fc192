#include <doctest.h>

#include <cmath>
#include <vector>

#include "reference_problems.hpp"
#include "wef/certify.hpp"
#include "wef/oracle.hpp"

using wef::Complex;
using wef::QuadratureSpec;

namespace {

QuadratureSpec quick(int nodes = 24) {
  QuadratureSpec q;
  q.nodes = nodes;
  q.refine_rel_tol = 0.0;
  return q;
}

double bisect_evans_zero(const wef::ProblemSpec& p, double lo, double hi) {
  auto f = [&](double x) { return wef::evans(p, Complex(x), 1e-11).e.real(); };
  double flo = f(lo);
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    if ((flo < 0) == (fmid < 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("certified bounds at representative points") {
  SUBCASE("mathieu at 3: the paper's 0.51 window") {
    const auto v = wef::bound(refprob::mathieu(), Complex(3.0), 1e-10, QuadratureSpec{});
    CHECK(v.bound() > 0.45);
    CHECK(v.bound() < 0.57);
  }
  SUBCASE("free Laplacian at 0: sqrt(90)/pi^2, below the true distance 1") {
    const auto v =
        wef::bound(refprob::free_laplacian(M_PI), Complex(0.0), 1e-11, QuadratureSpec{});
    const double expect = std::sqrt(90.0) / (M_PI * M_PI);
    CHECK(std::abs(v.bound() - expect) < 1e-6);
    CHECK(v.bound() <= 1.0);
  }
  SUBCASE("the bound collapses at an eigenvalue") {
    const auto p = refprob::mathieu();
    const double star = bisect_evans_zero(p, 2.2, 2.4);
    const auto v = wef::bound(p, Complex(star), 1e-11, quick());
    CHECK(v.bound() < 1e-8);
  }
  SUBCASE("exclusion disk carries the bound as its radius") {
    const auto d =
        wef::exclusion_disk(refprob::mathieu(), Complex(3.0), 1e-10, quick());
    CHECK(d.center == Complex(3.0));
    CHECK(d.radius > 0.4);
  }
}

TEST_CASE("quasi-Newton sweep on the free Laplacian") {
  const auto p = refprob::free_laplacian(M_PI);
  const auto trace = wef::qnewton_sweep(p, 0.5, +1, 1e-10, QuadratureSpec{});
  CHECK(trace.termination == wef::SweepTermination::Converged);
  CHECK(std::abs(trace.limit() - 1.0) < 1e-8);

  // monotone, with gaps equal to the previous bound
  for (std::size_t i = 1; i < trace.iterates.size(); ++i) {
    const auto& prev = trace.iterates[i - 1];
    const auto& cur = trace.iterates[i];
    CHECK(cur.lambda > prev.lambda);
    CHECK(std::abs((cur.lambda - prev.lambda) - prev.bound) <
          1e-14 * std::max(1.0, std::abs(cur.lambda)));
  }
}

TEST_CASE("quasi-Newton sweep brackets the mathieu eigenvalues from 3") {
  const auto p = refprob::mathieu();
  const double z_lo = bisect_evans_zero(p, 2.2, 2.4);
  const double z_hi = bisect_evans_zero(p, 3.9, 4.1);

  const auto up = wef::qnewton_sweep(p, 3.0, +1, 1e-10, QuadratureSpec{});
  const auto down = wef::qnewton_sweep(p, 3.0, -1, 1e-10, QuadratureSpec{});
  CHECK(up.termination == wef::SweepTermination::Converged);
  CHECK(down.termination == wef::SweepTermination::Converged);
  CHECK(up.limit() > 3.9);
  CHECK(up.limit() < 4.1);
  CHECK(down.limit() > 2.2);
  CHECK(down.limit() < 2.4);
  CHECK(std::abs(up.limit() - z_hi) < 1e-7);
  CHECK(std::abs(down.limit() - z_lo) < 1e-7);

  // iterates never cross the limiting eigenvalue
  for (const auto& pt : up.iterates) CHECK(pt.lambda <= z_hi + 1e-9);
  for (const auto& pt : down.iterates) CHECK(pt.lambda >= z_lo - 1e-9);
}

TEST_CASE("sweep from an eigenvalue returns a length-one converged trace") {
  const auto p = refprob::mathieu();
  const double star = bisect_evans_zero(p, 2.2, 2.4);
  const auto trace = wef::qnewton_sweep(p, star, +1, 1e-10, quick(), 1e-6);
  CHECK(trace.termination == wef::SweepTermination::Converged);
  CHECK(trace.iterates.size() == 1);
}

TEST_CASE("sweep input validation") {
  CHECK_THROWS_AS(
      wef::qnewton_sweep(refprob::mathieu(), 3.0, 0, 1e-10, quick()),
      wef::UserError);
}

TEST_CASE("weighted Evans slope is +-1 at simple second-order eigenvalues") {
  SUBCASE("free Laplacian at 1") {
    const double s =
        wef::slope_at_eigenvalue(refprob::free_laplacian(M_PI), 1.0, 1e-4, 1e-11,
                                 QuadratureSpec{});
    CHECK(std::abs(std::abs(s) - 1.0) < 1e-4);
  }
  SUBCASE("mathieu near 2.3") {
    const auto p = refprob::mathieu();
    const double star = bisect_evans_zero(p, 2.2, 2.4);
    const double s = wef::slope_at_eigenvalue(p, star, 1e-4, 1e-10, QuadratureSpec{});
    CHECK(std::abs(std::abs(s) - 1.0) < 1e-3);
  }
  SUBCASE("fourth order: reported but not asserted") {
    const auto p = refprob::fourth_order();
    const double star = bisect_evans_zero(p, 4.5, 5.5);
    const double s = wef::slope_at_eigenvalue(p, star, 1e-4, 1e-10, quick());
    CHECK(std::isfinite(s));
  }
}

TEST_CASE("perturbation expansion coefficients") {
  SUBCASE("floquet Schroedinger: 2 dmu on the gradient, dmu^2 + 2 mu dmu on the identity") {
    const double mu = 0.3;
    const wef::PerturbationExpansion exp(refprob::mathieu_floquet(mu), mu);
    REQUIRE(exp.order() == 2);
    CHECK(exp.exact(0));
    CHECK(exp.exact(1));
    CHECK(std::abs(exp.poly_coefficient(1, 1) - Complex(0.0, -2.0)) < 1e-14);
    CHECK(std::abs(exp.poly_coefficient(1, 2)) < 1e-14);
    CHECK(std::abs(exp.poly_coefficient(0, 1) - Complex(2.0 * mu)) < 1e-14);
    CHECK(std::abs(exp.poly_coefficient(0, 2) - Complex(1.0)) < 1e-14);
    const double dmu = 0.05;
    CHECK(exp.coeff_abs(1, dmu) == doctest::Approx(2.0 * dmu).epsilon(1e-13));
    CHECK(exp.coeff_abs(0, dmu) ==
          doctest::Approx(dmu * dmu + 2.0 * mu * dmu).epsilon(1e-13));
  }
  SUBCASE("mkdv: leading orders exact, identity order bounded by sampled sup") {
    const double mu = 0.1;
    const wef::PerturbationExpansion exp(refprob::mkdv(mu), mu);
    REQUIRE(exp.order() == 3);
    CHECK(exp.exact(2));
    CHECK(exp.exact(1));
    CHECK_FALSE(exp.exact(0));
    CHECK(std::abs(exp.poly_coefficient(2, 1) - Complex(0.0, -3.0)) < 1e-14);
    CHECK(std::abs(exp.poly_coefficient(1, 1) - Complex(6.0 * mu)) < 1e-14);
    CHECK(std::abs(exp.poly_coefficient(1, 2) - Complex(3.0)) < 1e-14);
    // identity slot: | -3 i (phi^2 - mu^2) | <= 3 max(1 - mu^2, mu^2) at dmu^1
    const double dmu = 1e-3;
    const double expected_linear = 3.0 * (1.0 - mu * mu) * dmu;
    CHECK(exp.coeff_abs(0, dmu) ==
          doctest::Approx(expected_linear).epsilon(1e-3));
  }
}

TEST_CASE("extension region at dmu = 0 reproduces the exclusion disk") {
  const double mu = 0.3;
  const auto p = refprob::mathieu_floquet(mu);
  const Complex lambda(-1.0);
  const auto region = wef::extension_region(p, lambda, 1e-10, quick());
  const auto disk = wef::exclusion_disk(p, lambda, 1e-10, quick());
  CHECK(region.extent(0.0) == doctest::Approx(disk.radius).epsilon(1e-12));
  CHECK(region.max_extent() >= region.extent(0.0) * (1.0 - 1e-12));
  CHECK(region.boundary.size() >= 64);
}

TEST_CASE("extension region requires floquet boundary conditions") {
  CHECK_THROWS_AS(
      wef::extension_region(refprob::mathieu(), Complex(3.0), 1e-10, quick()),
      wef::UserError);
}

TEST_CASE("a single wide diamond covering all mu pins the rectangle at its minimum extent") {
  SUBCASE("symmetric tent") {
    wef::ExtensionRegion region;
    region.mu_base = 0.5;
    region.boundary = {{-0.7, 0.0}, {0.0, 1.0}, {0.7, 0.0}};
    const auto rect = wef::rectangle_from_diamonds({region}, 1.0);
    // worst wrapped point sits 0.5 away: extent = 1 - 0.5/0.7 = 2/7
    CHECK(rect.height == doctest::Approx(2.0 / 7.0).epsilon(1e-10));

    double direct = 1e300;
    for (int i = 0; i <= 2000; ++i) {
      const double muq = i / 2000.0;
      double best = 0.0;
      for (double shift : {-1.0, 0.0, 1.0})
        best = std::max(best, region.extent(muq - region.mu_base + shift));
      direct = std::min(direct, best);
    }
    CHECK(rect.height == doctest::Approx(direct).epsilon(1e-9));
  }
  SUBCASE("asymmetric tent") {
    wef::ExtensionRegion region;
    region.mu_base = 0.3;
    region.boundary = {{-0.9, 0.0}, {0.0, 1.0}, {0.6, 0.0}};
    const auto rect = wef::rectangle_from_diamonds({region}, 1.0);
    // sides reach 0.9(1-h) and 0.6(1-h); coverage needs their sum >= 1
    CHECK(rect.height == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  }
}

TEST_CASE("diamonds touching at zero height give a degenerate rectangle") {
  wef::ExtensionRegion a, b;
  a.mu_base = 0.25;
  a.boundary = {{-0.25, 0.0}, {0.0, 1.0}, {0.25, 0.0}};
  b.mu_base = 0.75;
  b.boundary = {{-0.25, 0.0}, {0.0, 1.0}, {0.25, 0.0}};
  const auto rect = wef::rectangle_from_diamonds({a, b}, 1.0);
  CHECK(rect.height < 1e-12);
}

TEST_CASE("a coverage gap is reported with its interval") {
  wef::ExtensionRegion a;
  a.mu_base = 0.25;
  a.boundary = {{-0.1, 0.0}, {0.0, 1.0}, {0.1, 0.0}};
  CHECK_THROWS_AS(wef::rectangle_from_diamonds({a}, 1.0), wef::UserError);
}

TEST_CASE("mkdv diamond smoke") {
  const auto p = refprob::mkdv(0.1);
  const auto region = wef::extension_region(p, Complex(0.1, 0.5), 1e-10, quick());
  CHECK(region.extent(0.0) > 0.0);
  CHECK(region.boundary.front().second < 1e-9);
  CHECK(region.boundary.back().second < 1e-9);
  CHECK(region.boundary.front().first < 0.0);
  CHECK(region.boundary.back().first > 0.0);
}
