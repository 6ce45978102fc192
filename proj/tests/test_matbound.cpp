#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "reference_problems.hpp"
#include "wef/matbound.hpp"

using wef::Complex;
using wef::Mat;

namespace {

Mat random_matrix(int n, std::mt19937& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(dist(rng), dist(rng));
  return m;
}

} // namespace

TEST_CASE("hs_norm basics") {
  CHECK(wef::hs_norm(Mat::identity(3)) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(wef::hs_norm(Mat(4, 4)) == 0.0);
  Mat a(2, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  a(1, 0) = 3.0;
  a(1, 1) = 4.0;
  CHECK(wef::hs_norm(a) == doctest::Approx(std::sqrt(30.0)).epsilon(1e-15));
}

TEST_CASE("equality holds at the identity") {
  for (int d = 2; d <= 8; ++d) {
    const auto r = wef::hs_inverse_bound(Mat::identity(d));
    CHECK(std::abs(r.bound - std::sqrt(static_cast<double>(d))) < 1e-13);
    CHECK(std::abs(r.bound - r.true_inverse_norm) < 1e-13);
  }
}

TEST_CASE("2x2 with unit determinant: bound = norm = inverse norm") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Mat a = random_matrix(2, rng);
    const Complex det = wef::determinant(a);
    a = a * (1.0 / std::sqrt(det)); // rescale to det 1
    const auto r = wef::hs_inverse_bound(a);
    CHECK(r.bound == doctest::Approx(r.norm).epsilon(1e-12));
    CHECK(r.bound == doctest::Approx(r.true_inverse_norm).epsilon(1e-12));
  }
}

TEST_CASE("inverse bound dominates the direct inverse norm") {
  std::mt19937 rng(11);
  SUBCASE("a close look at 5x5") {
    for (int trial = 0; trial < 200; ++trial) {
      const Mat a = random_matrix(5, rng);
      const auto r = wef::hs_inverse_bound(a);
      CHECK(r.has_true);
      CHECK(r.bound >= r.true_inverse_norm * (1.0 - 1e-12));
    }
  }
  SUBCASE("sweep over dimensions") {
    for (int trial = 0; trial < 1000; ++trial) {
      const int d = 2 + trial % 5;
      const auto r = wef::hs_inverse_bound(random_matrix(d, rng));
      CHECK(r.bound >= r.true_inverse_norm * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("bound is scale covariant") {
  std::mt19937 rng(17);
  const Mat a = random_matrix(4, rng);
  const auto base = wef::hs_inverse_bound(a);
  for (Complex c : {Complex(2.0), Complex(0.1), Complex(0.0, 3.0), Complex(-1.5, 0.7)}) {
    const auto scaled = wef::hs_inverse_bound(a * c);
    CHECK(scaled.bound == doctest::Approx(base.bound / std::abs(c)).epsilon(1e-11));
    CHECK(scaled.true_inverse_norm ==
          doctest::Approx(base.true_inverse_norm / std::abs(c)).epsilon(1e-11));
  }
}

TEST_CASE("singular matrices are rejected") {
  Mat z(3, 3);
  z(0, 0) = 1.0;
  CHECK_THROWS_AS(wef::hs_inverse_bound(z), wef::DomainError);
}

TEST_CASE("AM-HM engine of the proof") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> dist(1e-3, 1e3);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 2 + trial % 6;
    double sum = 0.0, sum_inv = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = dist(rng);
      sum += s;
      sum_inv += 1.0 / s;
    }
    CHECK((sum / n) * (sum_inv / n) >= 1.0 - 1e-12);
  }
}

TEST_CASE("jacobi singular values agree with direct computations") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 5;
    const Mat a = random_matrix(d, rng);
    const auto sv2 = wef::singular_values_squared(a);
    double sum = 0.0, sum_inv = 0.0;
    for (double s : sv2) {
      CHECK(s > 0.0);
      sum += s;
      sum_inv += 1.0 / s;
    }
    const double norm = wef::hs_norm(a);
    CHECK(sum == doctest::Approx(norm * norm).epsilon(1e-10));
    const double inv_norm = wef::hs_norm(wef::inverse(a));
    CHECK(sum_inv == doctest::Approx(inv_norm * inv_norm).epsilon(1e-8));
  }
}

TEST_CASE("system resolvent bound dominates the scalar weight bound") {
  const auto p = refprob::mathieu();
  wef::QuadratureSpec quad;
  quad.nodes = 24;
  quad.refine_rel_tol = 0.0;
  const wef::KernelAssembly assembly(p, Complex(3.0), 1e-10, quad);
  const auto sys_bound = wef::system_resolvent_bound(
      assembly.fundamental(), assembly.projection(), assembly.evans(), quad);
  CHECK_FALSE(sys_bound.unbounded);
  const double scalar = assembly.weight() / std::abs(assembly.evans());
  CHECK(sys_bound.value >= scalar);
}

TEST_CASE("system bound flags the lost inverse at E = 0") {
  wef::SystemMatrix raw;
  raw.n = 2;
  raw.length = 1.0;
  raw.fill = [](double, Complex, Mat& a) { a = Mat(2, 2); };
  auto sys = std::make_shared<const wef::SystemMatrix>(raw);
  wef::QuadratureSpec quad;
  quad.nodes = 8;
  quad.refine_rel_tol = 0.0;
  const wef::FundamentalSolution fund(sys, Complex(0.0),
                                      wef::quadrature_grid(1.0, quad), 1e-10);
  const Mat m = fund.monodromy();
  const Complex e = wef::evans_det_periodic(m);
  const Mat p = wef::adjugate(m - Mat::identity(2)) * m;
  const auto r = wef::system_resolvent_bound(fund, p, e, quad);
  CHECK(r.unbounded);
}
