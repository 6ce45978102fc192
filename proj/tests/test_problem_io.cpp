#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "wef/elliptic.hpp"
#include "wef/evans.hpp"
#include "wef/problem_io.hpp"

using nlohmann::json;
using wef::Complex;

#ifndef WEF_PROBLEMS_DIR
#define WEF_PROBLEMS_DIR "problems"
#endif

namespace {

std::string shipped(const std::string& name) {
  return std::string(WEF_PROBLEMS_DIR) + "/" + name;
}

} // namespace

TEST_CASE("shipped mathieu problem") {
  const auto p = wef::load_problem(shipped("mathieu.json"));
  CHECK(p.order == 2);
  CHECK(p.length == doctest::Approx(2.0 * M_PI).epsilon(1e-15));
  CHECK(p.boundary.kind == wef::BoundaryKind::Separated);
  CHECK(p.boundary.preset == "dirichlet");
  REQUIRE(p.terms.size() == 2);
  CHECK(p.terms[1].coefficient.eval(Complex(0.0)) == Complex(1.0)); // cos(0)
  CHECK(p.boundary.left(0, 0) == Complex(1.0));
}

TEST_CASE("shipped fourth-order problem") {
  const auto p = wef::load_problem(shipped("fourth_order.json"));
  CHECK(p.order == 4);
  CHECK(p.boundary.preset == "u-and-uxx-zero");
  REQUIRE(p.terms.size() == 2);
  CHECK(p.terms[1].inside);
  // boundary rows select u and u''
  CHECK(p.boundary.left(0, 0) == Complex(1.0));
  CHECK(p.boundary.left(1, 2) == Complex(1.0));
}

TEST_CASE("shipped mkdv problem") {
  const auto p = wef::load_problem(shipped("mkdv.json"));
  CHECK(p.order == 3);
  CHECK(p.length == doctest::Approx(4.0 * wef::elliptic_k(0.5)).epsilon(1e-14));
  CHECK(p.boundary.kind == wef::BoundaryKind::FloquetPeriodic);
  CHECK(p.boundary.mu == 0.1);
  CHECK(p.terms[1].inside);
  CHECK(p.terms[1].coefficient.eval(Complex(0.0)) == Complex(-3.0));
}

TEST_CASE("load-save round trip is lossless") {
  for (const char* name : {"mathieu.json", "fourth_order.json", "mkdv.json"}) {
    const auto p1 = wef::load_problem(shipped(name));
    const json j1 = wef::problem_to_json(p1);
    const auto p2 = wef::parse_problem(j1);
    const json j2 = wef::problem_to_json(p2);
    CHECK(j1 == j2);
    CHECK(p1.order == p2.order);
    CHECK(p1.length == p2.length);
    CHECK(p1.boundary.preset == p2.boundary.preset);
    // identical Evans values through the full pipeline
    const Complex e1 = wef::evans(p1, Complex(1.5, 0.25), 1e-10).e;
    const Complex e2 = wef::evans(p2, Complex(1.5, 0.25), 1e-10).e;
    CHECK(e1 == e2);
  }
}

TEST_CASE("explicit separated rows with complex entries") {
  const json doc = {
      {"order", 2},
      {"interval", 3.0},
      {"operator", json::array({{{"derivative", 2}, {"coefficient", "-1"}}})},
      {"boundary",
       {{"type", "separated"},
        {"left", json::array({json::array({1.0, json::array({0.0, 1.0})})})},
        {"right", json::array({json::array({1.0, 0.0})})}}},
  };
  const auto p = wef::parse_problem(doc);
  // the direction (1, i) survives normalization
  CHECK(std::abs(p.boundary.left(0, 1) - Complex(0.0, 1.0) * p.boundary.left(0, 0)) < 1e-15);
  // rows were normalized to unit length
  double norm = 0.0;
  for (int c = 0; c < 2; ++c) norm += std::norm(p.boundary.left(0, c));
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("schema violations name the offending key") {
  auto expect_schema_error = [](const json& doc, const std::string& needle) {
    try {
      wef::parse_problem(doc);
      FAIL_CHECK("expected a schema error mentioning ", needle);
    } catch (const wef::SchemaError& e) {
      CHECK(e.key_path().find(needle) != std::string::npos);
    }
  };

  json base = {
      {"order", 2},
      {"interval", "2*pi"},
      {"operator", json::array({{{"derivative", 2}, {"coefficient", "-1"}}})},
      {"boundary", {{"preset", "dirichlet"}}},
  };

  json bad = base;
  bad.erase("order");
  expect_schema_error(bad, "order");

  bad = base;
  bad["interval"] = "cos(x)"; // not constant
  expect_schema_error(bad, "interval");

  bad = base;
  bad["operator"][0]["coefficient"] = "cos(x"; // syntax error
  expect_schema_error(bad, "operator[0].coefficient");

  bad = base;
  bad["operator"][0].erase("derivative");
  expect_schema_error(bad, "operator[0].derivative");

  bad = base;
  bad["boundary"] = {{"type", "floquet"}}; // missing mu
  expect_schema_error(bad, "boundary.mu");

  bad = base;
  bad["numerics"] = {{"tol", -1.0}};
  expect_schema_error(bad, "numerics.tol");

  // rank-deficient rows
  bad = base;
  bad["boundary"] = {{"type", "separated"},
                     {"left", json::array({json::array({0.0, 0.0})})},
                     {"right", json::array({json::array({1.0, 0.0})})}};
  expect_schema_error(bad, "boundary");
}

TEST_CASE("missing file is a user error") {
  CHECK_THROWS_AS(wef::load_problem("/nonexistent/nope.json"), wef::UserError);
}

TEST_CASE("save and reload through an actual file") {
  const auto p1 = wef::load_problem(shipped("mkdv.json"));
  const std::string tmp = "roundtrip_tmp.json";
  wef::save_problem(p1, tmp);
  const auto p2 = wef::load_problem(tmp);
  CHECK(wef::problem_to_json(p1) == wef::problem_to_json(p2));
  std::remove(tmp.c_str());
}
