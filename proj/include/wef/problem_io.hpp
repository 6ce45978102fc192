#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "wef/errors.hpp"
#include "wef/greens.hpp"
#include "wef/problem.hpp"

namespace wef {

namespace detail {

inline Complex json_complex(const nlohmann::json& j, const std::string& path) {
  if (j.is_number()) return Complex(j.get<double>());
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Complex(j[0].get<double>(), j[1].get<double>());
  throw SchemaError("expected a number or [re, im] pair", path);
}

inline nlohmann::json complex_json(Complex v) {
  if (v.imag() == 0.0) return v.real();
  return nlohmann::json::array({v.real(), v.imag()});
}

inline Mat json_rows(const nlohmann::json& j, int n, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw SchemaError("expected a non-empty array of rows", path);
  Mat m(static_cast<int>(j.size()), n);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto& row = j[r];
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw SchemaError("expected a row of " + std::to_string(n) + " entries", row_path);
    for (std::size_t c = 0; c < row.size(); ++c)
      m(static_cast<int>(r), static_cast<int>(c)) =
          json_complex(row[c], row_path + "[" + std::to_string(c) + "]");
  }
  return m;
}

inline double eval_constant_expression(const std::string& src, const std::string& path) {
  Expr e;
  try {
    e = Expr::parse(src);
  } catch (const UserError& err) {
    throw SchemaError(std::string("bad expression: ") + err.what(), path);
  }
  if (!e.is_constant())
    throw SchemaError("expression must not depend on x", path);
  const Complex v = e.eval(Complex(0.0));
  if (std::abs(v.imag()) > 1e-14 * std::max(1.0, std::abs(v)))
    throw SchemaError("expression must be real", path);
  return v.real();
}

} // namespace detail

/// Parse a problem document.  Keys: order, interval (number or constant
/// expression like "2*pi" or "4*K(0.5)"), operator (array of terms), boundary
/// (preset name, explicit separated rows, periodic, or floquet with mu), and
/// optional numerics {tol, quad_nodes}.
inline ProblemSpec parse_problem(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("problem document must be an object", "$");

  ProblemSpec p;
  if (!doc.contains("order") || !doc["order"].is_number_integer())
    throw SchemaError("missing integer key", "order");
  p.order = doc["order"].get<int>();

  if (!doc.contains("interval")) throw SchemaError("missing key", "interval");
  if (doc["interval"].is_number()) {
    p.length = doc["interval"].get<double>();
    p.length_source.clear();
  } else if (doc["interval"].is_string()) {
    p.length_source = doc["interval"].get<std::string>();
    p.length = detail::eval_constant_expression(p.length_source, "interval");
  } else {
    throw SchemaError("expected a number or expression string", "interval");
  }

  if (!doc.contains("operator") || !doc["operator"].is_array() || doc["operator"].empty())
    throw SchemaError("expected a non-empty array of terms", "operator");
  for (std::size_t i = 0; i < doc["operator"].size(); ++i) {
    const auto& jt = doc["operator"][i];
    const std::string path = "operator[" + std::to_string(i) + "]";
    if (!jt.is_object()) throw SchemaError("expected a term object", path);
    OperatorTerm t;
    if (!jt.contains("derivative") || !jt["derivative"].is_number_integer())
      throw SchemaError("missing integer key", path + ".derivative");
    t.order = jt["derivative"].get<int>();
    if (!jt.contains("coefficient") || !jt["coefficient"].is_string())
      throw SchemaError("missing string key", path + ".coefficient");
    t.coefficient_source = jt["coefficient"].get<std::string>();
    try {
      t.coefficient = Expr::parse(t.coefficient_source);
    } catch (const UserError& err) {
      throw SchemaError(std::string("bad expression: ") + err.what(),
                        path + ".coefficient");
    }
    t.inside = jt.value("inside", false);
    p.terms.push_back(std::move(t));
  }

  if (!doc.contains("boundary") || !doc["boundary"].is_object())
    throw SchemaError("missing object key", "boundary");
  const auto& jb = doc["boundary"];
  if (jb.contains("preset")) {
    if (!jb["preset"].is_string())
      throw SchemaError("expected a string", "boundary.preset");
    p.boundary = boundary_preset(jb["preset"].get<std::string>(), p.order);
  } else {
    const std::string type = jb.value("type", "");
    if (type == "separated") {
      if (!jb.contains("left") || !jb.contains("right"))
        throw SchemaError("separated boundary needs left and right rows", "boundary");
      const Mat left = detail::json_rows(jb["left"], p.order, "boundary.left");
      const Mat right = detail::json_rows(jb["right"], p.order, "boundary.right");
      try {
        p.boundary = make_separated(left, right);
      } catch (const UserError& err) {
        throw SchemaError(err.what(), "boundary");
      }
    } else if (type == "periodic") {
      p.boundary = make_periodic();
    } else if (type == "floquet") {
      if (!jb.contains("mu") || !jb["mu"].is_number())
        throw SchemaError("floquet boundary needs a numeric mu", "boundary.mu");
      p.boundary = make_floquet(jb["mu"].get<double>());
    } else {
      throw SchemaError("unknown boundary type '" + type + "'", "boundary.type");
    }
  }

  if (doc.contains("numerics")) {
    const auto& jn = doc["numerics"];
    if (!jn.is_object()) throw SchemaError("expected an object", "numerics");
    p.numerics.tol = jn.value("tol", p.numerics.tol);
    p.numerics.quad_nodes = jn.value("quad_nodes", p.numerics.quad_nodes);
    if (!(p.numerics.tol > 0.0)) throw SchemaError("tol must be positive", "numerics.tol");
    if (p.numerics.quad_nodes < 2)
      throw SchemaError("quad_nodes must be at least 2", "numerics.quad_nodes");
  }

  try {
    p.validate();
  } catch (const UserError& err) {
    throw SchemaError(err.what(), "$");
  }
  return p;
}

inline nlohmann::json problem_to_json(const ProblemSpec& p) {
  nlohmann::json doc;
  doc["order"] = p.order;
  if (!p.length_source.empty()) doc["interval"] = p.length_source;
  else doc["interval"] = p.length;

  doc["operator"] = nlohmann::json::array();
  for (const OperatorTerm& t : p.terms) {
    nlohmann::json jt;
    jt["derivative"] = t.order;
    jt["coefficient"] = t.coefficient_source.empty() ? t.coefficient.print()
                                                     : t.coefficient_source;
    if (t.inside) jt["inside"] = true;
    doc["operator"].push_back(std::move(jt));
  }

  nlohmann::json jb;
  if (!p.boundary.preset.empty()) {
    jb["preset"] = p.boundary.preset;
  } else if (p.boundary.kind == BoundaryKind::Separated) {
    jb["type"] = "separated";
    auto rows = [](const Mat& m) {
      nlohmann::json out = nlohmann::json::array();
      for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(detail::complex_json(m(r, c)));
        out.push_back(std::move(row));
      }
      return out;
    };
    jb["left"] = rows(p.boundary.left);
    jb["right"] = rows(p.boundary.right);
  } else if (p.boundary.kind == BoundaryKind::Periodic) {
    jb["type"] = "periodic";
  } else {
    jb["type"] = "floquet";
    jb["mu"] = p.boundary.mu;
  }
  doc["boundary"] = std::move(jb);

  doc["numerics"] = {{"tol", p.numerics.tol}, {"quad_nodes", p.numerics.quad_nodes}};
  return doc;
}

inline ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open problem file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what(), path);
  }
  return parse_problem(doc);
}

inline void save_problem(const ProblemSpec& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write problem file '" + path + "'");
  out << problem_to_json(p).dump(2) << "\n";
}

inline QuadratureSpec quadrature_from(const ProblemSpec& p) {
  QuadratureSpec q;
  q.nodes = p.numerics.quad_nodes;
  return q;
}

} // namespace wef
