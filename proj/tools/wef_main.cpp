// Command-line front end: certified spectral bounds from weighted Evans
// function evaluations on ODE boundary-value problems.
//
// Exit codes: 0 success, 1 user/input error, 2 numerical failure.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wef/certify.hpp"
#include "wef/evans.hpp"
#include "wef/greens.hpp"
#include "wef/matbound.hpp"
#include "wef/oracle.hpp"
#include "wef/parallel.hpp"
#include "wef/problem_io.hpp"

namespace {

using wef::Complex;
using json = nlohmann::json;

/// "a", "a+bi", "a-bi", "bi", "i", "-i"
Complex parse_complex(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw wef::UserError("empty complex number");

  auto parse_real = [](const std::string& part, double& out) {
    if (part.empty()) return false;
    char* end = nullptr;
    out = std::strtod(part.c_str(), &end);
    return end == part.c_str() + part.size();
  };

  if (s.back() == 'i' || s.back() == 'I') {
    std::string body = s.substr(0, s.size() - 1);
    // split at the last +/- that is not an exponent sign and not leading
    std::size_t split = std::string::npos;
    for (std::size_t i = body.size(); i-- > 1;) {
      if ((body[i] == '+' || body[i] == '-') &&
          body[i - 1] != 'e' && body[i - 1] != 'E') {
        split = i;
        break;
      }
    }
    double re = 0.0, im = 0.0;
    std::string im_part = (split == std::string::npos) ? body : body.substr(split);
    if (im_part.empty() || im_part == "+") im = 1.0;
    else if (im_part == "-") im = -1.0;
    else if (!parse_real(im_part, im))
      throw wef::UserError("cannot parse complex number '" + text + "'");
    if (split != std::string::npos) {
      if (!parse_real(body.substr(0, split), re))
        throw wef::UserError("cannot parse complex number '" + text + "'");
    }
    return Complex(re, im);
  }
  double re = 0.0;
  if (!parse_real(s, re))
    throw wef::UserError("cannot parse complex number '" + text + "'");
  return Complex(re);
}

struct RangeSpec {
  double lo = 0.0, hi = 0.0;
  int count = 1;

  std::vector<double> points() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
      out.push_back(lo);
      return out;
    }
    for (int i = 0; i < count; ++i)
      out.push_back(lo + (hi - lo) * i / (count - 1));
    return out;
  }
};

RangeSpec parse_range(const std::string& text) {
  RangeSpec r;
  const std::size_t c1 = text.find(':');
  const std::size_t c2 = text.rfind(':');
  if (c1 == std::string::npos || c2 == c1)
    throw wef::UserError("range must be written a:b:n, got '" + text + "'");
  try {
    r.lo = std::stod(text.substr(0, c1));
    r.hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    r.count = std::stoi(text.substr(c2 + 1));
  } catch (const std::exception&) {
    throw wef::UserError("range must be written a:b:n, got '" + text + "'");
  }
  if (r.count < 1) throw wef::UserError("range needs at least one point");
  return r;
}

json complex_record(Complex v) { return json::array({v.real(), v.imag()}); }

/// Output sink: stdout by default, a file with --out.
class Sink {
public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw wef::UserError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& out() { return file_.is_open() ? file_ : std::cout; }

private:
  std::ofstream file_;
};

struct CommonOptions {
  std::string problem_path;
  std::string out_path;
  double tol = 0.0;      // 0: take from the problem file
  int quad_nodes = 0;    // 0: take from the problem file
  double quad_check = 1e-6;
  int threads = 0;
};

struct Loaded {
  wef::ProblemSpec problem;
  double tol;
  wef::QuadratureSpec quad;
  int threads;
};

Loaded load_common(const CommonOptions& opt) {
  Loaded l{wef::load_problem(opt.problem_path), 0.0, {}, 1};
  l.tol = opt.tol > 0.0 ? opt.tol : l.problem.numerics.tol;
  l.quad.nodes = opt.quad_nodes > 0 ? opt.quad_nodes : l.problem.numerics.quad_nodes;
  l.quad.refine_rel_tol = opt.quad_check;
  l.threads = opt.threads > 0 ? opt.threads : wef::default_thread_count();
  return l;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("problem", opt.problem_path, "problem file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out_path, "write output here instead of stdout");
  cmd->add_option("--tol", opt.tol, "integrator tolerance override");
  cmd->add_option("--quad-nodes", opt.quad_nodes, "quadrature nodes per direction");
  cmd->add_option("--quad-check", opt.quad_check,
                  "two-level quadrature agreement (<= 0 disables)");
  cmd->add_option("--threads", opt.threads,
                  "worker threads (default: WEF_THREADS or hardware)");
}

void csv_complex_columns(std::ostream& os, Complex v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.16g,%.16g", v.real(), v.imag());
  os << buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16g", v);
  return buf;
}

int run_eval(const CommonOptions& opt, const std::string& lambda_text) {
  const Loaded l = load_common(opt);
  const Complex lambda = parse_complex(lambda_text);
  const wef::EvansValue v = wef::bound(l.problem, lambda, l.tol, l.quad);
  Sink sink(opt.out_path);
  json rec;
  rec["lambda"] = complex_record(lambda);
  rec["E"] = complex_record(v.e);
  rec["W"] = v.w;
  rec["bound"] = v.bound();
  sink.out() << rec.dump() << "\n";
  return 0;
}

int run_scan(const CommonOptions& opt, const std::string& re_text,
             const std::string& im_text) {
  const Loaded l = load_common(opt);
  const RangeSpec re = parse_range(re_text);
  std::vector<double> ims{0.0};
  if (!im_text.empty()) ims = parse_range(im_text).points();
  const std::vector<double> res = re.points();

  std::vector<Complex> grid;
  grid.reserve(res.size() * ims.size());
  for (double r : res)
    for (double i : ims) grid.emplace_back(r, i);

  std::vector<wef::EvansValue> values(grid.size());
  wef::parallel_for(grid.size(), l.threads, [&](std::size_t i) {
    values[i] = wef::bound(l.problem, grid[i], l.tol, l.quad);
  });

  Sink sink(opt.out_path);
  sink.out() << "re,im,e_re,e_im,w,bound\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sink.out() << fmt(grid[i].real()) << "," << fmt(grid[i].imag()) << ",";
    csv_complex_columns(sink.out(), values[i].e);
    sink.out() << "," << fmt(values[i].w) << "," << fmt(values[i].bound()) << "\n";
  }
  return 0;
}

int run_sweep(const CommonOptions& opt, double from, const std::string& dir_text,
              int max_iter, double stop_tol) {
  const Loaded l = load_common(opt);
  int direction = 0;
  if (dir_text == "+" || dir_text == "up") direction = +1;
  else if (dir_text == "-" || dir_text == "down") direction = -1;
  else throw wef::UserError("--dir must be + or -");

  const wef::SweepTrace trace =
      wef::qnewton_sweep(l.problem, from, direction, l.tol, l.quad, stop_tol, max_iter);

  Sink sink(opt.out_path);
  sink.out() << "iter,lambda,e_re,e_im,w,bound\n";
  for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
    const auto& pt = trace.iterates[i];
    sink.out() << i << "," << fmt(pt.lambda) << ",";
    csv_complex_columns(sink.out(), pt.e);
    sink.out() << "," << fmt(pt.w) << "," << fmt(pt.bound) << "\n";
  }
  sink.out() << "# terminated: " << wef::to_string(trace.termination) << "\n";
  return 0;
}

int run_disk(const CommonOptions& opt, const std::string& lambda_text) {
  const Loaded l = load_common(opt);
  const Complex lambda = parse_complex(lambda_text);
  const wef::ExclusionDisk disk = wef::exclusion_disk(l.problem, lambda, l.tol, l.quad);
  Sink sink(opt.out_path);
  json rec;
  rec["center"] = complex_record(disk.center);
  rec["radius"] = disk.radius;
  sink.out() << rec.dump() << "\n";
  return 0;
}

int run_extend(const CommonOptions& opt, const std::string& lambda_text,
               const std::string& mu_text, const std::string& mu_grid_text) {
  const Loaded l = load_common(opt);
  if (l.problem.boundary.kind != wef::BoundaryKind::FloquetPeriodic)
    throw wef::UserError("extend needs a floquet problem");
  const Complex lambda = parse_complex(lambda_text);

  std::vector<double> bases;
  if (!mu_grid_text.empty()) {
    bases = parse_range(mu_grid_text).points();
  } else if (!mu_text.empty()) {
    try {
      std::size_t used = 0;
      bases.push_back(std::stod(mu_text, &used));
      if (used != mu_text.size()) throw std::invalid_argument(mu_text);
    } catch (const std::exception&) {
      throw wef::UserError("cannot parse --mu value '" + mu_text + "'");
    }
  } else {
    bases.push_back(l.problem.boundary.mu);
  }

  std::vector<wef::ExtensionRegion> regions(bases.size());
  wef::parallel_for(bases.size(), l.threads, [&](std::size_t i) {
    wef::ProblemSpec p = l.problem;
    p.boundary.mu = bases[i];
    regions[i] = wef::extension_region(p, lambda, l.tol, l.quad);
  });

  Sink sink(opt.out_path);
  sink.out() << "mu_base,dmu,mu,dlambda_max\n";
  for (const auto& region : regions)
    for (const auto& [dmu, extent] : region.boundary)
      sink.out() << fmt(region.mu_base) << "," << fmt(dmu) << ","
                 << fmt(region.mu_base + dmu) << "," << fmt(extent) << "\n";

  if (bases.size() > 1) {
    const double width = 2.0 * M_PI / l.problem.length;
    const auto rect = wef::rectangle_from_diamonds(regions, width);
    sink.out() << "# rectangle: height=" << fmt(rect.height)
               << " mu_width=" << fmt(rect.mu_width) << "\n";
  }
  return 0;
}

int run_count(const CommonOptions& opt, const std::vector<double>& rect, int samples) {
  const Loaded l = load_common(opt);
  if (rect.size() != 4)
    throw wef::UserError("--rect needs four numbers: re_lo re_hi im_lo im_hi");
  const wef::Contour contour = wef::Contour::rectangle(rect[0], rect[1], rect[2], rect[3]);
  const int count = wef::winding_count(l.problem, contour, samples, l.tol);
  Sink sink(opt.out_path);
  json rec;
  rec["rect"] = rect;
  rec["count"] = count;
  sink.out() << rec.dump() << "\n";
  return 0;
}

int run_slope(const CommonOptions& opt, double lambda, double h) {
  const Loaded l = load_common(opt);
  const double slope = wef::slope_at_eigenvalue(l.problem, lambda, h, l.tol, l.quad);
  Sink sink(opt.out_path);
  json rec;
  rec["lambda"] = lambda;
  rec["h"] = h;
  rec["slope"] = slope;
  rec["abs_slope"] = std::abs(slope);
  sink.out() << rec.dump() << "\n";
  return 0;
}

void emit_error(const char* kind, const std::string& message) {
  json rec;
  rec["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << rec.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted Evans function curves, certified eigenvalue-free regions, "
               "and Floquet parameter extension"};
  app.require_subcommand(1);

  CommonOptions eval_opt, scan_opt, sweep_opt, disk_opt, extend_opt, count_opt, slope_opt;

  auto* eval_cmd = app.add_subcommand("eval", "E, W, and the certified bound at one lambda");
  std::string eval_lambda;
  add_common(eval_cmd, eval_opt);
  eval_cmd->add_option("--lambda", eval_lambda, "spectral point, e.g. 3 or 0.1+0.5i")
      ->required();

  auto* scan_cmd = app.add_subcommand("scan", "CSV of E, W, bound over a lambda grid");
  std::string scan_re, scan_im;
  add_common(scan_cmd, scan_opt);
  scan_cmd->add_option("--re", scan_re, "real-part grid a:b:n")->required();
  scan_cmd->add_option("--im", scan_im, "imaginary-part grid a:b:n");

  auto* sweep_cmd = app.add_subcommand("sweep", "monotone quasi-Newton eigenvalue bracketing");
  double sweep_from = 0.0, sweep_stop = 1e-10;
  int sweep_iters = 100;
  std::string sweep_dir;
  add_common(sweep_cmd, sweep_opt);
  sweep_cmd->add_option("--from", sweep_from, "starting lambda (real)")->required();
  sweep_cmd->add_option("--dir", sweep_dir, "+ or -")->required();
  sweep_cmd->add_option("--iters", sweep_iters, "iteration cap");
  sweep_cmd->add_option("--stop-tol", sweep_stop, "stop when the bound drops below this");

  auto* disk_cmd = app.add_subcommand("disk", "certified exclusion disk at one lambda");
  std::string disk_lambda;
  add_common(disk_cmd, disk_opt);
  disk_cmd->add_option("--lambda", disk_lambda, "spectral point")->required();

  auto* extend_cmd =
      app.add_subcommand("extend", "Floquet extension diamonds and inscribed rectangle");
  std::string extend_lambda, extend_mu, extend_mu_grid;
  add_common(extend_cmd, extend_opt);
  extend_cmd->add_option("--lambda", extend_lambda, "spectral point")->required();
  extend_cmd->add_option("--mu", extend_mu, "single diamond at this base mu");
  extend_cmd->add_option("--mu-grid", extend_mu_grid, "base mu grid a:b:n");

  auto* count_cmd = app.add_subcommand("count", "winding count of E over a rectangle");
  std::vector<double> count_rect;
  int count_samples = 64;
  add_common(count_cmd, count_opt);
  count_cmd->add_option("--rect", count_rect, "re_lo re_hi im_lo im_hi")
      ->expected(4)
      ->required();
  count_cmd->add_option("--samples", count_samples, "initial contour samples");

  auto* slope_cmd = app.add_subcommand("slope", "d/dlambda of E/W at a real point");
  double slope_lambda = 0.0, slope_h = 1e-4;
  add_common(slope_cmd, slope_opt);
  slope_cmd->add_option("--lambda", slope_lambda, "real spectral point")->required();
  slope_cmd->add_option("--step", slope_h, "central-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e); // --help
    emit_error("usage", e.what());
    return 1;
  }

  try {
    if (eval_cmd->parsed()) return run_eval(eval_opt, eval_lambda);
    if (scan_cmd->parsed()) return run_scan(scan_opt, scan_re, scan_im);
    if (sweep_cmd->parsed())
      return run_sweep(sweep_opt, sweep_from, sweep_dir, sweep_iters, sweep_stop);
    if (disk_cmd->parsed()) return run_disk(disk_opt, disk_lambda);
    if (extend_cmd->parsed())
      return run_extend(extend_opt, extend_lambda, extend_mu, extend_mu_grid);
    if (count_cmd->parsed()) return run_count(count_opt, count_rect, count_samples);
    if (slope_cmd->parsed()) return run_slope(slope_opt, slope_lambda, slope_h);
  } catch (const wef::NumericalError& e) {
    emit_error("numerical", e.what());
    return 2;
  } catch (const wef::SchemaError& e) {
    emit_error("schema", e.what());
    return 1;
  } catch (const wef::UserError& e) {
    emit_error("usage", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 2;
  }
  return 1;
}
