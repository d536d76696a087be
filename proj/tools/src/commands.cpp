#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "ksg/csv.hpp"
#include "ksg/error.hpp"
#include "ksg/laplacian.hpp"
#include "ksg/parallel.hpp"
#include "ksg_cli/cli.hpp"

#ifndef KSG_VERSION
#define KSG_VERSION "unknown"
#endif

namespace ksg::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

// Errors that point at the user's input rather than at the computation.
bool is_input_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse:
    case ErrorKind::DisconnectedGraph:
    case ErrorKind::NonpositiveLength:
    case ErrorKind::UnknownEdge:
    case ErrorKind::UnknownVertex:
    case ErrorKind::NonpositiveTime:
    case ErrorKind::MeshTooCoarse:
    case ErrorKind::InvalidArgument:
      return true;
    default:
      return false;
  }
}

int exit_code_for(const Error& e) {
  if (e.kind() == ErrorKind::PicardDiverged) return kPicardDivergence;
  return is_input_error(e.kind()) ? kConfigError : kRuntimeError;
}

std::shared_ptr<const MetricGraph> load_graph(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("graph file '" + path.string() + "' not found");
  try {
    return std::make_shared<const MetricGraph>(load_graph_file(path.string()));
  } catch (const Error& e) {
    throw ConfigError("graph '" + path.string() + "': " + e.what());
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
  return out;
}

// Shared manifest fields; the command fills in the rest.
struct Manifest {
  json doc;
  Clock::time_point start = Clock::now();

  Manifest(const std::string& command, const GlobalOptions& opts) {
    doc["command"] = command;
    doc["seed"] = opts.seed;
    doc["threads"] = opts.threads;
    doc["tool_version"] = KSG_VERSION;
    doc["overrides"] = opts.overrides;
    doc["outputs"] = json::array();
  }
  void output(const std::filesystem::path& p) { doc["outputs"].push_back(p.string()); }
  void write(const std::filesystem::path& dir, const std::string& status) {
    doc["status"] = status;
    doc["wall_time_s"] = std::chrono::duration<double>(Clock::now() - start).count();
    auto out = open_output(dir / "manifest.json");
    out << doc.dump(2) << '\n';
  }
};

std::string node_column(const MetricGraph& g, EdgeIndex e, std::size_t j) {
  return g.edge(e).id + "[" + std::to_string(j) + "]";
}

void write_series(const std::filesystem::path& path, const std::vector<double>& times,
                  const std::vector<GridFunction>& series) {
  auto out = open_output(path);
  CsvWriter w(out);
  if (series.empty()) {
    w.header({"t"});
    return;
  }
  const auto& mesh = series.front().mesh();
  const auto& g = mesh.graph();
  std::vector<std::string> names{"t"};
  for (EdgeIndex e = 0; e < g.edge_count(); ++e)
    for (std::size_t j = 0; j <= mesh.intervals(e); ++j) names.push_back(node_column(g, e, j));
  w.header(names);
  for (std::size_t i = 0; i < series.size(); ++i) {
    w.field(times[i]);
    for (Eigen::Index k = 0; k < series[i].values().size(); ++k) w.field(series[i].values()[k]);
    w.end_row();
  }
}

void write_diagnostics(const std::filesystem::path& path, const std::vector<DiagnosticRecord>& diag) {
  auto out = open_output(path);
  CsvWriter w(out);
  w.header({"time", "mass_u", "lp_u", "linf_u", "min_u", "min_v", "picard_iters", "contraction_factor",
            "window_length"});
  for (const auto& d : diag) {
    w.field(d.t).field(d.mass_u).field(d.lp_u).field(d.linf_u).field(d.min_u).field(d.min_v);
    w.field(static_cast<long long>(d.picard_iters)).field(d.contraction_factor).field(d.window_length);
    w.end_row();
  }
}

std::vector<EdgePoint> parse_points(const MetricGraph& g, const std::string& spec) {
  std::vector<EdgePoint> pts;
  if (spec.rfind("grid:", 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(spec.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("bad points spec '" + spec + "'");
    }
    if (n < 2) throw ConfigError("grid:N needs N >= 2");
    for (EdgeIndex e = 0; e < g.edge_count(); ++e)
      for (int i = 0; i < n; ++i)
        pts.push_back({e, i == n - 1 ? g.length(e) : g.length(e) * i / (n - 1)});
    return pts;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto end = std::min(spec.find(';', start), spec.size());
    const std::string item = spec.substr(start, end - start);
    start = end + 1;
    if (item.empty()) continue;
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw ConfigError("point '" + item + "' is not edge:xi");
    EdgePoint p;
    try {
      p.edge = g.edge_index(item.substr(0, colon));
      p.xi = std::stod(item.substr(colon + 1));
    } catch (const Error& e) {
      throw ConfigError(std::string("point '") + item + "': " + e.what());
    } catch (const std::exception&) {
      throw ConfigError("point '" + item + "' has a bad coordinate");
    }
    if (!(p.xi >= 0.0 && p.xi <= g.length(p.edge))) throw ConfigError("point '" + item + "' lies off its edge");
    pts.push_back(p);
  }
  if (pts.empty()) throw ConfigError("no points given");
  return pts;
}

template <class F>
int guarded(std::ostream& err, const std::filesystem::path& out_dir, Manifest& manifest, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    const int code = exit_code_for(e);
    manifest.doc["failure"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
    try {
      if (std::filesystem::is_directory(out_dir)) manifest.write(out_dir, "error");
    } catch (const std::exception&) {
    }
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

void prepare(const GlobalOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + opts.out_dir.string() + "': " + ec.message());
  set_thread_count(std::max(1u, opts.threads));
}

}  // namespace

NormPair parse_norm_pair(const std::string& text) {
  const auto a = text.find(':');
  const auto b = text.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) throw ConfigError("pair '" + text + "' is not op:p:q");
  auto exponent = [&](const std::string& s) {
    if (s == "inf") return kInfinity;
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !(v >= 1.0)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("pair '" + text + "': exponent '" + s + "' must be >= 1 or inf");
    }
  };
  NormPair p;
  try {
    p.kind = operator_kind_from_string(text.substr(0, a));
  } catch (const Error& e) {
    throw ConfigError(std::string("pair '") + text + "': " + e.what());
  }
  p.p = exponent(text.substr(a + 1, b - a - 1));
  p.q = exponent(text.substr(b + 1));
  return p;
}

int cmd_simulate(const std::filesystem::path& config_path, const GlobalOptions& opts, std::ostream& err) {
  Manifest manifest("simulate", opts);
  manifest.doc["config_path"] = config_path.string();
  return guarded(err, opts.out_dir, manifest, [&]() -> int {
    const json doc = load_config_json(config_path, opts.overrides);
    const RunConfig cfg = parse_run_config(doc, config_path.parent_path());
    prepare(opts);
    manifest.doc["parameters"] = to_json(cfg);

    const auto graph = load_graph(cfg.graph);
    const Nonlinearity nl = build_nonlinearity(cfg);
    const auto mesh = std::make_shared<const Mesh>(graph, cfg.solve.nodes_per_unit_length);
    const GridFunction u0 = build_initial(cfg.u0, mesh, "u0");
    const GridFunction v0 = build_initial(cfg.v0, mesh, "v0");

    SolveResult res;
    if (cfg.solver == "mild") {
      const double tau = nl.regime == Regime::ParabolicElliptic ? 1.0 : nl.tau;
      const double horizon = cfg.solve.max_window_steps * cfg.solve.dt / std::min(1.0, tau);
      HeatKernelPlan plan(graph, horizon, cfg.eps_tail);
      res = solve_mild(plan, nl, u0, v0, cfg.solve);
    } else {
      DiscreteLaplacian lap(mesh);
      res = solve_reference(lap, nl, u0, v0, cfg.solve);
    }

    const auto u_path = opts.out_dir / "solution_u.csv";
    write_series(u_path, res.times, res.u_series);
    manifest.output(u_path);
    if (!res.v_series.empty()) {
      const auto v_path = opts.out_dir / "solution_v.csv";
      write_series(v_path, res.times, res.v_series);
      manifest.output(v_path);
    }
    const auto d_path = opts.out_dir / "diagnostics.csv";
    write_diagnostics(d_path, res.diagnostics);
    manifest.output(d_path);

    manifest.doc["windows"] = res.windows;
    manifest.doc["window_halvings"] = res.window_halvings;
    manifest.doc["floored_nodes"] = res.floored_nodes;
    manifest.doc["t_final"] = res.times.empty() ? 0.0 : res.times.back();
    switch (res.status) {
      case SolveStatus::Completed:
        manifest.write(opts.out_dir, "completed");
        return kOk;
      case SolveStatus::BlowUpDetected:
        manifest.doc["t_est"] = res.blowup_time_estimate;
        manifest.write(opts.out_dir, "blowup");
        err << "blow-up detected, t_est = " << format_real(res.blowup_time_estimate) << '\n';
        return kBlowUp;
      case SolveStatus::PicardDiverged:
        manifest.doc["failure"] = {{"kind", "PicardDiverged"},
                                   {"time", res.failure_time},
                                   {"iteration", res.failure_iteration}};
        manifest.write(opts.out_dir, "picard_diverged");
        err << "Picard iteration diverged at t = " << format_real(res.failure_time) << '\n';
        return kPicardDivergence;
    }
    return kRuntimeError;
  });
}

int cmd_kernel(const std::filesystem::path& graph_path, const KernelOptions& kopts, const GlobalOptions& opts,
               std::ostream& err) {
  Manifest manifest("kernel", opts);
  return guarded(err, opts.out_dir, manifest, [&]() -> int {
    if (kopts.times.empty()) throw ConfigError("kernel needs at least one --t");
    for (double t : kopts.times)
      if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("kernel times must be positive");
    const auto graph = load_graph(graph_path);
    const auto pts = parse_points(*graph, kopts.points);
    prepare(opts);
    manifest.doc["parameters"] = {{"graph", graph_path.string()}, {"t", kopts.times},
                                  {"points", kopts.points},       {"eps_tail", kopts.eps_tail}};

    const double horizon = *std::max_element(kopts.times.begin(), kopts.times.end());
    HeatKernelPlan plan(graph, horizon, kopts.eps_tail);

    const std::size_t n = pts.size();
    const auto path = opts.out_dir / kopts.output;
    auto out = open_output(path);
    CsvWriter w(out);
    w.header({"edge_x", "xi_x", "edge_y", "xi_y", "t", "K", "dK_dy"});
    std::vector<double> k(n * n), dk(n * n);
    for (double t : kopts.times) {
      parallel_for(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            k[i * n + j] = eval_kernel(plan, t, pts[i], pts[j]);
            dk[i * n + j] = eval_kernel_dy(plan, t, pts[i], pts[j]);
          }
      });
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          w.field(graph->edge(pts[i].edge).id).field(pts[i].xi);
          w.field(graph->edge(pts[j].edge).id).field(pts[j].xi);
          w.field(t).field(k[i * n + j]).field(dk[i * n + j]);
          w.end_row();
        }
    }
    manifest.output(path);
    manifest.write(opts.out_dir, "completed");
    return kOk;
  });
}

int cmd_spectrum(const std::filesystem::path& graph_path, const SpectrumOptions& sopts, const GlobalOptions& opts,
                 std::ostream& err) {
  Manifest manifest("spectrum", opts);
  return guarded(err, opts.out_dir, manifest, [&]() -> int {
    if (sopts.scale != "discrete" && sopts.scale != "continuum")
      throw ConfigError("--scale must be 'discrete' or 'continuum'");
    if (sopts.k == 0) throw ConfigError("--k must be positive");
    const auto graph = load_graph(graph_path);
    prepare(opts);
    manifest.doc["parameters"] = {
        {"graph", graph_path.string()}, {"k", sopts.k}, {"mesh", sopts.mesh}, {"scale", sopts.scale}};

    const auto lap = assemble(graph, sopts.mesh);
    const auto dec = eigendecompose(lap, sopts.k);
    const Eigen::VectorXd lambda = sopts.scale == "continuum" ? dec.continuum_eigenvalues() : dec.eigenvalues;

    const auto path = opts.out_dir / sopts.output;
    auto out = open_output(path);
    CsvWriter w(out);
    w.header({"index", "lambda", "residual"});
    for (Eigen::Index j = 0; j < lambda.size(); ++j) {
      w.field(static_cast<long long>(j)).field(lambda[j]).field(dec.residuals[j]);
      w.end_row();
    }
    manifest.output(path);
    manifest.write(opts.out_dir, "completed");
    return kOk;
  });
}

int cmd_norms(const std::filesystem::path& graph_path, const NormsOptions& nopts, const GlobalOptions& opts,
              std::ostream& err) {
  Manifest manifest("norms", opts);
  return guarded(err, opts.out_dir, manifest, [&]() -> int {
    if (nopts.pairs.empty()) throw ConfigError("norms needs at least one --pair");
    if (!(nopts.t_min > 0.0 && nopts.t_max > nopts.t_min) || nopts.t_count < 2)
      throw ConfigError("need 0 < t_min < t_max and t_count >= 2");
    if (nopts.probes == 0) throw ConfigError("--probes must be positive");
    const auto graph = load_graph(graph_path);
    prepare(opts);

    json pairs = json::array();
    for (const auto& p : nopts.pairs)
      pairs.push_back({to_string(p.kind), std::isinf(p.p) ? json("inf") : json(p.p),
                       std::isinf(p.q) ? json("inf") : json(p.q)});
    manifest.doc["parameters"] = {{"graph", graph_path.string()}, {"pairs", pairs},
                                  {"mesh", nopts.mesh},           {"probes", nopts.probes},
                                  {"t_min", nopts.t_min},         {"t_max", nopts.t_max},
                                  {"t_count", nopts.t_count},     {"tolerance", nopts.tolerance}};

    NormFitOptions fit;
    fit.nodes_per_unit_length = nopts.mesh;
    fit.n_probes = nopts.probes;
    fit.seed = opts.seed;
    fit.tolerance = nopts.tolerance;
    const double a = std::log(nopts.t_min), b = std::log(nopts.t_max);
    for (std::size_t i = 0; i < nopts.t_count; ++i) {
      double t = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(nopts.t_count - 1));
      if (i == 0) t = nopts.t_min;
      if (i + 1 == nopts.t_count) t = nopts.t_max;
      fit.t_grid.push_back(t);
    }
    HeatKernelPlan plan(graph, nopts.t_max, 1e-14);

    const auto path = opts.out_dir / nopts.output;
    auto out = open_output(path);
    CsvWriter w(out);
    w.header({"op_kind", "p", "q", "t", "empirical_norm", "fitted_slope", "target", "pass"});
    for (const auto& p : nopts.pairs) {
      const auto r = fit_operator_norm(plan, p.kind, p.p, p.q, fit);
      for (std::size_t i = 0; i < r.log_t.size(); ++i) {
        w.field(to_string(p.kind)).field(p.p).field(p.q);
        w.field(fit.t_grid[i]).field(std::exp(r.log_norm[i]));
        w.field(r.slope).field(r.target).field(r.pass ? "true" : "false");
        w.end_row();
      }
    }
    manifest.output(path);
    manifest.write(opts.out_dir, "completed");
    return kOk;
  });
}

}  // namespace ksg::cli
