#include <ostream>

#include "CLI11.hpp"
#include "ksg_cli/cli.hpp"

namespace ksg::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heat kernels and Keller-Segel solvers on metric graphs"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for randomized probes");
  app.add_option("--threads", g.threads, "Worker threads (output does not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for CSV and manifest output");
  app.add_option("--set", g.overrides, "Config override key.path=value (repeatable)")->expected(1)->take_all();

  std::string config;
  auto* sim = app.add_subcommand("simulate", "Solve a Keller-Segel system from a JSON config");
  sim->add_option("config", config, "Run config (JSON)")->required();

  std::string graph;
  KernelOptions kopt;
  auto* ker = app.add_subcommand("kernel", "Tabulate K_t(x, y) and dK/dy");
  ker->add_option("--graph", graph, "Graph JSON")->required();
  ker->add_option("--t", kopt.times, "Times (repeatable or comma separated)")->required()->delimiter(',');
  ker->add_option("--points", kopt.points, "grid:N or edge:xi;edge:xi;...");
  ker->add_option("--eps-tail", kopt.eps_tail, "Path-sum truncation tolerance");
  ker->add_option("--output", kopt.output, "File name inside --out-dir");

  SpectrumOptions sopt;
  auto* spec = app.add_subcommand("spectrum", "Eigenvalues of the discrete Laplacian");
  spec->add_option("--graph", graph, "Graph JSON")->required();
  spec->add_option("--k", sopt.k, "Number of eigenvalues");
  spec->add_option("--mesh", sopt.mesh, "Nodes per unit length");
  spec->add_option("--scale", sopt.scale, "discrete or continuum");
  spec->add_option("--output", sopt.output, "File name inside --out-dir");

  NormsOptions nopt;
  std::vector<std::string> pairs;
  auto* nrm = app.add_subcommand("norms", "Empirical semigroup norms and log-log slopes");
  nrm->add_option("--graph", graph, "Graph JSON")->required();
  nrm->add_option("--pair", pairs, "op:p:q, e.g. heat_dx:2:2 (repeatable)")->required()->delimiter(',');
  nrm->add_option("--mesh", nopt.mesh, "Nodes per unit length");
  nrm->add_option("--probes", nopt.probes, "Random probes per time");
  nrm->add_option("--t-min", nopt.t_min);
  nrm->add_option("--t-max", nopt.t_max);
  nrm->add_option("--t-count", nopt.t_count);
  nrm->add_option("--tolerance", nopt.tolerance, "Allowed slope error");
  nrm->add_option("--output", nopt.output, "File name inside --out-dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  if (sim->parsed()) return cmd_simulate(config, g, err);
  if (ker->parsed()) return cmd_kernel(graph, kopt, g, err);
  if (spec->parsed()) return cmd_spectrum(graph, sopt, g, err);
  try {
    for (const auto& p : pairs) nopt.pairs.push_back(parse_norm_pair(p));
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return cmd_norms(graph, nopt, g, err);
}

}  // namespace ksg::cli
