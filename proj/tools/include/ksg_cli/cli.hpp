#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ksg/diagnostics.hpp"
#include "ksg/nonlinearity.hpp"
#include "ksg/solver.hpp"

namespace ksg::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2, kBlowUp = 3, kPicardDivergence = 4 };

/// Anything wrong with the user's input (files, JSON, keys, values). Maps to exit 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::filesystem::path out_dir = ".";
  std::vector<std::string> overrides;  // "a.b=value"
};

/// Initial data: one expression for every edge, per-edge expressions keyed
/// by edge id (with an optional "default"), or node values from a file in
/// the mesh's edge layout. Expressions see x (arc length from the edge's
/// start), L (edge length) and e (edge index).
struct InitialData {
  std::map<std::string, std::string> expressions;  // "" key is the default
  std::string file;
};

struct RunConfig {
  std::filesystem::path graph;
  std::string mode = "pp";
  double tau = 1.0;
  double sigma = 1.0;
  std::string preset = "minimal";  // empty when `expressions` is used
  ExpressionSpec expressions;
  double chi = 1.0, k = 0.0, l = 1.0, m = 1.0, eps = 1.0;
  InitialData u0, v0;
  std::string solver = "mild";
  double eps_tail = 1e-12;
  SolverConfig solve;
};

/// Reads the file, applies `--set` overrides, and reports malformed JSON
/// with line and column.
nlohmann::json load_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides);
/// Dotted-path override; the value is read as JSON when it parses, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);
/// Validates keys and types; relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
nlohmann::json to_json(const RunConfig& cfg);

Nonlinearity build_nonlinearity(const RunConfig& cfg);
GridFunction build_initial(const InitialData& data, const std::shared_ptr<const Mesh>& mesh, const std::string& what);

struct NormPair {
  OperatorKind kind = OperatorKind::Heat;
  double p = 2.0, q = 2.0;
};
/// "heat_dx:2:2", "heat:2:inf".
NormPair parse_norm_pair(const std::string& text);

struct KernelOptions {
  std::vector<double> times;
  std::string points = "grid:5";  // "grid:N" or "edge:xi;edge:xi;..."
  double eps_tail = 1e-12;
  std::string output = "kernel.csv";
};
struct SpectrumOptions {
  std::size_t k = 10;
  double mesh = 100.0;
  std::string scale = "discrete";
  std::string output = "spectrum.csv";
};
struct NormsOptions {
  std::vector<NormPair> pairs;
  double mesh = 200.0;
  std::size_t probes = 64;
  double t_min = 1e-3, t_max = 1e-1;
  std::size_t t_count = 12;
  double tolerance = 0.05;
  std::string output = "norms.csv";
};

int cmd_simulate(const std::filesystem::path& config_path, const GlobalOptions& opts, std::ostream& err);
int cmd_kernel(const std::filesystem::path& graph_path, const KernelOptions& kopts, const GlobalOptions& opts,
               std::ostream& err);
int cmd_spectrum(const std::filesystem::path& graph_path, const SpectrumOptions& sopts, const GlobalOptions& opts,
                 std::ostream& err);
int cmd_norms(const std::filesystem::path& graph_path, const NormsOptions& nopts, const GlobalOptions& opts,
              std::ostream& err);

/// Full command line front end; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ksg::cli
