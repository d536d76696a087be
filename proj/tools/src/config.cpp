#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ksg/csv.hpp"
#include "ksg/error.hpp"
#include "ksg/expression.hpp"
#include "ksg_cli/cli.hpp"

namespace ksg::cli {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// nlohmann reports a byte offset; turn it into line:column.
std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

double get_number(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

std::string get_string(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

// "inf" is accepted wherever an exponent is expected
double get_exponent(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (v.is_string() && v.get<std::string>() == "inf") return kInfinity;
  return get_number(doc, key);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

InitialData parse_initial(const json& node, const std::filesystem::path& base, const std::string& key) {
  InitialData d;
  if (node.is_string()) {
    d.expressions[""] = node.get<std::string>();
  } else if (node.is_number()) {
    d.expressions[""] = format_real(node.get<double>());
  } else if (node.is_object() && node.contains("file")) {
    check_keys(node, {"file"}, key);
    const auto p = std::filesystem::path(get_string(node, "file"));
    d.file = (p.is_absolute() ? p : base / p).string();
  } else if (node.is_object()) {
    for (const auto& [k, v] : node.items()) {
      std::string expr;
      if (v.is_string())
        expr = v.get<std::string>();
      else if (v.is_number())
        expr = format_real(v.get<double>());
      else
        throw ConfigError("'" + key + "." + k + "' must be an expression string or number");
      d.expressions[k == "default" ? "" : k] = expr;
    }
  } else {
    throw ConfigError("'" + key + "' must be an expression, a per-edge object or {\"file\": path}");
  }
  return d;
}

json initial_to_json(const InitialData& d) {
  if (!d.file.empty()) return json{{"file", d.file}};
  if (d.expressions.size() == 1 && d.expressions.count("")) return d.expressions.at("");
  json out = json::object();
  for (const auto& [k, v] : d.expressions) out[k.empty() ? "default" : k] = v;
  return out;
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad --set key '" + path + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("--set '" + path + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

json load_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  const std::string text = read_text(path, "config");
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + " at " + locate(text, e.byte > 0 ? e.byte - 1 : 0) +
                      ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  for (const auto& o : overrides) apply_override(doc, o);
  return doc;
}

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  static const std::set<std::string> kKeys = {
      "graph",  "mode",       "tau",          "sigma",       "sigma_shift",      "nonlinearity",
      "chi",    "k",          "l",            "m",           "eps",              "u0",
      "v0",     "dt",         "t_end",        "mesh",        "picard_tol",       "picard_max_iters",
      "window_steps", "max_window_steps", "blowup_norm_p", "blowup_threshold", "record_interval",
      "eps_tail", "solver"};
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  check_keys(doc, kKeys, "config");

  RunConfig c;
  try {
    if (!doc.contains("graph")) throw ConfigError("config needs 'graph'");
    const auto g = std::filesystem::path(get_string(doc, "graph"));
    c.graph = g.is_absolute() ? g : base_dir / g;
    if (!doc.contains("u0")) throw ConfigError("config needs 'u0'");
    c.u0 = parse_initial(doc.at("u0"), base_dir, "u0");
    if (doc.contains("v0")) c.v0 = parse_initial(doc.at("v0"), base_dir, "v0");
    else c.v0.expressions[""] = "0";

    if (doc.contains("mode")) c.mode = get_string(doc, "mode");
    if (c.mode != "pp" && c.mode != "pe") throw ConfigError("mode must be 'pp' or 'pe'");
    if (doc.contains("tau")) c.tau = get_number(doc, "tau");
    if (doc.contains("sigma")) c.sigma = get_number(doc, "sigma");
    for (auto [key, dst] : {std::pair{"chi", &c.chi}, {"k", &c.k}, {"l", &c.l}, {"m", &c.m}, {"eps", &c.eps}})
      if (doc.contains(key)) *dst = get_number(doc, key);

    if (doc.contains("nonlinearity")) {
      const auto& n = doc.at("nonlinearity");
      if (n.is_string()) {
        c.preset = n.get<std::string>();
        if (c.preset != "heat" && c.preset != "minimal" && c.preset != "logistic" && c.preset != "quadratic")
          throw ConfigError("unknown nonlinearity preset '" + c.preset + "'");
      } else if (n.is_object()) {
        check_keys(n, {"f1", "f2", "f3", "f", "parameters", "mu1", "mu2"}, "nonlinearity");
        c.preset.clear();
        for (auto [key, dst] : {std::pair{"f1", &c.expressions.f1}, {"f2", &c.expressions.f2},
                                {"f3", &c.expressions.f3}, {"f", &c.expressions.f}})
          if (n.contains(key)) *dst = get_string(n, key);
        if (n.contains("mu1")) c.expressions.mu1 = get_number(n, "mu1");
        if (n.contains("mu2")) c.expressions.mu2 = get_number(n, "mu2");
        if (n.contains("parameters")) {
          const auto& p = n.at("parameters");
          if (!p.is_object()) throw ConfigError("nonlinearity.parameters must be an object");
          for (const auto& [k, v] : p.items()) {
            if (!v.is_number()) throw ConfigError("parameter '" + k + "' must be a number");
            c.expressions.parameters[k] = v.get<double>();
          }
        }
      } else {
        throw ConfigError("nonlinearity must be a preset name or an object of expressions");
      }
    }

    auto& s = c.solve;
    if (doc.contains("dt")) s.dt = get_number(doc, "dt");
    if (doc.contains("t_end")) s.t_end = get_number(doc, "t_end");
    if (doc.contains("mesh")) s.nodes_per_unit_length = get_number(doc, "mesh");
    if (doc.contains("picard_tol")) s.picard_tol = get_number(doc, "picard_tol");
    if (doc.contains("picard_max_iters")) s.picard_max_iters = get_int(doc, "picard_max_iters");
    if (doc.contains("window_steps")) s.window_steps = get_int(doc, "window_steps");
    if (doc.contains("max_window_steps")) s.max_window_steps = get_int(doc, "max_window_steps");
    else s.max_window_steps = std::max(s.max_window_steps, s.window_steps);
    if (doc.contains("blowup_norm_p")) s.norm_p = get_exponent(doc, "blowup_norm_p");
    if (doc.contains("blowup_threshold")) s.blowup_threshold = get_number(doc, "blowup_threshold");
    if (doc.contains("record_interval")) s.record_interval = get_number(doc, "record_interval");
    if (doc.contains("sigma_shift")) s.sigma_shift = get_number(doc, "sigma_shift");
    if (doc.contains("eps_tail")) c.eps_tail = get_number(doc, "eps_tail");
    if (doc.contains("solver")) c.solver = get_string(doc, "solver");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.solver != "mild" && c.solver != "reference") throw ConfigError("solver must be 'mild' or 'reference'");
  if (!(c.eps_tail > 0.0 && c.eps_tail < 1.0)) throw ConfigError("eps_tail must lie in (0, 1)");
  if (c.mode == "pp" && !(c.tau > 0.0)) throw ConfigError("tau must be positive in the parabolic regime");
  try {
    c.solve.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const RunConfig& c) {
  json out;
  out["graph"] = c.graph.string();
  out["mode"] = c.mode;
  out["tau"] = c.tau;
  out["sigma"] = c.sigma;
  if (!c.preset.empty()) {
    out["nonlinearity"] = c.preset;
  } else {
    json n;
    for (auto [key, val] : {std::pair{"f1", &c.expressions.f1}, {"f2", &c.expressions.f2},
                            {"f3", &c.expressions.f3}, {"f", &c.expressions.f}})
      if (!val->empty()) n[key] = *val;
    n["parameters"] = c.expressions.parameters;
    n["mu1"] = c.expressions.mu1;
    n["mu2"] = c.expressions.mu2;
    out["nonlinearity"] = n;
  }
  out["chi"] = c.chi;
  out["k"] = c.k;
  out["l"] = c.l;
  out["m"] = c.m;
  out["eps"] = c.eps;
  out["u0"] = initial_to_json(c.u0);
  out["v0"] = initial_to_json(c.v0);
  out["dt"] = c.solve.dt;
  out["t_end"] = c.solve.t_end;
  out["mesh"] = c.solve.nodes_per_unit_length;
  out["picard_tol"] = c.solve.picard_tol;
  out["picard_max_iters"] = c.solve.picard_max_iters;
  out["window_steps"] = c.solve.window_steps;
  out["max_window_steps"] = c.solve.max_window_steps;
  if (std::isinf(c.solve.norm_p))
    out["blowup_norm_p"] = "inf";
  else
    out["blowup_norm_p"] = c.solve.norm_p;
  out["blowup_threshold"] = c.solve.blowup_threshold;
  out["record_interval"] = c.solve.record_interval;
  out["sigma_shift"] = c.solve.sigma_shift;
  out["eps_tail"] = c.eps_tail;
  out["solver"] = c.solver;
  return out;
}

Nonlinearity build_nonlinearity(const RunConfig& c) {
  const Regime regime = c.mode == "pe" ? Regime::ParabolicElliptic : Regime::ParabolicParabolic;
  try {
    if (c.preset.empty()) return make_from_expressions(c.expressions, regime, c.tau, c.sigma);
    if (c.preset == "heat") return make_heat(regime, c.tau, c.sigma);
    if (c.preset == "minimal") return make_minimal(c.chi, regime, c.tau, c.sigma);
    if (c.preset == "quadratic") return make_quadratic(c.chi, regime, c.tau, c.sigma);
    LogisticPreset lp;
    lp.chi = c.chi;
    lp.k = c.k;
    lp.l = c.l;
    lp.m = c.m;
    lp.eps = c.eps;
    return make_logistic(lp, regime, c.tau, c.sigma);
  } catch (const Error& e) {
    throw ConfigError(std::string("nonlinearity: ") + e.what());
  }
}

GridFunction build_initial(const InitialData& data, const std::shared_ptr<const Mesh>& mesh, const std::string& what) {
  const auto& g = mesh->graph();
  if (!data.file.empty()) {
    // {"edge id": [n_e + 1 node values], ...} in the mesh's edge layout
    const std::string text = read_text(data.file, "initial data file");
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError(what + ": '" + data.file + "' is not a JSON object");
    GridFunction out(mesh);
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
      const auto& id = g.edge(e).id;
      if (!doc.contains(id)) throw ConfigError(what + ": no values for edge '" + id + "'");
      const auto& arr = doc.at(id);
      if (!arr.is_array() || arr.size() != mesh->intervals(e) + 1)
        throw ConfigError(what + ": edge '" + id + "' needs " + std::to_string(mesh->intervals(e) + 1) +
                          " values at this mesh density");
      for (std::size_t j = 0; j < arr.size(); ++j) {
        if (!arr[j].is_number()) throw ConfigError(what + ": non-numeric value on edge '" + id + "'");
        out.at(e, j) = arr[j].get<double>();
      }
    }
    for (const auto& [k, _] : doc.items()) {
      try {
        (void)g.edge_index(k);
      } catch (const Error&) {
        throw ConfigError(what + ": unknown edge '" + k + "' in " + data.file);
      }
    }
    out.make_vertex_continuous();
    return out;
  }

  std::vector<Expression> per_edge;
  per_edge.reserve(g.edge_count());
  for (const auto& [k, _] : data.expressions) {
    if (k.empty()) continue;
    try {
      (void)g.edge_index(k);
    } catch (const Error&) {
      throw ConfigError(what + ": unknown edge '" + k + "'");
    }
  }
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
    auto it = data.expressions.find(g.edge(e).id);
    if (it == data.expressions.end()) it = data.expressions.find("");
    if (it == data.expressions.end()) throw ConfigError(what + ": no expression for edge '" + g.edge(e).id + "'");
    try {
      per_edge.push_back(Expression::parse(it->second, {"x", "L", "e"}));
    } catch (const Error& err) {
      throw ConfigError(what + ": " + err.what());
    }
  }
  auto out = GridFunction::sample(mesh, [&](EdgeIndex e, double x) {
    const double vars[3] = {x, g.length(e), static_cast<double>(e)};
    return per_edge[e](std::span<const double>(vars, 3));
  });
  out.make_vertex_continuous();
  return out;
}

}  // namespace ksg::cli
