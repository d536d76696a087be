#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ksg/error.hpp"
#include "ksg/graph.hpp"

namespace ksg {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where,
                const GraphParseOptions& options, std::vector<std::string>* warnings) {
  for (const auto& [key, _] : obj.items()) {
    if (allowed.count(key)) continue;
    const std::string msg = "unknown key '" + key + "' in " + where;
    if (!options.lenient) fail(ErrorKind::Parse, msg);
    if (warnings) warnings->push_back(msg);
  }
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    fail(ErrorKind::Parse, where + ": missing string field '" + key + "'");
  return it->get<std::string>();
}

}  // namespace

MetricGraph parse_graph_json(std::string_view text, const GraphParseOptions& options,
                             std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::Parse, "graph spec must be a JSON object");
  check_keys(doc, {"vertices", "edges"}, "graph spec", options, warnings);

  auto vit = doc.find("vertices");
  if (vit == doc.end() || !vit->is_array()) fail(ErrorKind::Parse, "missing array 'vertices'");
  std::vector<std::string> vertices;
  for (const json& v : *vit) {
    if (!v.is_string()) fail(ErrorKind::Parse, "vertex ids must be strings");
    vertices.push_back(v.get<std::string>());
  }

  auto eit = doc.find("edges");
  if (eit == doc.end() || !eit->is_array()) fail(ErrorKind::Parse, "missing array 'edges'");
  std::vector<EdgeSpec> edges;
  for (std::size_t i = 0; i < eit->size(); ++i) {
    const json& e = (*eit)[i];
    const std::string where = "edges[" + std::to_string(i) + "]";
    if (!e.is_object()) fail(ErrorKind::Parse, where + " must be an object");
    check_keys(e, {"id", "from", "to", "length"}, where, options, warnings);
    EdgeSpec spec;
    spec.id = require_string(e, "id", where);
    spec.from = require_string(e, "from", where);
    spec.to = require_string(e, "to", where);
    auto len = e.find("length");
    if (len == e.end() || !len->is_number()) fail(ErrorKind::Parse, where + ": missing number 'length'");
    spec.length = len->get<double>();
    edges.push_back(std::move(spec));
  }
  return MetricGraph(std::move(vertices), edges);
}

MetricGraph load_graph_file(const std::string& path, const GraphParseOptions& options,
                            std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Parse, "cannot open graph file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graph_json(buf.str(), options, warnings);
}

}  // namespace ksg
