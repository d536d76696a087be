#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ksg/graph.hpp"
#include "ksg/mesh.hpp"

namespace ksg::testing {

inline std::shared_ptr<const MetricGraph> make_graph(std::vector<std::string> vertices,
                                                     std::vector<EdgeSpec> edges) {
  return std::make_shared<const MetricGraph>(std::move(vertices), edges);
}

inline std::shared_ptr<const MetricGraph> interval(double len = 1.0) {
  return make_graph({"v1", "v2"}, {{"e", "v1", "v2", len}});
}

// Edges point from the centre outwards unless `inward`.
inline std::shared_ptr<const MetricGraph> star(std::vector<double> lengths, bool inward = false) {
  std::vector<std::string> v{"c"};
  std::vector<EdgeSpec> e;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const std::string leaf = "l" + std::to_string(i);
    v.push_back(leaf);
    if (inward)
      e.push_back({"e" + std::to_string(i), leaf, "c", lengths[i]});
    else
      e.push_back({"e" + std::to_string(i), "c", leaf, lengths[i]});
  }
  return make_graph(v, e);
}

inline std::shared_ptr<const MetricGraph> star3() { return star({1.0, 1.0, 1.0}); }

// Triangle a-b-c with a pendant edge c-d; all edges length 1.
inline std::shared_ptr<const MetricGraph> cycle_with_pendant() {
  return make_graph({"a", "b", "c", "d"},
                    {{"ab", "a", "b", 1.0}, {"bc", "b", "c", 1.0}, {"ca", "c", "a", 1.0}, {"cd", "c", "d", 1.0}});
}

inline double gauss(double t, double x) {
  return std::exp(-x * x / (4 * t)) / std::sqrt(4 * std::numbers::pi * t);
}

// Neumann kernel on [0, L] by images.
inline double images_kernel(double t, double x, double y, double len = 1.0, int terms = 60) {
  double s = 0.0;
  for (int n = -terms; n <= terms; ++n) s += gauss(t, y - x + 2 * n * len) + gauss(t, y + x + 2 * n * len);
  return s;
}

// Smooth bump exp(-((xi - c)/w)^2) on one edge, zero elsewhere.
inline GridFunction bump(std::shared_ptr<const Mesh> mesh, EdgeIndex edge, double centre, double width,
                         double amplitude = 1.0) {
  return GridFunction::sample(std::move(mesh), [=](EdgeIndex e, double xi) {
    if (e != edge) return 0.0;
    const double z = (xi - centre) / width;
    return amplitude * std::exp(-z * z);
  });
}

// Random smooth data: a few bumps at random mid-edge positions. Widths stay
// small enough that values and derivatives vanish at every vertex to 1e-14.
inline GridFunction random_smooth(std::shared_ptr<const Mesh> mesh, std::mt19937_64& rng, int count = 4) {
  const MetricGraph& g = mesh->graph();
  std::uniform_int_distribution<std::size_t> pick(0, g.edge_count() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GridFunction u(mesh);
  for (int k = 0; k < count; ++k) {
    const EdgeIndex e = pick(rng);
    const double len = g.length(e);
    const double w = 0.06 * len;
    const double c = len * (0.4 + 0.2 * unit(rng));
    u += bump(mesh, e, c, w, 0.5 + unit(rng));
  }
  u.set_vertex_continuous(true);
  return u;
}

inline double max_abs_diff(const GridFunction& a, const GridFunction& b) {
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

}  // namespace ksg::testing
