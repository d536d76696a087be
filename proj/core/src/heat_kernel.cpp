#include "ksg/heat_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "ksg/error.hpp"

namespace ksg {

double gaussian_kernel(double t, double x) {
  if (!(t > 0.0)) fail(ErrorKind::NonpositiveTime, "gaussian kernel needs t > 0, got " + std::to_string(t));
  return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t);
}

double gaussian_kernel_dx(double t, double x) { return -x / (2.0 * t) * gaussian_kernel(t, x); }

double HeatKernelPlan::truncation_radius(const MetricGraph& g, double horizon, double eps_tail) {
  const double lp = g.longest_edge();
  const double lm = g.shortest_edge();
  const double deg = static_cast<double>(std::max<std::size_t>(1, g.max_degree()));
  const double combinatorial = (2.0 * lp * lp + 8.0 * horizon * std::log(deg) + 1.0) / (lm * lm);
  const double tail = lp + std::sqrt(8.0 * horizon * std::log(1.0 / eps_tail));
  return std::max({combinatorial * lm, tail, 2.0 * lp});
}

namespace {

struct State {
  double length;
  std::size_t edge;  // directed index
  double weight;
  bool operator>(const State& o) const { return length > o.length; }
};

}  // namespace

HeatKernelPlan::HeatKernelPlan(std::shared_ptr<const MetricGraph> graph, double horizon, double eps_tail,
                               std::uint64_t budget)
    : graph_(std::move(graph)), horizon_(horizon), eps_tail_(eps_tail) {
  if (!graph_) fail(ErrorKind::InvalidArgument, "plan needs a graph");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    fail(ErrorKind::NonpositiveTime, "plan horizon must be positive");
  if (!(eps_tail > 0.0 && eps_tail < 1.0)) fail(ErrorKind::InvalidArgument, "eps_tail must lie in (0, 1)");
  const MetricGraph& g = *graph_;
  radius_ = truncation_radius(g, horizon_, eps_tail_);

  const std::size_t nd = g.directed_edge_count();
  std::vector<std::vector<std::pair<std::size_t, double>>> succ(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    const DirectedEdge d = DirectedEdge::from_index(i);
    for (std::size_t j = 0; j < nd; ++j) {
      const double s = scattering_coefficient(g, d, DirectedEdge::from_index(j));
      if (s != 0.0) succ[i].push_back({j, s});
    }
  }

  // Dynamic programming over (directed edge, accumulated length): every path
  // prefix with the same end edge and the same |P| is merged into one state,
  // which is exactly the grouping of the path sum by Gaussian argument.
  records_.assign(nd * nd, {});
  std::uint64_t states = 0;
  std::vector<double> batch_weight(nd);
  std::vector<double> batch_length(nd);
  std::vector<char> batch_seen(nd);
  for (std::size_t d0 = 0; d0 < nd; ++d0) {
    std::priority_queue<State, std::vector<State>, std::greater<>> pq;
    pq.push({0.0, d0, 1.0});
    while (!pq.empty()) {
      const double l0 = pq.top().length;
      const double tol = 1e-11 * std::max(1.0, l0);
      std::fill(batch_seen.begin(), batch_seen.end(), 0);
      std::vector<std::size_t> touched;
      while (!pq.empty() && pq.top().length <= l0 + tol) {
        const State s = pq.top();
        pq.pop();
        if (!batch_seen[s.edge]) {
          batch_seen[s.edge] = 1;
          batch_weight[s.edge] = 0.0;
          batch_length[s.edge] = s.length;
          touched.push_back(s.edge);
        }
        batch_weight[s.edge] += s.weight;
      }
      std::sort(touched.begin(), touched.end());
      for (std::size_t d : touched) {
        const double w = batch_weight[d];
        const double len = batch_length[d];
        // Scattering matrices are orthogonal, so merged weights stay in [-1, 1];
        // anything this small is cancellation residue.
        if (std::abs(w) < 1e-15) continue;
        if (len > 0.0) records_[d0 * nd + d].push_back({len, w});
        const double next = len + g.length(DirectedEdge::from_index(d));
        if (next > radius_) continue;
        for (const auto& [j, s] : succ[d]) {
          if (++states > budget)
            fail(ErrorKind::PathBudgetExceeded, "more than " + std::to_string(budget) +
                                                    " path states below length " + std::to_string(radius_));
          pq.push({next, j, w * s});
        }
      }
    }
  }

  const std::size_t ne = g.edge_count();
  terms_.assign(ne * ne, {});
  for (EdgeIndex e = 0; e < ne; ++e) {
    for (EdgeIndex f = 0; f < ne; ++f) {
      auto& out = terms_[e * ne + f];
      if (e == f) out.push_back({0.0, 1.0, 1, 1});
      for (int sx : {1, -1}) {
        for (int sy : {1, -1}) {
          const DirectedEdge a{e, sx > 0};
          const DirectedEdge b{f, sy > 0};
          for (const KernelRecord& r : records_[a.index() * nd + b.index()])
            out.push_back({r.length, r.weight, sx, sy});
        }
      }
      std::stable_sort(out.begin(), out.end(), [](const Term& a, const Term& b) { return a.length < b.length; });
    }
  }
}

HeatKernelPlan::~HeatKernelPlan() = default;

std::span<const KernelRecord> HeatKernelPlan::records(DirectedEdge from, DirectedEdge to) const {
  graph_->edge(from.edge);
  graph_->edge(to.edge);
  return records_[from.index() * graph_->directed_edge_count() + to.index()];
}

std::size_t HeatKernelPlan::record_count() const noexcept {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.size();
  return n;
}

std::span<const HeatKernelPlan::Term> HeatKernelPlan::terms(EdgeIndex x_edge, EdgeIndex y_edge) const {
  graph_->edge(x_edge);
  graph_->edge(y_edge);
  return terms_[x_edge * graph_->edge_count() + y_edge];
}

void HeatKernelPlan::check_time(double t) const {
  if (!(t > 0.0) || t > horizon_ * (1.0 + 1e-12))
    fail(ErrorKind::TimeOutOfRange,
         "t = " + std::to_string(t) + " outside (0, " + std::to_string(horizon_) + "]");
}

namespace {

void check_point(const MetricGraph& g, const EdgePoint& p) {
  const double len = g.length(p.edge);
  if (!(p.xi >= -1e-12 * len && p.xi <= len * (1.0 + 1e-12)))
    fail(ErrorKind::InvalidArgument, "point coordinate " + std::to_string(p.xi) + " outside edge '" +
                                         g.edge(p.edge).id + "'");
}

double coord(int sign, double xi, double len) { return sign > 0 ? xi : len - xi; }

// Sums weight * g(arg) * factor(term) over all terms for the pair (x, y).
template <class G, class F>
double kernel_sum(const HeatKernelPlan& plan, double t, EdgePoint x, EdgePoint y, G g, F factor) {
  const MetricGraph& gr = plan.graph();
  check_point(gr, x);
  check_point(gr, y);
  const double lx = gr.length(x.edge);
  const double ly = gr.length(y.edge);
  double sum = 0.0;
  for (const auto& term : plan.terms(x.edge, y.edge)) {
    const double z = coord(term.sy, y.xi, ly) + term.length - coord(term.sx, x.xi, lx);
    sum += term.weight * factor(term) * g(t, z);
  }
  return sum;
}

}  // namespace

double eval_kernel(const HeatKernelPlan& plan, double t, EdgePoint x, EdgePoint y) {
  plan.check_time(t);
  return kernel_sum(plan, t, x, y, gaussian_kernel, [](const HeatKernelPlan::Term&) { return 1.0; });
}

double eval_kernel_dy(const HeatKernelPlan& plan, double t, EdgePoint x, EdgePoint y, bool* one_sided) {
  plan.check_time(t);
  if (one_sided) {
    const double len = plan.graph().length(y.edge);
    *one_sided = y.xi <= 0.0 || y.xi >= len;
  }
  return kernel_sum(plan, t, x, y, gaussian_kernel_dx,
                    [](const HeatKernelPlan::Term& term) { return static_cast<double>(term.sy); });
}

double eval_kernel_dx(const HeatKernelPlan& plan, double t, EdgePoint x, EdgePoint y) {
  plan.check_time(t);
  return kernel_sum(plan, t, x, y, gaussian_kernel_dx,
                    [](const HeatKernelPlan::Term& term) { return -static_cast<double>(term.sx); });
}

}  // namespace ksg
