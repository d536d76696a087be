#include <algorithm>
#include <cmath>
#include <string>

#include "ksg/diagnostics.hpp"
#include "ksg/error.hpp"
#include "solver_internal.hpp"

namespace ksg {

void SolverConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::InvalidArgument, std::string("solver config: ") + what);
  };
  need(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  need(t_end >= 0.0 && std::isfinite(t_end), "t_end must be >= 0");
  need(picard_tol > 0.0, "picard_tol must be positive");
  need(picard_max_iters >= 1, "picard_max_iters must be >= 1");
  need(nodes_per_unit_length > 0.0, "mesh density must be positive");
  need(blowup_threshold > 0.0, "blowup_threshold must be positive");
  need(norm_p >= 1.0, "norm p must be >= 1");
  need(sigma_shift >= 0.0, "sigma_shift must be >= 0");
  need(window_steps >= 1 && max_window_steps >= window_steps, "need 1 <= window_steps <= max_window_steps");
  need(record_interval >= 0.0, "record_interval must be >= 0");
}

GridFunction TimePath::at(double t) const {
  if (times.empty() || times.size() != values.size()) fail(ErrorKind::InvalidArgument, "empty or ragged time path");
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times.begin());
  const double a = times[j - 1], b = times[j];
  const double w = (t - a) / (b - a);
  if (w < 1e-12) return values[j - 1];
  if (w > 1.0 - 1e-12) return values[j];
  return (1.0 - w) * values[j - 1] + w * values[j];
}

BlowupCheck detect_blowup(const std::vector<double>& times, const std::vector<double>& norms, double threshold) {
  if (times.size() != norms.size() || times.size() < 3)
    fail(ErrorKind::InvalidArgument, "blow-up detection needs at least 3 samples");
  BlowupCheck out;
  if (!(norms.back() >= threshold)) return out;
  out.fired = true;
  // Fit 1/|u| = alpha + beta t over the last five samples; t_est is the zero.
  const std::size_t n = std::min<std::size_t>(5, times.size());
  double mt = 0, my = 0;
  for (std::size_t i = times.size() - n; i < times.size(); ++i) {
    mt += times[i];
    my += 1.0 / norms[i];
  }
  mt /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = times.size() - n; i < times.size(); ++i) {
    sxy += (times[i] - mt) * (1.0 / norms[i] - my);
    sxx += (times[i] - mt) * (times[i] - mt);
  }
  const double beta = sxx > 0 ? sxy / sxx : 0.0;
  out.t_est = beta < 0 ? mt - my / beta : times.back();
  return out;
}

namespace detail {

Recorder::Recorder(SolveResult& out, std::shared_ptr<const Mesh> mesh, const SolverConfig& cfg, bool has_v)
    : out_(out), mesh_(std::move(mesh)), cfg_(cfg), has_v_(has_v) {}

bool Recorder::push(double t, const Eigen::VectorXd& u, const Eigen::VectorXd* v, int iters, double factor,
                    double window, bool force) {
  GridFunction ug(mesh_, u, true);
  const double norm = lp_norm(ug, cfg_.norm_p);
  hist_t_.push_back(t);
  hist_norm_.push_back(norm);
  const bool blown = !(norm < cfg_.blowup_threshold);
  const bool due = cfg_.record_interval <= 0.0 || out_.times.empty() ||
                   t >= next_record_ - 1e-9 * cfg_.record_interval;
  if (!(due || force || blown)) return blown;
  if (cfg_.record_interval > 0.0) {
    while (next_record_ <= t + 1e-9 * cfg_.record_interval) next_record_ += cfg_.record_interval;
  }
  DiagnosticRecord d;
  d.t = t;
  d.mass_u = mass(ug);
  d.lp_u = norm;
  d.linf_u = u.cwiseAbs().maxCoeff();
  d.min_u = u.minCoeff();
  d.min_v = (has_v_ && v) ? v->minCoeff() : 0.0;
  d.picard_iters = iters;
  d.contraction_factor = factor;
  d.window_length = window;
  out_.times.push_back(t);
  out_.u_series.push_back(std::move(ug));
  if (has_v_ && v) out_.v_series.emplace_back(mesh_, *v, true);
  out_.diagnostics.push_back(d);
  return blown;
}

double Recorder::blowup_estimate() const {
  if (hist_t_.size() < 3) return hist_t_.empty() ? 0.0 : hist_t_.back();
  return detect_blowup(hist_t_, hist_norm_, 0.0).t_est;
}

namespace {

double distance(const WindowProblem& pb, const SolverConfig& cfg, const WindowFields& a, const WindowFields& b,
                double* scale) {
  double d = 0.0, s = 1.0;
  for (std::size_t i = 1; i < a.u.size(); ++i) {
    const GridFunction du(pb.mesh, a.u[i] - b.u[i], false);
    double di = lp_norm(du, cfg.norm_p);
    double si = lp_norm(GridFunction(pb.mesh, a.u[i], false), cfg.norm_p);
    if (pb.has_v && pb.v_in_distance) {
      di += w1p_norm(GridFunction(pb.mesh, a.v[i] - b.v[i], false), cfg.norm_p);
      si += w1p_norm(GridFunction(pb.mesh, a.v[i], false), cfg.norm_p);
    }
    d = std::max(d, di);
    s = std::max(s, si);
  }
  *scale = s;
  return d;
}

}  // namespace

SolveResult run_windows(const WindowProblem& pb, Eigen::VectorXd u0, Eigen::VectorXd v0, double t_start,
                        const SolverConfig& cfg) {
  cfg.validate();
  SolveResult out;
  Recorder rec(out, pb.mesh, cfg, pb.has_v);
  if (pb.signal) v0 = pb.signal(u0);
  rec.push(t_start, u0, pb.has_v ? &v0 : nullptr, 0, 0.0, 0.0, true);

  const double t_end = t_start + cfg.t_end;
  double t = t_start;
  double step = cfg.dt;
  int steps = cfg.window_steps;
  int streak = 0;
  while (t < t_end - 1e-12 * std::max(1.0, t_end)) {
    int halvings = 0;
    bool accepted = false;
    WindowFields cur;
    int iters = 0;
    double factor = 0.0;
    double h = step;
    int n = steps;
    while (!accepted) {
      const double remaining = t_end - t;
      const auto fit = static_cast<long>(std::floor(remaining / step + 1e-9));
      if (fit == 0) {
        h = remaining;
        n = 1;
      } else {
        h = step;
        n = static_cast<int>(std::min<long>(steps, fit));
      }

      cur.u.assign(static_cast<std::size_t>(n) + 1, u0);
      cur.v.assign(pb.has_v ? static_cast<std::size_t>(n) + 1 : 0, v0);
      double prev = 0.0;
      factor = 0.0;
      bool failed = false;
      for (iters = 1; iters <= cfg.picard_max_iters; ++iters) {
        WindowFields next = cur;
        pb.sweep(t, h, cur, next);
        double scale = 1.0;
        const double d = distance(pb, cfg, next, cur, &scale) / scale;
        cur = std::move(next);
        if (!std::isfinite(d)) {
          failed = true;
          break;
        }
        // Ratios near the tolerance are rounding noise.
        if (iters >= 2 && prev > 10.0 * cfg.picard_tol) factor = std::max(factor, d / prev);
        if (d <= cfg.picard_tol || cfg.picard_max_iters == 1) {
          accepted = true;
          break;
        }
        if (iters >= 3 && d > prev && factor >= 1.0) {
          failed = true;
          break;
        }
        prev = d;
      }
      if (accepted) break;
      (void)failed;
      iters = std::min(iters, cfg.picard_max_iters);
      if (++halvings > 6) {
        out.status = SolveStatus::PicardDiverged;
        out.failure_time = t;
        out.failure_iteration = iters;
        return out;
      }
      ++out.window_halvings;
      streak = 0;
      if (steps > 1)
        steps /= 2;
      else
        step /= 2.0;
    }

    ++out.windows;
    const double window = h * n;
    for (int i = 1; i <= n; ++i) {
      const double ti = (i == n) ? t + window : t + h * i;
      const bool last = i == n && ti >= t_end - 1e-12 * std::max(1.0, t_end);
      const auto ui = static_cast<std::size_t>(i);
      if (rec.push(ti, cur.u[ui], pb.has_v ? &cur.v[ui] : nullptr, iters, factor, window, last)) {
        out.status = SolveStatus::BlowUpDetected;
        out.blowup_time_estimate = rec.blowup_estimate();
        return out;
      }
    }
    t += window;
    u0 = cur.u.back();
    if (pb.has_v) v0 = cur.v.back();

    if (iters <= 3) {
      if (++streak >= 3) {
        streak = 0;
        if (step < cfg.dt)
          step = std::min(cfg.dt, 2.0 * step);
        else if (steps < cfg.max_window_steps)
          steps = std::min(cfg.max_window_steps, 2 * steps);
      }
    } else {
      streak = 0;
    }
  }
  return out;
}

}  // namespace detail

}  // namespace ksg
