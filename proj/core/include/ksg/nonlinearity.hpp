#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace ksg {

using ScalarField = std::function<double(double u, double v)>;

enum class Regime {
  ParabolicParabolic,  // tau v_t = v_xx + f3(u, v), tau > 0
  ParabolicElliptic,   // 0 = v_xx - sigma v + f(u)
};

/// Right-hand sides of
///   u_t = u_xx - d/dx (f1(u, v) v_x) + f2(u, v)
///   tau v_t = v_xx + f3(u, v)          (or 0 = v_xx - sigma v + f(u))
///
/// Derivatives and quotients are optional: when absent they are computed by
/// central differences and by division with a floored denominator.
struct Nonlinearity {
  std::string name;
  Regime regime = Regime::ParabolicParabolic;
  double tau = 1.0;
  /// Decay rate of the signal; only the elliptic regime reads it directly
  /// (f3 = -sigma v + f(u)), the parabolic one carries it inside f3.
  double sigma = 1.0;

  ScalarField f1, f2, f3;
  std::function<double(double)> f;  // elliptic source

  ScalarField df1_du, df1_dv;
  /// g1 = f1 / u, g2 = f2 / u, g3 = (d f1 / dv) / u.
  ScalarField g1, g2, g3;

  /// Growth exponents in |D f| <= C (1 + |u|^mu1 + |v|^mu2).
  double mu1 = 1.0;
  double mu2 = 0.0;
  double gamma() const noexcept { return mu1 + mu2; }

  /// f3 as a field in both regimes.
  double source(double u, double v) const { return regime == Regime::ParabolicElliptic ? -sigma * v + f(u) : f3(u, v); }

  double eval_df1_du(double u, double v) const;
  double eval_df1_dv(double u, double v) const;
  /// Quotients. `floored`, when given, is incremented each time a raw
  /// division had to clamp |u| up to 1e-12.
  double eval_g1(double u, double v, std::size_t* floored = nullptr) const;
  double eval_g2(double u, double v, std::size_t* floored = nullptr) const;
  double eval_g3(double u, double v, std::size_t* floored = nullptr) const;

  /// Throws InvalidArgument if fields are missing, tau/sigma/growth data are
  /// out of range, or f1, f2 do not vanish at u = 0 (the quotients would be
  /// unbounded there). The last check samples v in [-2, 2] and u near 0.
  void validate() const;
};

/// g(s) = k + l s - m |s|^eps s, or a user-supplied g.
struct LogisticPreset {
  double chi = 1.0;
  double k = 0.0;
  double l = 1.0;
  double m = 1.0;
  double eps = 1.0;
  std::function<double(double)> g;  // overrides the formula when set

  double eval_g(double s) const;
  /// Throws InvalidArgument unless k, l, m >= 0, eps > 0 and g(s) <= k + l s
  /// on a sampled grid of [0, 1e3].
  void validate() const;
};

/// Built-in models. f3 = u - sigma v in the parabolic regime, f(u) = u in the
/// elliptic one; chi multiplies u in f1.
///   heat       f1 = 0,        f2 = 0
///   minimal    f1 = chi u,    f2 = 0
///   logistic   f1 = chi u,    f2 = g(u)
///   quadratic  f1 = chi u,    f2 = u^2
Nonlinearity make_heat(Regime regime = Regime::ParabolicParabolic, double tau = 1.0, double sigma = 1.0);
Nonlinearity make_minimal(double chi, Regime regime = Regime::ParabolicParabolic, double tau = 1.0,
                          double sigma = 1.0);
Nonlinearity make_logistic(const LogisticPreset& preset, Regime regime = Regime::ParabolicParabolic,
                           double tau = 1.0, double sigma = 1.0);
Nonlinearity make_quadratic(double chi, Regime regime = Regime::ParabolicParabolic, double tau = 1.0,
                            double sigma = 1.0);

/// Fields given as expressions in u and v (f: in u only) with named
/// parameters. Missing f1/f2 default to 0, missing f3 to u - sigma v.
struct ExpressionSpec {
  std::string f1, f2, f3, f;
  std::map<std::string, double> parameters;
  double mu1 = 1.0;
  double mu2 = 0.0;
};
Nonlinearity make_from_expressions(const ExpressionSpec& spec, Regime regime, double tau, double sigma);

}  // namespace ksg
