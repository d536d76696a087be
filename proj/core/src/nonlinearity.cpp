#include "ksg/nonlinearity.hpp"

#include <cmath>
#include <string>

#include "ksg/error.hpp"
#include "ksg/expression.hpp"

namespace ksg {

namespace {

double diff_u(const ScalarField& f, double u, double v) {
  const double h = 1e-6 * (1.0 + std::abs(u));
  return (f(u + h, v) - f(u - h, v)) / (2.0 * h);
}

double diff_v(const ScalarField& f, double u, double v) {
  const double h = 1e-6 * (1.0 + std::abs(v));
  return (f(u, v + h) - f(u, v - h)) / (2.0 * h);
}

double quotient(double num, double u, std::size_t* floored) {
  constexpr double floor = 1e-12;
  if (std::abs(u) >= floor) return num / u;
  if (floored) ++*floored;
  return num / (u < 0.0 ? -floor : floor);
}

}  // namespace

double Nonlinearity::eval_df1_du(double u, double v) const { return df1_du ? df1_du(u, v) : diff_u(f1, u, v); }
double Nonlinearity::eval_df1_dv(double u, double v) const { return df1_dv ? df1_dv(u, v) : diff_v(f1, u, v); }

double Nonlinearity::eval_g1(double u, double v, std::size_t* floored) const {
  return g1 ? g1(u, v) : quotient(f1(u, v), u, floored);
}
double Nonlinearity::eval_g2(double u, double v, std::size_t* floored) const {
  return g2 ? g2(u, v) : quotient(f2(u, v), u, floored);
}
double Nonlinearity::eval_g3(double u, double v, std::size_t* floored) const {
  return g3 ? g3(u, v) : quotient(eval_df1_dv(u, v), u, floored);
}

void Nonlinearity::validate() const {
  if (!f1 || !f2) fail(ErrorKind::InvalidArgument, "nonlinearity '" + name + "' needs f1 and f2");
  if (regime == Regime::ParabolicParabolic) {
    if (!f3) fail(ErrorKind::InvalidArgument, "nonlinearity '" + name + "' needs f3");
    if (!(tau > 0.0)) fail(ErrorKind::InvalidArgument, "parabolic-parabolic regime needs tau > 0");
  } else {
    if (!f) fail(ErrorKind::InvalidArgument, "parabolic-elliptic regime needs f(u)");
    if (!(sigma > 0.0)) fail(ErrorKind::InvalidArgument, "parabolic-elliptic regime needs sigma > 0");
  }
  if (!(mu1 >= 0.0 && mu2 >= 0.0 && gamma() >= 1.0))
    fail(ErrorKind::InvalidArgument, "growth exponents need mu1, mu2 >= 0 and mu1 + mu2 >= 1");

  // f_k(u, v) / u must stay bounded as u -> 0: compare the quotient at two
  // small u against the slope scale.
  for (double v = -2.0; v <= 2.0; v += 0.5) {
    for (const auto* fk : {&f1, &f2}) {
      const double a = (*fk)(1e-6, v) / 1e-6;
      const double b = (*fk)(1e-8, v) / 1e-8;
      const double z = (*fk)(0.0, v);
      if (!std::isfinite(a) || !std::isfinite(b) || std::abs(z) > 1e-12 ||
          std::abs(a - b) > 1e-3 * (1.0 + std::abs(a)))
        fail(ErrorKind::InvalidArgument, std::string("nonlinearity '") + name + "': " +
                                             (fk == &f1 ? "f1" : "f2") +
                                             " must vanish to first order at u = 0 (its quotient by u is unbounded)");
    }
  }
}

double LogisticPreset::eval_g(double s) const {
  if (g) return g(s);
  return k + l * s - m * std::pow(std::abs(s), eps) * s;
}

void LogisticPreset::validate() const {
  if (!(k >= 0.0 && l >= 0.0 && m >= 0.0)) fail(ErrorKind::InvalidArgument, "logistic k, l, m must be >= 0");
  if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "logistic eps must be > 0");
  for (int i = 0; i <= 10000; ++i) {
    const double s = 1e3 * i / 10000.0;
    const double gs = eval_g(s);
    if (!(gs <= k + l * s + 1e-12 * (1.0 + std::abs(k + l * s))))
      fail(ErrorKind::InvalidArgument, "logistic g(" + std::to_string(s) + ") = " + std::to_string(gs) +
                                           " exceeds k + l s");
  }
}

namespace {

Nonlinearity base(std::string name, Regime regime, double tau, double sigma) {
  Nonlinearity n;
  n.name = std::move(name);
  n.regime = regime;
  n.tau = regime == Regime::ParabolicParabolic ? tau : 0.0;
  n.sigma = sigma;
  n.f3 = [sigma](double u, double v) { return u - sigma * v; };
  n.f = [](double u) { return u; };
  return n;
}

void set_chemotaxis(Nonlinearity& n, double chi) {
  n.f1 = [chi](double u, double) { return chi * u; };
  n.df1_du = [chi](double, double) { return chi; };
  n.df1_dv = [](double, double) { return 0.0; };
  n.g1 = [chi](double, double) { return chi; };
  n.g3 = [](double, double) { return 0.0; };
}

}  // namespace

Nonlinearity make_heat(Regime regime, double tau, double sigma) {
  Nonlinearity n = base("heat", regime, tau, sigma);
  set_chemotaxis(n, 0.0);
  n.f2 = [](double, double) { return 0.0; };
  n.g2 = [](double, double) { return 0.0; };
  n.validate();
  return n;
}

Nonlinearity make_minimal(double chi, Regime regime, double tau, double sigma) {
  Nonlinearity n = base("minimal", regime, tau, sigma);
  set_chemotaxis(n, chi);
  n.f2 = [](double, double) { return 0.0; };
  n.g2 = [](double, double) { return 0.0; };
  n.validate();
  return n;
}

Nonlinearity make_logistic(const LogisticPreset& preset, Regime regime, double tau, double sigma) {
  preset.validate();
  Nonlinearity n = base("logistic", regime, tau, sigma);
  set_chemotaxis(n, preset.chi);
  n.f2 = [preset](double u, double) { return preset.eval_g(u); };
  if (!preset.g) {
    const double l = preset.l, m = preset.m, eps = preset.eps;
    n.g2 = [l, m, eps](double u, double) { return l - m * std::pow(std::abs(u), eps); };
    n.mu1 = 1.0 + eps;
  }
  n.validate();
  return n;
}

Nonlinearity make_quadratic(double chi, Regime regime, double tau, double sigma) {
  Nonlinearity n = base("quadratic", regime, tau, sigma);
  set_chemotaxis(n, chi);
  n.f2 = [](double u, double) { return u * u; };
  n.g2 = [](double u, double) { return u; };
  n.mu1 = 2.0;
  n.validate();
  return n;
}

Nonlinearity make_from_expressions(const ExpressionSpec& spec, Regime regime, double tau, double sigma) {
  Nonlinearity n = base("expression", regime, tau, sigma);
  std::map<std::string, double> params = spec.parameters;
  params.emplace("sigma", sigma);
  params.emplace("tau", tau);
  auto field = [&](const std::string& text, const char* fallback) -> ScalarField {
    const auto e = Expression::parse(text.empty() ? fallback : text, {"u", "v"}, params);
    return [e](double u, double v) { return e(u, v); };
  };
  n.f1 = field(spec.f1, "0");
  n.f2 = field(spec.f2, "0");
  n.f3 = field(spec.f3, "u - sigma * v");
  if (!spec.f.empty()) {
    const auto e = Expression::parse(spec.f, {"u"}, params);
    n.f = [e](double u) { return e(std::span<const double>(&u, 1)); };
  }
  n.mu1 = spec.mu1;
  n.mu2 = spec.mu2;
  n.validate();
  return n;
}

}  // namespace ksg
