#include "minmove/wasserstein1d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "minmove/numerics.hpp"

namespace minmove::w1d {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double jpow(double x, double p) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), p - 1.0), x); }

}  // namespace

// ---------------------------------------------------------------------------
// QuantileMeasure

double QuantileMeasure::mean() const { return q.mean(); }

double QuantileMeasure::variance() const {
  const double m = mean();
  return (q.array() - m).square().mean();
}

double QuantileMeasure::moment() const { return q.array().abs().pow(p).mean(); }

void QuantileMeasure::validate() const {
  if (q.size() == 0) throw InputError("quantile measure has no points");
  if (size() > kMaxGrid) throw InputError("quantile grid exceeds the cap of 4096 points");
  if (!(p > 1.0)) throw InputError("moment exponent p must be > 1");
  for (Eigen::Index i = 0; i < q.size(); ++i)
    if (!std::isfinite(q[i])) throw InputError("quantile values must be finite");
  for (Eigen::Index i = 0; i + 1 < q.size(); ++i) {
    if (q[i + 1] < q[i] - 1e-12 * (1.0 + std::abs(q[i])))
      throw InvariantError("quantiles are not non-decreasing at index " + std::to_string(i + 1));
  }
}

std::vector<double> QuantileMeasure::levels(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return t;
}

QuantileMeasure QuantileMeasure::gaussian(std::size_t n, double mean, double sd, double p) {
  QuantileMeasure mu;
  mu.p = p;
  mu.q.resize(static_cast<Eigen::Index>(n));
  const auto t = levels(n);
  for (std::size_t i = 0; i < n; ++i) mu.q[static_cast<Eigen::Index>(i)] = mean + sd * normal_quantile(t[i]);
  return mu;
}

QuantileMeasure QuantileMeasure::point_mass(std::size_t n, double at, double p) {
  return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), at), p};
}

QuantileMeasure QuantileMeasure::uniform(std::size_t n, double a, double b, double p) {
  QuantileMeasure mu;
  mu.p = p;
  mu.q.resize(static_cast<Eigen::Index>(n));
  const auto t = levels(n);
  for (std::size_t i = 0; i < n; ++i) mu.q[static_cast<Eigen::Index>(i)] = a + (b - a) * t[i];
  return mu;
}

double normal_quantile(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("normal_quantile: level must lie in (0,1)");
  // Acklam's rational approximation followed by Halley refinement on erfc.
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x = 0.0;
  if (theta < lo) {
    const double s = std::sqrt(-2.0 * std::log(theta));
    x = (((((c[0] * s + c[1]) * s + c[2]) * s + c[3]) * s + c[4]) * s + c[5]) /
        ((((d[0] * s + d[1]) * s + d[2]) * s + d[3]) * s + 1.0);
  } else if (theta <= 1.0 - lo) {
    const double s = theta - 0.5;
    const double r = s * s;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double s = std::sqrt(-2.0 * std::log(1.0 - theta));
    x = -(((((c[0] * s + c[1]) * s + c[2]) * s + c[3]) * s + c[4]) * s + c[5]) /
        ((((d[0] * s + d[1]) * s + d[2]) * s + d[3]) * s + 1.0);
  }
  for (int k = 0; k < 2; ++k) {
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - theta;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    x -= u / (1.0 + x * u / 2.0);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Energy ingredients

double Potential::value(double x) const {
  const double y = x - center;
  switch (kind) {
    case Kind::quadratic: return strength * y * y / 2.0;
    case Kind::power: return strength * std::pow(std::abs(y), exponent) / exponent;
    case Kind::double_well: return strength * std::pow(x * x - 1.0, 2) / 4.0;
  }
  return 0.0;
}

double Potential::derivative(double x) const {
  const double y = x - center;
  switch (kind) {
    case Kind::quadratic: return strength * y;
    case Kind::power: return strength * jpow(y, exponent);
    case Kind::double_well: return strength * (x * x * x - x);
  }
  return 0.0;
}

double Potential::second(double x) const {
  const double y = x - center;
  switch (kind) {
    case Kind::quadratic: return strength;
    case Kind::power: return strength * (exponent - 1.0) * std::pow(std::abs(y), exponent - 2.0);
    case Kind::double_well: return strength * (3.0 * x * x - 1.0);
  }
  return 0.0;
}

double Potential::argmin() const { return kind == Kind::double_well ? 1.0 : center; }

std::optional<double> Potential::lambda() const {
  switch (kind) {
    case Kind::quadratic: return strength;
    case Kind::power:
      if (exponent == 2.0) return strength;
      if (exponent > 2.0 && strength >= 0.0) return 0.0;
      return std::nullopt;
    case Kind::double_well: return -std::abs(strength);
  }
  return std::nullopt;
}

double InternalEnergy::F(double s) const {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::entropy: return s > 0.0 ? s * std::log(s) : 0.0;
    case Kind::power: return std::pow(s, m) / (m - 1.0);
  }
  return 0.0;
}

double InternalEnergy::L(double r) const {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::entropy: return r;
    case Kind::power: return std::pow(r, m);
  }
  return 0.0;
}

double InternalEnergy::dL(double r) const {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::entropy: return 1.0;
    case Kind::power: return m * std::pow(r, m - 1.0);
  }
  return 0.0;
}

double Interaction::value(double x) const {
  return kind == Kind::none ? 0.0 : std::pow(std::abs(x), exponent) / exponent;
}

double Interaction::derivative(double x) const { return kind == Kind::none ? 0.0 : jpow(x, exponent); }

double Interaction::second(double x) const {
  if (kind == Kind::none) return 0.0;
  if (exponent == 2.0) return 1.0;
  return (exponent - 1.0) * std::pow(std::abs(x), exponent - 2.0);
}

void EnergySpec::validate() const {
  if (!(c1 >= 0.0 && c2 >= 0.0 && c3 >= 0.0)) throw InputError("energy coefficients must be >= 0");
  if (!(c1 > 0.0 || c2 > 0.0))
    throw InputError("energy needs c1 > 0 or c2 > 0 (pure interaction is excluded)");
  if (F.kind == InternalEnergy::Kind::power && !(F.m > 1.0))
    throw InputError("power internal energy needs m > 1");
  if (W.kind == Interaction::Kind::power && !(W.exponent >= 1.0))
    throw InputError("interaction exponent must be >= 1");
  if (V.kind == Potential::Kind::power && !(V.exponent > 1.0))
    throw InputError("potential exponent must be > 1");
}

std::string EnergySpec::describe() const {
  std::ostringstream os;
  os << "c1=" << c1 << " c2=" << c2 << " c3=" << c3;
  return os.str();
}

// ---------------------------------------------------------------------------

double wp_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double p) {
  if (a.size() != b.size()) throw InputError("wp_distance: grid size mismatch");
  if (a.size() == 0) return 0.0;
  if (p == 2.0) return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
  return std::pow((a - b).array().abs().pow(p).mean(), 1.0 / p);
}

double wp_distance(const QuantileMeasure& a, const QuantileMeasure& b) {
  if (a.p != b.p) throw InputError("wp_distance: moment exponent mismatch");
  return wp_distance(a.q, b.q, a.p);
}

namespace {

bool uses_internal(const EnergySpec& s) { return s.c2 > 0.0 && s.F.kind != InternalEnergy::Kind::none; }
bool uses_interaction(const EnergySpec& s) { return s.c3 > 0.0 && s.W.kind != Interaction::Kind::none; }

void check_monotone(const Eigen::VectorXd& q) {
  for (Eigen::Index i = 0; i + 1 < q.size(); ++i) {
    if (q[i + 1] < q[i] - 1e-12 * (1.0 + std::abs(q[i])))
      throw InvariantError("quantiles are not non-decreasing at index " + std::to_string(i + 1));
  }
}

double energy_of(const EnergySpec& spec, const Eigen::VectorXd& q) {
  const auto n = q.size();
  const double nd = static_cast<double>(n);
  double v = 0.0;
  if (spec.c1 > 0.0) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += spec.V.value(q[i]);
    v += spec.c1 * s / nd;
  }
  if (uses_internal(spec)) {
    if (n < 2) return kInf;
    double s = 0.0;
    for (Eigen::Index c = 0; c + 1 < n; ++c) {
      const double w = q[c + 1] - q[c];
      if (!(w >= kMinCellWidth)) return kInf;
      s += spec.F.F(1.0 / (nd * w)) * w;
    }
    v += spec.c2 * s;
  }
  if (uses_interaction(spec)) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) row += spec.W.value(q[i] - q[j]);
      s += row;
    }
    v += spec.c3 * s / (2.0 * nd * nd);
  }
  return v;
}

FieldEvaluation field_of(const EnergySpec& spec, const Eigen::VectorXd& q) {
  const auto n = q.size();
  const double nd = static_cast<double>(n);
  FieldEvaluation out;
  out.field = Eigen::VectorXd::Zero(n);
  if (spec.c1 > 0.0)
    for (Eigen::Index i = 0; i < n; ++i) out.field[i] += spec.c1 * spec.V.derivative(q[i]);
  if (uses_internal(spec) && n >= 2) {
    Eigen::VectorXd L = Eigen::VectorXd::Zero(n + 1);  // L[c+1] belongs to cell (c, c+1)
    for (Eigen::Index c = 0; c + 1 < n; ++c) {
      const double w = q[c + 1] - q[c];
      if (w >= kMinCellWidth) {
        L[c + 1] = spec.F.L(1.0 / (nd * w));
      } else {
        out.mass_deficit += 1.0 / nd;
        ++out.excluded_cells;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) out.field[i] += spec.c2 * nd * (L[i + 1] - L[i]);
  }
  if (uses_interaction(spec)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += spec.W.derivative(q[i] - q[j]);
      out.field[i] += spec.c3 * s / nd;
    }
  }
  return out;
}

double lp_mean_norm(const Eigen::VectorXd& f, double r) {
  if (f.size() == 0) return 0.0;
  if (r == 2.0) return std::sqrt(f.squaredNorm() / static_cast<double>(f.size()));
  return std::pow(f.array().abs().pow(r).mean(), 1.0 / r);
}

}  // namespace

double energy_eval(const EnergySpec& spec, const QuantileMeasure& mu) {
  mu.validate();
  return energy_of(spec, mu.q);
}

FieldEvaluation velocity_field(const EnergySpec& spec, const QuantileMeasure& mu) {
  mu.validate();
  return field_of(spec, mu.q);
}

double wasserstein_slope(const EnergySpec& spec, const QuantileMeasure& mu) {
  return lp_mean_norm(velocity_field(spec, mu).field, numerics::dual_exponent(mu.p));
}

// ---------------------------------------------------------------------------
// JKO step

namespace {

struct JkoProblem {
  const EnergySpec& spec;
  const Eigen::VectorXd& prev;
  double tau;
  double p;

  double value(const Eigen::VectorXd& q) const {
    const double e = energy_of(spec, q);
    if (!std::isfinite(e)) return e;
    const double mov = (q - prev).array().abs().pow(p).mean() / (p * std::pow(tau, p - 1.0));
    return mov + e;
  }

  // N times the gradient of the step functional.
  Eigen::VectorXd field(const Eigen::VectorXd& q) const {
    Eigen::VectorXd g = field_of(spec, q).field;
    const double scale = 1.0 / std::pow(tau, p - 1.0);
    for (Eigen::Index i = 0; i < q.size(); ++i) g[i] += scale * jpow(q[i] - prev[i], p);
    return g;
  }

  // Projected gradient: within blocks of tied quantiles the admissible descent
  // directions are non-decreasing, so project -G there by isotonic regression.
  double residual(const Eigen::VectorXd& q, const Eigen::VectorXd& g) const {
    const auto n = q.size();
    Eigen::VectorXd proj(n);
    Eigen::Index start = 0;
    while (start < n) {
      Eigen::Index end = start + 1;
      while (end < n && q[end] - q[end - 1] <= 1e-14 * (1.0 + std::abs(q[end]))) ++end;
      const Eigen::VectorXd block = -g.segment(start, end - start);
      proj.segment(start, end - start) = numerics::isotonic_projection(block);
      start = end;
    }
    return lp_mean_norm(proj, numerics::dual_exponent(p));
  }

  // Tridiagonal model of the Hessian of N times the step functional.
  void model(const Eigen::VectorXd& q, Eigen::VectorXd& diag, Eigen::VectorXd& off) const {
    const auto n = q.size();
    const double nd = static_cast<double>(n);
    diag = Eigen::VectorXd::Zero(n);
    off = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0));
    const double tp = std::pow(tau, p - 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = std::max(std::abs(q[i] - prev[i]), 1e-8);
      diag[i] += (p - 1.0) * std::pow(d, p - 2.0) / tp;
      if (spec.c1 > 0.0) diag[i] += spec.c1 * std::max(spec.V.second(q[i]), 0.0);
    }
    if (uses_internal(spec)) {
      for (Eigen::Index c = 0; c + 1 < n; ++c) {
        const double w = q[c + 1] - q[c];
        if (!(w >= kMinCellWidth)) continue;
        const double rho = 1.0 / (nd * w);
        const double k = spec.c2 * nd * nd * spec.F.dL(rho) * rho * rho;
        diag[c] += k;
        diag[c + 1] += k;
        off[c] -= k;
      }
    }
    if (uses_interaction(spec)) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) s += spec.W.second(q[i] - q[j]);
        diag[i] += spec.c3 * s / nd;
      }
    }
    const double floor = 1e-10 * (1.0 + diag.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) diag[i] = std::max(diag[i], floor);
  }
};

}  // namespace

ProxResult jko_step(const EnergySpec& spec, const QuantileMeasure& prev, double tau,
                    const JkoOptions& options) {
  spec.validate();
  prev.validate();
  if (!(tau > 0.0)) throw DomainError("jko_step: step must be positive");
  const double p = prev.p;
  JkoProblem prob{spec, prev.q, tau, p};
  const double nd = static_cast<double>(prev.size());

  Eigen::VectorXd q = numerics::isotonic_projection(prev.q);
  double val = prob.value(q);
  if (!std::isfinite(val)) throw DomainError("jko_step: phi(mu_prev) is not finite");
  Eigen::VectorXd g = prob.field(q);
  double res = prob.residual(q, g);

  ProxResult out;
  int it = 0;
  for (; it < options.max_iterations && res > options.tolerance; ++it) {
    Eigen::VectorXd diag, off;
    prob.model(q, diag, off);
    const Eigen::VectorXd newton = -numerics::solve_tridiagonal(diag, off, g);
    const Eigen::VectorXd gradient = -g.cwiseQuotient(diag);

    bool accepted = false;
    for (const Eigen::VectorXd* dir : {&newton, &gradient}) {
      double s = 1.0;
      for (int ls = 0; ls < 50; ++ls, s *= 0.5) {
        const Eigen::VectorXd trial = numerics::isotonic_projection(q + s * *dir);
        const double tv = prob.value(trial);
        if (!std::isfinite(tv)) continue;
        const double decrease = g.dot(trial - q) / nd;
        const bool armijo = tv <= val + 1e-4 * decrease;
        const bool flat = tv <= val + 1e-14 * (1.0 + std::abs(val));
        if (!armijo && !flat) continue;
        const Eigen::VectorXd tg = prob.field(trial);
        const double tr = prob.residual(trial, tg);
        if (armijo || tr < res) {
          q = trial;
          val = tv;
          g = tg;
          res = tr;
          accepted = true;
          break;
        }
      }
      if (accepted) break;
    }
    if (!accepted) break;
  }
  out.state = std::move(q);
  out.residual = res;
  out.iterations = it;
  out.converged = res <= options.tolerance;
  return out;
}

// ---------------------------------------------------------------------------
// Gibbs measure

namespace {

constexpr std::array<double, 8> kGlNodes{-0.9602898564975363, -0.7966664774136267,
                                         -0.5255324099163290, -0.1834346424956498,
                                         0.1834346424956498,  0.5255324099163290,
                                         0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights{0.1012285362903763, 0.2223810344533745,
                                           0.3137066458778873, 0.3626837833783620,
                                           0.3626837833783620, 0.3137066458778873,
                                           0.2223810344533745, 0.1012285362903763};

template <class Fn>
double gauss_legendre(const Fn& f, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t k = 0; k < kGlNodes.size(); ++k) s += kGlWeights[k] * f(mid + half * kGlNodes[k]);
  return s * half;
}

}  // namespace

QuantileMeasure gibbs_stationary(const EnergySpec& spec, std::size_t n, double p) {
  if (spec.c3 != 0.0 || spec.F.kind != InternalEnergy::Kind::entropy || !(spec.c1 > 0.0) ||
      !(spec.c2 > 0.0))
    throw DomainError("gibbs_stationary needs c3 = 0, entropy, c1 > 0 and c2 > 0");
  if (n == 0 || n > kMaxGrid) throw InputError("gibbs_stationary: bad grid size");
  const double ratio = spec.c1 / spec.c2;
  const double xm = spec.V.argmin();
  const double umin = ratio * spec.V.value(xm);
  auto density = [&](double x) { return std::exp(-(ratio * spec.V.value(x) - umin)); };

  // Expand the bracket until the density has fallen below exp(-745) (double underflow).
  auto expand = [&](double dir) {
    double w = 1.0;
    while (!(ratio * spec.V.value(xm + dir * w) - umin >= 745.0)) {
      w *= 2.0;
      if (w > 1e8) throw DomainError("gibbs_stationary: exp(-c1 V / c2) is not integrable");
    }
    return xm + dir * w;
  };
  const double a = expand(-1.0);
  const double b = expand(1.0);

  constexpr std::size_t kPanels = 8192;
  const double hw = (b - a) / static_cast<double>(kPanels);
  std::vector<double> cum(kPanels + 1, 0.0);
  for (std::size_t k = 0; k < kPanels; ++k) {
    const double x0 = a + hw * static_cast<double>(k);
    cum[k + 1] = cum[k] + gauss_legendre(density, x0, x0 + hw);
  }
  const double z = cum.back();

  QuantileMeasure mu;
  mu.p = p;
  mu.q.resize(static_cast<Eigen::Index>(n));
  const auto levels = QuantileMeasure::levels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = levels[i] * z;
    auto kit = std::upper_bound(cum.begin(), cum.end(), target);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(kit - cum.begin() - 1, 0));
    k = std::min(k, kPanels - 1);
    double lo = a + hw * static_cast<double>(k), hi = lo + hw;
    const double base = cum[k];
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
      const double fx = base + gauss_legendre(density, a + hw * static_cast<double>(k), x) - target;
      if (fx > 0.0) hi = x; else lo = x;
      const double dx = density(x);
      double xn = dx > 0.0 ? x - fx / dx : 0.5 * (lo + hi);
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
      if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(x))) {
        x = xn;
        break;
      }
      x = xn;
    }
    mu.q[static_cast<Eigen::Index>(i)] = x;
  }
  return mu;
}

// ---------------------------------------------------------------------------
// Weak-form PDE residual

PdeResidualReport pde_residual(const EnergySpec& spec, const std::vector<double>& times,
                               const std::vector<QuantileMeasure>& states, double p) {
  if (times.size() != states.size()) throw InputError("pde_residual: times and states misaligned");
  if (states.size() < 3) throw InputError("pde_residual: needs at least three time samples");
  for (const auto& s : states) {
    if (s.size() != states.front().size()) throw InputError("pde_residual: grid size mismatch");
    s.validate();
  }
  PdeResidualReport rep;
  for (int c = -3; c <= 3; ++c) rep.test_centers.push_back(static_cast<double>(c));
  const double r = rep.test_radius;
  auto psi = [r](double x, double c) {
    const double s = (x - c) / r;
    return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
  };
  auto dpsi = [r](double x, double c) {
    const double s = (x - c) / r;
    if (!(std::abs(s) < 1.0)) return 0.0;
    const double den = 1.0 - s * s;
    return std::exp(1.0 - 1.0 / den) * (-2.0 * s / (den * den)) / r;
  };
  const double pd = numerics::dual_exponent(p);
  auto integral = [&](const QuantileMeasure& mu, double c) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.q.size(); ++i) s += psi(mu.q[i], c);
    return s / static_cast<double>(mu.q.size());
  };
  for (std::size_t n = 1; n + 1 < states.size(); ++n) {
    const double dt = times[n + 1] - times[n - 1];
    if (!(dt > 0.0)) throw InputError("pde_residual: times must be strictly increasing");
    const Eigen::VectorXd f = field_of(spec, states[n].q).field;
    for (std::size_t k = 0; k < rep.test_centers.size(); ++k) {
      const double c = rep.test_centers[k];
      const double dpsi_dt = (integral(states[n + 1], c) - integral(states[n - 1], c)) / dt;
      double flux = 0.0;
      for (Eigen::Index i = 0; i < f.size(); ++i) flux += dpsi(states[n].q[i], c) * jpow(f[i], pd);
      flux /= static_cast<double>(f.size());
      const double res = std::abs(dpsi_dt + flux);
      if (res > rep.max_residual) {
        rep.max_residual = res;
        rep.worst_time = n;
        rep.worst_test = k;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Backend

Wasserstein1DBackend::Wasserstein1DBackend(EnergySpec spec, std::size_t n, double p)
    : spec_(spec), n_(n), p_(p) {
  spec_.validate();
  if (n_ == 0 || n_ > kMaxGrid) throw InputError("wasserstein grid size must lie in [1, 4096]");
  if (!(p_ > 1.0)) throw InputError("moment exponent p must be > 1");
  const bool gibbs = spec_.c3 == 0.0 && spec_.F.kind == InternalEnergy::Kind::entropy &&
                     spec_.c1 > 0.0 && spec_.c2 > 0.0 && spec_.V.kind != Potential::Kind::double_well;
  if (gibbs) {
    try {
      const auto seed = gibbs_stationary(spec_, n_, p_);
      minimizer_ = critical_point(seed.q, 1e-10, 60);
    } catch (const DomainError&) {
      minimizer_.reset();
    }
  }
}

std::string Wasserstein1DBackend::describe() const {
  std::ostringstream os;
  os << "wasserstein1d N=" << n_ << " p=" << p_ << " " << spec_.describe();
  return os.str();
}

double Wasserstein1DBackend::distance(const State& u, const State& v) const {
  return wp_distance(u, v, p_);
}

double Wasserstein1DBackend::energy(const State& u) const {
  check_monotone(u);
  return energy_of(spec_, u);
}

double Wasserstein1DBackend::slope(const State& u) const {
  check_monotone(u);
  return lp_mean_norm(field_of(spec_, u).field, numerics::dual_exponent(p_));
}

ProxResult Wasserstein1DBackend::prox(const State& prev, double step, double p,
                                      const ProxOptions& options) const {
  JkoOptions jo;
  jo.tolerance = options.tolerance;
  jo.max_iterations = options.max_iterations;
  return jko_step(spec_, QuantileMeasure{prev, p}, step, jo);
}

std::optional<ConvexityCertificate> Wasserstein1DBackend::convexity() const {
  if (p_ != 2.0) return std::nullopt;
  const auto lv = spec_.V.lambda();
  if (!lv) return std::nullopt;
  // Entropy, power internal energies and convex interactions are displacement convex in 1D.
  return ConvexityCertificate{spec_.c1 * *lv, 2.0};
}

State Wasserstein1DBackend::perturb(const State& u, double radius, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  const double m = u.mean();
  const double sd = std::max(std::sqrt((u.array() - m).square().mean()), 1e-3);
  Eigen::VectorXd dir;
  double nd = 0.0;
  while (nd == 0.0) {
    const double a = normal(rng), b = normal(rng), c = normal(rng);
    dir = (a + b * ((u.array() - m) / sd) + c * ((u.array() - m) / sd).sin()).matrix();
    nd = lp_mean_norm(dir, p_);
  }
  return project(u + radius / nd * dir);
}

State Wasserstein1DBackend::project(const State& u) const { return numerics::isotonic_projection(u); }

State Wasserstein1DBackend::embed_sample(const State& center, double radius,
                                         std::span<const double> unit_coords) const {
  const double c0 = unit_coords[0], c1 = unit_coords.size() > 1 ? unit_coords[1] : 0.0;
  const double m = center.mean();
  Eigen::VectorXd z = (center.array() - m).matrix();
  const double nz = lp_mean_norm(z, p_);
  if (nz > 0.0) z /= nz;
  const Eigen::VectorXd dir = (c0 + c1 * z.array()).matrix();
  const double nd = lp_mean_norm(dir, p_);
  if (nd == 0.0) return center;
  return project(center + radius * std::max(std::abs(c0), std::abs(c1)) / nd * dir);
}

std::optional<State> Wasserstein1DBackend::critical_point(const State& seed, double tolerance,
                                                          int max_iterations) const {
  State q = project(seed);
  if (!std::isfinite(energy_of(spec_, q))) return std::nullopt;
  double tau = 0.1;
  JkoOptions jo;
  jo.tolerance = 0.1 * tolerance;
  for (int it = 0; it < max_iterations; ++it) {
    if (slope(q) <= tolerance) return q;
    const ProxResult r = jko_step(spec_, QuantileMeasure{q, p_}, tau, jo);
    q = r.state;
    tau = std::min(tau * 10.0, 1e8);
  }
  if (slope(q) <= tolerance) return q;
  return std::nullopt;
}

}  // namespace minmove::w1d
