#include "minmove/banach.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "minmove/numerics.hpp"

namespace minmove {

namespace {

double signed_pow(double x, double e) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), e), x); }

double weight_of(double s) { return 1.0 + s * s / (1.0 + s * s); }

}  // namespace

PNormSpace PNormSpace::euclidean(std::size_t n, double p) {
  PNormSpace sp;
  sp.n = n;
  sp.p = p;
  return sp;
}

void PNormSpace::validate() const {
  if (n == 0) throw InputError("banach space dimension must be >= 1");
  if (!(q_norm > 1.0) || !std::isfinite(q_norm)) throw InputError("q_norm must lie in (1, inf)");
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("flow exponent p must lie in (1, inf)");
  if (!(cell_volume > 0.0)) throw InputError("cell volume must be positive");
}

Eigen::VectorXd PNormSpace::weights(const State& anchor) const {
  if (!finsler) return reference_weights();
  Eigen::VectorXd w(anchor.size());
  for (Eigen::Index i = 0; i < anchor.size(); ++i) w[i] = weight_of(anchor[i]);
  return w;
}

double PNormSpace::norm(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const {
  if (q_norm == 2.0) return std::sqrt(cell_volume * (w.array() * v.array().square()).sum());
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += w[i] * cell_volume * std::pow(std::abs(v[i]), q_norm);
  return std::pow(s, 1.0 / q_norm);
}

double PNormSpace::dual_norm(const Eigen::VectorXd& xi, const Eigen::VectorXd& w) const {
  if (q_norm == 2.0) return std::sqrt((xi.array().square() / (w.array() * cell_volume)).sum());
  const double qd = numerics::dual_exponent(q_norm);
  double s = 0.0;
  for (Eigen::Index i = 0; i < xi.size(); ++i)
    s += std::pow(w[i] * cell_volume, 1.0 - qd) * std::pow(std::abs(xi[i]), qd);
  return std::pow(s, 1.0 / qd);
}

Eigen::VectorXd jp_dual(const PNormSpace& sp, const Eigen::VectorXd& v, double p,
                        const Eigen::VectorXd& w) {
  const double nv = sp.norm(v, w);
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(v.size());
  if (nv == 0.0) return xi;
  const double scale = std::pow(nv, p - sp.q_norm);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    xi[i] = scale * w[i] * sp.cell_volume * signed_pow(v[i], sp.q_norm - 1.0);
  return xi;
}

Eigen::VectorXd jp_dual(const PNormSpace& sp, const Eigen::VectorXd& v, double p) {
  return jp_dual(sp, v, p, sp.reference_weights());
}

Eigen::VectorXd jp_dual_inverse(const PNormSpace& sp, const Eigen::VectorXd& xi, double p,
                                const Eigen::VectorXd& w) {
  const double nx = sp.dual_norm(xi, w);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(xi.size());
  if (nx == 0.0) return v;
  const double pd = numerics::dual_exponent(p);
  const double qd = numerics::dual_exponent(sp.q_norm);
  const double scale = std::pow(nx, pd - qd);
  for (Eigen::Index i = 0; i < xi.size(); ++i)
    v[i] = scale * std::pow(w[i] * sp.cell_volume, 1.0 - qd) * signed_pow(xi[i], qd - 1.0);
  return v;
}

// ---------------------------------------------------------------------------

BanachFunctional BanachFunctional::quadratic(std::size_t n, double lambda, State center) {
  return power(n, lambda, 2.0, std::move(center));
}

BanachFunctional BanachFunctional::power(std::size_t n, double lambda, double r, State center) {
  if (!(r > 1.0)) throw InputError("power functional exponent must be > 1");
  BanachFunctional f;
  f.kind = r == 2.0 ? Kind::quadratic : Kind::power;
  f.lambda = lambda;
  f.exponent = r;
  f.center = center.size() == 0 ? State(State::Zero(static_cast<Eigen::Index>(n))) : std::move(center);
  if (static_cast<std::size_t>(f.center.size()) != n) throw InputError("center has wrong dimension");
  return f;
}

BanachFunctional BanachFunctional::double_well(std::size_t n, double h) {
  BanachFunctional f;
  f.kind = Kind::double_well;
  f.lambda = -1.0;
  f.h = h;
  f.center = State::Zero(static_cast<Eigen::Index>(n));
  return f;
}

BanachFunctional BanachFunctional::allen_cahn(std::size_t n) {
  BanachFunctional f;
  f.kind = Kind::allen_cahn_1d;
  f.lambda = -1.0;
  f.h = 1.0 / static_cast<double>(n + 1);
  f.center = State::Zero(static_cast<Eigen::Index>(n));
  return f;
}

std::string BanachFunctional::name() const {
  switch (kind) {
    case Kind::quadratic: return "quadratic";
    case Kind::power: return "power";
    case Kind::double_well: return "double-well";
    case Kind::allen_cahn_1d: return "allen-cahn-1d";
  }
  return "unknown";
}

double BanachFunctional::value(const PNormSpace& sp, const State& u) const {
  switch (kind) {
    case Kind::quadratic:
    case Kind::power:
      if (lambda == 0.0) return 0.0;
      return lambda / exponent * std::pow(sp.norm(u - center), exponent);
    case Kind::double_well: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < u.size(); ++i) s += std::pow(u[i] * u[i] - 1.0, 2);
      return h * s / 4.0;
    }
    case Kind::allen_cahn_1d: {
      const Eigen::Index n = u.size();
      double grad = 0.0, well = 0.0;
      for (Eigen::Index i = 0; i <= n; ++i) {
        const double left = i == 0 ? 0.0 : u[i - 1];
        const double right = i == n ? 0.0 : u[i];
        const double s = (right - left) / h;
        grad += 0.5 * s * s;
      }
      for (Eigen::Index i = 0; i < n; ++i) well += std::pow(u[i] * u[i] - 1.0, 2) / 4.0;
      return h * (grad + well);
    }
  }
  return 0.0;
}

Eigen::VectorXd BanachFunctional::gradient(const PNormSpace& sp, const State& u) const {
  switch (kind) {
    case Kind::quadratic:
    case Kind::power:
      if (lambda == 0.0) return Eigen::VectorXd::Zero(u.size());
      return lambda * jp_dual(sp, u - center, exponent);
    case Kind::double_well:
      return h * (u.array().cube() - u.array()).matrix();
    case Kind::allen_cahn_1d: {
      const Eigen::Index n = u.size();
      Eigen::VectorXd g(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double left = i == 0 ? 0.0 : u[i - 1];
        const double right = i == n - 1 ? 0.0 : u[i + 1];
        g[i] = (2.0 * u[i] - left - right) / h + h * (u[i] * u[i] * u[i] - u[i]);
      }
      return g;
    }
  }
  return Eigen::VectorXd::Zero(u.size());
}

std::optional<ConvexityCertificate> BanachFunctional::certificate(const PNormSpace& sp) const {
  if (sp.q_norm != 2.0 || sp.finsler) return std::nullopt;
  switch (kind) {
    case Kind::quadratic:
      return ConvexityCertificate{lambda, 2.0};
    case Kind::power:
      // Clarkson's inequality: ||x||^r / r is (2^(2-r), r)-convex for r >= 2.
      if (exponent < 2.0 || lambda < 0.0) return std::nullopt;
      return ConvexityCertificate{lambda * std::pow(2.0, 2.0 - exponent), exponent};
    case Kind::double_well:
    case Kind::allen_cahn_1d:
      // min W'' = -1, scaled by the ratio of the sum weight to the norm's cell volume.
      return ConvexityCertificate{-h / sp.cell_volume, 2.0};
  }
  return std::nullopt;
}

std::optional<State> BanachFunctional::minimizer() const {
  if ((kind == Kind::quadratic || kind == Kind::power) && lambda > 0.0) return center;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

struct StepProblem {
  const BanachFunctional& f;
  const PNormSpace& sp;
  const State& u_prev;
  Eigen::VectorXd w;
  double tau;
  double p;

  double value(const State& v) const {
    const double d = sp.norm(v - u_prev, w);
    return std::pow(d, p) / (p * std::pow(tau, p - 1.0)) + f.value(sp, v);
  }
  Eigen::VectorXd gradient(const State& v) const {
    return jp_dual(sp, v - u_prev, p, w) / std::pow(tau, p - 1.0) + f.gradient(sp, v);
  }
  double residual(const Eigen::VectorXd& g) const { return sp.dual_norm(g, w); }
};

struct LbfgsOutcome {
  State v;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

LbfgsOutcome lbfgs(const StepProblem& prob, State v, double tol, int max_it) {
  constexpr std::size_t kMemory = 10;
  const Eigen::VectorXd dinv = (prob.w.array() * prob.sp.cell_volume).inverse().matrix();

  double fv = prob.value(v);
  Eigen::VectorXd g = prob.gradient(v);
  double res = prob.residual(g);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> mem;
  double gamma = 1.0;

  LbfgsOutcome out;
  int it = 0;
  for (; it < max_it && res > tol; ++it) {
    Eigen::VectorXd d;
    if (mem.empty()) {
      // Explicit step of the flow: the inverse duality map of the gradient, scaled by tau.
      d = -prob.tau * jp_dual_inverse(prob.sp, g, prob.p, prob.w);
      if (!d.allFinite() || d.norm() == 0.0) d = -dinv.cwiseProduct(g);
    } else {
      Eigen::VectorXd qv = g;
      std::vector<double> alpha(mem.size());
      for (std::size_t j = mem.size(); j-- > 0;) {
        const auto& [s, y] = mem[j];
        alpha[j] = s.dot(qv) / y.dot(s);
        qv -= alpha[j] * y;
      }
      Eigen::VectorXd r = gamma * dinv.cwiseProduct(qv);
      for (std::size_t j = 0; j < mem.size(); ++j) {
        const auto& [s, y] = mem[j];
        const double beta = y.dot(r) / y.dot(s);
        r += (alpha[j] - beta) * s;
      }
      d = -r;
    }
    double slope0 = g.dot(d);
    if (!(slope0 < 0.0)) {
      mem.clear();
      d = -dinv.cwiseProduct(g);
      slope0 = g.dot(d);
    }

    double alpha = 1.0;
    State vn;
    double fn = 0.0;
    Eigen::VectorXd gn;
    double rn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      vn = v + alpha * d;
      fn = prob.value(vn);
      if (std::isfinite(fn)) {
        const bool armijo = fn <= fv + 1e-4 * alpha * slope0;
        // Near the optimum value differences drown in rounding; accept steps that
        // keep the value flat to rounding and reduce the optimality residual.
        const bool flat = fn <= fv + 1e-14 * (1.0 + std::abs(fv));
        if (armijo || flat) {
          gn = prob.gradient(vn);
          rn = prob.residual(gn);
          if (armijo || rn < res) {
            accepted = true;
            break;
          }
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (mem.empty()) break;
      mem.clear();
      continue;
    }
    Eigen::VectorXd s = vn - v;
    Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300 && sy > 1e-12 * s.norm() * y.norm()) {
      mem.emplace_back(s, y);
      if (mem.size() > kMemory) mem.pop_front();
      gamma = sy / y.dot(dinv.cwiseProduct(y));
    }
    v = std::move(vn);
    fv = fn;
    g = std::move(gn);
    res = rn;
  }
  out.v = std::move(v);
  out.value = fv;
  out.residual = res;
  out.iterations = it;
  out.converged = res <= tol;
  return out;
}

}  // namespace

ProxResult banach_prox(const BanachFunctional& f, const PNormSpace& sp, const State& u_prev,
                       double tau, double p, const ProxOptions& options) {
  if (!(tau > 0.0)) throw DomainError("banach_prox: step must be positive");
  if (static_cast<std::size_t>(u_prev.size()) != sp.n) throw InputError("banach_prox: state dimension mismatch");
  StepProblem prob{f, sp, u_prev, sp.weights(u_prev), tau, p};

  std::vector<LbfgsOutcome> candidates;
  candidates.push_back(lbfgs(prob, u_prev, options.tolerance, options.max_iterations));
  int iterations = candidates.front().iterations;

  // The step functional is convex when phi is, or when the quadratic movement term
  // dominates a negative modulus. Otherwise search a few seeded restarts.
  const auto cert = f.certificate(sp);
  const bool convex_phi = cert && cert->lambda >= 0.0;
  const bool dominated = cert && p == 2.0 && 1.0 / tau + cert->lambda > 0.0;
  const Eigen::VectorXd g0 = f.gradient(sp, u_prev);
  const double radius = tau * sp.dual_norm(g0, prob.w);
  if (!convex_phi && !dominated && radius > 0.0) {
    std::mt19937_64 rng(numerics::mix_seed(options.seed, u_prev, tau));
    std::normal_distribution<double> normal;
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd dir(u_prev.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
      dir *= radius / sp.norm(dir, prob.w);
      candidates.push_back(lbfgs(prob, u_prev + dir, options.tolerance, options.max_iterations));
      iterations += candidates.back().iterations;
    }
  }

  const LbfgsOutcome* best = nullptr;
  for (const auto& c : candidates) {
    if (!c.converged) continue;
    if (!best || c.value < best->value - 1e-14 * (1.0 + std::abs(best->value))) best = &c;
  }
  ProxResult r;
  if (!best) {
    best = &candidates.front();
    for (const auto& c : candidates)
      if (c.residual < best->residual) best = &c;
  }
  r.state = best->v;
  r.residual = best->residual;
  r.iterations = iterations;
  r.converged = best->converged;
  return r;
}

// ---------------------------------------------------------------------------

SlopeRepresentation slope_repr_formula(const BanachFunctional& f, const PNormSpace& sp,
                                       const State& u, int sample_count, std::uint64_t seed) {
  SlopeRepresentation out;
  const Eigen::VectorXd g = f.gradient(sp, u);
  out.gradient_norm = sp.dual_norm(g);
  const auto cert = f.certificate(sp);
  const double scale = std::max(1.0, sp.norm(u));
  const auto radii = geometric_radii(0.1 * scale, 13);
  if (!cert) {
    out.fallback = true;
    const BanachBackend backend(sp, f);
    out.value = local_slope_sampled(backend, u, radii, sample_count, seed).value;
    out.plain_sup = out.value;
  } else {
    const double phi_u = f.value(sp, u);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd descent = -jp_dual_inverse(sp, g, 2.0, sp.reference_weights());
    const bool has_descent = sp.norm(descent) > 0.0;
    if (has_descent) descent /= sp.norm(descent);
    for (double r : radii) {
      for (int k = 0; k <= sample_count; ++k) {
        Eigen::VectorXd dir(u.size());
        if (k == sample_count) {
          if (!has_descent) continue;
          dir = descent;
        } else {
          for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
          dir /= sp.norm(dir);
        }
        const State v = u + r * dir;
        const double d = sp.norm(v - u);
        if (d <= 0.0) continue;
        const double diff = (phi_u - f.value(sp, v)) / d;
        out.plain_sup = std::max(out.plain_sup, std::max(diff, 0.0));
        const double repr = diff + cert->lambda / cert->p * std::pow(d, cert->p - 1.0);
        out.value = std::max(out.value, std::max(repr, 0.0));
      }
    }
  }
  out.agrees = std::abs(out.value - out.gradient_norm) <= 0.02 * out.gradient_norm + 1e-8;
  return out;
}

KeyEstimateReport key_estimate_check(const BanachFunctional& f, const PNormSpace& sp,
                                     std::size_t samples, std::uint64_t seed, double radius) {
  const auto cert = f.certificate(sp);
  if (!cert || !(cert->lambda > 0.0))
    throw DomainError("key estimate requires lambda > 0 (functional '" + f.name() + "')");
  const auto ubar = f.minimizer();
  if (!ubar) throw DomainError("key estimate requires a known exact minimizer");

  KeyEstimateReport rep;
  rep.samples = samples;
  rep.lambda = cert->lambda;
  rep.p = sp.p;
  const double lambda = cert->lambda;
  const double p = sp.p;
  const double pd = numerics::dual_exponent(p);
  const double phi_bar = f.value(sp, *ubar);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  rep.worst_lower_margin = std::numeric_limits<double>::infinity();
  rep.worst_upper_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < samples; ++k) {
    Eigen::VectorXd dir(static_cast<Eigen::Index>(sp.n));
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    const double rr = radius * std::pow(unif(rng), 1.0 / static_cast<double>(sp.n));
    const State u = *ubar + rr * dir / sp.norm(dir);
    const double d = sp.norm(u - *ubar);
    const double gap = f.value(sp, u) - phi_bar;
    const double slope = sp.dual_norm(f.gradient(sp, u));
    const double lower = gap - lambda / p * std::pow(d, p);
    const double upper = std::pow(slope, pd) / (lambda * pd) - gap;
    const double tol = 1e-12 * (1.0 + std::abs(gap));
    if (lower < -tol) ++rep.lower_violations;
    if (upper < -tol) ++rep.upper_violations;
    rep.worst_lower_margin = std::min(rep.worst_lower_margin, lower);
    rep.worst_upper_margin = std::min(rep.worst_upper_margin, upper);
    rep.max_lower_gap = std::max(rep.max_lower_gap, std::abs(lower));
    rep.max_upper_gap = std::max(rep.max_upper_gap, std::abs(upper));
  }
  if (samples == 0) rep.worst_lower_margin = rep.worst_upper_margin = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

BanachBackend::BanachBackend(PNormSpace space, BanachFunctional functional)
    : space_(space), f_(std::move(functional)) {
  space_.validate();
  if (static_cast<std::size_t>(f_.center.size()) != space_.n)
    throw InputError("functional dimension does not match the space");
}

std::string BanachBackend::describe() const {
  std::ostringstream os;
  os << "banach R^" << space_.n << " q=" << space_.q_norm << " " << f_.name()
     << (space_.finsler ? " (finsler, frozen coefficients)" : "");
  return os.str();
}

double BanachBackend::distance(const State& u, const State& v) const { return space_.norm(u - v); }

double BanachBackend::energy(const State& u) const { return f_.value(space_, u); }

double BanachBackend::slope(const State& u) const { return space_.dual_norm(f_.gradient(space_, u)); }

ProxResult BanachBackend::prox(const State& prev, double step, double p,
                               const ProxOptions& options) const {
  return banach_prox(f_, space_, prev, step, p, options);
}

double BanachBackend::step_distance(const State& anchor, const State& u, const State& v) const {
  return space_.norm(v - u, space_.weights(anchor));
}

double BanachBackend::step_slope(const State& anchor, const State& u) const {
  return space_.dual_norm(f_.gradient(space_, u), space_.weights(anchor));
}

std::optional<ConvexityCertificate> BanachBackend::convexity() const { return f_.certificate(space_); }

std::optional<State> BanachBackend::exact_minimizer() const { return f_.minimizer(); }

State BanachBackend::perturb(const State& u, double radius, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd dir(u.size());
  double nd = 0.0;
  while (nd == 0.0) {
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    nd = space_.norm(dir);
  }
  return u + radius / nd * dir;
}

State BanachBackend::embed_sample(const State& center, double radius,
                                  std::span<const double> unit_coords) const {
  Eigen::VectorXd c(center.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = unit_coords[static_cast<std::size_t>(i)];
  const double ref = space_.norm(c);
  if (ref == 0.0) return center;
  // Radial map of the cube [-1,1]^n onto the norm ball.
  return center + radius * c.lpNorm<Eigen::Infinity>() / ref * c;
}

std::optional<State> BanachBackend::critical_point(const State& seed, double tolerance,
                                                   int max_iterations) const {
  State u = seed;
  Eigen::VectorXd g = f_.gradient(space_, u);
  double res = space_.dual_norm(g);
  double mu = 1e-6;
  const Eigen::Index n = u.size();
  for (int it = 0; it < max_iterations && res > tolerance; ++it) {
    Eigen::MatrixXd hess(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double e = 1e-6 * std::max(1.0, std::abs(u[j]));
      State up = u, um = u;
      up[j] += e;
      um[j] -= e;
      hess.col(j) = (f_.gradient(space_, up) - f_.gradient(space_, um)) / (2.0 * e);
    }
    hess = 0.5 * (hess + hess.transpose()).eval();
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      // Levenberg-Marquardt on the gradient equation (H^2 + mu I) dx = -H g.
      const Eigen::MatrixXd a = hess.transpose() * hess + mu * Eigen::MatrixXd::Identity(n, n);
      const Eigen::VectorXd dx = a.ldlt().solve(-hess.transpose() * g);
      const State un = u + dx;
      const Eigen::VectorXd gn = f_.gradient(space_, un);
      const double rn = space_.dual_norm(gn);
      if (std::isfinite(rn) && rn < res) {
        u = un;
        g = gn;
        res = rn;
        mu = std::max(mu * 0.1, 1e-15);
        improved = true;
        break;
      }
      mu *= 10.0;
    }
    if (!improved) break;
  }
  if (!(res <= tolerance)) return std::nullopt;
  return u;
}

}  // namespace minmove
