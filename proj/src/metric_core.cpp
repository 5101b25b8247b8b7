#include "minmove/metric_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minmove/numerics.hpp"

namespace minmove {

namespace {

bool same_time(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

// ---------------------------------------------------------------------------
// Partition

Partition::Partition(std::vector<double> steps, double origin) : steps_(std::move(steps)) {
  if (!std::isfinite(origin)) throw InputError("partition origin must be finite");
  nodes_.assign(1, origin);
  nodes_.reserve(steps_.size() + 1);
  for (double s : steps_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("partition steps must be positive and finite");
    nodes_.push_back(nodes_.back() + s);
  }
}

Partition Partition::uniform(double step, double horizon, double origin) {
  if (!(step > 0.0) || !(horizon > 0.0)) throw InputError("uniform partition needs step > 0 and horizon > 0");
  const auto n = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
  std::vector<double> steps(std::max<std::size_t>(n, 1), step);
  const double last = horizon - step * static_cast<double>(steps.size() - 1);
  if (std::abs(last - step) > 1e-12 * step) steps.back() = last;
  return Partition(std::move(steps), origin);
}

double Partition::diameter() const {
  return steps_.empty() ? 0.0 : *std::max_element(steps_.begin(), steps_.end());
}

std::size_t Partition::interval_of(double t) const {
  if (steps_.empty()) throw DomainError("empty partition");
  if (t < nodes_.front() && !same_time(t, nodes_.front())) throw DomainError("time before partition origin");
  if (t > nodes_.back() && !same_time(t, nodes_.back())) throw DomainError("time after partition end");
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
  return std::clamp<std::size_t>(k == 0 ? 0 : k - 1, 0, steps_.size() - 1);
}

Partition Partition::refined() const {
  std::vector<double> s;
  s.reserve(2 * steps_.size());
  for (double v : steps_) {
    s.push_back(0.5 * v);
    s.push_back(0.5 * v);
  }
  return Partition(std::move(s), origin());
}

Partition Partition::concatenated(const Partition& tail) const {
  std::vector<double> s(steps_);
  s.insert(s.end(), tail.steps_.begin(), tail.steps_.end());
  return Partition(std::move(s), origin());
}

Partition Partition::slice(std::size_t first, std::size_t count) const {
  if (first + count > steps_.size()) throw InputError("partition slice out of range");
  std::vector<double> s(steps_.begin() + static_cast<std::ptrdiff_t>(first),
                        steps_.begin() + static_cast<std::ptrdiff_t>(first + count));
  return Partition(std::move(s), nodes_[first]);
}

// ---------------------------------------------------------------------------
// Trajectory

void Trajectory::validate() const {
  const std::size_t n = times.size();
  if (states.size() != n) throw InputError("trajectory: states/times length mismatch");
  auto check = [n](const std::vector<double>& ch, const char* name) {
    if (!ch.empty() && ch.size() != n)
      throw InputError(std::string("trajectory: channel '") + name + "' length mismatch");
  };
  check(energies, "energies");
  check(envelope, "envelope");
  check(slopes, "slopes");
  check(speeds, "speeds");
  check(edi_residuals, "edi_residuals");
  for (std::size_t k = 1; k < n; ++k) {
    if (!(times[k] > times[k - 1])) throw InputError("trajectory: times must be strictly increasing");
  }
}

void fill_channels(const MetricBackend& backend, Trajectory& traj, bool with_slopes) {
  const std::size_t n = traj.states.size();
  traj.energies.resize(n);
  for (std::size_t k = 0; k < n; ++k) traj.energies[k] = backend.energy(traj.states[k]);
  if (traj.envelope.empty()) traj.envelope = traj.energies;
  traj.speeds.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    traj.speeds[k] = backend.distance(traj.states[k - 1], traj.states[k]) / (traj.times[k] - traj.times[k - 1]);
  }
  if (n > 1) traj.speeds[0] = traj.speeds[1];
  if (with_slopes) {
    traj.slopes.resize(n);
    for (std::size_t k = 0; k < n; ++k) traj.slopes[k] = backend.slope(traj.states[k]);
  }
}

// ---------------------------------------------------------------------------
// Estimators

MetricDerivativeEstimate metric_derivative_estimate(const MetricBackend& backend,
                                                    const Trajectory& traj, double t) {
  traj.validate();
  const auto& ts = traj.times;
  const std::size_t n = ts.size();
  if (n < 4) throw DomainError("metric derivative: need at least two samples on each side");
  if (t < ts.front() || t > ts.back()) throw DomainError("metric derivative: t outside the sampled window");

  // Pairs (a_j, b_j) of sample indices straddling t, finest first.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const auto it = std::lower_bound(ts.begin(), ts.end(), t);
  auto k = static_cast<std::size_t>(std::distance(ts.begin(), it));
  if (k < n && same_time(ts[k], t)) {
    for (std::size_t j = 1; j <= k && k + j < n; ++j) pairs.emplace_back(k - j, k + j);
  } else {
    if (k == 0) throw DomainError("metric derivative: t outside the sampled window");
    const std::size_t left = k - 1;
    for (std::size_t j = 0; j <= left && k + j < n; ++j) pairs.emplace_back(left - j, k + j);
  }
  if (pairs.size() < 2) throw DomainError("metric derivative: need at least two samples on each side");

  MetricDerivativeEstimate est;
  for (const auto& [a, b] : pairs) {
    const double h = 0.5 * (ts[b] - ts[a]);
    est.quotients.emplace_back(h, backend.distance(traj.states[a], traj.states[b]) / (2.0 * h));
  }
  const auto [h1, q1] = est.quotients[0];
  const auto [h2, q2] = est.quotients[1];
  est.finest_quotient = q1;
  est.value = std::max(0.0, q1 + (q1 - q2) * h1 * h1 / (h2 * h2 - h1 * h1));
  return est;
}

std::vector<double> geometric_radii(double r0, int levels) {
  std::vector<double> r(static_cast<std::size_t>(levels));
  for (int k = 0; k < levels; ++k) r[static_cast<std::size_t>(k)] = std::ldexp(r0, -k);
  return r;
}

LocalSlopeEstimate local_slope_sampled(const MetricBackend& backend, const State& u,
                                       std::span<const double> radii, int samples_per_radius,
                                       std::uint64_t seed) {
  const double phi_u = backend.energy(u);
  if (!std::isfinite(phi_u)) throw DomainError("local slope: phi(u) is not finite");
  if (radii.empty() || samples_per_radius < 1) throw InputError("local slope: empty radius schedule");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0)) throw InputError("local slope: radii must be positive");
    if (k > 0 && !(radii[k] < radii[k - 1])) throw InputError("local slope: radii must decrease");
  }
  if (radii.back() < 1e3 * kStateTolerance)
    throw InputError("local slope: finest radius below the resolvable scale");

  std::mt19937_64 rng(seed);
  LocalSlopeEstimate est;
  est.curve.resize(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k) {
    double sup = 0.0;
    for (int s = 0; s < samples_per_radius; ++s) {
      const State v = backend.perturb(u, radii[k], rng);
      const double d = backend.distance(u, v);
      if (d <= kStateTolerance) continue;
      const double phi_v = backend.energy(v);
      if (!std::isfinite(phi_v)) continue;
      sup = std::max(sup, std::max(phi_u - phi_v, 0.0) / d);
    }
    est.curve[k] = {radii[k], sup, sup};
  }
  for (std::size_t k = est.curve.size() - 1; k-- > 0;) {
    est.curve[k].running_sup = std::max(est.curve[k].sup_quotient, est.curve[k + 1].running_sup);
  }
  est.value = est.curve.back().sup_quotient;
  return est;
}

UpperGradientReport upper_gradient_residual(const MetricBackend& backend, const Trajectory& traj,
                                            std::span<const double> g) {
  traj.validate();
  const std::size_t n = traj.size();
  if (g.size() != n) throw InputError("upper gradient: slope channel missing or misaligned");
  if (n < 2) throw InputError("upper gradient: need at least two samples");

  std::vector<double> phi(traj.energies);
  if (phi.empty()) {
    phi.resize(n);
    for (std::size_t k = 0; k < n; ++k) phi[k] = backend.energy(traj.states[k]);
  }

  std::vector<double> cum(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double d = backend.distance(traj.states[k - 1], traj.states[k]);
    cum[k] = cum[k - 1] + 0.5 * (g[k - 1] + g[k]) * d;
  }
  double coarse = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 2; k < n; k += 2) {
    coarse += 0.5 * (g[k - 2] + g[k]) * backend.distance(traj.states[k - 2], traj.states[k]);
    last = k;
  }

  UpperGradientReport rep;
  rep.quadrature_error = last > 0 ? std::abs(cum[last] - coarse) / 3.0 : 0.0;
  rep.residual = -std::numeric_limits<double>::infinity();
  // |phi_t - phi_s| - (I_t - I_s) = max(A_t - A_s, B_s - B_t), A = phi - I, B = phi + I.
  double min_a = phi[0] - cum[0];
  double max_b = phi[0] + cum[0];
  std::size_t arg_min_a = 0, arg_max_b = 0;
  for (std::size_t t = 1; t < n; ++t) {
    const double a = phi[t] - cum[t];
    const double b = phi[t] + cum[t];
    if (a - min_a > rep.residual) {
      rep.residual = a - min_a;
      rep.worst_s = arg_min_a;
      rep.worst_t = t;
    }
    if (max_b - b > rep.residual) {
      rep.residual = max_b - b;
      rep.worst_s = arg_max_b;
      rep.worst_t = t;
    }
    if (a < min_a) {
      min_a = a;
      arg_min_a = t;
    }
    if (b > max_b) {
      max_b = b;
      arg_max_b = t;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Interpolants

InterpolantSet::InterpolantSet(const MetricBackend& backend, std::vector<State> values,
                               Partition partition, double p, ProxOptions options)
    : backend_(&backend),
      values_(std::move(values)),
      partition_(std::move(partition)),
      p_(p),
      options_(options) {
  if (values_.size() != partition_.size() + 1)
    throw InputError("interpolants: need one value per partition node");
}

std::size_t InterpolantSet::node_index(double t, double* offset) const {
  const auto& nodes = partition_.nodes();
  const std::size_t k = partition_.interval_of(t);
  if (same_time(t, nodes[k])) {
    *offset = 0.0;
    return k;
  }
  if (same_time(t, nodes[k + 1])) {
    *offset = 0.0;
    return k + 1;
  }
  *offset = t - nodes[k];
  return k;
}

const State& InterpolantSet::left_constant(double t) const {
  double off = 0.0;
  const std::size_t k = node_index(t, &off);
  return off == 0.0 ? values_[k] : values_[k + 1];
}

const State& InterpolantSet::right_constant(double t) const {
  double off = 0.0;
  const std::size_t k = node_index(t, &off);
  return values_[k];
}

State InterpolantSet::de_giorgi(double t) const {
  double off = 0.0;
  const std::size_t k = node_index(t, &off);
  if (off == 0.0) return values_[k];
  const ProxResult r = backend_->prox(values_[k], off, p_, options_);
  if (!r.converged) {
    throw SolverError("De Giorgi interpolant: inner solver did not converge", r.state, r.residual)
        .with_partial_step(off, k + 1);
  }
  return r.state;
}

InterpolantSet build_interpolants(const MetricBackend& backend, std::vector<State> values,
                                  const Partition& partition, double p,
                                  const ProxOptions& options) {
  return InterpolantSet(backend, std::move(values), partition, p, options);
}

}  // namespace minmove
