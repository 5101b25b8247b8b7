#include "commands.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "minmove/attractor_lab.hpp"
#include "minmove/numerics.hpp"

namespace minmove::cli {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json state_json(const State& u) {
  json a = json::array();
  for (Eigen::Index i = 0; i < u.size(); ++i) a.push_back(finite_or_null(u[i]));
  return a;
}

class Csv {
 public:
  Csv(const Scenario& sc, const std::vector<std::string>& header) {
    json meta = {{"schema_version", kSchemaVersion}, {"scenario", sc.resolved}};
    out_ << "# " << meta.dump() << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

json document(const Scenario& sc, const std::string& command) {
  return {{"schema_version", kSchemaVersion}, {"command", command}, {"scenario", sc.resolved}};
}

bool wants(const Scenario& sc, const std::string& format) {
  return std::find(sc.formats.begin(), sc.formats.end(), format) != sc.formats.end();
}

void emit_csv(CommandResult& r, const Scenario& sc, const std::string& name, const Csv& csv) {
  if (wants(sc, "csv")) r.files[name] = csv.str();
}

void emit_json(CommandResult& r, const Scenario& sc, const std::string& name, const json& doc) {
  if (wants(sc, "json")) r.files[name] = doc.dump(2) + "\n";
}

std::vector<std::string> state_columns(const Scenario& sc) {
  std::vector<std::string> cols;
  const auto n = static_cast<std::size_t>(sc.initial.size());
  const bool quantiles = sc.wasserstein() != nullptr;
  for (std::size_t i = 0; i < n; ++i)
    cols.push_back(quantiles ? "q_" + std::to_string(i + 1) : "state_" + std::to_string(i));
  return cols;
}

Csv trajectory_csv(const Scenario& sc, const Trajectory& traj) {
  std::vector<std::string> header{"t", "energy", "envelope", "slope", "speed", "edi_residual"};
  for (auto& c : state_columns(sc)) header.push_back(std::move(c));
  Csv csv(sc, header);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::vector<double> row{traj.times[k], traj.energies[k], traj.envelope[k],
                            traj.slopes.empty() ? nan : traj.slopes[k],
                            traj.speeds.empty() ? nan : traj.speeds[k],
                            traj.edi_residuals.empty() ? nan : traj.edi_residuals[k]};
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) row.push_back(traj.states[k][i]);
    csv.row(row);
  }
  return csv;
}

double energy_slack(const Scenario& sc) { return sc.flow.prox_tolerance; }

json run_summary(const Scenario& sc, const MMRun& run) {
  json s;
  s["steps"] = run.states.size() - 1;
  s["horizon"] = run.config.partition.end();
  s["initial_energy"] = finite_or_null(run.energies.front());
  s["final_energy"] = finite_or_null(run.energies.back());
  double max_inc = 0.0;
  for (std::size_t k = 1; k < run.energies.size(); ++k)
    max_inc = std::max(max_inc, run.energies[k] - run.energies[k - 1]);
  s["max_energy_increase"] = max_inc;
  s["monotone"] = max_inc <= energy_slack(sc);
  s["final_slope"] = finite_or_null(run.slopes.back());
  s["frozen_metric"] = run.frozen_metric;
  s["inner_iterations"] = run.inner_iterations;
  if (!run.ledger.empty()) {
    double worst = 0.0, qerr = 0.0;
    for (const auto& e : run.ledger) {
      worst = std::max(worst, std::abs(e.residual));
      qerr = std::max(qerr, e.quadrature_error);
    }
    s["max_abs_edi_residual"] = worst;
    s["max_quadrature_error"] = qerr;
  }
  s["final_state"] = state_json(run.states.back());
  if (const auto* w = sc.wasserstein()) {
    std::vector<double> t, var;
    for (std::size_t k = 0; k < run.states.size(); ++k) {
      t.push_back(run.config.partition.nodes()[k]);
      var.push_back(w->measure(run.states[k]).variance());
    }
    s["initial_variance"] = var.front();
    s["final_variance"] = var.back();
    s["final_mean"] = w->measure(run.states.back()).mean();
    s["variance_slope"] = t.size() >= 2 ? numerics::least_squares_slope(t, var) : 0.0;
  }
  return s;
}

MMRun checked_run(const Scenario& sc) { return run_mm(*sc.backend, sc.initial, sc.flow); }

CommandResult cmd_run(const Scenario& sc) {
  CommandResult r;
  const MMRun run = checked_run(sc);
  const Trajectory traj = run.trajectory(*sc.backend);
  emit_csv(r, sc, "trajectory.csv", trajectory_csv(sc, traj));
  json doc = document(sc, "run");
  doc["summary"] = run_summary(sc, run);
  emit_json(r, sc, "summary.json", doc);
  if (!doc["summary"]["monotone"].get<bool>()) {
    r.exit_code = kExitCheck;
    r.message = "energy increased along the run by " +
                format_double(doc["summary"]["max_energy_increase"].get<double>());
  }
  return r;
}

CommandResult cmd_check(const Scenario& sc) {
  CommandResult r;
  const json& x = sc.params;
  const MMRun run = checked_run(sc);
  const Trajectory traj = run.trajectory(*sc.backend);
  json checks = json::object();
  bool all = true;

  for (const auto& name : x["checks"].get<std::vector<std::string>>()) {
    json c;
    bool passed = false;
    if (name == "energy_solution") {
      const auto rep = energy_solution_check(run, *sc.backend, x["energy_solution_tolerance"].get<double>());
      passed = rep.certified;
      c = {{"max_defect", rep.max_defect},
           {"worst_s", rep.worst_s},
           {"worst_t", rep.worst_t},
           {"max_pointwise_defect", rep.max_pointwise_defect},
           {"tolerance", rep.tolerance}};
    } else if (name == "edi") {
      const double tol = x["edi_tolerance"].get<double>();
      if (run.ledger.empty()) {
        c["error"] = "flow.quadrature_points is 0, no De Giorgi ledger";
      } else {
        double worst = 0.0;
        std::size_t at = 0;
        for (std::size_t k = 0; k < run.ledger.size(); ++k) {
          const double e = std::abs(edi_residual(run, k));
          if (e > worst) {
            worst = e;
            at = k;
          }
        }
        passed = worst <= tol;
        c = {{"max_abs_residual", worst}, {"worst_interval", at}, {"tolerance", tol}};
      }
    } else if (name == "key_estimate") {
      const auto* b = sc.banach();
      try {
        PNormSpace sp = b->space();
        sp.p = sc.flow.p;
        const auto rep = key_estimate_check(b->functional(), sp,
                                            x["key_estimate_samples"].get<std::size_t>(), sc.flow.seed,
                                            x["key_estimate_radius"].get<double>());
        passed = rep.lower_violations == 0 && rep.upper_violations == 0;
        c = {{"samples", rep.samples},
             {"lower_violations", rep.lower_violations},
             {"upper_violations", rep.upper_violations},
             {"worst_lower_margin", rep.worst_lower_margin},
             {"worst_upper_margin", rep.worst_upper_margin},
             {"lambda", rep.lambda},
             {"p", rep.p}};
      } catch (const DomainError& e) {
        c = {{"refused", true}, {"error", e.what()}};
      }
    } else if (name == "lyapunov") {
      const auto win = x["lyapunov_window"].get<std::vector<double>>();
      const auto v = lyapunov_check(traj, win[0], win[1], x["lyapunov_eps"].get<double>(), sc.flow.p,
                                    energy_slack(sc));
      passed = v.passed;
      c = {{"monotone", v.monotone},
           {"max_increase", v.max_increase},
           {"near_stationary", v.near_stationary},
           {"window_variation", v.window_variation},
           {"kinetic_integral", v.kinetic_integral},
           {"kinetic_bound", v.kinetic_bound}};
    } else if (name == "gibbs_stationarity") {
      const auto* w = sc.wasserstein();
      try {
        const auto g = w1d::gibbs_stationary(w->spec(), w->grid_size(), w->exponent());
        const double slope = w1d::wasserstein_slope(w->spec(), g);
        const double tol = x["gibbs_slope_tolerance"].get<double>();
        passed = slope <= tol;
        c = {{"slope_at_gibbs", slope},
             {"tolerance", tol},
             {"distance_final_to_gibbs", w1d::wp_distance(w->measure(run.states.back()), g)}};
      } catch (const DomainError& e) {
        c = {{"refused", true}, {"error", e.what()}};
      }
    } else if (name == "pde_residual") {
      const auto* w = sc.wasserstein();
      std::vector<w1d::QuantileMeasure> states;
      for (const auto& q : run.states) states.push_back(w->measure(q));
      const auto rep = w1d::pde_residual(w->spec(), traj.times, states, sc.flow.p);
      const double tol = x["pde_tolerance"].get<double>();
      passed = rep.max_residual <= tol;
      c = {{"max_residual", rep.max_residual},
           {"worst_time", rep.worst_time},
           {"worst_test", rep.worst_test},
           {"tolerance", tol}};
    }
    c["passed"] = passed;
    checks[name] = c;
    all = all && passed;
  }

  json doc = document(sc, "check");
  doc["checks"] = checks;
  doc["passed"] = all;
  emit_json(r, sc, "report.json", doc);
  emit_csv(r, sc, "trajectory.csv", trajectory_csv(sc, traj));
  if (!all) {
    r.exit_code = kExitCheck;
    std::string failed;
    for (const auto& [k, v] : checks.items())
      if (!v["passed"].get<bool>()) failed += (failed.empty() ? "" : ", ") + k;
    r.message = "failed checks: " + failed;
  }
  return r;
}

json phase_points_json(const MetricBackend& b, const std::vector<PhasePoint>& pts) {
  json a = json::array();
  for (const auto& p : pts)
    a.push_back({{"state", state_json(p.u)}, {"phi", finite_or_null(p.phi)}, {"slope", finite_or_null(b.slope(p.u))}});
  return a;
}

State center_of(const Scenario& sc) {
  const auto c = sc.params["center"].get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

BoundedSetSpec set_spec(const Scenario& sc) {
  BoundedSetSpec spec;
  spec.center = center_of(sc);
  spec.radius = sc.params["radius"].get<double>();
  spec.count = sc.params["count"].get<std::size_t>();
  spec.seed = sc.flow.seed;
  return spec;
}

json rest_points_json(const MetricBackend& b, const RestPointReport& rp) {
  return {{"points", phase_points_json(b, rp.points)},
          {"dropped_seeds", rp.dropped},
          {"diameter", rp.diameter},
          {"bounded", rp.bounded}};
}

CommandResult cmd_attractor(const Scenario& sc, const CommandOptions& opts) {
  CommandResult r;
  const json& x = sc.params;
  AttractorOptions ao;
  ao.snapshots = x["snapshots"].get<std::size_t>();
  ao.rest_tolerance = x["rest_tolerance"].get<double>();
  ao.threads = opts.threads;
  const auto rep = attractor_approximate(*sc.backend, set_spec(sc), sc.flow, x["horizon"].get<double>(),
                                         x["cluster_radius"].get<double>(), ao);
  Csv csv(sc, {"t", "excess"});
  for (std::size_t k = 0; k < rep.times.size(); ++k) csv.row({rep.times[k], rep.excess[k]});
  emit_csv(r, sc, "study.csv", csv);

  json doc = document(sc, "attractor");
  doc["attractor"] = phase_points_json(*sc.backend, rep.attractor);
  doc["final_excess"] = rep.excess.back();
  doc["monotone"] = rep.monotone;
  doc["attracted"] = rep.attracted;
  doc["invariance_excess"] = rep.invariance_excess;
  doc["quasi_invariant"] = rep.quasi_invariant;
  doc["settled"] = rep.settled;
  doc["failed_points"] = rep.failed_points;
  doc["rest_points"] = rest_points_json(*sc.backend, rep.rest_points);
  emit_json(r, sc, "report.json", doc);
  return r;
}

CommandResult cmd_decay(const Scenario& sc) {
  CommandResult r;
  const MMRun run = checked_run(sc);
  const Trajectory traj = run.trajectory(*sc.backend);
  const auto rep = decay_fit(traj, *sc.backend, sc.params["t0"].get<double>(), sc.flow.p,
                             sc.params["tolerance"].get<double>());
  Csv csv(sc, {"t", "energy"});
  for (std::size_t k = 0; k < traj.size(); ++k) csv.row({traj.times[k], traj.energies[k]});
  emit_csv(r, sc, "study.csv", csv);

  json doc = document(sc, "decay");
  doc["fitted_rate"] = rep.fitted_rate;
  doc["target_rate"] = rep.target_rate;
  doc["lambda"] = rep.lambda;
  doc["rate_ok"] = rep.rate_ok;
  doc["distance_bound_ok"] = rep.distance_bound_ok;
  doc["worst_distance_margin"] = rep.worst_distance_margin;
  doc["fit_points"] = rep.fit_points;
  doc["truncated_at"] = rep.truncated_at ? json(*rep.truncated_at) : json(nullptr);
  doc["skipped"] = rep.skipped;
  emit_json(r, sc, "report.json", doc);
  if (!rep.skipped && !(rep.rate_ok && rep.distance_bound_ok)) {
    r.exit_code = kExitCheck;
    r.message = "decay estimate violated: fitted rate " + format_double(rep.fitted_rate) + ", target " +
                format_double(rep.target_rate);
  }
  return r;
}

CommandResult cmd_restpoints(const Scenario& sc) {
  CommandResult r;
  const json& x = sc.params;
  const EnsembleState seeds = sample_bounded_set(*sc.backend, set_spec(sc));
  std::vector<State> s;
  for (const auto& p : seeds.points) s.push_back(p.u);
  const auto rep = rest_points_solve(*sc.backend, s, x["tolerance"].get<double>(),
                                     x["max_iterations"].get<int>(), x["dedup_radius"].get<double>());
  std::vector<std::string> header{"index", "phi", "slope"};
  for (auto& c : state_columns(sc)) header.push_back(std::move(c));
  Csv csv(sc, header);
  for (std::size_t k = 0; k < rep.points.size(); ++k) {
    std::vector<double> row{static_cast<double>(k), rep.points[k].phi, rep.slopes[k]};
    for (Eigen::Index i = 0; i < rep.points[k].u.size(); ++i) row.push_back(rep.points[k].u[i]);
    csv.row(row);
  }
  emit_csv(r, sc, "study.csv", csv);
  json doc = document(sc, "restpoints");
  doc["rest_points"] = rest_points_json(*sc.backend, rep);
  emit_json(r, sc, "report.json", doc);
  if (!rep.bounded) {
    r.exit_code = kExitCheck;
    r.message = "rest-point set is not bounded";
  }
  return r;
}

CommandResult cmd_refine(const Scenario& sc, const CommandOptions& opts) {
  CommandResult r;
  const auto rep = gmm_convergence_study(*sc.backend, sc.initial, sc.flow,
                                         sc.params["refinements"].get<int>(), opts.threads);
  Csv csv(sc, {"level", "step", "sup_distance", "order"});
  for (std::size_t k = 0; k < rep.levels.size(); ++k)
    csv.row({static_cast<double>(k), rep.levels[k].step, rep.levels[k].sup_distance, rep.levels[k].order});
  emit_csv(r, sc, "study.csv", csv);

  json doc = document(sc, "refine");
  doc["complete"] = rep.complete;
  if (!rep.complete) doc["failure"] = rep.failure;
  doc["cauchy_order"] = rep.cauchy_order;
  json levels = json::array();
  for (const auto& l : rep.levels)
    levels.push_back({{"step", l.step}, {"sup_distance", l.sup_distance}, {"order", l.order}});
  doc["levels"] = levels;
  json nodes = json::array();
  for (std::size_t k = 0; k < rep.node_times.size() && k < rep.envelope.size(); ++k)
    nodes.push_back({{"t", rep.node_times[k]},
                     {"envelope", finite_or_null(rep.envelope[k])},
                     {"limit_energy", finite_or_null(rep.limit_energy[k])},
                     {"envelope_gap", finite_or_null(rep.envelope_gap[k])}});
  doc["nodes"] = nodes;
  emit_json(r, sc, "report.json", doc);
  if (!rep.complete) {
    r.exit_code = kExitSolver;
    r.message = "refinement ladder incomplete: " + rep.failure;
  }
  return r;
}

}  // namespace

CommandResult execute(const std::string& command, const Scenario& sc, const CommandOptions& opts) {
  if (command != "run" && command != sc.experiment)
    throw ConfigError("command '" + command + "' needs a scenario with experiment.kind = \"" + command +
                      "\" (got \"" + sc.experiment + "\")");
  if (command == "run") return cmd_run(sc);
  if (command == "check") return cmd_check(sc);
  if (command == "attractor") return cmd_attractor(sc, opts);
  if (command == "decay") return cmd_decay(sc);
  if (command == "restpoints") return cmd_restpoints(sc);
  if (command == "refine") return cmd_refine(sc, opts);
  throw ConfigError("unknown command '" + command + "'");
}

void write_artifacts(const CommandResult& result, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw InputError("cannot create output directory '" + directory + "': " + ec.message());
  for (const auto& [name, body] : result.files) {
    const fs::path path = fs::path(directory) / name;
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw InputError("cannot write '" + path.string() + "'");
  }
}

int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what();
    if (e.node()) err << " [node " << *e.node() << "]";
    err << " residual " << format_double(e.residual()) << '\n';
    return kExitSolver;
  } catch (const InvariantError& e) {
    err << "invariant violated: " << e.what() << '\n';
    return kExitCheck;
  } catch (const DomainError& e) {
    err << "refused: " << e.what() << '\n';
    return kExitCheck;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int run_cli(const std::string& command, const std::string& scenario_path, const Overrides& overrides,
            const CommandOptions& opts) {
  try {
    const Scenario sc = load_scenario(scenario_path, overrides);
    const CommandResult result = execute(command, sc, opts);
    write_artifacts(result, sc.output_dir);
    if (!opts.quiet) {
      for (const auto& [name, body] : result.files)
        std::cout << "wrote " << (std::filesystem::path(sc.output_dir) / name).string() << '\n';
    }
    if (!result.message.empty()) std::cerr << result.message << '\n';
    return result.exit_code;
  } catch (...) {
    return report_exception(std::cerr);
  }
}

}  // namespace minmove::cli
