#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace minmove::cli;
  CLI::App app{"Minimizing Movements gradient-flow laboratory"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::uint64_t seed = 0;
  CommandOptions opts;

  const char* commands[][2] = {
      {"run", "Run the flow and write trajectory.csv and summary.json"},
      {"check", "Run the flow and verify the enabled checks (report.json)"},
      {"attractor", "Attractor study: excess curve (study.csv) and rest-point table"},
      {"decay", "Fit the exponential energy-decay rate"},
      {"restpoints", "Locate rest points from a bounded set of seeds"},
      {"refine", "Time-step refinement ladder"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "Seed (overrides flow.seed)");
    sub->add_flag("--quiet", opts.quiet, "Do not list written files");
    sub->add_option("--threads", opts.threads, "Worker threads for independent branches")
        ->check(CLI::Range(1, 256));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  Overrides ov;
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out")) ov.out = out;
  if (sub->count("--seed")) ov.seed = seed;
  return run_cli(sub->get_name(), scenario, ov, opts);
}
