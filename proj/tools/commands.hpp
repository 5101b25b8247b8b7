#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "scenario.hpp"

namespace minmove::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitCheck = 4;

struct CommandOptions {
  int threads = 1;
  bool quiet = false;
};

/// Artifact name -> file contents, written by a single writer after the command finishes.
struct CommandResult {
  int exit_code = kExitOk;
  std::map<std::string, std::string> files;
  std::string message;
};

/// Runs one subcommand on an already parsed scenario. Library errors propagate.
CommandResult execute(const std::string& command, const Scenario& sc, const CommandOptions& opts);

/// Writes every artifact of `result` into `directory` (created if missing).
void write_artifacts(const CommandResult& result, const std::string& directory);

/// Maps an in-flight exception to an exit code and prints it to `err`.
int report_exception(std::ostream& err);

/// Full pipeline used by the executable: load, execute, write, map errors.
int run_cli(const std::string& command, const std::string& scenario_path, const Overrides& overrides,
            const CommandOptions& opts);

std::string format_double(double x);

}  // namespace minmove::cli
