#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minmove/banach.hpp"
#include "minmove/mm_engine.hpp"
#include "minmove/wasserstein1d.hpp"

namespace minmove::cli {

inline constexpr int kSchemaVersion = 1;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

struct Scenario {
  nlohmann::json resolved;  // the input with every default filled in
  std::string backend_kind;  // "banach" | "wasserstein1d"
  std::shared_ptr<const MetricBackend> backend;
  State initial;
  MMConfig flow;
  std::string experiment;
  nlohmann::json params;  // resolved experiment block
  std::string output_dir;
  std::vector<std::string> formats;

  const BanachBackend* banach() const { return dynamic_cast<const BanachBackend*>(backend.get()); }
  const w1d::Wasserstein1DBackend* wasserstein() const {
    return dynamic_cast<const w1d::Wasserstein1DBackend*>(backend.get());
  }
};

/// Parses and validates a scenario document. Throws ConfigError (with 1-based line and
/// column for syntax errors) on malformed input, unknown keys or out-of-range values.
Scenario parse_scenario(const std::string& text, const Overrides& overrides = {});
Scenario load_scenario(const std::string& path, const Overrides& overrides = {});

}  // namespace minmove::cli
