#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "brw/law.hpp"

namespace brw {

/// Everything a subcommand needs. Serialized as JSON; the config hash is
/// taken over the canonical serialization with the output directory and
/// worker count left out, so it identifies the experiment, not the run.
struct RunConfig {
  // Law: a preset name, or a family with explicit free parameters.
  std::string family = "f1";
  std::vector<double> params;  // empty = family defaults

  std::uint64_t seed = 20240601;
  std::uint32_t replicas = 200;
  std::vector<std::uint64_t> n_grid;  // empty = the subcommand's default grid
  std::vector<std::uint64_t> m_grid{100'000};  // excursion counts
  double gamma = 1.5;
  std::vector<double> eps_grid{0.3};
  double lambda_cap = 19.085536923187668;  // e^3 - 1
  double v_margin = 0.5;
  std::uint64_t arena_cap = std::uint64_t{1} << 26;
  std::uint32_t survival_depth = 30;
  std::uint32_t dinf_depth = 30;
  double dinf_prune = 18.0;
  std::uint32_t vertex_budget = 5;

  // Spine checks.
  std::uint64_t spine_samples = 1'000'000;
  std::vector<std::uint32_t> spine_n{1, 2, 3};
  std::vector<std::uint64_t> persistence_k{100, 215, 464, 1000, 2154, 4642, 10000};
  std::uint64_t persistence_trials = 1'000'000;
  double drop_b = 0.05;
  std::vector<double> drop_lambda{5, 10, 20, 40};
  std::uint64_t drop_trials = 20'000;

  std::vector<std::string> checks;  // empty = all checks of the subcommand

  // Not part of the hash.
  std::string out = "out";
  unsigned jobs = 0;  // 0 = BRW_JOBS or hardware concurrency

  DisplacementLaw law() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys are rejected (ConfigError) so typos do not pass silently.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// 16 hex digits of FNV-1a over the canonical JSON without out/jobs.
std::string config_hash(const RunConfig& c);

}  // namespace brw
