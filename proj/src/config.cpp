#include "brw/config.hpp"

#include <cstdio>
#include <fstream>

#include "brw/error.hpp"
#include "brw/rng.hpp"

namespace brw {

DisplacementLaw RunConfig::law() const {
  if (params.empty()) return preset_law(family);
  return calibrate_law(parse_family(family), params);
}

nlohmann::json to_json(const RunConfig& c) {
  return {
      {"family", c.family},
      {"params", c.params},
      {"seed", c.seed},
      {"replicas", c.replicas},
      {"n_grid", c.n_grid},
      {"m_grid", c.m_grid},
      {"gamma", c.gamma},
      {"eps_grid", c.eps_grid},
      {"lambda_cap", c.lambda_cap},
      {"v_margin", c.v_margin},
      {"arena_cap", c.arena_cap},
      {"survival_depth", c.survival_depth},
      {"dinf_depth", c.dinf_depth},
      {"dinf_prune", c.dinf_prune},
      {"vertex_budget", c.vertex_budget},
      {"spine_samples", c.spine_samples},
      {"spine_n", c.spine_n},
      {"persistence_k", c.persistence_k},
      {"persistence_trials", c.persistence_trials},
      {"drop_b", c.drop_b},
      {"drop_lambda", c.drop_lambda},
      {"drop_trials", c.drop_trials},
      {"checks", c.checks},
      {"out", c.out},
      {"jobs", c.jobs},
  };
}

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  const nlohmann::json known = to_json(c);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  read(j, "family", c.family);
  read(j, "params", c.params);
  read(j, "seed", c.seed);
  read(j, "replicas", c.replicas);
  read(j, "n_grid", c.n_grid);
  read(j, "m_grid", c.m_grid);
  read(j, "gamma", c.gamma);
  read(j, "eps_grid", c.eps_grid);
  read(j, "lambda_cap", c.lambda_cap);
  read(j, "v_margin", c.v_margin);
  read(j, "arena_cap", c.arena_cap);
  read(j, "survival_depth", c.survival_depth);
  read(j, "dinf_depth", c.dinf_depth);
  read(j, "dinf_prune", c.dinf_prune);
  read(j, "vertex_budget", c.vertex_budget);
  read(j, "spine_samples", c.spine_samples);
  read(j, "spine_n", c.spine_n);
  read(j, "persistence_k", c.persistence_k);
  read(j, "persistence_trials", c.persistence_trials);
  read(j, "drop_b", c.drop_b);
  read(j, "drop_lambda", c.drop_lambda);
  read(j, "drop_trials", c.drop_trials);
  read(j, "checks", c.checks);
  read(j, "out", c.out);
  read(j, "jobs", c.jobs);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

std::string config_hash(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("out");
  j.erase("jobs");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace brw
