#pragma once

// Run configuration: INI file with sections, validated against a fixed
// schema (unknown sections or keys are errors).

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "efflob/analysis.hpp"
#include "efflob/estimator.hpp"
#include "efflob/likelihood.hpp"
#include "efflob/presets.hpp"
#include "efflob/real_data.hpp"
#include "efflob/sim.hpp"

namespace efflob {

struct RunConfig {
  std::string preset = "model1";
  std::uint64_t seed = 0;
  int jobs = 0;  // 0: OpenMP default
  ThetaSpec theta;
  ModelOptions model;
  SimConfig sim;
  LikelihoodConfig likelihood;
  EstimatorConfig estimator;
  Units units;
  ScalingConfig scaling;
  DriftGrid lyapunov;
  ImpactConfig impact;
  LiquidationConfig liquidation;
  double mc_paths = 0;  // likelihood: Monte-Carlo cross-check when > 0
  int mc_substeps = 20;

  std::shared_ptr<const MarketModel> make() const { return make_model(preset, theta, model); }
  // Resolved configuration, embedded in every artifact.
  nlohmann::ordered_json to_json() const;
};

RunConfig default_run_config(const std::string& preset = "model1");
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Pushes the seed into every sub-config that draws random numbers.
void apply_seed(RunConfig& cfg, std::uint64_t seed);

// Text of the shipped schema: every section and key with its default.
std::string config_schema();

}  // namespace efflob
