#pragma once

// Maximum-likelihood fitting of a preset's parameters on one event log.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "efflob/cmaes.hpp"
#include "efflob/event_log.hpp"
#include "efflob/likelihood.hpp"
#include "efflob/presets.hpp"

namespace efflob {

struct EstimatorConfig {
  int restarts = 0;  // 0: 3 for one asset, 6 for two
  CmaesConfig cmaes;
  LikelihoodConfig likelihood;
  std::optional<ThetaSpec> start;  // default: neutral point from the log

  int restarts_for(int assets) const { return restarts > 0 ? restarts : (assets == 1 ? 3 : 6); }
};

struct RestartResult {
  std::uint64_t seed = 0;
  ThetaSpec theta;
  double loglik = 0.0;
  std::int64_t evals = 0;
  int generations = 0;
  bool budget_exhausted = false;
  std::string stop;
  std::vector<double> history;  // best-so-far log-likelihood per generation
};

struct FitResult {
  std::string preset;
  ThetaSpec start;
  ThetaSpec theta;
  double loglik = 0.0;
  std::vector<RestartResult> restarts;
  std::int64_t evals = 0;
  double wall_seconds = 0.0;
};

// Intercepts = log of the empirical rate of their events, price
// volatilities from realized variance, everything else neutral.
ThetaSpec neutral_theta(const EventLog& log, const MarketModel& model);

FitResult estimate(const EventLog& log, const std::string& preset, const EstimatorConfig& cfg);

// Wall time is left out unless asked for, so artifacts stay reproducible.
nlohmann::ordered_json fit_to_json(const FitResult& fit, bool with_wall_time = false);
std::string fit_csv_header(const ThetaSpec& theta);
std::string fit_csv_row(const std::string& label, const FitResult& fit);

}  // namespace efflob
