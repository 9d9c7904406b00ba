#pragma once

// Monte-Carlo studies: scaling convergence of the reference price to the
// efficient price, Lyapunov drift of the signal-driven generator, market
// impact of a single order and the cost of a two-asset liquidation schedule.

#include <cstdint>
#include <memory>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "efflob/presets.hpp"
#include "efflob/sim.hpp"

namespace efflob {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// 95% Wilson score interval for k successes out of n.
Interval wilson_interval(std::int64_t k, std::int64_t n, double z = 1.959963984540054);

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  double se = 0.0;
  double var_se = 0.0;  // large-sample standard error of var
};
Moments moments(std::span<const double> xs);

struct Histogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;
};
Histogram histogram(std::span<const double> xs, double lo, double hi, int bins);

// ---- scaling ----

struct ScalingConfig {
  std::vector<int> n_list{1, 4, 16};
  double T = 1.0;
  double eps = 0.5;  // price units
  int reps = 200;
  std::uint64_t seed = 0;
  SimConfig sim;
  bool parallel = true;
};

struct ScalingReport {
  std::string preset;
  double eps = 0.0;
  double T = 0.0;
  int reps = 0;
  std::vector<int> n_list;
  std::vector<std::int64_t> exceed;
  std::vector<double> prob;
  std::vector<Interval> ci;
  std::vector<double> mean_sup;

  // No step up by more than two standard errors.
  bool non_increasing() const;
  // non_increasing() and a drop of more than two standard errors from the first to the last n.
  bool decreasing() const;
};

// Same parameters with every event intercept pushed to exp(-60): P stays
// frozen while S diffuses (negative control for the scaling check).
ThetaSpec zero_intensity_theta(const ThetaSpec& theta);

ScalingReport scaling_check(std::shared_ptr<const MarketModel> model, const ScalingConfig& cfg);

// sup over [0, T] of |S~ - P~|_inf for one rescaled path, n = scale.
double rescaled_gap(std::shared_ptr<const MarketModel> model, const SimConfig& sim, int scale, double T, Rng rng);

// ---- Lyapunov ----

// U(y) = |y| outside [-1, 1], 3/8 + 3y^2/4 - y^4/8 inside.
double lyap_u(double y);
double lyap_du(double y);
double lyap_d2u(double y);

struct DriftGrid {
  double y_max = 20.0;
  int y_points = 401;                 // per axis, odd keeps 0 on the grid
  std::optional<double> signal_bound; // required for unbounded signal laws
  int signal_points = 13;             // per signal component
};

struct LyapunovReport {
  double K = 0.0;                // max over the grid of LV + V
  bool finite = false;
  std::optional<double> y_star;  // LV + V <= 0 wherever max_i |y_i| >= y_star
  double max_outside = 0.0;      // max of LV + V on the grid edge layer
  double symmetry_error = 0.0;   // max |f(y) - f(-y)| / max(1, |f|)
  std::vector<double> y_grid;
  std::vector<double> drift;     // sup over signals of (LV + V), row-major over the y grid
};

// LV(y, x) for V = prod_i exp(U(y_i)); V does not depend on x, so the
// state-jump term vanishes.
double generator_v(const SignalModel& model, std::span<const double> y, std::span<const double> signal);

LyapunovReport lyapunov_drift_check(const SignalModel& model, const DriftGrid& grid);

// ---- impact ----

struct ImpactConfig {
  std::int64_t size = 100;
  double horizon = 240.0;
  double step = 1.0;
  double burn_in = 100.0;
  int reps = 20000;
  std::uint64_t seed = 0;
  SimConfig sim = [] {
    SimConfig s;
    s.scheme = Scheme::Thinning;
    s.record_outcomes = false;
    return s;
  }();
  bool parallel = true;
};

struct ImpactCurve {
  std::int64_t size = 0;
  int reps = 0;
  std::vector<double> grid;
  std::vector<double> mean;  // E[P_t - P_0-], control-variate estimator
  std::vector<double> se;
  std::vector<double> raw_mean;  // plain sample mean
  std::vector<double> raw_se;
  double peak = 0.0;
  double peak_time = 0.0;
};

ImpactCurve market_impact(std::shared_ptr<const MarketModel> model, const ImpactConfig& cfg);

// ---- liquidation ----

struct LiquidationConfig {
  std::vector<double> rhos{-0.8, 0.0, 0.8};
  double interval = 30.0;
  int orders = 20;
  std::vector<std::int64_t> sizes{25, 15};
  double burn_in = 100.0;
  int reps = 5000;
  std::uint64_t seed = 0;
  int bins = 40;
  SimConfig sim = [] {
    SimConfig s;
    s.scheme = Scheme::Thinning;
    s.record_outcomes = false;
    return s;
  }();
  bool parallel = true;
};

struct LiquidationArm {
  double rho = 0.0;
  std::vector<double> cost;  // per replicate, price paid per share minus initial price
  Moments stats;
  Histogram hist;
};

struct LiquidationReport {
  std::vector<std::int64_t> sizes;
  int orders = 0;
  double interval = 0.0;
  int reps = 0;
  std::vector<LiquidationArm> arms;
};

// `base` supplies everything but rho (two-asset queue-reactive preset).
LiquidationReport liquidation_study(const std::string& preset, const ThetaSpec& base, const ModelOptions& options,
                                    const LiquidationConfig& cfg);

nlohmann::ordered_json to_json(const ScalingReport& r);
nlohmann::ordered_json to_json(const LyapunovReport& r, bool with_field = false);
nlohmann::ordered_json to_json(const ImpactCurve& c);
nlohmann::ordered_json to_json(const LiquidationReport& r, bool with_samples = false);

}  // namespace efflob
