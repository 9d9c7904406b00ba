#pragma once

// Simulation of the coupled (efficient price, reference price, state) process.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "efflob/event_log.hpp"
#include "efflob/presets.hpp"
#include "efflob/rng.hpp"

namespace efflob {

enum class Scheme : std::uint8_t { FrozenStep, Thinning };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& s);

struct SimConfig {
  double horizon = 1.0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::FrozenStep;
  double dt = 1e-3;        // frozen-step substep
  double max_jump_prob = 0.1;  // frozen-step: substep shrunk so total rate * h stays below this
  double window = 0.05;    // thinning window h
  double kappa = 1.5;      // thinning safety factor
  double ball_sigmas = 4.0;
  std::int64_t max_events = 10'000'000;
  bool record_outcomes = true;

  void validate() const;
};

class Simulator {
 public:
  // Called after every substep/window and around every jump.
  using Observer = std::function<void(double t, std::span<const double> s, const MarketState& x)>;

  Simulator(std::shared_ptr<const MarketModel> model, const SimConfig& cfg, Rng rng);

  // S_0 defaults to the reference prices of x0.
  void reset(MarketState x0, std::vector<double> s0 = {});
  // Preset initial state at the default prices.
  void reset_default();

  double time() const { return t_; }
  const MarketState& state() const { return x_; }
  std::span<const double> efficient() const { return s_; }
  std::vector<double> offsets() const;  // S - P
  std::int64_t event_count() const { return events_; }
  const MarketModel& model() const { return *model_; }
  Rng& rng() { return rng_; }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  // Runs to t_end; endogenous jumps are appended to `out` when given.
  void advance_to(double t_end, std::vector<LogRecord>* out = nullptr);

  // Exogenous order on a queue-reactive asset, not counted as an event.
  EventOutcome inject(int asset, const OrderEvent& e);

  struct Fill {
    Volume volume = 0;
    double cash = 0.0;
  };
  // Walks the book with consumes at the best pile until `size` is filled.
  Fill market_order(int asset, Side book_side, Volume size);

 private:
  void diffuse(double h, std::span<double> ds);
  bool in_box(std::span<const double> ds, std::span<const double> radius) const;
  void fire(int k, double t, std::vector<LogRecord>* out);
  void observe();
  void step_frozen(double t_end, std::vector<LogRecord>* out);
  void step_thinning(double t_end, std::vector<LogRecord>* out);

  std::shared_ptr<const MarketModel> model_;
  SimConfig cfg_;
  Rng rng_;
  std::normal_distribution<double> n01_;
  CoeffTable table_;
  MarketState x_;
  std::vector<double> s_;
  std::vector<double> y_;
  std::vector<double> rates_;
  std::vector<double> z_;
  double t_ = 0.0;
  double last_event_t_ = -1.0;
  std::int64_t events_ = 0;
  Observer observer_;
};

// One seeded path from the preset initial state, S_0 = P_0.
EventLog simulate(std::shared_ptr<const MarketModel> model, const SimConfig& cfg);

}  // namespace efflob
