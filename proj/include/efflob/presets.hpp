#pragma once

// Market models: the queue-reactive family (order books per asset) and the
// signal-driven family (price jumps modulated by an exogenous signal), with
// the named presets used throughout the toolkit.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efflob/intensity.hpp"
#include "efflob/lob.hpp"
#include "efflob/rng.hpp"

namespace efflob {

enum class Family : std::uint8_t { QueueReactive, Signal };

// Observable state X together with the reference prices.
struct MarketState {
  std::vector<std::int64_t> price_index;  // P^i = tick_i * (m_i + 1/2)
  std::vector<LobState> books;            // queue-reactive only
  std::vector<double> signal;             // signal-driven only, signal_dim per asset

  friend bool operator==(const MarketState&, const MarketState&) = default;
};

// What one endogenous event did, enough to replay it.
struct EventOutcome {
  int asset = 0;
  int dp = 0;
  std::optional<OrderEvent> order;
  RegenDraws draws;
  std::vector<double> signal_draw;
};

struct EventType {
  std::string name;
  int asset = 0;
};

enum class SignalLaw : std::uint8_t { Gaussian, Uniform };

struct ModelOptions {
  RegenSpec regen;
  double wipe_prob = 0.3;      // Model 1 market orders
  double redraw_rate = 1.0;    // signal redraws per asset per unit time
  std::optional<std::vector<double>> ticks;
};

class MarketModel {
 public:
  virtual ~MarketModel() = default;

  const std::string& preset() const { return preset_; }
  Family family() const { return family_; }
  int assets() const { return static_cast<int>(ticks_.size()); }
  double tick(int i) const { return ticks_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& ticks() const { return ticks_; }
  // Lower-triangular volatility factor and its covariance.
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const ThetaSpec& theta() const { return theta_; }
  const ModelOptions& options() const { return options_; }

  int degree() const { return 1; }
  int event_count() const { return static_cast<int>(events_.size()); }
  const EventType& event(int k) const { return events_[static_cast<std::size_t>(k)]; }
  int event_index(const std::string& name) const;  // -1 if unknown
  int signal_dim() const { return signal_dim_; }
  int depth() const { return depth_; }

  CoeffTable make_table() const { return CoeffTable(assets(), degree(), event_count()); }
  double price(const MarketState& x, int i) const {
    return tick(i) * (static_cast<double>(x.price_index[static_cast<std::size_t>(i)]) + 0.5);
  }
  std::vector<double> prices(const MarketState& x) const;

  virtual void coeffs(const MarketState& x, CoeffTable& out) const = 0;
  virtual EventOutcome apply(MarketState& x, int k, Rng& rng) const = 0;
  // Re-applies a logged outcome deterministically.
  virtual void replay(MarketState& x, int k, const EventOutcome& o) const = 0;

  // State-only jumps (signal redraws).
  virtual double state_jump_rate(const MarketState&) const { return 0.0; }
  virtual void apply_state_jump(MarketState&, Rng&) const {}

  virtual MarketState initial_state(std::span<const std::int64_t> price_index, Rng& rng) const = 0;
  virtual bool valid_state(const MarketState& x) const = 0;

  std::vector<std::int64_t> default_price_index() const;

 protected:
  MarketModel(std::string preset, Family family, std::vector<double> ticks, ThetaSpec theta,
              ModelOptions options);
  void set_volatility(const Eigen::MatrixXd& sigma);

  std::string preset_;
  Family family_;
  std::vector<double> ticks_;
  ThetaSpec theta_;
  ModelOptions options_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd cov_;
  std::vector<EventType> events_;
  int signal_dim_ = 0;
  int depth_ = 0;
};

// Queue-reactive event: a consume or limit order at one pile with
// log-intensity b0 + by * y_asset + sum_j c_j * q^{pile_j}.
struct QrEventSpec {
  std::string name;
  int asset = 0;
  EventKind kind = EventKind::Consume;
  Pile pile;
  Side order_side = Side::Bid;
  Provenance tag = Provenance::None;
  double wipe_prob = 0.0;      // consume: chance the whole pile goes
  bool needs_volume = false;   // active only when the pile is non-empty
  double b0 = 0.0;
  double by = 0.0;
  std::vector<std::pair<Pile, double>> vol_coeffs;
};

class QueueReactiveModel final : public MarketModel {
 public:
  QueueReactiveModel(std::string preset, int depth, std::vector<double> ticks, const Eigen::MatrixXd& sigma,
                     std::vector<QrEventSpec> events, ThetaSpec theta, ModelOptions options,
                     std::vector<LobState> initial_books);

  const QrEventSpec& spec(int k) const { return specs_[static_cast<std::size_t>(k)]; }

  void coeffs(const MarketState& x, CoeffTable& out) const override;
  EventOutcome apply(MarketState& x, int k, Rng& rng) const override;
  void replay(MarketState& x, int k, const EventOutcome& o) const override;
  MarketState initial_state(std::span<const std::int64_t> price_index, Rng& rng) const override;
  bool valid_state(const MarketState& x) const override;

  // Applies an exogenous order to asset i's book.
  EventOutcome apply_order(MarketState& x, int asset, const OrderEvent& e, Rng& rng) const;

 private:
  std::vector<QrEventSpec> specs_;
  std::vector<LobState> initial_books_;
};

// Signal-driven event: a one-tick price jump of `asset` in direction `dir`
// with log-intensity b0 + by * y_asset + bx . X^asset.
struct SignalEventSpec {
  std::string name;
  int asset = 0;
  int dir = 1;
  double b0 = 0.0;
  double by = 0.0;
  std::vector<double> bx;
};

class SignalModel final : public MarketModel {
 public:
  SignalModel(std::string preset, std::vector<double> ticks, const Eigen::MatrixXd& sigma, int signal_dim,
              SignalLaw law, std::vector<SignalEventSpec> events, ThetaSpec theta, ModelOptions options);

  const SignalEventSpec& spec(int k) const { return specs_[static_cast<std::size_t>(k)]; }
  SignalLaw law() const { return law_; }

  void coeffs(const MarketState& x, CoeffTable& out) const override;
  EventOutcome apply(MarketState& x, int k, Rng& rng) const override;
  void replay(MarketState& x, int k, const EventOutcome& o) const override;
  double state_jump_rate(const MarketState& x) const override;
  void apply_state_jump(MarketState& x, Rng& rng) const override;
  MarketState initial_state(std::span<const std::int64_t> price_index, Rng& rng) const override;
  bool valid_state(const MarketState& x) const override;

  void draw_signal(std::span<double> out, Rng& rng) const;

 private:
  SignalLaw law_;
  std::vector<SignalEventSpec> specs_;
};

// Preset ids: "poisson", "model1", "model2", "imbalance", "impact", "impact2".
std::vector<std::string> preset_names();
ThetaSpec default_theta(const std::string& preset);
std::shared_ptr<const MarketModel> make_model(const std::string& preset, const ThetaSpec& theta,
                                              const ModelOptions& options = {});

// Lower-triangular factor for (sigma_1, sigma_2, rho).
Eigen::MatrixXd volatility_factor(std::span<const double> sigmas, double rho);

}  // namespace efflob
