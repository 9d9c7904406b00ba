#include "efflob/sim.hpp"

#include <cmath>
#include <limits>

#include "efflob/error.hpp"

namespace efflob {

namespace {

constexpr int kMaxWindowRetries = 10000;

}  // namespace

const char* scheme_name(Scheme s) { return s == Scheme::FrozenStep ? "frozen-step" : "thinning"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "frozen-step") return Scheme::FrozenStep;
  if (s == "thinning") return Scheme::Thinning;
  throw Error(ErrorCode::Validation, "unknown scheme '" + s + "'");
}

void SimConfig::validate() const {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw Error(ErrorCode::Validation, "horizon must be >= 0");
  if (!(dt > 0.0)) throw Error(ErrorCode::Validation, "dt must be > 0");
  if (!(max_jump_prob > 0.0 && max_jump_prob <= 1.0))
    throw Error(ErrorCode::Validation, "max_jump_prob must be in (0, 1]");
  if (!(window > 0.0)) throw Error(ErrorCode::Validation, "thinning window must be > 0");
  if (!(kappa > 1.0)) throw Error(ErrorCode::Validation, "kappa must be > 1");
  if (!(ball_sigmas > 0.0)) throw Error(ErrorCode::Validation, "ball radius must be > 0");
  if (max_events < 1) throw Error(ErrorCode::Validation, "event cap must be >= 1");
}

Simulator::Simulator(std::shared_ptr<const MarketModel> model, const SimConfig& cfg, Rng rng)
    : model_(std::move(model)), cfg_(cfg), rng_(std::move(rng)) {
  cfg_.validate();
  if (cfg_.scheme == Scheme::Thinning && model_->degree() != 1)
    throw Error(ErrorCode::Validation, "thinning needs log-affine intensities");
  table_ = model_->make_table();
  const auto d = static_cast<std::size_t>(model_->assets());
  s_.assign(d, 0.0);
  y_.assign(d, 0.0);
  z_.assign(d, 0.0);
  rates_.assign(static_cast<std::size_t>(model_->event_count()) + 1, 0.0);
}

void Simulator::reset(MarketState x0, std::vector<double> s0) {
  if (!model_->valid_state(x0)) throw Error(ErrorCode::InvalidState, "initial state invalid for the model");
  x_ = std::move(x0);
  s_ = s0.empty() ? model_->prices(x_) : std::move(s0);
  if (static_cast<int>(s_.size()) != model_->assets()) throw Error(ErrorCode::DimensionMismatch, "S_0 size");
  t_ = 0.0;
  last_event_t_ = -1.0;
  events_ = 0;
}

void Simulator::reset_default() {
  const auto m = model_->default_price_index();
  reset(model_->initial_state(m, rng_));
}

std::vector<double> Simulator::offsets() const {
  std::vector<double> y(s_.size());
  for (int i = 0; i < model_->assets(); ++i) y[static_cast<std::size_t>(i)] = s_[i] - model_->price(x_, i);
  return y;
}

void Simulator::diffuse(double h, std::span<double> ds) {
  const auto& L = model_->sigma();
  const int d = model_->assets();
  const double sq = std::sqrt(h);
  for (int i = 0; i < d; ++i) z_[static_cast<std::size_t>(i)] = n01_(rng_);
  for (int i = 0; i < d; ++i) {
    double v = 0.0;
    for (int j = 0; j <= i; ++j) v += L(i, j) * z_[static_cast<std::size_t>(j)];
    ds[i] = v * sq;
  }
}

bool Simulator::in_box(std::span<const double> ds, std::span<const double> radius) const {
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (std::abs(ds[i]) > radius[i]) return false;
  return true;
}

void Simulator::observe() {
  if (observer_) observer_(t_, s_, x_);
}

void Simulator::fire(int k, double t, std::vector<LogRecord>* out) {
  // Logged times must increase strictly.
  if (t <= last_event_t_) t = std::nextafter(last_event_t_, std::numeric_limits<double>::infinity());
  last_event_t_ = t;
  if (++events_ > cfg_.max_events)
    throw Error(ErrorCode::Explosion, "more than " + std::to_string(cfg_.max_events) + " events on one path");
  observe();
  EventOutcome o;
  if (k < model_->event_count()) {
    o = model_->apply(x_, k, rng_);
  } else {
    model_->apply_state_jump(x_, rng_);
    k = -1;
  }
  observe();
  if (out) {
    LogRecord r;
    r.t = t;
    r.z = k;
    r.x = x_;
    if (k >= 0 && cfg_.record_outcomes) r.outcome = std::move(o);
    out->push_back(std::move(r));
  }
}

namespace {

// Index drawn with probability rates[i] / total; ties resolve to the lowest index.
int pick(std::span<const double> rates, double total, double u) {
  double target = u * total;
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] <= 0.0) continue;
    acc += rates[i];
    last = static_cast<int>(i);
    if (target < acc) return last;
  }
  return last;
}

}  // namespace

void Simulator::step_frozen(double t_end, std::vector<LogRecord>* out) {
  const int d = model_->assets();
  const int ne = model_->event_count();
  std::vector<double> ds(static_cast<std::size_t>(d));
  const double t0 = t_;
  std::int64_t n = 0;
  while (t_ < t_end) {
    const double t_grid = std::min(t_end, t0 + static_cast<double>(n + 1) * cfg_.dt);
    ++n;
    while (t_ < t_grid) {
      model_->coeffs(x_, table_);
      for (int i = 0; i < d; ++i)
        y_[static_cast<std::size_t>(i)] = s_[static_cast<std::size_t>(i)] - model_->price(x_, i);
      bool overflow = false;
      double total = 0.0;
      for (int k = 0; k < ne; ++k)
        total += rates_[static_cast<std::size_t>(k)] = eval_intensity(table_, k, y_, &overflow);
      total += rates_[static_cast<std::size_t>(ne)] = model_->state_jump_rate(x_);
      if (overflow || !std::isfinite(total)) throw Error(ErrorCode::ParameterFault, "intensity overflow");
      double t_next = t_grid;
      if (total * (t_grid - t_) > cfg_.max_jump_prob) {
        t_next = t_ + cfg_.max_jump_prob / total;
        if (!(t_next > t_)) throw Error(ErrorCode::ParameterFault, "intensity too large for the time resolution");
      }
      const double h = t_next - t_;
      if (total > 0.0 && uniform01(rng_) < -std::expm1(-total * h)) {
        const double tau = h * uniform01(rng_);
        const int k = pick(rates_, total, uniform01(rng_));
        diffuse(tau, ds);
        for (int i = 0; i < d; ++i) s_[static_cast<std::size_t>(i)] += ds[static_cast<std::size_t>(i)];
        t_ += tau;
        fire(k, t_, out);
        // The substep ends at the event; rates are re-frozen from there.
        continue;
      }
      diffuse(h, ds);
      for (int i = 0; i < d; ++i) s_[static_cast<std::size_t>(i)] += ds[static_cast<std::size_t>(i)];
      t_ = t_next;
    }
    observe();
  }
}

void Simulator::step_thinning(double t_end, std::vector<LogRecord>* out) {
  const int d = model_->assets();
  const int ne = model_->event_count();
  const auto& cov = model_->covariance();
  std::vector<double> ds(static_cast<std::size_t>(d));
  std::vector<double> radius(static_cast<std::size_t>(d));
  std::exponential_distribution<double> expo(1.0);
  int retries = 0;
  while (t_ < t_end) {
    const double h = std::min(cfg_.window, t_end - t_);
    model_->coeffs(x_, table_);
    for (int i = 0; i < d; ++i) {
      y_[static_cast<std::size_t>(i)] = s_[static_cast<std::size_t>(i)] - model_->price(x_, i);
      radius[static_cast<std::size_t>(i)] = cfg_.ball_sigmas * std::sqrt(cov(i, i) * h);
    }
    // Majorant: each log-intensity is affine in y, so its sup over the box is explicit.
    double bound = 0.0;
    for (int k = 0; k < ne; ++k) {
      if (!table_.active(k)) continue;
      auto c = table_.coeffs(k);
      double e = c[0];
      for (int i = 0; i < d; ++i)
        e += c[static_cast<std::size_t>(i) + 1] * y_[static_cast<std::size_t>(i)] +
             std::abs(c[static_cast<std::size_t>(i) + 1]) * radius[static_cast<std::size_t>(i)];
      if (e > std::log(kIntensityCap)) throw Error(ErrorCode::ParameterFault, "majorant overflow");
      bound += std::exp(e);
    }
    const double state_rate = model_->state_jump_rate(x_);
    bound = cfg_.kappa * bound + state_rate;
    const double tau = bound > 0.0 ? expo(rng_) / bound : std::numeric_limits<double>::infinity();
    const double step = std::min(tau, h);
    diffuse(step, ds);
    if (!in_box(ds, radius)) {
      if (++retries > kMaxWindowRetries) throw Error(ErrorCode::ParameterFault, "thinning window keeps failing");
      continue;
    }
    retries = 0;
    for (int i = 0; i < d; ++i) s_[static_cast<std::size_t>(i)] += ds[static_cast<std::size_t>(i)];
    if (tau >= h) {
      t_ += h;
      if (t_end - t_ < 1e-15 * std::max(1.0, t_end)) t_ = t_end;
      observe();
      continue;
    }
    t_ += tau;
    for (int i = 0; i < d; ++i) y_[static_cast<std::size_t>(i)] = s_[static_cast<std::size_t>(i)] - model_->price(x_, i);
    bool overflow = false;
    double total = 0.0;
    for (int k = 0; k < ne; ++k) total += rates_[static_cast<std::size_t>(k)] = eval_intensity(table_, k, y_, &overflow);
    total += rates_[static_cast<std::size_t>(ne)] = state_rate;
    if (overflow) throw Error(ErrorCode::ParameterFault, "intensity overflow");
    if (total > bound * (1.0 + 1e-12)) throw Error(ErrorCode::ParameterFault, "thinning majorant violated");
    if (uniform01(rng_) * bound < total) fire(pick(rates_, total, uniform01(rng_)), t_, out);
    observe();
  }
}

void Simulator::advance_to(double t_end, std::vector<LogRecord>* out) {
  if (t_end <= t_) return;
  if (cfg_.scheme == Scheme::FrozenStep)
    step_frozen(t_end, out);
  else
    step_thinning(t_end, out);
  t_ = t_end;
}

EventOutcome Simulator::inject(int asset, const OrderEvent& e) {
  const auto* qr = dynamic_cast<const QueueReactiveModel*>(model_.get());
  if (!qr) throw Error(ErrorCode::Validation, "order injection needs a queue-reactive preset");
  if (asset < 0 || asset >= model_->assets()) throw Error(ErrorCode::DimensionMismatch, "asset index");
  if (e.size <= 0) throw Error(ErrorCode::IllicitEvent, "order size must be positive");
  if (!is_licit(x_.books[static_cast<std::size_t>(asset)], e))
    throw Error(ErrorCode::IllicitEvent, "illicit order " + to_string(e));
  observe();
  auto o = qr->apply_order(x_, asset, e, rng_);
  observe();
  return o;
}

Simulator::Fill Simulator::market_order(int asset, Side book_side, Volume size) {
  Fill f;
  if (size < 0) throw Error(ErrorCode::IllicitEvent, "order size must be non-negative");
  while (f.volume < size) {
    const auto& q = x_.books[static_cast<std::size_t>(asset)];
    const Pile best = best_pile(q, book_side);
    const Volume n = std::min(q[best], size - f.volume);
    const auto m = static_cast<double>(x_.price_index[static_cast<std::size_t>(asset)]);
    // Ask pile l sits at tick*(m + l), bid pile l at tick*(m + 1 - l).
    const double px =
        model_->tick(asset) * (book_side == Side::Ask ? m + best.level : m + 1.0 - best.level);
    inject(asset, OrderEvent::consume(best, n, Provenance::Market));
    f.volume += n;
    f.cash += static_cast<double>(n) * px;
  }
  return f;
}

EventLog simulate(std::shared_ptr<const MarketModel> model, const SimConfig& cfg) {
  Simulator sim(model, cfg, make_rng(cfg.seed, 0));
  sim.reset_default();
  EventLog log;
  log.header = make_header(*model, cfg.horizon, cfg.seed, sim.state());
  log.header.config["sim"] = {{"scheme", scheme_name(cfg.scheme)},
                              {"dt", cfg.dt},
                              {"window", cfg.window},
                              {"kappa", cfg.kappa},
                              {"max_jump_prob", cfg.max_jump_prob},
                              {"max_events", cfg.max_events}};
  sim.advance_to(cfg.horizon, &log.records);
  return log;
}

}  // namespace efflob
