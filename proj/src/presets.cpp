#include "efflob/presets.hpp"

#include <cmath>

#include "efflob/error.hpp"

namespace efflob {

namespace {

Eigen::MatrixXd sigma_from_theta(const ThetaSpec& th, int assets) {
  if (assets == 1) {
    const double s[] = {th.at("sigma")};
    return volatility_factor(s, 0.0);
  }
  const double s[] = {th.at("sigma1"), th.at("sigma2")};
  return volatility_factor(s, th.at("rho"));
}

void check_layout(const ThetaSpec& th, const ThetaSpec& ref) {
  if (th.names != ref.names)
    throw Error(ErrorCode::DimensionMismatch,
                "theta layout does not match preset (expected " + std::to_string(ref.size()) + " entries)");
  th.validate();
}

ThetaSpec make_theta(std::vector<std::pair<std::string, double>> entries, std::vector<Transform> transforms) {
  ThetaSpec th;
  for (auto& [n, v] : entries) {
    th.names.push_back(n);
    th.values.push_back(v);
  }
  th.transforms = std::move(transforms);
  return th;
}

std::string asset_prefix(int assets, int i) {
  return assets == 1 ? std::string() : "s" + std::to_string(i + 1) + ".";
}

std::vector<double> pick_ticks(const ModelOptions& opt, std::vector<double> fallback) {
  if (!opt.ticks) return fallback;
  if (opt.ticks->size() != fallback.size())
    throw Error(ErrorCode::DimensionMismatch, "tick list length does not match preset assets");
  for (double t : *opt.ticks)
    if (!(t > 0.0)) throw Error(ErrorCode::Validation, "tick must be positive");
  return *opt.ticks;
}

const char* const kModel1Families[] = {"limit", "cancel", "market"};

std::shared_ptr<const MarketModel> build_model1(const ThetaSpec& th, const ModelOptions& opt) {
  std::vector<QrEventSpec> ev;
  for (Side side : {Side::Bid, Side::Ask}) {
    for (int f = 0; f < 3; ++f) {
      const std::string fam = kModel1Families[f];
      const double a0 = th.at(fam + ".a0");
      const double a1 = th.at(fam + ".a1");
      const double a2 = th.at(fam + ".a2");
      const double a3 = th.at(fam + ".a3");
      QrEventSpec s;
      s.name = fam + "_" + side_name(side);
      s.pile = Pile{side, 1};
      if (f == 0) {
        s.kind = EventKind::Limit;
        s.order_side = side;
      } else {
        s.kind = EventKind::Consume;
        s.tag = f == 1 ? Provenance::Cancel : Provenance::Market;
        s.needs_volume = true;
        s.wipe_prob = f == 2 ? opt.wipe_prob : 0.0;
      }
      s.b0 = a0;
      // Ask side: same intercept, opposite y slope, queue slopes swapped.
      s.by = side == Side::Bid ? a1 : -a1;
      const double cb = side == Side::Bid ? a2 : a3;
      const double ca = side == Side::Bid ? a3 : a2;
      s.vol_coeffs = {{Pile{Side::Bid, 1}, cb}, {Pile{Side::Ask, 1}, ca}};
      ev.push_back(std::move(s));
    }
  }
  LobState q0({1}, {1});
  return std::make_shared<QueueReactiveModel>("model1", 1, pick_ticks(opt, {0.01}), sigma_from_theta(th, 1),
                                              std::move(ev), th, opt, std::vector<LobState>{q0});
}

std::shared_ptr<const MarketModel> build_impact(const std::string& preset, int assets, const ThetaSpec& th,
                                                const ModelOptions& opt) {
  const double A[] = {1.5, 1.2, 1.0};
  const double B = -1.0, C = -0.1;
  const double Ac[] = {1.2, 1.0, 0.8};
  const double Bc = 1.5, Cc = 0.15;
  std::vector<QrEventSpec> ev;
  std::vector<LobState> books;
  for (int i = 0; i < assets; ++i) {
    const std::string pre = asset_prefix(assets, i);
    for (Side side : {Side::Ask, Side::Bid}) {
      const double mirror = side == Side::Ask ? 1.0 : -1.0;
      const char sc = side == Side::Ask ? 'a' : 'b';
      for (int j = 1; j <= 3; ++j) {
        QrEventSpec lim;
        lim.name = pre + "limit_" + sc + std::to_string(j);
        lim.asset = i;
        lim.kind = EventKind::Limit;
        lim.pile = Pile{side, j};
        lim.order_side = side;
        lim.b0 = std::log(A[j - 1]);
        lim.by = mirror * B;
        lim.vol_coeffs = {{lim.pile, C}};
        ev.push_back(lim);
        QrEventSpec con;
        con.name = pre + "consume_" + sc + std::to_string(j);
        con.asset = i;
        con.kind = EventKind::Consume;
        con.pile = Pile{side, j};
        con.needs_volume = true;
        con.b0 = std::log(Ac[j - 1]);
        con.by = mirror * Bc;
        con.vol_coeffs = {{con.pile, Cc}};
        ev.push_back(con);
      }
    }
    const Volume b = std::max<Volume>(1, std::llround(opt.regen.bid_mean));
    const Volume a = std::max<Volume>(1, std::llround(opt.regen.ask_mean));
    books.emplace_back(std::vector<Volume>(3, b), std::vector<Volume>(3, a));
  }
  return std::make_shared<QueueReactiveModel>(preset, 3, pick_ticks(opt, std::vector<double>(assets, 0.01)),
                                              sigma_from_theta(th, assets), std::move(ev), th, opt,
                                              std::move(books));
}

std::shared_ptr<const MarketModel> build_model2(const ThetaSpec& th, const ModelOptions& opt) {
  std::vector<SignalEventSpec> ev;
  for (int i = 0; i < 2; ++i) {
    const std::string b = "b" + std::to_string(i + 1) + ".";
    for (int dir : {-1, 1}) {
      SignalEventSpec s;
      s.name = "s" + std::to_string(i + 1) + (dir < 0 ? "-" : "+");
      s.asset = i;
      s.dir = dir;
      // The "-" coefficients are the free ones; "+" negates all but the intercept.
      const double m = dir < 0 ? 1.0 : -1.0;
      s.b0 = th.at(b + "0");
      s.by = m * th.at(b + "1");
      s.bx = {m * th.at(b + "2"), m * th.at(b + "3")};
      ev.push_back(std::move(s));
    }
  }
  return std::make_shared<SignalModel>("model2", pick_ticks(opt, {0.01, 0.005}), sigma_from_theta(th, 2), 2,
                                       SignalLaw::Gaussian, std::move(ev), th, opt);
}

std::shared_ptr<const MarketModel> build_imbalance(const ThetaSpec& th, const ModelOptions& opt) {
  std::vector<SignalEventSpec> ev;
  for (int i = 0; i < 2; ++i) {
    const std::string p = "s" + std::to_string(i + 1) + ".";
    for (int dir : {-1, 1}) {
      SignalEventSpec s;
      s.name = "s" + std::to_string(i + 1) + (dir < 0 ? "-" : "+");
      s.asset = i;
      s.dir = dir;
      const double m = dir < 0 ? 1.0 : -1.0;
      s.b0 = th.at(p + "intercept");
      s.by = m * th.at(p + "efficient");
      s.bx = {m * th.at(p + "imbalance")};
      ev.push_back(std::move(s));
    }
  }
  return std::make_shared<SignalModel>("imbalance", pick_ticks(opt, {0.01, 0.005}), sigma_from_theta(th, 2), 1,
                                       SignalLaw::Uniform, std::move(ev), th, opt);
}

std::shared_ptr<const MarketModel> build_poisson(const ThetaSpec& th, const ModelOptions& opt) {
  std::vector<SignalEventSpec> ev;
  for (int dir : {-1, 1}) {
    SignalEventSpec s;
    s.name = dir < 0 ? "down" : "up";
    s.dir = dir;
    s.b0 = std::log(th.at(dir < 0 ? "rate.down" : "rate.up"));
    ev.push_back(std::move(s));
  }
  return std::make_shared<SignalModel>("poisson", pick_ticks(opt, {0.01}), sigma_from_theta(th, 1), 0,
                                       SignalLaw::Gaussian, std::move(ev), th, opt);
}

}  // namespace

Eigen::MatrixXd volatility_factor(std::span<const double> s, double rho) {
  for (double v : s)
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::OutOfDomain, "volatility must be positive");
  if (s.size() == 1) return Eigen::MatrixXd::Constant(1, 1, s[0]);
  if (s.size() != 2) throw Error(ErrorCode::DimensionMismatch, "volatility factor supports 1 or 2 assets");
  if (!(rho > -1.0 && rho < 1.0)) throw Error(ErrorCode::OutOfDomain, "correlation must lie in (-1, 1)");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(2, 2);
  L(0, 0) = s[0];
  L(1, 0) = rho * s[1];
  L(1, 1) = std::sqrt(1.0 - rho * rho) * s[1];
  return L;
}

MarketModel::MarketModel(std::string preset, Family family, std::vector<double> ticks, ThetaSpec theta,
                         ModelOptions options)
    : preset_(std::move(preset)),
      family_(family),
      ticks_(std::move(ticks)),
      theta_(std::move(theta)),
      options_(std::move(options)) {
  options_.regen.validate();
  if (!(options_.wipe_prob >= 0.0 && options_.wipe_prob <= 1.0))
    throw Error(ErrorCode::Validation, "wipe probability must lie in [0, 1]");
  if (!(options_.redraw_rate >= 0.0) || !std::isfinite(options_.redraw_rate))
    throw Error(ErrorCode::Validation, "redraw rate must be non-negative");
}

void MarketModel::set_volatility(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != assets() || sigma.cols() != assets())
    throw Error(ErrorCode::DimensionMismatch, "volatility matrix size");
  if (std::abs(sigma.determinant()) <= 0.0) throw Error(ErrorCode::OutOfDomain, "volatility matrix is singular");
  sigma_ = sigma;
  cov_ = sigma * sigma.transpose();
}

int MarketModel::event_index(const std::string& name) const {
  for (std::size_t k = 0; k < events_.size(); ++k)
    if (events_[k].name == name) return static_cast<int>(k);
  return -1;
}

std::vector<double> MarketModel::prices(const MarketState& x) const {
  std::vector<double> p(static_cast<std::size_t>(assets()));
  for (int i = 0; i < assets(); ++i) p[static_cast<std::size_t>(i)] = price(x, i);
  return p;
}

std::vector<std::int64_t> MarketModel::default_price_index() const {
  // Reference prices start near 100.
  std::vector<std::int64_t> m;
  for (double t : ticks_) m.push_back(std::llround(100.0 / t));
  return m;
}

QueueReactiveModel::QueueReactiveModel(std::string preset, int depth, std::vector<double> ticks,
                                       const Eigen::MatrixXd& sigma, std::vector<QrEventSpec> events,
                                       ThetaSpec theta, ModelOptions options, std::vector<LobState> initial_books)
    : MarketModel(std::move(preset), Family::QueueReactive, std::move(ticks), std::move(theta),
                  std::move(options)),
      specs_(std::move(events)),
      initial_books_(std::move(initial_books)) {
  depth_ = depth;
  set_volatility(sigma);
  if (static_cast<int>(initial_books_.size()) != assets())
    throw Error(ErrorCode::DimensionMismatch, "one initial book per asset");
  for (const auto& q : initial_books_)
    if (q.depth() != depth || !q.valid()) throw Error(ErrorCode::InvalidState, "initial book");
  for (const auto& s : specs_) {
    if (s.asset < 0 || s.asset >= assets()) throw Error(ErrorCode::DimensionMismatch, "event asset");
    events_.push_back({s.name, s.asset});
  }
}

void QueueReactiveModel::coeffs(const MarketState& x, CoeffTable& out) const {
  for (int k = 0; k < event_count(); ++k) {
    const auto& s = specs_[static_cast<std::size_t>(k)];
    const LobState& q = x.books[static_cast<std::size_t>(s.asset)];
    auto c = out.coeffs(k);
    std::fill(c.begin(), c.end(), 0.0);
    out.set_active(k, !s.needs_volume || q[s.pile] > 0);
    double b0 = s.b0;
    for (const auto& [p, w] : s.vol_coeffs) b0 += w * static_cast<double>(q[p]);
    c[0] = b0;
    c[static_cast<std::size_t>(s.asset) + 1] = s.by;
  }
}

EventOutcome QueueReactiveModel::apply_order(MarketState& x, int asset, const OrderEvent& e, Rng& rng) const {
  auto& q = x.books[static_cast<std::size_t>(asset)];
  auto& m = x.price_index[static_cast<std::size_t>(asset)];
  EventOutcome out;
  out.asset = asset;
  out.order = e;
  Transition tr = apply_event(q, m, e, options_.regen, rng, &out.draws);
  out.dp = tr.dp;
  q = std::move(tr.q);
  m = tr.price_index;
  return out;
}

EventOutcome QueueReactiveModel::apply(MarketState& x, int k, Rng& rng) const {
  const auto& s = specs_[static_cast<std::size_t>(k)];
  const LobState& q = x.books[static_cast<std::size_t>(s.asset)];
  OrderEvent e;
  if (s.kind == EventKind::Limit) {
    e = OrderEvent::limit(s.pile, s.order_side, 1);
  } else {
    Volume n = 1;
    if (s.wipe_prob > 0.0 && uniform01(rng) < s.wipe_prob) n = q[s.pile];
    e = OrderEvent::consume(s.pile, n, s.tag);
  }
  if (!is_licit(q, e)) throw Error(ErrorCode::IllicitEvent, "event " + s.name + " is not licit: " + to_string(e));
  return apply_order(x, s.asset, e, rng);
}

void QueueReactiveModel::replay(MarketState& x, int k, const EventOutcome& o) const {
  if (!o.order) throw Error(ErrorCode::MissingDraws, "queue-reactive replay needs the order");
  const int asset = k >= 0 ? specs_[static_cast<std::size_t>(k)].asset : o.asset;
  auto& q = x.books[static_cast<std::size_t>(asset)];
  auto& m = x.price_index[static_cast<std::size_t>(asset)];
  Transition tr = apply_event(q, m, *o.order, o.draws);
  q = std::move(tr.q);
  m = tr.price_index;
}

MarketState QueueReactiveModel::initial_state(std::span<const std::int64_t> price_index, Rng&) const {
  if (static_cast<int>(price_index.size()) != assets())
    throw Error(ErrorCode::DimensionMismatch, "initial price count");
  MarketState x;
  x.price_index.assign(price_index.begin(), price_index.end());
  x.books = initial_books_;
  return x;
}

bool QueueReactiveModel::valid_state(const MarketState& x) const {
  if (static_cast<int>(x.price_index.size()) != assets() || static_cast<int>(x.books.size()) != assets() ||
      !x.signal.empty())
    return false;
  for (const auto& q : x.books)
    if (q.depth() != depth_ || !q.valid()) return false;
  return true;
}

SignalModel::SignalModel(std::string preset, std::vector<double> ticks, const Eigen::MatrixXd& sigma,
                         int signal_dim, SignalLaw law, std::vector<SignalEventSpec> events, ThetaSpec theta,
                         ModelOptions options)
    : MarketModel(std::move(preset), Family::Signal, std::move(ticks), std::move(theta), std::move(options)),
      law_(law),
      specs_(std::move(events)) {
  signal_dim_ = signal_dim;
  set_volatility(sigma);
  for (const auto& s : specs_) {
    if (s.asset < 0 || s.asset >= assets()) throw Error(ErrorCode::DimensionMismatch, "event asset");
    if (static_cast<int>(s.bx.size()) != signal_dim)
      throw Error(ErrorCode::DimensionMismatch, "signal coefficient length");
    events_.push_back({s.name, s.asset});
  }
}

void SignalModel::coeffs(const MarketState& x, CoeffTable& out) const {
  for (int k = 0; k < event_count(); ++k) {
    const auto& s = specs_[static_cast<std::size_t>(k)];
    auto c = out.coeffs(k);
    std::fill(c.begin(), c.end(), 0.0);
    out.set_active(k, true);
    double b0 = s.b0;
    const std::size_t base = static_cast<std::size_t>(s.asset * signal_dim_);
    for (std::size_t j = 0; j < s.bx.size(); ++j) b0 += s.bx[j] * x.signal[base + j];
    c[0] = b0;
    c[static_cast<std::size_t>(s.asset) + 1] = s.by;
  }
}

void SignalModel::draw_signal(std::span<double> out, Rng& rng) const {
  if (law_ == SignalLaw::Gaussian) {
    std::normal_distribution<double> n01;
    for (double& v : out) v = n01(rng);
  } else {
    for (double& v : out) v = 2.0 * uniform01(rng) - 1.0;
  }
}

EventOutcome SignalModel::apply(MarketState& x, int k, Rng& rng) const {
  const auto& s = specs_[static_cast<std::size_t>(k)];
  EventOutcome o;
  o.asset = s.asset;
  o.dp = s.dir;
  x.price_index[static_cast<std::size_t>(s.asset)] += s.dir;
  if (signal_dim_ > 0) {
    o.signal_draw.resize(static_cast<std::size_t>(signal_dim_));
    draw_signal(o.signal_draw, rng);
    std::copy(o.signal_draw.begin(), o.signal_draw.end(),
              x.signal.begin() + static_cast<std::ptrdiff_t>(s.asset * signal_dim_));
  }
  return o;
}

void SignalModel::replay(MarketState& x, int k, const EventOutcome& o) const {
  const auto& s = specs_[static_cast<std::size_t>(k)];
  x.price_index[static_cast<std::size_t>(s.asset)] += s.dir;
  if (signal_dim_ > 0) {
    if (static_cast<int>(o.signal_draw.size()) != signal_dim_)
      throw Error(ErrorCode::MissingDraws, "signal replay needs the redraw");
    std::copy(o.signal_draw.begin(), o.signal_draw.end(),
              x.signal.begin() + static_cast<std::ptrdiff_t>(s.asset * signal_dim_));
  }
}

double SignalModel::state_jump_rate(const MarketState&) const {
  return signal_dim_ > 0 ? options_.redraw_rate * assets() : 0.0;
}

void SignalModel::apply_state_jump(MarketState& x, Rng& rng) const {
  const int i = std::min(assets() - 1, static_cast<int>(uniform01(rng) * assets()));
  draw_signal(std::span<double>(x.signal).subspan(static_cast<std::size_t>(i * signal_dim_),
                                                  static_cast<std::size_t>(signal_dim_)),
              rng);
}

MarketState SignalModel::initial_state(std::span<const std::int64_t> price_index, Rng& rng) const {
  if (static_cast<int>(price_index.size()) != assets())
    throw Error(ErrorCode::DimensionMismatch, "initial price count");
  MarketState x;
  x.price_index.assign(price_index.begin(), price_index.end());
  x.signal.resize(static_cast<std::size_t>(assets() * signal_dim_));
  draw_signal(x.signal, rng);
  return x;
}

bool SignalModel::valid_state(const MarketState& x) const {
  if (static_cast<int>(x.price_index.size()) != assets() || !x.books.empty() ||
      static_cast<int>(x.signal.size()) != assets() * signal_dim_)
    return false;
  for (double v : x.signal) {
    if (!std::isfinite(v)) return false;
    if (law_ == SignalLaw::Uniform && (v < -1.0 || v > 1.0)) return false;
  }
  return true;
}

std::vector<std::string> preset_names() { return {"poisson", "model1", "model2", "imbalance", "impact", "impact2"}; }

ThetaSpec default_theta(const std::string& preset) {
  using T = Transform;
  if (preset == "poisson")
    return make_theta({{"rate.up", 1.0}, {"rate.down", 1.0}, {"sigma", 0.01}}, {T::Log, T::Log, T::Log});
  if (preset == "model1") {
    ThetaSpec th = make_theta({{"limit.a0", std::log(2.0)},
                               {"limit.a1", 2.5},
                               {"limit.a2", -1.0},
                               {"limit.a3", 0.2},
                               {"cancel.a0", std::log(1.9)},
                               {"cancel.a1", -2.5},
                               {"cancel.a2", 1.0},
                               {"cancel.a3", -0.2},
                               {"market.a0", std::log(0.1)},
                               {"market.a1", -2.5},
                               {"market.a2", -1.0},
                               {"market.a3", 0.2},
                               {"sigma", 0.01}},
                              std::vector<T>(12, T::Identity));
    th.transforms.push_back(T::Log);
    return th;
  }
  if (preset == "model2") {
    ThetaSpec th = make_theta({{"b1.0", std::log(2.0)},
                               {"b1.1", -1.0},
                               {"b1.2", -0.5},
                               {"b1.3", 1.0},
                               {"b2.0", 0.0},
                               {"b2.1", -1.6},
                               {"b2.2", 2.0},
                               {"b2.3", 1.0},
                               {"sigma1", 0.01},
                               {"sigma2", 0.02},
                               {"rho", 0.6}},
                              std::vector<T>(8, T::Identity));
    th.transforms.insert(th.transforms.end(), {T::Log, T::Log, T::Atanh});
    return th;
  }
  if (preset == "imbalance")
    return make_theta({{"s1.intercept", std::log(0.5)},
                       {"s1.efficient", -100.0},
                       {"s1.imbalance", 1.0},
                       {"s2.intercept", std::log(0.5)},
                       {"s2.efficient", -100.0},
                       {"s2.imbalance", 1.0},
                       {"sigma1", 0.01},
                       {"sigma2", 0.02},
                       {"rho", 0.6}},
                      {T::Identity, T::NegExp, T::Identity, T::Identity, T::NegExp, T::Identity, T::Log, T::Log,
                       T::Atanh});
  if (preset == "impact") return make_theta({{"sigma", 0.2}}, {T::Log});
  if (preset == "impact2")
    return make_theta({{"sigma1", 0.02}, {"sigma2", 0.01}, {"rho", 0.0}}, {T::Log, T::Log, T::Atanh});
  throw Error(ErrorCode::Validation, "unknown preset '" + preset + "'");
}

std::shared_ptr<const MarketModel> make_model(const std::string& preset, const ThetaSpec& theta,
                                              const ModelOptions& options) {
  check_layout(theta, default_theta(preset));
  if (preset == "poisson") return build_poisson(theta, options);
  if (preset == "model1") return build_model1(theta, options);
  if (preset == "model2") return build_model2(theta, options);
  if (preset == "imbalance") return build_imbalance(theta, options);
  if (preset == "impact") return build_impact(preset, 1, theta, options);
  return build_impact(preset, 2, theta, options);
}

}  // namespace efflob
