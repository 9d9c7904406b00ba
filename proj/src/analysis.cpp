#include "efflob/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "efflob/error.hpp"

namespace efflob {

namespace {

// Runs body(r) for r in [0, n); per-replicate outputs must be written by index.
template <class F>
void for_reps(int n, bool parallel, F body) {
  if (!parallel) {
    for (int r = 0; r < n; ++r) body(r);
    return;
  }
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 8)
  for (int r = 0; r < n; ++r) {
    try {
      body(r);
    } catch (...) {
      errs[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

nlohmann::ordered_json num(double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); }

}  // namespace

Interval wilson_interval(std::int64_t k, std::int64_t n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double den = 1.0 + z2 / nn;
  const double mid = (p + z2 / (2.0 * nn)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / den;
  // The bounds at k = 0 and k = n are exactly 0 and 1.
  return {k == 0 ? 0.0 : std::max(0.0, mid - half), k == n ? 1.0 : std::min(1.0, mid + half)};
}

Moments moments(std::span<const double> xs) {
  Moments m;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return m;
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / n;
  if (xs.size() < 2) return m;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - m.mean) * (x - m.mean);
    m2 += d;
    m4 += d * d;
  }
  m.var = m2 / (n - 1.0);
  m.se = std::sqrt(m.var / n);
  const double mu2 = m2 / n, mu4 = m4 / n;
  m.var_se = std::sqrt(std::max(0.0, (mu4 - mu2 * mu2 * (n - 3.0) / (n - 1.0)) / n));
  return m;
}

Histogram histogram(std::span<const double> xs, double lo, double hi, int bins) {
  Histogram h;
  if (bins < 1) throw Error(ErrorCode::Validation, "histogram needs >= 1 bin");
  if (!(hi > lo)) hi = lo + 1.0;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double x : xs) {
    auto b = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

// ---------------------------------------------------------------- scaling

double rescaled_gap(std::shared_ptr<const MarketModel> model, const SimConfig& sim, int scale, double T, Rng rng) {
  SimConfig sc = sim;
  sc.record_outcomes = false;
  Simulator s(model, sc, std::move(rng));
  s.reset_default();
  const int d = model->assets();
  const std::vector<double> s0(s.efficient().begin(), s.efficient().end());
  const std::vector<double> p0 = model->prices(s.state());
  double sup = 0.0;
  s.set_observer([&](double, std::span<const double> S, const MarketState& x) {
    for (int i = 0; i < d; ++i) {
      const auto u = static_cast<std::size_t>(i);
      sup = std::max(sup, std::abs((S[u] - s0[u]) - (model->price(x, i) - p0[u])));
    }
  });
  s.advance_to(static_cast<double>(scale) * T);
  return sup / std::sqrt(static_cast<double>(scale));
}

bool ScalingReport::non_increasing() const {
  for (std::size_t j = 1; j < prob.size(); ++j) {
    const double a = prob[j - 1], b = prob[j];
    const double se = std::sqrt((a * (1 - a) + b * (1 - b)) / reps);
    if (b - a > 2.0 * std::max(se, 1.0 / reps)) return false;
  }
  return true;
}

bool ScalingReport::decreasing() const {
  if (prob.size() < 2 || !non_increasing()) return false;
  const double a = prob.front(), b = prob.back();
  const double se = std::sqrt((a * (1 - a) + b * (1 - b)) / reps);
  return a - b > 2.0 * se && a > b;
}

ThetaSpec zero_intensity_theta(const ThetaSpec& theta) {
  auto ends = [](const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
  };
  ThetaSpec z = theta;
  for (const auto& n : theta.names) {
    if (n.rfind("rate.", 0) == 0)
      z.set(n, std::exp(-60.0));
    else if (ends(n, ".a0") || ends(n, ".intercept") || (n.size() == 4 && n[0] == 'b' && ends(n, ".0")))
      z.set(n, -60.0);
  }
  return z;
}

ScalingReport scaling_check(std::shared_ptr<const MarketModel> model, const ScalingConfig& cfg) {
  if (cfg.reps < 1) throw Error(ErrorCode::Validation, "reps must be >= 1");
  if (!(cfg.T > 0.0) || !(cfg.eps > 0.0)) throw Error(ErrorCode::Validation, "T and eps must be > 0");
  if (cfg.n_list.empty()) throw Error(ErrorCode::Validation, "empty n list");
  for (int n : cfg.n_list)
    if (n < 1) throw Error(ErrorCode::Validation, "scales must be >= 1");
  cfg.sim.validate();
  ScalingReport rep;
  rep.preset = model->preset();
  rep.eps = cfg.eps;
  rep.T = cfg.T;
  rep.reps = cfg.reps;
  rep.n_list = cfg.n_list;
  for (std::size_t j = 0; j < cfg.n_list.size(); ++j) {
    std::vector<double> gaps(static_cast<std::size_t>(cfg.reps));
    const std::uint64_t master = derive_seed(cfg.seed, j);
    for_reps(cfg.reps, cfg.parallel, [&](int r) {
      gaps[static_cast<std::size_t>(r)] =
          rescaled_gap(model, cfg.sim, cfg.n_list[j], cfg.T, make_rng(master, static_cast<std::uint64_t>(r)));
    });
    std::int64_t k = 0;
    double s = 0.0;
    for (double g : gaps) {
      k += g >= cfg.eps;
      s += g;
    }
    rep.exceed.push_back(k);
    rep.prob.push_back(static_cast<double>(k) / cfg.reps);
    rep.ci.push_back(wilson_interval(k, cfg.reps));
    rep.mean_sup.push_back(s / cfg.reps);
  }
  return rep;
}

// ---------------------------------------------------------------- Lyapunov

double lyap_u(double y) {
  const double a = std::abs(y);
  if (a >= 1.0) return a;
  const double y2 = y * y;
  return 0.375 + 0.75 * y2 - 0.125 * y2 * y2;
}

double lyap_du(double y) {
  if (y >= 1.0) return 1.0;
  if (y <= -1.0) return -1.0;
  return 1.5 * y - 0.5 * y * y * y;
}

double lyap_d2u(double y) {
  if (std::abs(y) >= 1.0) return 0.0;
  return 1.5 - 1.5 * y * y;
}

namespace {

// Jump part of LV / V for one asset.
double jump_ratio(const SignalModel& model, int asset, double y, std::span<const double> x) {
  double j = 0.0;
  const double u = lyap_u(y);
  const double tick = model.tick(asset);
  for (int k = 0; k < model.event_count(); ++k) {
    const auto& s = model.spec(k);
    if (s.asset != asset) continue;
    double e = s.b0 + s.by * y;
    for (std::size_t c = 0; c < s.bx.size(); ++c) e += s.bx[c] * x[c];
    // An up move of P lowers y = S - P by one tick.
    j += std::expm1(lyap_u(y - s.dir * tick) - u) * std::exp(e);
  }
  return j;
}

double diffusion_ratio(const Eigen::MatrixXd& cov, std::span<const double> y) {
  const auto d = static_cast<Eigen::Index>(y.size());
  double v = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const double g = i == j ? lyap_d2u(y[i]) + lyap_du(y[i]) * lyap_du(y[i]) : lyap_du(y[i]) * lyap_du(y[j]);
      v += 0.5 * cov(i, j) * g;
    }
  return v;
}

double lyap_v(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += lyap_u(v);
  return std::exp(s);
}

}  // namespace

double generator_v(const SignalModel& model, std::span<const double> y, std::span<const double> signal) {
  const int d = model.assets();
  const int sd = model.signal_dim();
  if (static_cast<int>(y.size()) != d || static_cast<int>(signal.size()) != d * sd)
    throw Error(ErrorCode::DimensionMismatch, "generator_v: y or signal size");
  double r = diffusion_ratio(model.covariance(), y);
  for (int i = 0; i < d; ++i)
    r += jump_ratio(model, i, y[static_cast<std::size_t>(i)], signal.subspan(static_cast<std::size_t>(i * sd), static_cast<std::size_t>(sd)));
  return lyap_v(y) * r;
}

LyapunovReport lyapunov_drift_check(const SignalModel& model, const DriftGrid& grid) {
  double bound;
  if (grid.signal_bound) {
    bound = *grid.signal_bound;
  } else if (model.law() == SignalLaw::Uniform) {
    bound = 1.0;
  } else {
    throw Error(ErrorCode::Validation,
                "signal law is unbounded; a compact truncation (signal_bound) is required for the drift check");
  }
  if (!(bound > 0.0) || !std::isfinite(bound)) throw Error(ErrorCode::Validation, "signal bound must be > 0");
  if (grid.y_points < 3 || grid.signal_points < 2 || !(grid.y_max > 0.0))
    throw Error(ErrorCode::Validation, "drift grid too small");
  const int d = model.assets();
  if (d > 2) throw Error(ErrorCode::Validation, "drift check supports one or two assets");
  const int sd = model.signal_dim();
  const int ny = grid.y_points;

  LyapunovReport rep;
  rep.y_grid.resize(static_cast<std::size_t>(ny));
  for (int a = 0; a < ny; ++a) rep.y_grid[static_cast<std::size_t>(a)] = grid.y_max * (2 * a - (ny - 1)) / (ny - 1);

  // Signal grid per asset: the product of signal_points nodes on [-bound, bound].
  std::vector<std::vector<double>> xs;
  {
    std::int64_t count = 1;
    for (int c = 0; c < sd; ++c) count *= grid.signal_points;
    for (std::int64_t idx = 0; idx < count; ++idx) {
      std::vector<double> x(static_cast<std::size_t>(sd));
      std::int64_t rem = idx;
      for (int c = 0; c < sd; ++c) {
        const auto node = static_cast<int>(rem % grid.signal_points);
        rem /= grid.signal_points;
        x[static_cast<std::size_t>(c)] = bound * (2 * node - (grid.signal_points - 1)) / (grid.signal_points - 1);
      }
      xs.push_back(std::move(x));
    }
  }
  // Per asset and grid value: sup over signals of the jump ratio.
  std::vector<std::vector<double>> jmax(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(ny)));
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < ny; ++a) {
      double m = -std::numeric_limits<double>::infinity();
      for (const auto& x : xs) m = std::max(m, jump_ratio(model, i, rep.y_grid[static_cast<std::size_t>(a)], x));
      jmax[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = m;
    }

  const std::int64_t total = d == 1 ? ny : static_cast<std::int64_t>(ny) * ny;
  rep.drift.resize(static_cast<std::size_t>(total));
  const int half = ny / 2;
  // Shell index: distance of the sup-norm layer from the grid edge.
  std::vector<double> shell(static_cast<std::size_t>(half + 1), -std::numeric_limits<double>::infinity());
  std::vector<double> y(static_cast<std::size_t>(d));
  for (std::int64_t p = 0; p < total; ++p) {
    const int a0 = static_cast<int>(p % ny);
    const int a1 = static_cast<int>(p / ny);
    y[0] = rep.y_grid[static_cast<std::size_t>(a0)];
    double r = jmax[0][static_cast<std::size_t>(a0)];
    int ring = std::min(a0, ny - 1 - a0);
    if (d == 2) {
      y[1] = rep.y_grid[static_cast<std::size_t>(a1)];
      r += jmax[1][static_cast<std::size_t>(a1)];
      ring = std::min(ring, std::min(a1, ny - 1 - a1));
    }
    r += diffusion_ratio(model.covariance(), y);
    const double f = lyap_v(y) * (1.0 + r);
    rep.drift[static_cast<std::size_t>(p)] = f;
    auto& sh = shell[static_cast<std::size_t>(std::min(ring, half))];
    sh = std::max(sh, f);
  }
  rep.K = *std::max_element(rep.drift.begin(), rep.drift.end());
  rep.finite = std::isfinite(rep.K);
  rep.max_outside = shell[0];
  // Grow the box inward while every layer outside it stays non-positive.
  if (shell[0] <= 0.0) {
    int ring = 0;
    while (ring + 1 <= half && shell[static_cast<std::size_t>(ring + 1)] <= 0.0) ++ring;
    rep.y_star = std::abs(rep.y_grid[static_cast<std::size_t>(ring)]);
  }
  for (std::int64_t p = 0; p < total; ++p) {
    const int a0 = static_cast<int>(p % ny);
    const int a1 = static_cast<int>(p / ny);
    const std::int64_t q = d == 1 ? ny - 1 - a0 : static_cast<std::int64_t>(ny - 1 - a1) * ny + (ny - 1 - a0);
    const double f = rep.drift[static_cast<std::size_t>(p)], g = rep.drift[static_cast<std::size_t>(q)];
    rep.symmetry_error = std::max(rep.symmetry_error, std::abs(f - g) / std::max(1.0, std::abs(f)));
  }
  return rep;
}

// ---------------------------------------------------------------- impact

ImpactCurve market_impact(std::shared_ptr<const MarketModel> model, const ImpactConfig& cfg) {
  if (model->family() != Family::QueueReactive) throw Error(ErrorCode::Validation, "impact needs a queue-reactive preset");
  if (cfg.size < 0) throw Error(ErrorCode::Validation, "order size must be >= 0");
  if (cfg.reps < 2) throw Error(ErrorCode::Validation, "reps must be >= 2");
  if (!(cfg.step > 0.0) || !(cfg.horizon >= 0.0) || !(cfg.burn_in >= 0.0))
    throw Error(ErrorCode::Validation, "impact grid");
  cfg.sim.validate();
  ImpactCurve c;
  c.size = cfg.size;
  c.reps = cfg.reps;
  const auto G = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.step + 1e-9)) + 1;
  for (std::size_t g = 0; g < G; ++g) c.grid.push_back(static_cast<double>(g) * cfg.step);
  std::vector<double> raw(G * static_cast<std::size_t>(cfg.reps)), adj(raw.size());
  for_reps(cfg.reps, cfg.parallel, [&](int r) {
    Simulator sim(model, cfg.sim, make_rng(cfg.seed, static_cast<std::uint64_t>(r)));
    sim.reset_default();
    sim.advance_to(cfg.burn_in);
    const double p0 = model->price(sim.state(), 0);
    const double s0 = sim.efficient()[0];
    if (cfg.size > 0) sim.market_order(0, Side::Ask, cfg.size);
    for (std::size_t g = 0; g < G; ++g) {
      sim.advance_to(cfg.burn_in + c.grid[g]);
      const double dp = model->price(sim.state(), 0) - p0;
      const std::size_t at = static_cast<std::size_t>(r) * G + g;
      raw[at] = dp;
      // S is a martingale untouched by the order: E[S_t - S_0] = 0.
      adj[at] = dp - (sim.efficient()[0] - s0);
    }
  });
  std::vector<double> col(static_cast<std::size_t>(cfg.reps));
  c.peak = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < G; ++g) {
    for (int r = 0; r < cfg.reps; ++r) col[static_cast<std::size_t>(r)] = adj[static_cast<std::size_t>(r) * G + g];
    const Moments ma = moments(col);
    for (int r = 0; r < cfg.reps; ++r) col[static_cast<std::size_t>(r)] = raw[static_cast<std::size_t>(r) * G + g];
    const Moments mr = moments(col);
    c.mean.push_back(ma.mean);
    c.se.push_back(ma.se);
    c.raw_mean.push_back(mr.mean);
    c.raw_se.push_back(mr.se);
    if (ma.mean > c.peak) {
      c.peak = ma.mean;
      c.peak_time = c.grid[g];
    }
  }
  return c;
}

// ---------------------------------------------------------------- liquidation

LiquidationReport liquidation_study(const std::string& preset, const ThetaSpec& base, const ModelOptions& options,
                                    const LiquidationConfig& cfg) {
  if (cfg.reps < 2) throw Error(ErrorCode::Validation, "reps must be >= 2");
  if (cfg.orders < 0 || !(cfg.interval >= 0.0) || !(cfg.burn_in >= 0.0))
    throw Error(ErrorCode::Validation, "liquidation schedule");
  if (base.index("rho") < 0) throw Error(ErrorCode::Validation, "liquidation needs a two-asset preset with rho");
  cfg.sim.validate();
  LiquidationReport rep;
  rep.sizes = cfg.sizes;
  rep.orders = cfg.orders;
  rep.interval = cfg.interval;
  rep.reps = cfg.reps;
  for (double rho : cfg.rhos) {
    ThetaSpec th = base;
    th.set("rho", rho);
    const auto model = make_model(preset, th, options);
    if (model->family() != Family::QueueReactive) throw Error(ErrorCode::Validation, "liquidation needs a queue-reactive preset");
    if (static_cast<int>(cfg.sizes.size()) != model->assets())
      throw Error(ErrorCode::DimensionMismatch, "one order size per asset");
    LiquidationArm arm;
    arm.rho = rho;
    arm.cost.resize(static_cast<std::size_t>(cfg.reps));
    double shares = 0.0;
    for (auto s : cfg.sizes) {
      if (s < 0) throw Error(ErrorCode::Validation, "order sizes must be >= 0");
      shares += static_cast<double>(s) * cfg.orders;
    }
    for_reps(cfg.reps, cfg.parallel, [&](int r) {
      // Same replicate seeds in every arm.
      Simulator sim(model, cfg.sim, make_rng(cfg.seed, static_cast<std::uint64_t>(r)));
      sim.reset_default();
      sim.advance_to(cfg.burn_in);
      const std::vector<double> p0 = model->prices(sim.state());
      double cash = 0.0, ref = 0.0;
      for (int k = 0; k < cfg.orders; ++k) {
        sim.advance_to(cfg.burn_in + k * cfg.interval);
        for (int i = 0; i < model->assets(); ++i) {
          const auto sz = cfg.sizes[static_cast<std::size_t>(i)];
          if (sz == 0) continue;
          cash += sim.market_order(i, Side::Ask, sz).cash;
          ref += static_cast<double>(sz) * p0[static_cast<std::size_t>(i)];
        }
      }
      arm.cost[static_cast<std::size_t>(r)] = shares > 0.0 ? (cash - ref) / shares : 0.0;
    });
    arm.stats = moments(arm.cost);
    rep.arms.push_back(std::move(arm));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& a : rep.arms)
    for (double v : a.cost) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  for (auto& a : rep.arms) a.hist = histogram(a.cost, lo, hi, cfg.bins);
  return rep;
}

// ---------------------------------------------------------------- json

nlohmann::ordered_json to_json(const ScalingReport& r) {
  nlohmann::ordered_json j;
  j["preset"] = r.preset;
  j["eps"] = r.eps;
  j["T"] = r.T;
  j["reps"] = r.reps;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.n_list.size(); ++k)
    rows.push_back({{"n", r.n_list[k]},
                    {"exceed", r.exceed[k]},
                    {"prob", r.prob[k]},
                    {"ci", {r.ci[k].lo, r.ci[k].hi}},
                    {"mean_sup", r.mean_sup[k]}});
  j["scales"] = std::move(rows);
  j["non_increasing"] = r.non_increasing();
  j["decreasing"] = r.decreasing();
  return j;
}

nlohmann::ordered_json to_json(const LyapunovReport& r, bool with_field) {
  nlohmann::ordered_json j;
  j["K"] = num(r.K);
  j["finite"] = r.finite;
  j["y_star"] = r.y_star ? nlohmann::ordered_json(*r.y_star) : nlohmann::ordered_json(nullptr);
  j["max_outside"] = num(r.max_outside);
  j["symmetry_error"] = r.symmetry_error;
  j["y_max"] = r.y_grid.empty() ? 0.0 : r.y_grid.back();
  j["y_points"] = r.y_grid.size();
  if (with_field) {
    j["y_grid"] = r.y_grid;
    auto f = nlohmann::ordered_json::array();
    for (double v : r.drift) f.push_back(num(v));
    j["drift"] = std::move(f);
  }
  return j;
}

nlohmann::ordered_json to_json(const ImpactCurve& c) {
  nlohmann::ordered_json j;
  j["size"] = c.size;
  j["reps"] = c.reps;
  j["peak"] = c.peak;
  j["peak_time"] = c.peak_time;
  j["grid"] = c.grid;
  j["mean"] = c.mean;
  j["se"] = c.se;
  auto lo = c.mean, hi = c.mean;
  for (std::size_t g = 0; g < lo.size(); ++g) {
    lo[g] -= 1.96 * c.se[g];
    hi[g] += 1.96 * c.se[g];
  }
  j["ci_lo"] = lo;
  j["ci_hi"] = hi;
  j["raw_mean"] = c.raw_mean;
  j["raw_se"] = c.raw_se;
  return j;
}

nlohmann::ordered_json to_json(const LiquidationReport& r, bool with_samples) {
  nlohmann::ordered_json j;
  j["sizes"] = r.sizes;
  j["orders"] = r.orders;
  j["interval"] = r.interval;
  j["reps"] = r.reps;
  auto arms = nlohmann::ordered_json::array();
  for (const auto& a : r.arms) {
    nlohmann::ordered_json ja;
    ja["rho"] = a.rho;
    ja["mean"] = a.stats.mean;
    ja["var"] = a.stats.var;
    ja["se"] = a.stats.se;
    ja["var_se"] = a.stats.var_se;
    ja["hist_edges"] = a.hist.edges;
    ja["hist_counts"] = a.hist.counts;
    if (with_samples) ja["cost"] = a.cost;
    arms.push_back(std::move(ja));
  }
  j["arms"] = std::move(arms);
  return j;
}

}  // namespace efflob
