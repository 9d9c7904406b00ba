// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here. Hours-scale criteria only run with --long or EFFLOB_LONG_ACCEPTANCE=1.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "efflob/analysis.hpp"
#include "efflob/estimator.hpp"
#include "efflob/likelihood.hpp"
#include "efflob/lob.hpp"
#include "efflob/sim.hpp"
#include "lob_oracle.hpp"

using namespace efflob;
using efflob::oracle::mid_rule_dp;
using efflob::oracle::piles;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// ---- 1: closed-form likelihood ----

Outcome closed_form() {
  Timer tm;
  auto th = default_theta("poisson");
  th.set("rate.up", 1.2);
  th.set("rate.down", 0.8);
  const auto m = make_model("poisson", th);
  SimConfig sc;
  sc.horizon = 100;
  sc.seed = 101;
  const auto log = simulate(m, sc);
  const auto c = log.counts();
  const auto n = [&](const char* e) { return static_cast<double>(c[static_cast<std::size_t>(m->event_index(e))]); };
  const double expect = n("up") * std::log(1.2) + n("down") * std::log(0.8) - 100.0 * (1.2 - 1.0 + 0.8 - 1.0);
  LikelihoodConfig cfg;
  cfg.max_step = 1e-4;
  const auto r = log_likelihood(log, *m, cfg);
  const double d = std::abs(r.value - expect);
  const double s = tm.seconds();
  return {d < 1e-6 && s < 1.0,
          fmt("%zu events, |delta| = %.2e (tol 1e-6), %.2f s (limit 1 s)", log.records.size(), d, s)};
}

// ---- 2: Monte-Carlo agreement ----

Outcome mc_agreement() {
  Timer tm;
  const auto m = make_model("model1", default_theta("model1"));
  SimConfig sc;
  sc.horizon = 50;
  sc.seed = 202;
  const auto log = simulate(m, sc);
  const auto r = log_likelihood(log, *m);
  const auto mc = mc_log_likelihood(log, *m, 20000, 20, 203);
  const double d = std::abs(r.value - mc.estimate);
  const double s = tm.seconds();
  return {!r.fault && d <= 3 * mc.std_error && s < 120.0,
          fmt("%zu events, ode %.4f, mc %.4f +- %.4f, |delta| = %.2f se (tol 3), %.1f s (limit 120 s)",
              log.records.size(), r.value, mc.estimate, mc.std_error, d / mc.std_error, s)};
}

// ---- 3: exhaustive delta_p ----

Outcome delta_p_exhaustive() {
  Timer tm;
  std::int64_t checked = 0, bad = 0;
  for (int K = 1; K <= 3; ++K) {
    std::vector<OrderEvent> evs;
    for (Volume n = 1; n <= 2; ++n)
      for (Pile j : piles(K)) {
        evs.push_back(OrderEvent::consume(j, n));
        evs.push_back(OrderEvent::limit(j, Side::Bid, n));
        evs.push_back(OrderEvent::limit(j, Side::Ask, n));
        for (Pile t : piles(K))
          if (!(t == j)) evs.push_back(OrderEvent::modif(j, t, n));
      }
    std::vector<Volume> v(static_cast<std::size_t>(2 * K), 0);
    while (true) {
      const auto q = LobState::from_price_ordered(v);
      if (q.valid())
        for (const auto& e : evs)
          if (is_licit(q, e)) {
            ++checked;
            bad += delta_p(q, e) != mid_rule_dp(q, e);
          }
      std::size_t i = 0;
      while (i < v.size() && v[i] == 2) v[i++] = 0;
      if (i == v.size()) break;
      ++v[i];
    }
  }
  const double s = tm.seconds();
  return {bad == 0 && checked > 0 && s < 10.0,
          fmt("%lld licit (state, event) pairs, %lld mismatches, %.2f s (limit 10 s)", static_cast<long long>(checked),
              static_cast<long long>(bad), s)};
}

// ---- 4-6: parameter recovery ----

struct Recovery {
  std::vector<ThetaSpec> fits;
  double seconds = 0.0;
};

Recovery recover(const std::string& preset, double T, int reps, std::uint64_t seed) {
  Timer tm;
  Recovery out;
  const auto m = make_model(preset, default_theta(preset));
  for (int r = 0; r < reps; ++r) {
    SimConfig sc;
    sc.horizon = T;
    sc.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    const auto log = simulate(m, sc);
    EstimatorConfig ec;
    ec.cmaes.seed = derive_seed(seed + 1, static_cast<std::uint64_t>(r));
    const auto fit = estimate(log, preset, ec);
    out.fits.push_back(fit.theta);
    std::fprintf(stderr, "  %s T=%g rep %d: loglik %.3f, %lld evals,", preset.c_str(), T, r, fit.loglik,
                 static_cast<long long>(fit.evals));
    for (std::size_t i = 0; i < fit.theta.size(); ++i)
      std::fprintf(stderr, " %s=%.4g", fit.theta.names[i].c_str(), fit.theta.values[i]);
    std::fprintf(stderr, "\n");
  }
  out.seconds = tm.seconds();
  return out;
}

struct Stat {
  double mean = 0.0;
  double mse = 0.0;
};

Stat stat(const Recovery& r, const std::string& name, double truth) {
  Stat s;
  for (const auto& th : r.fits) {
    s.mean += th.at(name);
    s.mse += std::pow(th.at(name) - truth, 2);
  }
  s.mean /= static_cast<double>(r.fits.size());
  s.mse /= static_cast<double>(r.fits.size());
  return s;
}

std::map<std::pair<double, int>, Recovery> g_model1;

const Recovery& model1_fits(double T, int reps) {
  const auto key = std::make_pair(T, reps);
  auto it = g_model1.find(key);
  if (it == g_model1.end()) it = g_model1.emplace(key, recover("model1", T, reps, 4000 + static_cast<std::uint64_t>(T))).first;
  return it->second;
}

Outcome recovery_smoke() {
  const auto& r = model1_fits(200, 3);
  const auto s = stat(r, "limit.a2", -1.0);
  return {s.mse <= 5e-2 && r.seconds < 1800,
          fmt("T=200, 3 reps: mean alpha2(limit) %.4f, MSE %.2e (tol 5e-2), %.0f s (limit 1800 s)", s.mean, s.mse,
              r.seconds)};
}

Outcome recovery_full() {
  const auto& r = model1_fits(1000, 5);
  const auto s = stat(r, "limit.a2", -1.0);
  return {std::abs(s.mean + 1.0) <= 0.15 && s.mse <= 1e-2,
          fmt("T=1000, 5 reps: mean alpha2(limit) %.4f (tol -1 +- 0.15), MSE %.2e (tol 1e-2), %.0f s", s.mean, s.mse,
              r.seconds)};
}

Outcome mse_slope() {
  const auto a = stat(model1_fits(200, 5), "cancel.a2", 1.0);
  const auto b = stat(model1_fits(1000, 5), "cancel.a2", 1.0);
  const double slope = (std::log(b.mse) - std::log(a.mse)) / (std::log(1000.0) - std::log(200.0));
  return {slope >= -1.6 && slope <= -0.4,
          fmt("MSE alpha2(cancel) %.2e at T=200, %.2e at T=1000, log-log slope %.2f (tol [-1.6, -0.4])", a.mse, b.mse,
              slope)};
}

Outcome recovery_model2() {
  const auto r = recover("model2", 1000, 3, 6000);
  const auto s = stat(r, "rho", 0.6);
  return {std::abs(s.mean - 0.6) <= 0.35,
          fmt("T=1000, 3 reps: mean rho %.4f (tol 0.6 +- 0.35), MSE %.2e, %.0f s", s.mean, s.mse, r.seconds)};
}

// ---- 7: scaling ----

std::string probs(const ScalingReport& r) {
  std::string s;
  for (std::size_t k = 0; k < r.n_list.size(); ++k) s += fmt("%s%d:%.3f", k ? " " : "", r.n_list[k], r.prob[k]);
  return s;
}

Outcome scaling(double eps, bool literal) {
  const auto th = default_theta("model1");
  ScalingConfig cfg;
  cfg.eps = eps;
  cfg.reps = 200;
  cfg.seed = 707;
  const auto model = scaling_check(make_model("model1", th), cfg);
  const auto ctl = scaling_check(make_model("model1", zero_intensity_theta(th)), cfg);
  // The test: non-increasing within 2 se and a drop of more than 2 se overall.
  const bool pass = model.decreasing() && !ctl.decreasing();
  std::string d = fmt("eps %g: model1 [%s] %s; zero-intensity control [%s] %s", eps, probs(model).c_str(),
                      model.decreasing() ? "decreasing" : "not decreasing", probs(ctl).c_str(),
                      ctl.decreasing() ? "decreasing" : "not decreasing");
  if (literal && !pass) d += " (every exceedance is 0 at this threshold, the test cannot separate the two)";
  return {pass, d};
}

// ---- 8: Lyapunov drift ----

Outcome lyapunov() {
  const auto m = make_model("model2", default_theta("model2"));
  DriftGrid g;
  g.signal_bound = 3.0;
  const auto r = lyapunov_drift_check(dynamic_cast<const SignalModel&>(*m), g);
  const bool pass = r.finite && r.y_star.has_value() && *r.y_star < g.y_max && r.max_outside < 0.0;
  return {pass, fmt("K = %.4g (finite %s), LV + V <= 0 for max|y_i| >= %s, outer layer max %.3g", r.K,
                    r.finite ? "yes" : "no", r.y_star ? fmt("%g", *r.y_star).c_str() : "none", r.max_outside)};
}

// ---- 9: impact ----

Outcome impact() {
  Timer tm;
  ImpactConfig cfg;
  cfg.seed = 909;
  const auto c = market_impact(make_model("impact", default_theta("impact")), cfg);
  const double last = c.mean.back();
  const double s = tm.seconds();
  const bool pass = c.peak > 0.0 && c.peak_time <= 10.0 && last < 0.5 * c.peak && s < 1800;
  return {pass, fmt("peak %.4f at t=%g s (need > 0 within 10 s), value at %g s %.4f +- %.4f (need < %.4f), %.0f s",
                    c.peak, c.peak_time, c.grid.back(), last, c.se.back(), 0.5 * c.peak, s)};
}

// ---- 10: liquidation ----

Outcome liquidation() {
  LiquidationConfig cfg;
  cfg.seed = 1010;
  auto th = default_theta("impact2");
  th.set("sigma1", 0.02);
  th.set("sigma2", 0.01);
  const auto r = liquidation_study("impact2", th, {}, cfg);
  bool pass = r.arms.size() == 3;
  std::string d;
  for (const auto& a : r.arms) {
    pass = pass && std::abs(a.stats.mean - 0.17) <= 0.05;
    d += fmt("rho %+.1f: mean %.4f var %.5f; ", a.rho, a.stats.mean, a.stats.var);
  }
  const bool ordered = r.arms.size() == 3 && r.arms[0].stats.var < r.arms[1].stats.var &&
                       r.arms[1].stats.var < r.arms[2].stats.var;
  d += fmt("means within 0.17 +- 0.05: %s, variances increasing in rho: %s", pass ? "yes" : "no",
           ordered ? "yes" : "no");
  return {pass && ordered, d};
}

// ---- 11: determinism ----

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

Outcome determinism(const std::string& cli) {
  if (!fs::exists(cli)) return {false, "CLI binary not found: " + cli};
  const fs::path dir = fs::temp_directory_path() / fmt("efflob_acceptance_%d", static_cast<int>(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "fit.cfg");
    f << "[run]\npreset = model1\nseed = 5\n[estimator]\nrestarts = 1\nmax_evals = 120\n";
    std::ofstream(dir / "imp.cfg") << "[run]\npreset = impact\nseed = 6\n[impact]\nreps = 200\nhorizon = 30\nburn_in = 20\n";
    std::ofstream(dir / "liq.cfg") << "[run]\npreset = impact2\nseed = 6\n[liquidation]\nreps = 40\norders = 3\n"
                                      "burn_in = 20\n";
    std::ofstream(dir / "sc.cfg") << "[run]\nseed = 6\n[scaling]\nreps = 30\n";
    std::ofstream(dir / "l2.cfg") << "[run]\npreset = model2\n[lyapunov]\nsignal_bound = 3\ny_points = 101\n";
  }
  const std::string d = dir.string() + "/";
  // Each entry is run twice into two files, with different thread counts.
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"simulate", "simulate --preset model1 --horizon 60 --seed 7"},
      {"simulate2", "simulate --preset model2 --horizon 60 --seed 7"},
      {"likelihood", "likelihood --log " + d + "simulate.a --reps 300 --seed 3"},
      {"estimate", "estimate --config " + d + "fit.cfg --log " + d + "simulate.a"},
      {"impact", "impact --config " + d + "imp.cfg"},
      {"liquidate", "liquidate --config " + d + "liq.cfg"},
      {"scaling", "scaling-check --config " + d + "sc.cfg --control"},
      {"lyapunov", "lyapunov-check --config " + d + "l2.cfg"},
      {"validate", "validate-log --log " + d + "simulate.a"},
      {"export", "export --log " + d + "simulate2.a"},
      {"ingest", "ingest --log " + d + "export.a"},
  };
  std::vector<std::string> failed;
  for (const auto& [name, args] : runs) {
    for (const char* tag : {"a", "b"}) {
      const std::string cmd = cli + " " + args + " --out " + d + name + "." + tag +
                              (tag[0] == 'b' ? " --jobs 1" : " --jobs 3") + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) failed.push_back(name + " (exit status)");
    }
    const auto a = slurp(dir / (name + ".a")), b = slurp(dir / (name + ".b"));
    if (a.empty() || a != b) failed.push_back(name);
  }
  fs::remove_all(dir);
  std::string detail = fmt("%zu subcommand runs compared byte for byte", runs.size());
  if (!failed.empty()) {
    detail += "; differing:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

struct Criterion {
  std::string id;
  std::string title;
  bool long_only;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"efflob acceptance criteria"};
  std::vector<std::string> only;
  bool long_run = false;
  std::string cli = EFFLOB_CLI_PATH;
  app.add_option("--only", only, "criterion ids to run (e.g. 1 4s 7)")->delimiter(',');
  app.add_flag("--long", long_run, "include the hours-scale criteria");
  app.add_option("--cli", cli, "efflob binary for the determinism check");
  CLI11_PARSE(app, argc, argv);
  if (const char* e = std::getenv("EFFLOB_LONG_ACCEPTANCE"); e && std::string(e) == "1") long_run = true;

  const std::vector<Criterion> all = {
      {"1", "closed-form likelihood", false, closed_form},
      {"2", "Monte-Carlo agreement, Model 1", false, mc_agreement},
      {"3", "delta_p exhaustive oracle", false, delta_p_exhaustive},
      {"4s", "parameter recovery, Model 1 (smoke)", false, recovery_smoke},
      {"4", "parameter recovery, Model 1", true, recovery_full},
      {"5", "MSE slope, Model 1", true, mse_slope},
      {"6", "parameter recovery, Model 2", true, recovery_model2},
      {"7", "scaling convergence (eps 0.5 as stated)", false, [] { return scaling(0.5, true); }},
      {"7c", "scaling convergence (eps 0.03, diagnostic)", false, [] { return scaling(0.03, false); }},
      {"8", "Lyapunov drift", false, lyapunov},
      {"9", "market impact", false, impact},
      {"10", "liquidation", false, liquidation},
      {"11", "determinism", false, [&] { return determinism(cli); }},
  };
  const std::set<std::string> want(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : all) {
    const bool selected = want.empty() || want.count(c.id) != 0;
    if (!selected) continue;
    if (c.long_only && !long_run && want.empty()) {
      std::printf("[SKIP] %-3s %s: long criterion, run with --long or EFFLOB_LONG_ACCEPTANCE=1\n", c.id.c_str(),
                  c.title.c_str());
      std::fflush(stdout);
      continue;
    }
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %-3s %s: %s\n", o.pass ? "PASS" : "FAIL", c.id.c_str(), c.title.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
