#include <doctest.h>

#include <cmath>

#include "efflob/analysis.hpp"
#include "efflob/error.hpp"

using namespace efflob;

namespace {

const SignalModel& as_signal(const std::shared_ptr<const MarketModel>& m) {
  return dynamic_cast<const SignalModel&>(*m);
}

}  // namespace

TEST_CASE("Wilson interval") {
  const auto w = wilson_interval(5, 10);
  CHECK(w.lo == doctest::Approx(0.2366).epsilon(1e-3));
  CHECK(w.hi == doctest::Approx(0.7634).epsilon(1e-3));
  const auto z = wilson_interval(0, 50);
  CHECK(z.lo == 0.0);
  CHECK(z.hi > 0.0);
  const auto o = wilson_interval(50, 50);
  CHECK(o.hi == doctest::Approx(1.0));
}

TEST_CASE("moments and histograms") {
  const std::vector<double> xs{1, 2, 3, 4};
  const auto m = moments(xs);
  CHECK(m.mean == 2.5);
  CHECK(m.var == doctest::Approx(5.0 / 3));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
  const auto h = histogram(xs, 0, 4, 2);
  REQUIRE(h.edges.size() == 3);
  CHECK(h.counts == std::vector<std::int64_t>{1, 3});
}

TEST_CASE("Lyapunov function is C2 at the joins") {
  for (double s : {-1.0, 1.0}) {
    const double in = s * (1 - 1e-12), out = s * (1 + 1e-12);
    CHECK(lyap_u(in) == doctest::Approx(lyap_u(out)).epsilon(1e-10));
    CHECK(lyap_du(in) == doctest::Approx(lyap_du(out)).epsilon(1e-10));
    CHECK(std::abs(lyap_d2u(in) - lyap_d2u(out)) < 1e-10);
  }
  // inner piece 3/8 + 3y^2/4 - y^4/8 and its derivatives at y = 1, in exact arithmetic
  CHECK(3.0 / 8 + 3.0 / 4 - 1.0 / 8 == 1.0);  // |y|
  CHECK(3.0 / 2 - 1.0 / 2 == 1.0);            // d|y|/dy
  CHECK(3.0 / 2 - 3.0 / 2 == 0.0);            // d2|y|/dy2
  CHECK(lyap_u(0.5) == 3.0 / 8 + 3.0 / 16 - 1.0 / 128);
  CHECK(lyap_du(0.5) == 3.0 / 4 - 1.0 / 16);
  CHECK(lyap_d2u(0.5) == 3.0 / 2 - 3.0 / 8);
  CHECK(lyap_u(-3.0) == 3.0);
}

TEST_CASE("zero intensities: only the diffusion term is left") {
  auto th = zero_intensity_theta(default_theta("model2"));
  th.set("rho", 0.0);
  const auto m = make_model("model2", th);
  const auto& sm = as_signal(m);
  const auto& C = m->covariance();
  const std::vector<double> x(4, 0.3);
  for (std::vector<double> y : {std::vector<double>{1.5, -2.0}, std::vector<double>{-4.0, 7.25}}) {
    const double v = std::exp(std::abs(y[0]) + std::abs(y[1]));
    const double expect = v * 0.5 * (C(0, 0) + C(1, 1));
    CHECK(generator_v(sm, y, x) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("drift check on the two-asset signal model") {
  const auto m = make_model("model2", default_theta("model2"));
  DriftGrid g;
  g.y_points = 201;
  g.signal_points = 7;
  CHECK_THROWS_AS(lyapunov_drift_check(as_signal(m), g), Error);
  g.signal_bound = 3.0;
  const auto r = lyapunov_drift_check(as_signal(m), g);
  CHECK(r.finite);
  CHECK(r.K >= 1.0);
  REQUIRE(r.y_star.has_value());
  CHECK(*r.y_star < g.y_max);
  CHECK(r.max_outside < 0.0);
  CHECK(r.symmetry_error <= 1e-12);
  // uniform signals default to [-1, 1]
  const auto im = make_model("imbalance", default_theta("imbalance"));
  DriftGrid gi;
  gi.y_points = 101;
  CHECK(lyapunov_drift_check(as_signal(im), gi).finite);
}

TEST_CASE("scaling check: trivial thresholds and the frozen control") {
  const auto m = make_model("model1", default_theta("model1"));
  ScalingConfig cfg;
  cfg.reps = 40;
  cfg.eps = 1e6;
  cfg.seed = 3;
  const auto r = scaling_check(m, cfg);
  for (double p : r.prob) CHECK(p == 0.0);
  CHECK(r.non_increasing());
  CHECK_FALSE(r.decreasing());

  // With a frozen reference price the rescaled gap is a Brownian sup, whose
  // law does not depend on n.
  const auto z = make_model("model1", zero_intensity_theta(default_theta("model1")));
  cfg.eps = 0.01;
  cfg.reps = 300;
  const auto c = scaling_check(z, cfg);
  CHECK_FALSE(c.decreasing());
  for (std::size_t k = 0; k < c.prob.size(); ++k) {
    CHECK(c.prob[k] >= 0.0);
    CHECK(c.prob[k] <= 1.0);
    CHECK(c.ci[k].lo <= c.prob[k]);
    CHECK(c.ci[k].hi >= c.prob[k]);
  }
  // serial and parallel agree
  cfg.reps = 20;
  auto s = cfg;
  s.parallel = false;
  CHECK(to_json(scaling_check(m, cfg)).dump() == to_json(scaling_check(m, s)).dump());
}

TEST_CASE("impact of an empty order is zero") {
  const auto m = make_model("impact", default_theta("impact"));
  ImpactConfig cfg;
  cfg.size = 0;
  cfg.reps = 100;
  cfg.horizon = 20;
  cfg.burn_in = 10;
  const auto c = market_impact(m, cfg);
  for (std::size_t g = 0; g < c.grid.size(); ++g) CHECK(std::abs(c.mean[g]) <= 3 * c.se[g] + 1e-15);
  CHECK(c.grid.front() == 0.0);
  CHECK(c.grid.back() == doctest::Approx(20.0));
}

TEST_CASE("bigger orders do not move the price less") {
  const auto m = make_model("impact", default_theta("impact"));
  ImpactConfig cfg;
  cfg.reps = 400;
  cfg.horizon = 10;
  cfg.burn_in = 20;
  cfg.seed = 4;
  cfg.size = 20;
  const auto a = market_impact(m, cfg);
  cfg.size = 40;
  const auto b = market_impact(m, cfg);
  CHECK(b.peak >= a.peak - 2 * std::hypot(a.se[0], b.se[0]));
  CHECK(a.peak > 0.0);
}

TEST_CASE("liquidation without orders costs nothing") {
  LiquidationConfig cfg;
  cfg.reps = 40;
  cfg.orders = 3;
  cfg.sizes = {0, 0};
  cfg.burn_in = 10;
  cfg.rhos = {0.0};
  const auto r = liquidation_study("impact2", default_theta("impact2"), {}, cfg);
  REQUIRE(r.arms.size() == 1);
  CHECK(r.arms[0].cost.size() == 40);
  for (double c : r.arms[0].cost) CHECK(c == 0.0);
}

TEST_CASE("liquidation arms share sample sizes") {
  LiquidationConfig cfg;
  cfg.reps = 30;
  cfg.orders = 4;
  cfg.burn_in = 10;
  const auto r = liquidation_study("impact2", default_theta("impact2"), {}, cfg);
  REQUIRE(r.arms.size() == 3);
  for (const auto& a : r.arms) {
    CHECK(a.cost.size() == 30);
    CHECK(a.hist.edges == r.arms[0].hist.edges);
  }
}
