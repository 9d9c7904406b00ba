#include <doctest.h>

#include <cmath>
#include <random>

#include "efflob/likelihood.hpp"
#include "efflob/sim.hpp"

using namespace efflob;

namespace {

std::shared_ptr<const MarketModel> poisson(double up, double down) {
  auto th = default_theta("poisson");
  th.set("rate.up", up);
  th.set("rate.down", down);
  return make_model("poisson", th);
}

EventLog sim_log(std::shared_ptr<const MarketModel> m, double T, std::uint64_t seed) {
  SimConfig cfg;
  cfg.horizon = T;
  cfg.seed = seed;
  return simulate(m, cfg);
}

// Point-process log-likelihood along the path S = S_0: y only moves with P.
double frozen_s_loglik(const EventLog& log, const MarketModel& m) {
  auto table = m.make_table();
  MarketState x = log.header.x0;
  const double s0 = m.price(x, 0);
  double t = 0, ll = 0;
  auto integrate = [&](double len) {
    m.coeffs(x, table);
    const double y[1] = {s0 - m.price(x, 0)};
    for (int k = 0; k < table.events(); ++k)
      if (table.active(k)) ll -= len * (eval_intensity(table, k, y) - 1.0);
  };
  for (const auto& r : log.records) {
    integrate(r.t - t);
    if (r.z >= 0) {
      m.coeffs(x, table);
      const double y[1] = {s0 - m.price(x, 0)};
      ll += log_intensity(table, r.z, y);
    }
    x = r.x;
    t = r.t;
  }
  integrate(log.header.horizon - t);
  return ll;
}

}  // namespace

TEST_CASE("jump update multiplies u by the intensity") {
  MultiIndexPoly a(1, 4), bz(1, 4);
  a[0] = 0.3;
  a[1] = -0.2;
  a[2] = 0.5;
  bz[0] = 0.7;
  bz[1] = -1.1;
  auto b = a;
  jump_update(b, bz);
  CHECK(b[0] == doctest::Approx(0.3 - 0.7));
  CHECK(b[1] == doctest::Approx(-0.2 + 1.1));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    const double y[1] = {u(rng)};
    const double lhs = std::exp(-b.evaluate(y));
    const double rhs = std::exp(bz.evaluate(y)) * std::exp(-a.evaluate(y));
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, rhs));
  }
  MultiIndexPoly zero(1, 4);
  auto c = a;
  jump_update(c, zero);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(c[i] == a[i]);
}

TEST_CASE("right-hand side of the coefficient system") {
  const double s = 0.3;
  Eigen::MatrixXd cov(1, 1);
  cov(0, 0) = s * s;
  MultiIndexPoly a(1, 2), b(1, 2), out(1, 2);
  a[0] = 0.4;
  b[0] = 1.3;
  ode_rhs_reference(a, b, cov, out);
  CHECK(out[0] == doctest::Approx(-1.3));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);

  // u = exp(-a0 - a1 y - a2 y^2) substituted into u_t + s^2/2 u_yy = c u
  a[1] = -0.7;
  a[2] = 0.25;
  b[1] = 0.2;
  b[2] = -0.6;
  ode_rhs_reference(a, b, cov, out);
  const double v = s * s;
  CHECK(out[0] == doctest::Approx(-v * a[2] + 0.5 * v * a[1] * a[1] - b[0]).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(2 * v * a[1] * a[2] - b[1]).epsilon(1e-14));
  CHECK(out[2] == doctest::Approx(2 * v * a[2] * a[2] - b[2]).epsilon(1e-14));
}

TEST_CASE("tensor right-hand side equals the reference") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1e-4, 0.6e-4, 0.6e-4, 4e-4;
  const auto set = MultiIndexSet::get(2, 6);
  RiccatiOperator op(set, cov);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  MultiIndexPoly a(set), b(set), ref(set);
  for (auto& c : a.coeffs()) c = n01(rng);
  for (auto& c : b.coeffs()) c = n01(rng);
  ode_rhs_reference(a, b, cov, ref);
  std::vector<double> out(a.size());
  op.rhs(a.coeffs(), b.coeffs(), out);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("interval integration") {
  Eigen::MatrixXd cov(1, 1);
  cov(0, 0) = 1e-2;
  const auto set = MultiIndexSet::get(1, 2);
  RiccatiOperator op(set, cov);
  LikelihoodConfig cfg;
  MultiIndexPoly a(set), b(set);
  REQUIRE(integrate_interval(a, b, op, cov, 2.0, cfg));
  for (double c : a.coeffs()) CHECK(c == 0.0);

  b[0] = 0.8;
  a[0] = 0.1;
  cfg.max_step = 0.7;
  cfg.min_substeps = 1;
  REQUIRE(integrate_interval(a, b, op, cov, 2.5, cfg));
  CHECK(a[0] == doctest::Approx(0.1 + 0.8 * 2.5).epsilon(1e-15));

  // quadratic forcing against a 100x finer solution
  MultiIndexPoly q(set), r(set);
  b[1] = 0.3;
  b[2] = 0.5;
  LikelihoodConfig coarse, fine;
  coarse.integrator = fine.integrator = Integrator::Rk4;
  coarse.max_step = 1e-2;
  fine.max_step = 1e-4;
  REQUIRE(integrate_interval(q, b, op, cov, 1.0, coarse));
  REQUIRE(integrate_interval(r, b, op, cov, 1.0, fine));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(q[i] - r[i]) <= 1e-4 * std::abs(r[i]));

  MultiIndexPoly big(set);
  big[2] = -1e6;
  cov(0, 0) = 1.0;
  RiccatiOperator op2(set, cov);
  CHECK_FALSE(integrate_interval(big, b, op2, cov, 1.0, LikelihoodConfig{}));
}

TEST_CASE("constant intensities: closed form") {
  const auto m = poisson(1.3, 0.6);
  const auto log = sim_log(m, 100, 3);
  const auto c = log.counts();
  const double expect = c[static_cast<std::size_t>(m->event_index("up"))] * std::log(1.3) +
                        c[static_cast<std::size_t>(m->event_index("down"))] * std::log(0.6) -
                        100 * (1.3 - 1 + 0.6 - 1);
  LikelihoodConfig cfg;
  cfg.max_step = 1e-4;
  const auto r = log_likelihood(log, *m, cfg);
  REQUIRE_FALSE(r.fault);
  CHECK(std::abs(r.value - expect) < 1e-8);

  EventLog empty = log;
  empty.records.clear();
  CHECK(log_likelihood(empty, *m, cfg).value == doctest::Approx(-100 * (1.3 + 0.6 - 2)).epsilon(1e-14));

  const auto mc = mc_log_likelihood(log, *m, 200, 5, 1);
  CHECK(std::abs(mc.estimate - expect) < 1e-8);
  CHECK(mc.std_error < 1e-8);
}

TEST_CASE("vanishing volatility: the latent path is constant") {
  auto th = default_theta("model1");
  const auto m = make_model("model1", th);
  const auto log = sim_log(m, 10, 4);
  th.set("sigma", 1e-9);
  const auto m0 = make_model("model1", th);
  const double expect = frozen_s_loglik(log, *m0);
  const auto mc = mc_log_likelihood(log, *m0, 50, 5, 2);
  CHECK(mc.estimate == doctest::Approx(expect).epsilon(1e-6));
  const auto r = log_likelihood(log, *m0);
  CHECK(r.value == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("Model 1: backward ODE agrees with Monte Carlo on a short log") {
  const auto m = make_model("model1", default_theta("model1"));
  const auto log = sim_log(m, 10, 12);
  const auto r = log_likelihood(log, *m);
  const auto mc = mc_log_likelihood(log, *m, 4000, 20, 3);
  MESSAGE("ode ", r.value, " mc ", mc.estimate, " +- ", mc.std_error);
  CHECK(std::abs(r.value - mc.estimate) <= 3 * mc.std_error);

  const auto mc2 = mc_log_likelihood(log, *m, 8000, 20, 4);
  CHECK(mc.std_error / mc2.std_error == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
  // serial and parallel paths give the same number
  const auto s = mc_log_likelihood(log, *m, 500, 10, 5, false);
  const auto p = mc_log_likelihood(log, *m, 500, 10, 5, true);
  CHECK(s.estimate == p.estimate);
}

TEST_CASE("halving the ODE step barely moves the Model 1 likelihood") {
  const auto m = make_model("model1", default_theta("model1"));
  const auto log = sim_log(m, 50, 6);
  LikelihoodConfig a, b;
  b.max_step = a.max_step / 2;
  const double la = log_likelihood(log, *m, a).value;
  const double lb = log_likelihood(log, *m, b).value;
  CHECK(std::abs(la - lb) < 5e-3 * std::abs(lb));
}

TEST_CASE("two-asset logs") {
  const auto m = make_model("model2", default_theta("model2"));
  const auto log = sim_log(m, 20, 7);
  const auto r = log_likelihood(log, *m);
  REQUIRE_FALSE(r.fault);
  const auto mc = mc_log_likelihood(log, *m, 4000, 20, 8);
  MESSAGE("ode ", r.value, " mc ", mc.estimate, " +- ", mc.std_error);
  CHECK(std::abs(r.value - mc.estimate) <= 3 * mc.std_error);
}
