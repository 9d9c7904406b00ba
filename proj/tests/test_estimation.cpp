#include <doctest.h>

#include <cmath>

#include "efflob/cmaes.hpp"
#include "efflob/estimator.hpp"
#include "efflob/sim.hpp"

using namespace efflob;

TEST_CASE("CMA-ES on the sphere") {
  CmaesConfig cfg;
  cfg.max_evals = 5000;
  cfg.seed = 1;
  cfg.tol_fun = 0;
  cfg.f_target = 1e-11;
  const auto r = cmaes_minimize([](const Eigen::VectorXd& x) { return x.squaredNorm(); },
                                Eigen::VectorXd::Constant(5, 1.0), cfg);
  CHECK(r.f < 1e-10);
  CHECK(r.evals <= 5000);
  CHECK(r.stop == "f_target");
}

TEST_CASE("CMA-ES on Rosenbrock") {
  CmaesConfig cfg;
  cfg.max_evals = 20000;
  cfg.seed = 2;
  cfg.tol_fun = 0;
  cfg.f_target = 1e-7;
  auto rosen = [](const Eigen::VectorXd& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  const auto r = cmaes_minimize(rosen, Eigen::Vector2d(-1.2, 1.0), cfg);
  CHECK(r.f < 1e-6);
  CHECK(r.evals <= 20000);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("CMA-ES on a constant objective stops near the start") {
  CmaesConfig cfg;
  cfg.seed = 3;
  const Eigen::Vector3d x0(0.5, -1.0, 2.0);
  const auto r = cmaes_minimize([](const Eigen::VectorXd&) { return 4.0; }, x0, cfg);
  CHECK(r.f == 4.0);
  CHECK(r.stop == "tol_fun");
  CHECK((r.x - x0).norm() < 5.0);
}

TEST_CASE("CMA-ES treats NaN as +inf and is reproducible") {
  CmaesConfig cfg;
  cfg.seed = 4;
  cfg.max_evals = 2000;
  auto f = [](const Eigen::VectorXd& x) { return x[0] < 0 ? std::nan("") : (x[0] - 1) * (x[0] - 1) + x[1] * x[1]; };
  const auto a = cmaes_minimize(f, Eigen::Vector2d(2.0, 1.0), cfg);
  CHECK(std::isfinite(a.f));
  CHECK(a.f < 1e-8);
  const auto b = cmaes_minimize(f, Eigen::Vector2d(2.0, 1.0), cfg);
  CHECK(a.x == b.x);
  CHECK(a.evals == b.evals);
  cfg.parallel = false;
  const auto c = cmaes_minimize(f, Eigen::Vector2d(2.0, 1.0), cfg);
  CHECK(a.x == c.x);
  // budget counts the initial mean
  cfg.max_evals = 7;
  const auto d = cmaes_minimize(f, Eigen::Vector2d(2.0, 1.0), cfg);
  CHECK(d.evals <= 7);
  CHECK(d.budget_exhausted);
}

TEST_CASE("Poisson rates: the fit finds the closed-form MLE") {
  auto th = default_theta("poisson");
  th.set("rate.up", 2.0);
  th.set("rate.down", 0.7);
  const auto m = make_model("poisson", th);
  SimConfig sc;
  sc.horizon = 200;
  sc.seed = 8;
  const auto log = simulate(m, sc);
  const auto counts = log.counts();
  EstimatorConfig cfg;
  cfg.restarts = 2;
  cfg.cmaes.max_evals = 600;
  cfg.cmaes.seed = 9;
  const auto fit = estimate(log, "poisson", cfg);
  REQUIRE(fit.restarts.size() == 2);
  for (const char* ev : {"up", "down"}) {
    const auto n = static_cast<double>(counts[static_cast<std::size_t>(m->event_index(ev))]);
    const double mle = n / sc.horizon;
    CHECK(std::abs(fit.theta.at(std::string("rate.") + ev) - mle) <= 2.0 / std::sqrt(n) * mle);
  }
  // the best restart is the one reported
  double best = -INFINITY;
  for (const auto& r : fit.restarts) best = std::max(best, r.loglik);
  CHECK(fit.loglik == best);
}

TEST_CASE("neutral start") {
  const auto m = make_model("model1", default_theta("model1"));
  SimConfig sc;
  sc.horizon = 100;
  sc.seed = 10;
  const auto log = simulate(m, sc);
  const auto th = neutral_theta(log, *m);
  const auto c = log.counts();
  const double limits = static_cast<double>(c[0] + c[3]);
  CHECK(th.at("limit.a0") == doctest::Approx(std::log(std::max(limits, 0.5) / (100.0 * 2))));
  CHECK(th.at("limit.a1") == 0.0);
  CHECK(th.at("sigma") > 0.0);
}

TEST_CASE("fit artifacts omit wall time unless asked") {
  const auto m = make_model("poisson", default_theta("poisson"));
  SimConfig sc;
  sc.horizon = 30;
  const auto log = simulate(m, sc);
  EstimatorConfig cfg;
  cfg.restarts = 1;
  cfg.cmaes.max_evals = 100;
  const auto fit = estimate(log, "poisson", cfg);
  CHECK_FALSE(fit_to_json(fit).contains("wall_seconds"));
  CHECK(fit_to_json(fit, true).contains("wall_seconds"));
  CHECK(fit_to_json(fit).dump() == fit_to_json(estimate(log, "poisson", cfg)).dump());
  CHECK(fit_csv_header(fit.theta).find("rate.up") != std::string::npos);
}

TEST_CASE("Model 1 fit improves on the start") {
  const auto m = make_model("model1", default_theta("model1"));
  SimConfig sc;
  sc.horizon = 40;
  sc.seed = 12;
  const auto log = simulate(m, sc);
  EstimatorConfig cfg;
  cfg.restarts = 1;
  cfg.cmaes.max_evals = 400;
  const auto fit = estimate(log, "model1", cfg);
  const double start = log_likelihood(log, *make_model("model1", fit.start)).value;
  CHECK(fit.loglik > start);
  CHECK(fit.restarts[0].history.size() >= 2);
  for (std::size_t i = 1; i < fit.restarts[0].history.size(); ++i)
    CHECK(fit.restarts[0].history[i] >= fit.restarts[0].history[i - 1]);
}
