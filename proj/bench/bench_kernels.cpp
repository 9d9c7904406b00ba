// Kernel timings: reference vs tensor ODE right-hand side, and the serial vs
// OpenMP variants of the Monte-Carlo likelihood, CMA-ES generations and the
// replicate loops of the analysis studies.

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "efflob/analysis.hpp"
#include "efflob/cmaes.hpp"
#include "efflob/likelihood.hpp"
#include "efflob/sim.hpp"

using namespace efflob;

namespace {

double time_it(const std::function<void()>& f, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void row(const char* name, double serial, double parallel, const char* check) {
  std::printf("%-34s %12.4g %12.4g %8.2fx  %s\n", name, serial, parallel, serial / parallel, check);
}

volatile double g_sink = 0.0;

void bench_rhs(int dim, int deg, int reps) {
  const auto set = MultiIndexSet::get(dim, deg);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(dim, dim) * 1e-4;
  if (dim == 2) cov(0, 1) = cov(1, 0) = 0.6e-4;
  RiccatiOperator op(set, cov);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  MultiIndexPoly a(set), b(set), ref(set);
  for (auto& c : a.coeffs()) c = n01(rng);
  for (auto& c : b.coeffs()) c = n01(rng);
  std::vector<double> out(a.size());
  const double t_ref = time_it([&] { ode_rhs_reference(a, b, cov, ref); g_sink = g_sink + ref[0]; }, reps);
  const double t_op = time_it([&] { op.rhs(a.coeffs(), b.coeffs(), out); g_sink = g_sink + out[0]; }, reps);
  double diff = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) diff = std::max(diff, std::abs(out[i] - ref[i]));
  char name[64], check[64];
  std::snprintf(name, sizeof name, "rhs d=%d n=%d (%zu coeffs)", dim, deg, set->size());
  std::snprintf(check, sizeof check, "max |diff| %.1e", diff);
  row(name, t_ref, t_op, check);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"efflob kernel benchmarks"};
  double horizon = 50.0;
  std::int64_t paths = 4000;
  int reps = 3;
  app.add_option("--horizon", horizon, "Model 1 log length for the likelihood kernels");
  app.add_option("--paths", paths, "Monte-Carlo paths");
  app.add_option("--reps", reps, "timing repetitions");
  CLI11_PARSE(app, argc, argv);

  std::printf("threads %d\n", omp_get_max_threads());
  std::printf("%-34s %12s %12s %9s  %s\n", "kernel", "baseline s", "fast s", "speedup", "check");

  bench_rhs(1, 10, 20000);
  bench_rhs(2, 6, 5000);

  const auto th = default_theta("model1");
  const auto m = make_model("model1", th);
  SimConfig sc;
  sc.horizon = horizon;
  sc.seed = 1;
  const auto log = simulate(m, sc);

  {
    LikelihoodConfig ref;
    ref.reference_rhs = true;
    double v_ref = 0.0, v_op = 0.0;
    const double t_ref = time_it([&] { v_ref = log_likelihood(log, *m, ref).value; }, reps);
    const double t_op = time_it([&] { v_op = log_likelihood(log, *m).value; }, reps);
    char check[64];
    std::snprintf(check, sizeof check, "|diff| %.1e", std::abs(v_ref - v_op));
    row("ode likelihood, reference rhs", t_ref, t_op, check);
  }
  {
    McResult s, p;
    const double t_s = time_it([&] { s = mc_log_likelihood(log, *m, paths, 20, 3, false); }, 1);
    const double t_p = time_it([&] { p = mc_log_likelihood(log, *m, paths, 20, 3, true); }, 1);
    row("mc likelihood, serial vs omp", t_s, t_p, s.estimate == p.estimate ? "identical" : "DIFFERENT");
  }
  {
    const auto x0 = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(th.to_unconstrained().data(),
                                                                       static_cast<Eigen::Index>(th.size())));
    const Objective f = [&](const Eigen::VectorXd& u) {
      const auto t = th.with_unconstrained({u.data(), static_cast<std::size_t>(u.size())});
      return -log_likelihood(log, *make_model("model1", t)).value;
    };
    CmaesConfig cfg;
    cfg.seed = 4;
    cfg.max_evals = 4 * cfg.lambda_for(static_cast<int>(th.size())) + 1;
    CmaesResult s, p;
    cfg.parallel = false;
    const double t_s = time_it([&] { s = cmaes_minimize(f, x0, cfg); }, 1);
    cfg.parallel = true;
    const double t_p = time_it([&] { p = cmaes_minimize(f, x0, cfg); }, 1);
    row("cma-es 4 generations, serial vs omp", t_s, t_p, s.f == p.f && s.x == p.x ? "identical" : "DIFFERENT");
  }
  {
    ImpactConfig cfg;
    cfg.reps = 200;
    cfg.horizon = 60;
    cfg.seed = 5;
    const auto im = make_model("impact", default_theta("impact"));
    ImpactCurve s, p;
    cfg.parallel = false;
    const double t_s = time_it([&] { s = market_impact(im, cfg); }, 1);
    cfg.parallel = true;
    const double t_p = time_it([&] { p = market_impact(im, cfg); }, 1);
    row("impact 200 reps, serial vs omp", t_s, t_p, s.mean == p.mean ? "identical" : "DIFFERENT");
  }
  return 0;
}
