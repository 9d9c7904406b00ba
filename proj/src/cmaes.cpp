#include "efflob/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "efflob/error.hpp"
#include "efflob/rng.hpp"

namespace efflob {

int CmaesConfig::lambda_for(int m) const {
  return lambda > 0 ? lambda : 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(m))));
}

void CmaesConfig::validate(int m) const {
  if (m < 1) throw Error(ErrorCode::Validation, "cmaes: dimension must be >= 1");
  if (lambda_for(m) < 4) throw Error(ErrorCode::Validation, "cmaes: population size must be >= 4");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw Error(ErrorCode::Validation, "cmaes: sigma0 must be > 0");
  if (max_evals < 1) throw Error(ErrorCode::Validation, "cmaes: max_evals must be >= 1");
}

CmaesResult cmaes_minimize(const Objective& f, const Eigen::VectorXd& x0, const CmaesConfig& cfg) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = static_cast<int>(x0.size());
  cfg.validate(n);
  const double nd = n;
  const int lambda = cfg.lambda_for(n);
  const int mu = lambda / 2;

  VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();

  const double cc = (4.0 + mueff / nd) / (nd + 4.0 + 2.0 * mueff / nd);
  const double cs = (mueff + 2.0) / (nd + mueff + 5.0);
  const double c1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nd + 2.0) * (nd + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (nd + 1.0)) - 1.0) + cs;
  const double chin = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  VectorXd mean = x0;
  double sigma = cfg.sigma0;
  VectorXd pc = VectorXd::Zero(n), ps = VectorXd::Zero(n);
  MatrixXd B = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);
  MatrixXd C = MatrixXd::Identity(n, n);

  Rng rng = make_rng(cfg.seed, 0);
  std::normal_distribution<double> n01;

  CmaesResult res;
  res.x = x0;
  std::vector<VectorXd> ys(static_cast<std::size_t>(lambda)), xs(static_cast<std::size_t>(lambda));
  std::vector<double> fs(static_cast<std::size_t>(lambda));
  std::vector<int> order(static_cast<std::size_t>(lambda));
  std::vector<double> recent;  // generation-best values
  const auto hist_len = static_cast<std::size_t>(10 + std::ceil(30.0 * nd / lambda));

  auto eval_point = [&](const VectorXd& x) {
    double v;
    try {
      v = f(x);
    } catch (const Error& e) {
      if (!is_numerical(e.code()) && e.code() != ErrorCode::OutOfDomain) throw;
      v = std::numeric_limits<double>::infinity();
    }
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  res.f = eval_point(x0);
  res.evals = 1;

  while (true) {
    const int batch = static_cast<int>(std::min<std::int64_t>(lambda, cfg.max_evals - res.evals));
    if (batch < lambda) {
      res.budget_exhausted = true;
      res.stop = "budget";
      break;
    }
    for (int k = 0; k < lambda; ++k) {
      VectorXd z(n);
      for (int i = 0; i < n; ++i) z(i) = n01(rng);
      ys[k] = B * D.asDiagonal() * z;
      xs[k] = mean + sigma * ys[k];
    }
    auto eval = [&](int k) { fs[k] = eval_point(xs[k]); };
    if (cfg.parallel) {
      // Exceptions may not leave an OpenMP region.
      std::vector<std::exception_ptr> errs(static_cast<std::size_t>(lambda));
#pragma omp parallel for schedule(dynamic)
      for (int k = 0; k < lambda; ++k) {
        try {
          eval(k);
        } catch (...) {
          errs[k] = std::current_exception();
        }
      }
      for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    } else {
      for (int k = 0; k < lambda; ++k) eval(k);
    }
    res.evals += lambda;
    ++res.generations;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    const double gen_best = fs[order[0]];
    if (gen_best < res.f) {
      res.f = gen_best;
      res.x = xs[order[0]];
    }
    res.best_history.push_back(res.f);

    VectorXd yw = VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) yw += w(i) * ys[order[i]];
    mean += sigma * yw;

    const MatrixXd cinv_half = B * D.cwiseInverse().asDiagonal() * B.transpose();
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (cinv_half * yw);
    const double ps_norm = ps.norm();
    const double gen = res.generations;
    const bool hsig =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen)) < (1.4 + 2.0 / (nd + 1.0)) * chin;
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * yw;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) rank_mu += w(i) * ys[order[i]] * ys[order[i]].transpose();
    const double dh = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + dh * C) + cmu * rank_mu;
    C = 0.5 * (C + C.transpose());

    sigma *= std::exp((cs / damps) * (ps_norm / chin - 1.0));

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
    B = es.eigenvectors();
    D = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    if (res.f <= cfg.f_target) {
      res.stop = "f_target";
      break;
    }
    recent.push_back(gen_best);
    if (recent.size() > hist_len) recent.erase(recent.begin());
    if (std::isfinite(fs[order[0]]) && std::isfinite(fs[order[lambda - 1]]) && recent.size() == hist_len) {
      const auto [lo, hi] = std::minmax_element(recent.begin(), recent.end());
      const double spread = std::max(*hi - *lo, fs[order[lambda - 1]] - fs[order[0]]);
      if (spread < cfg.tol_fun) {
        res.stop = "tol_fun";
        break;
      }
    }
    if (sigma * std::max(D.maxCoeff(), pc.cwiseAbs().maxCoeff()) < cfg.tol_x) {
      res.stop = "tol_x";
      break;
    }
    if (D.maxCoeff() > 1e7 * D.minCoeff()) {
      res.stop = "condition";
      break;
    }
    if (!std::isfinite(sigma) || sigma <= 0.0) {
      res.stop = "sigma";
      break;
    }
  }
  return res;
}

}  // namespace efflob
