#pragma once

// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
// cumulative step-size adaptation.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace efflob {

struct CmaesConfig {
  int lambda = 0;  // 0: 4 + floor(3 ln m)
  double sigma0 = 0.5;
  std::int64_t max_evals = 3000;
  std::uint64_t seed = 0;
  double f_target = -std::numeric_limits<double>::infinity();
  double tol_fun = 1e-12;
  double tol_x = 1e-12;
  bool parallel = true;  // evaluate a generation with OpenMP

  int lambda_for(int m) const;
  void validate(int m) const;
};

struct CmaesResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  std::int64_t evals = 0;
  int generations = 0;
  bool budget_exhausted = false;
  std::string stop;
  std::vector<double> best_history;  // best-so-far after each generation
};

// Minimizes f from mean x0. Non-finite values rank as +inf.
// f must be safe to call concurrently when cfg.parallel is set.
using Objective = std::function<double(const Eigen::VectorXd&)>;
CmaesResult cmaes_minimize(const Objective& f, const Eigen::VectorXd& x0, const CmaesConfig& cfg);

}  // namespace efflob
