#pragma once

// Observed-data log-likelihood of an event log: backward integration of the
// coefficient ODE for u = exp(-sum_a a_a y^a) with jump resets, and a
// Monte-Carlo estimator of the same quantity.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "efflob/event_log.hpp"
#include "efflob/multi_index.hpp"
#include "efflob/presets.hpp"

namespace efflob {

enum class Integrator : std::uint8_t { Euler, Rk4 };

struct LikelihoodConfig {
  int n_deg = 0;              // 0: 10 for one asset, 6 for two
  double max_step = 1e-3;     // substep cap
  int min_substeps = 10;      // per inter-event interval
  Integrator integrator = Integrator::Euler;
  bool reference_rhs = false; // naive right-hand side instead of the precomputed tensor
  double blowup = 1e12;

  int degree_for(int dim) const { return n_deg > 0 ? n_deg : (dim == 1 ? 10 : 6); }
  void validate() const;
};

// rhs(a) = da/dt for the truncated system, evaluated directly from the
// formula; kept as the reference for the tensor form below.
void ode_rhs_reference(const MultiIndexPoly& a, const MultiIndexPoly& b, const Eigen::MatrixXd& cov,
                       MultiIndexPoly& out);

// Same right-hand side with the linear and bilinear parts flattened into
// (out, in, weight) lists once per (set, covariance).
class RiccatiOperator {
 public:
  RiccatiOperator(std::shared_ptr<const MultiIndexSet> set, const Eigen::MatrixXd& cov);

  void rhs(std::span<const double> a, std::span<const double> b, std::span<double> out) const;
  std::size_t size() const { return n_; }
  std::size_t linear_terms() const { return lin_.size(); }
  std::size_t bilinear_terms() const { return quad_.size(); }

 private:
  struct Lin {
    std::uint32_t out, in;
    double w;
  };
  struct Quad {
    std::uint32_t out, p, q;
    double w;
  };
  std::size_t n_;
  std::vector<Lin> lin_;
  std::vector<Quad> quad_;
};

// Integrates backward from a(t_hi) over length `len` with constant forcing b.
// Returns false on blow-up (non-finite or above cfg.blowup).
bool integrate_interval(MultiIndexPoly& a, const MultiIndexPoly& b, const RiccatiOperator& op,
                        const Eigen::MatrixXd& cov, double len, const LikelihoodConfig& cfg,
                        std::int64_t* substeps = nullptr);

// a <- a - b^z (the log-intensity coefficients of the observed event).
void jump_update(MultiIndexPoly& a, const MultiIndexPoly& bz);

struct LikelihoodResult {
  double value = 0.0;           // -inf on a numerical fault
  bool fault = false;
  std::string reason;
  std::int64_t substeps = 0;
  std::int64_t intervals = 0;
};

LikelihoodResult log_likelihood(const EventLog& log, const MarketModel& model, const LikelihoodConfig& cfg = {});

struct McResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t paths = 0;
};

// Monte-Carlo estimate of the same log-likelihood. `parallel` selects the
// OpenMP path loop; results are identical either way.
McResult mc_log_likelihood(const EventLog& log, const MarketModel& model, std::int64_t n_paths, int substeps,
                           std::uint64_t seed, bool parallel = true);

}  // namespace efflob
