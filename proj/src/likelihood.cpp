#include "efflob/likelihood.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "efflob/error.hpp"
#include "efflob/intensity.hpp"
#include "efflob/rng.hpp"

namespace efflob {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void LikelihoodConfig::validate() const {
  if (n_deg < 0 || n_deg % 2 != 0) throw Error(ErrorCode::Validation, "n_deg must be a positive even integer");
  if (!(max_step > 0.0)) throw Error(ErrorCode::Validation, "ODE step cap must be > 0");
  if (min_substeps < 1) throw Error(ErrorCode::Validation, "min_substeps must be >= 1");
  if (!(blowup > 0.0)) throw Error(ErrorCode::Validation, "blow-up threshold must be > 0");
}

void ode_rhs_reference(const MultiIndexPoly& a, const MultiIndexPoly& b, const Eigen::MatrixXd& cov,
                       MultiIndexPoly& out) {
  const auto& set = a.set();
  const int d = a.dim();
  if (b.size() != a.size() || out.size() != a.size() || cov.rows() != d)
    throw Error(ErrorCode::DimensionMismatch, "ode_rhs_reference");
  auto coef = [&](std::vector<int>& alpha) -> double {
    const auto idx = set.index(alpha);
    return idx == MultiIndexSet::npos ? 0.0 : a[static_cast<std::size_t>(idx)];
  };
  std::vector<int> alpha(static_cast<std::size_t>(d)), tmp(static_cast<std::size_t>(d)),
      tmp2(static_cast<std::size_t>(d)), beta(static_cast<std::size_t>(d));
  for (std::size_t n = 0; n < a.size(); ++n) {
    auto al = set.alpha(n);
    std::copy(al.begin(), al.end(), alpha.begin());
    double r = -b[n];
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        tmp = alpha;
        ++tmp[i];
        ++tmp[j];
        r -= cov(i, j) * (alpha[i] + 1) * (alpha[j] + 1) * coef(tmp);
      }
      tmp = alpha;
      tmp[i] += 2;
      r -= 0.5 * cov(i, i) * (alpha[i] + 1) * (alpha[i] + 2) * coef(tmp);
    }
    // Enumerate beta <= alpha componentwise.
    std::fill(beta.begin(), beta.end(), 0);
    while (true) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          tmp = beta;
          ++tmp[i];
          for (int k = 0; k < d; ++k) tmp2[k] = alpha[k] - beta[k];
          ++tmp2[j];
          r += 0.5 * cov(i, j) * (alpha[j] - beta[j] + 1) * (beta[i] + 1) * coef(tmp) * coef(tmp2);
        }
      }
      int k = 0;
      while (k < d && beta[k] == alpha[k]) beta[k++] = 0;
      if (k == d) break;
      ++beta[k];
    }
    out[n] = r;
  }
}

RiccatiOperator::RiccatiOperator(std::shared_ptr<const MultiIndexSet> setp, const Eigen::MatrixXd& cov)
    : n_(setp->size()) {
  const auto& set = *setp;
  const int d = set.dim();
  if (cov.rows() != d || cov.cols() != d) throw Error(ErrorCode::DimensionMismatch, "covariance size");
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> lin;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, double> quad;
  std::vector<int> alpha(static_cast<std::size_t>(d)), tmp(static_cast<std::size_t>(d)),
      tmp2(static_cast<std::size_t>(d)), beta(static_cast<std::size_t>(d));
  for (std::size_t n = 0; n < n_; ++n) {
    auto al = set.alpha(n);
    std::copy(al.begin(), al.end(), alpha.begin());
    const auto out = static_cast<std::uint32_t>(n);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        tmp = alpha;
        ++tmp[i];
        ++tmp[j];
        const auto idx = set.index(tmp);
        if (idx == MultiIndexSet::npos) continue;
        const double w = i == j ? -0.5 * cov(i, i) * (alpha[i] + 1) * (alpha[i] + 2)
                                : -cov(i, j) * (alpha[i] + 1) * (alpha[j] + 1);
        if (w != 0.0) lin[{out, static_cast<std::uint32_t>(idx)}] += w;
      }
    }
    std::fill(beta.begin(), beta.end(), 0);
    while (true) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          if (cov(i, j) == 0.0) continue;
          tmp = beta;
          ++tmp[i];
          for (int k = 0; k < d; ++k) tmp2[k] = alpha[k] - beta[k];
          ++tmp2[j];
          const auto p = set.index(tmp);
          const auto q = set.index(tmp2);
          if (p == MultiIndexSet::npos || q == MultiIndexSet::npos) continue;
          const double w = 0.5 * cov(i, j) * (alpha[j] - beta[j] + 1) * (beta[i] + 1);
          auto lo = static_cast<std::uint32_t>(std::min(p, q));
          auto hi = static_cast<std::uint32_t>(std::max(p, q));
          quad[{out, lo, hi}] += w;
        }
      }
      int k = 0;
      while (k < d && beta[k] == alpha[k]) beta[k++] = 0;
      if (k == d) break;
      ++beta[k];
    }
  }
  for (const auto& [key, w] : lin) lin_.push_back({key.first, key.second, w});
  for (const auto& [key, w] : quad)
    if (w != 0.0) quad_.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), w});
}

void RiccatiOperator::rhs(std::span<const double> a, std::span<const double> b, std::span<double> out) const {
  for (std::size_t n = 0; n < n_; ++n) out[n] = -b[n];
  for (const auto& t : lin_) out[t.out] += t.w * a[t.in];
  for (const auto& t : quad_) out[t.out] += t.w * a[t.p] * a[t.q];
}

namespace {

bool finite_and_bounded(std::span<const double> a, double cap) {
  for (double v : a)
    if (!(std::abs(v) <= cap)) return false;
  return true;
}

}  // namespace

bool integrate_interval(MultiIndexPoly& a, const MultiIndexPoly& b, const RiccatiOperator& op,
                        const Eigen::MatrixXd& cov, double len, const LikelihoodConfig& cfg,
                        std::int64_t* substeps) {
  if (len <= 0.0) return true;
  const auto n = static_cast<std::int64_t>(
      std::max<double>(cfg.min_substeps, std::ceil(len / cfg.max_step - 1e-9)));
  const double h = len / static_cast<double>(n);
  if (substeps) *substeps += n;
  // Constant-forcing, constant-coefficient problem: only a_0 can move.
  bool trivial = true;
  for (std::size_t i = 1; i < a.size() && trivial; ++i) trivial = a[i] == 0.0 && b[i] == 0.0;
  if (trivial) {
    a[0] += b[0] * len;
    return std::abs(a[0]) <= cfg.blowup;
  }
  const std::size_t m = a.size();
  auto av = a.coeffs();
  auto bv = b.coeffs();
  if (cfg.reference_rhs) {
    MultiIndexPoly k1(a.set_ptr()), k2(a.set_ptr()), k3(a.set_ptr()), k4(a.set_ptr()), tmp(a.set_ptr());
    for (std::int64_t s = 0; s < n; ++s) {
      ode_rhs_reference(a, b, cov, k1);
      if (cfg.integrator == Integrator::Euler) {
        for (std::size_t i = 0; i < m; ++i) a[i] -= h * k1[i];
        continue;
      }
      for (std::size_t i = 0; i < m; ++i) tmp[i] = a[i] - 0.5 * h * k1[i];
      ode_rhs_reference(tmp, b, cov, k2);
      for (std::size_t i = 0; i < m; ++i) tmp[i] = a[i] - 0.5 * h * k2[i];
      ode_rhs_reference(tmp, b, cov, k3);
      for (std::size_t i = 0; i < m; ++i) tmp[i] = a[i] - h * k3[i];
      ode_rhs_reference(tmp, b, cov, k4);
      for (std::size_t i = 0; i < m; ++i) a[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return finite_and_bounded(av, cfg.blowup);
  }
  std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
  for (std::int64_t s = 0; s < n; ++s) {
    op.rhs(av, bv, k1);
    if (cfg.integrator == Integrator::Euler) {
      for (std::size_t i = 0; i < m; ++i) av[i] -= h * k1[i];
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) tmp[i] = av[i] - 0.5 * h * k1[i];
    op.rhs(tmp, bv, k2);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = av[i] - 0.5 * h * k2[i];
    op.rhs(tmp, bv, k3);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = av[i] - h * k3[i];
    op.rhs(tmp, bv, k4);
    for (std::size_t i = 0; i < m; ++i) av[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return finite_and_bounded(av, cfg.blowup);
}

void jump_update(MultiIndexPoly& a, const MultiIndexPoly& bz) { a -= bz; }

namespace {

void check_alphabet(const EventLog& log, const MarketModel& model) {
  if (static_cast<int>(log.header.events.size()) != model.event_count())
    throw Error(ErrorCode::Validation, "log event alphabet does not match the model");
  for (int k = 0; k < model.event_count(); ++k)
    if (log.header.events[static_cast<std::size_t>(k)] != model.event(k).name)
      throw Error(ErrorCode::Validation, "log event alphabet does not match the model");
}

}  // namespace

LikelihoodResult log_likelihood(const EventLog& log, const MarketModel& model, const LikelihoodConfig& cfg) {
  cfg.validate();
  check_alphabet(log, model);
  LikelihoodResult res;
  const int d = model.assets();
  const int n_deg = cfg.degree_for(d);
  const auto set = MultiIndexSet::get(d, n_deg);
  const Eigen::MatrixXd& cov = model.covariance();
  const RiccatiOperator op(set, cov);
  CoeffTable table = model.make_table();
  MultiIndexPoly a(set), b(set), bz(set);
  const auto& rec = log.records;
  const double T = log.header.horizon;
  auto fault = [&](const std::string& why) {
    res.value = kNegInf;
    res.fault = true;
    res.reason = why;
    return res;
  };
  try {
    for (std::size_t m = rec.size() + 1; m-- > 0;) {
      const MarketState& x = m == 0 ? log.header.x0 : rec[m - 1].x;
      const double t_lo = m == 0 ? 0.0 : rec[m - 1].t;
      const double t_hi = m == rec.size() ? T : rec[m].t;
      model.coeffs(x, table);
      taylor_sum_coeffs(table, b);
      if (!b.all_finite() || b.max_abs() > cfg.blowup) return fault("intensity overflow");
      ++res.intervals;
      if (!integrate_interval(a, b, op, cov, t_hi - t_lo, cfg, &res.substeps)) return fault("coefficient blow-up");
      if (m == 0) break;
      const LogRecord& r = rec[m - 1];
      const MarketState& before = m >= 2 ? rec[m - 2].x : log.header.x0;
      for (int i = 0; i < d; ++i) {
        const auto di = r.x.price_index[static_cast<std::size_t>(i)] - before.price_index[static_cast<std::size_t>(i)];
        if (di != 0) a = shift_coeffs(a, i, -static_cast<double>(di) * model.tick(i));
      }
      if (r.z >= 0) {
        model.coeffs(before, table);
        if (!table.active(r.z))
          throw Error(ErrorCode::InactiveEvent, "event '" + model.event(r.z).name + "' at t=" + format_time(r.t) +
                                                    " is inactive in the preceding state");
        log_coeffs_poly(table, r.z, bz);
        jump_update(a, bz);
      }
      if (!a.all_finite() || a.max_abs() > cfg.blowup) return fault("coefficient blow-up");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParameterFault || e.code() == ErrorCode::Overflow) return fault(e.what());
    throw;
  }
  res.value = -a[0];
  return res;
}

McResult mc_log_likelihood(const EventLog& log, const MarketModel& model, std::int64_t n_paths, int substeps,
                           std::uint64_t seed, bool parallel) {
  check_alphabet(log, model);
  if (n_paths < 2 || substeps < 1) throw Error(ErrorCode::Validation, "need >= 2 paths and >= 1 substep");
  const int d = model.assets();
  const auto& rec = log.records;
  const std::size_t M = rec.size();
  const double T = log.header.horizon;
  // Per-interval data shared by all paths: coefficients of the state in force,
  // reference prices, and the observed event's coefficients at the jump.
  CoeffTable proto = model.make_table();
  std::vector<CoeffTable> tables(M + 1, proto);
  std::vector<std::vector<double>> prices(M + 1);
  for (std::size_t m = 0; m <= M; ++m) {
    const MarketState& x = m == 0 ? log.header.x0 : rec[m - 1].x;
    model.coeffs(x, tables[m]);
    prices[m] = model.prices(x);
  }
  for (std::size_t m = 0; m < M; ++m)
    if (rec[m].z >= 0 && !tables[m].active(rec[m].z))
      throw Error(ErrorCode::InactiveEvent, "event at t=" + format_time(rec[m].t) + " is inactive");
  const Eigen::MatrixXd L = model.sigma();
  std::vector<double> logz(static_cast<std::size_t>(n_paths));

  auto run_path = [&](std::int64_t p) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(p));
    std::normal_distribution<double> n01;
    std::vector<double> s = prices[0], y(static_cast<std::size_t>(d)), z(static_cast<std::size_t>(d));
    double acc = 0.0;
    auto integrand = [&](std::size_t m) {
      for (int i = 0; i < d; ++i) y[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] - prices[m][static_cast<std::size_t>(i)];
      double f = 0.0;
      const auto& tb = tables[m];
      for (int k = 0; k < tb.events(); ++k)
        if (tb.active(k)) f += 1.0 - eval_intensity(tb, k, y);
      return f;
    };
    for (std::size_t m = 0; m <= M; ++m) {
      const double t_lo = m == 0 ? 0.0 : rec[m - 1].t;
      const double t_hi = m == M ? T : rec[m].t;
      const double h = (t_hi - t_lo) / substeps;
      double f_prev = integrand(m);
      for (int q = 0; q < substeps; ++q) {
        const double sq = std::sqrt(h);
        for (int i = 0; i < d; ++i) z[static_cast<std::size_t>(i)] = n01(rng);
        for (int i = 0; i < d; ++i) {
          double v = 0.0;
          for (int j = 0; j <= i; ++j) v += L(i, j) * z[static_cast<std::size_t>(j)];
          s[static_cast<std::size_t>(i)] += v * sq;
        }
        const double f = integrand(m);
        acc += 0.5 * h * (f_prev + f);
        f_prev = f;
      }
      if (m < M && rec[m].z >= 0) {
        for (int i = 0; i < d; ++i) y[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] - prices[m][static_cast<std::size_t>(i)];
        acc += log_intensity(tables[m], rec[m].z, y);
      }
    }
    logz[static_cast<std::size_t>(p)] = acc;
  };

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < n_paths; ++p) run_path(p);
  } else {
    for (std::int64_t p = 0; p < n_paths; ++p) run_path(p);
  }

  const double mx = *std::max_element(logz.begin(), logz.end());
  double sum = 0.0, sum2 = 0.0;
  for (double v : logz) {
    const double w = std::exp(v - mx);
    sum += w;
    sum2 += w * w;
  }
  const double n = static_cast<double>(n_paths);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 / n - mean * mean) * n / (n - 1.0));
  McResult r;
  r.estimate = mx + std::log(mean);
  r.std_error = std::sqrt(var / n) / mean;
  r.paths = n_paths;
  return r;
}

}  // namespace efflob
