#include "efflob/estimator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "efflob/error.hpp"

namespace efflob {

namespace {

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }
bool ends_with(const std::string& s, const std::string& p) {
  return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

// Events whose rate an intercept parameter sets; empty if `name` is not one.
std::vector<int> intercept_events(const MarketModel& model, const std::string& name) {
  std::vector<int> ks;
  auto by_asset = [&](int asset) {
    for (int k = 0; k < model.event_count(); ++k)
      if (model.event(k).asset == asset) ks.push_back(k);
  };
  if (starts_with(name, "rate.")) {
    int k = model.event_index(name.substr(5));
    if (k >= 0) ks.push_back(k);
  } else if (ends_with(name, ".a0")) {
    const std::string kind = name.substr(0, name.size() - 3) + "_";
    for (int k = 0; k < model.event_count(); ++k)
      if (starts_with(model.event(k).name, kind)) ks.push_back(k);
  } else if (name.size() == 4 && name[0] == 'b' && ends_with(name, ".0")) {
    by_asset(name[1] - '1');
  } else if (name.size() == 12 && name[0] == 's' && ends_with(name, ".intercept")) {
    by_asset(name[1] - '1');
  }
  return ks;
}

double realized_vol(const EventLog& log, const MarketModel& model, int asset) {
  double prev = model.price(log.header.x0, asset);
  double ss = 0.0;
  for (const auto& r : log.records) {
    const double p = model.price(r.x, asset);
    ss += (p - prev) * (p - prev);
    prev = p;
  }
  const double T = log.header.horizon;
  if (ss > 0.0 && T > 0.0) return std::sqrt(ss / T);
  return model.tick(asset) / std::sqrt(std::max(T, 1.0));
}

bool fit_fault(ErrorCode c) {
  return is_numerical(c) || c == ErrorCode::OutOfDomain || c == ErrorCode::Validation;
}

}  // namespace

ThetaSpec neutral_theta(const EventLog& log, const MarketModel& model) {
  ThetaSpec th = model.theta();
  const auto counts = log.counts();
  const double T = log.header.horizon;
  for (std::size_t j = 0; j < th.size(); ++j) {
    const std::string& name = th.names[j];
    if (const auto ks = intercept_events(model, name); !ks.empty()) {
      double n = 0.0;
      for (int k : ks) n += static_cast<double>(counts[static_cast<std::size_t>(k)]);
      // Half an event keeps the rate positive on an empty type.
      const double rate = std::max(n, 0.5) / (T * static_cast<double>(ks.size()));
      th.values[j] = th.transforms[j] == Transform::Log ? rate : std::log(rate);
    } else if (name == "sigma") {
      th.values[j] = realized_vol(log, model, 0);
    } else if (name == "sigma1" || name == "sigma2") {
      th.values[j] = realized_vol(log, model, name[5] - '1');
    } else if (th.transforms[j] == Transform::NegExp) {
      th.values[j] = -1.0;
    } else {
      th.values[j] = 0.0;
    }
  }
  th.validate();
  return th;
}

FitResult estimate(const EventLog& log, const std::string& preset, const EstimatorConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.likelihood.validate();
  if (!(log.header.horizon > 0.0)) throw Error(ErrorCode::Validation, "log horizon must be > 0");
  ModelOptions opt = model_from_header(log.header)->options();
  const auto ref = make_model(preset, log.header.preset == preset ? model_from_header(log.header)->theta()
                                                                  : default_theta(preset),
                              opt);
  check_log(log, *ref);

  FitResult fit;
  fit.preset = preset;
  fit.start = cfg.start ? *cfg.start : neutral_theta(log, *ref);
  if (fit.start.names != ref->theta().names) throw Error(ErrorCode::Validation, "start theta layout differs from the preset");
  const auto u0v = fit.start.to_unconstrained();
  const Eigen::VectorXd u0 = Eigen::Map<const Eigen::VectorXd>(u0v.data(), static_cast<Eigen::Index>(u0v.size()));

  const Objective objective = [&](const Eigen::VectorXd& u) {
    try {
      const ThetaSpec th = fit.start.with_unconstrained(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
      const auto model = make_model(preset, th, opt);
      const auto r = log_likelihood(log, *model, cfg.likelihood);
      return r.fault ? std::numeric_limits<double>::infinity() : -r.value;
    } catch (const Error& e) {
      if (fit_fault(e.code())) return std::numeric_limits<double>::infinity();
      throw;
    }
  };

  const int n_restarts = cfg.restarts_for(ref->assets());
  fit.loglik = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < n_restarts; ++r) {
    CmaesConfig cc = cfg.cmaes;
    cc.seed = derive_seed(cfg.cmaes.seed, static_cast<std::uint64_t>(r));
    const auto res = cmaes_minimize(objective, u0, cc);
    RestartResult rr;
    rr.seed = cc.seed;
    rr.theta = fit.start.with_unconstrained(std::span<const double>(res.x.data(), static_cast<std::size_t>(res.x.size())));
    rr.loglik = -res.f;
    rr.evals = res.evals;
    rr.generations = res.generations;
    rr.budget_exhausted = res.budget_exhausted;
    rr.stop = res.stop;
    rr.history.reserve(res.best_history.size());
    for (double f : res.best_history) rr.history.push_back(-f);
    fit.evals += res.evals;
    if (r == 0 || rr.loglik > fit.loglik) {
      fit.loglik = rr.loglik;
      fit.theta = rr.theta;
    }
    fit.restarts.push_back(std::move(rr));
  }
  fit.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return fit;
}

namespace {

nlohmann::ordered_json theta_json(const ThetaSpec& th) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < th.size(); ++i) j[th.names[i]] = th.values[i];
  return j;
}

nlohmann::ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

nlohmann::ordered_json fit_to_json(const FitResult& fit, bool with_wall_time) {
  nlohmann::ordered_json j;
  j["preset"] = fit.preset;
  j["theta"] = theta_json(fit.theta);
  j["loglik"] = finite_or_null(fit.loglik);
  j["evals"] = fit.evals;
  j["start"] = theta_json(fit.start);
  auto rs = nlohmann::ordered_json::array();
  for (const auto& r : fit.restarts) {
    nlohmann::ordered_json jr;
    jr["seed"] = r.seed;
    jr["theta"] = theta_json(r.theta);
    jr["loglik"] = finite_or_null(r.loglik);
    jr["evals"] = r.evals;
    jr["generations"] = r.generations;
    jr["budget_exhausted"] = r.budget_exhausted;
    jr["stop"] = r.stop;
    auto h = nlohmann::ordered_json::array();
    for (double v : r.history) h.push_back(finite_or_null(v));
    jr["history"] = std::move(h);
    rs.push_back(std::move(jr));
  }
  j["restarts"] = std::move(rs);
  if (with_wall_time) j["wall_seconds"] = fit.wall_seconds;
  return j;
}

std::string fit_csv_header(const ThetaSpec& theta) {
  std::string s = "label,loglik,evals";
  for (const auto& n : theta.names) s += "," + n;
  return s;
}

std::string fit_csv_row(const std::string& label, const FitResult& fit) {
  std::ostringstream os;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", fit.loglik);
  os << label << ',' << buf << ',' << fit.evals;
  for (double v : fit.theta.values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  }
  return os.str();
}

}  // namespace efflob
