#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "efflob/analysis.hpp"
#include "efflob/config.hpp"
#include "efflob/error.hpp"
#include "efflob/estimator.hpp"
#include "efflob/event_log.hpp"
#include "efflob/likelihood.hpp"
#include "efflob/real_data.hpp"
#include "efflob/sim.hpp"

using namespace efflob;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kArtifactVersion = 1;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> reps;
  std::optional<double> horizon;
  std::optional<int> jobs;
  std::string csv;
};

RunConfig resolve(const Common& o, const std::string& preset_hint = "") {
  RunConfig c = o.config.empty() ? default_run_config(preset_hint.empty() ? "model1" : preset_hint)
                                 : load_config(o.config);
  if (o.seed) apply_seed(c, *o.seed);
  if (o.jobs) {
    if (*o.jobs < 0) throw Error(ErrorCode::Validation, "--jobs must be >= 0");
    c.jobs = *o.jobs;
  }
  if (c.jobs > 0) omp_set_num_threads(c.jobs);
  c.estimator.likelihood = c.likelihood;
  c.scaling.sim.dt = c.sim.dt;
  c.scaling.sim.max_jump_prob = c.sim.max_jump_prob;
  c.scaling.sim.scheme = c.sim.scheme;
  return c;
}

ojson envelope(const std::string& kind, const RunConfig& c) {
  ojson j;
  j["format_version"] = kArtifactVersion;
  j["kind"] = kind;
  j["version"] = EFFLOB_VERSION;
  j["config"] = c.to_json();
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

void write_artifact(const std::string& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string out_or(const Common& o, const std::string& def) { return o.out.empty() ? def : o.out; }

// ---- subcommands ----

int cmd_simulate(const Common& o, const std::string& preset) {
  RunConfig c = resolve(o, preset);
  if (o.horizon) c.sim.horizon = *o.horizon;
  c.sim.validate();
  const auto model = c.make();
  EventLog log = simulate(model, c.sim);
  log.header.config["run"] = c.to_json();
  const std::string path = out_or(o, "sim.jsonl");
  write_log_file(path, log);
  const auto counts = log.counts();
  std::printf("preset %s  horizon %g  seed %llu  events %zu\n", c.preset.c_str(), c.sim.horizon,
              static_cast<unsigned long long>(c.seed), log.records.size());
  for (std::size_t k = 0; k < counts.size(); ++k)
    std::printf("  %-24s %lld\n", log.header.events[k].c_str(), static_cast<long long>(counts[k]));
  std::printf("log written to %s\n", path.c_str());
  return 0;
}

int cmd_estimate(const Common& o, const std::string& log_path, bool wall) {
  const EventLog log = read_log_file(log_path);
  RunConfig c = resolve(o, log.header.preset);
  if (c.preset != log.header.preset)
    throw Error(ErrorCode::Validation, "config preset '" + c.preset + "' does not match log preset '" +
                                           log.header.preset + "'");
  const FitResult fit = estimate(log, log.header.preset, c.estimator);
  ojson j = envelope("estimate", c);
  j["log"] = {{"path", log_path}, {"records", log.records.size()}, {"horizon", log.header.horizon}};
  j["fit"] = fit_to_json(fit, wall);
  const std::string path = out_or(o, "estimate.json");
  write_artifact(path, j);
  if (!o.csv.empty()) write_text(o.csv, fit_csv_header(fit.theta) + "\n" + fit_csv_row(log_path, fit) + "\n");
  std::printf("loglik %.6f  restarts %zu  evals %lld\n", fit.loglik, fit.restarts.size(),
              static_cast<long long>(fit.evals));
  for (std::size_t i = 0; i < fit.theta.size(); ++i)
    std::printf("  %-20s %12.6f  (start %.6f)\n", fit.theta.names[i].c_str(), fit.theta.values[i],
                fit.start.values[i]);
  std::printf("result written to %s\n", path.c_str());
  return 0;
}

int cmd_likelihood(const Common& o, const std::string& log_path, bool config_theta) {
  const EventLog log = read_log_file(log_path);
  RunConfig c = resolve(o, log.header.preset);
  auto model = model_from_header(log.header);
  if (config_theta) {
    if (c.preset != log.header.preset) throw Error(ErrorCode::Validation, "config preset does not match the log");
    model = make_model(c.preset, c.theta, model->options());
  }
  check_log(log, *model);
  const auto r = log_likelihood(log, *model, c.likelihood);
  ojson j = envelope("likelihood", c);
  j["log"] = {{"path", log_path}, {"records", log.records.size()}, {"horizon", log.header.horizon}};
  ojson th = ojson::object();
  for (std::size_t i = 0; i < model->theta().size(); ++i) th[model->theta().names[i]] = model->theta().values[i];
  j["theta"] = std::move(th);
  j["loglik"] = r.fault ? ojson(nullptr) : ojson(r.value);
  j["fault"] = r.fault;
  j["reason"] = r.reason;
  j["intervals"] = r.intervals;
  j["substeps"] = r.substeps;
  const std::int64_t paths = o.reps ? *o.reps : static_cast<std::int64_t>(c.mc_paths);
  std::printf("loglik %s  (%lld intervals, %lld substeps)\n", r.fault ? "-inf" : g17(r.value).c_str(),
              static_cast<long long>(r.intervals), static_cast<long long>(r.substeps));
  if (paths > 0) {
    const auto mc = mc_log_likelihood(log, *model, paths, c.mc_substeps, c.seed);
    j["mc"] = {{"estimate", mc.estimate}, {"std_error", mc.std_error}, {"paths", mc.paths},
               {"substeps", c.mc_substeps}};
    std::printf("monte-carlo %.6f +- %.6f (%lld paths)\n", mc.estimate, mc.std_error,
                static_cast<long long>(mc.paths));
  }
  const std::string path = out_or(o, "likelihood.json");
  write_artifact(path, j);
  std::printf("result written to %s\n", path.c_str());
  if (r.fault) throw Error(ErrorCode::Explosion, "likelihood: " + r.reason);
  return 0;
}

int cmd_impact(const Common& o) {
  RunConfig c = resolve(o, "impact");
  if (o.reps) c.impact.reps = *o.reps;
  if (o.horizon) c.impact.horizon = *o.horizon;
  const auto curve = market_impact(c.make(), c.impact);
  ojson j = envelope("impact", c);
  j["impact"] = to_json(curve);
  const std::string path = out_or(o, "impact.json");
  write_artifact(path, j);
  if (!o.csv.empty()) {
    std::string s = "t,mean,se,raw_mean,raw_se\n";
    for (std::size_t g = 0; g < curve.grid.size(); ++g)
      s += g17(curve.grid[g]) + "," + g17(curve.mean[g]) + "," + g17(curve.se[g]) + "," + g17(curve.raw_mean[g]) +
           "," + g17(curve.raw_se[g]) + "\n";
    write_text(o.csv, s);
  }
  std::printf("size %lld  reps %d  peak %.5f at t=%g  final %.5f +- %.5f\n", static_cast<long long>(curve.size),
              curve.reps, curve.peak, curve.peak_time, curve.mean.back(), curve.se.back());
  std::printf("result written to %s\n", path.c_str());
  return 0;
}

int cmd_liquidate(const Common& o, bool samples) {
  RunConfig c = resolve(o, "impact2");
  if (o.reps) c.liquidation.reps = *o.reps;
  const auto rep = liquidation_study(c.preset, c.theta, c.model, c.liquidation);
  ojson j = envelope("liquidate", c);
  j["liquidation"] = to_json(rep, samples);
  const std::string path = out_or(o, "liquidate.json");
  write_artifact(path, j);
  if (!o.csv.empty()) {
    std::string s = "rho,mean,var,se,var_se\n";
    for (const auto& a : rep.arms)
      s += g17(a.rho) + "," + g17(a.stats.mean) + "," + g17(a.stats.var) + "," + g17(a.stats.se) + "," +
           g17(a.stats.var_se) + "\n";
    write_text(o.csv, s);
  }
  std::printf("reps %d per arm, %d orders of (", rep.reps, rep.orders);
  for (std::size_t i = 0; i < rep.sizes.size(); ++i)
    std::printf("%s%lld", i ? ", " : "", static_cast<long long>(rep.sizes[i]));
  std::printf(") every %gs\n", rep.interval);
  for (const auto& a : rep.arms)
    std::printf("  rho %+5.2f  mean %.5f +- %.5f  var %.6f +- %.6f\n", a.rho, a.stats.mean, a.stats.se, a.stats.var,
                a.stats.var_se);
  std::printf("result written to %s\n", path.c_str());
  return 0;
}

void print_scaling(const ScalingReport& r, const char* label) {
  std::printf("%s (eps %g, T %g, %d reps)\n", label, r.eps, r.T, r.reps);
  for (std::size_t k = 0; k < r.n_list.size(); ++k)
    std::printf("  n %4d  exceed %.4f  [%.4f, %.4f]  mean sup %.5f\n", r.n_list[k], r.prob[k], r.ci[k].lo,
                r.ci[k].hi, r.mean_sup[k]);
  std::printf("  non-increasing %s  decreasing %s\n", r.non_increasing() ? "yes" : "no",
              r.decreasing() ? "yes" : "no");
}

int cmd_scaling(const Common& o, bool control) {
  RunConfig c = resolve(o, "model1");
  if (o.reps) c.scaling.reps = *o.reps;
  if (o.horizon) c.scaling.T = *o.horizon;
  const auto rep = scaling_check(c.make(), c.scaling);
  ojson j = envelope("scaling-check", c);
  j["scaling"] = to_json(rep);
  print_scaling(rep, c.preset.c_str());
  if (control) {
    const auto zero = make_model(c.preset, zero_intensity_theta(c.theta), c.model);
    const auto ctl = scaling_check(zero, c.scaling);
    j["control"] = to_json(ctl);
    print_scaling(ctl, "zero-intensity control");
  }
  const std::string path = out_or(o, "scaling.json");
  write_artifact(path, j);
  if (!o.csv.empty()) {
    std::string s = "n,exceed,prob,ci_lo,ci_hi,mean_sup\n";
    for (std::size_t k = 0; k < rep.n_list.size(); ++k)
      s += std::to_string(rep.n_list[k]) + "," + std::to_string(rep.exceed[k]) + "," + g17(rep.prob[k]) + "," +
           g17(rep.ci[k].lo) + "," + g17(rep.ci[k].hi) + "," + g17(rep.mean_sup[k]) + "\n";
    write_text(o.csv, s);
  }
  std::printf("result written to %s\n", path.c_str());
  return 0;
}

int cmd_lyapunov(const Common& o, bool field) {
  RunConfig c = resolve(o, "model2");
  const auto model = c.make();
  const auto* sm = dynamic_cast<const SignalModel*>(model.get());
  if (sm == nullptr) throw Error(ErrorCode::Validation, "lyapunov-check needs a signal-driven preset");
  const auto rep = lyapunov_drift_check(*sm, c.lyapunov);
  ojson j = envelope("lyapunov-check", c);
  j["lyapunov"] = to_json(rep, field);
  const std::string path = out_or(o, "lyapunov.json");
  write_artifact(path, j);
  std::printf("K %.6g  finite %s  y* %s  max on outer layer %.6g  symmetry error %.3g\n", rep.K,
              rep.finite ? "yes" : "no", rep.y_star ? g17(*rep.y_star).c_str() : "none", rep.max_outside,
              rep.symmetry_error);
  std::printf("result written to %s\n", path.c_str());
  if (!rep.finite) throw Error(ErrorCode::Explosion, "drift bound K is not finite");
  return 0;
}

int cmd_validate(const Common& o, const std::string& log_path, bool real) {
  RunConfig c = resolve(o, "");
  const EventLog log = real ? ingest_real_log_file(log_path, c.units) : read_log_file(log_path);
  const auto model = model_from_header(log.header);
  check_log(log, *model);
  const auto counts = log.counts();
  ojson j = envelope("validate-log", c);
  j["log"] = {{"path", log_path}, {"preset", log.header.preset}, {"records", log.records.size()},
              {"horizon", log.header.horizon}};
  ojson jc = ojson::object();
  for (std::size_t k = 0; k < counts.size(); ++k) jc[log.header.events[k]] = counts[k];
  j["counts"] = std::move(jc);
  j["valid"] = true;
  const std::string path = out_or(o, "validate.json");
  write_artifact(path, j);
  std::printf("%s: valid %s log, %zu records, horizon %g\n", log_path.c_str(), log.header.preset.c_str(),
              log.records.size(), log.header.horizon);
  for (std::size_t k = 0; k < counts.size(); ++k)
    std::printf("  %-24s %lld\n", log.header.events[k].c_str(), static_cast<long long>(counts[k]));
  return 0;
}

int cmd_ingest(const Common& o, const std::string& log_path) {
  RunConfig c = resolve(o, "");
  EventLog log = ingest_real_log_file(log_path, c.units);
  check_log(log, *model_from_header(log.header));
  const std::string path = out_or(o, "ingested.jsonl");
  write_log_file(path, log);
  std::printf("%zu records ingested into a %s log, written to %s\n", log.records.size(), log.header.preset.c_str(),
              path.c_str());
  return 0;
}

int cmd_export(const Common& o, const std::string& log_path) {
  const EventLog log = read_log_file(log_path);
  const std::string path = out_or(o, "market.jsonl");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  export_real_log(f, log);
  std::printf("%zu records exported to %s\n", log.records.size(), path.c_str());
  return 0;
}

int cmd_presets() {
  for (const auto& p : preset_names()) {
    const auto th = default_theta(p);
    const auto m = make_model(p, th);
    std::printf("%s  (%d asset%s, %d event types)\n", p.c_str(), m->assets(), m->assets() == 1 ? "" : "s",
                m->event_count());
    for (std::size_t i = 0; i < th.size(); ++i) std::printf("  %-22s %g\n", th.names[i].c_str(), th.values[i]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"efflob: latent efficient price limit order book toolkit"};
  app.set_version_flag("--version", std::string("efflob ") + EFFLOB_VERSION);
  app.require_subcommand(1);

  Common o;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile);
    s->add_option("--seed", o.seed, "master seed (overrides [run] seed)");
    s->add_option("--out", o.out, "result artifact path");
    s->add_option("--jobs", o.jobs, "OpenMP threads for replicate loops");
  };
  std::string log_path, preset;
  bool flag = false;

  auto* sim = app.add_subcommand("simulate", "simulate one path and write its event log");
  add_common(sim);
  sim->add_option("--horizon", o.horizon, "simulated seconds");
  sim->add_option("--preset", preset, "preset when no config is given");

  auto* est = app.add_subcommand("estimate", "maximum-likelihood fit of an event log");
  add_common(est);
  est->add_option("--log", log_path, "event log")->required();
  est->add_option("--csv", o.csv, "one-row CSV summary");
  est->add_flag("--wall-time", flag, "include wall time (breaks byte reproducibility)");

  auto* lik = app.add_subcommand("likelihood", "log-likelihood of an event log");
  add_common(lik);
  lik->add_option("--log", log_path, "event log")->required();
  lik->add_option("--reps", o.reps, "Monte-Carlo cross-check paths");
  lik->add_flag("--config-theta", flag, "evaluate at the config theta instead of the header theta");

  auto* imp = app.add_subcommand("impact", "mean price impact of one buy market order");
  add_common(imp);
  imp->add_option("--reps", o.reps, "replicates");
  imp->add_option("--horizon", o.horizon, "seconds after the order");
  imp->add_option("--csv", o.csv, "curve as CSV");

  auto* liq = app.add_subcommand("liquidate", "cost of the two-asset buy schedule per correlation");
  add_common(liq);
  liq->add_option("--reps", o.reps, "replicates per correlation");
  liq->add_option("--csv", o.csv, "per-arm summary as CSV");
  liq->add_flag("--samples", flag, "include per-replicate costs");

  auto* sc = app.add_subcommand("scaling-check", "exceedance of the rescaled price gap over n");
  add_common(sc);
  sc->add_option("--reps", o.reps, "replicates per n");
  sc->add_option("--horizon", o.horizon, "rescaled horizon T");
  sc->add_option("--csv", o.csv, "per-n table as CSV");
  sc->add_flag("--control", flag, "also run the zero-intensity negative control");

  auto* ly = app.add_subcommand("lyapunov-check", "drift bound LV + V <= K on a grid");
  add_common(ly);
  ly->add_flag("--field", flag, "include the full drift field");

  auto* val = app.add_subcommand("validate-log", "check an event log against its model");
  add_common(val);
  val->add_option("--log", log_path, "event log")->required();
  val->add_flag("--real", flag, "log is in the market-data layout ([units] apply)");

  auto* ing = app.add_subcommand("ingest", "convert a market-data log to an internal event log");
  add_common(ing);
  ing->add_option("--log", log_path, "market-data log")->required();

  auto* exp = app.add_subcommand("export", "write a signal-driven event log in the market-data layout");
  add_common(exp);
  exp->add_option("--log", log_path, "event log")->required();

  auto* pre = app.add_subcommand("presets", "list presets and their default parameters");
  auto* sch = app.add_subcommand("schema", "print the configuration schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(o, preset);
    if (*est) return cmd_estimate(o, log_path, flag);
    if (*lik) return cmd_likelihood(o, log_path, flag);
    if (*imp) return cmd_impact(o);
    if (*liq) return cmd_liquidate(o, flag);
    if (*sc) return cmd_scaling(o, flag);
    if (*ly) return cmd_lyapunov(o, flag);
    if (*val) return cmd_validate(o, log_path, flag);
    if (*ing) return cmd_ingest(o, log_path);
    if (*exp) return cmd_export(o, log_path);
    if (*pre) return cmd_presets();
    if (*sch) {
      std::fputs(config_schema().c_str(), stdout);
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
