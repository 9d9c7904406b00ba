#include "efflob/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "efflob/error.hpp"

namespace efflob {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing "; comment" or "# comment".
std::string value_of(const std::string& raw) {
  std::size_t cut = raw.size();
  for (std::size_t i = 0; i < raw.size(); ++i)
    if ((raw[i] == ';' || raw[i] == '#') && (i == 0 || raw[i - 1] == ' ' || raw[i - 1] == '\t')) {
      cut = i;
      break;
    }
  return trim(raw.substr(0, cut));
}

double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double d = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(d))
    throw Error(ErrorCode::Schema, "key '" + key + "': not a finite number: '" + v + "'");
  return d;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::int64_t x = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size())
    throw Error(ErrorCode::Schema, "key '" + key + "': not an integer: '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size())
    throw Error(ErrorCode::Schema, "key '" + key + "': not an unsigned integer: '" + v + "'");
  return x;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

int to_int32(const std::string& key, const std::string& v) {
  const auto x = to_int(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw Error(ErrorCode::Schema, "key '" + key + "': out of range");
  return static_cast<int>(x);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

struct Field {
  Setter set;
  std::string doc;
};

using Section = std::map<std::string, Field>;

const std::map<std::string, Section>& schema() {
  static const std::map<std::string, Section> s = [] {
    std::map<std::string, Section> m;
    m["run"] = {
        {"preset", {[](RunConfig& c, auto&, auto& v) { c.preset = trim(v); }, "preset id"}},
        {"seed", {[](RunConfig& c, auto& k, auto& v) { c.seed = to_uint(k, v); }, "master seed"}},
        {"jobs", {[](RunConfig& c, auto& k, auto& v) { c.jobs = to_int32(k, v); }, "OpenMP threads, 0 = default"}},
    };
    m["model"] = {
        {"regen_bid_mean", {[](RunConfig& c, auto& k, auto& v) { c.model.regen.bid_mean = to_double(k, v); }, "geometric mean of new bid piles"}},
        {"regen_ask_mean", {[](RunConfig& c, auto& k, auto& v) { c.model.regen.ask_mean = to_double(k, v); }, "geometric mean of new ask piles"}},
        {"wipe_prob", {[](RunConfig& c, auto& k, auto& v) { c.model.wipe_prob = to_double(k, v); }, "model1 market-order wipe probability"}},
        {"redraw_rate", {[](RunConfig& c, auto& k, auto& v) { c.model.redraw_rate = to_double(k, v); }, "signal redraw rate per asset"}},
        {"ticks", {[](RunConfig& c, auto& k, auto& v) { c.model.ticks = to_doubles(k, v); }, "tick size per asset"}},
    };
    m["sim"] = {
        {"horizon", {[](RunConfig& c, auto& k, auto& v) { c.sim.horizon = to_double(k, v); }, "T"}},
        {"scheme", {[](RunConfig& c, auto&, auto& v) { c.sim.scheme = parse_scheme(trim(v)); }, "frozen-step | thinning"}},
        {"dt", {[](RunConfig& c, auto& k, auto& v) { c.sim.dt = to_double(k, v); }, "frozen-step substep"}},
        {"max_jump_prob", {[](RunConfig& c, auto& k, auto& v) { c.sim.max_jump_prob = to_double(k, v); }, "frozen-step cap on rate * substep"}},
        {"window", {[](RunConfig& c, auto& k, auto& v) { c.sim.window = to_double(k, v); }, "thinning window"}},
        {"kappa", {[](RunConfig& c, auto& k, auto& v) { c.sim.kappa = to_double(k, v); }, "thinning safety factor"}},
        {"ball_sigmas", {[](RunConfig& c, auto& k, auto& v) { c.sim.ball_sigmas = to_double(k, v); }, "thinning box radius in sd"}},
        {"max_events", {[](RunConfig& c, auto& k, auto& v) { c.sim.max_events = to_int(k, v); }, "explosion guard"}},
    };
    m["likelihood"] = {
        {"n_deg", {[](RunConfig& c, auto& k, auto& v) { c.likelihood.n_deg = to_int32(k, v); }, "truncation degree, 0 = auto"}},
        {"max_step", {[](RunConfig& c, auto& k, auto& v) { c.likelihood.max_step = to_double(k, v); }, "ODE substep cap"}},
        {"min_substeps", {[](RunConfig& c, auto& k, auto& v) { c.likelihood.min_substeps = to_int32(k, v); }, "substeps per interval"}},
        {"integrator", {[](RunConfig& c, auto& k, auto& v) {
                          const auto t = trim(v);
                          if (t == "euler") c.likelihood.integrator = Integrator::Euler;
                          else if (t == "rk4") c.likelihood.integrator = Integrator::Rk4;
                          else throw Error(ErrorCode::Schema, "key '" + k + "': euler | rk4");
                        }, "euler | rk4"}},
        {"mc_paths", {[](RunConfig& c, auto& k, auto& v) { c.mc_paths = to_double(k, v); }, "Monte-Carlo cross-check paths, 0 = off"}},
        {"mc_substeps", {[](RunConfig& c, auto& k, auto& v) { c.mc_substeps = to_int32(k, v); }, "Monte-Carlo substeps per interval"}},
    };
    m["estimator"] = {
        {"restarts", {[](RunConfig& c, auto& k, auto& v) { c.estimator.restarts = to_int32(k, v); }, "0 = 3 for one asset, 6 for two"}},
        {"lambda", {[](RunConfig& c, auto& k, auto& v) { c.estimator.cmaes.lambda = to_int32(k, v); }, "population, 0 = default"}},
        {"sigma0", {[](RunConfig& c, auto& k, auto& v) { c.estimator.cmaes.sigma0 = to_double(k, v); }, "initial step"}},
        {"max_evals", {[](RunConfig& c, auto& k, auto& v) { c.estimator.cmaes.max_evals = to_int(k, v); }, "budget per restart"}},
        {"tol_fun", {[](RunConfig& c, auto& k, auto& v) { c.estimator.cmaes.tol_fun = to_double(k, v); }, "stop on flat objective"}},
    };
    m["units"] = {
        {"time", {[](RunConfig& c, auto& k, auto& v) { c.units.time = to_double(k, v); }, "seconds per input time unit"}},
        {"price", {[](RunConfig& c, auto& k, auto& v) { c.units.price = to_double(k, v); }, "price per input price unit"}},
    };
    m["scaling"] = {
        {"n_list", {[](RunConfig& c, auto& k, auto& v) {
                      c.scaling.n_list.clear();
                      for (const auto& s : split_list(v)) c.scaling.n_list.push_back(to_int32(k, s));
                    }, "time scales"}},
        {"T", {[](RunConfig& c, auto& k, auto& v) { c.scaling.T = to_double(k, v); }, "rescaled horizon"}},
        {"eps", {[](RunConfig& c, auto& k, auto& v) { c.scaling.eps = to_double(k, v); }, "threshold, price units"}},
        {"reps", {[](RunConfig& c, auto& k, auto& v) { c.scaling.reps = to_int32(k, v); }, "replicates per scale"}},
    };
    m["lyapunov"] = {
        {"y_max", {[](RunConfig& c, auto& k, auto& v) { c.lyapunov.y_max = to_double(k, v); }, "grid half-width"}},
        {"y_points", {[](RunConfig& c, auto& k, auto& v) { c.lyapunov.y_points = to_int32(k, v); }, "grid points per axis"}},
        {"signal_bound", {[](RunConfig& c, auto& k, auto& v) { c.lyapunov.signal_bound = to_double(k, v); }, "signal truncation"}},
        {"signal_points", {[](RunConfig& c, auto& k, auto& v) { c.lyapunov.signal_points = to_int32(k, v); }, "nodes per signal component"}},
    };
    m["impact"] = {
        {"size", {[](RunConfig& c, auto& k, auto& v) { c.impact.size = to_int(k, v); }, "buy market order size"}},
        {"horizon", {[](RunConfig& c, auto& k, auto& v) { c.impact.horizon = to_double(k, v); }, "seconds after the order"}},
        {"step", {[](RunConfig& c, auto& k, auto& v) { c.impact.step = to_double(k, v); }, "grid spacing"}},
        {"burn_in", {[](RunConfig& c, auto& k, auto& v) { c.impact.burn_in = to_double(k, v); }, "warm-up before the order"}},
        {"reps", {[](RunConfig& c, auto& k, auto& v) { c.impact.reps = to_int32(k, v); }, "replicates"}},
        {"scheme", {[](RunConfig& c, auto&, auto& v) { c.impact.sim.scheme = parse_scheme(trim(v)); }, "frozen-step | thinning"}},
    };
    m["liquidation"] = {
        {"rhos", {[](RunConfig& c, auto& k, auto& v) { c.liquidation.rhos = to_doubles(k, v); }, "correlations"}},
        {"interval", {[](RunConfig& c, auto& k, auto& v) { c.liquidation.interval = to_double(k, v); }, "seconds between orders"}},
        {"orders", {[](RunConfig& c, auto& k, auto& v) { c.liquidation.orders = to_int32(k, v); }, "orders per asset"}},
        {"sizes", {[](RunConfig& c, auto& k, auto& v) {
                     c.liquidation.sizes.clear();
                     for (const auto& s : split_list(v)) c.liquidation.sizes.push_back(to_int(k, s));
                   }, "order size per asset"}},
        {"burn_in", {[](RunConfig& c, auto& k, auto& v) { c.liquidation.burn_in = to_double(k, v); }, "warm-up"}},
        {"reps", {[](RunConfig& c, auto& k, auto& v) { c.liquidation.reps = to_int32(k, v); }, "replicates per correlation"}},
        {"bins", {[](RunConfig& c, auto& k, auto& v) { c.liquidation.bins = to_int32(k, v); }, "histogram bins"}},
        {"scheme", {[](RunConfig& c, auto&, auto& v) { c.liquidation.sim.scheme = parse_scheme(trim(v)); }, "frozen-step | thinning"}},
    };
    return m;
  }();
  return s;
}

template <class T>
nlohmann::ordered_json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

RunConfig default_run_config(const std::string& preset) {
  RunConfig c;
  c.preset = preset;
  c.theta = default_theta(preset);
  return c;
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Schema, std::string("config: ") + e.what());
  }
  // The preset decides the theta layout, so read it first.
  std::string preset = "model1";
  if (auto run = tree.get_child_optional("run"))
    for (const auto& [k, v] : *run)
      if (k == "preset") preset = value_of(v.data());
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end())
    throw Error(ErrorCode::Schema, "unknown preset '" + preset + "'");
  RunConfig c = default_run_config(preset);
  const auto& sch = schema();
  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty())
      throw Error(ErrorCode::Schema, "key '" + section + "' outside a section");
    if (section == "theta") {
      for (const auto& [k, v] : body) {
        if (c.theta.index(k) < 0) throw Error(ErrorCode::Schema, "unknown theta entry '" + k + "' for preset " + preset);
        c.theta.set(k, to_double("theta." + k, value_of(v.data())));
      }
      continue;
    }
    const auto it = sch.find(section);
    if (it == sch.end()) throw Error(ErrorCode::Schema, "unknown section [" + section + "]");
    for (const auto& [k, v] : body) {
      const auto f = it->second.find(k);
      if (f == it->second.end()) throw Error(ErrorCode::Schema, "unknown key '" + k + "' in [" + section + "]");
      f->second.set(c, section + "." + k, value_of(v.data()));
    }
  }
  try {
    c.theta.validate();
    c.sim.validate();
    c.likelihood.validate();
    c.model.regen.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Schema, std::string("config: ") + e.what());
  }
  if (!(c.units.time > 0.0) || !(c.units.price > 0.0)) throw Error(ErrorCode::Schema, "units must be > 0");
  if (c.jobs < 0) throw Error(ErrorCode::Schema, "jobs must be >= 0");
  apply_seed(c, c.seed);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.sim.seed = seed;
  c.estimator.cmaes.seed = seed;
  c.scaling.seed = seed;
  c.impact.seed = seed;
  c.liquidation.seed = seed;
}

nlohmann::ordered_json RunConfig::to_json() const {
  using J = nlohmann::ordered_json;
  J j;
  j["run"] = {{"preset", preset}, {"seed", seed}};
  J th = J::object();
  for (std::size_t i = 0; i < theta.size(); ++i) th[theta.names[i]] = theta.values[i];
  j["theta"] = std::move(th);
  j["model"] = {{"regen_bid_mean", model.regen.bid_mean},
                {"regen_ask_mean", model.regen.ask_mean},
                {"wipe_prob", model.wipe_prob},
                {"redraw_rate", model.redraw_rate},
                {"ticks", opt_json(model.ticks)}};
  j["sim"] = {{"horizon", sim.horizon},     {"scheme", scheme_name(sim.scheme)}, {"dt", sim.dt},
              {"max_jump_prob", sim.max_jump_prob}, {"window", sim.window},   {"kappa", sim.kappa},
              {"ball_sigmas", sim.ball_sigmas},     {"max_events", sim.max_events}};
  j["likelihood"] = {{"n_deg", likelihood.n_deg},
                     {"max_step", likelihood.max_step},
                     {"min_substeps", likelihood.min_substeps},
                     {"integrator", likelihood.integrator == Integrator::Euler ? "euler" : "rk4"},
                     {"mc_paths", mc_paths},
                     {"mc_substeps", mc_substeps}};
  j["estimator"] = {{"restarts", estimator.restarts},
                    {"lambda", estimator.cmaes.lambda},
                    {"sigma0", estimator.cmaes.sigma0},
                    {"max_evals", estimator.cmaes.max_evals},
                    {"tol_fun", estimator.cmaes.tol_fun}};
  j["units"] = {{"time", units.time}, {"price", units.price}};
  j["scaling"] = {{"n_list", scaling.n_list}, {"T", scaling.T}, {"eps", scaling.eps}, {"reps", scaling.reps}};
  j["lyapunov"] = {{"y_max", lyapunov.y_max},
                   {"y_points", lyapunov.y_points},
                   {"signal_bound", opt_json(lyapunov.signal_bound)},
                   {"signal_points", lyapunov.signal_points}};
  j["impact"] = {{"size", impact.size},       {"horizon", impact.horizon}, {"step", impact.step},
                 {"burn_in", impact.burn_in}, {"reps", impact.reps},       {"scheme", scheme_name(impact.sim.scheme)}};
  j["liquidation"] = {{"rhos", liquidation.rhos},       {"interval", liquidation.interval},
                      {"orders", liquidation.orders},   {"sizes", liquidation.sizes},
                      {"burn_in", liquidation.burn_in}, {"reps", liquidation.reps},
                      {"bins", liquidation.bins},       {"scheme", scheme_name(liquidation.sim.scheme)}};
  return j;
}

std::string config_schema() {
  std::ostringstream os;
  os << "; Run configuration schema. Unknown sections and keys are rejected.\n"
     << "; [theta] takes the parameter names of the chosen preset (see `efflob presets`).\n";
  for (const auto& [section, fields] : schema()) {
    os << "\n[" << section << "]\n";
    for (const auto& [k, f] : fields) os << "; " << k << ": " << f.doc << "\n";
  }
  os << "\n[theta]\n; <name> = value, one line per preset parameter\n";
  return os.str();
}

}  // namespace efflob
