#include "efflob/real_data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "efflob/error.hpp"
#include "efflob/presets.hpp"

namespace efflob {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr const char* kDefaultPreset = "imbalance";

// The signal column is "imbalance" for the imbalance preset, "signal" otherwise.
std::string signal_key(const std::string& preset) { return preset == kDefaultPreset ? "imbalance" : "signal"; }

const SignalModel& as_signal_model(const MarketModel& m) {
  const auto* sm = dynamic_cast<const SignalModel*>(&m);
  if (sm == nullptr || sm->signal_dim() == 0 || sm->event_index("s1-") < 0)
    throw Error(ErrorCode::Validation, "preset '" + m.preset() + "' has no per-asset signal and +/- alphabet");
  return *sm;
}

double parse_time(const json& j, const std::string& where) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    const double t = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw Error(ErrorCode::Schema, where + "bad time '" + s + "'");
    return t;
  }
  if (j.is_number()) return j.get<double>();
  throw Error(ErrorCode::Schema, where + "time must be a decimal string or number");
}

std::vector<double> number_array(const json& j, const char* key, std::size_t n, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != n)
    throw Error(ErrorCode::Schema, where + "'" + key + "' must be an array of " + std::to_string(n) + " numbers");
  std::vector<double> v;
  for (const auto& e : j.at(key)) {
    if (!e.is_number()) throw Error(ErrorCode::Schema, where + "'" + key + "' must hold numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

std::int64_t grid_index(double p, double tick, const std::string& where) {
  const double k = p / tick - 0.5;
  const double r = std::round(k);
  if (!std::isfinite(k) || std::abs(k - r) > 1e-6)
    throw Error(ErrorCode::Validation, where + "price " + std::to_string(p) + " is off the half-tick grid");
  return static_cast<std::int64_t>(r);
}

std::vector<double> checked_signal(const json& j, const std::string& key, const SignalModel& m,
                                   const std::string& where) {
  auto v = number_array(j, key.c_str(), static_cast<std::size_t>(m.assets() * m.signal_dim()), where);
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::Validation, where + key + " not finite");
    if (m.law() == SignalLaw::Uniform && !(x >= -1.0 && x <= 1.0))
      throw Error(ErrorCode::Validation, where + key + " outside [-1, 1]");
  }
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double volume_imbalance(double q_bid, double q_ask) {
  const double tot = q_bid + q_ask;
  return tot > 0.0 ? (q_bid - q_ask) / tot : 0.0;
}

EventLog ingest_real_log(std::istream& in, const Units& units) {
  if (!(units.time > 0.0) || !(units.price > 0.0)) throw Error(ErrorCode::Validation, "units must be > 0");
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](json& j) {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, "line " + std::to_string(lineno) + ": " + e.what());
      }
      return true;
    }
    return false;
  };
  json h;
  if (!next(h)) throw Error(ErrorCode::Schema, "empty log");
  std::string where = "line " + std::to_string(lineno) + ": ";
  if (!h.is_object() || h.value("type", "") != "header") throw Error(ErrorCode::Schema, where + "first line must be the header");
  if (h.value("format_version", 0) != kLogFormatVersion) throw Error(ErrorCode::Schema, where + "unsupported format_version");
  if (!h.contains("assets") || !h.at("assets").is_array()) throw Error(ErrorCode::Schema, where + "'assets' missing");
  const std::size_t d = h.at("assets").size();

  const std::string preset = h.value("preset", std::string(kDefaultPreset));
  const std::string key = signal_key(preset);
  ModelOptions opt;
  auto ticks = number_array(h, "ticks", d, where);
  for (double& t : ticks) {
    if (!(t > 0.0)) throw Error(ErrorCode::Validation, where + "tick sizes must be > 0");
    t *= units.price;
  }
  opt.ticks = ticks;
  const auto model = make_model(preset, default_theta(preset), opt);
  const SignalModel& sm = as_signal_model(*model);
  if (static_cast<int>(d) != model->assets())
    throw Error(ErrorCode::Validation, where + "preset '" + preset + "' needs " + std::to_string(model->assets()) + " assets");
  if (!h.contains("T")) throw Error(ErrorCode::Schema, where + "'T' missing");
  const double T = parse_time(h.at("T"), where) * units.time;
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorCode::Validation, where + "T must be > 0");

  MarketState x0;
  for (std::size_t i = 0; i < d; ++i)
    x0.price_index.push_back(grid_index(number_array(h, "p0", d, where)[i] * units.price, ticks[i], where));
  x0.signal = checked_signal(h, key + "0", sm, where);

  EventLog log;
  log.header = make_header(*model, T, 0, x0);
  log.header.config["source"] = "market-data";
  log.header.config["units"] = {{"time", units.time}, {"price", units.price}};

  MarketState prev = x0;
  double t_prev = 0.0;
  json r;
  while (next(r)) {
    where = "line " + std::to_string(lineno) + ": ";
    if (!r.is_object() || !r.contains("t") || !r.contains("dir"))
      throw Error(ErrorCode::Schema, where + "record needs 't' and 'dir'");
    const double t = parse_time(r.at("t"), where) * units.time;
    if (!(t > t_prev)) throw Error(ErrorCode::Validation, where + "times must increase strictly");
    if (t > T) throw Error(ErrorCode::Validation, where + "time beyond T");
    LogRecord rec;
    rec.t = t;
    rec.line = lineno;
    rec.x.signal = checked_signal(r, key, sm, where);
    const auto p = number_array(r, "p", d, where);
    for (std::size_t i = 0; i < d; ++i) rec.x.price_index.push_back(grid_index(p[i] * units.price, ticks[i], where));
    const std::string dir = r.at("dir").is_string() ? r.at("dir").get<std::string>() : "";
    int moved = -1, step = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto di = rec.x.price_index[i] - prev.price_index[i];
      if (di == 0) continue;
      if (moved >= 0 || std::abs(di) != 1)
        throw Error(ErrorCode::Validation, where + "a record may move one price by one tick");
      moved = static_cast<int>(i);
      step = static_cast<int>(di);
    }
    if (dir == "state") {
      if (moved >= 0) throw Error(ErrorCode::Validation, where + "state record moves a price");
      rec.z = -1;
    } else if (dir == "+" || dir == "-") {
      if (!r.contains("asset") || !r.at("asset").is_number_integer())
        throw Error(ErrorCode::Schema, where + "price record needs an integer 'asset'");
      const auto a = r.at("asset").get<int>();
      if (a < 0 || a >= static_cast<int>(d)) throw Error(ErrorCode::Validation, where + "asset out of range");
      if (moved != a || step != (dir == "+" ? 1 : -1))
        throw Error(ErrorCode::Validation, where + "price change does not match asset/direction");
      rec.z = model->event_index("s" + std::to_string(a + 1) + dir);
    } else {
      throw Error(ErrorCode::Schema, where + "dir must be '-', '+' or 'state'");
    }
    prev = rec.x;
    t_prev = t;
    log.records.push_back(std::move(rec));
  }
  return log;
}

EventLog ingest_real_log_file(const std::string& path, const Units& units) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return ingest_real_log(in, units);
}

void export_real_log(std::ostream& out, const EventLog& log) {
  const auto& h = log.header;
  const auto model = model_from_header(h);
  as_signal_model(*model);
  const std::string key = signal_key(h.preset);
  const auto d = h.ticks.size();
  auto prices = [&](const MarketState& x) {
    ojson a = ojson::array();
    for (std::size_t i = 0; i < d; ++i) a.push_back(h.ticks[i] * (static_cast<double>(x.price_index[i]) + 0.5));
    return a;
  };
  ojson hj;
  hj["type"] = "header";
  hj["format_version"] = kLogFormatVersion;
  hj["preset"] = h.preset;
  ojson names = ojson::array();
  for (std::size_t i = 0; i < d; ++i) names.push_back("s" + std::to_string(i + 1));
  hj["assets"] = std::move(names);
  hj["ticks"] = h.ticks;
  hj["T"] = fmt(h.horizon);
  hj["p0"] = prices(h.x0);
  hj[key + "0"] = h.x0.signal;
  out << hj.dump() << '\n';
  for (const auto& r : log.records) {
    ojson j;
    j["t"] = fmt(r.t);
    if (r.z >= 0) {
      const std::string& name = h.events[static_cast<std::size_t>(r.z)];
      j["asset"] = std::stoi(name.substr(1, name.size() - 2)) - 1;
      j["dir"] = std::string(1, name.back());
    } else {
      j["asset"] = nullptr;
      j["dir"] = "state";
    }
    j[key] = r.x.signal;
    j["p"] = prices(r.x);
    out << j.dump() << '\n';
  }
}

}  // namespace efflob
