#include "efflob/event_log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "efflob/error.hpp"

namespace efflob {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Market: return "market";
    case Provenance::Cancel: return "cancel";
    default: return "none";
  }
}

Provenance parse_provenance(const std::string& s) {
  if (s == "market") return Provenance::Market;
  if (s == "cancel") return Provenance::Cancel;
  if (s == "none") return Provenance::None;
  throw Error(ErrorCode::Schema, "unknown provenance '" + s + "'");
}

Side parse_side(const std::string& s) {
  if (s == "bid") return Side::Bid;
  if (s == "ask") return Side::Ask;
  throw Error(ErrorCode::Schema, "unknown side '" + s + "'");
}

ojson outcome_to_json(const EventOutcome& o) {
  ojson e = ojson::object();
  if (o.order) {
    const OrderEvent& ev = *o.order;
    switch (ev.kind) {
      case EventKind::Consume:
        e["kind"] = "consume";
        e["pile"] = to_string(ev.pile);
        e["size"] = ev.size;
        e["tag"] = provenance_name(ev.tag);
        break;
      case EventKind::Limit:
        e["kind"] = "limit";
        e["pile"] = to_string(ev.pile);
        e["side"] = side_name(ev.order_side);
        e["size"] = ev.size;
        break;
      case EventKind::Modif:
        e["kind"] = "modif";
        e["pile"] = to_string(ev.pile);
        e["to"] = to_string(ev.target);
        e["size"] = ev.size;
        break;
    }
    if (!o.draws.new_piles.empty()) e["v"] = o.draws.new_piles;
    if (o.draws.refill) e["r"] = *o.draws.refill;
  }
  if (!o.signal_draw.empty()) e["draw"] = o.signal_draw;
  return e;
}

EventOutcome outcome_from_json(const json& e) {
  EventOutcome o;
  if (e.contains("kind")) {
    const std::string kind = e.at("kind").get<std::string>();
    const Pile pile = parse_pile(e.at("pile").get<std::string>());
    const Volume n = e.at("size").get<Volume>();
    if (kind == "consume")
      o.order = OrderEvent::consume(pile, n, parse_provenance(e.value("tag", std::string("none"))));
    else if (kind == "limit")
      o.order = OrderEvent::limit(pile, parse_side(e.at("side").get<std::string>()), n);
    else if (kind == "modif")
      o.order = OrderEvent::modif(pile, parse_pile(e.at("to").get<std::string>()), n);
    else
      throw Error(ErrorCode::Schema, "unknown order kind '" + kind + "'");
    if (e.contains("v")) o.draws.new_piles = e.at("v").get<std::vector<Volume>>();
    if (e.contains("r")) o.draws.refill = e.at("r").get<Volume>();
  }
  if (e.contains("draw")) o.signal_draw = e.at("draw").get<std::vector<double>>();
  return o;
}

std::vector<double> prices_of(const MarketState& x, const std::vector<double>& ticks) {
  std::vector<double> p(x.price_index.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = ticks[i] * (static_cast<double>(x.price_index[i]) + 0.5);
  return p;
}

std::vector<std::int64_t> grid_indices(const std::vector<double>& p, const std::vector<double>& ticks) {
  if (p.size() != ticks.size()) throw Error(ErrorCode::Schema, "price count does not match tick count");
  std::vector<std::int64_t> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = p[i] / ticks[i] - 0.5;
    m[i] = std::llround(r);
    if (!std::isfinite(r) || std::abs(r - static_cast<double>(m[i])) > 1e-6)
      throw Error(ErrorCode::Validation, "price " + std::to_string(p[i]) + " is off the half-tick grid");
  }
  return m;
}

double parse_time(const json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    const double t = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw Error(ErrorCode::Schema, "bad time '" + s + "'");
    return t;
  }
  if (v.is_number()) return v.get<double>();
  throw Error(ErrorCode::Schema, "time must be a decimal string");
}

}  // namespace

std::string format_time(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  return buf;
}

std::vector<std::int64_t> EventLog::counts() const {
  std::vector<std::int64_t> c(header.events.size(), 0);
  for (const auto& r : records)
    if (r.z >= 0) ++c[static_cast<std::size_t>(r.z)];
  return c;
}

ojson state_to_json(const MarketState& x) {
  ojson j = ojson::object();
  if (!x.books.empty()) {
    ojson books = ojson::array();
    for (const auto& q : x.books) {
      ojson b = ojson::object();
      b["b"] = std::vector<Volume>(q.side(Side::Bid).begin(), q.side(Side::Bid).end());
      b["a"] = std::vector<Volume>(q.side(Side::Ask).begin(), q.side(Side::Ask).end());
      books.push_back(std::move(b));
    }
    j["q"] = std::move(books);
  } else {
    j["s"] = x.signal;
  }
  return j;
}

MarketState state_from_json(const json& j) {
  MarketState x;
  if (!j.is_object()) throw Error(ErrorCode::Schema, "state must be an object");
  if (j.contains("q")) {
    for (const auto& b : j.at("q")) {
      auto bid = b.at("b").get<std::vector<Volume>>();
      auto ask = b.at("a").get<std::vector<Volume>>();
      if (bid.size() != ask.size() || bid.empty()) throw Error(ErrorCode::Schema, "book sides differ in depth");
      x.books.emplace_back(std::move(bid), std::move(ask));
    }
  } else if (j.contains("s")) {
    x.signal = j.at("s").get<std::vector<double>>();
  } else {
    throw Error(ErrorCode::Schema, "state needs 'q' or 's'");
  }
  return x;
}

LogHeader make_header(const MarketModel& model, double horizon, std::uint64_t seed, const MarketState& x0) {
  LogHeader h;
  h.preset = model.preset();
  h.theta_names = model.theta().names;
  h.theta_values = model.theta().values;
  h.ticks = model.ticks();
  for (int k = 0; k < model.event_count(); ++k) h.events.push_back(model.event(k).name);
  h.horizon = horizon;
  h.seed = seed;
  h.x0 = x0;
  const auto& o = model.options();
  h.config["model"] = {{"regen_bid_mean", o.regen.bid_mean},
                       {"regen_ask_mean", o.regen.ask_mean},
                       {"wipe_prob", o.wipe_prob},
                       {"redraw_rate", o.redraw_rate}};
  h.version = EFFLOB_VERSION;
  return h;
}

void write_log(std::ostream& out, const EventLog& log) {
  const auto& h = log.header;
  ojson head = ojson::object();
  head["type"] = "header";
  head["format_version"] = h.format_version;
  head["preset"] = h.preset;
  ojson theta = ojson::object();
  for (std::size_t i = 0; i < h.theta_names.size(); ++i) theta[h.theta_names[i]] = h.theta_values[i];
  head["theta"] = std::move(theta);
  head["ticks"] = h.ticks;
  head["events"] = h.events;
  head["T"] = h.horizon;
  head["seed"] = h.seed;
  head["x0"] = state_to_json(h.x0);
  head["p0"] = prices_of(h.x0, h.ticks);
  head["config"] = h.config;
  head["version"] = h.version;
  out << head.dump() << '\n';
  for (const auto& r : log.records) {
    ojson j = ojson::object();
    j["t"] = format_time(r.t);
    j["z"] = r.z >= 0 ? h.events[static_cast<std::size_t>(r.z)] : std::string("state");
    j["x"] = state_to_json(r.x);
    j["p"] = prices_of(r.x, h.ticks);
    if (r.outcome) j["e"] = outcome_to_json(*r.outcome);
    out << j.dump() << '\n';
  }
}

void write_log_file(const std::string& path, const EventLog& log) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_log(f, log);
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

EventLog read_log(std::istream& in) {
  EventLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  double last_t = 0.0;
  auto fail = [&](const std::string& what) -> Error {
    return Error(ErrorCode::Validation, "line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("type", std::string()) != "header") throw fail("first line must be the header");
        auto& h = log.header;
        h.format_version = j.at("format_version").get<int>();
        if (h.format_version != kLogFormatVersion)
          throw fail("unsupported format_version " + std::to_string(h.format_version));
        h.preset = j.at("preset").get<std::string>();
        // File order is the parameter order.
        const auto oj = ojson::parse(line);
        for (auto it = oj.at("theta").begin(); it != oj.at("theta").end(); ++it) {
          h.theta_names.push_back(it.key());
          h.theta_values.push_back(it.value().get<double>());
        }
        h.ticks = j.at("ticks").get<std::vector<double>>();
        for (double t : h.ticks)
          if (!(t > 0.0)) throw fail("tick must be positive");
        h.events = j.at("events").get<std::vector<std::string>>();
        h.horizon = j.at("T").get<double>();
        h.seed = j.value("seed", std::uint64_t{0});
        h.x0 = state_from_json(j.at("x0"));
        h.x0.price_index = grid_indices(j.at("p0").get<std::vector<double>>(), h.ticks);
        if (oj.contains("config")) h.config = oj.at("config");
        h.version = j.value("version", std::string());
        have_header = true;
        continue;
      }
      LogRecord r;
      r.line = lineno;
      r.t = parse_time(j.at("t"));
      if (!std::isfinite(r.t)) throw fail("non-finite time");
      if (r.t < 0.0 || (!log.records.empty() && r.t <= last_t) || (log.records.empty() && r.t <= 0.0))
        throw fail("times must be strictly increasing and positive");
      if (r.t > log.header.horizon) throw fail("time beyond the horizon T");
      last_t = r.t;
      const std::string z = j.at("z").get<std::string>();
      if (z == "state") {
        r.z = -1;
      } else {
        const auto& ev = log.header.events;
        auto it = std::find(ev.begin(), ev.end(), z);
        if (it == ev.end()) throw fail("unknown event id '" + z + "'");
        r.z = static_cast<int>(it - ev.begin());
      }
      r.x = state_from_json(j.at("x"));
      r.x.price_index = grid_indices(j.at("p").get<std::vector<double>>(), log.header.ticks);
      if (j.contains("e")) r.outcome = outcome_from_json(j.at("e"));
      log.records.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Validation && std::string(e.what()).find("line ") != std::string::npos) throw;
      throw fail(e.what());
    } catch (const json::exception& e) {
      throw fail(std::string("schema: ") + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::Validation, "empty log: no header line");
  return log;
}

EventLog read_log_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return read_log(f);
}

std::shared_ptr<const MarketModel> model_from_header(const LogHeader& h, const ModelOptions& fallback) {
  ThetaSpec theta = default_theta(h.preset);
  if (h.theta_names != theta.names) throw Error(ErrorCode::Validation, "header theta does not match the preset");
  theta.values = h.theta_values;
  ModelOptions opt = fallback;
  if (h.config.contains("model")) {
    const auto& m = h.config.at("model");
    opt.regen.bid_mean = m.value("regen_bid_mean", opt.regen.bid_mean);
    opt.regen.ask_mean = m.value("regen_ask_mean", opt.regen.ask_mean);
    opt.wipe_prob = m.value("wipe_prob", opt.wipe_prob);
    opt.redraw_rate = m.value("redraw_rate", opt.redraw_rate);
  }
  opt.ticks = h.ticks;
  return make_model(h.preset, theta, opt);
}

void check_log(const EventLog& log, const MarketModel& model) {
  const auto& h = log.header;
  if (static_cast<int>(h.events.size()) != model.event_count())
    throw Error(ErrorCode::Validation, "event alphabet size differs from the model");
  for (int k = 0; k < model.event_count(); ++k)
    if (h.events[static_cast<std::size_t>(k)] != model.event(k).name)
      throw Error(ErrorCode::Validation, "event alphabet differs from the model at '" + model.event(k).name + "'");
  if (!model.valid_state(h.x0)) throw Error(ErrorCode::Validation, "initial state invalid for the model");
  MarketState cur = h.x0;
  // Line numbers count the header as line 1.
  for (std::size_t m = 0; m < log.records.size(); ++m) {
    const auto& r = log.records[m];
    const std::string where = "line " + std::to_string(r.line ? r.line : m + 2) + ": ";
    if (!model.valid_state(r.x)) throw Error(ErrorCode::Validation, where + "state invalid for the model");
    if (r.z >= 0 && r.outcome) {
      MarketState next = cur;
      try {
        model.replay(next, r.z, *r.outcome);
      } catch (const Error& e) {
        throw Error(ErrorCode::Validation, where + "replay failed: " + e.what());
      }
      if (!(next == r.x)) throw Error(ErrorCode::Validation, where + "snapshot differs from replayed transition");
    } else if (r.z < 0 && !cur.price_index.empty() && r.x.price_index != cur.price_index) {
      throw Error(ErrorCode::Validation, where + "state-only jump moved a price");
    }
    cur = r.x;
  }
}

}  // namespace efflob
