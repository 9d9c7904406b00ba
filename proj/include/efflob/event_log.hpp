#pragma once

// JSON Lines event logs: a header line followed by one record per jump.

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "efflob/presets.hpp"

namespace efflob {

inline constexpr int kLogFormatVersion = 1;

struct LogHeader {
  int format_version = kLogFormatVersion;
  std::string preset;
  std::vector<std::string> theta_names;
  std::vector<double> theta_values;
  std::vector<double> ticks;
  std::vector<std::string> events;  // event alphabet, index = z
  double horizon = 0.0;
  std::uint64_t seed = 0;
  MarketState x0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string version;
};

struct LogRecord {
  double t = 0.0;
  int z = -1;        // event index, -1 for a state-only jump
  MarketState x;     // state and reference prices right after the jump
  std::optional<EventOutcome> outcome;  // replay information, if recorded
  std::size_t line = 0;                 // source line when read from a file
};

struct EventLog {
  LogHeader header;
  std::vector<LogRecord> records;

  std::vector<std::int64_t> counts() const;
};

// Header for a log produced by `model`.
LogHeader make_header(const MarketModel& model, double horizon, std::uint64_t seed, const MarketState& x0);

std::string format_time(double t);

void write_log(std::ostream& out, const EventLog& log);
void write_log_file(const std::string& path, const EventLog& log);

// Parses and checks the schema and time ordering; errors carry the line number.
EventLog read_log(std::istream& in);
EventLog read_log_file(const std::string& path);

// Structural checks against a model: alphabet, states valid, price grid, and
// replay of recorded outcomes reproducing every snapshot. Throws on failure.
void check_log(const EventLog& log, const MarketModel& model);

// Model that generated a log, rebuilt from its header.
std::shared_ptr<const MarketModel> model_from_header(const LogHeader& h, const ModelOptions& options = {});

nlohmann::ordered_json state_to_json(const MarketState& x);
MarketState state_from_json(const nlohmann::json& j);

}  // namespace efflob
