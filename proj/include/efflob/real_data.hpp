#pragma once

// Event logs recorded from market data: per event the time, the asset and
// direction of a reference-price move (or "state" for a pure imbalance
// update), the best-pile volume imbalance of every asset and the reference
// prices after the event. Converted to the internal log of a signal-driven
// preset ("imbalance" unless the header names another one).

#include <iosfwd>
#include <string>

#include "efflob/event_log.hpp"

namespace efflob {

struct Units {
  double time = 1.0;   // seconds per input time unit
  double price = 1.0;  // price per input price unit
};

// (q_b - q_a) / (q_b + q_a); 0 for an empty best level.
double volume_imbalance(double q_bid, double q_ask);

EventLog ingest_real_log(std::istream& in, const Units& units = {});
EventLog ingest_real_log_file(const std::string& path, const Units& units = {});

// Writes a signal-driven log in the market-data layout (unit scale 1).
void export_real_log(std::ostream& out, const EventLog& log);

}  // namespace efflob
