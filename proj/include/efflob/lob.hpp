#pragma once

// Order-book state space, event algebra and the post-event transition of the
// queue-reactive model. Volumes are tracked on K piles per side around a
// reference price living on the half-tick grid.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efflob/rng.hpp"

namespace efflob {

using Volume = std::int64_t;

enum class Side : std::uint8_t { Bid = 0, Ask = 1 };

constexpr Side opposite(Side s) { return s == Side::Bid ? Side::Ask : Side::Bid; }
const char* side_name(Side s);

// A pile is (side, level); level counts ticks away from the reference price,
// starting at 1. Level K+2 is the "no second-best pile" sentinel.
struct Pile {
  Side side = Side::Bid;
  int level = 1;

  friend bool operator==(const Pile&, const Pile&) = default;
};

// Signed distance in ticks, `a - b`.
int pile_distance(Pile a, Pile b);

std::string to_string(Pile p);
// Parses "b1", "a3", ...
Pile parse_pile(const std::string& s);

class LobState {
 public:
  explicit LobState(int depth = 1);
  // bid[l-1] / ask[l-1] hold the volume at level l.
  LobState(std::vector<Volume> bid, std::vector<Volume> ask);

  int depth() const { return depth_; }

  Volume operator[](Pile p) const { return vol_[slot(p)]; }
  Volume& operator[](Pile p) { return vol_[slot(p)]; }

  std::span<const Volume> side(Side s) const {
    return {vol_.data() + (s == Side::Bid ? 0 : depth_), static_cast<std::size_t>(depth_)};
  }
  Volume total(Side s) const;

  // Membership in the admissible set: both sides non-empty and best levels
  // at most one tick apart.
  bool valid() const;

  // Layout (b,K) ... (b,1), (a,1) ... (a,K): the price-ordered view.
  std::vector<Volume> price_ordered() const;
  static LobState from_price_ordered(std::span<const Volume> v);

  friend bool operator==(const LobState&, const LobState&) = default;

 private:
  std::size_t slot(Pile p) const;

  int depth_;
  std::vector<Volume> vol_;  // bid 1..K, then ask 1..K
};

enum class EventKind : std::uint8_t { Consume, Limit, Modif };

// Consumes are either market orders or cancellations; the dynamics do not
// distinguish them but estimation may.
enum class Provenance : std::uint8_t { None, Market, Cancel };

struct OrderEvent {
  EventKind kind = EventKind::Consume;
  Pile pile;                   // target of consume/limit, source of modif
  Pile target;                 // modif only
  Side order_side = Side::Bid; // limit only (modif: side of the source)
  Volume size = 1;
  Provenance tag = Provenance::None;

  static OrderEvent consume(Pile j, Volume n, Provenance tag = Provenance::None);
  static OrderEvent limit(Pile j, Side s, Volume n);
  static OrderEvent modif(Pile from, Pile to, Volume n);

  friend bool operator==(const OrderEvent&, const OrderEvent&) = default;
};

std::string to_string(const OrderEvent& e);

Pile best_pile(const LobState& q, Side s);
Pile second_best_pile(const LobState& q, Side s);

struct SpreadInfo {
  int spread;     // ticks, >= 1
  int direction;  // ask-best level minus bid-best level, in {-1, 0, 1}
};
SpreadInfo spread_and_direction(const LobState& q);

bool is_licit(const LobState& q, const OrderEvent& e);

// Reference-price move in ticks triggered by a licit event.
int delta_p(const LobState& q, const OrderEvent& e);

// q + dq^e without any licitness or window handling; throws on negative
// volumes or overflow.
LobState add_delta_q(const LobState& q, const OrderEvent& e);

enum class ShiftDirection : std::uint8_t { Up, Down };

// [q, v] (Up: window slides up, v fills the far ask piles) and
// [v, q] (Down: v fills the far bid piles).
LobState shift_bracket(const LobState& q, std::span<const Volume> v, ShiftDirection dir);

// Independent geometric volumes on {1, 2, ...} for every regenerated pile.
struct RegenSpec {
  double bid_mean = 2.0;
  double ask_mean = 2.0;

  double mean(Side s) const { return s == Side::Bid ? bid_mean : ask_mean; }
  Volume draw(Side s, Rng& rng) const;
  void validate() const;
};

// Random volumes consumed by a price-moving transition.
struct RegenDraws {
  std::vector<Volume> new_piles;  // |delta_p| piles revealed on the far side
  std::optional<Volume> refill;   // only if the near side empties
};

struct DrawRequirement {
  int new_piles = 0;
  bool refill = false;
};
DrawRequirement required_draws(const LobState& q, const OrderEvent& e);

struct Transition {
  LobState q;
  std::int64_t price_index;  // reference price is tick * (price_index + 1/2)
  int dp;
};

Transition apply_event(const LobState& q, std::int64_t price_index, const OrderEvent& e,
                       const RegenDraws& draws);
Transition apply_event(const LobState& q, std::int64_t price_index, const OrderEvent& e,
                       const RegenSpec& regen, Rng& rng, RegenDraws* used = nullptr);

// Absolute price (in ticks, relative to the reference price) of a pile:
// asks at +(l - 1/2), bids at -(l - 1/2).
double pile_offset_ticks(Pile p);

}  // namespace efflob
