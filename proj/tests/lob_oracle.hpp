#pragma once

// Reference-price move recomputed from the whole book, for cross-checking delta_p.

#include <stdexcept>
#include <utility>
#include <vector>

#include "efflob/lob.hpp"

namespace efflob::oracle {

inline std::vector<Pile> piles(int K) {
  std::vector<Pile> p;
  for (int l = 1; l <= K; ++l) {
    p.push_back(Pile{Side::Bid, l});
    p.push_back(Pile{Side::Ask, l});
  }
  return p;
}

// Price of a pile in half ticks relative to the reference price: asks at 2l-1, bids at -(2l-1).
inline int half_ticks(Pile p) { return p.side == Side::Ask ? 2 * p.level - 1 : -(2 * p.level - 1); }

// Reference-price move rebuilt from the book after the event: each level
// carries signed volume (bids > 0, asks < 0); the new reference is the mid
// when the spread is odd, else the half tick of the mid nearest the old one.
inline int mid_rule_dp(const LobState& q, const OrderEvent& e) {
  const int K = q.depth();
  std::vector<std::pair<int, Volume>> lv;  // (half-tick price, signed volume)
  for (Pile p : piles(K)) lv.emplace_back(half_ticks(p), p.side == Side::Bid ? q[p] : -q[p]);
  auto at = [&](Pile p) -> Volume& {
    for (auto& [x, v] : lv)
      if (x == half_ticks(p)) return v;
    throw std::logic_error("pile");
  };
  auto take = [&](Pile p, Volume n) {
    Volume& v = at(p);
    v += v > 0 ? -n : n;
  };
  auto put = [&](Pile p, Side s, Volume n) { at(p) += s == Side::Bid ? n : -n; };
  switch (e.kind) {
    case EventKind::Consume:
      take(e.pile, e.size);
      break;
    case EventKind::Limit:
      put(e.pile, e.order_side, e.size);
      break;
    case EventKind::Modif: {
      const Side s = at(e.pile) > 0 ? Side::Bid : Side::Ask;
      take(e.pile, e.size);
      put(e.target, s, e.size);
      break;
    }
  }
  const int sentinel = 2 * (K + 2) - 1;
  int bid = -sentinel, ask = sentinel;
  for (auto [x, v] : lv) {
    if (v > 0) bid = std::max(bid, x);
    if (v < 0) ask = std::min(ask, x);
  }
  const int spread = (ask - bid) / 2;
  const int sum = ask + bid;  // the mid is sum / 4 ticks
  if (spread % 2 != 0) return sum / 4;
  return sum > 0 ? (sum - 2) / 4 : (sum + 2) / 4;
}

}  // namespace efflob::oracle
