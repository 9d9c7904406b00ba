#include "efflob/lob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "efflob/error.hpp"

namespace efflob {

namespace {

constexpr int floor_half(int x) { return x >= 0 ? x / 2 : -((-x + 1) / 2); }

Volume checked_add(Volume a, Volume b) {
  Volume r;
  if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorCode::Overflow, "volume overflow");
  return r;
}

void require_valid(const LobState& q) {
  if (!q.valid()) throw Error(ErrorCode::InvalidState, "order book state outside the admissible set");
}

bool in_window(const LobState& q, Pile p) { return p.level >= 1 && p.level <= q.depth(); }

}  // namespace

const char* side_name(Side s) { return s == Side::Bid ? "bid" : "ask"; }

int pile_distance(Pile a, Pile b) {
  if (a.side == Side::Ask && b.side == Side::Ask) return a.level - b.level;
  if (a.side == Side::Bid && b.side == Side::Bid) return b.level - a.level;
  if (a.side == Side::Ask) return a.level + b.level - 1;
  return -a.level - b.level + 1;
}

std::string to_string(Pile p) {
  return (p.side == Side::Bid ? "b" : "a") + std::to_string(p.level);
}

Pile parse_pile(const std::string& s) {
  if (s.size() < 2 || (s[0] != 'a' && s[0] != 'b'))
    throw Error(ErrorCode::Validation, "bad pile '" + s + "'");
  int level = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') throw Error(ErrorCode::Validation, "bad pile '" + s + "'");
    level = level * 10 + (s[i] - '0');
  }
  return {s[0] == 'a' ? Side::Ask : Side::Bid, level};
}

LobState::LobState(int depth) : depth_(depth), vol_(2 * static_cast<std::size_t>(depth), 0) {
  if (depth < 1) throw Error(ErrorCode::InvalidState, "depth must be >= 1");
}

LobState::LobState(std::vector<Volume> bid, std::vector<Volume> ask)
    : depth_(static_cast<int>(bid.size())) {
  if (bid.size() != ask.size() || bid.empty())
    throw Error(ErrorCode::LengthMismatch, "bid/ask depth mismatch");
  vol_ = std::move(bid);
  vol_.insert(vol_.end(), ask.begin(), ask.end());
  for (Volume v : vol_)
    if (v < 0) throw Error(ErrorCode::InvalidState, "negative volume");
}

std::size_t LobState::slot(Pile p) const {
  return static_cast<std::size_t>((p.side == Side::Bid ? 0 : depth_) + p.level - 1);
}

Volume LobState::total(Side s) const {
  Volume t = 0;
  for (Volume v : side(s)) t = checked_add(t, v);
  return t;
}

bool LobState::valid() const {
  int best[2] = {0, 0};
  for (int s = 0; s < 2; ++s) {
    auto vs = side(static_cast<Side>(s));
    for (int l = 0; l < depth_; ++l) {
      if (vs[l] < 0) return false;
      if (vs[l] > 0 && best[s] == 0) best[s] = l + 1;
    }
    if (best[s] == 0) return false;
  }
  return std::abs(best[1] - best[0]) <= 1;
}

std::vector<Volume> LobState::price_ordered() const {
  std::vector<Volume> out;
  out.reserve(vol_.size());
  for (int l = depth_; l >= 1; --l) out.push_back((*this)[Pile{Side::Bid, l}]);
  for (int l = 1; l <= depth_; ++l) out.push_back((*this)[Pile{Side::Ask, l}]);
  return out;
}

LobState LobState::from_price_ordered(std::span<const Volume> v) {
  if (v.empty() || v.size() % 2 != 0) throw Error(ErrorCode::LengthMismatch, "odd price-ordered length");
  const int k = static_cast<int>(v.size() / 2);
  std::vector<Volume> bid(k), ask(k);
  for (int l = 1; l <= k; ++l) {
    bid[l - 1] = v[k - l];
    ask[l - 1] = v[k + l - 1];
  }
  return LobState(std::move(bid), std::move(ask));
}

OrderEvent OrderEvent::consume(Pile j, Volume n, Provenance tag) {
  if (n < 1) throw Error(ErrorCode::IllicitEvent, "order size must be >= 1");
  OrderEvent e;
  e.kind = EventKind::Consume;
  e.pile = j;
  e.target = j;
  e.order_side = j.side;
  e.size = n;
  e.tag = tag;
  return e;
}

OrderEvent OrderEvent::limit(Pile j, Side s, Volume n) {
  if (n < 1) throw Error(ErrorCode::IllicitEvent, "order size must be >= 1");
  OrderEvent e;
  e.kind = EventKind::Limit;
  e.pile = j;
  e.target = j;
  e.order_side = s;
  e.size = n;
  return e;
}

OrderEvent OrderEvent::modif(Pile from, Pile to, Volume n) {
  if (n < 1) throw Error(ErrorCode::IllicitEvent, "order size must be >= 1");
  OrderEvent e;
  e.kind = EventKind::Modif;
  e.pile = from;
  e.target = to;
  e.order_side = from.side;
  e.size = n;
  return e;
}

std::string to_string(const OrderEvent& e) {
  switch (e.kind) {
    case EventKind::Consume:
      return "consume(" + to_string(e.pile) + "," + std::to_string(e.size) + ")";
    case EventKind::Limit:
      return std::string("limit(") + to_string(e.pile) + "," + side_name(e.order_side) + "," +
             std::to_string(e.size) + ")";
    case EventKind::Modif:
      return "modif(" + to_string(e.pile) + "->" + to_string(e.target) + "," +
             std::to_string(e.size) + ")";
  }
  return "?";
}

Pile best_pile(const LobState& q, Side s) {
  require_valid(q);
  auto vs = q.side(s);
  for (int l = 0; l < q.depth(); ++l)
    if (vs[l] > 0) return {s, l + 1};
  throw Error(ErrorCode::InvalidState, "empty side");
}

Pile second_best_pile(const LobState& q, Side s) {
  const Pile best = best_pile(q, s);
  auto vs = q.side(s);
  for (int l = best.level + 1; l <= q.depth(); ++l)
    if (vs[l - 1] > 0) return {s, l};
  return {s, q.depth() + 2};
}

SpreadInfo spread_and_direction(const LobState& q) {
  const Pile a = best_pile(q, Side::Ask);
  const Pile b = best_pile(q, Side::Bid);
  return {pile_distance(a, b), a.level - b.level};
}

namespace {

bool consume_licit(const LobState& q, Pile j, Volume n) {
  return n >= 1 && in_window(q, j) && q[j] >= n;
}

bool limit_licit(const LobState& q, Pile j, Side s, Volume n) {
  if (n < 1 || !in_window(q, j)) return false;
  if (j.side == s) return true;
  // An order placed among the other side's piles must stay inside the spread.
  return j.level < best_pile(q, j.side).level;
}

int limit_dp(const LobState& q, Pile j, Side s, int d) {
  if (s == Side::Bid) {
    const int dist = pile_distance(j, best_pile(q, Side::Bid));
    return dist <= 0 ? 0 : floor_half(d + dist);
  }
  const int dist = pile_distance(j, best_pile(q, Side::Ask));
  return dist >= 0 ? 0 : floor_half(1 + d + dist);
}

}  // namespace

bool is_licit(const LobState& q, const OrderEvent& e) {
  if (!q.valid()) return false;
  switch (e.kind) {
    case EventKind::Consume:
      return consume_licit(q, e.pile, e.size);
    case EventKind::Limit:
      return limit_licit(q, e.pile, e.order_side, e.size);
    case EventKind::Modif:
      if (e.pile == e.target) return false;
      return consume_licit(q, e.pile, e.size) && limit_licit(q, e.target, e.pile.side, e.size);
  }
  return false;
}

int delta_p(const LobState& q, const OrderEvent& e) {
  if (!is_licit(q, e)) throw Error(ErrorCode::IllicitEvent, to_string(e));
  const Pile ba = best_pile(q, Side::Ask);
  const Pile bb = best_pile(q, Side::Bid);
  const int d = ba.level - bb.level;
  const auto ask_depletion = [&] {
    return floor_half(d + pile_distance(second_best_pile(q, Side::Ask), ba));
  };
  const auto bid_depletion = [&] {
    return floor_half(1 + d + pile_distance(second_best_pile(q, Side::Bid), bb));
  };

  switch (e.kind) {
    case EventKind::Consume: {
      const Pile best = e.pile.side == Side::Ask ? ba : bb;
      if (e.pile != best || e.size != q[e.pile]) return 0;
      return e.pile.side == Side::Ask ? ask_depletion() : bid_depletion();
    }
    case EventKind::Limit:
      return limit_dp(q, e.pile, e.order_side, d);
    case EventKind::Modif: {
      const Side s = e.pile.side;
      if (s == Side::Bid) {
        const int dist = pile_distance(e.target, bb);
        if (dist > 0) return limit_dp(q, e.target, s, d);
        if (e.pile == bb && dist < 0 && e.size == q[e.pile])
          return std::max(bid_depletion(), floor_half(1 + d + dist));
        return 0;
      }
      const int dist = pile_distance(e.target, ba);
      if (dist < 0) return limit_dp(q, e.target, s, d);
      if (e.pile == ba && dist > 0 && e.size == q[e.pile])
        return std::min(ask_depletion(), floor_half(d + dist));
      return 0;
    }
  }
  return 0;
}

LobState add_delta_q(const LobState& q, const OrderEvent& e) {
  LobState out = q;
  const auto take = [&](Pile j) {
    if (!in_window(q, j) || out[j] < e.size)
      throw Error(ErrorCode::IllicitEvent, "insufficient volume for " + to_string(e));
    out[j] -= e.size;
  };
  const auto put = [&](Pile j) {
    if (!in_window(q, j)) throw Error(ErrorCode::IllicitEvent, "pile outside window");
    out[j] = checked_add(out[j], e.size);
  };
  switch (e.kind) {
    case EventKind::Consume:
      take(e.pile);
      break;
    case EventKind::Limit:
      put(e.pile);
      break;
    case EventKind::Modif:
      take(e.pile);
      put(e.target);
      break;
  }
  return out;
}

LobState shift_bracket(const LobState& q, std::span<const Volume> v, ShiftDirection dir) {
  const std::size_t k = static_cast<std::size_t>(q.depth());
  if (v.size() > k) throw Error(ErrorCode::LengthMismatch, "more new piles than the window depth");
  if (v.empty()) return q;
  const auto ordered = q.price_ordered();
  std::vector<Volume> out;
  out.reserve(2 * k);
  if (dir == ShiftDirection::Up) {
    out.assign(ordered.begin() + static_cast<std::ptrdiff_t>(v.size()), ordered.end());
    out.insert(out.end(), v.begin(), v.end());
  } else {
    out.assign(v.rbegin(), v.rend());
    out.insert(out.end(), ordered.begin(), ordered.end() - static_cast<std::ptrdiff_t>(v.size()));
  }
  return LobState::from_price_ordered(out);
}

Volume RegenSpec::draw(Side s, Rng& rng) const {
  std::geometric_distribution<Volume> g(1.0 / mean(s));
  return g(rng) + 1;
}

void RegenSpec::validate() const {
  for (double m : {bid_mean, ask_mean})
    if (!(m >= 1.0) || !std::isfinite(m))
      throw Error(ErrorCode::Validation, "regeneration mean must be finite and >= 1");
}

namespace {

Transition finish_shift(const LobState& moved, std::int64_t price_index, int dp,
                        std::span<const Volume> new_piles, std::optional<Volume> refill,
                        bool require_refill_draw) {
  const bool up = dp > 0;
  LobState shifted = shift_bracket(moved, new_piles, up ? ShiftDirection::Up : ShiftDirection::Down);
  const Side near = up ? Side::Bid : Side::Ask;
  if (shifted.total(near) == 0) {
    if (!refill) {
      if (require_refill_draw) throw Error(ErrorCode::MissingDraws, "refill volume required");
      refill = 1;
    }
    if (*refill < 1) throw Error(ErrorCode::Validation, "refill volume must be positive");
    Pile far{near, shifted.depth()};
    shifted[far] = checked_add(shifted[far], *refill);
  }
  return {std::move(shifted), price_index + dp, dp};
}

}  // namespace

DrawRequirement required_draws(const LobState& q, const OrderEvent& e) {
  const int dp = delta_p(q, e);
  if (dp == 0) return {};
  const LobState moved = add_delta_q(q, e);
  std::vector<Volume> ones(static_cast<std::size_t>(std::abs(dp)), 1);
  LobState shifted = shift_bracket(moved, ones, dp > 0 ? ShiftDirection::Up : ShiftDirection::Down);
  return {std::abs(dp), shifted.total(dp > 0 ? Side::Bid : Side::Ask) == 0};
}

Transition apply_event(const LobState& q, std::int64_t price_index, const OrderEvent& e,
                       const RegenDraws& draws) {
  const int dp = delta_p(q, e);
  LobState moved = add_delta_q(q, e);
  if (dp == 0) return {std::move(moved), price_index, 0};
  if (draws.new_piles.size() != static_cast<std::size_t>(std::abs(dp)))
    throw Error(ErrorCode::MissingDraws, "expected " + std::to_string(std::abs(dp)) + " new pile volumes");
  for (Volume v : draws.new_piles)
    if (v < 1) throw Error(ErrorCode::Validation, "regenerated volumes must be positive");
  return finish_shift(moved, price_index, dp, draws.new_piles, draws.refill, true);
}

Transition apply_event(const LobState& q, std::int64_t price_index, const OrderEvent& e,
                       const RegenSpec& regen, Rng& rng, RegenDraws* used) {
  const int dp = delta_p(q, e);
  LobState moved = add_delta_q(q, e);
  if (dp == 0) {
    if (used) *used = {};
    return {std::move(moved), price_index, 0};
  }
  const Side far = dp > 0 ? Side::Ask : Side::Bid;
  RegenDraws draws;
  draws.new_piles.resize(static_cast<std::size_t>(std::abs(dp)));
  for (auto& v : draws.new_piles) v = regen.draw(far, rng);
  LobState shifted =
      shift_bracket(moved, draws.new_piles, dp > 0 ? ShiftDirection::Up : ShiftDirection::Down);
  if (shifted.total(opposite(far)) == 0) draws.refill = regen.draw(opposite(far), rng);
  if (used) *used = draws;
  return finish_shift(moved, price_index, dp, draws.new_piles, draws.refill, true);
}

double pile_offset_ticks(Pile p) {
  const double off = p.level - 0.5;
  return p.side == Side::Ask ? off : -off;
}

}  // namespace efflob
