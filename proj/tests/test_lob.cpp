#include <doctest.h>

#include <cmath>
#include <functional>

#include "efflob/error.hpp"
#include "efflob/lob.hpp"
#include "lob_oracle.hpp"

using namespace efflob;
using efflob::oracle::mid_rule_dp;
using efflob::oracle::piles;

namespace {

Pile B(int l) { return {Side::Bid, l}; }
Pile A(int l) { return {Side::Ask, l}; }

// Bid side filled on three levels, nothing at (a,1).
LobState gapped_book() { return LobState({1, 2, 1}, {0, 3, 1}); }

// Every state with K levels per side, volumes in 0..vmax.
void for_each_state(int K, int vmax, const std::function<void(const LobState&)>& f) {
  const int n = 2 * K;
  std::vector<Volume> v(static_cast<std::size_t>(n), 0);
  while (true) {
    const LobState q = LobState::from_price_ordered(v);
    if (q.valid()) f(q);
    int i = 0;
    while (i < n && v[static_cast<std::size_t>(i)] == vmax) v[static_cast<std::size_t>(i++)] = 0;
    if (i == n) break;
    ++v[static_cast<std::size_t>(i)];
  }
}

std::vector<OrderEvent> events(int K, int nmax) {
  std::vector<OrderEvent> out;
  for (int n = 1; n <= nmax; ++n)
    for (Pile j : piles(K)) {
      out.push_back(OrderEvent::consume(j, n));
      out.push_back(OrderEvent::limit(j, Side::Bid, n));
      out.push_back(OrderEvent::limit(j, Side::Ask, n));
      for (Pile t : piles(K))
        if (!(t == j)) out.push_back(OrderEvent::modif(j, t, n));
    }
  return out;
}

OrderEvent mirror(const OrderEvent& e) {
  auto m = [](Pile p) { return Pile{opposite(p.side), p.level}; };
  OrderEvent r = e;
  r.pile = m(e.pile);
  r.target = m(e.target);
  r.order_side = opposite(e.order_side);
  return r;
}

LobState mirror(const LobState& q) {
  std::vector<Volume> b(q.side(Side::Ask).begin(), q.side(Side::Ask).end());
  std::vector<Volume> a(q.side(Side::Bid).begin(), q.side(Side::Bid).end());
  return LobState(b, a);
}

}  // namespace

TEST_CASE("best and second-best piles") {
  const auto q = gapped_book();
  CHECK(best_pile(q, Side::Ask) == A(2));
  CHECK(best_pile(q, Side::Bid) == B(1));
  CHECK(second_best_pile(q, Side::Bid) == B(2));
  const LobState minimal({1, 0, 0}, {1, 0, 0});
  CHECK(best_pile(minimal, Side::Bid) == B(1));
  CHECK(best_pile(minimal, Side::Ask) == A(1));
  const LobState far({1, 0, 0}, {0, 0, 5});
  CHECK_FALSE(far.valid());
  const LobState sole({0, 1, 0}, {0, 0, 5});
  CHECK(best_pile(sole, Side::Ask) == A(3));
  CHECK(second_best_pile(sole, Side::Ask) == A(5));
  const LobState gap({1, 0, 0}, {1, 0, 2});
  CHECK(second_best_pile(gap, Side::Ask) == A(3));
}

TEST_CASE("pile distance") {
  CHECK(pile_distance(A(2), B(1)) == 2);
  CHECK(pile_distance(B(2), B(1)) == -1);
  CHECK(pile_distance(B(1), A(1)) == -1);
  for (Pile x : piles(3))
    for (Pile y : piles(3)) CHECK(pile_distance(x, y) == -pile_distance(y, x));
}

TEST_CASE("spread and direction") {
  auto s = spread_and_direction(gapped_book());
  CHECK(s.spread == 2);
  CHECK(s.direction == 1);
  s = spread_and_direction(LobState({1, 0, 0}, {1, 0, 0}));
  CHECK(s.spread == 1);
  CHECK(s.direction == 0);
  s = spread_and_direction(LobState({0, 1, 0}, {1, 0, 0}));
  CHECK(s.spread == 2);
  CHECK(s.direction == -1);
}

TEST_CASE("licitness") {
  const auto q = gapped_book();
  CHECK(is_licit(q, OrderEvent::limit(A(1), Side::Ask, 1)));
  CHECK_FALSE(is_licit(q, OrderEvent::consume(B(1), q[B(1)] + 1)));
  CHECK_FALSE(is_licit(q, OrderEvent::modif(B(1), B(1), 1)));
  CHECK_THROWS(OrderEvent::consume(B(1), 0));
}

TEST_CASE("delta_p examples") {
  const auto q = gapped_book();
  CHECK(delta_p(q, OrderEvent::consume(A(2), q[A(2)])) == 1);
  CHECK(delta_p(q, OrderEvent::consume(B(1), q[B(1)])) == 0);
  CHECK(delta_p(q, OrderEvent::limit(A(1), Side::Ask, 1)) == 0);
  CHECK(delta_p(q, OrderEvent::limit(B(3), Side::Bid, 2)) == 0);
  CHECK_THROWS_AS(delta_p(q, OrderEvent::consume(B(1), 9)), Error);
}

TEST_CASE("delta_p matches the mid-price rule on every small state") {
  std::int64_t checked = 0, mismatches = 0;
  for (int K = 1; K <= 3; ++K) {
    const auto evs = events(K, 2);
    for_each_state(K, 2, [&](const LobState& q) {
      for (const auto& e : evs) {
        if (!is_licit(q, e)) continue;
        ++checked;
        const int dp = delta_p(q, e);
        if (dp != mid_rule_dp(q, e)) {
          if (++mismatches <= 5) MESSAGE("mismatch: ", to_string(e), " dp ", dp, " oracle ", mid_rule_dp(q, e));
        }
        // mirror symmetry
        CHECK(delta_p(mirror(q), mirror(e)) == -dp);
      }
    });
  }
  CHECK(checked > 1000);
  CHECK(mismatches == 0);
}

TEST_CASE("apply_event keeps the state admissible") {
  RegenSpec regen;
  Rng rng(5);
  for (int K = 1; K <= 3; ++K) {
    const auto evs = events(K, 2);
    for_each_state(K, 2, [&](const LobState& q) {
      for (const auto& e : evs) {
        if (!is_licit(q, e)) continue;
        const auto tr = apply_event(q, 10, e, regen, rng);
        REQUIRE(tr.q.valid());
        CHECK(tr.dp == delta_p(q, e));
        CHECK(tr.price_index == 10 + tr.dp);
        if (tr.dp == 0) CHECK(tr.q == add_delta_q(q, e));
      }
    });
  }
}

TEST_CASE("apply_event examples") {
  const LobState q({2, 1, 1}, {1, 2, 3});
  const auto tr = apply_event(q, 0, OrderEvent::limit(A(1), Side::Ask, 2), RegenDraws{});
  CHECK(tr.dp == 0);
  CHECK(tr.q == LobState({2, 1, 1}, {3, 2, 3}));

  // K = 1, ask pile fully consumed: price up, new ask from the draw, bid refilled.
  const LobState k1({4}, {2});
  RegenDraws d;
  d.new_piles = {7};
  d.refill = 5;
  const auto r = apply_event(k1, 0, OrderEvent::consume(A(1), 2), d);
  CHECK(r.dp == 1);
  CHECK(r.price_index == 1);
  CHECK(r.q == LobState({5}, {7}));
  RegenDraws none;
  CHECK_THROWS_AS(apply_event(k1, 0, OrderEvent::consume(A(1), 2), none), Error);
}

TEST_CASE("shift bracket relabels by price") {
  const LobState q({1, 2, 3}, {4, 5, 6});
  const std::vector<Volume> none;
  CHECK(shift_bracket(q, none, ShiftDirection::Up) == q);
  const std::vector<Volume> v{8, 9};
  // up: the window slides towards the asks, new piles on the far ask side
  CHECK(shift_bracket(q, v, ShiftDirection::Up).price_ordered() == std::vector<Volume>{1, 4, 5, 6, 8, 9});
  // down: new piles on the far bid side, v[0] nearest the old window
  CHECK(shift_bracket(q, v, ShiftDirection::Down).price_ordered() == std::vector<Volume>{9, 8, 3, 2, 1, 4});
}

TEST_CASE("volume overflow is an error") {
  const LobState q({std::numeric_limits<Volume>::max()}, {1});
  CHECK_THROWS_AS(add_delta_q(q, OrderEvent::limit(B(1), Side::Bid, 1)), Error);
}
