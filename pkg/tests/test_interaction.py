import numpy as np
import pytest
from hypothesis import given, strategies as hst

from lobknn.interaction import (
    ASK, BID, BUY, SELL, AgentAction, AgentBook, Cancellation, CrossingOrder, InsufficientDepth,
    InvalidOrder, LimitOrder, MarketOrder, OutOfWindow, Overcancel, UnknownOrder, apply_action,
    apply_cancellation, apply_limit_order, apply_market_order,
)
from lobknn.lob_core import LobSnapshot

BASE = LobSnapshot.from_vector([3, 4, 12, 7, 8, 9], 100)  # bids 98..100, asks 101..103


def test_limit_then_cancel():
    book = AgentBook()
    s = apply_limit_order(BASE, LimitOrder(100, 5, BID), book)
    assert s.volume_at(100) == 17
    s2 = apply_cancellation(s, Cancellation(0, 5), book)
    assert s2.volume_at(100) == 12
    assert len(book) == 0
    np.testing.assert_array_equal(s2.vector, BASE.vector)


def test_cancel_errors():
    book = AgentBook()
    with pytest.raises(UnknownOrder):
        apply_cancellation(BASE, Cancellation(0, 1), book)
    s = apply_limit_order(BASE, LimitOrder(99, 2, BID), book)
    with pytest.raises(InvalidOrder):
        apply_cancellation(s, Cancellation(0, 0), book)
    with pytest.raises(Overcancel):
        apply_cancellation(s, Cancellation(0, 3), book)


def test_market_buy_walks_book():
    s, rev, used = apply_market_order(BASE, MarketOrder(10, BUY))
    np.testing.assert_array_equal(s.ask_volumes, [0, 5, 9])
    assert rev == -(101 * 7 + 102 * 3)
    assert used == [(101, 7), (102, 3)]


def test_market_zero_is_identity():
    s, rev, used = apply_market_order(BASE, MarketOrder(0, BUY))
    assert s is BASE and rev == 0 and used == []


def test_market_too_large():
    with pytest.raises(InsufficientDepth):
        apply_market_order(BASE, MarketOrder(25, BUY))
    with pytest.raises(InsufficientDepth):
        apply_market_order(BASE, MarketOrder(20, SELL))


def test_limit_errors_and_locality():
    book = AgentBook()
    with pytest.raises(CrossingOrder):
        apply_limit_order(BASE, LimitOrder(101, 1, BID), book)
    with pytest.raises(CrossingOrder):
        apply_limit_order(BASE, LimitOrder(100, 1, ASK), book)
    with pytest.raises(OutOfWindow):
        apply_limit_order(BASE, LimitOrder(97, 1, BID), book)
    s = apply_limit_order(BASE, LimitOrder(98, 1, BID), book)
    np.testing.assert_array_equal(s.vector - BASE.vector, [1, 0, 0, 0, 0, 0])
    assert book.orders[0].level_volume_at_placement == 3


def test_priority_flag_on_new_level():
    s = LobSnapshot.from_vector([3, 4, 0, 0, 8, 9], 100)
    book = AgentBook()
    apply_limit_order(s, LimitOrder(100, 2, BID), book)
    apply_limit_order(s, LimitOrder(101, 2, ASK), book)
    apply_limit_order(s, LimitOrder(99, 2, BID), book)
    assert [o.priority for o in book.orders.values()] == [True, True, False]


def test_three_panel_sequence():
    book = AgentBook()
    s = apply_limit_order(BASE, LimitOrder(99, 2, BID), book)
    s = apply_limit_order(s, LimitOrder(102, 3, ASK), book)
    act = AgentAction(
        cancellations=(Cancellation(0, 2), Cancellation(1, 1)),
        market=MarketOrder(9, BUY),
        limits=(LimitOrder(100, 4, BID), LimitOrder(103, 6, ASK)),
    )
    out, rev = apply_action(s, act, book)
    book2 = AgentBook()
    t = apply_limit_order(BASE, LimitOrder(99, 2, BID), book2)
    t = apply_limit_order(t, LimitOrder(102, 3, ASK), book2)
    t = apply_cancellation(t, Cancellation(0, 2), book2)
    t = apply_cancellation(t, Cancellation(1, 1), book2)
    t, r2, _ = apply_market_order(t, MarketOrder(9, BUY))
    t = apply_limit_order(t, LimitOrder(100, 4, BID), book2)
    t = apply_limit_order(t, LimitOrder(103, 6, ASK), book2)
    np.testing.assert_array_equal(out.vector, t.vector)
    assert rev == r2 == -(101 * 7 + 102 * 2)


def test_action_atomic():
    book = AgentBook()
    s = apply_limit_order(BASE, LimitOrder(99, 2, BID), book)
    before = dict(book.orders)
    act = AgentAction(cancellations=(Cancellation(0, 2),), market=MarketOrder(1000, BUY))
    with pytest.raises(InsufficientDepth):
        apply_action(s, act, book)
    assert book.orders.keys() == before.keys() and book.orders[0].remaining == 2
    np.testing.assert_array_equal(s.vector, [3, 6, 12, 7, 8, 9])


def test_empty_action_identity():
    out, rev = apply_action(BASE, AgentAction(), AgentBook())
    np.testing.assert_array_equal(out.vector, BASE.vector)
    assert rev == 0


@given(hst.lists(hst.integers(0, 30), min_size=8, max_size=8), hst.integers(0, 200), hst.booleans())
def test_market_conservation_and_revenue(v, q, buy):
    s = LobSnapshot.from_vector(v, 50)
    side = BUY if buy else SELL
    depth = sum(v[4:]) if buy else sum(v[:4])
    if q > depth:
        with pytest.raises(InsufficientDepth):
            apply_market_order(s, MarketOrder(q, side))
        return
    out, rev, used = apply_market_order(s, MarketOrder(q, side))
    opp = (lambda x: x.ask_volumes.sum()) if buy else (lambda x: x.bid_volumes.sum())
    assert opp(s) - opp(out) == q
    if q:
        ticks = [t for t, _ in used]
        lo, hi = q * ticks[0], q * ticks[-1]
        assert (rev <= 0) if buy else (rev >= 0)
        assert min(lo, hi) <= abs(rev) <= max(lo, hi)
