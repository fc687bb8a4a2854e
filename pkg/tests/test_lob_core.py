import math

import numpy as np
import pytest
from hypothesis import given, strategies as hst

from lobknn.lob_core import (
    DividingPrice, EmptySide, LobSnapshot, NonPositivePrice, TickPrice, imbalances_many, log_return,
    mid_price, mid_prices_many, normalize_volume, order_book_imbalance, reanchor, signed_volumes_after,
    weighted_mid_price, weighted_mid_prices_many,
)

vols = hst.lists(hst.integers(0, 50), min_size=10, max_size=10)


def snap(bids, asks, b=100):
    return LobSnapshot(bids, asks, DividingPrice(b))


def test_tick_price_value():
    assert float(TickPrice(200).value) == 1.0


def test_mid_one_level():
    assert mid_price(snap([10], [10])) == 100.5


def test_mid_best_levels_occupied():
    assert mid_price(snap([0, 0, 0, 0, 5], [7, 0, 0, 0, 0])) == 100.5


def test_mid_skips_empty_best_bid():
    assert mid_price(snap([0, 0, 0, 5, 0], [7, 0, 0, 0, 0])) == 100.0


def test_mid_empty_side_raises():
    with pytest.raises(EmptySide):
        mid_price(snap([0, 0], [1, 0]))
    with pytest.raises(EmptySide):
        weighted_mid_price(snap([1, 0], [0, 0]))


def test_weighted_mid_values():
    assert weighted_mid_price(snap([10], [30])) == pytest.approx(100.75)
    assert weighted_mid_price(snap([0, 8], [8, 0])) == mid_price(snap([0, 8], [8, 0]))


def test_weighted_mid_tends_to_ask():
    prev = -math.inf
    for va in [1, 10, 100, 10_000, 10**8]:
        w = weighted_mid_price(snap([10], [va]))
        assert w > prev
        prev = w
    assert prev == pytest.approx(101, abs=1e-5)


def test_obi_values():
    assert order_book_imbalance(snap([5], [5])) == 0
    assert order_book_imbalance(snap([30], [10])) == 0.5
    assert order_book_imbalance(snap([0], [0])) == 0


def test_log_return():
    assert log_return(3.0, 3.0) == 0
    assert log_return(math.e * 2, 2) == pytest.approx(1.0)
    assert log_return(101, 100) == pytest.approx(0.00995033, abs=1e-8)
    with pytest.raises(NonPositivePrice):
        log_return(0, 1)


def test_normalize_volume():
    assert normalize_volume(0) == 0
    assert normalize_volume(10000) == 1.0
    assert normalize_volume(-2500) == -0.5
    np.testing.assert_allclose(normalize_volume(np.array([-2500, 0, 10000])), [-0.5, 0, 1])


def test_signed_volumes_no_move():
    s = snap([1, 2, 3], [4, 5, 6])
    sv = signed_volumes_after(s.dividing, s)
    np.testing.assert_array_equal(sv.values, [-1, -2, -3, 4, 5, 6])
    assert not sv.truncated


def test_signed_volumes_up_move():
    after = snap([2, 3, 9], [5, 6, 7], b=101)
    sv = signed_volumes_after(DividingPrice(100), after)
    # old best-ask tick 101 is now the best bid
    assert sv.values[3] == -9
    np.testing.assert_array_equal(sv.values, [-0, -2, -3, -9, 5, 6])
    assert sv.truncated


def test_signed_volumes_zero():
    s = snap([0, 0], [0, 0])
    assert not signed_volumes_after(s.dividing, s).values.any()


def test_snapshot_rejects_negative():
    with pytest.raises(ValueError):
        snap([-1], [1])


@given(vols)
def test_obi_bounds_and_zero(v):
    s = LobSnapshot.from_vector(v, 100)
    rho = order_book_imbalance(s)
    assert -1 <= rho <= 1
    assert (rho == 0) == (v[4] == v[5])


@given(vols)
def test_mid_between_best_ticks(v):
    s = LobSnapshot.from_vector(v, 100)
    try:
        bid, ask = s.best_occupied()
    except EmptySide:
        return
    m = mid_price(s)
    w = weighted_mid_price(s)
    assert bid < m < ask
    assert bid <= w <= ask


@given(vols, hst.integers(-5, 5))
def test_many_forms_match_scalar(v, shift):
    s = LobSnapshot.from_vector(v, 100 + shift)
    arr = np.array([v])
    try:
        m, w = mid_price(s), weighted_mid_price(s)
    except EmptySide:
        assert np.isnan(mid_prices_many(arr, [100 + shift])[0])
        return
    assert mid_prices_many(arr, [100 + shift])[0] == m
    assert weighted_mid_prices_many(arr, [100 + shift])[0] == pytest.approx(w, rel=1e-15)
    assert imbalances_many(arr)[0] == order_book_imbalance(s)


@given(hst.integers(-10**6, 10**6))
def test_normalize_is_odd(v):
    assert normalize_volume(-v) == -normalize_volume(v)


@given(vols, hst.integers(-4, 4))
def test_signed_roundtrip(v, move):
    after = LobSnapshot.from_vector(v, 100 + move)
    sv = signed_volumes_after(DividingPrice(100), after)
    back = reanchor(sv, after.dividing)
    # positions of the after window that the anchor window covered
    l = 5
    for pos in range(2 * l):
        anchor_pos = pos + move
        if 0 <= anchor_pos < 2 * l:
            assert back[pos] == v[pos]
        else:
            assert back[pos] == 0
