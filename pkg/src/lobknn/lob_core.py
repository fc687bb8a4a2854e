"""Centered limit order book snapshots and the price/imbalance arithmetic on them.

Prices are integer tick counts throughout. A snapshot with ``l`` levels stores
the ``l`` bid ticks ending at the best bid boundary and the ``l`` ask ticks
starting one tick above it, in ascending price order::

    [V(b-l+1), ..., V(b), V(b+1), ..., V(b+l)]

where ``b`` is the bid-side boundary tick of the dividing price. Scalar
functions operate on :class:`LobSnapshot`; the ``*_many`` variants take a
``(n, 2l)`` volume matrix plus a ``(n,)`` boundary vector and return NaN where
the scalar version would raise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np


class EmptySide(ValueError):
    """No occupied level on one side of the book within the stored window."""


class NonPositivePrice(ValueError):
    pass


@dataclass(frozen=True)
class TickPrice:
    ticks: int
    tick_size: Fraction = Fraction(1, 200)

    @property
    def value(self) -> Fraction:
        return self.ticks * self.tick_size


@dataclass(frozen=True)
class DividingPrice:
    """Dividing price represented by the tick just below it (the bid boundary)."""

    best_bid_tick: int

    @property
    def best_ask_tick(self) -> int:
        return self.best_bid_tick + 1

    def shifted(self, ticks: int) -> "DividingPrice":
        return DividingPrice(self.best_bid_tick + ticks)


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if (arr < 0).any():
        raise ValueError(f"{name} must be non-negative")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LobSnapshot:
    bid_volumes: np.ndarray
    ask_volumes: np.ndarray
    dividing: DividingPrice
    levels: int = field(init=False)

    def __post_init__(self):
        bids = _frozen(self.bid_volumes, "bid_volumes")
        asks = _frozen(self.ask_volumes, "ask_volumes")
        if len(bids) != len(asks) or len(bids) < 1:
            raise ValueError("bid and ask sides need the same positive number of levels")
        object.__setattr__(self, "bid_volumes", bids)
        object.__setattr__(self, "ask_volumes", asks)
        object.__setattr__(self, "levels", len(bids))

    @classmethod
    def from_vector(cls, volumes, best_bid_tick: int) -> "LobSnapshot":
        vec = np.asarray(volumes)
        if vec.ndim != 1 or len(vec) % 2:
            raise ValueError("volume vector must have even length 2l")
        half = len(vec) // 2
        return cls(vec[:half], vec[half:], DividingPrice(int(best_bid_tick)))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.bid_volumes, self.ask_volumes])

    @property
    def best_bid_tick(self) -> int:
        return self.dividing.best_bid_tick

    @property
    def best_ask_tick(self) -> int:
        return self.dividing.best_ask_tick

    def tick_at(self, position: int) -> int:
        """Absolute tick of vector position ``position`` (0 .. 2l-1)."""
        return self.best_bid_tick - (self.levels - 1) + position

    def position_of(self, tick: int) -> int | None:
        pos = tick - self.best_bid_tick + self.levels - 1
        return pos if 0 <= pos < 2 * self.levels else None

    def volume_at(self, tick: int) -> int:
        pos = self.position_of(tick)
        return 0 if pos is None else int(self.vector[pos])

    def side_of(self, tick: int) -> str:
        return "bid" if tick <= self.best_bid_tick else "ask"

    def with_vector(self, volumes) -> "LobSnapshot":
        return LobSnapshot.from_vector(volumes, self.best_bid_tick)

    def best_occupied(self) -> tuple[int, int]:
        """Ticks of the best non-empty bid and ask levels."""
        nz_b = np.flatnonzero(self.bid_volumes)
        nz_a = np.flatnonzero(self.ask_volumes)
        if len(nz_b) == 0:
            raise EmptySide("no bid volume within the snapshot window")
        if len(nz_a) == 0:
            raise EmptySide("no ask volume within the snapshot window")
        k_b = self.levels - 1 - nz_b[-1]
        k_a = nz_a[0]
        return self.best_bid_tick - int(k_b), self.best_ask_tick + int(k_a)

    def total_volume(self) -> int:
        return int(self.bid_volumes.sum() + self.ask_volumes.sum())


def mid_price(snapshot: LobSnapshot) -> float:
    """Midpoint of the best occupied bid and ask ticks, in ticks."""
    bid, ask = snapshot.best_occupied()
    return (bid + ask) / 2


def weighted_mid_price(snapshot: LobSnapshot) -> float:
    """Each best occupied tick weighted by its own volume, in ticks.

    A heavy ask level pulls the price towards the ask tick.
    """
    bid, ask = snapshot.best_occupied()
    v_b = snapshot.volume_at(bid)
    v_a = snapshot.volume_at(ask)
    return (bid * v_b + ask * v_a) / (v_b + v_a)


def order_book_imbalance(snapshot: LobSnapshot) -> float:
    v_b = int(snapshot.bid_volumes[-1])
    v_a = int(snapshot.ask_volumes[0])
    if v_b + v_a == 0:
        return 0.0
    return (v_b - v_a) / (v_b + v_a)


def log_return(p_now: float, p_then: float) -> float:
    if p_now <= 0 or p_then <= 0:
        raise NonPositivePrice(f"log-return needs positive prices, got {p_now}, {p_then}")
    return math.log(p_now) - math.log(p_then)


def normalize_volume(v):
    """sign(v) * sqrt(|v|) / 100; works elementwise on arrays."""
    if np.ndim(v) == 0:
        return math.copysign(math.sqrt(abs(v)), v) / 100 if v else 0.0
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.sqrt(np.abs(v)) / 100


@dataclass(frozen=True)
class SignedVolumeVector:
    """Post-transition volumes laid out on the pre-transition tick window.

    Bid-side occupancy is negative, ask-side positive. ``truncated`` is set when
    part of the window fell outside the post-transition snapshot.
    """

    anchor: DividingPrice
    values: np.ndarray
    truncated: bool = False

    @property
    def levels(self) -> int:
        return len(self.values) // 2


def signed_volumes_after(anchor: DividingPrice, after: LobSnapshot) -> SignedVolumeVector:
    vals, trunc = signed_volumes_many(
        np.array([anchor.best_bid_tick]),
        after.vector[None, :],
        np.array([after.best_bid_tick]),
    )
    out = vals[0]
    out.setflags(write=False)
    return SignedVolumeVector(anchor, out, bool(trunc[0]))


def reanchor(signed: SignedVolumeVector, target: DividingPrice) -> np.ndarray:
    """Unsigned volumes of ``signed`` on the window around ``target``.

    Ticks not covered by ``signed`` come back as 0.
    """
    l = signed.levels
    shift = target.best_bid_tick - signed.anchor.best_bid_tick
    out = np.zeros(2 * l, dtype=np.int64)
    src = np.arange(2 * l) + shift
    ok = (src >= 0) & (src < 2 * l)
    out[ok] = np.abs(signed.values[src[ok]])
    return out


# -- vectorised forms -------------------------------------------------------


def best_offsets_many(volumes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-based distance of the best occupied level from each boundary; -1 if empty."""
    volumes = np.asarray(volumes)
    l = volumes.shape[-1] // 2
    bids = volumes[..., :l][..., ::-1] > 0
    asks = volumes[..., l:] > 0
    k_b = np.where(bids.any(-1), bids.argmax(-1), -1)
    k_a = np.where(asks.any(-1), asks.argmax(-1), -1)
    return k_b, k_a


def mid_prices_many(volumes: np.ndarray, bid_ticks: np.ndarray) -> np.ndarray:
    k_b, k_a = best_offsets_many(volumes)
    bid_ticks = np.asarray(bid_ticks, dtype=np.float64)
    mid = ((bid_ticks - k_b) + (bid_ticks + 1 + k_a)) / 2
    return np.where((k_b < 0) | (k_a < 0), np.nan, mid)


def weighted_mid_prices_many(volumes: np.ndarray, bid_ticks: np.ndarray) -> np.ndarray:
    volumes = np.asarray(volumes)
    l = volumes.shape[-1] // 2
    k_b, k_a = best_offsets_many(volumes)
    empty = (k_b < 0) | (k_a < 0)
    kb = np.where(empty, 0, k_b)
    ka = np.where(empty, 0, k_a)
    v_b = np.take_along_axis(volumes, (l - 1 - kb)[..., None], -1)[..., 0].astype(np.float64)
    v_a = np.take_along_axis(volumes, (l + ka)[..., None], -1)[..., 0].astype(np.float64)
    bid_ticks = np.asarray(bid_ticks, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = ((bid_ticks - kb) * v_b + (bid_ticks + 1 + ka) * v_a) / (v_b + v_a)
    return np.where(empty, np.nan, out)


def imbalances_many(volumes: np.ndarray) -> np.ndarray:
    volumes = np.asarray(volumes, dtype=np.float64)
    l = volumes.shape[-1] // 2
    v_b = volumes[..., l - 1]
    v_a = volumes[..., l]
    tot = v_b + v_a
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, (v_b - v_a) / tot, 0.0)


def signed_volumes_many(
    anchor_bids: np.ndarray, after_volumes: np.ndarray, after_bids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`signed_volumes_after`; returns ``(values, truncated)``."""
    after_volumes = np.asarray(after_volumes)
    n, width = after_volumes.shape
    l = width // 2
    anchor_bids = np.asarray(anchor_bids, dtype=np.int64)
    after_bids = np.asarray(after_bids, dtype=np.int64)
    # tick of anchor-window position i is anchor - (l-1) + i; in the after
    # window the same tick sits at position i + (anchor - after_bid)
    shift = (anchor_bids - after_bids)[:, None]
    pos = np.arange(width)[None, :] + shift
    inside = (pos >= 0) & (pos < width)
    vals = np.take_along_axis(after_volumes, np.clip(pos, 0, width - 1), 1)
    vals = np.where(inside, vals, 0).astype(np.int64)
    ticks = anchor_bids[:, None] - (l - 1) + np.arange(width)[None, :]
    on_bid = ticks <= after_bids[:, None]
    vals = np.where(on_bid, -vals, vals)
    return vals, ~inside.all(axis=1)
