"""Applying a trading agent's orders to a centered snapshot.

The three update maps (cancel, market order, limit order) are pure functions on
:class:`~lobknn.lob_core.LobSnapshot`; the agent's own resting orders live in a
mutable :class:`AgentBook` owned by a single simulation path.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .lob_core import LobSnapshot

BID, ASK = "bid", "ask"
BUY, SELL = "buy", "sell"


class InteractionError(ValueError):
    code = 40


class UnknownOrder(InteractionError):
    code = 41


class Overcancel(InteractionError):
    code = 42


class InvalidOrder(InteractionError):
    code = 43


class CrossingOrder(InteractionError):
    code = 44


class OutOfWindow(InteractionError):
    code = 45


class InsufficientDepth(InteractionError):
    code = 46


@dataclass(frozen=True)
class LimitOrder:
    price_tick: int
    qty: int
    side: str
    time_step: int = 0

    def __post_init__(self):
        if self.side not in (BID, ASK):
            raise InvalidOrder(f"limit order side must be bid or ask, got {self.side!r}")


@dataclass(frozen=True)
class MarketOrder:
    qty: int
    side: str
    time_step: int = 0

    def __post_init__(self):
        if self.side not in (BUY, SELL):
            raise InvalidOrder(f"market order side must be buy or sell, got {self.side!r}")
        if self.qty < 0:
            raise InvalidOrder("market order quantity must be non-negative")


@dataclass(frozen=True)
class Cancellation:
    order_ref: int
    qty: int
    time_step: int = 0


@dataclass(frozen=True)
class AgentAction:
    """Cancellations, then the market order, then the new limit orders."""

    cancellations: tuple[Cancellation, ...] = ()
    market: MarketOrder | None = None
    limits: tuple[LimitOrder, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.cancellations and not self.limits and (
            self.market is None or self.market.qty == 0
        )


NO_ACTION = AgentAction()


@dataclass
class AgentOrder:
    order_id: int
    tick: int
    side: str
    remaining: int
    placed_qty: int
    level_volume_at_placement: int
    # first order at a newly improved level: Allocation priority
    priority: bool = False
    placed_step: int = 0


@dataclass
class AgentBook:
    orders: dict[int, AgentOrder] = field(default_factory=dict)
    next_id: int = 0

    def add(self, tick, side, qty, level_volume, priority=False, step=0) -> int:
        oid = self.next_id
        self.next_id += 1
        self.orders[oid] = AgentOrder(oid, tick, side, qty, qty, level_volume, priority, step)
        return oid

    def reduce(self, order_id: int, qty: int) -> None:
        order = self.orders[order_id]
        order.remaining -= qty
        if order.remaining <= 0:
            del self.orders[order_id]

    def volume_at(self, tick: int, side: str | None = None) -> int:
        return sum(
            o.remaining for o in self.orders.values()
            if o.tick == tick and (side is None or o.side == side)
        )

    def resting(self, side: str | None = None) -> list[AgentOrder]:
        return [o for o in self.orders.values() if side is None or o.side == side]

    def total(self, side: str | None = None) -> int:
        return sum(o.remaining for o in self.resting(side))

    def copy(self) -> "AgentBook":
        return AgentBook({k: replace(v) for k, v in self.orders.items()}, self.next_id)

    def restore(self, other: "AgentBook") -> None:
        self.orders = other.orders
        self.next_id = other.next_id

    def __len__(self) -> int:
        return len(self.orders)


def apply_cancellation(snap: LobSnapshot, c: Cancellation, book: AgentBook) -> LobSnapshot:
    if c.qty <= 0:
        raise InvalidOrder("cancellation quantity must be positive")
    order = book.orders.get(c.order_ref)
    if order is None:
        raise UnknownOrder(f"no active agent order {c.order_ref}")
    if c.qty > order.remaining:
        raise Overcancel(f"cancel {c.qty} exceeds remaining {order.remaining}")
    pos = snap.position_of(order.tick)
    if pos is None:
        raise OutOfWindow(f"order tick {order.tick} outside the snapshot window")
    vec = snap.vector
    if vec[pos] < c.qty:
        raise Overcancel(f"level at tick {order.tick} holds only {vec[pos]}")
    vec[pos] -= c.qty
    book.reduce(c.order_ref, c.qty)
    return snap.with_vector(vec)


def apply_market_order(snap: LobSnapshot, y: MarketOrder):
    """Deplete the opposing side best-first.

    Returns ``(snapshot, revenue, consumed)`` where revenue is in tick*qty
    units (negative for buys) and ``consumed`` lists ``(tick, qty)`` per level.
    """
    if y.qty == 0:
        return snap, 0, []
    vec = snap.vector
    l = snap.levels
    if y.side == BUY:
        positions = range(l, 2 * l)
    else:
        positions = range(l - 1, -1, -1)
    left = y.qty
    consumed = []
    cash = 0
    for pos in positions:
        if left == 0:
            break
        take = min(left, int(vec[pos]))
        if take:
            tick = snap.tick_at(pos)
            vec[pos] -= take
            consumed.append((tick, take))
            cash += tick * take
            left -= take
    if left:
        raise InsufficientDepth(f"{y.side} {y.qty} exceeds visible depth by {left}")
    revenue = -cash if y.side == BUY else cash
    return snap.with_vector(vec), revenue, consumed


def visible_depth(snap: LobSnapshot, side: str) -> int:
    """Volume a market order of ``side`` could consume within the window."""
    return int(snap.ask_volumes.sum() if side == BUY else snap.bid_volumes.sum())


def apply_limit_order(snap: LobSnapshot, x: LimitOrder, book: AgentBook) -> LobSnapshot:
    if x.qty <= 0:
        raise InvalidOrder("limit order quantity must be positive")
    if x.side == BID and x.price_tick > snap.best_bid_tick:
        raise CrossingOrder(f"bid at {x.price_tick} above dividing price")
    if x.side == ASK and x.price_tick <= snap.best_bid_tick:
        raise CrossingOrder(f"ask at {x.price_tick} below dividing price")
    pos = snap.position_of(x.price_tick)
    if pos is None:
        raise OutOfWindow(f"tick {x.price_tick} outside the snapshot window")
    vec = snap.vector
    level_volume = int(vec[pos])
    priority = False
    if level_volume == 0:
        side_vols = snap.bid_volumes if x.side == BID else snap.ask_volumes
        occupied = np.flatnonzero(side_vols)
        if x.side == BID:
            best = None if len(occupied) == 0 else snap.tick_at(int(occupied[-1]))
            priority = best is None or x.price_tick > best
        else:
            best = None if len(occupied) == 0 else snap.tick_at(snap.levels + int(occupied[0]))
            priority = best is None or x.price_tick < best
    vec[pos] += x.qty
    book.add(x.price_tick, x.side, x.qty, level_volume, priority, x.time_step)
    return snap.with_vector(vec)


def apply_action(snap: LobSnapshot, a: AgentAction, book: AgentBook):
    """Cancel, then execute the market order, then place limits.

    Returns ``(snapshot, revenue)``. On any error the agent book is restored and
    the error re-raised; the input snapshot is never modified.
    """
    saved = book.copy()
    try:
        out = snap
        for c in a.cancellations:
            out = apply_cancellation(out, c, book)
        revenue = 0
        if a.market is not None and a.market.qty > 0:
            out, revenue, _ = apply_market_order(out, a.market)
        for x in a.limits:
            out = apply_limit_order(out, x, book)
    except InteractionError:
        book.restore(saved)
        raise
    return out, revenue
