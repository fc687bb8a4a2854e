"""Trading strategies for the resampling engine.

A strategy sees the current snapshot (its own resting orders included) and its
:class:`AgentState`, and answers with an :class:`AgentAction`. The engine deep
copies the prototype once per path, so strategies may keep path-local state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .interaction import (
    ASK, BID, BUY, NO_ACTION, SELL, AgentAction, AgentBook, Cancellation, LimitOrder, MarketOrder,
)
from .lob_core import LobSnapshot


@dataclass
class AgentState:
    inventory: int = 0
    cash: int = 0
    book: AgentBook = field(default_factory=AgentBook)
    step: int = 0
    initial_inventory: int = 0
    last_fill_qty: int = 0


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def child_size(parent: int, horizon: int, step: int) -> int:
    """Slice ``step`` of ``parent`` split over ``horizon`` steps; the remainder
    goes one unit each to the earliest steps."""
    if step < 0 or step >= horizon:
        return 0
    return parent // horizon + (1 if step < parent % horizon else 0)


class Strategy:
    name = "strategy"
    initial_inventory = 0

    def next_action(self, snapshot: LobSnapshot, state: AgentState, step: int) -> AgentAction:
        return NO_ACTION

    def on_path_end(self, snapshot: LobSnapshot, state: AgentState) -> AgentAction | None:
        return None


class Noop(Strategy):
    name = "noop"


@dataclass
class TwapMarketLiquidation(Strategy):
    """Market-order TWAP: engine steps 0..horizon-1 (the first ``horizon`` transitions)."""

    parent: int
    horizon: int = 30
    side: str = SELL
    name = "twap"

    def __post_init__(self):
        if self.parent < 0 or self.horizon < 1:
            raise ValueError("parent must be >= 0 and horizon >= 1")
        if self.side not in (BUY, SELL):
            raise ValueError("side must be buy or sell")

    @property
    def initial_inventory(self):
        return self.parent if self.side == SELL else -self.parent

    def schedule(self) -> list[int]:
        return [child_size(self.parent, self.horizon, s) for s in range(self.horizon)]

    def next_action(self, snapshot, state, step):
        q = child_size(self.parent, self.horizon, step)
        if q == 0:
            return NO_ACTION
        return AgentAction(market=MarketOrder(q, self.side, step))


def _cancel_all(book: AgentBook, step: int, keep=lambda o: False):
    return tuple(
        Cancellation(o.order_id, o.remaining, step)
        for o in sorted(book.orders.values(), key=lambda o: o.order_id) if not keep(o)
    )


def _target_quote(book: AgentBook, tick: int, side: str, qty: int, step: int) -> AgentAction:
    """Cancel everything off (tick, side); resize the rest to exactly ``qty``."""
    cancels = list(_cancel_all(book, step, keep=lambda o: o.tick == tick and o.side == side))
    here = sorted((o for o in book.orders.values() if o.tick == tick and o.side == side),
                  key=lambda o: o.order_id)
    resting = sum(o.remaining for o in here)
    limits = ()
    if resting < qty:
        limits = (LimitOrder(tick, qty - resting, side, step),)
    elif resting > qty:
        excess = resting - qty
        # trim the newest orders first, older ones keep queue standing
        for o in reversed(here):
            if excess == 0:
                break
            c = min(excess, o.remaining)
            cancels.append(Cancellation(o.order_id, c, step))
            excess -= c
    return AgentAction(cancellations=tuple(cancels), limits=limits)


@dataclass
class ConstantBestBidQuote(Strategy):
    """Keep ``qty`` resting on the level-1 bid tick, re-placing after moves and fills."""

    qty: int
    name = "best_bid"

    def __post_init__(self):
        if self.qty <= 0:
            raise ValueError("quote size must be positive")

    def next_action(self, snapshot, state, step):
        tick = snapshot.best_bid_tick
        cancels = _cancel_all(state.book, step, keep=lambda o: o.tick == tick and o.side == BID)
        resting = state.book.volume_at(tick, BID)
        limits = (LimitOrder(tick, self.qty - resting, BID, step),) if resting < self.qty else ()
        return AgentAction(cancellations=cancels, limits=limits)


@dataclass
class InventoryMultipleLiquidation(Strategy):
    """Quote round(k*|I|) on the level-1 ask while long, on the level-1 bid while short."""

    k: float
    inventory: int = 40
    terminal_market: bool = True
    name = "inv_multiple"

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")

    @property
    def initial_inventory(self):
        return self.inventory

    def next_action(self, snapshot, state, step):
        inv = state.inventory
        if inv == 0:
            return AgentAction(cancellations=_cancel_all(state.book, step))
        qty = round_half_away(self.k * abs(inv))
        if inv > 0:
            return _target_quote(state.book, snapshot.best_ask_tick, ASK, qty, step)
        return _target_quote(state.book, snapshot.best_bid_tick, BID, qty, step)

    def on_path_end(self, snapshot, state):
        cancels = _cancel_all(state.book, state.step)
        market = None
        if self.terminal_market and state.inventory != 0:
            side = SELL if state.inventory > 0 else BUY
            market = MarketOrder(abs(state.inventory), side, state.step)
        return AgentAction(cancellations=cancels, market=market)


@dataclass
class ConstantLevelQuote(Strategy):
    """Child limit orders at a fixed centered-book level; never cancels."""

    offset: int
    parent: int
    horizon: int = 30
    side: str = ASK
    name = "level_quote"

    def __post_init__(self):
        if self.offset < 0 or self.parent < 0 or self.horizon < 1:
            raise ValueError("offset and parent must be >= 0, horizon >= 1")
        if self.side not in (BID, ASK):
            raise ValueError("side must be bid or ask")

    def next_action(self, snapshot, state, step):
        if self.offset >= snapshot.levels:
            raise ValueError(f"offset {self.offset} outside {snapshot.levels} levels")
        q = child_size(self.parent, self.horizon, step)
        if q == 0:
            return NO_ACTION
        if self.side == ASK:
            tick = snapshot.best_ask_tick + self.offset
        else:
            tick = snapshot.best_bid_tick - self.offset
        return AgentAction(limits=(LimitOrder(tick, q, self.side, step),))


STRATEGIES = {
    "noop": (Noop, {}),
    "twap": (TwapMarketLiquidation, {"P": ("parent", int), "horizon": ("horizon", int), "side": ("side", str)}),
    "best_bid": (ConstantBestBidQuote, {"Q": ("qty", int)}),
    "inv_multiple": (InventoryMultipleLiquidation, {
        "k": ("k", float), "I0": ("inventory", int), "terminal": ("terminal_market", lambda s: s.lower() in ("1", "true", "yes")),
    }),
    "level_quote": (ConstantLevelQuote, {
        "offset": ("offset", int), "P": ("parent", int), "horizon": ("horizon", int), "side": ("side", str),
    }),
}


def parse_strategy(spec: str) -> Strategy:
    """``name[:key=value,...]``, e.g. ``twap:P=300,horizon=30``."""
    name, _, rest = spec.strip().partition(":")
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}")
    cls, keys = STRATEGIES[name]
    kw = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq or key not in keys:
            raise ValueError(f"bad parameter {item!r} for strategy {name}")
        attr, conv = keys[key]
        kw[attr] = conv(val)
    return cls(**kw)
