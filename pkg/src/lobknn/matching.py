"""Fill attribution for the agent's resting limit orders.

Historical trades between two snapshots are replayed against the agent book
under pure pro-rata or CME-Allocation matching. Only the per-trade quantities
recorded at dataset build time are needed: the market quantity, the level
volume at execution and the size of an aggressing (priority) order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .interaction import ASK, BID, BUY, SELL, AgentBook


class Mechanism(str, Enum):
    PRO_RATA = "prorata"
    ALLOCATION = "allocation"


class ZeroLevelVolume(ValueError):
    pass


class ZeroResidualVolume(ValueError):
    pass


@dataclass(frozen=True)
class TradeRecord:
    seq: int
    aggressor_side: str
    qty: int
    price_tick: int
    level_volume: int
    aggressor_priority_qty: int = 0


@dataclass
class FillReport:
    fills: list[tuple[int, int, int]] = field(default_factory=list)
    cash_delta: int = 0
    inventory_delta: int = 0

    @property
    def filled_qty(self) -> int:
        return sum(f[1] for f in self.fills)


def pro_rata_fill(q_m: int, q_l: int, v_p: int) -> int:
    """floor(q_m * q_l / v_p); a market quantity covering the level fills in full."""
    if v_p <= 0:
        raise ZeroLevelVolume("level volume must be positive")
    if q_l <= 0:
        return 0
    if q_m >= v_p:
        return q_l
    return (q_m * q_l) // v_p


def allocation_fill(q_m: int, q_a: int, q_l: int, v_p: int, aggressor: bool = False) -> int:
    """CME Allocation fill of one resting order of size ``q_l``.

    The aggressing order (size ``q_a``) is served first; the rest of the market
    quantity is split pro-rata over the non-aggressing volume ``v_p - q_a``.
    With ``aggressor=True`` the order itself is the aggressing one.
    """
    if q_l <= 0:
        return 0
    if aggressor:
        return min(q_l, q_m)
    if q_m >= v_p:
        return q_l
    residual_volume = v_p - q_a
    if residual_volume <= 0:
        raise ZeroResidualVolume("no non-aggressing volume left at the level")
    if q_a >= q_m:
        return 0
    return ((q_m - q_a) * q_l) // residual_volume


def replay_trade(
    side: str,
    qty: int,
    tick: int,
    level_volume: int,
    priority_qty: int,
    book: AgentBook,
    mechanism: Mechanism,
    report: FillReport,
) -> None:
    resting_side = ASK if side == BUY else BID
    orders = sorted(
        (o for o in book.orders.values() if o.tick == tick and o.side == resting_side),
        key=lambda o: o.order_id,
    )
    if not orders:
        return
    agent_total = sum(o.remaining for o in orders)
    # the historical level volume never contained the synthetic agent
    v_p = level_volume + agent_total
    fills = []
    if Mechanism(mechanism) is Mechanism.PRO_RATA:
        for o in orders:
            fills.append((o, pro_rata_fill(qty, o.remaining, v_p)))
    else:
        prio = [o for o in orders if o.priority]
        if prio:
            q_a = sum(o.remaining for o in prio)
            left = qty
            for o in prio:
                f = allocation_fill(left, 0, o.remaining, v_p, aggressor=True)
                fills.append((o, f))
                left -= f
        else:
            q_a = min(priority_qty, qty)
        for o in orders:
            if not o.priority:
                fills.append((o, allocation_fill(qty, min(q_a, qty), o.remaining, v_p)))
    sign = 1 if resting_side == ASK else -1
    for o, f in fills:
        f = min(f, o.remaining)
        if f <= 0:
            continue
        report.fills.append((o.order_id, f, o.tick))
        report.cash_delta += sign * f * o.tick
        report.inventory_delta -= sign * f
        book.reduce(o.order_id, f)


def replay_fills(
    trades: Iterable[TradeRecord],
    book: AgentBook,
    mechanism: Mechanism | str = Mechanism.ALLOCATION,
    tick_offset: int = 0,
) -> FillReport:
    """Replay ``trades`` (in seq order) against ``book``, mutating it.

    ``tick_offset`` translates historical trade ticks into the agent's price
    frame (simulated boundary minus historical boundary).
    """
    mechanism = Mechanism(mechanism)
    report = FillReport()
    if not book.orders:
        return report
    for t in sorted(trades, key=lambda t: t.seq):
        replay_trade(
            t.aggressor_side, t.qty, t.price_tick + tick_offset, t.level_volume,
            t.aggressor_priority_qty, book, mechanism, report,
        )
        if not book.orders:
            break
    return report


def replay_arrays(
    sides: Sequence[int],
    qtys: Sequence[int],
    ticks: Sequence[int],
    level_volumes: Sequence[int],
    priority_qtys: Sequence[int],
    book: AgentBook,
    mechanism: Mechanism,
    tick_offset: int = 0,
) -> FillReport:
    """Same as :func:`replay_fills` over columnar trade arrays already in seq order.

    ``sides`` holds +1 for buyer-initiated and -1 for seller-initiated trades.
    """
    report = FillReport()
    if not book.orders:
        return report
    agent_ticks = {o.tick for o in book.orders.values()}
    for s, q, t, v, a in zip(sides, qtys, ticks, level_volumes, priority_qtys):
        tick = int(t) + tick_offset
        if tick not in agent_ticks:
            continue
        replay_trade(BUY if s > 0 else SELL, int(q), tick, int(v), int(a), book, mechanism, report)
        if not book.orders:
            break
        agent_ticks = {o.tick for o in book.orders.values()}
    return report
