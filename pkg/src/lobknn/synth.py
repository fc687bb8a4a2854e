"""Synthetic event streams with known conditional dynamics.

The generator works in epochs of exactly ``interval`` events so every dataset
boundary sees a freshly laid out book. Within an epoch:

1. background trades at the best levels (never emptying them),
2. at most a one-tick price move, drawn with up-probability
   ``move_prob * (1 + mu) / 2`` where
   ``mu = regime_drift * g + impact_coef * (d_ask**impact_exponent - d_bid**impact_exponent)``
   and ``d_*`` is the relative level-1 deficit seen at the epoch start,
3. re-synthesis of the visible levels: level 1 at ``level1``, level 2 at
   ``level2`` plus ``regime_bump`` on the side favoured by the next regime,
   deeper levels around ``deep`` with integer noise,
4. padding churn, then end-of-epoch shock market orders, drawn
   independently for each side, that leave level-1 deficits for the next
   epoch's drift.

The regime ``g`` is a two-state Markov chain: it keeps its value with
probability ``regime_persistence`` and is otherwise redrawn with the
contract's probability of +1. The level-2 bump shows the regime of the next
epoch, so the book reveals the drift one step ahead.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

import numba
import numpy as np

from .dataset import (
    ADD, CANCEL, TRADE, EventStream, TransitionSet, build_transitions, concat_transition_sets,
)

BID, ASK, BUY, SELL = 0, 1, 2, 3


@dataclass
class SynthParams:
    levels: int = 5
    interval: int = 50
    n_contracts: int = 5
    level1: int = 1000
    level2: int = 800
    deep: int = 600
    deep_noise: int = 2
    regime_bump: int = 200
    regime_drift: float = 0.3
    regime_persistence: float = 0.7
    impact_coef: float = 1.5
    impact_exponent: float = 0.5
    move_prob: float = 1.0
    trade_rate: float = 4.0
    trade_size_max: int = 500
    shock_prob: float = 0.35
    shock_max: int = 300
    priority_min: int = 20
    priority_max: int = 100
    up_prob: tuple = (0.5, 0.5, 0.5, 0.5, 0.85)
    start_tick: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.up_prob, (int, float)):
            self.up_prob = (float(self.up_prob),) * self.n_contracts
        self.up_prob = tuple(float(p) for p in self.up_prob)
        checks = [
            (self.levels >= 2, "levels must be at least 2"),
            (len(self.up_prob) == self.n_contracts, "up_prob needs one entry per contract"),
            (all(0 <= p <= 1 for p in self.up_prob), "up_prob entries must lie in [0, 1]"),
            (0 <= self.move_prob <= 1, "move_prob must lie in [0, 1]"),
            (0 <= self.shock_prob <= 1, "shock_prob must lie in [0, 1]"),
            (0 <= self.regime_persistence <= 1, "regime_persistence must lie in [0, 1]"),
            (self.shock_max < self.level1, "shock_max must stay below level1"),
            (self.deep > self.deep_noise + 1, "deep volume must exceed its noise"),
            (self.interval >= 2 * self.levels + 5, "interval too short for one epoch"),
            (1 <= self.priority_min <= self.priority_max, "bad priority order range"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    @classmethod
    def from_config(cls, path, section="synth"):
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise FileNotFoundError(path)
        if section not in cp:
            return cls()
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in cp[section].items():
            if key not in types:
                raise ValueError(f"unknown synth parameter {key!r}")
            t = types[key]
            if key == "up_prob":
                kw[key] = tuple(float(x) for x in raw.replace(",", " ").split())
            elif t in ("int", int):
                kw[key] = int(raw)
            else:
                kw[key] = float(raw)
        return cls(**kw)


@numba.njit(cache=True)
def _generate(n_epochs, interval, levels, v1, v2, vd, noise, bump, reg_drift, persist, coef, expo,
              p_move, rate, tmax, p_shock, smax, pmin, pmax, p_up, start, seed):
    np.random.seed(seed)
    n = n_epochs * interval
    kind = np.zeros(n, np.int64)
    side = np.zeros(n, np.int64)
    price = np.zeros(n, np.int64)
    qty = np.zeros(n, np.int64)
    lvl = np.full(n, -1, np.int64)
    prio = np.full(n, -1, np.int64)
    width = 2 * (n_epochs + 4 * levels + 16) + 1
    lo = start - width // 2
    book = np.zeros(width, np.int64)
    pbook = np.zeros(width, np.int64)
    b = start
    e = 0
    g = 1 if np.random.random() < p_up else -1
    max_bt = interval - (2 * levels + 4)
    for ep in range(n_epochs):
        e0 = e
        if ep > 0:
            db = max(0, v1 - book[b - lo]) / v1
            da = max(0, v1 - book[b + 1 - lo]) / v1
            mu = reg_drift * g + coef * (da ** expo - db ** expo)
            mu = min(0.95, max(-0.95, mu))
            nbt = min(np.random.poisson(rate), max_bt)
            for _ in range(nbt):
                buy = np.random.random() < 0.5
                t = b + 1 if buy else b
                v = book[t - lo]
                q = int(np.exp(np.random.random() * np.log(tmax + 1.0)))
                q = min(max(q, 1), v - 1)
                if q < 1:
                    continue
                kind[e] = TRADE
                side[e] = BUY if buy else SELL
                price[e] = t
                qty[e] = q
                lvl[e] = v
                prio[e] = min(pbook[t - lo], v)
                e += 1
                pbook[t - lo] -= min(pbook[t - lo], q)
                book[t - lo] -= q
            u = np.random.random()
            move = 0
            if u < p_move * (1 + mu) / 2:
                move = 1
            elif u < p_move:
                move = -1
            if move != 0:
                t = b + 1 if move > 0 else b
                v = book[t - lo]
                kind[e] = TRADE
                side[e] = BUY if move > 0 else SELL
                price[e] = t
                qty[e] = v
                lvl[e] = v
                prio[e] = min(pbook[t - lo], v)
                e += 1
                book[t - lo] = 0
                pbook[t - lo] = 0
                qa = np.random.randint(pmin, pmax + 1)
                kind[e] = ADD
                side[e] = BID if move > 0 else ASK
                price[e] = t
                qty[e] = qa
                e += 1
                book[t - lo] = qa
                pbook[t - lo] = qa
                b = t if move > 0 else t - 1
        if np.random.random() >= persist:
            g = 1 if np.random.random() < p_up else -1
        for pos in range(2 * levels):
            t = b - levels + 1 + pos
            on_bid = pos < levels
            depth = levels - pos if on_bid else pos - levels + 1
            if depth == 1:
                target = v1
            elif depth == 2:
                target = v2
                if (g > 0 and on_bid) or (g < 0 and not on_bid):
                    target += bump
            else:
                target = vd + np.random.randint(-noise, noise + 1)
            diff = target - book[t - lo]
            if diff == 0:
                continue
            kind[e] = ADD if diff > 0 else CANCEL
            side[e] = BID if on_bid else ASK
            price[e] = t
            qty[e] = abs(diff)
            e += 1
            book[t - lo] = target
            pbook[t - lo] = min(pbook[t - lo], target)
        shock_bid = ep > 0 and np.random.random() < p_shock
        shock_ask = ep > 0 and np.random.random() < p_shock
        pad = interval - (e - e0) - int(shock_bid) - int(shock_ask)
        for _ in range(pad // 2):
            pos = np.random.randint(0, 2 * levels)
            t = b - levels + 1 + pos
            s = BID if pos < levels else ASK
            kind[e] = ADD
            side[e] = s
            price[e] = t
            qty[e] = 1
            kind[e + 1] = CANCEL
            side[e + 1] = s
            price[e + 1] = t
            qty[e + 1] = 1
            e += 2
        if pad % 2:
            t = b - levels + 1
            kind[e] = ADD
            side[e] = BID
            price[e] = t
            qty[e] = 1
            e += 1
            book[t - lo] += 1
        for k in range(2):
            if (k == 0 and not shock_bid) or (k == 1 and not shock_ask):
                continue
            t = b if k == 0 else b + 1
            v = book[t - lo]
            q = int(np.exp(np.random.random() * np.log(smax + 1.0)))
            q = min(max(q, 1), smax, v - 1)
            kind[e] = TRADE
            side[e] = SELL if k == 0 else BUY
            price[e] = t
            qty[e] = q
            lvl[e] = v
            prio[e] = min(pbook[t - lo], v)
            e += 1
            pbook[t - lo] -= min(pbook[t - lo], q)
            book[t - lo] -= q
    return kind, side, price, qty, lvl, prio


def contract_seed(seed: int, contract: int) -> int:
    return int(np.random.SeedSequence([seed, contract]).generate_state(1)[0])


def generate_events(params: SynthParams, n_events: int, contract: int = 0) -> EventStream:
    """Event stream of one contract; the last epoch is cut at ``n_events``."""
    if n_events < 0:
        raise ValueError("n_events must be non-negative")
    p = params
    n_epochs = -(-n_events // p.interval)
    out = _generate(
        n_epochs, p.interval, p.levels, p.level1, p.level2, p.deep, p.deep_noise, p.regime_bump,
        p.regime_drift, p.regime_persistence, p.impact_coef, p.impact_exponent, p.move_prob, p.trade_rate,
        p.trade_size_max, p.shock_prob, p.shock_max, p.priority_min, p.priority_max,
        p.up_prob[contract % p.n_contracts], p.start_tick, contract_seed(p.seed, contract),
    )
    kind, side, price, qty, lvl, prio = (a[:n_events] for a in out)
    seq = np.arange(1, n_events + 1, dtype=np.int64)
    return EventStream(contract, seq, kind, side, price, qty, lvl, prio, name=f"synth_{contract:03d}")


def generate_contracts(params: SynthParams, events_per_contract: int) -> list[EventStream]:
    return [generate_events(params, events_per_contract, c) for c in range(params.n_contracts)]


def synth_dataset(params: SynthParams, samples_per_contract: int) -> TransitionSet:
    """Generate and build contract by contract to keep peak memory at one stream."""
    parts = []
    for c in range(params.n_contracts):
        # one extra epoch: the very first boundary sees an empty book
        st = generate_events(params, (samples_per_contract + 2) * params.interval, c)
        ts = build_transitions(st, params.interval, params.levels)
        parts.append(ts.take(slice(0, samples_per_contract)))
    return concat_transition_sets(parts)
