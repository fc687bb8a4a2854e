"""Transition datasets: event streams in, snapshot pairs plus trade blocks out.

A contract's event stream is applied to a per-tick book. Every ``interval``
events a centered snapshot is taken; consecutive snapshots form one transition
sample and the trades in between are kept for fill replay. Samples live in a
struct-of-arrays :class:`TransitionSet` with the trades in CSR layout, which
is also what the binary file stores.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numba
import numpy as np
import pandas as pd

from .lob_core import DividingPrice, LobSnapshot, mid_prices_many
from .matching import TradeRecord

ADD, CANCEL, TRADE = 0, 1, 2
KIND_CODES = {"limit_add": ADD, "cancel": CANCEL, "trade": TRADE}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}
# bid/ask for book events, buy/sell for trade aggressors
SIDE_CODES = {"bid": 0, "ask": 1, "buy": 2, "sell": 3}
SIDE_NAMES = {v: k for k, v in SIDE_CODES.items()}

TRADE_DTYPE = np.dtype([
    ("seq", "<i8"), ("side", "<i8"), ("qty", "<i8"), ("price_tick", "<i8"),
    ("level_volume", "<i8"), ("priority_qty", "<i8"),
])


class MalformedStream(ValueError):
    pass


class InsufficientHistory(ValueError):
    pass


class RankDeficient(ValueError):
    pass


class DatasetFormatError(ValueError):
    pass


@dataclass
class EventStream:
    """Columnar events of one contract. Missing trade fields are -1."""

    contract_id: int
    seq: np.ndarray
    kind: np.ndarray
    side: np.ndarray
    price_tick: np.ndarray
    qty: np.ndarray
    level_volume: np.ndarray
    priority_qty: np.ndarray
    name: str = ""

    def __post_init__(self):
        for f in ("seq", "kind", "side", "price_tick", "qty", "level_volume", "priority_qty"):
            setattr(self, f, np.ascontiguousarray(getattr(self, f), dtype=np.int64))
        n = len(self.seq)
        if any(len(getattr(self, f)) != n for f in ("kind", "side", "price_tick", "qty")):
            raise MalformedStream("event columns differ in length")

    def __len__(self):
        return len(self.seq)

    @classmethod
    def from_records(cls, contract_id, records, name=""):
        """``records``: iterable of (seq, kind, side, price_tick, qty[, level_volume, priority_qty])."""
        rows = []
        for r in records:
            seq, kind, side, tick, qty = r[:5]
            lv = r[5] if len(r) > 5 and r[5] is not None else -1
            pq = r[6] if len(r) > 6 and r[6] is not None else -1
            rows.append((seq, KIND_CODES[kind], SIDE_CODES[side], tick, qty, lv, pq))
        arr = np.array(rows, dtype=np.int64).reshape(-1, 7)
        return cls(contract_id, *arr.T, name=name)


def read_event_csv(path, contract_id: int | None = None) -> EventStream:
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"kind": str, "side": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise MalformedStream(f"{path}: {exc}") from exc
    need = ["seq", "kind", "side", "price_tick", "qty", "level_volume_at_exec", "aggressor_priority_qty"]
    missing = [c for c in need if c not in df.columns]
    if missing:
        raise MalformedStream(f"{path}: missing columns {missing}")
    try:
        kind = df["kind"].map(KIND_CODES)
        side = df["side"].map(SIDE_CODES)
        if kind.isna().any() or side.isna().any():
            raise MalformedStream(f"{path}: unknown kind or side value")
        cols = [df[c].fillna(-1).astype(np.int64).to_numpy() for c in need[3:]]
    except (ValueError, TypeError) as exc:
        raise MalformedStream(f"{path}: {exc}") from exc
    if contract_id is None:
        digits = "".join(ch for ch in path.stem if ch.isdigit())
        contract_id = int(digits) if digits else 0
    return EventStream(
        contract_id, df["seq"].to_numpy(np.int64), kind.to_numpy(np.int64),
        side.to_numpy(np.int64), *cols, name=path.stem,
    )


def write_event_csv(stream: EventStream, path) -> None:
    is_trade = stream.kind == TRADE
    df = pd.DataFrame({
        "seq": stream.seq,
        "kind": [KIND_NAMES[k] for k in stream.kind],
        "side": [SIDE_NAMES[s] for s in stream.side],
        "price_tick": stream.price_tick,
        "qty": stream.qty,
        "level_volume_at_exec": pd.array(np.where(is_trade, stream.level_volume, 0), dtype="Int64"),
        "aggressor_priority_qty": pd.array(np.where(is_trade, stream.priority_qty, 0), dtype="Int64"),
    })
    df.loc[~is_trade, ["level_volume_at_exec", "aggressor_priority_qty"]] = pd.NA
    df.to_csv(path, index=False)


@numba.njit(cache=True)
def _replay_book(kind, side, price, qty, interval, levels, b0, lo, width):
    """Apply events; snapshot every ``interval`` events.

    Returns (snaps, bids, level_at_exec, err_code, err_at). err codes:
    1 negative volume, 2 crossing add, 3 trade on wrong side.
    """
    n = len(kind)
    nb = n // interval
    snaps = np.zeros((nb + 1, 2 * levels), np.int64)
    bids = np.zeros(nb + 1, np.int64)
    level_at_exec = np.full(n, -1, np.int64)
    book = np.zeros(width, np.int64)
    b = b0 - lo
    for e in range(n + 1):
        if e % interval == 0 and e // interval <= nb:
            k = e // interval
            snaps[k, :] = book[b - levels + 1: b + levels + 1]
            bids[k] = b + lo
        if e == n:
            break
        t = price[e] - lo
        q = qty[e]
        kd = kind[e]
        if kd == 0:
            if side[e] == 0:
                if t > b:
                    for u in range(b + 1, t + 1):
                        if book[u] != 0:
                            return snaps, bids, level_at_exec, 2, e
                    b = t
            else:
                if t <= b:
                    for u in range(t, b + 1):
                        if book[u] != 0:
                            return snaps, bids, level_at_exec, 2, e
                    b = t - 1
            book[t] += q
        elif kd == 1:
            book[t] -= q
            if book[t] < 0:
                return snaps, bids, level_at_exec, 1, e
        else:
            buy = side[e] == 2
            if (buy and t <= b) or ((not buy) and t > b):
                return snaps, bids, level_at_exec, 3, e
            level_at_exec[e] = book[t]
            book[t] -= q
            if book[t] < 0:
                return snaps, bids, level_at_exec, 1, e
    return snaps, bids, level_at_exec, 0, -1


_ERRORS = {1: "negative book volume", 2: "add crosses the opposite side", 3: "trade on the wrong side"}


def replay_stream(stream: EventStream, interval: int, levels: int):
    """Boundary snapshots of one stream: ``(snaps, bid_ticks, level_at_exec)``."""
    if interval < 1 or levels < 1:
        raise ValueError("interval and levels must be positive")
    n = len(stream)
    if n and np.any(np.diff(stream.seq) <= 0):
        raise MalformedStream(f"contract {stream.contract_id}: seq not strictly increasing")
    if np.any(stream.qty < 0):
        raise MalformedStream(f"contract {stream.contract_id}: negative quantity")
    bad_side = ((stream.kind != TRADE) & (stream.side > 1)) | ((stream.kind == TRADE) & (stream.side < 2))
    if np.any(bad_side) or np.any((stream.kind < 0) | (stream.kind > 2)):
        raise MalformedStream(f"contract {stream.contract_id}: side does not fit event kind")
    adds = np.flatnonzero(stream.kind == ADD)
    if len(adds):
        a = adds[0]
        b0 = int(stream.price_tick[a]) - (1 if stream.side[a] == 1 else 0)
    else:
        b0 = int(stream.price_tick[0]) if n else 0
    lo_t = min(int(stream.price_tick.min()) if n else b0, b0)
    hi_t = max(int(stream.price_tick.max()) if n else b0, b0)
    lo = lo_t - levels - 2
    width = hi_t - lo + levels + 3
    snaps, bids, lae, code, at = _replay_book(
        stream.kind, stream.side, stream.price_tick, stream.qty, interval, levels, b0, lo, width
    )
    if code:
        raise MalformedStream(
            f"contract {stream.contract_id}: {_ERRORS[code]} at seq {int(stream.seq[at])}"
        )
    return snaps, bids, lae


@dataclass
class TransitionSample:
    snap_before: LobSnapshot
    price_before: DividingPrice
    snap_after: LobSnapshot
    price_after: DividingPrice
    trades: list
    contract_id: int
    session_time: int


@dataclass
class TransitionSet:
    levels: int
    interval: int
    tick_size: Fraction
    before: np.ndarray
    after: np.ndarray
    bid_before: np.ndarray
    bid_after: np.ndarray
    contract: np.ndarray
    event_index: np.ndarray
    session_time: np.ndarray
    trade_offsets: np.ndarray
    trades: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.bid_before)

    @property
    def increments(self) -> np.ndarray:
        return self.bid_after - self.bid_before

    def trade_slice(self, i: int) -> np.ndarray:
        return self.trades[self.trade_offsets[i]: self.trade_offsets[i + 1]]

    def trades_of(self, i: int) -> list[TradeRecord]:
        return [
            TradeRecord(int(t["seq"]), "buy" if t["side"] > 0 else "sell", int(t["qty"]),
                        int(t["price_tick"]), int(t["level_volume"]), int(t["priority_qty"]))
            for t in self.trade_slice(i)
        ]

    def sample(self, i: int) -> TransitionSample:
        return TransitionSample(
            LobSnapshot.from_vector(self.before[i], int(self.bid_before[i])),
            DividingPrice(int(self.bid_before[i])),
            LobSnapshot.from_vector(self.after[i], int(self.bid_after[i])),
            DividingPrice(int(self.bid_after[i])),
            self.trades_of(i), int(self.contract[i]), int(self.session_time[i]),
        )

    def take(self, idx) -> "TransitionSet":
        idx = np.arange(len(self))[idx] if isinstance(idx, slice) else np.asarray(idx, dtype=np.int64)
        counts = np.diff(self.trade_offsets)[idx]
        offsets = np.zeros(len(idx) + 1, np.int64)
        np.cumsum(counts, out=offsets[1:])
        if len(idx) and counts.sum():
            starts = self.trade_offsets[idx]
            src = np.repeat(starts - offsets[:-1], counts) + np.arange(offsets[-1])
            trades = self.trades[src]
        else:
            trades = np.zeros(0, TRADE_DTYPE)
        return TransitionSet(
            self.levels, self.interval, self.tick_size,
            np.ascontiguousarray(self.before[idx]), np.ascontiguousarray(self.after[idx]),
            self.bid_before[idx].copy(), self.bid_after[idx].copy(), self.contract[idx].copy(),
            self.event_index[idx].copy(), self.session_time[idx].copy(), offsets, trades,
            dict(self.meta),
        )

    def buy_sell_volume(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample buyer- and seller-initiated traded volume."""
        owner = np.repeat(np.arange(len(self)), np.diff(self.trade_offsets))
        q = self.trades["qty"].astype(np.float64)
        buy = np.bincount(owner, weights=np.where(self.trades["side"] > 0, q, 0.0), minlength=len(self))
        sell = np.bincount(owner, weights=np.where(self.trades["side"] < 0, q, 0.0), minlength=len(self))
        return buy, sell


def _empty_set(levels, interval, tick_size):
    z = np.zeros(0, np.int64)
    return TransitionSet(levels, interval, tick_size, np.zeros((0, 2 * levels), np.int64),
                         np.zeros((0, 2 * levels), np.int64), z, z.copy(), z.copy(), z.copy(),
                         z.copy(), np.zeros(1, np.int64), np.zeros(0, TRADE_DTYPE))


def build_transitions(
    streams,
    interval: int = 250,
    levels: int = 5,
    require_two_sided: bool = True,
    tick_size: Fraction = Fraction(1, 200),
) -> TransitionSet:
    """Transition samples of every stream, contract by contract in id order.

    With ``require_two_sided`` samples whose before or after snapshot has an
    empty side within the window are dropped.
    """
    if isinstance(streams, EventStream):
        streams = [streams]
    streams = sorted(streams, key=lambda s: s.contract_id)
    ids = [s.contract_id for s in streams]
    if len(set(ids)) != len(ids):
        raise MalformedStream("duplicate contract ids")
    parts = []
    for st in streams:
        snaps, bids, lae = replay_stream(st, interval, levels)
        ns = len(snaps) - 1
        if ns <= 0:
            continue
        keep = np.ones(ns, bool)
        if require_two_sided:
            two = (snaps[:, :levels].sum(1) > 0) & (snaps[:, levels:].sum(1) > 0)
            keep = two[:-1] & two[1:]
        ev = np.flatnonzero(st.kind == TRADE)
        owner = ev // interval
        ev, owner = ev[owner < ns], owner[owner < ns]
        sel = keep[owner]
        ev, owner = ev[sel], owner[sel]
        tr = np.zeros(len(ev), TRADE_DTYPE)
        tr["seq"] = st.seq[ev]
        tr["side"] = np.where(st.side[ev] == SIDE_CODES["buy"], 1, -1)
        tr["qty"] = st.qty[ev]
        tr["price_tick"] = st.price_tick[ev]
        tr["level_volume"] = np.where(st.level_volume[ev] >= 0, st.level_volume[ev], lae[ev])
        tr["priority_qty"] = np.maximum(st.priority_qty[ev], 0)
        rows = np.flatnonzero(keep)
        counts = np.bincount(owner, minlength=ns)[rows]
        boundary = rows * interval
        parts.append(dict(
            before=snaps[rows], after=snaps[rows + 1], bid_before=bids[rows], bid_after=bids[rows + 1],
            contract=np.full(len(rows), st.contract_id, np.int64), event_index=boundary.astype(np.int64),
            session_time=st.seq[boundary], counts=counts, trades=tr,
        ))
    if not parts:
        out = _empty_set(levels, interval, tick_size)
    else:
        cat = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
        offsets = np.zeros(len(cat["bid_before"]) + 1, np.int64)
        np.cumsum(cat["counts"], out=offsets[1:])
        out = TransitionSet(
            levels, interval, Fraction(tick_size), np.ascontiguousarray(cat["before"]),
            np.ascontiguousarray(cat["after"]), cat["bid_before"], cat["bid_after"], cat["contract"],
            cat["event_index"], cat["session_time"], offsets, cat["trades"],
        )
    out.meta["contracts"] = {str(s.contract_id): s.name for s in streams}
    return out


def split_dataset(ts: TransitionSet, train_fraction: float = 0.8):
    if not 0.0 <= train_fraction <= 1.0:
        raise ValueError("train_fraction must lie in [0, 1]")
    n_train = math.floor(len(ts) * train_fraction + 1e-9)
    return ts.take(slice(0, n_train)), ts.take(slice(n_train, len(ts)))


# -- extended state features --------------------------------------------------


@dataclass
class FeatureSet:
    values: np.ndarray  # (m, d), before z-scoring
    rows: np.ndarray  # sample index of each feature row
    names: list


def _lookback_rows(ts: TransitionSet, window: int) -> np.ndarray:
    """Row of the sample ``window`` events earlier in the same contract, or -1
    if it or anything between is missing."""
    if window % ts.interval:
        raise ValueError(f"window {window} is not a multiple of the interval {ts.interval}")
    m = window // ts.interval
    n = len(ts)
    prev = np.arange(n) - m
    ok = prev >= 0
    p = np.where(ok, prev, 0)
    ok &= (ts.contract[p] == ts.contract) & (ts.event_index[p] == ts.event_index - window)
    return np.where(ok, prev, -1)


def trade_imbalance(buy_volume, total_volume):
    """Buyer-initiated share of traded volume; 0.5 when nothing traded."""
    buy_volume = np.asarray(buy_volume, dtype=np.float64)
    total_volume = np.asarray(total_volume, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total_volume > 0, buy_volume / total_volume, 0.5)


def compute_features(ts: TransitionSet, return_windows=(250, 1250, 5000),
                     imbalance_windows=(250, 2500, 12500)) -> FeatureSet:
    """Sqrt volumes, lagged mid log-returns and trade imbalances per sample.

    Rows lacking the full lookback inside their contract are dropped.
    """
    n = len(ts)
    mid = mid_prices_many(ts.before, ts.bid_before)
    if np.any(mid <= 0):
        raise ValueError("mid prices must be positive for log-returns")
    cols = [np.sqrt(ts.before.astype(np.float64))]
    names = [f"sqrt_v{i}" for i in range(2 * ts.levels)]
    valid = np.isfinite(mid)
    for w in return_windows:
        r = _lookback_rows(ts, w)
        valid &= r >= 0
        rr = np.where(r >= 0, r, 0)
        with np.errstate(invalid="ignore"):
            cols.append((np.log(mid) - np.log(mid[rr]))[:, None])
        names.append(f"ret_{w}")
    buy, sell = ts.buy_sell_volume()
    cb = np.concatenate([[0.0], np.cumsum(buy)])
    ct = np.concatenate([[0.0], np.cumsum(buy + sell)])
    for w in imbalance_windows:
        r = _lookback_rows(ts, w)
        valid &= r >= 0
        rr = np.where(r >= 0, r, 0)
        cols.append(trade_imbalance(cb[:n] - cb[rr], ct[:n] - ct[rr])[:, None])
        names.append(f"imb_{w}")
    values = np.hstack(cols)
    rows = np.flatnonzero(valid)
    if len(rows) == 0:
        raise InsufficientHistory("no sample has the full lookback history")
    return FeatureSet(values[rows], rows, names)


@dataclass
class ZScore:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=np.float64)
        if len(x) < 2:
            raise InsufficientHistory("need at least two rows to standardize")
        std = x.std(axis=0)
        # constant columns stay centered instead of dividing by zero
        return cls(x.mean(axis=0), np.where(std > 0, std, 1.0))

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (p, d), rows orthonormal
    explained_variance_ratio: np.ndarray
    eigenvalues: np.ndarray


def fit_pca(x, n_components: int = 8) -> PcaModel:
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n_components < 1 or n_components > d:
        raise ValueError(f"n_components must lie in [1, {d}]")
    if n <= n_components:
        raise RankDeficient(f"{n} rows cannot support {n_components} components")
    mean = x.mean(axis=0)
    cov = np.cov(x - mean, rowvar=False).reshape(d, d)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    total = vals.sum()
    if total <= 0 or vals[n_components - 1] <= 1e-12 * vals[0]:
        raise RankDeficient(f"training data spans fewer than {n_components} dimensions")
    comps = vecs[:, :n_components].T.copy()
    # deterministic sign: largest-magnitude loading positive
    flip = np.sign(comps[np.arange(n_components), np.abs(comps).argmax(axis=1)])
    comps *= flip[:, None]
    return PcaModel(mean, comps, vals[:n_components] / total, vals)


def project(model: PcaModel, x) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - model.mean) @ model.components.T


# -- persistence -------------------------------------------------------------

MAGIC = b"LOBKNNDS"
VERSION = 1
_HEADER = struct.Struct("<8sIIIqqQQI")


def _record_dtype(levels):
    w = 2 * levels
    return np.dtype([
        ("before", "<i8", (w,)), ("after", "<i8", (w,)), ("bid_before", "<i8"), ("bid_after", "<i8"),
        ("contract", "<i8"), ("event_index", "<i8"), ("session_time", "<i8"),
    ])


def _pad8(n):
    return (-n) % 8


def write_dataset(ts: TransitionSet, path) -> None:
    meta = json.dumps(ts.meta, sort_keys=True).encode()
    rec = np.zeros(len(ts), _record_dtype(ts.levels))
    for f in rec.dtype.names:
        rec[f] = getattr(ts, f)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, ts.levels, ts.interval, ts.tick_size.numerator,
                              ts.tick_size.denominator, len(ts), len(ts.trades), len(meta)))
        fh.write(meta + b"\0" * _pad8(_HEADER.size + len(meta)))
        fh.write(rec.tobytes())
        fh.write(np.asarray(ts.trade_offsets, "<i8").tobytes())
        fh.write(np.asarray(ts.trades, TRADE_DTYPE).tobytes())


def read_dataset(path, mmap: bool = True) -> TransitionSet:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) < _HEADER.size:
                raise DatasetFormatError(f"{path}: truncated header")
            magic, version, levels, interval, num, den, n, nt, mlen = _HEADER.unpack(head)
            if magic != MAGIC:
                raise DatasetFormatError(f"{path}: not a transition dataset")
            if version != VERSION:
                raise DatasetFormatError(f"{path}: unsupported version {version}")
            meta = json.loads(fh.read(mlen).decode() or "{}")
    except OSError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc
    rd = _record_dtype(levels)
    off = _HEADER.size + mlen + _pad8(_HEADER.size + mlen)
    need = off + n * rd.itemsize + (n + 1) * 8 + nt * TRADE_DTYPE.itemsize
    if path.stat().st_size != need:
        raise DatasetFormatError(f"{path}: size {path.stat().st_size} does not match header ({need})")

    def block(dtype, count, offset):
        if mmap and count:
            return np.memmap(path, dtype=dtype, mode="r", offset=offset, shape=(count,))
        with open(path, "rb") as fh:
            fh.seek(offset)
            return np.frombuffer(fh.read(count * np.dtype(dtype).itemsize), dtype=dtype)

    rec = block(rd, n, off)
    offsets = np.array(block("<i8", n + 1, off + n * rd.itemsize))
    trades = block(TRADE_DTYPE, nt, off + n * rd.itemsize + (n + 1) * 8)
    if len(trades) == 0:
        trades = np.zeros(0, TRADE_DTYPE)
    w = 2 * levels
    return TransitionSet(
        levels, interval, Fraction(num, den),
        rec["before"].reshape(n, w) if n else np.zeros((0, w), np.int64),
        rec["after"].reshape(n, w) if n else np.zeros((0, w), np.int64),
        np.asarray(rec["bid_before"]), np.asarray(rec["bid_after"]), np.asarray(rec["contract"]),
        np.asarray(rec["event_index"]), np.asarray(rec["session_time"]), offsets, trades, meta,
    )


def export_csv(ts: TransitionSet, path) -> None:
    w = 2 * ts.levels
    df = pd.DataFrame({
        "sample": np.arange(len(ts)), "contract": ts.contract, "event_index": ts.event_index,
        "session_time": ts.session_time, "bid_before": ts.bid_before, "bid_after": ts.bid_after,
        "n_trades": np.diff(ts.trade_offsets),
    })
    for i in range(w):
        df[f"before_{i}"] = ts.before[:, i]
    for i in range(w):
        df[f"after_{i}"] = ts.after[:, i]
    df.to_csv(path, index=False)


def concat_transition_sets(parts) -> TransitionSet:
    """Concatenate sets built with the same levels, interval and tick size."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if (p.levels, p.interval, p.tick_size) != (first.levels, first.interval, first.tick_size):
            raise ValueError("transition sets differ in levels, interval or tick size")
    counts = np.concatenate([np.diff(p.trade_offsets) for p in parts])
    offsets = np.zeros(len(counts) + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    meta = {}
    for p in parts:
        for k, v in p.meta.items():
            if isinstance(v, dict):
                meta.setdefault(k, {}).update(v)
            else:
                meta[k] = v
    cat = lambda f: np.concatenate([np.asarray(getattr(p, f)) for p in parts])
    return TransitionSet(
        first.levels, first.interval, first.tick_size,
        np.ascontiguousarray(np.concatenate([p.before for p in parts])),
        np.ascontiguousarray(np.concatenate([p.after for p in parts])),
        cat("bid_before"), cat("bid_after"), cat("contract"), cat("event_index"),
        cat("session_time"), offsets, cat("trades"), meta,
    )
