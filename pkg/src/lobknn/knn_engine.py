"""K-nearest-neighbor resampling of transition samples.

Each path starts from a snapshot of the initial pool. At every step the
strategy acts on the current snapshot, the modified snapshot is matched
against the training states, one of the K nearest neighbors is drawn
uniformly, and the path adopts that neighbor's successor snapshot while the
price moves by the neighbor's historical boundary increment. Agent limit
orders are filled by replaying the neighbor's trades.

Randomness is keyed by ``(seed, stream, step)`` and indexed by path id, so the
result does not depend on batching or worker count.
"""
from __future__ import annotations

import copy
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .agents import AgentState, Noop, Strategy
from .dataset import (
    TransitionSet, ZScore, compute_features, fit_pca, project, trade_imbalance,
)
from .interaction import (
    ASK, BID, BUY, InteractionError, MarketOrder, apply_action, apply_market_order, visible_depth,
)
from .lob_core import (
    LobSnapshot, imbalances_many, mid_prices_many, weighted_mid_prices_many,
)
from .matching import Mechanism, replay_arrays

STREAM_INIT, STREAM_STEP = 1, 2

ERR_NONE = 0
ERR_STATE = 50  # modified state cannot be featurized (empty side)


class EmptyTrainSet(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NeighborIndex:
    """Exact Euclidean k-NN over a fixed point set; ties go to the lower index.

    Identical rows are collapsed before building the tree. A query finds the
    nearest distinct rows until their multiplicities cover ``k``, takes every
    distinct row tied with that cut-off distance, and expands each into at most
    ``k`` of its original indices before the final (distance, index) sort.
    """

    def __init__(self, points, leafsize: int = 16):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or len(pts) == 0:
            raise EmptyTrainSet("cannot index an empty training set")
        if not np.all(np.isfinite(pts)):
            raise ValueError("training points must be finite")
        self.points = pts
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        inv = inv.ravel()
        self.unique = np.ascontiguousarray(uniq)
        self.members = np.argsort(inv, kind="stable")  # ascending within each group
        self.mult = np.bincount(inv, minlength=len(uniq))
        self.start = np.concatenate([[0], np.cumsum(self.mult)[:-1]])
        self.tree = cKDTree(self.unique, leafsize=leafsize, balanced_tree=False, compact_nodes=False)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    def _udist(self, x, urow):
        return np.sqrt(((self.unique[urow] - x) ** 2).sum(-1))

    def query(self, x, k: int, workers: int = 1):
        """``(distances, indices)`` of shape (m, k), sorted by (distance, index)."""
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionMismatch(f"query has {x.shape[-1]} dims, index has {self.dim}")
        n, nu = len(self), len(self.unique)
        if not 1 <= k <= n:
            raise ValueError(f"k={k} must lie in [1, {n}]")
        m = len(x)
        if m == 0:
            return np.empty((0, k)), np.empty((0, k), np.int64)
        ku = min(k + 1, nu)
        _, iu = self.tree.query(x, k=ku, workers=workers)
        iu = iu.reshape(m, ku)
        du = self._udist(x[:, None, :], iu)
        order = np.argsort(du, axis=1, kind="stable")
        du = np.take_along_axis(du, order, 1)
        iu = np.take_along_axis(iu, order, 1)
        cover = np.cumsum(np.minimum(self.mult[iu], k), axis=1)
        cut = du[np.arange(m), np.argmax(cover >= k, axis=1)]
        thr = cut * (1 + 1e-9) + 1e-12
        inside = du <= thr[:, None]
        # the candidate list may stop inside a tie
        open_rows = np.flatnonzero(inside[:, -1]) if ku < nu else np.zeros(0, np.int64)
        owner = np.repeat(np.arange(m), inside.sum(1))
        cand = iu[inside]
        if len(open_rows):
            keep = ~np.isin(owner, open_rows)
            owner, cand = owner[keep], cand[keep]
            balls = self.tree.query_ball_point(x[open_rows], thr[open_rows], workers=workers)
            lens = np.fromiter((len(b) for b in balls), np.int64, len(balls))
            extra = np.fromiter((i for b in balls for i in b), np.int64, int(lens.sum()))
            owner = np.concatenate([owner, np.repeat(open_rows, lens)])
            cand = np.concatenate([cand, extra])
        cd = self._udist(x[owner], cand)
        # expand each distinct row into its first min(mult, k) original indices
        take = np.minimum(self.mult[cand], k)
        rep = np.repeat(np.arange(len(cand)), take)
        within = np.arange(len(rep)) - np.repeat(np.cumsum(take) - take, take)
        orig = self.members[self.start[cand][rep] + within]
        e_owner, e_d = owner[rep], cd[rep]
        order = np.lexsort((orig, e_d, e_owner))
        counts = np.bincount(e_owner, minlength=m)
        first = np.concatenate([[0], np.cumsum(counts)[:-1]])
        pick = order[(first[:, None] + np.arange(k)[None, :]).ravel()]
        return e_d[pick].reshape(m, k), orig[pick].reshape(m, k)


def brute_force_knn(points, x, k):
    """Reference all-pairs search with the same tie rule."""
    points = np.asarray(points, dtype=np.float64)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = np.sqrt(((x[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    idx = np.broadcast_to(np.arange(len(points)), d.shape)
    order = np.lexsort((idx, d), axis=-1)[:, :k]
    return np.take_along_axis(d, order, 1), order


@dataclass
class SimConfig:
    K: int = 20
    T_n: int = 60
    N: int = 1000
    mechanism: str = "allocation"
    seed: int = 0
    feature_mode: str = "raw"
    threads: int = 1

    def __post_init__(self):
        if self.K < 1 or self.T_n < 1 or self.N < 1:
            raise ValueError("K, T_n and N must be positive")
        self.mechanism = Mechanism(self.mechanism).value
        if self.feature_mode not in ("raw", "pca"):
            raise ValueError("feature_mode must be raw or pca")

    def archive_meta(self) -> dict:
        d = asdict(self)
        d.pop("threads")  # output must not depend on it
        return d


# -- state featurization --------------------------------------------------------


class RawFeatures:
    """Volumes as they are; index rows are all training samples."""

    mode = "raw"
    history_returns = 0
    history_trades = 0

    def __init__(self, train: TransitionSet):
        self.rows = np.arange(len(train))
        self.points = train.before.astype(np.float64)

    def transform(self, volumes, bids, hist_mid=None, hist_buy=None, hist_tot=None):
        return np.asarray(volumes, dtype=np.float64)


class PcaFeatures:
    """Sqrt volumes, lagged returns and trade imbalances, z-scored and projected.

    Fitted on ``full`` (train prefix followed by the rest) so that lookback
    windows of the first held-out samples can reach into the train part.
    """

    mode = "pca"

    def __init__(self, full: TransitionSet, n_train: int, return_windows=(250, 1250, 5000),
                 imbalance_windows=(250, 2500, 12500), n_components: int = 8):
        fs = compute_features(full, return_windows, imbalance_windows)
        tr = fs.rows < n_train
        if tr.sum() <= n_components:
            raise EmptyTrainSet("too few training rows with full lookback history")
        self.full = full
        self.levels = full.levels
        self.interval = full.interval
        self.ret_lags = [w // full.interval for w in return_windows]
        self.imb_lags = [w // full.interval for w in imbalance_windows]
        self.history_returns = max(self.ret_lags)
        self.history_trades = max(self.imb_lags)
        self.zscore = ZScore.fit(fs.values[tr])
        self.pca = fit_pca(self.zscore.apply(fs.values[tr]), n_components)
        self.rows = fs.rows[tr]
        self.points = project(self.pca, self.zscore.apply(fs.values[tr]))
        self.feature_rows = fs.rows
        self.init_rows = fs.rows[~tr]
        self._mid = mid_prices_many(full.before, full.bid_before)
        self._buy, sell = full.buy_sell_volume()
        self._tot = self._buy + sell

    def initial_history(self, rows):
        """Mid history (m, H_r+1) ending at each row and trade volumes (m, H_t)."""
        rows = np.asarray(rows)
        hr, ht = self.history_returns, self.history_trades
        mid = self._mid[rows[:, None] + np.arange(-hr, 1)[None, :]]
        tix = rows[:, None] + np.arange(-ht, 0)[None, :]
        return mid, self._buy[tix], self._tot[tix]

    def transform(self, volumes, bids, hist_mid, hist_buy, hist_tot):
        """``hist_mid[:, -1]`` is the mid at the current step before any action."""
        volumes = np.asarray(volumes)
        mid_now = mid_prices_many(volumes, bids)
        cols = [np.sqrt(volumes.astype(np.float64))]
        with np.errstate(invalid="ignore", divide="ignore"):
            for m in self.ret_lags:
                cols.append((np.log(mid_now) - np.log(hist_mid[:, -1 - m]))[:, None])
        for m in self.imb_lags:
            cols.append(trade_imbalance(hist_buy[:, -m:].sum(1), hist_tot[:, -m:].sum(1))[:, None])
        return project(self.pca, self.zscore.apply(np.hstack(cols)))


# -- path container -----------------------------------------------------------------


@dataclass
class PathSet:
    volumes: np.ndarray  # (N, T+1, 2l), agent volume included
    bid_ticks: np.ndarray  # (N, T+1)
    init_index: np.ndarray  # (N,)
    neighbor: np.ndarray  # (N, T) train sample used at step s
    distance: np.ndarray  # (N, T)
    inventory: np.ndarray  # (N, T+1), before the terminal action
    cash: np.ndarray  # (N, T+1)
    market_qty: np.ndarray  # (N, T) signed inventory change
    market_cash: np.ndarray
    fill_qty: np.ndarray
    fill_cash: np.ndarray
    posted_qty: np.ndarray
    valid: np.ndarray
    error: np.ndarray
    error_step: np.ndarray
    window_cancels: np.ndarray
    terminal_qty: np.ndarray
    terminal_cash: np.ndarray
    terminal_shortfall: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return self.volumes.shape[0]

    @property
    def steps(self):
        return self.volumes.shape[1] - 1

    @property
    def levels(self):
        return self.volumes.shape[2] // 2

    @property
    def final_inventory(self):
        return self.inventory[:, -1] + self.terminal_qty

    @property
    def final_cash(self):
        return self.cash[:, -1] + self.terminal_cash

    def mids(self):
        return mid_prices_many(self.volumes, self.bid_ticks)

    def weighted_mids(self):
        return weighted_mid_prices_many(self.volumes, self.bid_ticks)

    def subset(self, mask) -> "PathSet":
        kw = {f: getattr(self, f)[mask] for f in _PATH_FIELDS}
        return PathSet(**kw, meta=dict(self.meta))


_PATH_FIELDS = [
    "volumes", "bid_ticks", "init_index", "neighbor", "distance", "inventory", "cash",
    "market_qty", "market_cash", "fill_qty", "fill_cash", "posted_qty", "valid", "error",
    "error_step", "window_cancels", "terminal_qty", "terminal_cash", "terminal_shortfall",
]


def empty_paths(n, steps, levels) -> PathSet:
    z = lambda *shape: np.zeros(shape, np.int64)
    return PathSet(
        z(n, steps + 1, 2 * levels), z(n, steps + 1), z(n), np.full((n, steps), -1, np.int64),
        np.zeros((n, steps)), z(n, steps + 1), z(n, steps + 1), z(n, steps), z(n, steps),
        z(n, steps), z(n, steps), z(n, steps), np.ones(n, bool), z(n), np.full(n, -1, np.int64),
        z(n), z(n), z(n), z(n),
    )


def step_rng(seed: int, stream: int, step: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, step])))


def draw_initial(seed: int, pool_size: int, n: int) -> np.ndarray:
    if pool_size < 1:
        raise ValueError("initial pool is empty")
    return step_rng(seed, STREAM_INIT, 0).integers(0, pool_size, n)


def _overlay(volumes, bid, book, levels):
    """Add the agent's resting orders onto a fresh market snapshot; orders that
    left the window or ended up across the dividing price are dropped."""
    dropped = 0
    for o in list(book.orders.values()):
        pos = o.tick - bid + levels - 1
        wrong_side = (o.side == BID) != (o.tick <= bid)
        if pos < 0 or pos >= 2 * levels or wrong_side:
            dropped += 1
            del book.orders[o.order_id]
        else:
            volumes[pos] += o.remaining
    return dropped


class KnnSimulator:
    def __init__(self, train: TransitionSet, cfg: SimConfig, features=None):
        if len(train) == 0:
            raise EmptyTrainSet("training set is empty")
        self.train = train
        self.cfg = cfg
        self.features = features if features is not None else RawFeatures(train)
        if cfg.feature_mode != self.features.mode:
            raise ValueError(f"config asks for {cfg.feature_mode} features, got {self.features.mode}")
        if cfg.K > len(self.features.rows):
            raise ValueError(f"K={cfg.K} exceeds the {len(self.features.rows)} indexed states")
        self.index = NeighborIndex(self.features.points)
        self._inc = train.increments
        self._after = np.ascontiguousarray(train.after)
        self._tr = train.trades
        self._off = train.trade_offsets
        self._buy, sell = train.buy_sell_volume()
        self._tot = self._buy + sell

    def run(self, init_set: TransitionSet, strategy: Strategy | None = None, init_pool=None) -> PathSet:
        cfg = self.cfg
        levels = init_set.levels
        if levels != self.train.levels:
            raise DimensionMismatch("initial states and training set differ in levels")
        pool = np.arange(len(init_set)) if init_pool is None else np.asarray(init_pool, np.int64)
        if self.features.mode == "pca" and init_pool is None:
            pool = self.features.init_rows
        n, steps, K = cfg.N, cfg.T_n, cfg.K
        init = pool[draw_initial(cfg.seed, len(pool), n)]
        P = empty_paths(n, steps, levels)
        P.init_index[:] = init
        vols = np.ascontiguousarray(init_set.before[init]).astype(np.int64)
        bids = init_set.bid_before[init].astype(np.int64)
        P.volumes[:, 0] = vols
        P.bid_ticks[:, 0] = bids
        interactive = strategy is not None and not isinstance(strategy, Noop)
        mech = Mechanism(cfg.mechanism)
        states, strats = [], []
        if interactive:
            for _ in range(n):
                s = copy.deepcopy(strategy)
                inv = int(s.initial_inventory)
                states.append(AgentState(inventory=inv, initial_inventory=inv))
                strats.append(s)
            P.inventory[:, 0] = [st.inventory for st in states]
        pca = self.features.mode == "pca"
        if pca:
            hmid, hbuy, htot = self.features.initial_history(init)
        for s in range(steps):
            alive = np.flatnonzero(P.valid)
            qv = vols.copy()
            if interactive:
                for p in alive:
                    st = states[p]
                    st.step = s
                    snap = LobSnapshot.from_vector(vols[p], int(bids[p]))
                    try:
                        action = strats[p].next_action(snap, st, s)
                        mod, revenue = apply_action(snap, action, st.book)
                    except InteractionError as exc:
                        P.valid[p] = False
                        P.error[p] = exc.code
                        P.error_step[p] = s
                        continue
                    qv[p] = mod.vector
                    if action.market is not None and action.market.qty:
                        dq = action.market.qty if action.market.side == BUY else -action.market.qty
                        st.inventory += dq
                        P.market_qty[p, s] = dq
                    st.cash += revenue
                    P.market_cash[p, s] = revenue
                    P.posted_qty[p, s] = sum(x.qty for x in action.limits)
                alive = np.flatnonzero(P.valid)
            if pca:
                q = self.features.transform(qv[alive], bids[alive], hmid[alive], hbuy[alive], htot[alive])
                bad = ~np.all(np.isfinite(q), axis=1)
                if bad.any():
                    P.valid[alive[bad]] = False
                    P.error[alive[bad]] = ERR_STATE
                    P.error_step[alive[bad]] = s
                    alive, q = alive[~bad], q[~bad]
            else:
                q = qv[alive]
            dist, idx = self.index.query(q, K, workers=cfg.threads)
            u = step_rng(cfg.seed, STREAM_STEP, s).random(n)[alive]
            pick = np.minimum((u * K).astype(np.int64), K - 1)
            row = idx[np.arange(len(alive)), pick]
            j = self.features.rows[row]
            P.neighbor[alive, s] = j
            P.distance[alive, s] = dist[np.arange(len(alive)), pick]
            new_bids = bids.copy()
            new_bids[alive] = bids[alive] + self._inc[j]
            new_vols = vols.copy()
            new_vols[alive] = self._after[j]
            if interactive:
                for p, jj in zip(alive, j):
                    st = states[p]
                    filled = 0
                    if st.book.orders:
                        a, b = self._off[jj], self._off[jj + 1]
                        tr = self._tr[a:b]
                        shift = int(bids[p] - self.train.bid_before[jj])
                        rep = replay_arrays(tr["side"], tr["qty"], tr["price_tick"], tr["level_volume"],
                                            tr["priority_qty"], st.book, mech, shift)
                        st.inventory += rep.inventory_delta
                        st.cash += rep.cash_delta
                        P.fill_qty[p, s] = rep.inventory_delta
                        P.fill_cash[p, s] = rep.cash_delta
                        filled = rep.filled_qty
                        P.window_cancels[p] += _overlay(new_vols[p], int(new_bids[p]), st.book, levels)
                    st.last_fill_qty = filled
                    P.inventory[p, s + 1] = st.inventory
                    P.cash[p, s + 1] = st.cash
            if pca:
                new_mid = mid_prices_many(new_vols, new_bids)
                hmid = np.concatenate([hmid[:, 1:], new_mid[:, None]], axis=1)
                add_b = np.zeros(n)
                add_t = np.zeros(n)
                add_b[alive] = self._buy[j]
                add_t[alive] = self._tot[j]
                hbuy = np.concatenate([hbuy[:, 1:], add_b[:, None]], axis=1)
                htot = np.concatenate([htot[:, 1:], add_t[:, None]], axis=1)
            vols, bids = new_vols, new_bids
            P.volumes[:, s + 1] = vols
            P.bid_ticks[:, s + 1] = bids
        if interactive:
            self._terminal(P, states, strats, vols, bids)
        else:
            P.inventory[:] = P.inventory[:, :1]
        P.meta = {"kind": "knn", "config": cfg.archive_meta(), "strategy": _describe(strategy),
                  "levels": levels}
        return P

    def _terminal(self, P, states, strats, vols, bids):
        for p in np.flatnonzero(P.valid):
            st = states[p]
            st.step = P.steps
            snap = LobSnapshot.from_vector(vols[p], int(bids[p]))
            action = strats[p].on_path_end(snap, st)
            if action is None:
                continue
            try:
                mkt = action.market
                if mkt is not None:
                    action = type(action)(action.cancellations, None, action.limits)
                snap, _ = apply_action(snap, action, st.book)
                if mkt is not None and mkt.qty:
                    avail = visible_depth(snap, mkt.side)
                    qty = min(mkt.qty, avail)
                    P.terminal_shortfall[p] = mkt.qty - qty
                    snap, revenue, _ = apply_market_order(snap, MarketOrder(qty, mkt.side, P.steps))
                    P.terminal_qty[p] = qty if mkt.side == BUY else -qty
                    P.terminal_cash[p] = revenue
            except InteractionError as exc:
                P.valid[p] = False
                P.error[p] = exc.code
                P.error_step[p] = P.steps


def _describe(strategy):
    if strategy is None:
        return {"name": "noop"}
    d = {"name": getattr(strategy, "name", type(strategy).__name__)}
    if hasattr(strategy, "__dataclass_fields__"):
        d.update(asdict(strategy))
    return d


def resample_paths(train: TransitionSet, init_set: TransitionSet, strategy=None,
                   cfg: SimConfig | None = None, init_pool=None, features=None) -> PathSet:
    cfg = cfg or SimConfig()
    return KnnSimulator(train, cfg, features).run(init_set, strategy, init_pool)


def neighbor_distance_stats(paths: PathSet, q: float = 0.95):
    """Per-step mean and ``q``-quantile of match distances over valid paths."""
    d = paths.distance[paths.valid]
    if len(d) == 0:
        nan = np.full(paths.steps, np.nan)
        return nan, nan.copy()
    return d.mean(axis=0), np.quantile(d, q, axis=0)


# -- historical continuations ----------------------------------------------------


def continuation_starts(ts: TransitionSet, steps: int) -> np.ndarray:
    """Samples followed by ``steps - 1`` further contiguous samples of the same contract."""
    n = len(ts)
    if n < steps:
        return np.zeros(0, np.int64)
    link = (ts.contract[1:] == ts.contract[:-1]) & (ts.event_index[1:] - ts.event_index[:-1] == ts.interval)
    # run length of consecutive links starting at i
    ok = np.concatenate([link, [False]])
    run = np.zeros(n + 1, np.int64)
    for i in range(n - 1, -1, -1):
        run[i] = run[i + 1] + 1 if ok[i] else 0
    return np.flatnonzero(run[:n] >= steps - 1)


def historical_paths(ts: TransitionSet, starts, steps: int) -> PathSet:
    starts = np.asarray(starts, np.int64)
    n = len(starts)
    P = empty_paths(n, steps, ts.levels)
    rows = starts[:, None] + np.arange(steps)[None, :]
    P.init_index[:] = starts
    P.volumes[:, :steps] = ts.before[rows]
    P.volumes[:, steps] = ts.after[rows[:, -1]]
    P.bid_ticks[:, :steps] = ts.bid_before[rows]
    P.bid_ticks[:, steps] = ts.bid_after[rows[:, -1]]
    P.neighbor[:] = rows
    P.meta = {"kind": "historical", "levels": ts.levels}
    return P


# -- archive I/O ------------------------------------------------------------------

PATH_MAGIC = b"LOBKNNPA"
PATH_VERSION = 1
_PHEAD = struct.Struct("<8sIQIII")


def _path_dtype(steps, width):
    T = steps
    return np.dtype([
        ("init_index", "<i8"), ("valid", "<i8"), ("error", "<i8"), ("error_step", "<i8"),
        ("window_cancels", "<i8"), ("terminal_qty", "<i8"), ("terminal_cash", "<i8"),
        ("terminal_shortfall", "<i8"),
        ("volumes", "<i8", (T + 1, width)), ("bid_ticks", "<i8", (T + 1,)),
        ("neighbor", "<i8", (T,)), ("distance", "<f8", (T,)),
        ("inventory", "<i8", (T + 1,)), ("cash", "<i8", (T + 1,)),
        ("market_qty", "<i8", (T,)), ("market_cash", "<i8", (T,)),
        ("fill_qty", "<i8", (T,)), ("fill_cash", "<i8", (T,)), ("posted_qty", "<i8", (T,)),
    ])


def write_paths(paths: PathSet, path) -> None:
    width = paths.volumes.shape[2]
    dt = _path_dtype(paths.steps, width)
    rec = np.zeros(paths.n_paths, dt)
    for f in dt.names:
        rec[f] = getattr(paths, f)
    meta = json.dumps(paths.meta, sort_keys=True, default=str).encode()
    with open(path, "wb") as fh:
        fh.write(_PHEAD.pack(PATH_MAGIC, PATH_VERSION, paths.n_paths, paths.steps, width, len(meta)))
        fh.write(meta)
        fh.write(rec.tobytes())


def read_paths(path) -> PathSet:
    with open(path, "rb") as fh:
        head = fh.read(_PHEAD.size)
        if len(head) < _PHEAD.size:
            raise ValueError(f"{path}: truncated path archive")
        magic, version, n, steps, width, mlen = _PHEAD.unpack(head)
        if magic != PATH_MAGIC or version != PATH_VERSION:
            raise ValueError(f"{path}: not a path archive")
        meta = json.loads(fh.read(mlen).decode())
        dt = _path_dtype(steps, width)
        buf = fh.read()
    if len(buf) != n * dt.itemsize:
        raise ValueError(f"{path}: archive size does not match header")
    rec = np.frombuffer(buf, dt)
    kw = {f: np.array(rec[f]) for f in dt.names}
    kw["valid"] = kw["valid"].astype(bool)
    return PathSet(**kw, meta=meta)


def path_summary_frame(paths: PathSet) -> pd.DataFrame:
    """Per-path, per-step summary table."""
    n, T = paths.n_paths, paths.steps
    dist = np.concatenate([paths.distance, np.full((n, 1), np.nan)], axis=1)
    return pd.DataFrame({
        "path": np.repeat(np.arange(n), T + 1),
        "step": np.tile(np.arange(T + 1), n),
        "valid": np.repeat(paths.valid, T + 1),
        "bid_tick": paths.bid_ticks.ravel(),
        "mid": paths.mids().ravel(),
        "weighted_mid": paths.weighted_mids().ravel(),
        "obi": imbalances_many(paths.volumes).ravel(),
        "inventory": paths.inventory.ravel(),
        "cash": paths.cash.ravel(),
        "distance": dist.ravel(),
    })
