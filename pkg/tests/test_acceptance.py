"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines go straight to the
terminal) or ``python tests/test_acceptance.py``. The synthetic setups share
one dataset of 10^6 transitions over five contracts; the last contract, whose
regime leans upward, is the held-out part.
"""
import os
import time

import numpy as np
import pytest

from lobknn import stats as st
from lobknn.agents import InventoryMultipleLiquidation, round_half_away
from lobknn.bench_naive import naive_resample, step_pairs
from lobknn.cli import main as cli_main, run_impact
from lobknn.dataset import split_dataset, write_dataset
from lobknn.knn_engine import (
    KnnSimulator, NeighborIndex, SimConfig, continuation_starts, historical_paths,
    neighbor_distance_stats,
)
from lobknn.matching import allocation_fill, pro_rata_fill
from lobknn.synth import SynthParams, synth_dataset
from oracles import brute_knn, unit_allocation, unit_pro_rata

SIZES = (300, 500, 1000, 2000, 3000)
GRID = np.round(np.arange(0.1, 1.51, 0.05), 2)


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
        assert ok, detail
    return say


@pytest.fixture(scope="module")
def shared():
    ts = synth_dataset(SynthParams(), 200_000)
    train, test = split_dataset(ts)
    return ts, train, test


@pytest.fixture(scope="module")
def knn_vs_naive(shared):
    _, train, test = shared
    pool = continuation_starts(test, 60)
    t0 = time.perf_counter()
    knn = KnnSimulator(train, SimConfig(K=20, T_n=60, N=5000, seed=0)).run(test, None, pool)
    naive = naive_resample(train, test, 60, 5000, 0, pool)
    real = historical_paths(test, knn.init_index, 60)
    return real, knn, naive, time.perf_counter() - t0


def test_1_nn_exactness(verdict):
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(1000, 16))
    q = rng.normal(size=(100, 16))
    t0 = time.perf_counter()
    d, i = NeighborIndex(pts).query(q, 20)
    dt = time.perf_counter() - t0
    bd, bi = brute_knn(pts, q, 20)
    ok = np.array_equal(i, bi) and np.allclose(d, bd, rtol=0, atol=1e-12) and dt < 5
    verdict(1, ok, f"indices equal={np.array_equal(i, bi)} max|dd|={np.abs(d - bd).max():.1e} time={dt:.2f}s")


def test_2_matching_oracle(verdict):
    rng = np.random.default_rng(1)
    bad = over = 0
    for _ in range(10_000):
        v_p = int(rng.integers(1, 400))
        q_l = int(rng.integers(1, v_p + 1))
        q_a = int(rng.integers(0, v_p - q_l + 1))
        q_m = int(rng.integers(0, 2 * v_p + 1))
        bad += pro_rata_fill(q_m, q_l, v_p) != unit_pro_rata(q_m, q_l, v_p)
        bad += allocation_fill(q_m, q_a, q_l, v_p) != unit_allocation(q_m, q_a, q_l, v_p)
        # split the level into orders and check that no more than q_m is handed out
        cuts = np.sort(rng.integers(0, v_p + 1, size=int(rng.integers(0, 6))))
        parts = [int(x) for x in np.diff(np.concatenate([[0], cuts, [v_p]])) if x > 0]
        over += sum(pro_rata_fill(q_m, x, v_p) for x in parts) > q_m
        rest = v_p - q_a
        cuts = np.sort(rng.integers(0, rest + 1, size=int(rng.integers(0, 6))))
        parts = [int(x) for x in np.diff(np.concatenate([[0], cuts, [rest]])) if x > 0]
        total = min(q_a, q_m) + sum(allocation_fill(q_m, q_a, x, v_p) for x in parts)
        over += total > q_m
    verdict(2, bad == 0 and over == 0, f"mismatches={bad} conservation breaches={over} over 10000 tuples")


def test_3_degenerate_replay(verdict):
    # one contiguous contract; wide deep-level noise keeps every book distinct
    ts = synth_dataset(SynthParams(n_contracts=1, up_prob=0.5, deep_noise=60, seed=11), 2000)
    distinct = len(np.unique(ts.before, axis=0)) == len(ts)
    sim = KnnSimulator(ts, SimConfig(K=1, T_n=60, N=100, seed=3))
    p = sim.run(ts, None, continuation_starts(ts, 60))
    h = historical_paths(ts, p.init_index, 60)
    same = np.array_equal(p.volumes, h.volumes) and np.array_equal(p.bid_ticks, h.bid_ticks)
    verdict(3, distinct and same, f"distinct states={distinct} bit-exact={same} (100 paths x 60 steps)")


def test_4_conditionality(verdict, knn_vs_naive):
    real, knn, naive, secs = knn_vs_naive
    rc = st.return_correlation_over_time(real, knn)
    rn = st.return_correlation_over_time(real, naive)
    c1, p1 = rc["corr"].iloc[0], rc["p_value"].iloc[0]
    c60, p60 = rc["corr"].iloc[-1], rc["p_value"].iloc[-1]
    n1 = rn["corr"].iloc[0]
    lim = 2 / np.sqrt(naive.n_paths)
    ok = c1 > 0 and p1 < 0.01 and c60 < c1 and p60 > 0.01 and abs(n1) < lim and secs < 300
    verdict(4, ok, f"knn corr s=1 {c1:.3f} (p={p1:.1e}) s=60 {c60:.3f} (p={p60:.2f}); "
                   f"naive s=1 {n1:.3f} (|.|<{lim:.3f}); sim time {secs:.0f}s")


def test_5_ks_dominance(verdict, knn_vs_naive):
    real, knn, naive, _ = knn_vs_naive
    feats = ["mid_return_1", "mid_return_10", "mid_return_30"]
    fr = st.path_features(real)
    tk = st.ks_benchmark_table(fr, st.path_features(knn), 1000, 10, 0, feats).set_index("feature")
    tn = st.ks_benchmark_table(fr, st.path_features(naive), 1000, 10, 0, feats).set_index("feature")
    ok = bool((tk["mean"] < tn["mean"]).all())
    detail = " ".join(f"s={f.rsplit('_', 1)[1]}: {tk.loc[f, 'mean']:.3f}<{tn.loc[f, 'mean']:.3f}" for f in feats)
    verdict(5, ok, f"knn vs naive mean KS {detail}")


def test_6_impact_shape(verdict, shared):
    _, train, test = shared
    t0 = time.perf_counter()
    sim = KnnSimulator(train, SimConfig(K=20, T_n=30, N=5000, seed=0))
    P, V, R = run_impact(sim, test, SIZES, 30, continuation_starts(test, 30))
    curve = st.impact_gamma_sweep(P, V, R, GRID)
    _, means = st.bucket_means(R, P)
    secs = time.perf_counter() - t0
    mono = bool(np.all(np.diff(means) < 0))
    ok = abs(curve.gamma_star - 0.5) <= 0.15 and mono and secs < 900
    verdict(6, ok, f"gamma*={curve.gamma_star:g} trimmed means (1e-5)="
                   f"{np.round(means * 1e5, 2).tolist()} monotone={mono} time={secs:.0f}s")


def test_7_calibration_mechanics(verdict, shared):
    _, train, test = shared
    sim = KnnSimulator(train, SimConfig(K=20, T_n=30, N=5000, seed=0))
    pool = continuation_starts(test, 30)
    I0 = 40
    out = {}
    for k in (0.5, 1.0, 1.25, 2.5):
        p = sim.run(test, InventoryMultipleLiquidation(k, I0), pool)
        out[k] = p
    p = out[0.5]
    inv = p.inventory[p.valid]
    # the quote caps what a step can fill: I_{s+1} >= I_s - round(0.5 * I_s)
    cap = inv[:, :-1] - np.vectorize(lambda x: round_half_away(0.5 * abs(x)))(inv[:, :-1])
    a_ok = bool(np.all(inv[:, 1:] >= cap) and np.all(inv >= 0))
    filled = np.abs(p.fill_qty[p.valid]).sum(1)
    posted = p.posted_qty[p.valid].sum(1)
    unfilled = 1 - filled / np.maximum(posted, 1)
    share = float(np.mean(inv[:, -1] >= I0 / 2 * unfilled))
    neg = {k: float(np.mean(q.inventory[q.valid, -1] < 0)) for k, q in out.items() if k > 1}
    b_ok = all(v > 0 for v in neg.values())
    c_ok = all(
        np.array_equal(q.cash[:, -1], q.market_cash.sum(1) + q.fill_cash.sum(1))
        and np.array_equal(q.inventory[:, -1], I0 + q.market_qty.sum(1) + q.fill_qty.sum(1))
        for q in out.values()
    )
    verdict(7, a_ok and b_ok and c_ok,
            f"(a) k=0.5 per-step cap and I>=0 hold={a_ok}, min pre-terminal I={inv[:, -1].min()}, "
            f"share with I_T>=I0/2*(1-fill ratio)={share:.2f}; "
            f"(b) negative share {', '.join(f'k={k:g}: {v:.3f}' for k, v in neg.items())}; (c) exact={c_ok}")


def test_8_naive_identity(verdict, shared):
    _, train, test = shared
    p = naive_resample(train, test, 21, 5000, 1)
    a, b = step_pairs(p)
    static, change = st.volume_correlations(a, b)
    gap = np.nanmax(np.abs(change - static))
    verdict(8, gap <= 0.02, f"max |corr(change) - corr(static)| = {gap:.4f} over {len(a)} draws")


def test_9_distance_monotonicity(verdict, shared):
    _, train, test = shared
    p = KnnSimulator(train, SimConfig(K=20, T_n=60, N=10_000, seed=2)).run(test)
    mean, _ = neighbor_distance_stats(p)
    diff = p.distance[p.valid, 59] - p.distance[p.valid, 0]
    upper = diff.mean() + 1.645 * diff.std(ddof=1) / np.sqrt(len(diff))
    verdict(9, upper <= 0, f"mean distance step 0 {mean[0]:.3f}, step 59 {mean[59]:.3f}; "
                           f"95% upper bound of the difference {upper:.4f}")


def test_10_thread_invariance(verdict, tmp_path):
    ds = tmp_path / "ds.bin"
    write_dataset(synth_dataset(SynthParams(seed=5), 20_000), ds)
    counts = sorted({1, 4, os.cpu_count() or 1})
    same = True
    for strat in ("noop", "twap:P=500,horizon=30"):
        blobs = []
        for th in counts:
            out = tmp_path / f"p{th}.bin"
            rc = cli_main(["simulate", "--dataset", str(ds), "--paths", "2000", "--steps", "60",
                           "--seed", "7", "--strategy", strat, "--threads", str(th), "--out", str(out)])
            same &= rc == 0
            blobs.append(out.read_bytes())
        same &= all(b == blobs[0] for b in blobs)
    verdict(10, same, f"byte-identical archives for threads {counts}, noop and twap")


def test_11_throughput(verdict, shared):
    ts, _, _ = shared
    t0 = time.perf_counter()
    sim = KnnSimulator(ts, SimConfig(K=20, T_n=60, N=10_000, seed=0, threads=os.cpu_count() or 1))
    p = sim.run(ts)
    secs = time.perf_counter() - t0
    ok = p.valid.all() and secs < 600
    verdict(11, ok, f"10000 x 60 over {len(ts)} samples in {secs:.0f}s on {os.cpu_count()} core(s)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
