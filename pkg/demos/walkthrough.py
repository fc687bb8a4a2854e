"""End-to-end tour: synthetic data, resampling, the naive benchmark, and the
comparison tables. Sizes are kept small so it finishes in about a minute."""
import argparse
import time

import numpy as np
import pandas as pd

from lobknn import stats as st
from lobknn.bench_naive import naive_resample
from lobknn.dataset import split_dataset
from lobknn.knn_engine import (
    KnnSimulator, SimConfig, continuation_starts, historical_paths, neighbor_distance_stats,
)
from lobknn.synth import SynthParams, synth_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=40_000, help="transitions per contract")
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    pd.set_option("display.width", 120)

    t0 = time.perf_counter()
    ts = synth_dataset(SynthParams(seed=args.seed), args.samples)
    train, test = split_dataset(ts)
    print(f"{len(ts)} transitions ({len(train)} train / {len(test)} held out) "
          f"in {time.perf_counter() - t0:.1f}s")

    pool = continuation_starts(test, args.steps)
    cfg = SimConfig(K=20, T_n=args.steps, N=args.paths, seed=args.seed)
    knn = KnnSimulator(train, cfg).run(test, None, pool)
    naive = naive_resample(train, test, args.steps, args.paths, args.seed, pool)
    real = historical_paths(test, knn.init_index, args.steps)

    print("\nreturn correlation with the real continuation (same starting books)")
    pick = [0, 4, 9, args.steps - 1]
    both = pd.concat({
        "knn": st.return_correlation_over_time(real, knn).iloc[pick].set_index("step")[["corr", "p_value"]],
        "naive": st.return_correlation_over_time(real, naive).iloc[pick].set_index("step")[["corr", "p_value"]],
    }, axis=1)
    print(both.round(4).to_string())

    print("\nmean KS statistic against held-out paths")
    fr = st.path_features(real, steps=(1, 10, args.steps))
    batch = min(1000, args.paths // 2)
    ks = pd.DataFrame({
        "knn": st.ks_benchmark_table(fr, st.path_features(knn, (1, 10, args.steps)), batch).set_index("feature")["mean"],
        "naive": st.ks_benchmark_table(fr, st.path_features(naive, (1, 10, args.steps)), batch).set_index("feature")["mean"],
    })
    print(ks.round(3).to_string())

    mean, q95 = neighbor_distance_stats(knn)
    print(f"\nmatch distance: step 0 mean {mean[0]:.2f} (q95 {q95[0]:.2f}), "
          f"last step mean {mean[-1]:.2f} (q95 {q95[-1]:.2f})")

    for name, p in (("real", real), ("knn", knn), ("naive", naive)):
        r = st.return_quantile_paths(p).frame().iloc[-1]
        print(f"{name:>5} terminal log return: mean {r['mean']:+.2e}, "
              f"50% band [{r['q0.25']:+.2e}, {r['q0.75']:+.2e}]")


if __name__ == "__main__":
    main()
