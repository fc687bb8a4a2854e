"""Quote k times the inventory on the best opposite level and compare k."""
import argparse

from lobknn import stats as st
from lobknn.agents import InventoryMultipleLiquidation
from lobknn.dataset import split_dataset
from lobknn.knn_engine import KnnSimulator, SimConfig, continuation_starts
from lobknn.synth import SynthParams, synth_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=40_000)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--steps", type=int, default=30)
    ap.add_argument("--inventory", type=int, default=40)
    ap.add_argument("--mechanism", choices=["allocation", "prorata"], default="allocation")
    args = ap.parse_args()

    train, test = split_dataset(synth_dataset(SynthParams(), args.samples))
    sim = KnnSimulator(train, SimConfig(T_n=args.steps, N=args.paths, mechanism=args.mechanism))
    pool = continuation_starts(test, args.steps)
    rows = []
    for k in (0.5, 1.0, 1.25, 2.5):
        p = sim.run(test, InventoryMultipleLiquidation(k, args.inventory), pool)
        s = st.execution_summaries(p, f"k={k:g}")
        neg = (p.inventory[p.valid, -1] < 0).mean()
        rows.append((s["label"], s["pre_terminal_inventory"]["mean"], neg,
                     s["relative_cash"]["q0.5"], s["fill_ratio"]["mean"]))
    print(f"{'k':>7} {'mean I_T':>9} {'I_T<0':>7} {'median rel. cash':>17} {'fill ratio':>11}")
    for label, inv, neg, cash, fr in rows:
        print(f"{label:>7} {inv:9.2f} {neg:7.3f} {cash:17.3f} {fr:11.3f}")


if __name__ == "__main__":
    main()
