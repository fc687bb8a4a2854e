"""Command-line entry point.

Every flag can also come from an INI file given with ``--config``; keys live
in a section named after the subcommand (dashes or underscores both work) and
flags given on the command line win.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import stats as st
from .agents import TwapMarketLiquidation, InventoryMultipleLiquidation, parse_strategy
from .bench_naive import naive_resample, step_pairs
from .dataset import (
    DatasetFormatError, InsufficientHistory, MalformedStream, build_transitions, read_dataset,
    read_event_csv, split_dataset, write_dataset, write_event_csv,
)
from .knn_engine import (
    KnnSimulator, PcaFeatures, SimConfig, continuation_starts, historical_paths,
    neighbor_distance_stats, read_paths, write_paths,
)
from .synth import SynthParams, generate_contracts

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SIM = 0, 2, 3, 4
DATA_ERRORS = (DatasetFormatError, MalformedStream, InsufficientHistory, FileNotFoundError,
               IsADirectoryError, pd.errors.ParserError, pd.errors.EmptyDataError)


class UsageError(Exception):
    pass


def _floats(spec: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (stop inclusive) or ``a..b`` (step 0.25)."""
    spec = spec.strip()
    if ":" in spec or ".." in spec:
        if ".." in spec:
            lo, hi = spec.split("..")
            a, b, step = float(lo), float(hi), 0.25
        else:
            parts = spec.split(":")
            if len(parts) != 3:
                raise UsageError(f"bad range {spec!r}")
            a, b, step = map(float, parts)
        if step <= 0 or b < a:
            raise UsageError(f"bad range {spec!r}")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 10) for i in range(n)]
    try:
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {spec!r}") from exc


def _ints(spec: str) -> list[int]:
    vals = _floats(spec)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers in {spec!r}")
    return [int(v) for v in vals]


def _sim_args(p, steps=60, paths=1000):
    p.add_argument("--dataset", required=True)
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--paths", type=int, default=paths)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.8)


def _knn_args(p):
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--mechanism", choices=["allocation", "prorata"], default="allocation")
    p.add_argument("--features", choices=["raw", "pca"], default="raw")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lobknn", description="Nearest-neighbor order book resampling.")
    ap.add_argument("--config", help="INI file; one section per subcommand")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="event CSVs to a transition dataset")
    p.add_argument("--events", required=True, help="directory of event CSV files, or one file")
    p.add_argument("--interval", type=int, default=250)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--keep-one-sided", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="synthetic event streams")
    p.add_argument("--params", help="INI file with a [synth] section")
    p.add_argument("--events", type=int, required=True, help="events per contract")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="nearest-neighbor resampling")
    _sim_args(p)
    _knn_args(p)
    p.add_argument("--strategy", default="noop")
    p.add_argument("--out", required=True)

    p = sub.add_parser("naive", help="uniform unconditional resampling")
    _sim_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("stats", help="evaluation tables")
    p.add_argument("report", choices=["marginals", "correlations", "returns", "return-corr",
                                      "obi-conditioned", "ks-table", "distances"])
    p.add_argument("--real", help="path archive or dataset")
    p.add_argument("--sim", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--price", choices=["mid", "weighted"], default="mid")
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("impact", help="TWAP market-order impact and gamma sweep")
    _sim_args(p, steps=30, paths=5000)
    _knn_args(p)
    p.add_argument("--sizes", default="300,500,1000,2000,3000")
    p.add_argument("--gamma-grid", default="0.1:1.5:0.05")
    p.add_argument("--horizon", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("calibrate", help="inventory-multiple quoting study")
    _sim_args(p, steps=30, paths=5000)
    _knn_args(p)
    p.add_argument("--multipliers", default="0.5,1.0,1.25,2.5")
    p.add_argument("--inventory", type=int, default=40)
    p.add_argument("--out", required=True)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    cp = configparser.ConfigParser()
    if not cp.read(known.config):
        raise FileNotFoundError(known.config)
    cmd = next((a for a in rest if not a.startswith("-")), None)
    subs = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction)).choices
    if cmd not in subs or cmd not in cp:
        return
    sp = subs[cmd]
    dests = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, raw in cp[cmd].items():
        dest = key.replace("-", "_")
        if dest not in dests:
            raise UsageError(f"unknown key {key!r} in [{cmd}]")
        act = dests[dest]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[dest] = cp[cmd].getboolean(key)
        else:
            defaults[dest] = act.type(raw) if act.type else raw
        act.required = False
    sp.set_defaults(**defaults)


# -- subcommands --------------------------------------------------------------------


def _load_split(args):
    ts = read_dataset(args.dataset)
    train, test = split_dataset(ts, args.train_fraction)
    if len(train) == 0 or len(test) == 0:
        raise InsufficientHistory("dataset too small for the requested split")
    return ts, train, test


def _init_pool(test, steps):
    """Initial states with a full historical continuation when there are any."""
    pool = continuation_starts(test, steps)
    return pool if len(pool) else None


def _simulator(args, ts, train):
    cfg = SimConfig(K=args.k, T_n=args.steps, N=args.paths, mechanism=args.mechanism,
                    seed=args.seed, feature_mode=args.features, threads=max(1, args.threads))
    feats = PcaFeatures(ts, len(train)) if args.features == "pca" else None
    return KnnSimulator(train, cfg, feats)


def cmd_ingest(args):
    src = Path(args.events)
    files = sorted(src.glob("*.csv")) if src.is_dir() else [src]
    if not files:
        raise FileNotFoundError(f"no event CSV files under {src}")
    streams = [read_event_csv(f) for f in files]
    ts = build_transitions(streams, args.interval, args.levels, require_two_sided=not args.keep_one_sided)
    write_dataset(ts, args.out)
    print(f"{len(ts)} transitions from {len(streams)} streams -> {args.out}")


def cmd_synth(args):
    params = SynthParams.from_config(args.params) if args.params else SynthParams()
    if args.seed is not None:
        params.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in generate_contracts(params, args.events):
        write_event_csv(s, out / f"{s.name}.csv")
    print(f"{params.n_contracts} streams of {args.events} events -> {out}")


def cmd_simulate(args):
    ts, train, test = _load_split(args)
    sim = _simulator(args, ts, train)
    pool = None if args.features == "pca" else _init_pool(test, args.steps)
    paths = sim.run(test, parse_strategy(args.strategy), pool)
    paths.meta.update({"dataset": Path(args.dataset).name, "train_fraction": args.train_fraction})
    write_paths(paths, args.out)
    print(f"{int(paths.valid.sum())}/{paths.n_paths} valid paths -> {args.out}")


def cmd_naive(args):
    _, train, test = _load_split(args)
    paths = naive_resample(train, test, args.steps, args.paths, args.seed, _init_pool(test, args.steps))
    paths.meta.update({"dataset": Path(args.dataset).name, "train_fraction": args.train_fraction})
    write_paths(paths, args.out)
    print(f"{paths.n_paths} naive paths -> {args.out}")


def _is_dataset(path):
    with open(path, "rb") as fh:
        return fh.read(8) == b"LOBKNNDS"


def _real_paths(args, sim, paired):
    """Real paths: an archive as is, or historical continuations from a dataset.

    Paired reports take the continuations of the simulated initial states.
    """
    if args.real is None:
        raise UsageError("--real is required for this report")
    if not _is_dataset(args.real):
        return read_paths(args.real)
    _, test = split_dataset(read_dataset(args.real), sim.meta.get("train_fraction", args.train_fraction))
    starts = continuation_starts(test, sim.steps)
    if paired:
        bad = ~np.isin(sim.init_index, starts)
        if bad.any():
            raise InsufficientHistory(f"{int(bad.sum())} initial states lack a historical continuation")
        starts = sim.init_index
    if len(starts) == 0:
        raise InsufficientHistory("no historical continuation long enough")
    return historical_paths(test, starts, sim.steps)


def cmd_stats(args):
    sim = read_paths(args.sim)
    rep = args.report
    if rep == "distances":
        mean, q95 = neighbor_distance_stats(sim)
        df = pd.DataFrame({"step": np.arange(sim.steps), "mean": mean, "q95": q95})
    elif rep == "returns":
        frames = []
        for label, p in [("sim", sim)] + ([("real", _real_paths(args, sim, False))] if args.real else []):
            f = st.return_quantile_paths(p, args.price).frame()
            f.insert(0, "source", label)
            frames.append(f)
        df = pd.concat(frames, ignore_index=True)
    elif rep == "return-corr":
        df = st.return_correlation_over_time(_real_paths(args, sim, True), sim, args.price)
    elif rep == "obi-conditioned":
        frames = []
        for band, t in zip(("low", "high"), st.obi_conditioned_returns(sim, price_kind=args.price)):
            f = t.frame()
            f.insert(0, "band", band)
            frames.append(f)
        df = pd.concat(frames, ignore_index=True)
    elif rep == "ks-table":
        real = _real_paths(args, sim, False)
        df = st.ks_benchmark_table(st.path_features(real), st.path_features(sim),
                                   args.batch, args.repeats, args.seed)
    elif rep == "marginals":
        rows = []
        real = _real_paths(args, sim, False) if args.real else None
        lim = max(np.abs(st.path_features(p)["bidSize1"]).max() for p in [sim] + ([real] if real else []))
        bins = np.linspace(-lim - 1e-9, lim + 1e-9, 41)
        for label, p in [("sim", sim)] + ([("real", real)] if real else []):
            hists, _ = st.volume_marginals(p, bins=bins)
            for name, (counts, edges) in hists.items():
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    rows.append({"source": label, "level": name, "bin_low": lo, "bin_high": hi, "count": c})
        df = pd.DataFrame(rows)
    else:  # correlations
        rows = []
        srcs = [("sim", sim)] + ([("real", _real_paths(args, sim, False))] if args.real else [])
        for label, p in srcs:
            static, change = st.volume_correlations(*step_pairs(p, first=1 if p.steps > 1 else 0))
            for kind, m in (("static", static), ("change", change)):
                for i in range(m.shape[0]):
                    for j in range(m.shape[1]):
                        rows.append({"source": label, "kind": kind, "i": i, "j": j, "corr": m[i, j]})
        df = pd.DataFrame(rows)
    df.to_csv(args.out, index=False)
    print(f"{rep}: {len(df)} rows -> {args.out}")


def run_impact(sim, test, sizes, horizon, pool=None):
    """Terminal log mid returns and initial book volumes per parent size."""
    P, V, R = [], [], []
    for size in sizes:
        paths = sim.run(test, TwapMarketLiquidation(size, horizon), pool)
        m = paths.mids()
        ok = paths.valid
        P.append(np.full(ok.sum(), size))
        V.append(paths.volumes[ok, 0].sum(axis=1))
        R.append(np.log(m[ok, -1]) - np.log(m[ok, 0]))
    return np.concatenate(P), np.concatenate(V), np.concatenate(R)


def cmd_impact(args):
    ts, train, test = _load_split(args)
    sizes = _ints(args.sizes)
    horizon = args.horizon or args.steps
    if horizon > args.steps:
        raise UsageError("horizon exceeds the number of steps")
    sim = _simulator(args, ts, train)
    pool = None if args.features == "pca" else _init_pool(test, args.steps)
    P, V, R = run_impact(sim, test, sizes, horizon, pool)
    curve = st.impact_gamma_sweep(P, V, R, _floats(args.gamma_grid))
    keys, means = st.bucket_means(R, P)
    out = Path(args.out)
    df = curve.frame()
    df["gamma_star"] = curve.gamma_star
    df["slope"], df["intercept"] = curve.slope, curve.intercept
    df["slope_low"], df["slope_high"] = curve.slope_ci
    df.to_csv(out, index=False)
    pd.DataFrame({"parent": keys, "trimmed_mean_return": means}).to_csv(
        out.with_name(out.stem + "_by_size.csv"), index=False)
    print(f"gamma*={curve.gamma_star:g} corr={curve.corr_star:.3f} -> {out}")


def cmd_calibrate(args):
    ts, train, test = _load_split(args)
    sim = _simulator(args, ts, train)
    pool = None if args.features == "pca" else _init_pool(test, args.steps)
    sums = []
    for k in _floats(args.multipliers):
        paths = sim.run(test, InventoryMultipleLiquidation(k, args.inventory), pool)
        sums.append(st.execution_summaries(paths, label=f"k={k:g}"))
    df = st.summaries_frame(sums)
    df.to_csv(args.out, index=False)
    print(f"{len(sums)} multipliers -> {args.out}")


COMMANDS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "simulate": cmd_simulate, "naive": cmd_naive,
    "stats": cmd_stats, "impact": cmd_impact, "calibrate": cmd_calibrate,
}


def _fail(code, exc):
    msg = str(exc).replace("\n", " ")
    print(f"error code={code} kind={type(exc).__name__} msg={msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        _apply_config(ap, argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except FileNotFoundError as exc:
        return _fail(EXIT_DATA, exc)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except DATA_ERRORS as exc:
        return _fail(EXIT_DATA, exc)
    except Exception as exc:  # anything else happened while simulating or aggregating
        return _fail(EXIT_SIM, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
