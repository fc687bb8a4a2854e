"""Evaluation statistics for simulated and historical paths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats as sps

from .lob_core import imbalances_many, normalize_volume, signed_volumes_many


class EmptySample(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


class UnpairedPaths(ValueError):
    pass


class EmptyBand(ValueError):
    pass


class DegenerateGrid(ValueError):
    pass


QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
KS_STEPS = (1, 10, 30, 60)


@dataclass
class Ecdf:
    values: np.ndarray

    def __init__(self, sample):
        a = np.sort(np.asarray(sample, dtype=np.float64).ravel())
        if len(a) == 0:
            raise EmptySample("ECDF of an empty sample")
        self.values = a

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / len(self.values)


def ks_statistic(a, b) -> float:
    """sup_x |F_a(x) - F_b(x)|, evaluated at every jump point."""
    fa, fb = Ecdf(a), Ecdf(b)
    pts = np.concatenate([fa.values, fb.values])
    return float(np.max(np.abs(fa(pts) - fb(pts))))


# -- per-path features ---------------------------------------------------------------


def _log_returns(prices):
    prices = np.asarray(prices, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.log(prices) - np.log(prices[:, :1])


def path_features(paths, steps=KS_STEPS) -> dict[str, np.ndarray]:
    """The one-dimensional features compared between real and simulated paths.

    Sizes are signed normalized volumes one transition ahead, laid out on the
    initial window; returns are log-returns from step 0.
    """
    vol = paths.volumes
    l = vol.shape[2] // 2
    signed, _ = signed_volumes_many(paths.bid_ticks[:, 0], vol[:, 1], paths.bid_ticks[:, 1])
    nv = normalize_volume(signed)
    out = {
        "bidSize1": nv[:, l - 1], "bidSize2": nv[:, l - 2],
        "askSize1": nv[:, l], "askSize2": nv[:, l + 1],
        "obi": imbalances_many(vol[:, 1]),
    }
    mid = _log_returns(paths.mids())
    wmid = _log_returns(paths.weighted_mids())
    for s in steps:
        if s <= paths.steps:
            out[f"mid_return_{s}"] = mid[:, s]
            out[f"weighted_return_{s}"] = wmid[:, s]
    return out


def ks_benchmark_table(real: dict, sim: dict, batch: int = 1000, repeats: int = 10, seed: int = 0,
                       features=None) -> pd.DataFrame:
    """Mean and standard deviation of KS statistics over ``repeats`` random batches."""
    rng = np.random.default_rng(seed)
    rows = []
    for name in features or [k for k in real if k in sim]:
        a = np.asarray(real[name], dtype=np.float64)
        b = np.asarray(sim[name], dtype=np.float64)
        a, b = a[np.isfinite(a)], b[np.isfinite(b)]
        if len(a) < batch or len(b) < batch:
            raise InsufficientSamples(f"{name}: need {batch} samples, have {len(a)} and {len(b)}")
        ks = [ks_statistic(rng.choice(a, batch, replace=False), rng.choice(b, batch, replace=False))
              for _ in range(repeats)]
        rows.append({"feature": name, "mean": float(np.mean(ks)),
                     "std": float(np.std(ks, ddof=1)) if repeats > 1 else 0.0})
    return pd.DataFrame(rows)


def volume_marginals(paths, levels=(0, 1), bins=None):
    """Histograms of signed normalized volumes one transition ahead.

    ``levels`` counts ticks away from the initial dividing price (0 = best).
    Returns ``(histograms, mean_shape)`` with histograms keyed by column name.
    """
    vol = paths.volumes
    l = vol.shape[2] // 2
    signed, _ = signed_volumes_many(paths.bid_ticks[:, 0], vol[:, 1], paths.bid_ticks[:, 1])
    nv = normalize_volume(signed)
    if bins is None:
        lim = max(float(np.abs(nv).max()), 1e-9)
        bins = np.linspace(-lim, lim, 41)
    hists = {}
    for k in levels:
        for name, col in ((f"bid_{k}", l - 1 - k), (f"ask_{k}", l + k)):
            counts, edges = np.histogram(nv[:, col], bins=bins)
            hists[name] = (counts, edges)
    return hists, nv.mean(axis=0)


def _corr(x):
    """Pearson correlation by the direct formula; NaN where a column is constant."""
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean(axis=0)
    ss = np.sqrt((xc ** 2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (xc.T @ xc) / np.outer(ss, ss)
    c[:, ss == 0] = np.nan
    c[ss == 0, :] = np.nan
    return c


def volume_correlations(before, after):
    """Correlations of static level volumes and of one-transition volume changes.

    Both inputs are (n, 2l) volume matrices on the same window layout.
    """
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if len(before) < 2:
        raise InsufficientSamples("need at least two transitions")
    return _corr(before), _corr(after - before)


# -- return dynamics -------------------------------------------------------------------


@dataclass
class QuantilePathTable:
    steps: np.ndarray
    mean: np.ndarray
    quantiles: dict

    def frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"step": self.steps, "mean": self.mean})
        for q, v in self.quantiles.items():
            df[f"q{q:g}"] = v
        return df


def return_quantile_paths(paths, price_kind="mid", quantiles=QUANTILES) -> QuantilePathTable:
    prices = paths.mids() if price_kind == "mid" else paths.weighted_mids()
    r = _log_returns(prices[paths.valid])
    if r.shape[1] < 2:
        raise InsufficientSamples("need paths with at least one step")
    return _quantile_table(r, quantiles)


def _quantile_table(r, quantiles):
    qs = {q: np.quantile(r, q, axis=0, method="linear") for q in quantiles}
    return QuantilePathTable(np.arange(r.shape[1]), r.mean(axis=0), qs)


def pearson_with_ci(x, y, level=0.95):
    """Correlation, Fisher-z confidence interval and two-sided p-value against 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n < 4:
        return np.nan, np.nan, np.nan, np.nan
    xc, yc = x - x.mean(), y - y.mean()
    den = np.sqrt((xc ** 2).sum() * (yc ** 2).sum())
    if den == 0:
        return np.nan, np.nan, np.nan, np.nan
    r = float(np.clip((xc * yc).sum() / den, -1.0, 1.0))
    se = 1 / np.sqrt(n - 3)
    zc = sps.norm.ppf(0.5 + level / 2)
    if abs(r) == 1.0:
        return r, r, r, 0.0
    z = np.arctanh(r)
    p = 2 * sps.norm.sf(abs(z) / se)
    return r, float(np.tanh(z - zc * se)), float(np.tanh(z + zc * se)), float(p)


def return_correlation_over_time(real_paths, sim_paths, price_kind="mid", level=0.95) -> pd.DataFrame:
    """Per-step correlation of real and simulated returns from shared initial states."""
    if real_paths.n_paths != sim_paths.n_paths:
        raise UnpairedPaths("real and simulated path counts differ")
    if real_paths.steps > sim_paths.steps:
        raise UnpairedPaths("simulated paths are shorter than the real ones")
    get = (lambda p: p.mids()) if price_kind == "mid" else (lambda p: p.weighted_mids())
    rr = _log_returns(get(real_paths))
    rs = _log_returns(get(sim_paths))
    ok = real_paths.valid & sim_paths.valid
    rows = []
    for s in range(1, real_paths.steps + 1):
        m = ok & np.isfinite(rr[:, s]) & np.isfinite(rs[:, s])
        r, lo, hi, p = pearson_with_ci(rr[m, s], rs[m, s], level)
        rows.append({"step": s, "corr": r, "ci_low": lo, "ci_high": hi, "p_value": p, "n": int(m.sum())})
    return pd.DataFrame(rows)


def obi_bands(obi, bands=((0.0, 0.05), (0.95, 1.0))):
    """Masks selecting paths whose initial OBI lies in the given quantile bands."""
    obi = np.asarray(obi, dtype=np.float64)
    out = []
    for lo, hi in bands:
        a, b = np.quantile(obi, [lo, hi])
        out.append((obi >= a) & (obi <= b))
    return out


def obi_conditioned_returns(paths, bands=((0.0, 0.05), (0.95, 1.0)), price_kind="mid",
                            quantiles=QUANTILES, obi=None) -> list[QuantilePathTable]:
    """Return quantile paths per initial-OBI quantile band."""
    if obi is None:
        obi = imbalances_many(paths.volumes[:, 0])
    prices = paths.mids() if price_kind == "mid" else paths.weighted_mids()
    r = _log_returns(prices)
    out = []
    for mask in obi_bands(obi, bands):
        mask = mask & paths.valid
        if not mask.any():
            raise EmptyBand("no path in OBI band")
        out.append(_quantile_table(r[mask], quantiles))
    return out


# -- impact ---------------------------------------------------------------------------


def central_trim(values, groups, lo=0.25, hi=0.75):
    """Mask keeping, within each group, the values ranked in the [lo, hi] quantile range."""
    values = np.asarray(values, dtype=np.float64)
    groups = np.asarray(groups)
    keep = np.zeros(len(values), bool)
    for g in np.unique(groups):
        idx = np.flatnonzero(groups == g)
        order = idx[np.argsort(values[idx], kind="stable")]
        n = len(order)
        a, b = int(np.floor(lo * n)), int(np.ceil(hi * n))
        keep[order[a:b]] = True
    return keep


@dataclass
class ImpactCurve:
    gammas: np.ndarray
    corr: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    gamma_star: float
    corr_star: float
    slope: float
    intercept: float
    slope_ci: tuple
    intercept_ci: tuple
    n: int

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"gamma": self.gammas, "corr": self.corr, "abs_corr": np.abs(self.corr),
                             "ci_low": self.ci_low, "ci_high": self.ci_high})


def impact_gamma_sweep(parent_sizes, book_volumes, returns, gamma_grid, trim=True,
                       fit_gamma=0.5) -> ImpactCurve:
    """Correlation of terminal returns with (P / V)^gamma over a gamma grid.

    With ``trim`` only the central quartiles of returns within each parent
    size are kept. ``gamma_star`` minimizes the correlation, the sell-side
    convention where impact is negative. The OLS fit regresses returns on (P / V)^fit_gamma.
    """
    P = np.asarray(parent_sizes, dtype=np.float64)
    V = np.asarray(book_volumes, dtype=np.float64)
    r = np.asarray(returns, dtype=np.float64)
    gam = np.asarray(gamma_grid, dtype=np.float64)
    if len(gam) < 2 or np.any(np.diff(gam) <= 0):
        raise DegenerateGrid("gamma grid needs at least two increasing values")
    ok = np.isfinite(r) & (P > 0) & (V > 0)
    P, V, r = P[ok], V[ok], r[ok]
    if len(np.unique(P)) < 2:
        raise DegenerateGrid("need at least two distinct parent sizes")
    if trim:
        keep = central_trim(r, P)
        P, V, r = P[keep], V[keep], r[keep]
    x = P / V
    res = [pearson_with_ci(x ** g, r, 0.99) for g in gam]
    corr = np.array([c[0] for c in res])
    i = int(np.nanargmin(corr))
    z = x ** fit_gamma
    lr = sps.linregress(z, r)
    t = sps.t.ppf(0.975, len(r) - 2)
    return ImpactCurve(
        gam, corr, np.array([c[1] for c in res]), np.array([c[2] for c in res]),
        float(gam[i]), float(corr[i]), float(lr.slope), float(lr.intercept),
        (lr.slope - t * lr.stderr, lr.slope + t * lr.stderr),
        (lr.intercept - t * lr.intercept_stderr, lr.intercept + t * lr.intercept_stderr), len(r),
    )


def bucket_means(values, groups, trim=True):
    """Mean of ``values`` per group, optionally over the central quartiles only."""
    values = np.asarray(values, dtype=np.float64)
    groups = np.asarray(groups)
    keep = central_trim(values, groups) if trim else np.ones(len(values), bool)
    keys = np.unique(groups)
    return keys, np.array([values[keep & (groups == g)].mean() for g in keys])


# -- execution -------------------------------------------------------------------------


def box_stats(x, quantiles=QUANTILES) -> dict:
    x = np.asarray(x, dtype=np.float64)
    x = x[np.isfinite(x)]
    if len(x) == 0:
        return {**{f"q{q:g}": np.nan for q in quantiles}, "mean": np.nan}
    return {**{f"q{q:g}": float(np.quantile(x, q)) for q in quantiles}, "mean": float(x.mean())}


def execution_summaries(paths, label="") -> dict:
    """Executed volume per transition, fill ratio, final inventory and relative cash.

    Relative cash is final cash divided by the initial inventory minus the
    initial mid, both in ticks; it is NaN for paths without initial inventory.
    """
    v = paths.valid
    filled = np.abs(paths.fill_qty[v]).sum(axis=1)
    posted = paths.posted_qty[v].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(posted > 0, filled / posted, np.nan)
    i0 = paths.inventory[v, 0].astype(np.float64)
    mid0 = paths.mids()[v, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        rel_cash = np.where(i0 != 0, paths.final_cash[v] / i0 - mid0, np.nan)
    return {
        "label": label,
        "n_valid": int(v.sum()),
        "n_invalid": int((~v).sum()),
        "executed_per_transition": box_stats(filled / paths.steps),
        "fill_ratio": box_stats(ratio),
        "pre_terminal_inventory": box_stats(paths.inventory[v, -1]),
        "final_inventory": box_stats(paths.final_inventory[v]),
        "relative_cash": box_stats(rel_cash),
    }


def summaries_frame(summaries) -> pd.DataFrame:
    rows = []
    for s in summaries:
        for metric in ("executed_per_transition", "fill_ratio", "pre_terminal_inventory",
                       "final_inventory", "relative_cash"):
            rows.append({"label": s["label"], "metric": metric, **s[metric],
                         "n_valid": s["n_valid"], "n_invalid": s["n_invalid"]})
    return pd.DataFrame(rows)
