import numpy as np
import pytest

from lobknn.dataset import TRADE, build_transitions, read_event_csv, replay_stream, write_event_csv
from lobknn.lob_core import imbalances_many
from lobknn.stats import ks_statistic
from lobknn.synth import SynthParams, generate_contracts, generate_events, synth_dataset


def analytic_drift(p: SynthParams, before):
    """Expected next increment implied by the generator's own law."""
    l = p.levels
    g = np.where(before[:, l - 2] > before[:, l + 1], 1, -1)
    db = np.maximum(0, p.level1 - before[:, l - 1]) / p.level1
    da = np.maximum(0, p.level1 - before[:, l]) / p.level1
    mu = p.regime_drift * g + p.impact_coef * (da ** p.impact_exponent - db ** p.impact_exponent)
    return p.move_prob * np.clip(mu, -0.95, 0.95)


def test_fixed_seed_determinism():
    p = SynthParams(n_contracts=2, up_prob=0.5)
    a, b = generate_events(p, 5000, 1), generate_events(p, 5000, 1)
    for f in ("seq", "kind", "side", "price_tick", "qty", "level_volume", "priority_qty"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    c = generate_events(SynthParams(n_contracts=2, up_prob=0.5, seed=9), 5000, 1)
    assert not np.array_equal(a.price_tick, c.price_tick)


def test_truncation_and_length():
    p = SynthParams()
    assert len(generate_events(p, 123)) == 123
    assert len(generate_events(p, 0)) == 0


def test_stream_is_consistent_with_replay():
    p = SynthParams(n_contracts=1, up_prob=0.5)
    s = generate_events(p, 200 * p.interval)
    snaps, bids, lae = replay_stream(s, p.interval, p.levels)  # raises on a negative book
    tr = s.kind == TRADE
    np.testing.assert_array_equal(s.level_volume[tr], lae[tr])
    assert np.all(s.priority_qty[tr] <= s.level_volume[tr])
    assert np.all(s.qty > 0)
    # every boundary after the first has volume on both sides
    assert np.all(snaps[1:, :p.levels].sum(1) > 0) and np.all(snaps[1:, p.levels:].sum(1) > 0)


def test_csv_roundtrip(tmp_path):
    p = SynthParams(n_contracts=1, up_prob=0.5)
    s = generate_events(p, 2000)
    path = tmp_path / f"{s.name}.csv"
    write_event_csv(s, path)
    back = read_event_csv(path)
    a = build_transitions(s, p.interval, p.levels)
    b = build_transitions(back, p.interval, p.levels)
    np.testing.assert_array_equal(a.before, b.before)
    np.testing.assert_array_equal(a.trades, b.trades)


def test_no_drift_means_no_obi_signal():
    p = SynthParams(regime_drift=0.0, impact_coef=0.0, n_contracts=1, up_prob=0.5)
    ts = synth_dataset(p, 2000)
    r = np.corrcoef(imbalances_many(ts.before), ts.increments)[0, 1]
    assert abs(r) < 3 / np.sqrt(len(ts))


def test_positive_drift_gives_significant_obi_signal():
    p = SynthParams(regime_drift=0.0, n_contracts=1, up_prob=0.5)
    ts = synth_dataset(p, 100_000 // p.interval)
    r = np.corrcoef(imbalances_many(ts.before), ts.increments)[0, 1]
    assert r * np.sqrt(len(ts)) > 4


def test_increments_follow_the_analytic_law():
    p = SynthParams(n_contracts=1, up_prob=0.5)
    ts = synth_dataset(p, 60_000)
    mu = analytic_drift(p, ts.before)
    inc = ts.increments.astype(float)
    edges = np.quantile(mu, np.linspace(0, 1, 11))
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (mu >= lo) & (mu <= hi)
        se = inc[m].std() / np.sqrt(m.sum())
        assert abs(inc[m].mean() - mu[m].mean()) < 4 * se + 1e-3


def test_concave_impact_exponent():
    p = SynthParams(regime_drift=0.0, n_contracts=1, up_prob=0.5)
    ts = synth_dataset(p, 100_000)
    l = p.levels
    db = p.level1 - ts.before[:, l - 1]
    clean = ts.before[:, l] == p.level1
    inc = ts.increments.astype(float)
    qs, means = [], []
    for lo, hi in [(5, 15), (15, 40), (40, 100), (100, 250)]:
        m = clean & (db >= lo) & (db < hi)
        qs.append(db[m].mean())
        means.append(-inc[m].mean())
    slope = np.polyfit(np.log(qs), np.log(means), 1)[0]
    assert abs(slope - p.impact_exponent) < 0.1


def test_stationary_volume_marginals():
    p = SynthParams(n_contracts=1, up_prob=0.5)
    ts = synth_dataset(p, 20_000)
    half = len(ts) // 2
    for col in range(2 * p.levels):
        assert ks_statistic(ts.before[:half, col], ts.before[half:, col]) < 0.03


def test_contracts_get_distinct_streams():
    p = SynthParams(n_contracts=3, up_prob=(0.5, 0.5, 0.9))
    s = generate_contracts(p, 1000)
    assert [x.contract_id for x in s] == [0, 1, 2]
    assert not np.array_equal(s[0].price_tick, s[1].price_tick)


def test_param_validation():
    with pytest.raises(ValueError):
        SynthParams(up_prob=(0.5, 0.5))
    with pytest.raises(ValueError):
        SynthParams(move_prob=1.5)
    with pytest.raises(ValueError):
        SynthParams(shock_max=5000)
    with pytest.raises(ValueError):
        SynthParams(interval=8)


def test_from_config(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[synth]\nn_contracts = 2\nup_prob = 0.5, 0.7\nimpact_coef = 0.9\nseed = 4\n")
    p = SynthParams.from_config(cfg)
    assert (p.n_contracts, p.up_prob, p.impact_coef, p.seed) == (2, (0.5, 0.7), 0.9, 4)
    cfg.write_text("[synth]\nbogus = 1\n")
    with pytest.raises(ValueError):
        SynthParams.from_config(cfg)
