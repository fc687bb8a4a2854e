import numpy as np
import pytest

from lobknn.bench_naive import naive_resample, step_pairs
from lobknn.knn_engine import EmptyTrainSet, DimensionMismatch, STREAM_STEP, step_rng
from lobknn.lob_core import imbalances_many
from lobknn.stats import volume_correlations
from lobknn.synth import SynthParams, synth_dataset
from handmade import chain, hand_set


@pytest.fixture(scope="module")
def synth():
    return synth_dataset(SynthParams(n_contracts=2, up_prob=0.5, seed=8), 3000)


def test_single_up_transition_gives_linear_path():
    v = [[3, 4, 5, 6]]
    ts = hand_set(v, v, [100], [101])
    p = naive_resample(ts, ts, T_n=12, N=7, seed=3)
    np.testing.assert_array_equal(p.bid_ticks, np.tile(100 + np.arange(13), (7, 1)))
    r = np.log(p.mids()[:, 1:]) - np.log(p.mids()[:, :1])
    assert np.all(np.diff(p.mids(), axis=1) == 1)
    assert np.all(r > 0)
    assert np.isnan(p.distance).all()


def test_mean_increment_matches_training_mean(synth):
    N, T = 2000, 20
    p = naive_resample(synth, synth, T_n=T, N=N, seed=1)
    inc = np.diff(p.bid_ticks, axis=1)
    mu, sd = synth.increments.mean(), synth.increments.std()
    assert abs(inc.mean() - mu) < 3 * sd / np.sqrt(N * T)


def test_draws_follow_the_shared_stream(synth):
    p = naive_resample(synth, synth, T_n=3, N=50, seed=9)
    u = step_rng(9, STREAM_STEP, 2).random(50)
    np.testing.assert_array_equal(p.neighbor[:, 2], (u * len(synth)).astype(np.int64))


def test_determinism(synth):
    a = naive_resample(synth, synth, T_n=5, N=100, seed=4)
    b = naive_resample(synth, synth, T_n=5, N=100, seed=4)
    c = naive_resample(synth, synth, T_n=5, N=100, seed=5)
    np.testing.assert_array_equal(a.volumes, b.volumes)
    np.testing.assert_array_equal(a.bid_ticks, b.bid_ticks)
    assert not np.array_equal(a.neighbor, c.neighbor)


def test_increments_ignore_current_obi(synth):
    p = naive_resample(synth, synth, T_n=10, N=2000, seed=2)
    obi = imbalances_many(p.volumes[:, :-1]).ravel()
    inc = np.diff(p.bid_ticks, axis=1).ravel()
    r = np.corrcoef(obi, inc)[0, 1]
    assert abs(r) < 3 / np.sqrt(len(inc))
    # the training data itself carries the dependence the benchmark discards
    r_hist = np.corrcoef(imbalances_many(synth.before), synth.increments)[0, 1]
    assert abs(r_hist) > 3 / np.sqrt(len(synth))


def test_change_correlation_equals_static(synth):
    p = naive_resample(synth, synth, T_n=6, N=4000, seed=6)
    a, b = step_pairs(p)
    assert len(a) == 4000 * 5
    static, change = volume_correlations(a, b)
    np.testing.assert_allclose(change, static, atol=0.05)


def test_errors():
    with pytest.raises(EmptyTrainSet):
        naive_resample(chain(3).take(slice(0, 0)), chain(3))
    with pytest.raises(DimensionMismatch):
        naive_resample(chain(3, levels=2), chain(3, levels=3))


def test_init_pool_is_respected(synth):
    p = naive_resample(synth, synth, T_n=2, N=300, seed=0, init_pool=[5, 17])
    assert set(p.init_index.tolist()) == {5, 17}
    np.testing.assert_array_equal(p.volumes[:, 0], synth.before[p.init_index])
