import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intercancel.scaling import (
    cdma,
    default_scales,
    dfa,
    dfa_fluctuation,
    loglog_fit,
    profile,
    shuffle_test,
)
from intercancel.synth import fgn, rng_for

N = 2**16


@pytest.fixture(scope="module")
def white():
    return rng_for(11).standard_normal(N)


@pytest.fixture(scope="module")
def fgn76():
    return fgn(N, 0.76, rng_for(12))


def test_default_scales():
    s = default_scales(N)
    assert len(s) == 20 and s[0] == 10 and s[-1] <= N // 6
    assert np.all(np.diff(s) > 0)
    odd = default_scales(N, smin=11, odd=True)
    assert np.all(odd % 2 == 1) and odd[0] == 11


def test_loglog_fit_exact_power_law():
    s = np.array([10, 20, 40, 80])
    fit = loglog_fit(s, 3.0 * s**0.7)
    assert fit.slope == pytest.approx(0.7, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_dfa_white_noise(white):
    res = dfa(white)
    assert res.hurst == pytest.approx(0.5, abs=0.02)
    assert res.reliable
    assert np.all(np.isfinite(res.fluctuations)) and np.all(res.fluctuations > 0)


def test_cdma_white_noise(white):
    assert cdma(white).hurst == pytest.approx(0.5, abs=0.02)


def test_dfa_fgn(fgn76):
    assert dfa(fgn76).hurst == pytest.approx(0.76, abs=0.03)


def test_cdma_fgn_085():
    x = fgn(N, 0.85, rng_for(13))
    h_c = cdma(x).hurst
    assert h_c == pytest.approx(0.85, abs=0.03)
    assert abs(h_c - dfa(x).hurst) <= 0.03


def test_affine_invariance(fgn76):
    a, b = dfa(fgn76), dfa(2 * fgn76 + 7)
    assert b.hurst == pytest.approx(a.hurst, abs=1e-12)
    c, d = cdma(fgn76), cdma(2 * fgn76 + 7)
    assert d.hurst == pytest.approx(c.hurst, abs=1e-12)


def test_dfa_fluctuation_by_hand():
    # one scale, explicit least-squares detrending per segment
    x = rng_for(4).standard_normal(100)
    y = np.cumsum(x - x.mean())
    s = 12
    segs = [y[i * s:(i + 1) * s] for i in range(len(y) // s)]
    segs += [y[len(y) - (i + 1) * s:len(y) - i * s] for i in range(len(y) // s)]
    t = np.arange(s)
    var = [np.mean((g - np.polyval(np.polyfit(t, g, 1), t)) ** 2) for g in segs]
    assert dfa_fluctuation(profile(x), s) == pytest.approx(np.sqrt(np.mean(var)), rel=1e-12)


def test_preconditions():
    x = rng_for(1).standard_normal(1000)
    with pytest.raises(ValueError):
        dfa(x[:30])
    with pytest.raises(ValueError):
        dfa(x, [5, 10, 20])
    with pytest.raises(ValueError):
        dfa(x, [10, 200])
    with pytest.raises(ValueError):
        cdma(x, [11, 12, 15])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 100), st.floats(-100, 100))
def test_affine_property(seed, a, b):
    x = rng_for(seed).standard_normal(2000)
    assert dfa(a * x + b).hurst == pytest.approx(dfa(x).hurst, abs=1e-9)


def test_shuffle_fgn():
    x = fgn(N, 0.8, rng_for(14))
    rep = shuffle_test(x, "DFA", n_replicates=30, base_seed=5)
    assert rep.mean == pytest.approx(0.5, abs=0.02)
    assert len(rep.values) == 30
    assert rep.mean == pytest.approx(rep.values.mean(), abs=1e-15)
    assert rep.std == pytest.approx(rep.values.std(ddof=1), abs=1e-15)


def test_shuffle_determinism_and_parallel():
    x = fgn(4096, 0.7, rng_for(3))
    a = shuffle_test(x, "CDMA", 12, base_seed=9)
    b = shuffle_test(x, "CDMA", 12, base_seed=9)
    c = shuffle_test(x, "CDMA", 12, base_seed=9, workers=4)
    assert a.values.tobytes() == b.values.tobytes() == c.values.tobytes()
    assert shuffle_test(x, "CDMA", 12, base_seed=10).values.tobytes() != a.values.tobytes()


def test_shuffle_constant_series_propagates():
    with pytest.raises(ValueError):
        shuffle_test(np.ones(2000), "DFA", n_replicates=1)
