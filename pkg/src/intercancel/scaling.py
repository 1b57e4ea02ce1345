"""Hurst exponent estimation: DFA, centred DMA and the shuffle null test."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .synth import rng_for

DFA_MIN_SCALE = 10
CDMA_MIN_SCALE = 11
MIN_LENGTH = 60
N_SCALES = 20
RELIABLE_R2 = 0.98


class Method(str, enum.Enum):
    DFA = "DFA"
    CDMA = "CDMA"


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    stderr: float
    r2: float


def loglog_fit(scales, values) -> LogLogFit:
    """OLS of log10(values) on log10(scales), equal weights."""
    x = np.log10(np.asarray(scales, dtype=float))
    y = np.log10(np.asarray(values, dtype=float))
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    stderr = float(np.sqrt(ss_res / (n - 2) / sxx)) if n > 2 else float("nan")
    return LogLogFit(float(slope), float(intercept), stderr, r2)


@dataclass(frozen=True)
class ScalingResult:
    method: Method
    scales: np.ndarray
    fluctuations: np.ndarray
    hurst: float
    stderr: float
    r2: float
    fit_range: tuple[int, int]

    @property
    def reliable(self) -> bool:
        return self.r2 >= RELIABLE_R2


def profile(series) -> np.ndarray:
    """Cumulative sum of the series.

    The mean is removed first; linear detrending absorbs the resulting linear
    term, and the profile stays small enough to keep round-off negligible.
    """
    x = np.asarray(series, dtype=float)
    return np.cumsum(x - x.mean())


def default_scales(n: int, count: int = N_SCALES, smin: int = DFA_MIN_SCALE, odd: bool = False) -> np.ndarray:
    """About ``count`` log-spaced integer scales in [smin, n // 6]."""
    smax = n // 6
    if smax < smin:
        raise ValueError(f"series of length {n} is too short for scales >= {smin}")
    raw = np.geomspace(smin, smax, count)
    if odd:
        s = 2 * np.floor(raw / 2.0) + 1
        s = np.clip(s, smin if smin % 2 else smin + 1, smax if smax % 2 else smax - 1)
    else:
        s = np.round(raw)
    return np.unique(s.astype(np.int64))


def _check_series(x: np.ndarray) -> None:
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if len(x) < MIN_LENGTH:
        raise ValueError(f"series length {len(x)} < {MIN_LENGTH}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")


def _check_scales(scales, n: int, smin: int) -> np.ndarray:
    s = np.asarray(scales)
    if s.ndim != 1 or len(s) < 2:
        raise ValueError("need at least two scales")
    if not np.all(s == np.round(s)):
        raise ValueError("scales must be integers")
    s = s.astype(np.int64)
    if np.any(np.diff(s) <= 0):
        raise ValueError("scales must be strictly increasing")
    if s[0] < smin or s[-1] > n // 6:
        raise ValueError(f"scales must lie in [{smin}, {n // 6}]")
    return s


def segment_variances(y: np.ndarray, s: int) -> np.ndarray:
    """Squared linear-detrended fluctuation F^2(v, s) of the 2 N_s segments.

    N_s segments are cut from the front of the profile and N_s from the back,
    so the remainder left by the first partition is still covered.
    """
    n = len(y)
    ns = n // s
    front = y[: ns * s].reshape(ns, s)
    back = y[n - ns * s :].reshape(ns, s)
    seg = np.concatenate([front, back])
    t = np.arange(s, dtype=float)
    t -= t.mean()
    seg = seg - seg.mean(axis=1, keepdims=True)
    slope = seg @ t / np.dot(t, t)
    resid = seg - slope[:, None] * t
    return np.mean(resid**2, axis=1)


def dfa_fluctuation(y: np.ndarray, s: int) -> float:
    return float(np.sqrt(np.mean(segment_variances(y, s))))


def dfa(series, scales=None) -> ScalingResult:
    x = np.asarray(series, dtype=float)
    _check_series(x)
    s = default_scales(len(x)) if scales is None else _check_scales(scales, len(x), DFA_MIN_SCALE)
    y = profile(x)
    f = np.array([dfa_fluctuation(y, int(k)) for k in s])
    return _finish(Method.DFA, s, f)


def cdma_fluctuation(y: np.ndarray, s: int) -> float:
    """RMS deviation of the profile from its centred moving average.

    Only positions where the full window of width ``s`` fits are used.
    """
    c = np.concatenate([[0.0], np.cumsum(y)])
    half = (s - 1) // 2
    trend = (c[s:] - c[:-s]) / s
    resid = y[half : len(y) - half] - trend
    return float(np.sqrt(np.mean(resid**2)))


def cdma(series, scales=None) -> ScalingResult:
    x = np.asarray(series, dtype=float)
    _check_series(x)
    if scales is None:
        s = default_scales(len(x), smin=CDMA_MIN_SCALE, odd=True)
    else:
        if np.any(np.asarray(scales) % 2 == 0):
            raise ValueError("CDMA window sizes must be odd")
        s = _check_scales(scales, len(x), CDMA_MIN_SCALE)
    y = profile(x)
    f = np.array([cdma_fluctuation(y, int(k)) for k in s])
    return _finish(Method.CDMA, s, f)


def _finish(method: Method, s: np.ndarray, f: np.ndarray) -> ScalingResult:
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise ValueError("fluctuation function vanished; is the series constant?")
    fit = loglog_fit(s, f)
    return ScalingResult(method, s, f, fit.slope, fit.stderr, fit.r2, (int(s[0]), int(s[-1])))


ESTIMATORS: dict[str, Callable] = {"DFA": dfa, "CDMA": cdma}


@dataclass(frozen=True)
class ShuffleReport:
    estimator: str
    n_replicates: int
    base_seed: int
    values: np.ndarray
    mean: float
    std: float
    residual: float | None = None


def permuted(series, base_seed: int, replicate: int) -> np.ndarray:
    """Replicate ``replicate`` of the shuffle schedule for ``base_seed``."""
    return rng_for(base_seed, replicate).permutation(np.asarray(series))


def run_replicates(statistic: Callable[[np.ndarray], float], series, n: int, base_seed: int, workers: int = 1):
    x = np.asarray(series, dtype=float)

    def one(k: int) -> float:
        return float(statistic(permuted(x, base_seed, k)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, range(n)))
    else:
        values = [one(k) for k in range(n)]
    return np.array(values)


def shuffle_test(
    series,
    estimator: str = "DFA",
    n_replicates: int = 100,
    base_seed: int = 0,
    scales: Sequence[int] | None = None,
    workers: int = 1,
) -> ShuffleReport:
    """Mean and spread of the Hurst exponent over shuffled copies of ``series``."""
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    est = ESTIMATORS[Method(estimator).value]
    values = run_replicates(lambda x: est(x, scales).hurst, series, n_replicates, base_seed, workers)
    std = float(values.std(ddof=1)) if n_replicates > 1 else 0.0
    return ShuffleReport(Method(estimator).value, n_replicates, base_seed, values, float(values.mean()), std)
