"""Multifractal detrended fluctuation analysis.

``mfdfa`` returns generalized Hurst exponents h(q), the mass exponents
tau(q) = q h(q) - 1 and the Legendre spectrum (alpha, f(alpha)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scaling import (
    DFA_MIN_SCALE,
    ShuffleReport,
    _check_scales,
    default_scales,
    loglog_fit,
    profile,
    run_replicates,
    segment_variances,
)

MIN_LENGTH = 600
SUPPORT_DIMENSION = 1.0
# segments whose F^2 falls below this fraction of the series variance are
# dropped from the q <= 0 averages
DEGENERATE_RATIO = 1e-12
MAX_EXCLUDED_FRACTION = 0.01
MIN_FIT_R2 = 0.95
MONOTONE_TOLERANCE = 0.01
DEFAULT_Q = np.arange(-16, 17) / 4.0


class DegenerateSegmentError(ValueError):
    pass


@dataclass(frozen=True)
class QFluctuation:
    value: float
    excluded: int
    segments: int


def _q_average(f2: np.ndarray, q: float) -> float:
    if q == 0:
        return float(np.exp(0.5 * np.mean(np.log(f2))))
    return float(np.mean(f2 ** (q / 2.0)) ** (1.0 / q))


def _fluctuation(f2: np.ndarray, q: float, floor: float, exclude_degenerate: bool) -> QFluctuation:
    if q > 0:
        return QFluctuation(_q_average(f2, q), 0, len(f2))
    bad = f2 <= floor
    n_bad = int(bad.sum())
    if n_bad and not exclude_degenerate:
        raise DegenerateSegmentError(f"degenerate segment: {n_bad} segments with vanishing fluctuation at q={q}")
    if n_bad == len(f2):
        raise DegenerateSegmentError(f"degenerate segment: all segments vanish at q={q}")
    return QFluctuation(_q_average(f2[~bad], q), n_bad, len(f2))


def _variance_floor(x: np.ndarray) -> float:
    var = float(np.var(x))
    if var == 0:
        raise DegenerateSegmentError("degenerate segment: constant series")
    return DEGENERATE_RATIO * var


def fluctuation_function(series, s: int, q: float, exclude_degenerate: bool = False) -> float:
    """q-th order fluctuation function F_q(s) for one segment size.

    For q <= 0 a segment with (numerically) zero residual variance makes the
    average diverge; it raises ``DegenerateSegmentError`` unless
    ``exclude_degenerate`` drops such segments.
    """
    x = np.asarray(series, dtype=float)
    if not DFA_MIN_SCALE <= s <= len(x) // 6:
        raise ValueError(f"scale {s} outside [{DFA_MIN_SCALE}, {len(x) // 6}]")
    floor = _variance_floor(x)
    f2 = segment_variances(profile(x), int(s))
    if q > 0 and not np.any(f2 > 0):
        raise DegenerateSegmentError("degenerate segment: all segments vanish")
    return _fluctuation(f2, float(q), floor, exclude_degenerate).value


@dataclass(frozen=True)
class MultifractalResult:
    q_grid: np.ndarray
    scales: np.ndarray
    fq: np.ndarray  # shape (len(q_grid), len(scales))
    h: np.ndarray
    tau: np.ndarray
    alpha: np.ndarray
    f_alpha: np.ndarray
    delta_alpha: float
    per_q_fit_r2: np.ndarray
    excluded_fraction: float
    flags: tuple[str, ...] = field(default=())

    def h_at(self, q: float) -> float:
        i = np.flatnonzero(np.isclose(self.q_grid, q))
        if len(i) == 0:
            raise KeyError(f"q={q} not on the grid")
        return float(self.h[i[0]])

    def chord_deviation(self) -> float:
        """Largest gap between tau(q) and the straight line joining its end points."""
        q, t = self.q_grid, self.tau
        chord = t[0] + (t[-1] - t[0]) * (q - q[0]) / (q[-1] - q[0])
        return float(np.max(np.abs(t - chord)))


def _check_q_grid(q_grid) -> np.ndarray:
    q = np.asarray(q_grid, dtype=float)
    if q.ndim != 1 or len(q) < 3 or np.any(np.diff(q) <= 0):
        raise ValueError("q grid must be strictly increasing with at least 3 points")
    for required in (-4.0, 0.0, 4.0):
        if not np.any(q == required):
            raise ValueError(f"q grid must include {required:g}")
    return q


def legendre(q: np.ndarray, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """alpha = d tau / dq (central differences, one-sided at the ends), f = q alpha - tau."""
    alpha = np.gradient(tau, q)
    return alpha, q * alpha - tau


def mfdfa(series, q_grid: Sequence[float] | None = None, scales: Sequence[int] | None = None) -> MultifractalResult:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < MIN_LENGTH:
        raise ValueError(f"MF-DFA needs a series of length >= {MIN_LENGTH}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    q = _check_q_grid(DEFAULT_Q if q_grid is None else q_grid)
    s = default_scales(len(x)) if scales is None else _check_scales(scales, len(x), DFA_MIN_SCALE)
    floor = _variance_floor(x)
    y = profile(x)

    fq = np.empty((len(q), len(s)))
    excluded = 0
    total = 0
    for j, size in enumerate(s):
        f2 = segment_variances(y, int(size))
        if not np.any(f2 > 0):
            raise DegenerateSegmentError(f"degenerate segment: all segments vanish at s={size}")
        for i, qi in enumerate(q):
            r = _fluctuation(f2, float(qi), floor, exclude_degenerate=True)
            fq[i, j] = r.value
            if qi < 0:
                excluded += r.excluded
                total += r.segments

    fits = [loglog_fit(s, row) for row in fq]
    h = np.array([f.slope for f in fits])
    r2 = np.array([f.r2 for f in fits])
    tau = q * h - SUPPORT_DIMENSION
    alpha, f_alpha = legendre(q, tau)

    flags = []
    excluded_fraction = excluded / total if total else 0.0
    if excluded_fraction > MAX_EXCLUDED_FRACTION:
        flags.append("degenerate_segments")
    if np.any(r2 < MIN_FIT_R2):
        flags.append("poor_fit")
    if np.any(np.diff(h) > MONOTONE_TOLERANCE):
        flags.append("h_not_monotone")
    return MultifractalResult(
        q_grid=q,
        scales=s,
        fq=fq,
        h=h,
        tau=tau,
        alpha=alpha,
        f_alpha=f_alpha,
        delta_alpha=float(alpha.max() - alpha.min()),
        per_q_fit_r2=r2,
        excluded_fraction=excluded_fraction,
        flags=tuple(flags),
    )


def width_shuffle_test(
    series,
    n_replicates: int = 100,
    base_seed: int = 0,
    q_grid: Sequence[float] | None = None,
    scales: Sequence[int] | None = None,
    workers: int = 1,
    original: MultifractalResult | None = None,
) -> ShuffleReport:
    """Spectrum width of shuffled copies and the residual R = width - shuffled width."""
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    base = original if original is not None else mfdfa(series, q_grid, scales)
    values = run_replicates(
        lambda x: mfdfa(x, base.q_grid, base.scales).delta_alpha, series, n_replicates, base_seed, workers
    )
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if n_replicates > 1 else 0.0
    return ShuffleReport("MFDFA_WIDTH", n_replicates, base_seed, values, mean, std, base.delta_alpha - mean)
