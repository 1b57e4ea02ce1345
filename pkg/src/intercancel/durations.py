"""Inter-cancellation durations in event time and the per-side count statistics.

The event clock ticks once for every record of either side and either action,
so a duration is the number of records from one same-side cancellation up to
and including the next one; the minimum is 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import Action, EventStream, Side, summarize


class DayPolicy(str, enum.Enum):
    RESET = "reset"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class DurationSeries:
    side: Side
    durations: np.ndarray
    day_offsets: np.ndarray
    mean_duration: float
    policy: DayPolicy = DayPolicy.RESET
    # days that contributed no duration (fewer than two cancellations)
    empty_days: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.durations)

    @property
    def is_short(self) -> bool:
        return len(self.durations) < 2


def extract_durations(stream: EventStream, side: Side | str, day_policy: DayPolicy | str = DayPolicy.RESET) -> DurationSeries:
    """Gaps d(i) = t(i) - t(i-1) between consecutive cancellations on ``side``."""
    if len(stream) == 0:
        raise ValueError("empty event stream")
    side = Side.parse(side)
    policy = DayPolicy(day_policy)
    ticks = np.flatnonzero((stream.side == side) & (stream.action == Action.CANCEL)) + 1
    cancel_day = stream.day_index[ticks - 1]
    gaps = np.diff(ticks)
    end_day = cancel_day[1:]
    if policy is DayPolicy.RESET:
        keep = cancel_day[1:] == cancel_day[:-1]
        gaps = gaps[keep]
        end_day = end_day[keep]
    day_offsets = np.searchsorted(end_day, np.arange(stream.day_count))
    present = set(np.unique(end_day).tolist())
    empty = tuple(i for i in range(stream.day_count) if i not in present)
    mean = float(gaps.mean()) if len(gaps) else float("nan")
    return DurationSeries(side, gaps.astype(np.int64), day_offsets.astype(np.int64), mean, policy, empty)


@dataclass(frozen=True)
class CancellationStats:
    side: Side
    n_cancel: int
    n_all: int
    r: float
    gamma: float | None
    mean_duration: float

    def satisfies_ratio_bound(self) -> bool:
        """The relation r > 1/<d>."""
        return self.r > 1.0 / self.mean_duration


def ols_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    sxx = float(np.dot(dx, dx))
    if sxx == 0:
        raise ValueError("regressor has no spread")
    return float(np.dot(dx, y - y.mean()) / sxx)


def compute_stats(stream: EventStream, side: Side | str, series: DurationSeries) -> CancellationStats:
    """r = N_C / N_A and the slope gamma of daily N_C against daily N_A.

    gamma is None with fewer than two trading days.
    """
    side = Side.parse(side)
    counts = summarize(stream)
    total = counts.side(side)
    if total.n_all == 0:
        raise ValueError("no orders on side")
    gamma = None
    if stream.day_count >= 2:
        n_all, n_cancel = counts.daily(side)
        try:
            gamma = ols_slope(n_all, n_cancel)
        except ValueError:
            gamma = None
    return CancellationStats(
        side=side,
        n_cancel=total.n_cancel,
        n_all=total.n_all,
        r=total.n_cancel / total.n_all,
        gamma=gamma,
        mean_duration=series.mean_duration,
    )


def rescale(series: DurationSeries | Sequence[float]) -> np.ndarray:
    """d / <d>."""
    if isinstance(series, DurationSeries):
        d, mean = series.durations, series.mean_duration
    else:
        d = np.asarray(series, dtype=float)
        mean = float(d.mean()) if len(d) else float("nan")
    if len(d) == 0:
        raise ValueError("empty duration series")
    if not mean > 0:
        raise ValueError("mean duration must be positive")
    return np.asarray(d, dtype=float) / mean


def ensemble(series_list: Sequence[DurationSeries | Sequence[float]]) -> np.ndarray:
    """Pool the rescaled samples of several series."""
    if len(series_list) == 0:
        raise ValueError("no series to pool")
    return np.concatenate([rescale(s) for s in series_list])
