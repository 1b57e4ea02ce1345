"""Seeded synthetic generators used as ground truth for every estimator.

Randomness comes from numpy's PCG64 bit generator keyed by a
``SeedSequence([seed, stream])`` pair, so independent streams (one per shuffle
replicate, one per generator stage) never share state and results are
reproducible across platforms.
"""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .ingest import EventStream


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for the ``(seed, stream)`` pair."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream id must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


class GeneratorKind(str, enum.Enum):
    WEIBULL_IID = "WeibullIID"
    QEXP_IID = "QExpIID"
    FGN = "FGN"
    BINOMIAL_CASCADE = "BinomialCascade"
    POISSON_FLOW = "PoissonFlow"
    LONG_MEMORY_HEAVY_TAIL = "LongMemoryHeavyTail"


# parameter names and defaults per kind
_PARAMS: dict[GeneratorKind, dict[str, Any]] = {
    GeneratorKind.WEIBULL_IID: {"a": None, "b": None},
    GeneratorKind.QEXP_IID: {"kappa": None, "q": None},
    GeneratorKind.FGN: {"H": None},
    GeneratorKind.BINOMIAL_CASCADE: {"p": None},
    GeneratorKind.POISSON_FLOW: {
        "probs": None,
        "days": 1,
        "day_spread": 0.5,
        "start": "2003-01-02",
    },
    GeneratorKind.LONG_MEMORY_HEAVY_TAIL: {"H": None, "kappa": None, "q": None},
}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind
    length: int
    seed: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        kind = GeneratorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        merged = dict(_PARAMS[kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ValueError(f"unknown parameters for {kind.value}: {sorted(unknown)}")
        merged.update(self.params)
        missing = [k for k, v in merged.items() if v is None]
        if missing:
            raise ValueError(f"missing parameters for {kind.value}: {missing}")
        object.__setattr__(self, "params", merged)
        if int(self.length) != self.length or self.length <= 0:
            raise ValueError("length must be a positive integer")
        _check_params(kind, merged)

    def __getitem__(self, key: str):
        return self.params[key]

    def to_dict(self) -> dict:
        params = dict(self.params)
        if "probs" in params:
            params["probs"] = list(params["probs"])
        return {"kind": self.kind.value, "length": self.length, "seed": self.seed, "params": params}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "GeneratorSpec":
        return cls(
            kind=GeneratorKind(d["kind"]),
            length=int(d["length"]),
            seed=int(d.get("seed", 0)),
            params=dict(d.get("params", {})),
        )


def _check_params(kind: GeneratorKind, p: Mapping[str, Any]) -> None:
    if kind is GeneratorKind.WEIBULL_IID:
        if not (p["a"] > 0 and p["b"] > 0):
            raise ValueError("Weibull requires a > 0 and b > 0")
    elif kind is GeneratorKind.QEXP_IID:
        _check_qexp(p["kappa"], p["q"])
    elif kind is GeneratorKind.FGN:
        if not 0 < p["H"] < 1:
            raise ValueError("H must lie in (0, 1)")
    elif kind is GeneratorKind.BINOMIAL_CASCADE:
        if not 0 < p["p"] < 1:
            raise ValueError("p must lie in (0, 1)")
    elif kind is GeneratorKind.POISSON_FLOW:
        probs = np.asarray(p["probs"], dtype=float)
        # mass left over (sum < 1) would be unlogged events, so the drawn flow is renormalized
        if probs.shape != (4,) or np.any(probs < 0) or not 0 < probs.sum() <= 1 + 1e-9:
            raise ValueError("probs must be four non-negative numbers with 0 < sum <= 1")
        if int(p["days"]) < 1:
            raise ValueError("days must be >= 1")
        if not 0 <= p["day_spread"] < 1:
            raise ValueError("day_spread must lie in [0, 1)")
    elif kind is GeneratorKind.LONG_MEMORY_HEAVY_TAIL:
        if not 0.5 < p["H"] < 1:
            raise ValueError("H must lie in (0.5, 1)")
        _check_qexp(p["kappa"], p["q"])


def _check_qexp(kappa: float, q: float) -> None:
    if not (kappa > 0 and 1 < q < 2):
        raise ValueError("q-exponential requires kappa > 0 and 1 < q < 2")


def weibull_ppf(u, a: float, b: float):
    return a * (-np.log1p(-np.asarray(u, dtype=float))) ** (1.0 / b)


def qexp_ppf(u, kappa: float, q: float):
    """Inverse CDF of the q-exponential density on [0, inf), 1 < q < 2."""
    u = np.asarray(u, dtype=float)
    return kappa * np.expm1(-(q - 1.0) * np.log1p(-u)) / (q - 1.0)


def gen_iid(spec: GeneratorSpec) -> np.ndarray:
    if spec.kind not in (GeneratorKind.WEIBULL_IID, GeneratorKind.QEXP_IID):
        raise ValueError(f"gen_iid does not handle {spec.kind.value}")
    u = rng_for(spec.seed).random(spec.length)
    if spec.kind is GeneratorKind.WEIBULL_IID:
        return weibull_ppf(u, spec["a"], spec["b"])
    return qexp_ppf(u, spec["kappa"], spec["q"])


def fgn_autocovariance(k, hurst: float):
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def fgn(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance fractional Gaussian noise by circulant embedding.

    The covariance row of length ``2n`` is embedded in a circulant matrix whose
    eigenvalues are non-negative for every fGn with 0 < H < 1. Taking the real
    part of the FFT of complex white noise shaped by ``sqrt(eigenvalues)``
    yields an exact sample.
    """
    m = 2 * n
    k = np.arange(n + 1)
    row = fgn_autocovariance(k, hurst)
    circ = np.concatenate([row, row[-2:0:-1]])
    lam = np.fft.fft(circ).real
    if lam.min() < -1e-10 * lam.max():
        raise ArithmeticError("circulant embedding is not non-negative definite")
    lam = np.clip(lam, 0.0, None)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(lam / m) * w)
    return y.real[:n].copy()


def gen_fgn(spec: GeneratorSpec) -> np.ndarray:
    if spec.kind is not GeneratorKind.FGN:
        raise ValueError(f"gen_fgn does not handle {spec.kind.value}")
    if not _is_pow2(spec.length):
        raise ValueError("fGn length must be a power of 2")
    return fgn(spec.length, spec["H"], rng_for(spec.seed))


def binomial_cascade(levels: int, p: float) -> np.ndarray:
    masses = np.ones(1)
    for _ in range(levels):
        masses = np.stack([masses * p, masses * (1.0 - p)], axis=1).ravel()
    return masses


def gen_cascade(spec: GeneratorSpec) -> np.ndarray:
    """Cell masses of a deterministic binomial multiplicative cascade.

    The seed is unused; every dyadic split sends fraction p to the left half.
    """
    if spec.kind is not GeneratorKind.BINOMIAL_CASCADE:
        raise ValueError(f"gen_cascade does not handle {spec.kind.value}")
    if not _is_pow2(spec.length):
        raise ValueError("cascade length must be a power of 2")
    return binomial_cascade(spec.length.bit_length() - 1, spec["p"])


def cascade_hurst(q, p: float):
    """Generalized Hurst exponent of the binomial cascade, h(q) = (tau(q) + 1) / q."""
    q = np.asarray(q, dtype=float)
    return (1.0 - np.log2(p**q + (1.0 - p) ** q)) / q


def cascade_alpha(q, p: float):
    """Singularity strength d tau / dq of the binomial cascade."""
    q = np.asarray(q, dtype=float)
    a, b = p**q, (1.0 - p) ** q
    return -(a * math.log(p) + b * math.log(1.0 - p)) / ((a + b) * math.log(2.0))


def _day_sizes(n: int, days: int, spread: float, rng: np.random.Generator) -> np.ndarray:
    if days > n:
        raise ValueError("more days than events")
    weights = 1.0 + spread * (2.0 * rng.random(days) - 1.0)
    cuts = np.floor(np.cumsum(weights) / weights.sum() * n).astype(np.int64)
    cuts[-1] = n
    sizes = np.diff(np.concatenate([[0], cuts]))
    # every day needs at least one event
    for i in np.flatnonzero(sizes == 0):
        j = int(np.argmax(sizes))
        sizes[j] -= 1
        sizes[i] += 1
    return sizes


def _assemble_stream(categories: np.ndarray, spec: GeneratorSpec, rng: np.random.Generator) -> EventStream:
    n = len(categories)
    sizes = _day_sizes(n, int(spec["days"]), float(spec["day_spread"]), rng)
    start = dt.date.fromisoformat(str(spec["start"]))
    days = tuple(start + dt.timedelta(days=i) for i in range(len(sizes)))
    day_index = np.repeat(np.arange(len(sizes)), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    seq = np.arange(n) - np.repeat(starts, sizes) + 1
    price = np.round(10.0 + 0.01 * rng.integers(-50, 51, size=n), 2)
    size = 100 * rng.integers(1, 11, size=n)
    return EventStream(
        days=days,
        day_index=day_index.astype(np.int64),
        seq=seq.astype(np.int64),
        side=(categories // 2).astype(np.int8),
        action=(categories % 2).astype(np.int8),
        price=price,
        size=size.astype(np.int64),
    )


def gen_poisson_flow(spec: GeneratorSpec) -> EventStream:
    """IID categorical order flow.

    ``probs`` are the per-event probabilities of (buy submit, buy cancel,
    sell submit, sell cancel). Day lengths vary by up to ``day_spread``
    around the mean so that daily N_A values spread out.
    """
    if spec.kind is not GeneratorKind.POISSON_FLOW:
        raise ValueError(f"gen_poisson_flow does not handle {spec.kind.value}")
    rng = rng_for(spec.seed)
    probs = np.asarray(spec["probs"], dtype=float)
    cats = rng.choice(4, size=spec.length, p=probs / probs.sum())
    return _assemble_stream(cats, spec, rng_for(spec.seed, 1))


def rank_remap(template: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Reorder ``values`` so their ranks follow ``template``."""
    out = np.empty(len(template))
    out[np.argsort(template, kind="stable")] = np.sort(values)
    return out


def gen_longmem_heavytail(spec: GeneratorSpec) -> np.ndarray:
    """Integer durations with long memory and q-exponential marginals.

    An fGn path supplies the rank order; iid q-exponential draws supply the
    values. Values are rounded to the nearest integer and clamped at 1;
    rounding up instead would shift the whole marginal by half a unit.
    """
    if spec.kind is not GeneratorKind.LONG_MEMORY_HEAVY_TAIL:
        raise ValueError(f"gen_longmem_heavytail does not handle {spec.kind.value}")
    n = spec.length
    n2 = 1 << max(n - 1, 1).bit_length()
    template = fgn(n2, spec["H"], rng_for(spec.seed, 0))[:n]
    draws = qexp_ppf(rng_for(spec.seed, 1).random(n), spec["kappa"], spec["q"])
    return np.maximum(np.floor(rank_remap(template, draws) + 0.5), 1.0).astype(np.int64)


def embed_durations(
    durations: np.ndarray,
    seed: int = 0,
    filler_probs=(0.4, 0.45, 0.15),
    days: int = 1,
    start: str = "2003-01-02",
) -> EventStream:
    """Order flow whose buy-cancellation gaps are exactly ``durations``.

    Between consecutive buy cancellations, ``d - 1`` filler events are drawn
    from (buy submit, sell submit, sell cancel) with ``filler_probs``. The
    stream opens with one buy cancellation that anchors the first gap.
    Day boundaries are placed by event count; with more than one day, the
    reset day policy drops the gaps that straddle them.
    """
    d = np.asarray(durations, dtype=np.int64)
    if d.ndim != 1 or len(d) == 0 or np.any(d < 1):
        raise ValueError("durations must be a non-empty sequence of integers >= 1")
    probs = np.asarray(filler_probs, dtype=float)
    if probs.shape != (3,) or np.any(probs < 0) or probs.sum() <= 0:
        raise ValueError("filler_probs must be three non-negative weights")
    n = int(d.sum()) + 1
    rng = rng_for(seed, 0)
    filler_cat = np.array([0, 2, 3])[rng.choice(3, size=n, p=probs / probs.sum())]
    cats = filler_cat
    cancel_at = np.concatenate([[0], np.cumsum(d)])
    cats[cancel_at] = 1
    fake = GeneratorSpec(
        GeneratorKind.POISSON_FLOW,
        length=n,
        seed=seed,
        params={"probs": (0.25, 0.25, 0.25, 0.25), "days": days, "day_spread": 0.0, "start": start},
    )
    return _assemble_stream(cats, fake, rng_for(seed, 1))


def generate(spec: GeneratorSpec):
    """Dispatch on ``spec.kind``; flows return an ``EventStream``, others arrays."""
    return {
        GeneratorKind.WEIBULL_IID: gen_iid,
        GeneratorKind.QEXP_IID: gen_iid,
        GeneratorKind.FGN: gen_fgn,
        GeneratorKind.BINOMIAL_CASCADE: gen_cascade,
        GeneratorKind.POISSON_FLOW: gen_poisson_flow,
        GeneratorKind.LONG_MEMORY_HEAVY_TAIL: gen_longmem_heavytail,
    }[spec.kind](spec)

