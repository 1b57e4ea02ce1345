"""Weibull and q-exponential densities: evaluation, MLE/NLSE fitting, chi comparison.

Densities::

    Weibull:        P(d) = (b/a) (d/a)^(b-1) exp(-(d/a)^b)
    q-exponential:  P(d) = (1/kappa) [1 - (1-q) d/kappa]^(q/(1-q)),  1 < q < 2

Both fits treat integer durations as continuous observations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

Q_LOWER = 1.0 + 1e-6
Q_UPPER = 2.0 - 1e-6
WEIBULL_SHAPE_BOUNDS = (1e-3, 1e3)
PARAM_TOL = 1e-8
MIN_MLE_SAMPLES = 100
MIN_NLSE_BINS = 8
UNIT_THRESHOLD = 30
LOG_RATIO = 10**0.1
MIN_BIN_COUNT = 10
TIE_TOLERANCE = 1e-12


class Family(str, enum.Enum):
    WEIBULL = "Weibull"
    QEXP = "QExponential"


class FitMethod(str, enum.Enum):
    MLE = "MLE"
    NLSE = "NLSE"


class Binning(str, enum.Enum):
    UNIT = "unit"
    LOG = "log"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class DistributionParams:
    family: Family
    scale: float
    shape: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.family is Family.WEIBULL and not self.shape > 0:
            raise ValueError("Weibull shape must be positive")
        if self.family is Family.QEXP and not 1 < self.shape < 2:
            raise ValueError("q-exponential shape must lie in (1, 2)")


def pdf(params: DistributionParams, d):
    """Vectorized density; see ``evaluate_pdf`` for the scalar contract."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("density is defined for d >= 0")
    if params.family is Family.WEIBULL:
        a, b = params.scale, params.shape
        if b < 1 and np.any(d == 0):
            raise ValueError("density diverges at origin")
        z = d / a
        with np.errstate(divide="ignore"):
            return np.where(z == 0, (b / a) * (b == 1), (b / a) * z ** (b - 1) * np.exp(-(z**b)))
    kappa, q = params.scale, params.shape
    return np.exp(-(q / (q - 1)) * np.log1p((q - 1) * d / kappa)) / kappa


def evaluate_pdf(params: DistributionParams, d: float) -> float:
    return float(pdf(params, d))


def log_pdf(params: DistributionParams, d):
    d = np.asarray(d, dtype=float)
    if params.family is Family.WEIBULL:
        a, b = params.scale, params.shape
        z = d / a
        return math.log(b / a) + (b - 1) * np.log(z) - z**b
    kappa, q = params.scale, params.shape
    return -math.log(kappa) - (q / (q - 1)) * np.log1p((q - 1) * d / kappa)


@dataclass(frozen=True)
class BinnedPdf:
    bin_edges: np.ndarray  # shape (k, 2): lower and upper edge of each kept bin
    centers: np.ndarray
    densities: np.ndarray
    counts: np.ndarray
    n_total: int

    @property
    def widths(self) -> np.ndarray:
        return self.bin_edges[:, 1] - self.bin_edges[:, 0]

    def __len__(self) -> int:
        return len(self.centers)

    def covered_mass(self) -> float:
        return float(np.sum(self.densities * self.widths))

    @classmethod
    def from_params(cls, params: DistributionParams, edges) -> "BinnedPdf":
        """Synthetic pdf whose densities are the exact density at geometric bin centres."""
        edges = np.asarray(edges, dtype=float)
        pairs = np.column_stack([edges[:-1], edges[1:]])
        centers = np.sqrt(pairs[:, 0] * pairs[:, 1])
        dens = pdf(params, centers)
        return cls(pairs, centers, dens, np.zeros(len(centers), dtype=np.int64), 0)

    def scaled(self, c: float) -> "BinnedPdf":
        """The pdf of c * samples: edges and centres times c, densities over c."""
        return BinnedPdf(self.bin_edges * c, self.centers * c, self.densities / c, self.counts, self.n_total)


def _log_edges(lo: float, hi: float) -> np.ndarray:
    k = max(int(math.ceil(math.log(hi / lo) / math.log(LOG_RATIO) - 1e-12)), 1)
    edges = lo * LOG_RATIO ** np.arange(k + 1)
    if edges[-1] <= hi:
        edges = np.append(edges, edges[-1] * LOG_RATIO)
    return edges


def _merge_sparse(edges: np.ndarray, counts: np.ndarray, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Merge consecutive bins from index ``start`` on until each holds MIN_BIN_COUNT."""
    new_edges = list(edges[: start + 1])
    new_counts = list(counts[:start])
    acc = 0
    for i in range(start, len(counts)):
        acc += counts[i]
        if acc >= MIN_BIN_COUNT:
            new_edges.append(edges[i + 1])
            new_counts.append(acc)
            acc = 0
    if acc:
        if len(new_counts) > start:
            new_edges[-1] = edges[-1]
            new_counts[-1] += acc
        else:
            new_edges.append(edges[-1])
            new_counts.append(acc)
    return np.asarray(new_edges), np.asarray(new_counts, dtype=np.int64)


def empirical_pdf(samples, binning: Binning | str = Binning.HYBRID, threshold: int = UNIT_THRESHOLD) -> BinnedPdf:
    """Histogram density estimate; empty bins are dropped.

    ``unit``: bins [k - 1/2, k + 1/2) around each integer k, centred on k.
    ``log``: geometric bins of ratio 10^0.1 starting at the sample minimum,
    centred on the geometric mean of their edges.
    ``hybrid``: unit bins up to ``threshold``, then geometric bins snapped to
    half-integers (each holds a whole number of integer values), merged until
    each holds at least 10 samples.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) == 0:
        raise ValueError("no samples")
    if not x[0] > 0 or not np.isfinite(x[-1]):
        raise ValueError("samples must be finite and positive")
    binning = Binning(binning)
    if binning is Binning.LOG:
        edges = _log_edges(x[0], x[-1])
        counts = np.histogram(x, edges)[0]
        centers = np.sqrt(edges[:-1] * edges[1:])
    else:
        if x[0] < 0.5:
            raise ValueError("unit-width bins need samples >= 0.5")
        first = math.floor(x[0] + 0.5)
        top = min(threshold, math.floor(x[-1] + 0.5)) if binning is Binning.HYBRID else math.floor(x[-1] + 0.5)
        top = max(top, first)
        k = np.arange(first, top + 1)
        edges = np.append(k - 0.5, top + 0.5)
        if binning is Binning.HYBRID and x[-1] >= edges[-1]:
            geo = np.floor(_log_edges(edges[-1], x[-1])[1:]) + 0.5
            geo = np.unique(geo[geo > edges[-1]])
            if len(geo) == 0 or geo[-1] <= x[-1]:
                geo = np.append(geo, math.floor(x[-1]) + 1.5)
            edges = np.concatenate([edges, geo])
        counts = np.histogram(x, edges)[0]
        if binning is Binning.HYBRID:
            edges, counts = _merge_sparse(edges, counts, len(k))
        centers = np.sqrt(edges[:-1] * edges[1:])
        centers[: len(k)] = k

    pairs = np.column_stack([edges[:-1], edges[1:]])
    keep = counts > 0
    pairs, counts, centers = pairs[keep], counts[keep], centers[keep]
    dens = counts / (len(x) * (pairs[:, 1] - pairs[:, 0]))
    return BinnedPdf(pairs, centers, dens, counts.astype(np.int64), len(x))


def default_binning(samples) -> Binning:
    """Hybrid bins for integer-valued samples, geometric bins otherwise."""
    x = np.asarray(samples, dtype=float)
    return Binning.HYBRID if np.all(x == np.round(x)) and x.min() >= 1 else Binning.LOG


@dataclass(frozen=True)
class FitResult:
    params: DistributionParams
    method: FitMethod
    chi: float
    converged: bool
    iterations: int
    log_likelihood: float | None = None


def log_likelihood(params: DistributionParams, samples) -> float:
    return float(np.sum(log_pdf(params, np.sort(np.asarray(samples, dtype=float)))))


def chi_rms(params: DistributionParams, pdf_: BinnedPdf, space: str = "log") -> float:
    """Root-mean-square gap between fitted and empirical densities over the bins.

    ``space="log"`` compares log10 densities, the quantity NLSE minimizes;
    ``"linear"`` compares the densities themselves.
    """
    if len(pdf_) == 0:
        raise ValueError("empty pdf")
    model = pdf(params, pdf_.centers)
    if space == "log":
        with np.errstate(divide="ignore"):
            diff = np.log10(model) - np.log10(pdf_.densities)
    elif space == "linear":
        diff = model - pdf_.densities
    else:
        raise ValueError(f"unknown chi space {space!r}")
    return float(np.sqrt(np.mean(diff**2)))


def _prepare_samples(samples) -> np.ndarray:
    # sorting makes every fit a function of the multiset alone
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) < MIN_MLE_SAMPLES:
        raise ValueError(f"MLE needs at least {MIN_MLE_SAMPLES} samples, got {len(x)}")
    if not np.all(np.isfinite(x)) or x[0] <= 0:
        raise ValueError("samples must be finite and positive")
    return x


def _weibull_shape_guess(logx: np.ndarray) -> float:
    sd = float(np.std(logx))
    if sd == 0:
        return WEIBULL_SHAPE_BOUNDS[1]
    return float(np.clip(math.pi / (math.sqrt(6.0) * sd), *WEIBULL_SHAPE_BOUNDS))


def _weibull_profile_score(b: float, z: np.ndarray, mean_log: float) -> float:
    # z = log(x / xmax) <= 0; scale-free form of the shape score equation
    w = np.exp(b * z)
    return 1.0 / b + mean_log - float(np.dot(w, z)) / float(w.sum())


def fit_weibull_mle(x: np.ndarray) -> tuple[DistributionParams, bool, int]:
    """Shape from the profile score equation, scale in closed form given the shape."""
    logx = np.log(x)
    z = logx - logx[-1]
    mean_z = float(z.mean())
    lo, hi = WEIBULL_SHAPE_BOUNDS
    g_lo = _weibull_profile_score(lo, z, mean_z)
    g_hi = _weibull_profile_score(hi, z, mean_z)
    if g_hi > 0 or g_lo < 0:
        # no sign change: the likelihood keeps rising toward the bound
        b = hi if g_hi > 0 else lo
        converged, iterations = False, 0
    else:
        b, info = optimize.brentq(
            _weibull_profile_score, lo, hi, args=(z, mean_z), xtol=PARAM_TOL * 1e-2, rtol=4 * np.finfo(float).eps,
            full_output=True,
        )
        converged, iterations = info.converged, info.iterations
    scale = math.exp(logx[-1] + math.log(float(np.mean(np.exp(b * z)))) / b)
    return DistributionParams(Family.WEIBULL, scale, b), converged, iterations


def _qexp_nll_grad(theta: np.ndarray, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood in (log kappa, q) and its gradient."""
    log_k, q = theta
    kappa = math.exp(log_k)
    u = (q - 1.0) * x / kappa
    l1p = np.log1p(u)
    ratio = u / (1.0 + u)
    c = q / (q - 1.0)
    nll = log_k + c * float(l1p.mean())
    d_logk = 1.0 - c * float(ratio.mean())
    # d/dq of c*log1p(u): dc/dq = -1/(q-1)^2 ; du/dq = x/kappa = u/(q-1)
    d_q = -float(l1p.mean()) / (q - 1.0) ** 2 + c * float(ratio.mean()) / (q - 1.0)
    return nll, np.array([d_logk, d_q])


def fit_qexp_mle(x: np.ndarray) -> tuple[DistributionParams, bool, int]:
    """Bounded maximization over (log kappa, q) from kappa0 = mean/2, q0 = 1.3.

    Data are divided by their mean first so the problem is scale-free; the
    scale is restored afterwards.
    """
    m = float(x.mean())
    xs = x / m
    theta0 = np.array([math.log(0.5), 1.3])
    res = optimize.minimize(
        _qexp_nll_grad,
        theta0,
        args=(xs,),
        jac=True,
        method="L-BFGS-B",
        bounds=[(math.log(1e-8), math.log(1e8)), (Q_LOWER, Q_UPPER)],
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000},
    )
    theta = res.x
    iterations = int(res.nit)
    # L-BFGS-B stops on objective changes; convergence is judged by a Newton
    # polish that must settle the parameters to PARAM_TOL at an interior optimum
    converged = False
    if Q_LOWER < theta[1] < Q_UPPER:
        theta, converged, extra = _newton_polish(theta, xs)
        iterations += extra
    q = float(np.clip(theta[1], Q_LOWER, Q_UPPER))
    return DistributionParams(Family.QEXP, math.exp(theta[0]) * m, q), converged, iterations


def _newton_polish(theta: np.ndarray, x: np.ndarray, max_iter: int = 50) -> tuple[np.ndarray, bool, int]:
    h = 1e-6
    for it in range(1, max_iter + 1):
        _, g = _qexp_nll_grad(theta, x)
        hess = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            hess[:, j] = (_qexp_nll_grad(theta + e, x)[1] - _qexp_nll_grad(theta - e, x)[1]) / (2 * h)
        hess = 0.5 * (hess + hess.T)
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            return theta, False, it
        if not np.all(np.linalg.eigvalsh(hess) > 0):
            return theta, False, it
        new = theta - step
        if not Q_LOWER < new[1] < Q_UPPER:
            return theta, False, it
        theta = new
        if np.all(np.abs(step) <= PARAM_TOL * np.maximum(1.0, np.abs(theta))):
            return theta, True, it
    return theta, False, max_iter


def fit_mle(samples, family: Family | str, chi_pdf: BinnedPdf | None = None, chi_space: str = "log") -> FitResult:
    """Maximum-likelihood fit on raw samples.

    ``chi`` is measured against ``chi_pdf`` (default: the empirical pdf
    of the same samples, binned per ``default_binning``).
    """
    family = Family(family)
    x = _prepare_samples(samples)
    if family is Family.WEIBULL:
        params, converged, iterations = fit_weibull_mle(x)
    else:
        params, converged, iterations = fit_qexp_mle(x)
    if chi_pdf is None:
        chi_pdf = empirical_pdf(x, default_binning(x))
    return FitResult(
        params=params,
        method=FitMethod.MLE,
        chi=chi_rms(params, chi_pdf, chi_space),
        converged=converged,
        iterations=iterations,
        log_likelihood=float(np.sum(log_pdf(params, x))),
    )


def _initial_guess(pdf_: BinnedPdf, family: Family) -> np.ndarray:
    """Moment-based start from the binned distribution."""
    w = pdf_.densities * pdf_.widths
    w = w / w.sum()
    logc = np.log(pdf_.centers)
    if family is Family.WEIBULL:
        mean_log = float(np.dot(w, logc))
        sd = float(np.sqrt(np.dot(w, (logc - mean_log) ** 2)))
        b0 = float(np.clip(math.pi / (math.sqrt(6.0) * sd), 0.05, 20.0)) if sd > 0 else 1.0
        a0 = math.exp(mean_log + 0.5772156649015329 / b0)
        return np.array([math.log(a0), b0])
    mean = float(np.dot(w, pdf_.centers))
    return np.array([math.log(mean / 2.0), 1.3])


def fit_nlse(pdf_: BinnedPdf, family: Family | str, chi_space: str = "log") -> FitResult:
    """Least squares on log10 densities, every non-empty bin weighted equally."""
    family = Family(family)
    if len(pdf_) < MIN_NLSE_BINS:
        raise ValueError(f"NLSE needs at least {MIN_NLSE_BINS} non-empty bins, got {len(pdf_)}")
    # work in units of the geometric mean centre for scale-free conditioning
    unit = float(np.exp(np.mean(np.log(pdf_.centers))))
    centers = pdf_.centers / unit
    target = np.log10(pdf_.densities * unit)
    if family is Family.WEIBULL:
        bounds = ([-np.inf, WEIBULL_SHAPE_BOUNDS[0]], [np.inf, WEIBULL_SHAPE_BOUNDS[1]])
    else:
        bounds = ([-np.inf, Q_LOWER], [np.inf, Q_UPPER])

    def residuals(theta):
        params = DistributionParams(family, math.exp(theta[0]), theta[1])
        return log_pdf(params, centers) / math.log(10.0) - target

    theta0 = _initial_guess(BinnedPdf(pdf_.bin_edges / unit, centers, pdf_.densities * unit, pdf_.counts, pdf_.n_total), family)
    theta0[1] = np.clip(theta0[1], bounds[0][1] + 1e-9, bounds[1][1] - 1e-9)
    res = optimize.least_squares(
        residuals, theta0, bounds=bounds, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000, x_scale=1.0
    )
    at_bound = not (bounds[0][1] < res.x[1] < bounds[1][1])
    params = DistributionParams(family, math.exp(res.x[0]) * unit, float(res.x[1]))
    return FitResult(
        params=params,
        method=FitMethod.NLSE,
        chi=chi_rms(params, pdf_, chi_space),
        converged=bool(res.status > 0) and not at_bound,
        iterations=int(res.nfev),
    )


@dataclass(frozen=True)
class Comparison:
    preferred: Family | None
    chi_first: float
    chi_second: float

    @property
    def indistinguishable(self) -> bool:
        return self.preferred is None


def compare(fit_a: FitResult, fit_b: FitResult) -> Comparison:
    """Prefer the fit with the smaller chi; ``preferred`` is None on a tie."""
    if fit_a.method is not fit_b.method:
        raise ValueError("fits were produced by different methods")
    if abs(fit_a.chi - fit_b.chi) < TIE_TOLERANCE:
        return Comparison(None, fit_a.chi, fit_b.chi)
    best = fit_a if fit_a.chi < fit_b.chi else fit_b
    return Comparison(best.params.family, fit_a.chi, fit_b.chi)
