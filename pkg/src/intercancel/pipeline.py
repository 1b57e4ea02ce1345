"""End-to-end batch run: ingest, durations, fits, Hurst exponents, MF-DFA, reports."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import __version__
from .distfit import Binning, Family, FitMethod, empirical_pdf, fit_mle, fit_nlse
from .durations import DayPolicy, compute_stats, ensemble, extract_durations
from .ingest import EventStream, Side, parse_order_flow
from .multifractal import mfdfa, width_shuffle_test
from .reports import (
    FIT_COLUMNS,
    HURST_COLUMNS,
    MULTIFRACTAL_COLUMNS,
    STATS_COLUMNS,
    atomic_write,
    columns_text,
    write_json,
    write_table,
)
from .scaling import CDMA_MIN_SCALE, DFA_MIN_SCALE, N_SCALES, cdma, default_scales, dfa, shuffle_test
from .synth import GeneratorKind, GeneratorSpec, embed_durations, generate

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

_DURATION_KINDS = (GeneratorKind.WEIBULL_IID, GeneratorKind.QEXP_IID, GeneratorKind.LONG_MEMORY_HEAVY_TAIL)


class ConfigError(ValueError):
    pass


@dataclass
class GeneratorInput:
    """A synthetic unit. Duration generators are embedded in a buy-side flow."""

    name: str
    spec: GeneratorSpec
    days: int = 1
    filler_probs: tuple[float, float, float] = (0.4, 0.45, 0.15)

    def to_dict(self) -> dict:
        return {"name": self.name, "days": self.days, "filler_probs": list(self.filler_probs), **self.spec.to_dict()}


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    generators: list[GeneratorInput] = field(default_factory=list)
    sides: list[str] = field(default_factory=lambda: ["buy", "sell"])
    day_policy: str = "reset"
    methods: list[str] = field(default_factory=lambda: ["MLE", "NLSE"])
    families: list[str] = field(default_factory=lambda: ["Weibull", "QExponential"])
    binning: str = "hybrid"
    chi_space: str = "log"
    scale_min: int = DFA_MIN_SCALE
    scale_max: int | None = None
    scale_count: int = N_SCALES
    q_min: float = -4.0
    q_max: float = 4.0
    q_step: float = 0.25
    shuffles: int = 100
    seed: int = 0
    out: str = "out"
    format: str = "tsv"
    workers: int = 1
    plot_data: bool = True

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        data = dict(data)
        gens = []
        for g in data.pop("generators", []) or []:
            g = dict(g)
            name = g.pop("name", None) or f"{g.get('kind')}_{g.get('seed', 0)}"
            days = int(g.pop("days", 1))
            filler = tuple(g.pop("filler_probs", (0.4, 0.45, 0.15)))
            try:
                spec = GeneratorSpec.from_dict(g)
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"generator {name}: {exc}") from exc
            gens.append(GeneratorInput(name, spec, days, filler))
        scales = data.pop("scales", None) or {}
        qg = data.pop("q_grid", None) or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(generators=gens, **data)
        if scales:
            cfg.scale_min = int(scales.get("min", cfg.scale_min))
            cfg.scale_max = scales.get("max", cfg.scale_max)
            cfg.scale_count = int(scales.get("count", cfg.scale_count))
        if qg:
            cfg.q_min = float(qg.get("min", cfg.q_min))
            cfg.q_max = float(qg.get("max", cfg.q_max))
            cfg.q_step = float(qg.get("step", cfg.q_step))
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, Mapping):
            raise ConfigError("config file must hold a mapping")
        return cls.from_mapping(data)

    def validate(self) -> None:
        for p in self.inputs:
            if not Path(p).exists():
                raise ConfigError(f"input path does not exist: {p}")
        try:
            [Side.parse(s) for s in self.sides]
            DayPolicy(self.day_policy)
            [FitMethod(m) for m in self.methods]
            [Family(f) for f in self.families]
            Binning(self.binning)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.chi_space not in ("log", "linear"):
            raise ConfigError("chi_space must be log or linear")
        if self.format not in ("tsv", "json"):
            raise ConfigError("format must be tsv or json")
        if self.scale_min < DFA_MIN_SCALE:
            raise ConfigError(f"scale min must be >= {DFA_MIN_SCALE}")
        if self.scale_count < 2:
            raise ConfigError("scale count must be >= 2")
        q = self.q_grid()
        if not all(np.any(np.isclose(q, v, atol=1e-12)) for v in (-4.0, 0.0, 4.0)):
            raise ConfigError("q grid must include -4, 0 and 4")
        if self.shuffles < 1:
            raise ConfigError("shuffles must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        names = [g.name for g in self.generators] + [Path(p).stem for p in self.input_files()]
        if len(set(names)) != len(names):
            raise ConfigError("unit names must be unique")

    def q_grid(self) -> np.ndarray:
        n = int(round((self.q_max - self.q_min) / self.q_step))
        q = self.q_min + self.q_step * np.arange(n + 1)
        return np.round(q, 12)

    def input_files(self) -> list[Path]:
        files: list[Path] = []
        for p in map(Path, self.inputs):
            if p.is_dir():
                files.extend(sorted(p.glob("*.csv")))
            else:
                files.append(p)
        return files

    def scales_for(self, n: int, odd: bool = False) -> np.ndarray:
        smax = n // 6 if self.scale_max is None else min(int(self.scale_max), n // 6)
        smin = max(self.scale_min, CDMA_MIN_SCALE) if odd else self.scale_min
        if smax < smin:
            raise ValueError(f"series of length {n} is too short for the scale grid")
        return default_scales(6 * smax + 5, self.scale_count, smin, odd=odd)

    def to_dict(self) -> dict:
        """Settings that determine the results; output location and worker count are left out."""
        d = asdict(self)
        d["generators"] = [g.to_dict() for g in self.generators]
        del d["out"], d["workers"]
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class SideResult:
    stock: str
    side: str
    stats_row: tuple | None = None
    fit_rows: list[tuple] = field(default_factory=list)
    hurst_rows: list[tuple] = field(default_factory=list)
    mf_row: tuple | None = None
    durations: np.ndarray | None = None
    plots: dict[str, str] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    error: dict | None = None


def load_unit(unit: str | GeneratorInput) -> tuple[str, EventStream]:
    if isinstance(unit, GeneratorInput):
        spec = unit.spec
        if spec.kind is GeneratorKind.POISSON_FLOW:
            return unit.name, generate(spec)
        if spec.kind in _DURATION_KINDS:
            d = np.maximum(np.floor(np.asarray(generate(spec), dtype=float) + 0.5), 1).astype(np.int64)
            return unit.name, embed_durations(d, seed=spec.seed, filler_probs=unit.filler_probs, days=unit.days)
        raise ValueError(f"generator kind {spec.kind.value} does not produce order flow")
    return Path(unit).stem, parse_order_flow(unit)


def analyze_side(stream: EventStream, stock: str, side: Side, cfg: RunConfig) -> SideResult:
    label = side.label
    res = SideResult(stock, label)
    series = extract_durations(stream, side, cfg.day_policy)
    stats = compute_stats(stream, side, series)
    res.stats_row = (stock, label, stats.n_cancel, stats.n_all, stats.r, stats.gamma, stats.mean_duration)
    d = series.durations
    res.durations = d
    if len(d) == 0:
        raise ValueError("no durations on this side")

    emp = empirical_pdf(d, cfg.binning)
    for method in cfg.methods:
        for family in cfg.families:
            if FitMethod(method) is FitMethod.MLE:
                fit = fit_mle(d, family, chi_pdf=emp, chi_space=cfg.chi_space)
            else:
                fit = fit_nlse(emp, family, chi_space=cfg.chi_space)
            res.fit_rows.append(
                (stock, label, method, Family(family).value, fit.params.scale, fit.params.shape, fit.chi, fit.converged)
            )

    n = len(d)
    dfa_scales = cfg.scales_for(n)
    cdma_scales = cfg.scales_for(n, odd=True)
    q = cfg.q_grid()
    x = d.astype(float)
    h_dfa = dfa(x, dfa_scales)
    h_cdma = cdma(x, cdma_scales)
    sfl_dfa = shuffle_test(x, "DFA", cfg.shuffles, cfg.seed, dfa_scales)
    sfl_cdma = shuffle_test(x, "CDMA", cfg.shuffles, cfg.seed, cdma_scales)
    res.hurst_rows = [
        (stock, label, "DFA", h_dfa.hurst, sfl_dfa.mean),
        (stock, label, "CDMA", h_cdma.hurst, sfl_cdma.mean),
    ]
    mf = mfdfa(x, q, dfa_scales)
    wid = width_shuffle_test(x, cfg.shuffles, cfg.seed, original=mf)
    res.mf_row = (stock, label, mf.delta_alpha, wid.mean, wid.std, wid.residual)

    res.provenance = {
        "durations": int(n),
        "empty_days": list(series.empty_days),
        "dfa": {"scales": dfa_scales.tolist(), "stderr": h_dfa.stderr, "r2": h_dfa.r2, "reliable": h_dfa.reliable,
                "sfl_std": sfl_dfa.std},
        "cdma": {"scales": cdma_scales.tolist(), "stderr": h_cdma.stderr, "r2": h_cdma.r2,
                 "reliable": h_cdma.reliable, "sfl_std": sfl_cdma.std},
        "mfdfa": {"flags": list(mf.flags), "excluded_fraction": mf.excluded_fraction,
                  "min_fit_r2": float(mf.per_q_fit_r2.min())},
        "shuffle_seed_schedule": {"base_seed": cfg.seed, "replicates": cfg.shuffles},
    }

    if cfg.plot_data:
        res.plots["pdf"] = columns_text(("d", "P"), (emp.centers, emp.densities))
        resc = emp.scaled(1.0 / series.mean_duration)
        res.plots["rescaled_pdf"] = columns_text(("d_over_mean", "P_times_mean"), (resc.centers, resc.densities))
        res.plots["dfa"] = columns_text(("s", "F"), (h_dfa.scales, h_dfa.fluctuations))
        res.plots["cdma"] = columns_text(("s", "F"), (h_cdma.scales, h_cdma.fluctuations))
        res.plots["fq"] = columns_text(["s"] + [f"q={v:g}" for v in mf.q_grid], [mf.scales, *mf.fq])
        res.plots["tau"] = columns_text(("q", "h", "tau"), (mf.q_grid, mf.h, mf.tau))
        res.plots["spectrum"] = columns_text(("alpha", "f"), (mf.alpha, mf.f_alpha))
    return res


def run_unit(unit: str | GeneratorInput, cfg: RunConfig) -> list[SideResult]:
    name = unit.name if isinstance(unit, GeneratorInput) else Path(unit).stem
    try:
        stock, stream = load_unit(unit)
    except Exception as exc:  # noqa: BLE001 - recorded per unit
        return [SideResult(name, "*", error={"stock": name, "side": "*", "stage": "load", "message": str(exc)})]
    out = []
    for s in cfg.sides:
        side = Side.parse(s)
        try:
            out.append(analyze_side(stream, stock, side, cfg))
        except Exception as exc:  # noqa: BLE001
            out.append(SideResult(stock, side.label, error={
                "stock": stock, "side": side.label, "stage": "analysis", "message": f"{type(exc).__name__}: {exc}"}))
    return out


def _ensemble_rows(results: Sequence[SideResult], cfg: RunConfig) -> tuple[list[tuple], list[dict]]:
    rows, errors = [], []
    for s in cfg.sides:
        label = Side.parse(s).label
        series = [r.durations for r in results if r.side == label and r.error is None and r.durations is not None]
        if len(series) < 2:
            continue
        try:
            pooled = ensemble(series)
            emp = empirical_pdf(pooled, Binning.LOG)
            for method in cfg.methods:
                for family in cfg.families:
                    if FitMethod(method) is FitMethod.MLE:
                        fit = fit_mle(pooled, family, chi_pdf=emp, chi_space=cfg.chi_space)
                    else:
                        fit = fit_nlse(emp, family, chi_space=cfg.chi_space)
                    rows.append(("ENSEMBLE", label, method, Family(family).value, fit.params.scale, fit.params.shape,
                                 fit.chi, fit.converged))
        except Exception as exc:  # noqa: BLE001
            errors.append({"stock": "ENSEMBLE", "side": label, "stage": "ensemble", "message": str(exc)})
    return rows, errors


@dataclass
class RunOutcome:
    exit_code: int
    out_dir: Path
    errors: list[dict]
    files: list[Path]


def run_pipeline(cfg: RunConfig) -> RunOutcome:
    out = Path(cfg.out)
    try:
        cfg.validate()
    except ConfigError as exc:
        return _fatal(out, "config", str(exc))
    units: list[str | GeneratorInput] = [str(p) for p in cfg.input_files()] + list(cfg.generators)
    if not units:
        return _fatal(out, "inputs", "no inputs")

    if cfg.workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_unit = list(pool.map(run_unit, units, [cfg] * len(units)))
    else:
        per_unit = [run_unit(u, cfg) for u in units]
    results = [r for rs in per_unit for r in rs]

    errors = [r.error for r in results if r.error is not None]
    ok = [r for r in results if r.error is None]
    fits = {"buy": [], "sell": []}
    for r in ok:
        fits[r.side].extend(r.fit_rows)
    ens_rows, ens_errors = _ensemble_rows(ok, cfg)
    errors.extend(ens_errors)
    for row in ens_rows:
        fits[row[1]].append(row)

    fmt = cfg.format
    files = [
        write_table(out, "stats", STATS_COLUMNS, [r.stats_row for r in ok], fmt),
        write_table(out, "fits_buy", FIT_COLUMNS, fits["buy"], fmt),
        write_table(out, "fits_sell", FIT_COLUMNS, fits["sell"], fmt),
        write_table(out, "hurst", HURST_COLUMNS, [row for r in ok for row in r.hurst_rows], fmt),
        write_table(out, "multifractal", MULTIFRACTAL_COLUMNS, [r.mf_row for r in ok], fmt),
    ]
    if cfg.plot_data:
        for r in ok:
            for kind, text in r.plots.items():
                files.append(atomic_write(out / "plots" / f"{r.stock}_{r.side}_{kind}.tsv", text))
    if fmt == "json":
        files.append(write_json(out / "provenance.json", {
            "version": __version__,
            "config": cfg.to_dict(),
            "config_sha256": cfg.digest(),
            "q_grid": cfg.q_grid().tolist(),
            "event_clock": "one tick per log record; opening-auction records count individually",
            "units": {f"{r.stock}/{r.side}": r.provenance for r in ok},
        }))
    files.append(write_json(out / "errors.json", {"errors": errors}))
    for e in errors:
        log.warning("unit %s/%s failed at %s: %s", e["stock"], e["side"], e["stage"], e["message"])
    return RunOutcome(EXIT_PARTIAL if errors else EXIT_OK, out, errors, files)


def _fatal(out: Path, stage: str, message: str) -> RunOutcome:
    err = [{"stock": None, "side": None, "stage": stage, "message": message}]
    path = write_json(out / "errors.json", {"errors": err})
    return RunOutcome(EXIT_FATAL, out, err, [path])
