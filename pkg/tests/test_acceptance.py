"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import hashlib
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from intercancel.distfit import (
    BinnedPdf,
    DistributionParams,
    Family,
    empirical_pdf,
    evaluate_pdf,
    fit_mle,
    fit_nlse,
)
from intercancel.durations import compute_stats, extract_durations
from intercancel.ingest import Side
from intercancel.multifractal import mfdfa
from intercancel.pipeline import EXIT_OK, RunConfig, run_pipeline
from intercancel.scaling import cdma, dfa, shuffle_test
from intercancel.synth import (
    GeneratorSpec,
    binomial_cascade,
    cascade_alpha,
    cascade_hurst,
    fgn,
    generate,
    qexp_ppf,
    rng_for,
    weibull_ppf,
)

WBL = Family.WEIBULL
QE = Family.QEXP
N = 2**16


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return _report


def _integral(params):
    f = lambda d: evaluate_pdf(params, d)
    s = params.scale
    # split at the scale so quad sees the origin behaviour and the tail separately
    pieces = [(0.0, s), (s, 1e3 * s), (1e3 * s, np.inf)]
    return sum(integrate.quad(f, lo, hi, limit=500, epsabs=1e-12, epsrel=1e-12)[0] for lo, hi in pieces)


def test_c01_normalization(report):
    t0 = time.perf_counter()
    wbl = [DistributionParams(WBL, a, b) for a in (0.7, 3.0, 11.21, 40.0) for b in (0.5, 0.75, 0.91, 1.5, 3.0)]
    qe = [DistributionParams(QE, k, q) for k in (1.0, 4.0, 9.13, 30.0) for q in (1.05, 1.22, 1.45, 1.7, 1.89)]
    errs = [abs(_integral(p) - 1.0) for p in wbl + qe]
    dt = time.perf_counter() - t0
    ok = len(wbl) == 20 and len(qe) == 20 and max(errs) <= 1e-6 and dt < 10
    report(1, ok, f"max |integral - 1| = {max(errs):.2e} over 40 pairs, {dt:.2f} s")


def test_c02_mle_recovery(report):
    t0 = time.perf_counter()
    worst_w = worst_q = 0.0
    for seed in range(20):
        u = rng_for(seed, 0).random(10**5)
        w = fit_mle(weibull_ppf(u, 11.21, 0.91), WBL).params
        worst_w = max(worst_w, abs(w.scale / 11.21 - 1), abs(w.shape / 0.91 - 1))
        v = rng_for(seed, 1).random(10**5)
        q = fit_mle(qexp_ppf(v, 9.13, 1.22), QE).params
        worst_q = max(worst_q, abs(q.scale / 9.13 - 1), abs(q.shape / 1.22 - 1))
    dt = time.perf_counter() - t0
    ok = worst_w <= 0.02 and worst_q <= 0.03 and dt < 60
    report(2, ok, f"worst rel. error Weibull {worst_w:.4f} (<=0.02), q-exp {worst_q:.4f} (<=0.03), {dt:.1f} s")


def test_c03_nlse_self_consistency(report):
    edges = np.geomspace(1, 2000, 40)
    worst = 0.0
    for p in (DistributionParams(WBL, 6.5, 0.6), DistributionParams(QE, 8.79, 1.25)):
        fit = fit_nlse(BinnedPdf.from_params(p, edges), p.family).params
        worst = max(worst, abs(fit.scale / p.scale - 1), abs(fit.shape / p.shape - 1))
    x = np.floor(qexp_ppf(rng_for(3).random(10**5), 9.13, 1.22)) + 1
    e = empirical_pdf(x)
    chi_q = fit_mle(x, QE, chi_pdf=e).chi
    chi_w = fit_mle(x, WBL, chi_pdf=e).chi
    ok = worst <= 1e-3 and chi_q < chi_w
    report(3, ok, f"NLSE worst rel. error {worst:.2e} (<=1e-3); MLE chi qE {chi_q:.4f} < WBL {chi_w:.4f}")


def test_c04_hurst_accuracy(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    shuffled = []
    for h in (0.5, 0.6, 0.76, 0.85):
        e_dfa, e_cdma = [], []
        for seed in range(10):
            x = fgn(N, h, rng_for(seed, 100))
            e_dfa.append(abs(dfa(x).hurst - h))
            e_cdma.append(abs(cdma(x).hurst - h))
            if seed < 5:
                shuffled.append(shuffle_test(x, "DFA", 4, base_seed=seed).mean)
                shuffled.append(shuffle_test(x, "CDMA", 4, base_seed=seed).mean)
        m_d, m_c = float(np.mean(e_dfa)), float(np.mean(e_cdma))
        ok &= m_d <= 0.03 and m_c <= 0.03
        lines.append(f"H={h}: MAE dfa {m_d:.4f} cdma {m_c:.4f}")
    sfl = float(np.mean(shuffled))
    worst_sfl = float(np.max(np.abs(np.array(shuffled) - 0.5)))
    dt = time.perf_counter() - t0
    ok &= abs(sfl - 0.5) <= 0.02 and worst_sfl <= 0.02 and dt < 120
    report(4, ok, "; ".join(lines) + f"; shuffled mean {sfl:.4f} (worst |dev| {worst_sfl:.4f}), {dt:.1f} s")


def test_c05_heavy_tails_no_memory(report):
    hs = []
    for seed in range(5):
        x = qexp_ppf(rng_for(seed, 7).random(N), 9.13, 1.22)
        hs.append(dfa(x).hurst)
    worst = float(np.max(np.abs(np.array(hs) - 0.5)))
    report(5, worst <= 0.03, f"DFA H on iid q-exp samples {np.round(hs, 4).tolist()}, worst |H-0.5| {worst:.4f}")


def test_c06_cascade(report):
    t0 = time.perf_counter()
    x = binomial_cascade(16, 0.3)
    # dyadic scales match the cascade's own ratio-2 self-similarity
    r = mfdfa(x, scales=2 ** np.arange(4, 14))
    qs = (-4, -2, -1, 1, 2, 4)
    errs = [abs(r.h_at(q) - float(cascade_hurst(q, 0.3))) for q in qs]
    tau0 = float(r.tau[np.flatnonzero(r.q_grid == 0)[0]])
    analytic = float(cascade_alpha(-4.0, 0.3) - cascade_alpha(4.0, 0.3))
    rel = abs(r.delta_alpha / analytic - 1)
    dt = time.perf_counter() - t0
    ok = max(errs) <= 0.05 and tau0 == -1.0 and rel <= 0.10 and dt < 120
    report(6, ok, f"max |h-h_true| {max(errs):.4f}; tau(0)={tau0}; delta_alpha {r.delta_alpha:.4f} vs {analytic:.4f} "
                  f"({rel:.1%}), {dt:.1f} s")


def test_c07_monofractal_control(report):
    widths, devs = [], []
    for seed in range(10):
        r = mfdfa(fgn(N, 0.76, rng_for(seed, 200)))
        widths.append(r.delta_alpha)
        devs.append(r.chord_deviation())
    cascade_dev = mfdfa(binomial_cascade(16, 0.3)).chord_deviation()
    mean_dev = float(np.mean(devs))
    ok = max(widths) <= 0.2 and mean_dev < 0.05 and cascade_dev > 0.2
    report(7, ok, f"fGn max delta_alpha {max(widths):.4f}; chord deviation mean {mean_dev:.4f} "
                  f"(per seed {np.round(devs, 3).tolist()}); cascade {cascade_dev:.3f}")


def test_c08_order_flow_statistics(report):
    spec = GeneratorSpec("PoissonFlow", 10**6, 0, {"probs": [0.42, 0.08, 0.42, 0.08], "days": 20})
    s = generate(spec)
    series = extract_durations(s, Side.BUY)
    st = compute_stats(s, Side.BUY, series)
    mean = series.mean_duration
    ok = abs(mean / 12.5 - 1) <= 0.02 and st.r > 1 / mean and abs(st.gamma - st.r) <= 0.01
    report(8, ok, f"<d>_buy {mean:.4f}; r {st.r:.4f} > 1/<d> {1 / mean:.4f}; gamma {st.gamma:.4f} (|gamma-r| "
                  f"{abs(st.gamma - st.r):.4f}) over {s.day_count} days")


def _digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_c09_determinism(report, tmp_path):
    gen = {"name": "lm", "kind": "LongMemoryHeavyTail", "length": 8192, "seed": 4,
           "params": {"H": 0.76, "kappa": 7.9, "q": 1.25}}
    flow = {"name": "pf", "kind": "PoissonFlow", "length": 100_000, "seed": 1,
            "params": {"probs": [0.42, 0.08, 0.42, 0.08], "days": 3}}
    digests = []
    for name, workers in (("a", 1), ("b", 1), ("c", 3)):
        cfg = RunConfig.from_mapping({"generators": [gen, flow], "shuffles": 5, "format": "json",
                                      "workers": workers, "out": str(tmp_path / name)})
        assert run_pipeline(cfg).exit_code == EXIT_OK
        digests.append(_digest(tmp_path / name))
    same_bundle = len(set(digests)) == 1

    x = qexp_ppf(rng_for(1).random(5000), 7.9, 1.25)
    perm = rng_for(2).permutation(x)
    invariant = all(fit_mle(x, f) == fit_mle(perm, f) for f in (WBL, QE))
    e1, e2 = empirical_pdf(x, "log"), empirical_pdf(perm, "log")
    invariant &= all(fit_nlse(e1, f) == fit_nlse(e2, f) for f in (WBL, QE))

    y = fgn(8192, 0.7, rng_for(9))
    serial = shuffle_test(y, "DFA", 16, base_seed=3, workers=1).values
    parallel = shuffle_test(y, "DFA", 16, base_seed=3, workers=4).values
    bitwise = serial.tobytes() == parallel.tobytes()
    report(9, same_bundle and invariant and bitwise,
           f"bundles identical {same_bundle}; fits permutation-invariant {invariant}; parallel==serial {bitwise}")


def test_c10_end_to_end(report, tmp_path):
    t0 = time.perf_counter()
    gen = {"name": "LMHT", "kind": "LongMemoryHeavyTail", "length": N, "seed": 0,
           "params": {"H": 0.76, "kappa": 7.9, "q": 1.25}}
    cfg = RunConfig.from_mapping({"generators": [gen], "sides": ["buy"], "out": str(tmp_path / "e2e")})
    outcome = run_pipeline(cfg)
    out = tmp_path / "e2e"
    tables = ("stats", "fits_buy", "fits_sell", "hurst", "multifractal")
    all_tables = outcome.exit_code == EXIT_OK and all((out / f"{t}.tsv").exists() for t in tables)

    def rows(name):
        lines = (out / f"{name}.tsv").read_text().splitlines()
        head = lines[0].split("\t")
        return [dict(zip(head, ln.split("\t"))) for ln in lines[1:]]

    mle_q = next(r for r in rows("fits_buy") if r["method"] == "MLE" and r["family"] == "QExponential")
    k_err = abs(float(mle_q["p_scale"]) / 7.9 - 1)
    q_err = abs(float(mle_q["p_shape"]) / 1.25 - 1)
    h = {r["method"]: float(r["H"]) for r in rows("hurst")}
    resid = float(rows("multifractal")[0]["R"])
    dt = time.perf_counter() - t0
    ok = (all_tables and k_err <= 0.05 and q_err <= 0.05 and abs(h["DFA"] - 0.76) <= 0.05
          and resid > 0 and dt < 300)
    report(10, ok, f"tables {all_tables}; kappa err {k_err:.3f}, q err {q_err:.3f}; H dfa {h['DFA']:.4f} "
                   f"cdma {h['CDMA']:.4f}; R {resid:.4f}; {dt:.1f} s")
