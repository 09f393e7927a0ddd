"""Acceptance criteria 1-9, one test each.

Every test prints a single ``CRITERION n PASS|FAIL|SKIP ...`` line before its
assertions, so ``pytest -v -s tests/test_acceptance.py`` (or the tee'd log of a
plain run) doubles as the acceptance report. Scenarios and seeds are fixed
here, up front; tolerances are the stated ones.

Criterion 9 needs a user-supplied amplitude CSV in SEAKDE_IPIX_CSV.
"""

import csv
import filecmp
import json
import math
import os
import time

import numpy as np
import pytest
from scipy import integrate

from seakde import bandwidth as bw
from seakde import cfar, pipeline
from seakde.cli import main as cli_main
from seakde.clutter_sim import ClutterScenario, TrueClutterModel, generate
from seakde.kernels import KernelSpec, MomentMode, kernel_pdf, roughness, second_moment

pytestmark = pytest.mark.slow

# fixed scenarios
C4_SCENARIO = ClutterScenario("rayleigh", {"scale": 1.0}, n_cells=1, samples_per_cell=2048,
                              rng_seed=7)
C5_SCENARIO = ClutterScenario("k", {"shape": 0.5, "mean_power": 1.0}, n_cells=1,
                              samples_per_cell=2048, rng_seed=11)
C6_SCENARIO = ClutterScenario("k", {"shape": 0.5, "mean_power": 1.0}, n_cells=11,
                              samples_per_cell=10_000, rng_seed=13)
C7_SCENARIO = ClutterScenario("k", {"shape": 0.5, "mean_power": 1.0}, target_amplitude=2.0,
                              target_fraction=0.99, n_cells=6, samples_per_cell=10_240,
                              rng_seed=21)
PFA = (1e-3, 1e-2, 1e-1)
IPIX_ENV = "SEAKDE_IPIX_CSV"


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'} {detail}")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _quad(f, k):
    """Integral over the kernel support, split at the mean for accuracy."""
    if k.one_sided:
        mid = k.a / k.b if k.family.value == "gamma" else k.a
        pieces = [(0.0, mid), (mid, np.inf)]
    else:
        pieces = [(-np.inf, k.a), (k.a, np.inf)]
    return sum(integrate.quad(f, lo, hi, limit=400, epsabs=0.0, epsrel=1e-12)[0]
               for lo, hi in pieces)


# criterion runners; each writes CSVs into out_dir and returns its summary ---

def run_c4(out_dir):
    ds = generate(C4_SCENARIO).normalized("maxabs", joint=True)
    x = ds.cells[0].amplitudes
    grid = bw.log_grid(1e-3, 1.0, 200)
    dlog = math.log(grid[1] / grid[0])
    rows = []
    for k in pipeline.PAPER_KERNELS:
        r = bw.solve_bandwidth(k, x)
        h_bf = bw.brute_force_h_opt(k, x, grid)
        finite = r.h_opt > 0 and math.isfinite(r.h_opt)
        steps = abs(math.log(r.h_opt / h_bf)) / dlog if finite else math.inf
        rows.append((k.family.value, r.status, len(r.iterations), repr(r.h_opt), repr(h_bf),
                     repr(steps)))
    _write_rows(os.path.join(out_dir, "c4_bandwidth.csv"),
                ("kernel", "status", "iterations", "h_fixed_point", "h_brute_force",
                 "grid_steps"), rows)
    return rows


def run_c5(out_dir):
    cfg = pipeline.RunConfig(scenario=C5_SCENARIO)
    reports = pipeline.run_evaluate(pipeline.load_dataset(cfg), cfg, out_dir)
    return {r.model_name: r.pdf_mse for r in reports}


def truth_mse(out_dir):
    """MSE of each model's pdf.csv column against the scaled generating pdf."""
    scale = float(np.max(generate(C5_SCENARIO).cells[0].amplitudes))
    with open(os.path.join(out_dir, "pdf.csv")) as fh:
        rows = list(csv.reader(fh))
    cols = np.array([[float(v) for v in r] for r in rows[1:]])
    truth = scale * TrueClutterModel(C5_SCENARIO).pdf(scale * cols[:, 0])
    return {name: float(np.mean((cols[:, i] - truth) ** 2))
            for i, name in enumerate(rows[0]) if i > 1}


def run_c6(out_dir):
    ds = generate(C6_SCENARIO)
    truth = TrueClutterModel(C6_SCENARIO)
    rows = cfar.evaluate(truth, ds.cells[1:], ds.cells[0], PFA, training=ds.cells[0])
    cfar.write_reports_csv(rows, os.path.join(out_dir, "c6_pd_pfa.csv"))
    return rows


def run_c7(out_dir):
    cfg = pipeline.RunConfig(scenario=C7_SCENARIO, pfa_grid=PFA)
    return pipeline.run_detect(pipeline.load_dataset(cfg), cfg, out_dir)


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    """Output directories of the first pass over criteria 4-7 (filled lazily)."""
    return {"root": tmp_path_factory.mktemp("acceptance"), "dirs": {}, "results": {}}


def _run(first_run, name, fn):
    if name not in first_run["results"]:
        d = first_run["root"] / name
        d.mkdir()
        t = time.perf_counter()
        res = fn(str(d))
        first_run["results"][name] = (res, time.perf_counter() - t)
        first_run["dirs"][name] = d
    return first_run["results"][name]


# --------------------------------------------------------------------------------

def test_criterion_1_kernel_closed_forms(capsys):
    t = time.perf_counter()
    rng = np.random.default_rng(1)
    kernels = []
    for _ in range(50):
        kernels.append(KernelSpec.gaussian(rng.uniform(-3, 3), rng.uniform(0.2, 5)))
        kernels.append(KernelSpec.gamma(rng.uniform(0.75, 8), rng.uniform(0.2, 5)))
        kernels.append(KernelSpec.weibull(rng.uniform(0.2, 5), rng.uniform(0.75, 6)))
    worst_r, worst_m, paper_dev_ok = 0.0, 0.0, True
    for k in kernels:
        rk = _quad(lambda u: kernel_pdf(k, u) ** 2, k)
        worst_r = max(worst_r, abs(rk / roughness(k) - 1))
        m2 = _quad(lambda u: u * u * kernel_pdf(k, u), k)
        if k.family.value == "gamma":
            worst_m = max(worst_m, abs(m2 / second_moment(k, MomentMode.CORRECTED) - 1))
            # paper-mode value differs from the true integral by exactly beta^2
            paper = second_moment(k, MomentMode.PAPER)
            paper_dev_ok &= (abs(paper / m2 - k.b ** 2) <= 1e-6 * k.b ** 2
                             and (k.b == 1.0 or abs(paper - m2) > 1e-6 * m2))
        else:
            worst_m = max(worst_m, abs(m2 / second_moment(k) - 1))
    elapsed = time.perf_counter() - t
    ok = worst_r <= 1e-8 and worst_m <= 1e-6 and paper_dev_ok and elapsed < 10
    report(capsys, 1, ok, f"150 kernels: max rel err R(K) {worst_r:.2e} (<=1e-8), "
                          f"mu2 {worst_m:.2e} (<=1e-6), gamma paper-mode deviation asserted "
                          f"{paper_dev_ok}, {elapsed:.1f}s (<10s)")
    assert worst_r <= 1e-8
    assert worst_m <= 1e-6
    assert paper_dev_ok
    assert elapsed < 10


def test_criterion_2_closed_form_minimality(capsys):
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    bad = []
    for _ in range(20):
        r_k, mu2 = rng.uniform(0.05, 5), rng.uniform(0.05, 20)
        n, r_f2 = int(rng.integers(10, 10 ** 6)), 10 ** rng.uniform(-3, 4)
        h = bw.h_from_constants(r_k, mu2, n, r_f2)
        a0 = bw.amise_from_constants(r_k, mu2, h, n, r_f2)
        for f in (0.99, 1.01):
            if bw.amise_from_constants(r_k, mu2, h * f, n, r_f2) < a0:
                bad.append((r_k, mu2, n, r_f2, f))
    elapsed = time.perf_counter() - t
    ok = not bad and elapsed < 1
    report(capsys, 2, ok, f"20 tuples, {len(bad)} with AMISE(h*(1+-1%)) < AMISE(h), "
                          f"{elapsed:.3f}s (<1s)")
    assert not bad
    assert elapsed < 1


def test_criterion_3_normal_reference_cross_check(capsys):
    t = time.perf_counter()
    n = 10_000
    x = np.random.Generator(np.random.PCG64(3)).standard_normal(n)
    k = KernelSpec.gaussian(0.0, 1.0)
    res = bw.solve_bandwidth(k, x)
    h = bw.h_amise_closed_form(k, n, bw.plugin_r_f2(k, x, res.h_opt))
    ref = 1.06 * n ** (-0.2)
    exact_ref = bw.h_amise_closed_form(k, n, 3.0 / (8.0 * math.sqrt(math.pi)))
    rel = abs(h / ref - 1)
    # diagnostic only: plug-in evaluated at the normal-reference pilot
    h_pilot = bw.h_amise_closed_form(k, n, bw.plugin_r_f2(k, x, exact_ref))
    elapsed = time.perf_counter() - t
    ok = rel <= 0.2 and elapsed < 60
    report(capsys, 3, ok, f"plug-in h {h:.4f} vs 1.06 N^-1/5 = {ref:.4f} (rel {rel:.1%}, <=20%; "
                          f"exact normal reference {exact_ref:.4f}; not gated: pilot at "
                          f"reference gives {h_pilot:.4f}), status {res.status}, "
                          f"{elapsed:.1f}s (<60s)")
    assert rel <= 0.2
    assert elapsed < 60


def test_criterion_4_fixed_point_convergence(capsys, first_run):
    rows, elapsed = _run(first_run, "c4", run_c4)
    per = [f"{r[0]}: {r[1]} it={r[2]} h={float(r[3]):.4g} bf={float(r[4]):.4g} "
           f"steps={float(r[5]):.1f}" for r in rows]
    ok = (all(r[1] == "converged" and r[2] <= 10 and float(r[5]) <= 2 for r in rows)
          and elapsed < 300)
    report(capsys, 4, ok, "; ".join(per) + f"; {elapsed:.0f}s (<300s)")
    for r in rows:
        assert r[1] == "converged", f"{r[0]} kernel: {r[1]}"
        assert r[2] <= 10
        assert float(r[5]) <= 2, f"{r[0]} kernel is {float(r[5]):.1f} grid steps from brute force"
    assert elapsed < 300


def test_criterion_5_mse_reduction(capsys, first_run):
    mse, elapsed = _run(first_run, "c5", run_c5)
    best_par = min(v for k, v in mse.items() if k.startswith("param-"))
    ratio = {k: best_par / v for k, v in mse.items() if k.startswith("kde-")}
    need = {"kde-gamma": 10.0, "kde-weibull": 10.0, "kde-gaussian": 3.0}
    ok = all(ratio[k] >= need[k] for k in need) and elapsed < 300
    vs_truth = truth_mse(first_run["dirs"]["c5"])
    report(capsys, 5, ok, f"best parametric MSE {best_par:.3g}; reduction "
           + ", ".join(f"{k} {ratio[k]:.2f}x (>={need[k]:g}x)" for k in need)
           + f"; {elapsed:.0f}s (<300s); not gated, MSE vs true pdf: "
           + ", ".join(f"{k} {v:.3g}" for k, v in vs_truth.items()))
    for k in need:
        assert ratio[k] >= need[k], f"{k}: {ratio[k]:.2f}x"
    assert elapsed < 300


def test_criterion_6_cfar_calibration(capsys, first_run):
    rows, elapsed = _run(first_run, "c6", run_c6)
    parts, ok = [], elapsed < 120
    for r in rows:
        lo, hi = cfar.binomial_interval(r.pfa_target, r.n_clutter_trials, 0.99)
        inside = lo <= r.pfa_empirical <= hi
        ok &= inside and r.n_clutter_trials >= 10 ** 5
        parts.append(f"{r.pfa_target:g}: {r.pfa_empirical:.5f} in [{lo:.5f}, {hi:.5f}]")
    report(capsys, 6, ok, f"{rows[0].n_clutter_trials} trials; " + "; ".join(parts)
           + f"; {elapsed:.0f}s (<120s)")
    for r in rows:
        lo, hi = cfar.binomial_interval(r.pfa_target, r.n_clutter_trials, 0.99)
        assert lo <= r.pfa_empirical <= hi
        assert r.n_clutter_trials >= 10 ** 5
    assert elapsed < 120


def test_criterion_7_detection_gain(capsys, first_run):
    rows, elapsed = _run(first_run, "c7", run_c7)
    at = [r for r in rows if r.pfa_target == 1e-3]
    kde = [r for r in at if r.model_name.startswith("kde-")]
    par = [r for r in at if r.model_name.startswith("param-")]
    fails = []
    for a in kde:
        for b in par:
            se = math.hypot(cfar.monte_carlo_se(a.pd_empirical, a.n_target_trials),
                            cfar.monte_carlo_se(b.pd_empirical, b.n_target_trials))
            if not a.pd_empirical - b.pd_empirical > se:
                fails.append(f"{a.model_name} {a.pd_empirical:.4f} vs {b.model_name} "
                             f"{b.pd_empirical:.4f} (pfa_emp {b.pfa_empirical:.4f})")
    n_target = min(r.n_target_trials for r in at)
    ok = not fails and n_target >= 10 ** 4 and elapsed < 600
    summary = ", ".join(f"{r.model_name} Pd={r.pd_empirical:.4f}/Pfa={r.pfa_empirical:.4f}"
                        for r in at)
    report(capsys, 7, ok, f"Pfa=1e-3, {n_target} target trials: {summary}; "
                          f"{len(fails)} of {len(kde) * len(par)} KDE/parametric pairs without a "
                          f"gap above the MC standard error; {elapsed:.0f}s (<600s)")
    assert n_target >= 10 ** 4
    assert not fails, "; ".join(fails)
    assert elapsed < 600


def test_criterion_8_determinism(capsys, first_run, tmp_path):
    runners = {"c4": run_c4, "c5": run_c5, "c6": run_c6, "c7": run_c7}
    diffs, compared = [], 0
    for name, fn in runners.items():
        _run(first_run, name, fn)
        d = tmp_path / name
        d.mkdir()
        fn(str(d))
        ref = first_run["dirs"][name]
        for f in sorted(p.name for p in ref.iterdir() if p.suffix == ".csv"):
            compared += 1
            if not filecmp.cmp(ref / f, d / f, shallow=False):
                diffs.append(f"{name}/{f}")
    ok = not diffs and compared > 0
    report(capsys, 8, ok, f"{compared} CSVs from criteria 4-7 regenerated, "
                          f"{len(diffs)} differ {diffs}")
    assert compared > 0
    assert not diffs


def test_criterion_9_ipix_reproduction(capsys, tmp_path):
    path = os.environ.get(IPIX_ENV)
    if not path:
        with capsys.disabled():
            print(f"\nCRITERION 9 SKIP set {IPIX_ENV} to an amplitude CSV to run it")
        pytest.skip(f"{IPIX_ENV} not set")
    cfg = os.path.join(os.path.dirname(__file__), "..", "configs", "paper_repro.toml")
    codes = {}
    for cmd in ("bandwidth", "evaluate", "detect"):
        codes[cmd] = cli_main([cmd, "--config", cfg, "--data", path, "--out-dir", str(tmp_path)])
    res = json.loads((tmp_path / "bandwidth.json").read_text())["results"]
    paper = {"gaussian": 0.08, "gamma": 0.05, "weibull": 0.06}
    got = ", ".join(f"{r['kernel']['family']} h={r['h_opt']:.4g} ({r['status']}, paper "
                    f"{paper[r['kernel']['family']]})" for r in res)
    ok = codes["evaluate"] == 0 and codes["detect"] == 0 and codes["bandwidth"] in (0, 5)
    report(capsys, 9, ok, f"exit codes {codes}; {got} (agreement reported, not gated)")
    assert codes["bandwidth"] in (0, 5)
    assert codes["evaluate"] == 0 and codes["detect"] == 0
    for f in ("fit_report.csv", "ccdf.csv", "pdf.csv", "pd_pfa.csv", "pd_comparison.csv"):
        assert (tmp_path / f).exists()
