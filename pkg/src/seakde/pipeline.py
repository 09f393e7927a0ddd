"""End-to-end run: configuration, training split, model fitting and outputs.

File names written into an output directory:

``parametric.json``    fitted parametric models
``models.json``        every model used downstream (parametric and KDE)
``fit_report.csv``     model, pdf_mse, ccdf_max_abs_gap against the histogram
``pdf.csv``            PDF of every model on the histogram bin centers
``ccdf.csv``           long-format CCDF curves
``bandwidth.json``     fixed-point results per kernel
``bandwidth_trace.jsonl``  one iteration record per line, tagged by kernel
``pd_pfa.csv``         one detection report per model and Pfa
``pd_comparison.csv``  KDE minus parametric Pd at every Pfa
"""

import csv
from dataclasses import dataclass, field
import json
import logging
import os
import sys

import numpy as np

from . import bandwidth as bw
from . import cfar, metrics
from .clutter_sim import ClutterScenario, generate
from .errors import ConfigError, DegenerateDataError
from .kde import KdeModel
from .kernels import Family, KernelSpec, MomentMode
from .parametric import ParametricModel, empirical_pdf, fit_parametric
from .samples_io import Dataset, NormalizeMode, load_amplitude_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

PAPER_KERNELS = (KernelSpec.gaussian(0.32, 1.38), KernelSpec.gamma(1.8, 0.2),
                 KernelSpec.weibull(0.27, 2.0))
DEFAULT_PFA = (1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class RunConfig:
    kernels: tuple = PAPER_KERNELS
    fixed_point: bw.FixedPointConfig = field(default_factory=bw.FixedPointConfig)
    quadrature: bw.QuadratureConfig = field(default_factory=bw.QuadratureConfig)
    bins: int = 128
    restarts: int = 20
    fit_seed: int = 0
    pfa_grid: tuple = DEFAULT_PFA
    normalize: str = "maxabs"
    scenario: ClutterScenario = None
    data: str = None

    def __post_init__(self):
        if int(self.bins) != self.bins or self.bins < 2:
            raise ConfigError(f"bins must be an integer >= 2, got {self.bins}")
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise ConfigError(f"restarts must be a positive integer, got {self.restarts}")
        grid = tuple(float(p) for p in self.pfa_grid)
        if not grid or any(not (0 < p < 1) for p in grid):
            raise ConfigError(f"pfa values must lie in (0, 1), got {grid}")
        object.__setattr__(self, "pfa_grid", tuple(sorted(set(grid))))
        if self.normalize != "none":
            NormalizeMode.parse(self.normalize)
        if not self.kernels:
            raise ConfigError("at least one kernel is required")

    def kernel(self, family):
        fam = Family.parse(family)
        for k in self.kernels:
            if k.family is fam:
                return k
        raise ConfigError(f"no {fam.value} kernel configured")


def _section(d, name):
    sec = d.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(sec)


def config_from_dict(d) -> RunConfig:
    d = dict(d)
    known = {"kernels", "bandwidth", "quadrature", "fit", "detect", "data", "scenario"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    kw = {}
    kern = _section(d, "kernels")
    if kern:
        kw["kernels"] = tuple(KernelSpec.from_params(f, p) for f, p in kern.items())
    try:
        fp = _section(d, "bandwidth")
        if fp:
            kw["fixed_point"] = bw.FixedPointConfig(**fp)
        q = _section(d, "quadrature")
        if q:
            if "moment_mode" in q:
                q["moment_mode"] = MomentMode(q["moment_mode"])
            kw["quadrature"] = bw.QuadratureConfig(**q)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    except ValueError as e:
        raise ConfigError(str(e)) from None
    fit = _section(d, "fit")
    for key in ("bins", "restarts", "seed"):
        if key in fit:
            kw["fit_seed" if key == "seed" else key] = fit.pop(key)
    if fit:
        raise ConfigError(f"unknown [fit] keys {sorted(fit)}")
    det = _section(d, "detect")
    if "pfa" in det:
        kw["pfa_grid"] = tuple(det.pop("pfa"))
    if det:
        raise ConfigError(f"unknown [detect] keys {sorted(det)}")
    data = _section(d, "data")
    if "normalize" in data:
        kw["normalize"] = str(data.pop("normalize"))
    if "path" in data:
        kw["data"] = str(data.pop("path"))
    if data:
        raise ConfigError(f"unknown [data] keys {sorted(data)}")
    if "scenario" in d:
        kw["scenario"] = ClutterScenario.from_dict(_section(d, "scenario"))
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    """Read a TOML (``.toml``) or JSON config file."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    try:
        if path.endswith(".json"):
            d = json.loads(raw)
        else:
            d = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    return config_from_dict(d)


# data -------------------------------------------------------------------------

def load_dataset(cfg: RunConfig, path=None) -> Dataset:
    """Dataset from a CSV path, or simulated from the configured scenario."""
    path = path or cfg.data
    if path:
        ds = load_amplitude_csv(path)
    elif cfg.scenario is not None:
        ds = generate(cfg.scenario)
    else:
        raise ConfigError("no data file given and no [scenario] configured")
    if cfg.normalize != "none":
        ds = ds.normalized(cfg.normalize, joint=True)
    return ds


@dataclass(frozen=True)
class Split:
    training: object
    held_out: tuple
    primary: object


def split(ds: Dataset) -> Split:
    """Lowest-id clutter cell trains; other clutter cells are held out."""
    clutter = sorted(ds.clutter_cells, key=lambda c: c.cell_id)
    if not clutter:
        raise DegenerateDataError(f"dataset {ds.name!r} has no clutter-only cells")
    return Split(clutter[0], tuple(clutter[1:]), ds.primary)


# models -----------------------------------------------------------------------

def fit_parametric_models(train, cfg: RunConfig):
    hist = empirical_pdf(train, cfg.bins)
    models = [fit_parametric(fam, hist, cfg.restarts, cfg.fit_seed) for fam in Family]
    return hist, models


def fit_kde_models(train, cfg: RunConfig):
    out = []
    for k in cfg.kernels:
        choice = bw.select_bandwidth(k, train, cfg.fixed_point, cfg.quadrature)
        out.append((KdeModel(k, choice.h, train.amplitudes), choice))
    return out


def models_to_dict(parametric, kdes):
    return {
        "parametric": [m.to_dict() for m in parametric],
        "kde": [{"family": m.kernel.family.value, "params": m.kernel.params,
                 "h": m.bandwidth, "method": c.method,
                 "fixed_point_status": c.result.status if c.result else None}
                for m, c in kdes],
    }


def models_from_dict(d, train):
    par = [ParametricModel.from_dict(p) for p in d["parametric"]]
    kdes = [(KdeModel(KernelSpec.from_params(k["family"], k["params"]), k["h"], train.amplitudes),
             bw.BandwidthChoice(k["h"], k.get("method", "loaded")))
            for k in d["kde"]]
    return par, kdes


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out(out_dir, name):
    return os.path.join(out_dir, name)


def check_out_dir(out_dir):
    if not os.path.isdir(out_dir):
        raise FileNotFoundError(f"output directory {out_dir!r} does not exist")


# commands ---------------------------------------------------------------------

def run_fit(ds, cfg, out_dir):
    check_out_dir(out_dir)
    sp = split(ds)
    hist, par = fit_parametric_models(sp.training, cfg)
    _write_json([m.to_dict() for m in par], _out(out_dir, "parametric.json"))
    metrics.write_fit_reports_csv([metrics.fit_report(m, hist) for m in par],
                                  _out(out_dir, "fit_report.csv"))
    metrics.write_pdf_csv(par, hist.centers, _out(out_dir, "pdf.csv"),
                          reference=_HistogramAsModel(hist))
    return par


def run_bandwidth(ds, cfg, out_dir, kernels=None):
    check_out_dir(out_dir)
    sp = split(ds)
    results = []
    for k in kernels or cfg.kernels:
        results.append(bw.solve_bandwidth(k, sp.training, cfg.fixed_point, cfg.quadrature))
    _write_json({"n": int(sp.training.amplitudes.size), "cell_id": sp.training.cell_id,
                 "results": [r.to_dict() for r in results]}, _out(out_dir, "bandwidth.json"))
    with open(_out(out_dir, "bandwidth_trace.jsonl"), "w") as fh:
        for r in results:
            for rec in r.iterations:
                fh.write(json.dumps({"kernel": r.kernel.family.value, "iter": rec.iter,
                                     "h": rec.h, "psi": rec.psi,
                                     "rel_change": rec.rel_change}) + "\n")
    return results


class _HistogramAsModel:
    name = "histogram"

    def __init__(self, hist):
        self.hist = hist

    def pdf(self, x):
        idx = np.clip(np.searchsorted(self.hist.bin_edges, x, side="right") - 1,
                      0, self.hist.densities.size - 1)
        inside = (np.asarray(x) >= self.hist.bin_edges[0]) & (np.asarray(x) <= self.hist.bin_edges[-1])
        return np.where(inside, self.hist.densities[idx], 0.0)


def build_models(ds, cfg, models_path=None):
    sp = split(ds)
    if models_path:
        with open(models_path) as fh:
            par, kdes = models_from_dict(json.load(fh), sp.training)
        hist = empirical_pdf(sp.training, cfg.bins)
    else:
        hist, par = fit_parametric_models(sp.training, cfg)
        kdes = fit_kde_models(sp.training, cfg)
    return sp, hist, par, kdes


def run_evaluate(ds, cfg, out_dir, models_path=None):
    check_out_dir(out_dir)
    sp, hist, par, kdes = build_models(ds, cfg, models_path)
    models = list(par) + [m for m, _ in kdes]
    _write_json(models_to_dict(par, kdes), _out(out_dir, "models.json"))
    reports = [metrics.fit_report(m, hist) for m in models]
    metrics.write_fit_reports_csv(reports, _out(out_dir, "fit_report.csv"))
    metrics.write_pdf_csv(models, hist.centers, _out(out_dir, "pdf.csv"),
                          reference=_HistogramAsModel(hist))
    grid = hist.bin_edges
    metrics.write_ccdf_csv({"empirical": list(zip(grid.tolist(), hist.ccdf_at_edges().tolist())),
                            **{m.name: metrics.ccdf_curve(m, grid) for m in models}},
                           _out(out_dir, "ccdf.csv"))
    return reports


def run_detect(ds, cfg, out_dir, models_path=None):
    check_out_dir(out_dir)
    sp, hist, par, kdes = build_models(ds, cfg, models_path)
    if sp.primary is None:
        raise DegenerateDataError(f"dataset {ds.name!r} has no primary cell")
    held = sp.held_out or (sp.training,)
    rows = []
    for m in list(par) + [k for k, _ in kdes]:
        rows.extend(cfar.evaluate(m, held, sp.primary, cfg.pfa_grid, training=sp.training))
    cfar.write_reports_csv(rows, _out(out_dir, "pd_pfa.csv"))
    write_comparison_csv(rows, _out(out_dir, "pd_comparison.csv"))
    if not models_path:
        _write_json(models_to_dict(par, kdes), _out(out_dir, "models.json"))
    return rows


def pd_comparison(rows):
    """(pfa, kde model, parametric model, pd_kde, pd_param, gain) for every pairing."""
    kde = [r for r in rows if r.model_name.startswith("kde-")]
    par = [r for r in rows if not r.model_name.startswith("kde-")]
    out = []
    for a in kde:
        for b in par:
            if a.pfa_target == b.pfa_target:
                out.append((a.pfa_target, a.model_name, b.model_name, a.pd_empirical,
                            b.pd_empirical, a.pd_empirical - b.pd_empirical))
    return out


def write_comparison_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("pfa_target", "kde_model", "parametric_model", "pd_kde", "pd_parametric",
                    "pd_gain"))
        for r in pd_comparison(rows):
            w.writerow((repr(r[0]), r[1], r[2], repr(r[3]), repr(r[4]), repr(r[5])))
