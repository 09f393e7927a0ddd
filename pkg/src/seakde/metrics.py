"""Fit-quality metrics: PDF mean squared error and CCDF curves."""

import csv
from dataclasses import dataclass
import json

import numpy as np

from .density import grid_between
from .parametric import HistogramDensity

ANALYTIC_GRID_POINTS = 512


@dataclass(frozen=True)
class FitReport:
    model_name: str
    pdf_mse: float
    ccdf_max_abs_gap: float
    grid: np.ndarray

    def to_dict(self):
        return {"model": self.model_name, "pdf_mse": self.pdf_mse,
                "ccdf_max_abs_gap": self.ccdf_max_abs_gap, "grid_points": int(self.grid.size),
                "grid_min": float(self.grid[0]), "grid_max": float(self.grid[-1])}


def _pdf(model, x):
    return np.asarray(model.pdf(x), dtype=float)


def reference_grid(reference, n=ANALYTIC_GRID_POINTS):
    """Bin centers of a histogram, or n uniform points spanning an analytic model.

    The analytic span runs from the lower support edge to the 1 - 1e-4
    quantile.
    """
    if isinstance(reference, HistogramDensity):
        return reference.centers
    return grid_between(reference, n)


def _reference_pdf(reference, grid):
    if isinstance(reference, HistogramDensity):
        return reference.densities
    return _pdf(reference, grid)


def pdf_mse(model, reference, grid=None):
    """Mean squared PDF difference over the reference grid (or a given grid)."""
    if grid is None:
        grid = reference_grid(reference)
        ref = _reference_pdf(reference, grid)
    else:
        grid = np.asarray(grid, dtype=float)
        if isinstance(reference, HistogramDensity):
            raise ValueError("a histogram reference fixes its own grid")
        ref = _pdf(reference, grid)
    diff = _pdf(model, grid) - ref
    return float(np.mean(diff * diff))


def ccdf_curve(model, grid):
    """List of (x, ccdf) pairs; values clipped to [0, 1] and made non-increasing.

    The running-minimum pass only removes rounding wiggles in the last ulp.
    """
    g = np.asarray(grid, dtype=float)
    if np.any(np.diff(g) < 0):
        raise ValueError("ccdf grid must be sorted ascending")
    v = np.clip(np.asarray(model.ccdf(g), dtype=float), 0.0, 1.0)
    v = np.minimum.accumulate(v)
    return list(zip(g.tolist(), v.tolist()))


def _ccdf_gap(model, reference, grid):
    if isinstance(reference, HistogramDensity):
        edges = reference.bin_edges
        ref = reference.ccdf_at_edges()
        return float(np.max(np.abs(np.asarray(model.ccdf(edges)) - ref)))
    return float(np.max(np.abs(np.asarray(model.ccdf(grid)) - np.asarray(reference.ccdf(grid)))))


def fit_report(model, reference, grid=None) -> FitReport:
    g = reference_grid(reference) if grid is None else np.asarray(grid, dtype=float)
    return FitReport(getattr(model, "name", type(model).__name__),
                     pdf_mse(model, reference, None if grid is None else g),
                     _ccdf_gap(model, reference, g), g)


def write_fit_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model", "pdf_mse", "ccdf_max_abs_gap"))
        for r in reports:
            w.writerow((r.model_name, repr(r.pdf_mse), repr(r.ccdf_max_abs_gap)))


def write_fit_reports_json(reports, path):
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_ccdf_csv(curves, path):
    """``curves`` maps model name to a ccdf_curve result; long format."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model", "x", "ccdf"))
        for name, curve in curves.items():
            for x, v in curve:
                w.writerow((name, repr(x), repr(v)))


def write_pdf_csv(models, grid, path, reference=None):
    """PDF values of each model on a shared grid (wide format)."""
    g = np.asarray(grid, dtype=float)
    cols = [(m.name, _pdf(m, g)) for m in models]
    if reference is not None:
        cols.insert(0, ("reference", _pdf(reference, g)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x",) + tuple(c[0] for c in cols))
        for i, x in enumerate(g):
            w.writerow((repr(float(x)),) + tuple(repr(float(c[1][i])) for c in cols))
