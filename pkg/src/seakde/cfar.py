"""Two-step CFAR detection driven by a fitted clutter model.

Training: the threshold is the amplitude where the model CCDF equals the
requested false-alarm rate; the background level is the mean training
amplitude, and T = threshold / background is reported alongside.
Testing: a sample is declared a detection when its amplitude exceeds the
threshold.
"""

import csv
from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from .density import inverse_ccdf
from .errors import ConfigError, DegenerateDataError
from .samples_io import SampleSet

REPORT_COLUMNS = ("model", "pfa_target", "pfa_empirical", "pd_empirical", "threshold", "T",
                  "n_clutter_trials", "n_target_trials")


@dataclass(frozen=True)
class DetectorConfig:
    model: object
    target_pfa: float
    threshold_factor_T: float
    threshold: float
    background: float


@dataclass(frozen=True)
class DetectionReport:
    pfa_target: float
    pfa_empirical: float
    pd_empirical: float
    n_clutter_trials: int
    n_target_trials: int
    threshold: float
    T: float
    model_name: str = ""

    def row(self):
        return (self.model_name, repr(self.pfa_target), repr(self.pfa_empirical),
                repr(self.pd_empirical), repr(self.threshold), repr(self.T),
                self.n_clutter_trials, self.n_target_trials)


def _amps(samples):
    if isinstance(samples, SampleSet):
        return samples.amplitudes
    if isinstance(samples, (list, tuple)) and samples and isinstance(samples[0], SampleSet):
        return np.concatenate([s.amplitudes for s in samples])
    return np.asarray(samples, dtype=float).ravel()


def _check_pfa(pfa):
    if not (0.0 < pfa < 1.0):
        raise ConfigError(f"pfa must lie in (0, 1), got {pfa}")


def set_threshold(model, clutter_training, pfa):
    """Return (threshold, T) with model.ccdf(threshold) = pfa to 1e-6 relative."""
    _check_pfa(pfa)
    train = _amps(clutter_training)
    if train.size == 0:
        raise DegenerateDataError("empty training set")
    background = float(np.mean(train))
    if background <= 0:
        raise DegenerateDataError("training clutter has zero mean amplitude")
    thr = inverse_ccdf(model, pfa, rtol=1e-6)
    return thr, thr / background


def configure(model, clutter_training, pfa) -> DetectorConfig:
    thr, t = set_threshold(model, clutter_training, pfa)
    return DetectorConfig(model, pfa, t, thr, float(np.mean(_amps(clutter_training))))


def detect(threshold, test):
    """Boolean decision per test sample: amplitude > threshold."""
    return _amps(test) > threshold


def evaluate(model, clutter_cells, primary_cell, pfa_grid, training=None):
    """Pd and Pfa per requested false-alarm rate.

    ``training`` is the clutter the model was fitted on; it sets the
    background level. When omitted, the first clutter cell is used for
    training and the remaining cells are held out (a single cell serves as
    both). Pfa is counted over the held-out clutter samples and Pd over the
    primary-cell samples, each sample an independent trial.
    """
    cells = list(clutter_cells)
    if not cells:
        raise DegenerateDataError("no clutter cells to test against")
    if training is None:
        training = cells[0]
        if len(cells) > 1:
            cells = cells[1:]
    grid = [float(p) for p in pfa_grid]
    for p in grid:
        _check_pfa(p)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("pfa grid must be strictly ascending")
    clutter = _amps(cells)
    target = _amps(primary_cell)
    name = getattr(model, "name", type(model).__name__)
    out = []
    for p in grid:
        thr, t = set_threshold(model, training, p)
        out.append(DetectionReport(p, float(np.count_nonzero(clutter > thr)) / clutter.size,
                                   float(np.count_nonzero(target > thr)) / target.size,
                                   int(clutter.size), int(target.size), thr, t, name))
    return out


def binomial_interval(p, n, level=0.99):
    """Two-sided central binomial interval for the empirical rate at n trials."""
    if not (0 < level < 1):
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    a = 0.5 * (1.0 - level)
    lo = stats.binom.ppf(a, n, p) / n
    hi = stats.binom.isf(a, n, p) / n
    return float(lo), float(hi)


def monte_carlo_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def write_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow(r.row())
