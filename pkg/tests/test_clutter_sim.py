import math

import numpy as np
import pytest
from scipy import integrate, stats

from seakde.clutter_sim import (ClutterFamily, ClutterScenario, TrueClutterModel, generate,
                                true_ccdf, true_pdf)
from seakde.errors import ConfigError, DomainError
from seakde.samples_io import CellLabel


def test_rayleigh_mean_within_three_standard_errors():
    ds = generate(ClutterScenario(n_cells=1, samples_per_cell=100_000, rng_seed=11))
    x = ds.cells[0].amplitudes
    se = math.sqrt((4 - math.pi) / 2 / x.size)
    assert abs(x.mean() - math.sqrt(math.pi / 2)) < 3 * se


def test_no_target_means_all_clutter_cells():
    ds = generate(ClutterScenario(n_cells=14, samples_per_cell=64))
    assert len(ds.cells) == 14
    assert all(c.label is CellLabel.CLUTTER_ONLY for c in ds.cells)
    assert [c.cell_id for c in ds.cells] == list(range(14))


def test_primary_cell_is_middle_cell():
    sc = ClutterScenario(target_amplitude=3.0, target_fraction=0.5, n_cells=6, samples_per_cell=32)
    ds = generate(sc)
    assert [c.cell_id for c in ds.by_label(CellLabel.PRIMARY)] == [3]


def test_same_seed_same_samples_different_seed_differs():
    sc = ClutterScenario("k", {"shape": 1.5, "mean_power": 2.0}, n_cells=3, samples_per_cell=500,
                         rng_seed=2 ** 64 - 1)
    a, b = generate(sc), generate(sc)
    for ca, cb in zip(a.cells, b.cells):
        assert np.array_equal(ca.amplitudes, cb.amplitudes)
    c = generate(ClutterScenario("k", {"shape": 1.5, "mean_power": 2.0}, n_cells=3,
                                 samples_per_cell=500, rng_seed=1))
    assert not np.array_equal(a.cells[0].amplitudes, c.cells[0].amplitudes)


@pytest.mark.parametrize("nu", [0.5, 1.0, 3.7])
def test_k_pdf_integrates_to_one_and_matches_ccdf(nu):
    sc = ClutterScenario("k", {"shape": nu, "mean_power": 1.3})
    mass = integrate.quad(lambda t: true_pdf(sc, t), 0, np.inf, limit=400)[0]
    assert mass == pytest.approx(1.0, abs=1e-6)
    for x in (0.1, 0.7, 2.5):
        tail = integrate.quad(lambda t: true_pdf(sc, t), x, np.inf, limit=400)[0]
        assert true_ccdf(sc, x) == pytest.approx(tail, rel=1e-7)


def test_k_mean_power():
    sc = ClutterScenario("k", {"shape": 0.8, "mean_power": 2.0})
    m2 = integrate.quad(lambda t: t * t * true_pdf(sc, t), 0, np.inf, limit=400)[0]
    assert m2 == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("family,params", [
    ("rayleigh", {"scale": 0.7}), ("weibull", {"c": 1.2, "s": 0.8}),
    ("k", {"shape": 0.5, "mean_power": 1.0}), ("k", {"shape": 4.0, "mean_power": 0.5})])
def test_samples_follow_declared_distribution(family, params):
    sc = ClutterScenario(family, params, n_cells=1, samples_per_cell=10_000, rng_seed=4)
    x = generate(sc).cells[0].amplitudes
    p = stats.kstest(x, lambda t: 1.0 - true_ccdf(sc, t)).pvalue
    assert p > 1e-3


def test_rayleigh_pdf_peak_value():
    sc = ClutterScenario("rayleigh", {"scale": 2.0})
    assert true_pdf(sc, 2.0) == pytest.approx(math.exp(-0.5) / 2.0, rel=1e-14)
    assert true_pdf(sc, -1.0) == 0.0
    assert true_ccdf(sc, 0.0) == 1.0


def test_rician_primary_cell_mean_power():
    sc = ClutterScenario(target_amplitude=2.0, target_fraction=0.999999, n_cells=2,
                         samples_per_cell=200_000, rng_seed=9)
    x = generate(sc).cells[1].amplitudes
    assert np.mean(x * x) == pytest.approx(2.0 + 4.0, rel=0.02)


def test_target_fraction_controls_carrier_rate():
    sc = ClutterScenario("weibull", {"c": 1.0, "s": 2.0}, target_amplitude=100.0,
                         target_fraction=0.3, n_cells=2, samples_per_cell=20_000, rng_seed=3)
    x = generate(sc).cells[1].amplitudes
    rate = np.mean(x > 50)
    assert abs(rate - 0.3) < 4 * math.sqrt(0.3 * 0.7 / x.size)


@pytest.mark.parametrize("kwargs,err", [
    ({"clutter_family": "rayleigh", "params": {"scale": -1.0}}, DomainError),
    ({"clutter_family": "weibull", "params": {"c": 1.0}}, ConfigError),
    ({"clutter_family": "k", "params": {"shape": 0.0, "mean_power": 1.0}}, DomainError),
    ({"target_fraction": 1.0}, DomainError),
    ({"target_fraction": -0.1}, DomainError),
    ({"target_amplitude": float("nan")}, DomainError),
    ({"n_cells": 0}, ConfigError),
    ({"n_cells": 1, "target_fraction": 0.5}, ConfigError),
    ({"samples_per_cell": 2.5}, ConfigError),
    ({"rng_seed": 2 ** 64}, ConfigError),
    ({"clutter_family": "lognormal"}, ConfigError)])
def test_invalid_scenarios_rejected(kwargs, err):
    with pytest.raises(err):
        ClutterScenario(**kwargs)


def test_dict_round_trip_and_aliases():
    sc = ClutterScenario("K-distribution", {"shape": 2.0, "mean_power": 1.0}, 1.0, 0.2, 4, 10, 5)
    assert sc.clutter_family is ClutterFamily.K_COMPOUND
    assert ClutterScenario.from_dict(sc.to_dict()) == sc
    flat = ClutterScenario.from_dict({"family": "weibull", "c": 1.0, "s": 2.0})
    assert flat.params == {"c": 1.0, "s": 2.0}
    with pytest.raises(ConfigError):
        ClutterScenario.from_dict({"family": "rayleigh", "scale": 1.0, "bogus": 1})


def test_truth_model_bounds_cover_tail():
    m = TrueClutterModel(ClutterScenario("k", {"shape": 0.5, "mean_power": 1.0}))
    lo, hi = m.bounds()
    assert lo == 0.0 and m.ccdf(hi) <= 1e-16
