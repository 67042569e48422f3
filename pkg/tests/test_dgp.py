import math
from dataclasses import replace

import numpy as np
import pytest

from releig.dgp import (
    POWER_CSV_COLUMNS,
    DgpConfig,
    aligned_distance,
    distance_to_phase,
    phase_to_distance,
    population_distance,
    population_eigenfunction,
    run_power_study,
    scenario_phases,
    simulate_coefficients,
    simulate_sample,
    write_power_csv,
)
from releig.fda import Grid, inner_product, norm_sq
from releig.rng import substream


class TestCoefficients:
    def test_stationary_variance(self):
        cfg = DgpConfig(rho=0.0, m=5000)
        xi = simulate_coefficients(cfg, substream(1))
        assert np.allclose(xi.var(axis=0), cfg.tau, rtol=0.1)

    def test_dependent_variance_and_autocorrelation(self):
        cfg = DgpConfig(rho=0.5, m=5000)
        xi = simulate_coefficients(cfg, substream(2))
        assert np.allclose(xi.var(axis=0), cfg.tau, rtol=0.1)
        for k in range(4):
            x = xi[:, k] - xi[:, k].mean()
            assert (x[1:] @ x[:-1]) / (x @ x) == pytest.approx(0.5, abs=0.05)

    def test_validation(self):
        with pytest.raises(ValueError):
            DgpConfig(tau=(1, 2, 3, 4))
        with pytest.raises(ValueError):
            DgpConfig(rho=1.0)
        with pytest.raises(ValueError):
            DgpConfig(burn_in=10)

    def test_sample_shape_and_reproducible(self):
        cfg = DgpConfig(m=17, grid=Grid(33), seed=5)
        a, b = simulate_sample(cfg), simulate_sample(cfg)
        assert a.values.shape == (17, 33)
        assert np.array_equal(a.values, b.values)

    def test_presmooth_is_near_identity(self):
        cfg = DgpConfig(m=5, grid=Grid(101), seed=3)
        raw = simulate_sample(cfg)
        smooth = simulate_sample(replace(cfg, presmooth=True))
        assert np.abs(raw.values - smooth.values).max() < 1e-3 * np.abs(raw.values).max()


class TestPopulation:
    def test_zero_phase_functions(self):
        g = Grid(201)
        v1 = population_eigenfunction(1, 0.0, 0.0, g)
        assert np.allclose(v1.values, np.sqrt(2) * np.sin(2 * np.pi * g.points))

    @pytest.mark.parametrize("j", [1, 2, 3, 4])
    @pytest.mark.parametrize("d", [0.0, 0.3, 1.7])
    def test_unit_norm(self, j, d):
        assert norm_sq(population_eigenfunction(j, d, d, Grid(1000))) == pytest.approx(1.0, abs=1e-5)

    def test_orthogonal_pair(self):
        g = Grid(1000)
        v1, v2 = population_eigenfunction(1, 0, 0, g), population_eigenfunction(2, 0, 0, g)
        assert abs(inner_product(v1, v2)) < 1e-6

    @pytest.mark.parametrize("delta", [0.0, 0.2, 0.3155, 1.0, math.pi / 2])
    def test_distance_oracle(self, delta):
        g = Grid(1000)
        a = population_eigenfunction(3, 0.0, delta, g)
        b = population_eigenfunction(3, 0.0, 0.0, g)
        assert norm_sq(a - b) == pytest.approx(phase_to_distance(delta), abs=1e-6)

    def test_phase_distance_examples(self):
        assert phase_to_distance(0.0) == 0.0
        assert phase_to_distance(0.3155) == pytest.approx(0.0987, abs=1e-4)
        assert phase_to_distance(math.pi / 2) == pytest.approx(2.0)
        assert distance_to_phase(phase_to_distance(0.7)) == pytest.approx(0.7)

    def test_aligned_distance_folds(self):
        assert aligned_distance(math.pi) == pytest.approx(0.0, abs=1e-15)
        assert aligned_distance(2.0) == pytest.approx(2 * (1 - abs(math.cos(2.0))))

    def test_scenarios(self):
        assert scenario_phases(1, 0.4) == (0.4, 0.0)
        assert scenario_phases(2, 0.4) == (0.0, 0.4)
        assert population_distance(2, 2.0, 2) == 0.0


class TestPowerStudy:
    def test_rates_and_csv(self, small_table, tmp_path):
        base = DgpConfig(grid=Grid(51))
        pts = run_power_study(1, [0.0, 0.5, math.pi / 2], 60, 60, 100, small_table, seed=3, base=base)
        assert len(pts) == 3 and all(0.0 <= p.rejection_rate <= 1.0 for p in pts)
        path = write_power_csv(pts, tmp_path / "a.csv")
        assert path.read_text().splitlines()[0] == ",".join(POWER_CSV_COLUMNS)

    def test_worker_count_does_not_matter(self, small_table):
        base = DgpConfig(grid=Grid(33))
        a = run_power_study(1, [0.8], 40, 40, 100, small_table, seed=9, base=base, workers=1)
        b = run_power_study(1, [0.8], 40, 40, 100, small_table, seed=9, base=base, workers=2)
        assert a == b

    def test_needs_replicates(self, small_table):
        with pytest.raises(ValueError):
            run_power_study(1, [0.0], 50, 50, 10, small_table)
