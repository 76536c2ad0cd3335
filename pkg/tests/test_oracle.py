"""Tests for the quadrature posterior against independent routes."""

import math

import numpy as np
import pytest

from polarsim import oracle
from polarsim.model import ME1, ME2, ME3, ModelParams

PARAMS = ModelParams()

WEIGHT_PEAK = 1.0 / (0.25 * math.sqrt(2.0 * math.pi))


def norm_pdf(x, sd=1.0):
    return np.exp(-0.5 * (x / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


class TestExpectedWeight:
    def test_frozen_reference_values(self):
        assert oracle.expected_weight(0.5, 0.8, ME2, PARAMS) == pytest.approx(
            0.4690566964884579, rel=1e-9
        )
        assert oracle.expected_weight(0.0, 0.75, ME1, PARAMS) == pytest.approx(
            0.5410915872526749, rel=1e-9
        )

    def test_bounded_by_likelihood_peak(self):
        politics = np.linspace(-3.0, 3.0, 25)
        analytic = np.linspace(0.5, 1.0, 9)
        for env in (ME1, ME2, ME3):
            w = oracle.expected_weight_matrix(politics, analytic, env, PARAMS)
            assert np.all(w > 0.0)
            assert np.all(w <= WEIGHT_PEAK + 1e-12)

    def test_mirror_symmetric_in_politics(self):
        politics = np.linspace(0.1, 2.5, 7)
        analytic = np.array([0.6, 0.9])
        for env in (ME1, ME2, ME3):
            w_pos = oracle.expected_weight_matrix(politics, analytic, env, PARAMS)
            w_neg = oracle.expected_weight_matrix(-politics, analytic, env, PARAMS)
            np.testing.assert_allclose(w_pos, w_neg, rtol=1e-12)

    def test_matches_forward_monte_carlo(self):
        w = oracle.expected_weight(0.5, 0.8, ME2, PARAMS)
        mean, se = oracle.simulated_weight_mean(0.5, 0.8, ME2, PARAMS, 10**6, seed=3)
        assert abs(mean - w) < 3.0 * se

    def test_quadrature_converged_at_default_nodes(self):
        for env in (ME1, ME3):
            coarse = oracle.expected_weight(0.7, 0.65, env, PARAMS)
            fine = oracle.expected_weight(
                0.7, 0.65, env, PARAMS, politics_nodes=128, truth_nodes=128
            )
            assert coarse == pytest.approx(fine, rel=1e-10)

    def test_rejects_low_resolution(self):
        with pytest.raises(ValueError):
            oracle.expected_weight(0.0, 0.8, ME1, PARAMS, politics_nodes=32)
        with pytest.raises(ValueError):
            oracle.expected_weight(0.0, 0.8, ME1, PARAMS, truth_nodes=16)


class TestPosterior:
    def test_normalized_and_nonnegative(self):
        for env in (ME1, ME2, ME3):
            for n in (1, 10, 100):
                g = oracle.posterior(env, PARAMS, n)
                assert np.all(g.density >= 0.0)
                assert float(np.trapezoid(g.density, g.grid)) == pytest.approx(
                    1.0, abs=1e-6
                )

    def test_mirror_symmetric_within_tolerance(self):
        for env, n in ((ME1, 1), (ME2, 10), (ME3, 100)):
            g = oracle.posterior(env, PARAMS, n)
            d = g.density
            scale = float(d.max())
            assert float(np.abs(d - d[::-1]).max()) / scale < 1e-9
            np.testing.assert_array_equal(g.mirrored().log_density, g.log_density[::-1])

    def test_zero_observations_reproduce_prior(self):
        g = oracle.posterior(ME3, PARAMS, 0)
        prior = norm_pdf(g.grid, PARAMS.prior_politics_sd)
        prior = prior / np.trapezoid(prior, g.grid)
        np.testing.assert_allclose(g.density, prior, rtol=1e-12)

    def test_frozen_density_values(self):
        g1 = oracle.posterior(ME1, PARAMS, 1)
        at_zero = float(g1.density[np.argmin(np.abs(g1.grid))])
        assert at_zero == pytest.approx(0.6261530205221101, rel=1e-9)
        g2 = oracle.posterior(ME2, PARAMS, 10)
        at_peak = float(g2.density[np.argmin(np.abs(g2.grid - 0.6))])
        assert at_peak == pytest.approx(1.0265550080797756, rel=1e-9)

    def test_concentrates_with_more_observations(self):
        def central_mass(n):
            g = oracle.posterior(ME1, PARAMS, n)
            inside = np.abs(g.grid) <= 0.5
            return float(np.trapezoid(np.where(inside, g.density, 0.0), g.grid))

        assert central_mass(1) < central_mass(10) < central_mass(100)

    def test_tail_mass_bound_is_tiny(self):
        g = oracle.posterior(ME2, PARAMS, 1)
        assert 0.0 <= g.tail_mass_bound < 1e-6

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            oracle.posterior(ME1, PARAMS, -1)
        with pytest.raises(ValueError):
            oracle.posterior(ME1, PARAMS, 1, analytic_nodes=8)
        with pytest.raises(ValueError):
            oracle.posterior(ME1, PARAMS, 1, grid_points=2)

    def test_grid_metadata_round_trip(self):
        g = oracle.posterior(ME1, PARAMS, 10)
        assert g.env_name == "ME1"
        assert g.n_obs == 10
        assert g.grid_points == len(g.grid) == 801
        assert g.grid[0] == -4.0 and g.grid[-1] == 4.0


class TestGridCsv:
    def test_write_and_reparse_exactly(self, tmp_path):
        g = oracle.posterior(ME2, PARAMS, 1, grid_points=801)
        path = tmp_path / "grid.csv"
        oracle.write_grid_csv(g, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# env=ME2"
        assert lines[1] == "# n_obs=1"
        assert lines[7] == "p_a,density"
        body = [line.split(",") for line in lines[8:]]
        assert len(body) == 801
        parsed_p = np.array([float(p) for p, _ in body])
        parsed_d = np.array([float(d) for _, d in body])
        np.testing.assert_array_equal(parsed_p, g.grid)
        np.testing.assert_array_equal(parsed_d, g.density)
