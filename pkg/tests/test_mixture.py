import json

import numpy as np
import pytest
from scipy.integrate import quad

from gmmflow import (
    GaussianMixture,
    grad_potential_f_t,
    log_density_t,
    log_density_t_batch,
    potential_f_t,
    prox_step,
    score_t,
    smoothed_eval,
)
from gmmflow.verify import random_mixture

LOG_2PI = np.log(2.0 * np.pi)


class TestGaussianMixtureType:
    def test_rejects_unnormalized_weights(self):
        with pytest.raises(ValueError, match="sum to 1"):
            GaussianMixture(means=[[0.0], [1.0]], weights=[0.6, 0.6], base_scale=1.0)

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError, match="base_scale"):
            GaussianMixture(means=[[0.0]], weights=[1.0], base_scale=0.0)

    def test_rejects_nonfinite_means(self):
        with pytest.raises(ValueError, match="finite"):
            GaussianMixture(means=[[np.inf]], weights=[1.0], base_scale=1.0)

    def test_rejects_weight_shape_mismatch(self):
        with pytest.raises(ValueError, match="one entry per component"):
            GaussianMixture(means=[[0.0], [1.0]], weights=[1.0], base_scale=1.0)

    def test_json_round_trip_field_names(self, bimodal):
        doc = bimodal.to_json_dict()
        assert set(doc) == {"dim", "base_scale", "components"}
        assert set(doc["components"][0]) == {"weight", "mean"}
        # must survive an actual serialization pass
        restored = GaussianMixture.from_json_dict(json.loads(json.dumps(doc)))
        np.testing.assert_array_equal(restored.means, bimodal.means)
        np.testing.assert_array_equal(restored.weights, bimodal.weights)
        assert restored.base_scale == bimodal.base_scale

    def test_from_json_rejects_dim_mismatch(self, bimodal):
        doc = bimodal.to_json_dict()
        doc["dim"] = 3
        with pytest.raises(ValueError, match="dim"):
            GaussianMixture.from_json_dict(doc)

    def test_sample_shape_and_spread(self, bimodal, rng):
        draws = bimodal.sample(4000, rng)
        assert draws.shape == (4000, 2)
        # both modes populated
        assert (draws[:, 0] > 0).mean() == pytest.approx(0.5, abs=0.05)


class TestLogDensity:
    def test_standard_normal_at_mode(self, single_gaussian):
        assert log_density_t(single_gaussian, [0.0], 0.0) == pytest.approx(
            -0.5 * LOG_2PI, abs=1e-14
        )

    def test_large_t_collapses_to_single_gaussian(self):
        # with heavy smoothing the mixture is indistinguishable from one
        # Gaussian centered at the weighted mean
        gmm = GaussianMixture(means=[[-1.0], [1.0]], weights=[0.5, 0.5], base_scale=1.0)
        t = 100.0
        var = 1.0 + t**2
        for x in (-5.0, 0.0, 5.0):
            ref = -0.5 * (LOG_2PI + np.log(var)) - 0.5 * x**2 / var
            assert abs(log_density_t(gmm, [x], t) - ref) < 1e-3

    def test_matches_quadrature_convolution_1d(self, rng):
        gmm = random_mixture(rng, 1, 2)
        t = 0.7
        x = float(rng.normal() * 2.0)

        def integrand(y):
            p0 = sum(
                w
                * np.exp(-0.5 * (y - m[0]) ** 2 / gmm.base_scale**2)
                / np.sqrt(2 * np.pi * gmm.base_scale**2)
                for w, m in zip(gmm.weights, gmm.means)
            )
            kernel = np.exp(-0.5 * (x - y) ** 2 / t**2) / np.sqrt(2 * np.pi * t**2)
            return p0 * kernel

        val, err = quad(integrand, -np.inf, np.inf, epsabs=1e-12, limit=200)
        assert err < 1e-9
        assert abs(log_density_t(gmm, [x], t) - np.log(val)) < 1e-6

    def test_batch_matches_scalar(self, bimodal, rng):
        xs = rng.normal(size=(32, 2)) * 3.0
        batch = log_density_t_batch(bimodal, xs, 0.9)
        singles = [log_density_t(bimodal, x, 0.9) for x in xs]
        np.testing.assert_allclose(batch, singles, rtol=1e-14)

    def test_contract_violations(self, bimodal):
        with pytest.raises(ValueError, match="dimension"):
            log_density_t(bimodal, [0.0], 1.0)
        with pytest.raises(ValueError, match=">= 0"):
            log_density_t(bimodal, [0.0, 0.0], -0.5)
        with pytest.raises(ValueError, match="finite"):
            log_density_t(bimodal, [0.0, 0.0], np.nan)


class TestScore:
    def test_single_gaussian_closed_form(self, single_gaussian):
        for t in (0.0, 0.5, 3.0):
            for x in (-2.0, 0.7):
                assert score_t(single_gaussian, [x], t)[0] == pytest.approx(
                    -x / (1.0 + t**2), rel=1e-14
                )

    def test_vanishes_at_isolated_mode(self):
        gmm = GaussianMixture(
            means=[[0.0, 0.0], [15.0, 0.0], [0.0, 15.0]],
            weights=[0.4, 0.3, 0.3],
            base_scale=1.0,
        )
        for j in range(3):
            assert np.linalg.norm(score_t(gmm, gmm.means[j], 0.3)) < 1e-6

    def test_matches_finite_differences(self, rng):
        gmm = random_mixture(rng, 3, 3)
        for _ in range(10):
            x = rng.normal(size=3) * 2.5
            t = float(rng.uniform(0.1, 2.0))
            s = score_t(gmm, x, t)
            h = 1e-5
            fd = np.zeros(3)
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                fd[k] = (
                    log_density_t(gmm, x + e, t) - log_density_t(gmm, x - e, t)
                ) / (2 * h)
            assert np.linalg.norm(s - fd) / (1.0 + np.linalg.norm(s)) < 1e-5

    def test_smoothing_removes_sign_changes(self):
        # bimodal in 1-d: the score crosses zero three times raw (two modes
        # and the saddle) and once after heavy smoothing
        gmm = GaussianMixture(means=[[-2.0], [2.0]], weights=[0.5, 0.5], base_scale=0.5)
        grid = np.linspace(-4.0, 4.0, 2001)

        def sign_changes(t):
            vals = np.array([score_t(gmm, [x], t)[0] for x in grid])
            signs = np.sign(vals)
            signs = signs[signs != 0]  # grid points landing on exact roots
            return int(np.sum(np.diff(signs) != 0))

        assert sign_changes(0.0) == 3
        assert sign_changes(10.0) == 1


class TestPotential:
    def test_reduces_to_neg_log_density_at_t0(self, rng):
        for _ in range(5):
            gmm = random_mixture(rng, 2, 3)
            x = rng.normal(size=2) * 3.0
            assert potential_f_t(gmm, x, 0.0) == -log_density_t(gmm, x, 0.0)

    def test_smoothing_identity(self, rng):
        # potential computed through the base-responsibility tilt sum must
        # match the smoothed log-density up to the pinned constant; the two
        # computations share no code path
        for _ in range(20):
            dim = int(rng.integers(1, 6))
            gmm = random_mixture(rng, dim, int(rng.integers(1, 5)))
            x = rng.normal(size=dim) * 4.0
            t = float(rng.uniform(0.05, 20.0))
            s0sq = gmm.base_scale**2
            resid = (
                potential_f_t(gmm, x, t)
                + log_density_t(gmm, x, t)
                + 0.5 * np.log(s0sq / (s0sq + t**2))
            )
            assert abs(resid) < 1e-8

    def test_single_component_shift_is_constant(self, rng):
        # for K=1 the potential differs from -log p_t by an x-independent
        # constant, so minimizers are unaffected
        gmm = GaussianMixture(means=[[1.0, -2.0]], weights=[1.0], base_scale=0.8)
        t = 1.3
        shifts = []
        for _ in range(100):
            x = rng.normal(size=2) * 5.0
            shifts.append(potential_f_t(gmm, x, t) + log_density_t(gmm, x, t))
        assert max(shifts) - min(shifts) < 1e-9


class TestGradPotential:
    def test_single_gaussian_closed_form(self, single_gaussian):
        for t in (0.2, 1.0):
            x = np.array([1.7])
            assert grad_potential_f_t(single_gaussian, x, t)[0] == pytest.approx(
                x[0] / (1.0 + t**2), rel=1e-14
            )

    def test_matches_finite_differences_of_potential(self, rng):
        for _ in range(50):
            dim = int(rng.integers(1, 6))
            gmm = random_mixture(rng, dim, int(rng.integers(1, 4)))
            x = rng.normal(size=dim) * 2.0
            t = float(rng.uniform(0.1, 3.0))
            g = grad_potential_f_t(gmm, x, t)
            h = 1e-5
            fd = np.zeros(dim)
            for k in range(dim):
                e = np.zeros(dim)
                e[k] = h
                fd[k] = (
                    potential_f_t(gmm, x + e, t) - potential_f_t(gmm, x - e, t)
                ) / (2 * h)
            assert np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(g)) < 1e-5

    def test_stationary_at_mode(self, single_gaussian):
        assert np.linalg.norm(grad_potential_f_t(single_gaussian, [0.0], 0.7)) < 1e-8


class TestSmoothedEval:
    def test_responsibilities_normalized(self, rng):
        for _ in range(30):
            dim = int(rng.integers(1, 6))
            gmm = random_mixture(rng, dim, int(rng.integers(1, 5)))
            x = rng.normal(size=dim) * 6.0
            ev = smoothed_eval(gmm, x, float(rng.uniform(0.0, 5.0)))
            assert np.all(ev.responsibilities >= 0.0)
            assert abs(ev.responsibilities.sum() - 1.0) < 1e-10

    def test_bundle_matches_pointwise_ops(self, bimodal):
        x = np.array([0.4, -0.3])
        ev = smoothed_eval(bimodal, x, 0.8)
        assert ev.log_density == log_density_t(bimodal, x, 0.8)
        np.testing.assert_array_equal(ev.score, score_t(bimodal, x, 0.8))
        assert ev.potential == potential_f_t(bimodal, x, 0.8)


class TestProxStep:
    def test_single_gaussian_closed_form(self, single_gaussian):
        # the proximal point of a quadratic potential is the scaled pullback
        x, t, dt = np.array([1.5]), 0.5, 0.1
        res = prox_step(single_gaussian, x, t, dt, tol=1e-12)
        assert res.converged
        assert res.y[0] == pytest.approx(x[0] / (1.0 + dt / (1.0 + t**2)), abs=1e-10)

    def test_second_order_gap_scaling(self, rng):
        # halving the step shrinks the prox-vs-one-step-gradient gap ~4x
        for _ in range(8):
            dim = int(rng.integers(1, 5))
            gmm = random_mixture(rng, dim, int(rng.integers(1, 4)))
            x = rng.normal(size=dim) * 2.5
            t = float(rng.uniform(0.2, 2.0))
            var = gmm.base_scale**2 + t**2
            eta = 0.04 * var / (1.0 + 16.0 / var)
            gaps = []
            for e in (eta, eta / 2):
                res = prox_step(gmm, x, t, e, tol=1e-13, max_iter=500)
                assert res.converged
                gaps.append(np.linalg.norm(res.y - (x + e * score_t(gmm, x, t))))
            assert 3.0 <= gaps[0] / gaps[1] <= 5.0

    def test_vanishing_step(self, rng):
        gmm = random_mixture(rng, 3, 2)
        x = rng.normal(size=3) * 2.0
        t = 0.9
        dt = 1e-6
        res = prox_step(gmm, x, t, dt, tol=1e-14)
        g = np.linalg.norm(grad_potential_f_t(gmm, x, t))
        assert np.linalg.norm(res.y - x) <= 2.0 * dt * g

    def test_nonconvergence_is_reported_not_raised(self, single_gaussian):
        res = prox_step(single_gaussian, [1.0], 0.1, dt=50.0, max_iter=20)
        assert not res.converged
        assert res.iterations == 20
        assert np.isfinite(res.residual)

    def test_reports_iteration_count(self, single_gaussian):
        res = prox_step(single_gaussian, [1.0], 0.5, 0.05)
        assert res.converged and res.iterations >= 1

    def test_rejects_bad_step(self, single_gaussian):
        with pytest.raises(ValueError, match="dt"):
            prox_step(single_gaussian, [1.0], 0.5, 0.0)
