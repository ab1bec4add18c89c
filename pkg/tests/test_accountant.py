import math

import numpy as np
import pytest
from scipy import integrate

from dpmi import accountant


def quadrature_rdp(q, z, alpha):
    """Renyi divergence of the subsampled-Gaussian mixture by numerical
    integration; independent of the log-space series implementation."""
    s2 = z * z

    def f(x):
        ratio = (1 - q) + q * math.exp((2 * x - 1) / (2 * s2))
        return math.exp(-x * x / (2 * s2)) / math.sqrt(2 * math.pi * s2) * ratio ** alpha

    val, _ = integrate.quad(f, -60 * z, 60 * z, points=[0.0, 1.0], limit=500)
    return math.log(val) / (alpha - 1)


class TestRdp:
    def test_unsubsampled_closed_form(self):
        assert accountant.rdp_subsampled_gaussian(1.0, 2.0, 8) == pytest.approx(1.0)

    def test_vanishing_sampling_ratio(self):
        assert accountant.rdp_subsampled_gaussian(0.0, 2.0, 8) == 0.0
        small = accountant.rdp_subsampled_gaussian(1e-9, 2.0, 8)
        assert small < 1e-12

    def test_zero_noise_is_no_privacy(self):
        assert accountant.rdp_subsampled_gaussian(0.5, 0.0, 4) == math.inf

    def test_integer_order_against_quadrature(self):
        val = accountant.rdp_subsampled_gaussian(0.01, 4.0, 2)
        assert val == pytest.approx(quadrature_rdp(0.01, 4.0, 2), rel=0.05)

    @pytest.mark.parametrize("q,z,alpha", [
        (0.01, 4.0, 2), (0.016, 0.5, 2), (0.016, 0.5, 3), (0.1, 1.0, 5),
        (0.016, 0.5, 1.5), (0.016, 0.5, 1.25), (0.01, 4.0, 2.5), (0.1, 1.0, 3.5),
        (0.3, 2.0, 16), (0.05, 1.0, 7.7),
    ])
    def test_matches_quadrature_oracle(self, q, z, alpha):
        val = accountant.rdp_subsampled_gaussian(q, z, alpha)
        assert val == pytest.approx(quadrature_rdp(q, z, alpha), rel=1e-4)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            accountant.rdp_subsampled_gaussian(1.5, 1.0, 2)
        with pytest.raises(ValueError):
            accountant.rdp_subsampled_gaussian(0.5, 1.0, 1.0)
        with pytest.raises(ValueError):
            accountant.rdp_subsampled_gaussian(0.5, -1.0, 2)


class TestAccountTraining:
    def test_single_step_grid_minimization(self):
        # rdp(alpha) = alpha / 46.95 via q = 1, z = sqrt(46.95 / 2)
        z = math.sqrt(46.95 / 2)
        delta = 1e-5

        # independent grid-minimization oracle on a fine grid
        oracle = min(a / 46.95 + math.log(1 / delta) / (a - 1)
                     for a in np.arange(1.01, 600, 0.01))
        eps = accountant.account_training(1.0, z, 1, delta)
        assert eps == pytest.approx(oracle, abs=1e-3)
        assert eps == pytest.approx(1.01, abs=0.01)

    def test_more_steps_strictly_worse(self):
        a = accountant.account_training(0.05, 2.0, 1000, 1e-5)
        b = accountant.account_training(0.05, 2.0, 2000, 1e-5)
        assert b > a

    def test_monotone_in_noise(self):
        eps = [accountant.account_training(0.05, z, 1000, 1e-5)
               for z in (0.5, 1, 2, 4, 8)]
        assert all(x > y + 1e-6 for x, y in zip(eps, eps[1:]))

    def test_monotone_in_sampling_ratio(self):
        eps = [accountant.account_training(q, 2.0, 1000, 1e-5)
               for q in (0.01, 0.05, 0.2, 1.0)]
        assert all(x < y - 1e-6 for x, y in zip(eps, eps[1:]))

    def test_monotone_in_delta(self):
        eps = [accountant.account_training(0.05, 2.0, 1000, d)
               for d in (1e-7, 1e-5, 1e-3)]
        assert all(x > y - 1e-6 for x, y in zip(eps, eps[1:]))

    def test_zero_noise_gives_inf(self):
        assert accountant.account_training(0.05, 0.0, 10, 1e-5) == math.inf

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            accountant.account_training(0.05, 2.0, 10, 1e-5, orders=[])

    def test_purchases_anchor(self):
        # 200 epochs of lot 128 over n = 8000 at z = 0.5, delta = 1/n
        eps = accountant.account_training(128 / 8000, 0.5, 12500, 1 / 8000)
        assert eps == pytest.approx(88.1, rel=0.30)


class TestTrainingSteps:
    def test_exact_division(self):
        assert accountant.training_steps(8000, 128, 200) == 12500

    def test_rounds_up(self):
        assert accountant.training_steps(1000, 300, 1) == 4

    def test_validation(self):
        with pytest.raises(ValueError):
            accountant.training_steps(0, 128, 200)
