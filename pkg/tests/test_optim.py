"""Adam optimizer and the learning-rate schedule."""

import numpy as np
import pytest

from semsplat.errors import InvalidParameterError
from semsplat.optim import Adam, exponential_lr


class TestAdamStep:
    def test_first_step_matches_hand_computation(self):
        """t=1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps)."""
        lr = 0.05
        adam = Adam({"p": lr})
        param = np.array([1.0, -2.0, 0.5])
        grad = np.array([0.3, -0.7, 0.0])
        adam.step("p", param, grad)
        expected = np.array([1.0, -2.0, 0.5])
        expected[:2] -= lr * np.sign(grad[:2])  # |g|/(|g|+eps) ~ 1
        np.testing.assert_allclose(param, expected, atol=1e-10)

    def test_second_step_textbook_recursion(self):
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-15
        adam = Adam({"p": lr}, beta1=b1, beta2=b2, eps=eps)
        param = np.array([0.7])
        g1, g2 = np.array([0.4]), np.array([-0.1])

        # independent reference, straight from the update equations
        theta = 0.7
        m = v = 0.0
        for t, g in ((1, 0.4), (2, -0.1)):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1 ** t)
            v_hat = v / (1 - b2 ** t)
            theta -= lr * m_hat / (np.sqrt(v_hat) + eps)

        adam.step("p", param, g1)
        adam.step("p", param, g2)
        assert param[0] == pytest.approx(theta, rel=1e-12)

    def test_quadratic_convergence(self):
        # minimize (x - 3)^2 to high precision
        adam = Adam({"x": 0.05})
        x = np.array([10.0])
        for _ in range(2000):
            adam.step("x", x, 2.0 * (x - 3.0))
        assert abs(x[0] - 3.0) < 1e-6

    def test_per_name_state_is_independent(self, rng):
        adam = Adam({"a": 0.1, "b": 0.1})
        a = rng.standard_normal(4)
        b = rng.standard_normal(4)
        adam.step("a", a, np.ones(4))
        assert "b" not in adam.state
        adam.step("b", b, np.ones(4))
        assert adam.state["a"]["step"] == 1
        assert adam.state["b"]["step"] == 1

    def test_missing_lr_and_shape_mismatch_rejected(self, rng):
        adam = Adam({"a": 0.1})
        with pytest.raises(InvalidParameterError):
            adam.step("unknown", np.zeros(3), np.zeros(3))
        with pytest.raises(InvalidParameterError):
            adam.step("a", np.zeros(3), np.zeros(4))

    def test_bad_betas_rejected(self):
        with pytest.raises(InvalidParameterError):
            Adam({"a": 0.1}, beta1=1.0)


class TestRowSurgery:
    def seeded_adam(self, rng, rows=5):
        adam = Adam({"p": 0.1})
        param = rng.standard_normal((rows, 3))
        for _ in range(3):
            adam.step("p", param, rng.standard_normal((rows, 3)))
        return adam, param

    def test_select_rows_keeps_matching_moments(self, rng):
        adam, param = self.seeded_adam(rng)
        keep = np.array([0, 2, 4])
        m_before = adam.state["p"]["m"].copy()
        adam.select_rows("p", keep)
        np.testing.assert_array_equal(adam.state["p"]["m"], m_before[keep])

    def test_append_zero_rows(self, rng):
        adam, param = self.seeded_adam(rng)
        adam.append_zero_rows("p", 2)
        st = adam.state["p"]
        assert st["m"].shape == (7, 3)
        assert np.all(st["m"][5:] == 0.0) and np.all(st["v"][5:] == 0.0)

    def test_reset_rows(self, rng):
        adam, param = self.seeded_adam(rng)
        adam.reset_rows("p", np.array([1, 3]))
        st = adam.state["p"]
        assert np.all(st["m"][[1, 3]] == 0.0)
        assert np.any(st["m"][[0, 2, 4]] != 0.0)

    def test_surgery_then_step_works(self, rng):
        adam, param = self.seeded_adam(rng)
        adam.select_rows("p", np.array([0, 1]))
        param = param[:2]
        adam.append_zero_rows("p", 1)
        param = np.vstack([param, np.zeros((1, 3))])
        adam.step("p", param, np.ones((3, 3)))  # shapes agree after surgery
        assert param.shape == (3, 3)

    def test_shape_drift_without_surgery_resets_state(self, rng):
        # safety net: a param whose shape changed without select/append gets
        # fresh state instead of a broadcast error
        adam, param = self.seeded_adam(rng)
        smaller = param[:2].copy()
        adam.step("p", smaller, np.ones((2, 3)))
        assert adam.state["p"]["step"] == 1


class TestSchedule:
    def test_endpoints(self):
        assert exponential_lr(0, 100, 1e-2, 1e-4) == pytest.approx(1e-2)
        assert exponential_lr(99, 100, 1e-2, 1e-4) == pytest.approx(1e-4)

    def test_log_linear_midpoint(self):
        mid = exponential_lr(50, 101, 1e-2, 1e-4)
        assert mid == pytest.approx(1e-3, rel=1e-9)

    def test_monotone_decay(self):
        values = [exponential_lr(s, 50, 1e-2, 1e-5) for s in range(50)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_degenerate_total(self):
        assert exponential_lr(0, 1, 1e-2, 1e-4) == 1e-4
