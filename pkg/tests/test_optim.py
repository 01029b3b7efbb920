import numpy as np
import pytest

from permkiss.optim import Adam, NonFiniteGradientError, Schedule, spectral_norm


class TestAdam:
    def test_zero_gradient_no_move(self, rng):
        x = rng.standard_normal(5)
        before = x.copy()
        Adam(lr=0.1).step({"x": x}, {"x": np.zeros(5)})
        np.testing.assert_array_equal(x, before)

    def test_converges_on_quadratic(self):
        x = np.array([10.0])
        adam = Adam(lr=0.1)
        for _ in range(500):
            adam.step({"x": x}, {"x": 2.0 * (x - 3.0)})
        assert abs(x[0] - 3.0) <= 1e-2

    def test_first_step_magnitude(self, rng):
        # bias correction makes the first update approximately lr * sign(g)
        x = np.zeros(4)
        g = rng.standard_normal(4) * 100
        Adam(lr=0.05).step({"x": x}, {"x": g})
        np.testing.assert_allclose(np.abs(x), 0.05, rtol=1e-6)

    def test_nonfinite_gradient_names_variable(self):
        adam = Adam()
        with pytest.raises(NonFiniteGradientError, match="'bad'"):
            adam.step({"bad": np.zeros(2)}, {"bad": np.array([np.nan, 0.0])})

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            Adam().step({"x": np.zeros(2)}, {"x": np.zeros(3)})

    def test_best_so_far_decreases_on_convex(self):
        x = np.array([25.0])
        adam = Adam(lr=0.05)
        best = []
        cur_best = np.inf
        for t in range(500):
            val = float((x[0] - 1.0) ** 2)
            cur_best = min(cur_best, val)
            if (t + 1) % 100 == 0:
                best.append(cur_best)
            adam.step({"x": x}, {"x": 2.0 * (x - 1.0)})
        assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))


class TestSchedule:
    def test_linear_midpoint(self):
        s = Schedule.linear(0.0, 10.0, 11)
        assert s.value(5) == 5.0

    def test_constant(self):
        s = Schedule.constant(20.0)
        for t in (0, 7, 10**6):
            assert s.value(t) == 20.0

    def test_hits_both_endpoints(self):
        s = Schedule.linear(5e-5, 1000.0, 20000)
        assert s.value(0) == 5e-5
        assert s.value(19999) == 1000.0
        assert s.value(10**9) == 1000.0  # clamped past the end

    def test_monotone(self):
        s = Schedule.linear(1.0, 20.0, 100)
        vals = [s.value(t) for t in range(120)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        s = Schedule.linear(3.0, -2.0, 50)
        vals = [s.value(t) for t in range(60)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            Schedule("geometric", 1.0, 2.0, 10)


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(6)) == pytest.approx(1.0, rel=1e-6)

    def test_diagonal(self):
        assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0, rel=1e-6)

    def test_matches_svd(self, rng):
        for _ in range(10):
            a = rng.standard_normal((10, 10))
            ref = np.linalg.svd(a, compute_uv=False)[0]
            assert spectral_norm(a) == pytest.approx(ref, rel=1e-6)

    def test_bounds(self, rng):
        a = rng.standard_normal((8, 8))
        s = spectral_norm(a)
        for _ in range(100):
            x = rng.standard_normal(8)
            x /= np.linalg.norm(x)
            assert np.linalg.norm(a @ x) <= s * (1 + 1e-6)
        assert s <= np.linalg.norm(a, "fro") * (1 + 1e-9)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((4, 4))) == 0.0

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            spectral_norm(np.array([[np.inf]]))
