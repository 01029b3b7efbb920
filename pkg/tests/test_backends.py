import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

from permkiss import _kernels_py
from permkiss import backend

try:
    from permkiss import _kernels
except ImportError:
    _kernels = None

needs_compiled = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")

LANES = [_kernels_py] + ([_kernels] if _kernels is not None else [])


@pytest.mark.parametrize("lane", LANES)
class TestLapSolveLanes:
    def test_matches_brute_force(self, lane):
        rng = np.random.default_rng(1)
        for _ in range(150):
            n = int(rng.integers(1, 7))
            c = rng.standard_normal((n, n))
            best = min(
                sum(c[i, p[i]] for i in range(n))
                for p in itertools.permutations(range(n))
            )
            col, obj = lane.lap_solve(c)
            assert obj == pytest.approx(best, abs=1e-10)
            assert sorted(col.tolist()) == list(range(n))

    def test_integer_costs(self, lane):
        col, obj = lane.lap_solve(np.array([[4, 1], [2, 3]]))
        assert obj == 3.0

    def test_rejects_nonsquare(self, lane):
        with pytest.raises(ValueError):
            lane.lap_solve(np.zeros((2, 3)))


@needs_compiled
class TestLaneParity:
    def test_lap_objectives_agree(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            c = rng.standard_normal((n, n))
            _, o1 = _kernels.lap_solve(c)
            _, o2 = _kernels_py.lap_solve(c)
            assert o1 == pytest.approx(o2, abs=1e-9)

    def test_segment_ops_agree(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            nseg = int(rng.integers(1, 30))
            lens = rng.integers(1, 9, size=nseg)
            ptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
            logits = rng.standard_normal(int(ptr[-1])) * 10
            p1 = _kernels.segment_softmax(logits, ptr)
            p2 = _kernels_py.segment_softmax(logits, ptr)
            np.testing.assert_allclose(p1, p2, atol=1e-14)
            g = rng.standard_normal(logits.size)
            np.testing.assert_allclose(
                _kernels.segment_softmax_grad(p1, g, ptr),
                _kernels_py.segment_softmax_grad(p2, g, ptr),
                atol=1e-14,
            )

    def test_gather_scatter_agree(self):
        rng = np.random.default_rng(4)
        v = rng.standard_normal((12, 5))
        w = rng.standard_normal((9, 5))
        rows = rng.integers(12, size=40).astype(np.int64)
        cols = rng.integers(9, size=40).astype(np.int64)
        np.testing.assert_allclose(
            _kernels.entry_dots(v, w, rows, cols),
            _kernels_py.entry_dots(v, w, rows, cols),
            atol=1e-14,
        )
        coeff = rng.standard_normal(40)
        o1 = np.zeros((12, 5))
        o2 = np.zeros((12, 5))
        _kernels.scatter_rows_add(o1, rows, coeff, w, cols)
        _kernels_py.scatter_rows_add(o2, rows, coeff, w, cols)
        np.testing.assert_allclose(o1, o2, atol=1e-13)


class TestSelection:
    def test_backend_reports_lane(self):
        assert backend.BACKEND in ("cython", "python")

    def test_env_forces_python_lane(self):
        env = dict(os.environ, PERMKISS_BACKEND="python")
        out = subprocess.run(
            [sys.executable, "-c", "import permkiss.backend as b; print(b.BACKEND)"],
            capture_output=True, text=True, env=env, check=True,
        )
        assert out.stdout.strip() == "python"

    def test_env_rejects_unknown(self):
        env = dict(os.environ, PERMKISS_BACKEND="fortran")
        out = subprocess.run(
            [sys.executable, "-c", "import permkiss.backend"],
            capture_output=True, text=True, env=env,
        )
        assert out.returncode != 0
