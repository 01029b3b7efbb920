import json

import numpy as np
import pytest

from permkiss import io as pio
from permkiss.lowrank import Assignment
from permkiss.oracle import qap_objective
from permkiss.solvers import LapInstance, QapInstance, SolveReport, make_sparse_lap


class TestQaplib:
    def test_minimal(self):
        inst = pio.parse_qaplib("1 5 7")
        assert inst.n == 1
        assert inst.A.tolist() == [[5.0]]
        assert inst.B.tolist() == [[7.0]]

    def test_roundtrip(self, rng):
        n = 12
        a = rng.integers(0, 100, (n, n)).astype(float)
        b = rng.integers(0, 100, (n, n)).astype(float)
        inst = QapInstance("x", a, b)
        again = pio.parse_qaplib(pio.serialize_qaplib(inst))
        np.testing.assert_array_equal(again.A, a)
        np.testing.assert_array_equal(again.B, b)

    def test_tolerates_messy_whitespace(self):
        text = "2\n\n1 2\n3 4\n\n\n 5 6\n7   8 \n"
        inst = pio.parse_qaplib(text)
        assert inst.A.tolist() == [[1, 2], [3, 4]]
        assert inst.B.tolist() == [[5, 6], [7, 8]]

    def test_truncated_names_position(self):
        with pytest.raises(pio.ParseError, match="missing token #9"):
            pio.parse_qaplib("2 1 2 3 4 5 6 7")

    def test_extra_token(self):
        with pytest.raises(pio.ParseError, match="extra token"):
            pio.parse_qaplib("1 5 7 9")

    def test_non_integer(self):
        with pytest.raises(pio.ParseError, match="expected integer"):
            pio.parse_qaplib("2 1 2 3 x 5 6 7 8")

    def test_bad_n(self):
        with pytest.raises(pio.ParseError, match="positive"):
            pio.parse_qaplib("0")


class TestSolution:
    def test_roundtrip(self, rng):
        a = Assignment.random(6, rng)
        text = pio.serialize_solution(6, 123.0, a)
        n, obj, back = pio.parse_solution(text)
        assert (n, obj) == (6, 123.0)
        assert back == a

    def test_one_based_converted(self):
        n, obj, a = pio.parse_solution("3 9\n2 3 1\n")
        assert a.target.tolist() == [1, 2, 0]

    def test_non_bijection(self):
        with pytest.raises(pio.ParseError, match="bijection"):
            pio.parse_solution("3 9\n1 1 3\n")

    def test_attach_validates_objective(self, rng):
        n = 5
        a = rng.integers(0, 9, (n, n)).astype(float)
        b = rng.integers(0, 9, (n, n)).astype(float)
        inst = QapInstance("x", a, b)
        perm = Assignment.random(n, rng)
        good = pio.serialize_solution(n, qap_objective(a, b, perm), perm)
        attached = pio.attach_solution(inst, good)
        assert attached.optimum == pytest.approx(qap_objective(a, b, perm))
        bad = pio.serialize_solution(n, qap_objective(a, b, perm) + 10.0, perm)
        with pytest.raises(pio.ParseError, match="not reproduced"):
            pio.attach_solution(inst, bad)


class TestTriplets:
    def test_minimal(self):
        inst = pio.parse_triplets("2\n0 0 1.5\n")
        assert inst.n == 2
        assert inst.rows.tolist() == [0]
        assert inst.vals.tolist() == [1.5]

    def test_duplicate_rejected(self):
        with pytest.raises(pio.ParseError, match="duplicate"):
            pio.parse_triplets("2\n0 0 1.0\n0 0 2.0\n")

    def test_out_of_range(self):
        with pytest.raises(pio.ParseError, match="out of range"):
            pio.parse_triplets("2\n0 5 1.0\n")

    def test_malformed_line(self):
        with pytest.raises(pio.ParseError, match="line 2"):
            pio.parse_triplets("2\n0 0\n")

    def test_density_roundtrip(self):
        inst = make_sparse_lap(1000, 0.01, seed=0)
        again = pio.parse_triplets(pio.serialize_triplets(inst))
        assert again.n == inst.n
        sa = np.lexsort((inst.cols, inst.rows))
        sb = np.lexsort((again.cols, again.rows))
        np.testing.assert_array_equal(inst.rows[sa], again.rows[sb])
        np.testing.assert_array_equal(inst.cols[sa], again.cols[sb])
        np.testing.assert_array_equal(inst.vals[sa], again.vals[sb])  # exact reals


class TestMatrix:
    def test_roundtrip_exact(self, rng):
        m = rng.standard_normal((4, 7))
        back = pio.matrix_from_text(pio.matrix_to_text(m))
        np.testing.assert_array_equal(back, m)

    def test_count_mismatch(self):
        with pytest.raises(pio.ParseError, match="expected 4 matrix entries"):
            pio.matrix_from_text("2 2\n1 2 3\n")


class TestReports:
    def _report(self, **kw):
        base = dict(solver="lap-dense", n=4, m=2, objective=1.25, is_valid=True,
                    hamming=0, rounded=False, iterations=10, wall_time_s=0.5,
                    peak_elements=32, dense_elements=16,
                    settings={"seed": 0}, metrics={})
        base.update(kw)
        return SolveReport(**base)

    def test_roundtrip(self):
        rep = self._report(oracle_objective=1.0, oracle_method="hungarian",
                           relative_gap=0.25)
        doc = pio.load_report(pio.emit_report(rep))
        assert doc["objective"] == 1.25
        assert doc["relative_gap"] == 0.25
        assert doc["schema"] == pio.REPORT_SCHEMA

    def test_gap_omitted_when_unknown(self):
        doc = json.loads(pio.emit_report(self._report()))
        assert "relative_gap" not in doc
        assert "oracle_objective" not in doc

    def test_full_float_precision(self):
        rep = self._report(objective=0.1 + 0.2)
        doc = json.loads(pio.emit_report(rep))
        assert doc["objective"] == 0.1 + 0.2

    def test_jsonl_batch(self):
        lines = [pio.emit_report(self._report(objective=float(i))) for i in range(10)]
        batch = "\n".join(lines)
        docs = [pio.load_report(line) for line in batch.splitlines()]
        assert [d["objective"] for d in docs] == [float(i) for i in range(10)]
        assert all(d["schema"] == pio.REPORT_SCHEMA for d in docs)

    def test_unknown_schema_rejected(self):
        with pytest.raises(pio.ParseError, match="schema"):
            pio.load_report('{"schema": "other/9"}')
