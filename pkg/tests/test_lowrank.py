import numpy as np
import pytest

from permkiss.kissing import rank_for
from permkiss.lowrank import (
    Assignment,
    DegenerateRowError,
    EntrySet,
    FactorPair,
    evaluate_entries,
    exact_factor_pair,
    greedy_round,
    greedy_round_sparse,
    normalize,
    relu_permutation,
    representation_size,
    softmax_permutation,
    validity_metrics,
    validity_metrics_sparse,
)


class TestAssignment:
    def test_bijection_enforced(self):
        Assignment([1, 0, 2])
        with pytest.raises(ValueError):
            Assignment([0, 0, 2])
        with pytest.raises(ValueError):
            Assignment([0, 1, 3])

    def test_matrix_roundtrip(self, rng):
        a = Assignment.random(9, rng)
        p = a.to_matrix()
        assert (p.sum(0) == 1).all() and (p.sum(1) == 1).all()
        assert Assignment(np.argmax(p, axis=1)) == a

    def test_inverse(self, rng):
        a = Assignment.random(11, rng)
        assert a.inverse().inverse() == a


class TestEntrySet:
    def test_sorted_and_grouped(self):
        es = EntrySet([2, 0, 0, 1], [1, 3, 0, 2], n=4)
        assert es.rows.tolist() == [0, 0, 1, 2]
        assert es.cols.tolist() == [0, 3, 2, 1]
        assert es.active_rows.tolist() == [0, 1, 2]
        assert es.seg_ptr.tolist() == [0, 2, 3, 4]

    def test_duplicate_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            EntrySet([0, 0], [1, 1], n=2)

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            EntrySet([0], [5], n=3)

    def test_full(self):
        es = EntrySet.full(3)
        assert len(es) == 9
        assert es.covers_all_rows()


class TestNormalize:
    def test_scales_row(self):
        fp = FactorPair(np.array([[3.0, 4.0]]), np.array([[1.0, 0.0]]))
        out = normalize(fp)
        np.testing.assert_allclose(out.V, [[0.6, 0.8]])

    def test_idempotent(self, rng):
        fp = normalize(FactorPair(rng.standard_normal((5, 3)), rng.standard_normal((5, 3))))
        again = normalize(fp)
        np.testing.assert_allclose(again.V, fp.V, atol=1e-15)
        np.testing.assert_allclose(again.W, fp.W, atol=1e-15)

    def test_unit_rows(self, rng):
        fp = normalize(FactorPair(rng.standard_normal((20, 6)), rng.standard_normal((20, 6))))
        np.testing.assert_allclose(np.linalg.norm(fp.V, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(fp.W, axis=1), 1.0, atol=1e-12)

    def test_degenerate_row(self):
        fp = FactorPair(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
        with pytest.raises(DegenerateRowError, match="row 0 in V"):
            normalize(fp)


class TestReluPermutation:
    def test_two_point_identity(self):
        fp = FactorPair(np.array([[1.0], [-1.0]]), np.array([[1.0], [-1.0]]))
        np.testing.assert_allclose(relu_permutation(fp), np.eye(2), atol=1e-15)

    def test_hexagon_cyclic_shift(self, get_code):
        code = get_code(6, 2)
        shift = Assignment(np.roll(np.arange(6), 1))
        p = relu_permutation(exact_factor_pair(shift, code.points))
        np.testing.assert_allclose(p, shift.to_matrix(), atol=1e-8)

    def test_random_permutation_construction(self, get_code, rng):
        code = get_code(50, 7)
        perm = Assignment.random(50, rng)
        p = relu_permutation(exact_factor_pair(perm, code.points))
        np.testing.assert_allclose(p, perm.to_matrix(), atol=1e-8)

    def test_cap(self, rng):
        fp = FactorPair(rng.standard_normal((8, 2)), rng.standard_normal((8, 2)))
        with pytest.raises(ValueError, match="refusing to materialize"):
            relu_permutation(fp, cap=4)


class TestSoftmaxPermutation:
    def test_alpha_zero_uniform(self, rng):
        fp = FactorPair(rng.standard_normal((7, 3)), rng.standard_normal((7, 3)), alpha=0.0)
        np.testing.assert_allclose(softmax_permutation(fp), np.full((7, 7), 1 / 7), atol=1e-15)

    def test_rows_sum_to_one(self, rng):
        fp = FactorPair(rng.standard_normal((40, 5)) * 3, rng.standard_normal((40, 5)), alpha=50.0)
        p = softmax_permutation(fp)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_approximation_bound(self, get_code, rng):
        # with a coherence-1/2 code and W = P V, every off-target logit
        # trails the target by at least alpha, giving the (n-1)e^{-alpha} bound
        code = get_code(100, 7)
        perm = Assignment.random(100, rng)
        for alpha in (5.0, 10.0, 20.0):
            p = softmax_permutation(exact_factor_pair(perm, code.points, alpha))
            dev = np.abs(p - perm.to_matrix()).max()
            assert dev <= 99 * np.exp(-alpha) * (1 + 1e-9)

    def test_large_alpha_identity(self):
        fp = FactorPair(np.array([[1.0], [-1.0]]), np.array([[1.0], [-1.0]]), alpha=400.0)
        np.testing.assert_allclose(softmax_permutation(fp), np.eye(2), atol=1e-12)


class TestEvaluateEntries:
    def test_singleton_row(self, rng):
        fp = FactorPair(rng.standard_normal((3, 2)), rng.standard_normal((3, 2)), alpha=2.0)
        es = EntrySet([0, 1, 1], [2, 0, 1], n=3)
        vals = evaluate_entries(fp, es)
        assert vals[0] == pytest.approx(1.0)

    def test_two_entry_scalar(self):
        # logits 2a*1 and 2a*0.3 -> matched entry value 1/(1+exp(-28)) at a=20
        v = np.array([[1.0, 0.0]])
        w = np.array([[1.0, 0.0], [0.3, np.sqrt(1 - 0.09)]])
        fp = FactorPair(np.vstack([v, v]), w, alpha=20.0)
        es = EntrySet([0, 0], [0, 1], n=2)
        vals = evaluate_entries(fp, es)
        assert vals[0] == pytest.approx(1.0 / (1.0 + np.exp(-28.0)), rel=1e-12)

    @pytest.mark.parametrize("n", [5, 17, 50])
    def test_full_set_matches_dense(self, n, rng):
        fp = FactorPair(rng.standard_normal((n, 4)), rng.standard_normal((n, 4)), alpha=7.0)
        vals = evaluate_entries(fp, EntrySet.full(n))
        np.testing.assert_allclose(vals.reshape(n, n), softmax_permutation(fp), atol=1e-12)

    def test_rejects_wrong_n(self, rng):
        fp = FactorPair(rng.standard_normal((3, 2)), rng.standard_normal((3, 2)))
        with pytest.raises(ValueError, match="n="):
            evaluate_entries(fp, EntrySet([0], [0], n=4))


class TestGreedyRound:
    def test_identity(self):
        assert greedy_round(np.eye(5)) == Assignment.identity(5)

    def test_permutation_fixed_point(self, rng):
        a = Assignment.random(12, rng)
        assert greedy_round(a.to_matrix()) == a

    def test_hand_traced(self):
        a = greedy_round(np.array([[0.6, 0.4], [0.7, 0.3]]))
        assert a.target.tolist() == [1, 0]

    def test_tie_breaks_lexicographic(self):
        a = greedy_round(np.full((3, 3), 0.5))
        assert a.target.tolist() == [0, 1, 2]

    def test_idempotent_on_own_output(self, rng):
        p = rng.uniform(size=(9, 9))
        a = greedy_round(p)
        assert greedy_round(a.to_matrix()) == a

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            greedy_round(np.array([[-1.0, 0.0], [0.0, 1.0]]))

    @pytest.mark.parametrize("trial", range(10))
    def test_sparse_matches_dense(self, trial):
        rng = np.random.default_rng(trial)
        n = int(rng.integers(3, 15))
        dense = np.zeros((n, n))
        k = int(rng.integers(0, 2 * n + 1))
        rows = rng.integers(n, size=k)
        cols = rng.integers(n, size=k)
        dense[rows, cols] = rng.uniform(0.1, 1.0, size=k)
        rr, cc = np.nonzero(dense)
        es = EntrySet(rr, cc, n)
        np.testing.assert_array_equal(
            greedy_round_sparse(es, dense[rr, cc]).target, greedy_round(dense).target
        )


class TestValidityMetrics:
    def test_exact_permutation(self, rng):
        p = Assignment.random(8, rng).to_matrix()
        assert validity_metrics(p, 0.5) == (True, 0)

    def test_doubled_column(self):
        # rows argmax (0, 1, 1): column 1 holds two entries, column 2 none
        p = np.zeros((3, 3))
        p[0, 0] = p[1, 1] = p[2, 1] = 1.0
        valid, hamming = validity_metrics(p, 0.5)
        assert not valid
        assert hamming == 2

    def test_threshold_sensitivity(self):
        p = np.full((2, 2), 0.4)
        assert validity_metrics(p, 0.5) == (False, 4)
        p = np.array([[0.6, 0.0], [0.0, 0.6]])
        assert validity_metrics(p, 0.5) == (True, 0)

    def test_sparse_matches_dense(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 12))
            dense = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < 0.3)
            rr, cc = np.nonzero(dense)
            if rr.size == 0:
                continue
            es = EntrySet(rr, cc, n)
            assert validity_metrics_sparse(es, dense[rr, cc], 0.5) == validity_metrics(dense, 0.5)

    def test_valid_iff_greedy_fixed_point(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 8))
            p = rng.uniform(size=(n, n)) ** 3
            valid, _ = validity_metrics(p, 0.5)
            binar = (p > 0.5).astype(float)
            fixed = np.array_equal(greedy_round(p).to_matrix(), binar)
            assert valid == fixed


class TestRepresentationSize:
    def test_paper_scale(self):
        assert representation_size(20000, 21) == (840000, 400000000)

    def test_full_table_scale_ratio(self):
        factor, dense = representation_size(196560, 24)
        assert round(dense / factor) == 4095

    def test_trivial(self):
        assert representation_size(1, 1) == (2, 1)
