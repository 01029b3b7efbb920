"""Exact reference solvers for linear and quadratic assignment."""

import itertools
from dataclasses import dataclass

import numpy as np

from . import backend
from .lowrank import Assignment

BRUTE_FORCE_LAP_MAX = 9
BRUTE_FORCE_QAP_MAX = 10


@dataclass
class OracleResult:
    assignment: Assignment
    objective: float
    method: str


def lap_objective(a: np.ndarray, assignment: Assignment) -> float:
    """sum_i A[i, p(i)]."""
    p = assignment.target
    return float(np.asarray(a)[np.arange(len(assignment)), p].sum())


def qap_objective(a: np.ndarray, b: np.ndarray, assignment: Assignment) -> float:
    """sum_ij A[i, j] * B[p(i), p(j)] (the standard pairwise-cost convention)."""
    p = assignment.target
    b = np.asarray(b)
    return float((np.asarray(a) * b[np.ix_(p, p)]).sum())


def hungarian(a: np.ndarray) -> OracleResult:
    """Provably optimal assignment minimizing sum_i A[i, p(i)], O(n^3)."""
    a = np.asarray(a, dtype=np.float64)
    col_of_row, objective = backend.lap_solve(a)
    return OracleResult(Assignment(col_of_row), float(objective), "hungarian")


def brute_force_lap(a: np.ndarray) -> OracleResult:
    """Exhaustive LAP minimum; lexicographically smallest optimum on ties."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if n > BRUTE_FORCE_LAP_MAX:
        raise ValueError(f"brute-force LAP limited to n <= {BRUTE_FORCE_LAP_MAX}, got n={n}")
    rows = np.arange(n)
    best_p, best_obj = None, np.inf
    for perm in itertools.permutations(range(n)):
        obj = a[rows, perm].sum()
        if obj < best_obj:
            best_obj, best_p = obj, perm
    return OracleResult(Assignment(np.array(best_p, dtype=np.int64)), float(best_obj), "brute_force")


def brute_force_qap(a, b: np.ndarray | None = None) -> OracleResult:
    """Exhaustive QAP minimum of sum_ij A[i,j] B[p(i),p(j)].

    Accepts either the pair of cost matrices or an instance object carrying
    .A and .B.  Lexicographically smallest optimum on ties.  Enumeration is
    chunked and evaluated with vectorized gathers.
    """
    if b is None:
        a, b = a.A, a.B
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    if n > BRUTE_FORCE_QAP_MAX:
        raise ValueError(f"brute-force QAP limited to n <= {BRUTE_FORCE_QAP_MAX}, got n={n}")
    best_p, best_obj = None, np.inf
    chunk = 20000
    it = itertools.permutations(range(n))
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        # objective for each permutation in the block: <A, B[p][:, p]>
        gathered = b[block[:, :, None], block[:, None, :]]
        objs = np.einsum("ij,kij->k", a, gathered)
        k = int(np.argmin(objs))
        if objs[k] < best_obj:
            best_obj = float(objs[k])
            best_p = block[k].copy()
    return OracleResult(Assignment(best_p), best_obj, "brute_force")
