"""End-to-end drivers: point alignment, dense/sparse LAP, and the QAP sweep."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import grad, lowrank, oracle
from .kissing import rank_for
from .lowrank import Assignment, EntrySet, FactorPair
from .optim import Adam, Schedule, spectral_norm


@dataclass
class AlignProblem:
    """Point set x1 on the unit sphere, its transformed permuted copy x2,
    the ground-truth matching and transform."""

    x1: np.ndarray
    x2: np.ndarray
    gt: Assignment
    theta_gt: np.ndarray

    @property
    def n(self) -> int:
        return self.x1.shape[0]

    @property
    def m(self) -> int:
        return self.x1.shape[1]


@dataclass
class LapInstance:
    """Dense cost matrix, or a sparse triplet support with implicit zeros."""

    n: int
    dense: np.ndarray | None = None
    rows: np.ndarray | None = None
    cols: np.ndarray | None = None
    vals: np.ndarray | None = None

    def __post_init__(self):
        if (self.dense is None) == (self.rows is None):
            raise ValueError("exactly one of dense or triplet data must be set")
        if self.dense is not None:
            self.dense = np.asarray(self.dense, dtype=np.float64)
            if self.dense.shape != (self.n, self.n):
                raise ValueError("dense cost must be n x n")
        else:
            self.rows = np.asarray(self.rows, dtype=np.int64)
            self.cols = np.asarray(self.cols, dtype=np.int64)
            self.vals = np.asarray(self.vals, dtype=np.float64)
            # EntrySet validates ranges and duplicates
            self.support()

    @property
    def is_sparse(self) -> bool:
        return self.dense is None

    @property
    def density(self) -> float:
        if not self.is_sparse:
            return 1.0
        return self.rows.size / float(self.n) ** 2

    def support(self) -> EntrySet:
        if not self.is_sparse:
            raise ValueError("dense instance has no sparse support")
        return EntrySet(self.rows, self.cols, self.n)

    def dense_matrix(self) -> np.ndarray:
        """Zero-completed dense cost matrix."""
        if not self.is_sparse:
            return self.dense
        a = np.zeros((self.n, self.n))
        a[self.rows, self.cols] = self.vals
        return a


@dataclass
class QapInstance:
    """Koopmans-Beckmann pair (A, B) with an optional known optimum."""

    name: str
    A: np.ndarray
    B: np.ndarray
    optimum: float | None = None
    opt_assignment: Assignment | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64)
        if self.A.shape != self.B.shape or self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("A and B must be square matrices of equal size")
        if self.optimum is not None and self.opt_assignment is not None:
            val = oracle.qap_objective(self.A, self.B, self.opt_assignment)
            if abs(val - self.optimum) > 1e-6 * max(1.0, abs(self.optimum)):
                raise ValueError(
                    f"stated optimum {self.optimum} is not reproduced by its "
                    f"assignment (evaluates to {val})"
                )

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass
class SolveReport:
    """Metrics bundle for one solve, with full settings provenance."""

    solver: str
    n: int
    m: int
    objective: float
    is_valid: bool | None = None
    hamming: int | None = None
    rounded: bool | None = None
    oracle_objective: float | None = None
    oracle_method: str | None = None
    relative_gap: float | None = None
    iterations: int = 0
    wall_time_s: float = 0.0
    peak_elements: int = 0
    dense_elements: int = 0
    settings: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for key in (
            "solver", "n", "m", "objective", "is_valid", "hamming", "rounded",
            "oracle_objective", "oracle_method", "relative_gap", "iterations",
            "wall_time_s", "peak_elements", "dense_elements", "settings", "metrics",
        ):
            val = getattr(self, key)
            if val is None:
                continue  # omitted, never null-as-zero
            out[key] = val
        return out


def _relative_gap(objective: float, opt: float) -> float | None:
    if abs(opt) < 1e-300:
        return None
    return (objective - opt) / abs(opt)


def _init_factors(n: int, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    v = rng.standard_normal((n, m))
    w = rng.standard_normal((n, m))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    return v, w


# ---------------------------------------------------------------------------
# point cloud alignment


def make_align_problem(n: int, m: int | None = None, seed: int = 0) -> AlignProblem:
    """Random alignment instance: x1 uniform on the sphere, x2 a transformed
    and permuted copy under a well-conditioned random transform."""
    if m is None:
        m = rank_for(n)
    rng = np.random.default_rng([211, n, m, seed])
    x1 = rng.standard_normal((n, m))
    x1 /= np.linalg.norm(x1, axis=1, keepdims=True)
    while True:
        theta_gt = rng.standard_normal((m, m))
        if np.linalg.cond(theta_gt) <= 100.0:
            break
    gt = Assignment(rng.permutation(n).astype(np.int64))
    x2 = np.empty_like(x1)
    x2[gt.target] = x1 @ theta_gt
    return AlignProblem(x1=x1, x2=x2, gt=gt, theta_gt=theta_gt)


def nn_accuracy(problem: AlignProblem, theta: np.ndarray, chunk: int = 2000) -> float:
    """Fraction of rows of x1 whose nearest neighbor among the rows of
    x2 @ theta (by cosine) is the ground-truth match."""
    vh = problem.x1 / np.linalg.norm(problem.x1, axis=1, keepdims=True)
    w = problem.x2 @ theta
    wh = w / np.linalg.norm(w, axis=1, keepdims=True)
    hits = 0
    for a in range(0, problem.n, chunk):
        b = min(a + chunk, problem.n)
        nn = np.argmax(vh[a:b] @ wh.T, axis=1)
        hits += int((nn == problem.gt.target[a:b]).sum())
    return hits / problem.n


def solve_alignment(
    problem: AlignProblem,
    steps: int = 20000,
    lr: float = 0.01,
    alpha_schedule: Schedule | None = None,
    stochastic: bool = False,
    seed: int = 0,
    early_stop: bool = True,
    check_every: int = 100,
) -> tuple[np.ndarray, SolveReport]:
    """Recover the aligning transform by minimizing the matched-entry NLL.

    The success criterion is nearest-neighbor accuracy 1.0: every row of x1
    finds its ground-truth partner as the closest row of x2 @ theta.  With
    early_stop the loop ends as soon as that holds (checked every
    check_every steps).
    """
    n, m = problem.n, problem.m
    if alpha_schedule is None:
        alpha_schedule = Schedule.linear(5e-5, 1000.0, steps)
    theta = np.eye(m)
    adam = Adam(lr=lr)
    rng = np.random.default_rng([977, n, seed])
    t0 = time.perf_counter()
    iterations = 0
    value = math.nan
    for t in range(steps):
        alpha = alpha_schedule.value(t)
        if stochastic:
            rand_cols = rng.integers(n, size=n)
            le = grad.nll_alignment_loss_stochastic(
                theta, problem.x1, problem.x2, problem.gt, alpha, rand_cols
            )
        else:
            le = grad.nll_alignment_loss(theta, problem.x1, problem.x2, problem.gt, alpha)
        if not math.isfinite(le.value):
            raise RuntimeError(f"alignment diverged: non-finite loss at step {t}")
        adam.step({"theta": theta}, {"theta": le.grad_Theta})
        iterations = t + 1
        value = le.value
        if early_stop and (t + 1) % check_every == 0:
            if nn_accuracy(problem, theta) == 1.0:
                break
    accuracy = nn_accuracy(problem, theta)
    wall = time.perf_counter() - t0

    entries_per_step = 2 * n if stochastic else n * n
    report = SolveReport(
        solver="align",
        n=n,
        m=m,
        objective=float(value),
        iterations=iterations,
        wall_time_s=wall,
        peak_elements=2 * n * m + entries_per_step,
        dense_elements=n * n,
        settings={
            "steps": steps,
            "lr": lr,
            "alpha_start": alpha_schedule.start,
            "alpha_end": alpha_schedule.end,
            "stochastic": stochastic,
            "seed": seed,
            "early_stop": early_stop,
            "check_every": check_every,
            "theta_init": "identity",
        },
        metrics={"nn_accuracy": accuracy, "final_alpha": alpha_schedule.value(iterations - 1)},
    )
    return theta, report


# ---------------------------------------------------------------------------
# linear assignment


def make_feature_lap(n: int, k: int, seed: int = 0) -> LapInstance:
    """Synthetic feature-product cost A = D_X D_Y^T with i.i.d. normal features."""
    rng = np.random.default_rng([389, n, k, seed])
    dx = rng.standard_normal((n, k))
    dy = rng.standard_normal((n, k))
    return LapInstance(n=n, dense=dx @ dy.T)


def make_sparse_lap(n: int, density: float, seed: int = 0, k: int = 64) -> LapInstance:
    """Sparse candidate-shortlist LAP with density * n^2 entries.

    Each row's support is its top density*n columns by feature-product
    similarity (unit-normalized k-dimensional features), stored as negated
    similarities so that minimization rewards good matches and the implicit
    zeros are unattractive.  The similarity matrix is scanned in row chunks
    and never materialized.
    """
    rng = np.random.default_rng([523, n, seed])
    per_row = max(1, int(round(density * n)))
    dx = rng.standard_normal((n, k))
    dy = rng.standard_normal((n, k))
    dx /= np.linalg.norm(dx, axis=1, keepdims=True)
    dy /= np.linalg.norm(dy, axis=1, keepdims=True)
    cols = np.empty((n, per_row), dtype=np.int64)
    vals = np.empty((n, per_row))
    chunk = max(1, 2_000_000 // n)
    for a0 in range(0, n, chunk):
        b0 = min(a0 + chunk, n)
        sims = dx[a0:b0] @ dy.T
        top = np.argpartition(-sims, per_row - 1, axis=1)[:, :per_row]
        cols[a0:b0] = top
        vals[a0:b0] = -np.take_along_axis(sims, top, axis=1)
    rows = np.repeat(np.arange(n, dtype=np.int64), per_row)
    return LapInstance(n=n, rows=rows, cols=cols.reshape(-1), vals=vals.reshape(-1))


def solve_lap_dense(
    inst: LapInstance,
    m: int = 30,
    alpha: float = 20.0,
    steps: int = 20000,
    lr: float = 0.01,
    reg_weight: float = 8.0,
    seed: int = 0,
    threshold: float = 0.5,
    maximize: bool = False,
    compute_oracle: bool = True,
    alpha_schedule: Schedule | None = None,
) -> tuple[Assignment, SolveReport]:
    """Optimize the dense regularized LAP energy over random factors.

    The cost is internally rescaled to unit spread for optimizer
    conditioning; all reported objectives use the original scale.  By
    default the temperature ramps monotonically up to alpha over the first
    half of the run and then stays there (cold starts at the final
    temperature saturate the softmax rows before conflicts are resolved);
    pass an explicit schedule to override.  If the binarized solution
    violates the permutation constraints, greedy rounding projects it to a
    valid assignment.
    """
    if inst.is_sparse:
        raise ValueError("solve_lap_dense needs a dense instance")
    n = inst.n
    cost = -inst.dense if maximize else inst.dense
    scale = float(cost.std()) or 1.0
    cost_opt = cost / scale
    if alpha_schedule is None:
        alpha_schedule = Schedule.linear(min(1.0, alpha), alpha, max(1, steps // 2))

    rng = np.random.default_rng([641, n, m, seed])
    v, w = _init_factors(n, m, rng)
    adam = Adam(lr=lr)
    t0 = time.perf_counter()
    for t in range(steps):
        le = grad.lap_loss(FactorPair(v, w, alpha_schedule.value(t)), cost_opt, reg_weight)
        if not math.isfinite(le.value):
            raise RuntimeError(f"dense LAP diverged: non-finite loss at step {t}")
        adam.step({"v": v, "w": w}, {"v": le.grad_V, "w": le.grad_W})

    final_alpha = alpha_schedule.value(steps - 1)
    p = lowrank.softmax_permutation(FactorPair(v, w, final_alpha))
    valid, hamming = lowrank.validity_metrics(p, threshold)
    assignment = lowrank.greedy_round(p)
    objective = oracle.lap_objective(cost, assignment)
    wall = time.perf_counter() - t0

    report = SolveReport(
        solver="lap-dense",
        n=n,
        m=m,
        objective=objective,
        is_valid=valid,
        hamming=hamming,
        rounded=not valid,
        iterations=steps,
        wall_time_s=wall,
        peak_elements=2 * n * m + n * n,
        dense_elements=n * n,
        settings={
            "alpha_start": alpha_schedule.start,
            "alpha_end": alpha_schedule.end,
            "steps": steps,
            "lr": lr,
            "reg_weight": reg_weight,
            "seed": seed,
            "threshold": threshold,
            "maximize": maximize,
            "cost_scale": scale,
        },
    )
    if compute_oracle:
        opt = oracle.hungarian(cost)
        report.oracle_objective = opt.objective
        report.oracle_method = opt.method
        report.relative_gap = _relative_gap(objective, opt.objective)
    return assignment, report


def _support_keys(inst: LapInstance) -> np.ndarray:
    return inst.rows * inst.n + inst.cols


def _sparse_objective(inst: LapInstance, assignment: Assignment) -> float:
    """Objective on the zero-completed matrix: unlisted entries cost zero."""
    keys = _support_keys(inst)
    order = np.argsort(keys)
    skeys, svals = keys[order], inst.vals[order]
    want = np.arange(inst.n, dtype=np.int64) * inst.n + assignment.target
    pos = np.searchsorted(skeys, want)
    pos = np.clip(pos, 0, skeys.size - 1)
    hit = skeys[pos] == want
    return float(svals[pos][hit].sum())


def solve_lap_sparse(
    inst: LapInstance,
    m: int = 20,
    alpha_schedule: Schedule | None = None,
    steps: int = 5000,
    lr: float = 0.01,
    reg_weight: float = 32.0,
    off_support_count: int = 1,
    seed: int = 0,
    threshold: float = 0.5,
    compute_oracle: bool | None = None,
    polish_steps: int | None = None,
    polish_reg: float = 1.0,
) -> tuple[Assignment, SolveReport]:
    """Sparse LAP: optimize over the support plus fresh random off-support
    entries each iteration, never materializing the dense matrix.

    A final deterministic polish phase (polish_steps, default steps // 5)
    drops the random entries and settles the factors on the support alone
    with the regularizer scaled by polish_reg, which resolves most residual
    column conflicts.  The comparison oracle runs the exact solver on the
    zero-completed dense matrix (enabled by default for n <= 2000).
    """
    if not inst.is_sparse:
        raise ValueError("solve_lap_sparse needs a sparse instance")
    n = inst.n
    if alpha_schedule is None:
        alpha_schedule = Schedule.linear(1.0, 20.0, max(1, steps // 2))
    if polish_steps is None:
        polish_steps = steps // 5
    if compute_oracle is None:
        compute_oracle = n <= 2000

    support = inst.support()
    order = np.argsort(_support_keys(inst))
    skeys = _support_keys(inst)[order]
    svals_sorted = inst.vals[order]
    scale = float(inst.vals.std()) or 1.0

    # same factor init as the dense solver, so a full-density sparse run
    # reproduces the dense trajectory; a separate stream feeds the sampling
    init_rng = np.random.default_rng([641, n, m, seed])
    v, w = _init_factors(n, m, init_rng)
    rng = np.random.default_rng([757, n, m, seed])
    adam = Adam(lr=lr)
    all_rows = np.arange(n, dtype=np.int64)
    t0 = time.perf_counter()
    peak_entries = len(support)
    for t in range(steps):
        alpha = alpha_schedule.value(t)
        # fresh random off-support entries, off_support_count per row
        rand_rows = np.repeat(all_rows, off_support_count)
        rand_cols = rng.integers(n, size=rand_rows.size)
        cand = np.unique(rand_rows * n + rand_cols)
        # keep candidates not present in the support
        pos = np.clip(np.searchsorted(skeys, cand), 0, skeys.size - 1)
        cand = cand[skeys[pos] != cand]
        er = np.concatenate([inst.rows, cand // n])
        ec = np.concatenate([inst.cols, cand % n])
        entries = EntrySet(er, ec, n)
        peak_entries = max(peak_entries, len(entries))
        # align support values with the sorted entry order; randoms cost zero
        ekeys = entries.rows * n + entries.cols
        vpos = np.searchsorted(skeys, ekeys)
        vpos = np.clip(vpos, 0, skeys.size - 1)
        evals = np.where(skeys[vpos] == ekeys, svals_sorted[vpos], 0.0)

        le = grad.lap_loss_sparse(FactorPair(v, w, alpha), entries, evals / scale, reg_weight)
        if not math.isfinite(le.value):
            raise RuntimeError(f"sparse LAP diverged: non-finite loss at step {t}")
        adam.step({"v": v, "w": w}, {"v": le.grad_V, "w": le.grad_W})

    final_alpha = alpha_schedule.value(steps - 1)
    support_vals = svals_sorted / scale  # aligned with the sorted support order

    def evaluate_support():
        """Probabilities and validity of the support-restricted solution."""
        fp = FactorPair(v, w, final_alpha)
        probs = lowrank.evaluate_entries(fp, support)
        valid, ham = lowrank.validity_metrics_sparse(support, probs, threshold)
        return probs, valid, ham

    # deterministic polish on the support, checkpointing the best-validity
    # iterate every segment
    segment = 250
    best_ham, best_vw = None, None
    for seg_start in range(0, polish_steps, segment):
        probs, valid, ham = evaluate_support()
        if best_ham is None or ham < best_ham:
            best_ham, best_vw = ham, (v.copy(), w.copy())
        if ham == 0:
            break
        for t in range(min(segment, polish_steps - seg_start)):
            le = grad.lap_loss_sparse(
                FactorPair(v, w, final_alpha), support, support_vals, polish_reg * reg_weight
            )
            if not math.isfinite(le.value):
                raise RuntimeError(f"sparse LAP diverged: non-finite loss in polish step {t}")
            adam.step({"v": v, "w": w}, {"v": le.grad_V, "w": le.grad_W})

    probs, valid, hamming = evaluate_support()
    if best_ham is not None and best_ham < hamming:
        v, w = best_vw
        probs, valid, hamming = evaluate_support()
    assignment = lowrank.greedy_round_sparse(support, probs)
    objective = _sparse_objective(inst, assignment)
    wall = time.perf_counter() - t0

    report = SolveReport(
        solver="lap-sparse",
        n=n,
        m=m,
        objective=objective,
        is_valid=valid,
        hamming=hamming,
        rounded=not valid,
        iterations=steps + polish_steps,
        wall_time_s=wall,
        peak_elements=2 * n * m + peak_entries,
        dense_elements=n * n,
        settings={
            "alpha_start": alpha_schedule.start,
            "alpha_end": alpha_schedule.end,
            "steps": steps,
            "lr": lr,
            "reg_weight": reg_weight,
            "off_support_count": off_support_count,
            "polish_steps": polish_steps,
            "seed": seed,
            "threshold": threshold,
            "density": inst.density,
            "cost_scale": scale,
        },
    )
    if compute_oracle:
        opt = oracle.hungarian(inst.dense_matrix())
        report.oracle_objective = opt.objective
        report.oracle_method = opt.method
        report.relative_gap = _relative_gap(objective, opt.objective)
    return assignment, report


# ---------------------------------------------------------------------------
# quadratic assignment


def solve_qap(
    inst: QapInstance,
    m: int | None = None,
    beta_stages: int = 10,
    steps_per_stage: int = 2000,
    alpha: float = 20.0,
    lr: float = 0.01,
    reg_weight: float = 1.0,
    seed: int = 0,
    threshold: float = 0.5,
) -> tuple[Assignment, SolveReport]:
    """Convex-concave sweep for the Koopmans-Beckmann QAP.

    The energy p^T (K - beta I) p is optimized with beta increased linearly
    from -|K| to +|K| over beta_stages stages (|K| is the spectral norm of
    the implicit lifted cost), warm-starting the factors between stages.
    A and B are internally rescaled by their spectral norms so the sweep
    endpoints are -1 and 1; reported objectives use the raw matrices.
    """
    n = inst.n
    if m is None:
        # a third of n, but never below the rank that can represent every
        # permutation of n exactly (matters only for very small instances)
        m = max(math.ceil(n / 3), rank_for(n))
    sa = spectral_norm(inst.A) or 1.0
    sb = spectral_norm(inst.B) or 1.0
    a_opt = inst.A / sa
    # transposed so the relaxed trace agrees with the pairwise-sum objective
    # convention sum_ij A[i,j] B[p(i),p(j)] at one-hot P
    bt_opt = inst.B.T / sb

    betas = np.linspace(-1.0, 1.0, beta_stages) if beta_stages > 1 else np.array([0.0])
    rng = np.random.default_rng([829, n, m, seed])
    v, w = _init_factors(n, m, rng)
    adam = Adam(lr=lr)
    t0 = time.perf_counter()
    total_steps = 0
    for beta in betas:
        for t in range(steps_per_stage):
            le = grad.qap_loss(FactorPair(v, w, alpha), a_opt, bt_opt, float(beta), reg_weight)
            if not math.isfinite(le.value):
                raise RuntimeError(f"QAP diverged: non-finite loss at step {total_steps}")
            adam.step({"v": v, "w": w}, {"v": le.grad_V, "w": le.grad_W})
            total_steps += 1

    p = lowrank.softmax_permutation(FactorPair(v, w, alpha))
    valid, hamming = lowrank.validity_metrics(p, threshold)
    assignment = lowrank.greedy_round(p)
    objective = oracle.qap_objective(inst.A, inst.B, assignment)
    wall = time.perf_counter() - t0

    report = SolveReport(
        solver="qap",
        n=n,
        m=m,
        objective=objective,
        is_valid=valid,
        hamming=hamming,
        rounded=not valid,
        iterations=total_steps,
        wall_time_s=wall,
        peak_elements=2 * n * m + n * n,
        dense_elements=n * n,
        settings={
            "beta_stages": beta_stages,
            "steps_per_stage": steps_per_stage,
            "alpha": alpha,
            "lr": lr,
            "reg_weight": reg_weight,
            "seed": seed,
            "threshold": threshold,
            "spectral_norm_a": sa,
            "spectral_norm_b": sb,
            "name": inst.name,
        },
        metrics={"betas": [float(b) for b in betas]},
    )
    if inst.optimum is not None:
        report.oracle_objective = float(inst.optimum)
        report.oracle_method = "known_optimum"
        report.relative_gap = _relative_gap(objective, float(inst.optimum))
    elif n <= oracle.BRUTE_FORCE_QAP_MAX:
        opt = oracle.brute_force_qap(inst.A, inst.B)
        report.oracle_objective = opt.objective
        report.oracle_method = opt.method
        report.relative_gap = _relative_gap(objective, opt.objective)
    return assignment, report
