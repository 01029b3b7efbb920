"""Loss functions over the factorized representation with analytic gradients.

All losses normalize factor rows internally and differentiate through the
normalization, so gradients are consistent with central finite differences
taken on the raw (unnormalized) variables.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .lowrank import DegenerateRowError, DEGENERATE_ROW_NORM, EntrySet, FactorPair


@dataclass
class LossEval:
    """Loss value with gradients shaped like the free variables."""

    value: float
    grad_V: np.ndarray | None = None
    grad_W: np.ndarray | None = None
    grad_Theta: np.ndarray | None = None
    clamped: bool = False
    aux: dict = field(default_factory=dict)


class GradientCheckError(AssertionError):
    """Analytic gradient disagrees with finite differences."""


def _normalize_rows(x: np.ndarray, name: str):
    """Unit-normalize rows; returns (normalized, backward) where backward
    maps a gradient w.r.t. the normalized rows to one w.r.t. the input."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if (norms < DEGENERATE_ROW_NORM).any():
        i = int(np.argmin(norms))
        raise DegenerateRowError(f"degenerate row {i} in {name}: norm {norms[i, 0]:.3e}")
    xh = x / norms

    def backward(gh):
        return (gh - (gh * xh).sum(axis=1, keepdims=True) * xh) / norms

    return xh, backward


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def _softmax_rows_backward(p: np.ndarray, gp: np.ndarray) -> np.ndarray:
    # d loss / d logits for a row-wise softmax
    return p * (gp - (gp * p).sum(axis=1, keepdims=True))


def column_regularizer(p: np.ndarray) -> float:
    """Sum over columns of (column sum - 1)^2; zero exactly on permutations."""
    return float(((p.sum(axis=0) - 1.0) ** 2).sum())


def nll_alignment_loss(
    theta: np.ndarray, x1: np.ndarray, x2: np.ndarray, gt, alpha: float
) -> LossEval:
    """Mean negative log-likelihood of the matched entries under the
    softmax representation with V = x1 and W = x2 @ theta.

    gt[i] is the row of x2 matched to row i of x1.  The gradient w.r.t.
    theta is the full chain rule through the row normalization of W.
    """
    theta = np.asarray(theta, dtype=np.float64)
    y = np.asarray(getattr(gt, "target", gt), dtype=np.int64)
    n = x1.shape[0]
    vh, _ = _normalize_rows(np.asarray(x1, dtype=np.float64), "X1")
    w = np.asarray(x2, dtype=np.float64) @ theta
    wh, bw = _normalize_rows(w, "X2 @ Theta")
    logits = 2.0 * alpha * (vh @ wh.T)
    # stable log-softmax; the log-probabilities of the matched entries
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted[np.arange(n), y] - logz
    clamp = np.log(DEGENERATE_ROW_NORM)
    clamped = bool((logp < clamp).any())
    value = float(-np.mean(np.maximum(logp, clamp)))

    p = _softmax_rows(logits)
    dlogits = p.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dwh = 2.0 * alpha * (dlogits.T @ vh)
    grad_theta = x2.T @ bw(dwh)
    return LossEval(value=value, grad_Theta=grad_theta, clamped=clamped)


def nll_alignment_loss_stochastic(
    theta: np.ndarray,
    x1: np.ndarray,
    x2: np.ndarray,
    gt,
    alpha: float,
    rand_cols: np.ndarray,
) -> LossEval:
    """Two-entry stochastic variant of nll_alignment_loss.

    For each row i only the matched column gt[i] and one random column
    rand_cols[i] are evaluated; the softmax runs over those two entries and
    all other entries are implicitly zero.
    """
    theta = np.asarray(theta, dtype=np.float64)
    y = np.asarray(getattr(gt, "target", gt), dtype=np.int64)
    r = np.asarray(rand_cols, dtype=np.int64)
    n = x1.shape[0]
    vh, _ = _normalize_rows(np.asarray(x1, dtype=np.float64), "X1")
    w = np.asarray(x2, dtype=np.float64) @ theta
    wh, bw = _normalize_rows(w, "X2 @ Theta")
    # logits at the two entries of each row
    ly = 2.0 * alpha * np.einsum("im,im->i", vh, wh[y])
    lr = 2.0 * alpha * np.einsum("im,im->i", vh, wh[r])
    same = r == y
    gap = np.where(same, np.inf, ly - lr)
    # log softmax of the matched entry among the pair
    logp = -np.log1p(np.exp(-np.abs(gap))) - np.maximum(-gap, 0.0)
    logp = np.where(same, 0.0, logp)
    value = float(-np.mean(logp))

    py = np.where(same, 1.0, 1.0 / (1.0 + np.exp(-gap)))
    coeff = (py - 1.0) / n  # d value / d ly; d value / d lr is the negative
    dwh = np.zeros_like(wh)
    np.add.at(dwh, y, (2.0 * alpha * coeff)[:, None] * vh)
    np.add.at(dwh, r, (-2.0 * alpha * coeff)[:, None] * vh)
    grad_theta = x2.T @ bw(dwh)
    return LossEval(value=value, grad_Theta=grad_theta)


def lap_loss(fp: FactorPair, a: np.ndarray, reg_weight: float = 1.0) -> LossEval:
    """Linear assignment energy <A, P> plus the column regularizer.

    P is the dense softmax materialization of the factor pair; gradients
    flow to V and W through the softmax and the row normalization.
    """
    a = np.asarray(a, dtype=np.float64)
    vh, bv = _normalize_rows(fp.V, "V")
    wh, bw = _normalize_rows(fp.W, "W")
    p = _softmax_rows(2.0 * fp.alpha * (vh @ wh.T))
    colgap = p.sum(axis=0) - 1.0
    value = float((a * p).sum() + reg_weight * (colgap**2).sum())
    gp = a + 2.0 * reg_weight * colgap[None, :]
    dlogits = _softmax_rows_backward(p, gp)
    grad_v = bv(2.0 * fp.alpha * (dlogits @ wh))
    grad_w = bw(2.0 * fp.alpha * (dlogits.T @ vh))
    return LossEval(value=value, grad_V=grad_v, grad_W=grad_w)


def lap_loss_sparse(
    fp: FactorPair,
    entries: EntrySet,
    values: np.ndarray,
    reg_weight: float = 1.0,
) -> LossEval:
    """lap_loss restricted to the listed entries.

    The softmax of each row runs over its listed columns only, and the
    column regularizer sums over listed columns with unlisted entries
    treated as zeros.  Every row must carry at least one entry.
    """
    if not entries.covers_all_rows():
        missing = np.setdiff1d(np.arange(entries.n), entries.active_rows)[0]
        raise ValueError(f"contract violation: row {missing} has no listed entries")
    values = np.asarray(values, dtype=np.float64)
    vh, bv = _normalize_rows(fp.V, "V")
    wh, bw = _normalize_rows(fp.W, "W")
    logits = 2.0 * fp.alpha * backend.entry_dots(vh, wh, entries.rows, entries.cols)
    p = backend.segment_softmax(logits, entries.seg_ptr)
    colsum = np.bincount(entries.cols, weights=p, minlength=entries.n)
    listed = np.unique(entries.cols)
    colgap = colsum - 1.0
    value = float((values * p).sum() + reg_weight * (colgap[listed] ** 2).sum())
    gp = values + 2.0 * reg_weight * colgap[entries.cols]
    dlogits = backend.segment_softmax_grad(p, gp, entries.seg_ptr)
    coeff = 2.0 * fp.alpha * dlogits
    gvh = np.zeros_like(vh)
    gwh = np.zeros_like(wh)
    backend.scatter_rows_add(gvh, entries.rows, coeff, wh, entries.cols)
    backend.scatter_rows_add(gwh, entries.cols, coeff, vh, entries.rows)
    return LossEval(value=value, grad_V=bv(gvh), grad_W=bw(gwh))


def qap_loss(
    fp: FactorPair,
    a: np.ndarray,
    b: np.ndarray,
    beta: float = 0.0,
    reg_weight: float = 1.0,
) -> LossEval:
    """Quadratic assignment energy tr(A P B P^T) - beta ||P||_F^2 + regularizer.

    Never materializes the n^2 x n^2 lifted cost; the trace gradient uses
    d tr(A P B P^T) / dP = A^T P B^T + A P B.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    vh, bv = _normalize_rows(fp.V, "V")
    wh, bw = _normalize_rows(fp.W, "W")
    p = _softmax_rows(2.0 * fp.alpha * (vh @ wh.T))
    apb = a @ p @ b
    colgap = p.sum(axis=0) - 1.0
    value = float(
        (apb * p).sum() - beta * (p * p).sum() + reg_weight * (colgap**2).sum()
    )
    gp = a.T @ p @ b.T + apb - 2.0 * beta * p + 2.0 * reg_weight * colgap[None, :]
    dlogits = _softmax_rows_backward(p, gp)
    grad_v = bv(2.0 * fp.alpha * (dlogits @ wh))
    grad_w = bw(2.0 * fp.alpha * (dlogits.T @ vh))
    return LossEval(value=value, grad_V=grad_v, grad_W=grad_w)


def finite_difference_check(
    loss_fn,
    params: dict[str, np.ndarray],
    step: float = 1e-6,
    tolerance: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Compare analytic gradients against central finite differences.

    loss_fn maps a params dict to (value, grads dict).  Checks every
    coordinate, or a random subset of max_coords (at least 100) for large
    problems.  The relative deviation uses the finite-difference value as
    reference, floored at the larger of a fraction of the gradient's scale
    and the roundoff noise of the central difference itself, so that
    near-zero coordinates are not judged by a meaningless ratio.  Raises
    GradientCheckError above tolerance; returns the max relative deviation.
    """
    f0, grads = loss_fn(params)
    rng = np.random.default_rng(seed)
    worst: list[tuple[float, str, int]] = []
    max_dev = 0.0
    for name, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        size = g.size
        if max_coords is not None and size > max(max_coords, 100):
            coords = rng.choice(size, size=max(max_coords, 100), replace=False)
        else:
            coords = np.arange(size)
        def central(c, h):
            up = {kk: np.array(vv, copy=True) for kk, vv in params.items()}
            up[name].flat[c] += h
            down = {kk: np.array(vv, copy=True) for kk, vv in params.items()}
            down[name].flat[c] -= h
            return (loss_fn(up)[0] - loss_fn(down)[0]) / (2.0 * h)

        fd = np.empty(coords.shape[0])
        for k, c in enumerate(coords):
            fd[k] = central(c, step)
        scale = max(np.abs(fd).max(initial=0.0), np.abs(g).max(initial=0.0))
        fd_noise = np.finfo(float).eps * max(1.0, abs(f0)) / (2.0 * step)
        floor = max(1e-8 + 1e-3 * scale, 6.0 * fd_noise / tolerance)
        rel = np.abs(g.flat[coords] - fd) / np.maximum(np.abs(fd), floor)
        # re-examine suspicious coordinates: a genuine gradient error is
        # step-independent, while truncation shrinks with smaller h and
        # roundoff noise shrinks with larger h, so agreement at any sane
        # step (or under Richardson extrapolation) clears the coordinate
        for k in np.nonzero(rel > 0.5 * tolerance)[0]:
            ak = g.flat[coords[k]]
            candidates = [
                (4.0 * central(coords[k], step / 2.0) - fd[k]) / 3.0,
                central(coords[k], step * 10.0),
                central(coords[k], step * 100.0),
            ]
            for fd_c in candidates:
                rel[k] = min(rel[k], abs(ak - fd_c) / max(abs(fd_c), floor))
        k = int(np.argmax(rel))
        if rel[k] > max_dev:
            max_dev = float(rel[k])
        worst.append((float(rel[k]), name, int(coords[k])))
    if max_dev > tolerance:
        worst.sort(reverse=True)
        listing = ", ".join(f"{n}[{c}] dev={d:.3e}" for d, n, c in worst[:5])
        raise GradientCheckError(
            f"gradient check failed: max relative deviation {max_dev:.3e} "
            f"> {tolerance:.1e} (worst: {listing})"
        )
    return max_dev
