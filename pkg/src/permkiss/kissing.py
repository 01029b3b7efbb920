"""Rank selection from kissing-number bounds and spherical-code construction.

A spherical code here is a set of unit vectors whose pairwise inner products
stay at or below 1/2 (pairwise angles of at least 60 degrees).  The kissing
number bound for dimension m tells us how many such vectors can coexist, and
therefore how small a rank suffices to represent a permutation of a given
size exactly.
"""

from dataclasses import dataclass

import numpy as np

TABLE_VERSION = 1

# Best known lower bounds on the kissing number for dimensions 1..24.
# Lower bounds are safe for rank selection: they never overstate how many
# vectors fit.  Provenance: the classical contact configurations and
# laminated-lattice records collected in the sphere-packing survey
# literature (Conway & Sloane tables and later improvements).
_LOWER_BOUNDS = {
    1: 2,        # antipodal pair {+1, -1}
    2: 6,        # hexagonal lattice A2
    3: 12,       # icosahedral contact points / FCC shell
    4: 24,       # D4 root system (24-cell)
    5: 40,       # D5 root system
    6: 72,       # E6 root system
    7: 126,      # E7 root system
    8: 240,      # E8 root system
    9: 306,      # laminated lattice record, dim 9
    10: 500,     # best known nonlattice packing, dim 10
    11: 582,     # best known packing, dim 11
    12: 840,     # Coxeter-Todd lattice K12
    13: 1154,    # best known packing, dim 13
    14: 1606,    # best known packing, dim 14
    15: 2564,    # best known packing, dim 15
    16: 4320,    # Barnes-Wall lattice BW16
    17: 5346,    # laminated lattice record, dim 17
    18: 7398,    # laminated lattice record, dim 18
    19: 10668,   # laminated lattice record, dim 19
    20: 17400,   # laminated lattice record, dim 20
    21: 27720,   # laminated lattice record, dim 21
    22: 49896,   # laminated lattice record, dim 22
    23: 93150,   # laminated lattice record, dim 23
    24: 196560,  # Leech lattice minimal vectors (exact)
}

COHERENCE_TARGET = 0.5
COHERENCE_TOL = 1e-9


class CodeConstructionError(RuntimeError):
    """The optimizer could not reach the coherence target within budget."""

    def __init__(self, n, m, achieved):
        self.achieved = achieved
        super().__init__(
            f"code construction failed for n={n}, m={m}: "
            f"achieved max coherence {achieved:.9f} > {COHERENCE_TARGET + COHERENCE_TOL:.9f}"
        )


class KissingTable:
    """Map from dimension m to a lower bound on the kissing number."""

    def __init__(self, lower_bound: dict[int, int]):
        dims = sorted(lower_bound)
        bounds = [lower_bound[m] for m in dims]
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise ValueError("kissing table must be strictly increasing in m")
        self.lower_bound = dict(lower_bound)
        self._dims = dims

    @property
    def dims(self) -> list[int]:
        return list(self._dims)

    @property
    def max_n(self) -> int:
        return self.lower_bound[self._dims[-1]]

    def bound(self, m: int) -> int:
        return self.lower_bound[m]

    def as_dict(self) -> dict[int, int]:
        return dict(self.lower_bound)


DEFAULT_TABLE = KissingTable(_LOWER_BOUNDS)


def rank_for(n: int, table: KissingTable = DEFAULT_TABLE) -> int:
    """Smallest dimension m whose kissing bound admits n unit vectors.

    This is the minimal rank for which an n-permutation is exactly
    representable (smallest m minimizes memory).
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > table.max_n:
        raise ValueError(
            f"size beyond table: n={n} exceeds the largest supported size "
            f"n={table.max_n} (dimension {table.dims[-1]})"
        )
    for m in table.dims:
        if table.bound(m) >= n:
            return m
    raise AssertionError("unreachable")  # guarded by max_n check


@dataclass
class SphericalCode:
    """n unit vectors in dimension m with pairwise inner products <= 1/2."""

    points: np.ndarray
    max_coherence: float

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]


def max_coherence(points: np.ndarray) -> float:
    """Largest inner product between distinct rows."""
    n = points.shape[0]
    if n < 2:
        return -1.0
    c = points @ points.T
    np.fill_diagonal(c, -np.inf)
    return float(c.max())


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _tangent(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    # remove radial component; row norms are re-enforced after every step
    return g - (g * x).sum(axis=1, keepdims=True) * x


def _hinge_descent(x, rng, steps, tau, lr0=0.05, lr1=2e-3, kick_every=2500, kick=0.06):
    """Push pairwise coherences below tau by quadratic-hinge overlap descent."""
    n, m = x.shape
    mom = np.zeros_like(x)
    vel = np.zeros_like(x)
    b1, b2, eps = 0.9, 0.999, 1e-8
    best, best_coh = x.copy(), np.inf
    stall = 0
    for t in range(1, steps + 1):
        frac = (t - 1) / max(steps - 1, 1)
        lr = lr0 * (lr1 / lr0) ** frac
        c = x @ x.T
        np.fill_diagonal(c, 0.0)
        mx = c.max()
        if mx < best_coh - 1e-12:
            best_coh, best = mx, x.copy()
            stall = 0
        else:
            stall += 1
        if mx <= tau - 1e-12 or mx <= COHERENCE_TARGET - 1e-12:
            return x, mx
        h = np.maximum(c - tau, 0.0)
        g = _tangent(2.0 * (h @ x), x)
        mom = b1 * mom + (1 - b1) * g
        vel = b2 * vel + (1 - b2) * g * g
        x = _unit_rows(x - lr * (mom / (1 - b1**t)) / (np.sqrt(vel / (1 - b2**t)) + eps))
        if stall >= kick_every:
            # basin hop: perturb the best iterate and restart the moments
            x = _unit_rows(best + kick * rng.standard_normal((n, m)))
            mom[:] = 0.0
            vel[:] = 0.0
            stall = 0
    return best, best_coh


def _lse_descent(x, steps, s0=20.0, s1=2e4, lr0=0.05, lr1=1e-3, antipodal=False):
    """Anneal a log-sum-exp surrogate of the max pairwise coherence.

    With antipodal=True, x holds one representative per antipodal pair and
    the surrogate runs on |<x_i, x_j>|, which is the coherence of the
    expanded 2n-point set.
    """
    n = x.shape[0]
    iu = np.triu_indices(n, 1)
    mom = np.zeros_like(x)
    vel = np.zeros_like(x)
    b1, b2, eps = 0.9, 0.999, 1e-8
    best, best_coh = x.copy(), np.inf
    for t in range(1, steps + 1):
        frac = (t - 1) / max(steps - 1, 1)
        s = s0 * (s1 / s0) ** frac
        lr = lr0 * (lr1 / lr0) ** frac
        c = x @ x.T
        coh = np.abs(c[iu]) if antipodal else c[iu]
        mx = coh.max()
        if mx < best_coh:
            best_coh, best = mx, x.copy()
        if mx <= COHERENCE_TARGET - 1e-12:
            return best, best_coh
        w = np.exp(s * (coh - mx))
        w /= w.sum()
        if antipodal:
            w = w * np.sign(c[iu])
        wm = np.zeros((n, n))
        wm[iu] = w
        wm = wm + wm.T
        g = _tangent(wm @ x, x)
        mom = b1 * mom + (1 - b1) * g
        vel = b2 * vel + (1 - b2) * g * g
        x = _unit_rows(x - lr * (mom / (1 - b1**t)) / (np.sqrt(vel / (1 - b2**t)) + eps))
    return best, best_coh


def _gauss_newton_polish(x, active_margin=0.06, iters=15):
    """Drive near-target coherences to exactly 1/2 and row norms to 1.

    Solves the active constraint system <x_i, x_j> = 1/2 (near-tight pairs),
    ||x_i|| = 1 by damped Gauss-Newton least squares.  Quadratic convergence
    once the configuration is near a tight code.
    """
    n, m = x.shape
    iu = np.triu_indices(n, 1)
    for _ in range(iters):
        c = x @ x.T
        coh = c[iu]
        act = coh > COHERENCE_TARGET - active_margin
        ai, aj = iu[0][act], iu[1][act]
        r = np.concatenate([c[ai, aj] - COHERENCE_TARGET, (x * x).sum(axis=1) - 1.0])
        if np.abs(r).max() < 1e-14:
            break
        n_act = ai.size
        jac = np.zeros((n_act + n, n * m))
        rows = np.arange(n_act)
        for k in range(m):
            jac[rows, ai * m + k] = x[aj, k]
            jac[rows, aj * m + k] = x[ai, k]
        for i in range(n):
            jac[n_act + i, i * m : (i + 1) * m] = 2.0 * x[i]
        dx, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        x = x + dx.reshape(n, m)
    return _unit_rows(x)


def _passes(x, tol):
    return max_coherence(x) <= COHERENCE_TARGET + tol


def _finish(x, tol):
    """Verify a candidate, polishing through Gauss-Newton when it is close."""
    coh = max_coherence(x)
    if coh <= COHERENCE_TARGET + tol:
        return x, coh
    if coh <= COHERENCE_TARGET + 0.03:
        xp = _gauss_newton_polish(x)
        cohp = max_coherence(xp)
        if cohp < coh:
            return xp, cohp
    return x, coh


def _expand_antipodal(y: np.ndarray, n: int) -> np.ndarray:
    return np.vstack([y, -y])[:n]


def _slice_orthogonal(shell: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Sub-code orthogonal to the shell's first vector, rotated down one dim.

    Restricting a valid code to a hyperplane through the origin preserves
    all pairwise inner products, so the result is a valid code in dimension
    m - 1.
    """
    v = shell[0]
    sub = shell[np.abs(shell @ v) <= tol]
    sub = _unit_rows(sub - np.outer(sub @ v, v))
    m = shell.shape[1]
    q, r = np.linalg.qr(np.eye(m) - np.outer(v, v))
    basis = q[:, np.abs(np.diag(r)) > 1e-9]
    return _unit_rows(sub @ basis)


_SHELL_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _build_shell(m: int, seed: int, tol: float) -> np.ndarray | None:
    """Full kissing configuration for dimension m, or None if not reached.

    Dimension 7 is carved out of the dimension-8 shell: the 126 vectors of
    a 240-point code orthogonal to any one of its members form a valid
    sub-code one dimension down (the E8 -> E7 root-system reduction).
    """
    key = (m, seed)
    if key in _SHELL_CACHE:
        return _SHELL_CACHE[key]
    shell = None
    if m == 7:
        parent = _build_shell(8, seed, tol)
        if parent is not None:
            cand = _slice_orthogonal(parent)
            cand, coh = _finish(cand, tol)
            if coh <= COHERENCE_TARGET + tol:
                shell = cand
    elif 2 <= m <= 8:
        n = DEFAULT_TABLE.bound(m)
        pairs = n // 2
        restarts = 20 if m == 5 else 8
        for r in range(restarts):
            rng = np.random.default_rng([91, m, seed, r])
            y0 = _unit_rows(rng.standard_normal((pairs, m)))
            y, _ = _lse_descent(y0, steps=8000, antipodal=True)
            cand, coh = _finish(_expand_antipodal(y, n), tol)
            if coh <= COHERENCE_TARGET + tol:
                shell = cand
                break
    if shell is not None:
        _SHELL_CACHE[key] = shell
    return shell


def generate_spherical_code(
    n: int, m: int, seed: int = 0, tol: float = COHERENCE_TOL
) -> SphericalCode:
    """Construct n unit vectors in dimension m with max coherence <= 1/2.

    Runs a portfolio of seeded first-order searches (quadratic-hinge overlap
    descent, annealed log-sum-exp on antipodal pairs, and a full-shell
    subset/slice fallback), verifying the target a posteriori and returning
    the first candidate that certifies.  Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if m not in DEFAULT_TABLE.lower_bound:
        raise ValueError(f"dimension m={m} outside the table (1..24)")
    if n > DEFAULT_TABLE.bound(m):
        raise ValueError(
            f"n={n} exceeds the kissing bound {DEFAULT_TABLE.bound(m)} for m={m}"
        )
    if m == 1:
        pts = np.array([[1.0], [-1.0]])[:n]
        return SphericalCode(pts, max_coherence(pts))
    if n == 1:
        pts = np.zeros((1, m))
        pts[0, 0] = 1.0
        return SphericalCode(pts, -1.0)

    bound = DEFAULT_TABLE.bound(m)
    best_coh = [np.inf]

    def finish(x):
        x, coh = _finish(x, tol)
        best_coh[0] = min(best_coh[0], coh)
        return (x, coh) if coh <= COHERENCE_TARGET + tol else None

    def quick_hinge():
        # handles most sizes comfortably below the bound
        restarts, steps = (2, 6000) if n <= 126 else (1, 4000)
        for r in range(restarts):
            rng = np.random.default_rng([17, n, m, seed, r])
            x0 = _unit_rows(rng.standard_normal((n, m)))
            for tau in (0.494, 0.5):
                x, _ = _hinge_descent(x0, rng, steps=steps, tau=tau)
                hit = finish(x)
                if hit:
                    return hit
        return None

    def antipodal():
        # crystallizes tight, symmetric configurations
        pairs = (n + 1) // 2
        for r in range(10 if n <= 80 else 3):
            rng = np.random.default_rng([29, n, m, seed, r])
            y0 = _unit_rows(rng.standard_normal((pairs, m)))
            y, _ = _lse_descent(y0, steps=8000, antipodal=True)
            hit = finish(_expand_antipodal(y, n))
            if hit:
                return hit
        return None

    def shell_subset():
        if 2 <= m <= 8:
            shell = _build_shell(m, seed, tol)
            if shell is not None and shell.shape[0] >= n:
                return finish(shell[:n].copy())
        return None

    def long_hinge():
        # last resort: long runs with basin-hopping kicks
        for r in range(4):
            rng = np.random.default_rng([43, n, m, seed, r])
            x0 = _unit_rows(rng.standard_normal((n, m)))
            x, _ = _hinge_descent(x0, rng, steps=30000, tau=0.5)
            hit = finish(x)
            if hit:
                return hit
        return None

    # near the bound, direct search rarely beats the full-shell route;
    # well below it, direct search is much cheaper
    if n / bound >= 0.78:
        strategies = (shell_subset, antipodal, quick_hinge, long_hinge)
    else:
        strategies = (quick_hinge, antipodal, shell_subset, long_hinge)

    for strategy in strategies:
        hit = strategy()
        if hit:
            x, coh = hit
            return SphericalCode(x, coh)

    raise CodeConstructionError(n, m, best_coh[0])
