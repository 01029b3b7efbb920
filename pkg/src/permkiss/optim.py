"""First-order optimizer and parameter schedules."""

from dataclasses import dataclass

import numpy as np


class NonFiniteGradientError(RuntimeError):
    """A gradient contains NaN or infinity."""


class Adam:
    """Adam with bias correction over a dict of named parameter arrays.

    Default hyperparameters: decay rates 0.9 / 0.999, epsilon 1e-8.
    """

    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float | None = None) -> None:
        """One bias-corrected update, in place on each parameter array."""
        self.t += 1
        lr = self.lr if lr is None else lr
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape mismatch for {name!r}")
            if not np.isfinite(g).all():
                raise NonFiniteGradientError(f"non-finite gradient for variable {name!r}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            mhat = m / (1.0 - self.beta1**self.t)
            vhat = v / (1.0 - self.beta2**self.t)
            p -= lr * mhat / (np.sqrt(vhat) + self.eps)


def adam_step(state: Adam, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> None:
    """Functional spelling of Adam.step (updates params and state in place)."""
    state.step(params, grads)


@dataclass(frozen=True)
class Schedule:
    """Constant or linear parameter schedule over a fixed number of steps."""

    kind: str
    start: float
    end: float
    total_steps: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "linear"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls("constant", value, value, 1)

    @classmethod
    def linear(cls, start: float, end: float, total_steps: int) -> "Schedule":
        return cls("linear", start, end, total_steps)

    def value(self, step: int) -> float:
        if step < 0:
            raise ValueError("step must be nonnegative")
        if self.kind == "constant" or self.total_steps == 1:
            return self.start
        t = min(step, self.total_steps - 1)
        val = self.start + (self.end - self.start) * t / (self.total_steps - 1)
        lo, hi = min(self.start, self.end), max(self.start, self.end)
        return float(min(max(val, lo), hi))


def schedule_value(s: Schedule, step: int) -> float:
    return s.value(step)


def spectral_norm(a: np.ndarray, rel_tol: float = 1e-6, max_iter: int = 10000,
                  seed: int = 0) -> float:
    """Largest singular value by power iteration on A^T A."""
    a = np.asarray(a, dtype=np.float64)
    if not np.isfinite(a).all():
        raise ValueError("matrix must be finite")
    if a.size == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    dim = a.shape[1]
    block = min(4, dim)  # a small subspace rides out near-degenerate tops
    x, _ = np.linalg.qr(rng.standard_normal((dim, block)))
    est = 0.0
    for it in range(max_iter):
        y = a.T @ (a @ x)
        # Rayleigh-Ritz on the current subspace
        t = x.T @ y
        evals, evecs = np.linalg.eigh((t + t.T) / 2.0)
        rho = float(evals[-1])
        est = float(np.sqrt(max(rho, 0.0)))
        u_img = y @ evecs[:, -1]
        u = x @ evecs[:, -1]
        # eigenvalue residual bound: some eigenvalue of A^T A lies within
        # ||M u - rho u|| of rho, so a small residual certifies the estimate
        res = float(np.linalg.norm(u_img - rho * u))
        if it >= 1 and res <= 0.05 * rel_tol * max(rho, 1e-300):
            return est
        if float(np.linalg.norm(y)) < 1e-300:
            return 0.0
        x, _ = np.linalg.qr(y)
    raise RuntimeError(
        f"power iteration did not converge in {max_iter} iterations; "
        f"last estimate {est:.6e}"
    )
