"""Conjugate gradients for singular SPSD systems with constant null space.

All systems built in this package are weighted graph Laplacians (or P1
stiffness matrices): symmetric, row sums zero, null space spanned by the
all-ones vector. CG is run on the zero-mean subspace by projecting the
right-hand side and every residual; the iterate is re-centred every
``recenter_every`` steps and once more at exit.

Dot products are plain numpy reductions, so results are deterministic for
a fixed BLAS thread count.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvalsh_tridiagonal

DEFAULT_REL_TOL = 1e-10
DEFAULT_COMPAT_TOL = 1e-10


class IncompatibleRhs(ValueError):
    """Right-hand side has a nonzero component along the null space."""


class NoConvergence(RuntimeError):
    def __init__(self, message, report, condition_estimate):
        super().__init__(message)
        self.report = report
        self.condition_estimate = condition_estimate


@dataclass
class SparseSymSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual: float  # ||A x - rhs_projected|| / ||rhs||
    compat_defect: float  # |sum(rhs)|


def _center(v):
    return v - v.mean()


def _lanczos_condition(alphas, betas):
    """Condition estimate from the CG coefficients (Lanczos tridiagonal)."""
    k = len(alphas)
    if k == 0:
        return float("nan")
    a = np.asarray(alphas)
    b = np.asarray(betas[: k - 1])
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    ev = eigvalsh_tridiagonal(diag, off)
    return float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")


def solve_zero_mean(system, rel_tol=DEFAULT_REL_TOL, max_iter=None,
                    compat_tol=DEFAULT_COMPAT_TOL, jacobi=False, recenter_every=25, x0=None):
    """Zero-mean solution of ``A x = b`` for SPSD ``A`` with ``A 1 = 0``.

    ``x0`` is an optional starting guess (e.g. the previous pressures in a
    line search). Raises :class:`IncompatibleRhs` when
    ``|sum(b)| > compat_tol * ||b||`` and :class:`NoConvergence` when
    ``max_iter`` (default ``20 n``) is hit.
    """
    A = system.matrix
    b = np.asarray(system.rhs, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = 20 * n
    bnorm = np.linalg.norm(b)
    defect = abs(b.sum())
    if defect > compat_tol * max(bnorm, 1e-300) and defect > 0.0:
        raise IncompatibleRhs(
            f"sum of right-hand side is {b.sum():.3e} (||rhs|| = {bnorm:.3e}); "
            "sources must satisfy global mass conservation")
    x = np.zeros(n)
    if bnorm == 0.0:
        return SolveReport(x, 0, 0.0, defect)
    if x0 is not None:
        x = _center(np.array(x0, dtype=float))
        if x.shape != (n,) or not np.all(np.isfinite(x)):
            raise ValueError("x0 must be a finite vector of the system size")
    bp = _center(b)

    if jacobi:
        dinv = 1.0 / A.diagonal()

        def precond(r):
            return _center(dinv * r)
    else:
        def precond(r):
            return r

    target = rel_tol * bnorm
    alphas, betas = [], []  # coefficients of the latest CG cycle only
    it = 0
    prev_res = np.inf
    while True:
        # restart from the true residual whenever the recursive one converged
        r = _center(bp - A @ x)
        res = np.linalg.norm(r)
        # a restart that no longer halves the true residual means round-off
        # dominates; give up instead of spinning until max_iter
        if res <= target or it >= max_iter or res > 0.5 * prev_res:
            break
        prev_res = res
        cycle_a, cycle_b = [], []
        z = precond(r)
        d = z.copy()
        rz = r @ z
        while it < max_iter:
            Ad = A @ d
            dAd = d @ Ad
            if dAd <= 0.0:
                break
            alpha = rz / dAd
            x += alpha * d
            r = _center(r - alpha * Ad)
            it += 1
            cycle_a.append(alpha)
            if it % recenter_every == 0:
                x = _center(x)
            if np.linalg.norm(r) <= target:
                break
            z = precond(r)
            rz_new = r @ z
            beta = rz_new / rz
            cycle_b.append(beta)
            d = z + beta * d
            rz = rz_new
        x = _center(x)
        if not cycle_a:
            res = np.linalg.norm(_center(bp - A @ x))
            break
        alphas, betas = cycle_a, cycle_b
    x = _center(x)
    report = SolveReport(x, it, float(res / bnorm), defect)
    if res > target:
        cond = _lanczos_condition(alphas, betas)
        raise NoConvergence(
            f"CG stopped after {it} iterations at relative residual {res / bnorm:.3e}; "
            f"condition estimate {cond:.3e}", report, cond)
    return report
