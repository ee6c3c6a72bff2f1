"""Nonlocal Hodge decomposition ``G = d_s a + B`` with ``div_s B = 0``.

The potential solves ``Lambda_s a = div_s G``.  ``Lambda_s`` has the constants
in its kernel, so the solve runs conjugate gradients on the mean-zero
subspace and returns the mean-zero representative.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .calculus import assemble_frac_lap_matrix, d_s, div_s
from .grid import Field, GridSpec, OdForm
from .norms import norm_odform_lp

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10

_MATRIX_CACHE: dict = {}


class SolverError(RuntimeError):
    """Iterative solve failed; carries the last relative residual."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def frac_lap_matrix(grid: GridSpec, s: float) -> np.ndarray:
    """Cached dense ``Lambda_s`` matrix (read-only)."""
    key = (tuple(grid.to_dict().values()), float(s))
    L = _MATRIX_CACHE.get(key)
    if L is None:
        if len(_MATRIX_CACHE) > 16:
            _MATRIX_CACHE.clear()
        L = assemble_frac_lap_matrix(grid, s)
        L.setflags(write=False)
        _MATRIX_CACHE[key] = L
    return L


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0


def _cg_mean_zero(L, b, x0, tol, max_iter):
    """CG for ``L x = b`` restricted to ``sum(x) = 0``.

    ``b`` is assumed mean-zero; iterates and residuals are re-projected every
    step so round-off cannot leak into the constant mode.
    """
    x = x0 - x0.mean()
    r = b - L @ x
    r -= r.mean()
    bnorm = np.sqrt(b @ b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    p = r.copy()
    rr = r @ r
    for it in range(1, max_iter + 1):
        if np.sqrt(rr) <= tol * bnorm:
            return x, it - 1, float(np.sqrt(rr) / bnorm)
        Lp = L @ p
        alpha = rr / (p @ Lp)
        x += alpha * p
        r -= alpha * Lp
        r -= r.mean()
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        p -= p.mean()
        rr = rr_new
    rel = float(np.sqrt(rr) / bnorm)
    if rel <= tol:
        return x, max_iter, rel
    raise SolverError(f"CG stalled at relative residual {rel:.3e} after {max_iter} iterations",
                      residual=rel, iterations=max_iter)


def solve_frac_poisson(rhs: Field, s: float, tol: float = DEFAULT_TOL, max_iter: int | None = None,
                       x0: Field | None = None, info: SolveInfo | None = None) -> Field:
    """Mean-zero ``a`` with ``||Lambda_s a - rhs||_h <= tol ||rhs||_h``.

    Works channelwise on vector/matrix fields.  A right-hand side with a
    nonzero mean is projected onto the range of ``Lambda_s`` with a warning.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = rhs.grid
    max_iter = 50 * g.M if max_iter is None else max_iter
    L = frac_lap_matrix(g, s)
    B = rhs.values.reshape(g.M, -1)
    means = B.mean(axis=0)
    scale = np.abs(B).max() if B.size else 0.0
    if np.any(np.abs(means) > 1e-12 * max(scale, 1.0)):
        log.warning("Poisson right-hand side has mean %.3e; projecting onto the range",
                    float(np.abs(means).max()))
    B = B - means
    X0 = np.zeros_like(B) if x0 is None else x0.values.reshape(g.M, -1)
    out = np.empty_like(B)
    total_it, worst = 0, 0.0
    for c in range(B.shape[1]):
        x, it, res = _cg_mean_zero(L, B[:, c].copy(), X0[:, c].copy(), tol, max_iter)
        out[:, c] = x
        total_it = max(total_it, it)
        worst = max(worst, res)
    if info is not None:
        info.iterations, info.residual = total_it, worst
    return Field(g, out.reshape(rhs.values.shape))


@dataclass(frozen=True)
class HodgeParts:
    """``G = d_s a + B``; ``B`` is defined as the difference, so the split is exact."""

    a: Field
    B: OdForm
    s: float
    iterations: int
    residual: float
    exact_energy: float
    sol_energy: float
    total_energy: float

    @property
    def pythagoras_defect(self) -> float:
        return abs(self.total_energy - self.exact_energy - self.sol_energy) / max(self.total_energy, 1e-300)


def hodge_decompose(G: OdForm, s: float, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> HodgeParts:
    info = SolveInfo()
    a = solve_frac_poisson(div_s(G, s), s, tol=tol, max_iter=max_iter, info=info)
    da = d_s(a, s)
    B = G - da
    return HodgeParts(
        a=a,
        B=B,
        s=s,
        iterations=info.iterations,
        residual=info.residual,
        exact_energy=norm_odform_lp(da, 2) ** 2,
        sol_energy=norm_odform_lp(B, 2) ** 2,
        total_energy=norm_odform_lp(G, 2) ** 2,
    )


def divergence_dual_norm(F: OdForm, s: float, tol: float = 1e-12) -> float:
    """``sup_phi <div_s F, phi>_h / [phi]_{W^{s,2}}``.

    The supremum is attained at the Hodge potential, so the value is
    ``[a]_{W^{s,2}}`` with ``Lambda_s a = div_s F``.
    """
    div = div_s(F, s)
    if not np.any(div.values):
        return 0.0
    a = solve_frac_poisson(div, s, tol=tol)
    return norm_odform_lp(d_s(a, s), 2)
