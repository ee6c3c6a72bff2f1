"""Zero-capacity cut-off functions built from ``log log(1 + 1/x^2)``.

``zeta_k = clip(f - k, 0, 1)`` with ``f(x) = log log(1 + 1/x^2)`` equals one on
``|x| <= A_{k+1}`` and vanishes on ``|x| >= A_k`` where
``A_k = (exp(exp(k)) - 1)**-1/2``.  The radii shrink double-exponentially, so
the W^{1/2,2} seminorm is evaluated on a geometric (log-spaced) grid.

For an even profile the Gagliardo double integral reduces, with
``x = e^a, y = e^b``, to the dilation-invariant form

    [z]^2 = 2 \\iint (g(a) - g(b))^2 K(a - b) da db,
    K(t) = 1 / (4 sinh^2(t/2)) + 1 / (4 cosh^2(t/2)),

where ``g(a) = z(e^a)``.  Outside the sampled window ``g`` is constant (1 on
the left, 0 on the right) and those pieces are integrated in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

DEFAULT_K_MAX = 3
MARGIN = math.log(4.0)


class CutoffError(ValueError):
    pass


def radius(k: int) -> float:
    """``A_k = 1 / sqrt(exp(exp(k)) - 1)``."""
    return 1.0 / math.sqrt(math.expm1(math.exp(k)))


def loglog_profile(x) -> np.ndarray:
    """``log log(1 + 1/x^2)``."""
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        return np.log(np.log1p(1.0 / x ** 2))


def _profile_log(a: np.ndarray) -> np.ndarray:
    # log log(1 + e^{-2a}) without overflowing for very negative a
    t = -2.0 * a
    inner = np.where(t > 30.0, t + np.log1p(np.exp(-np.minimum(t, 700.0))), np.log1p(np.exp(np.minimum(t, 30.0))))
    return np.log(inner)


def zeta(x, k: int) -> np.ndarray:
    return np.clip(loglog_profile(x) - k, 0.0, 1.0)


def _kernel(t: np.ndarray) -> np.ndarray:
    half = 0.5 * t
    with np.errstate(divide="ignore", over="ignore"):
        return 0.25 / np.sinh(half) ** 2 + 0.25 / np.cosh(half) ** 2


def _tail(t: np.ndarray) -> np.ndarray:
    """``int_t^inf K``  for ``t > 0``."""
    half = 0.5 * t
    return 0.5 * (1.0 / np.tanh(half) - 1.0) + 0.5 * (1.0 - np.tanh(half))


def _corner(d: float) -> float:
    """``int_d^inf (t - d) K(t) dt``: pairs split across both plateaus."""
    val, _ = quad(lambda t: (t - d) * _kernel(np.array(t)), d, np.inf, limit=200)
    return float(val)


def log_radial_seminorm(g, a0: float, a1: float, n: int = 2000, chunk: int = 512) -> float:
    """``[z]_{W^{1/2,2}(R)}`` for an even ``z`` with ``z(e^a) = g(a)``.

    ``g`` must equal 1 for ``a <= a0`` and 0 for ``a >= a1`` (to working
    precision).  Midpoint rule on ``n`` uniform cells in ``a``; diagonal
    cells use the limit ``(g(a)-g(b))^2 K(a-b) -> g'(a)^2``.
    """
    delta = (a1 - a0) / n
    a = a0 + delta * (np.arange(n) + 0.5)
    ga = np.asarray(g(a), dtype=float)
    slope = np.gradient(ga, delta)
    inner = 0.0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        t = a[start:stop, None] - a[None, :]
        diff2 = (ga[start:stop, None] - ga[None, :]) ** 2
        with np.errstate(invalid="ignore"):
            vals = diff2 * _kernel(t)
        rows = np.arange(start, stop)
        vals[rows - start, rows] = slope[rows] ** 2 + 0.0
        inner += float(vals.sum())
    inner *= delta ** 2
    left = (1.0 - ga) ** 2 * _tail(a - a0)
    right = ga ** 2 * _tail(a1 - a)
    edges = 2.0 * delta * float(left.sum() + right.sum())
    corner = 2.0 * _corner(a1 - a0)
    return math.sqrt(2.0 * (inner + edges + corner))


@dataclass(frozen=True)
class CutoffSequence:
    k: int
    rho: float
    R: float
    x: np.ndarray
    values: np.ndarray
    seminorm: float

    def row(self) -> dict:
        return {"k": self.k, "rho": self.rho, "R": self.R, "seminorm": self.seminorm}


def loglog_cutoff(k: int, refinement: int = 2000, k_max: int = DEFAULT_K_MAX) -> CutoffSequence:
    """Cut-off ``zeta_k`` sampled on ``[A_{k+1}/4, 4 A_k]`` (geometric) with its seminorm."""
    if k < 1:
        raise CutoffError("k must be >= 1")
    if k > k_max:
        raise CutoffError(f"k = {k} exceeds cap {k_max}; A_(k+1) is below double-precision resolution")
    rho, R = radius(k + 1), radius(k)
    if not rho > 0:
        raise CutoffError("inner radius underflows")
    a0, a1 = math.log(rho) - MARGIN, math.log(R) + MARGIN

    def g(a):
        return np.clip(_profile_log(a) - k, 0.0, 1.0)

    a = np.linspace(a0, a1, refinement + 1)
    semi = log_radial_seminorm(g, a0, a1, refinement)
    return CutoffSequence(k, rho, R, np.exp(a), g(a), semi)


def cutoff_table(k_values=(1, 2, 3), refinement: int = 2000) -> list:
    return [loglog_cutoff(k, refinement) for k in k_values]
