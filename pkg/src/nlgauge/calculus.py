"""Fractional gradient, divergence and Laplacian on a grid.

``div_s`` is defined as the exact adjoint of ``d_s`` between the pair measure
``mu`` and the node measure ``h``, so product rules and the adjointness

    <F, d_s phi>_mu == <div_s F, phi>_h

hold as algebraic identities of the discretization, not approximately.

Channel conventions: scalar forms have shape ``(M, M)``, vector forms
``(M, M, N)`` and matrix forms ``(M, M, N, N)``.  Products of a matrix form
with a vector or matrix operand contract the shared index (row times column).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, GridSpec, OdForm, _check_grid

_LETTERS = "abcdefgh"


def _channels(ndim: int, start: int = 0) -> str:
    return _LETTERS[start:start + ndim]


def d_s(u: Field, s: float) -> OdForm:
    """``(u(x) - u(y)) / |x-y|**s`` on every off-diagonal pair."""
    _check_s(s)
    g = u.grid
    v = u.values
    diff = v[:, None, ...] - v[None, :, ...]
    w = g.rpow(s).reshape((g.M, g.M) + (1,) * (v.ndim - 1))
    return OdForm(g, diff * w)


def div_s(F: OdForm, s: float) -> Field:
    """Pointwise divergence ``sum_j (F_ij - F_ji) r^-s h/r``."""
    _check_s(s)
    g = F.grid
    w = g.rpow(s) * g.dy
    ch = _channels(F.kernel.ndim - 2)
    out = np.einsum(f"ij,ij{ch}->i{ch}", w, F.kernel)
    out -= np.einsum(f"ij,ji{ch}->i{ch}", w, F.kernel)
    return Field(g, out)


@dataclass(frozen=True)
class WeakFunctional:
    """``phi -> sum_{i,j} F_ij (d_s phi)_ij mu_ij``; the distributional div_s F.

    Test fields with the same channel shape as ``F`` are contracted
    componentwise and summed; scalar test fields keep the channels of ``F``.
    """

    form: OdForm
    s: float

    def __call__(self, phi: Field):
        _check_grid(self.form.grid, phi.grid)
        dphi = d_s(phi, self.s).kernel
        F = self.form.kernel
        mu = self.form.grid.mu
        if dphi.shape == F.shape:
            ch = _channels(F.ndim - 2)
            return float(np.einsum(f"ij,ij{ch},ij{ch}->", mu, F, dphi))
        if dphi.ndim == 2:
            ch = _channels(F.ndim - 2)
            return np.einsum(f"ij,ij{ch},ij->{ch}", mu, F, dphi)
        raise ValueError(f"test field shape {phi.values.shape} incompatible with form {F.shape}")


def div_s_weak(F: OdForm, s: float) -> WeakFunctional:
    _check_s(s)
    return WeakFunctional(F, s)


def frac_laplacian(u: Field, s: float) -> Field:
    """``Lambda_s u = div_s d_s u`` (no normalizing constant)."""
    return div_s(d_s(u, s), s)


def assemble_frac_lap_matrix(grid: GridSpec, s: float) -> np.ndarray:
    """Dense symmetric matrix ``L`` with ``L @ u == frac_laplacian(u, s)``."""
    _check_s(s)
    K = 2.0 * grid.rpow(2.0 * s) * grid.dy
    L = -K
    L[np.diag_indices(grid.M)] = K.sum(axis=1)
    return L


def odform_dot(F: OdForm, G: OdForm) -> Field:
    """``F.G(x_i) = sum_j F_ij G_ij h / r_ij``.

    A matrix-valued ``F`` contracts its column index against ``G``'s row
    index (``F_ij @ G_ij``); otherwise the product is entrywise with
    scalar broadcasting.
    """
    _check_grid(F.grid, G.grid)
    g = F.grid
    a, b = F.kernel, G.kernel
    if a.ndim == 4 and b.ndim == 3:
        out = np.einsum("ij,ijab,ijb->ia", g.dy, a, b)
    elif a.ndim == 4 and b.ndim == 4:
        out = np.einsum("ij,ijab,ijbc->iac", g.dy, a, b)
    elif a.ndim == 2 or b.ndim == 2 or a.shape == b.shape:
        prod = _broadcast_pair(a, b)
        ch = _channels(prod.ndim - 2)
        out = np.einsum(f"ij,ij{ch}->i{ch}", g.dy, prod)
    else:
        raise ValueError(f"cannot contract forms of shapes {a.shape} and {b.shape}")
    return Field(g, out)


def _broadcast_pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim < b.ndim:
        a = a.reshape(a.shape + (1,) * (b.ndim - a.ndim))
    elif b.ndim < a.ndim:
        b = b.reshape(b.shape + (1,) * (a.ndim - b.ndim))
    return a * b


def pair_inner(F: OdForm, G: OdForm) -> float:
    """``<F, G>_mu``: full contraction over pairs and channels."""
    _check_grid(F.grid, G.grid)
    ch = _channels(F.kernel.ndim - 2)
    return float(np.einsum(f"ij,ij{ch},ij{ch}->", F.grid.mu, F.kernel, G.kernel))


def field_inner(u: Field, v: Field) -> float:
    """``<u, v>_h`` over nodes and channels."""
    _check_grid(u.grid, v.grid)
    M = u.grid.M
    return float(u.grid.h * np.einsum("ia,ia->", u.values.reshape(M, -1), v.values.reshape(M, -1)))


def times_at_x(F: OdForm, u: Field) -> OdForm:
    """``F(x,y) u(x)``; matrix ``F`` acts on ``u`` by matrix product."""
    return OdForm(F.grid, _pair_apply(F.kernel, u.values, at="x"))


def times_at_y(F: OdForm, u: Field) -> OdForm:
    """``F(x,y) u(y)``."""
    return OdForm(F.grid, _pair_apply(F.kernel, u.values, at="y"))


def _pair_apply(k: np.ndarray, v: np.ndarray, at: str) -> np.ndarray:
    idx = "i" if at == "x" else "j"
    if k.ndim == 4 and v.ndim == 2:
        return np.einsum(f"ijab,{idx}b->ija", k, v)
    if k.ndim == 4 and v.ndim == 3:
        return np.einsum(f"ijab,{idx}bc->ijac", k, v)
    if k.ndim == 2:
        ch = _channels(v.ndim - 1)
        return np.einsum(f"ij,{idx}{ch}->ij{ch}", k, v)
    if v.ndim == 1:
        ch = _channels(k.ndim - 2)
        return np.einsum(f"ij{ch},{idx}->ij{ch}", k, v)
    raise ValueError(f"cannot apply form {k.shape} to field {v.shape}")


def field_times(a: Field, b: Field) -> Field:
    """Pointwise product, matrix product when ``a`` is matrix-valued."""
    x, y = a.values, b.values
    if x.ndim == 3 and y.ndim == 2:
        return Field(a.grid, np.einsum("iab,ib->ia", x, y))
    if x.ndim == 3 and y.ndim == 3:
        return Field(a.grid, np.einsum("iab,ibc->iac", x, y))
    if x.ndim == 1:
        return Field(a.grid, x.reshape((-1,) + (1,) * (y.ndim - 1)) * y)
    if y.ndim == 1:
        return Field(a.grid, x * y.reshape((-1,) + (1,) * (x.ndim - 1)))
    return Field(a.grid, x * y)


def product_rule_defect(F: OdForm, u: Field, s: float, variant: str = "with_x") -> float:
    """Max-norm defect of the discrete product rules.

    ``with_x``:  div_s(F u(x)) = div_s(F) u + F* . d_s u
    ``with_y``:  div_s(F u(y)) = div_s(F) u - F . d_s u
    """
    du = d_s(u, s)
    if variant == "with_x":
        lhs = div_s(times_at_x(F, u), s)
        rhs = field_times(div_s(F, s), u) + odform_dot(F.star(), du)
    elif variant == "with_y":
        lhs = div_s(times_at_y(F, u), s)
        rhs = field_times(div_s(F, s), u) - odform_dot(F, du)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(np.abs(lhs.values - rhs.values).max())


def dsq_density(u: Field, s: float, q: float) -> Field:
    """``|D_{s,q} u|(x_i) = (sum_j |u_i - u_j|^q r^-sq h/r)^(1/q)``."""
    _check_s(s)
    if q <= 1:
        raise ValueError("q must exceed 1")
    g = u.grid
    v = u.values.reshape(g.M, -1)
    diff = v[:, None, :] - v[None, :, :]
    mag = np.sqrt(np.einsum("ija,ija->ij", diff, diff))
    dens = np.einsum("ij,ij->i", mag ** q * g.rpow(s * q), g.dy)
    return Field(g, dens ** (1.0 / q))


def _check_s(s: float) -> None:
    if not 0.0 < s < 1.0:
        raise ValueError(f"order s must lie in (0, 1), got {s}")
