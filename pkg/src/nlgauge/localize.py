"""Localization of the system by a cut-off ``eta`` with exact remainder accounting.

With ``v = eta u`` and ``Omega~ = chi_{D2} chi_{D2} Omega`` the localized
equation reads ``Lambda v = Omega~ . d v + eta f + G(u, .)``.  The remainder
functional ``G`` is evaluated directly and, independently, as the sum of
four pieces:

* ``G1``: the ``(eta(x) - eta(y))`` cross term over ``D x D``,
* ``G2``: the exterior tail ``D x (R \\ D)`` of ``<d v, d phi>``,
* ``G3``: couplings between ``D2`` and ``D \\ D2``,
* ``G4``: ``-Omega(x,y) u(y) d eta(x,y) phi(x)`` over ``D x D``.

When ``u`` solves the equation on ``D`` the two evaluations agree to
round-off.  Weights: ``h^2/r^2`` for the ``dx dy / |x-y|^2`` pieces and
``h^2/r`` for the ``d_{1/2}`` pieces.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import d_s, field_inner, pair_inner
from .grid import Field, GridSpec, OdForm, _check_grid
from .norms import norm_l2_plus_linf, norm_lp_field, norm_odform_lp, sobolev_seminorm
from .system import apply_omega

HALF = 0.5
MATCH_TOL = 1e-11
EQUATION_TOL = 1e-10


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class Windows:
    """Node-index sets ``D1 <= D2 <= D``."""

    D1: np.ndarray
    D2: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in ("D1", "D2", "D"):
            arr = np.unique(np.asarray(getattr(self, name), dtype=int))
            if arr.size == 0:
                raise WindowError(f"window {name} is empty")
            object.__setattr__(self, name, arr)
        if not (np.isin(self.D1, self.D2).all() and np.isin(self.D2, self.D).all()):
            raise WindowError("windows must be nested: D1 <= D2 <= D")

    def mask(self, name: str, M: int) -> np.ndarray:
        m = np.zeros(M, dtype=bool)
        m[getattr(self, name)] = True
        return m

    @property
    def strict(self) -> bool:
        """Strict nesting (``D1 << D2 << D`` away from the grid edges)."""
        return bool(self.D1.min() > self.D2.min() and self.D1.max() < self.D2.max()
                and self.D2.min() > self.D.min() and self.D2.max() < self.D.max())


def windows_from_intervals(grid: GridSpec, d1, d2, d) -> Windows:
    """Windows from closed x-intervals ``(lo, hi)``."""
    x = grid.x

    def pick(iv):
        return np.flatnonzero((x >= iv[0]) & (x <= iv[1]))

    return Windows(pick(d1), pick(d2), pick(d))


def bump(grid: GridSpec, nodes) -> Field:
    """Smooth bump ``exp(1 - 1/(1 - t^2))`` vanishing at and beyond the ends of ``nodes``."""
    nodes = np.asarray(nodes, dtype=int)
    x = grid.x
    lo, hi = x[nodes.min()], x[nodes.max()]
    c, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
    if w <= 0:
        raise WindowError("bump window needs at least two nodes")
    t = (x - c) / w
    inside = np.abs(t) < 1
    out = np.zeros(grid.M)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return Field(grid, out)


def _vec(u: Field) -> np.ndarray:
    return u.values if u.values.ndim == 2 else u.values[:, None]


def _mat(omega: OdForm) -> np.ndarray:
    k = omega.kernel
    return k if k.ndim == 4 else k[:, :, None, None]


def local_residual(u: Field, omega: OdForm, f: Field, D) -> np.ndarray:
    """``Lambda_D u - Omega_D . d u - f`` at the nodes of ``D`` (interactions inside ``D`` only)."""
    g = u.grid
    D = np.asarray(D, dtype=int)
    U, F, Om = _vec(u), _vec(f), _mat(omega)
    w2 = g.h / g.rdist ** 2
    w1 = g.rpow(HALF) * g.dy
    sub = np.ix_(D, D)
    diff = U[D][:, None, :] - U[D][None, :, :]
    lap = 2.0 * np.einsum("ij,ija->ia", w2[sub], diff)
    om = np.einsum("ij,ijab,ijb->ia", w1[sub], Om[sub], diff)
    return lap - om - F[D]


def local_forcing(u: Field, omega: OdForm, D) -> Field:
    """Forcing that makes ``u`` solve the ``D``-restricted equation exactly on ``D``.

    Outside ``D`` the full-line system forcing is used.
    """
    from .system import manufactured_forcing

    f = _vec(manufactured_forcing(omega, u)).copy()
    D = np.asarray(D, dtype=int)
    zero = Field(u.grid, np.zeros_like(_vec(u)))
    f[D] = local_residual(u, omega, zero, D)
    return Field(u.grid, f if u.values.ndim == 2 else f[:, 0])


@dataclass(frozen=True)
class LocalizationParts:
    windows: Windows
    eta: Field
    v: Field
    omega_tilde: OdForm
    G: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    G3: np.ndarray
    G4: np.ndarray
    equation_residual: float
    match_defect: float | None
    scale: float
    skipped: bool
    bound_ratio: float | None = None
    bound_terms: dict = field(default_factory=dict)
    match_tol: float = MATCH_TOL

    @property
    def matched(self) -> bool:
        return self.match_defect is not None and self.match_defect <= self.match_tol

    @property
    def four_term(self) -> np.ndarray:
        return self.G1 + self.G2 + self.G3 + self.G4

    def summary(self) -> dict:
        return {
            "equation_residual": self.equation_residual,
            "match_defect": self.match_defect,
            "scale": self.scale,
            "skipped": self.skipped,
            "matched": self.matched,
            "max_abs_G": float(np.abs(self.G).max()) if self.G.size else 0.0,
            "bound_ratio": self.bound_ratio,
            "omega_tilde_norm": norm_odform_lp(self.omega_tilde, 2),
            "strict_windows": self.windows.strict,
        }


def _four_terms(U, Om, eta, phi, g: GridSpec, W: Windows):
    M = g.M
    inD, in2 = W.mask("D", M), W.mask("D2", M)
    w2 = g.h ** 2 / g.rdist ** 2
    w1 = g.mu * g.rpow(HALF)
    DD = np.outer(inD, inD)
    deta = eta[:, None] - eta[None, :]
    # G1: (eta_x - eta_y)(u_y . phi_x - u_x . phi_y)
    up = U @ phi.T  # up[i, j] = u_i . phi_j
    G1 = np.sum(np.where(DD, deta * (up.T - up) * w2, 0.0))
    # G2: 2 sum_{x in D} v_x . sum_{y notin D} (phi_x - phi_y)
    V = eta[:, None] * U
    ext = np.outer(inD, ~inD)
    dphi = phi[:, None, :] - phi[None, :, :]
    G2 = 2.0 * np.einsum("ij,ia,ija->", np.where(ext, w2, 0.0), V, dphi)
    # G3: Omega . d v phi(x) over (D\D2 x D2) and (D2 x D\D2)
    ring = inD & ~in2
    cross = np.outer(ring, in2) | np.outer(in2, ring)
    dv = V[:, None, :] - V[None, :, :]
    G3 = np.einsum("ij,ijab,ijb,ia->", np.where(cross, w1, 0.0), Om, dv, phi)
    # G4: -Omega(x,y) u(y) (eta_x - eta_y) r^{-1/2} phi(x) over D x D
    G4 = -np.einsum("ij,ijab,jb,ia->", np.where(DD, w1 * deta, 0.0), Om, U, phi)
    return float(G1), float(G2), float(G3), float(G4)


def localize(u: Field, omega: OdForm, f: Field, windows: Windows, eta: Field | None = None,
             panel=(), match_tol: float = MATCH_TOL, equation_tol: float = EQUATION_TOL,
             bound: bool = True) -> LocalizationParts:
    """Localize the system to ``D1`` and evaluate the remainder on ``panel``.

    ``eta`` defaults to the smooth bump on ``D1``.  The four-term match is
    skipped (``skipped=True``) when ``u`` misses the ``D``-equation on the
    support of ``eta`` by more than ``equation_tol`` relative.
    """
    g = u.grid
    _check_grid(g, omega.grid)
    _check_grid(g, f.grid)
    eta = bump(g, windows.D1) if eta is None else eta
    e = eta.values
    if e.ndim != 1:
        raise ValueError("eta must be scalar")
    if np.any(e[~windows.mask("D1", g.M)] != 0):
        raise WindowError("eta is not supported in D1")
    U, Om = _vec(u), _mat(omega)
    v = Field(g, e[:, None] * U)
    keep = windows.mask("D2", g.M)
    ot = OdForm(g, np.where(np.outer(keep, keep)[:, :, None, None], Om, 0.0))
    etaf = Field(g, e[:, None] * _vec(f))

    # equation check on the support of eta (relative to the size of its terms)
    D = windows.D
    res = local_residual(u, omega, f, D)
    supp = e[D] != 0
    eq_scale = max(float(np.abs(_vec(f)[D]).max()), float(np.abs(U).max()), 1.0)
    eq_res = float(np.abs(res[supp]).max()) / eq_scale if supp.any() else 0.0
    skipped = eq_res > equation_tol

    dv = d_s(v, HALF)
    Otdv = apply_omega(ot, v)
    G, parts, scale = [], [], 0.0
    for phi in panel:
        P = _vec(phi)
        pf = Field(g, P)
        a = pair_inner(dv, d_s(pf, HALF))
        b = field_inner(Otdv, pf)
        c = field_inner(etaf, pf)
        G.append(a - b - c)
        scale = max(scale, abs(a) + abs(b) + abs(c))
        parts.append(_four_terms(U, Om, e, P, g, windows) if not skipped else (np.nan,) * 4)
    G = np.asarray(G)
    parts = np.asarray(parts).reshape(-1, 4)
    match = None
    if not skipped and G.size:
        match = float(np.abs(G - parts.sum(axis=1)).max()) / max(scale, 1e-300)

    ratio, terms = None, {}
    if bound and G.size:
        ratio, terms = bound_ratio(u, omega, windows, panel, G)
    return LocalizationParts(windows, eta, v, ot, G, parts[:, 0], parts[:, 1], parts[:, 2],
                             parts[:, 3], eq_res, match, scale, skipped, ratio, terms, match_tol)


def bound_ratio(u: Field, omega: OdForm, windows: Windows, panel, G, s: float = 0.25,
                eps: float = 0.1) -> tuple:
    """Measured ``max |G(phi)| / ((1 + ||Omega||_D) * U * Phi)``.

    ``U = ||u||_{L2+Linf(D)} + [u]_{W^{s,2}(D2)}`` and
    ``Phi = ||phi||_{L2+Linf(D)} + ||phi||_{L^{1/s}(D2)} + ||phi||_{L1+Linf}
    + [phi]_{W^{eps, 2/(2s+1)}(D2)}`` maximized over the panel.
    """
    D, D2 = windows.D, windows.D2
    om = norm_odform_lp(omega, 2, restrict_to=D)
    uu = norm_l2_plus_linf(u, nodes=D).value + sobolev_seminorm(u, s, 2, nodes=D2)
    q = 2.0 / (2.0 * s + 1.0)
    phis = []
    for phi in panel:
        phis.append(norm_l2_plus_linf(phi, nodes=D).value + norm_lp_field(phi, 1.0 / s, nodes=D2)
                    + norm_l2_plus_linf(phi, p=1.0).value + sobolev_seminorm(phi, eps, q, nodes=D2))
    ratios = np.abs(np.asarray(G)) / ((1.0 + om) * uu * np.asarray(phis))
    terms = {"s": s, "eps": eps, "omega_D": om, "u_term": uu, "phi_terms": [float(p) for p in phis]}
    return float(ratios.max()), terms
