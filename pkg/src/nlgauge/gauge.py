"""GL(N) gauge construction ``A = (I + eps) P`` with ``div_{1/2}(A Omega - d_{1/2} A) = 0``.

Pipeline:

1. ``coulomb_rotation_gauge`` finds an SO(N)-valued ``P`` by Riemannian
   descent on ``E(P) = 1/2 ||Omega^P||^2``.
2. ``fixed_point_step`` is the map ``eps -> T(eps)``: Hodge-split the
   rewritten form, then solve a fractional Poisson problem for the update.
3. ``build_gauge`` iterates the map to a fixed point and assembles ``A``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calculus import d_s, div_s
from .grid import Field, OdForm, identity_field
from .hodge import divergence_dual_norm, frac_lap_matrix, hodge_decompose, solve_frac_poisson
from .norms import norm_lp_field, norm_odform_lp, osc, sobolev_seminorm

log = logging.getLogger(__name__)

HALF = 0.5


@dataclass(frozen=True)
class GaugeConfig:
    sigma_check: float = 0.1
    fp_tol: float = 1e-11
    fp_max_iter: int = 50
    fp_blowup: float = 1e3
    rot_step: float = 1.0
    rot_tol: float = 1e-4
    rot_grad_tol: float = 1e-12
    rot_max_iter: int = 500
    rot_precondition: bool = True
    hodge_tol: float = 1e-12

    def __post_init__(self):
        for name in ("sigma_check", "fp_tol", "rot_step", "rot_tol", "hodge_tol", "fp_blowup"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.fp_max_iter < 1 or self.rot_max_iter < 1:
            raise ValueError("iteration caps must be >= 1")


# -- pairwise matrix algebra -------------------------------------------------

def _at_x(X: np.ndarray) -> np.ndarray:
    return X[:, None]


def _at_y(X: np.ndarray) -> np.ndarray:
    return X[None, :]


def _T(X: np.ndarray) -> np.ndarray:
    return np.swapaxes(X, -1, -2)


def _mm(*ops: np.ndarray) -> np.ndarray:
    out = ops[0]
    for op in ops[1:]:
        out = np.matmul(out, op)
    return out


def _half_power(grid, power: float) -> np.ndarray:
    return grid.rpow(power)[:, :, None, None]


def omega_p(P: Field, omega: OdForm) -> OdForm:
    """Gauge-transformed potential

    ``1/2 (d P (P^T(y) + P^T(x)) - P(x) Om P^T(y) - P(y) Om P^T(x))``.
    """
    g = P.grid
    p = P.values
    om = omega.kernel
    c = _half_power(g, HALF)
    Px, Py = _at_x(p), _at_y(p)
    dP = (Px - Py) * c
    k = 0.5 * (_mm(dP, _T(Py) + _T(Px)) - _mm(Px, om, _T(Py)) - _mm(Py, om, _T(Px)))
    return OdForm(g, k)


def r_epsilon(eps: Field, P: Field, omega: OdForm) -> OdForm:
    """Remainder of the ``A = (I + eps) P`` rewrite (quarter-order products)."""
    g = P.grid
    n = P.values.shape[-1]
    p = P.values
    Px, Py = _at_x(p), _at_y(p)
    Dp = Px - Py
    inner = (_mm(Dp, _T(Dp)) * _half_power(g, HALF)
             - _mm(Px, omega.kernel, _T(Dp))
             + _mm(Dp, omega.kernel, _T(Px)))
    I_eps = np.eye(n) + eps.values
    k = 0.5 * _mm(_at_x(I_eps), inner, Py)
    return OdForm(g, k)


def omega_a(A: Field, omega: OdForm) -> OdForm:
    """``A(x) Omega(x,y) - d_{1/2} A(x,y)``."""
    k = _mm(_at_x(A.values), omega.kernel) - d_s(A, HALF).kernel
    return OdForm(A.grid, k)


def rewrite_lhs(eps: Field, P: Field, omega: OdForm, omp: OdForm | None = None) -> OdForm:
    """``-(I + eps(x)) Om^P P(y) - d eps P(y) + R_eps``."""
    n = P.values.shape[-1]
    omp = omega_p(P, omega) if omp is None else omp
    I_eps = np.eye(n) + eps.values
    Py = _at_y(P.values)
    k = (-_mm(_at_x(I_eps), omp.kernel, Py)
         - _mm(d_s(eps, HALF).kernel, Py)
         + r_epsilon(eps, P, omega).kernel)
    return OdForm(P.grid, k)


def rewrite_defect(eps: Field, P: Field, omega: OdForm) -> float:
    """Max entry of ``(A Om - d A) - rewrite_lhs`` for ``A = (I + eps) P``."""
    A = gauge_matrix(eps, P)
    diff = omega_a(A, omega).kernel - rewrite_lhs(eps, P, omega).kernel
    return float(np.abs(diff).max())


def gauge_matrix(eps: Field, P: Field) -> Field:
    n = P.values.shape[-1]
    return Field(P.grid, _mm(np.eye(n) + eps.values, P.values))


# -- rotation gauge ------------------------------------------------------------

@dataclass(frozen=True)
class RotationGauge:
    """SO(N) gauge ``P`` with its transformed potential and descent diagnostics.

    ``flagged`` is set when the descent stopped with the divergence residual
    still above ``rot_tol * ||Omega||``; the result is usable but not certified.
    """

    P: Field
    omega_p: OdForm
    div_residual: float
    initial_residual: float
    energy_history: list
    iterations: int
    flagged: bool
    seminorm_ratio: float
    orthogonality_defect: float


def rotation_energy(P: Field, omega: OdForm) -> float:
    return 0.5 * norm_odform_lp(omega_p(P, omega), 2) ** 2


def rotation_energy_gradient(P: Field, omega: OdForm) -> np.ndarray:
    """Euclidean gradient of ``E(P) = 1/2 sum mu |Om^P|^2`` w.r.t. the entries of ``P``."""
    g = P.grid
    p = P.values
    om = omega.kernel
    W = omega_p(P, omega).kernel * g.mu[:, :, None, None]
    c = _half_power(g, HALF)
    Px, Py = _at_x(p), _at_y(p)
    S = _T(Px) + _T(Py)
    D = Px - Py
    WT = _T(W)
    from_x = 0.5 * (c * _mm(W, _T(S)) + c * _mm(WT, D) - _mm(W, Py, _T(om)) - _mm(WT, Py, om))
    from_y = 0.5 * (-c * _mm(W, _T(S)) + c * _mm(WT, D) - _mm(WT, Px, om) - _mm(W, Px, _T(om)))
    return from_x.sum(axis=1) + from_y.sum(axis=0)


def _skew(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X - _T(X))


def _cayley(theta: np.ndarray, step: float) -> np.ndarray:
    n = theta.shape[-1]
    I = np.eye(n)
    return np.linalg.solve(I + 0.5 * step * theta, I - 0.5 * step * theta)


def _polar(p: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(p)
    return _mm(u, vt)


def _precondition(theta: np.ndarray, grid) -> np.ndarray:
    # Sobolev metric: (Lambda_{1/2} + I)^-1 applied channelwise.
    K = frac_lap_matrix(grid, HALF) + np.eye(grid.M)
    flat = theta.reshape(grid.M, -1)
    return np.linalg.solve(K, flat).reshape(theta.shape)


def div_residual(F: OdForm) -> float:
    """``||div_{1/2} F||_{l2(h)}``."""
    return norm_lp_field(div_s(F, HALF), 2)


def coulomb_rotation_gauge(omega: OdForm, cfg: GaugeConfig = GaugeConfig(),
                           P0: Field | None = None) -> RotationGauge:
    """Minimize ``1/2 ||Om^P||^2`` over SO(N)-valued ``P``.

    Riemannian descent with a Sobolev-preconditioned gradient in so(N),
    Cayley retraction and Armijo backtracking over ``rot_step * 2**-m``.
    Starts from ``P = I`` unless ``P0`` is given.
    """
    g = omega.grid
    n = omega.kernel.shape[-1]
    om_norm = norm_odform_lp(omega, 2)
    if om_norm > cfg.sigma_check:
        log.warning("||Omega|| = %.3g exceeds smallness threshold %.3g", om_norm, cfg.sigma_check)
    P = identity_field(g, n) if P0 is None else P0
    E = rotation_energy(P, omega)
    history = [E]
    res0 = res = div_residual(omega_p(P, omega))
    target = cfg.rot_tol * om_norm
    step = cfg.rot_step
    it = 0
    # SO(1) is trivial and Omega = 0 is already critical
    done = n == 1 or om_norm == 0.0 or res <= target
    while not done and it < cfg.rot_max_iter:
        it += 1
        Gp = _skew(_mm(rotation_energy_gradient(P, omega), _T(P.values)))
        theta = _skew(_precondition(Gp, g)) if cfg.rot_precondition else Gp
        slope = float(np.einsum("iab,iab->", theta, Gp))
        if slope <= cfg.rot_grad_tol * E:
            break
        while True:
            trial = Field(g, _mm(_cayley(theta, step), P.values))
            E_trial = rotation_energy(trial, omega)
            if E_trial <= E - 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-14:
                trial = None
                break
        if trial is None:
            break
        P, E = trial, E_trial
        if P.orthogonality_defect() > 1e-12:
            P = Field(g, _polar(P.values))
        history.append(E)
        step = min(2.0 * step, 1e3 * cfg.rot_step)
        res = div_residual(omega_p(P, omega))
        done = res <= target
    omp = omega_p(P, omega)
    res = div_residual(omp)
    ratio = sobolev_seminorm(P, HALF) / om_norm if om_norm > 0 else 0.0
    flagged = res > max(target, 1e-300) and n > 1 and om_norm > 0
    return RotationGauge(P, omp, res, res0, history, it, flagged, ratio, P.orthogonality_defect())


# -- fixed point -----------------------------------------------------------------

def _eps_size(delta: Field) -> float:
    """``||delta||_inf + [delta]_{W^{1/2,2}}``: the norm the contraction is measured in."""
    return norm_lp_field(delta, np.inf) + sobolev_seminorm(delta, HALF)


def fixed_point_step(eps: Field, rotation: RotationGauge, omega: OdForm,
                     cfg: GaugeConfig = GaugeConfig()):
    """One application of ``T``.  Returns ``(T(eps), a, B)``.

    ``T(eps)`` is the mean-zero solution of
    ``-Lambda tau = div(B P^T(y)) + div((I + eps(x)) Om^P) - div(R_eps P^T(y))``
    where ``(a, B)`` is the Hodge split of the rewritten form.
    """
    P = rotation.P
    omp = rotation.omega_p
    n = P.values.shape[-1]
    lhs = rewrite_lhs(eps, P, omega, omp)
    parts = hodge_decompose(lhs, HALF, tol=cfg.hodge_tol)
    PyT = _T(_at_y(P.values))
    I_eps = np.eye(n) + eps.values
    rhs = (div_s(OdForm(P.grid, _mm(parts.B.kernel, PyT)), HALF)
           + div_s(OdForm(P.grid, _mm(_at_x(I_eps), omp.kernel)), HALF)
           - div_s(OdForm(P.grid, _mm(r_epsilon(eps, P, omega).kernel, PyT)), HALF))
    tau = solve_frac_poisson(-rhs, HALF, tol=cfg.hodge_tol)
    return tau, parts.a, parts.B


@dataclass(frozen=True)
class GaugeResult:
    rotation: RotationGauge
    eps: Field
    a: Field
    B: OdForm
    A: Field
    omega_a: OdForm
    omega_norm: float
    div_residual_a: float
    div_dual_residual_a: float
    omega_a_minus_b: float
    contraction_sizes: list
    contraction_ratios: list
    iterations: int
    converged: bool
    diverged: bool
    contracting: bool
    min_abs_det_A: float
    estimate_ratios: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "omega_norm": self.omega_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "diverged": self.diverged,
            "contracting": self.contracting,
            "div_residual_a": self.div_residual_a,
            "div_dual_residual_a": self.div_dual_residual_a,
            "omega_a_minus_b": self.omega_a_minus_b,
            "min_abs_det_A": self.min_abs_det_A,
            "rotation_residual": self.rotation.div_residual,
            "rotation_initial_residual": self.rotation.initial_residual,
            "rotation_iterations": self.rotation.iterations,
            "rotation_flagged": self.rotation.flagged,
            "contraction_sizes": list(self.contraction_sizes),
            "contraction_ratios": list(self.contraction_ratios),
            "estimate_ratios": dict(self.estimate_ratios),
        }


def build_gauge(omega: OdForm, cfg: GaugeConfig = GaugeConfig(), trace: bool = False) -> GaugeResult:
    """Iterate ``eps <- T(eps)`` from ``eps = 0`` and assemble ``A = (I + eps) P``.

    Stops when ``||Delta eps||_inf + [Delta eps]_{1/2}`` drops below
    ``fp_tol``.  Exhausting ``fp_max_iter`` or a step size above
    ``fp_blowup`` marks the result diverged; the history is kept either way.
    """
    if omega.kernel.ndim != 4:
        raise ValueError("Omega must be matrix valued")
    if omega.antisymmetry_defect() > 1e-12 * max(np.abs(omega.kernel).max(), 1.0):
        raise ValueError("Omega must be antisymmetric in its matrix indices")
    g = omega.grid
    n = omega.kernel.shape[-1]
    om_norm = norm_odform_lp(omega, 2)
    rot = coulomb_rotation_gauge(omega, cfg)
    eps = Field(g, np.zeros((g.M, n, n)))
    sizes, ratios, records = [], [], []
    converged = diverged = False
    it = 0
    while it < cfg.fp_max_iter:
        it += 1
        new, a, B = fixed_point_step(eps, rot, omega, cfg)
        size = _eps_size(new - eps)
        if sizes:
            ratios.append(size / sizes[-1] if sizes[-1] > 0 else 0.0)
        sizes.append(size)
        if trace:
            records.append({
                "iteration": it,
                "step_size": size,
                "hodge_exact_energy": norm_odform_lp(d_s(a, HALF), 2) ** 2,
                "hodge_sol_energy": norm_odform_lp(B, 2) ** 2,
            })
        if not np.isfinite(size) or size > cfg.fp_blowup:
            diverged = True
            break
        eps = new
        if size < cfg.fp_tol:
            converged = True
            break
    if not converged:
        diverged = True
    # contraction is judged from the third iteration on; earlier ratios see the transient
    contracting = converged and all(r < 1.0 for r in ratios[1:])
    _, a, B = fixed_point_step(eps, rot, omega, cfg)
    A = gauge_matrix(eps, rot.P)
    OA = omega_a(A, omega)
    det = np.abs(np.linalg.det(A.values))
    denom = om_norm if om_norm > 0 else 1.0
    estimates = {
        "A_seminorm_over_omega": sobolev_seminorm(A, HALF) / denom,
        "A_sup_over_one_plus_omega": norm_lp_field(A, np.inf) / (1.0 + om_norm),
        "eps_sup_over_omega": norm_lp_field(eps, np.inf) / denom,
        "eps_seminorm_over_omega": sobolev_seminorm(eps, HALF) / denom,
        "P_seminorm_over_omega": rot.seminorm_ratio,
        "osc_a": osc(a),
    }
    return GaugeResult(
        rotation=rot,
        eps=eps,
        a=a,
        B=B,
        A=A,
        omega_a=OA,
        omega_norm=om_norm,
        div_residual_a=div_residual(OA),
        div_dual_residual_a=divergence_dual_norm(OA, HALF),
        omega_a_minus_b=norm_odform_lp(OA - B, 2),
        contraction_sizes=sizes,
        contraction_ratios=ratios,
        iterations=it,
        converged=converged,
        diverged=diverged,
        contracting=contracting,
        min_abs_det_A=float(det.min()),
        estimate_ratios=estimates,
        trace=records,
    )
