"""The antisymmetric-potential system ``Lambda_{1/2} u = Omega . d_{1/2} u + f``.

Assembly and least-squares solution, the gauge reformulation, the
conservation-law residual and a fixed-grid weak-convergence experiment.
Vector fields ``u`` have shape ``(M, N)``; they are flattened node-major
(``i * N + a``) when a matrix is involved.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calculus import d_s, div_s, field_inner, frac_laplacian, odform_dot, pair_inner
from .gauge import GaugeResult, omega_a
from .grid import Field, GridSpec, OdForm, _check_grid
from .hodge import frac_lap_matrix
from .norms import norm_l2_plus_linf, norm_lp_field, norm_odform_lp, sobolev_seminorm

log = logging.getLogger(__name__)

HALF = 0.5


class SystemSolveError(RuntimeError):
    def __init__(self, message: str, singular_values: np.ndarray):
        super().__init__(message)
        self.singular_values = singular_values


def apply_omega(omega: OdForm, u: Field) -> Field:
    """``(Omega . d_{1/2} u)^i = sum_j Omega_ij . d_{1/2} u^j``."""
    _check_grid(omega.grid, u.grid)
    if omega.kernel.ndim != 4 or u.values.ndim != 2 or omega.kernel.shape[-1] != u.values.shape[-1]:
        raise ValueError(f"shape mismatch: Omega {omega.kernel.shape}, u {u.values.shape}")
    return odform_dot(omega, d_s(u, HALF))


def system_apply(omega: OdForm, u: Field) -> Field:
    """``Lambda_{1/2} u - Omega . d_{1/2} u``."""
    return frac_laplacian(u, HALF) - apply_omega(omega, u)


def manufactured_forcing(omega: OdForm, u: Field) -> Field:
    """The ``f`` for which ``u`` solves the system exactly."""
    return system_apply(omega, u)


@dataclass(frozen=True)
class SystemOperator:
    grid: GridSpec
    omega: OdForm
    matrix: np.ndarray
    singular_values: np.ndarray = field(repr=False)
    rank: int = 0
    threshold: float = 0.0

    @property
    def nullity(self) -> int:
        return self.matrix.shape[0] - self.rank

    def __call__(self, u: Field) -> Field:
        return Field(self.grid, (self.matrix @ u.values.reshape(-1)).reshape(u.values.shape))


def assemble_system(omega: OdForm, rel_threshold: float = 1e-10) -> SystemOperator:
    g = omega.grid
    n = omega.kernel.shape[-1]
    L = frac_lap_matrix(g, HALF)
    w = g.rpow(HALF) * g.dy
    Wk = omega.kernel * w[:, :, None, None]
    # (Omega . d u)_i^a = sum_j W_ij^ab (u_i^b - u_j^b)
    block = -Wk
    diag = Wk.sum(axis=1)
    idx = np.arange(g.M)
    block[idx, idx] += diag
    Om = block.transpose(0, 2, 1, 3).reshape(g.M * n, g.M * n)
    K = np.kron(L, np.eye(n)) - Om
    sv = np.linalg.svd(K, compute_uv=False)
    thr = rel_threshold * sv[0]
    return SystemOperator(g, omega, K, sv, int(np.sum(sv > thr)), thr)


@dataclass(frozen=True)
class SolveReport:
    u: Field
    residual: float
    range_defect: float
    condition: float
    rank: int
    nullity: int
    flagged: bool


def solve_system(omega: OdForm, f: Field, tol: float = 1e-8, rel_threshold: float = 1e-10,
                 max_nullity: int | None = None, op: SystemOperator | None = None) -> SolveReport:
    """Minimum-norm least-squares solve by truncated SVD.

    The component of ``f`` outside the numerical range is dropped and
    reported as ``range_defect`` (relative).  ``condition`` is
    ``sigma_max / sigma_min_kept``, so perturbing ``f`` by ``delta`` moves
    ``u`` by at most ``||delta|| / sigma_min_kept``.
    """
    g = omega.grid
    n = omega.kernel.shape[-1]
    max_nullity = n if max_nullity is None else max_nullity
    op = assemble_system(omega, rel_threshold) if op is None else op
    if op.nullity > max_nullity:
        raise SystemSolveError(
            f"numerical nullity {op.nullity} exceeds {max_nullity}", op.singular_values)
    U, sv, Vt = np.linalg.svd(op.matrix)
    keep = sv > op.threshold
    b = f.values.reshape(-1)
    coef = U[:, keep].T @ b
    x = Vt[keep].T @ (coef / sv[keep])
    u = Field(g, x.reshape(g.M, n))
    bnorm = np.linalg.norm(b)
    proj = U[:, keep] @ coef
    range_defect = float(np.linalg.norm(b - proj) / bnorm) if bnorm > 0 else 0.0
    if range_defect > 1e-12:
        log.warning("forcing projected onto the range; relative defect %.3e", range_defect)
    res = float(np.linalg.norm(op.matrix @ x - proj) / bnorm) if bnorm > 0 else 0.0
    flagged = res > tol
    if flagged:
        log.warning("system residual %.3e above tolerance %.1e", res, tol)
    return SolveReport(u, res, range_defect, float(sv[0] / sv[keep][-1]), op.rank, op.nullity, flagged)


def _pair_matvec_x(A: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.einsum("iab,ijb->ija", A, F)


def reformulation_defect(u: Field, omega: OdForm, A: Field, test_fields, f: Field | None = None) -> float:
    """Relative defect of the gauge reformulation, tested weakly.

    Compares ``<A(x) d u, d phi>_mu`` with
    ``<(A Omega - d A) . d u + A f, phi>_h`` where ``f`` defaults to the
    manufactured forcing of ``u``.
    """
    if np.abs(np.linalg.det(A.values)).min() <= 0:
        raise ValueError("gauge A is singular")
    f = manufactured_forcing(omega, u) if f is None else f
    du = d_s(u, HALF)
    flux = OdForm(u.grid, _pair_matvec_x(A.values, du.kernel))
    curv = odform_dot(omega_a(A, omega), du)
    Af = Field(u.grid, np.einsum("iab,ib->ia", A.values, f.values))
    worst, scale = 0.0, 0.0
    for phi in test_fields:
        lhs = pair_inner(flux, d_s(phi, HALF))
        r1 = field_inner(curv, phi)
        r2 = field_inner(Af, phi)
        worst = max(worst, abs(lhs - r1 - r2))
        scale = max(scale, abs(lhs) + abs(r1) + abs(r2))
    return worst / scale if scale > 0 else 0.0


def dual_test_scale(phi: Field) -> float:
    """``max(||phi||_inf, ||phi||_{l2(h)})`` - the dual weight of ``L^2 + L^inf``."""
    return max(norm_lp_field(phi, np.inf), norm_lp_field(phi, 2))


@dataclass(frozen=True)
class ConservationReport:
    residuals: list
    max_residual: float
    bound_proxy: float
    gauge_residual: float
    reformulation_defect: float
    u_norm: float
    test_set: str

    @property
    def ratio(self) -> float:
        return self.max_residual / self.bound_proxy if self.bound_proxy > 0 else 0.0


def conservation_residual(u: Field, f: Field, omega: OdForm, A: Field, test_fields,
                          gauge_residual: float | None = None, test_set: str = "") -> ConservationReport:
    """Weak residual of ``div(A d u - (Omega^A)^* u) = A f`` over a test set.

    The flux term is ``(Omega^A)(y, x) u(x)``.  The residual equals
    ``<(div Omega^A) u, phi>_h``, so it is bounded by
    ``||div Omega^A||_{l2(h)} ||u||_{L2+Linf} max(||phi||_inf, ||phi||_2)``.
    """
    OA = omega_a(A, omega)
    if gauge_residual is None:
        gauge_residual = norm_lp_field(div_s(OA, HALF), 2)
    du = d_s(u, HALF)
    flux = _pair_matvec_x(A.values, du.kernel)
    flux -= np.einsum("jiab,ib->ija", OA.kernel, u.values)
    flux = OdForm(u.grid, flux)
    Af = Field(u.grid, np.einsum("iab,ib->ia", A.values, f.values))
    res = []
    for phi in test_fields:
        res.append(pair_inner(flux, d_s(phi, HALF)) - field_inner(Af, phi))
    unorm = norm_l2_plus_linf(u).value
    scale = max(dual_test_scale(phi) for phi in test_fields)
    return ConservationReport(
        residuals=res,
        max_residual=float(np.max(np.abs(res))),
        bound_proxy=gauge_residual * unorm * scale,
        gauge_residual=gauge_residual,
        reformulation_defect=reformulation_defect(u, omega, A, test_fields, f),
        u_norm=unorm,
        test_set=test_set,
    )


def conservation_from_gauge(u: Field, f: Field, omega: OdForm, gauge: GaugeResult, test_fields,
                            test_set: str = "") -> ConservationReport:
    return conservation_residual(u, f, omega, gauge.A, test_fields, gauge.div_residual_a, test_set)


# -- weak convergence ----------------------------------------------------------

def solution_size(u: Field) -> float:
    """``[u]_{W^{1/2,2}} + ||u||_{L2+Linf}``."""
    return sobolev_seminorm(u, HALF) + norm_l2_plus_linf(u).value


@dataclass(frozen=True)
class WeakConvergenceReport:
    ell: list
    sizes: list
    base_size: float
    functionals: np.ndarray
    cesaro_functionals: np.ndarray
    head_spread: float
    tail_spread: float
    limit_residuals: list
    range_defects: list
    omega_norms: list
    partial: bool = False
    failures: list = field(default_factory=list)

    @property
    def uniform_bound_ratio(self) -> float:
        return max(self.sizes) / self.base_size if self.base_size > 0 else float("inf")

    def rows(self) -> list:
        out = []
        for k, ell in enumerate(self.ell):
            out.append({
                "ell": ell,
                "size": self.sizes[k],
                "omega_norm": self.omega_norms[k],
                "range_defect": self.range_defects[k],
                "limit_residual": self.limit_residuals[k],
                "functionals": [float(v) for v in self.functionals[k]],
            })
        return out


def spread(values: np.ndarray) -> float:
    """Max over panel members of ``max - min`` across the rows of ``values``."""
    return float((values.max(axis=0) - values.min(axis=0)).max()) if len(values) else 0.0


def weak_convergence_experiment(omega_seq, f_seq, omega_limit: OdForm, f_limit: Field, panel,
                                base_size: float, head: int = 4, tol: float = 1e-8) -> WeakConvergenceReport:
    """Solve ``Lambda u_l = Omega_l . d u_l + f_l`` for each member and probe weakly.

    ``omega_seq`` and ``f_seq`` are sequences (or callables of ``ell``) of
    equal length; members are numbered from 1.  The weak-limit proxy after
    ``ell`` members is ``u_ell`` itself; its limit-equation residual is
    ``max_phi |<Lambda u - Omega . d u - f, phi>_h|`` with the limit data.
    """
    ells = list(range(1, len(omega_seq) + 1))
    sizes, funcs, lim, defects, norms, failures = [], [], [], [], [], []
    for ell, om, f in zip(ells, omega_seq, f_seq):
        try:
            rep = solve_system(om, f, tol=tol)
        except SystemSolveError as exc:
            failures.append({"ell": ell, "error": str(exc)})
            break
        u = rep.u
        sizes.append(solution_size(u))
        funcs.append([field_inner(u, phi) for phi in panel])
        r = system_apply(omega_limit, u) - f_limit
        lim.append(max(abs(field_inner(r, phi)) for phi in panel))
        defects.append(rep.range_defect)
        norms.append(norm_odform_lp(om, 2))
    F = np.array(funcs)
    ces = np.cumsum(F, axis=0) / np.arange(1, len(F) + 1)[:, None] if len(F) else F
    return WeakConvergenceReport(
        ell=ells[:len(sizes)],
        sizes=sizes,
        base_size=base_size,
        functionals=F,
        cesaro_functionals=ces,
        head_spread=spread(F[:head]),
        tail_spread=spread(F[head:]),
        limit_residuals=lim,
        range_defects=defects,
        omega_norms=norms,
        partial=bool(failures),
        failures=failures,
    )


def loglog_slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])
