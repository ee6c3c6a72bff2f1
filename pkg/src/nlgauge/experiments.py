"""Experiment orchestration: configuration, the selector pipelines and reports.

Every random draw is derived from ``RunConfig.seed`` through the Philox
streams in :mod:`nlgauge.problems`, and all pair sums are plain ``einsum``
reductions evaluated with BLAS pinned to one thread, so a report's numeric
fields depend only on the configuration.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .calculus import (d_s, div_s, field_inner, frac_laplacian, pair_inner,
                       product_rule_defect)
from .cutoff import cutoff_table
from .gauge import GaugeConfig, build_gauge, rewrite_defect
from .grid import Field, OdForm, identity_field, make_grid
from .hodge import divergence_dual_norm, hodge_decompose
from .io import (field_to_csv, gauge_result_to_dict, hodge_parts_to_dict, odform_to_csv,
                 rows_to_csv, write_json)
from .localize import Windows, localize, local_forcing, windows_from_intervals
from .norms import norm_odform_lp, sobolev_seminorm
from .problems import (STREAM_AUX, random_antisymmetric_omega, random_invertible_field,
                       random_rotation_field, random_smooth_field, rng_for, test_panel)
from .system import (conservation_from_gauge, conservation_residual, loglog_slope,
                     manufactured_forcing, reformulation_defect, solution_size, solve_system,
                     weak_convergence_experiment)

log = logging.getLogger(__name__)

SELECTORS = ("ops-check", "hodge", "gauge", "conserve", "weakconv", "cutoff", "localize", "sweep")
FORMATS = ("json", "csv", "both")

# acceptance thresholds
EXACT_TOL = 1e-11
HODGE_DIV_TOL = 1e-9
HODGE_PYTH_TOL = 1e-9
HODGE_LIN_TOL = 1e-8
GAUGE_DIV_REL = 1e-5
GAUGE_OSC_REL = 1e-6
GAUGE_MIN_DET = 0.5
STABILITY_BAND = 0.2
CONSERVE_FACTOR = 10.0
SPECTRAL_FLATNESS = 0.02
UNIFORM_BOUND = 2.0
SLOPE_TARGET, SLOPE_TOL = -1.0, 0.3
CUTOFF_RATIO = 0.9
SEED_SPACE = 2 ** 64


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """All knobs of one run.  ``gauge`` holds :class:`GaugeConfig` overrides."""

    experiment: str = "ops-check"
    seed: int = 0
    half_width: float = 1.0
    points: int = 32
    geometry: str = "truncated_line"
    image_count: int = 0
    N: int = 2
    s_values: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    omega_norm: float = 0.05
    smoothness: int = 3
    gauge: dict = field(default_factory=dict)
    out: str = "runs"
    format: str = "json"
    trace: bool = False
    # ops-check
    instances: int = 100
    spectral_points: int = 256
    spectral_images: int = 64
    # sweep
    sweep_points: list = field(default_factory=lambda: [32, 64])
    sweep_norms: list = field(default_factory=lambda: [0.025, 0.05])
    sweep_seeds: int = 10
    # weakconv
    ell_max: int = 8
    oscillation: float = 0.02
    # cutoff
    k_values: list = field(default_factory=lambda: [1, 2, 3])
    refinement: int = 2000

    def validate(self) -> "RunConfig":
        if self.experiment not in SELECTORS:
            raise ConfigError(f"experiment: unknown selector {self.experiment!r}; choose from {SELECTORS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format: must be one of {FORMATS}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        if self.N < 1:
            raise ConfigError("N: must be >= 1")
        if self.points < 2:
            raise ConfigError("points: must be >= 2")
        if not self.half_width > 0:
            raise ConfigError("half_width: must be positive")
        if not self.omega_norm > 0:
            raise ConfigError("omega_norm: must be positive")
        for s in self.s_values:
            if not 0 < s < 1:
                raise ConfigError(f"s_values: {s} outside (0, 1)")
        try:
            self.gauge_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"gauge: {exc}") from None
        return self

    def gauge_config(self) -> GaugeConfig:
        return GaugeConfig(**self.gauge)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kwargs = {}
        for key, val in data.items():
            default = cls().__getattribute__(key)
            if isinstance(default, bool) and not isinstance(val, bool):
                raise ConfigError(f"{key}: expected a boolean, got {val!r}")
            if isinstance(default, float) and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if type(default) is not type(val) and not (default is None):
                raise ConfigError(f"{key}: expected {type(default).__name__}, got {type(val).__name__}")
            kwargs[key] = val
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)


@dataclass
class RunReport:
    config: dict
    experiment: str
    metrics: dict
    checks: dict
    passed: bool
    wall_clock: float
    version: str = __version__
    artifacts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def numerics(self) -> dict:
        """Everything that must be bit-identical between reruns."""
        return {"metrics": self.metrics, "checks": self.checks, "passed": self.passed}


# -- shared helpers ------------------------------------------------------------

def _grid(cfg: RunConfig, M: int | None = None):
    return make_grid(cfg.half_width, cfg.points if M is None else M, cfg.geometry, cfg.image_count)


def _rel(defect: float, scale: float) -> float:
    return defect / scale if scale > 0 else defect


def _rough_antisymmetric(g, rng, N) -> OdForm:
    k = rng.standard_normal((g.M, g.M, N, N))
    return OdForm(g, k - np.swapaxes(k, 2, 3))


# -- exact identities ----------------------------------------------------------

def exact_identity_instance(seed: int, k: int, M: int, N: int, geometry: str = "truncated_line") -> dict:
    """Relative defects of all exact discrete identities on one random instance."""
    rng = rng_for(seed, 100 + k)
    images = int(rng.integers(0, 4)) if geometry == "periodic_torus" else 0
    g = make_grid(float(rng.uniform(0.5, 3.0)), M, geometry, images)
    s = float(rng.choice([0.25, 0.5, 0.75]))
    u = Field(g, rng.standard_normal((M, N)))
    phi = Field(g, rng.standard_normal((M, N)))
    F = OdForm(g, rng.standard_normal((M, M, N)))
    Fm = OdForm(g, rng.standard_normal((M, M, N, N)))
    out = {"M": M, "N": N, "s": s, "geometry": geometry}

    # adjointness <F, d phi>_mu = <div F, phi>_h, scaled by Cauchy-Schwarz
    lhs, rhs = pair_inner(F, d_s(phi, s)), field_inner(div_s(F, s), phi)
    out["adjoint"] = _rel(abs(lhs - rhs), norm_odform_lp(F, 2) * norm_odform_lp(d_s(phi, s), 2))

    # product rules with u(x) and u(y)
    for variant in ("with_x", "with_y"):
        scale = max(np.abs(div_s(Fm, s).values).max() * np.abs(u.values).max(), 1e-300)
        out[f"product_{variant}"] = _rel(product_rule_defect(Fm, u, s, variant), scale)

    # rewrite of A Omega - d A for A = (I + eps) P
    om = _rough_antisymmetric(g, rng, N)
    P = random_rotation_field(g, (seed + k) % SEED_SPACE, N, amplitude=0.5)
    eps = Field(g, 0.1 * rng.standard_normal((M, N, N)))
    out["rewrite"] = _rel(rewrite_defect(eps, P, om), max(np.abs(om.kernel).max(), 1.0))

    # gauge reformulation with an invertible A
    A = random_invertible_field(g, (seed + k) % SEED_SPACE, N)
    tests = [Field(g, rng.standard_normal((M, N))) for _ in range(4)]
    out["reformulation"] = reformulation_defect(u, om, A, tests)

    # star preserves divergence-freeness (Hodge oracle)
    parts = hodge_decompose(F, s, tol=1e-13)
    out["star_divfree"] = _rel(float(np.abs(div_s(parts.B.star(), s).values).max()),
                               max(float(np.abs(div_s(F, s).values).max()), 1e-300))
    return out


def laplacian_consistency(M: int = 256, images: int = 64, s_values=(0.25, 0.5, 0.75),
                          modes=(1, 2, 4, 8), seed: int = 0) -> dict:
    """Cosine modes on the torus: pointwise Rayleigh quotient flatness and the energy identity."""
    g = make_grid(math.pi, M, "periodic_torus", images)
    rng = rng_for(seed, STREAM_AUX)
    rows, flat, energy = [], 0.0, 0.0
    for s in s_values:
        for k in modes:
            u = np.cos(k * g.x)
            lu = frac_laplacian(Field(g, u), s).values
            mask = np.abs(u) > 0.1
            q = lu[mask] / u[mask]
            lam = float(np.dot(lu, u) / np.dot(u, u))
            spread = float((q.max() - q.min()) / abs(lam))
            row = {"s": s, "k": k, "rayleigh": lam, "flatness": spread}
            if s == 0.5:
                row["continuum_ratio"] = lam / (2 * math.pi * k)
            rows.append(row)
            flat = max(flat, spread)
        v = Field(g, rng.standard_normal(M))
        lhs = field_inner(frac_laplacian(v, s), v)
        rhs = sobolev_seminorm(v, s) ** 2
        energy = max(energy, abs(lhs - rhs) / rhs)
    return {"rows": rows, "max_flatness": flat, "max_energy_defect": energy}


def run_ops_check(cfg: RunConfig, out: Path) -> tuple:
    rows = []
    Ns = (1, 2, 3)
    for k in range(cfg.instances):
        M = 2 + k % (cfg.points - 1)
        geometry = "periodic_torus" if k % 4 == 3 else "truncated_line"
        rows.append(exact_identity_instance(cfg.seed, k, M, Ns[k % 3], geometry))
    keys = ("adjoint", "product_with_x", "product_with_y", "rewrite", "reformulation", "star_divfree")
    worst = {key: max(r[key] for r in rows) for key in keys}
    lap = laplacian_consistency(cfg.spectral_points, cfg.spectral_images, cfg.s_values, seed=cfg.seed)
    checks = {f"{key}<=1e-11": worst[key] <= EXACT_TOL for key in keys if key != "star_divfree"}
    checks["star_divfree<=1e-10"] = worst["star_divfree"] <= 1e-10
    checks["rayleigh_flat<=2%"] = lap["max_flatness"] <= SPECTRAL_FLATNESS
    checks["energy_identity<=1e-12"] = lap["max_energy_defect"] <= 1e-12
    arts = []
    if cfg.format in ("csv", "both"):
        arts.append(rows_to_csv(rows, out / "ops_instances.csv"))
        arts.append(rows_to_csv(lap["rows"], out / "spectral_modes.csv",
                                ["s", "k", "rayleigh", "flatness"]))
    metrics = {"worst": worst, "instances": len(rows), "spectral": lap}
    if cfg.trace:
        metrics["instances_detail"] = rows
    return metrics, checks, arts


# -- Hodge ---------------------------------------------------------------------

def hodge_instance(g, rng, N: int, s: float) -> dict:
    shape = (g.M, g.M) + ((N,) if N > 1 else ())
    G1, G2 = OdForm(g, rng.standard_normal(shape)), OdForm(g, rng.standard_normal(shape))
    p = hodge_decompose(G1, s, tol=1e-13)
    gn = norm_odform_lp(G1, 2)
    div_b = float(np.sqrt(g.h * np.sum(div_s(p.B, s).values ** 2)))
    # divergence measured against the natural scale ||G|| (weighted by the divergence operator norm)
    div_scale = float(np.sqrt(g.h * np.sum(div_s(G1, s).values ** 2)))
    q = hodge_decompose(p.B, s, tol=1e-13)
    idem = norm_odform_lp(q.B - p.B, 2) / gn
    alpha, beta = 0.7, -1.3
    r1 = hodge_decompose(G2, s, tol=1e-13)
    lin = hodge_decompose(G1 * alpha + G2 * beta, s, tol=1e-13)
    lin_def = norm_odform_lp(lin.B - (p.B * alpha + r1.B * beta), 2) / norm_odform_lp(G1 * alpha + G2 * beta, 2)
    dual = divergence_dual_norm(G1, s)
    return {
        "M": g.M, "N": N, "s": s,
        "div_B_rel": div_b / max(div_scale, 1e-300),
        "div_B_over_G": div_b / gn,
        "pythagoras": p.pythagoras_defect,
        "idempotence": idem,
        "linearity": lin_def,
        "dual_norm_le_G": dual <= gn * (1 + 1e-12),
        "cg_iterations": p.iterations,
    }


def run_hodge(cfg: RunConfig, out: Path) -> tuple:
    rng = rng_for(cfg.seed, STREAM_AUX)
    rows = []
    for M in sorted({min(cfg.points, 64), 16, 8}):
        g = _grid(cfg, M)
        for s in cfg.s_values:
            rows.append(hodge_instance(g, rng, cfg.N, s))
    worst = {k: max(r[k] for r in rows) for k in ("div_B_rel", "div_B_over_G", "pythagoras", "idempotence", "linearity")}
    checks = {
        "div_B<=1e-9*G": worst["div_B_over_G"] <= HODGE_DIV_TOL,
        "pythagoras<=1e-9": worst["pythagoras"] <= HODGE_PYTH_TOL,
        "idempotence<=1e-8": worst["idempotence"] <= HODGE_LIN_TOL,
        "linearity<=1e-8": worst["linearity"] <= HODGE_LIN_TOL,
        "dual_norm<=||G||": all(r["dual_norm_le_G"] for r in rows),
    }
    arts = []
    if cfg.format in ("csv", "both"):
        arts.append(rows_to_csv(rows, out / "hodge.csv"))
    if cfg.format in ("json", "both"):
        g = _grid(cfg)
        G = OdForm(g, rng_for(cfg.seed, STREAM_AUX).standard_normal((g.M, g.M)))
        arts.append(write_json(hodge_parts_to_dict(hodge_decompose(G, 0.5)), out / "hodge_parts.json"))
    return {"worst": worst, "rows": rows}, checks, arts


# -- gauge ---------------------------------------------------------------------

def gauge_checks(res) -> dict:
    om = res.omega_norm
    return {
        "converged": bool(res.converged),
        "contracting_from_iter3": bool(res.contracting),
        "div_dual<=1e-5*omega": res.div_dual_residual_a <= GAUGE_DIV_REL * om,
        "osc_a<=1e-6*omega": res.estimate_ratios["osc_a"] <= GAUGE_OSC_REL * om,
        "min_det>=0.5": res.min_abs_det_A >= GAUGE_MIN_DET,
    }


def run_gauge(cfg: RunConfig, out: Path) -> tuple:
    g = _grid(cfg)
    om = random_antisymmetric_omega(g, cfg.seed, cfg.N, cfg.omega_norm, cfg.smoothness)
    res = build_gauge(om, cfg.gauge_config(), trace=cfg.trace)
    arts = []
    if cfg.format in ("json", "both"):
        arts.append(write_json(gauge_result_to_dict(res), out / "gauge.json"))
    if cfg.format in ("csv", "both"):
        arts.append(field_to_csv(res.A, out / "A.csv"))
        arts.append(field_to_csv(res.rotation.P, out / "P.csv"))
        arts.append(field_to_csv(res.eps, out / "eps.csv"))
        arts.append(odform_to_csv(res.omega_a, out / "omega_a.csv"))
        arts.append(rows_to_csv([{"iteration": i + 1, "step_size": v} for i, v in enumerate(res.contraction_sizes)],
                                out / "contraction.csv"))
    metrics = res.summary()
    metrics["rotation_energy_history"] = list(res.rotation.energy_history)
    if cfg.trace:
        metrics["trace"] = res.trace
    return metrics, gauge_checks(res), arts


def stability_summary(values: np.ndarray) -> dict:
    """Per-seed constants ``values`` (one per seed): constant, median and worst relative deviation."""
    med = float(np.median(values))
    dev = float(np.abs(values / med - 1.0).max()) if med > 0 else float("inf")
    return {"constant": float(values.max()), "median": med, "max_rel_deviation": dev,
            "per_seed": [float(v) for v in values]}


def run_sweep(cfg: RunConfig, out: Path) -> tuple:
    rows = []
    gcfg = cfg.gauge_config()
    for M in cfg.sweep_points:
        g = _grid(cfg, M)
        for norm in cfg.sweep_norms:
            for k in range(cfg.sweep_seeds):
                seed = (cfg.seed + k) % SEED_SPACE
                om = random_antisymmetric_omega(g, seed, cfg.N, norm, cfg.smoothness)
                res = build_gauge(om, gcfg)
                e = res.estimate_ratios
                row = {"M": M, "omega_norm": norm, "seed": seed, "iterations": res.iterations,
                       "converged": res.converged, "contracting": res.contracting,
                       "div_dual_rel": res.div_dual_residual_a / res.omega_norm,
                       "osc_a_rel": e["osc_a"] / res.omega_norm, "min_det": res.min_abs_det_A,
                       "A_ratio": e["A_seminorm_over_omega"], "eps_ratio": e["eps_sup_over_omega"],
                       "max_contraction_ratio": max(res.contraction_ratios[1:], default=0.0)}
                row.update({f"check_{k2}": v for k2, v in gauge_checks(res).items()})
                rows.append(row)
    seeds = sorted({r["seed"] for r in rows})
    stab = {}
    for key in ("A_ratio", "eps_ratio"):
        per_seed = np.array([max(r[key] for r in rows if r["seed"] == sd) for sd in seeds])
        stab[key] = stability_summary(per_seed)
        # informational: variation of each seed's ratio over grid size and norm
        within = [max(r[key] for r in rows if r["seed"] == sd) / min(r[key] for r in rows if r["seed"] == sd) - 1.0
                  for sd in seeds]
        stab[key]["within_seed_spread"] = float(max(within))
    checks = {
        "all_converged<=50": all(r["converged"] and r["iterations"] <= 50 for r in rows),
        "contracting_from_iter3": all(r["contracting"] for r in rows),
        "div_dual<=1e-5*omega": all(r["div_dual_rel"] <= GAUGE_DIV_REL for r in rows),
        "osc_a<=1e-6*omega": all(r["osc_a_rel"] <= GAUGE_OSC_REL for r in rows),
        "min_det>=0.5": all(r["min_det"] >= GAUGE_MIN_DET for r in rows),
        "A_ratio_stable_20pct": stab["A_ratio"]["max_rel_deviation"] <= STABILITY_BAND,
        "eps_ratio_stable_20pct": stab["eps_ratio"]["max_rel_deviation"] <= STABILITY_BAND,
    }
    arts = []
    if cfg.format in ("csv", "both"):
        arts.append(rows_to_csv(rows, out / "sweep.csv"))
    return {"rows": rows, "stability": stab}, checks, arts


# -- conservation --------------------------------------------------------------

def run_conserve(cfg: RunConfig, out: Path) -> tuple:
    g = _grid(cfg)
    om = random_antisymmetric_omega(g, cfg.seed, cfg.N, cfg.omega_norm, cfg.smoothness)
    res = build_gauge(om, cfg.gauge_config())
    u = random_smooth_field(g, cfg.seed, (cfg.N,))
    f = manufactured_forcing(om, u)
    panel = test_panel(g, cfg.seed, (cfg.N,))
    rep = conservation_from_gauge(u, f, om, res, panel, test_set="panel16")
    zero = OdForm(g, np.zeros((g.M, g.M, cfg.N, cfg.N)))
    rep0 = conservation_residual(u, manufactured_forcing(zero, u), zero, identity_field(g, cfg.N), panel,
                                 test_set="panel16")
    bound = CONSERVE_FACTOR * rep.gauge_residual * rep.u_norm
    checks = {
        "residual<=10*rho*|u|": rep.max_residual <= bound,
        "identity_gauge<=1e-11": rep0.max_residual <= 1e-11,
        "gauge_converged": bool(res.converged),
    }
    metrics = {
        "max_residual": rep.max_residual,
        "bound": bound,
        "bound_proxy": rep.bound_proxy,
        "ratio_to_proxy": rep.ratio,
        "gauge_residual": rep.gauge_residual,
        "u_norm": rep.u_norm,
        "reformulation_defect": rep.reformulation_defect,
        "residuals": rep.residuals,
        "identity_gauge_residual": rep0.max_residual,
    }
    arts = []
    if cfg.format in ("csv", "both"):
        arts.append(rows_to_csv([{"phi": i, "residual": float(r)} for i, r in enumerate(rep.residuals)],
                                out / "conservation.csv"))
    return metrics, checks, arts


# -- weak convergence ----------------------------------------------------------

def run_weakconv(cfg: RunConfig, out: Path) -> tuple:
    g = _grid(cfg)
    N = cfg.N
    om = random_antisymmetric_omega(g, cfg.seed, N, cfg.omega_norm, cfg.smoothness)
    om1 = random_antisymmetric_omega(g, cfg.seed, N, 1.0, cfg.smoothness, stream=STREAM_AUX)
    u_star = random_smooth_field(g, cfg.seed, (N,))
    f = manufactured_forcing(om, u_star)
    panel = test_panel(g, cfg.seed, (N,))
    base = solve_system(om, f)
    base_size = solution_size(base.u)
    ells = range(1, cfg.ell_max + 1)

    mod = [np.sin(ell * math.pi * g.x / g.L) for ell in ells]
    om_seq = [om + OdForm(g, cfg.oscillation * m[:, None, None, None] * om1.kernel) for m in mod]
    main = weak_convergence_experiment(om_seq, [f] * len(om_seq), om, f, panel, base_size)

    w = random_smooth_field(g, (cfg.seed + 1) % SEED_SPACE, (N,))
    gpert = manufactured_forcing(om, w)
    ctrl = weak_convergence_experiment([om] * cfg.ell_max, [f + gpert * (1.0 / ell) for ell in ells],
                                       om, f, panel, base_size)
    slope = loglog_slope(ctrl.ell, ctrl.limit_residuals)
    const = weak_convergence_experiment([om] * 3, [f] * 3, om, f, panel, base_size)
    checks = {
        "uniform_bound<=2x": main.uniform_bound_ratio <= UNIFORM_BOUND,
        "tail_spread<=head/2": main.tail_spread <= 0.5 * main.head_spread,
        "control_decreasing": all(b < a for a, b in zip(ctrl.limit_residuals, ctrl.limit_residuals[1:])),
        "control_slope=-1+-0.3": abs(slope - SLOPE_TARGET) <= SLOPE_TOL,
        "no_failures": not (main.partial or ctrl.partial),
    }
    metrics = {
        "uniform_bound_ratio": main.uniform_bound_ratio,
        "head_spread": main.head_spread,
        "tail_spread": main.tail_spread,
        "rows": main.rows(),
        "cesaro_last": [float(v) for v in main.cesaro_functionals[-1]] if len(main.cesaro_functionals) else [],
        "control_limit_residuals": ctrl.limit_residuals,
        "control_slope": slope,
        "constant_sequence_spread": const.head_spread,
        "base_size": base_size,
        "failures": main.failures + ctrl.failures,
    }
    arts = []
    if cfg.format in ("csv", "both"):
        flat = [{"ell": r["ell"], "size": r["size"], "omega_norm": r["omega_norm"],
                 "limit_residual": r["limit_residual"]} for r in main.rows()]
        arts.append(rows_to_csv(flat, out / "weakconv.csv"))
    return metrics, checks, arts


# -- cut-off and localization --------------------------------------------------

def run_cutoff(cfg: RunConfig, out: Path) -> tuple:
    seq = cutoff_table(tuple(cfg.k_values), cfg.refinement)
    rows = [c.row() for c in seq]
    semis = [r["seminorm"] for r in rows]
    checks = {
        "strictly_decreasing": all(b < a for a, b in zip(semis, semis[1:])),
        "last_over_first<0.9": semis[-1] / semis[0] < CUTOFF_RATIO,
        "values_in_[0,1]": all(c.values.min() >= 0 and c.values.max() <= 1 for c in seq),
    }
    arts = [rows_to_csv(rows, out / "cutoff.csv", ["k", "rho", "R", "seminorm"])]
    return {"rows": rows, "ratio_last_first": semis[-1] / semis[0]}, checks, arts


def run_localize(cfg: RunConfig, out: Path) -> tuple:
    g = _grid(cfg)
    N, L = cfg.N, g.L
    om = random_antisymmetric_omega(g, cfg.seed, N, cfg.omega_norm, cfg.smoothness)
    u = random_smooth_field(g, cfg.seed, (N,))
    panel = test_panel(g, cfg.seed, (N,))
    W = windows_from_intervals(g, (-0.3 * L, 0.3 * L), (-0.5 * L, 0.5 * L), (-0.7 * L, 0.7 * L))
    f = local_forcing(u, om, W.D)
    parts = localize(u, om, f, W, panel=panel)

    everything = np.arange(g.M)
    Wfull = Windows(everything, everything, everything)
    full = localize(u, om, manufactured_forcing(om, u), Wfull, eta=Field(g, np.ones(g.M)),
                    panel=panel, bound=False)
    uc = Field(g, np.ones((g.M, N)))
    const = localize(uc, om, Field(g, np.zeros((g.M, N))), W, panel=panel, bound=False)
    norms = []
    for frac in (0.6, 0.5, 0.4, 0.3):
        Wk = windows_from_intervals(g, (-0.3 * L, 0.3 * L), (-frac * L, frac * L), (-0.7 * L, 0.7 * L))
        norms.append(norm_odform_lp(localize(u, om, f, Wk, panel=panel[:1], bound=False).omega_tilde, 2))
    checks = {
        "four_term_match<=1e-11": parts.matched,
        "no_localization_G=0": float(np.abs(full.G).max()) <= EXACT_TOL * full.scale,
        "constant_u_match": const.matched,
        "restriction_monotone": all(b <= a for a, b in zip(norms, norms[1:])),
    }
    metrics = {
        "main": parts.summary(),
        "G": parts.G.tolist(),
        "G1": parts.G1.tolist(), "G2": parts.G2.tolist(), "G3": parts.G3.tolist(), "G4": parts.G4.tolist(),
        "bound_terms": parts.bound_terms,
        "no_localization": full.summary(),
        "constant_u": const.summary(),
        "restricted_norms": norms,
    }
    arts = []
    if cfg.format in ("csv", "both"):
        rows = [{"phi": i, "G": parts.G[i], "G1": parts.G1[i], "G2": parts.G2[i], "G3": parts.G3[i],
                 "G4": parts.G4[i]} for i in range(len(parts.G))]
        arts.append(rows_to_csv(rows, out / "localize.csv", ["phi", "G", "G1", "G2", "G3", "G4"]))
    return metrics, checks, arts


PIPELINES = {
    "ops-check": run_ops_check,
    "hodge": run_hodge,
    "gauge": run_gauge,
    "conserve": run_conserve,
    "weakconv": run_weakconv,
    "cutoff": run_cutoff,
    "localize": run_localize,
    "sweep": run_sweep,
}


def run_experiment(cfg: RunConfig, write: bool = True) -> RunReport:
    """Run the selected pipeline with BLAS pinned to one thread and write ``report.json``."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        metrics, checks, arts = PIPELINES[cfg.experiment](cfg, out)
    wall = time.perf_counter() - t0
    checks = {k: bool(v) for k, v in checks.items()}
    rep = RunReport(config=cfg.to_dict(), experiment=cfg.experiment, metrics=metrics, checks=checks,
                    passed=all(checks.values()), wall_clock=wall, artifacts=[str(a) for a in arts])
    if write:
        path = write_json(rep.to_dict(), out / "report.json")
        rep.artifacts.append(str(path))
    return rep
