"""Seeded random problem generation.

All draws go through a Philox counter-based generator, so a 64-bit seed
reproduces the same instance on every platform.  Independent streams for
different purposes (potential, solution, test panel) are derived from the
run seed with a fixed ``stream`` tag.
"""
from __future__ import annotations

import numpy as np

from .grid import Field, GridSpec, OdForm
from .norms import norm_odform_lp

STREAM_OMEGA = 1
STREAM_FIELD = 2
STREAM_PANEL = 3
STREAM_AUX = 4

PANEL_SIZE = 16


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    # explicit uint64: a plain list would round-trip large seeds through float64
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def random_antisymmetric_omega(grid: GridSpec, seed: int, N: int, norm_target: float,
                               smoothness: int = 3, stream: int = STREAM_OMEGA) -> OdForm:
    """``sum_m c_m alpha_m(x) beta_m(y) K_m`` scaled to ``||Omega||_{L2} = norm_target``.

    ``alpha_m, beta_m`` are Gaussian bumps with random centres and widths,
    ``K_m`` random antisymmetric ``N x N`` matrices and ``smoothness`` the
    number of modes.
    """
    if norm_target <= 0:
        raise ValueError("norm_target must be positive")
    if N < 1 or smoothness < 1:
        raise ValueError("N and smoothness must be >= 1")
    rng = rng_for(seed, stream)
    x, L = grid.x, grid.L
    k = np.zeros((grid.M, grid.M, N, N))
    for _ in range(smoothness):
        G = rng.standard_normal((N, N))
        K = G - G.T
        c = rng.standard_normal()
        cx, cy = rng.uniform(-0.5 * L, 0.5 * L, 2)
        wx, wy = rng.uniform(0.2, 0.6, 2) * L
        a = np.exp(-((x - cx) / wx) ** 2)
        b = np.exp(-((x - cy) / wy) ** 2)
        k += c * a[:, None, None, None] * b[None, :, None, None] * K
    F = OdForm(grid, k)
    n = norm_odform_lp(F, 2)
    if n == 0.0:
        # N = 1 has no nonzero antisymmetric matrices
        return F
    return F * (norm_target / n)


def random_smooth_field(grid: GridSpec, seed: int, channel_shape: tuple = (), modes: int = 4,
                        stream: int = STREAM_FIELD) -> Field:
    """Sum of Gaussian bumps with random amplitudes, decaying towards the ends."""
    rng = rng_for(seed, stream)
    x, L = grid.x, grid.L
    out = np.zeros((grid.M,) + tuple(channel_shape))
    for _ in range(modes):
        amp = rng.standard_normal(tuple(channel_shape))
        c = rng.uniform(-0.5 * L, 0.5 * L)
        w = rng.uniform(0.15, 0.4) * L
        prof = np.exp(-((x - c) / w) ** 2)
        out += prof.reshape((-1,) + (1,) * len(channel_shape)) * amp
    return Field(grid, out)


def test_panel(grid: GridSpec, seed: int, channel_shape: tuple = (), size: int = PANEL_SIZE,
               stream: int = STREAM_PANEL) -> list:
    """Fixed panel of smooth test fields: one bump each with a random unit direction."""
    rng = rng_for(seed, stream)
    x, L = grid.x, grid.L
    panel = []
    for _ in range(size):
        c = rng.uniform(-0.6 * L, 0.6 * L)
        w = rng.uniform(0.1, 0.3) * L
        d = rng.standard_normal(tuple(channel_shape))
        nrm = np.sqrt(np.sum(d * d))
        d = d / nrm if nrm > 0 else np.ones(tuple(channel_shape))
        prof = np.exp(-((x - c) / w) ** 2)
        panel.append(Field(grid, prof.reshape((-1,) + (1,) * len(channel_shape)) * d))
    return panel


test_panel.__test__ = False  # not a pytest test


def random_rotation_field(grid: GridSpec, seed: int, N: int, amplitude: float = 0.3,
                          stream: int = STREAM_AUX) -> Field:
    """Smooth SO(N)-valued field ``expm(amplitude * smooth skew field)``."""
    from scipy.linalg import expm

    S = random_smooth_field(grid, seed, (N, N), stream=stream).values
    S = amplitude * (S - np.swapaxes(S, 1, 2))
    return Field(grid, np.stack([expm(s) for s in S]))


def random_invertible_field(grid: GridSpec, seed: int, N: int, amplitude: float = 0.3,
                            stream: int = STREAM_AUX) -> Field:
    """``I + amplitude * smooth`` with the perturbation scaled below 1 in spectral norm."""
    S = random_smooth_field(grid, seed, (N, N), stream=stream).values
    top = max(np.linalg.norm(S, 2, axis=(1, 2)).max(), 1e-300)
    return Field(grid, np.eye(N) + (min(amplitude, 0.9) / top) * S)
