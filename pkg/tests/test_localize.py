"""Localization identity: direct remainder against the four-term decomposition."""
import numpy as np
import pytest

from nlgauge.grid import Field, OdForm, make_grid
from nlgauge.localize import (WindowError, Windows, bump, local_forcing, local_residual, localize,
                              windows_from_intervals)
from nlgauge.norms import norm_odform_lp
from nlgauge.problems import random_antisymmetric_omega, random_smooth_field, test_panel
from nlgauge.system import manufactured_forcing


@pytest.fixture
def setup():
    g = make_grid(1.0, 40)
    om = random_antisymmetric_omega(g, 1, 2, 0.05)
    u = random_smooth_field(g, 1, (2,))
    W = windows_from_intervals(g, (-0.3, 0.3), (-0.5, 0.5), (-0.7, 0.7))
    return g, om, u, W, test_panel(g, 1, (2,))


def test_four_term_match(setup):
    g, om, u, W, panel = setup
    f = local_forcing(u, om, W.D)
    assert np.abs(local_residual(u, om, f, W.D)).max() <= 1e-12
    p = localize(u, om, f, W, panel=panel)
    assert not p.skipped and p.matched
    assert np.allclose(p.G, p.four_term, rtol=0, atol=1e-11 * p.scale)
    assert p.bound_ratio is not None and p.bound_ratio > 0


def test_no_localization(setup):
    g, om, u, _, panel = setup
    every = np.arange(g.M)
    p = localize(u, om, manufactured_forcing(om, u), Windows(every, every, every),
                 eta=Field(g, np.ones(g.M)), panel=panel)
    assert np.array_equal(p.omega_tilde.kernel, om.kernel)
    assert np.abs(p.G).max() <= 1e-11 * p.scale


def test_constant_u(setup):
    g, om, _, W, panel = setup
    uc = Field(g, np.ones((g.M, 2)))
    p = localize(uc, om, Field(g, np.zeros((g.M, 2))), W, panel=panel)
    assert p.matched
    # d v = const * d eta, so G is carried by the cut-off cross terms
    assert np.abs(p.G).max() > 0
    assert np.allclose(p.G, p.G1 + p.G2 + p.G3 + p.G4, rtol=0, atol=1e-11 * p.scale)


def test_skips_when_equation_fails(setup):
    g, om, u, W, panel = setup
    p = localize(u, om, Field(g, np.zeros((g.M, 2))), W, panel=panel)
    assert p.skipped and p.match_defect is None and not p.matched


def test_restriction_monotone(setup):
    g, om, u, _, panel = setup
    f = manufactured_forcing(om, u)
    norms = []
    for w in (0.6, 0.5, 0.4, 0.3):
        W = windows_from_intervals(g, (-0.2, 0.2), (-w, w), (-0.7, 0.7))
        norms.append(norm_odform_lp(localize(u, om, f, W, panel=panel[:1], bound=False).omega_tilde, 2))
    assert all(b <= a for a, b in zip(norms, norms[1:]))
    assert norms[0] <= norm_odform_lp(om, 2)


def test_windows_validation():
    with pytest.raises(WindowError):
        Windows(np.arange(5), np.arange(3), np.arange(10))
    with pytest.raises(WindowError):
        Windows([], [1], [1])


def test_bump_support():
    g = make_grid(1.0, 40)
    W = windows_from_intervals(g, (-0.3, 0.3), (-0.5, 0.5), (-0.7, 0.7))
    eta = bump(g, W.D1).values
    outside = np.ones(g.M, bool)
    outside[W.D1] = False
    assert np.all(eta[outside] == 0) and eta.max() <= 1.0
    assert W.strict
