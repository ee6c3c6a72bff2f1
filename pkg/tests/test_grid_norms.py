"""Grid geometry, field containers and norms against brute-force oracles."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlgauge.grid import Field, GridError, OdForm, make_grid, zero_form
from nlgauge.norms import (norm_l2_plus_linf, norm_lp_field, norm_odform_lp, osc,
                           sobolev_seminorm)
from conftest import brute_pairs


def test_two_point_grid():
    g = make_grid(1.0, 2)
    assert np.allclose(g.x, [-1.0, 0.0])
    assert g.distance[0, 1] == 1.0
    assert g.mu[0, 1] == 1.0
    assert g.mu[0, 0] == 0.0


def test_periodic_min_image():
    g = make_grid(math.pi, 8, "periodic_torus", 3)
    assert np.isclose(g.distance[0, 7], g.h)
    # image folding shortens the effective distance relative to the min-image one
    assert g.rdist[0, 7] < g.distance[0, 7]
    assert np.allclose(g.rdist, g.rdist.T)


def test_measure_sum_matches_hand_sum():
    g = make_grid(1.0, 4)
    x = -1.0 + 0.5 * np.arange(4)
    total = sum(0.25 / abs(x[i] - x[j]) for i, j in brute_pairs(4))
    assert np.isclose(g.mu.sum(), total, rtol=1e-15)


def test_mu_symmetric():
    for geom, im in (("truncated_line", 0), ("periodic_torus", 5)):
        g = make_grid(2.0, 11, geom, im)
        assert np.array_equal(g.mu, g.mu.T)


@pytest.mark.parametrize("L,M", [(0.0, 4), (-1.0, 4), (1.0, 1)])
def test_bad_grid(L, M):
    with pytest.raises(GridError):
        make_grid(L, M)


def test_pair_cap():
    with pytest.raises(GridError):
        make_grid(1.0, 100, pair_cap=1000)


def test_field_validation(grid16):
    with pytest.raises(GridError):
        Field(grid16, np.zeros(5))
    bad = np.zeros(16)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        Field(grid16, bad)
    u = Field(grid16, np.zeros(16))
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_orthogonal_flag(grid16):
    t = np.linspace(0, 1, 16)
    R = np.stack([[[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]] for a in t])
    assert Field(grid16, R).is_special_orthogonal()
    assert not Field(grid16, 1.1 * R).is_special_orthogonal()


def test_star_involution_and_symmetric(grid16, rng):
    F = OdForm(grid16, rng.standard_normal((16, 16, 2, 2)))
    assert np.array_equal(F.star().star().kernel, F.kernel)
    S = rng.standard_normal((16, 16))
    S = OdForm(grid16, S + S.T)
    assert np.array_equal(S.star().kernel, S.kernel)
    assert np.isclose(norm_odform_lp(F, 2), norm_odform_lp(F.star(), 2), rtol=1e-14)


def test_diagonal_is_zeroed(grid16, rng):
    F = OdForm(grid16, rng.standard_normal((16, 16)))
    assert np.all(np.diag(F.kernel) == 0)


def test_antisymmetry_defect(grid16, rng):
    K = rng.standard_normal((16, 16, 3, 3))
    assert OdForm(grid16, K - np.swapaxes(K, 2, 3)).antisymmetry_defect() == 0.0
    assert OdForm(grid16, K).antisymmetry_defect() > 0.1


# -- norms ----------------------------------------------------------------------

def test_l2_plus_linf_zero(grid16):
    rep = norm_l2_plus_linf(Field(grid16, np.zeros(16)))
    assert rep.value == 0.0 and rep.threshold == 0.0


def test_l2_plus_linf_spike_matches_scan():
    g = make_grid(1.0, 400)
    v = np.zeros(400)
    v[7] = 1.0
    rep = norm_l2_plus_linf(Field(g, v))
    # oracle: direct scan with step 1e-4
    ts = np.arange(0.0, 1.0 + 1e-12, 1e-4)
    scan = np.min(ts + np.maximum(1.0 - ts, 0.0) * math.sqrt(g.h))
    assert np.isclose(rep.value, math.sqrt(g.h), rtol=1e-10)
    assert rep.value <= scan + 1e-12


def test_l2_plus_linf_constant_absorbed():
    g = make_grid(500.0, 1000)
    rep = norm_l2_plus_linf(Field(g, 3.0 * np.ones(1000)))
    assert np.isclose(rep.value, 3.0, rtol=1e-12)
    assert np.isclose(rep.threshold, 3.0, rtol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 5.0))
def test_l2_plus_linf_below_both(seed, scale):
    g = make_grid(1.0, 24)
    u = Field(g, scale * np.random.default_rng(seed).standard_normal((24, 2)))
    rep = norm_l2_plus_linf(u)
    assert 0.0 <= rep.value <= min(norm_lp_field(u, 2), norm_lp_field(u, np.inf)) + 1e-12


def test_odform_norm_brute_force(rng):
    g = make_grid(1.0, 3)
    F = OdForm(g, rng.standard_normal((3, 3)))
    x = g.x
    total = sum(g.h ** 2 / abs(x[i] - x[j]) * F.kernel[i, j] ** 2 for i, j in brute_pairs(3))
    assert abs(norm_odform_lp(F, 2) - math.sqrt(total)) <= 1e-14 * math.sqrt(total)


def test_odform_norm_zero_and_full_restriction(grid16, rng):
    assert norm_odform_lp(zero_form(grid16), 2) == 0.0
    F = OdForm(grid16, rng.standard_normal((16, 16)))
    assert norm_odform_lp(F, 3, restrict_to=np.arange(16)) == norm_odform_lp(F, 3)
    with pytest.raises(ValueError):
        norm_odform_lp(F, 2, restrict_to=[])


def test_restriction_brute_force(rng):
    g = make_grid(1.0, 6)
    F = OdForm(g, rng.standard_normal((6, 6)))
    D = {1, 2}
    total = sum(g.mu[i, j] * F.kernel[i, j] ** 2 for i, j in brute_pairs(6) if i in D or j in D)
    assert np.isclose(norm_odform_lp(F, 2, restrict_to=list(D)), math.sqrt(total), rtol=1e-14)


@pytest.mark.parametrize("s,p", [(0.5, 2.0), (0.25, 3.0), (0.75, 1.5)])
def test_seminorm_brute_force(s, p, rng):
    g = make_grid(1.3, 4)
    u = rng.standard_normal(4)
    x = g.x
    total = sum(abs(u[i] - u[j]) ** p / abs(x[i] - x[j]) ** (1 + s * p) * g.h ** 2 for i, j in brute_pairs(4))
    val = sobolev_seminorm(Field(g, u), s, p)
    assert abs(val - total ** (1 / p)) <= 1e-13 * total ** (1 / p)


def test_seminorm_m16_brute_force(rng):
    g = make_grid(2.0, 16)
    u = rng.standard_normal(16)
    x = g.x
    total = sum((u[i] - u[j]) ** 2 / (x[i] - x[j]) ** 2 * g.h ** 2 for i, j in brute_pairs(16))
    assert abs(sobolev_seminorm(Field(g, u), 0.5) ** 2 - total) <= 1e-13 * total


def test_seminorm_constant_and_translation(grid16, rng):
    assert sobolev_seminorm(Field(grid16, np.full(16, 4.0)), 0.5) == 0.0
    u = rng.standard_normal(16)
    a = sobolev_seminorm(Field(grid16, u), 0.3)
    b = sobolev_seminorm(Field(grid16, u + 7.0), 0.3)
    assert np.isclose(a, b, rtol=1e-13)


def test_osc(grid16):
    v = np.zeros((16, 2))
    v[3, 1] = 2.0
    v[5, 1] = -1.0
    assert osc(Field(grid16, v)) == 3.0
