import json

import numpy as np
import pytest

from mtfatom.current import (
    CurrentReport,
    TestField as Field,
    closed_form_current,
    current_integrand_monte_carlo,
    d_alpha,
    d_alpha_monte_carlo,
    residual_ok,
    split_current,
)
from mtfatom.radial import RadialGrid, direct_energy
from mtfatom.scales import cal_E
from mtfatom.solver import MtfProblem, solve


@pytest.fixture(scope="module")
def sol():
    Z = 10.0
    return solve(MtfProblem(N=Z, Z=Z, B=100.0 * Z ** (4 / 3)))


@pytest.fixture(scope="module")
def grid():
    return RadialGrid.log(1e-4, 50.0, 1200)


def fields(scale):
    return [
        Field("constant", amplitude=0.7),
        Field("bump", radius=2.0 * scale, amplitude=1.3),
        Field("polynomial", radius=3.0 * scale, amplitude=0.5),
    ]


@pytest.mark.parametrize("profile", ["constant", "bump", "polynomial"])
def test_b3_is_curl_of_a(profile):
    f = Field(profile, radius=1.5, amplitude=0.8)
    rng = np.random.default_rng(3)
    x = rng.uniform(-1.2, 1.2, size=(200, 3))
    h = 1e-5
    e1, e2 = np.array([h, 0, 0]), np.array([0, h, 0])
    d1a2 = (f.a(x + e1)[:, 1] - f.a(x - e1)[:, 1]) / (2 * h)
    d2a1 = (f.a(x + e2)[:, 0] - f.a(x - e2)[:, 0]) / (2 * h)
    np.testing.assert_allclose(f.b3(x), d1a2 - d2a1, atol=1e-7)
    assert np.all(f.a(x)[:, 2] == 0.0)
    np.testing.assert_allclose(f.a_tilde(x)[:, :2], np.stack([-f.a(x)[:, 1], f.a(x)[:, 0]], 1))


@pytest.mark.parametrize("profile", ["constant", "bump", "polynomial"])
def test_b3_sphere_average(profile):
    f = Field(profile, radius=1.5, amplitude=0.8)
    mu, w = np.polynomial.legendre.leggauss(64)
    for r in (0.1, 0.7, 1.3):
        pts = np.stack([r * np.sqrt(1 - mu**2), np.zeros_like(mu), r * mu], 1)
        avg = 0.5 * np.dot(w, f.b3(pts))
        assert f.b3_average(np.array([r]))[0] == pytest.approx(avg, rel=1e-12, abs=1e-14)


def test_invalid_fields():
    with pytest.raises(ValueError):
        Field("gaussian")
    with pytest.raises(ValueError):
        Field("bump", radius=-1.0)


def test_zero_field_gives_zero(sol):
    rep = split_current(sol, Field("bump", radius=1.0, amplitude=0.0))
    assert rep.closed_form == rep.j_kin == rep.j_int == rep.j_dens == 0.0
    assert closed_form_current(sol, Field("constant", amplitude=0.0)) == 0.0


def test_splitting_identity(sol):
    p = sol.problem
    scale = sol.rho.grid.r_max / 50.0
    for f in fields(scale):
        rep = split_current(sol, f)
        assert abs(rep.residual) < 1e-3 * cal_E(p.Z, p.B)
        assert residual_ok(rep, p.Z, p.B)
        assert rep.quad_error < 1e-3 * cal_E(p.Z, p.B)


def test_linearity_in_profile(sol):
    scale = sol.rho.grid.r_max / 50.0
    one = split_current(sol, Field("bump", radius=2 * scale, amplitude=1.0))
    three = split_current(sol, Field("bump", radius=2 * scale, amplitude=3.0))
    for key in ("closed_form", "j_kin", "j_int", "j_dens"):
        assert getattr(three, key) == pytest.approx(3 * getattr(one, key), rel=1e-13)


def test_closed_form_against_monte_carlo(sol):
    # rigid rotation: b3 = 2 everywhere
    f = Field("constant", amplitude=1.0)
    value = closed_form_current(sol, f)
    mc, se = current_integrand_monte_carlo(sol, f, n=8_000_000, seed=11)
    assert abs(value - mc) < 4 * se
    assert se < 1e-3 * abs(value)
    bump = Field("bump", radius=2 * sol.rho.grid.r_max / 50, amplitude=1.0)
    mc, se = current_integrand_monte_carlo(sol, bump, n=400_000, seed=12)
    assert abs(closed_form_current(sol, bump) - mc) < 4 * se


def test_d_alpha_uniform_ball(grid):
    k = int(np.searchsorted(grid.r, 1.0))
    R = float(np.sqrt(grid.r[k - 1] * grid.r[k]))
    rho = grid.function(np.where(grid.r < R, 3 / (4 * np.pi * R**3), 0.0))
    # g = 1, Q = 1: -(2/3) int rho Q(r) / r = -(2/5) / R
    val, err = d_alpha(rho, rho, Field("constant"))
    assert val == pytest.approx(-0.4 / R, rel=5e-4)


def gaussian(grid, c, w, m):
    vals = np.exp(-(((grid.r - c) / w) ** 2))
    f = grid.function(vals)
    return grid.function(vals * m / f.integrate())


def test_d_alpha_trivial_and_symmetric(grid):
    a = gaussian(grid, 0.5, 0.4, 1.0)
    b = gaussian(grid, 1.5, 0.8, 2.0)
    zero = grid.function(np.zeros(grid.n))
    f = Field("bump", radius=3.0)
    assert d_alpha(a, zero, f)[0] == 0.0
    ab, ba = d_alpha(a, b, f)[0], d_alpha(b, a, f)[0]
    assert abs(ab - ba) <= 1e-12 * abs(ab)


def test_d_alpha_against_monte_carlo(grid):
    rho = gaussian(grid, 0.6, 0.5, 1.0)
    for f in (Field("constant", amplitude=1.0), Field("polynomial", radius=1.5)):
        val, err = d_alpha(rho, rho, f)
        mc, se = d_alpha_monte_carlo(rho, f, n=8_000_000, seed=5)
        assert abs(val - mc) < 4 * se
        assert se < 1e-3 * abs(val)


def test_d_alpha_bounded_by_direct_energy(grid):
    rng = np.random.default_rng(2024)
    f = Field("bump", radius=2.0, amplitude=1.0)
    r = np.linspace(1e-6, 2.0, 20001)
    lip = float(np.max(np.abs(f.g(r)) + r * np.abs(f.dg(r))))
    ratios = []
    for _ in range(10):
        parts = rng.uniform([0.0, 0.1, 0.1], [2.0, 1.0, 3.0], size=(3, 3))
        vals = sum(m * np.exp(-(((grid.r - c) / w) ** 2)) for c, w, m in parts)
        rho = grid.function(vals)
        ratios.append(abs(d_alpha(rho, rho, f)[0]) / direct_energy(rho, rho))
    ratios = np.array(ratios)
    print("d_alpha / D ratios:", np.array2string(ratios, precision=4))
    assert np.all(ratios <= lip)
    assert np.all(ratios > 0)


def test_errors(sol, grid):
    with pytest.raises(ValueError):
        d_alpha(sol.rho, sol.rho, Field("bump", radius=1.0, form="helical"))
    with pytest.raises(ValueError):
        split_current(sol, Field("bump", radius=10 * sol.rho.grid.r_max))
    other = gaussian(grid, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        d_alpha(sol.rho, other, Field("constant"))


def test_report_serialisation(sol):
    rep = split_current(sol, Field("bump", radius=2 * sol.rho.grid.r_max / 50))
    data = json.loads(rep.to_json())
    assert list(data) == ["closed_form", "j_kin", "j_int", "j_dens", "residual", "quad_error"]
    assert CurrentReport(**data) == rep
