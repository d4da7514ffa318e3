import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtfatom.landau import (
    Bump,
    J1Spec,
    LandauBasis,
    PlaneGrid,
    commutator_check,
    cutoff_bump,
    cutoff_norm,
    j1_lll_matrix,
    kernel_mass,
    lt_check_1d,
    project_lll,
    schur_commutator_constant,
    well_potential,
    write_report,
)

SQRT_PI2 = 2 * math.sqrt(math.pi)


@pytest.fixture(scope="module")
def small():
    # B = 1 with room for a handful of states
    return LandauBasis(1.0, 2)


@pytest.fixture(scope="module")
def basis6():
    return LandauBasis(1.0, 6)


def packet(grid, c1, c2, s, k1=0.0, k2=0.0):
    x1, x2 = grid.mesh()
    return np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2 * s * s) + 1j * (k1 * x1 + k2 * x2))


def test_basis_orthonormal(basis6):
    G = basis6.gram()
    assert np.max(np.abs(G - np.eye(7))) < 1e-8
    assert basis6.grid.n >= 200
    assert basis6.grid.R == pytest.approx(8 * math.sqrt(7))


def test_lowering_and_raising(basis6):
    x1, x2 = basis6.grid.mesh()
    g = basis6.grid
    B = basis6.B
    for m in range(7):
        assert g.norm(basis6.lower(m, x1, x2)) < 1e-8
        # |a* psi|^2 = <psi, a a* psi> = <psi, (a* a + 2B) psi> = 2B
        assert g.norm(basis6.raise_(m, x1, x2)) == pytest.approx(math.sqrt(2 * B), rel=1e-8)


def test_p_A_matches_finite_differences(basis6):
    B = basis6.B
    rng = np.random.default_rng(1)
    x1, x2 = rng.uniform(-3, 3, size=(2, 50))
    h = 1e-5
    for m in (0, 3):
        psi = lambda a, b: basis6.psi(m, a, b)
        d1 = (psi(x1 + h, x2) - psi(x1 - h, x2)) / (2 * h)
        d2 = (psi(x1, x2 + h) - psi(x1, x2 - h)) / (2 * h)
        p1 = -1j * d1 - 0.5 * B * x2 * psi(x1, x2)
        p2 = -1j * d2 + 0.5 * B * x1 * psi(x1, x2)
        q1, q2 = basis6.p_A(m, x1, x2)
        np.testing.assert_allclose(q1, p1, atol=1e-8)
        np.testing.assert_allclose(q2, p2, atol=1e-8)


def test_projector_fixed_point_and_annihilation(small):
    g = small.grid
    x1, x2 = g.mesh()
    psi0 = small.states[0]
    assert g.norm(project_lll(1.0, psi0, g) - psi0) < 1e-8
    up = small.raise_(0, x1, x2)
    assert g.norm(project_lll(1.0, up, g)) < 1e-6 * g.norm(up)


def test_projector_against_basis_expansion():
    # kernel quadrature versus sum_m psi_m <psi_m, f> over many states
    big = LandauBasis(1.0, 40, grid=PlaneGrid.for_basis(1.0, 2))
    g = big.grid
    f = packet(g, 0.8, -0.5, 0.9, 0.6, 0.2)
    flat = big.states.reshape(41, -1)
    coef = flat.conj() @ f.reshape(-1) * g.h**2
    expand = (coef @ flat).reshape(f.shape)
    proj = project_lll(1.0, f, g)
    assert g.norm(proj - expand) < 1e-8 * g.norm(f)


def test_projector_idempotent(small):
    g = small.grid
    f = packet(g, 0.5, 0.3, 1.1, -0.4, 0.9) + 0.5 * packet(g, -1.0, 0.8, 0.7)
    once = project_lll(1.0, f, g)
    twice = project_lll(1.0, once, g)
    assert g.norm(twice - once) < 1e-8 * g.norm(f)


@settings(max_examples=5, deadline=None)
@given(
    c=st.tuples(st.floats(-2, 2), st.floats(-2, 2)),
    s=st.floats(0.4, 1.5),
    k=st.tuples(st.floats(-2, 2), st.floats(-2, 2)),
)
def test_projector_is_contraction(basis6, c, s, k):
    g = basis6.grid
    f = packet(g, c[0], c[1], s, k[0], k[1])
    assert g.norm(project_lll(1.0, f, g)) <= g.norm(f) + 1e-10


def test_projector_refuses_bad_grids(small):
    g = small.grid
    with pytest.raises(ValueError):
        project_lll(1.0, np.ones((50, 50)), PlaneGrid(g.R, 50))
    edge = packet(g, g.R - 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        project_lll(1.0, edge, g)


def test_schur_constant():
    out = schur_commutator_constant(1.0)
    assert abs(out["value"] - SQRT_PI2) < 1e-6
    four = schur_commutator_constant(4.0)
    # dimensional bound scales with the magnetic length B^{-1/2}
    assert four["value"] == pytest.approx(out["value"] / 2, rel=1e-10)
    assert kernel_mass(1.0) == pytest.approx(2.0, rel=1e-10)
    assert kernel_mass(4.0) == pytest.approx(2.0, rel=1e-10)


def test_schur_constant_by_cartesian_quadrature():
    # |Pi0(x, y)| |x - y| summed over y for an off-centre x
    B = 1.0
    x = np.array([0.7, -0.3])
    ax = np.linspace(-25, 25, 1001)
    h = ax[1] - ax[0]
    y1, y2 = np.meshgrid(ax, ax, indexing="ij")
    phase = np.exp(0.5j * B * (x[0] * y2 - x[1] * y1))
    d2 = (x[0] - y1) ** 2 + (x[1] - y2) ** 2
    K = B / (2 * math.pi) * phase * np.exp(-B * d2 / 4)
    val = float(np.sum(np.abs(K) * np.sqrt(d2)) * h * h)
    # the |x - y| cusp limits the plain Cartesian rule
    assert val == pytest.approx(schur_commutator_constant(B)["value"], rel=1e-5)


def zero_bump():
    return Bump(((0.0, 0.0),), (1.0,), (0.0,))


def test_j1_zero_spec(basis6):
    z = zero_bump()
    mat, _ = j1_lll_matrix(basis6, J1Spec(z, z, z))
    assert np.all(mat == 0)


def test_j1_vanishes_under_constraints(basis6):
    rng = np.random.default_rng(42)
    x1, x2 = basis6.grid.mesh()
    for _ in range(3):
        spec = J1Spec.random(1.0, rng)
        mat, viol = j1_lll_matrix(basis6, spec)
        scale = basis6.B * float(np.max(np.abs(spec.b3(x1, x2))))
        assert viol < 1e-14
        assert np.max(np.abs(mat)) < 1e-6 * scale
        # conjugate symmetry
        assert np.max(np.abs(mat - mat.conj().T)) < 1e-12 * scale


def test_j1_detects_broken_trace(basis6):
    rng = np.random.default_rng(42)
    x1, x2 = basis6.grid.mesh()
    spec = J1Spec.random(1.0, rng, trace_scale=1.1)
    mat, viol = j1_lll_matrix(basis6, spec)
    scale = basis6.B * float(np.max(np.abs(spec.b3(x1, x2))))
    assert viol == pytest.approx(0.1, rel=1e-12)
    assert np.max(np.abs(mat)) > 1e-3 * scale


def test_bump_laplacian():
    rng = np.random.default_rng(5)
    b = Bump.random(rng, 3, 1.0, 1.5)
    x1, x2 = rng.uniform(-2, 2, size=(2, 100))
    h = 1e-4
    fd = (b(x1 + h, x2) + b(x1 - h, x2) + b(x1, x2 + h) + b(x1, x2 - h) - 4 * b(x1, x2)) / h**2
    np.testing.assert_allclose(b.laplacian(x1, x2), fd, atol=1e-5 * np.max(np.abs(fd)))


def test_commutator_bound_few_pairs(basis6):
    rows = commutator_check(1.0, basis6.grid, np.random.default_rng(9), pairs=3)
    assert all(r["holds"] for r in rows)
    assert all(0 < r["ratio"] < 1 for r in rows)


def test_lt_zero_potential():
    x = np.linspace(-10, 10, 2001)
    out = lt_check_1d(np.zeros_like(x), x)
    assert out["sum_neg_eigs"] == 0.0 and out["bound"] == 0.0 and out["satisfied"]


@pytest.mark.parametrize("depth", [1.0, 5.0, 25.0])
def test_lt_square_wells(depth):
    x = np.linspace(-30, 30, 12001)
    out = lt_check_1d(well_potential(x, depth), x)
    assert out["satisfied"]
    assert out["slack"] >= 0
    assert out["count"] >= 1


def test_lt_deep_well_approaches_weyl_constant():
    x = np.linspace(-6, 6, 12001)
    ratios = [lt_check_1d(well_potential(x, d), x)["ratio"] for d in (25.0, 100.0, 400.0)]
    weyl = 1 / (2 * math.pi)
    gaps = [abs(r - weyl) for r in ratios]
    assert gaps[0] > gaps[1] > gaps[2]
    assert all(r < 1 for r in ratios)
    assert gaps[2] < 0.1 * weyl


def test_lt_errors():
    x = np.linspace(-1.5, 1.5, 301)
    with pytest.raises(ValueError):
        lt_check_1d(well_potential(x, 5.0), x)
    x = np.array([0.0, 1.0, 3.0])
    with pytest.raises(ValueError):
        lt_check_1d(np.zeros(3), x)


def test_cutoff_bump_shape():
    t = np.linspace(-3, 3, 6001)
    f = cutoff_bump(t)
    assert np.all(f[np.abs(t) <= 1] == 1.0)
    assert np.all(f[np.abs(t) >= 2] == 0.0)
    assert cutoff_bump(1.5) == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_array_equal(f, cutoff_bump(-t))
    assert np.all(np.diff(f[t >= 0]) <= 0)


def test_cutoff_norm_multiplication_limit():
    gaps = [1.0 - cutoff_norm(g, 1.0)["norm"] for g in (30.0, 100.0, 300.0)]
    assert gaps[0] > gaps[1] > gaps[2] >= 0
    assert gaps[2] < 1e-4


def test_cutoff_norm_depends_on_a_gamma_only():
    one = cutoff_norm(0.3, 0.5)
    two = cutoff_norm(0.6, 0.25)
    assert one["bound_ratio"] == pytest.approx(two["bound_ratio"], rel=1e-6)


def test_cutoff_norm_monotone_in_gamma():
    a = 0.3
    norms = [cutoff_norm(g, a)["norm"] for g in (3.0, 1.0, 0.3, 0.1)]
    assert all(n > 0 for n in norms)
    assert all(x >= y for x, y in zip(norms, norms[1:]))


def test_cutoff_norm_errors():
    with pytest.raises(ValueError):
        cutoff_norm(1e6, 1.0)
    with pytest.raises(ValueError):
        cutoff_norm(-1.0, 1.0)
    with pytest.raises(ValueError):
        cutoff_norm(1.0, 1.0, s=0.5)


def test_write_report(tmp_path):
    rows = [{"m": 0, "m'": 1, "element": 1e-9, "tolerance": 1e-6}]
    text = write_report(rows, tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text()) == rows == json.loads(text)
