"""Current of the magnetic Thomas-Fermi atom paired with a test field.

Test fields are azimuthal, ``a(x) = g(|x|) (-x2, x1, 0)``, perpendicular
to the constant background field along ``e3``.  For this family

    a~(x)  = (-a2, a1, 0) = -g(|x|) x_perp,   a~(0) = 0,
    b3(x)  = 2 g(r) + |x_perp|^2 g'(r) / r,

and the sphere average of ``b3`` is ``2 g + (2/3) r g'``.  Against a radial
solution everything reduces to one-dimensional integrals.

The current pairing is

    closed_form = int b3 { v P'(v) - 5/2 P(v) },    v = [V_eff]_-,

and it splits as ``j_kin - j_int + j_dens`` with

    j_kin  = int b3 { v P'(v) - 3/2 P(v) },
    j_dens = Z int (x . a~_0) / |x|^3 rho,
    j_int  = D_a~(rho, rho).

``j_kin`` vanishes identically wherever only the lowest Landau level is
filled, since there ``v P' = 3/2 P``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .pressure import eval_pressure, eval_pressure_derivative
from .radial import RadialFunction, integrate
from .scales import cal_E

__all__ = [
    "TestField",
    "CurrentReport",
    "closed_form_current",
    "split_current",
    "d_alpha",
    "d_alpha_monte_carlo",
    "current_integrand_monte_carlo",
]

PROFILES = ("constant", "bump", "polynomial")
QUAD_TOL = 1e-3


@dataclass(frozen=True)
class TestField:
    """Azimuthal test field ``a = g(|x|) (-x2, x1, 0)``.

    ``profile`` selects ``g``:

    * ``constant``: ``g = amplitude`` (rigid rotation)
    * ``bump``: ``amplitude * exp(1 - 1 / (1 - (r/R)^2))`` for ``r < R``
    * ``polynomial``: ``amplitude * (1 - (r/R)^2)^3`` for ``r < R``
    """

    __test__ = False  # not a pytest class

    profile: str = "bump"
    radius: float = 1.0
    amplitude: float = 1.0
    form: str = "azimuthal"

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def support(self) -> float:
        return math.inf if self.profile == "constant" else self.radius

    def g(self, r):
        r = np.asarray(r, dtype=float)
        if self.profile == "constant":
            return np.full_like(r, self.amplitude)
        t = r / self.radius
        inside = t < 1.0
        s = np.where(inside, 1.0 - t * t, 1.0)
        if self.profile == "bump":
            val = np.exp(1.0 - 1.0 / s)
        else:
            val = s**3
        return self.amplitude * np.where(inside, val, 0.0)

    def dg(self, r):
        """``g'(r)``."""
        r = np.asarray(r, dtype=float)
        if self.profile == "constant":
            return np.zeros_like(r)
        t = r / self.radius
        inside = t < 1.0
        s = np.where(inside, 1.0 - t * t, 1.0)
        ds = -2.0 * t / self.radius
        if self.profile == "bump":
            val = np.exp(1.0 - 1.0 / s) * ds / (s * s)
        else:
            val = 3.0 * s * s * ds
        return self.amplitude * np.where(inside, val, 0.0)

    def b3_average(self, r):
        """Sphere average of ``b3`` at radius ``r``."""
        r = np.asarray(r, dtype=float)
        return 2.0 * self.g(r) + (2.0 / 3.0) * r * self.dg(r)

    # Pointwise 3D versions, used by the Monte-Carlo checks.
    def a(self, x):
        x = np.asarray(x, dtype=float)
        g = self.g(np.linalg.norm(x, axis=-1))
        return np.stack([-g * x[..., 1], g * x[..., 0], np.zeros_like(g)], axis=-1)

    def a_tilde(self, x):
        a = self.a(x)
        return np.stack([-a[..., 1], a[..., 0], np.zeros_like(a[..., 0])], axis=-1)

    def b3(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        perp2 = x[..., 0] ** 2 + x[..., 1] ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            tail = np.where(r > 0, perp2 * self.dg(r) / r, 0.0)
        return 2.0 * self.g(r) + tail


@dataclass(frozen=True)
class CurrentReport:
    closed_form: float
    j_kin: float
    j_int: float
    j_dens: float
    residual: float
    quad_error: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"


def _check_support(rho: RadialFunction, field: TestField) -> None:
    if field.support > rho.grid.r_max * (1.0 + 1e-12) and field.profile != "constant":
        raise ValueError(
            f"field support {field.support:.6g} exceeds the grid radius {rho.grid.r_max:.6g}"
        )


def _brace_terms(sol):
    v = sol.depth
    B = sol.problem.B
    P = eval_pressure(B, v)
    vdP = v * eval_pressure_derivative(B, v)
    return vdP, P


def closed_form_current(sol, field: TestField) -> float:
    """``int b3 {v P'(v) - 5/2 P(v)}`` for the solution's depth ``v``.

    Only ``b3`` enters; the part of ``a`` along the field direction drops
    out of the pairing.
    """
    _check_support(sol.rho, field)
    vdP, P = _brace_terms(sol)
    grid = sol.rho.grid
    vals = field.b3_average(grid.r) * (vdP - 2.5 * P)
    return integrate(RadialFunction(grid, vals))


def _j_kin(sol, field):
    vdP, P = _brace_terms(sol)
    grid = sol.rho.grid
    # cancel exactly in the single band region instead of leaving rounding
    diff = np.where(sol.depth <= 2.0 * sol.problem.B, 0.0, vdP - 1.5 * P)
    return integrate(RadialFunction(grid, field.b3_average(grid.r) * diff))


def _j_dens(sol, field):
    rho = sol.rho
    # x . a~_0 = -g r_perp^2, whose sphere average over |x|^3 is -(2/3) g / r
    return -sol.problem.Z * integrate(
        RadialFunction(rho.grid, rho.values * field.g(rho.grid.r)), "perp"
    )


def _enclosed(r, q):
    """Charge inside each node radius, ``q`` being ``4 pi r^2 rho`` samples."""
    from scipy.integrate import cumulative_simpson

    u = np.log(r)
    inner = q[0] * r[0] / 3.0  # the ball below r_min at constant density
    return inner + cumulative_simpson(q * r, x=u, initial=0.0)


def _d_alpha_nodes(r, rho1, rho2, g):
    q1 = 4.0 * np.pi * r**2 * rho1
    q2 = 4.0 * np.pi * r**2 * rho2
    Q1 = _enclosed(r, q1)
    Q2 = _enclosed(r, q2)
    integrand = g * (rho1 * Q2 + rho2 * Q1) / r
    return integrand


def d_alpha(rho1: RadialFunction, rho2: RadialFunction, field: TestField):
    """``D_a~(rho1, rho2)`` and an error estimate.

    The pair kernel ``(x - y) . (a~(x) - a~(y)) / |x - y|^3`` is averaged
    over joint rotations, which turns ``x_perp`` into ``(2/3) x``.  The
    remaining angular integral is the field of a spherical shell, so

        D = -1/3 [ int rho1 g Q2 / r + int rho2 g Q1 / r ],

    with ``Q_i(r)`` the charge of ``rho_i`` inside radius ``r``.  The error
    estimate is the change when every other node is dropped.
    """
    if field.form != "azimuthal":
        raise ValueError(f"d_alpha needs an axisymmetric azimuthal field, got {field.form!r}")
    grid = rho1.grid
    if not grid.same_as(rho2.grid):
        raise ValueError("radial functions live on different grids")
    _check_support(rho1, field)
    r = grid.r
    gv = field.g(r)
    fine = _d_alpha_nodes(r, rho1.values, rho2.values, gv)
    value = -integrate(RadialFunction(grid, fine)) / 3.0
    # coarse estimate: Simpson in u = log r on every other node
    from scipy.integrate import simpson

    sl = slice(None, None, 2)
    coarse_int = _d_alpha_nodes(r[sl], rho1.values[sl], rho2.values[sl], gv[sl])
    u = np.log(r[sl])
    coarse = -(
        simpson(4.0 * np.pi * r[sl] ** 3 * coarse_int, x=u)
        + 4.0 * np.pi * r[0] ** 3 / 3.0 * coarse_int[0]
    ) / 3.0
    return float(value), float(abs(value - coarse))


def split_current(sol, field: TestField, tol: float = QUAD_TOL) -> CurrentReport:
    """The three split terms, the closed form and their mismatch."""
    closed = closed_form_current(sol, field)
    j_kin = _j_kin(sol, field)
    j_dens = _j_dens(sol, field)
    j_int, err = d_alpha(sol.rho, sol.rho, field)
    residual = closed - (j_kin - j_int + j_dens)
    return CurrentReport(
        closed_form=float(closed),
        j_kin=float(j_kin),
        j_int=float(j_int),
        j_dens=float(j_dens),
        residual=float(residual),
        quad_error=float(err),
    )


def residual_ok(report: CurrentReport, Z: float, B: float, tol: float = QUAD_TOL) -> bool:
    return abs(report.residual) <= tol * cal_E(Z, B)


def _sample_radial(rho: RadialFunction, n: int, rng: np.random.Generator):
    """Points in R^3 distributed as ``rho / int rho``."""
    r = rho.grid.r
    q = 4.0 * np.pi * r**2 * rho.values
    cdf = _enclosed(r, q)
    cdf = np.maximum.accumulate(cdf)
    cdf = np.concatenate([[0.0], cdf])
    u_nodes = np.concatenate([[np.log(r[0]) + math.log(1e-6)], np.log(r)])
    total = cdf[-1]
    radius = np.exp(np.interp(rng.random(n) * total, cdf, u_nodes))
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return radius[:, None] * direction, total


def d_alpha_monte_carlo(
    rho: RadialFunction, field: TestField, n: int = 1_000_000, seed: int = 0, batch: int = 200_000
):
    """Plain Monte-Carlo estimate of ``D_a~(rho, rho)`` and its standard error.

    Pairs ``(x, y)`` are drawn independently from ``rho``; the raw kernel is
    bounded by a multiple of ``1 / |x - y|``, so its variance is finite.
    """
    rng = np.random.default_rng(seed)
    total_sum = 0.0
    total_sq = 0.0
    count = 0
    mass = None
    while count < n:
        m = min(batch, n - count)
        x, mass = _sample_radial(rho, m, rng)
        y, _ = _sample_radial(rho, m, rng)
        d = x - y
        k = np.einsum("ij,ij->i", d, field.a_tilde(x) - field.a_tilde(y))
        k /= np.linalg.norm(d, axis=1) ** 3
        total_sum += float(k.sum())
        total_sq += float((k * k).sum())
        count += m
    mean = total_sum / count
    var = max(total_sq / count - mean * mean, 0.0)
    scale = 0.5 * mass * mass
    return scale * mean, scale * math.sqrt(var / count)


def current_integrand_monte_carlo(
    sol, field: TestField, n: int = 1_000_000, seed: int = 0, batch: int = 500_000
):
    """Monte-Carlo value of ``int b3(x) {v P' - 5/2 P}(|x|) dx`` with pointwise ``b3``.

    Points are drawn from the solution density, which covers the support
    of the integrand.
    """
    rng = np.random.default_rng(seed)
    vdP, P = _brace_terms(sol)
    grid_u = np.log(sol.rho.grid.r)
    brace_nodes = vdP - 2.5 * P
    total, total_sq, count = 0.0, 0.0, 0
    while count < n:
        m = min(batch, n - count)
        x, mass = _sample_radial(sol.rho, m, rng)
        u = np.log(np.linalg.norm(x, axis=1))
        brace = np.interp(u, grid_u, brace_nodes)
        dens = np.interp(u, grid_u, sol.rho.values)
        vals = field.b3(x) * brace / dens * mass
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        count += m
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    return mean, math.sqrt(var / count)
