"""Landau-level pressure of a free electron gas in a constant magnetic field.

Units: kinetic energy is ``p**2`` (no factor 1/2), so the pressure at field
strength ``b`` and potential depth ``v`` is

    P_b(v) = b/(3 pi^2) * ( v^{3/2} + 2 sum_{j>=1} (v - 2 j b)_+^{3/2} ).

The sum over Landau levels is finite: level ``j`` contributes only while
``2 j b < v``.  For very weak fields the number of occupied levels can be
in the hundreds of thousands, so beyond a fixed number of terms the tail of
the sum is evaluated with the Euler-Maclaurin formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LandauPressure",
    "KineticDensity",
    "landau_sum",
    "eval_pressure",
    "eval_pressure_derivative",
    "eval_pressure_second_derivative",
    "invert_derivative",
    "eval_tau",
    "classical_pressure",
    "single_band_threshold",
]

PI2 = np.pi**2

# Number of levels summed term by term before switching to Euler-Maclaurin.
DIRECT_LEVELS = 64
# Terms closest to the kink (where (f + k)^alpha is least smooth) that are
# always summed directly inside the Euler-Maclaurin branch.
_EM_HEAD = 16
# B_{2i} / (2i)!
_EM_COEFFS = (1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0)


def _check_b(b: float) -> float:
    b = float(b)
    if not np.isfinite(b) or b <= 0.0:
        raise ValueError(f"field strength must be positive, got b={b!r}")
    return b


def _check_nonneg(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError(f"{name} must be finite and >= 0")
    return arr


def _power(x: np.ndarray, alpha: float) -> np.ndarray:
    # x >= 0; 0**alpha is inf for alpha < 0, which is the correct kink value.
    with np.errstate(divide="ignore"):
        return np.power(x, alpha)


def landau_sum(x, alpha: float, max_levels: int | None = None) -> np.ndarray:
    """Return ``x^alpha + 2 * sum_{j>=1} (x - j)_+^alpha`` for ``x >= 0``.

    ``x`` is the potential depth measured in units of the level spacing
    ``2b``.  With ``max_levels`` given, exactly that many ``j`` terms are
    summed sequentially (terms past ``floor(x)`` add an exact zero).
    """
    x = np.asarray(x, dtype=float)
    out = _power(x, alpha)
    if max_levels is not None:
        acc = np.zeros_like(x)
        for j in range(1, int(max_levels) + 1):
            acc += np.where(x >= j, _power(np.maximum(x - j, 0.0), alpha), 0.0)
        return out + 2.0 * acc

    levels = np.floor(x)
    acc = np.zeros_like(x)
    direct = levels <= DIRECT_LEVELS
    if np.any(direct):
        xd = x[direct]
        accd = np.zeros_like(xd)
        jmax = int(levels[direct].max()) if xd.size else 0
        for j in range(1, jmax + 1):
            accd += np.where(xd >= j, _power(np.maximum(xd - j, 0.0), alpha), 0.0)
        acc[direct] = accd
    if not np.all(direct):
        acc[~direct] = _em_tail(x[~direct], levels[~direct], alpha)
    return out + 2.0 * acc


def _em_tail(x: np.ndarray, levels: np.ndarray, alpha: float) -> np.ndarray:
    """``sum_{k=0}^{J-1} (f + k)^alpha`` with ``J = floor(x)``, ``f = x - J``."""
    frac = x - levels
    head = np.zeros_like(x)
    for k in range(_EM_HEAD):
        head += _power(frac + k, alpha)
    lo = frac + _EM_HEAD
    hi = frac + levels - 1.0
    integral = (hi ** (alpha + 1.0) - lo ** (alpha + 1.0)) / (alpha + 1.0)
    tail = integral + 0.5 * (lo**alpha + hi**alpha)
    # derivative of order 2i-1 of t^alpha is c * t^(alpha - 2i + 1)
    coeff = alpha
    order = 1
    for i, bern in enumerate(_EM_COEFFS):
        if i > 0:
            coeff *= (alpha - order) * (alpha - order - 1)
            order += 2
        tail += bern * coeff * (hi ** (alpha - order) - lo ** (alpha - order))
    return head + tail


def eval_pressure(b: float, v, max_levels: int | None = None):
    """Landau pressure ``P_b(v)``; scalar in, scalar out."""
    b = _check_b(b)
    v = _check_nonneg(v, "v")
    scale = 2.0 * b
    out = b / (3.0 * PI2) * scale**1.5 * landau_sum(v / scale, 1.5, max_levels)
    return out[()] if out.ndim == 0 else out


def eval_pressure_derivative(b: float, v, max_levels: int | None = None):
    """Density ``P_b'(v)``: continuous, square-root kinks at ``v = 2jb``."""
    b = _check_b(b)
    v = _check_nonneg(v, "v")
    scale = 2.0 * b
    out = b / (2.0 * PI2) * scale**0.5 * landau_sum(v / scale, 0.5, max_levels)
    return out[()] if out.ndim == 0 else out


def eval_pressure_second_derivative(b: float, v):
    """``P_b''(v)``; ``+inf`` at ``v = 0`` and at every kink ``v = 2jb``."""
    b = _check_b(b)
    v = _check_nonneg(v, "v")
    scale = 2.0 * b
    out = b / (4.0 * PI2) * scale**-0.5 * landau_sum(v / scale, -0.5)
    return out[()] if out.ndim == 0 else out


def classical_pressure(v):
    """Zero-field limit ``2 v^{5/2} / (15 pi^2)``."""
    v = _check_nonneg(v, "v")
    out = 2.0 * v**2.5 / (15.0 * PI2)
    return out[()] if out.ndim == 0 else out


def single_band_threshold(b: float) -> float:
    """Largest density carried by the lowest Landau level alone, ``P_b'(2b)``."""
    b = _check_b(b)
    return b * np.sqrt(2.0 * b) / (2.0 * PI2)


def invert_derivative(b: float, rho, maxiter: int = 200):
    """Solve ``P_b'(v) = rho`` for ``v >= 0``.

    Newton in ``u = sqrt(v)`` (exact in one step when only the lowest level
    is occupied), safeguarded by a bracket.  Steps that land within
    ``1e-8 * b`` of a kink, or leave the bracket, fall back to bisection.
    """
    b = _check_b(b)
    rho = _check_nonneg(rho, "rho")
    scalar = rho.ndim == 0
    rho = np.atleast_1d(rho).astype(float)
    v = np.zeros_like(rho)
    live = rho > 0.0
    if not np.any(live):
        return v[0] if scalar else v

    r = rho[live]
    pref = b / (2.0 * PI2)
    # P' >= pref * sqrt(v) gives an upper bracket for u = sqrt(v)
    hi = r / pref * (1.0 + 1e-9)
    lo = np.zeros_like(r)
    # classical-gas guess is good for weak fields, single-band guess for strong
    u = np.minimum(hi, (3.0 * PI2 * r) ** (1.0 / 3.0))
    active = np.ones(r.shape, dtype=bool)
    for _ in range(maxiter):
        uu = u[active]
        vv = uu * uu
        f = eval_pressure_derivative(b, vv) - r[active]
        dfdu = 2.0 * uu * eval_pressure_second_derivative(b, vv)
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(f < 0.0, uu, lo_a)
        hi_a = np.where(f > 0.0, uu, hi_a)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(np.isfinite(dfdu) & (dfdu > 0), f / dfdu, np.nan)
        newton = uu - step
        done = (
            (np.abs(f) <= 1e-14 * r[active])
            | (np.abs(newton - uu) <= 4e-16 * uu)
            | (hi_a - lo_a <= 1e-15 * hi_a)
        )
        vnew = newton * newton
        kink_dist = np.abs(vnew - 2.0 * b * np.round(vnew / (2.0 * b)))
        bad = (
            ~np.isfinite(newton)
            | (newton <= lo_a)
            | (newton >= hi_a)
            | ((kink_dist < 1e-8 * b) & (vnew > b))
        )
        new = np.where(bad, 0.5 * (lo_a + hi_a), newton)
        lo[active], hi[active] = lo_a, hi_a
        u[active] = np.where(done, uu, new)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not np.any(active):
            break
    else:
        raise RuntimeError("invert_derivative did not converge")
    v[live] = u * u
    return v[0] if scalar else v


def eval_tau(b: float, rho):
    """Kinetic energy density ``tau_b(rho) = sup_v (rho v - P_b(v))``.

    The supremum is attained at ``v* = (P_b')^{-1}(rho)``; ``tau_b(0) = 0``.
    """
    v = invert_derivative(b, rho)
    rho = np.asarray(rho, dtype=float)
    out = rho * v - eval_pressure(b, v)
    out = np.maximum(out, 0.0)
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LandauPressure:
    """The pressure ``P_b`` at a fixed field strength.

    ``max_levels=None`` sums exactly the occupied levels (``2jb < v``);
    an integer truncates after that many ``j >= 1`` terms.
    """

    b: float
    max_levels: int | None = None

    def __post_init__(self):
        _check_b(self.b)

    def __call__(self, v):
        return eval_pressure(self.b, v, self.max_levels)

    def derivative(self, v):
        return eval_pressure_derivative(self.b, v, self.max_levels)

    def second_derivative(self, v):
        return eval_pressure_second_derivative(self.b, v)

    def inverse_derivative(self, rho):
        return invert_derivative(self.b, rho)

    def legendre(self, rho):
        return eval_tau(self.b, rho)


@dataclass(frozen=True)
class KineticDensity:
    """``tau_b``: the Legendre transform of :class:`LandauPressure`."""

    b: float

    def __post_init__(self):
        _check_b(self.b)

    @property
    def single_band_threshold(self) -> float:
        return single_band_threshold(self.b)

    def __call__(self, rho):
        return eval_tau(self.b, rho)

    def derivative(self, rho):
        """``tau_b'(rho)``, the potential depth at which ``P_b' = rho``."""
        return invert_derivative(self.b, rho)
