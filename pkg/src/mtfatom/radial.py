"""Radial grids and spherically symmetric Coulomb operations.

Nodes are log-spaced, ``r_i = r_min * exp(i h)``.  Integrals
``4 pi int f(r) r^2 dr`` are done in ``u = log r`` with the trapezoid rule,
corrected at both ends by eight-point Gregory end weights (exact for
polynomials in ``u`` up to degree 7), plus the ball ``[0, r_min]`` on which ``f`` is taken
constant.

The Coulomb potential of a radial density uses Newton's theorem,

    phi(r) = int rho(s) / max(r, s) d^3 s,

discretised with the same weights, so ``weights * phi`` is a symmetric
bilinear form and ``D(f, g) = D(g, f)`` holds to rounding.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "RadialGrid",
    "RadialFunction",
    "coulomb_potential",
    "coulomb_matrix",
    "direct_energy",
    "integrate",
    "write_csv",
    "read_csv",
]

FOUR_PI = 4.0 * np.pi

# End weights of the corrected trapezoid rule, in units of h.
_END_WEIGHTS = np.array(
    [
        1070017 / 3628800,
        5537111 / 3628800,
        103613 / 403200,
        261115 / 145152,
        298951 / 725760,
        515677 / 403200,
        3349879 / 3628800,
        3662753 / 3628800,
    ]
)

MIN_NODES = 64


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Log-spaced radial grid with volume quadrature weights.

    ``weights[i]`` approximates the volume element ``4 pi r^2 dr`` attached
    to node ``i``; ``weights.sum()`` equals ``4 pi r_max^3 / 3``.
    """

    r: np.ndarray
    weights: np.ndarray
    h: float

    def __post_init__(self):
        for arr in (self.r, self.weights):
            arr.setflags(write=False)

    @classmethod
    def log(cls, r_min: float, r_max: float, n: int = 1200) -> "RadialGrid":
        if n < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes, got {n}")
        if not 0.0 < r_min < r_max:
            raise ValueError("need 0 < r_min < r_max")
        u = np.linspace(np.log(r_min), np.log(r_max), n)
        h = float(u[1] - u[0])
        r = np.exp(u)
        r[0], r[-1] = r_min, r_max
        g = np.ones(n)
        k = len(_END_WEIGHTS)
        g[:k] = _END_WEIGHTS
        g[-k:] = _END_WEIGHTS[::-1]
        weights = FOUR_PI * r**3 * h * g
        weights[0] += FOUR_PI * r_min**3 / 3.0
        return cls(r=r, weights=weights, h=h)

    @classmethod
    def for_atom(
        cls,
        Z: float,
        B: float,
        n: int = 1200,
        rmin_ell: float = 1e-4,
        rmax_ell: float = 50.0,
    ) -> "RadialGrid":
        """Grid spanning ``[rmin_ell, rmax_ell]`` in units of the MTF length ``ell``."""
        from .scales import ell

        length = ell(Z, B)
        return cls.log(rmin_ell * length, rmax_ell * length, n)

    @property
    def n(self) -> int:
        return self.r.size

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def kink_correction(self) -> np.ndarray:
        """Diagonal fix for the kink of ``1/max(r, s)`` at ``s = r``.

        The trapezoid error of a kinked integrand is ``-(h^2/12)`` times the
        jump of its ``u``-derivative, which here is ``4 pi r^2 rho(r)``.
        """
        return -(self.h**2 / 12.0) * FOUR_PI * self.r**2

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.n == other.n
            and self.h == other.h
            and np.array_equal(self.r, other.r)
        )

    def function(self, values) -> "RadialFunction":
        return RadialFunction(self, values)


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Real values on the nodes of a :class:`RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.r.shape:
            raise ValueError(
                f"values have shape {vals.shape}, grid has {self.grid.r.shape}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def integrate(self, weight: str = "1") -> float:
        return integrate(self, weight)

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0.0))


def _require_same_grid(*funcs: RadialFunction) -> RadialGrid:
    grid = funcs[0].grid
    for f in funcs[1:]:
        if not grid.same_as(f.grid):
            raise ValueError("radial functions live on different grids")
    return grid


def _require_density(rho: RadialFunction) -> None:
    if not rho.is_nonnegative():
        raise ValueError("density must be nonnegative at every node")


def coulomb_potential(rho: RadialFunction) -> RadialFunction:
    """``rho * |x|^{-1}`` for a radial density, by Newton's theorem."""
    _require_density(rho)
    grid = rho.grid
    q = grid.weights * rho.values
    inner = np.cumsum(q)
    outer = np.cumsum((q / grid.r)[::-1])[::-1]
    outer = np.append(outer[1:], 0.0)
    phi = inner / grid.r + outer + grid.kink_correction() * rho.values
    return RadialFunction(grid, phi)


def coulomb_matrix(grid: RadialGrid) -> np.ndarray:
    """Dense matrix ``C`` with ``coulomb_potential(rho).values == C @ rho``."""
    r = grid.r
    mat = grid.weights[None, :] / np.maximum(r[:, None], r[None, :])
    mat[np.diag_indices_from(mat)] += grid.kink_correction()
    return mat


def direct_energy(rho1: RadialFunction, rho2: RadialFunction) -> float:
    """``D(rho1, rho2) = 1/2 int int rho1(x) rho2(y) / |x - y|``."""
    grid = _require_same_grid(rho1, rho2)
    _require_density(rho1)
    phi = coulomb_potential(rho2)
    return 0.5 * float(np.dot(grid.weights, rho1.values * phi.values))


_WEIGHTS = {
    "1": lambda r: np.ones_like(r),
    "1/r": lambda r: 1.0 / r,
    # sphere average of (x1^2 + x2^2) / |x|^3
    "perp": lambda r: (2.0 / 3.0) / r,
}


def integrate(f: RadialFunction, weight: str = "1") -> float:
    """``4 pi int f(r) w(r) r^2 dr`` for ``weight`` in ``{"1", "1/r", "perp"}``."""
    try:
        w = _WEIGHTS[weight]
    except KeyError:
        raise ValueError(
            f"unknown weight {weight!r}; expected one of {sorted(_WEIGHTS)}"
        ) from None
    return float(np.dot(f.grid.weights, f.values * w(f.grid.r)))


def write_csv(f: RadialFunction, path=None, header: dict | None = None) -> str:
    """Serialise as ``r,value`` rows at full double precision.

    ``header`` entries become leading ``# key: value`` comment lines.  The
    text is returned and, if ``path`` is given, also written there.
    """
    buf = io.StringIO()
    for key, val in (header or {}).items():
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "value"])
    for r, v in zip(f.grid.r, f.values):
        writer.writerow([repr(float(r)), repr(float(v))])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_csv(path_or_text, grid: RadialGrid | None = None) -> RadialFunction:
    """Inverse of :func:`write_csv`.

    Without ``grid`` a grid is rebuilt from the radii, assuming they are
    log-spaced as produced by :meth:`RadialGrid.log`.
    """
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(text).read_text(encoding="utf-8")
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(rows)
    head = next(reader)
    if head != ["r", "value"]:
        raise ValueError(f"unexpected CSV header {head!r}")
    data = np.array([[float(a), float(b)] for a, b in reader])
    r, vals = data[:, 0], data[:, 1]
    if grid is None:
        grid = RadialGrid.log(r[0], r[-1], r.size)
    if not np.allclose(grid.r, r, rtol=1e-14, atol=0.0):
        raise ValueError("CSV radii do not match the grid")
    return RadialFunction(grid, vals)
