"""Closed-form energy and length scales of large atoms in a magnetic field.

Three regimes, separated at ``B = Z^{4/3}`` and ``B = 2 Z^3``: weak field
(ordinary Thomas-Fermi), the magnetic Thomas-Fermi regime, and the
cylindrical hyper-strong regime.  All formulas are evaluated verbatim,
including slightly outside the ranges where they carry meaning; the
``in_range`` flags report that instead of refusing to compute.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

__all__ = [
    "RegimeInput",
    "beta",
    "cal_E",
    "ell",
    "parallel_length",
    "length_scales",
    "confinement_errors",
    "regime",
]


def _check(Z: float, B: float) -> None:
    if not (Z > 0 and B > 0):
        raise ValueError(f"need Z > 0 and B > 0, got Z={Z!r}, B={B!r}")


@dataclass(frozen=True)
class RegimeInput:
    Z: float
    B: float
    N: float | None = None

    def __post_init__(self):
        _check(self.Z, self.B)
        if self.N is not None and self.N <= 0:
            raise ValueError("N must be positive")

    @property
    def lam(self) -> float:
        return (self.Z if self.N is None else self.N) / self.Z

    @property
    def beta(self) -> float:
        return beta(self.Z, self.B)


def beta(Z: float, B: float) -> float:
    """Dimensionless field strength ``B / Z^{4/3}``."""
    _check(Z, B)
    return B / Z ** (4.0 / 3.0)


def regime(Z: float, B: float) -> str:
    _check(Z, B)
    if B <= Z ** (4.0 / 3.0):
        return "weak"
    if B <= 2.0 * Z**3:
        return "intermediate"
    return "hyperstrong"


def cal_E(Z: float, B: float) -> float:
    """Order of magnitude of the ground state energy."""
    _check(Z, B)
    if B <= Z ** (4.0 / 3.0):
        return Z ** (7.0 / 3.0)
    if B <= 2.0 * Z**3:
        return B**0.4 * Z**1.8
    return Z**3 * math.log(B / Z**3) ** 2


def ell(Z: float, B: float) -> float:
    """Length scale of the MTF minimiser, ``Z^{-1/3} (1 + beta)^{-2/5}``."""
    return Z ** (-1.0 / 3.0) * (1.0 + beta(Z, B)) ** (-0.4)


def parallel_length(Z: float, B: float) -> float:
    """Length ``L`` of the electronic cylinders along the field."""
    _check(Z, B)
    if B <= 2.0 * Z**3:
        return Z**-0.4 * B**-0.2
    return 1.0 / (Z * math.log(B / Z**3))


@dataclass(frozen=True)
class LengthScales:
    ell: float
    L: float
    magnetic: float
    regime: str
    # heuristic picture: per-electron size a (weak field) or cylinder
    # length (strong field), and atomic radius R
    heuristic_electron: float
    heuristic_radius: float
    seam_ratio: float

    def as_dict(self) -> dict:
        return asdict(self)


def length_scales(Z: float, B: float) -> LengthScales:
    """All length scales at ``(Z, B)``.

    ``seam_ratio`` is the ratio of the two branches of ``L`` at the seam
    ``B = 2 Z^3`` (``Z^{-2/5} B^{-1/5}`` over ``1 / (Z log 2)``), reported
    because the branches only agree up to a constant factor.
    """
    _check(Z, B)
    reg = regime(Z, B)
    if reg == "weak":
        a, R = Z ** (-2.0 / 3.0), Z ** (-1.0 / 3.0)
    elif reg == "intermediate":
        a, R = Z ** (-2.0 / 3.0) * B**-0.2, Z**0.2 * B**-0.4
    else:
        a, R = 1.0 / (Z * math.log(B / Z**3)), math.sqrt(Z / B)
    seam_B = 2.0 * Z**3
    seam_ratio = (Z**-0.4 * seam_B**-0.2) * (Z * math.log(2.0))
    return LengthScales(
        ell=ell(Z, B),
        L=parallel_length(Z, B),
        magnetic=B**-0.5,
        regime=reg,
        heuristic_electron=a,
        heuristic_radius=R,
        seam_ratio=seam_ratio,
    )


@dataclass(frozen=True)
class ConfinementErrors:
    R1: float
    R2: float
    R1_branches: tuple
    in_range: bool

    def as_dict(self) -> dict:
        d = asdict(self)
        d["R1_branches"] = list(self.R1_branches)
        return d


def confinement_errors(
    Z: float,
    B: float,
    delta: float = 1.0,
    mu_exponent: float = 0.25,
    beta_min: float = 1.0,
) -> ConfinementErrors:
    """Relative error terms for confinement to the lowest Landau band (``R1``)
    and to the enlarged low/high-frequency space (``R2``).

    ``R1_branches`` holds the two candidates entering the minimum.  Out of
    range parameters (``beta < beta_min``, ``mu_exponent`` outside
    ``(0, 1/2)``, ``delta <= 0``) raise a warning and are still evaluated.
    """
    _check(Z, B)
    b = beta(Z, B)
    ok = b >= beta_min and 0.0 < mu_exponent < 0.5 and delta > 0
    if not ok:
        warnings.warn(
            f"confinement error formulas evaluated out of range "
            f"(beta={b:.3g}, mu={mu_exponent}, delta={delta})",
            stacklevel=2,
        )
    if B <= 2.0 * Z**3:
        branches = (b**-0.9 + b ** (-9.0 / 35.0) * Z ** (-2.0 / 7.0), b**-0.6)
        tail = b**-0.6
    else:
        branches = (B ** (-1.0 / 3.0), Z / math.sqrt(B))
        tail = min(B ** (-1.0 / 3.0), Z / math.sqrt(B) * math.log(B / Z**3))
    L = parallel_length(Z, B)
    r2 = (Z / math.sqrt(B)) / delta * (delta * L * math.sqrt(B)) ** mu_exponent * tail
    return ConfinementErrors(R1=min(branches), R2=r2, R1_branches=branches, in_range=ok)
