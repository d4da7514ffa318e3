"""Lowest Landau level checks in the plane perpendicular to the field.

Conventions: ``A = (B/2)(-x2, x1)``, ``p_A = -i grad + A`` and spin-down
Pauli kinetic energy ``p_A^2 - B``.  The lowest level is spanned by

    psi_m(x) = N_m (x1 - i x2)^m exp(-B |x|^2 / 4),
    N_m^2    = (B/2)^{m+1} / (pi m!),

which are annihilated by ``a = p_A1 - i p_A2`` and whose reproducing
kernel is

    Pi0(x, y) = (B / 2 pi) exp(i B (x1 y2 - x2 y1) / 2) exp(-B |x - y|^2 / 4).

Functions on the plane are sampled on a square tensor grid and integrated
with the trapezoid rule, which is spectrally accurate for the Gaussian
decaying integrands used here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator, eigsh

__all__ = [
    "PlaneGrid",
    "LandauBasis",
    "Bump",
    "J1Spec",
    "project_lll",
    "schur_commutator_constant",
    "kernel_mass",
    "j1_lll_matrix",
    "commutator_check",
    "lt_check_1d",
    "well_potential",
    "cutoff_bump",
    "cutoff_norm",
    "write_report",
]


@dataclass(frozen=True, eq=False)
class PlaneGrid:
    """Uniform ``n x n`` grid on ``[-R, R]^2`` (endpoints excluded)."""

    R: float
    n: int

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.R + self.h * (np.arange(self.n) + 0.5)

    def mesh(self):
        ax = self.axis
        return np.meshgrid(ax, ax, indexing="ij")

    def inner(self, f, g) -> complex:
        return complex(np.vdot(f, g) * self.h**2)

    def norm(self, f) -> float:
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.h**2))

    @classmethod
    def for_basis(cls, B: float, m_max: int, n: int | None = None) -> "PlaneGrid":
        """``R = 8 sqrt((m_max + 1) / B)``, fine enough for the kernel's phase."""
        R = 8.0 * math.sqrt((m_max + 1) / B)
        need = _required_nodes(B, R)
        return cls(R, max(n or 0, 200, need))


def _required_nodes(B: float, R: float) -> int:
    # the kernel phase carries frequencies up to B R / 2 on top of the
    # Gaussian's width sqrt(B); resolve both with margin
    kmax = B * R / 2.0 + 8.0 * math.sqrt(B)
    return int(math.ceil(2.0 * R * kmax / math.pi))


@dataclass(frozen=True, eq=False)
class LandauBasis:
    """Spin-down lowest-level states ``psi_0 ... psi_{m_max}``."""

    B: float
    m_max: int
    grid: PlaneGrid = None
    states: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("B must be positive")
        if self.m_max < 0:
            raise ValueError("m_max must be >= 0")
        if self.grid is None:
            object.__setattr__(self, "grid", PlaneGrid.for_basis(self.B, self.m_max))
        x1, x2 = self.grid.mesh()
        states = np.array([self.psi(m, x1, x2) for m in range(self.m_max + 1)])
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    def norm_const(self, m: int) -> float:
        return math.sqrt((self.B / 2.0) ** (m + 1) / (math.pi * math.factorial(m)))

    def psi(self, m, x1, x2):
        zbar = x1 - 1j * x2
        return self.norm_const(m) * zbar**m * np.exp(-self.B * (x1**2 + x2**2) / 4.0)

    def p_A(self, m, x1, x2):
        """``(p_A1 psi_m, p_A2 psi_m)`` computed analytically."""
        B = self.B
        zbar = x1 - 1j * x2
        gauss = np.exp(-B * (x1**2 + x2**2) / 4.0)
        c = self.norm_const(m)
        psi = c * zbar**m * gauss
        if m > 0:
            dz = c * m * zbar ** (m - 1) * gauss
        else:
            dz = np.zeros_like(psi)
        d1 = dz - 0.5 * B * x1 * psi
        d2 = -1j * dz - 0.5 * B * x2 * psi
        p1 = -1j * d1 - 0.5 * B * x2 * psi
        p2 = -1j * d2 + 0.5 * B * x1 * psi
        return p1, p2

    def lower(self, m, x1, x2):
        """``a psi_m`` with ``a = p_A1 - i p_A2``; zero on the lowest level."""
        p1, p2 = self.p_A(m, x1, x2)
        return p1 - 1j * p2

    def raise_(self, m, x1, x2):
        """``a* psi_m`` with ``a* = p_A1 + i p_A2``; orthogonal to the level."""
        p1, p2 = self.p_A(m, x1, x2)
        return p1 + 1j * p2

    def gram(self) -> np.ndarray:
        h2 = self.grid.h**2
        flat = self.states.reshape(self.m_max + 1, -1)
        return flat.conj() @ flat.T * h2


def project_lll(B: float, f: np.ndarray, grid: PlaneGrid, leak_tol: float = 1e-6):
    """Apply the lowest-level projector to samples ``f`` on ``grid``.

    The kernel factorises as ``G(x1, y1) e^{-iB x2 y1/2} G(x2, y2)
    e^{iB x1 y2/2}`` with ``G`` a one-dimensional Gaussian, so the sum over
    ``y2`` is a batch of matrix products, one per ``x1``.

    Raises if the grid is too coarse for the kernel or if the part of the
    result in the outer strip of width ``6/sqrt(B)``, where the truncated
    plane cuts the Gaussian tails, exceeds ``leak_tol`` times ``||f||``.
    """
    if grid.n < _required_nodes(B, grid.R):
        raise ValueError(
            f"grid with n={grid.n} cannot resolve the projector at B={B} on R={grid.R}; "
            f"need n >= {_required_nodes(B, grid.R)}"
        )
    f = np.asarray(f, dtype=complex)
    ax = grid.axis
    h = grid.h
    G = np.exp(-B * (ax[:, None] - ax[None, :]) ** 2 / 4.0)
    phase = np.exp(0.5j * B * np.outer(ax, ax))  # e^{i B s t / 2}
    # S[x1, x2, y1] = sum_y2 G(x2, y2) e^{iB x1 y2/2} f(y1, y2)
    S = np.empty((grid.n, grid.n, grid.n), dtype=complex)
    for i in range(grid.n):
        S[i] = (G * phase[i][None, :]) @ f.T
    # out[x1, x2] = sum_y1 G(x1, y1) e^{-iB x2 y1/2} S[x1, x2, y1]
    out = np.einsum("ay,by,aby->ab", G, phase.conj(), S, optimize=True)
    out *= B / (2.0 * math.pi) * h * h
    total = grid.norm(f)
    if total > 0:
        strip = 6.0 / math.sqrt(B)
        x1, x2 = grid.mesh()
        outer = np.maximum(np.abs(x1), np.abs(x2)) > grid.R - strip
        leak = grid.norm(np.where(outer, out, 0.0)) / total
        if leak > leak_tol:
            raise ValueError(
                f"projected function leaks {leak:.2e} of its norm to the edge of the plane"
            )
    return out


def schur_commutator_constant(B: float = 1.0, nodes: int = 400) -> dict:
    """``sup_x int |Pi0(x, y)| |x - y| dy`` by polar Gauss-Legendre quadrature.

    ``|Pi0(x, y)|`` depends only on ``u = x - y``, so the supremum is the
    integral of ``(B / 2 pi) |u| exp(-B |u|^2 / 4)``; its exact value is
    ``2 sqrt(pi) / sqrt(B)``.
    """
    rmax = 40.0 / math.sqrt(B)
    t, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * rmax * (t + 1.0)
    wr = 0.5 * rmax * w
    ntheta = 64
    theta_w = 2.0 * math.pi / ntheta  # integrand is isotropic; trapezoid is exact
    radial = B / (2.0 * math.pi) * r * np.exp(-B * r * r / 4.0) * r
    value = float(ntheta * theta_w * np.dot(wr, radial))
    exact = 2.0 * math.sqrt(math.pi) / math.sqrt(B)
    return {"B": B, "value": value, "exact": exact, "deviation": value - exact}


def kernel_mass(B: float = 1.0, nodes: int = 400) -> float:
    """``sup_x int |Pi0(x, y)| dy``, which equals 2 for every ``B``."""
    rmax = 40.0 / math.sqrt(B)
    t, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * rmax * (t + 1.0)
    wr = 0.5 * rmax * w
    return float(2.0 * math.pi * np.dot(wr, B / (2.0 * math.pi) * np.exp(-B * r * r / 4.0) * r))


@dataclass(frozen=True)
class Bump:
    """Compactly supported ``sum_i c_i (1 - |x - x_i|^2 / s_i^2)_+^k`` on the plane."""

    centers: tuple
    widths: tuple
    coeffs: tuple
    power: int = 8

    def __call__(self, x1, x2):
        out = np.zeros_like(x1, dtype=float)
        for (c1, c2), s, c in zip(self.centers, self.widths, self.coeffs):
            t = 1.0 - ((x1 - c1) ** 2 + (x2 - c2) ** 2) / s**2
            out += c * np.where(t > 0, t, 0.0) ** self.power
        return out

    def laplacian(self, x1, x2):
        k = self.power
        out = np.zeros_like(x1, dtype=float)
        for (c1, c2), s, c in zip(self.centers, self.widths, self.coeffs):
            q = ((x1 - c1) ** 2 + (x2 - c2) ** 2) / s**2
            t = np.where(q < 1.0, 1.0 - q, 0.0)
            out += c * (
                -4.0 * k * t ** (k - 1) / s**2 + 4.0 * k * (k - 1) * t ** (k - 2) * q / s**2
            )
        return out

    @classmethod
    def random(cls, rng, count: int, spread: float, width: float, power: int = 8):
        centers = tuple(tuple(v) for v in rng.uniform(-spread, spread, size=(count, 2)))
        widths = tuple(rng.uniform(0.7 * width, 1.5 * width, size=count))
        coeffs = tuple(rng.normal(size=count))
        return cls(centers, widths, coeffs, power)


@dataclass(frozen=True)
class J1Spec:
    """Perpendicular profile ``M`` (2x2 block) and field ``b3``.

    ``M11 = t b3 + d``, ``M22 = t b3 - d``, ``M12 = e``, so ``tr M = 2 t b3``;
    the trace constraint holds for ``trace_scale = 1`` (``M33 = 0`` is
    implicit in the reduction to the plane).
    """

    b3: Bump
    d: Bump
    e: Bump
    trace_scale: float = 1.0

    def entries(self, x1, x2):
        b = self.b3(x1, x2)
        d = self.d(x1, x2)
        e = self.e(x1, x2)
        t = self.trace_scale
        return t * b + d, e, t * b - d

    def constraint_violation(self, x1, x2) -> float:
        m11, _, m22 = self.entries(x1, x2)
        b = self.b3(x1, x2)
        scale = max(2.0 * float(np.max(np.abs(b))), 1e-300)
        return float(np.max(np.abs(m11 + m22 - 2.0 * b)) / scale)

    @classmethod
    def random(cls, B: float, rng, trace_scale: float = 1.0, m_max: int = 6):
        ell = 1.0 / math.sqrt(B)
        spread = 2.0 * ell * math.sqrt(m_max + 1)
        mk = lambda: Bump.random(rng, 3, spread, 2.0 * ell)
        return cls(mk(), mk(), mk(), trace_scale)


def j1_lll_matrix(basis: LandauBasis, spec: J1Spec, m_max: int | None = None):
    """Matrix of ``p_A M p_A - B b3 - (1/2) Lap b3`` between lowest-level states.

    ``<psi_m, p_A M p_A psi_m'>`` is evaluated as
    ``sum_jk int conj(p_j psi_m) M_jk (p_k psi_m')``.  Returns the matrix and
    the constraint violation ``max |tr M - 2 b3| / max |2 b3|``.
    """
    mm = basis.m_max if m_max is None else m_max
    x1, x2 = basis.grid.mesh()
    h2 = basis.grid.h**2
    m11, m12, m22 = spec.entries(x1, x2)
    b = spec.b3(x1, x2)
    lap = spec.b3.laplacian(x1, x2)
    pot = -basis.B * b - 0.5 * lap
    grads = [basis.p_A(m, x1, x2) for m in range(mm + 1)]
    psis = [basis.psi(m, x1, x2) for m in range(mm + 1)]
    out = np.empty((mm + 1, mm + 1), dtype=complex)
    for i in range(mm + 1):
        p1i, p2i = grads[i]
        for j in range(mm + 1):
            p1j, p2j = grads[j]
            kin = (
                np.conj(p1i) * (m11 * p1j + m12 * p2j)
                + np.conj(p2i) * (m12 * p1j + m22 * p2j)
            )
            out[i, j] = np.sum(kin + np.conj(psis[i]) * pot * psis[j]) * h2
    return out, spec.constraint_violation(x1, x2)


def commutator_check(
    B: float, grid: PlaneGrid, rng, pairs: int = 20, constant: float | None = None
) -> list:
    """``||[Pi0, f] phi||`` against ``constant * ||grad f||_inf * ||phi||``.

    ``f(x) = sin(k . x + c)`` has ``||grad f||_inf = |k|``; ``phi`` is a
    random Gaussian packet sum near the origin.
    """
    if constant is None:
        constant = schur_commutator_constant(B)["exact"]
    x1, x2 = grid.mesh()
    ell = 1.0 / math.sqrt(B)
    rows = []
    for _ in range(pairs):
        k = rng.normal(size=2) * rng.uniform(0.2, 2.0) * math.sqrt(B)
        c = rng.uniform(0, 2 * math.pi)
        f = np.sin(k[0] * x1 + k[1] * x2 + c)
        phi = np.zeros_like(x1, dtype=complex)
        for _ in range(3):
            c1, c2 = rng.uniform(-2 * ell, 2 * ell, size=2)
            s = rng.uniform(0.5, 1.5) * ell
            amp = rng.normal() + 1j * rng.normal()
            phi += amp * np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2 * s * s))
        comm = project_lll(B, f * phi, grid, leak_tol=1e-4) - f * project_lll(
            B, phi, grid, leak_tol=1e-4
        )
        lhs = grid.norm(comm)
        rhs = constant * float(np.hypot(*k)) * grid.norm(phi)
        rows.append({"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "holds": bool(lhs <= rhs)})
    return rows


def well_potential(x, depth: float, half_width: float = 1.0):
    """Square well ``-depth`` on ``[-half_width, half_width]``."""
    return np.where(np.abs(x) <= half_width, -depth, 0.0)


def lt_check_1d(v, x, boundary_tol: float = 1e-8) -> dict:
    """Compare ``sum of negative eigenvalues of -d^2/dx^2 + v`` with ``-(4/3) int [v]_-^{3/2}``.

    ``x`` must be uniform; the operator is discretised with the three-point
    Laplacian and Dirichlet conditions just outside the box.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = float(x[1] - x[0])
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0.0):
        raise ValueError("x must be uniformly spaced")
    neg = np.maximum(-v, 0.0)
    bound = -(4.0 / 3.0) * float(np.sum(neg**1.5) * h)
    diag = 2.0 / h**2 + v
    off = -np.ones(x.size - 1) / h**2
    if np.all(neg == 0.0):
        return {"sum_neg_eigs": 0.0, "bound": 0.0, "slack": 0.0, "count": 0,
                "ratio": 0.0, "satisfied": True}
    vals, vecs = eigh_tridiagonal(diag, off, select="v", select_range=(-np.inf, 0.0))
    if vals.size:
        ground = np.abs(vecs[:, 0])
        edge = max(ground[0], ground[-1]) / ground.max()
        if edge > boundary_tol:
            raise ValueError(f"box too small: ground state is {edge:.2e} of its peak at the edge")
    total = float(vals.sum())
    return {
        "sum_neg_eigs": total,
        "bound": bound,
        "slack": total - bound,
        "count": int(vals.size),
        "ratio": total / bound if bound else 0.0,
        "satisfied": bool(total >= bound),
    }


def _psi(x):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)


def cutoff_bump(t):
    """Even cutoff, 1 on ``[-1, 1]``, 0 outside ``(-2, 2)``.

    ``f(t) = psi(2 - |t|) / (psi(2 - |t|) + psi(|t| - 1))`` with
    ``psi(s) = exp(-1/s)`` for ``s > 0`` and 0 otherwise.
    """
    a = np.abs(np.asarray(t, dtype=float))
    num = _psi(2.0 - a)
    den = num + _psi(a - 1.0)
    return np.where(a >= 2.0, 0.0, num / np.where(den > 0, den, 1.0))


def cutoff_norm(
    gamma: float, a: float, s: float = 1.0, q: float = 2.0, max_nodes: int = 1 << 22
) -> dict:
    """Operator norm of ``f(p/gamma) (a^2 + x^2)^{-s/2} f(p/gamma)`` on the line.

    The operator is positive, so its norm is the top eigenvalue, found by
    Lanczos with FFT-based application of ``f(p/gamma)`` on a periodic grid
    with spacing ``min(a/8, pi/(4 gamma))`` and length
    ``max(40/gamma, 40 a)``.
    """
    if not (gamma > 0 and a > 0):
        raise ValueError("gamma and a must be positive")
    if s < 1 or q <= 1:
        raise ValueError("need s >= 1 and q > 1")
    h = min(a / 8.0, math.pi / (4.0 * gamma))
    length = max(40.0 / gamma, 40.0 * a)
    n = int(2 ** math.ceil(math.log2(length / h)))
    if n > max_nodes:
        raise ValueError(
            f"resolving both 1/gamma={1/gamma:.3g} and a={a:.3g} needs {n} nodes (> {max_nodes})"
        )
    x = (np.arange(n) - n // 2) * h
    p = 2.0 * math.pi * np.fft.rfftfreq(n, d=h)
    mult = cutoff_bump(p / gamma)
    weight = (a * a + x * x) ** (-s / 2.0)

    def apply(u):
        u = np.asarray(u).reshape(-1)
        w = np.fft.irfft(mult * np.fft.rfft(u), n)
        w = weight * w
        return np.fft.irfft(mult * np.fft.rfft(w), n)

    op = LinearOperator((n, n), matvec=apply, dtype=float)
    v0 = np.exp(-(x * gamma) ** 2)
    val = eigsh(op, k=1, which="LA", v0=v0, tol=1e-10, return_eigenvectors=False)[0]
    norm = float(val)
    return {
        "gamma": gamma,
        "a": a,
        "s": s,
        "q": q,
        "norm": norm,
        "bound_ratio": norm * a**s / (a * gamma) ** (1.0 / q),
        "nodes": n,
    }


def write_report(rows: list, path) -> str:
    text = json.dumps(rows, indent=2) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
