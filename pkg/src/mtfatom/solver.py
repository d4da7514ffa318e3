"""Radial minimiser of the magnetic Thomas-Fermi functional.

For a constant field ``B`` the functional

    E[rho] = int tau_B(rho) - Z int rho / |x| + D(rho, rho)

has a radial minimiser.  It solves the Thomas-Fermi equation
``rho = P_B'([V_eff]_-)`` with ``V_eff = -Z/|x| + rho * |x|^{-1} + mu``,
where ``mu >= 0`` is zero exactly when the mass constraint is slack.  We
work with the depth ``Phi = -V_eff`` throughout.

The default iteration maximises the concave dual functional

    G(sigma) = -int P_B(Z/r - mu - C sigma) - D(sigma, sigma)

over a trial density ``sigma`` (``C`` is the discrete Coulomb operator).
``G <= E`` for every pair and the two agree at the minimiser, so ``G`` is
a merit function for a line-searched Newton method whose linear system is
``(I + diag(P''(Phi)) C) d = P'(Phi) - sigma``.  A damped fixed-point
iteration with energy backoff is available as ``method="picard"``; it is
robust but needs many thousands of steps near the cusp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .pressure import (
    PI2,
    classical_pressure,
    eval_pressure,
    eval_pressure_derivative,
    eval_pressure_second_derivative,
    eval_tau,
    invert_derivative,
)
from .radial import RadialFunction, RadialGrid, coulomb_matrix

__all__ = [
    "MtfProblem",
    "MtfSolution",
    "ConvergenceError",
    "solve",
    "energy_components",
    "critical_number",
    "solution_record",
]


# residual at which the dual iteration hands over to the primal one
DUAL_SWITCH = 1e-3


class ConvergenceError(RuntimeError):
    """Raised when an iteration stops before meeting its tolerance."""

    def __init__(self, message: str, history, energies=()):
        super().__init__(message)
        self.history = list(history)
        self.energies = list(energies)


class _Gas:
    """Pressure and its calculus, either Landau-level or the zero-field limit."""

    def __init__(self, B: float, classical: bool):
        self.B = B
        self.classical = classical

    def P(self, v):
        return classical_pressure(v) if self.classical else eval_pressure(self.B, v)

    def dP(self, v):
        if self.classical:
            return v**1.5 / (3.0 * PI2)
        return eval_pressure_derivative(self.B, v)

    def ddP(self, v):
        if self.classical:
            return np.sqrt(v) / (2.0 * PI2)
        with np.errstate(divide="ignore"):
            return eval_pressure_second_derivative(self.B, v)

    def tau(self, rho):
        if self.classical:
            return 0.6 * (3.0 * PI2) ** (2.0 / 3.0) * rho ** (5.0 / 3.0)
        return eval_tau(self.B, rho)

    def dtau(self, rho):
        if self.classical:
            return (3.0 * PI2 * rho) ** (2.0 / 3.0)
        return invert_derivative(self.B, rho)


@dataclass(frozen=True, eq=False)
class MtfProblem:
    """Parameters of one minimisation.

    ``tol`` bounds the Thomas-Fermi residual relative to ``max rho``;
    ``mu_tol`` is the bracket width for ``mu`` in units of ``Z^2``;
    ``mass_tol`` is the relative mass mismatch treated as saturation.
    ``initial`` is ``"zero"``, ``"gaussian"`` or an array of node values.
    """

    N: float
    Z: float
    B: float
    grid: RadialGrid | None = None
    tol: float = 1e-8
    mu_tol: float = 1e-10
    mass_tol: float = 1e-6
    mixing: float = 0.3
    max_iter: int = 200
    method: str = "newton"
    classical: bool = False
    initial: object = "zero"

    def __post_init__(self):
        for name in ("N", "Z", "B"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive number, got {val!r}")
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError(f"mixing must lie in (0, 1], got {self.mixing!r}")
        if self.tol <= 0 or self.mu_tol <= 0 or self.mass_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("newton", "picard"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.grid is None:
            object.__setattr__(self, "grid", RadialGrid.for_atom(self.Z, self.B))

    @property
    def lam(self) -> float:
        return self.N / self.Z

    @property
    def beta(self) -> float:
        return self.B / self.Z ** (4.0 / 3.0)


@dataclass(frozen=True, eq=False)
class MtfSolution:
    problem: MtfProblem
    rho: RadialFunction
    v_eff: RadialFunction
    mu: float
    energy_functional: float
    energy_dual: float
    particle_number: float
    iterations: int
    residual: float
    critical_mass: float
    history: tuple = field(default=(), repr=False)

    @property
    def depth(self) -> np.ndarray:
        """``[V_eff]_-`` at the nodes."""
        return np.maximum(-self.v_eff.values, 0.0)


class _Discrete:
    """Grid-level operators shared by all iterations of one problem."""

    def __init__(self, problem: MtfProblem):
        self.p = problem
        self.gas = _Gas(problem.B, problem.classical)
        grid = problem.grid
        self.r = grid.r
        self.w = grid.weights
        self.C = coulomb_matrix(grid)
        self.V = problem.Z / self.r

    def depth(self, sigma, mu):
        return self.V - mu - self.C @ sigma

    def density(self, phi):
        return self.gas.dP(np.maximum(phi, 0.0))

    def dual(self, sigma, mu):
        phi = self.depth(sigma, mu)
        g = -np.dot(self.w, self.gas.P(np.maximum(phi, 0.0)))
        g -= 0.5 * np.dot(self.w, sigma * (self.C @ sigma))
        return float(g), phi

    def energy(self, rho):
        kin = float(np.dot(self.w, self.gas.tau(rho)))
        att = -self.p.Z * float(np.dot(self.w, rho / self.r))
        rep = 0.5 * float(np.dot(self.w, rho * (self.C @ rho)))
        return kin, att, rep

    def tf_residual(self, rho, mu):
        target = self.density(self.depth(rho, mu))
        scale = max(rho.max(), target.max())
        if scale <= 0.0:
            return 0.0
        return float(np.max(np.abs(rho - target)) / scale)

    def mass_residual(self, rho, mu):
        # the sup norm is dominated by the cusp; this one sees the tail
        target = self.density(self.depth(rho, mu))
        mass = max(_mass(self, rho), _mass(self, target))
        if mass <= 0.0:
            return 0.0
        return float(np.dot(self.w, np.abs(rho - target)) / mass)

    def converged(self, rho, mu):
        res = max(self.tf_residual(rho, mu), self.mass_residual(rho, mu))
        return res, res <= self.p.tol

    def curvature(self, phi):
        pos = phi > 0.0
        d = np.zeros_like(phi)
        if np.any(pos):
            floor = 1e-14 * phi[pos].max()
            d[pos] = self.gas.ddP(np.maximum(phi[pos], floor))
        # exact kinks give +inf; any large positive value keeps the direction
        # an ascent direction
        big = 1e12 * max(1.0, float(np.max(d[np.isfinite(d)], initial=0.0)))
        return np.where(np.isfinite(d), d, big)

    def newton(self, sigma, mu):
        """Dual Newton until the residual is moderate, then primal Newton.

        Near the edge of the support ``P'`` has a square-root onset and the
        dual iteration slows to a linear rate; in the density variable the
        same problem is smooth apart from the sign constraint, which the
        primal phase handles with an active set.
        """
        history = []
        rho = self._dual_phase(sigma, mu, history)
        if history[-1] > self.p.tol:
            rho = self._primal_phase(rho, mu, history)
        return rho, len(history) - 1, history

    def _stalled(self, history, phase):
        return ConvergenceError(
            f"{phase} Newton iteration stalled at residual {history[-1]:.3e} "
            f"(target {self.p.tol:.1e}) after {len(history)} steps",
            history,
        )

    def _dual_phase(self, sigma, mu, history):
        p = self.p
        switch = max(p.tol, DUAL_SWITCH)
        eye = np.eye(sigma.size)
        g, phi = self.dual(sigma, mu)
        for _ in range(p.max_iter):
            rho = self.density(phi)
            res, _ = self.converged(rho, mu)
            history.append(res)
            if res <= switch:
                return rho
            diff = rho - sigma
            jac = eye + self.curvature(phi)[:, None] * self.C
            d = np.linalg.solve(jac, diff)
            slope = float(np.dot(self.w, diff * (self.C @ d)))
            if slope <= 0.0:
                d = diff
                slope = float(np.dot(self.w, diff * (self.C @ d)))
            step = 1.0
            while True:
                g_try, phi_try = self.dual(sigma + step * d, mu)
                if g_try >= g + 1e-4 * step * slope:
                    break
                if step < 1e-12:
                    # merit exhausted at rounding level; let the primal phase finish
                    return rho
                step *= 0.5
            sigma = sigma + step * d
            g, phi = g_try, phi_try
        raise self._stalled(history, "dual")

    def _primal(self, rho, mu):
        return sum(self.energy(rho)) + mu * float(np.dot(self.w, rho))

    def _primal_phase(self, rho, mu, history):
        p = self.p
        energy = self._primal(rho, mu)
        jumps = 0
        for _ in range(p.max_iter):
            v = self.gas.dtau(rho)
            grad = v - self.depth(rho, mu)
            free = ~((rho <= 0.0) & (grad > 0.0))
            with np.errstate(divide="ignore"):
                curv = self.gas.ddP(v)
                tpp = np.where(np.isfinite(curv) & (curv > 0), 1.0 / curv, 0.0)
            hess = self.C[np.ix_(free, free)] + np.diag(tpp[free])
            delta = np.zeros_like(rho)
            delta[free] = np.linalg.solve(hess, -grad[free])
            pred = float(np.dot(self.w * grad, delta))
            # a predicted change at the rounding level of the energy cannot be
            # judged by the energy; fall back to the residual
            blind = abs(pred) <= 1e-11 * max(abs(energy), 1e-300)
            step = 1.0
            while True:
                trial = np.maximum(rho + step * delta, 0.0)
                if blind:
                    ok = self.converged(trial, mu)[0] < history[-1]
                else:
                    gain = float(np.dot(self.w * grad, trial - rho))
                    ok = self._primal(trial, mu) <= energy + 1e-4 * gain
                if ok:
                    break
                if step < (1e-3 if blind else 1e-10):
                    # a support edge moving by one node can raise the residual
                    # before the next step removes it; allow a few such jumps
                    if not blind or jumps >= 5:
                        raise self._stalled(history, "primal")
                    jumps += 1
                    trial = np.maximum(rho + delta, 0.0)
                    break
                step *= 0.5
            e_try = self._primal(trial, mu)
            rho, energy = trial, e_try
            res, ok = self.converged(rho, mu)
            history.append(res)
            if ok:
                return rho
        raise self._stalled(history, "primal")

    def picard(self, rho, mu):
        """Damped fixed point with halving of the mixing on energy increase."""
        p = self.p
        m = p.mixing
        energy = self._primal(rho, mu)
        history, energies = [], [energy]
        for it in range(1, p.max_iter + 1):
            res, ok = self.converged(rho, mu)
            history.append(res)
            if ok:
                return rho, it - 1, history
            target = self.density(self.depth(rho, mu))
            while True:
                trial = (1.0 - m) * rho + m * target
                e_try = self._primal(trial, mu)
                if e_try <= energy or m < 1e-12:
                    break
                m *= 0.5
            rho, energy = trial, e_try
            energies.append(energy)
        raise ConvergenceError(
            f"damped iteration stopped at residual {history[-1]:.3e} "
            f"(target {p.tol:.1e}) after {p.max_iter} steps",
            history,
            energies,
        )

    def initial(self):
        init = self.p.initial
        if isinstance(init, str):
            if init == "zero":
                return np.zeros_like(self.r)
            if init == "gaussian":
                from .scales import ell

                s = ell(self.p.Z, self.p.B)
                prof = np.exp(-((self.r / s) ** 2))
                return self.p.N * prof / float(np.dot(self.w, prof))
            raise ValueError(f"unknown initial guess {init!r}")
        arr = np.array(init, dtype=float)
        if arr.shape != self.r.shape or np.any(arr < 0):
            raise ValueError("initial density must be nonnegative on the grid")
        return arr

    def solve_at(self, sigma, mu):
        if self.p.method == "newton":
            return self.newton(sigma, mu)
        return self.picard(np.maximum(sigma, 0.0), mu)


def _mass(disc: _Discrete, rho) -> float:
    return float(np.dot(disc.w, rho))


def solve(problem: MtfProblem) -> MtfSolution:
    """Minimise the functional under ``int rho <= N``.

    The ``mu = 0`` solution is computed first; its mass is the critical
    number ``N_c``.  If ``N`` falls short of it, ``mu > 0`` is found by a
    bracketed root search on the mass, each evaluation warm-started from
    the previous density.
    """
    disc = _Discrete(problem)
    rho, iters, history = disc.solve_at(disc.initial(), 0.0)
    total_iters = iters
    n_c = _mass(disc, rho)
    mu = 0.0
    N = problem.N
    if N < n_c * (1.0 - problem.mass_tol):
        state = {"rho": rho}

        def excess(m):
            nonlocal total_iters
            r, it, h = disc.solve_at(state["rho"], m)
            total_iters += it
            history.extend(h)
            state["rho"] = r
            return _mass(disc, r) - N

        hi = problem.Z**2
        while excess(hi) > 0.0:
            hi *= 4.0
            if hi > 1e12 * problem.Z**2:
                raise ConvergenceError("no upper bracket for mu", history)
        mu = brentq(
            excess,
            0.0,
            hi,
            xtol=problem.mu_tol * problem.Z**2,
            rtol=4 * np.finfo(float).eps,
            maxiter=200,
        )
        rho, it, h = disc.solve_at(state["rho"], mu)
        total_iters += it
        history.extend(h)
    return _finish(disc, rho, mu, total_iters, history, n_c)


def _finish(disc, rho, mu, iters, history, n_c) -> MtfSolution:
    grid = disc.p.grid
    phi = disc.depth(rho, mu)
    kin, att, rep = disc.energy(rho)
    mass = _mass(disc, rho)
    dual = -float(np.dot(disc.w, disc.gas.P(np.maximum(phi, 0.0)))) - rep - mu * mass
    return MtfSolution(
        problem=disc.p,
        rho=RadialFunction(grid, rho),
        v_eff=RadialFunction(grid, -phi),
        mu=float(mu),
        energy_functional=kin + att + rep,
        energy_dual=dual,
        particle_number=mass,
        iterations=int(iters),
        residual=disc.tf_residual(rho, mu),
        critical_mass=n_c,
        history=tuple(history),
    )


def energy_components(sol: MtfSolution, dual_tol: float = 1e-4) -> dict:
    """Kinetic, attraction and repulsion terms of the functional.

    Raises if the solution is not converged or if the primal and dual
    energies differ by more than ``dual_tol`` relative.
    """
    p = sol.problem
    if sol.residual > max(p.tol, 1e-6):
        raise ValueError(f"solution is not converged (residual {sol.residual:.3e})")
    disc = _Discrete(p)
    kin, att, rep = disc.energy(sol.rho.values)
    total = kin + att + rep
    if total != 0.0:
        gap = abs(total - sol.energy_dual) / abs(total)
        if gap > dual_tol:
            raise ValueError(f"primal/dual energy gap {gap:.3e} exceeds {dual_tol}")
    return {"kinetic": kin, "attraction": att, "repulsion": rep, "total": total}


def critical_number(Z: float, B: float, grid: RadialGrid | None = None, **kw) -> float:
    """Mass of the ``mu = 0`` solution: the largest bindable electron number."""
    prob = MtfProblem(N=Z, Z=Z, B=B, grid=grid, **kw)
    disc = _Discrete(prob)
    rho, _, _ = disc.solve_at(disc.initial(), 0.0)
    return _mass(disc, rho)


def solution_record(sol: MtfSolution) -> dict:
    """JSON-ready summary with a stable key order."""
    p = sol.problem
    return {
        "N": p.N,
        "Z": p.Z,
        "B": p.B,
        "mu": sol.mu,
        "mass": sol.particle_number,
        "critical_mass": sol.critical_mass,
        "energy": sol.energy_functional,
        "energy_dual": sol.energy_dual,
        "components": energy_components(sol),
        "residuals": {
            "tf": sol.residual,
            "mass": abs(sol.particle_number - min(p.N, sol.critical_mass)) / p.N,
            "dual_gap": abs(sol.energy_functional - sol.energy_dual)
            / max(abs(sol.energy_functional), 1e-300),
        },
        "iterations": sol.iterations,
    }


def dumps(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=False) + "\n"
