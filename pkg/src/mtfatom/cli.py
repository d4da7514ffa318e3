"""Command-line front end.

    mtfatom solve   --Z 10 --N 10 --B 1000 [--out sol.json] [--profile rho.csv]
    mtfatom current --Z 10 --beta 100 --field-profile bump [--mc-samples 200000]
    mtfatom sweep   --Z 20 --lambda 1 --beta 1e2:1e4:logN=9 --out sweep.csv
    mtfatom scales  --Z 10 --B 21.544
    mtfatom landau-check --out reports/

JSON goes to stdout unless ``--out`` is given.  Every output carries the
parameters, tolerances, seed and package version, and nothing else that
varies between runs, so identical invocations give identical bytes.

Exit status: 0 on success, 1 when an iteration fails to converge, 2 for an
invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .radial import RadialGrid, write_csv

EXIT_OK, EXIT_DIVERGED, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    pass


def parse_sweep(text: str) -> np.ndarray:
    """``lo:hi:logN=k`` -> ``k`` log-spaced values from ``lo`` to ``hi``."""
    try:
        lo, hi, spec = text.split(":")
        key, k = spec.split("=")
        lo, hi, k = float(lo), float(hi), int(k)
    except ValueError:
        raise ConfigError(f"sweep range {text!r} is not of the form lo:hi:logN=k") from None
    if key != "logN" or k < 2 or not (0 < lo < hi):
        raise ConfigError(f"sweep range {text!r} needs 0 < lo < hi and logN >= 2")
    return np.logspace(math.log10(lo), math.log10(hi), k)


def _field_strength(args) -> float:
    if (args.B is None) == (args.beta is None):
        raise ConfigError("give exactly one of --B and --beta")
    B = args.B if args.B is not None else args.beta * args.Z ** (4.0 / 3.0)
    if not B > 0:
        raise ConfigError("field strength must be positive")
    return B


def _electrons(args) -> float:
    if args.N is not None and args.lam is not None:
        raise ConfigError("give at most one of --N and --lambda")
    if args.N is not None:
        N = args.N
    else:
        N = (args.lam if args.lam is not None else 1.0) * args.Z
    if not N > 0:
        raise ConfigError("electron number must be positive")
    return N


def _problem(args, Z, N, B):
    from .solver import MtfProblem

    if not Z > 0:
        raise ConfigError("--Z must be positive")
    if args.grid_n < 64:
        raise ConfigError("--grid-n must be at least 64")
    if not args.rmax_ell > 1e-4:
        raise ConfigError("--rmax-ell must exceed the inner radius 1e-4")
    grid = RadialGrid.for_atom(Z, B, n=args.grid_n, rmax_ell=args.rmax_ell)
    try:
        return MtfProblem(N=N, Z=Z, B=B, grid=grid, tol=args.tol, mixing=args.mix)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _provenance(args, **extra) -> dict:
    keys = ("command", "Z", "N", "lam", "B", "beta", "grid_n", "rmax_ell", "tol", "mix", "seed")
    params = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    params.update(extra)
    return {"package": "mtfatom", "version": __version__, "parameters": params}


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_solve(args) -> int:
    from .solver import solution_record, solve

    B = _field_strength(args)
    N = _electrons(args)
    sol = solve(_problem(args, args.Z, N, B))
    record = {"provenance": _provenance(args, resolved_B=B, resolved_N=N)}
    record.update(solution_record(sol))
    _emit(_dump(record), args.out)
    if args.profile:
        header = {"quantity": "rho", "Z": args.Z, "N": N, "B": B, "version": __version__}
        write_csv(sol.rho, args.profile, header=header)
    return EXIT_OK


def cmd_current(args) -> int:
    from .current import TestField, d_alpha_monte_carlo, split_current
    from .scales import cal_E, ell
    from .solver import solve

    B = _field_strength(args)
    N = _electrons(args)
    sol = solve(_problem(args, args.Z, N, B))
    radius = args.field_radius * ell(args.Z, B)
    field = TestField(args.field_profile, radius=radius)
    report = split_current(sol, field)
    record = {
        "provenance": _provenance(
            args, resolved_B=B, resolved_N=N, field_profile=args.field_profile,
            field_radius=radius, mc_samples=args.mc_samples,
        ),
        "current": report.as_dict(),
        "scale": cal_E(args.Z, B),
    }
    if args.mc_samples:
        mc, se = d_alpha_monte_carlo(sol.rho, field, n=args.mc_samples, seed=args.seed)
        record["j_int_monte_carlo"] = {"value": mc, "std_error": se}
    _emit(_dump(record), args.out)
    return EXIT_OK


def _sweep_point(payload):
    from .solver import MtfProblem, solve

    Z, N, B, n, rmax_ell, tol, mix = payload
    grid = RadialGrid.for_atom(Z, B, n=n, rmax_ell=rmax_ell)
    sol = solve(MtfProblem(N=N, Z=Z, B=B, grid=grid, tol=tol, mixing=mix))
    return sol.energy_functional, sol.mu, sol.particle_number


def _threads() -> int:
    raw = os.environ.get("MTF_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"MTF_THREADS must be an integer, got {raw!r}") from None
    if val < 1:
        raise ConfigError("MTF_THREADS must be at least 1")
    return val


def cmd_sweep(args) -> int:
    from .scales import cal_E

    if args.beta is None:
        raise ConfigError("sweep needs --beta lo:hi:logN=k")
    betas = parse_sweep(args.beta)
    if not args.Z > 0:
        raise ConfigError("--Z must be positive")
    lam = args.lam if args.lam is not None else 1.0
    Z = args.Z
    N = lam * Z
    Bs = betas * Z ** (4.0 / 3.0)
    _problem(args, Z, N, float(Bs[0]))  # validates the shared settings
    payloads = [(Z, N, float(B), args.grid_n, args.rmax_ell, args.tol, args.mix) for B in Bs]
    workers = min(_threads(), len(payloads))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    E = np.array([r[0] for r in results])
    logB, logE = np.log(Bs), np.log(np.abs(E))
    slope = float(np.polyfit(logB, logE, 1)[0])
    local = np.gradient(logE, logB)

    buf = io.StringIO()
    prov = _provenance(args, lam=lam, slope=slope)
    buf.write(f"# provenance: {json.dumps(prov, sort_keys=False)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["beta", "B", "E", "calE", "mu", "mass", "slope"])
    for beta, B, (e, mu, mass), sl in zip(betas, Bs, results, local):
        writer.writerow([repr(float(v)) for v in (beta, B, e, cal_E(Z, B), mu, mass, sl)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_scales(args) -> int:
    from .scales import cal_E, confinement_errors, length_scales, regime

    if not args.Z > 0:
        raise ConfigError("--Z must be positive")
    B = _field_strength(args)
    Z = args.Z
    seam = Z ** (4.0 / 3.0)
    import warnings

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        conf = confinement_errors(Z, B)
    record = {
        "provenance": _provenance(args, resolved_B=B),
        "regime": regime(Z, B),
        "beta": B / seam,
        "cal_E": cal_E(Z, B),
        "length_scales": length_scales(Z, B).as_dict(),
        "confinement_errors": conf.as_dict(),
        "warnings": [str(w.message) for w in caught],
        "seams": {
            "weak_intermediate_B": seam,
            "weak_branch_at_seam": Z ** (7.0 / 3.0),
            "intermediate_branch_at_seam": seam**0.4 * Z**1.8,
            "intermediate_hyperstrong_B": 2.0 * Z**3,
            "intermediate_branch_at_upper_seam": (2.0 * Z**3) ** 0.4 * Z**1.8,
            "hyperstrong_branch_at_upper_seam": Z**3 * math.log(2.0) ** 2,
        },
    }
    _emit(_dump(record), args.out)
    return EXIT_OK


def landau_suite(seed: int, quick: bool = False) -> dict:
    """All lowest-level checks; returns named JSON-ready report tables."""
    from . import landau as L

    rng = np.random.default_rng(seed)
    B = 1.0
    basis = L.LandauBasis(B, 6)
    grid = basis.grid
    x1, x2 = grid.mesh()

    f = sum(
        (rng.normal() + 1j * rng.normal())
        * np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / 2.0)
        * np.cos(k1 * x1 + k2 * x2)
        for c1, c2, k1, k2 in rng.uniform(-2, 2, size=(3, 4))
    )
    pf = L.project_lll(B, f, grid)
    idem = grid.norm(L.project_lll(B, pf, grid) - pf) / grid.norm(f)

    elements = []
    for trace_scale in (1.0, 1.1):
        for k in range(2 if quick else 5):
            spec = L.J1Spec.random(B, rng, trace_scale=trace_scale)
            mat, viol = L.j1_lll_matrix(basis, spec)
            scale = B * float(np.max(np.abs(spec.b3(x1, x2))))
            for m in range(mat.shape[0]):
                for mp in range(mat.shape[1]):
                    z = mat[m, mp]
                    elements.append(
                        {
                            "spec": k,
                            "trace_scale": trace_scale,
                            "m": m,
                            "m_prime": mp,
                            "element": [float(z.real), float(z.imag)],
                            "relative": float(abs(z) / scale),
                            "tolerance": 1e-6 if trace_scale == 1.0 else 1e-3,
                        }
                    )

    schur = L.schur_commutator_constant(B)
    comm = L.commutator_check(B, grid, rng, pairs=5 if quick else 20)

    wells = []
    for _ in range(5 if quick else 20):
        depth = float(rng.uniform(0.5, 30.0))
        width = float(rng.uniform(0.3, 2.0))
        pad = width + 40.0 / math.sqrt(depth)
        x = np.arange(-pad, pad, min(0.01, 0.05 / math.sqrt(depth)))
        res = L.lt_check_1d(L.well_potential(x, depth, width), x)
        res.update(depth=depth, half_width=width)
        wells.append(res)

    span = np.logspace(-1.5, 0.0, 3 if quick else 7)
    norms = []
    for gamma in span:
        for a in span:
            r = L.cutoff_norm(float(gamma), float(a))
            norms.append({k: r[k] for k in ("gamma", "a", "norm", "bound_ratio")})

    return {
        "projector": {"idempotency": idem, "tolerance": 1e-8},
        "j1_elements": elements,
        "schur": schur,
        "kernel_mass": L.kernel_mass(B),
        "commutator": comm,
        "lieb_thirring": wells,
        "cutoff_norms": norms,
    }


def cmd_landau_check(args) -> int:
    suite = landau_suite(args.seed, quick=args.quick)
    prov = _provenance(args, quick=args.quick)
    out = Path(args.out) if args.out else None
    if out is None:
        _emit(_dump({"provenance": prov, **suite}), None)
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    for name, table in suite.items():
        _emit(_dump({"provenance": prov, name: table}), out / f"{name}.json")
    return EXIT_OK


def _common(p, *, problem=True):
    p.add_argument("--Z", type=float, required=True, help="nuclear charge")
    p.add_argument("--N", type=float, help="electron number")
    p.add_argument("--lambda", dest="lam", type=float, help="N / Z")
    p.add_argument("--B", type=float, help="field strength")
    if problem:
        p.add_argument("--beta", help="B / Z^(4/3)")
        p.add_argument("--grid-n", type=int, default=1200)
        p.add_argument("--rmax-ell", type=float, default=50.0)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--mix", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtfatom", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="minimise the functional, write a JSON record")
    _common(p)
    p.add_argument("--profile", help="also write the density as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("current", help="closed-form current and its split")
    _common(p)
    p.add_argument("--field-profile", choices=("constant", "bump", "polynomial"), default="bump")
    p.add_argument("--field-radius", type=float, default=2.0, help="in units of ell")
    p.add_argument("--mc-samples", type=int, default=0)
    p.set_defaults(func=cmd_current)

    p = sub.add_parser("sweep", help="energies along a log-spaced beta range, as CSV")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scales", help="energy and length scales, error terms")
    _common(p, problem=False)
    p.add_argument("--beta", type=float)
    p.set_defaults(func=cmd_scales)

    p = sub.add_parser("landau-check", help="lowest Landau level verification suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="fewer samples")
    p.add_argument("--out", help="directory for the JSON reports")
    p.set_defaults(func=cmd_landau_check)
    return ap


def main(argv=None) -> int:
    from .solver import ConvergenceError

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("solve", "current") and args.beta is not None:
        try:
            args.beta = float(args.beta)
        except ValueError:
            parser.error("--beta must be a number for this command")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mtfatom: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        tail = ", ".join(f"{r:.3e}" for r in exc.history[-5:])
        print(f"mtfatom: {exc} (last residuals: {tail})", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
