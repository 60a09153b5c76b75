"""Command-line interface and run orchestration.

Subcommands: groundstate, spectrum, convolve, reduce, concentrate,
validate.  Every run writes a key=value manifest (config snapshot, input
hashes, timings, invariant outcomes, artifact checksums), also on failure.
Exit codes: 0 success, 1 computational failure, 2 usage, 3 I/O.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LogChoquardError
from .fileio import (
    read_field,
    read_keyvalue,
    read_radial_profile,
    sha256_of,
    write_field,
    write_keyvalue,
    write_radial_profile,
)
from .grids import Field2D, Grid2D, RadialGrid
from .logkernel import cached_kernel_spectrum

log = logging.getLogger("logchoquard")

MEMORY_GUARD_NODES = 1 << 24  # nx*ny cap

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logchoquard",
        description="Planar log-Choquard ground states, spectra and "
                    "semiclassical concentration experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="key=value file; flags override its entries")
        p.add_argument("--log-level", default="INFO",
                       choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        p.add_argument("--cache-dir", default=os.environ.get("LOGCHOQUARD_CACHE"),
                       help="kernel cache directory (env LOGCHOQUARD_CACHE)")

    p = sub.add_parser("groundstate", help="solve the limiting radial ground state")
    common(p)
    p.add_argument("--a", type=float, default=1.0, help="linear coefficient V(x0)")
    p.add_argument("--rmax", type=float, default=12.0)
    p.add_argument("--n", type=int, default=1200)
    p.add_argument("--tol-residual", type=float, default=None,
                   help="override the Euler-Lagrange residual tolerance")
    p.add_argument("--out", required=True, help="radial profile CSV path")

    p = sub.add_parser("spectrum", help="eigen-analysis of the linearization")
    common(p)
    p.add_argument("--state", required=True,
                   help="base state: LCF2 field or radial CSV (lifted)")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--nx", type=int, default=256, help="grid size when lifting")
    p.add_argument("--box", type=float, default=24.0, help="box side when lifting")
    p.add_argument("--out", required=True, help="eigenvalue CSV path")

    p = sub.add_parser("convolve", help="free-space log potential of a density")
    common(p)
    p.add_argument("--in", dest="infile", required=True, help="LCF2 density")
    p.add_argument("--t", type=float, default=None, help="kernel truncation radius")
    p.add_argument("--out", required=True, help="LCF2 output")

    p = sub.add_parser("reduce", help="tabulate the reduced energy over a xi grid")
    common(p)
    p.add_argument("--potential", required=True, help="potential config file")
    p.add_argument("--eps", required=True, help="eps value or comma list")
    p.add_argument("--xi-grid", type=int, default=9)
    p.add_argument("--xi-max", type=float, default=0.5)
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--box", type=float, default=24.0)
    p.add_argument("--fp-tol", type=float, default=1e-10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="theta table CSV")

    p = sub.add_parser("concentrate", help="eps sweep locating the concentration point")
    common(p)
    p.add_argument("--potential", required=True)
    p.add_argument("--eps", required=True, help="comma list, e.g. 0.2,0.1,0.05")
    p.add_argument("--xi-grid", type=int, default=5)
    p.add_argument("--xi-max", type=float, default=0.5)
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--box", type=float, default=24.0)
    p.add_argument("--fp-tol", type=float, default=1e-10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--mode", choices=["minimize", "maximize"], default="minimize")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("validate", help="run the built-in oracle suite")
    common(p)
    p.add_argument("--out", default=None, help="optional report path")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    """Two-pass parse: flags override config-file entries override defaults."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            entries = read_keyvalue(known.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {known.config}: {exc}") from exc
        sub_parsers = parser._subparsers._group_actions[0].choices  # noqa: SLF001
        name = next((a for a in argv if not a.startswith("-")), None)
        if name in sub_parsers:
            valid = {a.dest for a in sub_parsers[name]._actions}  # noqa: SLF001
            bad = [k for k in entries if k.replace("-", "_") not in valid]
            if bad:
                raise UsageError(f"unknown config keys {bad} for {name}")
            sub_parsers[name].set_defaults(
                **{k.replace("-", "_"): v for k, v in entries.items()})
    args = parser.parse_args(argv)
    _validate(args)
    return args


def _validate(args: argparse.Namespace) -> None:
    nx = getattr(args, "nx", None)
    if nx is not None and nx * nx > MEMORY_GUARD_NODES:
        raise UsageError(
            f"grid {nx}x{nx} exceeds the memory guard of {MEMORY_GUARD_NODES} nodes"
        )
    for name in ("fp_tol", "tol", "tol_residual"):
        val = getattr(args, name, None)
        if val is not None and float(val) <= 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    n = getattr(args, "n", None)
    if n is not None and int(n) > MEMORY_GUARD_NODES:
        raise UsageError("radial grid exceeds the memory guard")


def _parse_eps_list(text) -> list[float]:
    try:
        eps = [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad eps list {text!r}") from exc
    if not eps or any(e <= 0 for e in eps):
        raise UsageError("eps values must be positive")
    return eps


def load_potential(path):
    from .semiclassical import PotentialSpec

    entries = read_keyvalue(path)
    kind = entries.get("kind", "quadratic-min")
    v0 = float(entries.get("v0", 1.0))
    x0 = tuple(float(t) for t in entries.get("x0", "0,0").split(","))
    H = np.array([
        [float(entries.get("h11", 1.0)), float(entries.get("h12", 0.0))],
        [float(entries.get("h12", 0.0)), float(entries.get("h22", 1.0))],
    ])
    flat = float(entries.get("flat_radius", 1.6))
    grad = (float(entries.get("g1", 0.0)), float(entries.get("g2", 0.0)))
    return PotentialSpec(kind, v0, x0, H, flat, grad)


def _csv_write(path, provenance: str, header: str, rows) -> None:
    lines = [f"# {provenance}", header]
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


class Manifest:
    """Run provenance; flushed to disk on both success and failure paths."""

    def __init__(self, args: argparse.Namespace, path: Path):
        self.path = Path(path)
        self.entries: dict[str, object] = {
            "tool": "logchoquard",
            "version": __version__,
            "subcommand": args.subcommand,
        }
        for key, value in sorted(vars(args).items()):
            if key not in ("subcommand",):
                self.entries[f"config.{key}"] = value
        self.t0 = time.perf_counter()
        self._stage_t = self.t0

    def input_file(self, label, path):
        try:
            self.entries[f"input.{label}.sha256"] = sha256_of(path)
        except OSError:
            self.entries[f"input.{label}.sha256"] = "unreadable"

    def stage(self, name):
        now = time.perf_counter()
        self.entries[f"timing.{name}_s"] = f"{now - self._stage_t:.3f}"
        self._stage_t = now

    def check(self, name, ok):
        self.entries[f"check.{name}"] = "pass" if ok else "FAIL"

    def artifact(self, path):
        self.entries[f"artifact.{Path(path).name}.sha256"] = sha256_of(path)

    def finish(self, status):
        self.entries["status"] = status
        self.entries["wall_clock_s"] = f"{time.perf_counter() - self.t0:.3f}"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        write_keyvalue(self.path, self.entries)


def _manifest_path(args) -> Path:
    out = getattr(args, "out", None)
    if out is None:
        return Path("logchoquard.manifest")
    out = Path(out)
    if args.subcommand == "concentrate":
        return out / "manifest.txt"
    return out.with_name(out.name + ".manifest")


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_groundstate(args, man: Manifest) -> int:
    from .groundstate import SolveOptions, fit_asymptotics, solve_ground_state

    opts = SolveOptions(rmax=args.rmax, n=args.n)
    if args.tol_residual is not None:
        opts.tol_residual = args.tol_residual
    rec = solve_ground_state(args.a, opts=opts)
    man.stage("solve")
    fit = fit_asymptotics(rec)
    man.stage("asymptotics")
    prov = {"created_by": "logchoquard groundstate", "operation": "groundstate",
            "params.a": args.a, "params.rmax": args.rmax, "params.n": args.n}
    write_radial_profile(args.out, rec.profile, prov)
    report = {
        "a": rec.a, "umax": rec.umax, "mass2": rec.mass2, "M": rec.M,
        "b0": rec.b0, "mu": fit.mu, "fit_drift": fit.drift,
        "fit_window": f"{fit.fit_window[0]:.4f},{fit.fit_window[1]:.4f}",
        "nehari_residual": rec.nehari_residual,
        "el_residual": rec.el_residual, "iterations": rec.iterations,
    }
    report_path = str(args.out) + ".report.txt"
    write_keyvalue(report_path, report)
    man.artifact(args.out)
    man.artifact(report_path)
    man.check("positivity", bool((rec.profile.values[:-1] > 0).all()))
    man.check("el_residual", rec.el_residual < opts.tol_residual)
    log.info("ground state: umax=%.6f mass2=%.6f b0=%.6f", rec.umax, rec.mass2, rec.b0)
    return EXIT_OK


def _load_state(args, man: Manifest) -> tuple[Field2D, object]:
    man.input_file("state", args.state)
    if str(args.state).endswith(".lcf2"):
        state = read_field(args.state)
        K = cached_kernel_spectrum(state.grid, cache_dir=args.cache_dir)
        return state, K
    from .groundstate import ground_state_field, solve_ground_state

    profile = read_radial_profile(args.state)
    rec = solve_ground_state(1.0, opts=None)  # re-solve for derived scalars
    grid = Grid2D(args.nx, args.nx, args.box, args.box)
    K = cached_kernel_spectrum(grid, cache_dir=args.cache_dir)
    if abs(profile.values[0] - rec.umax) > 1e-6 * rec.umax:
        # arbitrary radial state: lift without polishing
        from .grids import lift_radial

        return lift_radial(profile, grid), K
    return ground_state_field(rec, grid, K), K


def _cmd_spectrum(args, man: Manifest) -> int:
    from .linops import linearized_at, lowest_eigenpairs

    state, K = _load_state(args, man)
    man.stage("load")
    L = linearized_at(state, K)
    rep = lowest_eigenpairs(L, k=args.k, tol=args.tol)
    man.stage("eigensolve")
    prov = (f"logchoquard spectrum v1 k={args.k} tol={args.tol!r} "
            f"state={Path(args.state).name}")
    rows = [
        (i, float(rep.eigenvalues[i]), float(rep.residual_norms[i]))
        for i in range(len(rep.eigenvalues))
    ]
    _csv_write(args.out, prov, "index,eigenvalue,residual", rows)
    man.artifact(args.out)
    stem = Path(args.out).with_suffix("")
    for i, f in enumerate(rep.eigenfields):
        path = f"{stem}_mode{i}.lcf2"
        write_field(path, f, {"created_by": "logchoquard spectrum",
                              "operation": "eigenfield", "params.index": i,
                              "params.eigenvalue": float(rep.eigenvalues[i])})
        man.artifact(path)
    man.check("morse_index_1", rep.morse_index == 1)
    man.check("kernel_dim_2", rep.kernel_dim_numerical == 2)
    man.check("delta_positive", rep.delta_estimate > 0)
    log.info("spectrum: %s", np.array2string(rep.eigenvalues, precision=6))
    return EXIT_OK


def _cmd_convolve(args, man: Manifest) -> int:
    from .logkernel import convolve

    man.input_file("density", args.infile)
    rho = read_field(args.infile)
    K = cached_kernel_spectrum(rho.grid, T=args.t, cache_dir=args.cache_dir)
    man.stage("kernel")
    phi = convolve(rho, K)
    man.stage("convolve")
    write_field(args.out, phi, {"created_by": "logchoquard convolve",
                                "operation": "convolve",
                                "params.T": K.T, "params.method": K.method})
    man.artifact(args.out)
    return EXIT_OK


def _reduction_inputs(args, man: Manifest):
    from .groundstate import ground_state_field, solve_ground_state

    man.input_file("potential", args.potential)
    pot = load_potential(args.potential)
    gs = solve_ground_state(pot.v0)
    grid = Grid2D(args.nx, args.nx, args.box, args.box)
    K = cached_kernel_spectrum(grid, cache_dir=args.cache_dir)
    base = ground_state_field(gs, grid, K)
    man.stage("ground_state")
    return pot, gs, K, base


def _cmd_reduce(args, man: Manifest) -> int:
    from .reduction import ReductionContext, make_xi_grid, reduced_theta

    pot, gs, K, base = _reduction_inputs(args, man)
    eps_list = _parse_eps_list(args.eps)
    xi_grid, shape = make_xi_grid(args.xi_grid, args.xi_max)
    rows = []
    boundary = False
    for eps in eps_list:
        ctx = ReductionContext.build(gs, base, pot, eps, K, fp_tol=args.fp_tol)
        table = reduced_theta(ctx, xi_grid, shape, jobs=args.jobs)
        boundary |= table.boundary_minimum
        for i in range(xi_grid.shape[0]):
            rows.append((eps, float(xi_grid[i, 0]), float(xi_grid[i, 1]),
                         float(table.theta[i]), float(table.gamma[i]),
                         float(table.w_norms[i]), int(table.iterations[i]),
                         bool(table.converged[i])))
        man.stage(f"theta_eps_{eps:g}")
    prov = (f"logchoquard reduce v1 potential={Path(args.potential).name} "
            f"xi_grid={args.xi_grid} xi_max={args.xi_max!r} nx={args.nx} box={args.box!r}")
    _csv_write(args.out, prov, "eps,xi1,xi2,theta,gamma,w_norm,iters,converged", rows)
    man.artifact(args.out)
    man.check("interior_minimum", not boundary)
    return EXIT_OK


def _cmd_concentrate(args, man: Manifest) -> int:
    from .semiclassical import (
        ConcentrationOptions,
        IncompleteSweepError,
        run_concentration,
    )

    pot = load_potential(args.potential)
    man.input_file("potential", args.potential)
    eps_list = _parse_eps_list(args.eps)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    opts = ConcentrationOptions(nx=args.nx, box=args.box, xi_grid_n=args.xi_grid,
                                xi_max=args.xi_max, fp_tol=args.fp_tol,
                                jobs=args.jobs, mode=args.mode)
    status = EXIT_OK
    try:
        report = run_concentration(pot, eps_list, opts)
    except IncompleteSweepError as exc:
        report = exc.report
        status = EXIT_COMPUTE
        for eps, err in exc.failures.items():
            man.check(f"eps_{eps:g}", False)
            log.error("eps=%g failed: %s", eps, err)
    man.stage("sweep")
    pot_name = Path(args.potential).name
    for eps, table in report.tables.items():
        rows = [
            (eps, float(table.xi_grid[i, 0]), float(table.xi_grid[i, 1]),
             float(table.theta[i]), float(table.gamma[i]),
             float(table.w_norms[i]), int(table.iterations[i]),
             bool(table.converged[i]))
            for i in range(table.xi_grid.shape[0])
        ]
        path = outdir / f"theta_eps{eps:g}.csv"
        _csv_write(path, f"logchoquard concentrate v1 potential={pot_name} eps={eps!r}",
                   "eps,xi1,xi2,theta,gamma,w_norm,iters,converged", rows)
        man.artifact(path)
    if report.trajectory.size:
        path = outdir / "trajectory.csv"
        _csv_write(path, f"logchoquard concentrate v1 potential={pot_name}",
                   "eps,xi1,xi2,theta_min,w_norm,residual",
                   [tuple(float(x) for x in row) for row in report.trajectory])
        man.artifact(path)
    for eps in report.pairs:
        pair = report.pairs[eps]
        for tag, field in (("u", report.u_fields[eps]), ("v", pair.v_eps),
                           ("E", pair.E_eps)):
            path = outdir / f"{tag}_eps{eps:g}.lcf2"
            write_field(path, field, {"created_by": "logchoquard concentrate",
                                      "operation": f"{tag}_eps",
                                      "params.eps": eps,
                                      "params.potential": pot_name})
            man.artifact(path)
        man.check(f"identity_eps_{eps:g}", pair.identity_residual < 1e-8)
    summary = {"potential": pot_name, "eps_list": ",".join(f"{e:g}" for e in eps_list),
               "mode": args.mode, "b0": report.gs.b0, "mass2": report.gs.mass2}
    for row in report.trajectory:
        summary[f"xi_eps{row[0]:g}"] = f"{row[1]!r},{row[2]!r}"
        summary[f"theta_min_eps{row[0]:g}"] = repr(float(row[3]))
        summary[f"w_norm_eps{row[0]:g}"] = repr(float(row[4]))
    path = outdir / "summary.txt"
    write_keyvalue(path, summary)
    man.artifact(path)
    return status


def _cmd_validate(args, man: Manifest) -> int:
    from .validate import run_validation

    results = run_validation()
    width = max(len(name) for name, _, _ in results)
    lines = []
    ok_all = True
    for name, ok, detail in results:
        man.check(name, ok)
        ok_all &= ok
        line = f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
        man.artifact(args.out)
    return EXIT_OK if ok_all else EXIT_COMPUTE


def run(args: argparse.Namespace) -> int:
    """Dispatch a parsed config; always leaves a manifest behind."""
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    man = Manifest(args, _manifest_path(args))
    handlers = {
        "groundstate": _cmd_groundstate,
        "spectrum": _cmd_spectrum,
        "convolve": _cmd_convolve,
        "reduce": _cmd_reduce,
        "concentrate": _cmd_concentrate,
        "validate": _cmd_validate,
    }
    status = EXIT_COMPUTE
    try:
        status = handlers[args.subcommand](args, man)
        return status
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        status = EXIT_IO if isinstance(exc, OSError) else EXIT_COMPUTE
        return status
    except LogChoquardError as exc:
        log.error("%s", exc)
        status = EXIT_COMPUTE
        return status
    finally:
        try:
            man.finish("ok" if status == EXIT_OK else f"exit_{status}")
        except OSError:
            log.warning("could not write manifest %s", man.path)


def main(argv=None) -> None:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from exc
    raise SystemExit(run(args))


if __name__ == "__main__":
    main()
