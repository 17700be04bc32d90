"""Command-line interface.

Subcommands map one-to-one onto the library operations; every command that
writes files also writes a ``<out>.manifest.json`` recording the full
parameter map, seed, version, wall time, and a sha256 digest per output, so
a run is reproducible from its manifest alone.

Exit codes: 0 success, 2 input error, 3 capability error, 4 accuracy error,
5 verification failure. PERMUTON_THREADS overrides --threads where present.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from .baxter import empirical_intensity, sample_baxter, SampleBatch
from .conemc import compare_histogram, mc_joint_histogram
from .densities import (
    QuadratureSpec,
    baxter_density_grid,
    resolve_threads,
    separable_density_grid,
)
from .errors import InputError, PermutonError, VerificationError
from .gridio import (
    RunManifest,
    read_density_grid,
    read_permutations,
    read_permuton_grid,
    write_density_grid,
    write_histogram,
    write_manifest,
    write_permutations,
    write_permuton_grid,
)
from .perms import (
    Permutation,
    VincularPattern,
    contains_vincular,
    count_pattern,
)
from .skew import estimate_occ, simulate_skew_ensemble
from .verify import run_suite
from .baxter import PermutonGrid

__all__ = ["main"]


def _parse_pattern(text: str) -> VincularPattern:
    return VincularPattern.parse(text)


def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace("i", "j"))
    except ValueError as exc:
        raise InputError(f"bad complex start point {text!r}") from exc


def _parse_bins(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse "t0:t1:nt,r0:r1:nr" into bin edges."""
    try:
        t_spec, r_spec = text.split(",")
        t0, t1, nt = t_spec.split(":")
        r0, r1, nr = r_spec.split(":")
        t_edges = np.linspace(float(t0), float(t1), int(nt) + 1)
        r_edges = np.linspace(float(r0), float(r1), int(nr) + 1)
    except ValueError as exc:
        raise InputError(f"bad bins spec {text!r}; expected t0:t1:nt,r0:r1:nr") from exc
    return t_edges, r_edges


def _manifest(args: argparse.Namespace, subcommand: str, t0: float, outputs) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)}
    params = {k: (str(v) if isinstance(v, complex) else v) for k, v in params.items()}
    man = RunManifest(
        subcommand=subcommand,
        params=params,
        seed=getattr(args, "seed", None),
        wall_time_seconds=time.time() - t0,
    )
    for path in outputs:
        man.add_output(path)
    write_manifest(outputs[0], man)


def cmd_baxter_density(args) -> int:
    t0 = time.time()
    spec = QuadratureSpec(rel_tol=args.rel_tol, ell_nodes=args.ell_nodes, z_panels=args.z_panels)
    grid = baxter_density_grid(args.res, spec, threads=args.threads)
    write_density_grid(args.out, grid, wall_time_seconds=time.time() - t0)
    _manifest(args, "baxter-density", t0, [args.out, args.out + ".json"])
    print(f"wrote {args.out} (R={args.res}, norm_const={grid.norm_const:.6g}, "
          f"max_error={grid.max_error:.3g})")
    return 0


def cmd_separable_density(args) -> int:
    t0 = time.time()
    grid = separable_density_grid(args.q, args.res)
    write_density_grid(args.out, grid, wall_time_seconds=time.time() - t0)
    _manifest(args, "separable-density", t0, [args.out, args.out + ".json"])
    print(f"wrote {args.out} (q={args.q}, R={args.res}, total mass "
          f"{grid.cell_masses().sum():.6f})")
    return 0


def cmd_sample_baxter(args) -> int:
    t0 = time.time()
    batch = sample_baxter(args.n, args.count, seed=args.seed, streams=args.streams)
    write_permutations(args.out, batch.permutations)
    _manifest(args, "sample-baxter", t0, [args.out])
    print(f"wrote {args.count} Baxter permutations of size {args.n} to {args.out} "
          f"(measured acceptance rate {batch.acceptance_rate:.4g})")
    return 0


def cmd_empirical(args) -> int:
    t0 = time.time()
    perms = read_permutations(args.infile)
    n = perms[0].n
    if any(p.n != n for p in perms):
        raise InputError("all permutations in the batch must share one size")
    batch = SampleBatch(n=n, permutations=perms, seed=0, method="enumeration")
    grid = empirical_intensity(batch, args.grid)
    write_permuton_grid(args.out, grid)
    _manifest(args, "empirical", t0, [args.out])
    print(f"wrote empirical intensity grid R={args.grid} from {len(perms)} permutations to {args.out}")
    return 0


def cmd_skew_sim(args) -> int:
    t0 = time.time()
    ests = simulate_skew_ensemble(
        args.rho,
        args.q,
        n_steps=args.steps,
        m=args.m,
        replicas=args.replicas,
        seed=args.seed,
        method=args.method,
        grid_resolution=args.grid,
    )
    pooled = np.mean([e.grid.cells for e in ests], axis=0)
    grid = PermutonGrid(args.grid, pooled)
    write_permuton_grid(args.out, grid)
    occ_estimates = {}
    for pat_text in args.occ_patterns.split(","):
        pat = _parse_pattern(pat_text.strip())
        if pat.adjacent:
            raise InputError("occurrence estimation uses standard patterns only")
        per_rep = [
            estimate_occ(e, pat.base, k_samples=args.occ_samples, seed=args.seed + 31 + i).proportion
            for i, e in enumerate(ests)
        ]
        occ_estimates[str(pat.base)] = [
            float(np.mean(per_rep)),
            float(np.std(per_rep) / np.sqrt(len(per_rep))),
        ]
    summary = {
        "corr": args.rho,
        "q": args.q,
        "n_steps": args.steps,
        "m": args.m,
        "replicas": args.replicas,
        "occ_estimates": occ_estimates,
    }
    import json

    with open(args.out + ".json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    _manifest(args, "skew-sim", t0, [args.out, args.out + ".json"])
    print(f"wrote pooled permuton grid and summary for (rho={args.rho}, q={args.q}) to {args.out}")
    for name, (mean, se) in occ_estimates.items():
        print(f"  occ~({name}) = {mean:.4f} +- {se:.4f}")
    return 0


def cmd_occ(args) -> int:
    t0 = time.time()
    pat = _parse_pattern(args.pattern)
    if args.infile:
        perms = read_permutations(args.infile)
        if pat.adjacent:
            frac = float(np.mean([contains_vincular(p, pat) for p in perms]))
            print(f"fraction containing {pat}: {frac:.6f} over {len(perms)} permutations")
        else:
            props = [float(count_pattern(pat.base, p).proportion) for p in perms]
            print(f"mean occ~({pat.base}) = {np.mean(props):.6f} +- "
                  f"{np.std(props) / np.sqrt(len(props)):.6f} over {len(perms)} permutations")
    else:
        if pat.adjacent:
            raise InputError("grid-based estimation uses standard patterns only")
        if args.seed is None:
            raise InputError("grid-based estimation is randomized; --seed is required")
        grid = read_permuton_grid(args.grid)
        occ = estimate_occ(grid, pat.base, k_samples=args.samples, seed=args.seed)
        print(f"occ~({pat.base}) = {occ.proportion:.4f} +- {occ.stderr:.4f} "
              f"({args.samples} tuples)")
    _ = t0
    return 0


def cmd_cone_mc(args) -> int:
    t0 = time.time()
    start = _parse_complex(args.z)
    t_edges, r_edges = _parse_bins(args.bins)
    hist = mc_joint_histogram(start, args.step, args.paths, t_edges, r_edges, seed=args.seed)
    report = compare_histogram(hist)
    write_histogram(args.out, hist, report)
    _manifest(args, "cone-mc", t0, [args.out, args.out + ".json"])
    print(f"wrote histogram to {args.out}: chi2={report.chi_square:.1f} (dof {report.dof}, "
          f"p={report.p_value:.3f}), max rel dev {report.max_rel_dev:.4f}")
    return 0


def cmd_verify(args) -> int:
    _, ok = run_suite(args.suite, threads=args.threads, out_json=args.out)
    if not ok:
        raise VerificationError("verification suite failed")
    print(f"{args.suite} suite passed")
    return 0


def _add_threads(p: argparse.ArgumentParser):
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (default: PERMUTON_THREADS or cpu count)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="permuton",
        description="Permuton densities, Baxter sampling, cone-exit Monte Carlo, "
                    "and skew Brownian permuton simulation",
    )
    ap.add_argument("--version", action="version", version=f"permuton {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("baxter-density", help="expected Baxter permuton density grid")
    p.add_argument("--res", type=int, default=50)
    p.add_argument("--rel-tol", type=float, default=1e-3, dest="rel_tol")
    p.add_argument("--ell-nodes", type=int, default=48, dest="ell_nodes")
    p.add_argument("--z-panels", type=int, default=64, dest="z_panels")
    p.add_argument("--out", required=True)
    _add_threads(p)
    p.set_defaults(func=cmd_baxter_density)

    p = sub.add_parser("separable-density", help="biased separable permuton density grid")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--res", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_separable_density)

    p = sub.add_parser("sample-baxter", help="uniform Baxter permutations by rejection")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--streams", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_baxter)

    p = sub.add_parser("empirical", help="empirical intensity grid from a permutation file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--grid", type=int, required=True, help="grid resolution")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_empirical)

    p = sub.add_parser("skew-sim", help="simulate the skew Brownian permuton")
    p.add_argument("--rho", type=float, required=True, help="driving correlation in (-1,1)")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--steps", type=int, default=2048)
    p.add_argument("--m", type=int, default=512, help="time-grid size")
    p.add_argument("--grid", type=int, default=64, help="output grid resolution")
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--method", choices=("auto", "reject", "mcmc"), default="auto")
    p.add_argument("--occ-patterns", default="12,21", dest="occ_patterns")
    p.add_argument("--occ-samples", type=int, default=2000, dest="occ_samples")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_skew_sim)

    p = sub.add_parser("occ", help="pattern occurrence proportions")
    p.add_argument("--pattern", required=True, help='standard "2413" or vincular "2-41-3"')
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--in", dest="infile")
    g.add_argument("--grid", help="PermutonGrid CSV")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_occ)

    p = sub.add_parser("cone-mc", help="Monte Carlo exit law of the pi/3 wedge")
    p.add_argument("--z", required=True, help='start point, e.g. "1+0.4i"')
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--bins", default="0.03:1.4:7,0.2:2.7:6", help="t0:t1:nt,r0:r1:nr")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cone_mc)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--suite", choices=("quick", "full"), default="quick")
    p.add_argument("--out", default=None, help="JSON report path")
    _add_threads(p)
    p.set_defaults(func=cmd_verify)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if hasattr(args, "threads"):
            args.threads = resolve_threads(args.threads)
        return args.func(args)
    except PermutonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
