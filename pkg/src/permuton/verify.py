"""Verification suites: every analytic formula is checked against an
independent route (closed-form oracle, brute-force enumeration, quadrature of
a different representation, or Monte Carlo).

``run_suite("quick")`` exercises the fast identities; ``run_suite("full")``
runs the complete battery, including the Monte Carlo / quadrature
cross-validations that take minutes. Each criterion reports one pass/fail
line; expensive artifacts (density grids, sample batches, simulation
ensembles) are computed once and shared.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.integrate import quad

from .baxter import empirical_intensity, enumerate_baxter, sample_baxter
from .conemc import (
    compare_histogram,
    mc_joint_histogram,
    simulate_exits,
    upper_exit_probability,
)
from .densities import (
    QuadratureSpec,
    baxter_density_grid,
    baxter_g,
    cone_duration_density,
    cone_exit_density,
    cone_joint_density,
    qmc_g_estimate,
)
from .perms import Permutation, count_pattern, inversion_count, is_baxter, is_baxter_naive
from .skew import estimate_occ, pooled_pattern_frequencies, simulate_skew_ensemble

__all__ = ["CheckResult", "VerifyContext", "run_suite", "CRITERIA", "QUICK_CRITERIA"]


@dataclass
class CheckResult:
    criterion: str
    passed: bool
    detail: str
    seconds: float

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.criterion}: {self.detail} ({self.seconds:.1f}s)"


@dataclass
class VerifyContext:
    """Shared artifacts for the verification criteria.

    ``quick`` shrinks the randomized workloads; the full-suite sizes are the
    pinned acceptance-scale parameters.
    """

    quick: bool = False
    threads: int | None = None
    seed: int = 20260808
    _cache: dict = field(default_factory=dict)

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    # -- shared artifacts ---------------------------------------------------

    def pb_grid_50(self):
        return self._get("pb50", lambda: baxter_density_grid(50, threads=self.threads))

    def pb_grid_48(self):
        return self._get("pb48", lambda: baxter_density_grid(48, threads=self.threads))

    def baxter_batch_n12(self):
        return self._get("batch12", lambda: sample_baxter(12, 5000, seed=self.seed))

    def skew_ensemble_baxter(self):
        """200 replicas at (corr, q) = (-1/2, 1/2)."""
        return self._get(
            "skew200",
            lambda: simulate_skew_ensemble(
                -0.5, 0.5, n_steps=2048, m=512, replicas=200, seed=self.seed, method="mcmc"
            ),
        )

    def skew_ensemble_semi(self):
        """40 replicas at the semi-Baxter parameters (-0.809, 0.3)."""
        return self._get(
            "skewsemi",
            lambda: simulate_skew_ensemble(
                -0.809, 0.3, n_steps=2048, m=512, replicas=40, seed=self.seed + 1, method="mcmc"
            ),
        )


def _integrate_time(f) -> float:
    """integral_0^inf f(t) dt, splitting at t=1 and mapping the tail t=1/s."""
    head, _ = quad(f, 1e-300, 1.0, limit=200, epsabs=1e-12, epsrel=1e-11)
    tail, _ = quad(lambda s: f(1.0 / s) / (s * s), 1e-12, 1.0, limit=200, epsabs=1e-12, epsrel=1e-11)
    return head + tail


def _timed(fn):
    t0 = time.time()
    out = fn()
    return out, time.time() - t0


def criterion_1_duration_normalization(ctx: VerifyContext) -> CheckResult:
    """Duration density integrates to 1 within 1e-6 at four boundary pairs."""

    def run():
        worst = 0.0
        for x, r in ((0.5, 0.5), (1.0, 2.0), (2.0, 1.0), (3.0, 0.2)):
            total = _integrate_time(lambda t: cone_duration_density(t, x, r))
            worst = max(worst, abs(total - 1.0))
        return worst

    worst, secs = _timed(run)
    return CheckResult(
        "1 cone duration normalization",
        worst < 1e-6,
        f"max |integral - 1| = {worst:.2e} (tol 1e-6)",
        secs,
    )


def criterion_2_image_chain(ctx: VerifyContext) -> CheckResult:
    """Time-integral of the joint law equals the exit law (1e-5 relative),
    and the exit law integrates to the harmonic measure 3 arg(z)/pi (1e-8)."""

    def run():
        rng = np.random.default_rng(ctx.seed)
        worst_rel = 0.0
        n_pts = 4 if ctx.quick else 10
        for _ in range(n_pts):
            x = rng.uniform(0.3, 1.5)
            y = rng.uniform(0.1, 0.9) * math.sqrt(3) * x
            r = rng.uniform(0.2, 2.0)
            total = _integrate_time(lambda t: cone_joint_density(x, y, t, r))
            p2 = cone_exit_density(x, y, r)
            worst_rel = max(worst_rel, abs(total - p2) / p2)
        worst_abs = 0.0
        for _ in range(4):
            x = rng.uniform(0.3, 1.5)
            y = rng.uniform(0.1, 0.9) * math.sqrt(3) * x
            val, _ = quad(
                lambda u: cone_exit_density(x, y, u ** (1.0 / 3.0)) / (3.0 * u ** (2.0 / 3.0)),
                0.0,
                np.inf,
                limit=200,
                epsabs=1e-12,
                epsrel=1e-12,
            )
            target = 3.0 * math.atan2(y, x) / math.pi
            worst_abs = max(worst_abs, abs(val - target))
        return worst_rel, worst_abs

    (worst_rel, worst_abs), secs = _timed(run)
    ok = worst_rel < 1e-5 and worst_abs < 1e-8
    return CheckResult(
        "2 method-of-images consistency",
        ok,
        f"max rel |int p1 dt - p2| = {worst_rel:.2e} (tol 1e-5); "
        f"max |int p2 dr - 3 arg/pi| = {worst_abs:.2e} (tol 1e-8)",
        secs,
    )


def criterion_3_mc_exit_law(ctx: VerifyContext) -> CheckResult:
    """Monte Carlo upper-ray exit probability within 3 binomial SE at four angles."""

    def run():
        n_paths = 20_000 if ctx.quick else 100_000
        step = 1e-3 if ctx.quick else 1e-4
        worst = 0.0
        details = []
        for k, ang in enumerate((math.pi / 12, math.pi / 9, math.pi / 6, math.pi / 4)):
            z = cmath.rect(1.0, ang)
            p = upper_exit_probability(z)
            sample = simulate_exits(z, step, n_paths, seed=ctx.seed + k)
            se = math.sqrt(p * (1 - p) / n_paths)
            dev = abs(sample.upper.mean() - p) / se
            details.append(f"{dev:.2f}")
            worst = max(worst, dev)
        return worst, details

    (worst, details), secs = _timed(run)
    return CheckResult(
        "3 MC vs analytic exit law",
        worst < 3.0,
        f"deviations {', '.join(details)} SE at 4 angles (tol 3 SE)",
        secs,
    )


T_EDGES_ACC = np.array([0.03, 0.08, 0.15, 0.25, 0.4, 0.6, 0.9, 1.4])
R_EDGES_ACC = np.array([0.2, 0.55, 0.9, 1.25, 1.65, 2.1, 2.7])


def criterion_4_mc_joint_law(ctx: VerifyContext) -> CheckResult:
    """10^6-path joint histogram within 5% relative on bins expecting >= 500."""

    def run():
        n_paths = 50_000 if ctx.quick else 1_000_000
        step = 1e-3 if ctx.quick else 1e-4
        hist = mc_joint_histogram(1 + 0.4j, step, n_paths, T_EDGES_ACC, R_EDGES_ACC, seed=ctx.seed)
        report = compare_histogram(hist, well_populated=500.0)
        n_big = int((report.expected >= 500).sum())
        return report, n_big

    (report, n_big), secs = _timed(run)
    tol = 0.12 if ctx.quick else 0.05
    return CheckResult(
        "4 MC vs analytic joint law",
        report.max_rel_dev < tol,
        f"max rel dev {report.max_rel_dev:.3f} on {n_big} bins with >=500 expected "
        f"(tol {tol}); chi2 p={report.p_value:.3f}",
        secs,
    )


def criterion_5_pb_grid(ctx: VerifyContext) -> CheckResult:
    """p_B grid: marginal uniformity within 1%, both symmetries within 3x the
    reported quadrature error, nonnegativity."""

    def run():
        grid = baxter_density_grid(8, threads=ctx.threads) if ctx.quick else ctx.pb_grid_50()
        v = grid.values
        marg = max(np.abs(grid.row_means() - 1.0).max(), np.abs(grid.col_means() - 1.0).max())
        err = grid.errors if grid.errors is not None else np.zeros_like(v)
        floor = 1e-8 * float(v.max())
        sym_t = np.abs(v - v.T) - 3.0 * (err + err.T) - floor
        sym_c = np.abs(v - v[::-1, ::-1]) - 3.0 * (err + err[::-1, ::-1]) - floor
        return grid, marg, float(sym_t.max()), float(sym_c.max())

    (grid, marg, sym_t, sym_c), secs = _timed(run)
    marg_tol = 0.2 if ctx.quick else 0.01
    ok = marg < marg_tol and sym_t <= 0 and sym_c <= 0 and (grid.values >= 0).all()
    return CheckResult(
        "5 p_B grid properties",
        ok,
        f"marginal dev {marg:.4f} (tol {marg_tol}); symmetry excesses "
        f"{max(sym_t, 0):.2e}/{max(sym_c, 0):.2e} beyond 3x error; min value {grid.values.min():.3g}",
        secs,
    )


G_POINTS = (
    (0.25, 0.25, 0.25, 0.25),
    (0.2, 0.3, 0.15, 0.35),
    (0.4, 0.1, 0.3, 0.2),
    (0.15, 0.15, 0.35, 0.35),
    (0.1, 0.45, 0.05, 0.4),
)


def criterion_6_g_vs_qmc(ctx: VerifyContext) -> CheckResult:
    """Tensor quadrature for g within 2% of the quasi-Monte Carlo oracle."""

    def run():
        n_pts = 2**17 if ctx.quick else 2**20
        reps = 4 if ctx.quick else 10
        worst = 0.0
        for a in G_POINTS:
            gq = baxter_g(*a).value
            mc, se = qmc_g_estimate(*a, n_points=n_pts, seed=ctx.seed, replicates=reps)
            worst = max(worst, abs(gq - mc) / abs(mc))
        return worst

    worst, secs = _timed(run)
    return CheckResult(
        "6 quadrature vs QMC oracle",
        worst < 0.02,
        f"max rel deviation {worst:.4f} over 5 points (tol 0.02)",
        secs,
    )


def criterion_7_empirical_vs_analytic(ctx: VerifyContext) -> CheckResult:
    """5000 uniform Baxter samples at n=12, binned 8x8, within total variation
    0.1 of the binned analytic density."""

    def run():
        if ctx.quick:
            batch = sample_baxter(8, 800, seed=ctx.seed)
            grid = baxter_density_grid(8, threads=ctx.threads)
            binned = grid.binned(8)
        else:
            batch = ctx.baxter_batch_n12()
            binned = ctx.pb_grid_48().binned(8)
        emp = empirical_intensity(batch, 8)
        tv = 0.5 * float(np.abs(emp.cells - binned).sum())
        return tv

    tv, secs = _timed(run)
    tol = 0.15 if ctx.quick else 0.1
    return CheckResult(
        "7 empirical Baxter vs analytic",
        tv < tol,
        f"total variation {tv:.4f} (tol {tol})",
        secs,
    )


def criterion_8_inversion_expectation(ctx: VerifyContext) -> CheckResult:
    """Mean inversion proportion 1/2: within 0.01 over the Baxter batch and
    within 0.02 over 200 skew replicas at (-1/2, 1/2)."""

    def run():
        if ctx.quick:
            batch = sample_baxter(8, 800, seed=ctx.seed)
            k2 = comb(8, 2)
        else:
            batch = ctx.baxter_batch_n12()
            k2 = comb(12, 2)
        bax_mean = float(np.mean([inversion_count(p) / k2 for p in batch.permutations]))
        if ctx.quick:
            ests = simulate_skew_ensemble(-0.5, 0.5, n_steps=512, m=128, replicas=40, seed=ctx.seed, method="mcmc", burn_in=800)
        else:
            ests = ctx.skew_ensemble_baxter()
        p21 = Permutation((2, 1))
        occ = [
            estimate_occ(e, p21, k_samples=2000, seed=ctx.seed + 100 + i).proportion
            for i, e in enumerate(ests)
        ]
        skew_mean = float(np.mean(occ))
        return bax_mean, skew_mean

    (bax_mean, skew_mean), secs = _timed(run)
    bax_tol = 0.02 if ctx.quick else 0.01
    skew_tol = 0.04 if ctx.quick else 0.02
    ok = abs(bax_mean - 0.5) < bax_tol and abs(skew_mean - 0.5) < skew_tol
    return CheckResult(
        "8 inversion expectation 1/2",
        ok,
        f"Baxter batch mean {bax_mean:.4f} (tol {bax_tol}); "
        f"skew ensemble mean {skew_mean:.4f} (tol {skew_tol})",
        secs,
    )


def criterion_9_skew_endpoints(ctx: VerifyContext) -> CheckResult:
    """q=0 gives phi(t)=t exactly on the grid (no inversions); q=1 gives
    inversion proportion > 0.98 at m=512."""

    def run():
        m = 128 if ctx.quick else 512
        n = 512 if ctx.quick else 2048
        e0 = simulate_skew_ensemble(-0.5, 0.0, n_steps=n, m=m, replicas=1, seed=ctx.seed, method="mcmc", burn_in=400)[0]
        e1 = simulate_skew_ensemble(-0.5, 1.0, n_steps=n, m=m, replicas=1, seed=ctx.seed, method="mcmc", burn_in=400)[0]
        identity_exact = bool(np.array_equal(e0.phi_samples[:, 1], e0.phi_samples[:, 0]))
        p21 = Permutation((2, 1))
        occ0 = estimate_occ(e0, p21, k_samples=2000, seed=ctx.seed).proportion
        occ1 = estimate_occ(e1, p21, k_samples=2000, seed=ctx.seed).proportion
        return identity_exact, occ0, occ1

    (identity_exact, occ0, occ1), secs = _timed(run)
    ok = identity_exact and occ0 == 0.0 and occ1 > 0.98
    return CheckResult(
        "9 exact skew endpoints",
        ok,
        f"q=0 phi==t exactly: {identity_exact}, occ(21)={occ0}; q=1 occ(21)={occ1:.4f} (tol > 0.98)",
        secs,
    )


def criterion_10_pattern_positivity(ctx: VerifyContext) -> CheckResult:
    """All 33 patterns of sizes 1-4 get strictly positive estimated
    proportions on pooled output at (-1/2, 1/2) and (-0.809, 0.3)."""

    def run():
        if ctx.quick:
            ensembles = [
                simulate_skew_ensemble(-0.5, 0.5, n_steps=512, m=128, replicas=10, seed=ctx.seed, method="mcmc", burn_in=600)
            ]
            tuples = 20_000
        else:
            ensembles = [ctx.skew_ensemble_baxter(), ctx.skew_ensemble_semi()]
            tuples = 100_000
        n_positive = 0
        n_total = 0
        worst_min = np.inf
        for ests in ensembles:
            n_total += 1  # size-1 pattern, trivially positive
            n_positive += 1
            for k in (2, 3, 4):
                freqs = pooled_pattern_frequencies(ests, k=k, k_samples=tuples, seed=ctx.seed + k)
                for pi in itertools.permutations(range(1, k + 1)):
                    n_total += 1
                    f = freqs.get(tuple(pi), 0.0)
                    worst_min = min(worst_min, f)
                    if f > 0:
                        n_positive += 1
        return n_positive, n_total, worst_min

    (n_positive, n_total, worst_min), secs = _timed(run)
    return CheckResult(
        "10 pattern positivity",
        n_positive == n_total,
        f"{n_positive}/{n_total} pattern-parameter pairs positive; smallest frequency {worst_min:.2e}",
        secs,
    )


def criterion_11_oracle_equivalences(ctx: VerifyContext) -> CheckResult:
    """Baxter test vs the literal definition scan (exhaustive n<=8 full,
    n<=6 quick); 22 Baxter permutations of size 4; pattern-count completeness."""

    def run():
        n_max = 6 if ctx.quick else 8
        for n in range(1, n_max + 1):
            for vals in itertools.permutations(range(1, n + 1)):
                p = Permutation(vals)
                if is_baxter(p) != is_baxter_naive(p):
                    return ("is_baxter mismatch at " + str(vals), False)
        if len(enumerate_baxter(4)) != 22:
            return ("enumerate_baxter(4) != 22", False)
        rng = np.random.default_rng(ctx.seed)
        sizes = range(2, 7) if ctx.quick else range(2, 10)
        for n in sizes:
            sigmas = [Permutation(tuple(int(v) + 1 for v in rng.permutation(n))) for _ in range(3)]
            if n <= 4:
                sigmas += [Permutation(v) for v in itertools.permutations(range(1, n + 1))]
            for sigma in sigmas:
                for k in range(1, min(4, n) + 1):
                    total = sum(
                        count_pattern(Permutation(pi), sigma).count
                        for pi in itertools.permutations(range(1, k + 1))
                    )
                    if total != comb(n, k):
                        return (f"completeness failed at n={n}, k={k}", False)
        return ("all oracle equivalences hold", True)

    (detail, ok), secs = _timed(run)
    return CheckResult("11 oracle equivalences", ok, detail, secs)


CRITERIA = [
    criterion_1_duration_normalization,
    criterion_2_image_chain,
    criterion_3_mc_exit_law,
    criterion_4_mc_joint_law,
    criterion_5_pb_grid,
    criterion_6_g_vs_qmc,
    criterion_7_empirical_vs_analytic,
    criterion_8_inversion_expectation,
    criterion_9_skew_endpoints,
    criterion_10_pattern_positivity,
    criterion_11_oracle_equivalences,
]

QUICK_CRITERIA = CRITERIA


def run_suite(
    suite: str = "quick",
    threads: int | None = None,
    out_json=None,
    echo=print,
) -> tuple[list[CheckResult], bool]:
    """Run the verification suite; returns the results and overall pass flag."""
    if suite not in ("quick", "full"):
        raise ValueError("suite must be 'quick' or 'full'")
    ctx = VerifyContext(quick=(suite == "quick"), threads=threads)
    results = []
    for crit in CRITERIA:
        res = crit(ctx)
        results.append(res)
        if echo:
            echo(res.line())
    all_ok = bool(all(r.passed for r in results))
    if out_json:
        payload = {
            "suite": suite,
            "passed": all_ok,
            "criteria": [
                {
                    "criterion": r.criterion,
                    "passed": r.passed,
                    "detail": r.detail,
                    "seconds": r.seconds,
                }
                for r in results
            ],
        }
        with open(out_json, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return results, all_ok
