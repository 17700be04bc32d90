"""Simulation of the skew Brownian permuton.

Construction: a two-dimensional correlated Gaussian loop conditioned to stay
in the nonnegative quadrant drives a family of coalescing skew walks, one per
time-grid point; the map t -> phi(t) built from the walks' signs pushes
Lebesgue measure forward to a random permuton. Pattern proportions are then
estimated by sampling point tuples from the result.

Excursion sampling provides two exact routes plus their combination:

* ``reject`` - draw pinned correlated bridges and keep those with a cyclic
  rotation lying in the quadrant. A rotation making one coordinate
  nonnegative must rotate at that coordinate's argmin, so a valid rotation
  exists iff the two argmins coincide and is then unique; accepting on that
  event and rotating samples exactly the quadrant-conditioned bridge law
  (cycle-lemma argument), at n times the plain rejection acceptance. The
  acceptance still decays like n^{1-pi/arccos(-corr)}, so this route is only
  practical for short loops or nonnegative correlation.
* ``mcmc`` - preconditioned Crank-Nicolson over bridges: propose
  sqrt(1-b^2) W + b W' with W' a fresh bridge and accept iff the proposal
  stays in the quadrant. The Gaussian parts cancel, so this is an exact
  Metropolis chain for the conditioned law; chains are burned in from a
  deterministic arch, with the proposal width adapted (then frozen) during
  the first half of burn-in. The test suite cross-validates this route
  against ``reject`` where the latter is feasible.

The discrete skew walk follows the driving loop's y-increments while
positive and the negated x-increments while negative; a step that would
touch or cross zero restarts from zero on the positive side with probability
q, taking the magnitude of the corresponding increment. All walks of one
replica share the increments and one time-indexed coin stream, so walks that
meet at zero coalesce and never split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .baxter import PermutonGrid
from .errors import CapabilityError, InputError
from .perms import Permutation

__all__ = [
    "Excursion2D",
    "CoalescentWalk",
    "SkewPermutonEstimate",
    "OccEstimate",
    "sample_quadrant_excursion",
    "coalescent_walk",
    "phi_map",
    "simulate_skew_ensemble",
    "estimate_occ",
    "pooled_pattern_frequencies",
]

DEFAULT_N_STEPS = 2048
DEFAULT_M = 512
DEFAULT_BURN_IN = 1500


@dataclass
class Excursion2D:
    """A discrete loop in the nonnegative quadrant, pinned to the origin."""

    xs: np.ndarray
    ys: np.ndarray
    corr: float

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise InputError("xs and ys must be 1-d arrays of equal length")
        if not -1.0 < self.corr < 1.0:
            raise InputError("corr must lie in (-1, 1)")
        tol = 1e-9
        if abs(self.xs[0]) > tol or abs(self.ys[0]) > tol or abs(self.xs[-1]) > tol or abs(self.ys[-1]) > tol:
            raise InputError("loop must start and end at the origin")
        if (self.xs < -tol).any() or (self.ys < -tol).any():
            raise InputError("loop must stay in the nonnegative quadrant")

    @property
    def n_steps(self) -> int:
        return len(self.xs) - 1


@dataclass
class CoalescentWalk:
    start_index: int
    z: np.ndarray
    q: float

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if (self.z[: self.start_index + 1] != 0).any():
            raise InputError("walk must be zero up to its start index")


@dataclass
class SkewPermutonEstimate:
    """One simulated permuton replica: grid plus the raw (t, phi) pairs."""

    grid: PermutonGrid
    phi_samples: np.ndarray  # (m, 2) columns (t, phi)
    corr: float
    q: float
    n_steps: int
    seed: int


class OccEstimate(tuple):
    """(proportion, stderr) of a pattern under a permuton estimate."""

    def __new__(cls, proportion: float, stderr: float):
        return super().__new__(cls, (proportion, stderr))

    @property
    def proportion(self) -> float:
        return self[0]

    @property
    def stderr(self) -> float:
        return self[1]


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


def _bridge_batch(rng: np.random.Generator, corr: float, n: int, batch: int) -> np.ndarray:
    """Correlated Gaussian bridges pinned to the origin: (batch, n+1, 2)."""
    chol = np.linalg.cholesky(np.array([[1.0, corr], [corr, 1.0]]) / n)
    inc = rng.standard_normal((batch, n, 2)) @ chol.T
    w = np.concatenate([np.zeros((batch, 1, 2)), np.cumsum(inc, axis=1)], axis=1)
    t = (np.arange(n + 1) / n)[None, :, None]
    return w - t * w[:, -1:, :]


def _vervaat_rotations(w: np.ndarray) -> list[np.ndarray]:
    """Quadrant excursions among a bridge batch via the common-argmin rotation."""
    x = w[:, :-1, 0]
    y = w[:, :-1, 1]
    ax = x.argmin(axis=1)
    ok = ax == y.argmin(axis=1)
    out = []
    for b in np.nonzero(ok)[0]:
        k = ax[b]
        path = np.concatenate([w[b, k:-1], w[b, : k + 1]], axis=0) - w[b, k]
        out.append(path)
    return out


def _sample_reject(
    corr: float, n: int, seed: int, count: int, max_attempts: int
) -> list[np.ndarray]:
    rng = _rng(seed, 0)
    got: list[np.ndarray] = []
    attempts = 0
    batch = max(1000, min(50_000, _batch_for(n)))
    while len(got) < count:
        if attempts >= max_attempts:
            raise CapabilityError(
                f"excursion rejection budget exhausted after {attempts} bridges at "
                f"corr={corr}, n_steps={n} (measured acceptance "
                f"{len(got) / max(attempts, 1):.3g}); use the mcmc sampler instead"
            )
        w = _bridge_batch(rng, corr, n, batch)
        got.extend(_vervaat_rotations(w))
        attempts += batch
    return got[:count]


def _batch_for(n: int) -> int:
    return max(1, 20_000_000 // max(n, 1))


def _quadrant_ok(w: np.ndarray) -> np.ndarray:
    return (w[..., 0].min(axis=-1) >= 0.0) & (w[..., 1].min(axis=-1) >= 0.0)


def _sample_mcmc(
    corr: float,
    n: int,
    seed: int,
    count: int,
    burn_in: int = DEFAULT_BURN_IN,
    beta0: float = 0.2,
) -> np.ndarray:
    """pCN ensemble: (count, n+1, 2) independent chains after burn-in."""
    rng = _rng(seed, 0)
    t = np.arange(n + 1) / n
    arch = 0.7 * np.sin(np.pi * t)
    w = np.broadcast_to(np.stack([arch, arch], axis=1), (count, n + 1, 2)).copy()
    beta = beta0
    window_hits = 0
    window_len = 50
    freeze_at = burn_in // 2
    for it in range(burn_in):
        xi = _bridge_batch(rng, corr, n, count)
        prop = np.sqrt(1.0 - beta * beta) * w + beta * xi
        ok = _quadrant_ok(prop)
        w[ok] = prop[ok]
        window_hits += ok.mean()
        if it < freeze_at and (it + 1) % window_len == 0:
            rate = window_hits / window_len
            window_hits = 0
            if rate < 0.15:
                beta = max(0.01, beta * 0.8)
            elif rate > 0.45:
                beta = min(0.6, beta * 1.2)
    return w


def sample_quadrant_excursion(
    corr: float,
    n_steps: int,
    seed: int,
    method: str = "auto",
    max_attempts: int = 1_000_000,
    burn_in: int = DEFAULT_BURN_IN,
) -> Excursion2D:
    """One correlated loop conditioned to stay in the nonnegative quadrant.

    ``method`` is "reject" (exact conditioned law, acceptance decays like a
    power of n_steps), "mcmc" (exact stationary law, finite burn-in), or
    "auto" to pick rejection only where its cost is reasonable.
    """
    _check_excursion_args(corr, n_steps)
    method = _resolve_method(method, corr, n_steps)
    if method == "reject":
        path = _sample_reject(corr, n_steps, seed, 1, max_attempts)[0]
    else:
        path = _sample_mcmc(corr, n_steps, seed, 1, burn_in=burn_in)[0]
    return Excursion2D(xs=path[:, 0].copy(), ys=path[:, 1].copy(), corr=corr)


def _check_excursion_args(corr: float, n_steps: int):
    if not -1.0 < corr < 1.0:
        raise InputError("corr must lie in (-1, 1)")
    if n_steps < 100:
        raise InputError("n_steps must be >= 100")


def _resolve_method(method: str, corr: float, n_steps: int) -> str:
    if method not in ("auto", "reject", "mcmc"):
        raise InputError(f"unknown excursion sampler {method!r}")
    if method != "auto":
        return method
    # expected bridges per accepted excursion ~ n^(p-1), p = pi / arccos(-corr)
    p = np.pi / np.arccos(-corr)
    expected_work = n_steps ** max(p - 1.0, 0.0) * n_steps
    return "reject" if expected_work <= 5e8 else "mcmc"


def _walk_coins(seed: int, n: int, q: float) -> np.ndarray:
    return _rng(seed, 1).random(n) < q


def coalescent_walk(exc: Excursion2D, q: float, u: int, seed: int) -> CoalescentWalk:
    """The skew walk started at step index u, driven by the loop's increments.

    The zero-contact coins are a function of (seed, time) only, shared by
    every walk on the same excursion, so walks from different starts that
    meet at zero coalesce and never split.
    """
    if not 0.0 <= q <= 1.0:
        raise InputError("q must lie in [0, 1]")
    n = exc.n_steps
    if not 0 <= u <= n:
        raise InputError(f"start index must lie in 0..{n}")
    dx = np.diff(exc.xs)
    dy = np.diff(exc.ys)
    coins = _walk_coins(seed, n, q)
    z = np.zeros(n + 1)
    for t in range(u, n):
        cur = z[t]
        if cur > 0.0:
            cand = cur + dy[t]
            crossed = cand <= 0.0
        elif cur < 0.0:
            cand = cur - dx[t]
            crossed = cand >= 0.0
        else:
            cand = 0.0
            crossed = True
        if crossed:
            z[t + 1] = abs(dy[t]) if coins[t] else -abs(dx[t])
        else:
            z[t + 1] = cand
    return CoalescentWalk(start_index=u, z=z, q=q)


def _phi_batch(
    paths: np.ndarray, q: float, m: int, coins: np.ndarray
) -> np.ndarray:
    """phi values at the m grid times for a batch of excursions.

    paths: (B, n+1, 2); coins: (B, n) boolean. Returns (B, m).

    Walk j starts at step index floor(j n / m). phi(t_j) counts, per the sign
    convention of the defining map, earlier walks currently negative plus the
    walk's own nonnegative visits to later grid times; both counters are
    accumulated online so no m x m matrix is stored.
    """
    B, n1, _ = paths.shape
    n = n1 - 1
    if m > n:
        raise InputError("time grid cannot be finer than the excursion")
    dx = np.diff(paths[..., 0], axis=1)
    dy = np.diff(paths[..., 1], axis=1)
    starts = (np.arange(m) * n) // m
    grid_of_step = -np.ones(n, dtype=int)
    grid_of_step[starts] = np.arange(m)
    z = np.zeros((B, m))
    n_started = 0  # walk start indices are increasing, so active walks form a prefix
    below = np.zeros((B, m))
    above = np.zeros((B, m))
    for t in range(n):
        gi = grid_of_step[t]
        if gi >= 0:
            if gi > 0:
                zz = z[:, :gi]
                below[:, gi] = (zz < 0.0).sum(axis=1)
                above[:, :gi] += zz >= 0.0
            n_started = gi + 1
        cur = z[:, :n_started]
        dyt = dy[:, t][:, None]
        dxt = dx[:, t][:, None]
        pos = cur > 0.0
        neg = cur < 0.0
        cand = np.where(pos, cur + dyt, np.where(neg, cur - dxt, 0.0))
        crossed = (pos & (cand <= 0.0)) | (neg & (cand >= 0.0)) | (~pos & ~neg)
        side = coins[:, t][:, None]
        restart = np.where(side, np.abs(dyt), -np.abs(dxt))
        z[:, :n_started] = np.where(crossed, np.broadcast_to(restart, cur.shape), cand)
    return (below + above) / m


def phi_map(
    exc: Excursion2D,
    q: float,
    m: int = DEFAULT_M,
    seed: int = 0,
    grid_resolution: int = 64,
) -> SkewPermutonEstimate:
    """The permuton estimate of one excursion: phi on an m-point time grid.

    phi(t_j) is the fraction of grid times x < t_j whose walk is negative at
    t_j plus the fraction of later grid times where t_j's own walk is
    nonnegative; the pairs (t_j, phi(t_j)) are binned into a PermutonGrid.
    """
    if m < 2:
        raise InputError("m must be >= 2")
    if not 0.0 <= q <= 1.0:
        raise InputError("q must lie in [0, 1]")
    paths = np.stack([exc.xs, exc.ys], axis=1)[None, :, :]
    coins = _walk_coins(seed, exc.n_steps, q)[None, :]
    phi = _phi_batch(paths, q, m, coins)[0]
    ts = np.arange(m) / m
    pairs = np.stack([ts, phi], axis=1)
    return SkewPermutonEstimate(
        grid=_pairs_to_grid(pairs, grid_resolution),
        phi_samples=pairs,
        corr=exc.corr,
        q=q,
        n_steps=exc.n_steps,
        seed=seed,
    )


def _pairs_to_grid(pairs: np.ndarray, resolution: int) -> PermutonGrid:
    R = resolution
    idx_x = np.minimum((pairs[:, 0] * R).astype(int), R - 1)
    idx_y = np.minimum((pairs[:, 1] * R).astype(int), R - 1)
    cells = np.zeros((R, R))
    np.add.at(cells, (idx_x, idx_y), 1.0 / len(pairs))
    return PermutonGrid(R, cells)


def simulate_skew_ensemble(
    corr: float,
    q: float,
    n_steps: int = DEFAULT_N_STEPS,
    m: int = DEFAULT_M,
    replicas: int = 1,
    seed: int = 0,
    method: str = "auto",
    grid_resolution: int = 64,
    burn_in: int = DEFAULT_BURN_IN,
) -> list[SkewPermutonEstimate]:
    """Independent permuton replicas sharing one seed layout.

    Excursion chains run as a batched ensemble; walks and phi values are
    vectorized across replicas. Deterministic given
    (seed, corr, q, n_steps, m, replicas, method).
    """
    _check_excursion_args(corr, n_steps)
    if not 0.0 <= q <= 1.0:
        raise InputError("q must lie in [0, 1]")
    if replicas < 1:
        raise InputError("replicas must be >= 1")
    method = _resolve_method(method, corr, n_steps)
    if method == "reject":
        paths = np.stack(_sample_reject(corr, n_steps, seed, replicas, 1_000_000 * replicas))
    else:
        paths = _sample_mcmc(corr, n_steps, seed, replicas, burn_in=burn_in)
    coins = _rng(seed, 1).random((replicas, n_steps)) < q
    phi = _phi_batch(paths, q, m, coins)
    ts = np.arange(m) / m
    out = []
    for b in range(replicas):
        pairs = np.stack([ts, phi[b]], axis=1)
        out.append(
            SkewPermutonEstimate(
                grid=_pairs_to_grid(pairs, grid_resolution),
                phi_samples=pairs,
                corr=corr,
                q=q,
                n_steps=n_steps,
                seed=seed,
            )
        )
    return out


# -- pattern proportion estimation -------------------------------------------


def _patterns_of_rows(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Row-wise permutation induced by points: rank ys after sorting by xs.

    Returns (rows, k) arrays of 1-based one-line notation.
    """
    order = np.argsort(xs, axis=1)
    ysorted = np.take_along_axis(ys, order, axis=1)
    return np.argsort(np.argsort(ysorted, axis=1), axis=1) + 1


def _has_row_ties(a: np.ndarray) -> np.ndarray:
    s = np.sort(a, axis=1)
    return (np.diff(s, axis=1) == 0).any(axis=1)


def _sample_tuples_from_pairs(
    rng: np.random.Generator, pairs_list: Sequence[np.ndarray], k: int, k_samples: int
) -> tuple[np.ndarray, np.ndarray]:
    """k-tuples of distinct grid indices from pooled replicas; phi ties are
    resampled (they have small probability and no consistent order)."""
    n_rep = len(pairs_list)
    m = len(pairs_list[0])
    all_phi = np.stack([p[:, 1] for p in pairs_list])  # (n_rep, m)
    xs = np.empty((k_samples, k))
    ys = np.empty((k_samples, k))
    need = np.arange(k_samples)
    guard = 0
    while need.size:
        guard += 1
        if guard > 200:
            raise InputError("could not draw tie-free tuples; degenerate estimate")
        rep = rng.integers(0, n_rep, size=need.size)
        idx = rng.integers(0, m, size=(need.size, k))
        phis = all_phi[rep[:, None], idx]
        bad = _has_row_ties(idx) | _has_row_ties(phis)
        good = ~bad
        rows = need[good]
        xs[rows] = idx[good] / m
        ys[rows] = phis[good]
        need = need[bad]
    return xs, ys


def estimate_occ(
    est, pattern: Permutation, k_samples: int = 2000, seed: int = 0
) -> OccEstimate:
    """Estimated occurrence proportion of ``pattern`` with binomial stderr.

    For a SkewPermutonEstimate the tuples are distinct grid indices of the
    (t, phi) samples, matching subset-based occurrence counting (the q=0
    estimate gives exactly 0 for the pattern 21). For a plain PermutonGrid
    the tuples are independent points drawn cell-by-mass with uniform jitter.
    """
    if k_samples < 100:
        raise InputError("k_samples must be >= 100")
    k = pattern.n
    rng = _rng(seed, 7)
    if isinstance(est, SkewPermutonEstimate):
        if k > len(est.phi_samples):
            raise InputError("pattern larger than the sample grid")
        xs, ys = _sample_tuples_from_pairs(rng, [est.phi_samples], k, k_samples)
    elif isinstance(est, PermutonGrid):
        xs, ys = _sample_points_from_grid(rng, est, k, k_samples)
    else:
        raise InputError("estimate must be a SkewPermutonEstimate or PermutonGrid")
    pats = _patterns_of_rows(xs, ys)
    hits = (pats == np.array(pattern.values)[None, :]).all(axis=1)
    p = float(hits.mean())
    return OccEstimate(p, float(np.sqrt(max(p * (1 - p), 1e-300) / k_samples)))


def _sample_points_from_grid(
    rng: np.random.Generator, grid: PermutonGrid, k: int, k_samples: int
) -> tuple[np.ndarray, np.ndarray]:
    R = grid.resolution
    masses = grid.cells.ravel()
    total = masses.sum()
    if total <= 0:
        raise InputError("grid has no mass")
    cdf = np.cumsum(masses / total)
    xs = np.empty((k_samples, k))
    ys = np.empty((k_samples, k))
    need = np.arange(k_samples)
    while need.size:
        u = rng.random((need.size, k))
        cells = np.searchsorted(cdf, u)
        ci, cj = np.unravel_index(cells, (R, R))
        px = (ci + rng.random((need.size, k))) / R
        py = (cj + rng.random((need.size, k))) / R
        bad = _has_row_ties(px) | _has_row_ties(py)
        good = ~bad
        rows = need[good]
        xs[rows] = px[good]
        ys[rows] = py[good]
        need = need[bad]
    return xs, ys


def pooled_pattern_frequencies(
    estimates: Sequence[SkewPermutonEstimate], k: int, k_samples: int, seed: int = 0
) -> dict[tuple[int, ...], float]:
    """Frequencies of every size-k pattern over tuples pooled across replicas."""
    if not estimates:
        raise InputError("need at least one replica")
    rng = _rng(seed, 8)
    xs, ys = _sample_tuples_from_pairs(rng, [e.phi_samples for e in estimates], k, k_samples)
    pats = _patterns_of_rows(xs, ys)
    freqs: dict[tuple[int, ...], float] = {}
    keys, counts = np.unique(pats, axis=0, return_counts=True)
    for row, c in zip(keys, counts):
        freqs[tuple(int(v) for v in row)] = c / k_samples
    return freqs
