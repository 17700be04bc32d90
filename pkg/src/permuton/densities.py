"""Closed-form permuton densities and the quadrature machinery behind them.

Evaluators:

* ``rho(t, x, r)`` - the heat-kernel combination
  ``((3rx/2t - 1) e^{-(r^2+x^2-rx)/2t} + e^{-(x+r)^2/2t}) / t^2``.
* ``cone_duration_density`` - duration density of a Brownian excursion in the
  wedge of opening pi/3 between two boundary points; equals
  ``rho(t,x,r) (x^3+r^3)^2 / (18 x^2 r^2)``.
* ``cone_joint_density`` / ``cone_exit_density`` - joint (duration, exit
  radius) law and exit-radius law of Brownian motion killed on leaving the
  wedge, from the six-image reflection sum and from the conformal map
  ``z -> z^3`` respectively.
* ``baxter_g`` - the four-fold positive-orthant integral of the cyclic
  product ``rho(a1,l1,l2) rho(a2,l2,l3) rho(a3,l3,l4) rho(a4,l4,l1)``.
* ``baxter_density_point`` / ``baxter_density_grid`` - the expected Baxter
  permuton density: the one-dimensional z-integral of ``g`` along the fiber
  ``(y-z, z, x-z, 1+z-x-y)``, normalized to unit mass on the grid.
* ``separable_density_point`` / ``separable_density_grid`` - the biased
  Brownian separable permuton density, whose formula carries its own
  normalizing constant.

The l-integral uses the substitution ``l = s u/(1-u)`` with ``s = sqrt(max
a_i)`` and tensor Gauss-Legendre nodes on (0,1); the cyclic structure lets the
4-d tensor sum collapse to a trace of a product of four N x N matrices, so a
48-node rule costs three small matmuls instead of 48^4 integrand calls. The
z-integral uses Gauss-Legendre panels graded toward both endpoints, where the
integrand vanishes linearly but with steep derivatives. Every estimate is
returned with a two-level refinement error bound.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import AccuracyError, InputError

__all__ = [
    "QuadratureSpec",
    "DensityGrid",
    "GEstimate",
    "rho",
    "cone_duration_density",
    "cone_joint_density",
    "cone_joint_density_images",
    "cone_exit_density",
    "baxter_g",
    "baxter_density_point",
    "baxter_density_grid",
    "separable_density_point",
    "separable_density_grid",
    "qmc_g_estimate",
    "resolve_threads",
]

SQRT3 = np.sqrt(3.0)


def _rho_raw(t, x, r):
    # no domain checks; t, x, r broadcastable arrays with t > 0
    return (
        (3.0 * r * x / (2.0 * t) - 1.0) * np.exp(-(r * r + x * x - r * x) / (2.0 * t))
        + np.exp(-((x + r) ** 2) / (2.0 * t))
    ) / (t * t)


def rho(t, x, r):
    """The kernel ((3rx/2t - 1) e^{-(r^2+x^2-rx)/2t} + e^{-(x+r)^2/2t}) / t^2.

    Symmetric in (x, r); vanishes at x=0 or r=0; positive for t, x, r > 0
    (checked statistically in the test suite, not proved here).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if (t <= 0).any():
        raise InputError("rho requires t > 0")
    if (x < 0).any() or (r < 0).any():
        raise InputError("rho requires x >= 0 and r >= 0")
    out = _rho_raw(t, x, r)
    return float(out) if out.ndim == 0 else out


def cone_duration_density(t, x, r):
    """Density in t of the duration of a wedge excursion between boundary
    points at radii x and r: rho(t,x,r) (x^3+r^3)^2 / (18 x^2 r^2)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if (t <= 0).any() or (x <= 0).any() or (r <= 0).any():
        raise InputError("cone_duration_density requires t, x, r > 0")
    out = _rho_raw(t, x, r) * (x**3 + r**3) ** 2 / (18.0 * x * x * r * r)
    return float(out) if out.ndim == 0 else out


def _require_open_cone(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if (y <= 0).any() or (y >= SQRT3 * x).any():
        raise InputError("point must lie strictly inside the wedge 0 < arg(z) < pi/3")
    return x, y


def cone_joint_density(x, y, t, r):
    """Joint density p1(x,y,t,r) of (duration, upper-ray exit radius) for
    Brownian motion from x+iy killed on leaving the pi/3 wedge.

    Three-term form of the six-image reflection sum:
    (1/2 pi t^2) [ ((sqrt3 x - y)/2) e^{-(x^2+y^2+r^2-r(x+sqrt3 y))/2t}
                 - ((sqrt3 x + y)/2) e^{-(x^2+y^2+r^2-r(x-sqrt3 y))/2t}
                 + y e^{-(x^2+y^2+r^2+2rx)/2t} ].
    """
    x, y = _require_open_cone(x, y)
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if (t <= 0).any() or (r <= 0).any():
        raise InputError("cone_joint_density requires t > 0 and r > 0")
    s2 = x * x + y * y + r * r
    out = (
        (SQRT3 * x - y) / 2.0 * np.exp(-(s2 - r * (x + SQRT3 * y)) / (2.0 * t))
        - (SQRT3 * x + y) / 2.0 * np.exp(-(s2 - r * (x - SQRT3 * y)) / (2.0 * t))
        + y * np.exp(-(s2 + 2.0 * r * x) / (2.0 * t))
    ) / (2.0 * np.pi * t * t)
    return float(out) if out.ndim == 0 else out


# The six reflections of the pi/3 wedge: images of e1 and e2 under
# T_0 = id, T_j = F_j T_{j-1} with F_j the reflection about y = tan(j pi/3) x.
_IMAGE_E1 = np.exp(1j * np.array([0.0, 2 * np.pi / 3, 2 * np.pi / 3, 4 * np.pi / 3, 4 * np.pi / 3, 0.0]))
_IMAGE_E2 = np.array(
    [1j, np.exp(1j * np.pi / 6), -np.exp(1j * np.pi / 6), np.exp(1j * 5 * np.pi / 6), -np.exp(1j * 5 * np.pi / 6), -1j]
)
_IMAGE_SIGN = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])


def cone_joint_density_images(x, y, t, r):
    """p1 evaluated directly as the alternating sum over the six wedge images.

    Independent of the reduced three-term form; kept as a cross-check route.
    """
    x, y = _require_open_cone(x, y)
    if t <= 0 or r <= 0:
        raise InputError("cone_joint_density_images requires t > 0 and r > 0")
    zt = complex((x + SQRT3 * y) / 2.0, (SQRT3 * x - y) / 2.0)  # reflection about the bisector
    total = 0.0
    for k in range(6):
        w = zt - r * _IMAGE_E1[k]
        dot = zt.real * _IMAGE_E2[k].real + zt.imag * _IMAGE_E2[k].imag
        total += _IMAGE_SIGN[k] * np.exp(-abs(w) ** 2 / (2.0 * t)) * dot
    return total / (4.0 * np.pi * t * t)


def cone_exit_density(x, y, r):
    """Density p2(x,y,r) in the exit radius r on the upper ray of the wedge:
    (3 r^2 / pi) Im(z^3) / ((r^3 + Re(z^3))^2 + Im(z^3)^2), via z -> z^3."""
    x, y = _require_open_cone(x, y)
    r = np.asarray(r, dtype=float)
    if (r <= 0).any():
        raise InputError("cone_exit_density requires r > 0")
    re3 = x**3 - 3.0 * x * y * y
    im3 = 3.0 * x * x * y - y**3
    out = (3.0 * r * r / np.pi) * im3 / ((-(r**3) - re3) ** 2 + im3 * im3)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and node budgets for the g / p_B quadrature.

    ell_nodes is the Gauss-Legendre node count per l-axis; z_panels is the
    node budget of the endpoint-graded z rule; ell_cut truncates l nodes
    beyond ell_cut Gaussian widths, where the integrand has underflowed.
    """

    rel_tol: float = 1e-3
    ell_nodes: int = 48
    z_panels: int = 64
    ell_cut: float = 20.0

    def __post_init__(self):
        if not 0 < self.rel_tol <= 0.1:
            raise InputError("rel_tol must lie in (0, 0.1]")
        if self.ell_nodes < 8 or self.z_panels < 8:
            raise InputError("node counts must be >= 8")
        if self.ell_cut <= 1:
            raise InputError("ell_cut must exceed 1")


class GEstimate(NamedTuple):
    value: float
    error: float


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl01(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        xs, ws = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (xs + 1.0), 0.5 * ws)
    return _GL_CACHE[n]


def _g_trace(A: np.ndarray, nodes: int, ell_cut: float) -> np.ndarray:
    """g at a batch of a-vectors: A (B,4) -> (B,).

    Writing B_i[j,k] = sqrt(w^i_j w^{i+1}_k) rho(a_i, l^i_j, l^{i+1}_k) with
    per-axis node sets, the tensor quadrature sum of the cyclic product is
    tr(B_1 B_2 B_3 B_4). Axis i carries l_i, which couples to a_{i-1} and
    a_i; its substitution scale is the harmonic combination
    sqrt(2 a_{i-1} a_i / (a_{i-1} + a_i)), which keeps the rule accurate even
    when the a_i span several orders of magnitude (a single global scale
    loses several percent near the square's boundary).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    u, w = _gl01(nodes)
    keep = u / (1.0 - u) <= ell_cut
    u, w = u[keep], w[keep]
    ratio = (u / (1.0 - u))[None, :]
    jac = (w / (1.0 - u) ** 2)[None, :]
    prev = np.roll(A, 1, axis=1)
    scales = np.sqrt(2.0 * prev * A / (prev + A))  # (B,4): scale of l_i
    ells = [scales[:, i : i + 1] * ratio for i in range(4)]
    sqs = [np.sqrt(scales[:, i : i + 1] * jac) for i in range(4)]
    with np.errstate(under="ignore"):
        M = None
        for i in range(4):
            ip1 = (i + 1) % 4
            B = _rho_raw(
                A[:, i][:, None, None], ells[i][:, :, None], ells[ip1][:, None, :]
            ) * (sqs[i][:, :, None] * sqs[ip1][:, None, :])
            M = B if M is None else M @ B
    return np.einsum("bii->b", M)


def _g_two_level(A: np.ndarray, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Fine value and two-level error estimate for a batch of a-vectors."""
    coarse_nodes = max(6, (2 * spec.ell_nodes) // 3)
    fine = _g_trace(A, spec.ell_nodes, spec.ell_cut)
    coarse = _g_trace(A, coarse_nodes, spec.ell_cut)
    return fine, np.abs(fine - coarse)


def baxter_g(a1, a2, a3, a4, spec: QuadratureSpec = QuadratureSpec(), kernel=None) -> GEstimate:
    """The positive-orthant integral of the cyclic product of four rho kernels.

    Returns the estimate and a two-level refinement error bound; escalates the
    node count once before raising AccuracyError. ``kernel`` substitutes the
    rho factor (used by the rescaling-invariance checks).
    """
    a = np.array([a1, a2, a3, a4], dtype=float)
    if (a <= 0).any():
        raise InputError("baxter_g requires all a_i > 0")
    if kernel is not None:
        return _g_generic_kernel(a, spec, kernel)
    fine, err = _g_two_level(a[None, :], spec)
    value, error = float(fine[0]), float(err[0])
    if error <= spec.rel_tol * max(abs(value), 1e-300):
        return GEstimate(value, error)
    bigger = replace(spec, ell_nodes=2 * spec.ell_nodes)
    fine, err = _g_two_level(a[None, :], bigger)
    value, error = float(fine[0]), float(err[0])
    if error <= spec.rel_tol * max(abs(value), 1e-300):
        return GEstimate(value, error)
    raise AccuracyError(
        f"g quadrature did not reach rel_tol={spec.rel_tol} at a={tuple(a)}; "
        f"best estimate {value} with error bound {error}",
        estimate=value,
        error_bound=error,
    )


def _g_generic_kernel(a: np.ndarray, spec: QuadratureSpec, kernel: Callable) -> GEstimate:
    # same trace construction with an arbitrary kernel(t; x, r)
    def trace(nodes: int) -> float:
        u, w = _gl01(nodes)
        keep = u / (1.0 - u) <= spec.ell_cut
        u, w = u[keep], w[keep]
        prev = np.roll(a, 1)
        scales = np.sqrt(2.0 * prev * a / (prev + a))
        ells = [s * u / (1.0 - u) for s in scales]
        sqs = [np.sqrt(w * s / (1.0 - u) ** 2) for s in scales]
        with np.errstate(under="ignore"):
            M = None
            for i in range(4):
                ip1 = (i + 1) % 4
                B = kernel(a[i], ells[i][:, None], ells[ip1][None, :]) * (
                    sqs[i][:, None] * sqs[ip1][None, :]
                )
                M = B if M is None else M @ B
        return float(np.trace(M))

    fine = trace(spec.ell_nodes)
    coarse = trace(max(6, (2 * spec.ell_nodes) // 3))
    return GEstimate(fine, abs(fine - coarse))


def _z_rule(zlo: float, zhi: float, panels: int, nodes_per_panel: int = 8):
    """Gauss-Legendre nodes/weights on panels graded toward both endpoints."""
    edges = zlo + (zhi - zlo) * 0.5 * (1.0 - np.cos(np.pi * np.arange(panels + 1) / panels))
    u, w = _gl01(nodes_per_panel)
    zs = (edges[:-1, None] + np.diff(edges)[:, None] * u[None, :]).ravel()
    ws = (np.diff(edges)[:, None] * w[None, :]).ravel()
    return zs, ws


def _pb_point_raw(x: float, y: float, spec: QuadratureSpec, kernel=None) -> GEstimate:
    zlo = max(0.0, x + y - 1.0)
    zhi = min(x, y)
    if zhi - zlo <= 1e-12:  # degenerate fiber
        return GEstimate(0.0, 0.0)
    fine_panels = max(2, spec.z_panels // 16)

    def integral(panels: int, nodes: int) -> float:
        zs, ws = _z_rule(zlo, zhi, panels)
        A = np.stack([y - zs, zs, x - zs, 1.0 + zs - x - y], axis=1)
        A = np.clip(A, 1e-300, None)
        if kernel is None:
            vals = _g_trace(A, nodes, spec.ell_cut)
        else:
            vals = np.array([_g_generic_kernel(a, replace(spec, ell_nodes=nodes), kernel).value for a in A])
        return float(np.sum(ws * vals))

    fine = integral(fine_panels, spec.ell_nodes)
    coarse = integral(max(1, fine_panels // 2), max(6, (2 * spec.ell_nodes) // 3))
    return GEstimate(fine, abs(fine - coarse))


def baxter_density_point(x: float, y: float, spec: QuadratureSpec = QuadratureSpec(), kernel=None) -> GEstimate:
    """Unnormalized expected-Baxter-permuton density at an interior point.

    Integrates g over z in (max(0,x+y-1), min(x,y)) along the fiber
    (y-z, z, x-z, 1+z-x-y); 0 when the range is empty. The normalizing
    constant is fixed at the grid level.
    """
    if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
        raise InputError("baxter_density_point requires (x, y) in the open unit square")
    est = _pb_point_raw(x, y, spec, kernel=kernel)
    if est.error > spec.rel_tol * max(abs(est.value), 1e-12) and est.value != 0.0:
        finer = replace(spec, z_panels=2 * spec.z_panels, ell_nodes=2 * spec.ell_nodes)
        est2 = _pb_point_raw(x, y, finer, kernel=kernel)
        if est2.error > spec.rel_tol * max(abs(est2.value), 1e-12):
            raise AccuracyError(
                f"p_B quadrature did not converge at ({x}, {y}): "
                f"estimate {est2.value}, error bound {est2.error}",
                estimate=est2.value,
                error_bound=est2.error,
            )
        return est2
    return est


@dataclass
class DensityGrid:
    """R x R midpoint samples of an analytic density on the unit square.

    values[i, j] is the density at ((i+0.5)/R, (j+0.5)/R); norm_const is the
    constant the raw quadrature was multiplied by so the grid has unit mass
    (1.0 for densities whose formula carries its own constant).
    """

    resolution: int
    values: np.ndarray
    norm_const: float
    spec: QuadratureSpec
    max_error: float = 0.0
    errors: np.ndarray | None = None  # per-cell error bounds, same scale as values

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.resolution, self.resolution):
            raise InputError("values shape must match resolution")
        if (self.values < 0).any():
            raise InputError("density values must be nonnegative")
        if self.errors is not None:
            self.errors = np.asarray(self.errors, dtype=float)

    def cell_masses(self) -> np.ndarray:
        return self.values / self.resolution**2

    def row_means(self) -> np.ndarray:
        """Approximate x-marginal density at each row midpoint."""
        return self.values.mean(axis=1)

    def col_means(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def binned(self, coarse: int) -> np.ndarray:
        """Cell masses aggregated to a coarse x coarse grid (coarse | R)."""
        R = self.resolution
        if R % coarse != 0:
            raise InputError(f"binning needs {coarse} to divide {R}")
        f = R // coarse
        m = self.cell_masses()
        return m.reshape(coarse, f, coarse, f).sum(axis=(1, 3))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else PERMUTON_THREADS, else cpu count."""
    if threads is not None and threads >= 1:
        return int(threads)
    env = os.environ.get("PERMUTON_THREADS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def _pb_chunk(args):
    xy, spec = args
    vals = np.empty(len(xy))
    errs = np.empty(len(xy))
    for i, (x, y) in enumerate(xy):
        est = baxter_density_point(float(x), float(y), spec)
        vals[i] = est.value
        errs[i] = est.error
    return vals, errs


def _pb_cell_rules(resolution: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluation points and cell-average weights for every grid cell.

    The density is smooth inside the square but vanishes like sqrt(dist) at
    the edges and diverges like 1/r at the four corners (three arguments of
    the cyclic integral collapse there), so midpoint values misstate
    boundary-cell averages by several percent at any resolution (the sqrt
    profile alone biases the midpoint of the second cell layer by +0.5%
    independently of R). Cells touching an edge use a tensor rule graded into
    the edge (y = h s^2); cells touching a corner are integrated in polar
    coordinates around it, where r * density is bounded; cells within four
    layers of the boundary use a plain tensor average; deep interior cells
    keep the midpoint sample.

    Returns (points (K,2), weights (K,), owner cell index (K,)); the weights
    of one cell sum to 1 and turn point values into the cell-average value.
    """
    R = resolution
    h = 1.0 / R
    pts, wts, owner = [], [], []

    u4, w4 = _gl01(4)
    u6, w6 = _gl01(6)
    # graded 1-d rule on (0,1) clustering at 0: y = s^2, dy = 2s ds
    gy = u6**2
    gw = w6 * 2.0 * u6
    uth, wth = _gl01(24)
    ur, wr = _gl01(8)

    def add(i, j, p, w):
        pts.append(p)
        wts.append(w)
        owner.append(i * R + j)

    for i in range(R):
        for j in range(R):
            on_x = i in (0, R - 1)
            on_y = j in (0, R - 1)
            x0, y0 = i * h, j * h
            depth = min(i, j, R - 1 - i, R - 1 - j)
            if not on_x and not on_y:
                if depth <= 3:
                    PX, PY = np.meshgrid(x0 + h * u4, y0 + h * u4, indexing="ij")
                    add(i, j, np.stack([PX.ravel(), PY.ravel()], axis=1), np.outer(w4, w4).ravel())
                else:
                    add(i, j, np.array([[x0 + h / 2, y0 + h / 2]]), np.array([1.0]))
            elif on_x and on_y:
                # polar rule around the square corner inside this cell
                cx = 0.0 if i == 0 else 1.0
                cy = 0.0 if j == 0 else 1.0
                sx = 1.0 if i == 0 else -1.0
                sy = 1.0 if j == 0 else -1.0
                theta = np.concatenate([uth * (np.pi / 4), np.pi / 4 + uth * (np.pi / 4)])
                wtheta = np.concatenate([wth, wth]) * (np.pi / 4)
                ct, st = np.cos(theta), np.sin(theta)
                rmax = h / np.maximum(ct, st)
                rr = rmax[:, None] * ur[None, :]
                ww = (wtheta * rmax)[:, None] * wr[None, :] * rr / (h * h)
                px = cx + sx * rr * ct[:, None]
                py = cy + sy * rr * st[:, None]
                add(i, j, np.stack([px.ravel(), py.ravel()], axis=1), ww.ravel())
            else:
                # one boundary side: grade into it, plain rule along it
                if on_x:
                    xx = x0 + h * gy if i == 0 else x0 + h * (1.0 - gy)
                    yy = y0 + h * u6
                    wx, wy = gw, w6
                else:
                    xx = x0 + h * u6
                    yy = y0 + h * gy if j == 0 else y0 + h * (1.0 - gy)
                    wx, wy = w6, gw
                PX, PY = np.meshgrid(xx, yy, indexing="ij")
                WW = np.outer(wx, wy)
                add(i, j, np.stack([PX.ravel(), PY.ravel()], axis=1), WW.ravel())
    points = np.concatenate(pts)
    weights = np.concatenate([np.asarray(w, dtype=float) for w in wts])
    owners = np.concatenate([np.full(len(w), o) for w, o in zip(wts, owner)])
    return points, weights, owners.astype(int)


def _eval_point_grid(points: np.ndarray, spec: QuadratureSpec, threads: int):
    """Evaluate p_B at (K,2) points, chunked over a process pool.

    Per-cell results are independent, so the assembly is deterministic for
    any worker count.
    """
    if threads <= 1 or len(points) < 32:
        return _pb_chunk((points, spec))
    chunks = np.array_split(points, threads * 4)
    vals, errs = [], []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for v, e in pool.map(_pb_chunk, [(c, spec) for c in chunks]):
            vals.append(v)
            errs.append(e)
    return np.concatenate(vals), np.concatenate(errs)


def baxter_density_grid(
    resolution: int,
    spec: QuadratureSpec = QuadratureSpec(),
    threads: int | None = None,
) -> DensityGrid:
    """Normalized p_B samples at cell midpoints.

    Negative raw values within the reported quadrature error are clamped to
    zero (the true density is nonnegative); larger negatives indicate
    quadrature failure and raise AccuracyError.
    """
    if resolution < 4:
        raise InputError("resolution must be >= 4")
    R = resolution
    points, weights, owners = _pb_cell_rules(R)
    pvals, perrs = _eval_point_grid(points, spec, resolve_threads(threads))
    vals = np.zeros(R * R)
    errs = np.zeros(R * R)
    np.add.at(vals, owners, weights * pvals)
    np.add.at(errs, owners, weights * perrs)
    vals = vals.reshape(R, R)
    errs = errs.reshape(R, R)
    neg = vals < 0
    if neg.any():
        bad = neg & (np.abs(vals) > np.maximum(errs, 1e-12))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise AccuracyError(
                f"p_B quadrature produced a negative value {vals[i, j]} at "
                f"cell ({i}, {j}) exceeding its error bound {errs[i, j]}",
                estimate=float(vals[i, j]),
                error_bound=float(errs[i, j]),
            )
        vals = np.where(neg, 0.0, vals)
    mean = vals.mean()
    if mean <= 0:
        raise AccuracyError("p_B grid has nonpositive total mass", estimate=mean)
    return DensityGrid(
        R,
        vals / mean,
        norm_const=1.0 / mean,
        spec=spec,
        max_error=float(errs.max() / mean),
        errors=errs / mean,
    )


# -- biased Brownian separable permuton ------------------------------------


def separable_density_point(q: float, x: float, y: float) -> float:
    """Density of the biased separable permuton at (x, y) for bias q in (0,1).

    One-dimensional integral over a in (max(0,x+y-1), min(x,y)) of
    3 q^2 (1-q)^2 / (2 pi (a (x-a) (1-x-y+a) (y-a))^{3/2}
        (q^2/a + (1-q)^2/(x-a) + q^2/(1-x-y+a) + (1-q)^2/(y-a))^{5/2});
    the constant is part of the formula, so no renormalization is applied.
    The integrand vanishes linearly at both endpoints; endpoint-graded panels
    handle the steep approach.
    """
    if not 0.0 < q < 1.0:
        raise InputError("separable density requires q in (0, 1)")
    if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
        raise InputError("separable density requires (x, y) in the open unit square")
    alo = max(0.0, x + y - 1.0)
    ahi = min(x, y)
    width = ahi - alo
    if width <= 1e-15:
        return 0.0

    def value(nodes: int) -> float:
        # a = alo + width sin^2(pi u / 2) flattens the inverse-square-root
        # endpoint behavior that appears on the diagonals x=y and x+y=1
        u, w = _gl01(nodes)
        a = alo + width * np.sin(0.5 * np.pi * u) ** 2
        jac = width * 0.5 * np.pi * np.sin(np.pi * u)
        f2 = x - a
        f3 = 1.0 - x - y + a
        f4 = y - a
        prod = np.clip(a * f2 * f3 * f4, 1e-300, None)
        bracket = q * q / a + (1 - q) ** 2 / f2 + q * q / f3 + (1 - q) ** 2 / f4
        integ = 3.0 * q * q * (1 - q) ** 2 / (2.0 * np.pi * prod**1.5 * bracket**2.5)
        return float(np.sum(w * jac * integ))

    fine = value(64)
    coarse = value(40)
    if abs(fine - coarse) > 1e-6 * max(abs(fine), 1e-12):
        finer = value(192)
        if abs(finer - fine) > 1e-6 * max(abs(finer), 1e-12):
            raise AccuracyError(
                f"separable density quadrature did not converge at ({x}, {y})",
                estimate=finer,
                error_bound=abs(finer - fine),
            )
        return finer
    return fine


def _separable_values(q: float, X: np.ndarray, Y: np.ndarray, nodes: int) -> np.ndarray:
    """Batched separable-density values at flat coordinate arrays.

    The four range factors are assembled from nonnegative pieces (offsets
    from the integration endpoints) so they never cancel to zero near the
    square's corners.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    alo = np.maximum(0.0, X + Y - 1.0)
    width = np.minimum(X, Y) - alo
    ok = width > 1e-15
    out = np.zeros(X.shape)
    if not ok.any():
        return out
    x = X[ok][:, None]
    y = Y[ok][:, None]
    wd = width[ok][:, None]
    u, w = _gl01(nodes)
    s2 = np.sin(0.5 * np.pi * u[None, :]) ** 2
    c2 = np.cos(0.5 * np.pi * u[None, :]) ** 2
    adist = wd * s2  # a - alo
    rem = wd * c2  # ahi - a
    jac = wd * 0.5 * np.pi * np.sin(np.pi * u[None, :])
    f1 = np.maximum(x + y - 1.0, 0.0) + adist  # a
    f2 = np.maximum(x - y, 0.0) + rem  # x - a
    f3 = np.maximum(1.0 - x - y, 0.0) + adist  # 1 - x - y + a
    f4 = np.maximum(y - x, 0.0) + rem  # y - a
    prod = f1 * f2 * f3 * f4
    bracket = q * q / f1 + (1 - q) ** 2 / f2 + q * q / f3 + (1 - q) ** 2 / f4
    with np.errstate(under="ignore"):
        integ = 3.0 * q * q * (1 - q) ** 2 / (2.0 * np.pi * prod**1.5 * bracket**2.5)
        out[ok] = np.sum(w[None, :] * jac * integ, axis=1)
    return out


def _graded01(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on (0,1) graded toward both endpoints (sin^2 map)."""
    u, w = _gl01(nodes)
    return np.sin(0.5 * np.pi * u) ** 2, w * 0.5 * np.pi * np.sin(np.pi * u)


def _separable_cell_mass(q: float, x0, x1, y0, y1, nx: int = 8, ny: int = 12) -> float:
    """Mass of the density over a rectangle.

    The density has integrable cusps exactly on the lines y = x and
    y = 1 - x (where an integration endpoint degenerates), sharp when q is
    far from 1/2. The inner y-rule is split at those lines and graded toward
    every piece endpoint, which also absorbs the sqrt() vanishing at the
    square's edges; the outer x-integral of the y-averages is smooth.
    """
    ux, wx = _gl01(nx)
    gy, gw = _graded01(ny)
    xs = x0 + (x1 - x0) * ux
    Y_pts, Y_wts, owners = [], [], []
    for i, x in enumerate(xs):
        cuts = [y0, y1]
        for c in (x, 1.0 - x):
            if y0 < c < y1:
                cuts.append(c)
        cuts.sort()
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= 0:
                continue
            Y_pts.append(a + (b - a) * gy)
            Y_wts.append((b - a) * gw)
            owners.append(i)
    Y_pts = np.concatenate(Y_pts)
    Y_wts = np.concatenate(Y_wts)
    owners = np.repeat(owners, ny)
    X_pts = xs[owners]
    vals = _separable_values(q, X_pts, Y_pts, 64)
    inner = np.zeros(nx)
    np.add.at(inner, owners, vals * Y_wts)
    return float((x1 - x0) * np.sum(wx * inner))


def _separable_origin_corner_mass(q: float, h: float) -> float:
    """Mass of the cell [0,h]^2 at the square's origin corner.

    Near each corner the density behaves like c(theta)/r, with c(theta)
    sharply peaked around the diagonal ray for extreme q, so the cell is
    integrated in polar coordinates: r p(r, theta) is smooth in r and the
    angular cusp at theta = pi/4 is left to an adaptive 1-d rule. The other
    three corners reduce to this one by the symmetries p^q(1-x,1-y) = p^q(x,y)
    and p^q(x,1-y) = p^{1-q}(x,y).
    """
    from scipy.integrate import quad

    rn, rw = _gl01(12)

    def radial(theta: float) -> float:
        c, s = np.cos(theta), np.sin(theta)
        rmax = h / max(c, s)
        r = rmax * rn
        vals = _separable_values(q, r * c, r * s, 96)
        return float(rmax * np.sum(rw * vals * r))

    lower, _ = quad(radial, 0.0, np.pi / 4, epsabs=1e-10, epsrel=1e-7, limit=200)
    upper, _ = quad(radial, np.pi / 4, np.pi / 2, epsabs=1e-10, epsrel=1e-7, limit=200)
    return lower + upper


def separable_density_grid(q: float, resolution: int) -> DensityGrid:
    """Cell-averaged samples of the separable permuton density; norm_const = 1.

    The formula carries its own constant, so no renormalization is applied;
    cusp-aware cell integration (plus polar integration of the four singular
    corner cells) keeps the grid's total mass faithful to it. Stored values
    are cell means, i.e. cell mass times R^2.
    """
    if resolution < 4:
        raise InputError("resolution must be >= 4")
    if not 0.0 < q < 1.0:
        raise InputError("separable density requires q in (0, 1)")
    R = resolution
    per_cell = np.empty((R, R))
    for i in range(R):
        for j in range(R):
            per_cell[i, j] = _separable_cell_mass(q, i / R, (i + 1) / R, j / R, (j + 1) / R)
    h = 1.0 / R
    near = _separable_origin_corner_mass(q, h)
    far = _separable_origin_corner_mass(1.0 - q, h)
    per_cell[0, 0] = per_cell[R - 1, R - 1] = near
    per_cell[0, R - 1] = per_cell[R - 1, 0] = far
    return DensityGrid(R, per_cell * R * R, norm_const=1.0, spec=QuadratureSpec(), max_error=0.0)


# -- quasi-Monte Carlo oracle for g -----------------------------------------


def qmc_g_estimate(
    a1, a2, a3, a4, n_points: int = 2**20, seed: int = 0, replicates: int = 10
) -> GEstimate:
    """Importance-sampled quasi-Monte Carlo estimate of g, independent of the
    tensor quadrature route.

    Proposal: independent half-normals per axis with precision
    1/s_i^2 = (1/a_{i-1} + 1/a_i)/2, which dominates the integrand's Gaussian
    factor (edge terms satisfy x^2+r^2-xr >= (x^2+r^2)/2), so weights stay
    square-integrable. The error is the spread over scrambled replicates.
    """
    a = np.array([a1, a2, a3, a4], dtype=float)
    if (a <= 0).any():
        raise InputError("qmc_g_estimate requires all a_i > 0")
    prec = 0.5 * (1.0 / a + 1.0 / np.roll(a, 1))
    svec = 1.0 / np.sqrt(prec)
    ests = np.empty(replicates)
    for rep in range(replicates):
        sob = qmc.Sobol(d=4, scramble=True, seed=seed + rep)
        U = sob.random(n_points)
        L = ndtri(0.5 + 0.5 * U) * svec[None, :]
        with np.errstate(under="ignore"):
            dens = np.prod(
                2.0 / (np.sqrt(2 * np.pi) * svec[None, :]) * np.exp(-0.5 * (L / svec[None, :]) ** 2),
                axis=1,
            )
            val = (
                _rho_raw(a[0], L[:, 0], L[:, 1])
                * _rho_raw(a[1], L[:, 1], L[:, 2])
                * _rho_raw(a[2], L[:, 2], L[:, 3])
                * _rho_raw(a[3], L[:, 3], L[:, 0])
            )
            ests[rep] = float(np.mean(val / dens))
    return GEstimate(float(ests.mean()), float(ests.std(ddof=1) / np.sqrt(replicates)))
