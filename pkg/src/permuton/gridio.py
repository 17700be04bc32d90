"""File formats and run manifests.

* Permutations: one per line, space-separated one-line notation.
* PermutonGrid CSV: header ``row,col,mass``, 0-indexed cells, row-major
  (row = x cell index, col = y cell index).
* DensityGrid CSV: header ``x,y,value`` with cell midpoints at 12 significant
  digits, row-major by y then x, plus a JSON sidecar with the quadrature
  metadata.
* Exit histogram CSV: ``t_lo,t_hi,r_lo,r_hi,count,expected`` plus a JSON
  comparison report.
* RunManifest JSON: the subcommand, its full parameter map, seed, version,
  wall time, and a sha256 digest per output file; identical parameters
  reproduce identical digests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baxter import PermutonGrid
from .densities import DensityGrid, QuadratureSpec
from .errors import InputError
from .perms import Permutation

__all__ = [
    "read_permutations",
    "write_permutations",
    "read_permuton_grid",
    "write_permuton_grid",
    "read_density_grid",
    "write_density_grid",
    "write_histogram",
    "RunManifest",
    "write_manifest",
    "sha256_file",
]


def write_permutations(path, perms) -> None:
    with open(path, "w") as fh:
        for p in perms:
            fh.write(p.to_text() + "\n")


def read_permutations(path) -> list[Permutation]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(Permutation.from_text(line))
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise InputError(f"{path}: no permutations found")
    return out


def write_permuton_grid(path, grid: PermutonGrid) -> None:
    R = grid.resolution
    with open(path, "w") as fh:
        fh.write("row,col,mass\n")
        for i in range(R):
            for j in range(R):
                fh.write(f"{i},{j},{grid.cells[i, j]:.12g}\n")


def read_permuton_grid(path) -> PermutonGrid:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "row,col,mass":
            raise InputError(f"{path}:1: expected header 'row,col,mass', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields")
            try:
                rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty grid")
    R = max(max(r, c) for r, c, _ in rows) + 1
    cells = np.zeros((R, R))
    for r, c, m in rows:
        cells[r, c] = m
    return PermutonGrid(R, cells)


def write_density_grid(path, grid: DensityGrid, wall_time_seconds: float = 0.0) -> None:
    R = grid.resolution
    mids = (np.arange(R) + 0.5) / R
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for j in range(R):  # row-major by y then x
            for i in range(R):
                fh.write(f"{mids[i]:.12g},{mids[j]:.12g},{grid.values[i, j]:.12g}\n")
    sidecar = {
        "resolution": R,
        "norm_const": grid.norm_const,
        "rel_tol": grid.spec.rel_tol,
        "max_reported_error": grid.max_error,
        "wall_time_seconds": wall_time_seconds,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_density_grid(path) -> DensityGrid:
    xs, ys, vs = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x,y,value":
            raise InputError(f"{path}:1: expected header 'x,y,value', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields")
            try:
                xs.append(float(parts[0]))
                ys.append(float(parts[1]))
                vs.append(float(parts[2]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    R = int(round(np.sqrt(len(vs))))
    if R * R != len(vs):
        raise InputError(f"{path}: {len(vs)} rows is not a square grid")
    values = np.empty((R, R))
    mids = (np.arange(R) + 0.5) / R
    for x, y, v in zip(xs, ys, vs):
        i = int(np.argmin(np.abs(mids - x)))
        j = int(np.argmin(np.abs(mids - y)))
        values[i, j] = v
    meta = {}
    side = Path(str(path) + ".json")
    if side.exists():
        meta = json.loads(side.read_text())
    spec = QuadratureSpec(rel_tol=meta.get("rel_tol", 1e-3))
    return DensityGrid(
        R,
        values,
        norm_const=meta.get("norm_const", 1.0),
        spec=spec,
        max_error=meta.get("max_reported_error", 0.0),
    )


def write_histogram(path, hist, report=None) -> None:
    """Histogram CSV with expected counts when a comparison report is given."""
    nt = len(hist.t_edges) - 1
    nr = len(hist.r_edges) - 1
    expected = report.expected if report is not None else np.full((nt, nr), np.nan)
    with open(path, "w") as fh:
        fh.write("t_lo,t_hi,r_lo,r_hi,count,expected\n")
        for i in range(nt):
            for j in range(nr):
                fh.write(
                    f"{hist.t_edges[i]:.12g},{hist.t_edges[i + 1]:.12g},"
                    f"{hist.r_edges[j]:.12g},{hist.r_edges[j + 1]:.12g},"
                    f"{int(hist.counts[i, j])},{expected[i, j]:.12g}\n"
                )
    if report is not None:
        payload = {
            "n_paths": report.n_paths,
            "step": report.step,
            "chi_square": report.chi_square,
            "dof": report.dof,
            "p_value": report.p_value,
            "max_rel_dev": report.max_rel_dev,
        }
        Path(str(path) + ".json").write_text(json.dumps(payload, indent=2) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    params: dict
    seed: int | None
    version: str = __version__
    wall_time_seconds: float = 0.0
    outputs: dict = field(default_factory=dict)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def to_json(self) -> str:
        return json.dumps(
            {
                "subcommand": self.subcommand,
                "params": self.params,
                "seed": self.seed,
                "version": self.version,
                "wall_time_seconds": self.wall_time_seconds,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )


def write_manifest(out_path, manifest: RunManifest) -> Path:
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(manifest.to_json() + "\n")
    return path
