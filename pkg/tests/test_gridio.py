import json

import numpy as np
import pytest

from permuton.baxter import PermutonGrid, sample_baxter
from permuton.densities import DensityGrid, QuadratureSpec
from permuton.errors import InputError
from permuton.gridio import (
    RunManifest,
    read_density_grid,
    read_permutations,
    read_permuton_grid,
    sha256_file,
    write_density_grid,
    write_manifest,
    write_permutations,
    write_permuton_grid,
)
from permuton.perms import Permutation


class TestPermutationFile:
    def test_roundtrip(self, tmp_path):
        perms = sample_baxter(6, 20, seed=1).permutations
        path = tmp_path / "perms.txt"
        write_permutations(path, perms)
        back = read_permutations(path)
        assert back == perms

    def test_format(self, tmp_path):
        path = tmp_path / "one.txt"
        write_permutations(path, [Permutation((2, 3, 6, 4, 1, 5, 8, 7))])
        assert path.read_text() == "2 3 6 4 1 5 8 7\n"

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 2 3\n2 2 1\n")
        with pytest.raises(InputError, match="bad.txt:2"):
            read_permutations(path)

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("\n")
        with pytest.raises(InputError):
            read_permutations(path)


class TestPermutonGridCSV:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        cells = rng.random((5, 5))
        cells /= cells.sum()
        grid = PermutonGrid(5, cells)
        path = tmp_path / "grid.csv"
        write_permuton_grid(path, grid)
        back = read_permuton_grid(path)
        assert back.resolution == 5
        assert np.allclose(back.cells, grid.cells, atol=1e-12)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n0,0,1\n")
        with pytest.raises(InputError, match="header"):
            read_permuton_grid(path)


class TestDensityGridCSV:
    def test_roundtrip_with_sidecar(self, tmp_path):
        rng = np.random.default_rng(1)
        vals = rng.random((6, 6)) + 0.5
        vals /= vals.mean()
        grid = DensityGrid(6, vals, norm_const=2.5, spec=QuadratureSpec(), max_error=1e-4)
        path = str(tmp_path / "pb.csv")
        write_density_grid(path, grid, wall_time_seconds=1.25)
        meta = json.loads((tmp_path / "pb.csv.json").read_text())
        assert meta["resolution"] == 6
        assert meta["norm_const"] == 2.5
        assert meta["max_reported_error"] == 1e-4
        back = read_density_grid(path)
        assert np.allclose(back.values, grid.values, rtol=1e-11)
        assert back.norm_const == 2.5

    def test_row_major_by_y(self, tmp_path):
        vals = np.arange(16, dtype=float).reshape(4, 4)
        vals /= vals.mean()
        grid = DensityGrid(4, vals, norm_const=1.0, spec=QuadratureSpec())
        path = str(tmp_path / "g.csv")
        write_density_grid(path, grid)
        lines = open(path).read().strip().splitlines()
        # after the header, x varies fastest
        first = lines[1].split(",")
        second = lines[2].split(",")
        assert first[1] == second[1]  # same y
        assert first[0] != second[0]


class TestManifest:
    def test_digests_deterministic(self, tmp_path):
        p1 = tmp_path / "a.txt"
        p1.write_text("hello\n")
        m = RunManifest(subcommand="demo", params={"x": 1}, seed=7)
        m.add_output(p1)
        mp = write_manifest(p1, m)
        data = json.loads(mp.read_text())
        assert data["outputs"][str(p1)] == sha256_file(p1)
        assert data["seed"] == 7
        assert data["subcommand"] == "demo"
