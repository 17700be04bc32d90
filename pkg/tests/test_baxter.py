import itertools
from fractions import Fraction

import numpy as np
import pytest

from permuton.baxter import (
    PermutonGrid,
    SampleBatch,
    empirical_intensity,
    enumerate_baxter,
    sample_baxter,
)
from permuton.errors import CapabilityError, InputError
from permuton.perms import Permutation, is_baxter, permuton_cell_masses

# Baxter counts, independently from the naive definition scan in test_perms
BAXTER_COUNTS = {1: 1, 2: 2, 3: 6, 4: 22, 5: 92, 6: 422, 7: 2074}


class TestEnumerate:
    def test_n1(self):
        assert enumerate_baxter(1) == [Permutation((1,))]

    def test_n3_all(self):
        assert len(enumerate_baxter(3)) == 6

    def test_n4_22(self):
        out = enumerate_baxter(4)
        assert len(out) == 22
        # independent brute-force oracle over S_4
        brute = [
            Permutation(v)
            for v in itertools.permutations(range(1, 5))
            if is_baxter(Permutation(v))
        ]
        assert out == brute

    @pytest.mark.parametrize("n", [5, 6])
    def test_counts(self, n):
        assert len(enumerate_baxter(n)) == BAXTER_COUNTS[n]

    def test_n7_matches_independent_scan(self):
        from permuton.perms import is_baxter_naive

        count = sum(
            1
            for vals in itertools.permutations(range(1, 8))
            if is_baxter_naive(Permutation(vals))
        )
        assert count == BAXTER_COUNTS[7]
        assert len(enumerate_baxter(7)) == count

    def test_sorted(self):
        out = enumerate_baxter(5)
        assert out == sorted(out, key=lambda p: p.values)

    def test_cap(self):
        with pytest.raises(CapabilityError):
            enumerate_baxter(11)


class TestSample:
    def test_n1(self):
        batch = sample_baxter(1, 5, seed=0)
        assert all(p == Permutation((1,)) for p in batch.permutations)

    def test_all_baxter_and_size(self):
        batch = sample_baxter(7, 200, seed=42)
        assert len(batch.permutations) == 200
        assert all(p.n == 7 for p in batch.permutations)
        assert all(is_baxter(p) for p in batch.permutations)

    def test_deterministic(self):
        b1 = sample_baxter(6, 50, seed=9)
        b2 = sample_baxter(6, 50, seed=9)
        assert b1.permutations == b2.permutations
        b3 = sample_baxter(6, 50, seed=10)
        assert b1.permutations != b3.permutations

    def test_uniformity_chi_square_n4(self):
        from scipy.stats import chisquare

        outcomes = {p.values: 0 for p in enumerate_baxter(4)}
        batch = sample_baxter(4, 22000, seed=123)
        for p in batch.permutations:
            outcomes[p.values] += 1
        stat, pval = chisquare(list(outcomes.values()))
        assert pval > 0.01

    def test_cap(self):
        with pytest.raises(CapabilityError):
            sample_baxter(17, 1, seed=0)

    def test_budget_exhaustion_reports_rate(self):
        with pytest.raises(CapabilityError, match="acceptance"):
            sample_baxter(12, 50, seed=0, max_attempts_per_stream=5)


class TestPermutonGrid:
    def test_shape_check(self):
        with pytest.raises(InputError):
            PermutonGrid(3, np.zeros((2, 2)))

    def test_tv_distance(self):
        a = PermutonGrid(2, np.array([[0.5, 0.0], [0.0, 0.5]]))
        b = PermutonGrid(2, np.array([[0.0, 0.5], [0.5, 0.0]]))
        assert a.total_variation(b) == pytest.approx(1.0)
        assert a.total_variation(a) == 0.0


class TestEmpiricalIntensity:
    def test_identity_diagonal(self):
        batch = SampleBatch(4, [Permutation.identity(4)], seed=0, method="enumeration")
        grid = empirical_intensity(batch, 4)
        assert np.allclose(np.diag(grid.cells), 0.25)
        assert grid.total == pytest.approx(1.0)

    def test_all_22_exact(self):
        perms = enumerate_baxter(4)
        batch = SampleBatch(4, perms, seed=0, method="enumeration")
        grid = empirical_intensity(batch, 4)
        # independent exact average of the 22 diagrams
        acc = [[Fraction(0)] * 4 for _ in range(4)]
        for p in perms:
            cm = permuton_cell_masses(p, 4)
            for a in range(4):
                for b in range(4):
                    acc[a][b] += cm[a][b]
        expected = np.array([[float(acc[a][b] / 22) for b in range(4)] for a in range(4)])
        assert np.allclose(grid.cells, expected, atol=1e-15)
        # R divides n: marginals exactly 1/R
        assert np.allclose(grid.row_sums(), 0.25, atol=1e-15)
        assert np.allclose(grid.col_sums(), 0.25, atol=1e-15)

    def test_marginals_within_2_over_n(self):
        batch = sample_baxter(6, 40, seed=77)
        grid = empirical_intensity(batch, 4)
        assert np.abs(grid.row_sums() - 0.25).max() <= 2 / 6
        assert np.abs(grid.col_sums() - 0.25).max() <= 2 / 6

    def test_empty_batch(self):
        batch = SampleBatch(4, [], seed=0, method="enumeration")
        with pytest.raises(InputError):
            empirical_intensity(batch, 4)
