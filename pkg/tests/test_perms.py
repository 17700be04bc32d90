import itertools
from fractions import Fraction
from math import comb

import numpy as np
import pytest

from permuton.errors import InputError
from permuton.perms import (
    PATTERN_2_41_3,
    PATTERN_3_14_2,
    Permutation,
    Rect,
    VincularPattern,
    contains_vincular,
    count_pattern,
    induced_pattern,
    inversion_count,
    is_baxter,
    is_baxter_naive,
    perm_of_points,
    permuton_cell_masses,
    permuton_mass,
)


def P(digits):
    return Permutation.from_digits(digits)


class TestPermutation:
    def test_valid(self):
        p = P("23641587")
        assert p.n == 8
        assert p(2) == 3

    @pytest.mark.parametrize("vals", [(), (0, 1), (1, 1), (2, 3), (1, 2, 4)])
    def test_invalid(self, vals):
        with pytest.raises(InputError):
            Permutation(tuple(vals))

    def test_text_roundtrip(self):
        p = Permutation.from_text("2 3 6 4 1 5 8 7")
        assert p == P("23641587")
        assert p.to_text() == "2 3 6 4 1 5 8 7"

    def test_inverse(self):
        p = P("312")
        assert p.inverse() == P("231")


class TestVincularParse:
    def test_parse_2_41_3(self):
        vp = VincularPattern.parse("2-41-3")
        assert vp.base == P("2413")
        assert vp.adjacent == frozenset({2})
        assert str(vp) == "2-41-3"

    def test_parse_standard(self):
        vp = VincularPattern.parse("2413")
        assert vp.adjacent == frozenset()

    def test_parse_3_14_2(self):
        vp = VincularPattern.parse("3-14-2")
        assert vp == PATTERN_3_14_2

    def test_bad(self):
        with pytest.raises(InputError):
            VincularPattern.parse("2--413")


class TestInducedPattern:
    def test_paper_example(self):
        # pat_{2,3,5,6}(23641587) = 2413
        assert induced_pattern(P("23641587"), {2, 3, 5, 6}) == P("2413")

    def test_identity(self):
        for n in (1, 3, 6):
            p = Permutation.identity(n)
            assert induced_pattern(p, {1, n}) == Permutation.identity(2 if n > 1 else 1)

    def test_decreasing_pair(self):
        assert induced_pattern(P("321"), {1, 3}) == P("21")

    def test_full_index_set(self):
        p = P("35142")
        assert induced_pattern(p, range(1, 6)) == p

    def test_errors(self):
        with pytest.raises(InputError):
            induced_pattern(P("321"), set())
        with pytest.raises(InputError):
            induced_pattern(P("321"), {0, 1})


class TestCountPattern:
    def test_21_in_231(self):
        c = count_pattern(P("21"), P("231"))
        assert c.count == 2
        assert c.proportion == Fraction(2, 3)

    def test_all_increasing(self):
        c = count_pattern(P("12"), Permutation.identity(5))
        assert c.count == 10
        assert c.proportion == 1

    def test_k_gt_n(self):
        c = count_pattern(P("1234"), P("321"))
        assert c.count == 0
        assert c.proportion == 0

    @pytest.mark.parametrize("n,k", [(5, 2), (6, 3), (7, 4), (9, 4)])
    def test_completeness(self, n, k):
        # sum over all patterns of size k of occ counts = C(n, k)
        rng = np.random.default_rng(n * 100 + k)
        for _ in range(3):
            sigma = Permutation(tuple(int(v) + 1 for v in rng.permutation(n)))
            total = sum(
                count_pattern(Permutation(pi), sigma).count
                for pi in itertools.permutations(range(1, k + 1))
            )
            assert total == comb(n, k)


class TestVincular:
    def test_paper_avoidance(self):
        # 23641587 contains 2413 but avoids the vincular 2-41-3
        sigma = P("23641587")
        assert count_pattern(P("2413"), sigma).count > 0
        assert not contains_vincular(sigma, PATTERN_2_41_3)

    def test_2413_contains(self):
        assert contains_vincular(P("2413"), PATTERN_2_41_3)

    def test_too_small(self):
        assert not contains_vincular(P("21"), PATTERN_2_41_3)

    @pytest.mark.parametrize("k", [2, 3])
    def test_empty_adjacency_matches_count(self, k):
        rng = np.random.default_rng(7)
        pats = [Permutation(pi) for pi in itertools.permutations(range(1, k + 1))]
        for _ in range(20):
            sigma = Permutation(tuple(int(v) + 1 for v in rng.permutation(6)))
            for pat in pats:
                vp = VincularPattern(pat, frozenset())
                assert contains_vincular(sigma, vp) == (count_pattern(pat, sigma).count > 0)


class TestBaxter:
    def test_2413_not_baxter(self):
        assert not is_baxter(P("2413"))

    def test_3142_not_baxter(self):
        assert not is_baxter(P("3142"))

    def test_small_all_baxter(self):
        for n in (1, 2, 3):
            for vals in itertools.permutations(range(1, n + 1)):
                assert is_baxter(Permutation(vals))

    def test_23641587_is_baxter(self):
        assert is_baxter(P("23641587"))

    def test_matches_vincular_definition(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            sigma = Permutation(tuple(int(v) + 1 for v in rng.permutation(n)))
            expected = not (
                contains_vincular(sigma, PATTERN_2_41_3)
                or contains_vincular(sigma, PATTERN_3_14_2)
            )
            assert is_baxter(sigma) == expected

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_exhaustive_vs_naive(self, n):
        for vals in itertools.permutations(range(1, n + 1)):
            sigma = Permutation(vals)
            assert is_baxter(sigma) == is_baxter_naive(sigma)

    def test_random_vs_naive_n_le_12(self):
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            n = int(rng.integers(4, 13))
            sigma = Permutation(tuple(int(v) + 1 for v in rng.permutation(n)))
            assert is_baxter(sigma) == is_baxter_naive(sigma)


class TestInversions:
    def test_identity(self):
        assert inversion_count(Permutation.identity(6)) == 0

    def test_decreasing(self):
        assert inversion_count(Permutation.decreasing(7)) == 21

    def test_231(self):
        assert inversion_count(P("231")) == 2

    def test_matches_count_pattern(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n = int(rng.integers(2, 11))
            sigma = Permutation(tuple(int(v) + 1 for v in rng.permutation(n)))
            assert inversion_count(sigma) == count_pattern(P("21"), sigma).count


class TestPermutonMass:
    def test_total_mass(self):
        for p in (P("1"), P("21"), P("35142")):
            assert permuton_mass(p, Rect(0, 1, 0, 1)) == 1

    def test_cell_of_21(self):
        assert permuton_mass(P("21"), Rect(Fraction(0), Fraction(1, 2), Fraction(1, 2), Fraction(1))) == Fraction(1, 2)

    def test_grid_aligned_strip(self):
        p = P("3142")
        for a, b in [(0, 1), (1, 3), (2, 4)]:
            r = Rect(Fraction(a, 4), Fraction(b, 4), Fraction(0), Fraction(1))
            assert permuton_mass(p, r) == Fraction(b - a, 4)

    def test_y_strip_exact(self):
        p = P("4231")
        for c, d in [(0, 2), (1, 4)]:
            r = Rect(Fraction(0), Fraction(1), Fraction(c, 4), Fraction(d, 4))
            assert permuton_mass(p, r) == Fraction(d - c, 4)

    def test_float_path(self):
        v = permuton_mass(P("21"), Rect(0.0, 0.5, 0.5, 1.0))
        assert isinstance(v, float)
        assert v == pytest.approx(0.5)

    def test_cell_masses_sum(self):
        p = P("35142")
        for R in (2, 3, 5, 8):
            cm = permuton_cell_masses(p, R)
            assert sum(sum(row) for row in cm) == 1
            # marginals exact when R divides n
            if p.n % R == 0 or R % p.n == 0:
                for a in range(R):
                    assert sum(cm[a]) == Fraction(1, R)


class TestPermOfPoints:
    def test_hand_example(self):
        assert perm_of_points([(0.1, 0.9), (0.5, 0.2), (0.7, 0.6)]) == P("312")

    def test_diagonal(self):
        pts = [(i / 10, i / 10) for i in range(1, 5)]
        assert perm_of_points(pts) == Permutation.identity(4)

    def test_single(self):
        assert perm_of_points([(0.3, 0.4)]) == P("1")

    def test_ties_rejected(self):
        with pytest.raises(InputError):
            perm_of_points([(0.1, 0.2), (0.1, 0.5)])
        with pytest.raises(InputError):
            perm_of_points([(0.1, 0.2), (0.3, 0.2)])
