import numpy as np
import pytest
from scipy.stats import ks_2samp

from permuton.errors import CapabilityError, InputError
from permuton.perms import Permutation
from permuton.skew import (
    Excursion2D,
    coalescent_walk,
    estimate_occ,
    phi_map,
    pooled_pattern_frequencies,
    sample_quadrant_excursion,
    simulate_skew_ensemble,
)
from permuton.skew import _bridge_batch, _rng, _sample_mcmc, _sample_reject

P21 = Permutation((2, 1))


def arch_excursion(n=512, corr=-0.5, amp=0.7):
    t = np.arange(n + 1) / n
    a = amp * np.sin(np.pi * t)
    return Excursion2D(xs=a.copy(), ys=a.copy(), corr=corr)


class TestExcursionSampling:
    def test_endpoints_and_quadrant(self):
        exc = sample_quadrant_excursion(-0.5, 128, seed=1, method="reject")
        assert exc.xs[0] == exc.ys[0] == 0.0
        assert abs(exc.xs[-1]) < 1e-9 and abs(exc.ys[-1]) < 1e-9
        assert exc.xs.min() >= 0.0 and exc.ys.min() >= 0.0

    def test_mcmc_endpoints_and_quadrant(self):
        exc = sample_quadrant_excursion(-0.5, 1024, seed=2, method="mcmc")
        assert exc.xs.min() >= 0.0 and exc.ys.min() >= 0.0
        assert abs(exc.xs[-1]) < 1e-9

    def test_increment_correlation(self):
        rng = _rng(3, 0)
        w = _bridge_batch(rng, -0.5, 200, 500)
        inc = np.diff(w, axis=1)
        # bridge pinning distorts the raw correlation only at O(1/n)
        c = np.corrcoef(inc[..., 0].ravel(), inc[..., 1].ravel())[0, 1]
        assert abs(c - (-0.5)) < 0.01

    def test_rejection_budget_error_reports_rate(self):
        with pytest.raises(CapabilityError, match="acceptance"):
            sample_quadrant_excursion(-0.5, 2048, seed=0, method="reject", max_attempts=2000)

    def test_determinism(self):
        a = sample_quadrant_excursion(-0.5, 256, seed=9, method="reject")
        b = sample_quadrant_excursion(-0.5, 256, seed=9, method="reject")
        assert np.array_equal(a.xs, b.xs)
        c = sample_quadrant_excursion(-0.5, 256, seed=10, method="reject")
        assert not np.array_equal(a.xs, c.xs)

    def test_args(self):
        with pytest.raises(InputError):
            sample_quadrant_excursion(-1.0, 256, seed=0)
        with pytest.raises(InputError):
            sample_quadrant_excursion(0.0, 50, seed=0)

    def test_mcmc_matches_rejection_law(self):
        # dual-route check: pCN chains vs exact common-argmin rejection
        n, corr = 128, -0.5
        rej = np.stack(_sample_reject(corr, n, seed=21, count=300, max_attempts=40_000_000))
        mc = _sample_mcmc(corr, n, seed=22, count=300, burn_in=2500)

        def stats(paths):
            x, y = paths[..., 0], paths[..., 1]
            return {
                "areaX": x.sum(axis=1) / n,
                "areaY": y.sum(axis=1) / n,
                "maxX": x.max(axis=1),
                "midX": x[:, n // 2],
                "cross": (x * y).sum(axis=1) / n,
            }

        sr, sm = stats(rej), stats(mc)
        for key in sr:
            assert ks_2samp(sr[key], sm[key]).pvalue > 1e-3, key


class TestCoalescentWalk:
    def test_zero_before_start(self):
        exc = arch_excursion()
        w = coalescent_walk(exc, 0.5, u=100, seed=4)
        assert (w.z[:101] == 0).all()

    def test_q1_nonnegative(self):
        exc = sample_quadrant_excursion(-0.5, 256, seed=5, method="reject")
        w = coalescent_walk(exc, 1.0, u=0, seed=6)
        assert (w.z >= 0).all()

    def test_q0_nonpositive(self):
        exc = sample_quadrant_excursion(-0.5, 256, seed=7, method="reject")
        w = coalescent_walk(exc, 0.0, u=0, seed=8)
        assert (w.z <= 0).all()

    def test_coalescence(self):
        # walks that agree at a time agree at every later time
        exc = sample_quadrant_excursion(-0.5, 256, seed=11, method="reject")
        walks = [coalescent_walk(exc, 0.5, u=u, seed=12).z for u in (0, 50, 100)]
        n = exc.n_steps
        for a in range(len(walks)):
            for b in range(a + 1, len(walks)):
                za, zb = walks[a], walks[b]
                met = np.nonzero(za == zb)[0]
                first = met[met >= 100][0] if (met >= 100).any() else None
                if first is not None:
                    assert np.array_equal(za[first:], zb[first:])

    def test_walks_match_phi_map_family(self):
        exc = arch_excursion(n=256)
        est = phi_map(exc, 0.3, m=64, seed=13)
        n = exc.n_steps
        # walk u = grid start index 16*n/64
        u = (16 * n) // 64
        w = coalescent_walk(exc, 0.3, u=u, seed=13)
        assert w.z[u] == 0.0


class TestPhiMap:
    def test_q0_identity_exact(self):
        exc = arch_excursion()
        est = phi_map(exc, 0.0, m=128, seed=0)
        assert np.array_equal(est.phi_samples[:, 1], est.phi_samples[:, 0])
        assert estimate_occ(est, P21, k_samples=500, seed=1).proportion == 0.0

    def test_q1_antidiagonal(self):
        exc = arch_excursion()
        m = 128
        est = phi_map(exc, 1.0, m=m, seed=0)
        expected = 1.0 - est.phi_samples[:, 0] - 1.0 / m
        assert np.allclose(est.phi_samples[:, 1], expected)
        assert estimate_occ(est, P21, k_samples=500, seed=1).proportion == 1.0

    def test_marginals_near_uniform(self):
        exc = sample_quadrant_excursion(-0.5, 256, seed=14, method="reject")
        m = 256
        est = phi_map(exc, 0.5, m=m, seed=15)
        sorted_phi = np.sort(est.phi_samples[:, 1])
        sup = np.abs(sorted_phi - np.arange(m) / m).max()
        assert sup <= 3.0 / np.sqrt(m)
        # x-marginal of the grid is exact when resolution divides m
        assert np.allclose(est.grid.row_sums(), 1.0 / est.grid.resolution, atol=1e-12)

    def test_grid_total(self):
        exc = arch_excursion()
        est = phi_map(exc, 0.5, m=128, seed=16)
        assert est.grid.total == pytest.approx(1.0, abs=1e-12)

    def test_m_guard(self):
        exc = arch_excursion(n=128)
        with pytest.raises(InputError):
            phi_map(exc, 0.5, m=512, seed=0)


class TestEnsemble:
    def test_determinism(self):
        a = simulate_skew_ensemble(-0.5, 0.5, n_steps=256, m=64, replicas=3, seed=33, method="reject")
        b = simulate_skew_ensemble(-0.5, 0.5, n_steps=256, m=64, replicas=3, seed=33, method="reject")
        for ea, eb in zip(a, b):
            assert np.array_equal(ea.phi_samples, eb.phi_samples)

    def test_mean_occ21_near_half(self):
        ests = simulate_skew_ensemble(-0.5, 0.5, n_steps=512, m=128, replicas=60, seed=34, method="mcmc", burn_in=800)
        vals = [estimate_occ(e, P21, k_samples=800, seed=35 + i).proportion for i, e in enumerate(ests)]
        mean = float(np.mean(vals))
        # per-replica sd ~ 0.12 -> 60 replicas give se ~ 0.016
        assert abs(mean - 0.5) < 0.06

    def test_monotone_in_q(self):
        # same excursions and coins, increasing q raises the inversion share
        means = []
        for q in (0.0, 0.25, 0.5, 0.75, 1.0):
            ests = simulate_skew_ensemble(-0.5, q, n_steps=512, m=128, replicas=12, seed=36, method="mcmc", burn_in=600)
            vals = [estimate_occ(e, P21, k_samples=600, seed=37 + i).proportion for i, e in enumerate(ests)]
            means.append(float(np.mean(vals)))
        assert means[0] == 0.0 and means[-1] == 1.0
        assert all(b >= a - 0.05 for a, b in zip(means, means[1:]))


class TestEstimateOcc:
    def test_grid_path(self):
        exc = arch_excursion()
        est = phi_map(exc, 0.5, m=256, seed=40)
        occ_grid = estimate_occ(est.grid, P21, k_samples=2000, seed=41)
        occ_pairs = estimate_occ(est, P21, k_samples=2000, seed=41)
        assert abs(occ_grid.proportion - occ_pairs.proportion) < 0.1

    def test_stderr(self):
        exc = arch_excursion()
        est = phi_map(exc, 0.5, m=128, seed=42)
        occ = estimate_occ(est, P21, k_samples=400, seed=43)
        assert 0 <= occ.stderr <= 0.5 / np.sqrt(400) * 2

    def test_k_samples_guard(self):
        exc = arch_excursion()
        est = phi_map(exc, 0.5, m=128, seed=44)
        with pytest.raises(InputError):
            estimate_occ(est, P21, k_samples=10, seed=0)

    def test_pooled_frequencies_sum_to_one(self):
        ests = simulate_skew_ensemble(-0.5, 0.5, n_steps=256, m=64, replicas=4, seed=45, method="reject")
        freqs = pooled_pattern_frequencies(ests, k=3, k_samples=3000, seed=46)
        assert sum(freqs.values()) == pytest.approx(1.0)
        assert all(len(key) == 3 for key in freqs)
