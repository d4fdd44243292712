"""Truncation pipeline and configuration classification."""

import math

import numpy as np
import pytest
from scipy import integrate

from wignerlab import ensembles as en
from wignerlab import truncation as tr


def bfs_verdict(L, r, K, p_n=0.0):
    """Independent brute-force oracle: BFS components over zero edges."""
    n = L.shape[0]
    adj = [[] for _ in range(n)]
    deviant = set()
    for i in range(n):
        for j in range(n):
            if L[i, j] == 0:
                deviant.add(i)
                deviant.add(j)
                if i != j:
                    adj[i].append(j)
    seen = set()
    comps = []
    for start in sorted(deviant):
        if start in seen:
            continue
        stack, comp = [start], set()
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(w for w in adj[v] if w not in comp)
        seen |= comp
        comps.append(tuple(sorted(comp)))
    r_of_L = max((len(c) for c in comps), default=0)
    dev_inadm = len(deviant) >= K * max(1.0, n * n * p_n)
    return {
        "deviant": tuple(sorted(deviant)),
        "components": tuple(sorted(comps)),
        "r_of_L": r_of_L,
        "deviant_inadmissible": dev_inadm,
        "r_admissible": (not dev_inadm) and r_of_L <= r - 1,
    }


def make_config(L, r=4, K=4, p_n=0.0):
    return tr.ConfigurationMatrix(
        n=L.shape[0], L=L.astype(np.uint8), R_under=1.0, r=r, K=K, p_n=p_n
    )


def make_sample(entries, law=None):
    entries = np.asarray(entries, dtype=float)
    return en.SymmetricMatrixSample(
        n=entries.shape[0], entries=entries, law=law or en.gaussian(), seed=0
    )


class TestTruncateHat:
    def test_rademacher_identity(self):
        for n in (4, 16, 64):
            s = en.sample_wigner(en.rademacher(), n, 11)
            hat, report = tr.truncate_hat(s, R_over=1.0)
            assert np.array_equal(hat, s.entries)
            assert report.altered_count == 0

    def test_single_entry_zeroed(self):
        s = make_sample([[10.0]])
        hat, report = tr.truncate_hat(s, R_over=1.0)
        assert hat == np.array([[0.0]])
        assert report.altered_count == 1

    def test_rejects_small_r_over(self):
        s = make_sample([[0.0]])
        with pytest.raises(ValueError):
            tr.truncate_hat(s, R_over=0.5)

    def test_student_t_exceedance_count_vs_tail_oracle(self):
        # expected altered cells = (#independent cells) * P(|X| > threshold),
        # with the tail from quadrature; observed within 4 sqrt(expected)
        n, law = 512, en.student_t(5)
        r_over = math.log10(n)
        threshold = math.sqrt(n) / r_over
        tail, _ = integrate.quad(
            lambda x: en.law_density(law, x), threshold, np.inf, limit=300
        )
        p = 2 * tail
        expected = n * (n + 1) / 2 * p
        s = en.sample_wigner(law, n, 4242)
        _, report = tr.truncate_hat(s, r_over)
        assert abs(report.altered_count - expected) < 4 * math.sqrt(expected)

    def test_symmetry_preserved(self):
        s = en.sample_wigner(en.student_t(5), 32, 3)
        hat, _ = tr.truncate_hat(s, 2.0)
        assert np.array_equal(hat, hat.T)


class TestCenterAndRenormalize:
    def test_gaussian_huge_threshold_noop(self):
        s = en.sample_wigner(en.gaussian(), 64, 9)
        _, breve, report = tr.center_and_renormalize(s, R_over=1.0)
        assert report.sigma_sq == pytest.approx(1.0, abs=1e-6)
        assert np.max(np.abs(breve - s.entries)) < 1e-5

    def test_rademacher_exact_identity(self):
        s = en.sample_wigner(en.rademacher(), 16, 21)
        tilde, breve, report = tr.center_and_renormalize(s, R_over=1.0)
        assert report.sigma_sq == 1.0
        assert report.mean_shift == 0.0
        assert np.array_equal(tilde, s.entries)
        assert np.array_equal(breve, s.entries)

    def test_student_t_variance_deficit_band(self):
        # 1 - sigma^2 in [0, R_over^2 * beta_4 / n]
        n = 1024
        law = en.student_t(5)
        r_over = math.log10(n)
        s = en.sample_wigner(law, n, 5)
        _, _, report = tr.center_and_renormalize(s, r_over)
        beta4 = en.law_moments(law)[3]
        assert 0.0 <= 1.0 - report.sigma_sq <= r_over ** 2 * beta4 / n

    def test_breve_support_bound(self):
        n = 256
        s = en.sample_wigner(en.student_t(5), n, 8)
        _, breve, report = tr.center_and_renormalize(s, math.log10(n))
        assert np.max(np.abs(breve)) <= 2.0 * math.sqrt(n) / math.log10(n)

    def test_breve_law_standardized_numerically(self):
        # re-evaluate mean/variance of the transformed law by quadrature
        law = en.student_t(5)
        n = 256
        threshold = math.sqrt(n) / math.log10(n)
        mu = en.law_truncated_moment(law, 1, threshold)
        second = en.law_truncated_moment(law, 2, threshold)
        sigma_sq = second - mu ** 2
        # entries above threshold map to (0 - mu)/sigma; below to (x - mu)/sigma
        tail = en.law_tail(law, threshold)
        mean = (mu - mu * (1 - tail) - mu * tail) / math.sqrt(sigma_sq)
        var = (
            en.law_truncated_moment(law, 2, threshold)
            - 2 * mu * en.law_truncated_moment(law, 1, threshold)
            + mu ** 2 * (1 - tail)
            + mu ** 2 * tail
        ) / sigma_sq
        assert abs(mean) < 1e-8
        assert var == pytest.approx(1.0, abs=1e-8)

    def test_degenerate_truncation_raises(self):
        s = en.sample_wigner(en.student_t(5), 4, 1)
        with pytest.raises(tr.DegenerateTruncationError):
            tr.center_and_renormalize(s, R_over=2000.0)


class TestBuildConfiguration:
    def test_all_small_gives_all_ones(self):
        s = en.sample_wigner(en.rademacher(), 8, 2)
        cfg = tr.build_configuration(s, R_under=1.0, r=4, K=4)
        assert np.all(cfg.L == 1)

    def test_single_exceedance(self):
        entries = np.zeros((4, 4))
        entries[0, 1] = entries[1, 0] = 99.0
        cfg = tr.build_configuration(make_sample(entries), R_under=1.0, r=4, K=4)
        expected = np.ones((4, 4), dtype=np.uint8)
        expected[0, 1] = expected[1, 0] = 0
        assert np.array_equal(cfg.L, expected)

    def test_zero_fraction_matches_annulus_mass(self):
        n, law = 2048, en.student_t(5)
        s = en.sample_wigner(law, n, 99)
        cfg = tr.build_configuration(s, R_under=1.0, r=8, K=8, R_over=1.0)
        cells = cfg.L[np.triu_indices(n)]
        zeros = np.count_nonzero(cells == 0)
        total = len(cells)
        # the raw sample has no upper cut, so compare to P(|X| > a) instead
        p_exceed = en.law_tail(law, n ** 0.25)
        se = math.sqrt(total * p_exceed * (1 - p_exceed))
        assert abs(zeros - total * p_exceed) < 4 * se
        # stored p_n is the annulus mass (strictly below the exceedance mass)
        assert 0 < cfg.p_n <= p_exceed


class TestClassify:
    def test_all_ones_trivial(self):
        verdict = tr.classify(make_config(np.ones((6, 6))))
        assert verdict.deviant_set == ()
        assert verdict.r_of_L == 0
        assert verdict.r_admissible

    def test_single_zero_pair(self):
        L = np.ones((5, 5))
        L[0, 1] = L[1, 0] = 0
        verdict = tr.classify(make_config(L))
        assert verdict.deviant_set == (0, 1)
        assert verdict.components == ((0, 1),)
        assert verdict.r_of_L == 2

    def test_diagonal_zero_is_singleton_component(self):
        L = np.ones((4, 4))
        L[2, 2] = 0
        verdict = tr.classify(make_config(L))
        assert verdict.deviant_set == (2,)
        assert verdict.r_of_L == 1

    def test_deviant_threshold_with_annulus_mass(self):
        L = np.ones((6, 6))
        L[0, 1] = L[1, 0] = 0
        # K max(1, n^2 p_n) = 2 * max(1, 36 * 0.1) = 7.2 > 2 deviants
        v1 = tr.classify(make_config(L, r=4, K=2, p_n=0.1))
        assert not v1.deviant_inadmissible
        # with p_n = 0 the threshold is K = 2 <= 2 deviants
        v2 = tr.classify(make_config(L, r=4, K=2, p_n=0.0))
        assert v2.deviant_inadmissible
        assert not v2.r_admissible

    def test_matches_bfs_oracle_random_32(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            mask = rng.random((32, 32)) < 0.05
            mask = np.triu(mask) | np.triu(mask, 1).T
            L = np.where(mask, 0, 1)
            cfg = make_config(L, r=5, K=3, p_n=0.0)
            got = tr.classify(cfg)
            want = bfs_verdict(L, r=5, K=3)
            assert got.deviant_set == want["deviant"]
            assert tuple(sorted(got.components)) == want["components"]
            assert got.r_of_L == want["r_of_L"]
            assert got.r_admissible == want["r_admissible"]

    def test_matches_bfs_oracle_exhaustive_small(self):
        rng = np.random.default_rng(99)
        for _ in range(200):
            n = int(rng.integers(1, 13))
            mask = rng.random((n, n)) < 0.25
            mask = np.triu(mask) | np.triu(mask, 1).T
            L = np.where(mask, 0, 1)
            got = tr.classify(make_config(L, r=3, K=2))
            want = bfs_verdict(L, r=3, K=2)
            assert got.r_of_L == want["r_of_L"]
            assert got.deviant_set == want["deviant"]
            assert got.r_admissible == want["r_admissible"]

    def test_rejects_asymmetric(self):
        L = np.ones((3, 3))
        L[0, 1] = 0
        with pytest.raises(ValueError):
            make_config(L)


class TestSampleConditioned:
    def test_supports_per_branch(self):
        law = en.student_t(5)
        n = 16
        L = np.ones((n, n), dtype=np.uint8)
        L[0, 1] = L[1, 0] = 0
        cfg = make_config(L)
        H = tr.sample_conditioned(law, cfg, n, R_under=1.0, R_over=1.0, seed=31)
        a, b = n ** 0.25, math.sqrt(n)
        assert np.array_equal(H.entries, H.entries.T)
        assert a < abs(H.entries[0, 1]) <= b
        small_cells = H.entries[np.triu_indices(n)]
        mask = cfg.L[np.triu_indices(n)] == 1
        assert np.all(np.abs(small_cells[mask]) <= a)

    def test_small_cell_variance_matches_quadrature(self):
        law = en.student_t(5)
        n = 64
        cfg = make_config(np.ones((n, n)))
        small, _, _ = en.conditional_laws(law, n, 1.0, 1.0)
        H = tr.sample_conditioned(law, cfg, n, R_under=1.0, R_over=1.0, seed=17)
        cells = H.entries[np.triu_indices(n)]
        target = small.moment(2)
        se = np.std(cells ** 2, ddof=1) / math.sqrt(len(cells))
        assert abs(np.mean(cells ** 2) - target) < 4 * se

    def test_reproducible(self):
        law = en.student_t(5)
        cfg = make_config(np.ones((8, 8)))
        h1 = tr.sample_conditioned(law, cfg, 8, 1.0, 1.0, seed=5)
        h2 = tr.sample_conditioned(law, cfg, 8, 1.0, 1.0, seed=5)
        assert np.array_equal(h1.entries, h2.entries)


class TestReplacementMatrix:
    def test_all_zero_configuration_keeps_everything(self):
        law = en.student_t(5)
        n = 8
        # L = 0 everywhere: off-diagonal zeros connect everything; only the
        # replacement behavior matters here
        cfg = make_config(np.zeros((n, n)))
        H = en.sample_wigner(law, n, 3)
        out = tr.replacement_matrix(H, cfg, D=4.0, seed=77)
        assert np.array_equal(out, H.entries)

    def test_replaced_cells_bounded_and_moment_matched(self):
        law = en.student_t(5)
        n = 448  # ~10^5 independent cells
        cfg = make_config(np.ones((n, n)))
        H = en.sample_wigner(law, n, 13)
        out = tr.replacement_matrix(H, cfg, D=4.0, seed=99)
        cells = out[np.triu_indices(n)]
        assert np.max(np.abs(cells)) <= 4.0
        matched = tr.matched_law_for(law, n, cfg.R_under, 4.0)
        m_target = matched.moments()
        count = len(cells)
        for order in (1, 2, 3, 4):
            emp = np.mean(cells ** order)
            se = np.std(cells.astype(float) ** order, ddof=1) / math.sqrt(count)
            assert abs(emp - m_target[order - 1]) < 4 * max(se, 1e-12)

    def test_mixed_configuration_keeps_large_cells(self):
        law = en.student_t(5)
        n = 12
        L = np.ones((n, n), dtype=np.uint8)
        L[2, 5] = L[5, 2] = 0
        cfg = make_config(L)
        H = tr.sample_conditioned(law, cfg, n, 1.0, 1.0, seed=55)
        out = tr.replacement_matrix(H, cfg, D=4.0, seed=56)
        assert out[2, 5] == H.entries[2, 5]
        assert out[5, 2] == H.entries[5, 2]


class TestInadmissibilityBounds:
    def test_plugin_example(self):
        p_rconn, _ = tr.inadmissibility_probability_bounds(
            n=100, r=2, R_under=10.0, K=4, p_n=0.0
        )
        assert p_rconn == pytest.approx(math.exp(6) * 100 / 2 * 10.0 ** -4, rel=1e-12)

    def test_monotone_in_r_under(self):
        values = [
            tr.inadmissibility_probability_bounds(100, 3, ru, 4, 0.0)[0]
            for ru in (2.0, 5.0, 10.0, 20.0)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_deviant_bound_uses_annulus_mass(self):
        _, p1 = tr.inadmissibility_probability_bounds(100, 3, 2.0, 5, p_n=0.0)
        assert p1 == pytest.approx(math.exp(-5.0))
        _, p2 = tr.inadmissibility_probability_bounds(100, 3, 2.0, 5, p_n=1e-3)
        assert p2 == pytest.approx(math.exp(-5.0 * 10.0))

    def test_default_rules_at_4096_below_target(self):
        from wignerlab.experiments import Constants

        cst = Constants()
        n = 4096
        r, r_under, K = cst.r_cluster(n), math.ceil(cst.log(n)), cst.K_deviant(n)
        p_rconn, _ = tr.inadmissibility_probability_bounds(n, r, r_under, K, 0.0)
        assert p_rconn < n ** (-cst.log(n))

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            tr.inadmissibility_probability_bounds(0, 2, 1.0, 1, 0.0)


class TestEmpiricalAdmissibility:
    def test_default_rules_admissible_at_desk_scale(self):
        from wignerlab.experiments import Constants

        cst = Constants()
        law = en.student_t(5)
        n = 128
        r, K = cst.r_cluster(n), cst.K_deviant(n)
        r_under = math.ceil(cst.log(n))
        for trial in range(20):
            s = en.sample_wigner(law, n, 1000 + trial)
            cfg = tr.build_configuration(s, r_under, r, K)
            assert tr.classify(cfg).r_admissible


class TestSampleConditionedErrors:
    def test_large_cells_without_annulus_mass_rejected(self):
        # Rademacher has no annulus: a configuration with zeros is unsamplable
        L = np.ones((4, 4), dtype=np.uint8)
        L[0, 1] = L[1, 0] = 0
        cfg = make_config(L)
        with pytest.raises(ValueError):
            tr.sample_conditioned(en.rademacher(), cfg, 4, R_under=1.0, R_over=1.0, seed=1)

    def test_size_mismatch_rejected(self):
        cfg = make_config(np.ones((4, 4)))
        with pytest.raises(ValueError):
            tr.sample_conditioned(en.gaussian(), cfg, 8, 1.0, 1.0, seed=1)
