"""Entry laws, matrix sampling, conditioning, and moment matching."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from wignerlab import ensembles as en


def quad_moment(law, order):
    """Independent oracle: quadrature of x^order against the law density."""
    if law.variant == "symmetric-pareto":
        # density has a kink at the inner support edge; integrate outward
        lo = 1.0 / math.sqrt(law.alpha / (law.alpha - 2.0))
        val, _ = integrate.quad(
            lambda x: x ** order * en.law_density(law, x), lo, np.inf, limit=400
        )
        return 2.0 * val if order % 2 == 0 else 0.0
    val, _ = integrate.quad(
        lambda x: x ** order * en.law_density(law, x), -np.inf, np.inf, limit=400
    )
    return val


class TestLawConstruction:
    def test_student_t_requires_heavy_dof(self):
        with pytest.raises(ValueError):
            en.student_t(4.0)
        with pytest.raises(ValueError):
            en.student_t(3.9)

    def test_pareto_requires_heavy_exponent(self):
        with pytest.raises(ValueError):
            en.symmetric_pareto(4.0)

    def test_atoms_must_be_standardized(self):
        with pytest.raises(ValueError):
            en.discrete_atoms([(-1.0, 0.6), (1.0, 0.4)])  # mean != 0
        with pytest.raises(ValueError):
            en.discrete_atoms([(-2.0, 0.5), (2.0, 0.5)])  # variance != 1
        with pytest.raises(ValueError):
            en.discrete_atoms([(-1.0, 0.7), (1.0, 0.7)])  # probs don't sum to 1

    def test_rademacher_as_atoms(self):
        law = en.discrete_atoms([(-1.0, 0.5), (1.0, 0.5)])
        assert en.law_moments(law) == (0.0, 1.0, 0.0, 1.0)


class TestLawMoments:
    def test_gaussian(self):
        assert en.law_moments(en.gaussian()) == (0.0, 1.0, 0.0, 3.0)

    def test_rademacher(self):
        assert en.law_moments(en.rademacher()) == (0.0, 1.0, 0.0, 1.0)

    def test_student_t5_closed_form(self):
        m = en.law_moments(en.student_t(5))
        assert m[:3] == (0.0, 1.0, 0.0)
        assert m[3] == pytest.approx(9.0, abs=1e-12)

    @pytest.mark.parametrize("nu", [5.0, 6.5, 12.0])
    def test_student_t_against_quadrature(self, nu):
        law = en.student_t(nu)
        assert quad_moment(law, 2) == pytest.approx(1.0, abs=1e-8)
        assert quad_moment(law, 4) == pytest.approx(en.law_moments(law)[3], rel=1e-7)

    @pytest.mark.parametrize("alpha", [4.5, 6.0, 9.0])
    def test_pareto_against_quadrature(self, alpha):
        law = en.symmetric_pareto(alpha)
        assert quad_moment(law, 2) == pytest.approx(1.0, abs=1e-8)
        assert quad_moment(law, 4) == pytest.approx(en.law_moments(law)[3], rel=1e-7)


class TestLawTails:
    def test_gaussian_tail_is_erfc(self):
        assert en.law_tail(en.gaussian(), 1.0) == pytest.approx(
            2 * stats.norm.sf(1.0), abs=1e-14
        )

    def test_rademacher_tail(self):
        assert en.law_tail(en.rademacher(), 0.5) == 1.0
        assert en.law_tail(en.rademacher(), 1.0) == 0.0

    def test_tail_matches_density_integral(self):
        for law in (en.student_t(5), en.symmetric_pareto(5.0)):
            t = 2.3
            val, _ = integrate.quad(lambda x: en.law_density(law, x), t, np.inf, limit=300)
            assert en.law_tail(law, t) == pytest.approx(2 * val, rel=1e-8)

    def test_truncated_moment_consistency(self):
        for law in (en.gaussian(), en.student_t(5), en.symmetric_pareto(6.0)):
            # E X^2 1(|X|<=a) + E X^2 1(|X|>a) = 1
            a = 1.7
            inner = en.law_truncated_moment(law, 2, a)
            outer, _ = integrate.quad(
                lambda x: x * x * en.law_density(law, x), a, np.inf, limit=300
            )
            assert inner + 2 * outer == pytest.approx(1.0, abs=1e-8)


class TestSampling:
    def test_rademacher_single_cell(self):
        for seed in (0, 1, 99):
            s = en.sample_wigner(en.rademacher(), 1, seed)
            assert s.entries[0, 0] in (-1.0, 1.0)

    def test_symmetry_exact(self):
        s = en.sample_wigner(en.gaussian(), 31, 5)
        assert np.array_equal(s.entries, s.entries.T)

    def test_determinism_bit_for_bit(self):
        a = en.sample_wigner(en.student_t(5), 40, 1234)
        b = en.sample_wigner(en.student_t(5), 40, 1234)
        assert np.array_equal(a.entries, b.entries)
        c = en.sample_wigner(en.student_t(5), 40, 1235)
        assert not np.array_equal(a.entries, c.entries)

    def test_cell_substreams_agree_across_sizes(self):
        # per-cell keying: the shared upper-left block is identical
        small = en.sample_wigner(en.gaussian(), 8, 777)
        big = en.sample_wigner(en.gaussian(), 16, 777)
        assert np.array_equal(big.entries[:8, :8], small.entries)

    def test_gaussian_mean_clt_width(self):
        # mean over the n(n+1)/2 independent cells, 4-sigma band
        n = 64
        s = en.sample_wigner(en.gaussian(), n, 2024)
        cells = s.entries[np.triu_indices(n)]
        assert abs(cells.mean()) < 4.0 / math.sqrt(n * (n + 1) / 2)

    def test_student_t_second_moment(self):
        # relative error of the second moment below 5% (4th moment = 9)
        n = 256
        s = en.sample_wigner(en.student_t(5), n, 77)
        cells = s.entries[np.triu_indices(n)]
        assert abs(np.mean(cells ** 2) - 1.0) < 0.05

    def test_scaled_property(self):
        s = en.sample_wigner(en.rademacher(), 16, 3)
        assert np.allclose(s.scaled, s.entries / 4.0)

    @pytest.mark.parametrize(
        "law",
        [en.gaussian(), en.rademacher(), en.student_t(5), en.symmetric_pareto(5.0),
         en.discrete_atoms([(-math.sqrt(3), 1 / 6), (0.0, 2 / 3), (math.sqrt(3), 1 / 6)])],
        ids=lambda l: l.label,
    )
    def test_standardization_monte_carlo(self, law):
        # 10^6 draws: mean and variance within 5 estimated standard errors
        from wignerlab import _rng

        keys = _rng.cell_keys(31337, np.zeros(10 ** 6, dtype=np.int64), np.arange(10 ** 6))
        u = _rng.uniforms(keys, 0)
        x = en._sample_from_uniforms(law, u)
        m4 = en.law_moments(law)[3]
        se_mean = 1.0 / math.sqrt(len(x))
        se_var = math.sqrt(max(m4 - 1.0, 1e-12)) / math.sqrt(len(x))
        assert abs(x.mean()) < 5 * se_mean
        assert abs(np.mean(x ** 2) - 1.0) < 5 * max(se_var, 1e-6)


class TestConditionalLaws:
    def test_rademacher_annulus_empty(self):
        small, large, p_n = en.conditional_laws(en.rademacher(), 4, 1.0, 1.0)
        assert p_n == 0.0
        assert large is None
        assert small.mass == 1.0

    def test_threshold_order_enforced(self):
        with pytest.raises(ValueError):
            en.conditional_laws(en.gaussian(), 16, 2.0, 2.0)  # a = 4 >= b = 2

    def test_student_t_markov_bound(self):
        # annulus mass below beta_4 / (n R_under^4), hence below n^-1 R^4;
        # desk scale needs R_under * R_over < n^(1/4) for a nonempty annulus
        n = 4096
        r_under = math.log10(n)
        _, _, p_n = en.conditional_laws(en.student_t(5), n, r_under, 1.0)
        beta4 = en.law_moments(en.student_t(5))[3]
        assert 0 < p_n <= beta4 / (n * r_under ** 4)
        assert p_n <= r_under ** 4 / n

    def test_gaussian_tail_negligible(self):
        _, _, p_n = en.conditional_laws(en.gaussian(), 1024, math.log10(1024), 1.0)
        assert p_n < 1e-12

    def test_conditioned_sampling_support_and_variance(self):
        from wignerlab import _rng

        law = en.student_t(5)
        n = 16
        small, large, p_n = en.conditional_laws(law, n, 1.0, 1.0)
        a = n ** 0.25
        keys = _rng.cell_keys(9, np.zeros(20000, dtype=np.int64), np.arange(20000))
        xs = small.sample_cells(keys)
        assert np.all(np.abs(xs) <= a)
        var = small.moment(2) - small.moment(1) ** 2
        se = np.std(xs ** 2, ddof=1) / math.sqrt(len(xs))
        assert abs(np.mean(xs ** 2) - small.moment(2)) < 4 * se
        assert var > 0
        xl = large.sample_cells(_rng.cell_keys(10, np.zeros(2000, dtype=np.int64), np.arange(2000)))
        b = math.sqrt(n)
        assert np.all((np.abs(xl) > a) & (np.abs(xl) <= b))

    def test_rejection_cap_raises(self):
        law = en.gaussian()
        impossible = en.ConditionedLaw(base=law, lo=50.0, hi=51.0, mass=1e-300)
        from wignerlab import _rng

        keys = _rng.cell_keys(1, np.array([0]), np.array([0]))
        old = en.REJECTION_CAP
        en.REJECTION_CAP = 50
        try:
            with pytest.raises(en.RejectionCapError):
                impossible.sample_cells(keys)
        finally:
            en.REJECTION_CAP = old


class TestMatchBounded:
    def test_gaussian_target_exact_atoms(self):
        law = en.match_bounded((0.0, 1.0, 0.0, 3.0), D=2.0)
        atoms = dict(law.atoms)
        assert set(atoms) == {-math.sqrt(3), 0.0, math.sqrt(3)}
        assert atoms[0.0] == pytest.approx(2 / 3, abs=1e-12)
        assert atoms[math.sqrt(3)] == pytest.approx(1 / 6, abs=1e-12)
        assert atoms[-math.sqrt(3)] == pytest.approx(1 / 6, abs=1e-12)

    def test_rademacher_matches_itself(self):
        law = en.match_bounded((0.0, 1.0, 0.0, 1.0), D=1.0)
        assert dict(law.atoms) == {-1.0: 0.5, 1.0: 0.5}

    def test_heavy_fourth_moment(self):
        target = (0.0, 1.0, 0.0, 9.0)
        law = en.match_bounded(target, D=4.0)
        assert len(law.atoms) <= 3
        got = law.moments()
        assert max(abs(g - t) for g, t in zip(got, target)) < 1e-10
        assert max(abs(v) for v, _ in law.atoms) <= 4.0

    def test_asymmetric_target(self):
        # moments of a shifted/standardized two-point law: exactly representable
        vals = np.array([-0.5, 2.0])
        probs = np.array([0.8, 0.2])
        target = tuple(float((vals ** s) @ probs) for s in (1, 2, 3, 4))
        law = en.match_bounded(target, D=3.0)
        got = law.moments()
        assert max(abs(g - t) for g, t in zip(got, target)) < 1e-10

    def test_insufficient_bound_raises(self):
        with pytest.raises(en.MomentMatchError):
            en.match_bounded((0.0, 1.0, 0.0, 9.0), D=1.5)  # needs atoms at +-3

    def test_infeasible_hankel_raises(self):
        with pytest.raises(en.MomentMatchError):
            en.match_bounded((0.0, 1.0, 0.0, 0.5), D=2.0)  # m4 < m2^2

    def test_sampling_respects_atoms(self):
        from wignerlab import _rng

        law = en.match_bounded((0.0, 1.0, 0.0, 3.0), D=2.0)
        keys = _rng.cell_keys(4, np.zeros(30000, dtype=np.int64), np.arange(30000))
        xs = law.sample_cells(keys)
        assert set(np.unique(xs)) <= {-math.sqrt(3), 0.0, math.sqrt(3)}
        assert abs(np.mean(xs == 0.0) - 2 / 3) < 0.02
