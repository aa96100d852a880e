"""Tests for Monte Carlo violation certificates."""

import numpy as np
import pytest
import scipy.stats

from postfeas.certify import (
    Certificate,
    certificate_from_json,
    certificate_to_json,
    certify,
    clopper_pearson_upper,
    estimate_violation,
)
from postfeas.errors import CountOutOfRange, DomainError
from postfeas.stats import Rng


class TestClopperPearsonUpper:
    def test_table_value(self):
        value = clopper_pearson_upper(82, 4000, 0.05)
        assert value == pytest.approx(0.024582, abs=1e-5)
        assert value == pytest.approx(0.02458190209402681, abs=1e-12)

    def test_zero_count_closed_form(self):
        for m, beta in ((10, 0.05), (500, 0.01), (4000, 0.1)):
            expect = 1.0 - beta ** (1.0 / m)
            assert clopper_pearson_upper(0, m, beta) == pytest.approx(
                expect, abs=1e-12
            )

    def test_full_count_is_one(self):
        assert clopper_pearson_upper(17, 17, 0.05) == 1.0

    def test_matches_beta_ppf(self):
        gen = np.random.default_rng(81)
        for _ in range(25):
            m = int(gen.integers(1, 5000))
            s = int(gen.integers(0, m))
            beta = float(gen.uniform(0.005, 0.3))
            ref = scipy.stats.beta.ppf(1.0 - beta, s + 1, m - s)
            assert clopper_pearson_upper(s, m, beta) == pytest.approx(
                float(ref), abs=1e-10
            )

    def test_nondecreasing_in_count(self):
        vals = [clopper_pearson_upper(s, 25, 0.05) for s in range(26)]
        assert np.all(np.diff(vals) > 0.0)
        assert vals[-1] == 1.0

    def test_tightens_with_more_draws(self):
        vals = [
            clopper_pearson_upper(2, 100, 0.05),
            clopper_pearson_upper(20, 1000, 0.05),
            clopper_pearson_upper(200, 10000, 0.05),
        ]
        assert np.all(np.diff(vals) < 0.0)

    def test_gap_to_point_estimate_shrinks(self):
        for v in (0.01, 0.05, 0.2, 0.5):
            for m in (100, 1000, 10000):
                s = round(v * m)
                ub = clopper_pearson_upper(s, m, 0.05)
                gap = ub - s / m
                assert gap > 0.0
                assert gap <= 3.0 * np.sqrt(v * (1.0 - v) / m) + 2.0 / m

    def test_validation(self):
        with pytest.raises(CountOutOfRange):
            clopper_pearson_upper(-1, 10, 0.05)
        with pytest.raises(CountOutOfRange):
            clopper_pearson_upper(11, 10, 0.05)
        with pytest.raises(CountOutOfRange):
            clopper_pearson_upper(0, 0, 0.05)
        with pytest.raises(DomainError):
            clopper_pearson_upper(1, 10, 0.0)
        with pytest.raises(DomainError):
            clopper_pearson_upper(1, 10, 1.0)


def uniform_rhs_sampler(lo, hi):
    def sampler(rng, count):
        return rng.generator.uniform(lo, hi, count)

    return sampler


def scalar_rhs_oracle(x, batch):
    # constraint 0*x <= b: violated exactly when b < 0
    return np.zeros_like(batch) * np.sum(x) - batch > 0.0


class TestEstimateViolation:
    def test_origin_feasible_when_rhs_positive(self):
        rows = np.array([[1.0, 2.0], [0.5, 0.3]])

        def sampler(rng, count):
            return rng.generator.uniform(0.5, 2.0, (count, 2))

        def oracle(x, batch):
            return np.any(rows @ x > batch, axis=1)

        s, counts = estimate_violation(
            np.zeros(2), oracle, sampler, 500, Rng.for_purpose(1, "cert-a")
        )
        assert s == 0
        assert counts is None

    def test_symmetric_rhs_violates_half_the_time(self):
        m = 10**4
        s, _ = estimate_violation(
            np.array([3.0]),
            scalar_rhs_oracle,
            uniform_rhs_sampler(-1.0, 1.0),
            m,
            Rng.for_purpose(2, "cert-b"),
        )
        se = np.sqrt(0.25 / m)
        assert abs(s / m - 0.5) <= 3.0 * se

    def test_fixed_stream_reproduces_count(self):
        rng = Rng.for_purpose(3, "cert-c")
        args = (np.array([1.0]), scalar_rhs_oracle, uniform_rhs_sampler(-1.0, 1.0), 777)
        s1, _ = estimate_violation(*args, rng)
        s2, _ = estimate_violation(*args, rng.clone())
        assert s1 == s2

    def test_per_constraint_counts(self):
        def sampler(rng, count):
            return rng.generator.uniform(-1.0, 1.0, (count, 3))

        def oracle(x, batch):
            flags = batch > 0.5
            return np.any(flags, axis=1), flags

        s, counts = estimate_violation(
            np.zeros(1), oracle, sampler, 2000, Rng.for_purpose(4, "cert-d")
        )
        assert counts is not None
        assert counts.shape == (3,)
        assert np.all(counts >= 0)
        assert counts.max() <= s <= counts.sum()
        assert s > 0

    def test_strict_inequality_at_zero_residual(self):
        def zero_sampler(rng, count):
            return np.zeros(count)

        def oracle(x, batch):
            return batch - 0.0 > 0.0

        s, _ = estimate_violation(
            np.zeros(1), oracle, zero_sampler, 64, Rng.for_purpose(5, "cert-e")
        )
        assert s == 0

        def denormal_sampler(rng, count):
            return np.full(count, 1e-300)

        s, _ = estimate_violation(
            np.zeros(1), oracle, denormal_sampler, 64, Rng.for_purpose(6, "cert-f")
        )
        assert s == 64

    def test_shape_validation(self):
        def sampler(rng, count):
            return np.zeros(count)

        with pytest.raises(DomainError):
            estimate_violation(
                np.zeros(1),
                lambda x, b: np.zeros(3, dtype=bool),
                sampler,
                5,
                Rng.for_purpose(7, "cert-g"),
            )
        with pytest.raises(DomainError):
            estimate_violation(
                np.zeros(1),
                lambda x, b: (np.zeros(5, dtype=bool), np.zeros(5, dtype=bool)),
                sampler,
                5,
                Rng.for_purpose(8, "cert-h"),
            )
        with pytest.raises(CountOutOfRange):
            estimate_violation(
                np.zeros(1), scalar_rhs_oracle, sampler, 0,
                Rng.for_purpose(9, "cert-i"),
            )


class TestCertify:
    def test_deterministically_feasible_candidate(self):
        cert = certify(
            np.zeros(1),
            scalar_rhs_oracle,
            uniform_rhs_sampler(0.5, 1.5),
            250,
            0.05,
            Rng.for_purpose(10, "cert-j"),
        )
        assert cert.s == 0
        assert cert.v_hat == 0.0
        assert cert.upper_bound == pytest.approx(1.0 - 0.05 ** (1.0 / 250), abs=1e-12)
        assert cert.M == 250 and cert.beta == 0.05

    def test_invariants_and_rates(self):
        def sampler(rng, count):
            return rng.generator.uniform(-1.0, 1.0, (count, 2))

        def oracle(x, batch):
            flags = batch > 0.8
            return np.any(flags, axis=1), flags

        cert = certify(
            np.zeros(1), oracle, sampler, 3000, 0.05, Rng.for_purpose(11, "cert-k")
        )
        assert 0 <= cert.s <= cert.M
        assert cert.v_hat == cert.s / cert.M
        assert cert.v_hat < cert.upper_bound <= 1.0
        assert cert.per_constraint_rates is not None
        assert len(cert.per_constraint_rates) == 2
        assert max(cert.per_constraint_rates) <= cert.v_hat

    def test_upper_bound_coverage(self):
        # Known violation probability p: the exact interval covers p in at
        # least 95% of replications, within Monte Carlo slack.
        p, beta, m, reps = 0.03, 0.05, 150, 2000
        rng = Rng.for_purpose(12, "cert-coverage")
        covered = 0
        for _ in range(reps):
            cert = certify(
                np.zeros(1),
                lambda x, batch: batch < p,
                lambda r, count: r.generator.uniform(0.0, 1.0, count),
                m,
                beta,
                rng,
            )
            if cert.upper_bound >= p:
                covered += 1
        assert covered / reps >= 0.95 - 0.015

    def test_violation_count_is_binomial(self):
        # Small-M replication study: the counts should be statistically
        # indistinguishable from a Binomial(20, 0.3) law.
        p, m, reps = 0.3, 20, 5000
        rng = Rng.for_purpose(13, "cert-binom")
        counts = np.zeros(m + 1, dtype=int)
        for _ in range(reps):
            s, _ = estimate_violation(
                np.zeros(1),
                lambda x, batch: batch < p,
                lambda r, count: r.generator.uniform(0.0, 1.0, count),
                m,
                rng,
            )
            counts[s] += 1
        probs = np.array(
            [scipy.stats.binom.pmf(k, m, p) for k in range(m + 1)]
        )
        expected = reps * probs
        # pool the tails so every cell expects at least five replications
        order = np.argsort(expected)
        pooled_obs, pooled_exp = [], []
        acc_o = acc_e = 0.0
        for idx in order:
            acc_o += counts[idx]
            acc_e += expected[idx]
            if acc_e >= 5.0:
                pooled_obs.append(acc_o)
                pooled_exp.append(acc_e)
                acc_o = acc_e = 0.0
        pooled_obs[-1] += acc_o
        pooled_exp[-1] += acc_e
        stat = np.sum(
            (np.array(pooled_obs) - np.array(pooled_exp)) ** 2
            / np.array(pooled_exp)
        )
        crit = scipy.stats.chi2.ppf(0.99, len(pooled_obs) - 1)
        assert stat <= crit

    def test_certificate_json_round_trip(self):
        cert = certify(
            np.zeros(1),
            scalar_rhs_oracle,
            uniform_rhs_sampler(-1.0, 1.0),
            1234,
            0.07,
            Rng.for_purpose(14, "cert-json"),
        )
        back = certificate_from_json(certificate_to_json(cert))
        assert back == cert

        with_rates = Certificate(
            M=100,
            s=3,
            v_hat=0.03,
            upper_bound=clopper_pearson_upper(3, 100, 0.05),
            beta=0.05,
            per_constraint_rates=(0.01, 0.02),
        )
        back = certificate_from_json(certificate_to_json(with_rates))
        assert back == with_rates

    def test_repeat_run_identical(self):
        rng = Rng.for_purpose(15, "cert-repeat")
        args = (
            np.array([0.2]),
            scalar_rhs_oracle,
            uniform_rhs_sampler(-1.0, 1.0),
            800,
            0.05,
        )
        assert certify(*args, rng) == certify(*args, rng.clone())
