import random
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from helpers import truncation_violations
from tsens.dp import (
    DpConfig,
    TruncationProfile,
    laplace_sample,
    laplace_samples,
    learn_threshold,
    make_rng,
    truncate,
    truncated_count,
    tsens_dp,
)
from tsens.errors import DataError, UnknownRelation
from tsens.oracle import naive_join_count
from tsens.query import parse_query
from tsens.relation import Database
from tsens.sensitivity import analyze, ls_acyclic
from tsens.synth import chain_database, random_acyclic


def cfg(**kw):
    base = dict(epsilon=1.0, epsilon_tsens=0.5, ell=10, primary_private="R2")
    base.update(kw)
    return DpConfig(**base)


class TestLaplace:
    def test_test_mode_is_zero(self):
        assert laplace_sample(3.0, None, test_mode=True) == 0.0

    def test_scale_must_be_positive(self):
        with pytest.raises(DataError):
            laplace_sample(0.0, make_rng(1))

    @pytest.mark.parametrize("b", [0.5, 1.0, 5.0])
    def test_moments(self, b):
        x = laplace_samples(b, 100_000, make_rng(17))
        assert abs(x.mean()) <= 0.05 * b
        assert abs(x.var() - 2 * b * b) <= 0.1 * 2 * b * b

    def test_ks(self):
        x = laplace_samples(2.0, 100_000, make_rng(23))
        assert stats.kstest(x, stats.laplace(scale=2.0).cdf).pvalue > 0.01

    def test_deterministic(self):
        assert np.array_equal(laplace_samples(1.0, 50, make_rng(5)), laplace_samples(1.0, 50, make_rng(5)))
        assert not np.array_equal(laplace_samples(1.0, 50, make_rng(5)), laplace_samples(1.0, 50, make_rng(6)))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(epsilon=0.0),
            dict(epsilon_tsens=1.0),
            dict(epsilon_tsens=0.0),
            dict(ell=0),
            dict(eps1_fraction=1.0),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(DataError):
            cfg(**kw)

    def test_split(self):
        c = cfg(epsilon=2.0, epsilon_tsens=1.0, eps1_fraction=0.25)
        assert (c.epsilon1, c.epsilon2, c.epsilon_answer) == (0.25, 0.75, 1.0)


class TestTruncate:
    def test_large_tau_unchanged(self, path4):
        db, q = path4
        tables = analyze(db, q).tables
        assert truncate(db, q, tables, "R2", 4) == db

    def test_tau_zero_removes_joining_tuples(self, path4):
        db, q = path4
        out = truncate(db, q, analyze(db, q).tables, "R3", 0)
        assert len(out["R3"]) == 0
        assert naive_join_count(out, q) == 0

    def test_path4_tau3(self, path4):
        db, q = path4
        tables = analyze(db, q).tables
        out = truncate(db, q, tables, "R2", 3)
        assert naive_join_count(db, q) == 4
        assert naive_join_count(out, q) == 0
        assert truncated_count(db, tables, "R2", 3) == 0

    def test_unknown_primary(self, path4):
        db, q = path4
        with pytest.raises(UnknownRelation):
            truncate(db, q, analyze(db, q).tables, "R9", 1)

    def test_keeps_unjoinable_tuples(self):
        db = Database.from_rows({"R1": (("A",), [("a",), ("z",)]), "R2": (("A",), [("a",)])})
        q = parse_query("Q :- R1(A), R2(A).")
        out = truncate(db, q, analyze(db, q).tables, "R1", 0)
        assert out.decoded("R1")[1] == {("z",): 1}


seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(0, 12))
def test_profile_matches_truncate_and_count(seed, tau):
    rng = random.Random(seed)
    inst = random_acyclic(rng)
    primary = rng.choice(inst.query.relations)
    a = analyze(inst.db, inst.query)
    expected = naive_join_count(truncate(inst.db, inst.query, a.tables, primary, tau), inst.query)
    assert truncated_count(inst.db, a.tables, primary, tau) == expected


@given(seeds)
def test_profile_monotone_and_saturates(seed):
    rng = random.Random(seed)
    inst = random_acyclic(rng)
    primary = rng.choice(inst.query.relations)
    a = analyze(inst.db, inst.query)
    prof = TruncationProfile.build(inst.db, a.tables, primary)
    counts = [prof.count(i) for i in range(0, a.report.ls + 3)]
    assert counts == sorted(counts)
    assert counts[a.report.ls] == a.report.join_size


@given(seeds)
def test_truncated_query_has_bounded_sensitivity(seed):
    rng = random.Random(seed)
    inst = random_acyclic(rng, max_atoms=3)
    primary = rng.choice(inst.query.relations)
    ls = ls_acyclic(inst.db, inst.query).ls
    assert truncation_violations(inst.db, inst.query, primary, range(0, ls + 2)) == []


class TestLearnThreshold:
    def test_test_mode_scan(self):
        rng = random.Random(8)
        for _ in range(50):
            inst = random_acyclic(rng)
            primary = rng.choice(inst.query.relations)
            a = analyze(inst.db, inst.query)
            prof = TruncationProfile.build(inst.db, a.tables, primary)
            for ell in (1, 2, 5, 20):
                c = cfg(ell=ell, primary_private=primary, test_mode=True)
                target = prof.count(ell)
                expected = next(i for i in range(1, ell + 1) if prof.count(i) >= target)
                assert learn_threshold(prof, c, None) == expected
                if ell >= a.report.ls:
                    assert prof.count(expected) == a.report.join_size

    def test_ell_one(self, path4):
        db, q = path4
        prof = TruncationProfile.build(db, analyze(db, q).tables, "R2")
        assert learn_threshold(prof, cfg(ell=1), make_rng(0)) == 1

    def test_seeded(self, path4):
        db, q = path4
        prof = TruncationProfile.build(db, analyze(db, q).tables, "R2")
        c = cfg(ell=50)
        assert learn_threshold(prof, c, make_rng(9)) == learn_threshold(prof, c, make_rng(9))

    def test_long_scan(self):
        # more iterations than one noise chunk
        db, q = chain_database(2, 200, seed=1, domain=5)
        a = analyze(db, q)
        prof = TruncationProfile.build(db, a.tables, "R1")
        tau = learn_threshold(prof, cfg(ell=10_000, primary_private="R1", epsilon=4.0, epsilon_tsens=2.0), make_rng(3))
        assert 1 <= tau <= 10_000


class TestTsensDp:
    def test_test_mode_exact(self, path4):
        db, q = path4
        ans = tsens_dp(db, q, cfg(test_mode=True))
        assert ans.value == 4 and ans.tau == 4 and ans.raw_truncated == 4

    def test_clamped_at_zero(self):
        db = Database.from_rows({"R1": (("A",), [("a",)]), "R2": (("A",), [("a",)])})
        q = parse_query("Q :- R1(A), R2(A).")
        values = [tsens_dp(db, q, cfg(ell=3, seed=s, epsilon=0.2, epsilon_tsens=0.1)) for s in range(40)]
        clamped = [v for v in values if v.clamped]
        assert clamped, "expected some runs to need clamping"
        assert all(v.value == 0.0 for v in clamped)
        assert all(v.value >= 0 for v in values)

    def test_seeded_repeatable(self, path4):
        db, q = path4
        assert tsens_dp(db, q, cfg(seed=42)) == tsens_dp(db, q, cfg(seed=42))

    def test_unknown_primary(self, path4):
        with pytest.raises(UnknownRelation):
            tsens_dp(*path4, cfg(primary_private="R7"))

    def test_error_shrinks_with_epsilon(self):
        db, q = chain_database(3, 300, seed=2, domain=30)
        truth = naive_join_count(db, q)
        a = analyze(db, q)
        medians = []
        for eps in (0.1, 1.0, 10.0):
            errs = [
                abs(tsens_dp(db, q, cfg(epsilon=eps, epsilon_tsens=eps / 2, ell=100, primary_private="R2", seed=s), analysis=a).value - truth)
                / truth
                for s in range(50)
            ]
            medians.append(statistics.median(errs))
        assert medians[0] > medians[1] > medians[2]
