"""Product-sketch mechanics: update rules, linearity, the coefficient
identity against the dense tensor semantics, and the two estimators."""

import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indisketch import (
    ConfigurationError,
    EmptyStreamError,
    MergeIncompatibleError,
    ProductSketchState,
    SketchBank,
    TupleStream,
    build_frequency_table,
    dense_independence_tensor,
    epsilon_l1_estimate,
    l1_norm,
    merge,
    polylog_l1_estimate,
    prefix_zero,
    reference_sketch_value,
    sketch_update,
    sketch_value,
    suffix_sum,
)
from indisketch.sketches import required_epsilon_reps


def fraction_tables(rnd, fams, n):
    return [
        [Fraction(rnd.randint(-9, 9), rnd.randint(1, 7)) for _ in range(n)]
        for _ in range(fams)
    ]


class TestUpdateRules:
    def test_single_tuple_full_sketch(self):
        # s = s' = 0: joint is the coefficient product, margins the factors
        c = [[2.0, 5.0], [3.0, 7.0]]
        st_ = ProductSketchState(k=2, n=2, s=0, s_prime=0, prefix=[], coeff=c)
        st_.update((1, 2))
        assert st_.joint == 2.0 * 7.0
        assert st_.margins == [2.0, 7.0]
        assert st_.m_seen == 1

    def test_empty_stream(self):
        st_ = ProductSketchState(k=2, n=2, s=0, s_prime=0, prefix=[], coeff=[[1, 1], [1, 1]])
        assert st_.joint == 0 and st_.margins == [0, 0]
        with pytest.raises(EmptyStreamError):
            sketch_value(st_)

    def test_masked_prefix_annihilates_joint(self):
        st_ = ProductSketchState(
            k=2, n=2, s=1, s_prime=1, prefix=[[0, 0]], coeff=[[1.5, 2.5]]
        )
        for rec in [(1, 1), (2, 2), (1, 2)]:
            sketch_update(st_, rec)
        assert st_.joint == 0
        assert st_.margins[0] == 0
        assert sketch_value(st_) == 0

    def test_hand_expanded_value(self):
        # substituted coefficient values against the tensor expansion
        probes = [[Fraction(1), Fraction(2)], [Fraction(1), Fraction(3)]]
        st_ = ProductSketchState(k=2, n=2, s=0, s_prime=0, prefix=[], coeff=probes)
        for rec in [(1, 1), (2, 2)]:
            st_.update(rec)
        # m^(k-1)*joint - margin1*margin2 = 2*(1*1 + 2*3) - (1+2)*(1+3)
        assert st_.value() == 2 * 7 - 12 == 2
        table = build_frequency_table(TupleStream(2, 2, [(1, 1), (2, 2)]))
        assert reference_sketch_value(table, [], 0, probes) == 2


class TestCoefficientIdentity:
    @pytest.mark.parametrize("k", [2, 3])
    def test_exact_probe_identity(self, k):
        """sketch value == sum_i C(i) * collapsed-masked-tensor entry, exactly."""
        rnd = random.Random(k)
        for trial in range(25):
            n = rnd.randint(2, 4)
            m = rnd.randint(1, 8)
            recs = [
                tuple(rnd.randint(1, n) for _ in range(k)) for _ in range(m)
            ]
            table = build_frequency_table(TupleStream(k, n, recs))
            for s in range(k + 1):
                for sp in range(s + 1):
                    prefix = [
                        [rnd.randint(0, 1) for _ in range(n)] for _ in range(s)
                    ]
                    for probe in range(3):
                        coeff = fraction_tables(rnd, k - sp, n)
                        st_ = ProductSketchState(
                            k=k, n=n, s=s, s_prime=sp, prefix=prefix, coeff=coeff
                        )
                        for rec in recs:
                            st_.update(rec)
                        assert st_.value() == reference_sketch_value(
                            table, prefix, sp, coeff
                        )


class TestLinearity:
    @given(
        st.lists(
            st.tuples(st.integers(1, 3), st.integers(1, 3)),
            min_size=2,
            max_size=12,
        ),
        st.randoms(use_true_random=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_merge_equals_concatenation(self, recs, rnd):
        cut = rnd.randint(0, len(recs))
        d1, d2 = recs[:cut], recs[cut:]

        def fresh():
            return ProductSketchState.from_seeds(
                2, 3, 1, 1, [[1, 0, 1]], seed=99
            )

        a, b, whole = fresh(), fresh(), fresh()
        for r in d1:
            a.update(r)
        for r in d2:
            b.update(r)
        for r in recs:
            whole.update(r)
        merged = merge(a, b)
        assert merged.m_seen == whole.m_seen
        assert merged.joint == pytest.approx(whole.joint)
        assert merged.margins == pytest.approx(whole.margins)

    def test_merge_with_empty_is_identity(self):
        a = ProductSketchState.from_seeds(2, 3, 0, 0, [], seed=5)
        e = ProductSketchState.from_seeds(2, 3, 0, 0, [], seed=5)
        for r in [(1, 2), (3, 3)]:
            a.update(r)
        out = merge(a, e)
        assert out.joint == a.joint and out.m_seen == a.m_seen

    def test_merge_commutative_associative(self):
        rnd = random.Random(0)
        parts = [
            [tuple(rnd.randint(1, 3) for _ in range(2)) for _ in range(4)]
            for _ in range(3)
        ]

        def sketch(recs):
            s = ProductSketchState.from_seeds(2, 3, 1, 0, [[1, 1, 0]], seed=1)
            for r in recs:
                s.update(r)
            return s

        s1, s2, s3 = (sketch(p) for p in parts)
        lhs = merge(merge(s1, s2), s3)
        rhs = merge(s3, merge(s2, s1))
        assert lhs.joint == pytest.approx(rhs.joint)
        assert lhs.margins == pytest.approx(rhs.margins)

    def test_merge_randomness_mismatch(self):
        a = ProductSketchState.from_seeds(2, 3, 0, 0, [], seed=1)
        b = ProductSketchState.from_seeds(2, 3, 0, 0, [], seed=2)
        with pytest.raises(MergeIncompatibleError):
            merge(a, b)

    def test_permutation_invariance(self):
        recs = [(1, 2), (3, 1), (2, 2), (3, 3)]
        a = ProductSketchState.from_seeds(2, 3, 1, 1, [[1, 1, 0]], seed=3)
        b = ProductSketchState.from_seeds(2, 3, 1, 1, [[1, 1, 0]], seed=3)
        for r in recs:
            a.update(r)
        for r in reversed(recs):
            b.update(r)
        assert a.value() == pytest.approx(b.value())


class TestBank:
    def test_bank_rows_match_scalar_states(self):
        recs = [(1, 2), (3, 4), (1, 1), (2, 2), (4, 4)]
        bank = SketchBank(2, 4, 1, 1, [[1, 0, 1, 1]], repetitions=6, seed=42)
        for r in recs:
            bank.update(r)
        for rep in range(6):
            st_ = ProductSketchState.from_seeds(
                2, 4, 1, 1, [[1, 0, 1, 1]], seed=42, rep=rep
            )
            for r in recs:
                st_.update(r)
            assert bank.values()[rep] == pytest.approx(st_.value())

    def test_bulk_equals_per_tuple(self):
        recs = [(1, 2), (1, 2), (3, 1), (2, 2), (1, 2)]
        a = SketchBank(2, 3, 1, 0, [[1, 1, 0]], repetitions=4, seed=7)
        b = SketchBank(2, 3, 1, 0, [[1, 1, 0]], repetitions=4, seed=7)
        for r in recs:
            a.update(r)
        counts = {}
        for r in recs:
            counts[r] = counts.get(r, 0) + 1
        b.bulk_update(counts)
        assert np.allclose(a.values(), b.values())
        assert a.m_seen == b.m_seen == len(recs)


class TestMarginCancellation:
    def test_unmasked_collapse_of_independence_tensor_vanishes(self):
        """Collapsing any leading coordinate of the difference tensor with an
        all-ones mask cancels exactly: both distributions share margins."""
        rnd = random.Random(8)
        for _ in range(10):
            n, m = rnd.randint(2, 4), rnd.randint(2, 12)
            recs = [(rnd.randint(1, n), rnd.randint(1, n)) for _ in range(m)]
            table = build_frequency_table(TupleStream(2, n, recs))
            M = dense_independence_tensor(table)
            assert l1_norm(suffix_sum(M, 1)) == 0

    def test_sharp_estimator_sees_zero_under_identity_mask(self):
        recs = [(1, 1), (2, 2)] * 5
        bank = SketchBank(2, 2, 1, 1, [[1, 1]], repetitions=64, seed=2)
        for r in recs:
            bank.update(r)
        assert epsilon_l1_estimate(bank, 0.5, 0.5, c=1.0) == pytest.approx(0.0, abs=1e-9)


class TestEpsilonEstimate:
    def test_masked_everything_gives_zero(self):
        bank = SketchBank(2, 4, 1, 1, [[0, 0, 0, 0]], repetitions=64, seed=3)
        for r in [(1, 1), (2, 3), (4, 4)]:
            bank.update(r)
        assert epsilon_l1_estimate(bank, 0.5, 0.5, c=1.0) == 0.0

    def test_single_tuple_gives_zero(self):
        bank = SketchBank(2, 4, 1, 1, [[1, 1, 1, 1]], repetitions=64, seed=3)
        bank.update((2, 3))
        assert epsilon_l1_estimate(bank, 0.5, 0.5, c=1.0) == pytest.approx(0.0, abs=1e-9)

    def test_repetition_floor_enforced(self):
        bank = SketchBank(2, 4, 1, 1, [[1, 1, 1, 1]], repetitions=10, seed=3)
        bank.update((1, 1))
        with pytest.raises(ConfigurationError):
            epsilon_l1_estimate(bank, 0.1, 0.05)

    def test_shape_enforced(self):
        bank = SketchBank(2, 4, 1, 0, [[1, 1, 1, 1]], repetitions=512, seed=3)
        bank.update((1, 1))
        with pytest.raises(ConfigurationError):
            epsilon_l1_estimate(bank, 0.5, 0.5, c=1.0)

    def test_concentration_on_known_target(self):
        # masked collapsed norm of the independence tensor, n=8
        rnd = random.Random(5)
        recs = [(rnd.randint(1, 8), rnd.randint(1, 8)) for _ in range(200)]
        recs += [(i, i) for i in range(1, 9)] * 12
        table = build_frequency_table(TupleStream(2, 8, recs))
        mask = [1, 0, 1, 1, 0, 1, 1, 0]
        target = l1_norm(suffix_sum(prefix_zero(dense_independence_tensor(table), [mask]), 1))
        assert target > 0
        eps, delta = 0.1, 0.05
        reps = required_epsilon_reps(eps, delta)
        hits = 0
        trials = 40
        for s in range(trials):
            bank = SketchBank(2, 8, 1, 1, [mask], repetitions=reps, seed=s)
            bank.bulk_update(table.joint)
            est = epsilon_l1_estimate(bank, eps, delta)
            hits += abs(est - target) <= 0.15 * target
        assert hits >= 0.9 * trials


class TestPolylogEstimate:
    def test_zero_target(self):
        bank = SketchBank(2, 4, 1, 0, [[0, 0, 0, 0]], repetitions=64, seed=3)
        bank.update((1, 1))
        assert polylog_l1_estimate(bank, 0.5, c=1.0) == 0.0

    def test_repetition_floor(self):
        bank = SketchBank(2, 4, 1, 0, [[1, 1, 1, 1]], repetitions=4, seed=3)
        bank.update((1, 1))
        with pytest.raises(ConfigurationError):
            polylog_l1_estimate(bank, 0.05)

    def test_degenerate_parameters_reduce_to_full_sketch(self):
        # s = s' = 0 sketches the whole tensor
        recs = [(1, 1), (2, 2), (1, 2)]
        bank = SketchBank(2, 2, 0, 0, [], repetitions=8, seed=11)
        for r in recs:
            bank.update(r)
        st_ = ProductSketchState.from_seeds(2, 2, 0, 0, [], seed=11, rep=0)
        for r in recs:
            st_.update(r)
        assert bank.values()[0] == pytest.approx(st_.value())

    def test_window_on_known_target(self):
        rnd = random.Random(6)
        recs = [(i, i) for i in range(1, 17)] * 6
        recs += [(rnd.randint(1, 16), rnd.randint(1, 16)) for _ in range(100)]
        table = build_frequency_table(TupleStream(2, 16, recs))
        mask = [rnd.randint(0, 1) for _ in range(16)]
        target = l1_norm(prefix_zero(dense_independence_tensor(table), [mask]))
        assert target > 0
        beta = 2 * math.log2(16) ** 2
        hits = 0
        trials = 40
        for s in range(trials):
            bank = SketchBank(2, 16, 1, 0, [mask], repetitions=192, seed=s)
            bank.bulk_update(table.joint)
            est = polylog_l1_estimate(bank, 0.05)
            hits += target / beta <= est <= beta * target
        assert hits >= 0.95 * trials


class TestSerialization:
    def test_round_trip(self):
        st_ = ProductSketchState.from_seeds(2, 4, 1, 1, [[1, 0, 1, 1]], seed=21)
        for r in [(1, 2), (3, 4), (2, 2)]:
            st_.update(r)
        blob = st_.to_json()
        back = ProductSketchState.from_dict(json.loads(blob))
        assert back.value() == pytest.approx(st_.value())
        assert back.m_seen == st_.m_seen

    def test_unknown_format_rejected(self):
        with pytest.raises(ConfigurationError):
            ProductSketchState.from_dict({"format": "nope/9"})

    def test_restored_state_merges_with_seeded_original(self):
        recs = [(1, 1), (2, 3), (3, 3), (1, 2)]
        a = ProductSketchState.from_seeds(2, 3, 1, 0, [[1, 0, 1]], seed=2)
        b = ProductSketchState.from_seeds(2, 3, 1, 0, [[1, 0, 1]], seed=2)
        whole = ProductSketchState.from_seeds(2, 3, 1, 0, [[1, 0, 1]], seed=2)
        for r in recs[:2]:
            a.update(r)
        for r in recs[2:]:
            b.update(r)
        for r in recs:
            whole.update(r)
        restored = ProductSketchState.from_dict(json.loads(a.to_json()))
        out = merge(restored, b)
        assert out.value() == pytest.approx(whole.value())

    def test_snapshot_supports_pass_splitting(self):
        # serialize after half the stream, restore, finish, compare
        recs = [(1, 1), (2, 3), (3, 3), (1, 2)]
        full = ProductSketchState.from_seeds(2, 3, 1, 0, [[1, 0, 1]], seed=2)
        for r in recs:
            full.update(r)
        half = ProductSketchState.from_seeds(2, 3, 1, 0, [[1, 0, 1]], seed=2)
        for r in recs[:2]:
            half.update(r)
        resumed = ProductSketchState.from_dict(json.loads(half.to_json()))
        for r in recs[2:]:
            resumed.update(r)
        assert resumed.value() == pytest.approx(full.value())
