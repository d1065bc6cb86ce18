import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridpark.fuzzy import (
    EmptyActivation,
    LinguisticVariable,
    MembershipFunction,
    MissingInput,
    Rule,
    RuleBase,
    aggregate_centroid,
    centroid,
    evaluate,
    infer,
    membership,
    uniform_partition,
)
from oracles import discrete_infer, random_inputs, random_rule_base

tri, trap, shl, shr = (MembershipFunction.tri, MembershipFunction.trap,
                       MembershipFunction.shl, MembershipFunction.shr)


def single_input(consequents, lo=-1.0, hi=1.0):
    x = uniform_partition("x", lo, hi)
    y = uniform_partition("y", -1.0, 1.0)
    rules = [Rule((("x", a),), ("y", c)) for a, c in zip(x.labels, consequents)]
    return RuleBase((x,), y, tuple(rules))


class TestMembership:
    def test_triangle_peak_and_flank(self):
        assert membership(tri(-1, 0, 1), 0.0) == 1.0
        assert membership(tri(-1, 0, 1), 0.5) == 0.5

    def test_trapezoid_descending_flank(self):
        assert membership(trap(0, 1, 2, 4), 3.0) == 0.5

    def test_outside_support_is_zero(self):
        mf = tri(-1, 0, 1)
        assert mf(-1.0) == 0.0 and mf(1.0) == 0.0 and mf(7.0) == 0.0

    def test_shoulders(self):
        assert shl(0, 1)(-50.0) == 1.0
        assert shl(0, 1)(0.25) == 0.75
        assert shr(0, 1)(50.0) == 1.0
        assert shr(0, 1)(0.25) == 0.25

    def test_decreasing_breakpoints_rejected(self):
        with pytest.raises(ValueError):
            tri(0, -1, 1)

    def test_wrong_arity_rejected(self):
        with pytest.raises(ValueError):
            MembershipFunction("tri", (0.0, 1.0))

    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=4), st.floats(-200, 200))
    def test_degree_in_unit_interval(self, pts, x):
        a, b, c, d = sorted(pts)
        mf = trap(a, b, c, d)
        assert 0.0 <= mf(x) <= 1.0
        if b <= x <= c:
            assert mf(x) == 1.0


class TestVariable:
    def test_uniform_partition_covers_universe(self):
        v = uniform_partition("e", -90, 90)
        assert v.coverage_gaps() == []
        assert v.labels == ("NL", "NS", "ZO", "PS", "PL")

    def test_gap_detected(self):
        v = LinguisticVariable("x", (0, 10), (("ZO", tri(0, 1, 2)), ("S", tri(5, 6, 10))))
        assert v.coverage_gaps()

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            LinguisticVariable("x", (0, 1), (("ZO", tri(0, 0.5, 1)), ("ZO", tri(0, 0.5, 1))))

    def test_inputs_clamped_to_universe(self):
        v = uniform_partition("x", -1, 1)
        assert v.fuzzify(5.0) == v.fuzzify(1.0)


class TestRuleBase:
    def test_duplicate_antecedent_rejected(self):
        x = uniform_partition("x", -1, 1)
        y = uniform_partition("y", -1, 1)
        r = Rule((("x", "ZO"),), ("y", "ZO"))
        with pytest.raises(ValueError):
            RuleBase((x,), y, (r, r))

    def test_unknown_term_rejected(self):
        x = uniform_partition("x", -1, 1)
        y = uniform_partition("y", -1, 1)
        with pytest.raises(ValueError):
            RuleBase((x,), y, (Rule((("x", "XL"),), ("y", "ZO")),))

    def test_missing_lists_uncovered_cells(self):
        rb = single_input(["NL", "NS", "ZO", "PS"])
        assert rb.missing() == [(("x", "PL"),)]


class TestCentroid:
    def test_rectangle(self):
        xs = np.linspace(0, 6, 60001)
        for h in (0.1, 0.5, 1.0):
            mu = np.where((xs >= 2) & (xs <= 4), h, 0.0)
            assert centroid(xs, mu) == pytest.approx(3.0, abs=1e-3)

    def test_symmetric_triangle(self):
        xs = np.linspace(-1, 1, 20001)
        assert centroid(xs, np.maximum(0, 1 - abs(xs))) == pytest.approx(0.0, abs=1e-12)

    def test_clipped_triangle_exact(self):
        assert aggregate_centroid([(tri(0, 1, 2), 0.5)], (0.0, 2.0)) == pytest.approx(1.0, abs=1e-12)

    def test_empty_set(self):
        with pytest.raises(EmptyActivation):
            centroid([0, 1, 2], [0, 0, 0])
        with pytest.raises(EmptyActivation):
            aggregate_centroid([(tri(0, 1, 2), 0.0)], (0.0, 2.0))

    @given(st.floats(0.01, 100))
    def test_scale_invariance(self, c):
        xs = np.linspace(-2, 3, 5001)
        mu = np.maximum(0, 1 - abs(xs - 0.7)) * 0.6
        assert centroid(xs, c * mu) == pytest.approx(centroid(xs, mu), rel=1e-12, abs=1e-12)


class TestInfer:
    def test_symmetric_centre(self):
        rb = single_input(["NL", "NS", "ZO", "PS", "PL"])
        assert infer(rb, {"x": 0.0}) == pytest.approx(0.0, abs=1e-12)

    def test_single_rule_at_core(self):
        rb = single_input(["NL", "NS", "ZO", "PS", "PL"])
        # x at the NS core fires one rule fully; output is the NS centroid
        assert infer(rb, {"x": -0.5}) == pytest.approx(-0.5, abs=1e-12)

    def test_missing_input(self):
        rb = single_input(["NL", "NS", "ZO", "PS", "PL"])
        with pytest.raises(MissingInput):
            infer(rb, {})

    def test_empty_activation_returns_midpoint(self):
        x = LinguisticVariable("x", (0, 10), (("ZO", tri(0, 1, 2)), ("S", tri(5, 6, 10))))
        y = uniform_partition("y", 2.0, 4.0)
        rb = RuleBase((x,), y, (Rule((("x", "ZO"),), ("y", "PL")), Rule((("x", "S"),), ("y", "NL"))))
        res = evaluate(rb, {"x": 3.5})
        assert res.empty and res.value == 3.0

    def test_deterministic(self):
        rng = random.Random(3)
        rb = random_rule_base(rng)
        x = random_inputs(rng, rb)
        assert infer(rb, x).hex() == infer(rb, x).hex()

    def test_matches_discretized_oracle(self):
        rng = random.Random(11)
        for _ in range(100):
            rb = random_rule_base(rng)
            x = random_inputs(rng, rb)
            lo, hi = rb.output.universe
            assert abs(infer(rb, x) - discrete_infer(rb, x)) <= 1e-6 * (hi - lo)

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1))
    def test_output_inside_universe(self, seed):
        rng = random.Random(seed)
        rb = random_rule_base(rng)
        lo, hi = rb.output.universe
        assert lo <= infer(rb, random_inputs(rng, rb)) <= hi

    @settings(max_examples=50)
    @given(st.lists(st.integers(0, 6), min_size=5, max_size=5, unique=True))
    def test_monotone_table_gives_monotone_map(self, idx):
        # consequents strictly ordered like the antecedent terms
        out_labels = tuple(f"o{i}" for i in range(7))
        x = uniform_partition("x", -1.0, 1.0)
        y = uniform_partition("y", -3.0, 3.0, out_labels)
        rules = [Rule((("x", a),), ("y", out_labels[i])) for a, i in zip(x.labels, sorted(idx))]
        rb = RuleBase((x,), y, tuple(rules))
        ys = [infer(rb, {"x": v}) for v in np.linspace(-1.2, 1.2, 241)]
        assert all(b >= a - 1e-12 for a, b in zip(ys, ys[1:]))
