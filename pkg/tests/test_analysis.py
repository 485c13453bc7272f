import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mobqc import analysis
from mobqc.analysis import (
    NoVerifiableGap,
    RateParams,
    bound_set,
    delta_of,
    gap_at_qstar,
    gap_crossover,
    gap_limit,
    gap_lower_bound,
    gap_margin,
    lower_bound_chain,
    measured_epsilon,
    q_grid,
    q_star,
    soundness_case,
)

eps_small = st.floats(min_value=1e-6, max_value=4e-3)
rs = st.integers(min_value=4, max_value=30)
qs = st.floats(min_value=0.0, max_value=1.0)


class TestDelta:
    def test_at_zero(self):
        assert delta_of(0.0) == pytest.approx(math.sqrt(2 / 3), abs=1e-10)
        assert delta_of(0.0) == pytest.approx(0.8164966, abs=1e-7)

    def test_at_one_third(self):
        assert delta_of(1 / 3) == pytest.approx(2 * math.sqrt(2 / 3) + 1, abs=1e-12)
        assert delta_of(1 / 3) == pytest.approx(2.6329932, abs=1e-7)

    def test_monotone(self):
        values = [delta_of(e) for e in np.linspace(0, 1 / 3, 100)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            delta_of(-0.1)


class TestRateParams:
    def test_amplified(self):
        p = RateParams.amplified(0.01, 0.5, 10)
        assert p.a == 1 - 2 ** -10 and p.b == 2 ** -10

    @pytest.mark.parametrize("kwargs", [
        dict(epsilon=0.0, q=0.5, a=0.9, b=0.1),
        dict(epsilon=0.1, q=1.5, a=0.9, b=0.1),
        dict(epsilon=0.1, q=0.5, a=0.1, b=0.9),
        dict(epsilon=0.1, q=0.5, a=0.9, b=0.1, r=0),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            RateParams(**kwargs)

    def test_with_q(self):
        p = RateParams.amplified(0.01, 0.5, 10).with_q(0.2)
        assert p.q == 0.2 and p.r == 10


class TestBoundSet:
    def test_q_zero(self):
        eps = 0.05
        bs = bound_set(RateParams.amplified(eps, 0.0, 10))
        assert bs.alpha == pytest.approx(1)
        assert bs.beta1 == pytest.approx(1 - eps / 2)
        assert bs.beta2 == pytest.approx(1 - eps)
        assert bs.beta3 == pytest.approx(1)

    def test_differences_on_grid(self):
        eps, r = 0.01, 8
        for q in q_grid(100):
            p = RateParams.amplified(eps, float(q), r)
            bs = bound_set(p)
            assert bs.delta1 == pytest.approx(bs.alpha - bs.beta1, abs=1e-12)
            assert bs.delta2 == pytest.approx(bs.alpha - bs.beta2, abs=1e-12)
            assert bs.delta3 == pytest.approx(bs.alpha - bs.beta3, abs=1e-12)
            assert bs.delta1 == pytest.approx(q * (p.a - 1) + eps * (1 - q) / 2, abs=1e-12)
            assert bs.delta3 == pytest.approx(q * (p.a - p.b - bs.delta), abs=1e-12)

    @settings(max_examples=100)
    @given(eps_small, rs)
    def test_qstar_balances_cases(self, eps, r):
        p = RateParams.amplified(eps, 0.5, r)
        qs_ = q_star(p)
        assume(not math.isnan(qs_) and 0 <= qs_ <= 1)
        bs = bound_set(p.with_q(qs_))
        assert bs.delta1 == pytest.approx(bs.delta3, abs=1e-12)

    @settings(max_examples=100)
    @given(st.floats(min_value=1e-6, max_value=0.9), qs, rs)
    def test_delta2_dominates_delta1(self, eps, q, r):
        bs = bound_set(RateParams.amplified(eps, q, r))
        assert bs.delta2 >= bs.delta1 - 1e-15

    def test_qstar_flagged_when_denominator_nonpositive(self):
        p = RateParams.amplified(0.3, 0.5, 10)
        assert math.isnan(q_star(p))
        assert not bound_set(p).q_star_valid

    def test_as_dict(self):
        d = bound_set(RateParams.amplified(0.01, 0.5, 10)).as_dict()
        assert set(d) >= {"alpha", "beta1", "beta2", "beta3", "delta", "q_star"}


class TestGap:
    def test_closed_form_matches_delta3(self):
        p = RateParams.amplified(0.001, 0.5, 10)
        gap = gap_at_qstar(p)
        assert gap > 0
        assert gap == pytest.approx(bound_set(p.with_q(q_star(p))).delta3, abs=1e-12)

    def test_large_epsilon_flagged(self):
        with pytest.raises(NoVerifiableGap, match="no verifiable gap"):
            gap_at_qstar(RateParams.amplified(0.3, 0.5, 10))

    def test_lower_bound_chain_grid(self):
        rows = lower_bound_chain(np.geomspace(1e-4, 1e-2, 25), range(4, 13))
        applicable = [row for row in rows if row["applicable"]]
        assert applicable
        assert all(row["holds"] for row in rows)
        for row in applicable:
            assert row["gap"] >= row["lower_bound"]

    # the bound is positive only for small eps (below about 4e-4 at r = 4)
    @settings(max_examples=200)
    @given(st.floats(min_value=1e-7, max_value=4e-4), rs)
    def test_lower_bound_property(self, eps, r):
        rhs = gap_lower_bound(eps, r)
        assume(rhs > 0)
        assert gap_at_qstar(RateParams.amplified(eps, 0.5, r)) >= rhs

    def test_margin_sign_matches_gap(self):
        for eps in np.geomspace(1e-5, 0.2, 40):
            p = RateParams.amplified(float(eps), 0.5, 10)
            if gap_margin(float(eps), 10) > 0:
                assert gap_at_qstar(p) > 0
            else:
                with pytest.raises(NoVerifiableGap):
                    gap_at_qstar(p)

    def test_crossover(self):
        c = gap_crossover(10)
        assert gap_margin(c, 10) == pytest.approx(0, abs=1e-12)
        assert gap_margin(c * 0.9, 10) > 0 > gap_margin(c * 1.1, 10)

    def test_crossover_without_gap(self):
        with pytest.raises(NoVerifiableGap):
            gap_crossover(1)

    def test_limit(self):
        eps = 0.002
        assert gap_at_qstar(RateParams.amplified(eps, 0.5, 60)) == pytest.approx(gap_limit(eps), rel=1e-9)


class TestSoundnessCase:
    def test_only_input_test_fails(self):
        c = soundness_case(1.0, 0.25, 0.5, 1 - 2 ** -10, 2 ** -10)
        assert c.case == 1 and c.bound_name == "beta1"
        assert c.epsilon == pytest.approx(0.75)
        assert c.bound == pytest.approx(analysis.beta1(0.5, 0.75))

    def test_only_graph_test_fails(self):
        c = soundness_case(0.6, 1.0, 0.5, 0.9, 0.1)
        assert c.case == 2 and c.bound_name == "beta1"

    def test_both_fail(self):
        c = soundness_case(0.7, 0.7, 0.5, 0.9, 0.1)
        assert c.case == 3 and c.bound_name == "beta2"

    def test_both_pass(self):
        c = soundness_case(1.0, 1.0, 0.5, 0.9, 0.1)
        assert c.case == 4 and c.bound_name == "beta3"
        assert c.epsilon == pytest.approx(1e-9)

    def test_declared_epsilon(self):
        c = soundness_case(0.95, 0.99, 0.5, 0.9, 0.1, epsilon=0.02)
        assert c.case == 2

    def test_measured_epsilon_clamped(self):
        assert measured_epsilon(1.0, 1.0) == 1e-9
        assert measured_epsilon(0.0, 0.5) == 1 - 1e-9
        assert measured_epsilon(0.8, 0.9) == pytest.approx(0.2)

    def test_branch_bound(self):
        assert analysis.branch_bound(1.0, 1.0, 1.0, 0.3) == pytest.approx(1.0)
        assert analysis.branch_bound(0.0, 0.5, 0.5, 0.0) == pytest.approx(0.5)
