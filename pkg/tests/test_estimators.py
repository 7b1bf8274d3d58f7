import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from anchorcrc.core import (
    CellCounts,
    DesignParams,
    EmptySubgroup,
    NonPositiveYouden,
    RandomSampleData,
    SampleTooSmall,
    TestAccuracy,
    TotalMismatch,
)
from anchorcrc.estimators import (
    crc_closed_form,
    crc_variances,
    delta_variance_unadjusted,
    fpc_adjusted_variance,
    prevalence_components,
    rs_estimate,
    threshold_prevalence,
)

from . import oracle

PERFECT = TestAccuracy(1.0, 1.0)
# unadjusted delta-method variance on the worked example, from the oracle script
V1_EXAMPLE = 688.4953118127238

probs = st.floats(0.0, 1.0, allow_nan=False)
accuracies = st.builds(TestAccuracy, st.floats(0.55, 1.0), st.floats(0.55, 1.0))


def random_table(draw_counts):
    return CellCounts.from_sequence(draw_counts)


cell_lists = st.lists(st.integers(0, 400), min_size=9, max_size=9).filter(
    lambda c: c[0] + c[1] + c[2] + c[3] >= 2 and c[4] + c[5] >= 2 and c[6] + c[7] >= 2
)


# threshold rule

def test_threshold_interior(acc2):
    assert threshold_prevalence(0.11, acc2) == pytest.approx(0.11 / (89 / 95), rel=1e-12)
    assert round(1000 * threshold_prevalence(0.11, acc2), 1) == 117.4


def test_threshold_lower_branch():
    assert threshold_prevalence(0.03, TestAccuracy(0.85, 0.95)) == 0.0


def test_threshold_identity_for_perfect_test():
    assert threshold_prevalence(0.5, PERFECT) == 0.5


def test_threshold_rejects_useless_test():
    with pytest.raises(NonPositiveYouden):
        threshold_prevalence(0.5, TestAccuracy(0.5, 0.5))


@given(probs, probs, accuracies)
def test_threshold_monotone_and_bounded(a, b, acc):
    lo, hi = sorted((a, b))
    tl, th = threshold_prevalence(lo, acc), threshold_prevalence(hi, acc)
    assert 0.0 <= tl <= th <= 1.0


@given(probs, accuracies)
def test_threshold_matches_oracle(p, acc):
    assert threshold_prevalence(p, acc) == pytest.approx(
        oracle.threshold(p, acc.se, acc.sp), rel=1e-12, abs=1e-15)


# random-sample estimator

def test_rs_example(acc2, design):
    rep = rs_estimate(RandomSampleData(100, 11), acc2, design)
    assert round(rep.point, 1) == 117.4
    assert round(rep.se, 1) == 32.0
    assert rep.wald_width == pytest.approx(2 * 1.959963985 * rep.se)


def test_rs_perfect_test_is_fpc_only():
    rep = rs_estimate(RandomSampleData(100, 10), PERFECT, DesignParams(1000, 0.1))
    expected = math.sqrt(100 * 900 / (1000 * 99) * (0.1 * 0.9 / 100)) * 1000
    assert rep.point == pytest.approx(100.0)
    assert rep.se == pytest.approx(expected, rel=1e-12)
    assert rep.se == pytest.approx(28.60, abs=0.01)


def test_rs_census_with_perfect_test_has_zero_variance():
    rep = rs_estimate(RandomSampleData(50, 20), PERFECT, DesignParams(50, 0.5))
    assert rep.point == pytest.approx(20.0)
    assert rep.se == 0.0


def test_rs_errors():
    design = DesignParams(100, 0.1)
    with pytest.raises(SampleTooSmall):
        rs_estimate(RandomSampleData(1, 0), PERFECT, design)
    with pytest.raises(NonPositiveYouden):
        rs_estimate(RandomSampleData(10, 2), TestAccuracy(0.3, 0.6), design)


@given(st.integers(2, 300), st.data(), accuracies)
def test_rs_matches_oracle(n, data, acc):
    npos = data.draw(st.integers(0, n))
    N = data.draw(st.integers(n, 5000))
    rep = rs_estimate(RandomSampleData(n, npos), acc, DesignParams(N, 0.5))
    point, se = oracle.rs(n, npos, N, acc.se, acc.sp)
    assert rep.point == pytest.approx(point, rel=1e-12, abs=1e-12)
    assert rep.se == pytest.approx(se, rel=1e-12, abs=1e-12)
    assert 0.0 <= rep.point <= N


# prevalence components

def test_components_example(cells, design, acc1, acc2):
    comp = prevalence_components(cells, design, acc1, acc2)
    assert comp.phi_hat == 0.174
    assert comp.raw_pi01 == pytest.approx(6 / 83)
    assert comp.pi01_hat == pytest.approx(0.07716, abs=1e-5)
    assert comp.raw_pi11 == pytest.approx(5 / 17)
    assert comp.raw_pi10 == pytest.approx(27 / 157)


def test_components_identity_for_perfect_tests(cells, design):
    comp = prevalence_components(cells, design, PERFECT, PERFECT)
    assert (comp.pi11_hat, comp.pi10_hat, comp.pi01_hat) == (
        comp.raw_pi11, comp.raw_pi10, comp.raw_pi01)


def test_components_lower_threshold():
    cells = CellCounts(5, 5, 0, 0, 10, 10, 0, 50, 20)
    comp = prevalence_components(cells, DesignParams(100, 0.5), PERFECT,
                                 TestAccuracy(0.95, 0.95))
    assert comp.raw_pi01 == 0.0
    assert comp.pi01_hat == 0.0


@pytest.mark.parametrize("cells, which", [
    (CellCounts(0, 0, 0, 0, 10, 10, 5, 5, 70), "both"),
    (CellCounts(5, 5, 0, 0, 0, 0, 5, 5, 80), "Stream 1 only"),
    (CellCounts(5, 5, 0, 0, 10, 10, 0, 0, 70), "Stream 2 only"),
])
def test_empty_subgroups(cells, which):
    with pytest.raises(EmptySubgroup, match=which):
        crc_closed_form(cells, DesignParams(100, 0.2), PERFECT, PERFECT)


def test_total_mismatch_propagates(cells, acc1, acc2):
    with pytest.raises(TotalMismatch):
        crc_closed_form(cells, DesignParams(999, 0.1), acc1, acc2)


# closed-form CRC

def test_crc_example(cells, design, acc1, acc2):
    rep = crc_closed_form(cells, design, acc1, acc2)
    assert round(rep.point, 1) == 111.5
    assert round(rep.se, 1) == 24.7
    assert tuple(round(x, 1) for x in rep.wald_ci) == (63.2, 159.9)
    assert rep.diagnostics == ()


def test_crc_example_variances(cells, design, acc1, acc2):
    vb = crc_variances(cells, design, acc1, acc2)
    assert vb.v1 == pytest.approx(V1_EXAMPLE, rel=1e-12)
    assert vb.v2 < vb.v1
    assert vb.d11 + vb.d10 + vb.d01 == pytest.approx(1.0)
    comp = prevalence_components(cells, design, acc1, acc2)
    assert delta_variance_unadjusted(comp, cells, design, acc1, acc2).v1 == vb.v1
    assert fpc_adjusted_variance(comp, cells, design, acc1, acc2) == vb


def test_crc_perfect_tests_closed_expression():
    cells = CellCounts(4, 16, 0, 0, 30, 120, 8, 72, 750)
    design = DesignParams(1000, 0.1)
    rep = crc_closed_form(cells, design, PERFECT, PERFECT)
    phi = 170 / 1000
    expected = 1000 * (0.1 * (4 / 20) * phi + 0.9 * (30 / 150) * phi + (8 / 80) * (1 - phi))
    assert rep.point == pytest.approx(expected, rel=1e-12)


def test_crc_perfect_tests_have_no_extra_terms():
    cells = CellCounts(4, 16, 0, 0, 30, 120, 8, 72, 750)
    vb = crc_variances(cells, DesignParams(1000, 0.1), PERFECT, PERFECT)
    assert vb.extra11 == vb.extra10 == vb.extra01 == 0.0
    v2 = 1000**2 * (vb.d11**2 * vb.fpc11 * vb.v1_pi11 + vb.d10**2 * vb.fpc10 * vb.v1_pi10
                    + vb.d01**2 * vb.fpc01 * vb.v1_pi01)
    assert vb.v2 == pytest.approx(v2, rel=1e-12)


def test_crc_equal_subgroup_prevalence_gives_that_prevalence():
    # every subgroup has prevalence 0.2
    cells = CellCounts(2, 8, 0, 0, 30, 120, 16, 64, 760)
    for psi in (0.05, 0.1, 0.5):
        rep = crc_closed_form(cells, DesignParams(1000, psi), PERFECT, PERFECT)
        assert rep.point == pytest.approx(200.0, rel=1e-12)


def test_stream2_census_of_unseen_stratum():
    # Stream 2 covers everyone Stream 1 missed, so n9 = 0
    cells = CellCounts(4, 16, 0, 0, 30, 120, 80, 750, 0)
    vb = crc_variances(cells, DesignParams(1000, 0.5), TestAccuracy(0.9, 0.9),
                       TestAccuracy(0.95, 0.95))
    assert vb.fpc01 == 0.0
    assert vb.v2_pi01 == vb.extra01


def test_zero_apparent_prevalence_contributes_nothing():
    cells = CellCounts(4, 16, 0, 0, 30, 120, 0, 80, 750)
    vb = crc_variances(cells, DesignParams(1000, 0.1), PERFECT, PERFECT)
    assert vb.v1_pi01 == 0.0


def test_doubling_counts_doubles_v1(cells, acc1, acc2):
    v = crc_variances(cells, DesignParams(1000, 0.1), acc1, acc2).v1
    doubled = CellCounts.from_sequence([2 * x for x in cells.as_tuple()])
    v2 = crc_variances(doubled, DesignParams(2000, 0.1), acc1, acc2).v1
    assert v2 == pytest.approx(2 * v, rel=1e-12)


def test_degenerate_fpc_falls_back_to_one():
    cells = CellCounts(1, 0, 0, 0, 10, 10, 1, 10, 67)
    rep = crc_closed_form(cells, DesignParams(99, 0.1), PERFECT, PERFECT)
    vb = crc_variances(cells, DesignParams(99, 0.1), PERFECT, PERFECT)
    assert vb.fpc11 == 1.0
    assert "fpc11_degenerate" in rep.diagnostics


@settings(max_examples=200)
@given(cell_lists, st.floats(0.02, 0.98), accuracies, accuracies)
def test_crc_matches_straight_line_oracle(values, psi, a1, a2):
    cells = CellCounts.from_sequence(values)
    assume(cells.stream1_size < cells.total)
    design = DesignParams(cells.total, psi)
    rep = crc_closed_form(cells, design, a1, a2)
    vb = crc_variances(cells, design, a1, a2)
    point, v1, v2 = oracle.crc(values, cells.total, psi, a1.se, a1.sp, a2.se, a2.sp)
    assert rep.point == pytest.approx(point, rel=1e-12, abs=1e-12)
    assert vb.v1 == pytest.approx(v1, rel=1e-12, abs=1e-12)
    assert vb.v2 == pytest.approx(v2, rel=1e-12, abs=1e-12)
    assert 0.0 <= rep.point <= cells.total


@given(cell_lists, st.floats(0.02, 0.98), accuracies, accuracies)
def test_point_depends_only_on_sufficient_margins(values, psi, a1, a2):
    cells = CellCounts.from_sequence(values)
    design = DesignParams(cells.total, psi)
    # move mass between n1 and n4, and between n2 and n3, keeping n1+n4 and N11
    n1, n2, n3, n4 = values[:4]
    swapped = CellCounts(n4, n3, n2, n1, *values[4:])
    assert crc_closed_form(cells, design, a1, a2).point == pytest.approx(
        crc_closed_form(swapped, design, a1, a2).point, rel=1e-12, abs=1e-12)


@settings(max_examples=100)
@given(cell_lists, st.floats(0.02, 0.98), accuracies, accuracies)
def test_truncated_components_mode_matches_oracle(values, psi, a1, a2):
    cells = CellCounts.from_sequence(values)
    assume(cells.stream1_size < cells.total)
    design = DesignParams(cells.total, psi)
    rep = crc_closed_form(cells, design, a1, a2, truncate_components=True)
    point, _, v2 = oracle.crc(values, cells.total, psi, a1.se, a1.sp, a2.se, a2.sp,
                              truncate_components=True)
    assert rep.point == pytest.approx(point, rel=1e-12, abs=1e-12)
    assert rep.se**2 == pytest.approx(v2, rel=1e-10, abs=1e-12)


def test_component_below_false_positive_rate():
    # Stream-2-only apparent prevalence 2/50 is below 1 - sp = 0.05
    cells = CellCounts(5, 15, 1, 1, 20, 80, 2, 48, 828)
    design = DesignParams(1000, 0.1)
    acc = TestAccuracy(0.95, 0.95)
    comp = prevalence_components(cells, design, acc, acc)
    assert comp.pi01_hat == 0.0
    assert comp.lin_pi01 == pytest.approx((0.04 - 0.05) / 0.9)
    combined = crc_closed_form(cells, design, acc, acc)
    truncated = crc_closed_form(cells, design, acc, acc, truncate_components=True)
    d01 = 1 - comp.phi_hat
    assert truncated.point - combined.point == pytest.approx(-1000 * d01 * comp.lin_pi01)
    # the variance only ever sees truncated components
    assert combined.se == truncated.se


def test_overall_clamp_is_flagged():
    # every apparent prevalence sits at or below the false-positive rate
    cells = CellCounts(0, 20, 1, 0, 5, 95, 4, 96, 779)
    acc = TestAccuracy(0.9, 0.9)
    rep = crc_closed_form(cells, DesignParams(1000, 0.1), acc, acc)
    assert rep.point == 0.0
    assert "overall_prevalence_clamped" in rep.diagnostics
