"""Closed-form estimators of the case count.

Two estimators live here:

* the random-sample (RS) estimator, which uses Stream 2 alone and corrects
  its apparent prevalence for the known test accuracy;
* the closed-form capture-recapture (CRC) estimator, which combines
  subgroup prevalences of the dual-sampled, Stream-1-only and
  Stream-2-only individuals, weighted by the estimated Stream 1 sampling
  fraction and the known Stream 2 sampling probability.

The CRC estimator comes with two delta-method variances: ``v1`` assumes a
multinomial covariance (no finite-population effects) and ``v2`` applies
per-subgroup finite population corrections plus a misclassification term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CellCounts,
    DesignParams,
    EmptySubgroup,
    EstimateReport,
    EstimatorTag,
    RandomSampleData,
    SampleTooSmall,
    TestAccuracy,
    validate_cells,
    wald_interval,
)


def threshold_prevalence(pi_raw: float, acc: TestAccuracy) -> float:
    """Misclassification-corrected prevalence, truncated to [0, 1].

    Apparent prevalences at or below the false-positive rate map to 0 and
    those at or above the sensitivity map to 1.
    """
    youden = acc.require_youden()
    if pi_raw <= 1.0 - acc.sp:
        return 0.0
    if pi_raw >= acc.se:
        return 1.0
    # subtracting the false-positive rate keeps a perfect test exactly the identity
    return (pi_raw - (1.0 - acc.sp)) / youden


def _corrected_array(pi_raw, acc: TestAccuracy):
    """Misclassification-corrected prevalence without truncation."""
    return (np.asarray(pi_raw, dtype=float) - (1.0 - acc.sp)) / acc.require_youden()


def _threshold_array(pi_raw, acc: TestAccuracy):
    pi_raw = np.asarray(pi_raw, dtype=float)
    out = _corrected_array(pi_raw, acc)
    out = np.where(pi_raw <= 1.0 - acc.sp, 0.0, out)
    out = np.where(pi_raw >= acc.se, 1.0, out)
    return out


def _misclass_term(pi_c, acc: TestAccuracy):
    return pi_c * acc.se * (1.0 - acc.se) + (1.0 - pi_c) * acc.sp * (1.0 - acc.sp)


def rs_prevalence_variance(pi_hat, pi_c, n, n_tot, acc: TestAccuracy, *, fpc: bool = True,
                           extra: bool = True):
    """Variance of the corrected Stream 2 prevalence.

    ``pi_hat`` is the apparent (unthresholded) prevalence and ``pi_c`` the
    corrected one. Switching off ``fpc`` and ``extra`` gives the plain
    binomial variance scaled by the inverse squared Youden index.
    """
    youden = acc.require_youden()
    sampling = pi_hat * (1.0 - pi_hat) / n
    if fpc:
        sampling = sampling * (n * (n_tot - n)) / (n_tot * (n - 1.0))
    total = sampling
    if extra:
        total = total + _misclass_term(pi_c, acc) / n_tot
    return total / youden**2


def rs_estimate(data: RandomSampleData, acc2: TestAccuracy, design: DesignParams) -> EstimateReport:
    """Stream-2-only estimate of the case count with its FPC variance."""
    acc2.require_youden()
    if data.n < 2:
        raise SampleTooSmall(f"random sample needs n >= 2, got {data.n}")
    if data.n > design.n_tot:
        raise SampleTooSmall(f"sample size {data.n} exceeds n_tot={design.n_tot}")
    n_tot = design.n_tot
    pi_hat = data.n_pos / data.n
    pi_c = threshold_prevalence(pi_hat, acc2)
    var = rs_prevalence_variance(pi_hat, pi_c, data.n, n_tot, acc2)
    point = n_tot * pi_c
    se = n_tot * float(np.sqrt(var))
    ci, width = wald_interval(point, se, n_tot)
    flags = ()
    if pi_hat <= 1.0 - acc2.sp or pi_hat >= acc2.se:
        flags = ("prevalence_thresholded",)
    return EstimateReport(EstimatorTag.RS, point, n_tot, se=se, wald_ci=ci, wald_width=width,
                          diagnostics=flags)


@dataclass(frozen=True)
class PrevalenceComponents:
    phi_hat: float
    pi11_hat: float
    pi10_hat: float
    pi01_hat: float
    raw_pi11: float
    raw_pi10: float
    raw_pi01: float
    # corrected but not truncated; these enter the point estimate
    lin_pi11: float
    lin_pi10: float
    lin_pi01: float


@dataclass(frozen=True)
class UnadjustedVariance:
    v1: float
    d11: float
    d10: float
    d01: float
    v1_pi11: float
    v1_pi10: float
    v1_pi01: float


@dataclass(frozen=True)
class VarianceBreakdown(UnadjustedVariance):
    v2: float
    fpc11: float
    fpc10: float
    fpc01: float
    extra11: float
    extra10: float
    extra01: float
    v2_pi11: float
    v2_pi10: float
    v2_pi01: float
    fpc_fallback: tuple[str, ...] = ()


@dataclass
class CRCTerms:
    """Every intermediate of the closed-form CRC computation, as arrays.

    Produced by :func:`crc_terms` for a single table (0-d arrays) or a batch
    of tables such as posterior draws (1-d arrays along the last axis).
    """

    n_both: np.ndarray
    n_s1_only: np.ndarray
    n_s2_only: np.ndarray
    n_s1: np.ndarray
    phi: np.ndarray
    raw11: np.ndarray
    raw10: np.ndarray
    raw01: np.ndarray
    pi11: np.ndarray
    pi10: np.ndarray
    pi01: np.ndarray
    lin11: np.ndarray
    lin10: np.ndarray
    lin01: np.ndarray
    d11: np.ndarray
    d10: np.ndarray
    d01: np.ndarray
    prevalence_unclamped: np.ndarray
    point: np.ndarray
    v1_pi11: np.ndarray
    v1_pi10: np.ndarray
    v1_pi01: np.ndarray
    fpc11: np.ndarray
    fpc10: np.ndarray
    fpc01: np.ndarray
    extra11: np.ndarray
    extra10: np.ndarray
    extra01: np.ndarray
    v1: np.ndarray
    v2: np.ndarray


def crc_terms(counts, n_tot: float, psi: float, acc1: TestAccuracy, acc2: TestAccuracy, *,
              truncate_components: bool = False) -> CRCTerms:
    """Evaluate the CRC point estimate and both variances.

    ``counts`` has the nine cells along axis 0 and may be real-valued.
    No validation is done here; empty subgroups give NaN.

    The point estimate combines the corrected subgroup prevalences before
    truncation and clamps only the combined prevalence to [0, 1]; the
    variance terms always use the truncated subgroup prevalences. With
    ``truncate_components=True`` the truncated values feed the point
    estimate as well, which biases it upwards when a subgroup's apparent
    prevalence often falls below the false-positive rate.
    """
    c = np.asarray(counts, dtype=float)
    n1, n2, n3, n4, n5, n6, n7, n8, _ = c
    inv_j1 = 1.0 / acc1.require_youden() ** 2
    inv_j2 = 1.0 / acc2.require_youden() ** 2

    n_both = n1 + n2 + n3 + n4
    n_s1_only = n5 + n6
    n_s2_only = n7 + n8
    n_s1 = n_both + n_s1_only
    phi = n_s1 / n_tot

    with np.errstate(divide="ignore", invalid="ignore"):
        raw11 = (n1 + n4) / n_both
        raw10 = n5 / n_s1_only
        raw01 = n7 / n_s2_only
        lin11 = _corrected_array(raw11, acc2)
        lin10 = _corrected_array(raw10, acc1)
        lin01 = _corrected_array(raw01, acc2)
        pi11 = np.clip(lin11, 0.0, 1.0)
        pi10 = np.clip(lin10, 0.0, 1.0)
        pi01 = np.clip(lin01, 0.0, 1.0)

        d11 = psi * phi
        d10 = (1.0 - psi) * phi
        d01 = 1.0 - phi
        if truncate_components:
            prev = d11 * pi11 + d10 * pi10 + d01 * pi01
        else:
            prev = d11 * lin11 + d10 * lin10 + d01 * lin01
        point = n_tot * np.clip(prev, 0.0, 1.0)

        v1_11 = inv_j2 * raw11 * (1.0 - raw11) / n_both
        v1_10 = inv_j1 * raw10 * (1.0 - raw10) / n_s1_only
        v1_01 = inv_j2 * raw01 * (1.0 - raw01) / n_s2_only

        # FPC factors; a subgroup of size <= 1 gets no reduction
        fpc11 = np.where(n_both > 1.0, n_both * n_s1_only / (n_s1 * (n_both - 1.0)), 1.0)
        fpc10 = np.where(n_s1_only > 1.0,
                         n_s1_only * n_both / (n_s1 * (n_s1_only - 1.0)), 1.0)
        n_unseen = n_tot - n_s1
        fpc01 = np.where(n_s2_only > 1.0,
                         n_s2_only * (n_unseen - n_s2_only) / (n_unseen * (n_s2_only - 1.0)), 1.0)

        extra11 = inv_j2 * _misclass_term(pi11, acc2) / n_s1
        extra10 = inv_j1 * _misclass_term(pi10, acc1) / n_s1
        extra01 = inv_j2 * _misclass_term(pi01, acc2) / n_unseen

        v1 = n_tot**2 * (d11**2 * v1_11 + d10**2 * v1_10 + d01**2 * v1_01)
        v2 = n_tot**2 * (
            d11**2 * (fpc11 * v1_11 + extra11)
            + d10**2 * (fpc10 * v1_10 + extra10)
            + d01**2 * (fpc01 * v1_01 + extra01)
        )

    return CRCTerms(
        n_both, n_s1_only, n_s2_only, n_s1, phi, raw11, raw10, raw01, pi11, pi10, pi01,
        lin11, lin10, lin01, d11, d10, d01, prev, point, v1_11, v1_10, v1_01, fpc11, fpc10, fpc01,
        extra11, extra10, extra01, v1, v2,
    )


def _require_subgroups(cells: CellCounts) -> None:
    if cells.both_size < 1:
        raise EmptySubgroup("sampled by both streams")
    if cells.n5 + cells.n6 < 1:
        raise EmptySubgroup("Stream 1 only")
    if cells.stream2_only_size < 1:
        raise EmptySubgroup("Stream 2 only")


def _terms(cells: CellCounts, design: DesignParams, acc1: TestAccuracy,
           acc2: TestAccuracy, truncate_components: bool = False) -> CRCTerms:
    validate_cells(cells, design)
    acc1.require_youden()
    acc2.require_youden()
    _require_subgroups(cells)
    return crc_terms(cells.as_tuple(), design.n_tot, design.psi, acc1, acc2,
                     truncate_components=truncate_components)


def prevalence_components(cells: CellCounts, design: DesignParams, acc1: TestAccuracy,
                          acc2: TestAccuracy) -> PrevalenceComponents:
    t = _terms(cells, design, acc1, acc2)
    return PrevalenceComponents(
        phi_hat=float(t.phi),
        pi11_hat=float(t.pi11), pi10_hat=float(t.pi10), pi01_hat=float(t.pi01),
        raw_pi11=float(t.raw11), raw_pi10=float(t.raw10), raw_pi01=float(t.raw01),
        lin_pi11=float(t.lin11), lin_pi10=float(t.lin10), lin_pi01=float(t.lin01),
    )


def delta_variance_unadjusted(components: PrevalenceComponents, cells: CellCounts,
                              design: DesignParams, acc1: TestAccuracy,
                              acc2: TestAccuracy) -> UnadjustedVariance:
    """Multinomial delta-method variance of the closed-form CRC count."""
    t = _terms(cells, design, acc1, acc2)
    return UnadjustedVariance(
        v1=float(t.v1), d11=float(t.d11), d10=float(t.d10), d01=float(t.d01),
        v1_pi11=float(t.v1_pi11), v1_pi10=float(t.v1_pi10), v1_pi01=float(t.v1_pi01),
    )


def _fallback_flags(t: CRCTerms) -> tuple[str, ...]:
    flags = []
    if t.n_both <= 1:
        flags.append("fpc11_degenerate")
    if t.n_s1_only <= 1:
        flags.append("fpc10_degenerate")
    if t.n_s2_only <= 1:
        flags.append("fpc01_degenerate")
    return tuple(flags)


def fpc_adjusted_variance(components: PrevalenceComponents, cells: CellCounts,
                          design: DesignParams, acc1: TestAccuracy,
                          acc2: TestAccuracy) -> VarianceBreakdown:
    """FPC- and misclassification-adjusted variance of the CRC count.

    ``components`` is accepted for interface symmetry; the terms are
    recomputed from ``cells`` so the breakdown is always self-consistent.
    """
    t = _terms(cells, design, acc1, acc2)
    return _breakdown(t)


def _breakdown(t: CRCTerms) -> VarianceBreakdown:
    f = float
    return VarianceBreakdown(
        v1=f(t.v1), d11=f(t.d11), d10=f(t.d10), d01=f(t.d01),
        v1_pi11=f(t.v1_pi11), v1_pi10=f(t.v1_pi10), v1_pi01=f(t.v1_pi01),
        v2=f(t.v2), fpc11=f(t.fpc11), fpc10=f(t.fpc10), fpc01=f(t.fpc01),
        extra11=f(t.extra11), extra10=f(t.extra10), extra01=f(t.extra01),
        v2_pi11=f(t.fpc11 * t.v1_pi11 + t.extra11),
        v2_pi10=f(t.fpc10 * t.v1_pi10 + t.extra10),
        v2_pi01=f(t.fpc01 * t.v1_pi01 + t.extra01),
        fpc_fallback=_fallback_flags(t),
    )


def crc_closed_form(cells: CellCounts, design: DesignParams, acc1: TestAccuracy,
                    acc2: TestAccuracy, *, truncate_components: bool = False) -> EstimateReport:
    """Closed-form CRC case count with the FPC-adjusted Wald interval.

    See :func:`crc_terms` for the role of ``truncate_components``.
    """
    t = _terms(cells, design, acc1, acc2, truncate_components)
    point = float(t.point)
    se = float(np.sqrt(t.v2))
    ci, width = wald_interval(point, se, design.n_tot)
    flags = list(_fallback_flags(t))
    if not 0.0 <= float(t.prevalence_unclamped) <= 1.0:
        flags.append("overall_prevalence_clamped")
    return EstimateReport(EstimatorTag.CRC_CLOSED, point, design.n_tot, se=se, wald_ci=ci,
                          wald_width=width, diagnostics=tuple(flags))


def crc_variances(cells: CellCounts, design: DesignParams, acc1: TestAccuracy,
                  acc2: TestAccuracy) -> VarianceBreakdown:
    """Convenience wrapper returning both variances in one breakdown."""
    return _breakdown(_terms(cells, design, acc1, acc2))
