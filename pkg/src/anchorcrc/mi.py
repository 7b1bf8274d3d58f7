"""Multiple imputation over sensitivity/specificity estimated from validation data.

Each imputation draws (Se, Sp) for both streams from the Jeffreys Dirichlet
posterior of the validation tables, recomputes the estimate and its
within-imputation variance, and the results are pooled with Rubin's rules.
For the CRC estimator the scale-shift posterior draws of every imputation
are pooled into a single credible interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .bayes import CredibleInterval, IntervalSource, crc_posterior_draws, percentile_interval
from .core import (
    CellCounts,
    DesignParams,
    EstimateReport,
    EstimatorTag,
    ImputationFailed,
    RandomSampleData,
    TestAccuracy,
    ValidationCounts,
    validate_cells,
    wald_interval,
)
from .estimators import crc_closed_form, rs_estimate
from .stochastic import DEFAULT_SEED, SeedStream, as_generator, dirichlet_draw

MIN_YOUDEN = 0.05
MAX_REDRAWS = 100


@dataclass(frozen=True)
class MiConfig:
    m: int = 100
    s_per_imputation: int = 1000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("multiple imputation needs m >= 2")
        if self.s_per_imputation < 100:
            raise ValueError("need at least 100 posterior draws per imputation")


@dataclass(frozen=True)
class MiResult:
    which: Literal["RS", "CRC"]
    n_tot: int
    pooled_point: float
    within_var_mean: float
    between_var: float
    total_var: float
    wald_ci: tuple[float, float]
    wald_width: float
    per_imputation_points: tuple[float, ...]
    per_imputation_vars: tuple[float, ...]
    pooled_credible_ci: CredibleInterval | None = None
    redraws: int = 0
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def m(self) -> int:
        return len(self.per_imputation_points)

    @property
    def se(self) -> float:
        return math.sqrt(self.total_var)

    def report(self) -> EstimateReport:
        tag = EstimatorTag.RS_MI if self.which == "RS" else EstimatorTag.CRC_MI
        cred = self.pooled_credible_ci
        return EstimateReport(
            tag, self.pooled_point, self.n_tot, se=self.se, wald_ci=self.wald_ci,
            wald_width=self.wald_width,
            credible_ci=cred.as_tuple() if cred is not None else None,
            credible_width=cred.width if cred is not None else None,
            diagnostics=self.diagnostics,
        )

    def to_json(self) -> dict:
        return {
            "estimator": self.report().estimator_tag.value,
            "m": self.m,
            "pooled_point": self.pooled_point,
            "within_var_mean": self.within_var_mean,
            "between_var": self.between_var,
            "total_var": self.total_var,
            "se": self.se,
            "wald_ci": list(self.wald_ci),
            "wald_width": self.wald_width,
            "pooled_credible_ci": (self.pooled_credible_ci.to_json()
                                   if self.pooled_credible_ci is not None else None),
            "redraws": self.redraws,
            "per_imputation_points": list(self.per_imputation_points),
        }


def impute_accuracy(val: ValidationCounts, rng) -> TestAccuracy:
    """One posterior draw of (Se, Sp) from a validation table."""
    v = dirichlet_draw(as_generator(rng), np.asarray(val.as_tuple(), dtype=float) + 0.5)
    v11, v10, v01, v00 = v
    return TestAccuracy(se=v11 / (v11 + v10), sp=v00 / (v01 + v00))


def _impute_usable(val: ValidationCounts, rng: np.random.Generator) -> tuple[TestAccuracy, int]:
    for attempt in range(MAX_REDRAWS + 1):
        acc = impute_accuracy(val, rng)
        if acc.youden > MIN_YOUDEN:
            return acc, attempt
    raise ImputationFailed(
        f"no imputed accuracy with Youden index > {MIN_YOUDEN} after {MAX_REDRAWS} redraws"
    )


def rubin_pool(points, variances) -> tuple[float, float, float, float]:
    """Return (pooled point, mean within variance, between variance, total variance)."""
    points = np.asarray(points, dtype=float)
    variances = np.asarray(variances, dtype=float)
    m = points.size
    if m < 2:
        raise ValueError("Rubin's rules need at least two imputations")
    q_bar = math.fsum(points) / m
    u_bar = math.fsum(variances) / m
    b = math.fsum((points - q_bar) ** 2) / (m - 1)
    return q_bar, u_bar, b, (1.0 + 1.0 / m) * b + u_bar


def mi_estimate(data: CellCounts | RandomSampleData, design: DesignParams,
                val1: ValidationCounts, val2: ValidationCounts, cfg: MiConfig = MiConfig(),
                which: Literal["RS", "CRC"] = "CRC") -> MiResult:
    """Pool ``cfg.m`` imputations of the RS or CRC estimator.

    Imputation ``m`` draws its accuracies from stream ``(seed, m, 0)`` and its
    posterior sample from ``(seed, m, 1)``.
    """
    which = which.upper()
    if which not in ("RS", "CRC"):
        raise ValueError(f"which must be 'RS' or 'CRC', got {which!r}")
    if isinstance(data, CellCounts):
        validate_cells(data, design)
    elif which == "CRC":
        raise TypeError("the CRC estimator needs the full cell counts")

    root = SeedStream(cfg.seed)
    points, variances, pooled_draws = [], [], []
    redraws = 0
    skipped = 0
    for m in range(cfg.m):
        stream = root.child(m)
        rng = stream.child(0).generator()
        acc1, r1 = _impute_usable(val1, rng)
        acc2, r2 = _impute_usable(val2, rng)
        redraws += r1 + r2
        if which == "RS":
            sample = data.stream2_margin() if isinstance(data, CellCounts) else data
            rep = rs_estimate(sample, acc2, design)
        else:
            rep = crc_closed_form(data, design, acc1, acc2)
            draws = crc_posterior_draws(data, design, acc1, acc2, cfg.s_per_imputation,
                                        stream.child(1))
            pooled_draws.append(draws.adjusted)
            skipped += draws.n_skipped
        points.append(rep.point)
        variances.append(rep.se**2)

    q_bar, u_bar, b, total = rubin_pool(points, variances)
    ci, width = wald_interval(q_bar, math.sqrt(total), design.n_tot)
    cred = None
    if pooled_draws:
        allx = np.concatenate(pooled_draws)
        lo, hi = percentile_interval(allx, design.n_tot)
        cred = CredibleInterval(lo, hi, cfg.m * cfg.s_per_imputation,
                                IntervalSource.CRC_SCALE_SHIFT, n_skipped=skipped)
    flags = (f"imputation_redraws={redraws}",) if redraws else ()
    return MiResult(which, design.n_tot, q_bar, u_bar, b, total, ci, width, tuple(points),
                    tuple(variances), cred, redraws, flags)
