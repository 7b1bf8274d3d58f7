"""Scale-shift credible intervals for the case count.

Posterior draws of the nine cell probabilities come from the Jeffreys
Dirichlet posterior. Each draw is turned into a synthetic table of
real-valued counts, the closed-form CRC estimator is evaluated on it, and
the draw is pulled towards the observed-data estimate by the ratio of the
FPC-adjusted to the unadjusted standard deviation:

    adjusted = a * n_crc_draw + (1 - a) * n_crc_observed,  a = sqrt(v2 / v1)

The interval is the 2.5/97.5 percentile range of the adjusted draws.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CellCounts,
    DegenerateDraws,
    DesignParams,
    RandomSampleData,
    SampleTooSmall,
    TestAccuracy,
    validate_cells,
)
from .estimators import (
    _threshold_array,
    crc_closed_form,
    crc_terms,
    rs_prevalence_variance,
    threshold_prevalence,
)
from .stochastic import as_generator, beta_draw, dirichlet_draw

LEVEL = 0.95
MIN_DRAWS = 100
MAX_SKIP_FRACTION = 0.01
# subgroup mass below this fraction of n_tot marks a draw as numerically degenerate
MASS_FLOOR = 1e-9


class IntervalSource(str, enum.Enum):
    CRC_SCALE_SHIFT = "CRC_SCALE_SHIFT"
    RS_COMPARATOR = "RS_COMPARATOR"
    NARROWER_OF = "NARROWER_OF"


@dataclass(frozen=True)
class CredibleInterval:
    lower: float
    upper: float
    n_draws: int
    source_tag: IntervalSource
    level: float = LEVEL
    n_skipped: int = 0
    selected: IntervalSource | None = None

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"interval bounds out of order: ({self.lower}, {self.upper})")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def as_tuple(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def to_json(self) -> dict:
        out = {
            "lower": self.lower,
            "upper": self.upper,
            "width": self.width,
            "level": self.level,
            "n_draws": self.n_draws,
            "n_skipped": self.n_skipped,
            "source": self.source_tag.value,
        }
        if self.selected is not None:
            out["selected"] = self.selected.value
        return out


@dataclass(frozen=True)
class PosteriorDraws:
    """Per-draw quantities, one entry per retained posterior draw."""

    cell_probs: np.ndarray  # (S, 9)
    synthetic_cells: np.ndarray  # (S, 9), n_tot * cell_probs
    n_crc: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    scale: np.ndarray
    adjusted: np.ndarray
    center: float
    n_skipped: int


def percentile_interval(values, n_tot: float | None = None) -> tuple[float, float]:
    """2.5/97.5 percentiles with linear interpolation between order statistics."""
    lo, hi = np.percentile(np.asarray(values, dtype=float), [2.5, 97.5], method="linear")
    lo, hi = float(lo), float(hi)
    if n_tot is not None:
        lo, hi = min(max(lo, 0.0), n_tot), min(max(hi, 0.0), n_tot)
    return lo, hi


def sample_dirichlet_posterior(cells: CellCounts, design: DesignParams, n_draws: int,
                               seed=None) -> np.ndarray:
    """``n_draws`` cell-probability vectors from Dirichlet(n_j + 1/2)."""
    validate_cells(cells, design)
    if n_draws < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} posterior draws, got {n_draws}")
    alpha = np.asarray(cells.as_tuple(), dtype=float) + 0.5
    return dirichlet_draw(as_generator(seed), alpha, size=n_draws)


def crc_posterior_draws(cells: CellCounts, design: DesignParams, acc1: TestAccuracy,
                        acc2: TestAccuracy, n_draws: int = 1000, seed=None, *,
                        scale_shift: bool = True) -> PosteriorDraws:
    """Posterior draws of the CRC estimator, scaled and shifted.

    With ``scale_shift=False`` every scale factor is 1, which leaves the
    unadjusted posterior of the estimator.
    """
    center = crc_closed_form(cells, design, acc1, acc2).point
    probs = sample_dirichlet_posterior(cells, design, n_draws, seed)
    n_tot = design.n_tot
    synth = n_tot * probs
    t = crc_terms(synth.T, n_tot, design.psi, acc1, acc2)

    floor = MASS_FLOOR * n_tot
    ok = (t.n_both >= floor) & (t.n_s1_only >= floor) & (t.n_s2_only >= floor)
    ok &= np.isfinite(t.point) & np.isfinite(t.v2) & (t.v1 > 0) & (t.v2 >= 0)
    n_skipped = int(np.count_nonzero(~ok))
    if n_skipped > MAX_SKIP_FRACTION * n_draws:
        raise DegenerateDraws(f"{n_skipped} of {n_draws} posterior draws were degenerate")

    n_crc, v1, v2 = t.point[ok], t.v1[ok], t.v2[ok]
    scale = np.sqrt(v2 / v1) if scale_shift else np.ones_like(n_crc)
    adjusted = scale * n_crc + (1.0 - scale) * center
    return PosteriorDraws(probs[ok], synth[ok], n_crc, v1, v2, scale, adjusted, center,
                          n_skipped)


def crc_credible_interval(cells: CellCounts, design: DesignParams, acc1: TestAccuracy,
                          acc2: TestAccuracy, n_draws: int = 1000, seed=None, *,
                          scale_shift: bool = True) -> CredibleInterval:
    draws = crc_posterior_draws(cells, design, acc1, acc2, n_draws, seed,
                                scale_shift=scale_shift)
    lo, hi = percentile_interval(draws.adjusted, design.n_tot)
    return CredibleInterval(lo, hi, n_draws, IntervalSource.CRC_SCALE_SHIFT,
                            n_skipped=draws.n_skipped)


def rs_posterior_draws(data: RandomSampleData | CellCounts, design: DesignParams,
                       acc2: TestAccuracy, n_draws: int = 1000, seed=None) -> np.ndarray:
    """Scale-shifted posterior draws of the Stream-2-only case count.

    Apparent prevalence is drawn from its Jeffreys Beta posterior, corrected
    and truncated, then scaled by the ratio of the FPC variance to the plain
    binomial variance and re-centred on the observed estimate.
    """
    if isinstance(data, CellCounts):
        validate_cells(data, design)
        if data.stream2_size < 2:
            raise SampleTooSmall("Stream 2 needs at least two members")
        data = data.stream2_margin()
    if data.n < 2:
        raise SampleTooSmall(f"random sample needs n >= 2, got {data.n}")
    if data.n > design.n_tot:
        raise SampleTooSmall(f"sample size {data.n} exceeds n_tot={design.n_tot}")
    if n_draws < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} posterior draws, got {n_draws}")

    n, n_tot = data.n, design.n_tot
    pi_obs = data.n_pos / n
    center = n_tot * threshold_prevalence(pi_obs, acc2)
    pi = beta_draw(as_generator(seed), data.n_pos + 0.5, n - data.n_pos + 0.5, size=n_draws)
    pi_c = _threshold_array(pi, acc2)
    v_fpc = rs_prevalence_variance(pi, pi_c, n, n_tot, acc2)
    v_plain = rs_prevalence_variance(pi, pi_c, n, n_tot, acc2, fpc=False, extra=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.sqrt(v_fpc / v_plain)
    ok = np.isfinite(scale)
    n_skipped = int(np.count_nonzero(~ok))
    if n_skipped > MAX_SKIP_FRACTION * n_draws:
        raise DegenerateDraws(f"{n_skipped} of {n_draws} posterior draws were degenerate")
    scale = scale[ok]
    return scale * n_tot * pi_c[ok] + (1.0 - scale) * center


def rs_comparator_interval(data: RandomSampleData | CellCounts, design: DesignParams,
                           acc2: TestAccuracy, n_draws: int = 1000, seed=None) -> CredibleInterval:
    draws = rs_posterior_draws(data, design, acc2, n_draws, seed)
    lo, hi = percentile_interval(draws, design.n_tot)
    return CredibleInterval(lo, hi, n_draws, IntervalSource.RS_COMPARATOR,
                            n_skipped=n_draws - draws.size)


def narrower_of(crc_ci: CredibleInterval | None, rs_ci: CredibleInterval | None) -> CredibleInterval:
    """The narrower of the two intervals; ties and failures favour CRC.

    A missing interval counts as infinitely wide.
    """
    crc_w = crc_ci.width if crc_ci is not None else math.inf
    rs_w = rs_ci.width if rs_ci is not None else math.inf
    if crc_ci is None and rs_ci is None:
        raise ValueError("no interval to choose from")
    pick = crc_ci if crc_w <= rs_w else rs_ci
    return CredibleInterval(pick.lower, pick.upper, pick.n_draws, IntervalSource.NARROWER_OF,
                            level=pick.level, n_skipped=pick.n_skipped, selected=pick.source_tag)
