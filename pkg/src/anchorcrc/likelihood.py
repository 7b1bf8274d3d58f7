"""Nine-cell multinomial likelihood and the numerically maximised estimator.

The Stream 1 sampling probability and the prevalence among Stream-1-unsampled
individuals have closed-form maximisers; only the prevalence among
Stream-1-sampled individuals (``pi1``) needs a numerical search, which is a
bounded one-dimensional problem on [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .core import (
    CellCounts,
    DesignParams,
    EstimateReport,
    EstimatorTag,
    OptimizerFailed,
    TestAccuracy,
    validate_cells,
)
from .estimators import threshold_prevalence


@dataclass(frozen=True)
class ModelParams:
    phi: float
    pi1: float
    pi01: float
    psi: float

    def __post_init__(self):
        for name in ("phi", "pi1", "pi01", "psi"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)


def cell_probabilities(params: ModelParams, acc1: TestAccuracy, acc2: TestAccuracy) -> np.ndarray:
    """Probabilities p1..p9 of the nine observation types."""
    phi, pi1, pi01, psi = params.phi, params.pi1, params.pi01, params.psi
    se1, sp1, se2, sp2 = acc1.se, acc1.sp, acc2.se, acc2.sp
    q1 = 1.0 - pi1
    q01 = 1.0 - pi01
    return np.array([
        psi * (se2 * se1 * pi1 + (1 - sp2) * (1 - sp1) * q1) * phi,
        psi * ((1 - se2) * (1 - se1) * pi1 + sp2 * sp1 * q1) * phi,
        psi * ((1 - se2) * se1 * pi1 + sp2 * (1 - sp1) * q1) * phi,
        psi * (se2 * (1 - se1) * pi1 + (1 - sp2) * sp1 * q1) * phi,
        (1 - psi) * (se1 * pi1 + (1 - sp1) * q1) * phi,
        (1 - psi) * ((1 - se1) * pi1 + sp1 * q1) * phi,
        psi * (se2 * pi01 + (1 - sp2) * q01) * (1 - phi),
        psi * ((1 - se2) * pi01 + sp2 * q01) * (1 - phi),
        (1 - psi) * (1 - phi),
    ])


def _loglik(counts: np.ndarray, probs: np.ndarray) -> float:
    used = counts > 0
    if np.any(probs[used] <= 0.0):
        return -math.inf
    return float(np.sum(counts[used] * np.log(probs[used])))


def log_likelihood(cells: CellCounts, params: ModelParams, acc1: TestAccuracy,
                   acc2: TestAccuracy) -> float:
    """Multinomial log-likelihood up to the constant, with 0*log(0) = 0."""
    counts = np.asarray(cells.as_tuple(), dtype=float)
    return _loglik(counts, cell_probabilities(params, acc1, acc2))


@dataclass(frozen=True)
class MLEFit:
    params: ModelParams
    n_crc_star: float
    loglik: float
    diagnostics: tuple[str, ...] = ()

    def report(self, n_tot: int) -> EstimateReport:
        return EstimateReport(EstimatorTag.CRC_MLE, self.n_crc_star, n_tot,
                              diagnostics=self.diagnostics)


def _profile(cells: CellCounts, phi: float, pi01: float, psi: float, acc1: TestAccuracy,
             acc2: TestAccuracy):
    counts = np.asarray(cells.as_tuple(), dtype=float)

    def loglik(pi1: float) -> float:
        return _loglik(counts, cell_probabilities(ModelParams(phi, pi1, pi01, psi), acc1, acc2))

    return loglik


def fit_mle(cells: CellCounts, design: DesignParams, acc1: TestAccuracy, acc2: TestAccuracy,
            xatol: float = 1e-9) -> MLEFit:
    """Maximum likelihood fit with ``pi1`` found by bounded scalar search.

    ``phi`` and ``pi01`` are fixed at their closed forms (``pi01`` after
    truncation to [0, 1]) and the profile log-likelihood is maximised over
    ``pi1`` with Brent's bounded golden-section/parabolic method. The result
    is then checked against the endpoints and the subgroup-weighted
    approximation ``psi*pi11 + (1-psi)*pi10``.
    """
    validate_cells(cells, design)
    acc1.require_youden()
    acc2.require_youden()
    n_tot, psi = design.n_tot, design.psi
    phi = cells.stream1_size / n_tot
    n01 = cells.stream2_only_size
    pi01 = threshold_prevalence(cells.n7 / n01, acc2) if n01 > 0 else 0.0
    loglik = _profile(cells, phi, pi01, psi, acc1, acc2)

    def objective(pi1: float) -> float:
        v = loglik(pi1)
        # keep the search finite where a cell becomes impossible
        return 1e300 if v == -math.inf else -v

    res = minimize_scalar(objective, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": xatol, "maxiter": 500})
    best_x, best_ll = float(res.x), loglik(float(res.x))

    # endpoints are never evaluated by the bounded search
    flags = []
    for edge in (0.0, 1.0):
        ll = loglik(edge)
        if ll >= best_ll:
            best_x, best_ll = edge, ll
    if best_x in (0.0, 1.0):
        flags.append("pi1_on_boundary")

    if best_ll == -math.inf:
        raise OptimizerFailed("log-likelihood is -inf for every pi1 in [0, 1]")

    candidates = [0.0, 1.0]
    if cells.both_size > 0 and cells.n5 + cells.n6 > 0:
        pi11 = threshold_prevalence((cells.n1 + cells.n4) / cells.both_size, acc2)
        pi10 = threshold_prevalence(cells.n5 / (cells.n5 + cells.n6), acc1)
        candidates.append(psi * pi11 + (1.0 - psi) * pi10)
    tol = 1e-9 * max(1.0, abs(best_ll))
    for x in candidates:
        if loglik(x) > best_ll + tol:
            raise OptimizerFailed(
                f"optimizer returned pi1={best_x:.9g} but pi1={x:.9g} has higher likelihood"
            )

    params = ModelParams(phi, best_x, pi01, psi)
    n_star = n_tot * (best_x * phi + pi01 * (1.0 - phi))
    return MLEFit(params, n_star, best_ll, tuple(flags))
