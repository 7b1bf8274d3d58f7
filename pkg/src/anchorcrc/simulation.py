"""Monte-Carlo study of the estimators under the anchor-stream design.

A replicate builds a closed population of ``n_tot`` individuals, marks a
fixed number (or a Bernoulli share) as diseased, assigns symptoms given
disease, lets symptomatic people self-select into Stream 1, draws Stream 2
as a simple random sample independent of all of that, and gives every
stream member one error-prone test result. The resulting nine-cell table is
analysed with the RS, closed-form CRC and MLE estimators.

Replicate ``r`` of a scenario always uses stream ``(seed, r)``, and results
are aggregated in replicate order, so output does not depend on the number
of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .bayes import crc_credible_interval, narrower_of, rs_comparator_interval
from .core import (
    CRCError,
    CellCounts,
    DesignParams,
    TestAccuracy,
    UnsupportedFormat,
    Z_95,
)
from .estimators import crc_closed_form, rs_estimate
from .likelihood import fit_mle
from .stochastic import DEFAULT_SEED, SeedStream

ESTIMATORS = ("RS", "CRC", "CRC_MLE")
TABLE_COLUMNS = (
    "prevalence", "n2", "estimator", "mean", "sd", "avg_se", "avg_wald_width",
    "avg_credible_width", "wald_cov", "credible_cov",
)


@dataclass(frozen=True)
class SimulationConfig:
    n_tot: int
    p: float
    n2: int
    acc1: TestAccuracy
    acc2: TestAccuracy
    p_symptom_given_diseased: float = 0.5
    p_symptom_given_healthy: float = 0.1
    p_stream1_given_symptom: float = 0.8
    p_stream1_given_no_symptom: float = 0.1
    n_replicates: int = 5000
    s_draws: int = 1000
    fixed_case_count: bool = True
    seed: int = DEFAULT_SEED
    # which interval fills the credible columns: the narrower of the CRC and
    # RS intervals ("narrower") or the CRC scale-shift interval alone ("crc")
    credible_rule: str = "narrower"

    def __post_init__(self):
        if self.n_tot < 2:
            raise ValueError("n_tot must be at least 2")
        if not 0 <= self.n2 <= self.n_tot:
            raise ValueError(f"n2={self.n2} must lie in [0, n_tot]")
        for name in ("p", "p_symptom_given_diseased", "p_symptom_given_healthy",
                     "p_stream1_given_symptom", "p_stream1_given_no_symptom"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be positive")
        if self.s_draws < 100:
            raise ValueError("s_draws must be at least 100")
        if self.credible_rule not in ("narrower", "crc"):
            raise ValueError(f"unknown credible_rule {self.credible_rule!r}")

    @property
    def n_true(self) -> int:
        return int(math.floor(self.n_tot * self.p + 0.5))

    @property
    def psi(self) -> float:
        return self.n2 / self.n_tot

    @classmethod
    def from_json(cls, obj: Mapping[str, Any], **overrides) -> "SimulationConfig":
        known = {f.name for f in fields(cls)}
        obj = dict(obj)
        if "prevalence" in obj and "p" not in obj:
            obj["p"] = obj.pop("prevalence")
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {', '.join(sorted(unknown))}")
        obj["acc1"] = TestAccuracy.from_json(obj["acc1"])
        obj["acc2"] = TestAccuracy.from_json(obj["acc2"])
        obj.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**obj)

    def to_json(self) -> dict:
        out = asdict(self)
        out["acc1"] = self.acc1.to_json()
        out["acc2"] = self.acc2.to_json()
        return out


@dataclass(frozen=True)
class Population:
    diseased: np.ndarray
    symptomatic: np.ndarray
    stream1: np.ndarray
    stream2: np.ndarray
    test1: np.ndarray  # meaningful only where stream1
    test2: np.ndarray  # meaningful only where stream2


@dataclass(frozen=True)
class Replicate:
    cells: CellCounts
    n_true: int


def simulate_population(cfg: SimulationConfig, rng: np.random.Generator) -> Population:
    n = cfg.n_tot
    if cfg.fixed_case_count:
        diseased = np.zeros(n, dtype=bool)
        diseased[rng.choice(n, size=cfg.n_true, replace=False)] = True
    else:
        diseased = rng.random(n) < cfg.p
    p_sym = np.where(diseased, cfg.p_symptom_given_diseased, cfg.p_symptom_given_healthy)
    symptomatic = rng.random(n) < p_sym
    p_s1 = np.where(symptomatic, cfg.p_stream1_given_symptom, cfg.p_stream1_given_no_symptom)
    stream1 = rng.random(n) < p_s1
    stream2 = np.zeros(n, dtype=bool)
    stream2[rng.choice(n, size=cfg.n2, replace=False)] = True
    # independent results per stream given true status
    p_pos1 = np.where(diseased, cfg.acc1.se, 1.0 - cfg.acc1.sp)
    p_pos2 = np.where(diseased, cfg.acc2.se, 1.0 - cfg.acc2.sp)
    test1 = rng.random(n) < p_pos1
    test2 = rng.random(n) < p_pos2
    return Population(diseased, symptomatic, stream1, stream2, test1, test2)


def tabulate(pop: Population) -> CellCounts:
    s1, s2, t1, t2 = pop.stream1, pop.stream2, pop.test1, pop.test2
    both = s1 & s2
    only1 = s1 & ~s2
    only2 = s2 & ~s1

    def count(mask):
        return int(np.count_nonzero(mask))

    return CellCounts(
        count(both & t2 & t1),
        count(both & ~t2 & ~t1),
        count(both & t1 & ~t2),
        count(both & ~t1 & t2),
        count(only1 & t1),
        count(only1 & ~t1),
        count(only2 & t2),
        count(only2 & ~t2),
        count(~s1 & ~s2),
    )


def generate_replicate(cfg: SimulationConfig, stream: SeedStream) -> Replicate:
    pop = simulate_population(cfg, stream.generator())
    return Replicate(tabulate(pop), int(np.count_nonzero(pop.diseased)))


# per-replicate outcome vector; NaN marks an estimator that failed
_FIELDS = (
    "n_true",
    "rs_point", "rs_se",
    "crc_point", "crc_se", "cred_lower", "cred_upper",
    "mle_point",
)


def evaluate_replicate(cfg: SimulationConfig, index: int) -> tuple[float, ...]:
    stream = SeedStream(cfg.seed).child(index)
    rep = generate_replicate(cfg, stream.child(0))
    cells = rep.cells
    out = dict.fromkeys(_FIELDS, math.nan)
    out["n_true"] = rep.n_true
    try:
        design = DesignParams(cfg.n_tot, cfg.psi)
    except ValueError:
        return tuple(out[k] for k in _FIELDS)

    try:
        rs = rs_estimate(cells.stream2_margin(), cfg.acc2, design)
        out["rs_point"], out["rs_se"] = rs.point, rs.se
    except (CRCError, ValueError):
        pass

    try:
        crc = crc_closed_form(cells, design, cfg.acc1, cfg.acc2)
        out["crc_point"], out["crc_se"] = crc.point, crc.se
        crc_ci = crc_credible_interval(cells, design, cfg.acc1, cfg.acc2, cfg.s_draws,
                                       stream.child(1))
    except CRCError:
        crc_ci = None
    if crc_ci is not None:
        ci = crc_ci
        if cfg.credible_rule == "narrower":
            try:
                rs_ci = rs_comparator_interval(cells, design, cfg.acc2, cfg.s_draws,
                                               stream.child(2))
            except (CRCError, ValueError):
                rs_ci = None
            ci = narrower_of(crc_ci, rs_ci)
        out["cred_lower"], out["cred_upper"] = ci.lower, ci.upper

    try:
        out["mle_point"] = fit_mle(cells, design, cfg.acc1, cfg.acc2).n_crc_star
    except CRCError:
        pass
    return tuple(out[k] for k in _FIELDS)


def _evaluate_chunk(args) -> list[tuple[float, ...]]:
    cfg, indices = args
    return [evaluate_replicate(cfg, i) for i in indices]


def run_replicates(cfg: SimulationConfig, workers: int = 1,
                   progress: Callable[[int, int], None] | None = None) -> np.ndarray:
    """Evaluate every replicate; rows are in replicate order."""
    n = cfg.n_replicates
    chunk = max(1, min(100, n // max(1, 4 * workers)))
    chunks = [range(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    rows: list[tuple[float, ...]] = []
    if workers <= 1:
        results = (_evaluate_chunk((cfg, c)) for c in chunks)
        for part in results:
            rows.extend(part)
            if progress:
                progress(len(rows), n)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_evaluate_chunk, [(cfg, c) for c in chunks]):
                rows.extend(part)
                if progress:
                    progress(len(rows), n)
    return np.array(rows, dtype=float).reshape(n, len(_FIELDS))


@dataclass(frozen=True)
class EstimatorRow:
    estimator: str
    mean: float
    sd: float
    avg_se: float | None
    avg_wald_width: float | None
    avg_credible_width: float | None
    wald_coverage_pct: float | None
    credible_coverage_pct: float | None
    n_replicates_used: int


@dataclass(frozen=True)
class SimulationSummary:
    config: SimulationConfig
    rows: tuple[EstimatorRow, ...]
    n_excluded: dict

    def row(self, estimator: str) -> EstimatorRow:
        for r in self.rows:
            if r.estimator == estimator:
                return r
        raise KeyError(estimator)


def _mean(x: np.ndarray) -> float:
    return math.fsum(x) / x.size if x.size else math.nan


def _sd(x: np.ndarray) -> float:
    if x.size < 2:
        return math.nan if x.size == 0 else 0.0
    m = _mean(x)
    return math.sqrt(math.fsum((x - m) ** 2) / (x.size - 1))


def _pct(mask: np.ndarray) -> float:
    return 100.0 * np.count_nonzero(mask) / mask.size if mask.size else math.nan


def summarize(cfg: SimulationConfig, results: np.ndarray) -> SimulationSummary:
    col = {k: results[:, i] for i, k in enumerate(_FIELDS)}
    n_true = col["n_true"]
    rows = []
    excluded = {}

    ok = np.isfinite(col["rs_point"])
    pt, se, nt = col["rs_point"][ok], col["rs_se"][ok], n_true[ok]
    rows.append(EstimatorRow(
        "RS", _mean(pt), _sd(pt), _mean(se), _mean(2 * Z_95 * se), None,
        _pct(np.abs(pt - nt) <= Z_95 * se), None, int(ok.sum())))
    excluded["RS"] = int((~ok).sum())

    ok = np.isfinite(col["crc_point"])
    pt, se, nt = col["crc_point"][ok], col["crc_se"][ok], n_true[ok]
    lo, hi = col["cred_lower"][ok], col["cred_upper"][ok]
    has_ci = np.isfinite(lo)
    rows.append(EstimatorRow(
        "CRC", _mean(pt), _sd(pt), _mean(se), _mean(2 * Z_95 * se),
        _mean((hi - lo)[has_ci]), _pct(np.abs(pt - nt) <= Z_95 * se),
        _pct(((lo <= nt) & (nt <= hi))[has_ci]), int(ok.sum())))
    excluded["CRC"] = int((~ok).sum())
    excluded["CRC_credible"] = int((~has_ci).sum())

    ok = np.isfinite(col["mle_point"])
    pt = col["mle_point"][ok]
    rows.append(EstimatorRow("CRC_MLE", _mean(pt), _sd(pt), None, None, None, None, None,
                             int(ok.sum())))
    excluded["CRC_MLE"] = int((~ok).sum())
    return SimulationSummary(cfg, tuple(rows), excluded)


def run_scenario(cfg: SimulationConfig, workers: int = 1,
                 progress: Callable[[int, int], None] | None = None) -> SimulationSummary:
    return summarize(cfg, run_replicates(cfg, workers, progress))


def _fmt(x: float | None) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return f"{x:.1f}"


def _table_rows(summaries: Sequence[SimulationSummary]) -> list[dict]:
    out = []
    for s in summaries:
        for r in s.rows:
            out.append({
                "prevalence": f"{s.config.p:g}",
                "n2": str(s.config.n2),
                "estimator": r.estimator,
                "mean": _fmt(r.mean),
                "sd": _fmt(r.sd),
                "avg_se": _fmt(r.avg_se),
                "avg_wald_width": _fmt(r.avg_wald_width),
                "avg_credible_width": _fmt(r.avg_credible_width),
                "wald_cov": _fmt(r.wald_coverage_pct),
                "credible_cov": _fmt(r.credible_coverage_pct),
            })
    return out


def emit_table(summaries: Sequence[SimulationSummary], fmt: str = "csv") -> str:
    """Render summaries as one row per scenario and estimator."""
    if not summaries:
        raise ValueError("no summaries to emit")
    rows = _table_rows(summaries)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "json":
        records = []
        for s, chunk in zip(summaries, _chunks(rows, len(ESTIMATORS))):
            for r, row in zip(s.rows, chunk):
                rec: dict[str, Any] = {"n_tot": s.config.n_tot}
                for k in TABLE_COLUMNS:
                    v = row[k]
                    if k == "estimator":
                        rec[k] = v
                    elif k == "n2":
                        rec[k] = int(v)
                    else:
                        rec[k] = float(v) if v != "" else None
                rec["n_replicates_used"] = r.n_replicates_used
                records.append(rec)
        return json.dumps(records, indent=2) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(TABLE_COLUMNS) + " |",
                 "|" + "---|" * len(TABLE_COLUMNS)]
        for row in rows:
            lines.append("| " + " | ".join(row[k] or "-" for k in TABLE_COLUMNS) + " |")
        return "\n".join(lines) + "\n"
    raise UnsupportedFormat(f"unsupported table format {fmt!r}")


def _chunks(seq, size):
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def load_scenarios(path_or_obj, **overrides) -> list[SimulationConfig]:
    obj = path_or_obj
    if not isinstance(obj, list):
        with open(path_or_obj) as fh:
            obj = json.load(fh)
    if not isinstance(obj, list):
        raise ValueError("scenario file must hold a JSON array")
    return [SimulationConfig.from_json(o, **overrides) for o in obj]
