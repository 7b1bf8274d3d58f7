"""Domain types shared by every estimator.

All types are frozen dataclasses holding aggregated counts or known design
constants. Estimator math happens elsewhere, in double precision.
"""

from __future__ import annotations

import enum
import operator
from dataclasses import dataclass, field
from typing import Any, Mapping

CELL_NAMES = tuple(f"n{j}" for j in range(1, 10))

# two-sided 95% normal quantile
Z_95 = 1.959963985


class CRCError(ValueError):
    """Base class for estimation errors."""


class TotalMismatch(CRCError):
    def __init__(self, total: int, n_tot: int):
        super().__init__(f"cell counts sum to {total}, expected n_tot={n_tot}")
        self.total = total
        self.n_tot = n_tot


class NonPositiveYouden(CRCError):
    def __init__(self, se: float, sp: float):
        super().__init__(f"Youden index se+sp-1 = {se + sp - 1:.6g} must be positive")
        self.se = se
        self.sp = sp


class SampleTooSmall(CRCError):
    pass


class EmptySubgroup(CRCError):
    def __init__(self, which: str):
        super().__init__(f"subgroup {which!r} has no members")
        self.which = which


class OptimizerFailed(CRCError):
    pass


class DegenerateDraws(CRCError):
    pass


class ImputationFailed(CRCError):
    pass


class UnsupportedFormat(CRCError):
    pass


def _check_prob(name: str, value: float, *, open_interval: bool = False) -> None:
    if open_interval:
        if not 0.0 < value < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    elif not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def _check_count(name: str, value: Any) -> int:
    if isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    try:
        value = operator.index(value)
    except TypeError:
        raise TypeError(f"{name} must be an integer, got {value!r}") from None
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


@dataclass(frozen=True)
class TestAccuracy:
    """Sensitivity and specificity of one testing stream."""

    __test__ = False  # keep pytest from collecting this class

    se: float
    sp: float

    def __post_init__(self):
        object.__setattr__(self, "se", float(self.se))
        object.__setattr__(self, "sp", float(self.sp))
        _check_prob("se", self.se)
        _check_prob("sp", self.sp)

    @property
    def youden(self) -> float:
        return self.se + self.sp - 1.0

    def require_youden(self) -> float:
        j = self.youden
        if not j > 0.0:
            raise NonPositiveYouden(self.se, self.sp)
        return j

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "TestAccuracy":
        return cls(se=obj["se"], sp=obj["sp"])

    def to_json(self) -> dict:
        return {"se": self.se, "sp": self.sp}


PERFECT = TestAccuracy(1.0, 1.0)


@dataclass(frozen=True)
class DesignParams:
    """Registry size and the known Stream 2 sampling probability."""

    n_tot: int
    psi: float

    def __post_init__(self):
        n_tot = _check_count("n_tot", self.n_tot)
        if n_tot < 2:
            raise ValueError(f"n_tot must be at least 2, got {n_tot}")
        object.__setattr__(self, "n_tot", n_tot)
        object.__setattr__(self, "psi", float(self.psi))
        _check_prob("psi", self.psi, open_interval=True)

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "DesignParams":
        return cls(n_tot=obj["n_tot"], psi=obj["psi"])

    def to_json(self) -> dict:
        return {"n_tot": self.n_tot, "psi": self.psi}


@dataclass(frozen=True)
class CellCounts:
    """The nine observed cells of the two-stream table.

    n1..n4 were sampled by both streams: positive in both, negative in both,
    positive in Stream 1 only, positive in Stream 2 only. n5/n6 are
    Stream-1-only positives/negatives, n7/n8 Stream-2-only
    positives/negatives, and n9 counts the unsampled.
    """

    n1: int
    n2: int
    n3: int
    n4: int
    n5: int
    n6: int
    n7: int
    n8: int
    n9: int

    def __post_init__(self):
        for name in CELL_NAMES:
            object.__setattr__(self, name, _check_count(name, getattr(self, name)))

    @classmethod
    def from_sequence(cls, values) -> "CellCounts":
        values = list(values)
        if len(values) != 9:
            raise ValueError(f"expected nine cell counts, got {len(values)}")
        return cls(*values)

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "CellCounts":
        missing = [k for k in CELL_NAMES if k not in obj]
        if missing:
            raise KeyError(f"missing cell counts: {', '.join(missing)}")
        return cls(*(obj[k] for k in CELL_NAMES))

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in CELL_NAMES}

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, k) for k in CELL_NAMES)

    @property
    def total(self) -> int:
        return sum(self.as_tuple())

    @property
    def stream1_size(self) -> int:
        return self.n1 + self.n2 + self.n3 + self.n4 + self.n5 + self.n6

    @property
    def both_size(self) -> int:
        return self.n1 + self.n2 + self.n3 + self.n4

    @property
    def stream2_only_size(self) -> int:
        return self.n7 + self.n8

    @property
    def stream2_size(self) -> int:
        return self.both_size + self.stream2_only_size

    @property
    def stream2_positives(self) -> int:
        return self.n1 + self.n4 + self.n7

    def stream2_margin(self) -> "RandomSampleData":
        """Stream 2 viewed as a standalone random sample."""
        return RandomSampleData(n=self.stream2_size, n_pos=self.stream2_positives)


@dataclass(frozen=True)
class CheckedCells:
    """Cell counts whose total has been matched against the design."""

    cells: CellCounts
    design: DesignParams


def validate_cells(cells: CellCounts, design: DesignParams) -> CheckedCells:
    total = cells.total
    if total != design.n_tot:
        raise TotalMismatch(total, design.n_tot)
    return CheckedCells(cells, design)


@dataclass(frozen=True)
class RandomSampleData:
    """A simple random sample of size n with n_pos test positives."""

    n: int
    n_pos: int

    def __post_init__(self):
        n = _check_count("n", self.n)
        n_pos = _check_count("n_pos", self.n_pos)
        if n < 1:
            raise ValueError("sample size n must be positive")
        if n_pos > n:
            raise ValueError(f"n_pos={n_pos} exceeds n={n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "n_pos", n_pos)

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "RandomSampleData":
        return cls(n=obj["n"], n_pos=obj["n_pos"])

    def to_json(self) -> dict:
        return {"n": self.n, "n_pos": self.n_pos}


@dataclass(frozen=True)
class ValidationCounts:
    """External validation table: test result by true status."""

    v11: int  # test+, true+
    v10: int  # test-, true+
    v01: int  # test+, true-
    v00: int  # test-, true-

    def __post_init__(self):
        for name in ("v11", "v10", "v01", "v00"):
            object.__setattr__(self, name, _check_count(name, getattr(self, name)))

    @property
    def nonempty_margins(self) -> bool:
        return self.v11 + self.v10 >= 1 and self.v01 + self.v00 >= 1

    def point_accuracy(self) -> TestAccuracy:
        """Sample proportions (requires both margins nonempty)."""
        if not self.nonempty_margins:
            raise ValueError("both validation margins must be nonempty")
        return TestAccuracy(
            se=self.v11 / (self.v11 + self.v10), sp=self.v00 / (self.v01 + self.v00)
        )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.v11, self.v10, self.v01, self.v00)

    def scaled(self, factor: int) -> "ValidationCounts":
        return ValidationCounts(*(factor * v for v in self.as_tuple()))

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "ValidationCounts":
        return cls(v11=obj["v11"], v10=obj["v10"], v01=obj["v01"], v00=obj["v00"])

    def to_json(self) -> dict:
        return {"v11": self.v11, "v10": self.v10, "v01": self.v01, "v00": self.v00}


class EstimatorTag(str, enum.Enum):
    RS = "RS"
    CRC_CLOSED = "CRC_CLOSED"
    CRC_MLE = "CRC_MLE"
    RS_MI = "RS_MI"
    CRC_MI = "CRC_MI"


Interval = tuple[float, float]


def wald_interval(point: float, se: float, n_tot: int, z: float = Z_95) -> tuple[Interval, float]:
    """Return the clamped Wald interval and its unclamped width."""
    lo, hi = point - z * se, point + z * se
    return (max(lo, 0.0), min(hi, float(n_tot))), hi - lo


@dataclass(frozen=True)
class EstimateReport:
    estimator_tag: EstimatorTag
    point: float
    n_tot: int
    se: float | None = None
    wald_ci: Interval | None = None
    wald_width: float | None = None
    credible_ci: Interval | None = None
    credible_width: float | None = None
    diagnostics: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not -1e-9 <= self.point <= self.n_tot + 1e-9:
            raise ValueError(f"point estimate {self.point} outside [0, {self.n_tot}]")
        if self.se is not None and self.se < 0:
            raise ValueError("standard error must be non-negative")
        for ci in (self.wald_ci, self.credible_ci):
            if ci is not None and ci[0] > ci[1]:
                raise ValueError(f"interval bounds out of order: {ci}")

    def to_json(self) -> dict:
        return {
            "estimator": self.estimator_tag.value,
            "point": self.point,
            "se": self.se,
            "wald_ci": list(self.wald_ci) if self.wald_ci is not None else None,
            "wald_width": self.wald_width,
            "credible_ci": list(self.credible_ci) if self.credible_ci is not None else None,
            "credible_width": self.credible_width,
            "diagnostics": list(self.diagnostics),
        }
