"""Verification report records and their JSON form."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

EQUIVALENCE = "equivalence"
GOF = "gof"
PROPERTY = "property"
INFORMATIONAL = "informational"


def _encode_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _decode_float(v):
    if isinstance(v, str) and v in ("nan", "inf", "-inf"):
        return float(v)
    return v


@dataclass(frozen=True)
class CheckRecord:
    """One named check at one grid point.

    Equivalence checks fill ``lhs``/``rhs``/``abs_diff``/``tolerance``;
    GOF checks fill ``statistic``/``degrees_of_freedom``/``p_value``/
    ``pooled_cells`` and use ``tolerance`` as the p-value threshold.
    Informational checks always pass and only document an observation.
    """

    name: str
    group: str
    kind: str
    passed: bool
    grid: dict = field(default_factory=dict)
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    abs_diff: Optional[float] = None
    tolerance: Optional[float] = None
    statistic: Optional[float] = None
    degrees_of_freedom: Optional[int] = None
    p_value: Optional[float] = None
    pooled_cells: Optional[int] = None
    note: str = ""
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if k == "grid":
                v = {gk: _encode_float(gv) for gk, gv in v.items()}
            out[k] = _encode_float(v)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CheckRecord":
        names = {f.name for f in fields(cls)}
        kwargs = {k: _decode_float(v) for k, v in data.items() if k in names}
        kwargs["grid"] = {k: _decode_float(v) for k, v in data.get("grid", {}).items()}
        return cls(**kwargs)


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def overall_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def groups(self) -> list:
        seen = []
        for c in self.checks:
            if c.group not in seen:
                seen.append(c.group)
        return seen

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def without_timings(self) -> "VerificationReport":
        return replace(self, checks=tuple(replace(c, elapsed=0.0) for c in self.checks))

    def to_dict(self) -> dict:
        return {
            "overall_passed": self.overall_passed,
            "seed": self.seed,
            "config": self.config,
            "checks": [c.to_dict() for c in self.checks],
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationReport":
        report = cls(
            checks=tuple(CheckRecord.from_dict(c) for c in data["checks"]),
            seed=int(data["seed"]),
            config=data.get("config", {}),
        )
        if "overall_passed" in data and bool(data["overall_passed"]) != report.overall_passed:
            raise ValueError("overall_passed disagrees with the recorded checks")
        return report

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))
