"""
Experiment report model shared by all CLI experiments.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class Flag(BaseModel):
    """A named acceptance check: pass iff value <= threshold (or the recorded outcome)."""

    name: str
    passed: bool = Field(..., serialization_alias="pass")
    value: Optional[float] = None
    threshold: Optional[float] = None

    @classmethod
    def at_most(cls, name: str, value: float, threshold: float) -> "Flag":
        return cls(name=name, passed=bool(value <= threshold), value=value, threshold=threshold)

    @classmethod
    def at_least(cls, name: str, value: float, threshold: float) -> "Flag":
        return cls(name=name, passed=bool(value >= threshold), value=value, threshold=threshold)


class Report(BaseModel):
    """One experiment's outcome: resolved config, metrics and flags."""

    experiment: str
    config: Dict[str, Any]
    metrics: Dict[str, Any] = Field(default_factory=dict)
    flags: List[Flag] = Field(default_factory=list)
    version: str

    @property
    def passed(self) -> bool:
        return all(flag.passed for flag in self.flags)

    def add_flag(self, flag: Flag) -> None:
        self.flags.append(flag)

    def to_document(self) -> Dict[str, Any]:
        """The JSON report document {experiment, config, metrics, flags, pass, version}."""
        return {
            "experiment": self.experiment,
            "config": self.config,
            "metrics": self.metrics,
            "flags": [flag.model_dump(by_alias=True) for flag in self.flags],
            "pass": self.passed,
            "version": self.version,
        }
