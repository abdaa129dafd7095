"""Record containers tying metrics to methods, seeds, and the config."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..combining import EpisodeMetrics

VALID_METHODS = frozenset(
    ["NoSelection", "LsfSelection", "MaddpgAs", "EqualPower", "Maddpg", "DMaddpg"]
)


@dataclass(frozen=True)
class MetricRecord:
    method: str
    entity: str
    seed: int
    drop: int
    metrics: EpisodeMetrics

    def __post_init__(self) -> None:
        if self.method not in VALID_METHODS:
            raise ValueError(f"unknown method tag {self.method!r}; valid: {sorted(VALID_METHODS)}")


@dataclass
class ExperimentResult:
    """All evaluation records of one experiment, tagged with its config."""

    config_hash: str
    num_ue: int
    records: list[MetricRecord] = field(default_factory=list)

    def extend(self, method: str, entity: str, seed: int, metrics_list) -> None:
        for drop, m in enumerate(metrics_list):
            self.records.append(MetricRecord(method, entity, seed, drop, m))

    def by_method(self, method: str) -> list[MetricRecord]:
        return [r for r in self.records if r.method == method]
