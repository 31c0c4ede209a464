"""Per-category runtime history, normalized to a reference speed of 1.0."""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import fmean
from types import MappingProxyType
from typing import Mapping

REFERENCE_SPEED = 1.0


@dataclass(frozen=True)
class RuntimeProfile:
    samples: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {}
        for category, values in sorted(self.samples.items()):
            values = tuple(float(v) for v in values)
            if any(not v > 0 for v in values):
                raise ValueError(f"{category}: observations must be positive")
            if values:
                frozen[category] = values
        object.__setattr__(self, "samples", MappingProxyType(frozen))

    def estimate(self, category: str) -> float | None:
        """Sample mean at reference speed, or ``None`` without observations."""
        values = self.samples.get(category)
        return fmean(values) if values else None

    def observe(self, category: str, runtime: float, speed_factor: float) -> RuntimeProfile:
        normalized = runtime * speed_factor / REFERENCE_SPEED
        merged = dict(self.samples)
        merged[category] = (*merged.get(category, ()), normalized)
        return RuntimeProfile(merged)

    def __eq__(self, other):
        if not isinstance(other, RuntimeProfile):
            return NotImplemented
        return dict(self.samples) == dict(other.samples)

    def __hash__(self):
        return hash(tuple(self.samples.items()))
