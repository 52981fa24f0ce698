"""Discrete demand scenarios for the two-stage model."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

PROBABILITY_TOL = 1e-9

# Low/base/high lattice used when count == 3.
THREE_POINT_PROBABILITIES = (0.25, 0.5, 0.25)


@dataclass(frozen=True)
class DemandScenario:
    """One demand realization with its probability."""

    probability: float
    demand: Mapping[str, float] = field(default_factory=dict)

    def problems(self, where: str = "scenario") -> list[str]:
        out = []
        if not 0.0 <= self.probability <= 1.0:
            out.append(f"{where}: probability {self.probability} outside [0, 1]")
        for cid, units in self.demand.items():
            if not units >= 0.0:
                out.append(f"{where}: negative demand {units} for customer {cid}")
        return out


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[DemandScenario, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, i: int) -> DemandScenario:
        return self.scenarios[i]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios], dtype=float)

    def demand_matrix(self, customers: Sequence[str]) -> np.ndarray:
        """Demands as an (n_scenarios, n_customers) array; missing customers count as 0."""
        return np.array(
            [[float(s.demand.get(c, 0.0)) for c in customers] for s in self.scenarios],
            dtype=float,
        ).reshape(len(self.scenarios), len(customers))

    def problems(self) -> list[str]:
        """Every violated ScenarioSet invariant, as human-readable messages."""
        if not self.scenarios:
            return ["scenarios: set is empty"]
        out = []
        for s, sc in enumerate(self.scenarios):
            out.extend(sc.problems(f"scenario {s}"))
        total = float(sum(sc.probability for sc in self.scenarios))
        if abs(total - 1.0) > PROBABILITY_TOL:
            out.append(f"scenarios: probabilities sum to {total:.12g}, expected 1")
        return out

    def to_json(self) -> list[dict]:
        return [
            {"probability": sc.probability, "demand": dict(sc.demand)}
            for sc in self.scenarios
        ]

    @classmethod
    def from_json(cls, data: Sequence[Mapping]) -> ScenarioSet:
        return cls(
            tuple(
                DemandScenario(
                    probability=float(item["probability"]),
                    demand={str(k): float(v) for k, v in item["demand"].items()},
                )
                for item in data
            )
        )


def generate_scenarios(
    base_demand: Mapping[str, float],
    spread: float,
    count: int = 3,
    seed: int = 0,
) -> ScenarioSet:
    """Build a one- or three-point demand scenario set around ``base_demand``.

    With ``count=3`` the scenarios are low/base/high at ``(1 - spread)``, ``1``
    and ``(1 + spread)`` times the base demand, weighted 0.25/0.5/0.25. The
    ``seed`` argument is accepted for interface stability; both modes are
    deterministic.
    """
    del seed  # reserved for sampled modes
    if not 0.0 <= spread < 1.0:
        raise ValueError(f"spread must lie in [0, 1), got {spread}")
    if count not in (1, 3):
        raise ValueError(f"count must be 1 or 3, got {count}")
    if count == 1:
        return ScenarioSet((DemandScenario(1.0, dict(base_demand)),))
    factors = (1.0 - spread, 1.0, 1.0 + spread)
    return ScenarioSet(
        tuple(
            DemandScenario(p, {c: f * float(d) for c, d in base_demand.items()})
            for f, p in zip(factors, THREE_POINT_PROBABILITIES)
        )
    )


def expected_demand(scenarios: ScenarioSet) -> dict[str, float]:
    """Probability-weighted demand per customer."""
    out: dict[str, float] = {}
    for sc in scenarios:
        for c, d in sc.demand.items():
            out[c] = out.get(c, 0.0) + sc.probability * d
    return out
