"""Per-token decision traces: the raw material for skim-rate metrics and
read/skim visualizations."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cell import Decision, StepOutcome


@dataclass
class TraceStep:
    decision: Decision
    p_read: float
    p_skim: float
    token: str | None = None


@dataclass
class DecisionTrace:
    """Ordered record of one unit's decisions over a sequence.

    Multi-layer models keep one trace per layer/direction, keyed by `name`
    (e.g. "layer1.fw").
    """

    name: str = ""
    steps: list[TraceStep] = field(default_factory=list)

    def add(self, outcome: StepOutcome, token: str | None = None) -> None:
        p = outcome.p.data
        decision = outcome.decision if outcome.decision is not None else Decision.READ
        self.steps.append(TraceStep(decision, float(p[0]), float(p[1]), token))

    def decisions(self) -> list[Decision]:
        return [s.decision for s in self.steps]

    def __len__(self):
        return len(self.steps)
