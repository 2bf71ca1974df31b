"""Closed-form flop accounting for LSTM and skim steps.

The counting convention is normative for this package: multiplies and adds
count separately, one flop per scalar nonlinearity.

Per LSTM step with widths (d_in, d_out, d_read):
    8 * d_out * (d_in + d_read)   gate matrix-vector multiplies and adds
    4 * d_out                     bias adds
    4 * d_out                     gate nonlinearities
    5 * d_out                     cell/hidden elementwise (2 mul + 1 add for c,
                                  tanh + mul for h)

Per skim-unit step, on top of the taken branch:
    2 * k * (d_in + d) + k        decision matrix-vector plus bias
    k + 3 * k                     softmax exp / sum / divide approximation
"""

from __future__ import annotations

from dataclasses import dataclass

from .cell import Decision
from .tensor import ContractError


@dataclass(frozen=True)
class SkimDims:
    """The widths that determine a skim unit's per-step cost."""

    d_in: int
    d: int
    d_small: int
    k: int = 2


def flops_lstm_step(d_in: int, d_out: int, d_read: int) -> int:
    return 8 * d_out * (d_in + d_read) + 13 * d_out


def decision_flops(dims: SkimDims) -> int:
    return 2 * dims.k * (dims.d_in + dims.d) + 5 * dims.k


def flops_skim_step(dims: SkimDims, decision: Decision) -> int:
    if decision == Decision.READ:
        branch = flops_lstm_step(dims.d_in, dims.d, dims.d)
    else:
        branch = flops_lstm_step(dims.d_in, dims.d_small, dims.d)
    return decision_flops(dims) + branch


def skim_rate(trace) -> float:
    """Fraction of steps that skimmed."""
    decisions = _decisions(trace)
    if not decisions:
        raise ContractError("skim_rate of an empty trace")
    skims = sum(1 for d in decisions if d == Decision.SKIM)
    return skims / len(decisions)


def flop_reduction(trace, dims: SkimDims) -> float:
    """Standard-LSTM flops over skim-model flops for the traced sequence."""
    decisions = _decisions(trace)
    if not decisions:
        raise ContractError("flop_reduction of an empty trace")
    standard = len(decisions) * flops_lstm_step(dims.d_in, dims.d, dims.d)
    actual = sum(flops_skim_step(dims, d) for d in decisions)
    return standard / actual


def _decisions(trace):
    if hasattr(trace, "decisions"):
        return trace.decisions()
    return list(trace)


class FlopLedger:
    """Instrumented runtime counter, incremented at each branch point.

    Totals must equal the closed-form per-step formulas summed over the
    decision sequence; tests recompute that independently from the trace.
    """

    def __init__(self, dims: SkimDims):
        self.dims = dims
        self.read_steps = 0
        self.skim_steps = 0
        self.total_flops = 0

    def add_step(self, decision: Decision) -> None:
        if decision == Decision.READ:
            self.read_steps += 1
        else:
            self.skim_steps += 1
        self.total_flops += flops_skim_step(self.dims, decision)

    @property
    def steps(self) -> int:
        return self.read_steps + self.skim_steps

    @property
    def standard_flops(self) -> int:
        """What a plain big LSTM would have spent on the same sequence."""
        return self.steps * flops_lstm_step(self.dims.d_in, self.dims.d, self.dims.d)
