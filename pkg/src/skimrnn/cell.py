"""Skim-LSTM unit: a big and a small LSTM cell behind a per-token decision.

At each step a 2-way softmax over [x_t; h_{t-1}] yields read/skim
probabilities. Reading runs the big cell over the full state; skimming runs
the small cell, which rewrites only the first d' components of both the
hidden and the memory vector and carries the rest through untouched. Hard
steps pick a branch; relaxed steps blend both branches with Gumbel-softmax
weights so the decision stays differentiable during training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .tensor import (
    ContractError,
    DimensionError,
    Tensor,
    add,
    clamp_min,
    concat,
    log,
    matvec,
    mul,
    scale,
    sigmoid,
    smul,
    softmax,
    tanh,
)

PROB_FLOOR = 1e-12  # clamp before log so saturated softmax never yields -inf
READ_INDEX = 0
SKIM_INDEX = 1


class Decision(IntEnum):
    READ = 1
    SKIM = 2


@dataclass
class LstmParams:
    """Stacked-gate LSTM weights.

    `w` holds the four gates row-stacked in the order (input, forget,
    output, candidate) over the concatenated [x; h_read] vector; this "ifog"
    order is part of the weight-file format.
    """

    w: Tensor  # (4*d_out, d_in + d_read)
    b: Tensor  # (4*d_out,)
    d_in: int
    d_out: int
    d_read: int

    def __post_init__(self):
        expect_w = (4 * self.d_out, self.d_in + self.d_read)
        if self.w.shape != expect_w:
            raise DimensionError(f"lstm weights: expected {expect_w}, got {self.w.shape}")
        if self.b.shape != (4 * self.d_out,):
            raise DimensionError(f"lstm bias: expected ({4 * self.d_out},), got {self.b.shape}")


@dataclass
class SkimUnitParams:
    """Big cell, small cell, and the 2-way decision network."""

    big: LstmParams
    small: LstmParams
    decision_w: Tensor  # (2, d_in + d); row 0 scores read, row 1 scores skim
    decision_b: Tensor  # (2,)

    def __post_init__(self):
        d_in, d, d_small = self.big.d_in, self.big.d_out, self.small.d_out
        if not 0 <= d_small < d:
            raise ContractError(f"small width must satisfy 0 <= d' < d, got d'={d_small}, d={d}")
        if self.small.d_in != d_in or self.small.d_read != d or self.big.d_read != d:
            raise DimensionError("small cell must read the full previous hidden state")
        if self.decision_w.shape != (2, d_in + d):
            raise DimensionError(
                f"decision weights: expected (2, {d_in + d}), got {self.decision_w.shape}")
        if self.decision_b.shape != (2,):
            raise DimensionError(f"decision bias: expected (2,), got {self.decision_b.shape}")

    @property
    def d_in(self):
        return self.big.d_in

    @property
    def d(self):
        return self.big.d_out

    @property
    def d_small(self):
        return self.small.d_out

    @property
    def k(self):
        return 2

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return {
            prefix + "big.w": self.big.w,
            prefix + "big.b": self.big.b,
            prefix + "small.w": self.small.w,
            prefix + "small.b": self.small.b,
            prefix + "decision.w": self.decision_w,
            prefix + "decision.b": self.decision_b,
        }


@dataclass
class SkimState:
    """Paired hidden and memory vectors of the big cell's width."""

    h: Tensor
    c: Tensor

    @classmethod
    def zeros(cls, d: int) -> "SkimState":
        return cls(Tensor(np.zeros(d)), Tensor(np.zeros(d)))


@dataclass
class StepOutcome:
    """Everything one unit step produced."""

    state: SkimState
    p: Tensor  # (read, skim) probabilities
    decision: Decision | None = None  # hard steps only
    r: Tensor | None = None  # relaxed mixing weights
    gumbel_noise: np.ndarray | None = None


# Inference policies for the hard step.

@dataclass(frozen=True)
class Sample:
    rng: np.random.Generator


@dataclass(frozen=True)
class Argmax:
    pass


@dataclass(frozen=True)
class Threshold:
    theta: float


@dataclass(frozen=True)
class Forced:
    decision: Decision


@dataclass(frozen=True)
class TemperatureSchedule:
    """tau(n) = max(floor, exp(-rate * n)); non-increasing, bounded below."""

    rate: float = 1e-4
    floor: float = 0.5


def temperature(schedule: TemperatureSchedule, n: int) -> float:
    if n < 0:
        raise ContractError(f"step index must be non-negative, got {n}")
    return max(schedule.floor, math.exp(-schedule.rate * n))


def init_lstm_params(rng: np.random.Generator, d_in: int, d_out: int,
                     d_read: int) -> LstmParams:
    """Uniform(-1/sqrt(fan_in)) weights, zero biases except forget gate at 1."""
    fan_in = d_in + d_read
    s = 1.0 / math.sqrt(fan_in) if fan_in > 0 else 0.0
    w = rng.uniform(-s, s, size=(4 * d_out, fan_in))
    b = np.zeros(4 * d_out)
    b[d_out:2 * d_out] = 1.0
    return LstmParams(Tensor(w), Tensor(b), d_in=d_in, d_out=d_out, d_read=d_read)


def init_skim_unit(rng: np.random.Generator, d_in: int, d: int,
                   d_small: int) -> SkimUnitParams:
    """Draw order is fixed (big, small, decision) so seeds reproduce exactly."""
    big = init_lstm_params(rng, d_in, d, d)
    small = init_lstm_params(rng, d_in, d_small, d)
    s = 1.0 / math.sqrt(d_in + d)
    decision_w = Tensor(rng.uniform(-s, s, size=(2, d_in + d)))
    decision_b = Tensor(np.zeros(2))
    return SkimUnitParams(big, small, decision_w, decision_b)


def lstm_step(params: LstmParams, x: Tensor, h_read: Tensor,
              c_prev: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step: gates from W [x; h_read] + b, split (i, f, o, g)."""
    if x.shape != (params.d_in,):
        raise DimensionError(f"lstm x: expected ({params.d_in},), got {x.shape}")
    if h_read.shape != (params.d_read,):
        raise DimensionError(f"lstm h_read: expected ({params.d_read},), got {h_read.shape}")
    if c_prev.shape != (params.d_out,):
        raise DimensionError(f"lstm c_prev: expected ({params.d_out},), got {c_prev.shape}")
    do = params.d_out
    z = add(matvec(params.w, concat(x, h_read)), params.b)
    gate_i = sigmoid(z.slice(0, do))
    gate_f = sigmoid(z.slice(do, 2 * do))
    gate_o = sigmoid(z.slice(2 * do, 3 * do))
    cand = tanh(z.slice(3 * do, 4 * do))
    c_new = add(mul(gate_f, c_prev), mul(gate_i, cand))
    h_new = mul(gate_o, tanh(c_new))
    return h_new, c_new


def decision_probs(params: SkimUnitParams, x: Tensor, h: Tensor) -> Tensor:
    """(p_read, p_skim) = softmax of the decision network over [x; h]."""
    if x.shape != (params.d_in,):
        raise DimensionError(f"decision x: expected ({params.d_in},), got {x.shape}")
    if h.shape != (params.d,):
        raise DimensionError(f"decision h: expected ({params.d},), got {h.shape}")
    logits = add(matvec(params.decision_w, concat(x, h)), params.decision_b)
    return softmax(logits)


def _decide(p: Tensor, policy) -> Decision:
    if isinstance(policy, Forced):
        return policy.decision
    if isinstance(policy, Sample):
        return Decision.READ if policy.rng.random() < p.data[READ_INDEX] else Decision.SKIM
    if isinstance(policy, Argmax):
        # ties resolve to READ: never lose information on a coin flip
        return Decision.READ if p.data[READ_INDEX] >= p.data[SKIM_INDEX] else Decision.SKIM
    if isinstance(policy, Threshold):
        if not 0.0 <= policy.theta <= 1.0:
            raise ContractError(f"threshold must lie in [0, 1], got {policy.theta}")
        return Decision.READ if p.data[READ_INDEX] >= policy.theta else Decision.SKIM
    raise ContractError(f"unknown decision policy {policy!r}")


def _skim_branch(params: SkimUnitParams, x: Tensor,
                 state: SkimState) -> tuple[Tensor, Tensor]:
    """Small cell rewrites the first d' entries of h and c; rest carried over."""
    d, ds = params.d, params.d_small
    h_small, c_small = lstm_step(params.small, x, state.h, state.c.slice(0, ds))
    h_new = concat(h_small, state.h.slice(ds, d))
    c_new = concat(c_small, state.c.slice(ds, d))
    return h_new, c_new


def skim_step_hard(params: SkimUnitParams, x: Tensor, state: SkimState,
                   policy, ledger=None) -> StepOutcome:
    """One inference step: pick a branch by policy, run only that branch."""
    p = decision_probs(params, x, state.h)
    decision = _decide(p, policy)
    if decision == Decision.READ:
        h_new, c_new = lstm_step(params.big, x, state.h, state.c)
    else:
        h_new, c_new = _skim_branch(params, x, state)
    if ledger is not None:
        ledger.add_step(decision)
    return StepOutcome(state=SkimState(h_new, c_new), p=p, decision=decision)


def gumbel_sample(rng: np.random.Generator) -> float:
    """-log(-log u) for u ~ Uniform(0,1), clamped away from the endpoints."""
    u = rng.random()
    u = min(max(u, PROB_FLOOR), 1.0 - PROB_FLOOR)
    return -math.log(-math.log(u))


def gumbel_noise(rng: np.random.Generator, k: int = 2) -> np.ndarray:
    return np.array([gumbel_sample(rng) for _ in range(k)])


def gumbel_softmax(p: Tensor, g: Tensor, tau: float) -> Tensor:
    """softmax((log p + g) / tau); differentiable w.r.t. p, g treated as given."""
    if tau <= 0.0:
        raise ContractError(f"temperature must be positive, got {tau}")
    z = smul(add(log(clamp_min(p, PROB_FLOOR)), g), 1.0 / tau)
    return softmax(z)


def skim_step_relaxed(params: SkimUnitParams, x: Tensor, state: SkimState,
                      tau: float, rng: np.random.Generator | None = None,
                      noise: np.ndarray | None = None) -> StepOutcome:
    """One training step: blend both candidate states with Gumbel-softmax weights.

    Both h and c receive the blend, mirroring how a hard skim step slices both
    outputs. Pass `noise` to pin the Gumbel draw (tests); otherwise it comes
    from `rng`.
    """
    if tau <= 0.0:
        raise ContractError(f"temperature must be positive, got {tau}")
    if noise is None:
        if rng is None:
            raise ContractError("relaxed step needs an rng or explicit noise")
        noise = gumbel_noise(rng, 2)
    p = decision_probs(params, x, state.h)
    r = gumbel_softmax(p, Tensor(noise), tau)
    h_big, c_big = lstm_step(params.big, x, state.h, state.c)
    h_skim, c_skim = _skim_branch(params, x, state)
    r_read = r.slice(READ_INDEX, READ_INDEX + 1)
    r_skim = r.slice(SKIM_INDEX, SKIM_INDEX + 1)
    h_new = add(scale(h_big, r_read), scale(h_skim, r_skim))
    c_new = add(scale(c_big, r_read), scale(c_skim, r_skim))
    return StepOutcome(state=SkimState(h_new, c_new), p=p, r=r, gumbel_noise=noise)
