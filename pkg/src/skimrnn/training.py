"""Training loop: skim-aware loss, Adam, forced-read pretraining, temperature
annealing, early stopping, and a brute-force expected-loss oracle that
enumerates every decision sequence for short inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cell import Decision, Forced, TemperatureSchedule, temperature
from .models import FORCED_READ, HardMode, RelaxedMode
from .tensor import (
    ContractError,
    Tape,
    Tensor,
    add,
    backward,
    clamp_min,
    concat_all,
    log,
    neg,
    smul,
)


class TrainingError(RuntimeError):
    """Training could not continue; carries the global step it failed at."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class TrainConfig:
    lr: float = 1e-3
    gamma: float = 0.0
    batch_size: int = 32
    pretrain_steps: int = 0
    early_stop_patience: int = 500
    max_steps: int = 2000
    eval_interval: int = 50
    seed: int = 0
    schedule: TemperatureSchedule = field(default_factory=TemperatureSchedule)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_grad_norm: float = 5.0

    def validate(self) -> None:
        if self.lr <= 0:
            raise ContractError(f"lr must be positive, got {self.lr}")
        if self.gamma < 0:
            raise ContractError(f"gamma must be non-negative, got {self.gamma}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.pretrain_steps < 0:
            raise ContractError(f"pretrain_steps must be >= 0, got {self.pretrain_steps}")
        if self.early_stop_patience <= 0:
            raise ContractError(f"early_stop_patience must be > 0, got {self.early_stop_patience}")
        if self.max_steps < 1:
            raise ContractError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.eval_interval < 1:
            raise ContractError(f"eval_interval must be >= 1, got {self.eval_interval}")
        if self.max_grad_norm <= 0:
            raise ContractError(f"max_grad_norm must be positive, got {self.max_grad_norm}")


@dataclass
class TrainState:
    """Optimizer moments and progress counters for one run."""

    rng: np.random.Generator
    step: int = 0
    adam_t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    best_metric: float = -math.inf
    best_step: int = 0


@dataclass
class MetricRow:
    step: int
    train_loss: float
    val_metric: float
    skim_rate: float
    tau: float
    flop_r: float


@dataclass
class TrainResult:
    history: list
    halt_reason: str
    best_metric: float
    best_step: int
    extra: dict = field(default_factory=dict)


def skim_loss(task_loss: Tensor, skim_probs, gamma: float) -> Tensor:
    """task loss + gamma * mean over steps of -log(p_skim)."""
    if isinstance(skim_probs, Tensor):
        vec = skim_probs
    else:
        parts = list(skim_probs)
        if not parts:
            raise ContractError("skim_loss needs at least one step probability")
        vec = concat_all(parts)
    n = vec.shape[0]
    if n == 0:
        raise ContractError("skim_loss needs at least one step probability")
    penalty = neg(log(clamp_min(vec, 1e-12)).sum())
    return add(task_loss, smul(penalty, gamma / n))


def clip_gradients(params: dict, max_norm: float) -> float:
    """Scale all gradients so their global norm is at most max_norm."""
    sq = 0.0
    for p in params.values():
        if p.grad is not None:
            sq += float((p.grad * p.grad).sum())
    norm = math.sqrt(sq)
    if norm > max_norm > 0:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor
    return norm


def adam_step(params: dict, state: TrainState, cfg: TrainConfig) -> None:
    """Bias-corrected Adam update, in place. Params with no gradient are skipped."""
    state.adam_t += 1
    t = state.adam_t
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in '{name}'", state.step)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= cfg.lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.eps)


MAX_BRUTEFORCE_LEN = 12


def expected_loss_bruteforce(model, example, max_len: int = MAX_BRUTEFORCE_LEN) -> float:
    """Exact expected loss: enumerate every decision sequence, weight each
    hard-path loss by the product of its step probabilities along that path."""
    ids = example.token_ids
    t_len = len(ids)
    if t_len > max_len:
        raise ContractError(
            f"refusing to enumerate 2^{t_len} decision sequences (limit 2^{max_len})")
    kern = model.kernel()
    total = 0.0
    for decisions in itertools.product((Decision.READ, Decision.SKIM), repeat=t_len):
        loss, _, p_steps, _ = kern.loss(ids, example.label, decisions=decisions)
        weight = 1.0
        for t, d in enumerate(decisions):
            weight *= p_steps[t][0 if d == Decision.READ else 1]
        total += loss * weight
    return float(total)


def monte_carlo_expected_loss(model, example, n_samples: int,
                              rng: np.random.Generator):
    """Sampled estimate of the expected loss; returns (mean, standard error)."""
    from .cell import Sample
    kern = model.kernel()
    policy = Sample(rng)
    losses = np.empty(n_samples)
    for i in range(n_samples):
        loss, _, _, _ = kern.loss(example.token_ids, example.label, policy=policy)
        losses[i] = loss
    stderr = losses.std(ddof=1) / math.sqrt(n_samples)
    return float(losses.mean()), float(stderr)


def _format_float(x: float) -> str:
    return repr(float(x))


def write_metrics_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("step,train_loss,val_metric,skim_rate,tau,flop_r\n")
        for row in history:
            f.write(",".join([
                str(row.step),
                _format_float(row.train_loss),
                _format_float(row.val_metric),
                _format_float(row.skim_rate),
                _format_float(row.tau),
                _format_float(row.flop_r),
            ]) + "\n")


def train(model, train_set, val_set, cfg: TrainConfig,
          metrics_path=None) -> TrainResult:
    """Optimize the model; returns history and restores the best-validation
    snapshot into the model.

    The first `pretrain_steps` steps force hard read decisions (standard-LSTM
    behaviour) and drop the skim-loss term; afterwards training switches to
    relaxed steps at the annealed temperature. Validation runs every
    `eval_interval` steps; best-snapshot tracking restarts when the pretrain
    phase ends so the returned weights always reflect the final regime.
    Deterministic given the seed.
    """
    cfg.validate()
    if not train_set or not val_set:
        raise ContractError("train and validation sets must be non-empty")
    params = model.parameters()
    state = TrainState(rng=np.random.default_rng(cfg.seed))
    history = []
    snapshot = None
    halt = "max_steps"
    order: list[int] = []
    n = 0
    while n < cfg.max_steps:
        if not order:
            order = list(state.rng.permutation(len(train_set)))
        batch = order[:cfg.batch_size]
        del order[:cfg.batch_size]

        pretrain = n < cfg.pretrain_steps
        tau = temperature(cfg.schedule, n)
        with Tape():
            total = None
            for idx in batch:
                ex = train_set[idx]
                mode = HardMode(FORCED_READ) if pretrain \
                    else RelaxedMode(tau, state.rng)
                task_loss, skim_probs = model.example_loss(ex, mode)
                gamma_eff = 0.0 if pretrain else cfg.gamma
                ex_loss = skim_loss(task_loss, skim_probs, gamma_eff)
                total = ex_loss if total is None else add(total, ex_loss)
            batch_loss = smul(total, 1.0 / len(batch))
            loss_value = batch_loss.item()
            if not math.isfinite(loss_value):
                raise TrainingError("loss diverged (non-finite)", n)
            for p in params.values():
                p.grad = None
            backward(batch_loss)
        clip_gradients(params, cfg.max_grad_norm)
        adam_step(params, state, cfg)
        n += 1
        state.step = n

        if n == cfg.pretrain_steps:
            # phase change: forget pretrain-phase bests, restart patience
            state.best_metric = -math.inf
            state.best_step = n
            snapshot = None

        if n % cfg.eval_interval == 0 or n == cfg.max_steps:
            policy = Forced(Decision.READ) if n < cfg.pretrain_steps else None
            res = model.evaluate(val_set, policy=policy)
            history.append(MetricRow(n, loss_value, res.metric,
                                     res.skim_rate, tau, res.flop_r))
            if res.metric > state.best_metric:
                state.best_metric = res.metric
                state.best_step = n
                snapshot = {k: p.data.copy() for k, p in params.items()}
            if n - state.best_step >= cfg.early_stop_patience:
                halt = "early_stop"
                break

    if snapshot is not None:
        for k, p in params.items():
            p.data[...] = snapshot[k]
    if metrics_path is not None:
        write_metrics_csv(metrics_path, history)
    return TrainResult(history=history, halt_reason=halt,
                       best_metric=state.best_metric, best_step=state.best_step)
