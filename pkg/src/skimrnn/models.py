"""Task models: a last-hidden-state text classifier and a toy span-extraction
QA model (attention over question words feeding a 2-layer bidirectional
recurrent encoder). Either takes a skim unit or a standard LSTM as its
recurrent layer; the two are drop-in interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import (
    Argmax,
    Decision,
    Forced,
    LstmParams,
    SkimState,
    SkimUnitParams,
    StepOutcome,
    Tensor,
    init_lstm_params,
    init_skim_unit,
    lstm_step,
    skim_step_hard,
    skim_step_relaxed,
)
from .flops import SkimDims, flops_lstm_step, flops_skim_step
from .kernels import ClassifierKernel, UnitKernel
from .tensor import (
    ContractError,
    add,
    clamp_min,
    concat,
    concat_all,
    dot,
    log,
    matvec,
    mul,
    neg,
    scale,
    softmax,
    take_row,
)
from .trace import DecisionTrace

EMBED_STDDEV = 0.1
FORCED_READ = Forced(Decision.READ)


@dataclass(frozen=True)
class HardMode:
    """Run hard steps under a decision policy (inference / pretraining)."""

    policy: object
    ledger: object = None


@dataclass(frozen=True)
class RelaxedMode:
    """Run differentiable blended steps at temperature tau (training)."""

    tau: float
    rng: np.random.Generator


class SkimUnit:
    """Sequence driver around one set of skim-unit parameters."""

    def __init__(self, params: SkimUnitParams):
        self.params = params

    @property
    def d(self):
        return self.params.d

    @property
    def dims(self) -> SkimDims:
        p = self.params
        return SkimDims(p.d_in, p.d, p.d_small, p.k)

    def initial_state(self) -> SkimState:
        return SkimState.zeros(self.params.d)

    def step(self, x: Tensor, state: SkimState, mode) -> StepOutcome:
        if isinstance(mode, RelaxedMode):
            return skim_step_relaxed(self.params, x, state, mode.tau, mode.rng)
        return skim_step_hard(self.params, x, state, mode.policy, ledger=mode.ledger)

    def step_flops(self, decision: Decision) -> int:
        return flops_skim_step(self.dims, decision)

    def std_flops(self) -> int:
        return flops_lstm_step(self.params.d_in, self.params.d, self.params.d)

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return self.params.parameters(prefix)


class StandardUnit:
    """Plain LSTM behind the same stepping interface; always reads."""

    def __init__(self, params: LstmParams):
        self.params = params

    @property
    def d(self):
        return self.params.d_out

    @property
    def dims(self) -> SkimDims:
        # degenerate dims: no small cell, flop ratio of 1 by convention
        return SkimDims(self.params.d_in, self.params.d_out, 0, 2)

    def initial_state(self) -> SkimState:
        return SkimState.zeros(self.params.d_out)

    def step(self, x: Tensor, state: SkimState, mode) -> StepOutcome:
        h, c = lstm_step(self.params, x, state.h, state.c)
        return StepOutcome(state=SkimState(h, c), p=Tensor(np.array([1.0, 0.0])),
                           decision=Decision.READ)

    def step_flops(self, decision: Decision) -> int:
        return self.std_flops()

    def std_flops(self) -> int:
        return flops_lstm_step(self.params.d_in, self.params.d_out, self.params.d_out)

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return {prefix + "big.w": self.params.w, prefix + "big.b": self.params.b}


def _run_sequence(unit, inputs, mode):
    """Thread a unit over a list of input tensors; returns all outcomes."""
    state = unit.initial_state()
    outcomes = []
    for x in inputs:
        out = unit.step(x, state, mode)
        state = out.state
        outcomes.append(out)
    return state, outcomes


def _trace_from(outcomes, name="", tokens=None) -> DecisionTrace:
    trace = DecisionTrace(name=name)
    for t, out in enumerate(outcomes):
        trace.add(out, token=tokens[t] if tokens else None)
    return trace


def _nll(probs: Tensor, index: int) -> Tensor:
    return neg(log(clamp_min(probs.slice(index, index + 1), 1e-12)))


class ClassifierModel:
    """Embed tokens, run the recurrent unit, project the last hidden state."""

    def __init__(self, embedding: Tensor, unit, proj_w: Tensor, proj_b: Tensor,
                 train_embedding: bool = True):
        self.embedding = embedding
        self.unit = unit
        self.proj_w = proj_w
        self.proj_b = proj_b
        self.train_embedding = train_embedding

    @classmethod
    def build(cls, rng: np.random.Generator, vocab_size: int, n_classes: int,
              d_in: int, d: int, d_small: int, unit_kind: str = "skim",
              embedding: np.ndarray | None = None,
              train_embedding: bool = True) -> "ClassifierModel":
        if n_classes < 2:
            raise ContractError(f"need at least 2 classes, got {n_classes}")
        if embedding is None:
            embedding = rng.normal(0.0, EMBED_STDDEV, size=(vocab_size, d_in))
            embedding[0] = 0.0  # PAD row
        if unit_kind == "skim":
            unit = SkimUnit(init_skim_unit(rng, d_in, d, d_small))
        elif unit_kind == "lstm":
            unit = StandardUnit(init_lstm_params(rng, d_in, d, d))
        else:
            raise ContractError(f"unknown unit kind '{unit_kind}'")
        s = 1.0 / np.sqrt(d)
        proj_w = Tensor(rng.uniform(-s, s, size=(n_classes, d)))
        proj_b = Tensor(np.zeros(n_classes))
        return cls(Tensor(embedding), unit, proj_w, proj_b, train_embedding)

    @property
    def n_classes(self):
        return self.proj_w.shape[0]

    @property
    def vocab_size(self):
        return self.embedding.shape[0]

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        if self.train_embedding:
            params["embedding"] = self.embedding
        params.update(self.unit.parameters("rnn."))
        params["proj.w"] = self.proj_w
        params["proj.b"] = self.proj_b
        return params

    def state_arrays(self) -> dict[str, Tensor]:
        """Every array the weight file must carry, trainable or not."""
        arrays = {"embedding": self.embedding}
        arrays.update(self.unit.parameters("rnn."))
        arrays["proj.w"] = self.proj_w
        arrays["proj.b"] = self.proj_b
        return arrays

    def forward(self, token_ids, mode):
        if len(token_ids) == 0:
            raise ContractError("classifier needs a non-empty token sequence")
        inputs = [take_row(self.embedding, int(i)) for i in token_ids]
        state, outcomes = _run_sequence(self.unit, inputs, mode)
        logits = add(matvec(self.proj_w, state.h), self.proj_b)
        return softmax(logits), outcomes

    def example_loss(self, example, mode):
        """Cross-entropy plus the per-step skim probabilities for the skim loss."""
        probs, outcomes = self.forward(example.token_ids, mode)
        loss = _nll(probs, example.label)
        skim_probs = [out.p.slice(1, 2) for out in outcomes]
        return loss, skim_probs

    def kernel(self) -> ClassifierKernel:
        if isinstance(self.unit, SkimUnit):
            uk = UnitKernel.from_params(self.unit.params)
            return ClassifierKernel(self.embedding.data, uk,
                                    self.proj_w.data, self.proj_b.data)
        raise ContractError("kernel path requires a skim unit")

    def evaluate(self, dataset, policy=None):
        """Accuracy, mean skim rate and aggregate flop reduction on a dataset."""
        policy = policy or Argmax()
        unit = self.unit
        correct = 0
        skims = 0
        steps = 0
        actual_flops = 0
        standard_flops = 0
        if isinstance(unit, SkimUnit):
            kern = self.kernel()
            for ex in dataset:
                probs, _, taken = kern.run(ex.token_ids, policy=policy)
                if int(np.argmax(probs)) == ex.label:
                    correct += 1
                skims += sum(1 for d in taken if d == Decision.SKIM)
                steps += len(taken)
                actual_flops += sum(unit.step_flops(d) for d in taken)
                standard_flops += len(taken) * unit.std_flops()
        else:
            for ex in dataset:
                probs, _ = self.forward(ex.token_ids, HardMode(policy))
                if int(np.argmax(probs.data)) == ex.label:
                    correct += 1
                steps += len(ex.token_ids)
            actual_flops = standard_flops = max(steps, 1)
        return EvalResult(
            metric=correct / len(dataset),
            skim_rate=skims / steps if steps else 0.0,
            flop_r=standard_flops / actual_flops if actual_flops else 1.0,
            extra={},
        )


@dataclass
class EvalResult:
    metric: float
    skim_rate: float
    flop_r: float
    extra: dict


def classify(model: ClassifierModel, token_ids, policy=None):
    """Hard inference over one example; returns class probabilities and trace."""
    probs, outcomes = model.forward(token_ids, HardMode(policy or Argmax()))
    return probs, _trace_from(outcomes)


class QaAttentionModel:
    """Question-aware span scorer.

    Per context position t, attention over question embeddings with features
    [x_t; q_i; x_t * q_i] produces a summary u_t; the sequence
    [x_t; u_t; x_t * u_t] feeds two stacked bidirectional recurrent layers,
    and per-position scoring vectors give start/end distributions over
    positions.
    """

    LAYER_NAMES = ("layer1.fw", "layer1.bw", "layer2.fw", "layer2.bw")

    def __init__(self, embedding: Tensor, att_w: Tensor, units: dict,
                 w_start: Tensor, w_end: Tensor, max_span: int = 10,
                 train_embedding: bool = True):
        self.embedding = embedding
        self.att_w = att_w
        self.units = units  # name -> unit, keys == LAYER_NAMES
        self.w_start = w_start
        self.w_end = w_end
        self.max_span = max_span
        self.train_embedding = train_embedding

    @classmethod
    def build(cls, rng: np.random.Generator, vocab_size: int, d_in: int, d: int,
              d_small: int, unit_kind: str = "skim", max_span: int = 10,
              embedding: np.ndarray | None = None,
              train_embedding: bool = True) -> "QaAttentionModel":
        if embedding is None:
            embedding = rng.normal(0.0, EMBED_STDDEV, size=(vocab_size, d_in))
            embedding[0] = 0.0
        att_w = Tensor(rng.uniform(-1.0, 1.0, size=3 * d_in) / np.sqrt(3 * d_in))

        def make_unit(unit_d_in):
            if unit_kind == "skim":
                return SkimUnit(init_skim_unit(rng, unit_d_in, d, d_small))
            if unit_kind == "lstm":
                return StandardUnit(init_lstm_params(rng, unit_d_in, d, d))
            raise ContractError(f"unknown unit kind '{unit_kind}'")

        units = {
            "layer1.fw": make_unit(3 * d_in),
            "layer1.bw": make_unit(3 * d_in),
            "layer2.fw": make_unit(2 * d),
            "layer2.bw": make_unit(2 * d),
        }
        s = 1.0 / np.sqrt(2 * d)
        w_start = Tensor(rng.uniform(-s, s, size=2 * d))
        w_end = Tensor(rng.uniform(-s, s, size=2 * d))
        return cls(Tensor(embedding), att_w, units, w_start, w_end,
                   max_span=max_span, train_embedding=train_embedding)

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        if self.train_embedding:
            params["embedding"] = self.embedding
        params["attention.w"] = self.att_w
        for name in self.LAYER_NAMES:
            params.update(self.units[name].parameters(name + "."))
        params["head.start"] = self.w_start
        params["head.end"] = self.w_end
        return params

    def state_arrays(self) -> dict[str, Tensor]:
        arrays = {"embedding": self.embedding, "attention.w": self.att_w}
        for name in self.LAYER_NAMES:
            arrays.update(self.units[name].parameters(name + "."))
        arrays["head.start"] = self.w_start
        arrays["head.end"] = self.w_end
        return arrays

    def _attend(self, x: Tensor, q_vecs):
        """Attention summary of the question for one context position."""
        scores = [dot(self.att_w, concat_all((x, q, mul(x, q)))) for q in q_vecs]
        att = softmax(concat_all(scores))
        u = scale(q_vecs[0], att.slice(0, 1))
        for i in range(1, len(q_vecs)):
            u = add(u, scale(q_vecs[i], att.slice(i, i + 1)))
        return u

    def _bidi(self, name_fw, name_bw, inputs, mode):
        _, out_fw = _run_sequence(self.units[name_fw], inputs, mode)
        _, out_bw = _run_sequence(self.units[name_bw], list(reversed(inputs)), mode)
        out_bw = list(reversed(out_bw))
        merged = [concat(f.state.h, b.state.h) for f, b in zip(out_fw, out_bw)]
        return merged, out_fw, out_bw

    def forward(self, context_ids, question_ids, mode):
        if len(question_ids) == 0:
            raise ContractError("empty question")
        if len(context_ids) == 0:
            raise ContractError("empty context")
        ctx = [take_row(self.embedding, int(i)) for i in context_ids]
        qs = [take_row(self.embedding, int(i)) for i in question_ids]
        layer1_in = []
        for x in ctx:
            u = self._attend(x, qs)
            layer1_in.append(concat_all((x, u, mul(x, u))))
        o1, fw1, bw1 = self._bidi("layer1.fw", "layer1.bw", layer1_in, mode)
        o2, fw2, bw2 = self._bidi("layer2.fw", "layer2.bw", o1, mode)
        start_logits = concat_all([dot(self.w_start, o) for o in o2])
        end_logits = concat_all([dot(self.w_end, o) for o in o2])
        outcomes = {"layer1.fw": fw1, "layer1.bw": bw1,
                    "layer2.fw": fw2, "layer2.bw": bw2}
        return softmax(start_logits), softmax(end_logits), outcomes

    def example_loss(self, example, mode):
        start_probs, end_probs, outcomes = self.forward(
            example.context_ids, example.question_ids, mode)
        loss = add(_nll(start_probs, example.start), _nll(end_probs, example.end))
        skim_probs = []
        for name in self.LAYER_NAMES:
            skim_probs.extend(out.p.slice(1, 2) for out in outcomes[name])
        return loss, skim_probs

    def evaluate(self, dataset, policy=None):
        """Exact-match rate plus per-direction skim rates and overall flop ratio."""
        policy = policy or Argmax()
        mode = HardMode(policy)
        exact = 0
        per_layer_skims = {name: 0 for name in self.LAYER_NAMES}
        per_layer_steps = {name: 0 for name in self.LAYER_NAMES}
        actual_flops = 0
        standard_flops = 0
        for ex in dataset:
            start_probs, end_probs, outcomes = self.forward(
                ex.context_ids, ex.question_ids, mode)
            s, e = answer_span(start_probs, end_probs, self.max_span)
            if s == ex.start and e == ex.end:
                exact += 1
            for name in self.LAYER_NAMES:
                unit = self.units[name]
                outs = outcomes[name]
                per_layer_steps[name] += len(outs)
                for out in outs:
                    if out.decision == Decision.SKIM:
                        per_layer_skims[name] += 1
                    actual_flops += unit.step_flops(out.decision)
                    standard_flops += unit.std_flops()
        total_steps = sum(per_layer_steps.values())
        total_skims = sum(per_layer_skims.values())
        layer_rates = {
            name: (per_layer_skims[name] / per_layer_steps[name]
                   if per_layer_steps[name] else 0.0)
            for name in self.LAYER_NAMES
        }
        return EvalResult(
            metric=exact / len(dataset),
            skim_rate=total_skims / total_steps if total_steps else 0.0,
            flop_r=standard_flops / actual_flops if actual_flops else 1.0,
            extra={"layer_skim_rates": layer_rates},
        )


def qa_attend(model: QaAttentionModel, context_ids, question_ids, policy=None):
    """Hard inference; returns start/end distributions and per-direction traces."""
    start_probs, end_probs, outcomes = model.forward(
        context_ids, question_ids, HardMode(policy or Argmax()))
    traces = {name: _trace_from(outs, name=name) for name, outs in outcomes.items()}
    return start_probs, end_probs, traces


def answer_span(start_probs, end_probs, max_span: int = 10):
    """(s, e) maximizing start[s] * end[e] with s <= e <= s + max_span."""
    sp = start_probs.data if isinstance(start_probs, Tensor) else np.asarray(start_probs)
    ep = end_probs.data if isinstance(end_probs, Tensor) else np.asarray(end_probs)
    n = len(sp)
    best = (0, 0)
    best_score = -1.0
    for s in range(n):
        hi = min(n, s + max_span + 1)
        for e in range(s, hi):
            score = sp[s] * ep[e]
            if score > best_score:
                best_score = score
                best = (s, e)
    return best
