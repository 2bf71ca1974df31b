"""Plain-ndarray mirrors of the hard inference path.

The tape-based path in `cell`/`models` carries autograd bookkeeping that the
hot loops (validation sweeps, Monte Carlo estimates, the CPU benchmark) do
not need. These kernels run the exact same arithmetic in the exact same
order on bare arrays, so their outputs agree with the tape path to the last
bit; tests enforce that.
"""

from __future__ import annotations

import numpy as np

from .cell import Argmax, Decision, Forced, READ_INDEX, Sample, Threshold

PROB_FLOOR = 1e-12


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


class UnitKernel:
    """One skim unit over bare arrays, with forced or policy-driven decisions."""

    def __init__(self, big_w, big_b, small_w, small_b, decision_w, decision_b,
                 d_in, d, d_small, dtype=np.float64):
        self.d_in = d_in
        self.d = d
        self.d_small = d_small
        self.big_w = np.ascontiguousarray(big_w, dtype=dtype)
        self.big_b = np.ascontiguousarray(big_b, dtype=dtype)
        self.small_w = np.ascontiguousarray(small_w, dtype=dtype)
        self.small_b = np.ascontiguousarray(small_b, dtype=dtype)
        self.decision_w = np.ascontiguousarray(decision_w, dtype=dtype)
        self.decision_b = np.ascontiguousarray(decision_b, dtype=dtype)
        self.dtype = dtype

    @classmethod
    def from_params(cls, params, dtype=np.float64):
        return cls(params.big.w.data, params.big.b.data,
                   params.small.w.data, params.small.b.data,
                   params.decision_w.data, params.decision_b.data,
                   params.d_in, params.d, params.d_small, dtype=dtype)

    def probs(self, x, h):
        logits = self.decision_w @ np.concatenate((x, h)) + self.decision_b
        return _softmax(logits)

    def _lstm(self, w, b, x, h_read, c_prev, d_out):
        z = w @ np.concatenate((x, h_read)) + b
        gate_i = _sigmoid(z[0:d_out])
        gate_f = _sigmoid(z[d_out:2 * d_out])
        gate_o = _sigmoid(z[2 * d_out:3 * d_out])
        cand = np.tanh(z[3 * d_out:4 * d_out])
        c_new = gate_f * c_prev + gate_i * cand
        h_new = gate_o * np.tanh(c_new)
        return h_new, c_new

    def step(self, x, h, c, decision):
        """Advance (h, c) down the chosen branch only."""
        if decision == Decision.READ:
            return self._lstm(self.big_w, self.big_b, x, h, c, self.d)
        ds = self.d_small
        h_small, c_small = self._lstm(self.small_w, self.small_b, x, h, c[0:ds], ds)
        return np.concatenate((h_small, h[ds:])), np.concatenate((c_small, c[ds:]))

    def zero_state(self):
        return np.zeros(self.d, dtype=self.dtype), np.zeros(self.d, dtype=self.dtype)


class LstmKernel:
    """A standard LSTM (the always-read baseline, no decision network)."""

    def __init__(self, w, b, d_in, d, dtype=np.float64):
        self.w = np.ascontiguousarray(w, dtype=dtype)
        self.b = np.ascontiguousarray(b, dtype=dtype)
        self.d_in = d_in
        self.d = d
        self.dtype = dtype

    def step(self, x, h, c):
        d = self.d
        z = self.w @ np.concatenate((x, h)) + self.b
        gate_i = _sigmoid(z[0:d])
        gate_f = _sigmoid(z[d:2 * d])
        gate_o = _sigmoid(z[2 * d:3 * d])
        cand = np.tanh(z[3 * d:4 * d])
        c_new = gate_f * c + gate_i * cand
        h_new = gate_o * np.tanh(c_new)
        return h_new, c_new

    def zero_state(self):
        return np.zeros(self.d, dtype=self.dtype), np.zeros(self.d, dtype=self.dtype)


def decide(p, policy) -> Decision:
    if isinstance(policy, Argmax):
        return Decision.READ if p[READ_INDEX] >= p[1 - READ_INDEX] else Decision.SKIM
    if isinstance(policy, Threshold):
        return Decision.READ if p[READ_INDEX] >= policy.theta else Decision.SKIM
    if isinstance(policy, Sample):
        return Decision.READ if policy.rng.random() < p[READ_INDEX] else Decision.SKIM
    if isinstance(policy, Forced):
        return policy.decision
    raise ValueError(f"unsupported kernel policy {policy!r}")


class ClassifierKernel:
    """Embedding + skim unit + linear head, hard path only."""

    def __init__(self, embedding, unit: UnitKernel, proj_w, proj_b, dtype=np.float64):
        self.embedding = np.ascontiguousarray(embedding, dtype=dtype)
        self.unit = unit
        self.proj_w = np.ascontiguousarray(proj_w, dtype=dtype)
        self.proj_b = np.ascontiguousarray(proj_b, dtype=dtype)

    def run(self, token_ids, policy=None, decisions=None):
        """Forward pass; returns (class_probs, per-step decision probs, decisions)."""
        unit = self.unit
        h, c = unit.zero_state()
        p_steps = []
        taken = []
        forced = decisions is not None
        for t, idx in enumerate(token_ids):
            x = self.embedding[idx]
            p = unit.probs(x, h)
            d = decisions[t] if forced else decide(p, policy)
            h, c = unit.step(x, h, c, d)
            p_steps.append(p)
            taken.append(d)
        logits = self.proj_w @ h + self.proj_b
        return _softmax(logits), p_steps, taken

    def loss(self, token_ids, label, policy=None, decisions=None):
        probs, p_steps, taken = self.run(token_ids, policy=policy, decisions=decisions)
        loss = -np.log(max(probs[label], PROB_FLOOR))
        return loss, probs, p_steps, taken
