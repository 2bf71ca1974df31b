"""Tokenization, vocabulary building, embedding ingestion, dataset file
parsing, and the synthetic keyword / span task generators.

File formats (byte-exact contracts):
  classification    one example per line: `<label>\\t<text>`
  span              one JSON object per line with fields
                    context, question, answer_start, answer_end
                    (answer indices refer to whitespace tokens of context)
  embeddings        one token per line: `token v1 v2 ... v_d`
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass

import numpy as np

from .tensor import ContractError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


class ParseError(ValueError):
    """Input file rejected; carries the first offending line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, split_punctuation: bool = False) -> list[str]:
    """Lowercase and split on whitespace; optionally split punctuation off."""
    tokens = text.lower().split()
    if not split_punctuation:
        return tokens
    out = []
    for tok in tokens:
        run = ""
        run_punct = None
        for ch in tok:
            p = _is_punct(ch)
            if run and p != run_punct:
                out.append(run)
                run = ""
            run += ch
            run_punct = p
        if run:
            out.append(run)
    return out


class Vocab:
    """Token ids in first-seen order; 0 and 1 are reserved for PAD and UNK."""

    def __init__(self, tokens=None):
        self.tokens = [PAD_TOKEN, UNK_TOKEN]
        self.index = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
        if tokens:
            for t in tokens:
                self.add(t)

    @classmethod
    def build(cls, sequences) -> "Vocab":
        v = cls()
        for seq in sequences:
            for tok in seq:
                v.add(tok)
        return v

    @classmethod
    def from_tokens(cls, full_list) -> "Vocab":
        """Rebuild from a stored id->token list (including the reserved rows)."""
        if full_list[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ContractError("vocabulary list must start with the PAD and UNK rows")
        v = cls()
        for t in full_list[2:]:
            v.add(t)
        return v

    def add(self, token: str) -> int:
        idx = self.index.get(token)
        if idx is None:
            idx = len(self.tokens)
            self.tokens.append(token)
            self.index[token] = idx
        return idx

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode(self, tokens) -> list[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index


@dataclass
class LabeledExample:
    label: int
    token_ids: list

    def __post_init__(self):
        if len(self.token_ids) == 0:
            raise ContractError("labeled example needs at least one token")


@dataclass
class SpanExample:
    context_ids: list
    question_ids: list
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end < len(self.context_ids):
            raise ContractError(
                f"span ({self.start}, {self.end}) out of range for "
                f"context of length {len(self.context_ids)}")


def load_embeddings(path, vocab: Vocab, d_in: int, seed: int = 0) -> np.ndarray:
    """Embedding table from a text file; missing tokens get seeded N(0, 0.1^2)
    rows, the PAD row is zero."""
    found: dict[int, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split()
            token, values = parts[0], parts[1:]
            if len(values) != d_in:
                raise ParseError(path, line_no,
                                 f"expected {d_in} values for '{token}', got {len(values)}")
            if token in vocab:
                try:
                    found[vocab.id(token)] = np.array([float(v) for v in values])
                except ValueError as e:
                    raise ParseError(path, line_no, str(e)) from None
    rng = np.random.default_rng(seed)
    table = np.zeros((len(vocab), d_in))
    for idx in range(1, len(vocab)):  # PAD row stays zero
        if idx in found:
            table[idx] = found[idx]
        else:
            table[idx] = rng.normal(0.0, 0.1, size=d_in)
    return table


def parse_classification_file(path):
    """-> (list of (label_id, tokens), label names in first-seen order)."""
    examples = []
    labels: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ParseError(path, line_no, "expected '<label>\\t<text>'")
            label, text = line.split("\t", 1)
            tokens = tokenize(text)
            if not tokens:
                raise ParseError(path, line_no, "empty text")
            if label not in labels:
                labels[label] = len(labels)
            examples.append((labels[label], tokens))
    return examples, list(labels)


def encode_classification(parsed, vocab: Vocab) -> list[LabeledExample]:
    return [LabeledExample(label, vocab.encode(tokens)) for label, tokens in parsed]


def write_classification_file(path, examples, label_names) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for label_id, tokens in examples:
            f.write(f"{label_names[label_id]}\t{' '.join(tokens)}\n")


def parse_span_file(path):
    """-> list of (context_tokens, question_tokens, start, end)."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(path, line_no, f"bad JSON: {e.msg}") from None
            for key in ("context", "question", "answer_start", "answer_end"):
                if key not in obj:
                    raise ParseError(path, line_no, f"missing field '{key}'")
            ctx = tokenize(obj["context"])
            q = tokenize(obj["question"])
            start, end = int(obj["answer_start"]), int(obj["answer_end"])
            if not ctx:
                raise ParseError(path, line_no, "empty context")
            if not q:
                raise ParseError(path, line_no, "empty question")
            if not 0 <= start <= end < len(ctx):
                raise ParseError(path, line_no,
                                 f"span ({start}, {end}) out of range for {len(ctx)} tokens")
            out.append((ctx, q, start, end))
    return out


def encode_span(parsed, vocab: Vocab) -> list[SpanExample]:
    return [SpanExample(vocab.encode(ctx), vocab.encode(q), s, e)
            for ctx, q, s, e in parsed]


def write_span_file(path, examples) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ctx, q, start, end in examples:
            f.write(json.dumps({
                "context": " ".join(ctx),
                "question": " ".join(q),
                "answer_start": start,
                "answer_end": end,
            }, sort_keys=True) + "\n")


MARKER_TOKEN = "mark"


def gen_keyword_task(seed: int, n_examples: int, seq_len: int, vocab_size: int,
                     n_keywords: int):
    """Classification task where one keyword token decides the label.

    Each example is `seq_len` uniformly drawn filler tokens with exactly one
    keyword placed at a uniformly random position; the label is that
    keyword's class. -> (list of (label_id, tokens), label names).
    """
    if n_keywords < 2:
        raise ContractError(f"need at least 2 keywords, got {n_keywords}")
    if seq_len < 4:
        raise ContractError(f"sequence length must be >= 4, got {seq_len}")
    if vocab_size <= n_keywords:
        raise ContractError(
            f"vocab size {vocab_size} leaves no room for fillers beyond {n_keywords} keywords")
    n_fillers = vocab_size - n_keywords
    keywords = [f"kw{i}" for i in range(n_keywords)]
    fillers = [f"w{j}" for j in range(n_fillers)]
    rng = np.random.default_rng(seed)
    examples = []
    for _ in range(n_examples):
        label = int(rng.integers(n_keywords))
        pos = int(rng.integers(seq_len))
        tokens = [fillers[int(j)] for j in rng.integers(n_fillers, size=seq_len)]
        tokens[pos] = keywords[label]
        examples.append((label, tokens))
    return examples, keywords


def gen_span_task(seed: int, n_examples: int, context_len: int, vocab_size: int,
                  n_keys: int = 6):
    """Span task: the context hides a marker followed by a 2-token answer
    whose identity is a fixed function of the single question key token.

    -> list of (context_tokens, question_tokens, start, end); end = start + 1.
    """
    if context_len < 8:
        raise ContractError(f"context length must be >= 8, got {context_len}")
    reserved = 3 * n_keys + 1
    if vocab_size <= reserved:
        raise ContractError(
            f"vocab size {vocab_size} too small for {n_keys} keys plus answers and marker")
    keys = [f"key{i}" for i in range(n_keys)]
    answers = [(f"ans{i}a", f"ans{i}b") for i in range(n_keys)]
    fillers = [f"w{j}" for j in range(vocab_size - reserved)]
    rng = np.random.default_rng(seed)
    examples = []
    for _ in range(n_examples):
        key = int(rng.integers(n_keys))
        m = int(rng.integers(context_len - 2))
        ctx = [fillers[int(j)] for j in rng.integers(len(fillers), size=context_len)]
        ctx[m] = MARKER_TOKEN
        ctx[m + 1], ctx[m + 2] = answers[key]
        examples.append((ctx, [keys[key]], m + 1, m + 2))
    return examples
