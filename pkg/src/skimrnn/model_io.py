"""Save and load task models through the binary weight container.

The container header carries the model kind, widths, vocabulary and label
names, so a weight file alone is enough to run inference on raw text.
"""

from __future__ import annotations

import numpy as np

from .cell import LstmParams, SkimUnitParams, Tensor
from .data import Vocab
from .models import ClassifierModel, QaAttentionModel, SkimUnit, StandardUnit
from .weights import WeightFileError, read_weights, write_weights


def _unit_kind(unit) -> str:
    return "skim" if isinstance(unit, SkimUnit) else "lstm"


def save_classifier(path, model: ClassifierModel, vocab: Vocab,
                    label_names) -> None:
    header = {
        "model": "classifier",
        "unit": _unit_kind(model.unit),
        "d_in": model.embedding.shape[1],
        "d": model.unit.d,
        "d_small": model.unit.params.small.d_out
        if isinstance(model.unit, SkimUnit) else 0,
        "k": 2,
        "vocab": vocab.tokens,
        "labels": list(label_names),
        "train_embedding": model.train_embedding,
    }
    arrays = {name: t.data for name, t in model.state_arrays().items()}
    write_weights(path, header, arrays)


def save_qa(path, model: QaAttentionModel, vocab: Vocab) -> None:
    any_unit = model.units["layer1.fw"]
    header = {
        "model": "qa",
        "unit": _unit_kind(any_unit),
        "d_in": model.embedding.shape[1],
        "d": any_unit.d,
        "d_small": any_unit.params.small.d_out
        if isinstance(any_unit, SkimUnit) else 0,
        "k": 2,
        "vocab": vocab.tokens,
        "max_span": model.max_span,
        "train_embedding": model.train_embedding,
    }
    arrays = {name: t.data for name, t in model.state_arrays().items()}
    write_weights(path, header, arrays)


def _lstm_from(arrays, prefix, d_in, d_out, d_read) -> LstmParams:
    return LstmParams(Tensor(arrays[prefix + "w"]), Tensor(arrays[prefix + "b"]),
                      d_in=d_in, d_out=d_out, d_read=d_read)


def _unit_from(arrays, prefix, kind, d_in, d, d_small):
    if kind == "lstm":
        return StandardUnit(_lstm_from(arrays, prefix + "big.", d_in, d, d))
    params = SkimUnitParams(
        big=_lstm_from(arrays, prefix + "big.", d_in, d, d),
        small=_lstm_from(arrays, prefix + "small.", d_in, d_small, d),
        decision_w=Tensor(arrays[prefix + "decision.w"]),
        decision_b=Tensor(arrays[prefix + "decision.b"]),
    )
    return SkimUnit(params)


def load_model(path):
    """-> (model, vocab, header). Model kind is dispatched from the header."""
    header, arrays = read_weights(path)
    kind = header.get("model")
    if "vocab" not in header:
        raise WeightFileError(f"{path}: header has no vocabulary")
    vocab = Vocab.from_tokens(header["vocab"])
    d_in, d, d_small = header["d_in"], header["d"], header["d_small"]
    unit_kind = header.get("unit", "skim")
    train_embedding = bool(header.get("train_embedding", True))
    if kind == "classifier":
        model = ClassifierModel(
            embedding=Tensor(arrays["embedding"]),
            unit=_unit_from(arrays, "rnn.", unit_kind, d_in, d, d_small),
            proj_w=Tensor(arrays["proj.w"]),
            proj_b=Tensor(arrays["proj.b"]),
            train_embedding=train_embedding,
        )
        return model, vocab, header
    if kind == "qa":
        units = {
            "layer1.fw": _unit_from(arrays, "layer1.fw.", unit_kind, 3 * d_in, d, d_small),
            "layer1.bw": _unit_from(arrays, "layer1.bw.", unit_kind, 3 * d_in, d, d_small),
            "layer2.fw": _unit_from(arrays, "layer2.fw.", unit_kind, 2 * d, d, d_small),
            "layer2.bw": _unit_from(arrays, "layer2.bw.", unit_kind, 2 * d, d, d_small),
        }
        model = QaAttentionModel(
            embedding=Tensor(arrays["embedding"]),
            att_w=Tensor(arrays["attention.w"]),
            units=units,
            w_start=Tensor(arrays["head.start"]),
            w_end=Tensor(arrays["head.end"]),
            max_span=int(header.get("max_span", 10)),
            train_embedding=train_embedding,
        )
        return model, vocab, header
    raise WeightFileError(f"{path}: unknown model kind {kind!r}")


def _empty_small(d_in: int, d: int) -> LstmParams:
    return LstmParams(Tensor(np.zeros((0, d_in + d))), Tensor(np.zeros(0)),
                      d_in=d_in, d_out=0, d_read=d)


def skip_variant(model):
    """Same weights, but skim steps leave the state untouched (d' forced to 0)."""
    def strip(unit):
        if not isinstance(unit, SkimUnit):
            return unit
        p = unit.params
        return SkimUnit(SkimUnitParams(
            big=p.big,
            small=_empty_small(p.d_in, p.d),
            decision_w=p.decision_w,
            decision_b=p.decision_b,
        ))

    if isinstance(model, ClassifierModel):
        return ClassifierModel(model.embedding, strip(model.unit),
                               model.proj_w, model.proj_b, model.train_embedding)
    if isinstance(model, QaAttentionModel):
        units = {name: strip(u) for name, u in model.units.items()}
        return QaAttentionModel(model.embedding, model.att_w, units,
                                model.w_start, model.w_end,
                                max_span=model.max_span,
                                train_embedding=model.train_embedding)
    raise WeightFileError(f"cannot build skip variant of {type(model).__name__}")
