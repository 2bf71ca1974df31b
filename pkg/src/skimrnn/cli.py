"""Command-line entry points: train, eval, sweep-threshold, trace, bench,
gen-data.

All commands read a flat JSON config (--config) whose keys are validated
exhaustively before any output file is produced; unknown keys are rejected.
Exit codes: 0 success, 2 usage/config error, 3 runtime/training error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import BenchConfig, BenchmarkError, bench_inference, write_bench_csv, \
    write_bench_long_csv
from .cell import Argmax, Decision, Sample, TemperatureSchedule, Threshold
from .data import (
    ParseError,
    Vocab,
    encode_classification,
    encode_span,
    gen_keyword_task,
    gen_span_task,
    load_embeddings,
    parse_classification_file,
    parse_span_file,
    tokenize,
    write_classification_file,
    write_span_file,
)
from .flops import skim_rate as _trace_skim_rate
from .model_io import load_model, save_classifier, save_qa, skip_variant
from .models import ClassifierModel, QaAttentionModel, answer_span, classify, qa_attend
from .tensor import ContractError
from .training import TrainConfig, TrainingError, train
from .weights import WeightFileError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    """Configuration rejected before any work was done."""


# --------------------------------------------------------------------------
# config schema machinery

_REQUIRED = object()


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return (isinstance(v, (int, float)) and not isinstance(v, bool))


class Field:
    def __init__(self, kind, default=_REQUIRED, check=None, why=""):
        self.kind = kind
        self.default = default
        self.check = check
        self.why = why

    def accept(self, key, value):
        ok = {
            "int": _is_int,
            "float": _is_num,
            "str": lambda v: isinstance(v, str),
            "bool": lambda v: isinstance(v, bool),
            "list": lambda v: isinstance(v, list),
        }[self.kind](value)
        if not ok:
            raise ConfigError(f"config field '{key}': expected {self.kind}, got {value!r}")
        if self.kind == "float":
            value = float(value)
        if self.check is not None and not self.check(value):
            raise ConfigError(f"config field '{key}': {self.why}, got {value!r}")
        return value


def _validate_config(cfg: dict, schema: dict, verb: str) -> dict:
    unknown = sorted(set(cfg) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key(s) for {verb}: {', '.join(unknown)}")
    out = {}
    for key, f in schema.items():
        if key in cfg and cfg[key] is not None:
            out[key] = f.accept(key, cfg[key])
        elif f.default is _REQUIRED:
            raise ConfigError(f"config field '{key}' is required for {verb}")
        else:
            out[key] = f.default
    return out


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _unit_interval(v):
    return 0.0 <= v <= 1.0


_COMMON_TRAIN = {
    "model": Field("str", check=lambda v: v in ("classifier", "qa"),
                   why="must be 'classifier' or 'qa'"),
    "unit": Field("str", "skim", lambda v: v in ("skim", "lstm"),
                  "must be 'skim' or 'lstm'"),
    "d_in": Field("int", check=_positive, why="must be positive"),
    "d": Field("int", check=_positive, why="must be positive"),
    "d_small": Field("int", 0, _non_negative, "must be non-negative"),
    "train_path": Field("str"),
    "val_path": Field("str"),
    "out_dir": Field("str", None),
    "seed": Field("int", 0),
    "lr": Field("float", 1e-3, _positive, "must be positive"),
    "gamma": Field("float", 0.0, _non_negative, "must be non-negative"),
    "batch_size": Field("int", 32, _positive, "must be positive"),
    "pretrain_steps": Field("int", 0, _non_negative, "must be non-negative"),
    "early_stop_patience": Field("int", 500, _positive, "must be positive"),
    "max_steps": Field("int", 2000, _positive, "must be positive"),
    "eval_interval": Field("int", 50, _positive, "must be positive"),
    "max_grad_norm": Field("float", 5.0, _positive, "must be positive"),
    "beta1": Field("float", 0.9, lambda v: 0 <= v < 1, "must lie in [0, 1)"),
    "beta2": Field("float", 0.999, lambda v: 0 <= v < 1, "must lie in [0, 1)"),
    "eps": Field("float", 1e-8, _positive, "must be positive"),
    "temp_rate": Field("float", 1e-4, _non_negative, "must be non-negative"),
    "temp_floor": Field("float", 0.5, _positive, "must be positive"),
    "policy": Field("str", "argmax", lambda v: v in ("argmax", "sample", "threshold"),
                    "must be 'argmax', 'sample' or 'threshold'"),
    "theta": Field("float", 0.5, _unit_interval, "must lie in [0, 1]"),
    "embeddings_path": Field("str", None),
    "train_embedding": Field("bool", True),
    "max_span": Field("int", 10, _non_negative, "must be non-negative"),
}

_EVAL_SCHEMA = {
    "model_path": Field("str"),
    "data_path": Field("str"),
    "out_dir": Field("str", None),
    "seed": Field("int", 0),
    "policy": Field("str", "argmax", lambda v: v in ("argmax", "sample", "threshold"),
                    "must be 'argmax', 'sample' or 'threshold'"),
    "theta": Field("float", 0.5, _unit_interval, "must lie in [0, 1]"),
    "skip_mode": Field("bool", False),
}

_SWEEP_SCHEMA = {
    "model_path": Field("str"),
    "data_path": Field("str"),
    "thresholds": Field("list"),
    "include_skip": Field("bool", False),
    "out_dir": Field("str", None),
    "seed": Field("int", 0),
}

_TRACE_SCHEMA = {
    "model_path": Field("str"),
    "text": Field("str", None),
    "input_path": Field("str", None),
    "question": Field("str", None),
    "out_dir": Field("str", None),
    "seed": Field("int", 0),
    "color": Field("bool", False),
    "policy": Field("str", "argmax", lambda v: v in ("argmax", "sample", "threshold"),
                    "must be 'argmax', 'sample' or 'threshold'"),
    "theta": Field("float", 0.5, _unit_interval, "must lie in [0, 1]"),
}

_BENCH_SCHEMA = {
    "configs": Field("list"),
    "skim_rates": Field("list"),
    "trials": Field("int", 50, lambda v: v >= 30, "must be at least 30"),
    "warmup": Field("int", 10, lambda v: v >= 5, "must be at least 5"),
    "seq_len": Field("int", 100, _positive, "must be positive"),
    "seed": Field("int", 0),
    "dtype": Field("str", "float64", lambda v: v in ("float64", "float32"),
                   "must be 'float64' or 'float32'"),
    "out_dir": Field("str", None),
}

_GEN_SCHEMA = {
    "task": Field("str", check=lambda v: v in ("keyword", "span"),
                  why="must be 'keyword' or 'span'"),
    "seed": Field("int", 0),
    "n_train": Field("int", check=_positive, why="must be positive"),
    "n_test": Field("int", check=_positive, why="must be positive"),
    "out_dir": Field("str", None),
    "seq_len": Field("int", 40, lambda v: v >= 4, "must be at least 4"),
    "vocab_size": Field("int", 60, _positive, "must be positive"),
    "n_keywords": Field("int", 2, lambda v: v >= 2, "must be at least 2"),
    "context_len": Field("int", 20, lambda v: v >= 8, "must be at least 8"),
    "n_keys": Field("int", 6, _positive, "must be positive"),
}


def _policy_from(cfg):
    if cfg["policy"] == "argmax":
        return Argmax()
    if cfg["policy"] == "threshold":
        return Threshold(cfg["theta"])
    return Sample(np.random.default_rng(cfg["seed"]))


def _need_out_dir(cfg) -> Path:
    if not cfg.get("out_dir"):
        raise ConfigError("config field 'out_dir' is required (or pass --out-dir)")
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need_file(path, what) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _dump_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


# --------------------------------------------------------------------------
# train

def _load_classification(train_path, val_path):
    train_parsed, train_labels = parse_classification_file(train_path)
    val_parsed, val_labels = parse_classification_file(val_path)
    mapping = {name: i for i, name in enumerate(train_labels)}
    remapped = []
    for label_id, tokens in val_parsed:
        name = val_labels[label_id]
        if name not in mapping:
            raise ConfigError(f"validation label '{name}' never appears in the training set")
        remapped.append((mapping[name], tokens))
    vocab = Vocab.build(tokens for _, tokens in train_parsed)
    return (encode_classification(train_parsed, vocab),
            encode_classification(remapped, vocab), vocab, train_labels)


def _load_span(train_path, val_path):
    train_parsed = parse_span_file(train_path)
    val_parsed = parse_span_file(val_path)
    vocab = Vocab.build([ctx + q for ctx, q, _, _ in train_parsed])
    return encode_span(train_parsed, vocab), encode_span(val_parsed, vocab), vocab


def cmd_train(cfg: dict) -> int:
    cfg = _validate_config(cfg, _COMMON_TRAIN, "train")
    if not 0 <= cfg["d_small"] < cfg["d"]:
        raise ConfigError(f"config field 'd_small': must satisfy 0 <= d_small < d, "
                          f"got d_small={cfg['d_small']}, d={cfg['d']}")
    _need_file(cfg["train_path"], "training set")
    _need_file(cfg["val_path"], "validation set")
    if cfg["embeddings_path"]:
        _need_file(cfg["embeddings_path"], "embedding file")
    out = _need_out_dir(cfg)

    train_cfg = TrainConfig(
        lr=cfg["lr"], gamma=cfg["gamma"], batch_size=cfg["batch_size"],
        pretrain_steps=cfg["pretrain_steps"],
        early_stop_patience=cfg["early_stop_patience"],
        max_steps=cfg["max_steps"], eval_interval=cfg["eval_interval"],
        seed=cfg["seed"],
        schedule=TemperatureSchedule(cfg["temp_rate"], cfg["temp_floor"]),
        beta1=cfg["beta1"], beta2=cfg["beta2"], eps=cfg["eps"],
        max_grad_norm=cfg["max_grad_norm"],
    )
    rng = np.random.default_rng(cfg["seed"])
    label_names = None
    if cfg["model"] == "classifier":
        train_set, val_set, vocab, label_names = _load_classification(
            cfg["train_path"], cfg["val_path"])
        embedding = None
        if cfg["embeddings_path"]:
            embedding = load_embeddings(cfg["embeddings_path"], vocab,
                                        cfg["d_in"], seed=cfg["seed"])
        model = ClassifierModel.build(
            rng, len(vocab), len(label_names), cfg["d_in"], cfg["d"],
            cfg["d_small"], unit_kind=cfg["unit"], embedding=embedding,
            train_embedding=cfg["train_embedding"])
    else:
        train_set, val_set, vocab = _load_span(cfg["train_path"], cfg["val_path"])
        embedding = None
        if cfg["embeddings_path"]:
            embedding = load_embeddings(cfg["embeddings_path"], vocab,
                                        cfg["d_in"], seed=cfg["seed"])
        model = QaAttentionModel.build(
            rng, len(vocab), cfg["d_in"], cfg["d"], cfg["d_small"],
            unit_kind=cfg["unit"], max_span=cfg["max_span"],
            embedding=embedding, train_embedding=cfg["train_embedding"])

    result = train(model, train_set, val_set, train_cfg,
                   metrics_path=out / "metrics.csv")

    weight_path = out / "model.skw"
    if cfg["model"] == "classifier":
        save_classifier(weight_path, model, vocab, label_names)
    else:
        save_qa(weight_path, model, vocab)

    final = model.evaluate(val_set, policy=_policy_from(cfg))
    summary = {
        "model": cfg["model"],
        "unit": cfg["unit"],
        "metric": final.metric,
        "skim_rate": final.skim_rate,
        "flop_r": final.flop_r,
        "best_step": result.best_step,
        "best_val_metric": result.best_metric,
        "halt_reason": result.halt_reason,
        "steps_run": result.history[-1].step if result.history else 0,
    }
    summary.update(final.extra)
    _dump_json(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# eval

def cmd_eval(cfg: dict) -> int:
    cfg = _validate_config(cfg, _EVAL_SCHEMA, "eval")
    model_path = _need_file(cfg["model_path"], "model file")
    data_path = _need_file(cfg["data_path"], "dataset")
    model, vocab, header = load_model(model_path)
    if cfg["skip_mode"]:
        model = skip_variant(model)
    dataset, label_names = _load_eval_data(model, header, data_path, vocab)
    policy = _policy_from(cfg)
    res = model.evaluate(dataset, policy=policy)
    summary = {"metric": res.metric, "skim_rate": res.skim_rate,
               "flop_r": res.flop_r, "examples": len(dataset),
               "skip_mode": cfg["skip_mode"]}
    summary.update(res.extra)
    if cfg["out_dir"]:
        out = _need_out_dir(cfg)
        _write_predictions(out / "predictions.jsonl", model, dataset,
                           policy, label_names)
        _dump_json(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _load_eval_data(model, header, data_path, vocab):
    if header["model"] == "classifier":
        parsed, file_labels = parse_classification_file(data_path)
        trained = {name: i for i, name in enumerate(header.get("labels", []))}
        examples = []
        for label_id, tokens in parsed:
            name = file_labels[label_id]
            if name not in trained:
                raise ConfigError(f"dataset label '{name}' unknown to the model")
            examples.append((trained[name], tokens))
        return encode_classification(examples, vocab), header.get("labels", [])
    parsed = parse_span_file(data_path)
    return encode_span(parsed, vocab), None


def _write_predictions(path, model, dataset, policy, label_names):
    with open(path, "w", encoding="utf-8") as f:
        for i, ex in enumerate(dataset):
            if isinstance(model, ClassifierModel):
                probs, trace = classify(model, ex.token_ids, policy=policy)
                pred = int(np.argmax(probs.data))
                rec = {
                    "index": i,
                    "predicted": label_names[pred] if label_names else pred,
                    "gold": label_names[ex.label] if label_names else ex.label,
                    "skim_rate": _trace_skim_rate(trace),
                }
            else:
                start_probs, end_probs, traces = qa_attend(
                    model, ex.context_ids, ex.question_ids, policy=policy)
                s, e = answer_span(start_probs, end_probs, model.max_span)
                steps = sum(len(t) for t in traces.values())
                skims = sum(
                    1 for t in traces.values() for st in t.steps
                    if st.decision == Decision.SKIM)
                rec = {
                    "index": i,
                    "predicted_start": s, "predicted_end": e,
                    "gold_start": ex.start, "gold_end": ex.end,
                    "skim_rate": skims / steps if steps else 0.0,
                }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# sweep-threshold

def cmd_sweep_threshold(cfg: dict) -> int:
    cfg = _validate_config(cfg, _SWEEP_SCHEMA, "sweep-threshold")
    thresholds = []
    for v in cfg["thresholds"]:
        if not _is_num(v):
            raise ConfigError(f"config field 'thresholds': entries must be numbers, got {v!r}")
        v = float(v)
        if v < -1e-9 or v > 1.0 + 1e-9:
            raise ConfigError(f"config field 'thresholds': {v} outside [0, 1]")
        thresholds.append(min(max(v, 0.0), 1.0))
    if not thresholds:
        raise ConfigError("config field 'thresholds': must not be empty")
    model_path = _need_file(cfg["model_path"], "model file")
    data_path = _need_file(cfg["data_path"], "dataset")
    out = _need_out_dir(cfg)

    model, vocab, header = load_model(model_path)
    dataset, _ = _load_eval_data(model, header, data_path, vocab)
    variants = [("skim", model)]
    if cfg["include_skip"]:
        variants.append(("skip", skip_variant(model)))

    rows = []
    for mode_name, m in variants:
        for theta in thresholds:
            res = m.evaluate(dataset, policy=Threshold(theta))
            rows.append((mode_name, theta, res.metric, res.skim_rate, res.flop_r))
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("mode,theta,metric,skim_rate,flop_r\n")
        for mode_name, theta, metric, rate, flop_r in rows:
            f.write(f"{mode_name},{theta!r},{metric!r},{rate!r},{flop_r!r}\n")
    print(str(csv_path))
    return EXIT_OK


# --------------------------------------------------------------------------
# trace

def _render_token(step, color: bool) -> str:
    token = step.token if step.token is not None else "<?>"
    if step.decision == Decision.READ:
        return f"\x1b[34m{token}\x1b[0m" if color else f"[{token}]"
    return token


def cmd_trace(cfg: dict) -> int:
    cfg = _validate_config(cfg, _TRACE_SCHEMA, "trace")
    model_path = _need_file(cfg["model_path"], "model file")
    if cfg["text"] is None and cfg["input_path"] is None:
        raise ConfigError("trace needs --text or an 'input_path' config field")
    text = cfg["text"]
    if text is None:
        text = Path(_need_file(cfg["input_path"], "input file")).read_text(encoding="utf-8")
    tokens = tokenize(text)
    if not tokens:
        raise ConfigError("trace input is empty")

    model, vocab, header = load_model(model_path)
    policy = _policy_from(cfg)
    ids = vocab.encode(tokens)
    if isinstance(model, ClassifierModel):
        _, trace = classify(model, ids, policy=policy)
        trace.name = "rnn"
        for step, tok in zip(trace.steps, tokens):
            step.token = tok
        traces = {"rnn": trace}
    else:
        question = cfg["question"]
        if not question:
            raise ConfigError("tracing a qa model needs a 'question'")
        q_tokens = tokenize(question)
        if not q_tokens:
            raise ConfigError("question is empty")
        _, _, traces = qa_attend(model, ids, vocab.encode(q_tokens), policy=policy)
        for trace in traces.values():
            for step, tok in zip(trace.steps, tokens):
                step.token = tok

    records = []
    for name in sorted(traces):
        for t, step in enumerate(traces[name].steps):
            records.append({
                "layer": name, "t": t, "token": step.token,
                "decision": "read" if step.decision == Decision.READ else "skim",
                "p_read": step.p_read, "p_skim": step.p_skim,
            })
    total = len(records)
    skims = sum(1 for r in records if r["decision"] == "skim")
    aggregate = skims / total if total else 0.0

    lines = []
    for name in sorted(traces):
        rendered = " ".join(_render_token(s, cfg["color"]) for s in traces[name].steps)
        lines.append(f"{name}: {rendered}")
    lines.append(f"skim_rate: {aggregate!r}")
    rendering = "\n".join(lines)
    print(rendering)

    if cfg["out_dir"]:
        out = _need_out_dir(cfg)
        with open(out / "trace.jsonl", "w", encoding="utf-8") as f:
            for rec in records:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
        (out / "trace.txt").write_text(rendering + "\n", encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# bench and gen-data

def cmd_bench(cfg: dict) -> int:
    cfg = _validate_config(cfg, _BENCH_SCHEMA, "bench")
    configs = []
    for i, c in enumerate(cfg["configs"]):
        if not isinstance(c, dict) or set(c) != {"d_in", "d", "d_small"}:
            raise ConfigError(
                f"config field 'configs'[{i}]: needs exactly d_in, d, d_small")
        if not all(_is_int(c[k]) and c[k] >= 0 for k in c) or c["d"] < 1:
            raise ConfigError(f"config field 'configs'[{i}]: widths must be non-negative ints")
        configs.append(BenchConfig(c["d_in"], c["d"], c["d_small"]))
    if not configs:
        raise ConfigError("config field 'configs': must not be empty")
    rates = []
    for v in cfg["skim_rates"]:
        if not _is_num(v) or not 0.0 <= float(v) <= 1.0:
            raise ConfigError(f"config field 'skim_rates': {v!r} outside [0, 1]")
        rates.append(float(v))
    if not rates:
        raise ConfigError("config field 'skim_rates': must not be empty")
    out = _need_out_dir(cfg)

    report = bench_inference(configs, rates, trials=cfg["trials"],
                             warmup=cfg["warmup"], seq_len=cfg["seq_len"],
                             seed=cfg["seed"],
                             dtype=np.float32 if cfg["dtype"] == "float32" else np.float64)
    write_bench_csv(out / "bench.csv", report)
    write_bench_long_csv(out / "bench_long.csv", report)
    print(str(out / "bench.csv"))
    return EXIT_OK


def cmd_gen_data(cfg: dict) -> int:
    cfg = _validate_config(cfg, _GEN_SCHEMA, "gen-data")
    out = _need_out_dir(cfg)
    if cfg["task"] == "keyword":
        train, names = gen_keyword_task(cfg["seed"], cfg["n_train"], cfg["seq_len"],
                                        cfg["vocab_size"], cfg["n_keywords"])
        test, _ = gen_keyword_task(cfg["seed"] + 1, cfg["n_test"], cfg["seq_len"],
                                   cfg["vocab_size"], cfg["n_keywords"])
        write_classification_file(out / "train.tsv", train, names)
        write_classification_file(out / "test.tsv", test, names)
        print(str(out / "train.tsv"))
    else:
        train = gen_span_task(cfg["seed"], cfg["n_train"], cfg["context_len"],
                              cfg["vocab_size"], n_keys=cfg["n_keys"])
        test = gen_span_task(cfg["seed"] + 1, cfg["n_test"], cfg["context_len"],
                             cfg["vocab_size"], n_keys=cfg["n_keys"])
        write_span_file(out / "train.jsonl", train)
        write_span_file(out / "test.jsonl", test)
        print(str(out / "train.jsonl"))
    return EXIT_OK


# --------------------------------------------------------------------------
# driver

_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-threshold": cmd_sweep_threshold,
    "trace": cmd_trace,
    "bench": cmd_bench,
    "gen-data": cmd_gen_data,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skimrnn",
        description="Train, evaluate, benchmark and trace read-or-skim recurrent models.")
    parser.add_argument("--config", help="path to a flat JSON config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out-dir", help="override the config output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (only 1 is supported)")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _COMMANDS:
        p = sub.add_parser(verb)
        if verb in ("eval", "sweep-threshold", "trace"):
            p.add_argument("--model", dest="model_path")
            p.add_argument("--data", dest="data_path")
        if verb == "sweep-threshold":
            p.add_argument("--thresholds",
                           help="comma-separated thresholds, e.g. 0,0.1,0.5,1")
            p.add_argument("--include-skip", action="store_true", default=None)
        if verb == "trace":
            p.add_argument("--text")
            p.add_argument("--input", dest="input_path")
            p.add_argument("--question")
            p.add_argument("--color", action="store_true", default=None)
    return parser


def _effective_config(args) -> dict:
    cfg = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path}: invalid JSON ({e.msg})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path}: top level must be an object")
        cfg.update(loaded)
    for key in ("model_path", "data_path", "text", "input_path", "question"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    if getattr(args, "thresholds", None) is not None:
        try:
            cfg["thresholds"] = [float(x) for x in args.thresholds.split(",") if x != ""]
        except ValueError:
            raise ConfigError(f"--thresholds: could not parse '{args.thresholds}'") from None
    if getattr(args, "include_skip", None) is not None:
        cfg["include_skip"] = args.include_skip
    if getattr(args, "color", None) is not None:
        cfg["color"] = args.color
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out_dir is not None:
        cfg["out_dir"] = args.out_dir
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        if args.threads != 1:
            raise ConfigError("only --threads 1 is supported")
        cfg = _effective_config(args)
        return _COMMANDS[args.verb](cfg)
    except (ConfigError, ParseError, WeightFileError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, BenchmarkError, ContractError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
