"""Single-thread CPU latency benchmark: skim-unit loops vs an always-read
standard LSTM, over a grid of widths and forced skim rates.

Decisions are pre-drawn to hit each requested skim rate exactly, so the
timings isolate kernel cost from policy variance; the decision network is
still evaluated every step because the skim model always pays that cost.
BLAS pools are pinned to one thread for the duration of a run and verified.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from .cell import Decision
from .flops import SkimDims, flops_lstm_step, flops_skim_step
from .kernels import LstmKernel, UnitKernel
from .tensor import ContractError

MIN_TRIALS = 30
MIN_WARMUP = 5


class BenchmarkError(RuntimeError):
    """The benchmark could not produce trustworthy numbers."""


@dataclass(frozen=True)
class BenchConfig:
    d_in: int
    d: int
    d_small: int


@dataclass
class BenchRow:
    d_in: int
    d: int
    d_small: int
    skim_rate: float
    actual_skim_rate: float
    median_us_per_token: float
    baseline_us_per_token: float
    speedup: float
    speedup_mad: float
    flop_r_bound: float


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    trials: int = 0
    warmup: int = 0
    seq_len: int = 0
    dtype: str = "float64"


def _timer_resolution() -> float:
    best = float("inf")
    for _ in range(50):
        t0 = time.perf_counter()
        t1 = time.perf_counter()
        while t1 == t0:
            t1 = time.perf_counter()
        best = min(best, t1 - t0)
    return best


def forced_pattern(rng: np.random.Generator, seq_len: int, rate: float):
    """Decision sequence with round(rate * seq_len) skims, shuffled."""
    n_skim = int(round(rate * seq_len))
    pattern = [Decision.SKIM] * n_skim + [Decision.READ] * (seq_len - n_skim)
    rng.shuffle(pattern)
    return pattern


def _verify_single_thread() -> None:
    for pool in threadpool_info():
        if pool.get("num_threads", 1) != 1:
            raise BenchmarkError(
                f"{pool.get('internal_api')} pool is using {pool['num_threads']} threads; "
                "benchmark requires exactly one")


def _time_loop(fn, trials: int, warmup: int):
    for _ in range(warmup):
        fn()
    samples = np.empty(trials)
    for i in range(trials):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    return samples


def bench_inference(configs, skim_rates, trials: int = 50, warmup: int = 10,
                    seq_len: int = 100, seed: int = 0,
                    dtype=np.float64) -> BenchReport:
    """Median per-token latency, speedup vs always-read, and the flop-ratio
    upper bound, for every (config, skim rate) pair."""
    if trials < MIN_TRIALS:
        raise ContractError(f"need at least {MIN_TRIALS} trials, got {trials}")
    if warmup < MIN_WARMUP:
        raise ContractError(f"need at least {MIN_WARMUP} warmup runs, got {warmup}")
    rng = np.random.default_rng(seed)
    resolution = _timer_resolution()
    report = BenchReport(trials=trials, warmup=warmup, seq_len=seq_len,
                         dtype=np.dtype(dtype).name)
    with threadpool_limits(limits=1):
        _verify_single_thread()
        for cfg in configs:
            unit, baseline, xs = _build_kernels(rng, cfg, seq_len, dtype)

            def run_baseline():
                h, c = baseline.zero_state()
                for x in xs:
                    h, c = baseline.step(x, h, c)

            base_samples = _time_loop(run_baseline, trials, warmup)
            base_median = float(np.median(base_samples))
            _check_resolution(base_median, resolution, seq_len)

            for rate in skim_rates:
                pattern = forced_pattern(rng, seq_len, rate)

                def run_skim(pattern=pattern):
                    h, c = unit.zero_state()
                    for x, d in zip(xs, pattern):
                        unit.probs(x, h)
                        h, c = unit.step(x, h, c, d)

                samples = _time_loop(run_skim, trials, warmup)
                median = float(np.median(samples))
                _check_resolution(median, resolution, seq_len)
                speedups = base_median / samples
                speedup = base_median / median
                mad = float(np.median(np.abs(speedups - np.median(speedups))))
                dims = SkimDims(cfg.d_in, cfg.d, cfg.d_small)
                std_flops = seq_len * flops_lstm_step(cfg.d_in, cfg.d, cfg.d)
                skim_flops = sum(flops_skim_step(dims, d) for d in pattern)
                n_skims = sum(1 for d in pattern if d == Decision.SKIM)
                report.rows.append(BenchRow(
                    d_in=cfg.d_in, d=cfg.d, d_small=cfg.d_small,
                    skim_rate=rate,
                    actual_skim_rate=n_skims / seq_len,
                    median_us_per_token=median / seq_len * 1e6,
                    baseline_us_per_token=base_median / seq_len * 1e6,
                    speedup=speedup,
                    speedup_mad=mad,
                    flop_r_bound=std_flops / skim_flops,
                ))
    return report


def _build_kernels(rng, cfg: BenchConfig, seq_len: int, dtype):
    def uniform(shape, fan_in):
        s = 1.0 / np.sqrt(max(fan_in, 1))
        return rng.uniform(-s, s, size=shape)

    d_in, d, ds = cfg.d_in, cfg.d, cfg.d_small
    big_w = uniform((4 * d, d_in + d), d_in + d)
    big_b = np.zeros(4 * d)
    small_w = uniform((4 * ds, d_in + d), d_in + d)
    small_b = np.zeros(4 * ds)
    dec_w = uniform((2, d_in + d), d_in + d)
    dec_b = np.zeros(2)
    unit = UnitKernel(big_w, big_b, small_w, small_b, dec_w, dec_b,
                      d_in, d, ds, dtype=dtype)
    baseline = LstmKernel(big_w, big_b, d_in, d, dtype=dtype)
    xs = [np.asarray(rng.standard_normal(d_in), dtype=dtype) for _ in range(seq_len)]
    return unit, baseline, xs


def _check_resolution(median_seconds: float, resolution: float, seq_len: int) -> None:
    if median_seconds < 200.0 * resolution:
        raise BenchmarkError(
            f"trial time {median_seconds:.2e}s too close to timer resolution "
            f"{resolution:.2e}s; rerun with a longer sequence than {seq_len}")


BENCH_COLUMNS = ["d_in", "d", "d_small", "skim_rate", "actual_skim_rate",
                 "median_us_per_token", "baseline_us_per_token", "speedup",
                 "speedup_mad", "flop_r_bound"]


def write_bench_csv(path, report: BenchReport) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(BENCH_COLUMNS) + "\n")
        for row in report.rows:
            f.write(",".join(repr(getattr(row, c)) if isinstance(getattr(row, c), float)
                             else str(getattr(row, c)) for c in BENCH_COLUMNS) + "\n")


def write_bench_long_csv(path, report: BenchReport) -> None:
    """Plot-ready long format: one (config, skim_rate, metric, value) per line."""
    metrics = ["median_us_per_token", "baseline_us_per_token", "speedup",
               "speedup_mad", "flop_r_bound"]
    with open(path, "w", encoding="utf-8") as f:
        f.write("config,skim_rate,metric,value\n")
        for row in report.rows:
            config = f"d_in={row.d_in};d={row.d};d_small={row.d_small}"
            for m in metrics:
                f.write(f"{config},{row.skim_rate!r},{m},{getattr(row, m)!r}\n")
