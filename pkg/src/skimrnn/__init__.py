"""skimrnn: recurrent units that read or skim each token.

A skim unit pairs a big LSTM cell with a small one behind a learned 2-way
decision. Reading updates the full hidden state; skimming updates only the
first few components and carries the rest through, cutting per-token float
operations. Training relaxes the hard decision with Gumbel-softmax weights
so everything stays differentiable; inference takes hard decisions whose
aggressiveness can be tuned with a probability threshold.
"""

from .bench import BenchConfig, BenchReport, bench_inference
from .cell import (
    Argmax,
    Decision,
    Forced,
    LstmParams,
    Sample,
    SkimState,
    SkimUnitParams,
    StepOutcome,
    TemperatureSchedule,
    Threshold,
    decision_probs,
    gumbel_sample,
    gumbel_softmax,
    init_lstm_params,
    init_skim_unit,
    lstm_step,
    skim_step_hard,
    skim_step_relaxed,
    temperature,
)
from .data import (
    LabeledExample,
    SpanExample,
    Vocab,
    gen_keyword_task,
    gen_span_task,
    load_embeddings,
    parse_classification_file,
    parse_span_file,
    tokenize,
)
from .flops import (
    FlopLedger,
    SkimDims,
    flop_reduction,
    flops_lstm_step,
    flops_skim_step,
    skim_rate,
)
from .models import (
    ClassifierModel,
    HardMode,
    QaAttentionModel,
    RelaxedMode,
    SkimUnit,
    StandardUnit,
    answer_span,
    classify,
    qa_attend,
)
from .tensor import ContractError, DimensionError, DomainError, Tape, Tensor, backward
from .trace import DecisionTrace, TraceStep
from .training import (
    TrainConfig,
    TrainingError,
    expected_loss_bruteforce,
    monte_carlo_expected_loss,
    skim_loss,
    train,
)

__version__ = "0.1.0"
