"""Multi-teacher knowledge distillation for learning-to-rank.

Teacher logits are combined per query group, either by plain averaging or by
a label-guided iterative reweighting that fixes reversed pairs; the combined
logits then serve as regression targets when training a small student scorer.
Includes ranking metrics (PNR, DCG, interleaving and side-by-side deltas),
a synthetic dataset generator, deterministic JSONL persistence, and an
end-to-end benchmark harness.
"""

from pilekd._core import (
    MAX_GRADE,
    MIN_GRADE,
    AlignmentError,
    Architecture,
    BenchConfig,
    BenchResult,
    ConfigError,
    Dataset,
    DocEntry,
    EnsembleOutput,
    EnsembleState,
    Error,
    GainScheme,
    GroundTruth,
    InvalidInputError,
    InvalidStateError,
    IoError,
    MetricReport,
    PairPolicy,
    ParseError,
    PileConfig,
    QueryGroup,
    QueryScores,
    RelevanceLabel,
    Rng,
    StopPolicy,
    StudentParams,
    SweepRow,
    SynthConfig,
    System,
    TeacherMode,
    TeacherResult,
    TrainConfig,
    TrainLog,
    TrainResult,
    TrainingError,
    ValidationError,
    ValidationIssue,
    WeightMatrix,
    apply_label_noise,
    average_ensemble,
    count_reversed_pairs,
    dcg,
    delta_ab,
    delta_gsb,
    derive_seed,
    gains_from_labels,
    gen_ground_truth,
    gradient,
    init_params,
    is_reversed_pair,
    make_teachers,
    mean_pnr_of,
    pile_ensemble,
    pnr_mean,
    pnr_query,
    read_ensemble,
    read_groups,
    read_model,
    read_report,
    require_valid,
    run_benchmark,
    run_sweep,
    score,
    score_dataset,
    total_loss,
    train,
    validate_config,
    validate_dataset,
    write_ensemble,
    write_groups,
    write_model,
    write_report,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
