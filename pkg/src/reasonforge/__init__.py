"""Self-synthesized reasoning-path training data, from corpus to dataset.

The package turns an instruction/answer corpus into fine-tuning data by
adapting seed reasoning guidelines to each task, expanding them into
stepwise structures, generating full reasoning paths, and keeping only the
paths whose extracted answers survive ground-truth or majority-vote
filtering. An evaluation harness and a guideline-preference analysis round
out the toolkit; everything runs against a live endpoint or a recorded
replay store.
"""

__version__ = "0.1.0"

from .corpus import (
    ANSWER_KINDS,
    BOOLEAN,
    FREEFORM,
    MULTIPLE_CHOICE,
    NUMERIC,
    CorpusError,
    CorpusManifest,
    Instruction,
    NormalizationError,
    NormalizedAnswer,
    exact_match,
    extract_answer,
    extract_marked_answer,
    load_corpus,
    load_manifest,
    normalize_answer,
    write_corpus,
)
from .prompts import (
    FewShotExemplarSet,
    RenderedPrompt,
    SeedGuideline,
    exemplar_set,
    render_adaptation,
    render_cot_eval,
    render_fewshot_cot,
    render_path,
    render_structure,
    seed_guidelines,
)
from .transport import (
    CachingTransport,
    CompletionRequest,
    CompletionResponse,
    FixtureMissingError,
    FixtureStore,
    HttpTransport,
    PermanentTransportError,
    ReplayTransport,
    RetryableTransportError,
    TransportError,
    request_digest,
    stable_seed,
)
from .pipeline import (
    MASK_A_P,
    MASK_A_S_HINT_P,
    MASK_A_S_P,
    MASK_S_P,
    STAGE_MASKS,
    CorpusRunResult,
    GenerationSettings,
    GenerationTrace,
    hint_retry,
    parse_stage_mask,
    read_run,
    read_traces,
    run_corpus,
    run_staged_generation,
    write_run,
    write_traces,
)
from .baselines import (
    METHOD_GT_ONLY,
    METHOD_LMSI,
    METHOD_LMSI_GT,
    METHOD_STAGED,
    METHOD_STAR,
    METHODS,
    BaselineConfig,
    build_gt_only,
    run_corpus_baseline,
    run_lmsi,
    run_star,
)
from .evaluation import (
    EVAL_PROTOCOLS,
    PROTOCOL_COT,
    PROTOCOL_COT_3SHOT,
    PROTOCOL_SELF_CONSISTENCY,
    EvalConfig,
    EvalItem,
    EvalOutcome,
    evaluate,
    majority_answer,
    write_eval_outcome,
)
from .filtering import (
    CRITERION_GROUND_TRUTH,
    CRITERION_MAJORITY_VOTE,
    FILTER_CRITERIA,
    CorpusStats,
    EmptyVoteError,
    FilterVerdict,
    TrainingRecord,
    build_training_set,
    filter_corpus,
    filter_ground_truth,
    filter_majority_vote,
    mix_datasets,
    read_training_records,
    subsample,
    training_target,
    write_training_records,
)
from .analysis import (
    GuidelineStats,
    analysis_report,
    guideline_distribution,
    guideline_stats,
    guideline_success_rates,
    top_discrepancy,
    zscore,
)

__all__ = [
    "__version__",
    # corpus
    "ANSWER_KINDS",
    "NUMERIC",
    "MULTIPLE_CHOICE",
    "BOOLEAN",
    "FREEFORM",
    "CorpusError",
    "NormalizationError",
    "NormalizedAnswer",
    "Instruction",
    "CorpusManifest",
    "load_manifest",
    "load_corpus",
    "write_corpus",
    "normalize_answer",
    "extract_answer",
    "extract_marked_answer",
    "exact_match",
    # prompts
    "SeedGuideline",
    "RenderedPrompt",
    "FewShotExemplarSet",
    "seed_guidelines",
    "exemplar_set",
    "render_adaptation",
    "render_structure",
    "render_path",
    "render_cot_eval",
    "render_fewshot_cot",
    # transport
    "TransportError",
    "RetryableTransportError",
    "PermanentTransportError",
    "FixtureMissingError",
    "CompletionRequest",
    "CompletionResponse",
    "request_digest",
    "stable_seed",
    "FixtureStore",
    "ReplayTransport",
    "CachingTransport",
    "HttpTransport",
    # pipeline
    "MASK_A_S_P",
    "MASK_A_P",
    "MASK_S_P",
    "MASK_A_S_HINT_P",
    "STAGE_MASKS",
    "parse_stage_mask",
    "GenerationSettings",
    "GenerationTrace",
    "CorpusRunResult",
    "run_staged_generation",
    "hint_retry",
    "run_corpus",
    "write_traces",
    "read_traces",
    "write_run",
    "read_run",
    # baselines
    "METHODS",
    "METHOD_STAGED",
    "METHOD_LMSI",
    "METHOD_LMSI_GT",
    "METHOD_STAR",
    "METHOD_GT_ONLY",
    "BaselineConfig",
    "run_lmsi",
    "run_star",
    "build_gt_only",
    "run_corpus_baseline",
    # evaluation
    "EVAL_PROTOCOLS",
    "PROTOCOL_COT",
    "PROTOCOL_COT_3SHOT",
    "PROTOCOL_SELF_CONSISTENCY",
    "EvalConfig",
    "EvalItem",
    "EvalOutcome",
    "majority_answer",
    "evaluate",
    "write_eval_outcome",
    # filtering
    "FILTER_CRITERIA",
    "CRITERION_GROUND_TRUTH",
    "CRITERION_MAJORITY_VOTE",
    "EmptyVoteError",
    "FilterVerdict",
    "TrainingRecord",
    "CorpusStats",
    "filter_ground_truth",
    "filter_majority_vote",
    "filter_corpus",
    "subsample",
    "training_target",
    "build_training_set",
    "mix_datasets",
    "write_training_records",
    "read_training_records",
    # analysis
    "GuidelineStats",
    "guideline_success_rates",
    "zscore",
    "top_discrepancy",
    "guideline_distribution",
    "guideline_stats",
    "analysis_report",
]
