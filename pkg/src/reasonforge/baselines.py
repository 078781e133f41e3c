"""Comparison data generators: few-shot CoT sampling and ground-truth-only records.

Two sampling families are implemented. The self-improvement style draws 32
few-shot CoT completions per instruction and defers filtering to the build
step (majority vote or ground truth). The rationalization style does the
same, then retries uncovered instructions with the answer appended to the
question as a hint, using the committed hint-variant exemplars.
"""

from dataclasses import dataclass

from .corpus import Instruction, extract_answer
from .pipeline import CorpusRunResult, GenerationTrace, config_digest, corpus_digest, run_id_for
from .prompts import FewShotExemplarSet, exemplar_set, render_fewshot_cot
from .transport import (
    CompletionRequest,
    FixtureMissingError,
    PermanentTransportError,
    TransportError,
    stable_seed,
)

METHOD_STAGED = "staged"
METHOD_LMSI = "lmsi"
METHOD_LMSI_GT = "lmsi_gt"
METHOD_STAR = "star"
METHOD_GT_ONLY = "gt_only"
METHODS = (METHOD_STAGED, METHOD_LMSI, METHOD_LMSI_GT, METHOD_STAR, METHOD_GT_ONLY)

DEFAULT_BASELINE_SAMPLES = 32


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    model: str
    exemplars: FewShotExemplarSet | None = None
    hint_exemplars: FewShotExemplarSet | None = None
    num_samples: int = DEFAULT_BASELINE_SAMPLES
    temperature: float = 0.85
    max_tokens: int = 2048
    run_seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method != METHOD_GT_ONLY and (
            self.exemplars is None or not self.exemplars.exemplars
        ):
            raise ValueError(f"method {self.method} requires a non-empty exemplar set")


def _sample_traces(
    instruction: Instruction,
    config: BaselineConfig,
    transport,
    exemplars: FewShotExemplarSet,
    hint: str | None,
    seed_tag: str,
) -> list[GenerationTrace]:
    prompt = render_fewshot_cot(instruction.question, exemplars, hint=hint)
    request = CompletionRequest(
        model=config.model,
        prompt=prompt,
        temperature=config.temperature,
        num_samples=config.num_samples,
        max_tokens=config.max_tokens,
        seed=stable_seed(config.run_seed, instruction.id, 0, seed_tag),
    )
    try:
        texts = transport.complete(request).texts
    except PermanentTransportError as exc:
        return [
            GenerationTrace(
                instruction_id=instruction.id,
                guideline_index=0,
                stage_mask=None,
                hint_used=hint is not None,
                reasoning_path="",
                failed=True,
                failure=str(exc),
            )
        ]
    return [
        GenerationTrace(
            instruction_id=instruction.id,
            guideline_index=0,
            stage_mask=None,
            hint_used=hint is not None,
            reasoning_path=text,
            extracted_answer=extract_answer(text, instruction.answer_kind),
        )
        for text in texts
    ]


def run_lmsi(instruction: Instruction, config: BaselineConfig, transport) -> list[GenerationTrace]:
    """32 few-shot CoT samples, no hints; filter criterion is chosen downstream."""
    return _sample_traces(instruction, config, transport, config.exemplars, None, "lmsi")


def run_star(
    instruction: Instruction, config: BaselineConfig, transport, hint_pass: bool = False
) -> list[GenerationTrace]:
    """Few-shot CoT samples; the hint pass appends the answer to the question."""
    if not hint_pass:
        return _sample_traces(instruction, config, transport, config.exemplars, None, "star")
    if config.hint_exemplars is None:
        raise ValueError(
            f"no hint-variant exemplar set available for {config.exemplars.dataset!r}"
        )
    return _sample_traces(
        instruction,
        config,
        transport,
        config.hint_exemplars,
        instruction.ground_truth,
        "star_hint",
    )


def build_gt_only(instruction: Instruction, run_id: str = "") -> dict:
    """Training record whose target is the ground-truth answer string alone."""
    return {
        "instruction": instruction.question,
        "output": instruction.ground_truth,
        "meta": {
            "method": METHOD_GT_ONLY,
            "guideline_index": None,
            "hint_used": False,
            "run_id": run_id,
        },
    }


def default_exemplars(method: str, dataset: str) -> tuple[FewShotExemplarSet | None, FewShotExemplarSet | None]:
    """Committed exemplar sets for a dataset; hint variant exists only where published."""
    if method == METHOD_GT_ONLY:
        return None, None
    if method == METHOD_STAR:
        base = exemplar_set(f"{dataset}_star")
        try:
            hints = exemplar_set(f"{dataset}_star_hints")
        except KeyError:
            hints = None
        return base, hints
    return exemplar_set(dataset), None


def run_corpus_baseline(
    corpus: list[Instruction],
    config: BaselineConfig,
    transport,
    corpus_name: str = "",
) -> CorpusRunResult:
    """Corpus-level driver producing the shared trace-store shape."""
    from . import __version__
    from .filtering import filter_ground_truth

    failures: list[dict] = []
    first_pass: list[GenerationTrace] = []
    uncovered: list[Instruction] = []

    for instruction in corpus:
        if config.method == METHOD_GT_ONLY:
            break
        try:
            if config.method == METHOD_STAR:
                traces = run_star(instruction, config, transport, hint_pass=False)
            else:
                traces = run_lmsi(instruction, config, transport)
        except FixtureMissingError:
            raise
        except TransportError as exc:
            failures.append({"instruction_id": instruction.id, "error": str(exc)})
            continue
        first_pass.extend(traces)
        if config.method == METHOD_STAR:
            verdicts = filter_ground_truth(traces, instruction)
            if not any(v.correct for v in verdicts):
                uncovered.append(instruction)

    retry: list[GenerationTrace] = []
    for instruction in uncovered:
        try:
            retry.extend(run_star(instruction, config, transport, hint_pass=True))
        except FixtureMissingError:
            raise
        except TransportError as exc:
            failures.append({"instruction_id": instruction.id, "error": str(exc)})

    cfg_digest = config_digest(
        {
            "method": config.method,
            "model": config.model,
            "run_seed": config.run_seed,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "num_samples": config.num_samples,
            "exemplar_set": config.exemplars.dataset if config.exemplars else None,
        }
    )
    corp_digest = corpus_digest(corpus)
    run_id = run_id_for(cfg_digest, corp_digest, config.run_seed)
    manifest = {
        "run_id": run_id,
        "method": config.method,
        "mask": None,
        "model": config.model,
        "run_seed": config.run_seed,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "corpus_name": corpus_name,
        "corpus_digest": corp_digest,
        "config_digest": cfg_digest,
        "tool_version": __version__,
        "instruction_count": len(corpus),
        "first_pass_traces": len(first_pass),
        "retry_traces": len(retry),
        "uncovered_ids": [i.id for i in uncovered],
        "failures": failures,
    }
    return CorpusRunResult(traces=first_pass + retry, manifest=manifest)
