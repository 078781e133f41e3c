"""Three-stage reasoning-path generation over a corpus.

Each instruction is expanded guideline by guideline: adapt the guideline to
the task, turn it into a stepwise structure, then solve. Instructions left
with no correct path after ground-truth filtering get one retry pass with the
answer injected as a hint (adapt and structure stages only, unless the
hint-everywhere ablation mask is active).
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .corpus import Instruction, NormalizedAnswer, extract_answer
from .prompts import (
    HINT_SUFFIX,
    SeedGuideline,
    render_adaptation,
    render_path,
    render_structure,
    seed_guidelines,
)
from .transport import (
    CompletionRequest,
    FixtureMissingError,
    PermanentTransportError,
    TransportError,
    stable_seed,
)

MASK_A_S_P = "A_S_P"
MASK_A_P = "A_P"
MASK_S_P = "S_P"
MASK_A_S_HINT_P = "A_S_hint_P"
STAGE_MASKS = (MASK_A_S_P, MASK_A_P, MASK_S_P, MASK_A_S_HINT_P)

_MASK_ALIASES = {
    "a+s+p": MASK_A_S_P,
    "a+p": MASK_A_P,
    "s+p": MASK_S_P,
    "a+s+p-hint": MASK_A_S_HINT_P,
}


def parse_stage_mask(value: str) -> str:
    """Accept CLI spellings (a+s+p, s+p, ...) as well as canonical mask names."""
    if value in STAGE_MASKS:
        return value
    try:
        return _MASK_ALIASES[value.lower()]
    except KeyError:
        raise ValueError(
            f"unknown stage mask {value!r}; expected one of {', '.join(_MASK_ALIASES)}"
        ) from None


@dataclass(frozen=True)
class GenerationSettings:
    model: str
    temperature: float = 0.85
    max_tokens: int = 2048
    run_seed: int = 0
    concurrency: int = 4
    guidelines: tuple[SeedGuideline, ...] | None = None

    def active_guidelines(self) -> tuple[SeedGuideline, ...]:
        return self.guidelines if self.guidelines is not None else seed_guidelines()


@dataclass(frozen=True)
class GenerationTrace:
    instruction_id: str
    guideline_index: int
    stage_mask: str | None
    hint_used: bool
    reasoning_path: str
    adapted_guideline: str | None = None
    reasoning_structure: str | None = None
    extracted_answer: NormalizedAnswer | None = None
    failed: bool = False
    failure: str | None = None


def trace_to_dict(trace: GenerationTrace) -> dict:
    answer = trace.extracted_answer
    return {
        "instruction_id": trace.instruction_id,
        "guideline_index": trace.guideline_index,
        "stage_mask": trace.stage_mask,
        "hint_used": trace.hint_used,
        "failed": trace.failed,
        "failure": trace.failure,
        "adapted_guideline": trace.adapted_guideline,
        "reasoning_structure": trace.reasoning_structure,
        "reasoning_path": trace.reasoning_path,
        "extracted_answer": None
        if answer is None
        else {"kind": answer.kind, "canonical": answer.canonical},
    }


def trace_from_dict(record: dict) -> GenerationTrace:
    answer = record["extracted_answer"]
    return GenerationTrace(
        instruction_id=record["instruction_id"],
        guideline_index=record["guideline_index"],
        stage_mask=record["stage_mask"],
        hint_used=record["hint_used"],
        failed=record["failed"],
        failure=record["failure"],
        adapted_guideline=record["adapted_guideline"],
        reasoning_structure=record["reasoning_structure"],
        reasoning_path=record["reasoning_path"],
        extracted_answer=None if answer is None else NormalizedAnswer(**answer),
    )


def _attempt(
    instruction: Instruction,
    guideline: SeedGuideline,
    mask: str,
    hint: str | None,
    transport,
    settings: GenerationSettings,
) -> GenerationTrace:
    """Run the staged calls for one (instruction, guideline) pair."""
    adapted: str | None = None
    structure: str | None = None
    base = dict(
        instruction_id=instruction.id,
        guideline_index=guideline.index,
        stage_mask=mask,
        hint_used=hint is not None,
    )

    def ask(prompt, stage_tag: str) -> str:
        request = CompletionRequest(
            model=settings.model,
            prompt=prompt,
            temperature=settings.temperature,
            num_samples=1,
            max_tokens=settings.max_tokens,
            seed=stable_seed(settings.run_seed, instruction.id, guideline.index, stage_tag),
        )
        return transport.complete(request).texts[0]

    try:
        if mask != MASK_S_P:
            adapted = ask(render_adaptation(instruction.question, guideline, hint), "adapt")
        if mask != MASK_A_P:
            structure_input = adapted if adapted is not None else guideline.text
            structure = ask(render_structure(instruction.question, structure_input, hint), "structure")
        path_input = structure if structure is not None else adapted
        # hint-everywhere ablation: the hint rides in the question text, the
        # path template itself has no hint slot
        if hint is not None and mask == MASK_A_S_HINT_P:
            path_question = instruction.question + HINT_SUFFIX.format(hint=hint)
        else:
            path_question = instruction.question
        path = ask(render_path(path_question, path_input), "path")
    except PermanentTransportError as exc:
        return GenerationTrace(
            **base,
            reasoning_path="",
            adapted_guideline=adapted,
            reasoning_structure=structure,
            failed=True,
            failure=str(exc),
        )

    return GenerationTrace(
        **base,
        reasoning_path=path,
        adapted_guideline=adapted,
        reasoning_structure=structure,
        extracted_answer=extract_answer(path, instruction.answer_kind),
    )


def run_staged_generation(
    instruction: Instruction,
    *,
    transport,
    settings: GenerationSettings,
    mask: str = MASK_A_S_P,
    hint: str | None = None,
) -> list[GenerationTrace]:
    """One trace per seed guideline, in guideline order."""
    if mask not in STAGE_MASKS:
        raise ValueError(f"unknown stage mask {mask!r}")
    return [
        _attempt(instruction, guideline, mask, hint, transport, settings)
        for guideline in settings.active_guidelines()
    ]


def hint_retry(
    uncovered: list[Instruction],
    *,
    transport,
    settings: GenerationSettings,
    mask: str = MASK_A_S_P,
) -> list[GenerationTrace]:
    """Rerun generation for instructions with no correct path, ground truth as hint."""
    traces: list[GenerationTrace] = []
    for instruction in uncovered:
        traces.extend(
            run_staged_generation(
                instruction,
                transport=transport,
                settings=settings,
                mask=mask,
                hint=instruction.ground_truth,
            )
        )
    return traces


def _has_correct_trace(instruction: Instruction, traces: list[GenerationTrace]) -> bool:
    from .filtering import filter_ground_truth

    verdicts = filter_ground_truth(traces, instruction)
    return any(v.correct for v in verdicts)


@dataclass
class CorpusRunResult:
    traces: list[GenerationTrace]
    manifest: dict


def corpus_digest(corpus: list[Instruction]) -> str:
    blob = json.dumps(
        [
            {"id": i.id, "question": i.question, "answer": i.ground_truth, "kind": i.answer_kind}
            for i in corpus
        ],
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def config_digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def run_id_for(cfg_digest: str, corp_digest: str, run_seed: int) -> str:
    """Short stable identifier: same config, corpus and seed give the same id."""
    return hashlib.sha256((cfg_digest + corp_digest + str(run_seed)).encode("utf-8")).hexdigest()[:12]


def run_corpus(
    corpus: list[Instruction],
    *,
    transport,
    settings: GenerationSettings,
    mask: str = MASK_A_S_P,
    method: str = "staged",
    corpus_name: str = "",
    enable_hint_retry: bool = True,
) -> CorpusRunResult:
    """First pass over every instruction, then a single hint pass over the uncovered."""
    from . import __version__

    failures: list[dict] = []
    by_instruction: dict[int, list[GenerationTrace]] = {}

    def generate(idx: int) -> None:
        instruction = corpus[idx]
        try:
            by_instruction[idx] = run_staged_generation(
                instruction, transport=transport, settings=settings, mask=mask
            )
        except FixtureMissingError:
            raise
        except TransportError as exc:
            failures.append({"instruction_id": instruction.id, "error": str(exc)})
            by_instruction[idx] = []

    with ThreadPoolExecutor(max_workers=max(1, settings.concurrency)) as pool:
        list(pool.map(generate, range(len(corpus))))

    first_pass: list[GenerationTrace] = []
    uncovered: list[Instruction] = []
    for idx, instruction in enumerate(corpus):
        traces = by_instruction.get(idx, [])
        first_pass.extend(traces)
        if traces and enable_hint_retry and not _has_correct_trace(instruction, traces):
            uncovered.append(instruction)

    retry = (
        hint_retry(uncovered, transport=transport, settings=settings, mask=mask)
        if uncovered
        else []
    )

    cfg_digest = config_digest(
        {
            "method": method,
            "mask": mask,
            "model": settings.model,
            "run_seed": settings.run_seed,
            "temperature": settings.temperature,
            "max_tokens": settings.max_tokens,
        }
    )
    corp_digest = corpus_digest(corpus)
    run_id = run_id_for(cfg_digest, corp_digest, settings.run_seed)
    # failures were appended from worker threads; order them canonically
    failures.sort(key=lambda f: f["instruction_id"])
    manifest = {
        "run_id": run_id,
        "method": method,
        "mask": mask,
        "model": settings.model,
        "run_seed": settings.run_seed,
        "temperature": settings.temperature,
        "max_tokens": settings.max_tokens,
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


def write_traces(path: str | Path, traces: list[GenerationTrace]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace_to_dict(trace), ensure_ascii=False) + "\n")


def read_traces(path: str | Path) -> list[GenerationTrace]:
    traces = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                traces.append(trace_from_dict(json.loads(line)))
    return traces


def write_run(out_dir: str | Path, result: CorpusRunResult) -> Path:
    """Persist traces.jsonl plus manifest.json; returns the output directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_traces(out / "traces.jsonl", result.traces)
    (out / "manifest.json").write_text(
        json.dumps(result.manifest, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    return out


def read_run(store_dir: str | Path) -> CorpusRunResult:
    store = Path(store_dir)
    traces = read_traces(store / "traces.jsonl")
    manifest = json.loads((store / "manifest.json").read_text(encoding="utf-8"))
    return CorpusRunResult(traces=traces, manifest=manifest)


__all__ = [
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
    "corpus_digest",
    "config_digest",
    "run_id_for",
    "trace_to_dict",
    "trace_from_dict",
    "write_traces",
    "read_traces",
    "write_run",
    "read_run",
]
