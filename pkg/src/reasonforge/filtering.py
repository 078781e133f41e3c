"""Correctness filtering, subsampling, training-set construction, mixing.

Traces pass either a ground-truth filter (exact match against the corpus
answer) or a majority-vote filter (exact match against the modal extracted
answer). Up to p correct paths per instruction are kept, uniformly at random
but deterministic under the seed. Incorrect traces stay in the trace store;
they simply never reach the training set.
"""

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import Instruction, NormalizedAnswer, exact_match, extract_marked_answer, normalize_answer
from .evaluation import majority_answer
from .pipeline import GenerationTrace
from .transport import stable_seed

CRITERION_GROUND_TRUTH = "ground_truth"
CRITERION_MAJORITY_VOTE = "majority_vote"
FILTER_CRITERIA = (CRITERION_GROUND_TRUTH, CRITERION_MAJORITY_VOTE)

DEFAULT_SUBSAMPLE_P = 5

# Per-dataset draw sizes by mixture arity; totals 7000 / 6999 / 7000.
MIX_DRAWS = {2: 3500, 3: 2333, 4: 1750}


class EmptyVoteError(ValueError):
    """Majority vote requested over traces with zero extracted answers."""


@dataclass(frozen=True)
class FilterVerdict:
    trace: GenerationTrace
    correct: bool
    criterion: str
    modal_answer: NormalizedAnswer | None = None


@dataclass(frozen=True)
class TrainingRecord:
    instruction: str
    output: str
    method: str
    guideline_index: int | None
    hint_used: bool
    run_id: str


@dataclass(frozen=True)
class CorpusStats:
    instruction_count: int
    covered_before_hint: int
    covered_after_hint: int
    coverage_before_hint: float
    coverage_after_hint: float
    per_guideline_correct: dict[int, int]

    def __post_init__(self):
        if not 0 <= self.coverage_before_hint <= self.coverage_after_hint <= 1:
            raise ValueError(
                "coverage must satisfy 0 <= before <= after <= 1, got "
                f"{self.coverage_before_hint} / {self.coverage_after_hint}"
            )


def filter_ground_truth(traces: list[GenerationTrace], instruction: Instruction) -> list[FilterVerdict]:
    """Correct iff the extracted answer exact-matches ground truth; no extraction, no credit."""
    truth = normalize_answer(instruction.ground_truth, instruction.answer_kind)
    verdicts = []
    for trace in traces:
        if trace.instruction_id != instruction.id:
            raise ValueError(
                f"trace for {trace.instruction_id!r} filtered against {instruction.id!r}"
            )
        answer = trace.extracted_answer
        correct = answer is not None and exact_match(answer, truth)
        verdicts.append(FilterVerdict(trace, correct, CRITERION_GROUND_TRUTH))
    return verdicts


def filter_majority_vote(traces: list[GenerationTrace]) -> list[FilterVerdict]:
    """Correct iff the extracted answer matches the modal answer over the trace set."""
    modal = majority_answer([trace.extracted_answer for trace in traces])
    if modal is None:
        raise EmptyVoteError("no trace has an extracted answer; nothing to vote on")
    return [
        FilterVerdict(
            trace,
            trace.extracted_answer is not None and exact_match(trace.extracted_answer, modal),
            CRITERION_MAJORITY_VOTE,
            modal_answer=modal,
        )
        for trace in traces
    ]


def filter_corpus(
    traces: list[GenerationTrace], corpus: list[Instruction], criterion: str
) -> list[FilterVerdict]:
    """Verdicts for a whole trace store, canonical order preserved.

    Under majority vote, an instruction whose traces all lack extracted
    answers yields all-incorrect verdicts instead of raising; the per
    instruction :func:`filter_majority_vote` keeps its strict contract.
    """
    if criterion not in FILTER_CRITERIA:
        raise ValueError(f"unknown filter criterion {criterion!r}")
    by_id: dict[str, list[GenerationTrace]] = {}
    for trace in traces:
        by_id.setdefault(trace.instruction_id, []).append(trace)
    known = {instruction.id for instruction in corpus}
    unknown = sorted(set(by_id) - known)
    if unknown:
        raise ValueError(f"traces reference instructions not in corpus: {unknown[:5]}")

    verdicts: list[FilterVerdict] = []
    for instruction in corpus:
        group = by_id.get(instruction.id, [])
        if not group:
            continue
        if criterion == CRITERION_GROUND_TRUTH:
            verdicts.extend(filter_ground_truth(group, instruction))
        else:
            try:
                verdicts.extend(filter_majority_vote(group))
            except EmptyVoteError:
                verdicts.extend(
                    FilterVerdict(trace, False, CRITERION_MAJORITY_VOTE) for trace in group
                )
    return verdicts


def subsample(items: list, p: int, seed: int) -> list:
    """min(p, n) items uniformly without replacement, original order preserved."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if len(items) <= p:
        return list(items)
    rng = random.Random(seed)
    keep = sorted(rng.sample(range(len(items)), p))
    return [items[i] for i in keep]


def training_target(trace: GenerationTrace) -> str:
    """Path text verbatim; the canonical answer is appended only when no marker carries it."""
    answer = trace.extracted_answer
    if answer is None:
        raise ValueError("trace has no extracted answer; it cannot become a training target")
    if extract_marked_answer(trace.reasoning_path, answer.kind) is not None:
        return trace.reasoning_path
    return f"{trace.reasoning_path}\nFinal Answer: {answer.canonical}"


def build_training_set(
    verdicts: list[FilterVerdict],
    corpus: list[Instruction],
    *,
    p: int = DEFAULT_SUBSAMPLE_P,
    seed: int = 0,
    method: str = "staged",
    run_id: str = "",
) -> tuple[list[TrainingRecord], CorpusStats]:
    """Up to p correct paths per instruction, plus coverage statistics over both passes."""
    by_id: dict[str, list[FilterVerdict]] = {}
    for verdict in verdicts:
        by_id.setdefault(verdict.trace.instruction_id, []).append(verdict)
    known = {instruction.id for instruction in corpus}
    unknown = sorted(set(by_id) - known)
    if unknown:
        raise ValueError(f"verdicts reference instructions not in corpus: {unknown[:5]}")

    records: list[TrainingRecord] = []
    covered_before = 0
    covered_after = 0
    per_guideline: dict[int, int] = {}
    for instruction in corpus:
        group = by_id.get(instruction.id, [])
        correct = [v for v in group if v.correct]
        if any(not v.trace.hint_used for v in correct):
            covered_before += 1
        if correct:
            covered_after += 1
        for verdict in correct:
            index = verdict.trace.guideline_index
            per_guideline[index] = per_guideline.get(index, 0) + 1
        chosen = subsample(correct, p, stable_seed(seed, instruction.id, "subsample"))
        for verdict in chosen:
            records.append(
                TrainingRecord(
                    instruction=instruction.question,
                    output=training_target(verdict.trace),
                    method=method,
                    guideline_index=verdict.trace.guideline_index,
                    hint_used=verdict.trace.hint_used,
                    run_id=run_id,
                )
            )

    total = len(corpus)
    stats = CorpusStats(
        instruction_count=total,
        covered_before_hint=covered_before,
        covered_after_hint=covered_after,
        coverage_before_hint=covered_before / total if total else 0.0,
        coverage_after_hint=covered_after / total if total else 0.0,
        per_guideline_correct=dict(sorted(per_guideline.items())),
    )
    return records, stats


def mix_datasets(
    datasets: list[tuple[str, list[TrainingRecord]]], k: int, seed: int
) -> list[TrainingRecord]:
    """Fixed per-dataset draws (3500/2333/1750 for k=2/3/4), shuffled deterministically."""
    if k not in MIX_DRAWS:
        raise ValueError(f"k must be one of {sorted(MIX_DRAWS)}, got {k}")
    if len(datasets) != k:
        raise ValueError(f"expected {k} datasets, got {len(datasets)}")
    draw = MIX_DRAWS[k]
    rng = random.Random(seed)
    mixed: list[TrainingRecord] = []
    for name, records in datasets:
        if len(records) < draw:
            raise ValueError(
                f"dataset {name!r} has {len(records)} records, needs at least {draw}"
            )
        keep = sorted(rng.sample(range(len(records)), draw))
        mixed.extend(records[i] for i in keep)
    rng.shuffle(mixed)
    return mixed


def record_to_dict(record: TrainingRecord) -> dict:
    return {
        "instruction": record.instruction,
        "output": record.output,
        "meta": {
            "method": record.method,
            "guideline_index": record.guideline_index,
            "hint_used": record.hint_used,
            "run_id": record.run_id,
        },
    }


def record_from_dict(payload: dict) -> TrainingRecord:
    meta = payload["meta"]
    return TrainingRecord(
        instruction=payload["instruction"],
        output=payload["output"],
        method=meta["method"],
        guideline_index=meta["guideline_index"],
        hint_used=meta["hint_used"],
        run_id=meta["run_id"],
    )


def write_training_records(path: str | Path, records: list[TrainingRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def read_training_records(path: str | Path) -> list[TrainingRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
    return records


def stats_to_dict(stats: CorpusStats) -> dict:
    return {
        "instruction_count": stats.instruction_count,
        "covered_before_hint": stats.covered_before_hint,
        "covered_after_hint": stats.covered_after_hint,
        "coverage_before_hint": stats.coverage_before_hint,
        "coverage_after_hint": stats.coverage_after_hint,
        "per_guideline_correct": {str(k): v for k, v in stats.per_guideline_correct.items()},
    }


def write_stats(path: str | Path, stats: CorpusStats) -> None:
    Path(path).write_text(
        json.dumps(stats_to_dict(stats), ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )


__all__ = [
    "CRITERION_GROUND_TRUTH",
    "CRITERION_MAJORITY_VOTE",
    "FILTER_CRITERIA",
    "DEFAULT_SUBSAMPLE_P",
    "MIX_DRAWS",
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
    "record_to_dict",
    "record_from_dict",
    "write_training_records",
    "read_training_records",
    "stats_to_dict",
    "write_stats",
]
