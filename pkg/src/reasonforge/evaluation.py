"""Accuracy evaluation of a model over a task corpus.

Three protocols: single zero-shot chain-of-thought sample, few-shot with the
first three committed exemplars, and self-consistency over fifteen samples
with majority voting. Items whose outputs yield no extractable answer count
as incorrect; per-item transport failures are recorded, not fatal.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Instruction, NormalizedAnswer, exact_match, extract_answer, normalize_answer
from .pipeline import config_digest, corpus_digest, run_id_for
from .prompts import FewShotExemplarSet, render_cot_eval, render_fewshot_cot
from .transport import CompletionRequest, FixtureMissingError, TransportError, stable_seed

PROTOCOL_COT = "cot"
PROTOCOL_COT_3SHOT = "cot_3shot"
PROTOCOL_SELF_CONSISTENCY = "self_consistency"
EVAL_PROTOCOLS = (PROTOCOL_COT, PROTOCOL_COT_3SHOT, PROTOCOL_SELF_CONSISTENCY)

# Samples per item are a property of the protocol, not a free parameter.
PROTOCOL_SAMPLES = {
    PROTOCOL_COT: 1,
    PROTOCOL_COT_3SHOT: 1,
    PROTOCOL_SELF_CONSISTENCY: 15,
}

DEFAULT_EVAL_TEMPERATURE = 0.8


@dataclass(frozen=True)
class EvalConfig:
    protocol: str
    model: str
    temperature: float = DEFAULT_EVAL_TEMPERATURE
    max_tokens: int = 2048
    run_seed: int = 0
    exemplars: FewShotExemplarSet | None = None

    def __post_init__(self):
        if self.protocol not in EVAL_PROTOCOLS:
            raise ValueError(f"unknown eval protocol {self.protocol!r}")
        if self.protocol == PROTOCOL_COT_3SHOT:
            if self.exemplars is None or len(self.exemplars.exemplars) < 3:
                raise ValueError("cot_3shot needs an exemplar set with at least 3 entries")

    @property
    def num_samples(self) -> int:
        return PROTOCOL_SAMPLES[self.protocol]


@dataclass(frozen=True)
class EvalItem:
    instruction_id: str
    predicted: NormalizedAnswer | None
    expected: NormalizedAnswer
    correct: bool
    failed: bool = False
    failure: str | None = None


@dataclass
class EvalOutcome:
    items: list[EvalItem]
    generations: list[dict]
    report: dict

    @property
    def accuracy(self) -> float:
        return self.report["accuracy"]


def majority_answer(answers: list[NormalizedAnswer | None]) -> NormalizedAnswer | None:
    """Modal extracted answer; ties go to the earliest first occurrence.

    None entries (unextractable outputs) never vote. Returns None when
    nothing voted at all.
    """
    counts: dict[tuple[str, str], int] = {}
    first_seen: dict[tuple[str, str], int] = {}
    values: dict[tuple[str, str], NormalizedAnswer] = {}
    for position, answer in enumerate(answers):
        if answer is None:
            continue
        key = (answer.kind, answer.canonical)
        if key not in counts:
            counts[key] = 0
            first_seen[key] = position
            values[key] = answer
        counts[key] += 1
    if not counts:
        return None
    best = max(counts, key=lambda k: (counts[k], -first_seen[k]))
    return values[best]


def _eval_prompt(instruction: Instruction, config: EvalConfig):
    if config.protocol == PROTOCOL_COT_3SHOT:
        return render_fewshot_cot(instruction.question, config.exemplars.take(3))
    return render_cot_eval(instruction.question)


def evaluate(
    corpus: list[Instruction],
    config: EvalConfig,
    transport,
    corpus_name: str = "",
) -> EvalOutcome:
    from . import __version__

    items: list[EvalItem] = []
    generations: list[dict] = []
    failures: list[dict] = []

    for instruction in corpus:
        expected = normalize_answer(instruction.ground_truth, instruction.answer_kind)
        prompt = _eval_prompt(instruction, config)
        request = CompletionRequest(
            model=config.model,
            prompt=prompt,
            temperature=config.temperature,
            num_samples=config.num_samples,
            max_tokens=config.max_tokens,
            seed=stable_seed(config.run_seed, instruction.id, 0, f"eval:{config.protocol}"),
        )
        try:
            texts = transport.complete(request).texts
        except FixtureMissingError:
            raise
        except TransportError as exc:
            items.append(
                EvalItem(instruction.id, None, expected, correct=False, failed=True, failure=str(exc))
            )
            failures.append({"instruction_id": instruction.id, "error": str(exc)})
            generations.append(
                {
                    "instruction_id": instruction.id,
                    "protocol": config.protocol,
                    "prompt": prompt.text,
                    "texts": [],
                    "predicted": None,
                    "correct": False,
                }
            )
            continue
        answers = [extract_answer(text, instruction.answer_kind) for text in texts]
        predicted = majority_answer(answers)
        correct = predicted is not None and exact_match(predicted, expected)
        items.append(EvalItem(instruction.id, predicted, expected, correct=correct))
        generations.append(
            {
                "instruction_id": instruction.id,
                "protocol": config.protocol,
                "prompt": prompt.text,
                "texts": list(texts),
                "predicted": predicted.canonical if predicted is not None else None,
                "correct": correct,
            }
        )

    correct_count = sum(1 for item in items if item.correct)
    accuracy = correct_count / len(items) if items else 0.0
    cfg_digest = config_digest(
        {
            "protocol": config.protocol,
            "model": config.model,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "run_seed": config.run_seed,
            "num_samples": config.num_samples,
        }
    )
    corp_digest = corpus_digest(corpus)
    report = {
        "run_id": run_id_for(cfg_digest, corp_digest, config.run_seed),
        "protocol": config.protocol,
        "model": config.model,
        "corpus_name": corpus_name,
        "corpus_digest": corp_digest,
        "config_digest": cfg_digest,
        "tool_version": __version__,
        "temperature": config.temperature,
        "num_samples": config.num_samples,
        "max_tokens": config.max_tokens,
        "run_seed": config.run_seed,
        "total": len(items),
        "correct": correct_count,
        "accuracy": accuracy,
        "failed_items": len(failures),
        "failures": failures,
    }
    return EvalOutcome(items=items, generations=generations, report=report)


def write_eval_outcome(out_dir: str | Path, outcome: EvalOutcome) -> Path:
    """Persist report.json plus generations.jsonl; returns the output directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(outcome.report, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    with open(out / "generations.jsonl", "w", encoding="utf-8") as fh:
        for record in outcome.generations:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return out


__all__ = [
    "PROTOCOL_COT",
    "PROTOCOL_COT_3SHOT",
    "PROTOCOL_SELF_CONSISTENCY",
    "EVAL_PROTOCOLS",
    "PROTOCOL_SAMPLES",
    "DEFAULT_EVAL_TEMPERATURE",
    "EvalConfig",
    "EvalItem",
    "EvalOutcome",
    "majority_answer",
    "evaluate",
    "write_eval_outcome",
]
