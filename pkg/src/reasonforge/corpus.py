"""Task corpora: loading, answer extraction, normalization, exact match.

A corpus is a JSON Lines file of ``{"id", "question", "answer"}`` objects,
described by a small TOML manifest that declares the answer kind and split.
All answer comparison in the package goes through :func:`exact_match` on
canonical forms produced here.
"""

import json
import re
import sys
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

NUMERIC = "numeric"
MULTIPLE_CHOICE = "multiple_choice"
BOOLEAN = "boolean"
FREEFORM = "freeform"
ANSWER_KINDS = (NUMERIC, MULTIPLE_CHOICE, BOOLEAN, FREEFORM)

SPLITS = ("train", "test")


class CorpusError(ValueError):
    """Malformed corpus or manifest input."""


class NormalizationError(ValueError):
    """Raw answer text cannot be mapped to the requested kind."""

    def __init__(self, raw: str, kind: str):
        super().__init__(f"cannot normalize {raw!r} as {kind}")
        self.raw = raw
        self.kind = kind


@dataclass(frozen=True)
class NormalizedAnswer:
    kind: str
    canonical: str


@dataclass(frozen=True)
class Instruction:
    id: str
    question: str
    ground_truth: str
    answer_kind: str


@dataclass(frozen=True)
class CorpusManifest:
    name: str
    answer_kind: str
    split: str
    path: Path


def load_manifest(path: str | Path) -> CorpusManifest:
    """Read a corpus manifest; relative data paths resolve against the manifest file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise CorpusError(f"invalid manifest {path}: {exc}") from exc
    missing = [key for key in ("name", "answer_kind", "split", "path") if key not in raw]
    if missing:
        raise CorpusError(f"manifest {path} missing keys: {', '.join(missing)}")
    if raw["answer_kind"] not in ANSWER_KINDS:
        raise CorpusError(f"manifest {path}: unknown answer_kind {raw['answer_kind']!r}")
    if raw["split"] not in SPLITS:
        raise CorpusError(f"manifest {path}: split must be declared as train or test")
    data_path = Path(raw["path"])
    if not data_path.is_absolute():
        data_path = path.parent / data_path
    return CorpusManifest(
        name=str(raw["name"]),
        answer_kind=raw["answer_kind"],
        split=raw["split"],
        path=data_path,
    )


def load_corpus(manifest: CorpusManifest) -> list[Instruction]:
    """Load all instructions in file order, validating ids and ground truths."""
    instructions: list[Instruction] = []
    seen: set[str] = set()
    try:
        lines = manifest.path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {manifest.path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{manifest.path}: malformed line {lineno}: {exc}") from exc
        if not isinstance(record, dict) or not {"id", "question", "answer"} <= record.keys():
            raise CorpusError(
                f"{manifest.path}: line {lineno} must be an object with id, question, answer"
            )
        rid = str(record["id"])
        if rid in seen:
            raise CorpusError(f"{manifest.path}: duplicate id {rid!r} at line {lineno}")
        seen.add(rid)
        answer = str(record["answer"])
        if not answer:
            raise CorpusError(f"{manifest.path}: line {lineno}: empty answer for id {rid!r}")
        try:
            normalize_answer(answer, manifest.answer_kind)
        except NormalizationError as exc:
            raise CorpusError(f"{manifest.path}: line {lineno}: {exc}") from exc
        instructions.append(
            Instruction(
                id=rid,
                question=str(record["question"]),
                ground_truth=answer,
                answer_kind=manifest.answer_kind,
            )
        )
    return instructions


def write_corpus(instructions: list[Instruction], path: str | Path) -> None:
    """Write instructions back out in the corpus JSONL schema."""
    with open(path, "w", encoding="utf-8") as fh:
        for ins in instructions:
            fh.write(
                json.dumps(
                    {"id": ins.id, "question": ins.question, "answer": ins.ground_truth},
                    ensure_ascii=False,
                )
                + "\n"
            )


# Normalization.

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")
_CHOICE_RE = re.compile(r"[\s([{]*([A-Ea-e])[)\]}.\s]*$")
_BOOLEAN_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def _canonical_decimal(token: str) -> str:
    d = Decimal(token)
    if d == 0:
        return "0"
    return format(d.normalize(), "f")


def normalize_answer(raw: str, kind: str) -> NormalizedAnswer:
    """Map raw answer text to its canonical form for the given kind."""
    if kind not in ANSWER_KINDS:
        raise ValueError(f"unknown answer kind {kind!r}")
    if not raw or not raw.strip():
        raise NormalizationError(raw, kind)
    text = raw.strip()

    if kind == NUMERIC:
        cleaned = text.replace("$", "").replace(",", "").replace("%", "")
        matches = _NUMBER_RE.findall(cleaned)
        if not matches:
            raise NormalizationError(raw, kind)
        try:
            return NormalizedAnswer(kind, _canonical_decimal(matches[-1]))
        except InvalidOperation as exc:
            raise NormalizationError(raw, kind) from exc

    if kind == MULTIPLE_CHOICE:
        match = _CHOICE_RE.fullmatch(text)
        if not match:
            raise NormalizationError(raw, kind)
        return NormalizedAnswer(kind, match.group(1).upper())

    if kind == BOOLEAN:
        token = text.strip(".!,;: ").lower()
        if token not in ("yes", "no"):
            raise NormalizationError(raw, kind)
        return NormalizedAnswer(kind, token)

    # freeform: whitespace-trimmed text, minus any sentence-final periods
    canonical = text
    while canonical.endswith("."):
        canonical = canonical[:-1].rstrip()
    if not canonical:
        raise NormalizationError(raw, kind)
    return NormalizedAnswer(kind, canonical)


# Extraction cascade. Order is fixed: boxed marker, then "####", then
# "The answer is", then a kind-specific final-value fallback (freeform has none).

_BOXED_RE = re.compile(r"\\boxed\{([^{}]*)\}")
_HASH_RE = re.compile(r"####\s*([^\n]+)")
_ANSWER_IS_RE = re.compile(r"the answer is[:\s]*([^\n]+)", re.IGNORECASE)
_FALLBACK_CHOICE_RE = re.compile(r"\(([A-Ea-e])\)")


def _try_normalize(candidate: str, kind: str) -> NormalizedAnswer | None:
    try:
        return normalize_answer(candidate, kind)
    except NormalizationError:
        return None


def extract_marked_answer(text: str, kind: str) -> NormalizedAnswer | None:
    """Extraction from explicit markers only; None when no marker yields a value."""
    for pattern in (_BOXED_RE, _HASH_RE, _ANSWER_IS_RE):
        matches = pattern.findall(text)
        for candidate in reversed(matches):
            answer = _try_normalize(candidate, kind)
            if answer is not None:
                return answer
    return None


def extract_answer(text: str, kind: str) -> NormalizedAnswer | None:
    """Full extraction cascade; absence is a value, not an error."""
    marked = extract_marked_answer(text, kind)
    if marked is not None:
        return marked

    if kind == NUMERIC:
        cleaned = text.replace("$", "").replace(",", "")
        matches = _NUMBER_RE.findall(cleaned)
        for candidate in reversed(matches):
            answer = _try_normalize(candidate, kind)
            if answer is not None:
                return answer
        return None
    if kind == MULTIPLE_CHOICE:
        matches = _FALLBACK_CHOICE_RE.findall(text)
        return normalize_answer(matches[-1], kind) if matches else None
    if kind == BOOLEAN:
        matches = _BOOLEAN_RE.findall(text)
        return normalize_answer(matches[-1], kind) if matches else None
    return None


def exact_match(a: NormalizedAnswer, b: NormalizedAnswer) -> bool:
    """String equality of canonical forms; kinds must agree."""
    if a.kind != b.kind:
        raise ValueError(f"answer kind mismatch: {a.kind} vs {b.kind}")
    return a.canonical == b.canonical
