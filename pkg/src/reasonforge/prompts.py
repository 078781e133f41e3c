"""Seed guidelines and every prompt rendered by the package.

Templates are code constants covered by golden tests; guideline and few-shot
exemplar data ship as fixture files under ``data/``. Rendering is pure: equal
inputs give byte-identical text.
"""

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

STAGE_ADAPT = "adapt"
STAGE_STRUCTURE = "structure"
STAGE_PATH = "path"
STAGE_COT_EVAL = "cot_eval"
STAGE_FEWSHOT_COT = "fewshot_cot"

ADAPT_TEMPLATE = (
    "Without working out the solution, adapt the following reasoning modules to be "
    "specific to our task\nReasoning Module: {guideline}\nTask: {question}"
)
ADAPT_HINT_TEMPLATE = (
    "Without working out the solution: {hint}, adapt the following reasoning modules "
    "to be specific to our task\nReasoning Module: {guideline}\nTask: {question}"
)
STRUCTURE_TEMPLATE = (
    "Without working out the solution, create an actionable and concise reasoning "
    "structure step by step for the task using this adapted reasoning module: "
    "{adapted}\nTask: {question}"
)
STRUCTURE_HINT_TEMPLATE = (
    "Without working out the solution: {hint}, create an actionable and concise "
    "reasoning structure step by step for the task using this adapted reasoning "
    "module: {adapted}\nTask: {question}"
)
PATH_TEMPLATE = (
    "Using the following reasoning structure: {structure}\nTask: {question}\n"
    "Solve this task step by step based on the above reasoning structure."
)
COT_EVAL_TEMPLATE = "Solve the following problem step-by-step. Question: {question} Answer:"
HINT_SUFFIX = " (Hints: {hint})"


@dataclass(frozen=True)
class SeedGuideline:
    index: int
    text: str


@dataclass(frozen=True)
class RenderedPrompt:
    stage: str
    text: str
    hint_present: bool


@dataclass(frozen=True)
class FewShotExemplarSet:
    dataset: str
    exemplars: tuple[tuple[str, str], ...]
    hint_variant: bool

    def take(self, n: int) -> "FewShotExemplarSet":
        """First n exemplars, order preserved."""
        return FewShotExemplarSet(self.dataset, self.exemplars[:n], self.hint_variant)


def _data_text(relpath: str) -> str:
    return resources.files(__package__).joinpath(relpath).read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def seed_guidelines() -> tuple[SeedGuideline, ...]:
    """The 25 seed reasoning guidelines, indexed 1 through 25 in list order."""
    lines = _data_text("data/seed_guidelines.txt").splitlines()
    guidelines = tuple(
        SeedGuideline(index=i, text=line) for i, line in enumerate(lines, start=1) if line
    )
    if len(guidelines) != 25:
        raise RuntimeError(f"expected 25 seed guidelines, found {len(guidelines)}")
    return guidelines


@lru_cache(maxsize=None)
def exemplar_set(name: str) -> FewShotExemplarSet:
    """Load a committed few-shot exemplar set by file stem (e.g. "gsm8k", "gsm8k_star_hints")."""
    try:
        payload = json.loads(_data_text(f"data/exemplars/{name}.json"))
    except FileNotFoundError:
        raise KeyError(f"no exemplar set named {name!r}") from None
    exemplars = tuple((q, a) for q, a in payload["exemplars"])
    if not exemplars:
        raise ValueError(f"exemplar set {name!r} is empty")
    hint_variant = bool(payload["hint_variant"])
    if hint_variant and any("(Hints:" not in q for q, _ in exemplars):
        raise ValueError(f"exemplar set {name!r} marked hint_variant but lacks hints")
    return FewShotExemplarSet(payload["dataset"], exemplars, hint_variant)


def render_adaptation(question: str, guideline: SeedGuideline, hint: str | None = None) -> RenderedPrompt:
    """Stage prompt that tailors one seed guideline to the task without solving it."""
    if not question:
        raise ValueError("question must be non-empty")
    if hint is None:
        text = ADAPT_TEMPLATE.format(guideline=guideline.text, question=question)
    else:
        text = ADAPT_HINT_TEMPLATE.format(hint=hint, guideline=guideline.text, question=question)
    return RenderedPrompt(STAGE_ADAPT, text, hint_present=hint is not None)


def render_structure(question: str, adapted_guideline: str, hint: str | None = None) -> RenderedPrompt:
    """Stage prompt that turns an adapted guideline into a stepwise structure."""
    if not question:
        raise ValueError("question must be non-empty")
    if hint is None:
        text = STRUCTURE_TEMPLATE.format(adapted=adapted_guideline, question=question)
    else:
        text = STRUCTURE_HINT_TEMPLATE.format(hint=hint, adapted=adapted_guideline, question=question)
    return RenderedPrompt(STAGE_STRUCTURE, text, hint_present=hint is not None)


def render_path(question: str, structure: str) -> RenderedPrompt:
    """Stage prompt that solves the task following a reasoning structure.

    No hint slot exists at this stage, so ground-truth answers cannot leak
    into the final generation. The hint-everywhere ablation instead rewrites
    the question upstream.
    """
    if not structure:
        raise ValueError("structure must be non-empty")
    text = PATH_TEMPLATE.format(structure=structure, question=question)
    return RenderedPrompt(STAGE_PATH, text, hint_present=False)


def render_cot_eval(question: str) -> RenderedPrompt:
    """Zero-shot step-by-step evaluation prompt."""
    return RenderedPrompt(STAGE_COT_EVAL, COT_EVAL_TEMPLATE.format(question=question), False)


def render_fewshot_cot(
    question: str, exemplars: FewShotExemplarSet, hint: str | None = None
) -> RenderedPrompt:
    """Few-shot CoT prompt: exemplar Q/A blocks, then the question, then "A:"."""
    if not exemplars.exemplars:
        raise ValueError("exemplar set must be non-empty")
    blocks = [f"Q: {q}\nA: {a}" for q, a in exemplars.exemplars]
    target = question if hint is None else question + HINT_SUFFIX.format(hint=hint)
    text = "\n\n".join(blocks) + f"\n\nQ: {target}\nA:"
    return RenderedPrompt(STAGE_FEWSHOT_COT, text, hint_present=hint is not None)
