"""Guideline preference analysis over filtered trace stores.

Success rates are counted at the instruction level: guideline j scores on an
instruction when at least one of its traces there is correct. Rates are
z-normalized per model (population standard deviation) so two models can be
compared by ranking the largest |z_a - z_b| gaps.
"""

import csv
import json
import statistics
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .filtering import FilterVerdict, TrainingRecord

GUIDELINE_COUNT = 25
DEFAULT_TOP_K = 10


@dataclass(frozen=True)
class GuidelineStats:
    model: str
    rates: tuple[float, ...]
    zscores: tuple[float, ...]


def guideline_success_rates(verdicts: list[FilterVerdict]) -> list[float]:
    """x_j = fraction of instructions where guideline j produced a correct trace."""
    if not verdicts:
        raise ValueError("empty trace store; nothing to analyze")
    instructions: set[str] = set()
    correct_by_guideline: dict[int, set[str]] = {}
    for verdict in verdicts:
        index = verdict.trace.guideline_index
        if not 1 <= index <= GUIDELINE_COUNT:
            raise ValueError(
                f"guideline_index {index} outside 1..{GUIDELINE_COUNT}; "
                "baseline traces carry no guideline provenance"
            )
        instructions.add(verdict.trace.instruction_id)
        if verdict.correct:
            correct_by_guideline.setdefault(index, set()).add(verdict.trace.instruction_id)
    total = len(instructions)
    return [
        len(correct_by_guideline.get(j, ())) / total for j in range(1, GUIDELINE_COUNT + 1)
    ]


def zscore(values: Sequence[float]) -> list[float]:
    """Population z-normalization; a constant vector maps to all zeros."""
    if len(values) < 2:
        raise ValueError("zscore needs at least 2 values")
    mean = statistics.fmean(values)
    sigma = statistics.pstdev(values)
    if sigma == 0:
        return [0.0] * len(values)
    return [(v - mean) / sigma for v in values]


def top_discrepancy(
    z_a: Sequence[float], z_b: Sequence[float], k: int = DEFAULT_TOP_K
) -> list[int]:
    """1-based guideline indices ranked by |z_a - z_b| descending, ties by lower index."""
    if len(z_a) != len(z_b):
        raise ValueError(f"vector length mismatch: {len(z_a)} vs {len(z_b)}")
    if k < 1:
        raise ValueError("k must be >= 1")
    order = sorted(range(len(z_a)), key=lambda j: (-abs(z_a[j] - z_b[j]), j))
    return [j + 1 for j in order[:k]]


def guideline_distribution(records: list[TrainingRecord]) -> dict[int, float]:
    """Fraction of guideline-tagged records per guideline; sums to 1 over those records."""
    tagged = [
        record
        for record in records
        if record.guideline_index is not None and 1 <= record.guideline_index <= GUIDELINE_COUNT
    ]
    if not tagged:
        return {}
    counts = Counter(record.guideline_index for record in tagged)
    return {j: counts[j] / len(tagged) for j in sorted(counts)}


def guideline_stats(model: str, verdicts: list[FilterVerdict]) -> GuidelineStats:
    rates = guideline_success_rates(verdicts)
    return GuidelineStats(model=model, rates=tuple(rates), zscores=tuple(zscore(rates)))


def analysis_report(
    stats: list[GuidelineStats],
    k: int = DEFAULT_TOP_K,
    distribution: dict[int, float] | None = None,
) -> dict:
    """Rates and z-scores per model; discrepancy ranking when exactly two models."""
    if not stats:
        raise ValueError("no guideline stats to report")
    report: dict = {
        "models": [
            {"model": s.model, "rates": list(s.rates), "zscores": list(s.zscores)}
            for s in stats
        ]
    }
    if len(stats) == 2:
        report["top_discrepancy"] = top_discrepancy(stats[0].zscores, stats[1].zscores, k)
    if distribution is not None:
        report["guideline_distribution"] = {str(j): f for j, f in distribution.items()}
    return report


def write_analysis_report(path: str | Path, report: dict) -> None:
    Path(path).write_text(
        json.dumps(report, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )


def write_distribution_csv(path: str | Path, distribution: dict[int, float]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["guideline_index", "fraction"])
        for index in sorted(distribution):
            writer.writerow([index, distribution[index]])


__all__ = [
    "GUIDELINE_COUNT",
    "DEFAULT_TOP_K",
    "GuidelineStats",
    "guideline_success_rates",
    "zscore",
    "top_discrepancy",
    "guideline_distribution",
    "guideline_stats",
    "analysis_report",
    "write_analysis_report",
    "write_distribution_csv",
]
