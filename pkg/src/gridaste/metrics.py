"""Micro-averaged exact-match metrics, subtask projections, error breakdown."""

import json
from dataclasses import dataclass

from gridaste.corpus import Triplet
from gridaste.errors import ValidationError


@dataclass(frozen=True)
class MetricReport:
    precision: float
    recall: float
    f1: float
    num_pred: int
    num_gold: int
    num_correct: int


@dataclass(frozen=True)
class ErrorBreakdown:
    """Percentages over all predicted triples; categories are disjoint."""

    entity_error_rate: float
    sentiment_error_rate: float
    correct_rate: float


def _report(num_pred: int, num_gold: int, num_correct: int) -> MetricReport:
    precision = num_correct / num_pred if num_pred else 1.0
    recall = num_correct / num_gold if num_gold else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricReport(precision, recall, f1, num_pred, num_gold, num_correct)


def _micro(pred: dict[str, set], gold: dict[str, set]) -> MetricReport:
    num_pred = sum(len(v) for v in pred.values())
    num_gold = sum(len(v) for v in gold.values())
    num_correct = sum(len(pred[sid] & gold[sid]) for sid in gold)
    return _report(num_pred, num_gold, num_correct)


def triplet_metrics(
    pred: dict[str, set[Triplet]], gold: dict[str, set[Triplet]]
) -> MetricReport:
    """Exact-match micro P/R/F1 over the whole split."""
    if set(pred) != set(gold):
        missing = set(gold) ^ set(pred)
        raise ValidationError(f"prediction/gold sentence ids differ: {sorted(missing)[:5]}")
    return _micro(pred, gold)


def subtask_metrics(
    pred: dict[str, set[Triplet]], gold: dict[str, set[Triplet]], task: str
) -> MetricReport:
    """AESC keeps (aspect, sentiment); AOPE keeps (aspect, opinion)."""
    if task == "AESC":
        project = lambda t: (t.aspect, t.sentiment)  # noqa: E731
    elif task == "AOPE":
        project = lambda t: (t.aspect, t.opinion)  # noqa: E731
    else:
        raise ValidationError(f"unknown subtask {task!r}, expected AESC or AOPE")
    return _micro(
        {sid: {project(t) for t in ts} for sid, ts in pred.items()},
        {sid: {project(t) for t in ts} for sid, ts in gold.items()},
    )


def error_analysis(
    pred: dict[str, set[Triplet]], gold: dict[str, set[Triplet]]
) -> ErrorBreakdown:
    """Classify each wrong prediction: sentiment error when both spans match
    some gold triple, entity error otherwise."""
    total = entity = senti = correct = 0
    for sid, predictions in pred.items():
        gold_set = gold.get(sid, set())
        spans = {(g.aspect, g.opinion) for g in gold_set}
        for p in predictions:
            total += 1
            if p in gold_set:
                correct += 1
            elif (p.aspect, p.opinion) in spans:
                senti += 1
            else:
                entity += 1
    if total == 0:
        return ErrorBreakdown(0.0, 0.0, 0.0)
    return ErrorBreakdown(
        entity_error_rate=100.0 * entity / total,
        sentiment_error_rate=100.0 * senti / total,
        correct_rate=100.0 * correct / total,
    )


def render_text(reports: dict[str, MetricReport], errors: ErrorBreakdown | None = None) -> str:
    lines = [f"{'task':8} {'P':>8} {'R':>8} {'F1':>8} {'pred':>6} {'gold':>6} {'corr':>6}"]
    for name, r in reports.items():
        lines.append(
            f"{name:8} {r.precision:8.4f} {r.recall:8.4f} {r.f1:8.4f}"
            f" {r.num_pred:6d} {r.num_gold:6d} {r.num_correct:6d}"
        )
    if errors is not None:
        lines.append(
            f"errors   entity {errors.entity_error_rate:.2f}%"
            f"  sentiment {errors.sentiment_error_rate:.2f}%"
            f"  correct {errors.correct_rate:.2f}%"
        )
    return "\n".join(lines)


def to_json(
    reports: dict[str, MetricReport],
    errors: ErrorBreakdown | None = None,
    extra: dict | None = None,
) -> str:
    payload: dict = {
        name: {
            "precision": r.precision,
            "recall": r.recall,
            "f1": r.f1,
            "num_pred": r.num_pred,
            "num_gold": r.num_gold,
            "num_correct": r.num_correct,
        }
        for name, r in reports.items()
    }
    if errors is not None:
        payload["errors"] = {
            "entity_error_rate": errors.entity_error_rate,
            "sentiment_error_rate": errors.sentiment_error_rate,
            "correct_rate": errors.correct_rate,
        }
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True)
