"""Precision/recall/F1 of a predicted use-case model against gold."""
from __future__ import annotations

from dataclasses import dataclass

from reqforge.plantuml import ModelDiff, UseCaseModel, diff


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def _prf(matched: int, missing: int, spurious: int) -> PRF:
    if matched == 0 and missing == 0 and spurious == 0:
        # both sides empty: perfect agreement by convention
        return PRF(1.0, 1.0, 1.0)
    precision = matched / (matched + spurious) if matched + spurious else 0.0
    recall = matched / (matched + missing) if matched + missing else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1)


@dataclass(frozen=True)
class PRFResult:
    actors: PRF
    usecases: PRF
    relations: PRF
    overall: PRF
    counts: dict

    def by_class(self) -> dict[str, PRF]:
        return {"actors": self.actors, "usecases": self.usecases,
                "relations": self.relations}


def prf_from_diff(model_diff: ModelDiff) -> PRFResult:
    per_class = {}
    totals = [0, 0, 0]
    for name, class_diff in model_diff.by_class().items():
        matched, missing, spurious = class_diff.counts
        per_class[name] = _prf(matched, missing, spurious)
        totals[0] += matched
        totals[1] += missing
        totals[2] += spurious
    return PRFResult(
        actors=per_class["actors"],
        usecases=per_class["usecases"],
        relations=per_class["relations"],
        overall=_prf(*totals),
        counts={"matched": totals[0], "missing": totals[1], "spurious": totals[2]},
    )


def model_prf(gold: UseCaseModel, predicted: UseCaseModel) -> PRFResult:
    return prf_from_diff(diff(gold, predicted))
