"""Rubric-scored document judging on a 1-5 integer scale."""
from __future__ import annotations

import re
from dataclasses import dataclass

from reqforge.gateway import CompletionRequest, Gateway

#: criterion name -> what the judge is asked to score
CRITERIA = {
    "Completeness": (
        "every requirement present in the reference document must be covered "
        "by the candidate document; missing requirements lower the score"),
    "Correctness": (
        "the candidate document must not invent requirements, facts, or "
        "constraints that the reference document does not support; "
        "fabricated content lowers the score"),
    "Cohesiveness": (
        "the candidate document must read as one coherent specification: "
        "sections agree with each other, terminology stays consistent, and "
        "nothing contradicts the stated scope"),
}

SCORE_MIN, SCORE_MAX = 1, 5

_INTEGER = re.compile(r"-?\d+")


class JudgeParseError(Exception):
    pass


@dataclass(frozen=True)
class JudgeScore:
    criterion: str
    score: int
    rationale: str

    def __post_init__(self):
        if not SCORE_MIN <= self.score <= SCORE_MAX:
            raise JudgeParseError(
                f"score {self.score} outside {SCORE_MIN}..{SCORE_MAX}")


def render_judge_prompt(candidate: str, reference: str, criterion: str) -> CompletionRequest:
    definition = CRITERIA[criterion]
    body = (
        f"Criterion: {criterion} — {definition}.\n"
        f"\n"
        f"Reference document:\n"
        f"<<<\n{reference.strip()}\n>>>\n"
        f"\n"
        f"Candidate document:\n"
        f"<<<\n{candidate.strip()}\n>>>\n"
        f"\n"
        f"Judge the candidate against the reference on the criterion above. "
        f"Give a brief rationale (two or three sentences), then output the "
        f"score as a single integer from {SCORE_MIN} to {SCORE_MAX} on its "
        f"own final line, formatted exactly as 'Score: <n>'."
    )
    return CompletionRequest(
        system_prompt=(f"«judge_{criterion.lower()}» You are an impartial "
                       f"judge of requirements documents."),
        messages=(("user", body),),
        temperature=0.0,
        max_tokens=512,
    )


def parse_judge_reply(reply: str) -> int:
    """The first integer in the reply, required to be a valid score."""
    match = _INTEGER.search(reply)
    if match is None:
        raise JudgeParseError(f"no integer score in judge reply {reply!r}")
    score = int(match.group(0))
    if not SCORE_MIN <= score <= SCORE_MAX:
        raise JudgeParseError(
            f"judge scored {score}, outside {SCORE_MIN}..{SCORE_MAX}")
    return score


def g_eval(candidate: str, reference: str, criterion: str,
           judge: Gateway) -> JudgeScore:
    """Score `candidate` against `reference` on one criterion.

    One deterministic judge call; an unparseable or out-of-range reply is
    retried once before giving up.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; "
                         f"expected one of {tuple(CRITERIA)}")
    request = render_judge_prompt(candidate, reference, criterion)
    last_error: JudgeParseError | None = None
    for _ in range(2):
        reply = judge.complete(request).text
        try:
            return JudgeScore(criterion=criterion,
                              score=parse_judge_reply(reply),
                              rationale=reply.strip())
        except JudgeParseError as exc:
            last_error = exc
    raise JudgeParseError(f"judge reply unusable after a retry: {last_error}")
