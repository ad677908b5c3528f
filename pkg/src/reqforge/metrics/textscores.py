"""Text overlap scores: BLEU-4 and embedding cosine similarity."""
from __future__ import annotations

import math
import re
from collections import Counter
from typing import Callable, Sequence


def tokens_of(text: str) -> list[str]:
    """Case-folded tokens; whitespace and punctuation (incl. _) separate."""
    return re.findall(r"[^\W_]+", text.lower())


def _ngrams(tokens: list[str], order: int) -> Counter:
    return Counter(tuple(tokens[i:i + order]) for i in range(len(tokens) - order + 1))


def bleu(candidate: str, reference: str) -> float:
    """BLEU-4 against a single reference.

    Modified n-gram precision per order; add-one smoothing only for orders
    with zero matches but a nonzero candidate n-gram count; brevity penalty
    exp(1 - r/c) when the candidate is shorter; candidates shorter than 4
    tokens use only the orders up to their length; an empty candidate or
    an empty reference scores 0.0.
    """
    cand = tokens_of(candidate)
    ref = tokens_of(reference)
    if not cand or not ref:
        return 0.0
    top_order = min(4, len(cand))
    log_sum = 0.0
    for order in range(1, top_order + 1):
        cand_counts = _ngrams(cand, order)
        ref_counts = _ngrams(ref, order)
        total = sum(cand_counts.values())
        matched = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if matched == 0:
            precision = (matched + 1.0) / (total + 1.0)
        else:
            precision = matched / total
        log_sum += math.log(precision)
    score = math.exp(log_sum / top_order)
    c, r = len(cand), len(ref)
    if c < r:
        score *= math.exp(1.0 - r / c)
    return score


def semantic_similarity(text_a: str, text_b: str,
                        embed_fn: Callable[[Sequence[str]], Sequence[Sequence[float]]]) -> float:
    """Cosine similarity of whole-document embeddings; blank text scores 0."""
    if not text_a.strip() or not text_b.strip():
        return 0.0
    vec_a, vec_b = embed_fn([text_a, text_b])
    dot = sum(x * y for x, y in zip(vec_a, vec_b))
    norm_a = math.sqrt(sum(x * x for x in vec_a))
    norm_b = math.sqrt(sum(y * y for y in vec_b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)
