#!/usr/bin/env python3
"""Independent BLEU-4 reference for the frozen fixture value.

Deliberately written with a different structure from the package
implementation (plain dicts, product-and-root instead of log-space) so the
two sides only agree if the arithmetic itself agrees. Definition under
test: case-folded alphanumeric tokenization, modified n-gram precision,
add-one smoothing only for orders with zero matches and a nonzero n-gram
count, brevity penalty exp(1 - r/c) when c < r, orders capped at the
candidate length, empty candidate scored 0.

Generation command (run from the repository root):

    python3 tools/oracles/bleu_reference.py \
        tests/fixtures/oracles/bleu_pair.txt \
        --out tests/fixtures/oracles/bleu_oracle.json
"""
import argparse
import json
import re


def tokens_of(text):
    return re.findall(r"[^\W_]+", text.lower())


def ngram_table(tokens, order):
    table = {}
    for start in range(len(tokens) - order + 1):
        gram = tuple(tokens[start:start + order])
        table[gram] = table.get(gram, 0) + 1
    return table


def bleu_reference(candidate_text, reference_text):
    candidate = tokens_of(candidate_text)
    reference = tokens_of(reference_text)
    if len(candidate) == 0:
        return 0.0
    top_order = min(4, len(candidate))
    product = 1.0
    for order in range(1, top_order + 1):
        cand_table = ngram_table(candidate, order)
        ref_table = ngram_table(reference, order)
        total = 0
        matched = 0
        for gram, count in cand_table.items():
            total += count
            limit = ref_table.get(gram, 0)
            matched += count if count < limit else limit
        if matched == 0:
            precision = 1.0 / (total + 1.0)
        else:
            precision = matched / total
        product *= precision
    geometric_mean = product ** (1.0 / top_order)
    c, r = len(candidate), len(reference)
    if c < r:
        import math
        penalty = math.exp(1.0 - r / c)
    else:
        penalty = 1.0
    return penalty * geometric_mean


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("pair", help="file with candidate and reference split by a --- line")
    parser.add_argument("--out", required=True)
    args = parser.parse_args()
    with open(args.pair, encoding="utf-8") as fh:
        candidate, reference = fh.read().split("\n---\n")
    score = bleu_reference(candidate.strip(), reference.strip())
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"bleu": score}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.out} (bleu={score!r})")


if __name__ == "__main__":
    main()
