#!/usr/bin/env python3
"""Regenerates tests/data/metric_fixture.json from reference implementations.

ROUGE-1 and ROUGE-L F-measures come from Google's rouge_score package (no
stemming). BLEU uses NLTK for clipped n-gram precision and the brevity
penalty; zero n-gram matches above order 1 are smoothed to 1 / (count + 1)
and a zero unigram match makes the score 0.

Texts are lowercase alphanumeric words joined by single spaces, so the
reference tokenizers and the C++ tokenizer split them identically.

Usage: python3 make_metric_fixture.py > ../data/metric_fixture.json
"""

import json
import math
import random

from nltk.translate.bleu_score import brevity_penalty, modified_precision
from nltk.util import ngrams
from rouge_score import rouge_scorer

VOCAB = ["the", "cat", "sat", "on", "mat", "a", "dog", "ran", "to", "park",
         "big", "red", "ball", "and", "2024", "news"]

HAND_CASES = [
    ("the cat sat", "the cat"),
    ("a b c d", "a c d"),
    ("the the the", "the cat"),
    ("identical words here", "identical words here"),
    ("alpha beta", "gamma delta"),
    ("cat", "the cat sat on the mat"),
]


def reference_bleu(cand: str, ref: str) -> float:
    c, r = cand.split(), ref.split()
    if not c or not r:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        matches = modified_precision([r], c, n).numerator
        total = len(list(ngrams(c, n)))
        if matches == 0:
            if n == 1:
                return 0.0
            precision = 1.0 / (total + 1)
        else:
            precision = matches / total
        log_sum += math.log(precision)
    return brevity_penalty(len(r), len(c)) * math.exp(log_sum / 4)


def main() -> None:
    rng = random.Random(20240517)
    pairs = list(HAND_CASES)
    while len(pairs) < 50:
        ref = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 12)))
        if rng.random() < 0.3:
            words = ref.split()
            cut = rng.randint(0, len(words))
            cand = " ".join(words[:cut] + [rng.choice(VOCAB)] + words[cut:])
        else:
            cand = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 12)))
        pairs.append((cand, ref))

    scorer = rouge_scorer.RougeScorer(["rouge1", "rougeL"], use_stemmer=False)
    rows = []
    for cand, ref in pairs:
        s = scorer.score(ref, cand)
        rows.append({
            "cand": cand,
            "ref": ref,
            "rouge1": s["rouge1"].fmeasure,
            "rougeL": s["rougeL"].fmeasure,
            "bleu": reference_bleu(cand, ref),
        })
    print(json.dumps(rows, indent=1))


if __name__ == "__main__":
    main()
