"""ROUGE-N and summary-level ROUGE-L (union LCS), case-folded, no stemming."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, p, r):
        return cls(p, r, 2 * p * r / (p + r) if p + r > 0 else 0.0)


ZERO = RougeScore(0.0, 0.0, 0.0)


def _fold(tokens):
    return [t.lower() for t in tokens]


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n=1):
    if n < 1:
        raise ValueError("n must be >= 1")
    cand, ref = ngrams(_fold(candidate), n), ngrams(_fold(reference), n)
    c_total, r_total = sum(cand.values()), sum(ref.values())
    if not c_total or not r_total:
        return ZERO
    overlap = sum((cand & ref).values())
    return RougeScore.from_pr(overlap / c_total, overlap / r_total)


def lcs_table(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a, 1):
        row, prev = table[i], table[i - 1]
        for j, y in enumerate(b, 1):
            row[j] = prev[j - 1] + 1 if x == y else max(prev[j], row[j - 1])
    return table


def lcs_length(a, b):
    return lcs_table(a, b)[-1][-1]


def lcs_positions(a, b):
    """Indices into ``a`` of one longest common subsequence with ``b``."""
    table = lcs_table(a, b)
    i, j, out = len(a), len(b), []
    while i and j:
        if a[i - 1] == b[j - 1]:
            out.append(i - 1)
            i, j = i - 1, j - 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return out[::-1]


def rouge_l(candidate_sents, reference_sents):
    """Summary-level ROUGE-L.

    For each reference sentence, take the union of its LCS matches against every
    candidate sentence; hits are clipped so a token is credited no more often than
    it occurs on either side.
    """
    cands = [_fold(s) for s in candidate_sents if s]
    refs = [_fold(s) for s in reference_sents if s]
    n_cand = sum(len(s) for s in cands)
    n_ref = sum(len(s) for s in refs)
    if not n_cand or not n_ref:
        return ZERO
    cand_left = Counter(t for s in cands for t in s)
    ref_left = Counter(t for s in refs for t in s)
    hits = 0
    for ref in refs:
        union = set()
        for cand in cands:
            union.update(lcs_positions(ref, cand))
        for i in sorted(union):
            tok = ref[i]
            if cand_left[tok] > 0 and ref_left[tok] > 0:
                hits += 1
                cand_left[tok] -= 1
                ref_left[tok] -= 1
    return RougeScore.from_pr(hits / n_cand, hits / n_ref)


METRICS = ("rouge-1", "rouge-2", "rouge-l")


def score_pair(candidate_sents, reference_sents):
    cand = [t for s in candidate_sents for t in s]
    ref = [t for s in reference_sents for t in s]
    return {
        "rouge-1": rouge_n(cand, ref, 1),
        "rouge-2": rouge_n(cand, ref, 2),
        "rouge-l": rouge_l(candidate_sents, reference_sents),
    }


def corpus_eval(pairs):
    """Unweighted mean P/R/F1 per metric over ``(candidate_sents, reference_sents)`` pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("corpus_eval needs at least one pair")
    sums = {m: [0.0, 0.0, 0.0] for m in METRICS}
    for cand, ref in pairs:
        for m, s in score_pair(cand, ref).items():
            acc = sums[m]
            acc[0] += s.precision
            acc[1] += s.recall
            acc[2] += s.f1
    n = len(pairs)
    return {m: RougeScore(p / n, r / n, f / n) for m, (p, r, f) in sums.items()}
