"""WordNet-based sentence ranking (simplified Lesk gloss overlap) and the Lead-k baseline."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class CandidateWord:
    token: str
    position: int
    sense_count: int


@dataclass(frozen=True)
class RankedSentence:
    doc_index: int
    kept_words: tuple
    keyword_weights: tuple
    weight_avg: Fraction

    @property
    def n_sav(self):
        return len(self.kept_words)


@dataclass(frozen=True)
class ExtractConfig:
    n_win: int = 5
    n_top: int = 3

    def __post_init__(self):
        if self.n_win < 1 or self.n_top < 1:
            raise ValueError("n_win and n_top must be positive")


def content_words(sentence, lexicon, stopwords=None):
    """Tokens that are neither stop words nor unambiguous (fewer than 2 senses)."""
    if stopwords is None:
        stopwords = lexicon.stopwords
    out = []
    for pos, tok in enumerate(sentence):
        if tok in stopwords:
            continue
        n = lexicon.sense_count(tok)
        if n >= 2:
            out.append(CandidateWord(tok, pos, n))
    return out


def select_window(candidates, n_win):
    # sorted() is stable, so equal sense counts keep sentence order.
    ordered = sorted(candidates, key=lambda c: (-c.sense_count, c.position))
    return ordered[:n_win]


def gloss_overlap(a, b):
    return len(a.gloss_tokens & b.gloss_tokens)


def keyword_weight(keyword, others, lexicon):
    """Best sense score of ``keyword``: overlap summed over every sense of every other word."""
    context = [s for w in others if w.token != keyword.token for s in lexicon.senses(w.token)]
    if not context:
        return 0
    return max(sum(gloss_overlap(m, s) for s in context) for m in lexicon.senses(keyword.token))


def sentence_weight(sentence, lexicon, config=ExtractConfig(), doc_index=0):
    kept = select_window(content_words(sentence, lexicon), config.n_win)
    weights = tuple(
        keyword_weight(w, [o for o in kept if o is not w], lexicon) for w in kept
    )
    avg = Fraction(sum(weights), len(kept)) if kept else Fraction(0)
    return RankedSentence(doc_index, tuple(kept), weights, avg)


def rank_document(doc, lexicon, config=ExtractConfig()):
    """Top ``n_top`` sentences by average keyword weight, returned in document order."""
    ranked = [sentence_weight(s, lexicon, config, i) for i, s in enumerate(doc)]
    top = sorted(ranked, key=lambda r: (-r.weight_avg, r.doc_index))[:config.n_top]
    return sorted(top, key=lambda r: r.doc_index)


def lead_k(doc, k=3):
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(doc[:k])
