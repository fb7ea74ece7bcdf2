"""Synthetic news-like article/summary pairs for overfitting and copy experiments.

Every pair names a unique made-up person who appears nowhere else in the corpus,
so a frequency-cut vocabulary leaves those names out-of-vocabulary and the only
way to reproduce them is the copy path.
"""

from collections import Counter

import numpy as np

from .extractor import lead_k
from .textproc import Example, build_vocab, encode_example, split_sentences, tokenize

ROLES = ["farmer", "teacher", "pilot", "doctor", "baker"]
CITIES = ["paris", "london", "tokyo", "cairo", "lima"]
EVENTS = ["race", "contest", "match", "award", "prize"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday"]
WEATHER = ["sunny", "cold", "windy", "mild"]

_SYLLABLES = ["zor", "bla", "quin", "vek", "mol", "tra", "dex", "pul", "rim", "sav", "gno", "fep"]

ARTICLE_TEMPLATES = [
    "{name} , a {role} from {city} , won the {event} on {day} . the crowd was large . "
    "the weather was {weather} . {name} thanked the fans .",
    "on {day} , {name} won the {event} in {city} . the {role} trained for years . "
    "the weather was {weather} . {name} said it felt great .",
]
SUMMARY_TEMPLATES = [
    "{name} won the {event} in {city} on {day} .",
    "{role} {name} won the {event} on {day} .",
]


def make_names(n, rng):
    names = set()
    while len(names) < n:
        names.add("".join(rng.choice(_SYLLABLES, size=3)))
    return sorted(names)


def toy_corpus(n=20, seed=0):
    """``n`` records of ``{"id", "article", "summary"}``."""
    rng = np.random.default_rng(seed)
    names = make_names(n, rng)
    out = []
    for i, name in enumerate(names):
        slots = dict(name=name, role=ROLES[i % 5], city=CITIES[(i // 5 + i) % 5],
                     event=EVENTS[(2 * i) % 5], day=DAYS[(3 * i + 1) % 5], weather=WEATHER[i % 4])
        k = i % 2
        out.append({"id": f"toy{i:02d}", "article": ARTICLE_TEMPLATES[k].format(**slots),
                    "summary": SUMMARY_TEMPLATES[k].format(**slots)})
    return out


def prepare(records, min_count=4, n_lead=3):
    """Tokenize records, attach lead-k extracts and encode against a frequency-cut vocabulary.

    Only tokens seen at least ``min_count`` times enter the vocabulary, which for
    :func:`toy_corpus` leaves exactly the per-record names out of vocabulary.
    Returns ``(examples, vocab, encoded)``.
    """
    examples = []
    for rec in records:
        article, summary = tokenize(rec["article"]), tokenize(rec["summary"])
        extract = [t for s in lead_k(split_sentences(article), n_lead) for t in s]
        examples.append(Example(article, summary, extract, rec["id"]).truncated())
    freq = Counter(t for ex in examples for t in ex.article_tokens + ex.summary_tokens)
    size = 4 + sum(1 for c in freq.values() if c >= min_count)
    vocab = build_vocab([ex.article_tokens + ex.summary_tokens for ex in examples], size)
    return examples, vocab, [encode_example(ex, vocab) for ex in examples]
