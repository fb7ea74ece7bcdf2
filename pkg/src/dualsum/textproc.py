"""Tokenization, vocabulary, corpus ingestion and extended-vocabulary encoding."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

PAD, UNK, START, STOP = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, START, STOP)
PAD_ID, UNK_ID, START_ID, STOP_ID = range(4)

MAX_ARTICLE_TOKENS = 400
MAX_SUMMARY_TOKENS = 100
DEFAULT_VOCAB_SIZE = 2000

_PUNCT = set('.,!?;:"()')
_SENTENCE_END = {".", "!", "?"}


def _split_word(word):
    lead, trail = [], []
    while word and word[0] in _PUNCT:
        lead.append(word[0])
        word = word[1:]
    while word and word[-1] in _PUNCT:
        trail.append(word[-1])
        word = word[:-1]
    return lead + ([word] if word else []) + trail[::-1]


def tokenize(text):
    """Lowercase, split on whitespace, peel punctuation off both ends of each word."""
    out = []
    for word in text.lower().split():
        out.extend(_split_word(word))
    return out


def split_sentences(text):
    sentences, cur = [], []
    for tok in tokenize(text) if isinstance(text, str) else text:
        cur.append(tok)
        if tok in _SENTENCE_END:
            sentences.append(cur)
            cur = []
    if cur:
        sentences.append(cur)
    return sentences


class Vocabulary:
    def __init__(self, tokens, counts=None):
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED:
            raise ValueError("vocabulary must start with the reserved tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.itos = tokens
        self.stoi = {t: i for i, t in enumerate(tokens)}
        self.counts = list(counts) if counts is not None else [0] * len(tokens)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token):
        return self.stoi.get(token, UNK_ID)

    def token(self, idx):
        return self.itos[idx]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for tok, cnt in zip(self.itos, self.counts):
                f.write(f"{tok}\t{cnt}\n")

    @classmethod
    def load(cls, path):
        tokens, counts = [], []
        with open(path, encoding="utf-8") as f:
            for line in f:
                tok, _, cnt = line.rstrip("\n").rpartition("\t")
                tokens.append(tok)
                counts.append(int(cnt))
        return cls(tokens, counts)


def build_vocab(corpus, max_size=DEFAULT_VOCAB_SIZE):
    """Reserved tokens, then the most frequent tokens (ties broken lexicographically)."""
    if max_size <= 4:
        raise ValueError("max_size must exceed the 4 reserved tokens")
    freq = Counter()
    for tokens in corpus:
        freq.update(t for t in tokens if t not in RESERVED)
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size - 4]
    return Vocabulary(list(RESERVED) + [t for t, _ in ranked],
                      [0] * 4 + [c for _, c in ranked])


@dataclass
class Example:
    article_tokens: list
    summary_tokens: list = field(default_factory=list)
    extract_tokens: list = field(default_factory=list)
    id: str = ""

    def truncated(self, max_article=MAX_ARTICLE_TOKENS, max_summary=MAX_SUMMARY_TOKENS):
        return Example(self.article_tokens[:max_article], self.summary_tokens[:max_summary],
                       self.extract_tokens[:max_article], self.id)


@dataclass
class EncodedExample:
    source_ids: list
    source_extended_ids: list
    oov_list: list
    extract_ids: list
    target_ids: list
    vocab_size: int
    id: str = ""

    @property
    def n_s(self):
        return len(self.source_ids)

    @property
    def n_e(self):
        return len(self.extract_ids)

    @property
    def n_oov(self):
        return len(self.oov_list)

    @property
    def decoder_input_ids(self):
        """START followed by the targets (minus the final STOP), extended ids folded to UNK."""
        return [START_ID] + [t if t < self.vocab_size else UNK_ID for t in self.target_ids[:-1]]


def encode_example(example, vocab):
    source_ids, extended, oovs = [], [], []
    oov_index = {}
    for tok in example.article_tokens:
        i = vocab.id(tok)
        source_ids.append(i)
        if i == UNK_ID:
            if tok not in oov_index:
                oov_index[tok] = len(oovs)
                oovs.append(tok)
            extended.append(len(vocab) + oov_index[tok])
        else:
            extended.append(i)
    targets = []
    for tok in example.summary_tokens:
        i = vocab.id(tok)
        if i == UNK_ID and tok in oov_index:
            i = len(vocab) + oov_index[tok]
        targets.append(i)
    targets.append(STOP_ID)
    return EncodedExample(source_ids, extended, oovs,
                          [vocab.id(t) for t in example.extract_tokens],
                          targets, len(vocab), example.id)


def ids_to_tokens(ids, vocab, oov_list):
    out = []
    for i in ids:
        if i < len(vocab):
            out.append(vocab.token(i))
        elif i < len(vocab) + len(oov_list):
            out.append(oov_list[i - len(vocab)])
        else:
            raise ValueError(f"id {i} outside extended vocabulary of size {len(vocab) + len(oov_list)}")
    return out


def read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{line_no}: {exc}") from None


def write_jsonl(records, path_or_file):
    if hasattr(path_or_file, "write"):
        for r in records:
            path_or_file.write(json.dumps(r) + "\n")
        return
    with open(path_or_file, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


def load_corpus(path, extract_fn=None):
    """Read ``{"article", "summary"[, "extract", "id"]}`` records into Examples.

    Empty articles are skipped with a warning. When a record has no ``extract``
    field, ``extract_fn(article_sentences)`` supplies one (a list of sentences).
    """
    examples = []
    for n, rec in enumerate(read_jsonl(path)):
        article = tokenize(rec.get("article", ""))
        ex_id = str(rec.get("id", n))
        if not article:
            log.warning("skipping empty article %s in %s", ex_id, Path(path).name)
            continue
        if "extract" in rec:
            extract = tokenize(rec["extract"])
        elif extract_fn is not None:
            extract = [t for s in extract_fn(split_sentences(article)) for t in s]
        else:
            extract = []
        examples.append(Example(article, tokenize(rec.get("summary", "")), extract, ex_id))
    return examples
