"""WordNet lexicon loading (WNDB 3.0 files or a tab-separated fixture) and sense lookup."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .stopwords import DEFAULT_STOPWORDS

WORDNET_VERSION = "3.0"

# Fixed order in which senses of a multi-POS lemma are concatenated.
POS_ORDER = ("n", "v", "a", "r")
POS_FILES = {"n": "noun", "v": "verb", "a": "adj", "r": "adv"}
_POS_ALIASES = {"n": "n", "noun": "n", "v": "v", "verb": "v", "a": "a", "s": "a",
                "adj": "a", "r": "r", "adv": "r"}

_TOKEN_RE = re.compile(r"[^\W_]+")
_ADJ_MARKER_RE = re.compile(r"\((a|p|ip)\)$")


class WordNetError(Exception):
    pass


class ParseError(WordNetError):
    def __init__(self, message, line_no):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IntegrityError(WordNetError):
    pass


def normalize_pos(pos):
    try:
        return _POS_ALIASES[pos.lower()]
    except KeyError:
        raise ValueError(f"unknown part of speech {pos!r}") from None


def normalize_gloss(raw, stopwords=DEFAULT_STOPWORDS):
    """Lowercase, split on non-alphanumeric runs, drop stop words, deduplicate."""
    return frozenset(t for t in _TOKEN_RE.findall(raw.lower()) if t not in stopwords)


@dataclass(frozen=True)
class Synset:
    id: tuple[str, int]
    lemmas: tuple[str, ...]
    gloss_raw: str
    gloss_tokens: frozenset

    def __post_init__(self):
        if not self.lemmas:
            raise ValueError(f"synset {self.id} has no lemmas")


@dataclass
class Lexicon:
    """Synsets keyed by ``(pos, offset)`` plus a ``(lemma, pos) -> [synset id]`` index.

    Treat instances as read-only once built; ``merge`` returns a new lexicon.
    """

    synsets: dict = field(default_factory=dict)
    index: dict = field(default_factory=dict)
    stopwords: frozenset = DEFAULT_STOPWORDS
    version: str = WORDNET_VERSION

    def senses(self, lemma):
        out = []
        seen = set()
        for pos in POS_ORDER:
            for sid in self.index.get((lemma, pos), ()):
                if sid not in seen:
                    seen.add(sid)
                    out.append(self.synsets[sid])
        return out

    def sense_count(self, lemma):
        return len(self.senses(lemma))

    def lemmas(self):
        return sorted({lemma for lemma, _ in self.index})

    def merge(self, other):
        if self.stopwords != other.stopwords:
            raise ValueError("cannot merge lexicons built with different stop-word lists")
        synsets = {**self.synsets, **other.synsets}
        index = {k: list(v) for k, v in self.index.items()}
        for key, ids in other.index.items():
            bucket = index.setdefault(key, [])
            bucket.extend(i for i in ids if i not in bucket)
        return Lexicon(synsets, index, self.stopwords, self.version)

    def __len__(self):
        return len(self.synsets)


def senses(lexicon, lemma):
    return lexicon.senses(lemma)


def _strip_lemma(word):
    return _ADJ_MARKER_RE.sub("", word).lower()


def _parse_data_line(line, line_no, pos, stopwords):
    head, sep, gloss = line.partition("|")
    if not sep:
        raise ParseError("missing '|' gloss separator", line_no)
    fields = head.split()
    if len(fields) < 4:
        raise ParseError("too few fields before gloss", line_no)
    try:
        offset = int(fields[0])
        w_cnt = int(fields[3], 16)
    except ValueError:
        raise ParseError("bad offset or word count", line_no) from None
    words = fields[4:4 + 2 * w_cnt:2]
    # the pointer count must follow the word/lex_id pairs
    if w_cnt < 1 or len(fields) < 5 + 2 * w_cnt or not fields[4 + 2 * w_cnt].isdigit():
        raise ParseError(f"expected {w_cnt} word/lex_id pairs", line_no)
    gloss = gloss.strip()
    return Synset((pos, offset), tuple(_strip_lemma(w) for w in words), gloss,
                  normalize_gloss(gloss, stopwords))


def _parse_index_line(line, line_no):
    fields = line.split()
    try:
        lemma = fields[0].lower()
        synset_cnt = int(fields[2])
        p_cnt = int(fields[3])
        offsets = [int(x) for x in fields[6 + p_cnt:]]
    except (IndexError, ValueError):
        raise ParseError("malformed index entry", line_no) from None
    if len(offsets) != synset_cnt:
        raise ParseError(f"expected {synset_cnt} offsets, found {len(offsets)}", line_no)
    return lemma, offsets


def _content_lines(text):
    for line_no, line in enumerate(text.splitlines(), start=1):
        # License header lines start with two spaces.
        if line.startswith("  ") or not line.strip():
            continue
        yield line_no, line


def parse_wndb(index_text, data_text, pos, stopwords=DEFAULT_STOPWORDS):
    """Parse one ``index.<pos>`` / ``data.<pos>`` pair into a partial Lexicon."""
    pos = normalize_pos(pos)
    synsets = {}
    for line_no, line in _content_lines(data_text):
        syn = _parse_data_line(line, line_no, pos, stopwords)
        synsets[syn.id] = syn

    index = {}
    for line_no, line in _content_lines(index_text):
        lemma, offsets = _parse_index_line(line, line_no)
        ids = []
        for off in offsets:
            sid = (pos, off)
            if sid not in synsets:
                raise IntegrityError(
                    f"index line {line_no}: {lemma!r} references offset {off:08d} absent from data")
            ids.append(sid)
        index[(lemma, pos)] = ids
    return Lexicon(synsets, index, frozenset(stopwords))


def load_wndb(directory, stopwords=DEFAULT_STOPWORDS):
    """Load every ``index.<pos>``/``data.<pos>`` pair present in ``directory``."""
    directory = Path(directory)
    lex = Lexicon(stopwords=frozenset(stopwords))
    found = False
    for pos in POS_ORDER:
        name = POS_FILES[pos]
        idx, dat = directory / f"index.{name}", directory / f"data.{name}"
        if idx.exists() and dat.exists():
            found = True
            part = parse_wndb(idx.read_text(encoding="utf-8", errors="replace"),
                              dat.read_text(encoding="utf-8", errors="replace"),
                              pos, stopwords)
            lex = lex.merge(part)
    if not found:
        raise FileNotFoundError(f"no WNDB index/data pairs in {directory}")
    return lex


def parse_fixture_lexicon(text, stopwords=DEFAULT_STOPWORDS):
    """Parse ``lemma<TAB>pos<TAB>gloss`` lines; each line becomes its own synset.

    The line number doubles as the synthetic offset, so every line maps to exactly
    one synset.
    """
    synsets, index = {}, {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", line_no)
        lemma, pos, gloss = parts[0].strip().lower(), parts[1].strip(), parts[2].strip()
        if not lemma:
            raise ParseError("empty lemma", line_no)
        try:
            pos = normalize_pos(pos)
        except ValueError as exc:
            raise ParseError(str(exc), line_no) from None
        syn = Synset((pos, line_no), (lemma,), gloss, normalize_gloss(gloss, stopwords))
        synsets[syn.id] = syn
        index.setdefault((lemma, pos), []).append(syn.id)
    return Lexicon(synsets, index, frozenset(stopwords))


def load_lexicon(path, stopwords=DEFAULT_STOPWORDS):
    """A directory is read as WNDB; a file as the fixture format."""
    path = Path(path)
    if path.is_dir():
        return load_wndb(path, stopwords)
    return parse_fixture_lexicon(path.read_text(encoding="utf-8"), stopwords)
