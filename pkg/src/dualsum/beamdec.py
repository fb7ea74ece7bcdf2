"""Beam search over the extended vocabulary with per-hypothesis coverage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .textproc import START_ID, STOP_ID, UNK_ID, ids_to_tokens

BEAM_SIZE = 4
MIN_LEN = 35
MAX_LEN = 100


@dataclass
class Hypothesis:
    tokens: list
    log_probs: list
    state: tuple
    context: Tensor
    coverage: Tensor = None
    finished: bool = False

    @property
    def logprob(self):
        return float(sum(self.log_probs))

    @property
    def avg_logprob(self):
        return self.logprob / max(len(self.tokens), 1)

    @property
    def output_ids(self):
        return self.tokens[:-1] if self.finished else list(self.tokens)


@dataclass
class BeamResult:
    ids: list
    logprob: float
    avg_logprob: float
    finished: bool
    steps: list = field(default_factory=list)


def _step_log_probs(model, enc, ex, hyp, min_len):
    vocab_size = model.config.vocab_size
    y = hyp.tokens[-1] if hyp.tokens else START_ID
    if y >= vocab_size:
        y = UNK_ID
    out = model.decoder_step(hyp.state, y, hyp.context, enc, hyp.coverage,
                             ex.source_extended_ids, ex.n_oov)
    probs = out.dist.value.copy()
    if len(hyp.tokens) < min_len:
        probs[STOP_ID] = 0.0
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    cov = ad.add(hyp.coverage, out.alpha_s) if hyp.coverage is not None else None
    return logp, out, cov


def _initial(model, ex):
    if ad.current_graph() is not None:
        raise RuntimeError("decode outside of a recording Graph")
    enc = model.encode(ex)
    cov = Tensor(np.zeros(ex.n_s)) if model.config.use_coverage else None
    return enc, Hypothesis([], [], enc.init_state, model.initial_context(), cov)


def beam_search(model, ex, beam_size=BEAM_SIZE, min_len=MIN_LEN, max_len=MAX_LEN, trace=False):
    """Best hypothesis by length-normalized log-probability.

    Each step keeps the ``beam_size`` highest-scoring extensions; an extension that
    emits STOP takes its slot and moves to the finished pool. STOP is masked until
    a hypothesis has ``min_len`` tokens. Copied OOV tokens are fed back to the
    decoder as UNK. Search ends when no live hypothesis remains, at ``max_len``, or
    once ``beam_size`` hypotheses have finished and no live one scores above the
    worst of them.
    """
    enc, root = _initial(model, ex)
    hyps, results, steps = [root], [], []
    t = 0
    while t < max_len:
        candidates = []
        for h in hyps:
            logp, out, cov = _step_log_probs(model, enc, ex, h, min_len)
            top = np.argsort(-logp, kind="stable")[:2 * beam_size]
            for tok in top:
                if not np.isfinite(logp[tok]):
                    continue
                tok = int(tok)
                candidates.append(Hypothesis(h.tokens + [tok], h.log_probs + [float(logp[tok])],
                                             out.state, out.c_g, cov, tok == STOP_ID))
        candidates.sort(key=lambda c: -c.logprob)
        hyps = []
        for c in candidates[:beam_size]:
            (results if c.finished else hyps).append(c)
        results = sorted(results, key=lambda h: -h.avg_logprob)[:beam_size]
        if trace:
            steps.append([(list(h.tokens), h.logprob) for h in hyps])
        t += 1
        if not hyps:
            break
        if len(results) == beam_size and max(h.avg_logprob for h in hyps) <= results[-1].avg_logprob:
            break
    pool = results if results else hyps
    best = max(pool, key=lambda h: h.avg_logprob)
    return BeamResult(best.output_ids, best.logprob, best.avg_logprob, best.finished, steps)


def greedy_decode(model, ex, min_len=MIN_LEN, max_len=MAX_LEN):
    enc, h = _initial(model, ex)
    while len(h.tokens) < max_len:
        logp, out, cov = _step_log_probs(model, enc, ex, h, min_len)
        tok = int(np.argmax(logp))
        h = Hypothesis(h.tokens + [tok], h.log_probs + [float(logp[tok])], out.state, out.c_g, cov,
                       tok == STOP_ID)
        if h.finished:
            break
    return BeamResult(h.output_ids, h.logprob, h.avg_logprob, h.finished)


def detokenize(ids, vocab, oov_list):
    return " ".join(ids_to_tokens(ids, vocab, oov_list))
