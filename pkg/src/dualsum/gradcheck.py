"""Gradient check of the full model (dual attention + copying + coverage) at tiny dims."""

import numpy as np

from . import autodiff as ad
from .model import ModelConfig, Seq2SeqModel
from .textproc import STOP_ID, UNK_ID, EncodedExample

# Central differences in float64 resolve gradients down to roughly 1e-11 absolute
# for a loss near log(vocab); a step of 3e-4 with unit-scale weights keeps every
# entry well above that floor while truncation error stays below 1e-5.
REFERENCE_EPS = 3e-4
REFERENCE_INIT_SCALE = 1.0


def reference_example(vocab_size=20, n_s=6, n_e=3, n_steps=3, n_oov=2, seed=0):
    rng = np.random.default_rng(seed)
    source = [int(i) for i in rng.integers(4, vocab_size, size=n_s)]
    extended = list(source)
    oov_pos = rng.choice(n_s, size=n_oov, replace=False)
    for j, pos in enumerate(sorted(oov_pos)):
        source[pos] = UNK_ID
        extended[pos] = vocab_size + j
    extract = [int(i) for i in rng.integers(4, vocab_size, size=n_e)]
    # one copied OOV among the targets so the extended slots carry gradient
    targets = [vocab_size] + [int(i) for i in rng.integers(4, vocab_size, size=n_steps - 2)] + [STOP_ID]
    return EncodedExample(source, extended, [f"oov{j}" for j in range(n_oov)], extract,
                          targets, vocab_size)


def reference_model(seed=0, init_scale=REFERENCE_INIT_SCALE, **overrides):
    cfg = dict(vocab_size=20, emb_dim=4, hidden_dim=4, use_dual=True, use_pgn=True,
               use_coverage=True, seed=seed, init_scale=init_scale)
    cfg.update(overrides)
    return Seq2SeqModel(ModelConfig(**cfg))


def run_reference(seed=0, eps=REFERENCE_EPS, init_scale=REFERENCE_INIT_SCALE):
    """Per-parameter max relative errors for the reference tiny configuration."""
    model = reference_model(seed, init_scale)
    ex = reference_example(seed=seed)
    return ad.grad_errors(lambda params: model.sequence_loss(ex).loss, model.params.tensors, eps)
