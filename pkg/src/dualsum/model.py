"""Dual-attention encoders-decoder with pointer-generator and coverage.

Two BiLSTM encoders (source article, extracted sentences) share one embedding
table with a unidirectional LSTM decoder. At each step the decoder attends over
both encoders, fuses the two context vectors with an elementwise gate, and mixes
the vocabulary softmax with a copy distribution over source positions. Coverage
and copying apply to the source channel only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .textproc import UNK_ID

CHECKPOINT_FORMAT = 1
NLL_FLOOR = 1e-12


@dataclass
class ModelConfig:
    vocab_size: int
    emb_dim: int = 128
    hidden_dim: int = 256
    use_dual: bool = True
    use_pgn: bool = True
    use_coverage: bool = False
    lambda_cov: float = 1.0
    seed: int = 0
    init_scale: float = 0.02

    @property
    def attn_dim(self):
        return 2 * self.hidden_dim


def _param_shapes(cfg):
    V, E, H, A = cfg.vocab_size, cfg.emb_dim, cfg.hidden_dim, cfg.attn_dim
    shapes = {"embedding": (V, E)}
    for enc in ("src_fw", "src_bw", "ext_fw", "ext_bw", "dec"):
        shapes[f"{enc}_wx"] = (E, 4 * H)
        shapes[f"{enc}_wh"] = (H, 4 * H)
        shapes[f"{enc}_b"] = (4 * H,)
    shapes.update({
        "reduce_h_w": (2 * H, H), "reduce_h_b": (H,),
        "reduce_c_w": (2 * H, H), "reduce_c_b": (H,),
        # source attention, coverage feature included
        "attn_s_v": (A,), "attn_s_w1": (H, A), "attn_s_w2": (2 * H, A),
        "attn_s_w3": (A,), "attn_s_b": (A,),
        # extract attention
        "attn_e_v": (A,), "attn_e_w1": (H, A), "attn_e_w2": (2 * H, A), "attn_e_b": (A,),
        "gate_w": (4 * H, 2 * H), "gate_b": (2 * H,),
        "in_w1": (E, E), "in_w2": (2 * H, E), "in_b": (E,),
        "out_w1": (H, V), "out_w2": (2 * H, V), "out_b": (V,),
        "pgen_w1": (2 * H,), "pgen_w2": (H,), "pgen_w3": (E,), "pgen_b": (),
    })
    return shapes


class ModelParams:
    """Named parameter tensors with attribute access (``params.gate_w``)."""

    def __init__(self, tensors):
        object.__setattr__(self, "tensors", dict(tensors))

    def __getattr__(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise AttributeError(name) from None

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.items())

    def __len__(self):
        return len(self.tensors)

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def n_values(self):
        return sum(t.size for t in self.tensors.values())

    def copy(self):
        return ModelParams({k: ad.parameter(t.value.copy(), k) for k, t in self.tensors.items()})


def init_params(cfg):
    rng = np.random.default_rng(cfg.seed)
    s = cfg.init_scale
    H = cfg.hidden_dim
    tensors = {}
    for name, shape in _param_shapes(cfg).items():
        value = rng.uniform(-s, s, size=shape)
        if name.endswith("_b") and shape == (4 * H,) and name[:-2] in ("src_fw", "src_bw", "ext_fw", "ext_bw", "dec"):
            value[H:2 * H] = 1.0
        tensors[name] = ad.parameter(value, name)
    return ModelParams(tensors)


# ---------------------------------------------------------------------------
# encoders


def _lstm_run(params, prefix, x, reverse):
    n = x.shape[0]
    H = params[f"{prefix}_wh"].shape[0]
    xp = ad.add_rows(ad.matmul(x, params[f"{prefix}_wx"]), params[f"{prefix}_b"])
    h, c = Tensor(np.zeros(H)), Tensor(np.zeros(H))
    outs = [None] * n
    for t in (range(n - 1, -1, -1) if reverse else range(n)):
        hc = ad.lstm_cell(ad.index(xp, t), h, c, params[f"{prefix}_wh"])
        h, c = ad.index(hc, slice(0, H)), ad.index(hc, slice(H, 2 * H))
        outs[t] = h
    return ad.stack(outs), h, c


def bilstm(params, prefix, ids):
    """Returns per-position ``[forward; backward]`` states plus both final (h, c) pairs."""
    if len(ids) == 0:
        raise ValueError(f"{prefix} encoder needs at least one token")
    x = ad.embedding(params.embedding, ids)
    fw, fh, fc = _lstm_run(params, f"{prefix}_fw", x, reverse=False)
    bw, bh, bc = _lstm_run(params, f"{prefix}_bw", x, reverse=True)
    return ad.concat([fw, bw], axis=1), (fh, fc), (bh, bc)


def encode_source(params, source_ids):
    return bilstm(params, "src", source_ids)[0]


def encode_extract(params, extract_ids):
    return bilstm(params, "ext", extract_ids)[0]


@dataclass
class EncoderStates:
    h_s: Tensor
    h_e: Optional[Tensor]
    init_state: tuple
    # h @ W2 for every position, reused by every decoder step
    feat_s: Tensor = None
    feat_e: Optional[Tensor] = None


def reduce_state(params, fw_final, bw_final):
    h = ad.tanh(ad.add(ad.matmul(ad.concat([fw_final[0], bw_final[0]]), params.reduce_h_w), params.reduce_h_b))
    c = ad.tanh(ad.add(ad.matmul(ad.concat([fw_final[1], bw_final[1]]), params.reduce_c_w), params.reduce_c_b))
    return h, c


# ---------------------------------------------------------------------------
# attention and fusion


def attention(v, w1, b, s_t, h, feat, w3=None, coverage=None):
    """Additive attention: softmax over ``v . tanh(W1 s + W2 h_i [+ w3 cov_i] + b)``."""
    query = ad.add(ad.matmul(s_t, w1), b)
    pre = ad.add_rows(feat, query)
    if coverage is not None:
        pre = ad.add(pre, ad.outer(coverage, w3))
    alpha = ad.softmax(ad.matmul(ad.tanh(pre), v))
    return alpha, ad.matmul(alpha, h)


def attend_source(params, s_t, h_s, coverage=None, feat=None):
    if feat is None:
        feat = ad.matmul(h_s, params.attn_s_w2)
    return attention(params.attn_s_v, params.attn_s_w1, params.attn_s_b, s_t, h_s, feat,
                     params.attn_s_w3, coverage)


def attend_extract(params, s_t, h_e, feat=None):
    if feat is None:
        feat = ad.matmul(h_e, params.attn_e_w2)
    return attention(params.attn_e_v, params.attn_e_w1, params.attn_e_b, s_t, h_e, feat)


def gate_contexts(params, c_s, c_e):
    """Elementwise gate ``g`` and fused context ``g*c_s + (1-g)*c_e``."""
    if c_s.shape != c_e.shape:
        raise ad.ShapeError(f"gate_contexts: {c_s.shape} vs {c_e.shape}")
    g = ad.sigmoid(ad.add(ad.matmul(ad.concat([c_s, c_e]), params.gate_w), params.gate_b))
    return ad.add(ad.mul(g, c_s), ad.mul(ad.sub(1.0, g), c_e)), g


def pointer_mix(p_gen, p_vocab, alpha_s, source_extended_ids, n_oov):
    """Extended distribution ``p_gen*P_vocab + (1-p_gen)*(attention summed per token)``."""
    p_gen = ad.constant(p_gen)
    gen = ad.mul(p_gen, p_vocab)
    if n_oov:
        gen = ad.concat([gen, Tensor(np.zeros(n_oov))])
    copy = ad.scatter_add(ad.mul(ad.sub(1.0, p_gen), alpha_s), source_extended_ids,
                          p_vocab.shape[0] + n_oov)
    return ad.add(gen, copy)


def coverage_update(prev_alphas, n_s=None):
    """Running sum of earlier source attention distributions (zeros before step 0)."""
    if not prev_alphas:
        if n_s is None:
            raise ValueError("n_s is required when there are no prior steps")
        return Tensor(np.zeros(n_s))
    cov = Tensor(np.zeros(prev_alphas[0].shape[0]))
    for a in prev_alphas:
        cov = ad.add(cov, a)
    return cov


def coverage_loss(alpha_s, coverage):
    return ad.sum(ad.minimum(alpha_s, coverage))


def step_loss(dist, target, alpha_s=None, coverage=None, lambda_cov=1.0):
    """``-log(dist[target] + 1e-12)``, plus ``lambda * sum(min(alpha, cov))`` when coverage is given."""
    if not 0 <= target < dist.shape[0]:
        raise ValueError(f"target id {target} outside distribution of size {dist.shape[0]}")
    nll = ad.scale(ad.pick_log_prob(dist, target, NLL_FLOOR), -1.0)
    if coverage is None:
        return nll
    return ad.add(nll, ad.scale(coverage_loss(alpha_s, coverage), lambda_cov))


# ---------------------------------------------------------------------------
# decoder


@dataclass
class StepOutput:
    dist: Tensor
    p_vocab: Tensor
    alpha_s: Tensor
    alpha_e: Optional[Tensor]
    p_gen: Optional[Tensor]
    c_s: Tensor
    c_e: Optional[Tensor]
    c_g: Tensor
    gate: Optional[Tensor]
    coverage: Optional[Tensor]
    state: tuple
    x: Tensor


@dataclass
class SeqLoss:
    loss: Tensor
    nll: float
    covloss: float
    steps: list = field(default_factory=list)


class Seq2SeqModel:
    def __init__(self, config, params=None):
        self.config = config
        self.params = params if params is not None else init_params(config)

    @property
    def context_dim(self):
        return 2 * self.config.hidden_dim

    def encode(self, ex):
        p, cfg = self.params, self.config
        h_s, fw, bw = bilstm(p, "src", ex.source_ids)
        h_e = feat_e = None
        if cfg.use_dual:
            ext = ex.extract_ids if len(ex.extract_ids) else ex.source_ids[:1]
            h_e = bilstm(p, "ext", ext)[0]
            feat_e = ad.matmul(h_e, p.attn_e_w2)
        return EncoderStates(h_s, h_e, reduce_state(p, fw, bw),
                             ad.matmul(h_s, p.attn_s_w2), feat_e)

    def initial_context(self):
        return Tensor(np.zeros(self.context_dim))

    def decoder_input(self, y_prev, cg_prev):
        p = self.params
        emb = ad.index(ad.embedding(p.embedding, [y_prev]), 0)
        return ad.add(ad.add(ad.matmul(emb, p.in_w1), ad.matmul(cg_prev, p.in_w2)), p.in_b)

    def decoder_step(self, state, y_prev, cg_prev, enc, coverage=None, source_extended_ids=None, n_oov=0):
        """One decoding step. ``y_prev`` must already be an in-vocabulary id."""
        p, cfg = self.params, self.config
        if y_prev >= cfg.vocab_size:
            raise ValueError("decoder input must be folded to UNK before decoder_step")
        if cfg.use_coverage and coverage is None:
            raise ValueError("coverage vector required when use_coverage is set")
        x = self.decoder_input(y_prev, cg_prev)
        H = cfg.hidden_dim
        hc = ad.lstm_cell(ad.add(ad.matmul(x, p.dec_wx), p.dec_b), state[0], state[1], p.dec_wh)
        s_t, c_t = ad.index(hc, slice(0, H)), ad.index(hc, slice(H, 2 * H))

        cov = coverage if cfg.use_coverage else None
        alpha_s, c_s = attend_source(p, s_t, enc.h_s, cov, enc.feat_s)
        alpha_e = c_e = gate = None
        if cfg.use_dual:
            alpha_e, c_e = attend_extract(p, s_t, enc.h_e, enc.feat_e)
            c_g, gate = gate_contexts(p, c_s, c_e)
        else:
            c_g = c_s
        logits = ad.add(ad.add(ad.matmul(s_t, p.out_w1), ad.matmul(c_g, p.out_w2)), p.out_b)
        p_vocab = ad.softmax(logits)

        p_gen = None
        dist = p_vocab
        if cfg.use_pgn:
            p_gen = ad.sigmoid(ad.add(ad.add(ad.add(
                ad.matmul(c_s, p.pgen_w1), ad.matmul(s_t, p.pgen_w2)), ad.matmul(x, p.pgen_w3)), p.pgen_b))
            if source_extended_ids is None:
                raise ValueError("source_extended_ids required when use_pgn is set")
            dist = pointer_mix(p_gen, p_vocab, alpha_s, source_extended_ids, n_oov)
        return StepOutput(dist, p_vocab, alpha_s, alpha_e, p_gen, c_s, c_e, c_g, gate,
                          coverage, (s_t, c_t), x)

    def sequence_loss(self, ex, keep_steps=False):
        """Teacher-forced loss averaged over decoder steps."""
        cfg = self.config
        enc = self.encode(ex)
        state, cg = enc.init_state, self.initial_context()
        coverage = Tensor(np.zeros(ex.n_s)) if cfg.use_coverage else None
        losses, nll_sum, cov_sum, steps = [], 0.0, 0.0, []
        for y_prev, target in zip(ex.decoder_input_ids, ex.target_ids):
            out = self.decoder_step(state, y_prev, cg, enc, coverage, ex.source_extended_ids, ex.n_oov)
            if not cfg.use_pgn and target >= cfg.vocab_size:
                target = UNK_ID
            loss_t = step_loss(out.dist, target)
            nll_sum += loss_t.item()
            if coverage is not None:
                covloss = coverage_loss(out.alpha_s, coverage)
                cov_sum += covloss.item()
                loss_t = ad.add(loss_t, ad.scale(covloss, cfg.lambda_cov))
                coverage = ad.add(coverage, out.alpha_s)
            losses.append(loss_t)
            if keep_steps:
                steps.append(out)
            state, cg = out.state, out.c_g
        n = len(losses)
        total = losses[0]
        for l in losses[1:]:
            total = ad.add(total, l)
        return SeqLoss(ad.scale(total, 1.0 / n), nll_sum / n, cov_sum / n, steps)


def baseline_decoder_step(params, state, y_prev, c_prev, enc):
    """Plain attentional decoder step (no extract encoder, no copying, no coverage).

    Returns ``(p_vocab, alpha_s, c_s, (s_t, c_t))``.
    """
    H = params.dec_wh.shape[0]
    emb = ad.index(ad.embedding(params.embedding, [y_prev]), 0)
    x = ad.add(ad.add(ad.matmul(emb, params.in_w1), ad.matmul(c_prev, params.in_w2)), params.in_b)
    hc = ad.lstm_cell(ad.add(ad.matmul(x, params.dec_wx), params.dec_b), state[0], state[1], params.dec_wh)
    s_t, c_t = ad.index(hc, slice(0, H)), ad.index(hc, slice(H, 2 * H))
    alpha, ctx = attention(params.attn_s_v, params.attn_s_w1, params.attn_s_b, s_t, enc.h_s,
                           ad.matmul(enc.h_s, params.attn_s_w2))
    logits = ad.add(ad.add(ad.matmul(s_t, params.out_w1), ad.matmul(ctx, params.out_w2)), params.out_b)
    return ad.softmax(logits), alpha, ctx, (s_t, c_t)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model, vocab=None, extra=None):
    meta = {"format": CHECKPOINT_FORMAT, "config": asdict(model.config), "extra": extra or {}}
    if vocab is not None:
        meta["vocab"] = {"tokens": vocab.itos, "counts": vocab.counts}
    arrays = {f"param/{k}": t.value for k, t in model.params}
    with open(path, "wb") as f:
        np.savez(f, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Returns ``(model, vocab_or_None, meta)``."""
    from .textproc import Vocabulary

    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {meta.get('format')!r}")
        tensors = {k[len("param/"):]: ad.parameter(data[k].copy(), k[len("param/"):])
                   for k in data.files if k.startswith("param/")}
    config = ModelConfig(**meta["config"])
    expected = _param_shapes(config)
    for name, shape in expected.items():
        if name not in tensors or tensors[name].shape != shape:
            raise ValueError(f"checkpoint parameter {name!r} missing or misshapen")
    vocab = None
    if "vocab" in meta:
        vocab = Vocabulary(meta["vocab"]["tokens"], meta["vocab"]["counts"])
    return Seq2SeqModel(config, ModelParams({k: tensors[k] for k in expected})), vocab, meta
