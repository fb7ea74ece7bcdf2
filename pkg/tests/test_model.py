import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import dualsum.autodiff as ad
from dualsum.autodiff import Graph, Tensor, backward
from dualsum.gradcheck import reference_example, reference_model, run_reference
from dualsum.model import (ModelConfig, Seq2SeqModel, attend_extract, attend_source,
                           baseline_decoder_step, coverage_loss, coverage_update,
                           encode_extract, encode_source, gate_contexts, init_params,
                           load_checkpoint, pointer_mix, save_checkpoint, step_loss)
from dualsum.textproc import EncodedExample, build_vocab

from oracles import np_attention, np_decode

ENCODERS = [("src", encode_source), ("ext", encode_extract)]


def tiny(seed=0, init_scale=0.5, **kw):
    cfg = dict(vocab_size=12, emb_dim=3, hidden_dim=2, seed=seed, init_scale=init_scale)
    cfg.update(kw)
    return Seq2SeqModel(ModelConfig(**cfg))


def tiny_example(seed=0, n_s=5, n_e=3, n_oov=2, V=12):
    rng = np.random.default_rng(seed)
    src = [int(i) for i in rng.integers(4, V, size=n_s)]
    ext = list(src)
    for j in range(n_oov):
        src[j * 2] = 1
        ext[j * 2] = V + j
    targets = [V + 1, int(rng.integers(4, V)), V, int(rng.integers(4, V)), 3]
    return EncodedExample(src, ext, [f"o{j}" for j in range(n_oov)],
                          [int(i) for i in rng.integers(4, V, size=n_e)], targets, V)


def values(model):
    return {k: t.value for k, t in model.params}


def test_config_defaults():
    cfg = ModelConfig(vocab_size=10)
    assert (cfg.emb_dim, cfg.hidden_dim, cfg.lambda_cov) == (128, 256, 1.0)


def test_init_is_seeded_and_bounded():
    a, b = init_params(ModelConfig(10, 4, 3, seed=5)), init_params(ModelConfig(10, 4, 3, seed=5))
    for (k, t), (_, u) in zip(a, b):
        assert np.array_equal(t.value, u.value)
        if k.endswith("_b") and t.shape == (12,):
            assert np.all(t.value[3:6] == 1.0)
        else:
            assert np.all(np.abs(t.value) <= 0.02)


@pytest.mark.parametrize("prefix, encode", ENCODERS)
def test_encoder_shapes_and_empty_input(prefix, encode):
    m = tiny()
    assert encode(m.params, [5]).shape == (1, 4)
    assert encode(m.params, [5, 6, 7]).shape == (3, 4)
    with pytest.raises(ValueError):
        encode(m.params, [])


@pytest.mark.parametrize("prefix, encode", ENCODERS)
def test_encoder_zero_weights_gives_zero_states(prefix, encode):
    m = tiny()
    for _, t in m.params:
        t.value[...] = 0.0
    assert np.all(encode(m.params, [4, 5, 6]).value == 0.0)


@pytest.mark.parametrize("prefix, encode", ENCODERS)
def test_encoder_reversal_swaps_directions(prefix, encode):
    m = tiny(hidden_dim=4, emb_dim=4)
    for part in ("wx", "wh", "b"):
        m.params[f"{prefix}_bw_{part}"].value[...] = m.params[f"{prefix}_fw_{part}"].value
    ids = [4, 7, 5, 9, 6]
    fwd = encode(m.params, ids).value
    rev = encode(m.params, ids[::-1]).value
    np.testing.assert_allclose(rev[::-1, 4:], fwd[:, :4], atol=1e-15)
    np.testing.assert_allclose(rev[::-1, :4], fwd[:, 4:], atol=1e-15)


@pytest.mark.parametrize("attend, ch", [(attend_source, "s"), (attend_extract, "e")])
def test_attention_examples(attend, ch):
    m = tiny()
    P = values(m)
    rng = np.random.default_rng(1)
    s = Tensor(rng.normal(size=2))
    h1 = Tensor(rng.normal(size=(1, 4)))
    alpha, ctx = attend(m.params, s, h1)
    assert alpha.value.tolist() == [1.0]
    np.testing.assert_allclose(ctx.value, h1.value[0], atol=1e-15)
    same = Tensor(np.tile(rng.normal(size=4), (3, 1)))
    np.testing.assert_allclose(attend(m.params, s, same)[0].value, np.full(3, 1 / 3), atol=1e-15)
    h3 = rng.normal(size=(3, 4))
    alpha, ctx = attend(m.params, s, Tensor(h3))
    a_ref, c_ref = np_attention(P, ch, s.value, h3)
    np.testing.assert_allclose(alpha.value, a_ref, atol=1e-12)
    np.testing.assert_allclose(ctx.value, c_ref, atol=1e-12)


def test_source_attention_with_coverage_matches_oracle():
    m = tiny()
    rng = np.random.default_rng(2)
    s, h, cov = rng.normal(size=2), rng.normal(size=(3, 4)), np.array([0.0, 0.7, 1.3])
    alpha, ctx = attend_source(m.params, Tensor(s), Tensor(h), Tensor(cov))
    a_ref, c_ref = np_attention(values(m), "s", s, h, cov)
    np.testing.assert_allclose(alpha.value, a_ref, atol=1e-12)
    np.testing.assert_allclose(ctx.value, c_ref, atol=1e-12)


def test_gate_identity_and_zero_weights():
    m = tiny()
    v = Tensor(np.array([0.3, -1.0, 2.0, 0.5]))
    np.testing.assert_allclose(gate_contexts(m.params, v, v)[0].value, v.value, atol=1e-15)
    m.params.gate_w.value[...] = 0.0
    m.params.gate_b.value[...] = 0.0
    a, b = Tensor(np.ones(4)), Tensor(np.array([3.0, -1.0, 0.0, 1.0]))
    c_g, g = gate_contexts(m.params, a, b)
    assert np.all(g.value == 0.5)
    np.testing.assert_allclose(c_g.value, (a.value + b.value) / 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_gate_output_between_inputs(seed):
    rng = np.random.default_rng(seed)
    m = tiny(seed=seed % 100, init_scale=3.0)
    a, b = rng.normal(size=4) * 5, rng.normal(size=4) * 5
    c_g = gate_contexts(m.params, Tensor(a), Tensor(b))[0].value
    assert np.all(c_g >= np.minimum(a, b) - 1e-12)
    assert np.all(c_g <= np.maximum(a, b) + 1e-12)


def test_pointer_mix_examples():
    pv = Tensor(np.array([0.1, 0.2, 0.3, 0.4]))
    alpha = Tensor(np.array([0.2, 0.5, 0.3]))
    out = pointer_mix(1.0, pv, alpha, [0, 5, 1], 2).value
    np.testing.assert_array_equal(out, [0.1, 0.2, 0.3, 0.4, 0.0, 0.0])
    out = pointer_mix(0.0, pv, alpha, [2, 1, 2], 0).value
    assert out[2] == pytest.approx(0.5, abs=1e-15)
    out = pointer_mix(0.5, pv, Tensor(np.array([0.4, 0.6])), [4, 0], 1).value
    assert out[4] == pytest.approx(0.2, abs=1e-15)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)


def test_coverage_update_examples():
    assert np.all(coverage_update([], n_s=3).value == 0)
    np.testing.assert_array_equal(coverage_update([Tensor(np.array([0.5, 0.5]))]).value, [0.5, 0.5])
    rng = np.random.default_rng(0)
    alphas = [Tensor(rng.dirichlet(np.ones(6))) for _ in range(7)]
    for t in range(1, 8):
        assert coverage_update(alphas[:t]).value.sum() == pytest.approx(t, abs=1e-12)


def test_step_loss_examples():
    d = Tensor(np.array([0.0, 1.0, 0.0]))
    assert step_loss(d, 1).item() == pytest.approx(0.0, abs=1e-11)
    alpha, cov = Tensor(np.array([0.3, 0.7])), Tensor(np.array([0.5, 0.5]))
    assert coverage_loss(alpha, cov).item() == pytest.approx(0.8, abs=1e-15)
    total = step_loss(d, 1, alpha, cov, lambda_cov=1.0).item()
    assert total == pytest.approx(0.8, abs=1e-11)
    with pytest.raises(ValueError):
        step_loss(d, 3)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 5), st.floats(0.0, 3.0))
def test_covloss_bounded_and_monotone(seed, i, bump):
    rng = np.random.default_rng(seed)
    alpha = rng.dirichlet(np.ones(6))
    cov = rng.uniform(0, 4, size=6)
    base = coverage_loss(Tensor(alpha), Tensor(cov)).item()
    assert base <= 1.0 + 1e-12
    cov2 = cov.copy()
    cov2[i] += bump
    assert coverage_loss(Tensor(alpha), Tensor(cov2)).item() >= base


@pytest.mark.parametrize("flags", [
    (True, True, True, 1.0), (True, True, False, 1.0), (False, True, True, 0.5),
    (True, False, False, 1.0), (False, False, False, 1.0),
])
def test_teacher_forced_steps_match_numpy_oracle(flags):
    use_dual, use_pgn, use_cov, lam = flags
    m = tiny(seed=3, use_dual=use_dual, use_pgn=use_pgn, use_coverage=use_cov, lambda_cov=lam)
    ex = tiny_example(seed=3)
    res = m.sequence_loss(ex, keep_steps=True)
    ref_steps, ref_loss = np_decode(values(m), ex, flags)
    assert res.loss.item() == pytest.approx(ref_loss, abs=1e-12)
    for out, ref in zip(res.steps, ref_steps):
        np.testing.assert_allclose(out.dist.value, ref["dist"], atol=1e-12)
        np.testing.assert_allclose(out.alpha_s.value, ref["alpha_s"], atol=1e-12)
        np.testing.assert_allclose(out.c_g.value, ref["c_g"], atol=1e-12)
        np.testing.assert_allclose(out.state[0].value, ref["s"], atol=1e-12)
        if use_dual:
            np.testing.assert_allclose(out.alpha_e.value, ref["alpha_e"], atol=1e-12)
        if use_pgn:
            assert out.p_gen.item() == pytest.approx(ref["p_gen"], abs=1e-12)
        if use_cov:
            np.testing.assert_allclose(out.coverage.value, ref["coverage"], atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_step_output_distributions(seed):
    m = tiny(seed=seed, init_scale=2.0, use_coverage=True)
    ex = tiny_example(seed=seed)
    for out in m.sequence_loss(ex, keep_steps=True).steps:
        for d in (out.dist, out.p_vocab, out.alpha_s, out.alpha_e):
            assert d.value.sum() == pytest.approx(1.0, abs=1e-6)
            assert np.all(d.value >= 0)
        assert 0 < out.p_gen.item() < 1
        assert np.all(out.coverage.value >= 0)
        assert out.dist.shape == (m.config.vocab_size + ex.n_oov,)


def test_oov_slots_get_exactly_copy_mass():
    m = tiny(seed=1, init_scale=1.0)
    ex = tiny_example(seed=1)
    V = m.config.vocab_size
    for out in m.sequence_loss(ex, keep_steps=True).steps:
        mass = sum(out.alpha_s.value[i] for i, w in enumerate(ex.source_extended_ids) if w >= V)
        assert out.dist.value[V:].sum() == pytest.approx((1 - out.p_gen.item()) * mass, abs=1e-15)


def test_single_encoder_reduces_to_baseline():
    m = tiny(seed=4, use_dual=False, use_pgn=False, use_coverage=False)
    ex = tiny_example(seed=4)
    enc = m.encode(ex)
    state, cg = enc.init_state, m.initial_context()
    state_b, c_b = enc.init_state, m.initial_context()
    for y in ex.decoder_input_ids:
        out = m.decoder_step(state, y, cg, enc)
        pv, alpha, ctx, state_b = baseline_decoder_step(m.params, state_b, y, c_b, enc)
        assert np.array_equal(out.c_g.value, out.c_s.value)
        assert out.dist is out.p_vocab
        np.testing.assert_array_equal(out.dist.value, pv.value)
        np.testing.assert_array_equal(out.alpha_s.value, alpha.value)
        state, cg, c_b = out.state, out.c_g, ctx


def test_decoder_rejects_extended_input():
    m = tiny()
    ex = tiny_example()
    enc = m.encode(ex)
    with pytest.raises(ValueError):
        m.decoder_step(enc.init_state, 12, m.initial_context(), enc, None, ex.source_extended_ids, 2)


def test_empty_extract_falls_back():
    m = tiny()
    ex = tiny_example()
    ex.extract_ids = []
    assert np.isfinite(m.sequence_loss(ex).loss.item())


@pytest.mark.parametrize("seed", range(3))
def test_full_model_gradient_check(seed):
    errs = run_reference(seed)
    assert max(errs.values()) < 1e-4, errs
    assert set(errs) == {k for k, _ in reference_model(seed).params}


def test_every_parameter_receives_gradient():
    model = reference_model(0)
    ex = reference_example()
    with Graph() as g:
        loss = model.sequence_loss(ex).loss
    backward(g, loss)
    for name, t in model.params:
        assert np.any(t.grad != 0), name


def test_checkpoint_round_trip_bit_exact(tmp_path):
    m = tiny(seed=9, use_coverage=True, lambda_cov=0.25)
    vocab = build_vocab([["a", "b", "b"]], 10)
    save_checkpoint(tmp_path / "ck.npz", m, vocab, {"step": 7})
    m2, v2, meta = load_checkpoint(tmp_path / "ck.npz")
    assert m2.config == m.config
    assert v2.itos == vocab.itos
    assert meta["extra"] == {"step": 7}
    for (k, t), (k2, t2) in zip(m.params, m2.params):
        assert k == k2 and t.value.tobytes() == t2.value.tobytes()
    ex = tiny_example()
    assert m.sequence_loss(ex).loss.item() == m2.sequence_loss(ex).loss.item()


def test_checkpoint_rejects_bad_format(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, __meta__=np.array('{"format": 99}'))
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_forward_only_builds_no_tape():
    m = tiny()
    ex = tiny_example()
    with Graph() as g:
        pass
    m.sequence_loss(ex)
    assert len(g) == 0 and ad.current_graph() is None
