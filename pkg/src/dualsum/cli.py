"""Command-line entry point: extract, train, decode, evaluate, gradcheck, wordnet-inspect."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .extractor import ExtractConfig, lead_k, rank_document
from .stopwords import load_stopwords
from .textproc import (build_vocab, encode_example, load_corpus, read_jsonl, split_sentences,
                       write_jsonl)
from .wordnet import WORDNET_VERSION, load_lexicon

log = logging.getLogger("dualsum")

# Published reference settings, plus desk-scale defaults for the rest.
DEFAULTS = {
    "n_win": 5, "n_top": 3,
    "emb_dim": 128, "hidden_dim": 256,
    "lr": 0.15, "adagrad_init_acc": 0.1, "clip_norm": 2.0, "batch_size": 4,
    "beam_size": 4, "min_len": 35, "max_len": 100,
    "max_article": 400, "max_summary": 100, "lambda_cov": 1.0,
    "vocab_size": 2000, "max_steps": 1000, "coverage_phase_steps": 0,
    "init_scale": 0.02, "use_dual": True, "use_pgn": True,
    "method": "lead3", "seed": 0,
}

REFERENCE_DEFAULTS = ("n_win", "n_top", "emb_dim", "hidden_dim", "lr", "adagrad_init_acc", "clip_norm",
                  "beam_size", "min_len", "max_article", "max_summary", "lambda_cov")


class UsageError(Exception):
    pass


def _opt(parser, flag, key, type_, help_):
    parser.add_argument(flag, dest=key, type=type_, default=None,
                        help=f"{help_} (default: {DEFAULTS[key]})")


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def effective_config(args):
    """Defaults, then the ``--config`` JSON file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        loaded = json.loads(path.read_text())
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _require_file(path):
    if not Path(path).exists():
        raise UsageError(f"file not found: {path}")
    return path


def _extract_fn(cfg, lexicon_path, stopwords_path):
    if cfg["method"] == "lead3":
        return lambda sents: lead_k(sents, cfg["n_top"])
    if cfg["method"] != "wordnet":
        raise UsageError(f"unknown extraction method {cfg['method']!r}")
    if not lexicon_path:
        raise UsageError("--method wordnet needs --lexicon (WNDB directory or fixture file)")
    lexicon = load_lexicon(_require_file(lexicon_path), load_stopwords(stopwords_path))
    ecfg = ExtractConfig(cfg["n_win"], cfg["n_top"])

    def fn(sents):
        return [sents[r.doc_index] for r in rank_document(sents, lexicon, ecfg)]
    return fn


def _write_meta(out_path, cfg, **extra):
    meta = {"dualsum_version": __version__, "config": cfg, **extra}
    Path(str(out_path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


# ---------------------------------------------------------------------------
# subcommands


def cmd_extract(args):
    cfg = effective_config(args)
    _require_file(args.corpus)
    lexicon = None
    if cfg["method"] == "wordnet":
        if not args.lexicon:
            raise UsageError("--method wordnet needs --lexicon (WNDB directory or fixture file)")
        lexicon = load_lexicon(_require_file(args.lexicon), load_stopwords(args.stopwords))
    elif cfg["method"] != "lead3":
        raise UsageError(f"unknown extraction method {cfg['method']!r}")
    ecfg = ExtractConfig(cfg["n_win"], cfg["n_top"])
    records = []
    for n, rec in enumerate(read_jsonl(args.corpus)):
        doc_id = str(rec.get("id", n))
        sents = split_sentences(rec.get("article", ""))
        if lexicon is not None:
            for r in rank_document(sents, lexicon, ecfg):
                records.append({"doc_id": doc_id, "sentence_index": r.doc_index,
                                "weight": float(r.weight_avg), "text": " ".join(sents[r.doc_index])})
        else:
            for i, s in enumerate(lead_k(sents, cfg["n_top"])):
                records.append({"doc_id": doc_id, "sentence_index": i, "weight": None,
                                "text": " ".join(s)})
    out = _open_out(args.out)
    try:
        write_jsonl(records, out)
    finally:
        if args.out:
            out.close()
    if args.out:
        _write_meta(args.out, cfg, wordnet_version=WORDNET_VERSION if lexicon else None)
    return 0


def _load_examples(args, cfg):
    fn = _extract_fn(cfg, args.lexicon, args.stopwords) if cfg["use_dual"] else None
    examples = load_corpus(_require_file(args.corpus), fn)
    return [ex.truncated(cfg["max_article"], cfg["max_summary"]) for ex in examples]


def cmd_train(args):
    from .model import ModelConfig, Seq2SeqModel
    from .trainer import TrainConfig, train

    cfg = effective_config(args)
    examples = _load_examples(args, cfg)
    if not examples:
        raise UsageError("training corpus has no usable examples")
    vocab = build_vocab([ex.article_tokens + ex.summary_tokens for ex in examples], cfg["vocab_size"])
    encoded = [encode_example(ex, vocab) for ex in examples]
    model = Seq2SeqModel(ModelConfig(
        vocab_size=len(vocab), emb_dim=cfg["emb_dim"], hidden_dim=cfg["hidden_dim"],
        use_dual=cfg["use_dual"], use_pgn=cfg["use_pgn"], lambda_cov=cfg["lambda_cov"],
        seed=cfg["seed"], init_scale=cfg["init_scale"]))
    tcfg = TrainConfig(
        lr=cfg["lr"], adagrad_init_acc=cfg["adagrad_init_acc"], clip_norm=cfg["clip_norm"],
        batch_size=cfg["batch_size"], max_steps=cfg["max_steps"],
        coverage_phase_steps=cfg["coverage_phase_steps"], lambda_cov=cfg["lambda_cov"],
        seed=cfg["seed"], checkpoint_every=args.checkpoint_every)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab.save(out_dir / "vocab.txt")
    (out_dir / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    trace = train(model, encoded, tcfg, out_dir, vocab)
    print(json.dumps({"steps": len(trace), "final_loss": trace[-1].loss,
                      "checkpoint": str(out_dir / "checkpoint_final.npz")}))
    return 0


def cmd_decode(args):
    from .beamdec import beam_search, detokenize
    from .model import load_checkpoint

    cfg = effective_config(args)
    model, vocab, meta = load_checkpoint(_require_file(args.checkpoint))
    if vocab is None:
        raise UsageError("checkpoint carries no vocabulary")
    cfg["use_dual"] = model.config.use_dual
    examples = _load_examples(args, cfg)
    out = _open_out(args.out)
    try:
        for ex in examples:
            enc = encode_example(ex, vocab)
            res = beam_search(model, enc, cfg["beam_size"], cfg["min_len"], cfg["max_len"])
            out.write(json.dumps({"id": ex.id, "summary": detokenize(res.ids, vocab, enc.oov_list),
                                  "logprob": res.logprob}) + "\n")
    finally:
        if args.out:
            out.close()
    if args.out:
        _write_meta(args.out, cfg, checkpoint=str(args.checkpoint), model_config=meta["config"])
    return 0


def cmd_evaluate(args):
    from .rouge import corpus_eval

    hyps = {str(r["id"]): r["summary"] for r in read_jsonl(_require_file(args.hypotheses))}
    refs = {str(r["id"]): r["summary"] for r in read_jsonl(_require_file(args.references))}
    missing = sorted(set(refs) - set(hyps))
    if missing:
        raise UsageError(f"{len(missing)} reference ids have no hypothesis, e.g. {missing[0]!r}")
    pairs = [(split_sentences(hyps[i]), split_sentences(refs[i])) for i in sorted(refs)]
    scores = corpus_eval(pairs)
    doc = {m: {"precision": s.precision, "recall": s.recall, "f1": s.f1} for m, s in scores.items()}
    doc["n"] = len(pairs)
    doc["config"] = effective_config(args)
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_gradcheck(args):
    from .gradcheck import REFERENCE_EPS, run_reference

    eps = args.eps if args.eps is not None else REFERENCE_EPS
    errors = run_reference(seed=args.seed or 0, eps=eps)
    if args.per_param:
        for name, err in sorted(errors.items()):
            print(f"{name:12s} {err:.3e}")
    print(f"max_relative_error {max(errors.values()):.3e}")
    return 0


def cmd_wordnet_inspect(args):
    lexicon = load_lexicon(_require_file(args.lexicon), load_stopwords(args.stopwords))
    out = []
    for syn in lexicon.senses(args.lemma.lower()):
        out.append({"pos": syn.id[0], "offset": syn.id[1], "lemmas": list(syn.lemmas),
                    "gloss": syn.gloss_raw, "gloss_tokens": sorted(syn.gloss_tokens)})
    print(json.dumps({"lemma": args.lemma.lower(), "sense_count": len(out),
                      "wordnet_version": lexicon.version, "senses": out}, indent=2))
    return 0


# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="JSON file of settings (flags override it)")
    p.add_argument("--seed", type=int, default=None, help=f"random seed (default: {DEFAULTS['seed']})")


def _add_extract_opts(p):
    p.add_argument("--method", dest="method", choices=["wordnet", "lead3"], default=None,
                   help=f"extractive encoder input (default: {DEFAULTS['method']})")
    _opt(p, "--n-top", "n_top", int, "sentences to extract")
    _opt(p, "--n-win", "n_win", int, "keyword window size")
    p.add_argument("--lexicon", help="WNDB dict directory or lemma<TAB>pos<TAB>gloss fixture file")
    p.add_argument("--stopwords", help="whitespace-separated stop-word file")


def _add_model_opts(p):
    _opt(p, "--emb-dim", "emb_dim", int, "word embedding size")
    _opt(p, "--hidden-dim", "hidden_dim", int, "LSTM hidden size")
    _opt(p, "--vocab-size", "vocab_size", int, "vocabulary size incl. 4 reserved tokens")
    _opt(p, "--max-article", "max_article", int, "article truncation in tokens")
    _opt(p, "--max-summary", "max_summary", int, "summary truncation in tokens")
    _opt(p, "--use-dual", "use_dual", _bool, "use the extractive encoder and gated dual attention")
    _opt(p, "--use-pgn", "use_pgn", _bool, "use the pointer-generator")
    _opt(p, "--init-scale", "init_scale", float, "uniform init range")


def build_parser():
    epilog = "reference defaults: " + ", ".join(f"{k}={DEFAULTS[k]}" for k in REFERENCE_DEFAULTS)
    parser = argparse.ArgumentParser(prog="dualsum", description=__doc__, epilog=epilog)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="rank sentences (wordnet) or take the lead-k", epilog=epilog)
    p.add_argument("corpus", help="JSONL with an 'article' field (and optional 'id')")
    p.add_argument("--out", help="output JSONL (default: stdout)")
    _add_extract_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model", epilog=epilog)
    p.add_argument("corpus", help="JSONL with 'article' and 'summary'")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--checkpoint-every", type=int, default=0)
    _add_extract_opts(p)
    _add_model_opts(p)
    _opt(p, "--lr", "lr", float, "Adagrad learning rate")
    _opt(p, "--adagrad-init-acc", "adagrad_init_acc", float, "Adagrad initial accumulator")
    _opt(p, "--clip-norm", "clip_norm", float, "global gradient-norm clip")
    _opt(p, "--batch-size", "batch_size", int, "examples per step")
    _opt(p, "--max-steps", "max_steps", int, "steps without coverage")
    _opt(p, "--coverage-steps", "coverage_phase_steps", int, "fine-tuning steps with coverage")
    _opt(p, "--lambda-cov", "lambda_cov", float, "coverage loss weight")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="beam-search summaries", epilog=epilog)
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("--out")
    _add_extract_opts(p)
    _opt(p, "--beam-size", "beam_size", int, "beam width")
    _opt(p, "--min-len", "min_len", int, "minimum summary tokens")
    _opt(p, "--max-len", "max_len", int, "maximum summary tokens")
    _opt(p, "--max-article", "max_article", int, "article truncation in tokens")
    _add_common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="ROUGE-1/2/L F1 of hypotheses against references")
    p.add_argument("hypotheses", help="JSONL of {id, summary}")
    p.add_argument("references", help="JSONL of {id, summary}")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full tiny model")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--per-param", action="store_true", help="print each parameter's max error")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("wordnet-inspect", help="list a lemma's senses and glosses")
    p.add_argument("lemma")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--stopwords")
    p.set_defaults(func=cmd_wordnet_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"dualsum {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
