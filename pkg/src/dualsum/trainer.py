"""Teacher-forced training: Adagrad, global-norm clipping, two-phase coverage schedule."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .model import save_checkpoint

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 0.15
    adagrad_init_acc: float = 0.1
    clip_norm: float = 2.0
    batch_size: int = 4
    max_steps: int = 1000
    coverage_phase_steps: int = 0
    lambda_cov: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0


def adagrad_step(params, grads, acc, lr):
    """In place: ``acc += g**2``; ``theta -= lr * g / sqrt(acc)``.

    ``params``, ``grads`` and ``acc`` are dicts of arrays keyed by parameter name.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    for name, g in grads.items():
        acc[name] += g * g
        params[name] -= lr * g / np.sqrt(acc[name])
    return params, acc


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_global_norm(grads, max_norm):
    if not max_norm > 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    factor = max_norm / norm
    return {k: g * factor for k, g in grads.items()}


def batch_loss(model, batch):
    """Mean over the batch of each example's per-step mean loss (Graph must be active)."""
    total, nll, cov = None, 0.0, 0.0
    for ex in batch:
        seq = model.sequence_loss(ex)
        total = seq.loss if total is None else ad.add(total, seq.loss)
        nll += seq.nll
        cov += seq.covloss
    n = len(batch)
    return ad.scale(total, 1.0 / n), nll / n, cov / n


def _batches(n, batch_size, rng):
    while True:
        order = rng.permutation(n)
        for i in range(0, n, batch_size):
            chunk = order[i:i + batch_size]
            if len(chunk) < batch_size and n >= batch_size:
                # pad the tail from the head of the next shuffle to keep batch size fixed
                chunk = np.concatenate([chunk, rng.permutation(n)[:batch_size - len(chunk)]])
            yield chunk


@dataclass
class TraceRow:
    step: int
    loss: float
    covloss: float
    phase: str


def train(model, examples, config, out_dir=None, vocab=None, callback=None):
    """Train ``model`` in place and return the loss trace.

    Runs ``max_steps`` without coverage, then ``coverage_phase_steps`` with coverage
    switched on. With ``out_dir`` the trace is written to ``loss.csv`` and
    checkpoints to ``checkpoint_<step>.npz`` / ``checkpoint_final.npz``.
    """
    examples = [ex for ex in examples if ex.n_s > 0]
    if not examples:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(config.seed)
    batches = _batches(len(examples), config.batch_size, rng)
    params = {name: t.value for name, t in model.params}
    acc = {name: np.full_like(v, config.adagrad_init_acc) for name, v in params.items()}
    model.config.lambda_cov = config.lambda_cov
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    trace = []
    phases = [("base", config.max_steps, False), ("coverage", config.coverage_phase_steps, True)]
    step = 0
    for phase, n_steps, use_cov in phases:
        if n_steps <= 0:
            continue
        model.config.use_coverage = use_cov
        for _ in range(n_steps):
            batch = [examples[i] for i in next(batches)]
            model.params.zero_grad()
            with ad.Graph() as g:
                loss, nll, cov = batch_loss(model, batch)
            ad.backward(g, loss)
            grads = clip_global_norm({name: t.grad for name, t in model.params}, config.clip_norm)
            adagrad_step(params, grads, acc, config.lr)
            step += 1
            row = TraceRow(step, loss.item(), cov, phase)
            trace.append(row)
            if callback is not None:
                callback(row)
            if step % 100 == 0:
                log.info("step %d loss %.4f covloss %.4f", step, row.loss, row.covloss)
            if out_dir is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
                save_checkpoint(out_dir / f"checkpoint_{step}.npz", model, vocab)
    if out_dir is not None:
        write_trace(trace, out_dir / "loss.csv")
        save_checkpoint(out_dir / "checkpoint_final.npz", model, vocab)
    return trace


def write_trace(trace, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "loss", "covloss"])
        for r in trace:
            w.writerow([r.step, repr(r.loss), repr(r.covloss)])
