"""Recurrent transition model over embedded frames.

A single gated recurrent (LSTM) layer consumes a short context of embedded
frames; an affine head maps the final hidden state back to embedding
dimension. Trained as plain euclidean regression onto the next frame's
embedding, it supports next-frame prediction, recursive activity synthesis
with nearest-neighbor decoding, and on-sphere feature interpolation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    DimensionError,
    Dataset,
    DegenerateInputError,
    RngState,
    Sequence,
    as_frames,
    l2_normalize,
    squared_l2,
)
from .embed import EmbeddingModel, embed_batch

logger = logging.getLogger(__name__)

PARAM_NAMES = ("Wx", "Wh", "b", "Wy", "by")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class RecurrentPredictor:
    """Gated recurrent cell plus affine head; hidden dim must exceed embed dim.

    Gate blocks are stored side by side in the (.., 4m) matrices in the order
    input, forget, candidate, output.
    """

    Wx: np.ndarray  # (d, 4m)
    Wh: np.ndarray  # (m, 4m)
    b: np.ndarray   # (4m,)
    Wy: np.ndarray  # (m, d)
    by: np.ndarray  # (d,)
    context_len: int = 4

    def __post_init__(self):
        for name in PARAM_NAMES:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise DegenerateInputError(f"parameter {name} contains non-finite values")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m = self.Wh.shape[0]
        d = self.Wx.shape[0]
        if self.Wx.shape[1] != 4 * m or self.Wh.shape[1] != 4 * m or self.b.shape != (4 * m,):
            raise DimensionError("gate parameter shapes are inconsistent")
        if self.Wy.shape != (m, d) or self.by.shape != (d,):
            raise DimensionError("head shapes do not match cell dimensions")
        if m <= d:
            raise ConfigError(f"hidden dim {m} must exceed embed dim {d}")
        if self.context_len < 1:
            raise ConfigError("context_len must be >= 1")

    @property
    def embed_dim(self) -> int:
        return self.Wx.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.Wh.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}


def init_predictor(embed_dim: int, hidden_dim: int = 512, context_len: int = 4,
                   rng: RngState | None = None) -> RecurrentPredictor:
    """Scaled-uniform weights, zero biases except a unit forget-gate bias.

    Gains assume unit-NORM input vectors (per-coordinate scale 1/sqrt(d), as
    produced by the normalized embedding): the input block is boosted so gate
    pre-activations reach O(1), the output head is shrunk to match unit-norm
    targets. With plain 1/sqrt(fan-in) scales the cell starts so quiet that
    gradient descent cannot even reach the copy-last-frame baseline.
    """
    if rng is None:
        rng = RngState(0)
    g = rng.gen
    m = hidden_dim
    sx = 6.0 / math.sqrt(embed_dim)
    sh = 2.0 / math.sqrt(m)
    sy = 0.3 / math.sqrt(m)
    b = np.zeros(4 * m)
    b[m:2 * m] = 1.0
    return RecurrentPredictor(
        Wx=g.uniform(-sx, sx, size=(embed_dim, 4 * m)),
        Wh=g.uniform(-sh, sh, size=(m, 4 * m)),
        b=b,
        Wy=g.uniform(-sy, sy, size=(m, embed_dim)),
        by=np.zeros(embed_dim),
        context_len=context_len,
    )


@dataclass(frozen=True)
class Context:
    """An ordered window of embedded frames ending at ``source`` (seq id, index)."""

    frames: np.ndarray
    source: tuple[str, int] = ("", -1)

    def __post_init__(self):
        frames = as_frames(self.frames, "context frames")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)


def _cell_forward(pred: RecurrentPredictor, x: np.ndarray):
    """Run the cell over (B, l, d) inputs; returns outputs and BPTT cache."""
    batch, steps, d = x.shape
    m = pred.hidden_dim
    h = np.zeros((batch, m))
    c = np.zeros((batch, m))
    cache = []
    for t in range(steps):
        z = x[:, t] @ pred.Wx + h @ pred.Wh + pred.b
        i = _sigmoid(z[:, :m])
        f = _sigmoid(z[:, m:2 * m])
        g = np.tanh(z[:, 2 * m:3 * m])
        o = _sigmoid(z[:, 3 * m:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        cache.append((x[:, t], h, c, i, f, g, o, tc))
        h = o * tc
        c = c_new
    y = h @ pred.Wy + pred.by
    return y, h, cache


def _cell_backward(pred: RecurrentPredictor, cache, h_last: np.ndarray,
                   d_y: np.ndarray) -> dict[str, np.ndarray]:
    m = pred.hidden_dim
    grads = {name: np.zeros_like(getattr(pred, name)) for name in PARAM_NAMES}
    grads["Wy"] = h_last.T @ d_y
    grads["by"] = d_y.sum(axis=0)
    dh = d_y @ pred.Wy.T
    dc = np.zeros_like(dh)
    for x_t, h_prev, c_prev, i, f, g, o, tc in reversed(cache):
        dc = dc + dh * o * (1.0 - tc * tc)
        do = dh * tc
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)],
            axis=1,
        )
        grads["Wx"] += x_t.T @ dz
        grads["Wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh = dz @ pred.Wh.T
        dc = dc * f
    return grads


def rnn_forward(pred: RecurrentPredictor, ctx) -> np.ndarray:
    """Predict the next embedding from an ordered context of embedded frames.

    The context runs through the gated cell from a zero initial state; the
    head output is returned as-is (not re-normalized).
    """
    frames = ctx.frames if isinstance(ctx, Context) else as_frames(ctx, "context")
    if frames.shape[1] != pred.embed_dim:
        raise DimensionError(
            f"context dimension {frames.shape[1]} != predictor dim {pred.embed_dim}"
        )
    y, _, _ = _cell_forward(pred, frames[None, :, :])
    return y[0]


def rnn_forward_batch(pred: RecurrentPredictor, contexts: np.ndarray) -> np.ndarray:
    """Vectorized :func:`rnn_forward` over a (B, l, d) stack of contexts."""
    contexts = np.asarray(contexts, dtype=np.float64)
    if contexts.ndim != 3 or contexts.shape[2] != pred.embed_dim:
        raise DimensionError(f"contexts must be (B, l, {pred.embed_dim})")
    y, _, _ = _cell_forward(pred, contexts)
    return y


def rnn_loss(prediction, target_embedding) -> float:
    """Squared euclidean regression loss."""
    return squared_l2(prediction, target_embedding)


def batch_loss_and_grad(pred: RecurrentPredictor, contexts: np.ndarray,
                        targets: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared-error over a (B, l, d) context batch, with exact BPTT gradient."""
    if contexts.ndim != 3 or targets.ndim != 2:
        raise DimensionError("contexts must be (B, l, d) and targets (B, d)")
    batch = contexts.shape[0]
    y, h_last, cache = _cell_forward(pred, contexts)
    resid = y - targets
    loss = float(np.sum(resid * resid) / batch)
    d_y = 2.0 * resid / batch
    return loss, _cell_backward(pred, cache, h_last, d_y)


@dataclass(frozen=True)
class PredictorConfig:
    hidden_dim: int = 512
    learning_rate: float = 0.02
    momentum: float = 0.9
    max_epochs: int = 20
    batch_size: int = 128
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("invalid predictor configuration")


@dataclass
class PredictorLog:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_param_delta: list[float] = field(default_factory=list)
    skipped_sequences: list[str] = field(default_factory=list)
    converged: bool = False


def _params_vector(pred: RecurrentPredictor) -> np.ndarray:
    return np.concatenate([getattr(pred, n).ravel() for n in PARAM_NAMES])


def _interleave(per_seq: list[list[int]]) -> list[int]:
    """Round-robin merge so every source sequence stays equally represented."""
    out = []
    cursors = [0] * len(per_seq)
    remaining = sum(len(s) for s in per_seq)
    while remaining:
        for i, seq in enumerate(per_seq):
            if cursors[i] < len(seq):
                out.append(seq[cursors[i]])
                cursors[i] += 1
                remaining -= 1
    return out


def train_predictor(dataset: Dataset, model: EmbeddingModel, context_len: int = 4,
                    config: PredictorConfig | None = None,
                    rng: RngState | None = None) -> tuple[RecurrentPredictor, PredictorLog]:
    """Fit the recurrent predictor on all (context, next frame) pairs.

    Every sequence longer than ``context_len`` contributes one training pair
    per valid window; the frozen embedding supplies the features. Batches
    interleave pairs round-robin across source sequences so no sequence
    dominates an update. Sequences too short for a single window are skipped
    with a warning; if everything is skipped the dataset is unusable.
    """
    if config is None:
        config = PredictorConfig()
    if rng is None:
        rng = RngState(0)
    if context_len < 1:
        raise ConfigError("context_len must be >= 1")

    log = PredictorLog()
    contexts, targets, seq_of_pair = [], [], []
    for s in dataset:
        if len(s) <= context_len:
            logger.warning("sequence %r has %d frames, needs > %d; skipped",
                           s.id, len(s), context_len)
            log.skipped_sequences.append(s.id)
            continue
        emb = embed_batch(model, s.frames)
        for t in range(context_len - 1, len(s) - 1):
            contexts.append(emb[t - context_len + 1:t + 1])
            targets.append(emb[t + 1])
            seq_of_pair.append(s.id)
    if not contexts:
        raise ConfigError("no sequence is longer than the context length")

    contexts = np.stack(contexts)
    targets = np.stack(targets)
    ids = sorted(set(seq_of_pair))
    by_seq = {sid: [i for i, p in enumerate(seq_of_pair) if p == sid] for sid in ids}

    pred = init_predictor(model.embed_dim, config.hidden_dim, context_len,
                          rng.split(0))
    velocity = {n: np.zeros_like(getattr(pred, n)) for n in PARAM_NAMES}
    g = rng.gen

    for _ in range(config.max_epochs):
        order = _interleave([
            [by_seq[sid][j] for j in g.permutation(len(by_seq[sid]))]
            for sid in ids
        ])
        before = _params_vector(pred)
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = batch_loss_and_grad(pred, contexts[batch], targets[batch])
            new = {}
            for name in PARAM_NAMES:
                velocity[name] = (config.momentum * velocity[name]
                                  - config.learning_rate * grads[name])
                new[name] = getattr(pred, name) + velocity[name]
            pred = RecurrentPredictor(**new, context_len=context_len)
            losses.append(loss)
        log.epoch_loss.append(float(np.mean(losses)))
        delta = float(np.linalg.norm(_params_vector(pred) - before))
        log.epoch_param_delta.append(delta)
        if delta <= config.epsilon:
            log.converged = True
            break

    return pred, log


def predict_next(pred: RecurrentPredictor, model: EmbeddingModel, frames) -> np.ndarray:
    """Embed the last ``context_len`` raw frames and predict the next embedding."""
    x = as_frames(frames, "frames")
    if x.shape[0] != pred.context_len:
        raise ConfigError(
            f"expected exactly {pred.context_len} frames, got {x.shape[0]}"
        )
    return rnn_forward(pred, embed_batch(model, x))


def synthesize(pred: RecurrentPredictor, model: EmbeddingModel, seed_frames,
               steps: int, codebook: Dataset | list[Sequence]) -> list[tuple[str, int]]:
    """Recursively predict embeddings and decode each by nearest codebook frame.

    The decoded frame's own embedding (not the raw prediction) is fed back
    into the context, which keeps the rollout on the embedding manifold.
    Returns the decoded (sequence id, frame index) trail, one per step.
    """
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    seqs = list(codebook.sequences) if isinstance(codebook, Dataset) else list(codebook)
    if not seqs:
        raise ConfigError("codebook is empty")
    refs = [(s.id, i) for s in seqs for i in range(len(s))]
    cb_emb = np.concatenate([embed_batch(model, s.frames) for s in seqs], axis=0)

    x = as_frames(seed_frames, "seed_frames")
    if x.shape[0] != pred.context_len:
        raise ConfigError(
            f"expected exactly {pred.context_len} seed frames, got {x.shape[0]}"
        )
    ctx = embed_batch(model, x)
    trail = []
    for _ in range(steps):
        guess = rnn_forward(pred, ctx)
        diff = cb_emb - guess
        j = int(np.argmin(np.sum(diff * diff, axis=1)))
        trail.append(refs[j])
        ctx = np.concatenate([ctx[1:], cb_emb[j][None, :]], axis=0)
    return trail


def interpolate_features(a, b, num_steps: int) -> list[np.ndarray]:
    """Evenly spaced chord interpolants between two embeddings, re-normalized.

    Returns unit-norm vectors at fractions i / (num_steps + 1) for
    i = 1..num_steps. Antipodal endpoints make the interpolant vanish.
    """
    if num_steps < 1:
        raise ConfigError("num_steps must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError("endpoints must share one dimension")
    out = []
    for i in range(1, num_steps + 1):
        alpha = i / (num_steps + 1)
        out.append(l2_normalize((1.0 - alpha) * a + alpha * b))
    return out
