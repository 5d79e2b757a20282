"""Normalized posture embedding trained from matching-derived triplets.

A two-layer rectified encoder with a unit-norm output head is fit by a
margin ranking loss over (anchor, positive, negative) frame triples. The
positives come from exact per-chunk sequence matchings, the negatives from
percentile-thresholded mining in the current feature space, so the network
gradually reconciles many local correspondence sets into one consistent
representation. The first epoch bootstraps all similarities from
ZCA-whitened raw features; later epochs use the embedding itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    DegenerateInputError,
    DimensionError,
    Dataset,
    RngState,
    Sequence,
    as_frames,
    as_vector,
)
from .align import Chunk, MatchPenalties, Matching, _chunk_bounds, match_features

PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class EmbeddingModel:
    """Parameters of the encoder: relu hidden layer, affine head, l2-normalized output."""

    W1: np.ndarray  # (f, h)
    b1: np.ndarray  # (h,)
    W2: np.ndarray  # (h, d)
    b2: np.ndarray  # (d,)

    def __post_init__(self):
        for name in PARAM_NAMES:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise DegenerateInputError(f"parameter {name} contains non-finite values")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.W1.ndim != 2 or self.W2.ndim != 2:
            raise DimensionError("W1 and W2 must be matrices")
        if self.b1.shape != (self.W1.shape[1],) or self.b2.shape != (self.W2.shape[1],):
            raise DimensionError("bias shapes do not match weight matrices")
        if self.W1.shape[1] != self.W2.shape[0]:
            raise DimensionError("hidden dimensions of W1 and W2 disagree")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.W2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}


def init_embedding_model(input_dim: int, hidden_dim: int, embed_dim: int,
                         rng: RngState) -> EmbeddingModel:
    """Scaled-uniform random weights, zero biases."""
    g = rng.gen
    s1 = 1.0 / math.sqrt(input_dim)
    s2 = 1.0 / math.sqrt(hidden_dim)
    # nonzero output bias keeps the head away from the normalization singularity
    return EmbeddingModel(
        W1=g.uniform(-s1, s1, size=(input_dim, hidden_dim)),
        b1=g.uniform(-s1, s1, size=hidden_dim),
        W2=g.uniform(-s2, s2, size=(hidden_dim, embed_dim)),
        b2=g.uniform(-s2, s2, size=embed_dim),
    )


def _forward(model: EmbeddingModel, x: np.ndarray):
    """Batched forward pass keeping intermediates for backprop."""
    z1 = x @ model.W1 + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.W2 + model.b2
    norms = np.linalg.norm(z2, axis=1)
    if np.any(norms < 1e-12):
        raise DegenerateInputError("pre-normalization output collapsed to zero")
    y = z2 / norms[:, None]
    return y, (x, z1, a1, z2, norms)


def embed_batch(model: EmbeddingModel, frames) -> np.ndarray:
    """Embed an (n, f) array of frames to (n, d) unit-norm vectors."""
    x = as_frames(frames)
    if x.shape[1] != model.input_dim:
        raise DimensionError(
            f"frames have dimension {x.shape[1]}, model expects {model.input_dim}"
        )
    y, _ = _forward(model, x)
    return y


def embed_forward(model: EmbeddingModel, x) -> np.ndarray:
    """Embed a single frame to a unit-norm vector."""
    v = as_vector(x)
    return embed_batch(model, v[None, :])[0]


def triplet_loss(pa, pp, pn, delta: float) -> float:
    """Margin ranking hinge on squared distances: max(0, d(a,p) - d(a,n) + delta)."""
    if delta <= 0:
        raise ConfigError(f"margin must be positive, got {delta}")
    pa, pp, pn = as_vector(pa), as_vector(pp), as_vector(pn)
    if not (pa.shape == pp.shape == pn.shape):
        raise DimensionError("triplet members must share one dimension")
    dp = pa - pp
    dn = pa - pn
    return float(max(0.0, float(dp @ dp) - float(dn @ dn) + delta))


def _backprop(model: EmbeddingModel, cache, d_y: np.ndarray) -> dict[str, np.ndarray]:
    x, z1, a1, z2, norms = cache
    y = z2 / norms[:, None]
    # through the normalization layer: dz = (dy - y (y . dy)) / |z|
    d_z2 = (d_y - y * np.sum(y * d_y, axis=1, keepdims=True)) / norms[:, None]
    d_W2 = a1.T @ d_z2
    d_b2 = d_z2.sum(axis=0)
    d_a1 = d_z2 @ model.W2.T
    d_z1 = d_a1 * (z1 > 0)
    d_W1 = x.T @ d_z1
    d_b1 = d_z1.sum(axis=0)
    return {"W1": d_W1, "b1": d_b1, "W2": d_W2, "b2": d_b2}


def triplet_grad(model: EmbeddingModel, anchors, positives, negatives,
                 delta: float) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch hinge loss and its exact parameter gradient.

    Inactive hinges contribute zero loss and zero gradient. Returns
    ``(loss, grads)`` with one gradient array per parameter.
    """
    if delta <= 0:
        raise ConfigError(f"margin must be positive, got {delta}")
    a = as_frames(anchors)
    p = as_frames(positives)
    n = as_frames(negatives)
    if not (a.shape == p.shape == n.shape):
        raise DimensionError("anchor/positive/negative batches must share one shape")
    count = a.shape[0]

    stacked = np.concatenate([a, p, n], axis=0)
    y, cache = _forward(model, stacked)
    ya, yp, yn = y[:count], y[count:2 * count], y[2 * count:]

    dpos = ya - yp
    dneg = ya - yn
    pre = np.sum(dpos * dpos, axis=1) - np.sum(dneg * dneg, axis=1) + delta
    active = pre > 0
    loss = float(np.sum(np.maximum(pre, 0.0)) / count)

    scale = (2.0 / count) * active[:, None]
    d_ya = scale * (yn - yp)
    d_yp = -scale * dpos
    d_yn = scale * dneg
    d_y = np.concatenate([d_ya, d_yp, d_yn], axis=0)
    return loss, _backprop(model, cache, d_y)


@dataclass(frozen=True)
class Triplet:
    """Frame references (sequence id, frame index) for one ranking constraint."""

    anchor: tuple[str, int]
    positive: tuple[str, int]
    negative: tuple[str, int]

    def __post_init__(self):
        if self.positive == self.negative:
            raise ValueError("positive and negative must be distinct frames")
        if self.anchor[0] == self.positive[0]:
            raise ValueError("anchor and positive must come from different sequences")


def nearest_rank_percentile(values: np.ndarray, p: float) -> float:
    """Nearest-rank p-th percentile: the ceil(p/100 * N)-th smallest value."""
    if not 0 <= p <= 100:
        raise ConfigError(f"percentile must lie in [0, 100], got {p}")
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise DegenerateInputError("percentile of an empty distribution")
    k = max(1, math.ceil(p / 100.0 * v.size))
    return float(v[k - 1])


def _eligible_negatives(dists: np.ndarray, pos: int, p: float, window: int,
                        mining: str) -> np.ndarray:
    """Candidate negative indices under the percentile threshold.

    The threshold is taken over all chunk frames except the positive itself;
    the positive's +-window temporal neighbors are excluded from the draw.
    """
    candidates = np.ones(dists.size, dtype=bool)
    candidates[pos] = False
    pool = dists[candidates]
    if mining == "distance":
        thresh = nearest_rank_percentile(pool, p)
        ok = dists <= thresh
    elif mining == "similarity":
        thresh = nearest_rank_percentile(pool, 100.0 - p)
        ok = dists >= thresh
    else:
        raise ConfigError(f"unknown mining direction {mining!r}")
    idx = np.arange(dists.size)
    ok &= np.abs(idx - pos) > window
    return idx[ok]


def _sample_triplet_indices(pi: np.ndarray, chunk_feats: np.ndarray, p: float,
                            count: int, window: int, rng: RngState,
                            mining: str = "distance") -> list[tuple[int, int, int]]:
    """Draw (anchor_row, positive_local, negative_local) index triples."""
    anchors = np.flatnonzero(pi > 0)
    # a single-frame chunk has no candidate negatives at all
    if anchors.size == 0 or count < 1 or chunk_feats.shape[0] < 2:
        return []
    g = rng.gen
    diff = chunk_feats[:, None, :] - chunk_feats[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    out = []
    for _ in range(count):
        j = int(anchors[g.integers(anchors.size)])
        pos = int(pi[j]) - 1
        eligible = _eligible_negatives(d2[:, pos], pos, p, window, mining)
        if eligible.size == 0:
            continue
        neg = int(eligible[g.integers(eligible.size)])
        out.append((j, pos, neg))
    return out


def sample_triplets(query: Sequence, target_chunk: Chunk, matching: Matching,
                    model: EmbeddingModel, p: float, count: int, window: int,
                    rng: RngState, mining: str = "distance") -> list[Triplet]:
    """Turn one chunk matching into ranking triplets.

    Anchors are drawn uniformly from matched query frames, the positive is
    the matched chunk frame, and the negative is drawn uniformly from chunk
    frames inside the percentile-thresholded candidate set. Returns fewer
    than ``count`` triplets when anchors or eligible negatives run out; an
    all-outlier matching yields an empty list.
    """
    if len(matching.pi) != len(query):
        raise DimensionError("matching does not cover the query sequence")
    chunk_feats = embed_batch(model, target_chunk.frames)
    triples = _sample_triplet_indices(matching.pi, chunk_feats, p, count,
                                      window, rng, mining)
    off = target_chunk.offset
    tid = target_chunk.sequence_id
    return [
        Triplet(anchor=(query.id, j), positive=(tid, off + pos),
                negative=(tid, off + neg))
        for j, pos, neg in triples
    ]


def _descriptor_neighbors(descriptors: dict[str, np.ndarray], k: int) -> dict[str, list[str]]:
    ids = sorted(descriptors)
    mat = np.stack([descriptors[i] for i in ids])
    diff = mat[:, None, :] - mat[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    out = {}
    for i, sid in enumerate(ids):
        order = sorted((float(d2[i, j]), ids[j]) for j in range(len(ids)) if j != i)
        out[sid] = [other for _, other in order[:k]]
    return out


def sequence_neighbors(dataset: Dataset, model: EmbeddingModel, k: int) -> dict[str, list[str]]:
    """K nearest sequences per sequence, by mean-pooled embedded descriptor.

    Distances are squared euclidean between temporal-mean embeddings; the
    sequence itself is excluded and ties break by id order.
    """
    if k >= len(dataset):
        raise ConfigError(f"neighborhood size {k} must be < number of sequences {len(dataset)}")
    descriptors = {s.id: embed_batch(model, s.frames).mean(axis=0) for s in dataset}
    return _descriptor_neighbors(descriptors, k)


def augment(x, sigma: float, feature_std, rng: RngState) -> np.ndarray:
    """Add zero-mean gaussian jitter scaled per coordinate by the dataset spread."""
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return x.copy()
    std = np.asarray(feature_std, dtype=np.float64)
    return x + rng.gen.normal(0.0, 1.0, size=x.shape) * (sigma * std)


@dataclass(frozen=True)
class Whitener:
    """ZCA whitening map fit on a frame collection."""

    mean: np.ndarray
    transform: np.ndarray

    def __call__(self, frames) -> np.ndarray:
        x = np.asarray(frames, dtype=np.float64)
        return (x - self.mean) @ self.transform


def fit_whitener(frames, eps_scale: float = 0.02) -> Whitener:
    """Regularized ZCA: eigenvalues are floored at ``eps_scale`` times their
    mean so near-null noise directions are not blown up to unit variance."""
    x = as_frames(frames)
    mean = x.mean(axis=0)
    cov = np.cov(x - mean, rowvar=False, bias=True)
    cov = np.atleast_2d(cov)
    evals, evecs = np.linalg.eigh(cov)
    eps = eps_scale * float(evals.mean()) + 1e-12
    transform = evecs @ np.diag(1.0 / np.sqrt(evals + eps)) @ evecs.T
    return Whitener(mean=mean, transform=transform)


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of the embedding trainer."""

    triplets_per_batch: int = 300
    margin: float = 0.2
    percentile_start: float = 100.0
    percentile_step: float = 10.0
    percentile_floor: float = 30.0
    learning_rate: float = 0.01
    momentum: float = 0.9
    max_epochs: int = 30
    epsilon: float = 1e-4
    neighborhood_size: int = 10
    exclusion_window: int = 2
    noise_sigma: float = 0.05
    hidden_dim: int = 256
    embed_dim: int = 128
    pairs_per_epoch: int | None = None
    mining: str = "distance"
    bootstrap_epochs: int = 5

    def __post_init__(self):
        if self.triplets_per_batch < 1:
            raise ConfigError("triplets_per_batch must be >= 1")
        if not 0 <= self.percentile_start <= 100 or not 0 <= self.percentile_floor <= 100:
            raise ConfigError("percentiles must lie in [0, 100]")
        if self.margin <= 0:
            raise ConfigError("margin must be > 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.mining not in ("distance", "similarity"):
            raise ConfigError(f"unknown mining direction {self.mining!r}")
        if self.bootstrap_epochs < 1:
            raise ConfigError("bootstrap_epochs must be >= 1")

    def percentile_at(self, epoch: int) -> float:
        return max(self.percentile_floor,
                   self.percentile_start - self.percentile_step * epoch)


@dataclass
class TrainLog:
    """Per-batch losses plus per-epoch percentile and parameter movement."""

    batch_loss: list[float] = field(default_factory=list)
    batch_epoch: list[int] = field(default_factory=list)
    epoch_percentile: list[float] = field(default_factory=list)
    epoch_param_delta: list[float] = field(default_factory=list)
    converged: bool = False

    def mean_loss(self, epoch: int) -> float:
        losses = [l for l, e in zip(self.batch_loss, self.batch_epoch) if e == epoch]
        if not losses:
            raise ValueError(f"no batches recorded for epoch {epoch}")
        return float(np.mean(losses))

    @property
    def epochs_run(self) -> int:
        return len(self.epoch_percentile)


def _params_vector(model: EmbeddingModel) -> np.ndarray:
    return np.concatenate([getattr(model, n).ravel() for n in PARAM_NAMES])


def _apply_update(model: EmbeddingModel, velocity: dict[str, np.ndarray],
                  grads: dict[str, np.ndarray], lr: float,
                  momentum: float) -> EmbeddingModel:
    new = {}
    for name in PARAM_NAMES:
        velocity[name] = momentum * velocity[name] - lr * grads[name]
        new[name] = getattr(model, name) + velocity[name]
    return EmbeddingModel(**new)


def train(dataset: Dataset, config: TrainConfig,
          penalties: MatchPenalties | None = None, chunk_len: int = 40,
          rng: RngState | None = None) -> tuple[EmbeddingModel, TrainLog]:
    """Fit the embedding by alternating exact chunk matching and triplet descent.

    Each epoch samples sequence pairs from the neighborhood graph, solves the
    matching of the query against every target chunk, converts each chunk
    matching into a triplet batch (negatives mined at the epoch's percentile),
    and applies one momentum step per batch. The first ``bootstrap_epochs``
    epochs compute neighborhoods, matching costs, and mining distances on
    unit-normalized ZCA-whitened raw features; afterwards the current
    embedding takes over (it must first outgrow the bootstrap features, so
    switching too early stalls training). Stops when the parameter vector
    moves less than ``config.epsilon`` over an epoch or at ``max_epochs``.
    """
    if rng is None:
        rng = RngState(0)
    all_frames = dataset.all_frames()
    feature_std = all_frames.std(axis=0)
    whitener = fit_whitener(all_frames)

    def bootstrap_features(frames):
        w = whitener(frames)
        norms = np.maximum(np.linalg.norm(w, axis=1, keepdims=True), 1e-12)
        return w / norms

    model = init_embedding_model(dataset.dimension, config.hidden_dim,
                                 config.embed_dim, rng.split(0))
    velocity = {n: np.zeros_like(getattr(model, n)) for n in PARAM_NAMES}
    log = TrainLog()
    k = min(config.neighborhood_size, len(dataset) - 1)
    pairs_per_epoch = config.pairs_per_epoch or len(dataset)
    sequences = dataset.sequences
    g = rng.gen

    for epoch in range(config.max_epochs):
        p = config.percentile_at(epoch)
        if epoch < config.bootstrap_epochs:
            feats = {s.id: bootstrap_features(s.frames) for s in sequences}
        else:
            feats = {s.id: embed_batch(model, s.frames) for s in sequences}
        descriptors = {sid: f.mean(axis=0) for sid, f in feats.items()}
        neighbors = _descriptor_neighbors(descriptors, k)

        before = _params_vector(model)
        for _ in range(pairs_per_epoch):
            query = sequences[int(g.integers(len(sequences)))]
            nbr_ids = neighbors[query.id]
            target = dataset.by_id(nbr_ids[int(g.integers(len(nbr_ids)))])
            q_feats, t_feats = feats[query.id], feats[target.id]
            matchings = match_features(q_feats, t_feats, penalties=penalties,
                                       chunk_len=chunk_len)
            bounds = _chunk_bounds(t_feats.shape[0], chunk_len)
            for (start, end), matching in zip(bounds, matchings):
                chunk_feats = t_feats[start:end]
                triples = _sample_triplet_indices(
                    matching.pi, chunk_feats, p, config.triplets_per_batch,
                    config.exclusion_window, rng, config.mining)
                if not triples:
                    continue
                aj = [tr[0] for tr in triples]
                pj = [matching.target_offset + tr[1] for tr in triples]
                nj = [matching.target_offset + tr[2] for tr in triples]
                a = augment(query.frames[aj], config.noise_sigma, feature_std, rng)
                pos = augment(target.frames[pj], config.noise_sigma, feature_std, rng)
                neg = augment(target.frames[nj], config.noise_sigma, feature_std, rng)
                loss, grads = triplet_grad(model, a, pos, neg, config.margin)
                model = _apply_update(model, velocity, grads,
                                      config.learning_rate, config.momentum)
                log.batch_loss.append(loss)
                log.batch_epoch.append(epoch)

        delta = float(np.linalg.norm(_params_vector(model) - before))
        log.epoch_percentile.append(p)
        log.epoch_param_delta.append(delta)
        if delta <= config.epsilon:
            log.converged = True
            break

    return model, log
