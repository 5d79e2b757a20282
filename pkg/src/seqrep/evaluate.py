"""Quantitative evaluation against synthetic ground truth.

Metrics mirror the standard protocols at desk scale: frame retrieval scored
by ROC AUC against latent-pose ground truth, zero-shot pose transfer by
nearest-neighbor latent adoption, next-frame prediction against a k-nearest
-neighbor bar, correspondence accuracy against known resampling alignments,
a 2D principal-component projection of the embedding, and agglomerative
condensation into representative postures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.stats import rankdata

from .core import ConfigError, Dataset, DimensionError, RngState
from .align import Matching
from .embed import EmbeddingModel, embed_batch
from .dynamics import RecurrentPredictor, rnn_forward_batch


def _sequence_features(dataset: Dataset, embedder) -> list[np.ndarray]:
    """Per-sequence feature arrays from a model or any frames->features callable."""
    if isinstance(embedder, EmbeddingModel):
        return [embed_batch(embedder, s.frames) for s in dataset]
    if callable(embedder):
        return [np.asarray(embedder(s.frames), dtype=np.float64) for s in dataset]
    raise ConfigError(f"cannot embed with object of type {type(embedder).__name__}")


def _require_latents(dataset: Dataset):
    if any(s.latent is None for s in dataset):
        raise ConfigError("this metric needs latent ground truth on every sequence")


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)


def roc_auc(scores_pos: np.ndarray, scores_neg: np.ndarray) -> float:
    """Rank-based (Mann-Whitney) AUC with tie correction."""
    pos = np.asarray(scores_pos, dtype=np.float64)
    neg = np.asarray(scores_neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ConfigError("AUC needs at least one positive and one negative")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def default_pose_epsilon(dataset: Dataset, percentile: float = 5.0) -> float:
    """Instance-relative match threshold: a low percentile of latent distances."""
    _require_latents(dataset)
    z = np.concatenate([s.latent for s in dataset], axis=0)
    d = np.sqrt(_sqdist(z, z))
    iu = np.triu_indices(d.shape[0], k=1)
    return float(np.percentile(d[iu], percentile))


def retrieval_auc_from_features(dataset: Dataset, features: list[np.ndarray],
                                pose_epsilon: float | None = None,
                                num_queries: int = 500,
                                rng: RngState | None = None) -> tuple[float, list[float]]:
    """Mean per-query ROC AUC of other-sequence retrieval by feature distance.

    A candidate counts as a true match when its latent pose lies within
    ``pose_epsilon`` of the query's. Queries whose candidate set is all-
    positive or all-negative are skipped.
    """
    _require_latents(dataset)
    if len(features) != len(dataset):
        raise DimensionError("one feature array per sequence required")
    if pose_epsilon is None:
        pose_epsilon = default_pose_epsilon(dataset)
    if rng is None:
        rng = RngState(0)

    lat = [s.latent for s in dataset]
    seq_of = np.concatenate([np.full(len(s), i) for i, s in enumerate(dataset)])
    feats = np.concatenate(features, axis=0)
    lats = np.concatenate(lat, axis=0)
    total = feats.shape[0]

    if num_queries >= total:
        queries = np.arange(total)
    else:
        queries = np.sort(rng.gen.choice(total, size=num_queries, replace=False))

    aucs = []
    for qi in queries:
        mask = seq_of != seq_of[qi]
        d_feat = np.sum((feats[mask] - feats[qi]) ** 2, axis=1)
        d_lat = np.linalg.norm(lats[mask] - lats[qi], axis=1)
        labels = d_lat <= pose_epsilon
        if labels.all() or not labels.any():
            continue
        aucs.append(roc_auc(-d_feat[labels], -d_feat[~labels]))
    if not aucs:
        raise ConfigError("no query produced both matches and non-matches")
    return float(np.mean(aucs)), aucs


def retrieval_auc(dataset: Dataset, embedder, pose_epsilon: float | None = None,
                  num_queries: int = 500, rng: RngState | None = None) -> float:
    mean, _ = retrieval_auc_from_features(
        dataset, _sequence_features(dataset, embedder),
        pose_epsilon=pose_epsilon, num_queries=num_queries, rng=rng)
    return mean


@dataclass(frozen=True)
class ZeroShotReport:
    mean_error: float
    thresholds: tuple[float, ...]
    accuracy: tuple[float, ...]
    oracle_mean_error: float
    oracle_accuracy: tuple[float, ...]


def zero_shot_pose_error(train: Dataset, test: Dataset, embedder,
                         thresholds: tuple[float, ...] | None = None) -> ZeroShotReport:
    """Latent-pose transfer by nearest neighbor in feature space.

    Each test frame adopts the latent pose of its nearest training frame;
    reported against the ground-truth-similarity upper bound in which the
    neighbor is chosen by latent distance itself.
    """
    _require_latents(train)
    _require_latents(test)
    f_train = np.concatenate(_sequence_features(train, embedder), axis=0)
    f_test = np.concatenate(_sequence_features(test, embedder), axis=0)
    z_train = np.concatenate([s.latent for s in train], axis=0)
    z_test = np.concatenate([s.latent for s in test], axis=0)

    nn_feat = np.argmin(_sqdist(f_test, f_train), axis=1)
    err = np.linalg.norm(z_test - z_train[nn_feat], axis=1)

    nn_lat = np.argmin(_sqdist(z_test, z_train), axis=1)
    oracle_err = np.linalg.norm(z_test - z_train[nn_lat], axis=1)

    if thresholds is None:
        hi = float(max(err.max(), oracle_err.max(), 1e-12))
        thresholds = tuple(np.linspace(0.0, hi, 21)[1:])
    acc = tuple(float(np.mean(err <= t)) for t in thresholds)
    oracle_acc = tuple(float(np.mean(oracle_err <= t)) for t in thresholds)
    return ZeroShotReport(
        mean_error=float(err.mean()),
        thresholds=tuple(float(t) for t in thresholds),
        accuracy=acc,
        oracle_mean_error=float(oracle_err.mean()),
        oracle_accuracy=oracle_acc,
    )


@dataclass(frozen=True)
class PredictionCurve:
    prediction_error_mean: float
    prediction_error_std: float
    k: tuple[int, ...]
    knn_mean: tuple[float, ...]
    knn_std: tuple[float, ...]


def knn_prediction_curve(dataset: Dataset, model: EmbeddingModel,
                         predictor: RecurrentPredictor, k_max: int,
                         exclusion_window: int = 2) -> PredictionCurve:
    """Next-frame prediction error versus the k-th nearest-neighbor bar.

    For every transition the predictor regresses the next frame's embedding
    from its context; the bar is the mean distance of the true next
    embedding to its k-th nearest neighbor over all frames, excluding the
    frame itself and its +-window temporal neighbors.
    """
    l = predictor.context_len
    emb = [embed_batch(model, s.frames) for s in dataset]
    all_emb = np.concatenate(emb, axis=0)
    offsets = np.cumsum([0] + [len(s) for s in dataset])

    contexts, truth_global = [], []
    for si, e in enumerate(emb):
        for t in range(l - 1, e.shape[0] - 1):
            contexts.append(e[t - l + 1:t + 1])
            truth_global.append(offsets[si] + t + 1)
    if not contexts:
        raise ConfigError("no sequence is long enough for one transition")
    contexts = np.stack(contexts)
    truth_global = np.asarray(truth_global)

    preds = rnn_forward_batch(predictor, contexts)
    pred_err = np.linalg.norm(preds - all_emb[truth_global], axis=1)

    d = np.sqrt(_sqdist(all_emb[truth_global], all_emb))
    for row, gidx in enumerate(truth_global):
        si = int(np.searchsorted(offsets, gidx, side="right") - 1)
        t = gidx - offsets[si]
        lo = max(0, t - exclusion_window)
        hi = min(offsets[si + 1] - offsets[si], t + exclusion_window + 1)
        d[row, offsets[si] + lo:offsets[si] + hi] = np.inf
    n_valid = int(np.min(np.sum(np.isfinite(d), axis=1)))
    if k_max > n_valid:
        raise ConfigError(f"k_max {k_max} exceeds available candidates {n_valid}")
    part = np.sort(np.partition(d, k_max - 1, axis=1)[:, :k_max], axis=1)

    return PredictionCurve(
        prediction_error_mean=float(pred_err.mean()),
        prediction_error_std=float(pred_err.std()),
        k=tuple(range(1, k_max + 1)),
        knn_mean=tuple(float(v) for v in part.mean(axis=0)),
        knn_std=tuple(float(v) for v in part.std(axis=0)),
    )


def nearest_neighbor_assignment(query_feats: np.ndarray,
                                target_feats: np.ndarray) -> np.ndarray:
    """Per-frame nearest-neighbor baseline: no temporal terms, no outliers (1-based)."""
    return np.argmin(_sqdist(np.asarray(query_feats), np.asarray(target_feats)),
                     axis=1).astype(np.int64) + 1


def merge_chunk_assignments(matchings: list[Matching] | Matching,
                            n_query: int) -> np.ndarray:
    """Compose per-chunk matchings into one global assignment.

    Chunks are visited in offset order; the first non-outlier assignment of
    each query frame wins. Decomposing a single global assignment into its
    chunks and merging back is the identity.
    """
    if isinstance(matchings, Matching):
        matchings = [matchings]
    merged = np.zeros(n_query, dtype=np.int64)
    for m in sorted(matchings, key=lambda m: m.target_offset):
        if len(m.pi) != n_query:
            raise DimensionError("matching does not cover the query")
        g = m.global_pi()
        take = (merged == 0) & (g > 0)
        merged[take] = g[take]
    return merged


def alignment_accuracy(predicted: list[Matching] | Matching | np.ndarray,
                       truth: np.ndarray) -> float:
    """Fraction of truth-matched query frames predicted within one target index."""
    truth = np.asarray(truth, dtype=np.int64)
    if isinstance(predicted, (list, Matching)):
        predicted = merge_chunk_assignments(predicted, truth.shape[0])
    predicted = np.asarray(predicted, dtype=np.int64)
    if predicted.shape != truth.shape:
        raise DimensionError(
            f"prediction shape {predicted.shape} != truth shape {truth.shape}"
        )
    valid = truth > 0
    if not valid.any():
        raise ConfigError("truth assignment is all-outlier")
    hit = valid & (predicted > 0) & (np.abs(predicted - truth) <= 1)
    return float(hit.sum() / valid.sum())


@dataclass(frozen=True)
class Projection2D:
    coords: np.ndarray                       # (N, 2), input order
    explained_variance_ratio: tuple[float, float]
    degenerate: bool
    frame_refs: tuple[tuple[str, int], ...]


def pca_project_2d(dataset: Dataset, embedder) -> Projection2D:
    """Project all embedded frames onto their top-2 principal directions."""
    feats = np.concatenate(_sequence_features(dataset, embedder), axis=0)
    refs = tuple((s.id, i) for s in dataset for i in range(len(s)))
    if feats.shape[0] < 3:
        raise ConfigError("projection needs at least 3 frames")
    centered = feats - feats.mean(axis=0)
    total_var = float(np.sum(centered * centered))
    if total_var < 1e-18:
        return Projection2D(
            coords=np.zeros((feats.shape[0], 2)),
            explained_variance_ratio=(0.0, 0.0),
            degenerate=True,
            frame_refs=refs,
        )
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    axes = vt[:2]
    if axes.shape[0] < 2:
        axes = np.concatenate([axes, np.zeros((2 - axes.shape[0], feats.shape[1]))])
        s = np.concatenate([s, [0.0]])
    # deterministic sign: largest-magnitude loading of each axis is positive
    for i in range(2):
        j = int(np.argmax(np.abs(axes[i])))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    coords = centered @ axes.T
    ratios = (s[:2] ** 2) / float(np.sum(s ** 2))
    return Projection2D(
        coords=coords,
        explained_variance_ratio=(float(ratios[0]), float(ratios[1])),
        degenerate=False,
        frame_refs=refs,
    )


def agglomerative_representatives(dataset: Dataset, embedder,
                                  num_clusters: int) -> list[tuple[str, int]]:
    """Average-linkage condensation into mutually dissimilar representative frames.

    Clusters the embedded frames down to ``num_clusters`` and returns each
    cluster's medoid reference, ordered by first frame appearance; medoid
    ties break toward the earlier frame.
    """
    feats = np.concatenate(_sequence_features(dataset, embedder), axis=0)
    refs = [(s.id, i) for s in dataset for i in range(len(s))]
    n = feats.shape[0]
    if num_clusters < 1:
        raise ConfigError("num_clusters must be >= 1")
    if num_clusters > n:
        raise ConfigError(f"num_clusters {num_clusters} exceeds frame count {n}")
    if num_clusters == n:
        return list(refs)

    labels = fcluster(linkage(feats, method="average"), t=num_clusters,
                      criterion="maxclust")
    reps = []
    for lab in sorted(set(labels), key=lambda l: int(np.argmax(labels == l))):
        members = np.flatnonzero(labels == lab)
        d = _sqdist(feats[members], feats[members])
        medoid = members[int(np.argmin(d.sum(axis=1)))]
        reps.append(refs[medoid])
    return reps


@dataclass
class EvalReport:
    """Serializable record of one metric run."""

    metric: str
    values: dict[str, float] = field(default_factory=dict)
    series: dict[str, list[float]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int = 0

    def save(self, base_path) -> tuple[Path, Path]:
        """Write ``<base>.json`` (machine-readable) and ``<base>.txt`` (key/value lines)."""
        base = Path(base_path)
        base.parent.mkdir(parents=True, exist_ok=True)
        json_path = Path(str(base) + ".json")
        txt_path = Path(str(base) + ".txt")
        payload = asdict(self)
        json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        lines = [f"metric {self.metric}", f"seed {self.seed}"]
        for k in sorted(self.values):
            lines.append(f"{k} {self.values[k]!r}")
        for k in sorted(self.series):
            lines.append(f"{k} " + " ".join(repr(v) for v in self.series[k]))
        for k in sorted(self.config):
            lines.append(f"config.{k} {self.config[k]}")
        txt_path.write_text("\n".join(lines) + "\n")
        return json_path, txt_path

    @classmethod
    def load(cls, base_path) -> "EvalReport":
        payload = json.loads(Path(str(base_path) + ".json").read_text())
        return cls(**payload)


def write_curve(path, xs, ys, header: str = "") -> Path:
    """Two-column plot-ready text file."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if header:
        lines.append(f"# {header}")
    for x, y in zip(xs, ys):
        lines.append(f"{x} {y!r}")
    p.write_text("\n".join(lines) + "\n")
    return p
