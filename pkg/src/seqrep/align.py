"""Exact temporally-constrained sequence matching.

A correspondence ``pi`` assigns every query frame an index in
``{0, 1, ..., m}`` where ``m`` is the target length: value ``v >= 1`` means
target frame ``v - 1``, value ``0`` declares the query frame an outlier.
The objective combines a squared-distance data term with penalties on
chronology violations (crossings), one-to-many repeats, and proportional
gaps between consecutive assignments. Because every penalty couples only
consecutive query positions, the global minimum is found exactly by a
trellis dynamic program over per-frame assignment states; a brute-force
enumerator serves as an optimality oracle on small instances.

Pairs where either endpoint is an outlier contribute no pairwise penalty;
each outlier frame pays a flat ``outlier_cost`` instead.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    DimensionError,
    ResourceLimitError,
    Sequence,
    as_frames,
)

BRUTEFORCE_LIMIT = 10**7
_ENUM_BLOCK = 1 << 16


@dataclass(frozen=True)
class MatchPenalties:
    """Weights of the matching objective's constraint terms.

    lambda1 : cost per chronology violation (crossing)
    lambda2 : cost per one-to-many repeat
    lambda3 : per-index cost of a gap between consecutive assignments
    outlier_cost : flat cost of assigning a query frame the outlier index 0
    """

    lambda1: float
    lambda2: float
    lambda3: float
    outlier_cost: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "outlier_cost"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class CostBreakdown:
    data: float
    outlier: float
    order: float
    duplicate: float
    gap: float

    @property
    def total(self) -> float:
        return self.data + self.outlier + self.order + self.duplicate + self.gap


@dataclass(frozen=True)
class Matching:
    """A solved correspondence for one query-vs-target(-chunk) instance.

    ``pi[j] == 0`` marks query frame j as an outlier; ``pi[j] == v >= 1``
    matches it to target frame ``target_offset + v - 1`` of the full target.
    """

    pi: np.ndarray
    total_cost: float
    breakdown: CostBreakdown
    target_offset: int = 0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.int64).copy()
        if pi.ndim != 1 or pi.size < 1:
            raise DimensionError("pi must be a non-empty 1-D integer array")
        if np.any(pi < 0):
            raise ValueError("pi entries must be >= 0")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        tol = 1e-9 * max(1.0, abs(self.total_cost))
        if abs(self.breakdown.total - self.total_cost) > tol:
            raise ValueError(
                f"total_cost {self.total_cost} disagrees with breakdown sum "
                f"{self.breakdown.total}"
            )

    @property
    def matched_fraction(self) -> float:
        return float(np.mean(self.pi > 0))

    def global_pi(self) -> np.ndarray:
        """pi re-indexed into the full target (offset applied, 0 preserved)."""
        out = self.pi.copy()
        out[out > 0] += self.target_offset
        return out


@dataclass(frozen=True)
class Chunk:
    """A contiguous slice of a target sequence."""

    offset: int
    frames: np.ndarray
    sequence_id: str = ""

    def __len__(self) -> int:
        return self.frames.shape[0]


def _check_instance(query_emb, target_emb) -> tuple[np.ndarray, np.ndarray]:
    q = as_frames(query_emb, "query_emb")
    t = as_frames(target_emb, "target_emb")
    if q.shape[1] != t.shape[1]:
        raise DimensionError(
            f"dimension mismatch: query {q.shape[1]} vs target {t.shape[1]}"
        )
    return q, t


def _sqdist_matrix(q: np.ndarray, t: np.ndarray) -> np.ndarray:
    """(n, m) matrix of squared euclidean distances."""
    qq = np.sum(q * q, axis=1)[:, None]
    tt = np.sum(t * t, axis=1)[None, :]
    d2 = qq + tt - 2.0 * (q @ t.T)
    return np.maximum(d2, 0.0)


def alignment_cost(query_emb, target_emb, pi, penalties: MatchPenalties) -> CostBreakdown:
    """Score a correspondence term by term against the matching objective.

    Kept independent of both solvers so it can audit their outputs.
    """
    q, t = _check_instance(query_emb, target_emb)
    pi = np.asarray(pi, dtype=np.int64)
    n, m = q.shape[0], t.shape[0]
    if pi.shape != (n,):
        raise DimensionError(f"pi must have shape ({n},), got {pi.shape}")
    if np.any(pi < 0) or np.any(pi > m):
        raise IndexError(f"pi entries must lie in [0, {m}]")

    matched = pi > 0
    data = 0.0
    for j in np.flatnonzero(matched):
        d = q[j] - t[pi[j] - 1]
        data += float(d @ d)
    outlier = penalties.outlier_cost * float(np.sum(~matched))

    a, b = pi[:-1], pi[1:]
    both = (a > 0) & (b > 0)
    order = penalties.lambda1 * float(np.sum(both & (a > b)))
    duplicate = penalties.lambda2 * float(np.sum(both & (a == b)))
    gap_mask = both & (a + 1 < b)
    gap = penalties.lambda3 * float(np.sum((b - a)[gap_mask]))
    return CostBreakdown(data=data, outlier=outlier, order=order,
                         duplicate=duplicate, gap=gap)


def default_penalties(query_emb, target_emb) -> MatchPenalties:
    """Instance-relative penalty defaults, scaled by the mean pairwise data cost."""
    q, t = _check_instance(query_emb, target_emb)
    e_unary = float(np.mean(_sqdist_matrix(q, t)))
    return MatchPenalties(
        lambda1=10.0 * e_unary,
        lambda2=0.5 * e_unary,
        lambda3=0.1 * e_unary,
        outlier_cost=2.0 * e_unary,
    )


def solve_bruteforce(query_emb, target_emb, penalties: MatchPenalties) -> Matching:
    """Enumerate every correspondence and return a global minimizer.

    Optimality oracle for :func:`solve_exact_dp`. Guarded by
    ``(m + 1) ** n <= 10**7``; ties break toward the lexicographically
    smallest correspondence.
    """
    q, t = _check_instance(query_emb, target_emb)
    n, m = q.shape[0], t.shape[0]
    n_cand = (m + 1) ** n
    if n_cand > BRUTEFORCE_LIMIT:
        raise ResourceLimitError(
            f"({m}+1)^{n} = {n_cand} candidates exceeds limit {BRUTEFORCE_LIMIT}"
        )

    # Per-position assignment cost: column 0 is the outlier price.
    d2 = _sqdist_matrix(q, t)
    unary = np.concatenate(
        [np.full((n, 1), penalties.outlier_cost), d2], axis=1
    )

    shape = (m + 1,) * n
    rows = np.arange(n)
    best_cost = np.inf
    best_pi = None
    for start in range(0, n_cand, _ENUM_BLOCK):
        idx = np.arange(start, min(start + _ENUM_BLOCK, n_cand))
        cand = np.stack(np.unravel_index(idx, shape), axis=1)  # lexicographic
        cost = unary[rows[None, :], cand].sum(axis=1)
        a, b = cand[:, :-1], cand[:, 1:]
        both = (a > 0) & (b > 0)
        cost = cost + penalties.lambda1 * (both & (a > b)).sum(axis=1)
        cost = cost + penalties.lambda2 * (both & (a == b)).sum(axis=1)
        gap = np.where(both & (a + 1 < b), b - a, 0)
        cost = cost + penalties.lambda3 * gap.sum(axis=1)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = float(cost[k])
            best_pi = cand[k].astype(np.int64)

    return Matching(
        pi=best_pi,
        total_cost=best_cost,
        breakdown=alignment_cost(q, t, best_pi, penalties),
    )


def _transition_matrix(m: int, penalties: MatchPenalties) -> np.ndarray:
    """Pairwise penalty w(v, v') for consecutive assignments; 0 when either is outlier."""
    w = np.zeros((m + 1, m + 1))
    v = np.arange(1, m + 1)
    a, b = v[:, None], v[None, :]
    w[1:, 1:] = (
        penalties.lambda1 * (a > b)
        + penalties.lambda2 * (a == b)
        + penalties.lambda3 * np.where(a + 1 < b, b - a, 0)
    )
    return w


def solve_exact_dp(query_emb, target_emb, penalties: MatchPenalties) -> Matching:
    """Exact global minimizer via a trellis over assignment states.

    The objective decomposes over consecutive query positions, so a layered
    shortest path over states ``{0, ..., m}`` with the per-pair penalty as
    edge weight is exact. Ties break toward the smaller state index, both at
    the final state and during backtracking. O(n * (m+1)^2) time,
    O(n * (m+1)) memory.
    """
    q, t = _check_instance(query_emb, target_emb)
    n, m = q.shape[0], t.shape[0]

    unary = np.empty((n, m + 1))
    unary[:, 0] = penalties.outlier_cost
    unary[:, 1:] = _sqdist_matrix(q, t)
    w = _transition_matrix(m, penalties)

    parent = np.empty((n, m + 1), dtype=np.int64)
    d = unary[0].copy()
    for j in range(1, n):
        stepped = d[:, None] + w
        parent[j] = np.argmin(stepped, axis=0)  # first minimum = smallest state
        d = stepped[parent[j], np.arange(m + 1)] + unary[j]

    last = int(np.argmin(d))
    total = float(d[last])
    pi = np.empty(n, dtype=np.int64)
    pi[-1] = last
    for j in range(n - 1, 0, -1):
        pi[j - 1] = parent[j, pi[j]]

    return Matching(
        pi=pi,
        total_cost=total,
        breakdown=alignment_cost(q, t, pi, penalties),
    )


def _chunk_bounds(n: int, chunk_len: int) -> list[tuple[int, int]]:
    """Contiguous [start, end) bounds; a length-1 remainder merges backwards."""
    if chunk_len < 2:
        raise ConfigError(f"chunk_len must be >= 2, got {chunk_len}")
    bounds = [(s, min(s + chunk_len, n)) for s in range(0, n, chunk_len)]
    if len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] == 1:
        s, _ = bounds.pop()
        bounds[-1] = (bounds[-1][0], s + 1)
    return bounds


def chunk_target(target: Sequence, chunk_len: int) -> list[Chunk]:
    """Partition a target sequence into contiguous chunks of ``chunk_len``.

    The final remainder is kept if it has >= 2 frames and merged into the
    previous chunk if it would be a single frame.
    """
    return [
        Chunk(offset=s, frames=target.frames[s:e], sequence_id=target.id)
        for s, e in _chunk_bounds(len(target), chunk_len)
    ]


def match_features(
    query_feats,
    target_feats,
    penalties: MatchPenalties | None = None,
    chunk_len: int = 40,
    workers: int = 1,
) -> list[Matching]:
    """Solve the full query against every chunk of an already-featured target."""
    q, t = _check_instance(query_feats, target_feats)
    if penalties is None:
        penalties = default_penalties(q, t)
    bounds = _chunk_bounds(t.shape[0], chunk_len)

    def solve(se):
        s, e = se
        sol = solve_exact_dp(q, t[s:e], penalties)
        return Matching(
            pi=sol.pi,
            total_cost=sol.total_cost,
            breakdown=sol.breakdown,
            target_offset=s,
        )

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(solve, bounds))
    return [solve(se) for se in bounds]


def match_pair(
    query: Sequence,
    target: Sequence,
    model,
    penalties: MatchPenalties | None = None,
    chunk_len: int = 40,
    workers: int = 1,
) -> list[Matching]:
    """Embed both sequences and match the query against each target chunk.

    Returns one Matching per chunk, ordered by chunk offset. Chunk solves
    are independent and may run concurrently.
    """
    from .embed import embed_batch  # local import: embed trains on matchings

    q = embed_batch(model, query.frames)
    t = embed_batch(model, target.frames)
    return match_features(q, t, penalties=penalties, chunk_len=chunk_len,
                          workers=workers)
