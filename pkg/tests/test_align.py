import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqrep.core import ConfigError, RngState, ResourceLimitError, Sequence
from seqrep.align import (
    CostBreakdown,
    Matching,
    MatchPenalties,
    alignment_cost,
    chunk_target,
    default_penalties,
    match_pair,
    solve_bruteforce,
    solve_exact_dp,
)
from seqrep.embed import embed_batch, init_embedding_model

from conftest import random_unit_rows

PEN = MatchPenalties(lambda1=5.0, lambda2=1.0, lambda3=2.0, outlier_cost=3.0)


def random_instance(g, n, m, d=3):
    return g.normal(size=(n, d)), g.normal(size=(m, d))


def random_penalties(g, regime):
    if regime == 0:
        return MatchPenalties(0.0, 0.0, 0.0, float(g.uniform(0, 3)))
    if regime == 1:
        return MatchPenalties(*(float(v) for v in g.uniform(0, 5, size=4)))
    if regime == 2:  # dominant ordering
        return MatchPenalties(500.0, *(float(v) for v in g.uniform(0, 2, size=3)))
    return MatchPenalties(*(float(v) for v in g.uniform(0, 0.3, size=3)),
                          outlier_cost=1000.0)


class TestAlignmentCost:
    def test_identity_match_costs_zero(self, rng):
        x = rng.gen.normal(size=(4, 3))
        pi = np.arange(1, 5)
        assert alignment_cost(x, x, pi, PEN).total == 0.0

    def test_single_crossing_charges_lambda1(self):
        # data terms vanish: query frames equal their assigned target frames
        target = np.array([[1.0, 0.0], [0.0, 1.0]])
        query = target[[1, 0]]
        bd = alignment_cost(query, target, [2, 1], PEN)
        assert bd.data == 0.0
        assert bd.order == PEN.lambda1
        assert bd.total == PEN.lambda1

    def test_duplicate_and_gap_terms(self, rng):
        g = rng.gen
        query, target = random_instance(g, 3, 3)
        pi = np.array([1, 1, 3])
        bd = alignment_cost(query, target, pi, MatchPenalties(0.0, 1.0, 2.0, 0.0))
        # independent per-term recomputation
        data = sum(float(np.sum((query[j] - target[pi[j] - 1]) ** 2)) for j in range(3))
        assert bd.duplicate == 1.0
        assert bd.gap == 2.0 * (3 - 1)
        assert bd.data == pytest.approx(data, rel=1e-12)
        assert bd.total == pytest.approx(data + 1.0 + 4.0, rel=1e-12)

    def test_outlier_adjacent_pairs_unpenalized(self):
        target = np.zeros((3, 2))
        query = np.zeros((3, 2))
        bd = alignment_cost(query, target, [3, 0, 1], PEN)
        assert bd.order == 0.0 and bd.duplicate == 0.0 and bd.gap == 0.0
        assert bd.outlier == PEN.outlier_cost

    def test_out_of_range_index_raises(self):
        with pytest.raises(IndexError):
            alignment_cost(np.zeros((2, 2)), np.zeros((3, 2)), [1, 4], PEN)

    def test_stride_semantics(self):
        """Stride 1 is free, a repeat costs lambda2, a gap of g costs lambda3*g."""
        q = np.zeros((2, 1))
        t = np.zeros((5, 1))
        pen = MatchPenalties(7.0, 11.0, 13.0, 1.0)
        assert alignment_cost(q, t, [1, 2], pen).total == 0.0
        assert alignment_cost(q, t, [2, 2], pen).total == 11.0
        for gap in (2, 3, 4):
            assert alignment_cost(q, t, [1, 1 + gap], pen).total == 13.0 * gap


class TestBruteForce:
    def test_single_frame_closest_match(self, rng):
        g = rng.gen
        query = g.normal(size=(1, 3))
        target = g.normal(size=(4, 3))
        pen = MatchPenalties(1.0, 1.0, 1.0, outlier_cost=100.0)
        sol = solve_bruteforce(query, target, pen)
        d = np.sum((target - query[0]) ** 2, axis=1)
        assert sol.pi[0] == int(np.argmin(d)) + 1
        assert sol.total_cost == pytest.approx(float(d.min()))

    def test_single_frame_prefers_outlier_when_cheap(self, rng):
        g = rng.gen
        query = g.normal(size=(1, 3))
        target = query + 10.0
        sol = solve_bruteforce(query, target, MatchPenalties(0, 0, 0, 1e-3))
        assert sol.pi[0] == 0

    def test_self_match_is_identity(self, rng):
        x = random_unit_rows(rng.gen, 5, 4)
        pen = MatchPenalties(0.0, 0.0, 0.0, outlier_cost=100.0)
        sol = solve_bruteforce(x, x, pen)
        np.testing.assert_array_equal(sol.pi, np.arange(1, 6))
        assert sol.total_cost == pytest.approx(0.0, abs=1e-12)

    def test_size_guard(self):
        with pytest.raises(ResourceLimitError):
            solve_bruteforce(np.zeros((30, 1)), np.zeros((30, 1)), PEN)

    def test_lexicographic_tie_break(self):
        # two identical target frames: both assignments cost the same
        query = np.zeros((1, 2))
        target = np.zeros((2, 2))
        sol = solve_bruteforce(query, target, MatchPenalties(0, 0, 0, 5.0))
        assert sol.pi[0] == 1


class TestExactDP:
    def test_matches_bruteforce_on_random_instances(self, rng):
        g = rng.gen
        for trial in range(60):
            n = int(g.integers(1, 7))
            m = int(g.integers(1, 5))
            query, target = random_instance(g, n, m)
            pen = random_penalties(g, trial % 4)
            a = solve_exact_dp(query, target, pen)
            b = solve_bruteforce(query, target, pen)
            assert a.total_cost == pytest.approx(b.total_cost, abs=1e-9)
            # audit both solutions with the independent scorer
            assert alignment_cost(query, target, a.pi, pen).total == pytest.approx(
                a.total_cost, abs=1e-9)
            assert alignment_cost(query, target, b.pi, pen).total == pytest.approx(
                b.total_cost, abs=1e-9)

    def test_self_match_identity_cost_zero(self, rng):
        x = random_unit_rows(rng.gen, 10, 6)
        sol = solve_exact_dp(x, x, MatchPenalties(0.0, 0.0, 0.0, 100.0))
        np.testing.assert_array_equal(sol.pi, np.arange(1, 11))
        assert sol.total_cost == pytest.approx(0.0, abs=1e-12)

    def test_dominant_lambda1_forces_monotone(self, rng):
        g = rng.gen
        for _ in range(30):
            n = int(g.integers(2, 9))
            m = int(g.integers(1, 7))
            query, target = random_instance(g, n, m)
            unary_max = float(np.max(np.sum((query[:, None] - target[None]) ** 2, -1)))
            lam2, lam3, oc = (float(v) for v in g.uniform(0, 2, size=3))
            bound = n * unary_max + lam2 * n + lam3 * n * m + oc * n
            sol = solve_exact_dp(query, target, MatchPenalties(bound + 1, lam2, lam3, oc))
            # ordering is enforced on consecutive both-matched positions only;
            # an outlier in between lifts the constraint (outliers carry no
            # pairwise penalty)
            a, b = sol.pi[:-1], sol.pi[1:]
            both = (a > 0) & (b > 0)
            assert np.all(a[both] <= b[both])

    def test_empty_inputs_rejected(self):
        from seqrep.core import DegenerateInputError
        with pytest.raises(DegenerateInputError):
            solve_exact_dp(np.zeros((0, 2)), np.zeros((3, 2)), PEN)


class TestChunking:
    def test_even_split(self):
        seq = Sequence(id="t", frames=np.zeros((80, 2)))
        chunks = chunk_target(seq, 40)
        assert [c.offset for c in chunks] == [0, 40]
        assert [len(c) for c in chunks] == [40, 40]

    def test_remainder_kept_when_two_or_more(self):
        seq = Sequence(id="t", frames=np.zeros((85, 2)))
        assert [len(c) for c in chunk_target(seq, 40)] == [40, 40, 5]

    def test_singleton_remainder_merged(self):
        seq = Sequence(id="t", frames=np.zeros((41, 2)))
        chunks = chunk_target(seq, 40)
        assert len(chunks) == 1 and len(chunks[0]) == 41

    def test_chunk_len_below_two_rejected(self):
        seq = Sequence(id="t", frames=np.zeros((10, 2)))
        with pytest.raises(ConfigError):
            chunk_target(seq, 1)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 300), chunk_len=st.integers(2, 60))
    def test_chunks_partition_target(self, n, chunk_len):
        seq = Sequence(id="t", frames=np.zeros((n, 1)))
        chunks = chunk_target(seq, chunk_len)
        offsets = [c.offset for c in chunks]
        assert offsets == sorted(set(offsets))
        assert sum(len(c) for c in chunks) == n
        pos = 0
        for c in chunks:
            assert c.offset == pos
            pos += len(c)
        if n > 1:
            assert all(len(c) >= 2 for c in chunks)


@pytest.fixture(scope="module")
def model():
    return init_embedding_model(4, 8, 5, RngState(1))


class TestMatchPair:
    def test_short_target_yields_single_matching(self, model, rng):
        q = Sequence(id="q", frames=rng.gen.normal(size=(6, 4)))
        t = Sequence(id="t", frames=rng.gen.normal(size=(9, 4)))
        out = match_pair(q, t, model, penalties=PEN, chunk_len=40)
        assert len(out) == 1 and out[0].target_offset == 0

    def test_chunked_offsets_and_costs_match_direct_solves(self, model, rng):
        q = Sequence(id="q", frames=rng.gen.normal(size=(8, 4)))
        t = Sequence(id="t", frames=rng.gen.normal(size=(50, 4)))
        out = match_pair(q, t, model, penalties=PEN, chunk_len=20)
        assert [m.target_offset for m in out] == [0, 20, 40]
        qe = embed_batch(model, q.frames)
        te = embed_batch(model, t.frames)
        for m, (s, e) in zip(out, [(0, 20), (20, 40), (40, 50)]):
            direct = solve_exact_dp(qe, te[s:e], PEN)
            assert m.total_cost == pytest.approx(direct.total_cost, abs=1e-9)

    def test_workers_do_not_change_results(self, model, rng):
        q = Sequence(id="q", frames=rng.gen.normal(size=(7, 4)))
        t = Sequence(id="t", frames=rng.gen.normal(size=(64, 4)))
        serial = match_pair(q, t, model, penalties=PEN, chunk_len=16, workers=1)
        threaded = match_pair(q, t, model, penalties=PEN, chunk_len=16, workers=4)
        for a, b in zip(serial, threaded):
            np.testing.assert_array_equal(a.pi, b.pi)
            assert a.total_cost == b.total_cost

    def test_default_penalties_are_instance_relative(self, rng):
        g = rng.gen
        q, t = random_instance(g, 5, 6, d=4)
        pen = default_penalties(q, t)
        e_unary = float(np.mean(np.sum((q[:, None] - t[None]) ** 2, axis=-1)))
        assert pen.lambda1 == pytest.approx(10 * e_unary, rel=1e-12)
        assert pen.lambda2 == pytest.approx(0.5 * e_unary, rel=1e-12)
        assert pen.lambda3 == pytest.approx(0.1 * e_unary, rel=1e-12)
        assert pen.outlier_cost == pytest.approx(2 * e_unary, rel=1e-12)


class TestMatchingType:
    def test_breakdown_total_consistency_enforced(self):
        bd = CostBreakdown(data=1.0, outlier=0.0, order=0.0, duplicate=0.0, gap=0.0)
        with pytest.raises(ValueError):
            Matching(pi=np.array([1]), total_cost=2.0, breakdown=bd)

    def test_cost_audit_on_random_pis(self, rng):
        g = rng.gen
        for _ in range(20):
            query, target = random_instance(g, 5, 4)
            pen = random_penalties(g, int(g.integers(0, 4)))
            sol = solve_exact_dp(query, target, pen)
            audit = alignment_cost(query, target, sol.pi, pen)
            assert audit.total == pytest.approx(sol.total_cost, abs=1e-9)
            assert sol.breakdown.total == pytest.approx(sol.total_cost, abs=1e-9)

    def test_negative_penalties_rejected(self):
        with pytest.raises(ConfigError):
            MatchPenalties(-1.0, 0.0, 0.0, 0.0)

    def test_global_pi_applies_offset(self):
        bd = CostBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
        m = Matching(pi=np.array([2, 0, 1]), total_cost=0.0, breakdown=bd,
                     target_offset=10)
        np.testing.assert_array_equal(m.global_pi(), [12, 0, 11])
