import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplex_thresholds.regions import (
    BoundaryError,
    RegionAssignment,
    TiePolicy,
    classify,
    classify_batch,
    region_of,
    shifted_scores,
)
from simplex_thresholds.simplex import barycenter, vertex


def strict_members(z, tau):
    """Classes j with z[j] - z[k] > tau[j] - tau[k] for all k != j (plain loops)."""
    m = len(z)
    return [j for j in range(m) if all(z[j] - z[k] > tau[j] - tau[k] for k in range(m) if k != j)]


def simplex_points(m):
    return st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m).map(lambda v: np.asarray(v) / np.sum(v))


class TestShifted:
    def test_example(self):
        np.testing.assert_allclose(
            shifted_scores((0.5, 0.3, 0.2), barycenter(3)), (1 / 6, -1 / 30, -2 / 15), atol=1e-15
        )

    def test_full_tie(self):
        t = (0.2, 0.5, 0.3)
        np.testing.assert_array_equal(shifted_scores(t, t), 0.0)

    def test_mixed(self):
        np.testing.assert_allclose(shifted_scores((0.45, 0.25, 0.30), (0.5, 0.3, 0.2)), (-0.05, -0.05, 0.10), atol=1e-15)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            shifted_scores((0.5, 0.5), (0.2, 0.3, 0.5))


class TestRegionOf:
    def test_argmax_at_barycenter(self):
        assert region_of((0.5, 0.3, 0.2), barycenter(3)) == RegionAssignment(class_index=0)

    def test_shifted_class(self):
        assert region_of((0.2, 0.5, 0.3), (0.5, 0.3, 0.2)).class_index == 1

    def test_boundary(self):
        r = region_of((0.4, 0.35, 0.25), (0.5, 0.3, 0.2))
        assert r.is_boundary and r.tied == (1, 2)

    def test_full_tie_boundary(self):
        r = region_of(barycenter(3), barycenter(3))
        assert r.tied == (0, 1, 2)

    def test_boundary_needs_two(self):
        with pytest.raises(ValueError):
            RegionAssignment(tied=(1,))

    @settings(max_examples=300, deadline=None)
    @given(st.integers(2, 6).flatmap(lambda m: st.tuples(simplex_points(m), simplex_points(m))))
    def test_matches_loops(self, pair):
        z, tau = pair
        members = strict_members(z, tau)
        r = region_of(z, tau)
        if len(members) == 1:
            assert r.class_index == members[0]
        else:
            assert members == [] and r.is_boundary


class TestClassify:
    def test_unique(self):
        assert classify((0.45, 0.25, 0.30), (0.5, 0.3, 0.2)) == 2

    def test_tie_lowest(self):
        assert classify((0.4, 0.35, 0.25), (0.5, 0.3, 0.2), TiePolicy.LOWEST) == 1
        assert classify((0.4, 0.35, 0.25), (0.5, 0.3, 0.2), TiePolicy.HIGHEST_SHIFTED_THEN_LOWEST) == 1

    def test_tie_error(self):
        with pytest.raises(BoundaryError):
            classify((0.4, 0.35, 0.25), (0.5, 0.3, 0.2), TiePolicy.ERROR)

    @pytest.mark.parametrize("tau", [(0.1, 0.8, 0.1), (0.3, 0.3, 0.4), (0.0, 0.99, 0.01)])
    def test_vertex_dominates(self, tau):
        assert classify(vertex(3, 1), tau) == 1

    def test_binary_reduction(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            t = rng.uniform(0.01, 0.99)
            y2 = rng.uniform()
            y = (1 - y2, y2)
            expected = 1 if y2 > t else 0
            assert classify(y, (1 - t, t)) == expected


class TestBatch:
    def test_empty(self):
        assert classify_batch([], barycenter(3)).tolist() == []

    def test_vertices(self):
        assert classify_batch(np.eye(3), barycenter(3)).tolist() == [0, 1, 2]

    def test_reports_bad_index(self):
        with pytest.raises(ValueError, match="prediction 1"):
            classify_batch([(0.5, 0.5, 0.0), (0.5, 0.5)], barycenter(3))

    def test_distinct_thresholds_give_distinct_labels(self):
        rng = np.random.default_rng(5)
        y = rng.dirichlet([1, 1, 1], 60)
        outs = [classify_batch(y, t) for t in ((1 / 3, 1 / 3, 1 / 3), (1 / 2, 1 / 3, 1 / 6), (1 / 8, 3 / 4, 1 / 8))]
        assert not np.array_equal(outs[0], outs[1])
        assert not np.array_equal(outs[1], outs[2])

    def test_batch_matches_scalar_with_ties(self):
        y = np.array([(0.4, 0.35, 0.25), (0.2, 0.5, 0.3), (0.45, 0.25, 0.30), (1 / 3, 1 / 3, 1 / 3)])
        tau = (0.5, 0.3, 0.2)
        assert classify_batch(y, tau).tolist() == [classify(r, tau) for r in y]
        with pytest.raises(BoundaryError):
            classify_batch(y, tau, TiePolicy.ERROR)

    def test_batch_matches_scalar_random(self):
        rng = np.random.default_rng(1)
        for m in (2, 3, 5, 8):
            y = rng.dirichlet(np.ones(m), 300)
            tau = rng.dirichlet(np.ones(m))
            assert classify_batch(y, tau).tolist() == [classify(r, tau) for r in y]


def test_disjointness():
    rng = np.random.default_rng(2)
    for m in (2, 3, 4, 7):
        for _ in range(300):
            z, tau = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
            assert len(strict_members(z, tau)) <= 1


def test_argmax_equivalence():
    rng = np.random.default_rng(3)
    for m in range(2, 11):
        y = rng.dirichlet(np.ones(m), 2000)
        assert (classify_batch(y, barycenter(m)) == y.argmax(axis=1)).all()
