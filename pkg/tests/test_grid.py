"""Geometry kernel tests: components, distances, wedge predicates, serialization."""

import math

import numpy as np
import pytest

from finedomain.errors import EmptyMask, FrameTooTight
from finedomain.grid import (
    CircularArc,
    GridMask,
    Point,
    Segment,
    Wedge,
    annulus_mask,
    circle_mask,
    complement_components,
    disk_mask,
    full_circle,
    point_arc_distance,
    segment_arc_distance,
    segment_box_distance,
    segment_mask,
    set_distance,
    wedge_hits,
)

H = 1.0 / 64


def brute_force_mask_distance(A: GridMask, B: GridMask) -> float:
    """Oracle: min closed-cell distance over *all* cell pairs."""
    h = A.resolution
    best = math.inf
    for ia, ja in A.cells:
        for ib, jb in B.cells:
            dx = max(abs(ib - ia) - 1, 0) * h
            dy = max(abs(jb - ja) - 1, 0) * h
            best = min(best, math.hypot(dx, dy))
    return best


class TestComponents:
    def test_annulus_has_one_bounded_component(self):
        K = annulus_mask(H, 0, 1.0, 2.0)
        lab = complement_components(K, (-160, -160, 160, 160))
        assert len(lab.bounded_ids) == 1

    def test_disk_has_no_bounded_component(self):
        K = disk_mask(H, 0, 1.0)
        lab = complement_components(K, (-80, -80, 80, 80))
        assert len(lab.bounded_ids) == 0

    def test_two_nested_annuli(self):
        K = annulus_mask(H, 0, 0.5, 0.8).union(annulus_mask(H, 0, 1.4, 1.7))
        lab = complement_components(K, (-160, -160, 160, 160))
        assert len(lab.bounded_ids) == 2

    def test_cell_count_conservation(self):
        K = annulus_mask(H, 0.1 + 0.05j, 0.4, 0.9)
        frame = (-80, -80, 80, 80)
        lab = complement_components(K, frame)
        ncells = (frame[2] - frame[0] + 1) * (frame[3] - frame[1] + 1)
        assert sum(lab.cell_counts.values()) + len(K) == ncells

    def test_representatives_live_in_their_component(self):
        K = annulus_mask(H, 0, 0.5, 1.0)
        lab = complement_components(K, (-100, -100, 100, 100))
        for cid in lab.ids:
            rep = lab.representative[cid]
            assert lab.label_of_point(rep.to_complex()) == cid

    def test_frame_too_tight(self):
        K = disk_mask(H, 0, 1.0)
        i0, j0, i1, j1 = K.bbox
        with pytest.raises(FrameTooTight):
            complement_components(K, (i0 - 1, j0 - 3, i1 + 3, j1 + 3))


class TestSetDistance:
    def test_disk_to_ring(self):
        A = disk_mask(H, 0, 1.0, predicate="inside")
        B = circle_mask(H, 0, 2.0)
        d = set_distance(A, B)
        assert abs(d - 1.0) <= H * math.sqrt(2.0)

    def test_overlap_gives_zero(self):
        A = disk_mask(H, 0, 1.0)
        B = disk_mask(H, 0.5, 1.0)
        assert set_distance(A, B) == 0.0

    def test_random_masks_match_bruteforce(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            ca = rng.integers(-30, 30, size=(50, 2))
            cb = rng.integers(40, 100, size=(50, 2))
            A = GridMask(H, ca)
            B = GridMask(H, cb)
            assert set_distance(A, B) == pytest.approx(
                brute_force_mask_distance(A, B), abs=1e-12
            )

    def test_symmetry_and_triangle_consistency(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            A = GridMask(H, rng.integers(-20, 0, size=(30, 2)))
            B = GridMask(H, rng.integers(5, 25, size=(30, 2)))
            C = GridMask(H, rng.integers(30, 50, size=(30, 2)))
            assert set_distance(A, B) == set_distance(B, A)
            assert set_distance(A, C) <= set_distance(A, B) + B.diameter() + set_distance(
                B, C
            ) + 1e-12

    def test_empty_mask_raises(self):
        A = GridMask(H, [])
        B = disk_mask(H, 0, 1.0)
        with pytest.raises(EmptyMask):
            set_distance(A, B)


class TestWedgeHits:
    def test_apex_on_segment_mask(self):
        w = Wedge(-1 - 1j, 0j, 1 - 1j)
        S = segment_mask(H, -0.5, 0.5)
        assert wedge_hits(w, S)

    def test_disjoint_halfplanes(self):
        w = Wedge(-1 + 1j, 0.5j, 1 + 1j)
        S = segment_mask(H, -0.5 - 1j, 0.5 - 1j)
        assert not wedge_hits(w, S)

    def test_arc_hit_and_miss(self):
        arc = CircularArc(0j, 1.0, 0.0, math.pi)  # upper unit semicircle
        w_hit = Wedge(-2 + 0.5j, 0.5j, 2 + 0.5j)
        w_miss = Wedge(-2 - 0.5j, -0.5j, 2 - 0.5j)
        assert wedge_hits(w_hit, [arc])
        assert not wedge_hits(w_miss, [arc])

    def test_monotone_in_mask(self):
        rng = np.random.default_rng(11)
        S = GridMask(H, rng.integers(-20, 20, size=(60, 2)))
        S2 = S.union(GridMask(H, rng.integers(-20, 20, size=(60, 2))))
        for _ in range(200):
            p = complex(*rng.uniform(-1, 1, 2))
            a = complex(*rng.uniform(-1, 1, 2))
            q = a + abs(p - a) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            w = Wedge(p, a, q)
            if wedge_hits(w, S):
                assert wedge_hits(w, S2)

    def test_against_dense_sampling_oracle(self):
        """Random wedges vs random arc lists, checked by point sampling.

        Sampling at n points per segment puts every segment point within half
        a sample gap of a sample; a true hit therefore shows a sampled distance
        <= gap/2, and a sampled distance > gap/2 certifies a miss.
        """
        rng = np.random.default_rng(23)
        n_samples = 1000

        def points_arc_dist(pts, arc):
            v = pts - arc.center
            r = np.abs(v)
            th = np.arctan2(v.imag, v.real)
            rel = (th - arc.theta_start) % (2 * np.pi)
            inarc = arc.is_full_circle | (rel <= arc.theta_end - arc.theta_start)
            d = np.where(inarc, np.abs(r - arc.radius), np.inf)
            for e in (arc.point_at(arc.theta_start), arc.point_at(arc.theta_end)):
                d = np.minimum(d, np.abs(pts - e))
            return d.min()

        for _ in range(300):
            arcs = []
            for _ in range(rng.integers(1, 5)):
                c = complex(*rng.uniform(-1, 1, 2))
                r = rng.uniform(0.1, 0.8)
                t0 = rng.uniform(0, 2 * np.pi)
                t1 = t0 + rng.uniform(0.3, 2 * np.pi)
                arcs.append(CircularArc(c, r, t0, t1))
            p = complex(*rng.uniform(-2, 2, 2))
            a = complex(*rng.uniform(-2, 2, 2))
            q = a + abs(p - a) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            w = Wedge(p, a, q)
            hit = wedge_hits(w, arcs)
            dmin = math.inf
            gap = 0.0
            for s0, s1 in ((p, a), (a, q)):
                ts = np.linspace(0, 1, n_samples)
                pts = s0 + ts * (s1 - s0)
                gap = max(gap, abs(s1 - s0) / (n_samples - 1))
                for arc in arcs:
                    dmin = min(dmin, points_arc_dist(pts, arc))
            if hit:
                assert dmin <= gap / 2 + 1e-12
            if dmin > gap / 2:
                assert not hit
            exact = min(
                segment_arc_distance(s0, s1, arc)
                for (s0, s1) in ((p, a), (a, q))
                for arc in arcs
            )
            assert hit == (exact <= 1e-12)

    def test_wedge_leg_validation(self):
        with pytest.raises(ValueError):
            Wedge(0j, 1j, 3j)


class TestPredicates:
    def test_segment_box(self):
        assert segment_box_distance(-1, 1, -0.5 - 0.5j, 0.5 + 0.5j) == 0.0
        d = segment_box_distance(-1 + 1j, 1 + 1j, -0.5 - 0.5j, 0.5 + 0.5j)
        assert d == pytest.approx(0.5)

    def test_segment_arc_tangent(self):
        arc = full_circle(0, 1.0)
        assert segment_arc_distance(-2 + 1j, 2 + 1j, arc) <= 1e-12
        assert segment_arc_distance(-2 + 1.001j, 2 + 1.001j, arc) == pytest.approx(
            0.001, abs=1e-9
        )

    def test_point_arc(self):
        arc = CircularArc(0j, 1.0, 0.0, math.pi / 2)
        assert point_arc_distance(2.0, arc) == pytest.approx(1.0)
        assert point_arc_distance(-1.0, arc) == pytest.approx(math.sqrt(2.0))


class TestMaskBasics:
    def test_set_ops_and_bbox(self):
        A = disk_mask(H, 0, 0.5)
        B = disk_mask(H, 0.25, 0.5)
        U = A.union(B)
        I = A.intersection(B)
        D = A.difference(B)
        assert len(U) <= len(A) + len(B)
        assert len(I) > 0 and len(D) > 0
        assert set(map(tuple, I.cells)).issubset(set(map(tuple, A.cells)))

    def test_covers_point(self):
        A = disk_mask(H, 0, 0.5, predicate="inside")
        assert A.covers_point(0.1 + 0.1j)
        assert not A.covers_point(2 + 2j)

    def test_binary_roundtrip(self):
        rng = np.random.default_rng(5)
        M = GridMask(H, rng.integers(-40, 40, size=(200, 2)), origin=(0.25, -0.5))
        M2 = GridMask.from_bytes(M.to_bytes())
        assert M2 == M

    def test_text_format(self):
        M = GridMask(H, [(0, 0), (1, 0), (0, 1)])
        txt = M.to_text()
        lines = txt.strip().split("\n")
        assert lines[1] == "10"
        assert lines[2] == "11"

    def test_point_validation(self):
        with pytest.raises(ValueError):
            Point(float("nan"), 0.0)

    def test_segment_mask_supercover(self):
        M = segment_mask(H, 0, 1 + 1j)
        for t in np.linspace(0, 1, 113):
            assert M.covers_point(t * (1 + 1j), tol=1e-12)
