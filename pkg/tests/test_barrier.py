"""Barrier tests: covers, arc extraction, the cut construction, stage assembly."""

import math

import numpy as np
import pytest

from finedomain.barrier import (
    arc_cut,
    assemble_barrier,
    build_circle_cover,
    disk_union_boundary_arcs,
    extract_arcs,
    subtract_intervals_on_circle,
)
from finedomain.errors import GeometryDegenerate, SeparationFailure
from finedomain.exhaust import FSigmaDomain, build_fine_exhaustion
from finedomain.grid import (
    CircularArc,
    annulus_mask,
    circle_mask,
    complement_components,
    disk_mask,
    full_circle,
    point_arc_distance,
    segment_mask,
)

H = 1.0 / 128
FRAME = (-384, -384, 384, 384)


def small_domain(punctures=()):
    inner = tuple(disk_mask(H, 0, r, predicate="inside") for r in (0.5, 0.8, 1.05, 1.2))
    if punctures:
        from finedomain.grid import mask_from_points

        carve = mask_from_points(H, punctures, pad_cells=1)
        inner = tuple(M.difference(carve) for M in inner)
    comp = tuple(annulus_mask(H, 0, 1.4, ro) for ro in (1.6, 1.65, 1.7, 1.75))
    return FSigmaDomain(inner, comp, tuple(punctures), FRAME)


class TestIntervalAlgebra:
    def test_subtract_middle(self):
        kept = subtract_intervals_on_circle([(0.0, 3.0)], [(1.0, 2.0)])
        assert sorted((round(s, 9), round(e, 9)) for s, e in kept) == [
            (0.0, 1.0),
            (2.0, 3.0),
        ]

    def test_subtract_wrapping(self):
        kept = subtract_intervals_on_circle([(0.0, 2 * math.pi)], [(-0.5, 0.5)])
        assert len(kept) == 1
        s, e = kept[0]
        assert e - s == pytest.approx(2 * math.pi - 1.0)

    def test_everything_removed(self):
        assert subtract_intervals_on_circle([(0.0, 1.0)], [(0.0, 2 * math.pi)]) == []


class TestDiskUnionBoundary:
    def test_two_overlapping_equal_circles(self):
        circles = [full_circle(0, 1.0), full_circle(1.0, 1.0)]
        arcs = disk_union_boundary_arcs(circles)
        assert len(arcs) == 2
        for arc in arcs:
            assert arc.theta_end - arc.theta_start == pytest.approx(
                2 * math.pi - 2 * math.acos(0.5), abs=1e-9
            )

    def test_single_circle_full(self):
        arcs = disk_union_boundary_arcs([full_circle(1j, 0.5)])
        assert len(arcs) == 1 and arcs[0].is_full_circle

    def test_swallowed_circle_vanishes(self):
        circles = [full_circle(0, 1.0), full_circle(0.1, 0.2)]
        arcs = disk_union_boundary_arcs(circles)
        assert len(arcs) == 1 and arcs[0].radius == 1.0

    def test_random_covers_match_sampling_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            m = rng.integers(2, 7)
            centers = rng.uniform(-1, 1, m) + 1j * rng.uniform(-1, 1, m)
            radii = rng.uniform(0.3, 0.9, m)
            circles = [full_circle(c, r) for c, r in zip(centers, radii)]
            arcs = disk_union_boundary_arcs(circles)
            # oracle: a dense circle sample is on the union boundary iff it is
            # outside every *open* disk; it must then lie on some output arc
            for j in range(m):
                th = rng.uniform(0, 2 * np.pi, 500)
                pts = centers[j] + radii[j] * np.exp(1j * th)
                inside = np.zeros(500, dtype=bool)
                for i in range(m):
                    if i != j:
                        inside |= np.abs(pts - centers[i]) < radii[i] - 1e-9
                on_boundary = ~inside
                for z in pts[on_boundary][:50]:
                    dmin = min(point_arc_distance(z, arc) for arc in arcs)
                    assert dmin <= 1e-7


class TestArcCut:
    def test_identity_and_connectivity_and_interception(self):
        arc = CircularArc(0j, 1.0, -1.2, 1.2)
        a = arc.point_at(0.0)
        rec = arc_cut(arc, a, 0.1, None, n_wedge_trials=3000, seed=3)
        assert rec.certificates["identity_outside_exact"]
        assert rec.certificates["local_components_before"] == 2
        assert rec.certificates["local_components_after"] == 1
        assert rec.certificates["wedge_hits"] == 3000
        assert rec.connectivity_delta == 1

    def test_pieces_inside_squares(self):
        # wedge legs live in the closed squares with diagonals [a, a +- i r]
        arc = CircularArc(0.3 + 0.2j, 0.7, 0.4, 2.4)
        a = arc.point_at(1.4)
        rec = arc_cut(arc, a, 0.05, None, n_wedge_trials=0)
        from finedomain.barrier import _normalization
        from finedomain.grid import Segment

        rho = _normalization(arc, a)
        for p in rec.pieces:
            if isinstance(p, Segment):
                w = rho * (p.p - a) / arc.radius
                rbar = 0.05 / arc.radius
                assert abs(w.imag) <= rbar / 2 + 1e-12
                assert abs(w.real) <= rbar / 2 + 1e-12

    def test_cut_near_endpoint_rejected(self):
        arc = CircularArc(0j, 1.0, 0.0, 0.5)
        a = arc.point_at(0.01)
        with pytest.raises(GeometryDegenerate):
            arc_cut(arc, a, 0.1, None, n_wedge_trials=0)

    def test_randomized_cut_suite(self):
        """Acceptance-grade loop at reduced trial count (the acceptance module
        runs 100 arcs x 10^4 wedges)."""
        rng = np.random.default_rng(5)
        for k in range(10):
            c = complex(*rng.uniform(-0.5, 0.5, 2))
            R = rng.uniform(0.5, 1.5)
            t0 = rng.uniform(0, 2 * np.pi)
            span = rng.uniform(1.0, 2 * np.pi - 0.5)
            arc = CircularArc(c, R, t0, t0 + span)
            a = arc.point_at(t0 + span * rng.uniform(0.35, 0.65))
            r_j = rng.uniform(0.02, 0.08) * R
            rec = arc_cut(arc, a, r_j, None, n_wedge_trials=1000, seed=100 + k)
            assert rec.certificates["identity_outside_exact"]
            assert rec.certificates["connectivity_ok"]
            assert rec.certificates["wedge_hits"] == 1000


class TestCoverAndStage:
    def test_cover_radii_below_delta(self):
        U = small_domain()
        seq = build_fine_exhaustion(U)
        K1, K2 = seq.compact(1), seq.compact(2)
        lab = complement_components(K1, FRAME)
        covers = build_circle_cover(K1, K2, U.complement_at(1), lab, FRAME)
        assert len(covers) == 1  # only the unbounded component meets F_1
        for cover in covers:
            for c in cover.circles:
                assert c.radius < cover.epsilon_bound

    def test_cover_coverage_oracle(self):
        U = small_domain()
        seq = build_fine_exhaustion(U)
        K1, K2 = seq.compact(1), seq.compact(2)
        lab = complement_components(K1, FRAME)
        cover = build_circle_cover(K1, K2, U.complement_at(1), lab, FRAME)[0]
        from finedomain.barrier import _interface_samples

        samples = _interface_samples(K1, lab, cover.host_component)
        rng = np.random.default_rng(8)
        picks = samples[rng.integers(0, len(samples), size=10000)]
        centers = np.array([c.center for c in cover.circles])
        dmin = np.abs(picks[:, None] - centers[None, :]).min(axis=1)
        assert (dmin < cover.radius).all()

    def test_separation_failure(self):
        h = 1.0 / 32  # resolution too coarse for the gap
        inner = (disk_mask(h, 0, 0.5, predicate="inside"),)
        comp = (annulus_mask(h, 0, 0.55, 0.8),)
        U = FSigmaDomain(inner, comp, (), (-64, -64, 64, 64))
        K1 = U.inner_at(1)
        lab = complement_components(K1, U.frame)
        with pytest.raises(SeparationFailure):
            build_circle_cover(K1, K1.dilate(2 * h, U.frame), U.complement_at(1), lab, U.frame)

    def test_extract_arcs_in_component(self):
        U = small_domain()
        seq = build_fine_exhaustion(U)
        K1, K2 = seq.compact(1), seq.compact(2)
        lab = complement_components(K1, FRAME)
        cover = build_circle_cover(K1, K2, U.complement_at(1), lab, FRAME)[0]
        arcs = extract_arcs(cover, lab)
        assert len(arcs) >= 2
        for arc in arcs:
            mid = arc.point_at((arc.theta_start + arc.theta_end) / 2)
            assert lab.label_of_point(mid) == cover.host_component

    def test_stage_certificates(self):
        U = small_domain()
        seq = build_fine_exhaustion(U)
        st = assemble_barrier(
            seq.compact(1),
            seq.compact(2),
            U.complement_at(1),
            1,
            U,
            n_wedge_trials=2000,
            per_cut_trials=200,
            seed=0,
        )
        c = st.certificates
        assert c["b_distance_positive"] and c["b_min_distance"] > 0
        assert c["c_contained"]
        assert c["d_connectivity"]
        assert c["e_witnesses"]
        assert c["f_ok"] and c["f_trials"] == 2000
        assert st.delta_n > 0 and st.margin > 0

    def test_punctured_stage_keeps_hole_witness(self):
        U = small_domain(punctures=(0j,))
        seq = build_fine_exhaustion(U)
        st = assemble_barrier(
            seq.compact(2),
            seq.compact(3),
            U.complement_at(2),
            2,
            U,
            n_wedge_trials=1000,
            per_cut_trials=100,
            seed=0,
        )
        assert st.certificates["e_witnesses"]
        assert st.certificates["f_ok"]

    def test_vacuous_stage_without_complement_data(self):
        inner = tuple(disk_mask(H, 0, r, predicate="inside") for r in (0.5, 0.8))
        U = FSigmaDomain(inner, (), (), FRAME)
        seq = build_fine_exhaustion(U)
        st = assemble_barrier(seq.compact(1), seq.compact(2), None, 1, U)
        assert st.certificates["vacuous"]
        assert st.pieces == ()
        assert st.certificates["f_ok"]
