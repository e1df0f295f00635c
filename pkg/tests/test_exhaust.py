"""Exhaustion tests: sandwich, induction, specialization."""

import math

import numpy as np
import pytest

from finedomain.errors import NoMargin
from finedomain.exhaust import (
    FSigmaDomain,
    build_fine_exhaustion,
    lusin_menchoff_sandwich,
    specialize,
    verify_exhaustion,
)
from finedomain.grid import (
    annulus_mask,
    complement_components,
    disk_mask,
    point_mask_distance,
    set_distance,
)

H = 1.0 / 128
FRAME = (-256, -256, 256, 256)


def unit_disc_domain(h=H, punctures=()):
    inner = tuple(disk_mask(h, 0, r, predicate="inside") for r in (0.5, 0.6, 0.7))
    if punctures:
        carve = None
        from finedomain.grid import mask_from_points

        carve = mask_from_points(h, punctures, pad_cells=1)
        inner = tuple(M.difference(carve) for M in inner)
    comp = tuple(
        annulus_mask(h, 0, r_in, 1.6) for r_in in (1.0, 0.95, 0.85)
    )
    return FSigmaDomain(inner, comp, tuple(punctures), FRAME)


class TestSandwich:
    def test_concentric_dilation(self):
        U = unit_disc_domain()
        K = disk_mask(H, 0, 0.5, predicate="inside")
        V = lusin_menchoff_sandwich(K, U, 1)
        # clearance to the first complement ring is 0.5; dilation by half
        radius = np.abs(V.cell_centers()).max()
        assert radius == pytest.approx(0.75, abs=3 * H)
        assert set_distance(V, U.complement_at(1)) > 0

    def test_puncture_carved(self):
        U = unit_disc_domain(punctures=(0.3 + 0j,))
        K = disk_mask(H, 0, 0.5, predicate="inside").difference(U.carve_mask())
        V = lusin_menchoff_sandwich(K, U, 1)
        assert point_mask_distance(0.3 + 0j, V) > 0
        # containment oracle: V stays clear of every complement witness
        assert set_distance(V, U.complement_at(1)) > 0

    def test_no_margin(self):
        U = unit_disc_domain()
        K = disk_mask(H, 0, 0.999)  # touches the first complement ring up to 2h
        with pytest.raises(NoMargin):
            lusin_menchoff_sandwich(K, U, 1)


class TestSpecialize:
    def test_hole_inside_domain_gets_filled(self):
        U = unit_disc_domain()
        K = annulus_mask(H, 0, 0.2, 0.5, predicate="inside")
        K_star, filled, _ = specialize(K, U)
        assert len(filled) == 1
        lab = complement_components(K_star, FRAME)
        assert len(lab.bounded_ids) == 0

    def test_hole_with_puncture_stays(self):
        U = unit_disc_domain(punctures=(0j,))
        K = annulus_mask(H, 0, 0.2, 0.5, predicate="inside")
        K_star, filled, _ = specialize(K, U)
        assert filled == ()
        assert K_star == K

    def test_mixed_holes_per_cell_oracle(self):
        U = unit_disc_domain(punctures=(0.25 + 0j,))
        K = (
            annulus_mask(H, 0, 0.1, 0.5, predicate="inside")
            .difference(disk_mask(H, 0.25, 0.08, predicate="cover"))
            .difference(disk_mask(H, -0.25, 0.08, predicate="cover"))
        )
        K_star, filled, labeling = specialize(K, U)
        # oracle: a hole is filled iff no cell holds complement data
        for cid in labeling.bounded_ids:
            comp = labeling.component_mask(cid)
            has_data = U.complement_witness_in(comp) is not None
            assert (cid in filled) == (not has_data)
        # the hole containing the puncture must survive
        lab2 = complement_components(K_star, FRAME)
        assert len(lab2.bounded_ids) == 1

    def test_idempotent(self):
        U = unit_disc_domain(punctures=(0j,))
        K = annulus_mask(H, 0, 0.2, 0.5, predicate="inside")
        K1, _, _ = specialize(K, U)
        K2, filled2, _ = specialize(K1, U)
        assert K2 == K1 and filled2 == ()


class TestBuildExhaustion:
    def test_unit_disc(self):
        U = unit_disc_domain()
        seq = build_fine_exhaustion(U)
        assert len(seq) == 3 and seq.special
        cert = verify_exhaustion(seq)
        assert cert["pass"]
        for st in seq.stages[1:]:
            assert st.interior_margin > 0

    def test_punctured_disc_hole_never_filled(self):
        U = unit_disc_domain(punctures=(0j,))
        seq = build_fine_exhaustion(U)
        cert = verify_exhaustion(seq)
        assert cert["pass"]
        for n in range(1, len(seq) + 1):
            lab = complement_components(seq.compact(n), FRAME)
            reps = [
                lab.representative[cid]
                for cid in lab.bounded_ids
            ]
            assert any(
                abs(r.to_complex()) < 0.1 for r in reps
            ), f"stage {n} lost the puncture hole"

    def test_two_discs_with_punctures_property_suite(self):
        h = 1.0 / 128
        punctures = (0.1 + 0.2j, -0.35 - 0.1j, 0.4 - 0.25j)
        from finedomain.grid import mask_from_points

        carve = mask_from_points(h, punctures, pad_cells=1)
        inner = tuple(
            disk_mask(h, -0.35, r, predicate="inside")
            .union(disk_mask(h, 0.35, r, predicate="inside"))
            .difference(carve)
            for r in (0.5, 0.55, 0.6)
        )
        comp = tuple(annulus_mask(h, 0, ri, 1.8) for ri in (1.3, 1.2, 1.1))
        U = FSigmaDomain(inner, comp, punctures, FRAME)
        seq = build_fine_exhaustion(U)
        cert = verify_exhaustion(seq)
        assert cert["pass"], cert

    def test_growing_clip_radii(self):
        U = unit_disc_domain()
        seq = build_fine_exhaustion(U)
        radii = [st.clip_radius for st in seq.stages]
        assert all(a < b for a, b in zip(radii, radii[1:]))

    def test_validation_rejects_touching_data(self):
        inner = (disk_mask(H, 0, 1.0),)
        comp = (annulus_mask(H, 0, 1.0, 1.5),)
        with pytest.raises(ValueError):
            FSigmaDomain(inner, comp, (), FRAME)
