"""Synthesis tests: evaluation, two-level fits, stage budgets, classification."""

import math

import numpy as np
import pytest

from finedomain.errors import PoleProximity, FitFailed
from finedomain.grid import CircularArc, Segment, annulus_mask, circle_mask, disk_mask
from finedomain.potential import FinelyOpenPatch, constant_generator
from finedomain.rational import (
    RationalFunction,
    certified_max_on_mask,
    certified_min_on_pieces,
    classify_singularity,
    eval_at,
    eval_grid,
    evaluate,
    fit_two_level_rational,
    synthesize,
)

H = 1.0 / 64


def simple_pole(p, order=1, coeff=1.0):
    cs = tuple(0j for _ in range(order - 1)) + (complex(coeff),)
    return RationalFunction(((complex(p), cs),), (), 0j, 1.0, (True,))


class TestEvaluation:
    def test_simple_pole_value(self):
        R = simple_pole(4.0)
        assert evaluate(R, 0.0) == pytest.approx(-0.25)

    def test_pole_proximity(self):
        R = simple_pole(4.0)
        with pytest.raises(PoleProximity):
            eval_at(R, 4.0 + 1e-12)

    def test_grid_skips_poles(self):
        R = simple_pole(0.0)
        vals, skipped = eval_grid(R, (-2, -2, 1, 1), 1.0, origin=(-0.5, -0.5))
        assert skipped.sum() == 1
        assert np.isnan(vals[skipped]).all()

    def test_high_degree_log_eval(self):
        # (z/0.9)^2000 at |z| = 0.95 via logs; reference in log space
        R = RationalFunction((), ((2000, 1 + 0j),), 0j, 0.9)
        z = 0.95 * np.exp(0.3j)
        val = evaluate(R, z)
        assert math.log(abs(val)) == pytest.approx(2000 * math.log(0.95 / 0.9), rel=1e-9)

    def test_text_roundtrip_bit_exact(self):
        R = RationalFunction(
            ((4 + 0j, (0j, 0.125 - 3.5j)),),
            ((7, 1e-3 + 2e4j), (0, -1 + 1j)),
            0.25j,
            1.5,
            (True,),
        )
        R2 = RationalFunction.from_text(R.to_text())
        assert R2 == R


class TestCertificates:
    def test_single_pole_closed_form_bounds(self):
        # pole at 4, K a compact with nearest point exactly 3 away, L a ring
        # around 4: the certified extremes match 1/3^3 and (4/3)^3 to 1e-12
        from finedomain.grid import rect_mask

        K = rect_mask(H, -1.0, -1.0, 1.0, 1.0)
        L = [CircularArc(4 + 0j, 0.75, 0.0, 2 * math.pi)]
        R = simple_pole(4.0, order=3)
        _, cmax, _ = certified_max_on_mask(R, K)
        _, cmin, _ = certified_min_on_pieces(R, L, H / 2)
        assert cmax == pytest.approx(1.0 / 27.0, abs=1e-12)
        assert cmin == pytest.approx((4.0 / 3.0) ** 3, abs=1e-12)
        # a rasterized disk only under-approaches the pole: one-sided bound
        Kd = disk_mask(H, 0, 1.0, predicate="inside")
        _, cmax_d, _ = certified_max_on_mask(R, Kd)
        assert cmax_d <= 1.0 / 27.0 + 1e-12

    def test_sampled_certificate_on_general_rational(self):
        K = disk_mask(H, 0, 0.5, predicate="inside")
        R = RationalFunction(
            ((2 + 0j, (1 + 0j,)), (-1.5j, (0.5j,))), ((2, 0.1 + 0j),), 0j, 1.0,
            (True, True),
        )
        smax, cmax, infl = certified_max_on_mask(R, K)
        # oracle: a 4x4 subgrid inside every cell of the certified mask
        centers = K.cell_centers()
        offs = (np.arange(4) - 1.5) * (H / 4)
        sub = (centers[:, None, None] + offs[None, :, None] + 1j * offs[None, None, :]).ravel()
        vals = np.abs(evaluate(R, sub))
        assert vals.max() <= cmax + 1e-12
        assert smax <= cmax and infl >= 0


class TestFit:
    def test_spec_closed_form_example(self):
        from finedomain.grid import rect_mask

        K = rect_mask(H, -1.0, -1.0, 1.0, 1.0)
        L = [CircularArc(4 + 0j, 0.75, 0.0, 2 * math.pi)]
        R, cert = fit_two_level_rational(K, L, [4.0], low=0.25, high=2.0)
        assert cert.strategy == "pole-power-unit"
        assert R.poles[0][1] == (0j, 0j, 1 + 0j)  # exactly (z-4)^-3
        assert cert.max_on_K_certified == pytest.approx(1 / 27, abs=1e-12)
        assert cert.min_on_L_certified == pytest.approx((4 / 3) ** 3, abs=1e-12)
        assert cert.inflation_margin_low > 0 and cert.inflation_margin_high > 0

    def test_empty_barrier_gives_zero(self):
        K = disk_mask(H, 0, 0.5)
        R, cert = fit_two_level_rational(K, [], [], low=0.5, high=1.0)
        assert R.poles == () and R.polynomial == ()
        assert cert.strategy == "zero"

    def test_monomial_strategy(self):
        K = disk_mask(H, 0, 0.5, predicate="inside")
        L = [CircularArc(0j, 0.8, 0.0, 2 * math.pi)]
        R, cert = fit_two_level_rational(K, L, [], low=0.5, high=1.0)
        assert cert.strategy == "monomial"
        assert cert.inflation_margin_low > 0 and cert.inflation_margin_high > 0

    def test_minimax_non_concentric(self):
        # K offset from the barrier's natural center forces the LP route
        K = disk_mask(H, 0.35, 0.35, predicate="inside").union(
            disk_mask(H, -0.35, 0.3, predicate="inside")
        )
        L = [CircularArc(0j, 1.4, 0.0, 2 * math.pi)]
        R, cert = fit_two_level_rational(K, L, [], low=0.5, high=1.5)
        assert cert.inflation_margin_low > 0 and cert.inflation_margin_high > 0
        # oracle: re-evaluate on a 4x-finer sampling of both sets
        finer = disk_mask(H / 4, 0.35, 0.35, predicate="inside").union(
            disk_mask(H / 4, -0.35, 0.3, predicate="inside")
        )
        assert np.abs(evaluate(R, finer.cell_centers())).max() < 0.5
        th = np.linspace(0, 2 * np.pi, 4096)
        assert np.abs(evaluate(R, 1.4 * np.exp(1j * th))).min() > 1.5

    def test_fit_failure_reported(self):
        # barrier tangent to the compact: no admissible strategy
        K = disk_mask(H, 0, 0.5, predicate="inside")
        L = [CircularArc(0.5 + 0j, 1e-4, 0.0, 2 * math.pi)]
        with pytest.raises(FitFailed):
            fit_two_level_rational(K, L, [], low=1e-6, high=1e9)


class TestSynthesize:
    def _stages(self, count=3):
        radii_K = [0.5, 0.7, 0.9, 1.1, 1.3][:count]
        radii_L = [0.6, 0.8, 1.0, 1.2, 1.4][:count]
        stages = []
        for rK, rL in zip(radii_K, radii_L):
            K = disk_mask(H, 0, rK, predicate="inside")
            L = [CircularArc(0j, rL, 0.0, 2 * math.pi)]
            stages.append((K, L, []))
        return stages

    def test_single_stage_reduces_to_fit(self):
        f = synthesize(self._stages(1))
        st = f.stages[0]
        assert st.low == 0.5 and st.high == pytest.approx(1.0)
        assert st.certificate.min_on_L_certified > 1.0

    def test_displayed_bounds_across_stages(self):
        f = synthesize(self._stages(3))
        for st in f.stages:
            assert st.certificate.max_on_K_certified < 2.0 ** (-st.n)
            assert st.certificate.min_on_L_certified > st.high

    def test_telescoping_and_persistence(self):
        stages = self._stages(3)
        f = synthesize(stages)
        for n in range(1, 3):
            K = stages[n - 1][0]
            pts = K.cell_centers()[::7]
            for m in range(n + 1, 4):
                diff = np.abs(f.evaluate(pts, upto=m) - f.evaluate(pts, upto=n))
                assert diff.max() < 2.0 ** (-n)
        for t in f.tail_certificates:
            assert t["tail_ok"]

    def test_partial_sum_cauchy(self):
        stages = self._stages(4)
        f = synthesize(stages)
        K2 = stages[1][0]
        pts = K2.cell_centers()[::11]
        d = np.abs(f.evaluate(pts, upto=4) - f.evaluate(pts, upto=3))
        assert d.max() < 2.0 ** (-3)


class TestClassify:
    PATCH = FinelyOpenPatch(0j, 1.0, constant_generator(1.0))

    def test_analytic_point_removable(self):
        R = simple_pole(2.0)
        v = classify_singularity(R, 0j, self.PATCH)
        assert v.kind == "removable"
        assert abs(v.extension_value - evaluate(R, 0j)) < 1e-6

    def test_pole_detected(self):
        R = simple_pole(0.0)
        v = classify_singularity(R, 0j, self.PATCH)
        assert v.kind == "pole"

    def test_random_rationals(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            p = complex(*rng.uniform(0.5, 2.0, 2))
            order = int(rng.integers(1, 4))
            coeff = complex(*rng.uniform(-2, 2, 2))
            if abs(coeff) < 0.1:
                coeff = 1.0
            R = simple_pole(p, order, coeff)
            v = classify_singularity(R, 0j, self.PATCH)
            assert v.kind == "removable"
            assert abs(v.extension_value - evaluate(R, 0j)) < 1e-6
            v2 = classify_singularity(
                RationalFunction(((0j, R.poles[0][1]),), (), 0j, 1.0, (True,)),
                0j,
                self.PATCH,
            )
            assert v2.kind == "pole"
