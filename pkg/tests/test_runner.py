"""Runner, report and CLI tests (fast, coarse-resolution configurations)."""

import math
import os

import numpy as np
import pytest
from dataclasses import replace

from finedomain.cli import main as cli_main
from finedomain.errors import ConfigError, InsufficientStages
from finedomain.rational import SynthesizedFunction, SynthesisStage, RationalFunction
from finedomain.report import read_report, strip_timestamps, write_report
from finedomain.runner import (
    certify_blowup_mechanics,
    export_field,
    load_run,
    pieces_from_text,
    pieces_to_text,
    read_field_csv,
    run_scenario,
    wedge_hit_points,
)
from finedomain.scenarios import BUILTIN_NAMES, builtin_scenario, parse_config
from finedomain.grid import CircularArc, Segment, Wedge


def coarse_scenario(name="unit-disc", stages=3, synth=2, seed=0):
    s = builtin_scenario(name, resolution=1.0 / 64)
    return replace(
        s,
        stage_count=stages,
        synth_stages=synth,
        seed=seed,
        wedge_trials=300,
        per_cut_trials=40,
    )


class TestScenarios:
    def test_builtin_names(self):
        for name in BUILTIN_NAMES:
            s = builtin_scenario(name, resolution=1.0 / 64)
            assert s.name == name
            s.build_domain()  # validates the data

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            builtin_scenario("moebius")

    def test_config_roundtrip(self):
        cfg = """
[scenario]
name = toy
resolution = 1/64
stages = 2
seed = 3
frame = -192 -192 192 192

[domain]
inner = disk 0 0 0.4
inner = disk 0 0 0.5
complement = annulus 0 0 1.0 1.3
complement = annulus 0 0 0.9 1.3
exceptional = 0.1 0.2
"""
        s = parse_config(cfg)
        assert s.name == "toy" and s.stage_count == 2 and s.seed == 3
        assert s.exceptional == (0.1 + 0.2j,)
        dom = s.build_domain()
        assert len(dom.inner_compacts) == 2

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            parse_config("[scenario]\nname = x\nstages = 0\nframe = -8 -8 8 8\n[domain]\ninner = disk 0 0 1\n")

    def test_builtin_override(self):
        cfg = "[scenario]\nbuiltin = unit-disc\nresolution = 1/64\nstages = 2\nsynth_stages = 1\n"
        s = parse_config(cfg)
        assert s.stage_count == 2 and s.synth_stages == 1


class TestReport:
    def test_roundtrip(self):
        text = write_report([("a", {"x": 1.5, "ok": True}), ("b", {"y": "z w"})])
        secs = read_report(text)
        assert secs[0][0] == "a" and secs[0][1]["x"] == "1.5"
        assert secs[0][1]["ok"] == "true"

    def test_strip_timestamps(self):
        t1 = write_report([("a", {"x": 1})])
        t2 = write_report([("a", {"x": 1})])
        assert strip_timestamps(t1) == strip_timestamps(t2)


class TestRunScenario:
    def test_coarse_unit_disc(self, tmp_path):
        r = run_scenario(coarse_scenario(), out_dir=str(tmp_path / "run"))
        assert r.verdict
        loaded = load_run(str(tmp_path / "run"))
        assert len(loaded.compacts) == 3
        assert len(loaded.rationals) == 2
        assert loaded.compacts[0] == r.exhaustion.compact(1)

    def test_determinism_byte_identical(self):
        s = coarse_scenario(seed=9)
        r1 = run_scenario(s)
        r2 = run_scenario(s)
        assert strip_timestamps(r1.report_text) == strip_timestamps(r2.report_text)

    def test_seed_changes_monte_carlo(self):
        r1 = run_scenario(coarse_scenario(seed=1))
        r2 = run_scenario(coarse_scenario(seed=2))
        assert r1.verdict and r2.verdict  # different seeds, same verdicts

    def test_punctured_disc_hole_never_filled(self):
        r = run_scenario(coarse_scenario("punctured-disc", stages=3, synth=0))
        for n in range(1, 4):
            K = r.exhaustion.compact(n)
            assert not K.covers_point(0j)
        assert all(st.filled_components == () for st in r.exhaustion.stages)

    def test_rationals_truncated_vacuous_barriers(self):
        s = builtin_scenario("rationals-truncated", resolution=1.0 / 64)
        s = replace(s, wedge_trials=100, per_cut_trials=20)
        r = run_scenario(s)
        assert r.verdict
        for st in r.barriers:
            assert st.certificates["vacuous"]
        # the synthesized function is identically zero: bounded at punctures
        vals = r.synthesized.evaluate(np.array([0.25 + 0j, 1 / 3 + 0j]))
        assert np.abs(vals).max() == 0.0

    def test_pieces_text_roundtrip(self):
        pieces = (
            CircularArc(0.25 - 1j, 0.5, 0.1, 2.0),
            Segment(1 + 1j, 2 - 0.5j),
        )
        assert pieces_from_text(pieces_to_text(pieces)) == pieces


class TestBlowup:
    def test_wedge_hit_points(self):
        arc = CircularArc(0j, 1.0, 0.0, math.pi)
        w = Wedge(-2 + 0.5j, 0.5j, 2 + 0.5j)
        pts = wedge_hit_points(w, [arc])
        assert len(pts) >= 2
        for z in pts:
            assert abs(abs(z) - 1.0) < 1e-9

    def test_insufficient_when_M_too_large(self):
        fake = SynthesizedFunction(
            (SynthesisStage(1, RationalFunction(), 0.5, 1.0, None),)
        )
        from finedomain.grid import disk_mask, annulus_mask

        h = 1.0 / 32
        K = disk_mask(h, 0, 0.5)
        F = annulus_mask(h, 0, 1.0, 1.2)
        with pytest.raises(InsufficientStages):
            certify_blowup_mechanics(fake, [(K, F, ())], M=50.0, trials=10)


class TestExport:
    def _f(self):
        return SynthesizedFunction(
            (
                SynthesisStage(
                    1,
                    RationalFunction(((2 + 0j, (1 + 0j,)),), (), 0j, 1.0, (True,)),
                    0.5,
                    1.0,
                    None,
                ),
            )
        )

    def test_export_files(self, tmp_path):
        f = self._f()
        pgm, csv, rpt = export_field(f, (-1, -1, 1, 1), 64, str(tmp_path / "field"))
        with open(pgm, "rb") as fh:
            head = fh.read(15)
        assert head.startswith(b"P5\n64 64\n255\n")
        assert os.path.getsize(pgm) == len(b"P5\n64 64\n255\n") + 64 * 64

    def test_csv_bit_exact_roundtrip(self, tmp_path):
        f = self._f()
        _, csv, _ = export_field(f, (-1, -1, 1, 1), 16, str(tmp_path / "field"))
        xs, ys, vs = read_field_csv(csv)
        k = 7 * 16 + 3
        z = complex(xs[k], ys[k])
        assert vs[k] == f.evaluate(z)

    def test_empty_region_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            export_field(self._f(), (1, 1, 1, 2), 16, str(tmp_path / "f"))


class TestCli:
    def test_run_certify_export(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(
            "[scenario]\nbuiltin = unit-disc\nresolution = 1/64\nstages = 3\n"
            "synth_stages = 2\nseed = 0\nwedge_trials = 200\nper_cut_trials = 30\n"
        )
        out = str(tmp_path / "out")
        assert cli_main(["run", str(cfg), "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "report.txt"))
        # certify: stages too shallow for any qualifying wedge -> reported, exit 0
        rc = cli_main(["certify", out, "--bound", "0.5", "--trials", "20"])
        assert rc == 0
        rc = cli_main(["export", out, "--region=-1,-1,1,1", "--px", "32"])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "field.pgm"))

    def test_run_bad_scenario(self):
        assert cli_main(["run", "no-such-thing"]) == 2
