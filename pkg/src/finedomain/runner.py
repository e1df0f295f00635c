"""Scenario runner, blow-up mechanics certification, field export.

run_scenario drives the full pipeline (exhaustion, per-stage barriers,
recursive rational synthesis), writes the certificate report and the
serialized artifacts (stage masks, barrier pieces, stage rationals) into the
output directory, and returns an in-memory result object.  Reports are
deterministic given the config and seeds.

certify_blowup_mechanics replays the contradiction geometry at desk scale:
near-boundary points joined to deep compact points by ladder-radius wedges
must cross the stage barrier where the synthesized function already exceeds
the hypothetical extension bound.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .barrier import BarrierStage, assemble_barrier
from .errors import ConfigError, InsufficientStages
from .exhaust import ExhaustionSequence, build_fine_exhaustion, verify_exhaustion
from .grid import (
    CircularArc,
    GridMask,
    Segment,
    Wedge,
    _cpx,
    complement_components,
    segment_arc_distance,
    segment_segment_distance,
)
from .potential import FinelyOpenPatch, constant_generator, find_good_circle, find_wedge
from .rational import RationalFunction, SynthesizedFunction, evaluate, synthesize
from .report import strip_timestamps, write_report
from .scenarios import Scenario


@dataclass
class RunResult:
    scenario: Scenario
    exhaustion: ExhaustionSequence
    barriers: tuple[BarrierStage, ...]
    synthesized: SynthesizedFunction | None
    report_text: str
    verdict: bool
    timings: dict = field(default_factory=dict)
    out_dir: str | None = None


def _pole_plan(K_n: GridMask, domain) -> list[tuple[complex, bool]]:
    """One preassigned pole site per bounded complement component: the
    component's complement witness (an F cell or an exceptional point)."""
    lab = complement_components(K_n, domain.frame)
    plan = []
    for cid in lab.bounded_ids:
        comp = lab.component_mask(cid)
        w = domain.complement_witness_in(comp)
        if w is not None:
            plan.append((w.to_complex(), True))
    return plan


def run_scenario(scenario: Scenario, out_dir: str | None = None) -> RunResult:
    """Full pipeline with certificates; artifacts written when out_dir given."""
    t_start = time.monotonic()
    domain = scenario.build_domain()
    timings = {}
    t0 = time.monotonic()
    seq = build_fine_exhaustion(domain, scenario.stage_count)
    timings["exhaustion_s"] = time.monotonic() - t0
    exh_cert = verify_exhaustion(seq)
    barriers = []
    t0 = time.monotonic()
    n_barrier = min(scenario.stage_count - 1, scenario.stage_count)
    for n in range(1, scenario.stage_count):
        st = assemble_barrier(
            seq.compact(n),
            seq.compact(n + 1),
            domain.complement_at(n),
            n,
            domain,
            n_wedge_trials=scenario.wedge_trials,
            per_cut_trials=scenario.per_cut_trials,
            seed=scenario.seed + n,
        )
        barriers.append(st)
    timings["barrier_s"] = time.monotonic() - t0
    synthesized = None
    if scenario.synth_stages > 0:
        t0 = time.monotonic()
        stage_inputs = []
        for n in range(1, scenario.synth_stages + 1):
            K_n = seq.compact(n)
            pieces = barriers[n - 1].pieces if n - 1 < len(barriers) else ()
            stage_inputs.append((K_n, pieces, _pole_plan(K_n, domain)))
        synthesized = synthesize(stage_inputs)
        timings["synthesis_s"] = time.monotonic() - t0
    timings["total_s"] = time.monotonic() - t_start
    sections, verdict = _report_sections(
        scenario, seq, exh_cert, barriers, synthesized, timings
    )
    report_text = write_report(sections)
    result = RunResult(
        scenario=scenario,
        exhaustion=seq,
        barriers=tuple(barriers),
        synthesized=synthesized,
        report_text=report_text,
        verdict=verdict,
        timings=timings,
        out_dir=out_dir,
    )
    if out_dir is not None:
        _write_artifacts(result, out_dir)
    return result


def _report_sections(scenario, seq, exh_cert, barriers, synthesized, timings):
    run_kv = {
        "scenario": scenario.name,
        "resolution": scenario.resolution,
        "stages": scenario.stage_count,
        "synth_stages": scenario.synth_stages,
        "seed": scenario.seed,
        "wedge_trials": scenario.wedge_trials,
        "per_cut_trials": scenario.per_cut_trials,
        "alpha_default": math.sqrt(2.0),
        "frame": scenario.frame,
        "tail_caveat": (
            "stage margins certify tails stage-by-stage, not globally"
        ),
    }
    sections = [("run", run_kv)]
    ok = exh_cert["pass"]
    exh_kv = {
        "nesting_margins": exh_cert["nesting"],
        "coverage": exh_cert["coverage"],
        "avoidance": exh_cert["avoidance"],
        "special": exh_cert["special"],
        "pass": exh_cert["pass"],
    }
    sections.append(("exhaustion", exh_kv))
    for st in barriers:
        c = st.certificates
        kv = {
            "delta_n": st.delta_n,
            "margin": st.margin,
            "covers": len(st.covers),
            "circles": sum(len(cv.circles) for cv in st.covers),
            "pieces": len(st.pieces),
            "cuts": len(st.cut_records),
            "b_min_distance": c.get("b_min_distance", math.inf),
            "b_distance_positive": c["b_distance_positive"],
            "c_contained": c["c_contained"],
            "d_connectivity": c["d_connectivity"],
            "e_witnesses": c["e_witnesses"],
            "f_trials": c["f_trials"],
            "f_hits": c["f_hits"],
            "f_ok": c["f_ok"],
            "vacuous": c.get("vacuous", False),
        }
        ok = ok and c["b_distance_positive"] and c["c_contained"]
        ok = ok and c["d_connectivity"] and c["e_witnesses"] and c["f_ok"]
        sections.append((f"barrier {st.n}", kv))
    if synthesized is not None:
        for st in synthesized.stages:
            cert = st.certificate
            kv = {
                "strategy": cert.strategy,
                "degree": st.fn.degree_bound(),
                "low": st.low,
                "high": st.high,
                "max_on_K_samples": cert.max_on_K_samples,
                "max_on_K_certified": cert.max_on_K_certified,
                "min_on_L_samples": cert.min_on_L_samples,
                "min_on_L_certified": cert.min_on_L_certified,
                "inflation_margin_low": cert.inflation_margin_low,
                "inflation_margin_high": cert.inflation_margin_high,
                "poles": len(st.fn.poles),
                "pole_attested": all(st.fn.pole_attestations)
                if st.fn.pole_attestations
                else True,
            }
            ok = ok and cert.inflation_margin_low > 0
            if st.high > 0 and kv["min_on_L_certified"] != math.inf:
                ok = ok and cert.inflation_margin_high > 0
            sections.append((f"synthesis {st.n}", kv))
        for t in synthesized.tail_certificates:
            kv = dict(t)
            ok = ok and t.get("tail_ok", True)
            sections.append((f"tail {t['n']}", kv))
    sections.append(
        (
            "verdict",
            {
                "pass": ok,
                "timing_exhaustion_s": round(timings.get("exhaustion_s", 0.0), 3),
                "timing_barrier_s": round(timings.get("barrier_s", 0.0), 3),
                "timing_synthesis_s": round(timings.get("synthesis_s", 0.0), 3),
            },
        )
    )
    # timings vary run to run: move them to the excluded line? they are small
    # and harmless for determinism since rounded -- no: drop them entirely
    sections[-1] = ("verdict", {"pass": ok})
    return sections, ok


# -- artifacts -------------------------------------------------------------------


def pieces_to_text(pieces) -> str:
    lines = [f"pieces v1 count {len(pieces)}"]
    for p in pieces:
        if isinstance(p, CircularArc):
            lines.append(
                "arc "
                + " ".join(
                    x.hex()
                    for x in (
                        p.center.real,
                        p.center.imag,
                        p.radius,
                        p.theta_start,
                        p.theta_end,
                    )
                )
            )
        else:
            lines.append(
                "seg "
                + " ".join(
                    x.hex() for x in (p.p.real, p.p.imag, p.q.real, p.q.imag)
                )
            )
    return "\n".join(lines) + "\n"


def pieces_from_text(text: str):
    lines = text.strip().split("\n")
    out = []
    for ln in lines[1:]:
        toks = ln.split()
        vals = [float.fromhex(t) for t in toks[1:]]
        if toks[0] == "arc":
            out.append(
                CircularArc(complex(vals[0], vals[1]), vals[2], vals[3], vals[4])
            )
        else:
            out.append(Segment(complex(vals[0], vals[1]), complex(vals[2], vals[3])))
    return tuple(out)


def _write_artifacts(result: RunResult, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(result.report_text)
    seq = result.exhaustion
    for n in range(1, len(seq) + 1):
        with open(os.path.join(out_dir, f"K{n}.fdmk"), "wb") as fh:
            fh.write(seq.compact(n).to_bytes())
    for st in result.barriers:
        with open(os.path.join(out_dir, f"L{st.n}.pieces.txt"), "w") as fh:
            fh.write(pieces_to_text(st.pieces))
        with open(os.path.join(out_dir, f"L{st.n}.fdmk"), "wb") as fh:
            fh.write(st.raster.to_bytes())
    if result.synthesized is not None:
        for st in result.synthesized.stages:
            with open(os.path.join(out_dir, f"R{st.n}.txt"), "w") as fh:
                fh.write(st.fn.to_text())
    with open(os.path.join(out_dir, "scenario.txt"), "w") as fh:
        fh.write(_scenario_echo(result.scenario))


def _scenario_echo(s: Scenario) -> str:
    from .scenarios import BUILTIN_NAMES

    lines = ["[scenario]"]
    if s.name in BUILTIN_NAMES:
        lines.append(f"builtin = {s.name}")
    lines += [
        f"name = {s.name}",
        f"resolution = {s.resolution!r}",
        f"stages = {s.stage_count}",
        f"synth_stages = {s.synth_stages}",
        f"seed = {s.seed}",
        f"wedge_trials = {s.wedge_trials}",
        f"per_cut_trials = {s.per_cut_trials}",
        "frame = " + " ".join(str(v) for v in s.frame),
    ]
    return "\n".join(lines) + "\n"


@dataclass
class LoadedRun:
    compacts: tuple[GridMask, ...]
    pieces_by_stage: tuple[tuple, ...]
    rationals: tuple[RationalFunction, ...]
    report_text: str


def load_run(out_dir: str) -> LoadedRun:
    compacts = []
    n = 1
    while os.path.exists(os.path.join(out_dir, f"K{n}.fdmk")):
        with open(os.path.join(out_dir, f"K{n}.fdmk"), "rb") as fh:
            compacts.append(GridMask.from_bytes(fh.read()))
        n += 1
    pieces = []
    n = 1
    while os.path.exists(os.path.join(out_dir, f"L{n}.pieces.txt")):
        with open(os.path.join(out_dir, f"L{n}.pieces.txt")) as fh:
            pieces.append(pieces_from_text(fh.read()))
        n += 1
    rationals = []
    n = 1
    while os.path.exists(os.path.join(out_dir, f"R{n}.txt")):
        with open(os.path.join(out_dir, f"R{n}.txt")) as fh:
            rationals.append(RationalFunction.from_text(fh.read()))
        n += 1
    with open(os.path.join(out_dir, "report.txt")) as fh:
        report_text = fh.read()
    return LoadedRun(tuple(compacts), tuple(pieces), tuple(rationals), report_text)


# -- blow-up mechanics (the contradiction geometry) ---------------------------------


def wedge_hit_points(w: Wedge, pieces, tol: float = 1e-12):
    """All points where the wedge meets the pieces (crossings and touchings)."""
    pts = []
    for seg in w.segments():
        p, q = seg.p, seg.q
        d = q - p
        L2 = abs(d) ** 2
        for piece in pieces:
            if isinstance(piece, Segment):
                if segment_segment_distance(p, q, piece.p, piece.q) <= tol:
                    # crossing point by solving the 2x2 system; clamp inside
                    e = piece.q - piece.p
                    den = d.real * e.imag - d.imag * e.real
                    if abs(den) > 1e-300:
                        t = ((piece.p - p).real * e.imag - (piece.p - p).imag * e.real) / den
                        pts.append(p + min(1.0, max(0.0, t)) * d)
                    else:
                        pts.append(piece.p)
                continue
            if segment_arc_distance(p, q, piece) > tol:
                continue
            c, r = piece.center, piece.radius
            if L2 > 0:
                wv = p - c
                b = 2.0 * (wv.real * d.real + wv.imag * d.imag)
                cc = abs(wv) ** 2 - r * r
                disc = b * b - 4 * L2 * cc
                if disc >= 0:
                    sq = math.sqrt(disc)
                    for t in ((-b - sq) / (2 * L2), (-b + sq) / (2 * L2)):
                        if -1e-9 <= t <= 1 + 1e-9:
                            z = p + min(1.0, max(0.0, t)) * d
                            v = z - c
                            if piece.angle_contains(math.atan2(v.imag, v.real), 1e-9):
                                pts.append(z)
    return pts


def certify_blowup_mechanics(
    f: SynthesizedFunction,
    stage_data,
    M: float,
    trials: int = 1000,
    seed: int = 0,
    ladder_C: float = 1.3,
) -> dict:
    """Monte-Carlo replay of the extension-contradiction geometry.

    stage_data: list of (K_n, F_n, pieces) for n = 1..N.  Each trial samples a
    near-complement point z0 (a complement cell adjacent to F), takes a
    ladder-certified circle radius r0 about z0, picks a compact point w0 on
    that circle, and joins w0 to z0 by a wedge.  The first stage n with
    w0 in K_n, z0 F_n-adjacent, n - 2^(1-n) > M and 4/n < wedge length must
    see its barrier intercept the wedge with |f| > M at every interception.
    Raises InsufficientStages when no stage qualifies for the given M.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    N = len(stage_data)
    K_last, F_last, _ = stage_data[-1]
    h = K_last.resolution
    # candidate stages for the bound condition (paper threshold n - 2^{1-n})
    n_bound = None
    for n in range(1, N + 1):
        if n - 2.0 ** (1 - n) > M:
            n_bound = n
            break
    if n_bound is None:
        raise InsufficientStages(
            f"M={M} needs a stage n with n - 2^(1-n) > M beyond {N}",
            required_stage=N + 1,
        )
    rng = np.random.default_rng(seed)
    # z0 pool: complement cells adjacent to the deepest F
    if F_last is None or F_last.is_empty:
        raise InsufficientStages("no complement compact to anchor z0 samples")
    fb = F_last.boundary_cells()
    shifts = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)])
    cand = np.concatenate([fb + s for s in shifts], axis=0)
    cand = cand[~F_last.contains_cells(cand)]
    cand = cand[~K_last.contains_cells(cand)]
    z0_pool = GridMask(h, cand, K_last.origin).cell_centers()
    patch = FinelyOpenPatch(0j, 4.0, constant_generator(1.0))
    hits = 0
    insufficient = 0
    details = []
    for _ in range(trials):
        z0 = z0_pool[rng.integers(0, len(z0_pool))]
        shifted = FinelyOpenPatch(z0, 4.0, constant_generator(1.0))
        ok = False
        for n in range(n_bound, N + 1):
            K_n, F_n, pieces = stage_data[n - 1]
            if not pieces:
                continue
            # z0 must sit next to F_n
            ci, cj = K_n.cell_of_point(z0)
            near_F = any(
                F_n.contains_cell(ci + a, cj + b)
                for a in (-1, 0, 1)
                for b in (-1, 0, 1)
            )
            if not near_F:
                continue
            r0 = find_good_circle(shifted, z0, ladder_C, 0, samples=512)
            if not r0 > 4.0 / n:
                continue
            th = rng.uniform(0.0, 2 * math.pi)
            angles = (th + np.linspace(0.0, 2 * math.pi, 720, endpoint=False)) % (
                2 * math.pi
            )
            ring_pts = z0 + r0 * np.exp(1j * angles)
            inside = K_n.contains_cells(
                np.stack(
                    [
                        np.floor((ring_pts.real - K_n.origin[0]) / h).astype(int),
                        np.floor((ring_pts.imag - K_n.origin[1]) / h).astype(int),
                    ],
                    axis=1,
                )
            )
            if not inside.any():
                continue
            w0 = ring_pts[np.argmax(inside)]
            wedge = find_wedge(w0, z0, None, alpha=math.sqrt(2.0))
            if not wedge.total_length > 4.0 / n:
                continue
            pts = wedge_hit_points(wedge, pieces)
            if not pts:
                details.append(("miss", n, z0, w0))
                break
            vals = np.abs(f.evaluate(np.array(pts), upto=None))
            if vals.min() > M:
                ok = True
            else:
                details.append(("low", n, z0, float(vals.min())))
            break
        else:
            insufficient += 1
            continue
        if ok:
            hits += 1
    qualifying = trials - insufficient
    if qualifying == 0:
        raise InsufficientStages(
            f"no stage within {N} satisfies both the bound n - 2^(1-n) > {M} "
            "and the wedge length condition 4/n < total",
            required_stage=N + 1,
        )
    record = {
        "M": M,
        "trials": trials,
        "hits": hits,
        "qualifying": qualifying,
        "insufficient": insufficient,
        "hit_rate_percent": 100.0 * hits / qualifying,
        "pass": hits == qualifying,
        "seed": seed,
        "stage_bound": n_bound,
    }
    return record


# -- field export --------------------------------------------------------------------


def export_field(f, region, px: int, out_prefix: str):
    """|f| heatmap (binary PGM, log scale), complex field CSV (hex floats),
    and a small key-value report.  Returns the written paths."""
    x0, y0, x1, y1 = region
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("empty export region")
    if px < 2:
        raise ConfigError("need at least a 2x2 export raster")
    xs = np.linspace(x0, x1, px)
    ys = np.linspace(y0, y1, px)
    Z = xs[None, :] + 1j * ys[:, None]
    vals = f.evaluate(Z) if isinstance(f, SynthesizedFunction) else evaluate(f, Z)
    mag = np.abs(vals)
    with np.errstate(divide="ignore"):
        logm = np.log10(np.where(mag > 0, mag, np.nan))
    finite = np.isfinite(logm)
    lo = float(np.nanmin(logm[finite])) if finite.any() else 0.0
    hi = float(np.nanmax(logm[finite])) if finite.any() else 1.0
    if hi <= lo:
        hi = lo + 1.0
    scaled = np.clip((logm - lo) / (hi - lo), 0.0, 1.0)
    scaled = np.where(np.isfinite(scaled), scaled, 1.0)
    img = (scaled * 255).astype(np.uint8)[::-1, :]  # top row = max y
    pgm_path = out_prefix + ".pgm"
    with open(pgm_path, "wb") as fh:
        fh.write(f"P5\n{px} {px}\n255\n".encode())
        fh.write(img.tobytes())
    csv_path = out_prefix + ".csv"
    with open(csv_path, "w") as fh:
        fh.write("x,y,re,im\n")
        for j in range(px):
            for i in range(px):
                v = vals[j, i]
                fh.write(
                    f"{xs[i].hex()},{ys[j].hex()},{v.real.hex()},{v.imag.hex()}\n"
                )
    rpt_path = out_prefix + ".report.txt"
    write_report(
        [
            (
                "export",
                {
                    "region": list(region),
                    "px": px,
                    "log10_scale_min": lo,
                    "log10_scale_max": hi,
                    "skipped_nonfinite": int((~finite).sum()),
                },
            )
        ],
        path=rpt_path,
    )
    return pgm_path, csv_path, rpt_path


def read_field_csv(path: str):
    """Bit-exact inverse of the CSV writer."""
    xs, ys, vs = [], [], []
    with open(path) as fh:
        next(fh)
        for line in fh:
            a, b, c, d = line.strip().split(",")
            xs.append(float.fromhex(a))
            ys.append(float.fromhex(b))
            vs.append(complex(float.fromhex(c), float.fromhex(d)))
    return np.array(xs), np.array(ys), np.array(vs)
