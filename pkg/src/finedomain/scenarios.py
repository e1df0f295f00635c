"""Scenario definitions and the plain-text config format.

A scenario bundles an F-sigma domain description (disk/annulus/rect/polygon
primitives plus exceptional points), stage counts, the working resolution and
seeds.  Four scenarios ship with the library:

  unit-disc          one disc exhausted by concentric compacts, complement
                     ring data; 5 synthesis stages (the canonical case);
  punctured-disc     the same disc minus the origin (an exceptional point);
  two-discs          union of two overlapping discs minus three exceptional
                     points; barrier stages only (see README for why the
                     two-level fits are switched off here);
  rationals-truncated  the plane minus a finite set of rationals: no
                     complement compacts at all, so every barrier is vacuous
                     and the synthesized function continues across each
                     truncated exceptional point.

Stage gaps halve from stage to stage (the sandwich dilates by half the
clearance), so the disc scenarios are sized with an initial gap wide enough
that the fifth stage still resolves at h = 1/256.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError
from .exhaust import FSigmaDomain
from .grid import GridMask, annulus_mask, disk_mask, mask_from_points, polygon_mask, rect_mask


@dataclass(frozen=True)
class ShapeSpec:
    kind: str  # disk | annulus | rect | polygon
    params: tuple[float, ...]
    predicate: str = "inside"

    def build(self, h: float) -> GridMask:
        if self.kind == "disk":
            cx, cy, r = self.params
            return disk_mask(h, complex(cx, cy), r, predicate=self.predicate)
        if self.kind == "annulus":
            cx, cy, r1, r2 = self.params
            return annulus_mask(h, complex(cx, cy), r1, r2, predicate="cover")
        if self.kind == "rect":
            return rect_mask(h, *self.params)
        if self.kind == "polygon":
            pts = [
                complex(self.params[i], self.params[i + 1])
                for i in range(0, len(self.params), 2)
            ]
            return polygon_mask(h, pts)
        raise ConfigError(f"unknown shape kind {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    inner: tuple[tuple[ShapeSpec, ...], ...]  # per stage, shapes to union
    complement: tuple[tuple[ShapeSpec, ...], ...]
    exceptional: tuple[complex, ...]
    frame: tuple[int, int, int, int]
    resolution: float
    stage_count: int
    synth_stages: int
    seed: int = 0
    wedge_trials: int = 10000
    per_cut_trials: int = 400

    def __post_init__(self):
        if self.stage_count < 1:
            raise ConfigError("stage_count must be >= 1")
        if self.resolution <= 0:
            raise ConfigError("resolution must be positive")
        if self.synth_stages > self.stage_count:
            raise ConfigError("synth_stages cannot exceed stage_count")
        if len(self.inner) < self.stage_count:
            raise ConfigError("need an inner compact per stage")

    def build_domain(self) -> FSigmaDomain:
        h = self.resolution
        carve = None
        if self.exceptional:
            carve = mask_from_points(h, self.exceptional, pad_cells=1)
        inner = []
        acc = None
        for shapes in self.inner:
            M = shapes[0].build(h)
            for s in shapes[1:]:
                M = M.union(s.build(h))
            if carve is not None:
                M = M.difference(carve)
            acc = M if acc is None else acc.union(M)
            inner.append(acc)
        comp = []
        acc = None
        for shapes in self.complement:
            if not shapes:
                continue
            M = shapes[0].build(h)
            for s in shapes[1:]:
                M = M.union(s.build(h))
            acc = M if acc is None else acc.union(M)
            comp.append(acc)
        return FSigmaDomain(tuple(inner), tuple(comp), self.exceptional, self.frame)


def _disc_family(name, center_r, ring_inner, stages, synth, h, extra=1.25, punctures=()):
    radii = center_r
    inner = tuple((ShapeSpec("disk", (0.0, 0.0, r)),) for r in radii)
    comp = tuple(
        (ShapeSpec("annulus", (0.0, 0.0, ring_inner, ring_inner + 0.2 + 0.05 * k)),)
        for k in range(stages + 1)
    )
    half = int(math.ceil((ring_inner + 0.2 + 0.05 * stages + extra) / h))
    frame = (-half, -half, half, half)
    return Scenario(
        name=name,
        inner=inner,
        complement=comp,
        exceptional=tuple(punctures),
        frame=frame,
        resolution=h,
        stage_count=stages,
        synth_stages=synth,
        seed=0,
    )


def builtin_scenario(name: str, resolution: float | None = None) -> Scenario:
    """The four shipped scenarios; resolution defaults to 1/256."""
    h = resolution if resolution is not None else 1.0 / 256
    if name == "unit-disc":
        return _disc_family(
            name, (0.5, 0.9, 1.3, 1.7, 2.0, 2.2), 2.5, stages=6, synth=5, h=h
        )
    if name == "punctured-disc":
        return _disc_family(
            name,
            (0.5, 0.9, 1.3, 1.7, 2.0, 2.2),
            2.5,
            stages=6,
            synth=4,
            h=h,
            punctures=(0j,),
        )
    if name == "two-discs":
        radii = (0.55, 0.8, 1.05, 1.25)
        inner = tuple(
            (
                ShapeSpec("disk", (-0.35, 0.0, r)),
                ShapeSpec("disk", (0.35, 0.0, r)),
            )
            for r in radii
        )
        comp = tuple(
            (ShapeSpec("annulus", (0.0, 0.0, 1.8, 2.0 + 0.05 * k)),)
            for k in range(4)
        )
        half = int(math.ceil(2.8 / h))
        return Scenario(
            name=name,
            inner=inner,
            complement=comp,
            exceptional=(0.1 + 0.2j, -0.4 - 0.15j, 0.45 - 0.3j),
            frame=(-half, -half, half, half),
            resolution=h,
            stage_count=3,
            synth_stages=0,
            seed=0,
        )
    if name == "rationals-truncated":
        hh = resolution if resolution is not None else 1.0 / 128
        rationals = sorted(
            {Fraction(p, q) for q in range(1, 6) for p in range(0, q + 1)}
        )
        punctures = tuple(complex(float(x), 0.0) for x in rationals)
        radii = (1.6, 1.8, 2.0)
        inner = tuple((ShapeSpec("disk", (0.5, 0.0, r)),) for r in radii)
        half = int(math.ceil(2.9 / hh))
        return Scenario(
            name=name,
            inner=inner,
            complement=(),
            exceptional=punctures,
            frame=(-half, -half, half, half),
            resolution=hh,
            stage_count=3,
            synth_stages=3,
            seed=0,
        )
    raise ConfigError(f"unknown scenario {name!r}")


BUILTIN_NAMES = ("unit-disc", "punctured-disc", "two-discs", "rationals-truncated")


# -- config file format -----------------------------------------------------------


def _parse_number(tok: str) -> float:
    if "/" in tok:
        num, den = tok.split("/")
        return float(num) / float(den)
    return float(tok)


def parse_config(text: str) -> Scenario:
    """Plain-text key-value config with [scenario] and [domain] sections.

    Repeated `inner =` / `complement =` lines define the stage chains; shape
    values are `disk cx cy r`, `annulus cx cy r1 r2`, `rect x0 y0 x1 y1`,
    `polygon x1 y1 x2 y2 ...`.  `exceptional = x y` lines list punctures.
    A bare `builtin = <name>` line in [scenario] loads a shipped scenario and
    applies any overrides that follow it.
    """
    section = None
    fields: dict = {
        "name": None,
        "resolution": 1.0 / 256,
        "stages": None,
        "synth_stages": None,
        "seed": 0,
        "frame": None,
        "wedge_trials": 10000,
        "per_cut_trials": 400,
    }
    inner: list[tuple[ShapeSpec, ...]] = []
    comp: list[tuple[ShapeSpec, ...]] = []
    exceptional: list[complex] = []
    builtin = None
    for raw in text.split("\n"):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if section == "scenario":
            if key == "builtin":
                builtin = val
            elif key == "name":
                fields["name"] = val
            elif key == "resolution":
                fields["resolution"] = _parse_number(val)
            elif key == "stages":
                fields["stages"] = int(val)
            elif key == "synth_stages":
                fields["synth_stages"] = int(val)
            elif key == "seed":
                fields["seed"] = int(val)
            elif key == "wedge_trials":
                fields["wedge_trials"] = int(val)
            elif key == "per_cut_trials":
                fields["per_cut_trials"] = int(val)
            elif key == "frame":
                fields["frame"] = tuple(int(v) for v in val.split())
            else:
                raise ConfigError(f"unknown [scenario] key {key!r}")
        elif section == "domain":
            toks = val.split()
            if key in ("inner", "complement"):
                kind = toks[0].lower()
                params = tuple(_parse_number(t) for t in toks[1:])
                spec = ShapeSpec(kind, params)
                (inner if key == "inner" else comp).append((spec,))
            elif key == "exceptional":
                exceptional.append(complex(_parse_number(toks[0]), _parse_number(toks[1])))
            else:
                raise ConfigError(f"unknown [domain] key {key!r}")
        else:
            raise ConfigError(f"line outside a known section: {line!r}")
    if builtin is not None:
        base = builtin_scenario(builtin, fields["resolution"])
        overrides = {}
        if fields["stages"] is not None:
            overrides["stage_count"] = fields["stages"]
        if fields["synth_stages"] is not None:
            overrides["synth_stages"] = fields["synth_stages"]
        overrides["seed"] = fields["seed"]
        overrides["wedge_trials"] = fields["wedge_trials"]
        overrides["per_cut_trials"] = fields["per_cut_trials"]
        from dataclasses import replace

        return replace(base, **overrides)
    if fields["name"] is None:
        raise ConfigError("missing scenario name")
    if fields["stages"] is None:
        raise ConfigError("missing stage count")
    if not inner:
        raise ConfigError("need at least one inner compact")
    if fields["frame"] is None:
        raise ConfigError("missing frame")
    synth = fields["synth_stages"]
    return Scenario(
        name=fields["name"],
        inner=tuple(inner),
        complement=tuple(comp),
        exceptional=tuple(exceptional),
        frame=fields["frame"],
        resolution=fields["resolution"],
        stage_count=fields["stages"],
        synth_stages=fields["stages"] if synth is None else synth,
        seed=fields["seed"],
        wedge_trials=fields["wedge_trials"],
        per_cut_trials=fields["per_cut_trials"],
    )
