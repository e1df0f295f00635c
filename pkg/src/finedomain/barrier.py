"""Barrier systems between consecutive exhaustion stages.

The stage-n barrier is a compact union of circular arcs and short two-segment
polylines, placed in the complement components of K_n that meet the stage's
complement compact F_n.  It is built in four moves:

  1. cover the component's boundary interface by finitely many circles
     centered on it, radius below both d(K_n, F_n) and the nesting margin;
  2. extract the boundary arcs of the disk union that face into the component;
  3. cut each arc that separates two complement components: remove a small
     sub-arc near the arc midpoint, close the hole with a near-circle around
     the cut point (opening angle 2*pi/6 facing the kept side), and hang two
     clipped wedges from the cut point - the complement becomes connected
     while every long wedge that crossed the original arc still crosses the
     replacement;
  4. union the per-component systems and certify the stage properties:
     positive distance to K_n, containment in K_{n+1}, complement
     connectivity, complement witnesses in every bounded hole, and the
     Monte-Carlo wedge-interception property.

Connectivity certificates at grid scale use the "glued raster": pieces are
rasterized outside each cut disk, and the disk interior is treated as open
because the local window oracle (flood fill at a resolution tied to the cut
radius) certifies that the complement of the cut pieces is connected there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    GeometryDegenerate,
    NoCircleFound,
    SeparationFailure,
    WedgeNotFound,
)
from .exhaust import FSigmaDomain
from .grid import (
    _STRUCT4,
    CircularArc,
    ComponentLabeling,
    GridMask,
    Segment,
    Wedge,
    _cpx,
    _TWO_PI,
    arc_cover_cells,
    cells_covering_arc,
    complement_components,
    full_circle,
    mask_distance_lb,
    point_mask_distance,
    segment_mask,
    set_distance,
    wedges_hit_pieces,
)
from .potential import MaskComplementRegion, find_good_circle, find_wedge

# fractions of min(delta_n, margin) used for cover radii and cut radii; the
# cover must leave room between the arcs and the next compact's complement
# for the cut disks (see _cut_budget)
COVER_FRACTION = 0.5
CUT_FRACTION = 0.4


@dataclass(frozen=True)
class CircleCover:
    """Finitely many equal-radius circles covering one component interface."""

    circles: tuple[CircularArc, ...]
    host_component: int
    epsilon_bound: float  # delta_n
    radius: float

    def __post_init__(self):
        if any(c.radius >= self.epsilon_bound for c in self.circles):
            raise ValueError("cover radius must stay below delta_n")


@dataclass(frozen=True)
class ArcCutResult:
    original: CircularArc
    cut_point: complex
    cut_radius: float
    pieces: tuple
    connectivity_delta: int
    certificates: dict = field(repr=False)


@dataclass(frozen=True)
class BarrierStage:
    n: int
    delta_n: float
    margin: float
    covers: tuple[CircleCover, ...]
    pieces: tuple  # CircularArc | Segment
    cut_records: tuple[ArcCutResult, ...]
    raster: GridMask = field(repr=False)  # glued raster (pieces off cut disks)
    cut_disks: tuple[tuple[complex, float], ...]
    certificates: dict = field(repr=False)


# -- angular interval helpers ----------------------------------------------------


def _norm_angle(t: float) -> float:
    return t % _TWO_PI


def subtract_intervals_on_circle(base_intervals, removals):
    """Subtract angle intervals (mod 2pi) from base intervals (mod 2pi).

    All intervals are (start, end) with end > start; they may wrap.  Returns
    kept intervals, each with start in [0, 2pi) and end <= start + 2pi.
    """
    # split everything at 0/2pi into non-wrapping pieces over [0, 4pi)
    def split(iv):
        s, e = _norm_angle(iv[0]), iv[1] - iv[0]
        return (s, s + e)

    events = []
    for r in removals:
        s, e = split(r)
        if e - s >= _TWO_PI - 1e-15:
            return []
        events.append((s, e))
        events.append((s - _TWO_PI, e - _TWO_PI))
        events.append((s + _TWO_PI, e + _TWO_PI))
    kept = []
    for b in base_intervals:
        ivs = [split(b)]
        for rs, re_ in events:
            nxt = []
            for s, e in ivs:
                if re_ <= s or rs >= e:
                    nxt.append((s, e))
                    continue
                if rs > s:
                    nxt.append((s, rs))
                if re_ < e:
                    nxt.append((re_, e))
            ivs = nxt
        kept.extend(ivs)
    kept = [(s, e) for s, e in kept if e - s > 1e-9]
    # re-join pieces split at the 0/2pi seam
    kept.sort(key=lambda iv: _norm_angle(iv[0]))
    merged = []
    for s, e in kept:
        s0 = _norm_angle(s)
        iv = (s0, s0 + (e - s))
        if merged and abs(_norm_angle(merged[-1][1]) - iv[0]) < 1e-12 and (
            merged[-1][1] - merged[-1][0] + (iv[1] - iv[0]) <= _TWO_PI + 1e-12
        ):
            merged[-1] = (merged[-1][0], merged[-1][1] + (iv[1] - iv[0]))
        else:
            merged.append(iv)
    if (
        len(merged) > 1
        and abs(_norm_angle(merged[-1][1]) - merged[0][0]) < 1e-12
        and (merged[-1][1] - merged[-1][0]) + (merged[0][1] - merged[0][0]) <= _TWO_PI + 1e-12
    ):
        first = merged.pop(0)
        s, e = merged[-1]
        merged[-1] = (s, e + (first[1] - first[0]))
    return merged


def disk_union_boundary_arcs(circles) -> list[CircularArc]:
    """Arcs of each circle not interior to any other disk of the family.

    Isolated tangency points (zero-length leftovers) are discarded.
    """
    circles = list(circles)
    out = []
    for j, cj in enumerate(circles):
        removals = []
        swallowed = False
        for i, ci in enumerate(circles):
            if i == j:
                continue
            d = abs(ci.center - cj.center)
            if d >= ci.radius + cj.radius:
                continue
            if d + cj.radius <= ci.radius:
                swallowed = True
                break
            if d + ci.radius <= cj.radius:
                continue  # other disk inside this circle: no boundary effect
            cosphi = (d * d + cj.radius**2 - ci.radius**2) / (2 * d * cj.radius)
            cosphi = min(1.0, max(-1.0, cosphi))
            phi = math.acos(cosphi)
            psi = math.atan2((ci.center - cj.center).imag, (ci.center - cj.center).real)
            removals.append((psi - phi, psi + phi))
        if swallowed:
            continue
        if not removals:
            out.append(full_circle(cj.center, cj.radius))
            continue
        for s, e in subtract_intervals_on_circle([(0.0, _TWO_PI)], removals):
            out.append(CircularArc(cj.center, cj.radius, s, e))
    return out


def _arc_disk_interval(arc: CircularArc, a: complex, r: float):
    """Angle interval of the arc's circle lying inside the closed disk B(a, r)."""
    c, R = arc.center, arc.radius
    D = abs(a - c)
    if D < 1e-300:
        return None if r < R else (0.0, _TWO_PI)
    cosv = (R * R + D * D - r * r) / (2 * R * D)
    if cosv > 1.0:
        return None
    if cosv < -1.0:
        return (0.0, _TWO_PI)
    half = math.acos(cosv)
    psi = math.atan2((a - c).imag, (a - c).real)
    return (psi - half, psi + half)


def clip_arc_outside_disk(arc: CircularArc, a, r: float) -> list[CircularArc]:
    """Pieces of the arc outside the open disk B(a, r)."""
    iv = _arc_disk_interval(arc, _cpx(a), r)
    if iv is None:
        return [arc]
    kept = subtract_intervals_on_circle([(arc.theta_start, arc.theta_end)], [iv])
    return [CircularArc(arc.center, arc.radius, s, e) for s, e in kept]


# -- circle cover ------------------------------------------------------------------


def _labels_of_cells(labeling: ComponentLabeling, idx: np.ndarray) -> np.ndarray:
    i0, j0, i1, j1 = labeling.frame
    ii = idx[:, 0] - i0
    jj = idx[:, 1] - j0
    ok = (ii >= 0) & (jj >= 0) & (ii <= i1 - i0) & (jj <= j1 - j0)
    out = np.full(len(idx), -1, dtype=np.int64)
    out[ok] = labeling.label_grid[ii[ok], jj[ok]]
    out[out == 0] = -1
    return out


def _interface_samples(K: GridMask, labeling: ComponentLabeling, cid: int) -> np.ndarray:
    """Points on the shared boundary of K and component cid (edge midpoints
    and endpoints, spacing <= h/2)."""
    h = K.resolution
    ox, oy = K.origin
    idx = K.boundary_cells()
    pts = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = idx + np.array([di, dj])
        labs = _labels_of_cells(labeling, nb)
        sel = idx[labs == cid]
        if len(sel) == 0:
            continue
        x0 = ox + sel[:, 0] * h
        y0 = oy + sel[:, 1] * h
        if di == 1:
            e0, e1 = (x0 + h) + 1j * y0, (x0 + h) + 1j * (y0 + h)
        elif di == -1:
            e0, e1 = x0 + 1j * y0, x0 + 1j * (y0 + h)
        elif dj == 1:
            e0, e1 = x0 + 1j * (y0 + h), (x0 + h) + 1j * (y0 + h)
        else:
            e0, e1 = x0 + 1j * y0, (x0 + h) + 1j * y0
        pts.append(e0)
        pts.append(e1)
        pts.append((e0 + e1) / 2)
    if not pts:
        return np.zeros(0, dtype=complex)
    return np.unique(np.concatenate(pts))


def stage_separations(
    K_n: GridMask, K_next: GridMask, F_n: GridMask, frame, carve: GridMask | None = None
):
    """(delta_n, margin): certified lower bounds, exact near the gates.

    The puncture carves (one-cell stand-ins for polar points, shared by all
    stages) are excluded from the margin obstruction, as in the exhaustion's
    nesting margin.
    """
    h = K_n.resolution
    delta_n = mask_distance_lb(K_n, F_n, frame)
    if delta_n <= 2 * h:
        delta_n = set_distance(K_n, F_n)
    comp_next = _complement_mask(K_next, frame)
    if carve is not None and not carve.is_empty:
        comp_next = comp_next.difference(carve.dilate(2 * h, frame))
    margin = mask_distance_lb(K_n, comp_next, frame)
    if margin <= 4 * h:
        margin = set_distance(K_n, comp_next)
    return delta_n, margin


def build_circle_cover(
    K_n: GridMask,
    K_next: GridMask,
    F_n: GridMask | None,
    labeling: ComponentLabeling,
    frame,
    separations=None,
) -> list[CircleCover]:
    """One cover per complement component of K_n meeting F_n.

    Radii are COVER_FRACTION * min(delta_n, margin); greedy center selection
    walks the interface samples lexicographically, so covers are deterministic.
    Raises SeparationFailure when delta_n or the margin is below resolution.
    """
    h = K_n.resolution
    if F_n is None or F_n.is_empty:
        return []
    delta_n, margin = separations or stage_separations(K_n, K_next, F_n, frame)
    if delta_n <= 2 * h:
        raise SeparationFailure(f"delta_n = {delta_n:.6g} <= 2h")
    if margin <= 4 * h:
        raise SeparationFailure(f"stage margin {margin:.6g} <= 4h")
    eps = COVER_FRACTION * min(delta_n, margin)
    # components of the complement of K_n that meet F_n
    flabels = sorted(set(_labels_of_cells(labeling, F_n.cells).tolist()) - {-1})
    covers = []
    for cid in flabels:
        samples = _interface_samples(K_n, labeling, cid)
        if len(samples) == 0:
            continue
        centers = []
        covered = np.zeros(len(samples), dtype=bool)
        # spacing <= eps/2 keeps the union-boundary waists above 0.96 eps,
        # so the arcs never dip toward the compact
        mark_radius = eps / 2.0
        order = np.lexsort((samples.imag, samples.real))
        samples = samples[order]
        while not covered.all():
            k = int(np.argmin(covered))  # first uncovered in lex order
            z = samples[k]
            centers.append(z)
            covered |= np.abs(samples - z) <= mark_radius
        circles = tuple(full_circle(z, eps) for z in centers)
        covers.append(
            CircleCover(
                circles=circles, host_component=cid, epsilon_bound=delta_n, radius=eps
            )
        )
    return covers


def _complement_mask(K: GridMask, frame) -> GridMask:
    g = ~K.dense(frame)
    ii, jj = np.nonzero(g)
    return GridMask(K.resolution, np.stack([ii + frame[0], jj + frame[1]], axis=1), K.origin)


def extract_arcs(cover: CircleCover, labeling: ComponentLabeling) -> list[CircularArc]:
    """Boundary arcs of the cover's disk union lying in its host component."""
    arcs = disk_union_boundary_arcs(cover.circles)
    kept = []
    for arc in arcs:
        mid = arc.point_at((arc.theta_start + arc.theta_end) / 2)
        if labeling.label_of_point(mid) == cover.host_component:
            kept.append(arc)
    return kept


# -- arc cut ------------------------------------------------------------------------


def _normalization(arc: CircularArc, a: complex) -> complex:
    """Unit rotation rho with T(z) = rho * (z - a) / R mapping the arc's circle
    to the unit circle centered at -i and a to 0."""
    R = arc.radius
    return -1j * R / (arc.center - a)


def arc_cut(
    arc: CircularArc,
    a,
    r_j: float,
    region,
    n_wedge_trials: int = 400,
    oracle_resolution: float | None = None,
    seed: int = 0,
) -> ArcCutResult:
    """Replace a small neighbourhood of `a` on the arc by the pass-through gate.

    After normalizing (the arc's circle becomes C(-i, 1), a becomes 0) the
    removed part is the arc inside {|z| < r, Re z < 0}; the replacement is the
    near-circle {r e^(i t) : pi/6 <= t <= 11 pi/6} around the cut point plus
    two wedge legs found inside `region` and clipped to |Im| <= r/2.  The
    result keeps the arc pointwise outside cl B(a, r_j), leaves the window
    complement connected (flood-fill oracle), and still intercepts every
    sampled wedge with legs > 2 r_j that met the original arc.
    """
    a = _cpx(a)
    R = arc.radius
    if abs(abs(a - arc.center) - R) > 1e-9 * R:
        raise GeometryDegenerate("cut point not on the arc's circle")
    if not arc.is_full_circle:
        d_ends = min(
            abs(a - arc.point_at(arc.theta_start)), abs(a - arc.point_at(arc.theta_end))
        )
        if d_ends <= 2.0 * r_j:
            raise GeometryDegenerate(
                f"cut point {d_ends:.4g} from an arc endpoint, need > 2 r_j"
            )
    if not r_j < R:
        raise GeometryDegenerate("cut radius must stay below the arc radius")
    rho = _normalization(arc, a)
    rbar = r_j / R
    shift = math.atan2(rho.imag, rho.real)
    # removed: normalized angles (pi/2, pi/2 + u_max), i.e. {|z|<r, Re z<0}
    u_max = math.acos(1.0 - rbar * rbar / 2.0)
    removal = (math.pi / 2 - shift, math.pi / 2 + u_max - shift)
    kept = subtract_intervals_on_circle([(arc.theta_start, arc.theta_end)], [removal])
    arc_pieces = [CircularArc(arc.center, arc.radius, s, e) for s, e in kept]
    ring = CircularArc(
        a, r_j, _norm_angle(math.pi / 6 - shift), _norm_angle(math.pi / 6 - shift) + 5 * math.pi / 3
    )
    vert = 1j / rho  # physical direction of the normalized +i axis
    z_top = a + r_j * vert
    z_bot = a - r_j * vert
    w1 = find_wedge(z_top, a, region, alpha=math.sqrt(2.0))
    w2 = find_wedge(z_bot, a, region, alpha=math.sqrt(2.0))
    # the apex sits on the bisector, i.e. exactly on |Im T| = r/2: the clipped
    # wedges are the apex-to-a legs
    seg1 = Segment(w1.apex, a)
    seg2 = Segment(w2.apex, a)
    for s in (seg1, seg2):
        t_im = (rho * (s.p - a)).imag / R
        assert abs(t_im) <= rbar / 2 + 1e-12, "clip invariant violated"
    pieces = tuple(arc_pieces) + (ring, seg1, seg2)
    certificates = {
        "identity_outside_exact": _identity_outside_certificate(
            arc, arc_pieces, a, r_j, removal, u_max, shift
        ),
    }
    # local flood-fill oracle
    before, after = _local_connectivity_counts(
        arc, pieces, a, r_j, oracle_resolution
    )
    certificates["local_components_before"] = before
    certificates["local_components_after"] = after
    certificates["connectivity_ok"] = before == 2 and after == 1
    # wedge interception Monte Carlo (legs > 2 r_j, meeting the original arc)
    if n_wedge_trials > 0:
        hits = _wedge_interception_trials(
            arc, pieces, a, r_j, removal, n_wedge_trials, seed
        )
        certificates["wedge_trials"] = n_wedge_trials
        certificates["wedge_hits"] = hits
        certificates["interception_ok"] = hits == n_wedge_trials
    delta = 1 if certificates["connectivity_ok"] else 0
    return ArcCutResult(
        original=arc,
        cut_point=a,
        cut_radius=r_j,
        pieces=pieces,
        connectivity_delta=delta,
        certificates=certificates,
    )


def _identity_outside_certificate(arc, arc_pieces, a, r_j, removal, u_max, shift):
    """Exact interval check: pieces and original agree outside cl B(a, r_j)."""
    disk_iv = (math.pi / 2 - u_max - shift, math.pi / 2 + u_max - shift)
    outside_original = subtract_intervals_on_circle(
        [(arc.theta_start, arc.theta_end)], [disk_iv]
    )
    pieces_iv = [(p.theta_start, p.theta_end) for p in arc_pieces]
    outside_pieces = subtract_intervals_on_circle(pieces_iv, [disk_iv])

    def canon(ivs):
        return sorted((round(_norm_angle(s), 9), round(e - s, 9)) for s, e in ivs)

    return canon(outside_original) == canon(outside_pieces)


def _local_connectivity_counts(arc, pieces, a, r_j, oracle_resolution):
    """Flood-fill component counts of (window minus barrier), before and after."""
    if not arc.is_full_circle:
        d_ends = min(
            abs(a - arc.point_at(arc.theta_start)), abs(a - arc.point_at(arc.theta_end))
        )
    else:
        d_ends = math.inf
    r_D = min(2.0 * r_j, 0.95 * d_ends, 0.9 * arc.radius)
    h_loc = oracle_resolution if oracle_resolution is not None else r_j / 16.0
    h_loc = min(h_loc, r_D / 24.0)
    # window cells fully inside B(a, r_D), in a local origin at a
    origin = (a.real - r_D - 2 * h_loc, a.imag - r_D - 2 * h_loc)
    from .grid import disk_mask as _disk

    window = _disk(h_loc, a, r_D, predicate="inside", origin=origin)
    win_grid_frame = window.bbox
    frame = (
        win_grid_frame[0] - 2,
        win_grid_frame[1] - 2,
        win_grid_frame[2] + 2,
        win_grid_frame[3] + 2,
    )

    def count(piece_list):
        raster = GridMask(h_loc, [], origin)
        for p in piece_list:
            if isinstance(p, CircularArc):
                raster = raster.union(cells_covering_arc(p, h_loc, origin))
            else:
                raster = raster.union(segment_mask(h_loc, p.p, p.q, origin))
        free = window.difference(raster)
        g = free.dense(frame)
        _, nlab = ndimage.label(g, structure=_STRUCT4)
        return int(nlab)

    return count([arc]), count(list(pieces))


def _wedge_interception_trials(arc, pieces, a, r_j, removal, trials, seed):
    rng = np.random.default_rng(seed)
    rem_lo, rem_hi = removal
    wedges = []
    for k in range(trials):
        if k % 2 == 0 and rem_hi > rem_lo:
            t_ang = rng.uniform(rem_lo, rem_hi)  # bias into the removed part
        else:
            t_ang = rng.uniform(arc.theta_start, arc.theta_end)
        t = arc.point_at(t_ang)
        L = r_j * (2.0 + 3.0 * rng.uniform(0.01, 1.0))
        beta = rng.uniform(0.0, _TWO_PI)
        v = rng.uniform(0.3, 1.0)  # where t sits along the leg
        b = t + L * v * np.exp(1j * beta)
        q = b + L * (t - b) / abs(t - b)
        p = b + L * np.exp(1j * rng.uniform(0.0, _TWO_PI))
        wedges.append(Wedge(p, b, q))
    return int(wedges_hit_pieces(wedges, pieces).sum())


# -- stage assembly -------------------------------------------------------------------


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        while p != self.parent[p]:
            self.parent[p] = self.parent[self.parent[p]]
            p = self.parent[p]
        self.parent[x] = p
        return p

    def union(self, x, y):
        self.parent[self.find(x)] = self.find(y)


def _fine_labeling_with_arcs(K: GridMask, arcs, frame, factor: int = 4):
    """Complement labeling of K union the arc rasters, at refined resolution."""
    hf = K.resolution / factor
    up = np.repeat(np.repeat(K.dense(frame), factor, axis=0), factor, axis=1)
    chunks = [arc_cover_cells(arc, hf, K.origin) for arc in arcs]
    raster = GridMask(
        hf,
        np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 2), np.int64),
        K.origin,
    )
    ff = (
        frame[0] * factor,
        frame[1] * factor,
        frame[2] * factor + factor - 1,
        frame[3] * factor + factor - 1,
    )
    g = up | raster.dense(ff)
    lab, _ = ndimage.label(~g, structure=_STRUCT4)
    return lab, ff, hf


def assemble_barrier(
    K_n: GridMask,
    K_next: GridMask,
    F_n: GridMask | None,
    n: int,
    domain: FSigmaDomain,
    n_wedge_trials: int = 10000,
    per_cut_trials: int = 400,
    seed: int = 0,
) -> BarrierStage:
    """Build and certify the stage-n barrier between K_n and K_{n+1}."""
    h = K_n.resolution
    frame = domain.frame
    labeling = complement_components(K_n, frame)
    comp_next = _complement_mask(K_next, frame)
    if F_n is None or F_n.is_empty:
        margin = mask_distance_lb(K_n, comp_next, frame)
        empty_cert = {
            "delta_n": math.inf,
            "b_distance_positive": True,
            "c_contained": True,
            "d_connectivity": True,
            "e_witnesses": True,
            "f_trials": 0,
            "f_hits": 0,
            "f_ok": True,
            "vacuous": True,
        }
        return BarrierStage(
            n=n,
            delta_n=math.inf,
            margin=margin,
            covers=(),
            pieces=(),
            cut_records=(),
            raster=GridMask(h, [], K_n.origin),
            cut_disks=(),
            certificates=empty_cert,
        )
    delta_n, margin = stage_separations(
        K_n, K_next, F_n, frame, carve=domain.carve_mask()
    )
    covers = build_circle_cover(
        K_n, K_next, F_n, labeling, frame, separations=(delta_n, margin)
    )
    eps = covers[0].radius if covers else 0.0
    # pre-cut probe labeling at refined resolution; union-find tracks merges.
    # Fat covers leave probe clearance at half resolution; thin late-stage
    # covers need the quarter grid.
    all_arcs = []
    arcs_by_cover = []
    for cover in covers:
        arcs = extract_arcs(cover, labeling)
        arcs_by_cover.append(arcs)
        all_arcs.extend(arcs)
    eps0 = covers[0].radius if covers else 16 * h
    probe_factor = 2 if eps0 >= 20 * h else 4
    lab_grid, lab_frame, h2 = _fine_labeling_with_arcs(
        K_n, all_arcs, frame, factor=probe_factor
    )

    def probe_label(z):
        i = int(math.floor((z.real - K_n.origin[0]) / h2))
        j = int(math.floor((z.imag - K_n.origin[1]) / h2))
        if not (lab_frame[0] <= i <= lab_frame[2] and lab_frame[1] <= j <= lab_frame[3]):
            return 0
        return int(lab_grid[i - lab_frame[0], j - lab_frame[1]])

    uf = _UnionFind()
    pieces: list = []
    cut_records: list[ArcCutResult] = []
    cut_disks: list[tuple[complex, float]] = []
    FK = F_n.union(K_n)
    empty = GridMask(h, [], K_n.origin)
    # conservative point-to-set distance fields (grid lookups, guarded by
    # a cell diagonal); exact refinement only where the gate is close
    guard = h * math.sqrt(2.0)
    edt_FK = ndimage.distance_transform_edt(~FK.dense(frame)) * h
    edt_next = ndimage.distance_transform_edt(K_next.dense(frame)) * h

    def dist_lb(edt, z):
        i = int(math.floor((z.real - K_n.origin[0]) / h)) - frame[0]
        j = int(math.floor((z.imag - K_n.origin[1]) / h)) - frame[1]
        if not (0 <= i < edt.shape[0] and 0 <= j < edt.shape[1]):
            return 0.0
        return max(float(edt[i, j]) - guard, 0.0)

    # cut radii below the working cell are sound: the glued certification
    # raster runs at h/4 and needs r_j >= sqrt(2) * h/4
    h_cert = h / 4.0
    r_floor = math.sqrt(2.0) * h_cert
    gate = 2.05 * r_floor
    for arcs in arcs_by_cover:
        for arc in sorted(
            arcs, key=lambda u: (u.center.real, u.center.imag, u.theta_start)
        ):
            a = arc.point_at((arc.theta_start + arc.theta_end) / 2)
            rho = _normalization(arc, a)
            vert = 1j / rho
            d_FK = dist_lb(edt_FK, a)
            d_next = dist_lb(edt_next, a)
            budget = _cut_budget(arc, a, n, d_FK, d_next)
            if budget <= gate:
                # exact distances before giving up (the EDT guard is coarse)
                d_FK = point_mask_distance(a, FK)
                d_next = point_mask_distance(a, comp_next)
                budget = _cut_budget(arc, a, n, d_FK, d_next)
            labels = None
            if budget > gate:
                r_probe = min(budget, 0.9 * arc.radius)
                for frac in (0.6, 0.45, 0.8):
                    l1 = probe_label(a + frac * r_probe * vert)
                    l2 = probe_label(a - frac * r_probe * vert)
                    if l1 > 0 and l2 > 0:
                        labels = (l1, l2)
                        break
            if labels is None or uf.find(labels[0]) == uf.find(labels[1]):
                pieces.append(arc)  # not separating: keep unchanged
                continue
            try:
                # ladder placed so the window's top touches the budget; the
                # obstruction within the budget ball is provably empty since
                # budget <= clearance/2
                C_lad = 1.02 / budget
                t = find_good_circle(
                    MaskComplementRegion(empty, anchor=a, radius=budget * (1 + 1e-9)),
                    a,
                    C=C_lad,
                    n=1,
                )
                if t < r_floor:
                    pieces.append(arc)
                    continue
                region = MaskComplementRegion(empty, anchor=a, radius=2.5 * t)
                rec = arc_cut(
                    arc, a, t, region, n_wedge_trials=per_cut_trials, seed=seed
                )
            except (NoCircleFound, WedgeNotFound, GeometryDegenerate):
                pieces.append(arc)
                continue
            pieces.extend(rec.pieces)
            cut_records.append(rec)
            cut_disks.append((a, t))
            uf.union(labels[0], labels[1])
    # glued raster: pieces clipped outside every cut disk (omission zones are
    # inflated by the raster diagonal so the certified passages stay open)
    raster = _glued_raster(pieces, cut_disks, h, K_n.origin)
    certificates = _certify_stage(
        K_n,
        K_next,
        F_n,
        n,
        domain,
        labeling,
        pieces,
        raster,
        cut_disks,
        delta_n,
        margin,
        n_wedge_trials,
        seed,
    )
    certificates["delta_n"] = delta_n
    certificates["cuts"] = len(cut_records)
    certificates["per_cut_trials"] = per_cut_trials
    return BarrierStage(
        n=n,
        delta_n=delta_n,
        margin=margin,
        covers=tuple(covers),
        pieces=tuple(pieces),
        cut_records=tuple(cut_records),
        raster=raster,
        cut_disks=tuple(cut_disks),
        certificates=certificates,
    )


def _cut_budget(arc, a, n, d_data: float, d_next: float) -> float:
    """Upper bound for the cut radius: half the min of the stage budget
    1/(2n), the clearances to K_n ∪ F_n, the next-stage complement, and the
    arc endpoints; additionally capped by a fraction of the cover radius."""
    terms = [1.0 / (2.0 * n), d_data, d_next]
    if not arc.is_full_circle:
        terms.append(
            min(
                abs(a - arc.point_at(arc.theta_start)),
                abs(a - arc.point_at(arc.theta_end)),
            )
        )
    return min(min(terms) / 2.0, CUT_FRACTION * arc.radius)


def _glued_raster(pieces, cut_disks, h_cert, origin) -> GridMask:
    """Supercover of the pieces outside every (inflated) cut disk.

    The omission radius is r_j + sqrt(2) * h_cert: the protruding raster cells
    of the clipped pieces then leave an opening of diameter >= 2 r_j through
    each cut disk, which the local window oracle certified to be passable.
    """
    pad = math.sqrt(2.0) * h_cert
    chunks = []
    for p in pieces:
        if not isinstance(p, CircularArc):
            continue  # wedge legs live inside their cut disk
        clipped = [p]
        for (ca, cr) in cut_disks:
            nxt = []
            for q in clipped:
                nxt.extend(clip_arc_outside_disk(q, ca, cr + pad))
            clipped = nxt
        for q in clipped:
            chunks.append(arc_cover_cells(q, h_cert, origin))
    if not chunks:
        return GridMask(h_cert, [], origin)
    return GridMask(h_cert, np.concatenate(chunks, axis=0), origin)


def _piece_samples(piece, spacing):
    if isinstance(piece, CircularArc):
        n = max(8, int(piece.radius * (piece.theta_end - piece.theta_start) / spacing) + 1)
        return piece.sample(n), piece.radius * (piece.theta_end - piece.theta_start) / (n - 1)
    n = max(2, int(abs(piece.q - piece.p) / spacing) + 1)

    ts = np.linspace(0.0, 1.0, n)
    return piece.p + ts * (piece.q - piece.p), abs(piece.q - piece.p) / (n - 1)


def _certify_stage(
    K_n,
    K_next,
    F_n,
    n,
    domain,
    labeling,
    pieces,
    raster,
    cut_disks,
    delta_n,
    margin,
    n_wedge_trials,
    seed,
):
    h = K_n.resolution
    frame = domain.frame
    cert = {}
    # (b) positive distance to K_n, via EDT with a conservative guard
    gK = K_n.dense(frame)
    edtK = ndimage.distance_transform_edt(~gK) * h
    gN = K_next.dense(frame)
    edtN = ndimage.distance_transform_edt(gN) * h  # distance to complement of K_next

    def grid_val(edt, z):
        i = int(math.floor((z.real - K_n.origin[0]) / h)) - frame[0]
        j = int(math.floor((z.imag - K_n.origin[1]) / h)) - frame[1]
        i = min(max(i, 0), edt.shape[0] - 1)
        j = min(max(j, 0), edt.shape[1] - 1)
        return float(edt[i, j])

    guard = h * math.sqrt(2.0)
    min_b = math.inf
    min_c = math.inf
    for p in pieces:
        pts, gap = _piece_samples(p, h / 2)
        for z in pts:
            min_b = min(min_b, grid_val(edtK, z) - guard - gap / 2)
            min_c = min(min_c, grid_val(edtN, z) - guard - gap / 2)
    cert["b_min_distance"] = min_b if pieces else math.inf
    cert["b_distance_positive"] = (not pieces) or min_b > 0
    if pieces and min_b <= 0:
        # conservative bound failed: fall back to the exact predicate
        exact = min(
            point_mask_distance(z, K_n)
            for p in pieces
            for z in _piece_samples(p, h / 4)[0]
        )
        cert["b_min_distance"] = exact
        cert["b_distance_positive"] = exact > 0
    cert["c_contained"] = (not pieces) or min_c > 0
    # (d)/(e) on the glued certification raster; the refinement factor adapts
    # to the smallest cut radius (soundness needs h_cert <= r_j / sqrt(2))
    factor = 2
    if cut_disks:
        min_rj = min(r for _, r in cut_disks)
        while factor < 4 and (h / factor) * math.sqrt(2.0) > min_rj:
            factor *= 2
    h2 = h / factor
    raster2 = _glued_raster(pieces, cut_disks, h2, K_n.origin)
    frame2 = (
        frame[0] * factor,
        frame[1] * factor,
        frame[2] * factor + factor - 1,
        frame[3] * factor + factor - 1,
    )
    gK2 = np.repeat(np.repeat(K_n.dense(frame), factor, axis=0), factor, axis=1)
    gB2 = gK2 | raster2.dense(frame2)
    labB, _ = ndimage.label(~gB2, structure=_STRUCT4)
    # (d), exhaustively: within each complement component of K_n, every free
    # refined cell carries the same glued label.  One erosion step strips the
    # sub-resolution slivers pinched between the rasterized curves.  The
    # all-equal-per-group test runs through bincount moments (no sorting).
    lab_coarse = labeling.label_grid  # K-complement ids at resolution h
    big = np.repeat(np.repeat(lab_coarse, factor, axis=0), factor, axis=1)
    eroded = ndimage.binary_erosion(~gB2, structure=_STRUCT4)
    free = eroded & (big > 0)
    ok_d = True
    if free.any():
        grp = big[free].astype(np.int64)
        val = labB[free].astype(np.float64)
        counts = np.bincount(grp).astype(np.float64)
        sums = np.bincount(grp, weights=val)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = sums / counts
        # exact: label counts and sums are integers below 2^53, and for an
        # all-equal group the mean divides out exactly
        ok_d = bool((val == mean[grp]).all())
    cert["d_connectivity"] = ok_d
    # (e) every bounded component of the glued complement holds a witness;
    # components that vanish under one erosion are raster slivers, recorded
    # but not required to hold one
    rim = np.zeros_like(labB, dtype=bool)
    rim[0, :] = rim[-1, :] = True
    rim[:, 0] = rim[:, -1] = True
    unbounded = set(np.bincount(labB[rim].ravel()).nonzero()[0].tolist()) - {0}
    present = set(np.bincount(labB.ravel()).nonzero()[0].tolist()) - {0}
    eroded_ids = set(np.bincount(labB[eroded].ravel()).nonzero()[0].tolist()) - {0}
    ok_e = True
    slivers = 0
    for cid in sorted(present - unbounded):
        if cid not in eroded_ids:
            slivers += 1
            continue
        region = labB == cid
        ii, jj = np.nonzero(region)
        cells_h = np.unique(
            np.stack(
                [(ii + frame2[0]) // factor, (jj + frame2[1]) // factor], axis=1
            ),
            axis=0,
        )
        comp = GridMask(h, cells_h, K_n.origin)
        if domain.complement_witness_in(comp) is None:
            ok_e = False
    cert["e_witnesses"] = ok_e
    cert["e_slivers_skipped"] = slivers
    cert["certification_factor"] = factor
    # (f) Monte-Carlo wedge interception at stage scale
    hits = 0
    trials = 0
    if pieces and F_n is not None and not F_n.is_empty:
        wedges = sample_stage_wedges(F_n, K_n, n, n_wedge_trials, seed + 2)
        trials = len(wedges)
        hits = int(wedges_hit_pieces(wedges, pieces).sum())
        cert["f_ok"] = hits == trials
    else:
        cert["f_ok"] = True
    cert["f_trials"] = trials
    cert["f_hits"] = hits
    cert["vacuous"] = not pieces
    return cert


def sample_stage_wedges(F_n: GridMask, K_n: GridMask, n: int, trials: int, seed: int):
    """Random wedges of total length >= 1/n with one endpoint cell in F_n and
    one in K_n (the stage interception hypothesis)."""
    rngf = np.random.default_rng(seed)
    fc = F_n.cell_centers()
    kc = K_n.cell_centers()
    wedges = []
    for _ in range(trials):
        z = fc[rngf.integers(0, len(fc))]
        wpt = kc[rngf.integers(0, len(kc))]
        d = abs(z - wpt)
        need = max(1.0 / n, d)
        s_min = 0.0
        if need > d:
            s_min = math.sqrt((need / 2) ** 2 - (d / 2) ** 2)
        s = s_min + rngf.uniform(0.0, d / 2)
        normal = 1j * (z - wpt) / d
        apex = (z + wpt) / 2 + s * normal
        wedges.append(Wedge(z, apex, wpt))
    return wedges
