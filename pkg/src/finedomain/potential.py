"""Subharmonic generators, finely open patches, good circles, wedges, capacity.

The generator class is the finite log-atom family

    h(z) = sum_i w_i * log|z - q_i| + c,   w_i >= 0,

which is subharmonic off its atoms and -inf at atoms of positive weight.
A patch V = {z in B(a, r) : h(z) > 0} plays the role of a basic finely open
neighbourhood of its center.  Two search routines operate on such regions (or
on complements of grid masks):

  * find_good_circle: a radius t in a prescribed window [C^-n-1, C^-n] whose
    full circle avoids the obstruction set, certified by dense angular
    sampling plus a Lipschitz bound on each sample gap;
  * find_wedge: a two-segment equal-leg path between two points, apex searched
    on the perpendicular bisector within a total-length budget alpha*|a-b|.

The admissibility threshold for circle windows is C0 = max(e^Gamma, 1/r),
where Gamma bounds the integral of ds/s over the radii occupied by the
obstruction (computed here with a 10% safety margin on top of the measured
occupancy integral).

The capacity solver estimates the logarithmic capacity of a mask by
minimizing the discrete energy of a probability vector on boundary-sampled
support points (multiplicative simplex updates); the kernel diagonal is the
exact self-energy 3/2 - log(d) of a uniform arclet at the local spacing d,
without which the m-point estimator carries an O(log m / m) bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSet, EmptyMask, NoCircleFound, WedgeNotFound
from .grid import (
    GridMask,
    Segment,
    Wedge,
    _cpx,
    point_mask_distance,
    points_segment_distance,
    segment_box_distance,
)

_TWO_PI = 2.0 * math.pi

# capacity of the unit square (Gamma(1/4)^2 / (4 pi^(3/2))), used for the
# degenerate single-cell report
_UNIT_SQUARE_CAPACITY = 0.5901702995080481


@dataclass(frozen=True)
class SubharmonicGenerator:
    """h(z) = sum w_i log|z - q_i| + c with nonnegative weights."""

    atoms: tuple[tuple[complex, float], ...]
    constant: float = 0.0

    def __post_init__(self):
        atoms = tuple((_cpx(q), float(w)) for q, w in self.atoms)
        if any(w < 0 for _, w in atoms):
            raise ValueError("atom weights must be nonnegative")
        object.__setattr__(self, "atoms", atoms)

    def __call__(self, z):
        return eval_generator(self, z)

    def gradient_bound_on_circle(self, center, radius: float) -> float:
        """Upper bound for |grad h| on C(center, radius), exact pole distances."""
        c = _cpx(center)
        L = 0.0
        for q, w in self.atoms:
            if w == 0.0:
                continue
            d = abs(abs(q - c) - radius)
            if d <= 0.0:
                return math.inf
            L += w / d
        return L

    def gradient_bound_on_segment(self, p, q) -> float:
        L = 0.0
        for atom, w in self.atoms:
            if w == 0.0:
                continue
            d = points_segment_distance(np.array([atom]), p, q)[0]
            if d <= 0.0:
                return math.inf
            L += w / d
        return L

    def to_text(self) -> str:
        lines = [f"atoms {len(self.atoms)}"]
        for q, w in self.atoms:
            lines.append(f"{q.real!r} {q.imag!r} {w!r}")
        lines.append(f"constant {self.constant!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "SubharmonicGenerator":
        lines = [ln for ln in text.strip().split("\n") if ln]
        n = int(lines[0].split()[1])
        atoms = []
        for ln in lines[1 : 1 + n]:
            x, y, w = (float(v) for v in ln.split())
            atoms.append((complex(x, y), w))
        const = float(lines[1 + n].split()[1])
        return SubharmonicGenerator(tuple(atoms), const)


def constant_generator(value: float = 1.0) -> SubharmonicGenerator:
    return SubharmonicGenerator((), value)


def eval_generator(h: SubharmonicGenerator, z):
    """Exact generator value; -inf at an atom of positive weight.

    Accepts scalars or complex arrays.
    """
    if isinstance(z, np.ndarray):
        out = np.full(z.shape, h.constant, dtype=float)
        for q, w in h.atoms:
            if w == 0.0:
                continue
            d = np.abs(z - q)
            with np.errstate(divide="ignore"):
                out += w * np.log(d)
        return out
    z = _cpx(z)
    val = h.constant
    for q, w in h.atoms:
        if w == 0.0:
            continue
        d = abs(z - q)
        if d == 0.0:
            return -math.inf
        val += w * math.log(d)
    return val


@dataclass(frozen=True)
class FinelyOpenPatch:
    """V = {z in B(center, radius) : h(z) > 0}; center must satisfy h > 0."""

    center: complex
    radius: float
    generator: SubharmonicGenerator
    normalization: float = field(default=None)  # h(center), recorded

    def __post_init__(self):
        object.__setattr__(self, "center", _cpx(self.center))
        if not self.radius > 0:
            raise ValueError("patch radius must be positive")
        hc = eval_generator(self.generator, self.center)
        if self.normalization is None:
            object.__setattr__(self, "normalization", hc)
        if not hc > 0:
            raise ValueError("patch center must satisfy h(center) > 0")

    def contains(self, z) -> bool:
        z = _cpx(z)
        return abs(z - self.center) < self.radius and eval_generator(self.generator, z) > 0

    def to_text(self) -> str:
        return (
            self.generator.to_text()
            + f"center {self.center.real!r} {self.center.imag!r}\n"
            + f"radius {self.radius!r}\n"
        )

    @staticmethod
    def from_text(text: str) -> "FinelyOpenPatch":
        lines = text.strip().split("\n")
        gen_lines = lines[:-2]
        gen = SubharmonicGenerator.from_text("\n".join(gen_lines))
        cx, cy = (float(v) for v in lines[-2].split()[1:])
        r = float(lines[-1].split()[1])
        return FinelyOpenPatch(complex(cx, cy), r, gen)


@dataclass(frozen=True)
class MaskComplementRegion:
    """The finely open region (complement of a mask), optionally radius-capped.

    Represents {z : |z - anchor| < radius} minus the obstruction mask when a
    radius is given, or the full mask complement otherwise.  Membership and
    segment/circle certification against the mask are exact.
    """

    obstruction: GridMask
    anchor: complex = 0j
    radius: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "anchor", _cpx(self.anchor))

    def contains(self, z) -> bool:
        z = _cpx(z)
        if abs(z - self.anchor) >= self.radius:
            return False
        if self.obstruction.is_empty:
            return True
        return not self.obstruction.covers_point(z)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure with finite support."""

    support: tuple[complex, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if (w < -1e-12).any():
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


# -- radial occupancy ----------------------------------------------------------


def _merge_intervals(ivs):
    ivs = sorted((lo, hi) for lo, hi in ivs if hi > lo)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def radial_intervals(F: GridMask, a) -> list[tuple[float, float]]:
    """Merged intervals of radii about `a` occupied by cells of F."""
    if F.is_empty:
        return []
    a = _cpx(a)
    lo, hi = F.cell_corners()
    dx_min = np.maximum(np.maximum(lo.real - a.real, a.real - hi.real), 0.0)
    dy_min = np.maximum(np.maximum(lo.imag - a.imag, a.imag - hi.imag), 0.0)
    rmin = np.hypot(dx_min, dy_min)
    fx = np.maximum(np.abs(lo.real - a.real), np.abs(hi.real - a.real))
    fy = np.maximum(np.abs(lo.imag - a.imag), np.abs(hi.imag - a.imag))
    rmax = np.hypot(fx, fy)
    return _merge_intervals(zip(rmin.tolist(), rmax.tolist()))


def radial_occupancy_integral(F: GridMask, a, r: float) -> float:
    """integral of ds/s over {s in (0, r) : the circle of radius s about a meets F}.

    Interval arithmetic over per-cell radius ranges.  Returns math.inf when the
    occupied radii reach all the way down to 0 (the integral diverges there).
    """
    if not r > 0:
        raise ValueError("r must be positive")
    total = 0.0
    for lo, hi in radial_intervals(F, a):
        lo = max(lo, 0.0)
        hi = min(hi, r)
        if hi <= lo:
            continue
        if lo <= 1e-12:
            return math.inf
        total += math.log(hi / lo)
    return total


def _patch_occupied_intervals(patch: FinelyOpenPatch, n_radii=2048, n_angles=1024):
    """Conservative occupied-radius intervals for the patch complement.

    A radius is marked occupied when the sampled minimum of h over the circle,
    deflated by the Lipschitz bound over a sample gap, fails to stay positive.
    """
    a, r = patch.center, patch.radius
    radii = np.geomspace(r * 1e-5, r * (1 - 1e-9), n_radii)
    th = np.linspace(0.0, _TWO_PI, n_angles, endpoint=False)
    ring = np.exp(1j * th)
    occupied = []
    log_step = math.log(radii[1] / radii[0])
    pad = math.exp(log_step / 2)
    for s in radii:
        vals = eval_generator(patch.generator, a + s * ring)
        L = patch.generator.gradient_bound_on_circle(a, s)
        gap = s * _TWO_PI / n_angles
        if not np.all(vals - L * gap / 2 > 0):
            occupied.append((s / pad, s * pad))
    return _merge_intervals(occupied)


def region_occupied_intervals(region, a) -> list[tuple[float, float]]:
    """Occupied radial intervals about `a` for a patch or mask complement."""
    if isinstance(region, FinelyOpenPatch):
        return _patch_occupied_intervals(region)
    if isinstance(region, MaskComplementRegion):
        return radial_intervals(region.obstruction, a)
    raise TypeError(f"unsupported region {type(region)!r}")


def admissible_circle_constant(region, a) -> float:
    """C0 = max(e^Gamma, 1/r): windows [C^-n-1, C^-n] with C > C0 cannot be
    fully occupied.  Gamma is the measured occupancy integral plus 10%."""
    a = _cpx(a)
    if isinstance(region, FinelyOpenPatch):
        r = region.radius
        ivs = _patch_occupied_intervals(region)
    elif isinstance(region, MaskComplementRegion):
        r = region.radius if math.isfinite(region.radius) else 1.0
        ivs = radial_intervals(region.obstruction, a)
    else:
        raise TypeError(f"unsupported region {type(region)!r}")
    gamma = 0.0
    for lo, hi in ivs:
        hi = min(hi, r)
        if hi <= lo:
            continue
        if lo <= 1e-12:
            gamma = math.inf
            break
        gamma += math.log(hi / lo)
    if math.isinf(gamma):
        return math.inf
    return max(math.exp(gamma * 1.1), 1.0 / r)


def certify_circle(region, a, t: float, samples: int = 4096) -> bool:
    """Does C(a, t) lie inside the region?  Exact for mask complements,
    sampled + Lipschitz-inflated for patches."""
    a = _cpx(a)
    if isinstance(region, MaskComplementRegion):
        if abs(a - region.anchor) + t >= region.radius:
            return False
        for lo, hi in radial_intervals(region.obstruction, a):
            if lo <= t <= hi:
                return False
        return True
    if isinstance(region, FinelyOpenPatch):
        if abs(a - region.center) + t >= region.radius:
            return False
        th = np.linspace(0.0, _TWO_PI, samples, endpoint=False)
        vals = eval_generator(region.generator, a + t * np.exp(1j * th))
        L = region.generator.gradient_bound_on_circle(a, t)
        gap = t * _TWO_PI / samples
        return bool(np.all(vals - L * gap / 2 > 0))
    raise TypeError(f"unsupported region {type(region)!r}")


def find_good_circle(region, a, C: float, n: int, samples: int = 4096) -> float:
    """Radius t in [C^-n-1, C^-n] with the full circle C(a, t) inside `region`.

    Candidates are midpoints of the obstruction-free subintervals of the
    window (longest first, then golden subdivisions); each candidate is
    certified before being returned.  Raises NoCircleFound when C is below
    the admissibility threshold or no candidate certifies.
    """
    a = _cpx(a)
    if not C > 1:
        raise ValueError("need C > 1")
    c0 = admissible_circle_constant(region, a)
    if not C > c0:
        raise NoCircleFound(f"C={C} below threshold C0={c0:.6g}")
    lo_w, hi_w = C ** (-n - 1), C ** (-n)
    if isinstance(region, FinelyOpenPatch):
        rmax = region.radius
    else:
        rmax = region.radius if math.isfinite(region.radius) else math.inf
    hi_w = min(hi_w, rmax * (1 - 1e-9))
    if hi_w <= lo_w:
        raise NoCircleFound("window collapses under the region radius")
    occupied = region_occupied_intervals(region, a)
    free = [(lo_w, hi_w)]
    for olo, ohi in occupied:
        nxt = []
        for flo, fhi in free:
            if ohi <= flo or olo >= fhi:
                nxt.append((flo, fhi))
                continue
            if olo > flo:
                nxt.append((flo, olo))
            if ohi < fhi:
                nxt.append((ohi, fhi))
        free = nxt
    free.sort(key=lambda iv: iv[1] - iv[0], reverse=True)
    candidates = []
    for flo, fhi in free:
        mid = (flo + fhi) / 2
        candidates.append(mid)
        candidates.append(flo + (fhi - flo) * 0.381966)
        candidates.append(flo + (fhi - flo) * 0.618034)
    for t in candidates[:32]:
        if certify_circle(region, a, t, samples):
            return float(t)
    raise NoCircleFound(
        f"no certified circle in [{lo_w:.6g}, {hi_w:.6g}] at this resolution"
    )


# -- wedges ---------------------------------------------------------------------


def _segment_inside_region(p, q, region, samples: int = 1024) -> bool:
    if region is None:
        return True
    p, q = _cpx(p), _cpx(q)
    if isinstance(region, MaskComplementRegion):
        for z in (p, q):
            if abs(z - region.anchor) >= region.radius:
                return False
        M = region.obstruction
        if M.is_empty:
            return True
        centers = M.cell_centers()
        halfdiag = M.resolution * math.sqrt(2) / 2
        d = points_segment_distance(centers, p, q)
        cand = np.nonzero(d <= halfdiag + 1e-12)[0]
        if len(cand) == 0:
            return True
        lo, hi = M.cell_corners(M.cells[cand])
        return all(
            segment_box_distance(p, q, lo[k], hi[k]) > 1e-12 for k in range(len(cand))
        )
    if isinstance(region, FinelyOpenPatch):
        c, r = region.center, region.radius
        if abs(p - c) >= r or abs(q - c) >= r:
            return False
        ts = np.linspace(0.0, 1.0, samples)
        pts = p + ts * (q - p)
        vals = eval_generator(region.generator, pts)
        L = region.generator.gradient_bound_on_segment(p, q)
        gap = abs(q - p) / (samples - 1)
        return bool(np.all(vals - L * gap / 2 > 0))
    raise TypeError(f"unsupported region {type(region)!r}")


def find_wedge(a, b, region, alpha: float = math.sqrt(2.0), ladder: int = 256) -> Wedge:
    """Equal-leg wedge from a to b inside `region`, total length < alpha|a-b|.

    The apex is searched on the perpendicular bisector of [a, b], starting at
    the midpoint (degenerate wedge) and stepping outward alternately to both
    sides.  `region=None` means the whole plane.  Raises WedgeNotFound when
    the ladder is exhausted (a resolution failure, not a disproof).
    """
    a, b = _cpx(a), _cpx(b)
    if a == b:
        raise ValueError("wedge endpoints must differ")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if region is not None:
        for z, name in ((a, "a"), (b, "b")):
            ok = region.contains(z)
            if not ok:
                raise ValueError(f"wedge endpoint {name} not in the region")
    mid = (a + b) / 2
    d = abs(b - a)
    normal = 1j * (b - a) / d
    s_max = (d / 2) * math.sqrt(alpha * alpha - 1.0) * 0.999
    offsets = [0.0]
    for k in range(1, ladder):
        s = s_max * k / ladder
        offsets.extend((s, -s))
    for s in offsets:
        apex = mid + s * normal
        if _segment_inside_region(a, apex, region) and _segment_inside_region(
            apex, b, region
        ):
            w = Wedge(a, apex, b)
            if w.total_length < alpha * d:
                return w
    raise WedgeNotFound(
        f"no wedge of length < {alpha}|a-b| certified at ladder {ladder}"
    )


# -- equilibrium measure / capacity ---------------------------------------------


def _support_points(K: GridMask, m: int, seed: int) -> np.ndarray:
    """m boundary points, spread by angular order about the centroid.

    Deterministic given the seed: the seed only breaks ties when the boundary
    has fewer cells than m or the stride selection needs a start offset.
    """
    bcells = K.boundary_cells()
    pts = K.cell_centers(bcells)
    if len(pts) == 0:
        pts = K.cell_centers()
    centroid = pts.mean()
    order = np.lexsort((np.abs(pts - centroid), np.angle(pts - centroid)))
    pts = pts[order]
    if len(pts) <= m:
        return pts
    rng = np.random.default_rng(seed)
    start = int(rng.integers(0, len(pts)))
    sel = (start + np.round(np.arange(m) * len(pts) / m).astype(int)) % len(pts)
    return pts[np.sort(np.unique(sel))]


def equilibrium_measure(
    K: GridMask, m: int, seed: int = 0, iters: int = 10000, tol: float = 1e-10
):
    """Minimize the discrete logarithmic energy over weights on m support points.

    Returns (DiscreteMeasure, capacity) with capacity = exp(-E_min).  The
    kernel diagonal is regularized by the local arclet self-energy
    3/2 - log(d_i); descent is multiplicative (exponentiated gradient) with
    lexicographic support order fixed up front so runs are reproducible.
    """
    if K.is_empty:
        raise EmptyMask("equilibrium_measure of empty mask")
    if m < 1:
        raise ValueError("support size must be >= 1")
    if len(K) == 1:
        cap = _UNIT_SQUARE_CAPACITY * K.resolution
        raise DegenerateSet(
            f"single-cell mask: capacity at cell scale ~ {cap:.6g}",
            cell_scale_capacity=cap,
        )
    pts = _support_points(K, m, seed)
    mm = len(pts)
    if mm < 2:
        cap = _UNIT_SQUARE_CAPACITY * K.resolution
        raise DegenerateSet("support degenerated to one point", cell_scale_capacity=cap)
    D = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(D, np.inf)
    dloc = D.min(axis=1)
    # a support point stands for an arclet no longer than its share of the
    # boundary; a far-away nearest neighbour must not inflate the arclet
    n_src = max(len(K.boundary_cells()), 1)
    budget = n_src * K.resolution / mm
    dloc = np.minimum(dloc, budget)
    A = -np.log(np.where(np.isinf(D), 1.0, D))
    np.fill_diagonal(A, 1.5 - np.log(dloc))
    lam = np.full(mm, 1.0 / mm)
    energy = float(lam @ A @ lam)
    for _ in range(iters):
        g = 2.0 * (A @ lam)
        eta = 0.5 / max(float(np.abs(g).max()), 1e-300)
        lam = lam * np.exp(-eta * (g - float(g @ lam)))
        lam /= lam.sum()
        e2 = float(lam @ A @ lam)
        if abs(energy - e2) < tol:
            energy = e2
            break
        energy = e2
    capacity = math.exp(-energy)
    measure = DiscreteMeasure(tuple(pts.tolist()), tuple(lam.tolist()))
    return measure, capacity


def is_polar_at_resolution(K: GridMask, capacity: float) -> bool:
    """Flag: the mask is point-like at this resolution.

    True when every 8-connected component is a single cell (the grid image of
    a finite point set, whose capacity vanishes as h -> 0) or when the solved
    capacity has already dropped to the cell scale.
    """
    if capacity <= 2.0 * K.resolution:
        return True
    from scipy import ndimage as _ndi

    i0, j0, i1, j1 = K.bbox
    g = K.dense((i0, j0, i1, j1))
    lab, nlab = _ndi.label(g, structure=np.ones((3, 3), dtype=bool))
    if nlab == 0:
        return True
    counts = np.bincount(lab.ravel())[1:]
    return bool((counts == 1).all())
