"""Planar set geometry on grid masks.

A compact set is represented by a finite union of closed axis-aligned cells
of side h ("resolution"): cell (i, j) is the square
[ox + i*h, ox + (i+1)*h] x [oy + j*h, oy + (j+1)*h].  Everything downstream
(exhaustions, barrier sets, rational fits) stands on the operations here:
complement labeling, exact set distances, and exact segment/arc intersection
predicates used by the wedge Monte Carlo.

Conventions (fixed across the library):
  * masks are closed sets; "disjoint" means positive distance;
  * complement components are 4-connected, mask interiors 8-connected;
  * geometric predicates carry an absolute tolerance of 1e-12 plane units,
    grid-derived answers an error bar of h*sqrt(2).
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, FrameTooTight

# absolute tolerance for exact predicates, in plane units
PREDICATE_TOL = 1e-12

# 4-connectivity structuring element for complement flood fills
_STRUCT4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

_KEY_OFFSET = 1 << 24
_KEY_BASE = 1 << 25


def _keys_of(idx: np.ndarray) -> np.ndarray:
    """Encode (N,2) int cell indices into sortable int64 keys."""
    return (idx[:, 0].astype(np.int64) + _KEY_OFFSET) * _KEY_BASE + (
        idx[:, 1].astype(np.int64) + _KEY_OFFSET
    )


def _idx_of(keys: np.ndarray) -> np.ndarray:
    i = keys // _KEY_BASE - _KEY_OFFSET
    j = keys % _KEY_BASE - _KEY_OFFSET
    return np.stack([i, j], axis=1).astype(np.int64)


def _cpx(p) -> complex:
    """Coerce Point | complex | (x, y) to complex."""
    if isinstance(p, Point):
        return complex(p.x, p.y)
    if isinstance(p, (tuple, list)):
        return complex(p[0], p[1])
    return complex(p)


@dataclass(frozen=True)
class Point:
    """A plane point with finite coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("Point coordinates must be finite")

    def to_complex(self) -> complex:
        return complex(self.x, self.y)

    @staticmethod
    def of(p) -> "Point":
        z = _cpx(p)
        return Point(z.real, z.imag)


@dataclass(frozen=True)
class Segment:
    """Closed straight segment [p, q]."""

    p: complex
    q: complex

    def length(self) -> float:
        return abs(self.q - self.p)


@dataclass(frozen=True)
class Wedge:
    """Two-segment path [p, apex] + [apex, q] with legs of equal length."""

    p: complex
    apex: complex
    q: complex

    def __post_init__(self):
        lp = abs(self.p - self.apex)
        lq = abs(self.apex - self.q)
        tol = 1e-9 * max(abs(self.p - self.q), 1e-300)
        if abs(lp - lq) > max(tol, 1e-15):
            raise ValueError(f"wedge legs differ: {lp} vs {lq}")

    @property
    def total_length(self) -> float:
        return abs(self.p - self.apex) + abs(self.apex - self.q)

    def segments(self) -> tuple[Segment, Segment]:
        return Segment(self.p, self.apex), Segment(self.apex, self.q)


_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CircularArc:
    """Closed arc of C(center, radius), theta_start < theta_end <= start+2pi.

    A full circle is the degenerate case theta_end - theta_start == 2pi.
    """

    center: complex
    radius: float
    theta_start: float
    theta_end: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("arc radius must be positive")
        if not (self.theta_start < self.theta_end <= self.theta_start + _TWO_PI + 1e-15):
            raise ValueError("need theta_start < theta_end <= theta_start + 2*pi")

    @property
    def is_full_circle(self) -> bool:
        return self.theta_end - self.theta_start >= _TWO_PI - 1e-12

    def point_at(self, theta: float) -> complex:
        return self.center + self.radius * complex(math.cos(theta), math.sin(theta))

    def sample(self, n: int) -> np.ndarray:
        th = np.linspace(self.theta_start, self.theta_end, n)
        return self.center + self.radius * np.exp(1j * th)

    def angle_contains(self, theta: float, tol: float = 0.0) -> bool:
        if self.is_full_circle:
            return True
        span = self.theta_end - self.theta_start
        rel = (theta - self.theta_start) % _TWO_PI
        return rel <= span + tol or rel >= _TWO_PI - tol


def full_circle(center, radius: float) -> CircularArc:
    return CircularArc(_cpx(center), radius, 0.0, _TWO_PI)


class GridMask:
    """Finite union of closed grid cells at a fixed resolution.

    Immutable; set operations require equal resolution and origin.
    """

    __slots__ = ("resolution", "origin", "_keys", "_idx", "_bcells")

    def __init__(self, resolution: float, cells, origin=(0.0, 0.0)):
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))
        idx = np.asarray(list(cells) if not isinstance(cells, np.ndarray) else cells)
        if idx.size == 0:
            idx = np.zeros((0, 2), dtype=np.int64)
        idx = idx.reshape(-1, 2).astype(np.int64)
        keys = np.unique(_keys_of(idx))
        object.__setattr__(self, "_keys", keys)
        object.__setattr__(self, "_idx", _idx_of(keys))
        object.__setattr__(self, "_bcells", None)

    def __setattr__(self, name, value):  # frozen after __init__
        if name in self.__slots__ and hasattr(self, "_idx"):
            raise AttributeError("GridMask is immutable")
        object.__setattr__(self, name, value)

    # -- basic accessors ----------------------------------------------------

    @property
    def cells(self) -> np.ndarray:
        """(N,2) array of integer cell indices, lexicographically sorted."""
        return self._idx

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    def __len__(self) -> int:
        return len(self._keys)

    @property
    def is_empty(self) -> bool:
        return len(self._keys) == 0

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(imin, jmin, imax, jmax), inclusive.  Raises on empty mask."""
        if self.is_empty:
            raise EmptyMask("empty mask has no bbox")
        i, j = self._idx[:, 0], self._idx[:, 1]
        return int(i.min()), int(j.min()), int(i.max()), int(j.max())

    def __eq__(self, other):
        return (
            isinstance(other, GridMask)
            and self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self._keys, other._keys)
        )

    def __hash__(self):
        return hash((self.resolution, self.origin, self._keys.tobytes()))

    def _check_compatible(self, other: "GridMask"):
        if self.resolution != other.resolution or self.origin != other.origin:
            raise ValueError("set operations need equal resolution and origin")

    # -- set algebra ---------------------------------------------------------

    def union(self, other: "GridMask") -> "GridMask":
        self._check_compatible(other)
        return self._from_keys(np.union1d(self._keys, other._keys))

    def intersection(self, other: "GridMask") -> "GridMask":
        self._check_compatible(other)
        return self._from_keys(np.intersect1d(self._keys, other._keys))

    def difference(self, other: "GridMask") -> "GridMask":
        self._check_compatible(other)
        return self._from_keys(np.setdiff1d(self._keys, other._keys))

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def _from_keys(self, keys: np.ndarray) -> "GridMask":
        m = GridMask.__new__(GridMask)
        object.__setattr__(m, "resolution", self.resolution)
        object.__setattr__(m, "origin", self.origin)
        object.__setattr__(m, "_keys", keys)
        object.__setattr__(m, "_idx", _idx_of(keys))
        object.__setattr__(m, "_bcells", None)
        return m

    def contains_cells(self, idx: np.ndarray) -> np.ndarray:
        """Vectorized membership of (N,2) cell indices.

        Binary search against the sorted key array (cheaper than np.isin,
        which re-sorts the larger operand on every call).
        """
        if len(self._keys) == 0:
            return np.zeros(len(np.asarray(idx).reshape(-1, 2)), dtype=bool)
        q = _keys_of(np.asarray(idx).reshape(-1, 2))
        pos = np.searchsorted(self._keys, q)
        pos = np.minimum(pos, len(self._keys) - 1)
        return self._keys[pos] == q

    def contains_cell(self, i: int, j: int) -> bool:
        return bool(self.contains_cells(np.array([[i, j]]))[0])

    def cell_of_point(self, z) -> tuple[int, int]:
        """Cell whose half-open [ih,(i+1)h) square holds the point."""
        z = _cpx(z)
        h = self.resolution
        return (
            int(math.floor((z.real - self.origin[0]) / h)),
            int(math.floor((z.imag - self.origin[1]) / h)),
        )

    def covers_point(self, z, tol: float = 0.0) -> bool:
        """Is the point within the closed union (optionally inflated by tol)?"""
        z = _cpx(z)
        if self.is_empty:
            return False
        h = self.resolution
        ci, cj = self.cell_of_point(z)
        r = max(1, int(math.ceil(tol / h)) + 1)
        cand = [(ci + a, cj + b) for a in range(-r, r + 1) for b in range(-r, r + 1)]
        cand = np.array(cand)
        hit = self.contains_cells(cand)
        if not hit.any():
            return False
        lo, hi = self.cell_corners(cand[hit])
        d = _point_box_distance(z, lo, hi)
        return bool((d <= tol + PREDICATE_TOL).any())

    # -- geometry of cells ----------------------------------------------------

    def cell_corners(self, idx=None):
        """Lower-left and upper-right corners of cells as complex arrays."""
        idx = self._idx if idx is None else np.asarray(idx).reshape(-1, 2)
        h = self.resolution
        ox, oy = self.origin
        lo = (ox + idx[:, 0] * h) + 1j * (oy + idx[:, 1] * h)
        return lo, lo + h * (1 + 1j)

    def cell_centers(self, idx=None) -> np.ndarray:
        lo, hi = self.cell_corners(idx)
        return (lo + hi) / 2.0

    def boundary_cells(self) -> np.ndarray:
        """Cells with at least one of their 8 neighbours missing (memoized)."""
        if self._bcells is not None:
            return self._bcells
        if self.is_empty:
            out = np.zeros((0, 2), dtype=np.int64)
        else:
            idx = self._idx
            interior = np.ones(len(idx), dtype=bool)
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di == 0 and dj == 0:
                        continue
                    interior &= self.contains_cells(idx + np.array([di, dj]))
            out = idx[~interior]
        object.__setattr__(self, "_bcells", out)
        return out

    def boundary_edges(self) -> list[Segment]:
        """Outer edges of the union (edges with the 4-neighbour missing)."""
        segs = []
        idx = self._idx
        h = self.resolution
        ox, oy = self.origin
        for (di, dj), mk in (((1, 0), "R"), ((-1, 0), "L"), ((0, 1), "T"), ((0, -1), "B")):
            missing = ~self.contains_cells(idx + np.array([di, dj]))
            for i, j in idx[missing]:
                x0, y0 = ox + i * h, oy + j * h
                if mk == "R":
                    segs.append(Segment(complex(x0 + h, y0), complex(x0 + h, y0 + h)))
                elif mk == "L":
                    segs.append(Segment(complex(x0, y0), complex(x0, y0 + h)))
                elif mk == "T":
                    segs.append(Segment(complex(x0, y0 + h), complex(x0 + h, y0 + h)))
                else:
                    segs.append(Segment(complex(x0, y0), complex(x0 + h, y0)))
        return segs

    def diameter(self) -> float:
        """Diameter of the closed union (max corner-pair distance)."""
        if self.is_empty:
            raise EmptyMask("diameter of empty mask")
        b = self.boundary_cells()
        lo, hi = self.cell_corners(b)
        pts = np.concatenate([lo, hi, lo + self.resolution, hi + 1j * self.resolution])
        xy = np.stack([pts.real, pts.imag], axis=1)
        if len(xy) > 8:
            try:
                from scipy.spatial import ConvexHull

                xy = xy[ConvexHull(xy).vertices]
            except Exception:
                pass  # degenerate (collinear) masks fall back to all corners
        d = np.hypot(
            xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1]
        )
        return float(d.max())

    def dense(self, frame) -> np.ndarray:
        """Boolean occupancy grid over an inclusive frame (i0,j0,i1,j1)."""
        i0, j0, i1, j1 = frame
        grid = np.zeros((i1 - i0 + 1, j1 - j0 + 1), dtype=bool)
        if not self.is_empty:
            idx = self._idx
            sel = (
                (idx[:, 0] >= i0)
                & (idx[:, 0] <= i1)
                & (idx[:, 1] >= j0)
                & (idx[:, 1] <= j1)
            )
            idx = idx[sel]
            grid[idx[:, 0] - i0, idx[:, 1] - j0] = True
        return grid

    @staticmethod
    def from_dense(resolution: float, grid: np.ndarray, frame, origin=(0.0, 0.0)) -> "GridMask":
        i0, j0 = frame[0], frame[1]
        ii, jj = np.nonzero(grid)
        return GridMask(resolution, np.stack([ii + i0, jj + j0], axis=1), origin)

    def dilate(self, radius: float, frame) -> "GridMask":
        """Euclidean dilation: cells whose center is within `radius` of the mask.

        Computed by a Euclidean distance transform over the frame; the result
        always contains the original mask.
        """
        g = self.dense(frame)
        if radius <= 0:
            return GridMask.from_dense(self.resolution, g, frame, self.origin)
        d = ndimage.distance_transform_edt(~g)
        return GridMask.from_dense(
            self.resolution, g | (d * self.resolution <= radius), frame, self.origin
        )

    # -- serialization --------------------------------------------------------

    _MAGIC = b"FDMK"
    _VERSION = 1

    def to_bytes(self) -> bytes:
        """Versioned binary container: run-length-encoded rows."""
        buf = io.BytesIO()
        buf.write(self._MAGIC)
        buf.write(struct.pack("<H", self._VERSION))
        buf.write(struct.pack("<ddd", self.resolution, *self.origin))
        if self.is_empty:
            buf.write(struct.pack("<iiii", 0, 0, -1, -1))
            buf.write(struct.pack("<I", 0))
            return buf.getvalue()
        i0, j0, i1, j1 = self.bbox
        buf.write(struct.pack("<iiii", i0, j0, i1, j1))
        runs = []
        idx = self._idx
        for j in range(j0, j1 + 1):
            row = np.sort(idx[idx[:, 1] == j, 0])
            if len(row) == 0:
                continue
            breaks = np.nonzero(np.diff(row) > 1)[0]
            starts = np.concatenate([[0], breaks + 1])
            ends = np.concatenate([breaks, [len(row) - 1]])
            for s, e in zip(starts, ends):
                runs.append((j, int(row[s]), int(row[e] - row[s] + 1)))
        buf.write(struct.pack("<I", len(runs)))
        for j, i, n in runs:
            buf.write(struct.pack("<iii", j, i, n))
        return buf.getvalue()

    @staticmethod
    def from_bytes(data: bytes) -> "GridMask":
        buf = io.BytesIO(data)
        if buf.read(4) != GridMask._MAGIC:
            raise ValueError("not a grid-mask container")
        (version,) = struct.unpack("<H", buf.read(2))
        if version != GridMask._VERSION:
            raise ValueError(f"unsupported mask container version {version}")
        h, ox, oy = struct.unpack("<ddd", buf.read(24))
        buf.read(16)  # bbox, recomputed
        (nruns,) = struct.unpack("<I", buf.read(4))
        cells = []
        for _ in range(nruns):
            j, i, n = struct.unpack("<iii", buf.read(12))
            cells.extend((i + k, j) for k in range(n))
        return GridMask(h, cells, (ox, oy))

    def to_text(self) -> str:
        """Plain-text debug format: '0'/'1' per cell, one row per line."""
        if self.is_empty:
            return "empty\n"
        i0, j0, i1, j1 = self.bbox
        g = self.dense((i0, j0, i1, j1))
        lines = [f"bbox {i0} {j0} {i1} {j1} resolution {self.resolution!r}"]
        for j in range(j1 - j0, -1, -1):  # top row first
            lines.append("".join("1" if v else "0" for v in g[:, j]))
        return "\n".join(lines) + "\n"


# -- shape rasterizers --------------------------------------------------------


def _cells_in_annular_range(h, center, rmax, origin):
    c = _cpx(center)
    i0 = int(math.floor((c.real - rmax - origin[0]) / h)) - 1
    i1 = int(math.ceil((c.real + rmax - origin[0]) / h)) + 1
    j0 = int(math.floor((c.imag - rmax - origin[1]) / h)) - 1
    j1 = int(math.ceil((c.imag + rmax - origin[1]) / h)) + 1
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    return np.stack([ii.ravel(), jj.ravel()], axis=1)


def _cell_radial_range(idx, h, center, origin):
    """Min/max distance from `center` to each closed cell."""
    c = _cpx(center)
    x0 = origin[0] + idx[:, 0] * h
    y0 = origin[1] + idx[:, 1] * h
    dx = np.maximum(np.maximum(x0 - c.real, c.real - (x0 + h)), 0.0)
    dy = np.maximum(np.maximum(y0 - c.imag, c.imag - (y0 + h)), 0.0)
    rmin = np.hypot(dx, dy)
    fx = np.maximum(np.abs(x0 - c.real), np.abs(x0 + h - c.real))
    fy = np.maximum(np.abs(y0 - c.imag), np.abs(y0 + h - c.imag))
    rmax = np.hypot(fx, fy)
    return rmin, rmax


def annulus_mask(h, center, r_inner, r_outer, predicate="cover", origin=(0.0, 0.0)) -> GridMask:
    """Mask for {r_inner <= |z - center| <= r_outer}.

    predicate: 'cover' keeps every cell that intersects the annulus,
    'inside' only cells fully contained in it.
    """
    idx = _cells_in_annular_range(h, center, r_outer + 2 * h, origin)
    rmin, rmax = _cell_radial_range(idx, h, center, origin)
    if predicate == "cover":
        keep = (rmax >= r_inner) & (rmin <= r_outer)
    elif predicate == "inside":
        keep = (rmin >= r_inner) & (rmax <= r_outer)
    else:
        raise ValueError("predicate must be 'cover' or 'inside'")
    return GridMask(h, idx[keep], origin)


def disk_mask(h, center, radius, predicate="cover", origin=(0.0, 0.0)) -> GridMask:
    return annulus_mask(h, center, 0.0, radius, predicate, origin)


def circle_mask(h, center, radius, origin=(0.0, 0.0)) -> GridMask:
    """Cells the circle |z - center| = radius passes through."""
    idx = _cells_in_annular_range(h, center, radius + 2 * h, origin)
    rmin, rmax = _cell_radial_range(idx, h, center, origin)
    return GridMask(h, idx[(rmin <= radius) & (rmax >= radius)], origin)


def segment_mask(h, p, q, origin=(0.0, 0.0)) -> GridMask:
    """Cells the closed segment [p, q] touches (supercover)."""
    p, q = _cpx(p), _cpx(q)
    i0 = int(math.floor((min(p.real, q.real) - origin[0]) / h)) - 1
    i1 = int(math.ceil((max(p.real, q.real) - origin[0]) / h)) + 1
    j0 = int(math.floor((min(p.imag, q.imag) - origin[1]) / h)) - 1
    j1 = int(math.ceil((max(p.imag, q.imag) - origin[1]) / h)) + 1
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    idx = np.stack([ii.ravel(), jj.ravel()], axis=1)
    lo = (origin[0] + idx[:, 0] * h) + 1j * (origin[1] + idx[:, 1] * h)
    keep = _segment_box_distance_many(p, q, lo, lo + h * (1 + 1j)) <= PREDICATE_TOL
    return GridMask(h, idx[keep], origin)


def rect_mask(h, x0, y0, x1, y1, origin=(0.0, 0.0)) -> GridMask:
    i0 = int(math.floor((x0 - origin[0]) / h))
    i1 = int(math.ceil((x1 - origin[0]) / h)) - 1
    j0 = int(math.floor((y0 - origin[1]) / h))
    j1 = int(math.ceil((y1 - origin[1]) / h)) - 1
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    return GridMask(h, np.stack([ii.ravel(), jj.ravel()], axis=1), origin)


def polygon_mask(h, vertices, origin=(0.0, 0.0)) -> GridMask:
    """Closed polygon: cells with center inside (even-odd) plus edge supercover."""
    vs = [_cpx(v) for v in vertices]
    xs = [v.real for v in vs]
    ys = [v.imag for v in vs]
    i0 = int(math.floor((min(xs) - origin[0]) / h)) - 1
    i1 = int(math.ceil((max(xs) - origin[0]) / h)) + 1
    j0 = int(math.floor((min(ys) - origin[1]) / h)) - 1
    j1 = int(math.ceil((max(ys) - origin[1]) / h)) + 1
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    idx = np.stack([ii.ravel(), jj.ravel()], axis=1)
    cx = origin[0] + (idx[:, 0] + 0.5) * h
    cy = origin[1] + (idx[:, 1] + 0.5) * h
    inside = np.zeros(len(idx), dtype=bool)
    n = len(vs)
    for k in range(n):
        a, b = vs[k], vs[(k + 1) % n]
        cond = (a.imag > cy) != (b.imag > cy)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a.real + (cy - a.imag) * (b.real - a.real) / (b.imag - a.imag)
        inside ^= cond & (cx < xint)
    m = GridMask(h, idx[inside], origin)
    for k in range(n):
        m = m.union(segment_mask(h, vs[k], vs[(k + 1) % n], origin))
    return m


def mask_from_points(h, points, pad_cells=0, origin=(0.0, 0.0)) -> GridMask:
    """Cells containing the given points, optionally padded by a cell ring."""
    cells = []
    for p in points:
        z = _cpx(p)
        ci = int(math.floor((z.real - origin[0]) / h))
        cj = int(math.floor((z.imag - origin[1]) / h))
        for a in range(-pad_cells, pad_cells + 1):
            for b in range(-pad_cells, pad_cells + 1):
                cells.append((ci + a, cj + b))
    return GridMask(h, cells, origin)


# -- exact low-level predicates ------------------------------------------------


def _point_box_distance(z, lo, hi):
    dx = np.maximum(np.maximum(lo.real - z.real, z.real - hi.real), 0.0)
    dy = np.maximum(np.maximum(lo.imag - z.imag, z.imag - hi.imag), 0.0)
    return np.hypot(dx, dy)


def point_segment_distance(z, p, q) -> float:
    z, p, q = _cpx(z), _cpx(p), _cpx(q)
    d = q - p
    L2 = abs(d) ** 2
    if L2 == 0.0:
        return abs(z - p)
    t = ((z - p).real * d.real + (z - p).imag * d.imag) / L2
    t = min(1.0, max(0.0, t))
    return abs(z - (p + t * d))


def points_segment_distance(zs: np.ndarray, p, q) -> np.ndarray:
    """Vectorized distance from many points to one segment."""
    p, q = _cpx(p), _cpx(q)
    d = q - p
    L2 = abs(d) ** 2
    if L2 == 0.0:
        return np.abs(zs - p)
    t = ((zs - p).real * d.real + (zs - p).imag * d.imag) / L2
    t = np.clip(t, 0.0, 1.0)
    return np.abs(zs - (p + t * d))


def segment_segment_distance(p1, q1, p2, q2) -> float:
    p1, q1, p2, q2 = map(_cpx, (p1, q1, p2, q2))
    d1, d2 = q1 - p1, q2 - p2
    den = d1.real * d2.imag - d1.imag * d2.real
    w = p2 - p1
    if abs(den) > 1e-300:
        t = (w.real * d2.imag - w.imag * d2.real) / den
        s = (w.real * d1.imag - w.imag * d1.real) / den
        if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
            return 0.0
    return min(
        point_segment_distance(p1, p2, q2),
        point_segment_distance(q1, p2, q2),
        point_segment_distance(p2, p1, q1),
        point_segment_distance(q2, p1, q1),
    )


def _segment_box_distance_many(p, q, lo, hi) -> np.ndarray:
    """Distance from one segment to many boxes (0 iff they intersect)."""
    n = len(lo)
    out = np.empty(n)
    # cheap vectorized lower bound via box-center distance, exact refine after
    centers = (lo + hi) / 2.0
    halfdiag = np.abs(hi - lo) / 2.0
    rad = np.hypot(halfdiag.real, halfdiag.imag)
    dmid = points_segment_distance(centers, p, q)
    out[:] = np.maximum(dmid - rad, 0.0)
    for k in np.nonzero(out <= 2 * PREDICATE_TOL)[0]:
        out[k] = segment_box_distance(p, q, lo[k], hi[k])
    return out


def segment_box_distance(p, q, lo, hi) -> float:
    """Exact distance between the segment [p,q] and a closed box."""
    p, q, lo, hi = _cpx(p), _cpx(q), _cpx(lo), _cpx(hi)

    def in_box(z):
        return lo.real <= z.real <= hi.real and lo.imag <= z.imag <= hi.imag

    if in_box(p) or in_box(q):
        return 0.0
    c00, c10 = lo, complex(hi.real, lo.imag)
    c01, c11 = complex(lo.real, hi.imag), hi
    edges = [(c00, c10), (c10, c11), (c11, c01), (c01, c00)]
    return min(segment_segment_distance(p, q, a, b) for a, b in edges)


def point_arc_distance(z, arc: CircularArc) -> float:
    z = _cpx(z)
    v = z - arc.center
    r = abs(v)
    if r < 1e-300:
        theta = arc.theta_start
    else:
        theta = math.atan2(v.imag, v.real)
    if arc.angle_contains(theta):
        return abs(r - arc.radius)
    return min(
        abs(z - arc.point_at(arc.theta_start)), abs(z - arc.point_at(arc.theta_end))
    )


def segment_arc_distance(p, q, arc: CircularArc) -> float:
    """Exact distance between a closed segment and a closed arc."""
    p, q = _cpx(p), _cpx(q)
    c, r = arc.center, arc.radius
    d = q - p
    L2 = abs(d) ** 2
    cands = [
        point_arc_distance(p, arc),
        point_arc_distance(q, arc),
        point_segment_distance(arc.point_at(arc.theta_start), p, q),
        point_segment_distance(arc.point_at(arc.theta_end), p, q),
    ]
    if L2 > 0:
        # segment/circle crossings
        w = p - c
        a = L2
        b = 2.0 * (w.real * d.real + w.imag * d.imag)
        cc = abs(w) ** 2 - r * r
        disc = b * b - 4 * a * cc
        if disc >= 0:
            sq = math.sqrt(disc)
            for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
                if -1e-12 <= t <= 1.0 + 1e-12:
                    z = p + min(1.0, max(0.0, t)) * d
                    v = z - c
                    th = math.atan2(v.imag, v.real)
                    if arc.angle_contains(th, tol=PREDICATE_TOL / max(r, PREDICATE_TOL)):
                        return 0.0
        # radial gap at the foot of the perpendicular from the center
        t = ((c - p).real * d.real + (c - p).imag * d.imag) / L2
        if 0.0 <= t <= 1.0:
            z = p + t * d
            v = z - c
            th = math.atan2(v.imag, v.real)
            if arc.angle_contains(th):
                cands.append(abs(abs(v) - r))
    return min(cands)


def segment_hits_arcs_bulk(p, q, centers, radii, th0, th1, tol=PREDICATE_TOL) -> np.ndarray:
    """Vectorized: does segment [p,q] come within tol of each arc?

    Arrays centers/radii/th0/th1 describe arcs with th0 < th1 <= th0 + 2pi.
    """
    p, q = _cpx(p), _cpx(q)
    d = q - p
    L2 = abs(d) ** 2
    n = len(centers)
    hit = np.zeros(n, dtype=bool)
    span = th1 - th0
    fullc = span >= _TWO_PI - 1e-12

    def ang_ok(theta, k, atol):
        if fullc[k]:
            return True
        rel = (theta - th0[k]) % _TWO_PI
        return rel <= span[k] + atol or rel >= _TWO_PI - atol

    # endpoint distances (vectorized)
    for z in (p, q):
        v = z - centers
        r = np.abs(v)
        theta = np.arctan2(v.imag, v.real)
        rel = (theta - th0) % _TWO_PI
        inarc = fullc | (rel <= span) | (rel >= _TWO_PI)
        dd = np.where(inarc, np.abs(r - radii), np.inf)
        e0 = centers + radii * np.exp(1j * th0)
        e1 = centers + radii * np.exp(1j * th1)
        dd = np.minimum(dd, np.minimum(np.abs(z - e0), np.abs(z - e1)))
        hit |= dd <= tol
    # arc endpoints vs segment
    for ths in (th0, th1):
        e = centers + radii * np.exp(1j * ths)
        hit |= points_segment_distance(e, p, q) <= tol
    if L2 > 0:
        w = p - centers
        b = 2.0 * (w.real * d.real + w.imag * d.imag)
        cc = np.abs(w) ** 2 - radii**2
        disc = b * b - 4 * L2 * cc
        ok = disc >= -1e-300
        sq = np.sqrt(np.maximum(disc, 0.0))
        for sgn in (-1.0, 1.0):
            t = (-b + sgn * sq) / (2 * L2)
            sel = ok & (t >= -1e-12) & (t <= 1 + 1e-12) & ~hit
            for k in np.nonzero(sel)[0]:
                z = p + min(1.0, max(0.0, float(t[k]))) * d
                v = z - centers[k]
                th = math.atan2(v.imag, v.real)
                if ang_ok(th, k, tol / max(radii[k], tol)):
                    hit[k] = True
        # perpendicular foot (near-tangency)
        t = ((centers - p).real * d.real + (centers - p).imag * d.imag) / L2
        sel = (t >= 0) & (t <= 1) & ~hit
        for k in np.nonzero(sel)[0]:
            z = p + float(t[k]) * d
            v = z - centers[k]
            th = math.atan2(v.imag, v.real)
            if ang_ok(th, k, 0.0) and abs(abs(v) - radii[k]) <= tol:
                hit[k] = True
    return hit


# -- circle vs box angular intervals (for exact arc rasterization) -------------


def segments_hit_arc_bulk(P: np.ndarray, Q: np.ndarray, arc: CircularArc, tol=PREDICATE_TOL):
    """Vectorized over many segments [P[k], Q[k]]: does each hit the arc?"""
    c, r = arc.center, arc.radius
    span = arc.theta_end - arc.theta_start
    fullc = arc.is_full_circle
    hit = np.zeros(len(P), dtype=bool)

    def ang_ok(theta):
        if fullc:
            return np.ones(theta.shape, dtype=bool)
        rel = (theta - arc.theta_start) % _TWO_PI
        return (rel <= span + tol / max(r, tol)) | (rel >= _TWO_PI - tol / max(r, tol))

    # endpoint-on-arc and arc-endpoint-on-segment candidates
    for Z in (P, Q):
        v = Z - c
        theta = np.arctan2(v.imag, v.real)
        d = np.where(ang_ok(theta), np.abs(np.abs(v) - r), np.inf)
        hit |= d <= tol
    for th_end in (arc.theta_start, arc.theta_end):
        e = arc.point_at(th_end)
        d = Q - P
        L2 = np.abs(d) ** 2
        t = np.where(L2 > 0, ((e - P).real * d.real + (e - P).imag * d.imag) / np.where(L2 > 0, L2, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        hit |= np.abs(e - (P + t * d)) <= tol
    d = Q - P
    L2 = np.abs(d) ** 2
    ok = L2 > 0
    w = P - c
    b = 2.0 * (w.real * d.real + w.imag * d.imag)
    cc = np.abs(w) ** 2 - r * r
    disc = b * b - 4 * L2 * cc
    sq = np.sqrt(np.maximum(disc, 0.0))
    for sgn in (-1.0, 1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-b + sgn * sq) / (2 * L2)
        sel = ok & (disc >= 0) & (t >= -1e-12) & (t <= 1 + 1e-12)
        if sel.any():
            z = P + np.clip(t, 0.0, 1.0) * d
            v = z - c
            theta = np.arctan2(v.imag, v.real)
            hit |= sel & ang_ok(theta)
    # perpendicular-foot near-tangency
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((c - P).real * d.real + (c - P).imag * d.imag) / np.where(ok, L2, 1.0)
    sel = ok & (t >= 0.0) & (t <= 1.0)
    if sel.any():
        z = P + np.clip(t, 0.0, 1.0) * d
        v = z - c
        theta = np.arctan2(v.imag, v.real)
        hit |= sel & ang_ok(theta) & (np.abs(np.abs(v) - r) <= tol)
    return hit


def segments_hit_segment_bulk(P, Q, seg: Segment, tol=PREDICATE_TOL):
    """Vectorized over many segments: does each come within tol of `seg`?"""
    out = np.zeros(len(P), dtype=bool)
    for k in range(len(P)):
        out[k] = segment_segment_distance(P[k], Q[k], seg.p, seg.q) <= tol
    return out


def wedges_hit_pieces(wedges, pieces, tol=PREDICATE_TOL) -> np.ndarray:
    """Vectorized Monte-Carlo core: which wedges hit the piece collection."""
    P1 = np.array([w.p for w in wedges])
    A = np.array([w.apex for w in wedges])
    Q1 = np.array([w.q for w in wedges])
    hit = np.zeros(len(wedges), dtype=bool)
    for piece in pieces:
        if hit.all():
            break
        todo = ~hit
        for (S, T) in ((P1, A), (A, Q1)):
            if isinstance(piece, CircularArc):
                sub = segments_hit_arc_bulk(S[todo], T[todo], piece, tol)
            else:
                sub = segments_hit_segment_bulk(S[todo], T[todo], piece, tol)
            res = np.zeros(len(wedges), dtype=bool)
            res[np.nonzero(todo)[0][sub]] = True
            hit |= res
    return hit


def circle_box_angle_intervals(center, radius, lo, hi):
    """Angular intervals (mod 2pi) where the circle point lies in the box.

    Intersection of four half-plane conditions, each of which restricts the
    angle to one connected interval.  Returns a list of (a, b) with a < b,
    b - a <= 2pi, meaning {theta mod 2pi in [a, b]}.
    """
    c = _cpx(center)
    lo, hi = _cpx(lo), _cpx(hi)
    ivs = [(0.0, _TWO_PI)]

    def clip(ivs, cos_like, bound, ge):
        # condition: cos(theta - phase) >= u  (or <=) with phase in {0, pi/2}
        out = []
        u, phase = bound, cos_like
        if ge:
            if u > 1.0:
                return []
            if u <= -1.0:
                return ivs
            half = math.acos(u)
            win = (phase - half, phase + half)
        else:
            if u < -1.0:
                return []
            if u >= 1.0:
                return ivs
            half = math.acos(-u)
            win = (phase + math.pi - half, phase + math.pi + half)
        for a, b in ivs:
            out.extend(_interval_intersect_mod(a, b, win[0], win[1]))
        return out

    # x = cx + R cos(theta) in [lo.x, hi.x]; y similarly with sin = cos(theta - pi/2)
    ivs = clip(ivs, 0.0, (lo.real - c.real) / radius, True)
    ivs = clip(ivs, 0.0, (hi.real - c.real) / radius, False)
    ivs = clip(ivs, math.pi / 2, (lo.imag - c.imag) / radius, True)
    ivs = clip(ivs, math.pi / 2, (hi.imag - c.imag) / radius, False)
    return ivs


def _interval_intersect_mod(a, b, c, d):
    """Intersect [a,b] with [c,d] on the circle (angles mod 2pi)."""
    if b - a >= _TWO_PI - 1e-15:
        return [(c, d)]
    if d - c >= _TWO_PI - 1e-15:
        return [(a, b)]
    out = []
    for k in (-2, -1, 0, 1, 2):
        lo_ = max(a, c + k * _TWO_PI)
        hi_ = min(b, d + k * _TWO_PI)
        if hi_ >= lo_ - 1e-15:
            out.append((lo_, max(hi_, lo_)))
    return out


def cell_arc_intersects(arc: CircularArc, lo, hi) -> bool:
    """Does the closed arc meet the closed box [lo, hi]?"""
    for a, b in circle_box_angle_intervals(arc.center, arc.radius, lo, hi):
        if arc.is_full_circle:
            return True
        # overlap of [a,b] with arc interval mod 2pi
        if _interval_intersect_mod(arc.theta_start, arc.theta_end, a, b):
            return True
    return False


def arc_cover_cells(arc: CircularArc, h, origin=(0.0, 0.0)) -> np.ndarray:
    """Cells the closed arc touches, as an (N,2) index array (exact filter)."""
    n = max(64, int(arc.radius * (arc.theta_end - arc.theta_start) / (h / 3)) + 2)
    pts = arc.sample(n)
    ox, oy = origin
    ci = np.floor((pts.real - ox) / h).astype(np.int64)
    cj = np.floor((pts.imag - oy) / h).astype(np.int64)
    cand = set()
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            cand.update(zip((ci + a).tolist(), (cj + b).tolist()))
    keep = []
    for (i, j) in cand:
        lo = complex(ox + i * h, oy + j * h)
        if cell_arc_intersects(arc, lo, lo + h * (1 + 1j)):
            keep.append((i, j))
    return np.array(keep, dtype=np.int64).reshape(-1, 2)


def cells_covering_arc(arc: CircularArc, h, origin=(0.0, 0.0)) -> GridMask:
    """Supercover of an arc: every cell the arc touches."""
    return GridMask(h, arc_cover_cells(arc, h, origin), origin)


def cells_covering_segment(p, q, h, origin=(0.0, 0.0)) -> GridMask:
    return segment_mask(h, p, q, origin)


# -- module operations ----------------------------------------------------------


@dataclass
class ComponentLabeling:
    """Labeling of the complement of a mask within a frame.

    Components are 4-connected cell sets; exactly one component touches the
    frame boundary (the unbounded one).  ``labels`` is exposed through
    :meth:`label_at`; the dense array form is kept internally.
    """

    frame: tuple[int, int, int, int]
    resolution: float
    origin: tuple[float, float]
    label_grid: np.ndarray = field(repr=False)
    unbounded_id: int
    bounded_ids: tuple[int, ...]
    representative: dict[int, Point]
    cell_counts: dict[int, int]

    def label_at(self, cell) -> int:
        """Component id of a complement cell; -1 for mask cells/outside frame."""
        i0, j0, i1, j1 = self.frame
        i, j = int(cell[0]), int(cell[1])
        if not (i0 <= i <= i1 and j0 <= j <= j1):
            return -1
        v = int(self.label_grid[i - i0, j - j0])
        return v if v > 0 else -1

    def label_of_point(self, z) -> int:
        h = self.resolution
        z = _cpx(z)
        i = int(math.floor((z.real - self.origin[0]) / h))
        j = int(math.floor((z.imag - self.origin[1]) / h))
        lab = self.label_at((i, j))
        if lab >= 0:
            return lab
        # points on cell edges may sit in a neighbouring complement cell
        for di, dj in ((-1, 0), (0, -1), (-1, -1), (1, 0), (0, 1)):
            lab = self.label_at((i + di, j + dj))
            if lab >= 0:
                return lab
        return -1

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(sorted((self.unbounded_id,) + self.bounded_ids))

    def component_mask(self, comp_id: int) -> GridMask:
        i0, j0, _, _ = self.frame
        ii, jj = np.nonzero(self.label_grid == comp_id)
        return GridMask(self.resolution, np.stack([ii + i0, jj + j0], axis=1), self.origin)


def complement_components(K: GridMask, frame) -> ComponentLabeling:
    """Label the complement cells of K within an inclusive cell frame.

    The frame must leave at least a 2-cell margin around K's bbox so the
    unbounded component is unambiguous (it is the one touching the frame rim).
    """
    i0, j0, i1, j1 = (int(v) for v in frame)
    if K.is_empty:
        raise EmptyMask("complement_components of empty mask")
    bi0, bj0, bi1, bj1 = K.bbox
    if bi0 - i0 < 2 or bj0 - j0 < 2 or i1 - bi1 < 2 or j1 - bj1 < 2:
        raise FrameTooTight(
            f"frame {frame} leaves <2-cell margin around mask bbox {K.bbox}"
        )
    g = K.dense((i0, j0, i1, j1))
    lab, nlab = ndimage.label(~g, structure=_STRUCT4)
    rim = np.zeros_like(lab, dtype=bool)
    rim[0, :] = rim[-1, :] = True
    rim[:, 0] = rim[:, -1] = True
    rim_labels = np.unique(lab[rim & (lab > 0)])
    assert len(rim_labels) == 1, "margin >= 2 guarantees a single rim component"
    unbounded = int(rim_labels[0])
    reps: dict[int, Point] = {}
    counts: dict[int, int] = {}
    h = K.resolution
    ox, oy = K.origin
    bounded = []
    for cid in range(1, nlab + 1):
        ii, jj = np.nonzero(lab == cid)
        counts[cid] = len(ii)
        k = np.lexsort((jj, ii))[0]
        ci, cj = ii[k] + i0, jj[k] + j0
        reps[cid] = Point(ox + (ci + 0.5) * h, oy + (cj + 0.5) * h)
        if cid != unbounded:
            bounded.append(cid)
    return ComponentLabeling(
        frame=(i0, j0, i1, j1),
        resolution=h,
        origin=K.origin,
        label_grid=lab,
        unbounded_id=unbounded,
        bounded_ids=tuple(bounded),
        representative=reps,
        cell_counts=counts,
    )


def set_distance(A: GridMask, B: GridMask) -> float:
    """Exact min distance between two closed cell-unions (0 iff they touch)."""
    if A.is_empty or B.is_empty:
        raise EmptyMask("set_distance needs nonempty masks")
    A._check_compatible(B)
    if len(np.intersect1d(A.keys, B.keys)) > 0:
        return 0.0
    h = A.resolution
    ia = A.boundary_cells()
    ib = B.boundary_cells()
    best = math.inf
    chunk = max(1, int(4e6) // max(len(ib), 1))
    for s in range(0, len(ia), chunk):
        sub = ia[s : s + chunk]
        di = np.abs(sub[:, None, 0] - ib[None, :, 0]) - 1
        dj = np.abs(sub[:, None, 1] - ib[None, :, 1]) - 1
        np.maximum(di, 0, out=di)
        np.maximum(dj, 0, out=dj)
        d2 = di.astype(np.float64) ** 2 + dj.astype(np.float64) ** 2
        best = min(best, float(d2.min()))
    return math.sqrt(best) * h


def mask_distance_lb(A: GridMask, B: GridMask, frame) -> float:
    """Fast conservative lower bound for set_distance(A, B).

    Distance transform of B over the frame, probed at A's boundary cells and
    guarded by a cell diagonal.  Never exceeds the exact value.
    """
    if A.is_empty or B.is_empty:
        raise EmptyMask("mask_distance_lb needs nonempty masks")
    h = A.resolution
    edt = ndimage.distance_transform_edt(~B.dense(frame))
    cells = A.boundary_cells()
    ii = np.clip(cells[:, 0] - frame[0], 0, edt.shape[0] - 1)
    jj = np.clip(cells[:, 1] - frame[1], 0, edt.shape[1] - 1)
    d = float(edt[ii, jj].min())
    return max((d - math.sqrt(2.0)) * h, 0.0)


def point_mask_distance(z, M: GridMask) -> float:
    """Exact distance from a point to the closed cell-union."""
    if M.is_empty:
        raise EmptyMask("distance to empty mask")
    z = _cpx(z)
    lo, hi = M.cell_corners(M.boundary_cells())
    if len(lo) == 0:
        lo, hi = M.cell_corners()
    d = _point_box_distance(z, lo, hi)
    inner = M.covers_point(z)
    return 0.0 if inner else float(d.min())


def wedge_hits(w: Wedge, S, tol: float = PREDICATE_TOL) -> bool:
    """True iff either segment of the wedge meets the closed set S.

    S may be a GridMask or an iterable of CircularArc / Segment pieces.
    Predicates are exact up to `tol` (1e-12 plane units by default).
    """
    segs = w.segments()
    if isinstance(S, GridMask):
        if S.is_empty:
            return False
        h = S.resolution
        centers = S.cell_centers()
        halfdiag = h * math.sqrt(2.0) / 2.0
        for seg in segs:
            if seg.length() == 0.0:
                if S.covers_point(seg.p, tol):
                    return True
                continue
            d = points_segment_distance(centers, seg.p, seg.q)
            cand = np.nonzero(d <= halfdiag + tol)[0]
            if len(cand) == 0:
                continue
            lo, hi = S.cell_corners(S.cells[cand])
            for k in range(len(cand)):
                if segment_box_distance(seg.p, seg.q, lo[k], hi[k]) <= tol:
                    return True
        return False
    pieces = list(S)
    arcs = [p for p in pieces if isinstance(p, CircularArc)]
    others = [p for p in pieces if not isinstance(p, CircularArc)]
    if arcs:
        centers = np.array([a.center for a in arcs])
        radii = np.array([a.radius for a in arcs])
        th0 = np.array([a.theta_start for a in arcs])
        th1 = np.array([a.theta_end for a in arcs])
        for seg in segs:
            if segment_hits_arcs_bulk(seg.p, seg.q, centers, radii, th0, th1, tol).any():
                return True
    for piece in others:
        if isinstance(piece, Segment):
            for seg in segs:
                if segment_segment_distance(seg.p, seg.q, piece.p, piece.q) <= tol:
                    return True
        else:
            raise TypeError(f"unsupported barrier piece {type(piece)!r}")
    return False
