"""Two-level rational fits, recursive stage synthesis, singularity verdicts.

A stage function R_n must be uniformly small on the stage compact K_n and
uniformly large on the barrier L_n.  Three strategies are tried in order:

  * R = 0 when the barrier is empty (the small bound holds vacuously);
  * a closed-form power of a single factor, either (z - p)^-m for a pole site
    p separated from K by more than the barrier's far radius, or a scaled
    monomial ((z - z0)/sigma)^m when the barrier lies strictly outside the
    compact's circumscribed radius about z0.  Certificates for these are
    exact (log-space extreme values over the mask corners and piece extremes);
  * a minimax fit: linear program over pole/polynomial coefficients on
    boundary samples, order-escalated until a certified fit appears.

All sup/inf certificates combine dense sampling with a derivative-based
inflation margin, and for compacts use the maximum principle (poles are
attested to lie off the compact, so |R| peaks on the boundary).

Polynomial parts are stored sparsely in a scaled variable w = (z - center)/
scale, and evaluated through exponent-times-log so certified stage degrees in
the thousands stay inside float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import FitFailed, PoleProximity, ScanFailed
from .grid import (
    CircularArc,
    GridMask,
    Segment,
    _cpx,
    point_arc_distance,
    point_mask_distance,
    points_segment_distance,
)
from .potential import FinelyOpenPatch, find_good_circle

POLE_ORDER_CAP = 64
# scaled monomials carry coefficient low/2 and evaluate through
# exponent-times-log, so the degree cap guards compute time, not floats
POLY_DEGREE_CAP = 100000
COEFF_LOG_CAP = 650.0  # |ln coeff| guard for float64 representability


@dataclass(frozen=True)
class RationalFunction:
    """Partial-fraction form plus a sparse scaled polynomial part.

    poles: tuple of (site, coefficients) with coefficients[m-1] multiplying
    (z - site)^-m; polynomial: tuple of (degree, coefficient) pairs in the
    variable w = (z - center)/scale; pole_attestations: per-pole flag that the
    site lies in the complement of the working domain.
    """

    poles: tuple[tuple[complex, tuple[complex, ...]], ...] = ()
    polynomial: tuple[tuple[int, complex], ...] = ()
    center: complex = 0j
    scale: float = 1.0
    pole_attestations: tuple[bool, ...] = ()

    def __post_init__(self):
        if len(self.pole_attestations) not in (0, len(self.poles)):
            raise ValueError("one attestation per pole")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def pole_sites(self) -> tuple[complex, ...]:
        return tuple(p for p, _ in self.poles)

    def degree_bound(self) -> int:
        d = max((deg for deg, _ in self.polynomial), default=0)
        o = max((len(cs) for _, cs in self.poles), default=0)
        return max(d, o)

    def __call__(self, z):
        return evaluate(self, z)

    # -- serialization: plain text, hex floats for bit-exact round trips -----

    def to_text(self) -> str:
        lines = [f"rational v1 poles {len(self.poles)} terms {len(self.polynomial)}"]
        lines.append(
            f"center {self.center.real.hex()} {self.center.imag.hex()} "
            f"scale {self.scale.hex()}"
        )
        for k, (p, cs) in enumerate(self.poles):
            att = (
                "inC\\U"
                if (k < len(self.pole_attestations) and self.pole_attestations[k])
                else "unattested"
            )
            lines.append(f"pole {p.real.hex()} {p.imag.hex()} order {len(cs)} {att}")
            for m, c in enumerate(cs, start=1):
                lines.append(f"  {m} {c.real.hex()} {c.imag.hex()}")
        for deg, c in self.polynomial:
            lines.append(f"poly {deg} {c.real.hex()} {c.imag.hex()}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "RationalFunction":
        lines = [ln for ln in text.strip().split("\n")]
        head = lines[0].split()
        npoles = int(head[3])
        hdr = lines[1].split()
        center = complex(float.fromhex(hdr[1]), float.fromhex(hdr[2]))
        scale = float.fromhex(hdr[4])
        i = 2
        poles = []
        atts = []
        for _ in range(npoles):
            parts = lines[i].split()
            p = complex(float.fromhex(parts[1]), float.fromhex(parts[2]))
            order = int(parts[4])
            atts.append(parts[5] == "inC\\U")
            i += 1
            cs = []
            for _ in range(order):
                mm = lines[i].split()
                cs.append(complex(float.fromhex(mm[1]), float.fromhex(mm[2])))
                i += 1
            poles.append((p, tuple(cs)))
        poly = []
        while i < len(lines):
            parts = lines[i].split()
            poly.append((int(parts[1]), complex(float.fromhex(parts[2]), float.fromhex(parts[3]))))
            i += 1
        return RationalFunction(tuple(poles), tuple(poly), center, scale, tuple(atts))


def evaluate(R: RationalFunction, z):
    """Exact partial-fraction evaluation; log-space powers for high degrees.

    Accepts scalars or arrays; no pole-proximity guard (see eval_at).
    """
    arr = isinstance(z, np.ndarray)
    zz = z if arr else np.array([_cpx(z)])
    out = np.zeros(zz.shape, dtype=complex)
    for p, cs in R.poles:
        d = zz - p
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            acc = np.zeros_like(out)
            for c in reversed(cs):  # Horner in 1/(z-p)
                acc = (acc + c) * inv
            out += acc
    if R.polynomial:
        w = (zz - R.center) / R.scale
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            logw = np.log(np.where(w == 0, 1.0, w).astype(complex))
        for deg, c in R.polynomial:
            if deg == 0:
                out += c
                continue
            if deg <= 64:
                out += c * w**deg
            else:
                term = np.exp(deg * logw + math.log(abs(c))) * np.exp(
                    1j * np.angle(c)
                )
                term = np.where(w == 0, 0.0, term)
                out += term
    return out if arr else complex(out[0])


def eval_at(R, z, min_pole_distance: float = 1e-9):
    """Guarded evaluation; raises PoleProximity within 1e-9 of a pole."""
    z = _cpx(z)
    for p in _pole_sites(R):
        if abs(z - p) <= min_pole_distance:
            raise PoleProximity(f"evaluation point {z} within 1e-9 of pole {p}")
    return _eval_any(R, z)


def eval_grid(R, frame, resolution: float, origin=(0.0, 0.0), min_pole_distance=1e-9):
    """Dense complex field over a cell frame; near-pole points are skipped.

    Returns (values, skipped_mask); skipped points carry NaN.
    """
    i0, j0, i1, j1 = frame
    xs = origin[0] + (np.arange(i0, i1 + 1) + 0.5) * resolution
    ys = origin[1] + (np.arange(j0, j1 + 1) + 0.5) * resolution
    Z = xs[:, None] + 1j * ys[None, :]
    skipped = np.zeros(Z.shape, dtype=bool)
    for p in _pole_sites(R):
        skipped |= np.abs(Z - p) <= min_pole_distance
    vals = _eval_any(R, Z)
    vals = np.where(skipped, np.nan + 0j, vals)
    return vals, skipped


def _pole_sites(R) -> tuple[complex, ...]:
    if isinstance(R, RationalFunction):
        return R.pole_sites
    return tuple(p for st in R.stages for p in st.fn.pole_sites)


def _eval_any(R, z):
    if isinstance(R, RationalFunction):
        return evaluate(R, z)
    return R.evaluate(z)


# -- extreme values and derivative bounds ------------------------------------------


def _mask_corner_points(K: GridMask) -> np.ndarray:
    lo, hi = K.cell_corners(K.boundary_cells())
    h = K.resolution
    return np.concatenate([lo, hi, lo + h, hi - h])


def mask_radius_about(K: GridMask, z0: complex) -> float:
    """Exact max distance from z0 to the closed mask (corner extremes)."""
    return float(np.abs(_mask_corner_points(K) - z0).max())


def piece_distance_extremes(piece, z0: complex) -> tuple[float, float]:
    """Exact (min, max) of |z - z0| over one arc or segment."""
    z0 = _cpx(z0)
    if isinstance(piece, Segment):
        dmin = float(points_segment_distance(np.array([z0]), piece.p, piece.q)[0])
        dmax = max(abs(piece.p - z0), abs(piece.q - z0))
        return dmin, dmax
    arc = piece
    dmin = point_arc_distance(z0, arc)
    v = z0 - arc.center
    D = abs(v)
    far_angle = math.atan2(-v.imag, -v.real)  # direction away from z0
    cands = [
        abs(z0 - arc.point_at(arc.theta_start)),
        abs(z0 - arc.point_at(arc.theta_end)),
    ]
    if arc.angle_contains(far_angle):
        cands.append(D + arc.radius)
    return dmin, max(cands)


def pieces_distance_extremes(pieces, z0: complex) -> tuple[float, float]:
    lo, hi = math.inf, 0.0
    for p in pieces:
        a, b = piece_distance_extremes(p, z0)
        lo, hi = min(lo, a), max(hi, b)
    return lo, hi


def derivative_bound(R: RationalFunction, dist_to_poles: dict, wmax: float) -> float:
    """sup |R'| over a set where each pole is at least dist_to_poles[p] away
    and |(z - center)/scale| <= wmax."""
    L = 0.0
    for p, cs in R.poles:
        d = dist_to_poles[p]
        if d <= 0:
            return math.inf
        for m, c in enumerate(cs, start=1):
            if c != 0:
                L += m * abs(c) / d ** (m + 1)
    for deg, c in R.polynomial:
        if deg == 0 or c == 0:
            continue
        ln_term = math.log(abs(c)) + math.log(deg) + (deg - 1) * math.log(max(wmax, 1e-300))
        L += math.exp(min(ln_term, 700.0)) / R.scale
    return L


def _log_abs_coeff(c: complex) -> float:
    return math.log(abs(c)) if c != 0 else -math.inf


def certified_max_on_mask(R: RationalFunction, K: GridMask, samples_per_edge: int = 16):
    """(sample_max, certified_max, inflation): sup |R| over the closed mask.

    Poles must lie off the mask; the maximum principle reduces the sup to the
    boundary edges, sampled densely and inflated by gap * sup|R'|.
    """
    if K.is_empty:
        return 0.0, 0.0, 0.0
    h = K.resolution
    # exact single-term shortcut: |c| * extreme^(+-m)
    if not R.poles and len(R.polynomial) == 1:
        deg, c = R.polynomial[0]
        wmax = mask_radius_about(K, R.center) / R.scale
        val = math.exp(_log_abs_coeff(c) + deg * math.log(max(wmax, 1e-300)))
        return val, val, 0.0
    if not R.polynomial and len(R.poles) == 1 and sum(x != 0 for x in R.poles[0][1]) == 1:
        p, cs = R.poles[0]
        m = max(i + 1 for i, x in enumerate(cs) if x != 0)
        dmin = point_mask_distance(p, K)
        if dmin <= 0:
            return math.inf, math.inf, 0.0
        val = math.exp(_log_abs_coeff(cs[m - 1]) - m * math.log(dmin))
        return val, val, 0.0
    edges = K.boundary_edges()
    pts = []
    ts = np.linspace(0.0, 1.0, samples_per_edge)
    for seg in edges:
        pts.append(seg.p + ts * (seg.q - seg.p))
    pts = np.concatenate(pts)
    vals = np.abs(evaluate(R, pts))
    gap = h / (samples_per_edge - 1)
    dists = {p: point_mask_distance(p, K) for p in R.pole_sites}
    wmax = mask_radius_about(K, R.center) / R.scale if R.polynomial else 0.0
    L = derivative_bound(R, dists, wmax)
    smax = float(vals.max())
    return smax, smax + L * gap / 2, L * gap / 2


def certified_min_on_pieces(R: RationalFunction, pieces, spacing: float):
    """(sample_min, certified_min, deflation): inf |R| over the barrier pieces."""
    if not pieces:
        return math.inf, math.inf, 0.0
    # exact single-term shortcut
    if not R.poles and len(R.polynomial) == 1:
        deg, c = R.polynomial[0]
        lo, _ = pieces_distance_extremes(pieces, R.center)
        val = math.exp(_log_abs_coeff(c) + deg * math.log(max(lo / R.scale, 1e-300)))
        return val, val, 0.0
    if not R.polynomial and len(R.poles) == 1 and sum(x != 0 for x in R.poles[0][1]) == 1:
        p, cs = R.poles[0]
        m = max(i + 1 for i, x in enumerate(cs) if x != 0)
        _, dmax = pieces_distance_extremes(pieces, p)
        val = math.exp(_log_abs_coeff(cs[m - 1]) - m * math.log(dmax))
        return val, val, 0.0
    best_sample = math.inf
    worst_defl = 0.0
    for piece in pieces:
        if isinstance(piece, Segment):
            n = max(2, int(piece.length() / spacing) + 1)
            ts = np.linspace(0.0, 1.0, n)
            pts = piece.p + ts * (piece.q - piece.p)
            gap = piece.length() / (n - 1) if n > 1 else 0.0
        else:
            length = piece.radius * (piece.theta_end - piece.theta_start)
            n = max(8, int(length / spacing) + 1)
            pts = piece.sample(n)
            gap = length / (n - 1)
        vals = np.abs(evaluate(R, pts))
        dists = {}
        for p in R.pole_sites:
            dmin, _ = piece_distance_extremes(piece, p)
            dists[p] = dmin
        _, wfar = piece_distance_extremes(piece, R.center)
        L = derivative_bound(R, dists, wfar / R.scale if R.polynomial else 0.0)
        best_sample = min(best_sample, float(vals.min()))
        worst_defl = max(worst_defl, L * gap / 2)
    return best_sample, best_sample - worst_defl, worst_defl


def max_on_pieces_upper(R: RationalFunction, pieces, spacing: float) -> float:
    """Certified upper bound for sup |R| over the pieces (for stage budgets)."""
    if not pieces:
        return 0.0
    if not R.poles and len(R.polynomial) == 1:
        deg, c = R.polynomial[0]
        _, hi = pieces_distance_extremes(pieces, R.center)
        return math.exp(_log_abs_coeff(c) + deg * math.log(max(hi / R.scale, 1e-300)))
    out = 0.0
    for piece in pieces:
        if isinstance(piece, Segment):
            n = max(2, int(piece.length() / spacing) + 1)
            ts = np.linspace(0.0, 1.0, n)
            pts = piece.p + ts * (piece.q - piece.p)
            gap = piece.length() / (n - 1) if n > 1 else 0.0
        else:
            length = piece.radius * (piece.theta_end - piece.theta_start)
            n = max(8, int(length / spacing) + 1)
            pts = piece.sample(n)
            gap = length / (n - 1)
        vals = np.abs(evaluate(R, pts))
        dists = {p: piece_distance_extremes(piece, p)[0] for p in R.pole_sites}
        _, wfar = piece_distance_extremes(piece, R.center)
        L = derivative_bound(R, dists, wfar / R.scale if R.polynomial else 0.0)
        out = max(out, float(vals.max()) + L * gap / 2)
    return out


# -- the two-level fit ---------------------------------------------------------------


@dataclass(frozen=True)
class FitCertificate:
    low: float
    high: float
    max_on_K_samples: float
    max_on_K_certified: float
    min_on_L_samples: float
    min_on_L_certified: float
    inflation_margin_low: float  # low - certified max  (> 0)
    inflation_margin_high: float  # certified min - high (> 0)
    strategy: str


def _certify(R, K, pieces, low, high, spacing, strategy):
    smax, cmax, _ = certified_max_on_mask(R, K)
    smin, cmin, _ = certified_min_on_pieces(R, pieces, spacing)
    if cmax < low and (not pieces or cmin > high):
        return FitCertificate(
            low=low,
            high=high,
            max_on_K_samples=smax,
            max_on_K_certified=cmax,
            min_on_L_samples=smin,
            min_on_L_certified=cmin,
            inflation_margin_low=low - cmax,
            inflation_margin_high=(cmin - high) if pieces else math.inf,
            strategy=strategy,
        )
    return None


def fit_two_level_rational(
    K: GridMask,
    L_pieces,
    pole_sites,
    low: float,
    high: float,
    attestations=None,
    spacing: float | None = None,
) -> tuple[RationalFunction, FitCertificate]:
    """Certified |R| < low on K and |R| > high on the barrier pieces.

    pole_sites: at most one preassigned point per bounded complement
    component (each expected to carry a complement attestation); the
    polynomial part serves the unbounded component.
    """
    if K.is_empty:
        raise ValueError("fit needs a nonempty compact")
    if spacing is None:
        spacing = K.resolution / 2
    pole_sites = [_cpx(p) for p in pole_sites]
    if attestations is None:
        attestations = [True] * len(pole_sites)
    piece_list = list(L_pieces)
    if not piece_list:
        R = RationalFunction()
        cert = _certify(R, K, [], low, high, spacing, "zero")
        return R, cert
    # strategy 1: single pole power, unit coefficient first
    for p, att in zip(pole_sites, attestations):
        rhoK = point_mask_distance(p, K)
        _, rhoL = pieces_distance_extremes(piece_list, p)
        if rhoK <= rhoL or rhoK <= 0:
            continue
        ratio = rhoK / rhoL
        # unit coefficient: both constraints are monotone in m when rhoK > 1
        feasible_m = None
        for m in range(1, POLE_ORDER_CAP + 1):
            if math.exp(-m * math.log(rhoK)) < low and math.exp(
                -m * math.log(rhoL)
            ) > high:
                feasible_m = m
                break
        if feasible_m is not None:
            cs = tuple(0j for _ in range(feasible_m - 1)) + (1 + 0j,)
            R = RationalFunction(((p, cs),), (), 0j, 1.0, (att,))
            cert = _certify(R, K, piece_list, low, high, spacing, "pole-power-unit")
            if cert:
                return R, cert
        m = math.ceil(math.log(4.0 * high / low) / math.log(ratio))
        if 1 <= m <= POLE_ORDER_CAP:
            ln_c = math.log(low / 2) + m * math.log(rhoK)
            if abs(ln_c) < COEFF_LOG_CAP:
                cs = tuple(0j for _ in range(m - 1)) + (complex(math.exp(ln_c)),)
                R = RationalFunction(((p, cs),), (), 0j, 1.0, (att,))
                cert = _certify(R, K, piece_list, low, high, spacing, "pole-power")
                if cert:
                    return R, cert
    # strategy 2: scaled monomial about the compact's centroid
    z0 = complex(K.cell_centers().mean())
    rhoK = mask_radius_about(K, z0)
    rhoL, _ = pieces_distance_extremes(piece_list, z0)
    if rhoL > rhoK > 0:
        m = math.ceil(math.log(4.0 * high / low) / math.log(rhoL / rhoK))
        if 1 <= m <= POLY_DEGREE_CAP:
            R = RationalFunction(
                (), ((m, complex(low / 2)),), z0, rhoK, ()
            )
            cert = _certify(R, K, piece_list, low, high, spacing, "monomial")
            if cert:
                return R, cert
    # strategy 3: minimax fit by linear programming, escalating orders
    best = None
    for degree in (4, 8, 16, 32, POLE_ORDER_CAP):
        R = _minimax_fit(K, piece_list, pole_sites, attestations, low, high, degree, spacing)
        if R is None:
            continue
        cert = _certify(R, K, piece_list, low, high, spacing, f"minimax-{degree}")
        if cert:
            return R, cert
        smax, cmax, _ = certified_max_on_mask(R, K)
        smin, cmin, _ = certified_min_on_pieces(R, piece_list, spacing)
        best = (cmax, cmin)
    raise FitFailed(
        f"no certified fit below order cap (best achieved {best})", achieved=best
    )


def _minimax_fit(K, pieces, pole_sites, attestations, low, high, degree, spacing):
    """One LP round: match 0 on K samples and the target level on L samples."""
    edges = K.boundary_edges()
    ts = np.linspace(0.0, 1.0, 6)
    k_pts = np.concatenate([seg.p + ts * (seg.q - seg.p) for seg in edges])
    if len(k_pts) > 4000:
        k_pts = k_pts[:: len(k_pts) // 4000 + 1]
    l_pts = []
    for piece in pieces:
        if isinstance(piece, Segment):
            n = max(4, int(piece.length() / spacing) + 1)
            tt = np.linspace(0.0, 1.0, n)
            l_pts.append(piece.p + tt * (piece.q - piece.p))
        else:
            length = piece.radius * (piece.theta_end - piece.theta_start)
            n = max(8, int(length / spacing) + 1)
            l_pts.append(piece.sample(n))
    l_pts = np.concatenate(l_pts)
    if len(l_pts) > 4000:
        l_pts = l_pts[:: len(l_pts) // 4000 + 1]
    z0 = complex(K.cell_centers().mean())
    sigma = mask_radius_about(K, z0)
    cols = []
    kinds = []
    for k in range(0, degree + 1):
        cols.append(((np.concatenate([k_pts, l_pts]) - z0) / sigma) ** k)
        kinds.append(("poly", k))
    for p in pole_sites:
        sp = max(point_mask_distance(p, K), 1e-9)
        for m in range(1, min(degree, POLE_ORDER_CAP) + 1):
            cols.append((sp / (np.concatenate([k_pts, l_pts]) - p)) ** m)
            kinds.append(("pole", p, m))
    A = np.stack(cols, axis=1)
    norms = np.abs(A).max(axis=0)
    A = A / norms
    H = 2.0 * high
    target = np.concatenate([np.zeros(len(k_pts)), np.full(len(l_pts), H)])
    npts, ncols = A.shape
    # variables: re/im of each coefficient plus the sup bound t
    nv = 2 * ncols + 1
    c_obj = np.zeros(nv)
    c_obj[-1] = 1.0
    rows = []
    rhs = []
    Ar, Ai = A.real, A.imag
    for sign in (1.0, -1.0):
        block = np.concatenate([sign * Ar, -sign * Ai, -np.ones((npts, 1))], axis=1)
        rows.append(block)
        rhs.append(sign * target)
    for sign in (1.0, -1.0):
        block = np.concatenate([sign * Ai, sign * Ar, -np.ones((npts, 1))], axis=1)
        rows.append(block)
        rhs.append(np.zeros(npts))
    A_ub = np.concatenate(rows, axis=0)
    b_ub = np.concatenate(rhs)
    bounds = [(None, None)] * (nv - 1) + [(0, None)]
    res = linprog(c_obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return None
    coef = (res.x[:ncols] + 1j * res.x[ncols : 2 * ncols]) / norms
    poly = []
    poles: dict[complex, list] = {}
    for cval, kind in zip(coef, kinds):
        if abs(cval) == 0.0:
            continue
        if kind[0] == "poly":
            poly.append((kind[1], complex(cval)))
        else:
            _, p, m = kind
            sp = max(point_mask_distance(p, K), 1e-9)
            poles.setdefault(p, []).append((m, complex(cval * sp**m)))
    pole_blocks = []
    atts = []
    for p, terms in poles.items():
        order = max(m for m, _ in terms)
        cs = [0j] * order
        for m, cval in terms:
            cs[m - 1] = cval
        pole_blocks.append((p, tuple(cs)))
        atts.append(attestations[pole_sites.index(p)])
    return RationalFunction(tuple(pole_blocks), tuple(poly), z0, sigma, tuple(atts))


# -- stage synthesis -------------------------------------------------------------------


@dataclass(frozen=True)
class SynthesisStage:
    n: int
    fn: RationalFunction
    low: float
    high: float
    certificate: FitCertificate


@dataclass(frozen=True)
class SynthesizedFunction:
    """Partial sums f_k = sum of certified stage functions."""

    stages: tuple[SynthesisStage, ...]
    tail_certificates: tuple[dict, ...] = ()

    def evaluate(self, z, upto: int | None = None):
        arr = isinstance(z, np.ndarray)
        zz = z if arr else np.array([_cpx(z)])
        out = np.zeros(zz.shape, dtype=complex)
        for st in self.stages[: upto if upto is not None else len(self.stages)]:
            out = out + evaluate(st.fn, zz)
        return out if arr else complex(out[0])

    def __call__(self, z):
        return self.evaluate(z)


def synthesize(stage_inputs, spacing: float | None = None) -> SynthesizedFunction:
    """Recursive stage fitting with the displayed budgets.

    stage_inputs: list of (K_n, L_pieces, pole_plan) triples, pole_plan a list
    of (site, attested) pairs.  Stage n is fitted with low = 2^-n and
    high = sum_{j<n} certified-max of R_j over L_n, plus n; the recorded
    certificates cover both displayed bounds, the telescoping property and
    the lower-bound persistence of the deepest partial sum.
    """
    stages: list[SynthesisStage] = []
    for idx, (K_n, pieces, pole_plan) in enumerate(stage_inputs, start=1):
        low = 2.0 ** (-idx)
        sp = spacing if spacing is not None else K_n.resolution / 2
        running = 0.0
        for st in stages:
            running += max_on_pieces_upper(st.fn, pieces, sp)
        high = running + idx
        sites = [p for p, _ in pole_plan]
        atts = [a for _, a in pole_plan]
        R, cert = fit_two_level_rational(
            K_n, pieces, sites, low, high, attestations=atts, spacing=sp
        )
        stages.append(SynthesisStage(n=idx, fn=R, low=low, high=high, certificate=cert))
    # tail certificates: evaluated bounds for the deepest partial sum
    tails = []
    kmax = len(stages)
    f = SynthesizedFunction(tuple(stages))
    for idx, (K_n, pieces, _) in enumerate(stage_inputs, start=1):
        entry = {"n": idx}
        if pieces:
            pts = _sample_pieces(pieces, stage_inputs[idx - 1][0].resolution / 2)
            vals_k = np.abs(f.evaluate(pts, upto=kmax))
            entry["min_abs_f_on_L"] = float(vals_k.min())
            entry["bound"] = idx - 2.0 ** (-idx)
            entry["tail_ok"] = bool(vals_k.min() > idx - 2.0 ** (-idx))
        else:
            entry["tail_ok"] = True
        tails.append(entry)
    return SynthesizedFunction(tuple(stages), tuple(tails))


def _sample_pieces(pieces, spacing):
    pts = []
    for piece in pieces:
        if isinstance(piece, Segment):
            n = max(2, int(piece.length() / spacing) + 1)
            ts = np.linspace(0.0, 1.0, n)
            pts.append(piece.p + ts * (piece.q - piece.p))
        else:
            length = piece.radius * (piece.theta_end - piece.theta_start)
            n = max(8, int(length / spacing) + 1)
            pts.append(piece.sample(n))
    return np.concatenate(pts)


# -- singularity classification ---------------------------------------------------------


@dataclass(frozen=True)
class SingularityVerdict:
    point: complex
    kind: str  # removable | pole | essential-unresolved
    extension_value: complex | None
    evidence: dict = field(repr=False)


def classify_singularity(
    f,
    a,
    patch: FinelyOpenPatch,
    ladder_depth: int = 12,
    samples: int = 4096,
) -> SingularityVerdict:
    """Boundedness scan over a ladder of certified circles around `a`.

    A bounded scan yields `removable` with the circle mean of the smallest
    certified circle as extension value (mean value property); a monotone
    blow-up along the ladder yields `pole`; anything else is left unresolved
    (never produced by rational inputs).
    """
    a = _cpx(a)
    from .potential import admissible_circle_constant

    c0 = admissible_circle_constant(patch, a)
    if not math.isfinite(c0):
        raise ScanFailed("patch complement occupies all small radii")
    C = max(2.0, 1.1 * c0)
    maxima = []
    radii = []
    th = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    ring = np.exp(1j * th)
    smallest_vals = None
    for k in range(1, ladder_depth + 1):
        try:
            t = find_good_circle(patch, a, C, k, samples=samples)
        except Exception:
            continue
        pts = a + t * ring
        sites = _pole_sites(f)
        if any(np.abs(pts - p).min() <= 1e-9 for p in sites):
            continue
        vals = _eval_any(f, pts)
        maxima.append(float(np.abs(vals).max()))
        radii.append(t)
        smallest_vals = vals
    if len(maxima) < 3:
        raise ScanFailed(f"only {len(maxima)} certified circles in {ladder_depth} rungs")
    evidence = {"radii": radii, "maxima": maxima, "C": C}
    first, last = maxima[0], maxima[-1]
    if last > 50.0 * (first + 1.0) and maxima[-1] >= maxima[-2] >= maxima[-3]:
        return SingularityVerdict(a, "pole", None, evidence)
    if last <= 2.0 * (min(maxima) + 1.0):
        ext = complex(np.mean(smallest_vals))
        return SingularityVerdict(a, "removable", ext, evidence)
    return SingularityVerdict(a, "essential-unresolved", None, evidence)
