"""Classical ray dynamics: specular tracing, periodic orbits, stability.

Monodromy convention (transverse position, transverse angle): free flight
of length l is [[1, l], [0, 1]]; a bounce is [[-1, 0], [2/(R cos th), -1]]
with R = inf on flat walls.  A retro-hit on a right-angle corner of two
flat walls acts as a single flat bounce.  This convention reproduces the
known closed forms m12(xi) = -2{(2+sqrt2) - xi^2} and
-2{(5+sqrt5) - xi^2} for the two diagonal presets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ARC_CENTER, ARC_RADIUS, QUARTER_STADIUM, Domain

GRAZING_TOL = 1e-12
CORNER_SNAP = 1e-9


class TraceError(RuntimeError):
    pass


# --- boundary pieces -------------------------------------------------------


@dataclass(frozen=True)
class _Wall:
    """Axis-aligned wall segment.  axis is the frozen coordinate."""

    axis: int          # 0: wall at x = c, 1: wall at y = c
    c: float
    lo: float
    hi: float
    normal: tuple[float, float]  # inward


def _walls(domain: Domain) -> list[_Wall]:
    if domain.kind == QUARTER_STADIUM:
        return [
            _Wall(0, 0.0, 0.0, 1.0, (1.0, 0.0)),    # left
            _Wall(1, 1.0, 0.0, 1.0, (0.0, -1.0)),   # top
            _Wall(1, 0.0, 0.0, 2.0, (0.0, 1.0)),    # bottom
        ]
    w, h = domain.width, domain.height
    return [
        _Wall(0, 0.0, 0.0, h, (1.0, 0.0)),
        _Wall(0, w, 0.0, h, (-1.0, 0.0)),
        _Wall(1, 0.0, 0.0, w, (0.0, 1.0)),
        _Wall(1, h, 0.0, w, (0.0, -1.0)),
    ]


def _corners(domain: Domain) -> list[tuple[float, float]]:
    """Right-angle corners where a ray retro-reflects."""
    if domain.kind == QUARTER_STADIUM:
        return [(0.0, 0.0), (0.0, 1.0), (2.0, 0.0)]
    w, h = domain.width, domain.height
    return [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]


@dataclass(frozen=True)
class Hit:
    point: tuple[float, float]
    kind: str            # "wall" | "arc" | "corner"
    cos_inc: float       # cosine of incidence angle w.r.t. local normal
    direction_out: tuple[float, float]


def _intersect_wall(p, d, wall: _Wall) -> float | None:
    a = wall.axis
    if abs(d[a]) < 1e-15:
        return None
    t = (wall.c - p[a]) / d[a]
    if t <= 1e-12:
        return None
    other = p[1 - a] + t * d[1 - a]
    if wall.lo - 1e-12 <= other <= wall.hi + 1e-12:
        return t
    return None


def _intersect_arc(p, d) -> float | None:
    cx, cy = ARC_CENTER
    fx, fy = p[0] - cx, p[1] - cy
    b = fx * d[0] + fy * d[1]
    c = fx * fx + fy * fy - ARC_RADIUS * ARC_RADIUS
    disc = b * b - c
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    for t in (-b - sq, -b + sq):
        if t > 1e-12:
            x, y = p[0] + t * d[0], p[1] + t * d[1]
            if x >= 1.0 - 1e-12 and y >= -1e-12:
                return t
    return None


def _next_hit(domain: Domain, p, d) -> Hit:
    best_t = math.inf
    best = None  # (kind, normal)
    for wall in _walls(domain):
        t = _intersect_wall(p, d, wall)
        if t is not None and t < best_t:
            best_t, best = t, ("wall", wall.normal)
    if domain.kind == QUARTER_STADIUM:
        t = _intersect_arc(p, d)
        if t is not None and t < best_t - 1e-12:
            best_t, best = t, ("arc", None)
    if best is None or not math.isfinite(best_t):
        raise TraceError("ray escaped the domain (no boundary intersection)")
    q = (p[0] + best_t * d[0], p[1] + best_t * d[1])

    for corner in _corners(domain):
        if math.hypot(q[0] - corner[0], q[1] - corner[1]) < CORNER_SNAP:
            return Hit(corner, "corner", 1.0, (-d[0], -d[1]))

    kind, normal = best
    if kind == "arc":
        nx_, ny_ = (ARC_CENTER[0] - q[0]) / ARC_RADIUS, (ARC_CENTER[1] - q[1]) / ARC_RADIUS
        normal = (nx_, ny_)
    cos_inc = -(d[0] * normal[0] + d[1] * normal[1])
    if abs(cos_inc) < GRAZING_TOL:
        raise TraceError("grazing ray")
    dn = d[0] * normal[0] + d[1] * normal[1]
    d_out = (d[0] - 2.0 * dn * normal[0], d[1] - 2.0 * dn * normal[1])
    return Hit(q, kind, abs(cos_inc), d_out)


def trace(domain: Domain, start: tuple[float, float], angle: float,
          n_bounces: int) -> list[tuple[float, float]]:
    """Specular polyline [start, hit1, ..., hit_n]."""
    if not domain.strictly_inside(*start):
        raise TraceError("start point must lie strictly inside the domain")
    p = (float(start[0]), float(start[1]))
    d = (math.cos(angle), math.sin(angle))
    pts = [p]
    for _ in range(n_bounces):
        hit = _next_hit(domain, p, d)
        pts.append(hit.point)
        p, d = hit.point, hit.direction_out
    return pts


# --- periodic orbits -------------------------------------------------------


@dataclass(frozen=True)
class OrbitVertex:
    point: tuple[float, float]
    kind: str
    cos_inc: float


@dataclass
class PeriodicOrbit:
    """Closed specular orbit with stability data.

    vertices are the boundary hits of one primitive period in traversal
    order; xi is arclength measured from vertices[0] along the orbit.
    """

    domain: Domain
    start: tuple[float, float]
    angle: float
    vertices: list[OrbitVertex]
    length: float
    mu1: float = 1.0
    mu2: float = 1.0
    nu: int = 0
    u_geometric: float = 0.0
    label: str | None = None
    _cum: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        pts = [v.point for v in self.vertices]
        segs = []
        for i in range(len(pts)):
            a, b = pts[i], pts[(i + 1) % len(pts)]
            segs.append(math.hypot(b[0] - a[0], b[1] - a[1]))
        self._seg_lengths = np.asarray(segs)
        self._cum = np.concatenate([[0.0], np.cumsum(segs)])

    @property
    def n_hits(self) -> int:
        return len(self.vertices)

    @property
    def hyperbolic(self) -> bool:
        return self.mu1 > 1.0 + 1e-9

    @property
    def vertex_arclengths(self) -> np.ndarray:
        return self._cum[:-1]

    def locate(self, xi: float) -> tuple[int, float]:
        """Segment index and offset from its first vertex, xi mod length."""
        s = float(xi) % self.length
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(i, len(self.vertices) - 1)
        return i, s - self._cum[i]

    def point_at(self, xi: float) -> tuple[float, float]:
        i, s = self.locate(xi)
        a = self.vertices[i].point
        b = self.vertices[(i + 1) % len(self.vertices)].point
        seg = self._seg_lengths[i]
        f = s / seg
        return (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]))


@dataclass(frozen=True)
class Monodromy:
    """Linearized return map at arclength xi along a periodic orbit."""

    m11: float
    m12: float
    m21: float
    m22: float
    mu1: float
    mu2: float

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    @property
    def d_c(self) -> float:
        """Amplitude factor 1/m12; diverges at conjugate points."""
        return 1.0 / self.m12

    def d_n(self, n: int) -> float:
        """Repetition-n amplitude: D_1 (mu1-mu2)/(mu1^n - mu2^n)."""
        if n == 1:
            return self.d_c
        if abs(self.mu1 - self.mu2) < 1e-12:
            return self.d_c / n
        return self.d_c * (self.mu1 - self.mu2) / (self.mu1 ** n - self.mu2 ** n)

    def w_n(self, n: int) -> float:
        """Transverse curvature: D_n (mu1^n + mu2^n - 2)."""
        return self.d_n(n) * (self.mu1 ** n + self.mu2 ** n - 2.0)


def _flight(l: float) -> np.ndarray:
    return np.array([[1.0, l], [0.0, 1.0]])


def _bounce(v: OrbitVertex) -> np.ndarray:
    kappa = 2.0 / (ARC_RADIUS * v.cos_inc) if v.kind == "arc" else 0.0
    return np.array([[-1.0, 0.0], [kappa, -1.0]])


def _monodromy_matrix(orbit: PeriodicOrbit, xi: float) -> np.ndarray:
    """Compose flights and bounces once around the orbit starting at xi.

    Traversal order from offset s on segment i: partial flight to vertex
    i+1, then for each k the bounce at vertex i+k followed by its outgoing
    flight, closing with the bounce at vertex i and the partial flight s.
    """
    i, s = orbit.locate(xi)
    n = len(orbit.vertices)
    M = _flight(orbit._seg_lengths[i] - s)
    for k in range(1, n + 1):
        j = (i + k) % n
        M = _bounce(orbit.vertices[j]) @ M
        if k < n:
            M = _flight(orbit._seg_lengths[j]) @ M
    return _flight(s) @ M


def monodromy_at(orbit: PeriodicOrbit, xi: float) -> Monodromy:
    if not 0.0 <= xi < orbit.length + 1e-12:
        raise ValueError("xi outside [0, L)")
    M = _monodromy_matrix(orbit, xi)
    return Monodromy(M[0, 0], M[0, 1], M[1, 0], M[1, 1], orbit.mu1, orbit.mu2)


def _stability(orbit: PeriodicOrbit) -> tuple[float, float]:
    tr = _monodromy_matrix(orbit, 0.0).trace()
    half = abs(tr) / 2.0
    if half <= 1.0 + 1e-12:
        return 1.0, 1.0
    mu1 = half + math.sqrt(half * half - 1.0)
    return mu1, 1.0 / mu1


def find_periodic_orbit(domain: Domain, start: tuple[float, float], angle: float,
                        tol: float = 1e-9, max_bounces: int = 64,
                        label: str | None = None,
                        xi_origin: tuple[float, float] | None = None) -> PeriodicOrbit:
    """Trace until the ray re-passes the launch point with the launch direction."""
    if not domain.strictly_inside(*start):
        raise TraceError("start point must lie strictly inside the domain")
    p = (float(start[0]), float(start[1]))
    d0 = (math.cos(angle), math.sin(angle))
    d = d0
    hits: list[Hit] = []
    total = 0.0
    for _ in range(max_bounces):
        hit = _next_hit(domain, p, d)
        seg = math.hypot(hit.point[0] - p[0], hit.point[1] - p[1])
        # does this segment pass through the launch point heading along d0?
        if hits and abs(d[0] - d0[0]) < tol and abs(d[1] - d0[1]) < tol:
            proj = (start[0] - p[0]) * d[0] + (start[1] - p[1]) * d[1]
            if -tol <= proj <= seg + tol:
                perp = abs((start[0] - p[0]) * d[1] - (start[1] - p[1]) * d[0])
                if perp < tol:
                    length = total + proj
                    return _finish_orbit(domain, start, angle, hits, length,
                                         label, xi_origin)
        hits.append(hit)
        total += seg
        p, d = hit.point, hit.direction_out
    raise TraceError("not periodic within bounce budget")


def _finish_orbit(domain, start, angle, hits, length, label, xi_origin) -> PeriodicOrbit:
    verts = [OrbitVertex(h.point, h.kind, h.cos_inc) for h in hits]
    if xi_origin is not None:
        dists = [math.hypot(v.point[0] - xi_origin[0], v.point[1] - xi_origin[1])
                 for v in verts]
        k = int(np.argmin(dists))
        if dists[k] > 1e-6:
            raise TraceError("xi origin is not a vertex of the traced orbit")
        verts = verts[k:] + verts[:k]
    orbit = PeriodicOrbit(domain=domain, start=start, angle=angle,
                          vertices=verts, length=length, label=label)
    mu1, mu2 = _stability(orbit)
    orbit.mu1, orbit.mu2 = mu1, mu2
    orbit.u_geometric = math.log(mu1) / length
    orbit.nu = len(conjugate_points(orbit))
    return orbit


def conjugate_points(orbit: PeriodicOrbit, n_scan: int = 10_000) -> list[float]:
    """Roots of m12(xi) = 0 over one period via sign-change bisection."""
    xis = np.linspace(0.0, orbit.length, n_scan + 1)
    vals = np.array([_monodromy_matrix(orbit, min(x, orbit.length * (1 - 1e-15)))[0, 1]
                     for x in xis])
    roots: list[float] = []
    for i in range(n_scan):
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(float(xis[i]))
            continue
        if fa * fb < 0.0:
            lo, hi, flo = xis[i], xis[i + 1], fa
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = _monodromy_matrix(orbit, mid)[0, 1]
                if fm == 0.0:
                    lo = hi = mid
                    break
                if flo * fm < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append(0.5 * (lo + hi))
    # fold near-L roots onto 0 and merge duplicates
    out: list[float] = []
    for r in sorted(r % orbit.length for r in roots):
        if not out or r - out[-1] > 1e-9:
            out.append(r)
    return out


@dataclass(frozen=True)
class LyapunovData:
    u_geometric: float
    marginal: bool

    def rate(self, p0: float) -> float:
        """Lyapunov rate lambda(|p0|) = u |p0| (natural units, m = 1)."""
        return self.u_geometric * p0


def lyapunov(orbit: PeriodicOrbit) -> LyapunovData:
    """Geometric exponent u = ln(mu1)/L.

    Marginal orbits (bouncing-ball family) return u = 0 with the marginal
    flag set; the spectral-analysis side then substitutes the mean level
    spacing for the Lorentzian width.
    """
    if orbit.hyperbolic:
        return LyapunovData(orbit.u_geometric, False)
    return LyapunovData(0.0, True)


# --- presets ---------------------------------------------------------------

SQRT3 = math.sqrt(3.0)

PRESETS = {
    "No7": {"start": (0.5, 0.5), "angle": -math.pi / 4, "xi_origin": (0.0, 1.0)},
    "No12": {"start": (0.5, SQRT3 / 6), "angle": math.pi / 6, "xi_origin": (0.0, 0.0)},
    "No14": {"start": (0.25, 0.5), "angle": math.atan(2.0), "xi_origin": (0.0, 0.0)},
    "BouncingBall": {"start": (0.5, SQRT3 / 4), "angle": math.pi / 2,
                     "xi_origin": (0.5, 0.0)},
}


def preset_orbit(name: str, domain: Domain | None = None) -> PeriodicOrbit:
    if name not in PRESETS:
        raise KeyError(f"unknown orbit preset {name!r}; have {sorted(PRESETS)}")
    if domain is None:
        domain = Domain.quarter_stadium()
    spec = PRESETS[name]
    return find_periodic_orbit(domain, spec["start"], spec["angle"],
                               label=name, xi_origin=spec["xi_origin"])


# --- orbit JSON ------------------------------------------------------------


def orbit_to_dict(orbit: PeriodicOrbit) -> dict:
    return {
        "label": orbit.label,
        "start": list(orbit.start),
        "angle": orbit.angle,
        "vertices": [list(v.point) for v in orbit.vertices],
        "vertex_kinds": [v.kind for v in orbit.vertices],
        "L": orbit.length,
        "N_C": orbit.n_hits,
        "mu1": orbit.mu1,
        "nu": orbit.nu,
        "u_geometric": orbit.u_geometric,
        "xi_origin": list(orbit.vertices[0].point),
        "conjugate_points": conjugate_points(orbit),
    }


def write_orbit(path, orbit: PeriodicOrbit) -> None:
    with open(path, "w") as f:
        json.dump(orbit_to_dict(orbit), f, indent=2)
        f.write("\n")


def read_orbit(path) -> dict:
    with open(path) as f:
        return json.load(f)
