"""2D geometry primitives: angles, polylines, polygons, oriented boxes, rays."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    # remainder() lands in [-pi, pi]; fold the open end onto +pi
    if r <= -math.pi:
        return math.pi
    return r


def unit(angle: float) -> tuple[float, float]:
    return math.cos(angle), math.sin(angle)


# ---------------------------------------------------------------------------
# polylines
# ---------------------------------------------------------------------------

class Polyline:
    """A cached polyline supporting arc-length lookup and point projection."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("polyline needs at least two 2D points")
        self.pts = pts
        self.seg = pts[1:] - pts[:-1]
        self.seg_len = np.hypot(self.seg[:, 0], self.seg[:, 1])
        if np.any(self.seg_len < 1e-12):
            keep = self.seg_len >= 1e-12
            # drop duplicate vertices; keep first point
            pts = np.vstack([pts[:1], pts[1:][keep]])
            self.pts = pts
            self.seg = pts[1:] - pts[:-1]
            self.seg_len = np.hypot(self.seg[:, 0], self.seg[:, 1])
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.length = float(self.cum[-1])
        self._len2 = self.seg_len ** 2

    def point_at(self, s: float) -> tuple[float, float, float]:
        """Point and tangent angle at arc length ``s`` (clamped to the ends)."""
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right") - 1)
        i = min(max(i, 0), len(self.seg) - 1)
        t = (s - self.cum[i]) / self.seg_len[i]
        p = self.pts[i] + t * self.seg[i]
        ang = math.atan2(self.seg[i, 1], self.seg[i, 0])
        return float(p[0]), float(p[1]), ang

    def project(self, x: float, y: float) -> tuple[float, float, float, float]:
        """Project a point: returns (arc_s, signed_lateral, tangent_angle, distance).

        Lateral is positive to the left of the direction of travel.
        """
        p = np.array([x, y])
        d = p - self.pts[:-1]
        t = np.clip((d[:, 0] * self.seg[:, 0] + d[:, 1] * self.seg[:, 1]) / self._len2, 0.0, 1.0)
        proj = self.pts[:-1] + t[:, None] * self.seg
        dx = p[0] - proj[:, 0]
        dy = p[1] - proj[:, 1]
        dist2 = dx * dx + dy * dy
        i = int(np.argmin(dist2))
        s = float(self.cum[i] + t[i] * self.seg_len[i])
        tx, ty = self.seg[i] / self.seg_len[i]
        lat = float(tx * dy[i] - ty * dx[i])
        return s, lat, math.atan2(ty, tx), float(math.sqrt(dist2[i]))

    def min_distance(self, points, below: float | None = None) -> float:
        """Smallest distance from any of ``points`` (N,2) to the polyline.

        With ``below`` set, returns early once any distance drops under it.
        """
        q = np.asarray(points, dtype=float)
        best = math.inf
        for row in q:
            _, _, _, d = self.project(row[0], row[1])
            if d < best:
                best = d
                if below is not None and best < below:
                    return best
        return best


def resample_polyline(points, spacing: float) -> np.ndarray:
    """Resample a polyline at roughly uniform arc-length spacing, keeping both ends."""
    line = Polyline(points)
    n = max(2, int(math.ceil(line.length / spacing)) + 1)
    ss = np.linspace(0.0, line.length, n)
    out = np.array([line.point_at(s)[:2] for s in ss])
    return out


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------

def polygon_segments(poly: np.ndarray) -> np.ndarray:
    """Closed outline of a polygon as an (N, 2, 2) segment array."""
    pts = np.asarray(poly, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    return np.stack([pts, nxt], axis=1)


def point_in_polygon(x: float, y: float, poly: np.ndarray, eps: float = 1e-9) -> bool:
    """Even-odd containment test; points on the boundary count as inside."""
    pts = np.asarray(poly, dtype=float)
    n = len(pts)
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = pts[i]
        xj, yj = pts[j]
        # boundary check for the edge (j -> i)
        ex, ey = xi - xj, yi - yj
        ln2 = ex * ex + ey * ey
        if ln2 > 0:
            t = ((x - xj) * ex + (y - yj) * ey) / ln2
            t = min(max(t, 0.0), 1.0)
            px, py = xj + t * ex, yj + t * ey
            if (x - px) ** 2 + (y - py) ** 2 <= eps * eps:
                return True
        if (yi > y) != (yj > y):
            x_cross = xj + (y - yj) * (xi - xj) / (yi - yj)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def _segs_intersect(p1, p2, p3, p4) -> bool:
    """Proper or improper intersection of segments p1p2 and p3p4."""
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        # scale-relative tolerance: rigid motions jitter collinear points
        scale = (abs(b[0] - a[0]) + abs(b[1] - a[1])) * \
                (abs(c[0] - a[0]) + abs(c[1] - a[1]))
        if abs(v) <= 1e-9 * max(scale, 1e-9):
            return 0
        return 1 if v > 0 else -1

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, p3):
        return True
    if o2 == 0 and on_seg(p1, p2, p4):
        return True
    if o3 == 0 and on_seg(p3, p4, p1):
        return True
    if o4 == 0 and on_seg(p3, p4, p2):
        return True
    return False


def polygon_is_simple(poly: np.ndarray) -> bool:
    """True when no two non-adjacent edges of the closed outline intersect."""
    pts = np.asarray(poly, dtype=float)
    n = len(pts)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = pts[j], pts[(j + 1) % n]
            if _segs_intersect(a1, a2, b1, b2):
                return False
    return True


# ---------------------------------------------------------------------------
# oriented boxes
# ---------------------------------------------------------------------------

def obb_corners(x: float, y: float, heading: float, length: float, width: float) -> np.ndarray:
    """Corners of an oriented box, CCW starting front-left."""
    hl, hw = 0.5 * length, 0.5 * width
    c, s = math.cos(heading), math.sin(heading)
    local = ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))
    return np.array([(x + lx * c - ly * s, y + lx * s + ly * c) for lx, ly in local])


def obb_overlap(ax: float, ay: float, ah: float, al: float, aw: float,
                bx: float, by: float, bh: float, bl: float, bw: float) -> bool:
    """Separating-axis overlap test for two oriented rectangles (4 axes)."""
    dx, dy = bx - ax, by - ay
    ra = 0.5 * math.hypot(al, aw)
    rb = 0.5 * math.hypot(bl, bw)
    if dx * dx + dy * dy > (ra + rb) ** 2:
        return False
    ca, sa = math.cos(ah), math.sin(ah)
    cb, sb = math.cos(bh), math.sin(bh)
    axes = ((ca, sa), (-sa, ca), (cb, sb), (-sb, cb))
    hal, haw = 0.5 * al, 0.5 * aw
    hbl, hbw = 0.5 * bl, 0.5 * bw
    for ux, uy in axes:
        # projection radius of each box onto the axis
        pa = hal * abs(ca * ux + sa * uy) + haw * abs(-sa * ux + ca * uy)
        pb = hbl * abs(cb * ux + sb * uy) + hbw * abs(-sb * ux + cb * uy)
        if abs(dx * ux + dy * uy) > pa + pb:
            return False
    return True


# ---------------------------------------------------------------------------
# rays
# ---------------------------------------------------------------------------

def ray_hits(origin, dirs: np.ndarray, segments: np.ndarray, max_dist: float) -> np.ndarray:
    """Shortest positive hit distance per ray direction against a segment soup.

    ``dirs`` is (R, 2) of unit directions, ``segments`` is (S, 2, 2).
    Rays that miss everything report ``max_dist``.
    """
    if len(segments) == 0:
        return np.full(len(dirs), max_dist)
    o = np.asarray(origin, dtype=float)
    p = segments[:, 0, :]
    e = segments[:, 1, :] - p
    w = p - o
    denom = dirs[:, None, 0] * e[None, :, 1] - dirs[:, None, 1] * e[None, :, 0]
    num_t = w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]
    num_u = w[None, :, 0] * dirs[:, None, 1] - w[None, :, 1] * dirs[:, None, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num_t[None, :] / denom
        u = num_u / denom
    valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= -1e-12) & (u <= 1.0 + 1e-12)
    t = np.where(valid, t, np.inf)
    out = t.min(axis=1)
    return np.minimum(out, max_dist)
