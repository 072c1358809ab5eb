"""Cracked planar bodies, crack-conforming meshes and crack-set measures.

The crack is an open polyline. Endpoints lying on the outer boundary are
*mouths*; the other endpoints are *tips*. Meshes conform to the crack and
carry two copies of every crack node except the tips, so that the
displacement may jump across the crack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import triangle as tr
from scipy.spatial import cKDTree

from .velocity import VelocityField, PlateauField, check_tangency

BOUNDARY_MARKER = 1
CRACK_MARKER0 = 10


class GeometryError(ValueError):
    """Raised for degenerate geometry (self-intersections, grazing cracks, ...)."""


# ---------------------------------------------------------------------------
# elementary geometry


def polygon_signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polyline_length(poly) -> float:
    p = np.asarray(poly, dtype=float)
    if len(p) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def point_polyline_distance(points, poly, closed=False) -> np.ndarray:
    """Distance from each point to a polyline (or closed polygon boundary)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = np.asarray(poly, dtype=float)
    if closed:
        p = np.vstack([p, p[:1]])
    if len(p) == 1:
        return np.linalg.norm(pts - p[0], axis=1)
    a, b = p[:-1], p[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    rel = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nsj,sj->ns", rel, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    return np.linalg.norm(pts[:, None, :] - proj, axis=2).min(axis=1)


def _segments_intersect(p1, p2, q1, q2, eps):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < -eps) and (d3 * d4 < -eps)


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd rule point-in-polygon test (boundary points are unspecified)."""
    pts = np.atleast_2d(points)
    p = np.asarray(poly, dtype=float)
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = p[:, 0][None], p[:, 1][None]
    x2, y2 = np.roll(p[:, 0], -1)[None], np.roll(p[:, 1], -1)[None]
    cond = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    return np.logical_xor.reduce(cond & (x < xint), axis=1)


# ---------------------------------------------------------------------------
# domain


@dataclass(frozen=True)
class CrackedDomain:
    """Polygonal body with an embedded polyline crack.

    ``outer`` must be a simple, counter-clockwise polygon. ``crack`` may be
    empty. Crack endpoints on the outer boundary are mouths, not tips.
    """

    outer: np.ndarray
    crack: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        outer = np.array(self.outer, dtype=float)
        crack = np.array(self.crack, dtype=float).reshape(-1, 2)
        outer.setflags(write=False)
        crack.setflags(write=False)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "crack", crack)
        self._validate()

    @property
    def diameter(self) -> float:
        d = self.outer[:, None, :] - self.outer[None, :, :]
        return float(np.linalg.norm(d, axis=2).max())

    @property
    def tol(self) -> float:
        return 1e-10 * self.diameter

    def boundary_distance(self, points) -> np.ndarray:
        return point_polyline_distance(points, self.outer, closed=True)

    def contains(self, points) -> np.ndarray:
        return points_in_polygon(points, self.outer)

    @cached_property
    def _endpoint_on_boundary(self):
        if len(self.crack) < 2:
            return (False, False)
        d = self.boundary_distance(self.crack[[0, -1]])
        return (bool(d[0] <= self.tol), bool(d[1] <= self.tol))

    @property
    def tips(self) -> np.ndarray:
        """Crack endpoints in the interior of the body."""
        if len(self.crack) < 2:
            return np.zeros((0, 2))
        on = self._endpoint_on_boundary
        return np.array([self.crack[i] for i, o in zip((0, -1), on) if not o]).reshape(-1, 2)

    @property
    def mouths(self) -> np.ndarray:
        if len(self.crack) < 2:
            return np.zeros((0, 2))
        on = self._endpoint_on_boundary
        return np.array([self.crack[i] for i, o in zip((0, -1), on) if o]).reshape(-1, 2)

    @property
    def crack_length(self) -> float:
        return polyline_length(self.crack)

    def with_crack(self, crack) -> "CrackedDomain":
        return CrackedDomain(self.outer, crack)

    def _validate(self):
        outer, crack = self.outer, self.crack
        if len(outer) < 3:
            raise GeometryError("outer boundary needs at least 3 vertices")
        if polygon_signed_area(outer) <= 0:
            raise GeometryError("outer boundary must be positively (counter-clockwise) oriented")
        n = len(outer)
        eps = 1e-14 * self.diameter**2
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_intersect(outer[i], outer[(i + 1) % n], outer[j], outer[(j + 1) % n], eps):
                    raise GeometryError(f"outer boundary self-intersects (edges {i} and {j})")
        if len(crack) == 0:
            return
        if len(crack) == 1:
            raise GeometryError("a crack needs at least two vertices")
        seg = np.diff(crack, axis=0)
        if np.any(np.linalg.norm(seg, axis=1) <= self.tol):
            raise GeometryError("crack has a zero-length segment")
        m = len(crack) - 1
        for i in range(m):
            for j in range(i + 2, m):
                if _segments_intersect(crack[i], crack[i + 1], crack[j], crack[j + 1], eps):
                    raise GeometryError(f"crack self-intersects (segments {i} and {j})")
        for i in range(1, m):
            t0 = seg[i - 1] / np.linalg.norm(seg[i - 1])
            t1 = seg[i] / np.linalg.norm(seg[i])
            if np.dot(t0, t1) < -1 + 1e-9:
                raise GeometryError(f"crack folds back on itself at vertex {i}")
        dist = self.boundary_distance(crack)
        inside = self.contains(crack)
        on = self._endpoint_on_boundary
        for i, p in enumerate(crack):
            endpoint_on = (i == 0 and on[0]) or (i == len(crack) - 1 and on[1])
            if endpoint_on:
                continue
            if dist[i] <= self.tol or not inside[i]:
                raise GeometryError(f"crack vertex {i} at {tuple(p)} is not interior to the body")
        # midpoints must be interior as well (no crack running along or across the boundary)
        mids = 0.5 * (crack[:-1] + crack[1:])
        if np.any(self.boundary_distance(mids) <= self.tol) or not np.all(self.contains(mids)):
            raise GeometryError("crack segment leaves the body or runs along its boundary")
        for end, o in zip((0, -1), on):
            if not o:
                continue
            p = crack[end]
            t = seg[0] if end == 0 else -seg[-1]
            t = t / np.linalg.norm(t)
            k = int(np.argmin([point_polyline_distance(p, np.vstack([outer[i], outer[(i + 1) % n]]))[0]
                               for i in range(n)]))
            e = outer[(k + 1) % n] - outer[k]
            e = e / np.linalg.norm(e)
            if abs(e[0] * t[1] - e[1] * t[0]) < 1e-3:
                raise GeometryError(f"crack meets the boundary non-transversally at {tuple(p)}")


# ---------------------------------------------------------------------------
# mesh


@dataclass(frozen=True)
class Mesh:
    """Conforming P1 triangulation of ``domain.outer`` minus the crack.

    Attributes
    ----------
    nodes : (N, 2) array
    triangles : (M, 3) int array, counter-clockwise
    seam_pairs : (S, 2) int array
        ``(plus, minus)`` copies of interior crack nodes.
    mouth_pairs : (Q, 2) int array
        ``(plus, minus)`` copies of crack nodes on the outer boundary.
        Both copies are boundary nodes.
    boundary_nodes : (B,) int array
    boundary_edges : (E, 2) int array
    tip_nodes : (T,) int array
        Crack-tip nodes (single copy).
    crack_path : (P,) int array
        Plus-side node indices along the crack, tips and mouths included.
    crack_path_minus : (P,) int array
        Same for the minus side (tips coincide).
    mesh_size_h : float
    domain : CrackedDomain
    """

    nodes: np.ndarray
    triangles: np.ndarray
    seam_pairs: np.ndarray
    mouth_pairs: np.ndarray
    boundary_nodes: np.ndarray
    boundary_edges: np.ndarray
    tip_nodes: np.ndarray
    crack_path: np.ndarray
    crack_path_minus: np.ndarray
    mesh_size_h: float
    domain: CrackedDomain

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """``(M, 3, 2)`` gradients of the P1 hat functions on each element."""
        p = self.nodes[self.triangles]
        x, y = p[..., 0], p[..., 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        return np.stack([b, c], axis=2) / (2.0 * self.areas)[:, None, None]

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def element_sizes(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2)
        return e.max(axis=1)

    @cached_property
    def crack_nodes(self) -> np.ndarray:
        """All node indices on the crack (both copies, tips, and mouths)."""
        return np.unique(np.concatenate([self.crack_path, self.crack_path_minus]))

    @property
    def tips(self) -> np.ndarray:
        return self.nodes[self.tip_nodes]

    def crack_polyline(self) -> np.ndarray:
        return self.nodes[self.crack_path].copy()

    @cached_property
    def _centroid_tree(self):
        return cKDTree(self.centroids)

    def barycentric(self, elements, points) -> np.ndarray:
        """Barycentric coordinates of ``points`` in the given elements."""
        p = self.nodes[self.triangles[elements]]
        T = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        lam = np.linalg.solve(T, (np.asarray(points) - p[:, 0])[..., None])[..., 0]
        return np.column_stack([1.0 - lam.sum(axis=1), lam])

    def locate(self, points, k: int = 16):
        """Element containing each point and its barycentric coordinates.

        Points outside the mesh get the element with the least negative
        barycentric coordinate (nearest-element extrapolation).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = min(k, self.n_triangles)
        _, cand = self._centroid_tree.query(pts, k=k)
        cand = cand.reshape(len(pts), k)
        best = np.full(len(pts), -1)
        best_score = np.full(len(pts), -np.inf)
        for j in range(k):
            lam = self.barycentric(cand[:, j], pts)
            score = lam.min(axis=1)
            better = score > best_score + 1e-14
            best[better] = cand[better, j]
            best_score[better] = score[better]
        return best, self.barycentric(best, pts)

    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def sample_points(self, rel: float = 1e-9) -> np.ndarray:
        """Node positions, with crack nodes nudged into an incident element.

        Evaluating a discontinuous closed-form field at these points picks
        the value on the correct side of the crack for each node copy.
        Nodes off the crack are returned unchanged.
        """
        pts = self.nodes.copy()
        k = self.crack_nodes
        if len(k) == 0:
            return pts
        owner = np.full(self.n_nodes, -1)
        owner[self.triangles.ravel()] = np.repeat(np.arange(self.n_triangles), 3)
        d = self.centroids[owner[k]] - self.nodes[k]
        pts[k] += rel * d / np.linalg.norm(d, axis=1)[:, None] * self.mesh_size_h
        return pts

    def with_nodes(self, nodes) -> "Mesh":
        """Same topology on moved nodes; raises if an element inverts."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.shape != self.nodes.shape:
            raise ValueError("node array shape mismatch")
        m = Mesh(nodes, self.triangles, self.seam_pairs, self.mouth_pairs, self.boundary_nodes,
                 self.boundary_edges, self.tip_nodes, self.crack_path, self.crack_path_minus,
                 self.mesh_size_h, self.domain.with_crack(nodes[self.crack_path])
                 if len(self.crack_path) else self.domain)
        bad = np.flatnonzero(m.areas <= 0)
        if len(bad):
            raise GeometryError(f"moved mesh has {len(bad)} inverted elements (first at "
                                f"{tuple(m.centroids[bad[0]])})")
        return m

    def check(self) -> None:
        """Raise :class:`GeometryError` if a structural invariant fails."""
        if np.any(self.areas <= 0):
            raise GeometryError("non-positive element area")
        seam = set(self.seam_pairs.ravel().tolist())
        if seam & set(self.boundary_nodes.tolist()):
            raise GeometryError("seam nodes on the outer boundary")
        if set(self.tip_nodes.tolist()) & seam:
            raise GeometryError("tip nodes must not be duplicated")
        faces = _edge_incidence(self.triangles)
        plus = _path_edges(self.crack_path)
        minus = _path_edges(self.crack_path_minus)
        for e in plus + minus:
            if faces.get(e, 0) != 1:
                raise GeometryError(f"crack face edge {e} is not a free edge")
        for e in plus:
            if e in set(minus):
                raise GeometryError("plus and minus faces share an edge")

    def dump(self, path) -> None:
        """Write a plain-text node/element listing.

        Lines are ``N index x y seam_flag`` for nodes (flag: 0 bulk, 1 plus
        face, -1 minus face, 2 tip, 3 boundary) and ``T index a b c`` for
        triangles.
        """
        flag = np.zeros(self.n_nodes, dtype=int)
        flag[self.boundary_nodes] = 3
        if len(self.crack_path):
            flag[self.crack_path] = np.where(flag[self.crack_path] == 3, 3, 1)
            minus_only = np.setdiff1d(self.crack_path_minus, self.crack_path)
            flag[minus_only] = np.where(flag[minus_only] == 3, 3, -1)
        flag[self.tip_nodes] = 2
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# nodes {self.n_nodes} triangles {self.n_triangles} h {self.mesh_size_h!r}\n")
            for i, (x, y) in enumerate(self.nodes):
                fh.write(f"N {i} {x!r} {y!r} {flag[i]}\n")
            for i, (a, b, c) in enumerate(self.triangles):
                fh.write(f"T {i} {a} {b} {c}\n")


def _path_edges(path):
    return [tuple(sorted((int(a), int(b)))) for a, b in zip(path[:-1], path[1:])]


def _edge_incidence(triangles):
    e = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return {tuple(map(int, k)): int(c) for k, c in zip(uniq, counts)}


def _resample(a, b, h):
    n = max(1, int(np.ceil(np.linalg.norm(b - a) / h - 1e-9)))
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return a + t * (b - a)


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def build_mesh(domain: CrackedDomain, h: float, active_segments=None, min_angle: float = 30.0,
               tip_refinement: tuple[float, float] | None = None) -> Mesh:
    """Triangulate ``domain`` with target edge length ``h`` and split the crack.

    Parameters
    ----------
    active_segments : iterable of int, optional
        Indices of crack polyline segments that are actually open. The other
        segments are still mesh edges but carry no displacement jump, so two
        cracks sharing a path can be compared on one triangulation. Must be
        a contiguous run. Defaults to all segments.
    tip_refinement : (radius, h_tip), optional
        Grade the mesh to edge length ``h_tip`` within ``radius`` of each tip.
    """
    if not h > 0:
        raise GeometryError("mesh size must be positive")
    outer, crack = domain.outer, domain.crack
    nseg = max(len(crack) - 1, 0)
    active = sorted(range(nseg) if active_segments is None else set(active_segments))
    if active and active != list(range(active[0], active[-1] + 1)):
        raise GeometryError("active crack segments must be contiguous")

    # boundary loop with crack mouths inserted
    loop = [outer[0]]
    n = len(outer)
    mouths = domain.mouths
    for i in range(n):
        a, b = outer[i], outer[(i + 1) % n]
        stops = []
        for m in mouths:
            if point_polyline_distance(m, np.vstack([a, b]))[0] <= domain.tol:
                t = np.dot(m - a, b - a) / np.dot(b - a, b - a)
                if domain.tol < t * np.linalg.norm(b - a) < np.linalg.norm(b - a) - domain.tol:
                    stops.append((t, m))
        pts = [a] + [m for _, m in sorted(stops, key=lambda s: s[0])] + [b]
        for p, q in zip(pts[:-1], pts[1:]):
            loop.extend(_resample(p, q, h)[1:])
    loop = np.array(loop[:-1])
    verts = [loop]
    segs = [np.stack([np.arange(len(loop)), np.roll(np.arange(len(loop)), -1)], axis=1)]
    marks = [np.full(len(loop), BOUNDARY_MARKER)]

    def vertex_id(p, pool):
        d = np.linalg.norm(pool - p, axis=1)
        k = int(np.argmin(d))
        return k if d[k] <= domain.tol else None

    if nseg:
        allv = loop
        for s in range(nseg):
            pts = _resample(crack[s], crack[s + 1], h)
            ids = []
            for p in pts:
                k = vertex_id(p, allv)
                if k is None:
                    allv = np.vstack([allv, p])
                    k = len(allv) - 1
                ids.append(k)
            segs.append(np.stack([ids[:-1], ids[1:]], axis=1))
            marks.append(np.full(len(ids) - 1, CRACK_MARKER0 + s))
        verts = [allv]
    pslg = {
        "vertices": np.vstack(verts),
        "segments": np.vstack(segs).astype(np.int32),
        "segment_markers": np.concatenate(marks).astype(np.int32)[:, None],
    }
    area = np.sqrt(3.0) / 4.0 * h * h
    opts = f"pq{min_angle:g}a{area:.15f}Q"
    raw = tr.triangulate(pslg, opts)
    if tip_refinement is not None and len(domain.tips):
        radius, h_tip = tip_refinement
        raw = _refine_near(raw, domain.tips, radius, h_tip, h, min_angle)
    return _split_crack(raw, domain, h, active)


def _refine_near(raw, tips, radius, h_tip, h, min_angle):
    for _ in range(int(np.ceil(np.log2(max(h / h_tip, 1.0)))) * 2 + 2):
        p = raw["vertices"][raw["triangles"]]
        c = p.mean(axis=1)
        d = np.min(np.linalg.norm(c[:, None, :] - tips[None], axis=2), axis=1)
        # target edge grows linearly from h_tip at the tip to h at distance radius
        target = np.clip(h_tip + (h - h_tip) * d / radius, h_tip, h)
        max_area = np.sqrt(3.0) / 4.0 * target**2
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        cur = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.all(cur <= 1.05 * max_area):
            break
        raw = dict(raw)
        raw["triangle_max_area"] = np.where(cur > max_area, max_area, -1.0)[:, None]
        raw = tr.triangulate(raw, f"rpq{min_angle:g}aQ")
    return raw


def _split_crack(raw, domain: CrackedDomain, h: float, active) -> Mesh:
    nodes = np.array(raw["vertices"], dtype=float)
    tris = np.array(raw["triangles"], dtype=np.int64)
    p = nodes[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    flip = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    crack = domain.crack
    segs = np.asarray(raw.get("segments", np.zeros((0, 2))), dtype=np.int64)
    smark = np.asarray(raw.get("segment_markers", np.zeros((0, 1)))).ravel()
    active_set = set(active)
    crack_edges = [tuple(e) for e, m in zip(segs, smark)
                   if m >= CRACK_MARKER0 and (m - CRACK_MARKER0) in active_set]

    empty = np.zeros((0, 2), dtype=np.int64)
    if not crack_edges:
        m = Mesh(nodes, tris, empty, empty, *_boundary(tris, set()), np.zeros(0, np.int64),
                 np.zeros(0, np.int64), np.zeros(0, np.int64), float(h), domain)
        return m

    # order the active crack nodes by arclength along the polyline
    seg_len = np.linalg.norm(np.diff(crack, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])

    def arclength(pt):
        a, b = crack[:-1], crack[1:]
        d = b - a
        t = np.clip(np.einsum("ij,ij->i", pt - a, d) / seg_len**2, 0, 1)
        dist = np.linalg.norm(a + t[:, None] * d - pt, axis=1)
        k = int(np.argmin(dist))
        return cum[k] + t[k] * seg_len[k]

    cnodes = sorted({v for e in crack_edges for v in e}, key=lambda v: arclength(nodes[v]))
    path = np.array(cnodes, dtype=np.int64)
    edge_set = {tuple(sorted(e)) for e in crack_edges}
    for a, b in zip(path[:-1], path[1:]):
        if tuple(sorted((int(a), int(b)))) not in edge_set:
            raise GeometryError("crack edges do not form a single chain")

    bdist = domain.boundary_distance(nodes[path[[0, -1]]])
    ends_on_boundary = bdist <= domain.tol
    tip_nodes = [int(path[i]) for i, on in zip((0, -1), ends_on_boundary) if not on]

    # incident triangles per crack node
    incident = {int(v): [] for v in path}
    for t, tri in enumerate(tris):
        for v in tri:
            if int(v) in incident:
                incident[int(v)].append(t)

    new_nodes = [nodes]
    next_id = len(nodes)
    minus_of = {}
    tris = tris.copy()
    for idx, v in enumerate(path):
        v = int(v)
        if v in tip_nodes:
            continue
        inc = incident[v]
        uf = _UnionFind(inc)
        by_edge = {}
        for t in inc:
            for x in tris[t]:
                x = int(x)
                if x == v or tuple(sorted((v, x))) in edge_set:
                    continue
                by_edge.setdefault(x, []).append(t)
        for ts in by_edge.values():
            for t in ts[1:]:
                uf.union(ts[0], t)
        comps = {}
        for t in inc:
            comps.setdefault(uf.find(t), []).append(t)
        if len(comps) != 2:
            raise GeometryError(f"crack node {v} has {len(comps)} sides (expected 2)")
        # plus side: left of the crack direction
        w = int(path[idx + 1]) if idx + 1 < len(path) else int(path[idx - 1])
        sign = 1.0 if idx + 1 < len(path) else -1.0
        plus_root = None
        for t in inc:
            tri = tris[t]
            if w in tri:
                third = [int(x) for x in tri if int(x) not in (v, w)][0]
                d = nodes[w] - nodes[v]
                r = nodes[third] - nodes[v]
                if sign * (d[0] * r[1] - d[1] * r[0]) > 0:
                    plus_root = uf.find(t)
        if plus_root is None:
            raise GeometryError(f"could not orient the crack faces at node {v}")
        minus_tris = [t for root, ts in comps.items() if root != plus_root for t in ts]
        new_nodes.append(nodes[v][None])
        minus_of[v] = next_id
        for t in minus_tris:
            tris[t][tris[t] == v] = next_id
        next_id += 1

    nodes = np.vstack(new_nodes)
    path_minus = np.array([minus_of.get(int(v), int(v)) for v in path], dtype=np.int64)
    face_edges = set(_path_edges(path)) | set(_path_edges(path_minus))
    bnodes, bedges = _boundary(tris, face_edges)
    bset = set(bnodes.tolist())
    seam = [(v, m) for v, m in minus_of.items() if v not in bset]
    mouth = [(v, m) for v, m in minus_of.items() if v in bset]
    mesh = Mesh(nodes, tris, np.array(seam, dtype=np.int64).reshape(-1, 2),
                np.array(mouth, dtype=np.int64).reshape(-1, 2), bnodes, bedges,
                np.array(tip_nodes, dtype=np.int64), path, path_minus, float(h), domain)
    return mesh


def _boundary(tris, face_edges):
    inc = _edge_incidence(tris)
    edges = np.array([e for e, c in inc.items() if c == 1 and e not in face_edges],
                     dtype=np.int64).reshape(-1, 2)
    return np.unique(edges), edges


# ---------------------------------------------------------------------------
# regions


class Region:
    """Open subset of the plane used as the argument of set functions."""

    #: element-containment may be decided from the vertices
    convex = True

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def clearance(self, points) -> np.ndarray:
        """Distance from each point to the complement of the region."""
        raise NotImplementedError

    def probe_centers(self, n: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Disc(Region):
    center: tuple
    radius: float

    def contains(self, points):
        return np.linalg.norm(np.atleast_2d(points) - np.asarray(self.center), axis=1) < self.radius

    def clearance(self, points):
        return np.maximum(self.radius - np.linalg.norm(np.atleast_2d(points) - np.asarray(self.center),
                                                       axis=1), 0.0)

    def probe_centers(self, n):
        c = np.asarray(self.center, dtype=float)
        g = np.linspace(-1, 1, n + 2)[1:-1] * self.radius
        pts = c + np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
        return pts[self.contains(pts)]


@dataclass(frozen=True)
class Rect(Region):
    lo: tuple
    hi: tuple

    def contains(self, points):
        p = np.atleast_2d(points)
        return np.all((p > np.asarray(self.lo)) & (p < np.asarray(self.hi)), axis=1)

    def clearance(self, points):
        p = np.atleast_2d(points)
        d = np.minimum(p - np.asarray(self.lo), np.asarray(self.hi) - p)
        return np.maximum(d.min(axis=1), 0.0)

    def probe_centers(self, n):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        gx = lo[0] + (hi[0] - lo[0]) * (np.arange(n) + 0.5) / n
        gy = lo[1] + (hi[1] - lo[1]) * (np.arange(n) + 0.5) / n
        return np.stack(np.meshgrid(gx, gy), axis=-1).reshape(-1, 2)


@dataclass(frozen=True)
class WholeBody(Region):
    """The open body itself."""

    domain: CrackedDomain
    # mesh elements always lie in the body, so vertex tests are conservative
    convex = True

    def contains(self, points):
        p = np.atleast_2d(points)
        return self.domain.contains(p) & (self.domain.boundary_distance(p) > self.domain.tol)

    def clearance(self, points):
        p = np.atleast_2d(points)
        return np.where(self.domain.contains(p), self.domain.boundary_distance(p), 0.0)

    def probe_centers(self, n):
        lo, hi = self.domain.outer.min(axis=0), self.domain.outer.max(axis=0)
        pts = Rect(tuple(lo), tuple(hi)).probe_centers(n)
        return pts[self.contains(pts)]


# ---------------------------------------------------------------------------
# disc and tube coverage of elements


def disc_triangle_area(center, r, tri_pts) -> np.ndarray:
    """Exact area of ``B(center, r)`` intersected with each triangle ``(M, 3, 2)``."""
    P = np.asarray(tri_pts, dtype=float) - np.asarray(center, dtype=float)
    A = P
    B = np.roll(P, -1, axis=1)
    d = B - A
    a = np.einsum("...i,...i->...", d, d)
    b = 2.0 * np.einsum("...i,...i->...", A, d)
    c = np.einsum("...i,...i->...", A, A) - r * r
    disc = b * b - 4 * a * c
    hit = disc > 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t1 = np.where(hit, np.clip((-b - sq) / (2 * a), 0.0, 1.0), 0.0)
    t2 = np.where(hit, np.clip((-b + sq) / (2 * a), 0.0, 1.0), 0.0)
    P1 = A + t1[..., None] * d
    P2 = A + t2[..., None] * d

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    def sector(u, v):
        return 0.5 * r * r * np.arctan2(cross(u, v), np.einsum("...i,...i->...", u, v))

    total = sector(A, P1) + 0.5 * cross(P1, P2) + sector(P2, B)
    # a miss (no intersection) reduces to the single sector A->B
    total = np.where(hit, total, sector(A, B))
    return np.abs(total.sum(axis=1))


def ball_weights(mesh: Mesh, center, r) -> np.ndarray:
    """Fraction of each element covered by ``B(center, r)``."""
    w = np.zeros(mesh.n_triangles)
    near = np.linalg.norm(mesh.centroids - np.asarray(center), axis=1) <= r + mesh.element_sizes
    if np.any(near):
        w[near] = disc_triangle_area(center, r, mesh.nodes[mesh.triangles[near]]) / mesh.areas[near]
    return np.clip(w, 0.0, 1.0)


def _subsample_points(tri_pts, nsub):
    """Centroids of the uniform ``nsub**2`` refinement of each triangle."""
    pts = []
    for i in range(nsub):
        for j in range(nsub - i):
            pts.append(((i + 1 / 3) / nsub, (j + 1 / 3) / nsub))
            if i + j < nsub - 1:
                pts.append(((i + 2 / 3) / nsub, (j + 2 / 3) / nsub))
    lam = np.array(pts)
    bary = np.column_stack([1 - lam.sum(axis=1), lam])
    return np.einsum("sk,mkd->msd", bary, tri_pts)


def set_weights(mesh: Mesh, indicator, candidates, nsub: int = 10, full=None) -> np.ndarray:
    """Coverage fractions of a point set given by ``indicator(points) -> bool``.

    Elements outside ``candidates`` get weight 0 and elements flagged in
    ``full`` get weight 1. The rest use the centroids of an ``nsub x nsub``
    uniform subdivision.
    """
    w = np.zeros(mesh.n_triangles)
    cand = np.asarray(candidates, dtype=bool).copy()
    if full is not None:
        full = np.asarray(full, dtype=bool) & cand
        w[full] = 1.0
        cand &= ~full
    idx = np.flatnonzero(cand)
    if len(idx) == 0:
        return w
    sp = _subsample_points(mesh.nodes[mesh.triangles[idx]], nsub)
    inside = indicator(sp.reshape(-1, 2)).reshape(sp.shape[:2])
    w[idx] = inside.mean(axis=1)
    return w


def simplify_polyline(poly, tol: float = 1e-12) -> np.ndarray:
    """Drop interior vertices where the polyline goes straight on."""
    p = np.asarray(poly, dtype=float)
    if len(p) <= 2:
        return p
    keep = [0]
    for i in range(1, len(p) - 1):
        a, b = p[i] - p[keep[-1]], p[i + 1] - p[i]
        if abs(a[0] * b[1] - a[1] * b[0]) > tol * np.linalg.norm(a) * np.linalg.norm(b) or a @ b < 0:
            keep.append(i)
    keep.append(len(p) - 1)
    return p[keep]


def tube_weights(mesh: Mesh, polyline, r, region: Region | None = None,
                 exclude_balls=(), nsub: int = 10) -> np.ndarray:
    """Coverage of ``{dist(x, polyline) < r}`` restricted to ``region`` minus balls."""
    polyline = simplify_polyline(polyline)
    if len(polyline) == 0:
        return np.zeros(mesh.n_triangles)
    d = point_polyline_distance(mesh.centroids, polyline)
    cand = d <= r + mesh.element_sizes
    tri = mesh.nodes[mesh.triangles]
    # fully covered: all vertices within r of one segment (a convex set),
    # inside a convex region and clear of every excluded ball
    full = np.zeros(mesh.n_triangles, dtype=bool)
    for a, b in zip(polyline[:-1], polyline[1:]):
        dv = point_polyline_distance(tri.reshape(-1, 2), np.vstack([a, b])).reshape(-1, 3)
        full |= np.all(dv < r, axis=1)
    if region is not None:
        full &= region.contains(tri.reshape(-1, 2)).reshape(-1, 3).all(axis=1) if region.convex \
            else False
    spread = np.linalg.norm(tri - mesh.centroids[:, None, :], axis=2).max(axis=1)
    for c, rb in exclude_balls:
        full &= np.linalg.norm(mesh.centroids - np.asarray(c), axis=1) - spread >= rb

    def indicator(p):
        ok = point_polyline_distance(p, polyline) < r
        if region is not None:
            ok &= region.contains(p)
        for c, rb in exclude_balls:
            ok &= np.linalg.norm(p - np.asarray(c), axis=1) >= rb
        return ok

    return set_weights(mesh, indicator, cand, nsub, full)


# ---------------------------------------------------------------------------
# crack-set measures


def _segment_frame(crack):
    crack = np.asarray(crack, dtype=float)
    t = np.diff(crack, axis=0)
    L = np.linalg.norm(t, axis=1)
    t = t / L[:, None]
    n = np.stack([-t[:, 1], t[:, 0]], axis=1)
    return t, n, L


def crack_point(crack, s):
    """Point, unit tangent and unit normal at arclength ``s`` (array-valued)."""
    crack = np.asarray(crack, dtype=float)
    t, n, L = _segment_frame(crack)
    cum = np.concatenate([[0.0], np.cumsum(L)])
    s = np.atleast_1d(np.asarray(s, dtype=float))
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(L) - 1)
    x = crack[k] + (s - cum[k])[:, None] * t[k]
    return x, t[k], n[k]


def tangential_divergence(eta: VelocityField, crack, s=None, point=None) -> np.ndarray:
    """``div_s eta = tr(grad eta) - n . (grad eta) n`` at crack points.

    Query either by arclength ``s`` or by ``point`` (which must lie on the
    crack within ``1e-10`` times the crack's diameter).
    """
    crack = np.asarray(crack, dtype=float)
    if point is not None:
        pts = np.atleast_2d(np.asarray(point, dtype=float))
        tol = 1e-10 * max(np.ptp(crack, axis=0).max(), 1e-300)
        d = point_polyline_distance(pts, crack)
        if np.any(d > tol):
            raise GeometryError(f"query point lies off the crack (distance {d.max():.3e})")
        t, n, L = _segment_frame(crack)
        a = crack[:-1]
        rel = pts[:, None, :] - a[None]
        proj = np.clip(np.einsum("psj,sj->ps", rel, t), 0, L)
        dist = np.linalg.norm(rel - proj[..., None] * t[None], axis=2)
        k = np.argmin(dist, axis=1)
        x, normal = pts, n[k]
    else:
        x, _, normal = crack_point(crack, s)
    g = eta.grad(x)
    return g[:, 0, 0] + g[:, 1, 1] - np.einsum("pi,pij,pj->p", normal, g, normal)


def _segment_breaks(a, b, circles):
    """Parameters in (0, 1) where segment ``a -> b`` crosses the given circles."""
    d = b - a
    out = []
    for c, r in circles:
        if r <= 0:
            continue
        f = a - np.asarray(c, dtype=float)
        A, B, C = d @ d, 2 * f @ d, f @ f - r * r
        disc = B * B - 4 * A * C
        if disc <= 0:
            continue
        sq = np.sqrt(disc)
        out.extend(t for t in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)) if 0 < t < 1)
    return out


def length_variation(crack, eta: VelocityField, npts: int = 4, subdivisions: int = 16) -> float:
    """First variation of crack length: ``int_K div_s eta dH^1``.

    Composite Gauss quadrature per segment. Segments are also split where
    they cross the field's non-smooth circles, so piecewise polynomial
    profiles are integrated exactly.
    """
    crack = np.asarray(crack, dtype=float)
    if len(crack) < 2:
        return 0.0
    gx, gw = np.polynomial.legendre.leggauss(npts)
    t, n, L = _segment_frame(crack)
    circles = eta.breakpoints()
    total = 0.0
    for k in range(len(L)):
        cuts = np.linspace(0.0, 1.0, subdivisions + 1)
        cuts = np.unique(np.concatenate([cuts, _segment_breaks(crack[k], crack[k + 1], circles)]))
        edges = cuts * L[k]
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        s = (mid[:, None] + half[:, None] * gx[None]).ravel()
        w = (half[:, None] * gw[None]).ravel()
        x = crack[k] + s[:, None] * t[k]
        g = eta.grad(x)
        dv = g[:, 0, 0] + g[:, 1, 1] - np.einsum("i,pij,j->p", n[k], g, n[k])
        total += float(np.dot(w, dv))
    return total


def straight_run(crack, end: int) -> float:
    """Length of the straight stretch of the crack ending at endpoint ``end`` (0 or -1)."""
    crack = np.asarray(crack, dtype=float)
    if end != 0:
        crack = crack[::-1]
    t, _, L = _segment_frame(crack)
    run = L[0]
    for k in range(1, len(L)):
        if abs(t[k][0] * t[0][1] - t[k][1] * t[0][0]) > 1e-12 or np.dot(t[k], t[0]) < 0:
            break
        run += L[k]
    return float(run)


def tip_frames(crack, domain: CrackedDomain | None = None):
    """List of ``(end, tip_point, outward_tangent)`` for interior crack ends."""
    crack = np.asarray(crack, dtype=float)
    out = []
    if len(crack) < 2:
        return out
    for end in (0, -1):
        p = crack[end]
        if domain is not None and domain.boundary_distance(p)[0] <= domain.tol:
            continue
        q = crack[1] if end == 0 else crack[-2]
        tau = (p - q) / np.linalg.norm(p - q)
        out.append((end, p, tau))
    return out


@dataclass(frozen=True)
class PerimeterMeasure:
    analytic: int
    numeric: float
    tips_inside: tuple


def perimeter_measure(crack, tips, region: Region, domain: CrackedDomain | None = None,
                      n_radii: int = 3) -> PerimeterMeasure:
    """Perimeter of the crack edge as a measure, evaluated on an open region.

    ``analytic`` counts tips inside ``region``. ``numeric`` is the sup of
    ``int_K div_s eta`` over a family of admissible plateau fields (unit
    bound, tangent to the crack, compactly supported in the region), which
    is a lower bound for the analytic value.
    """
    crack = np.asarray(crack, dtype=float)
    tips = np.atleast_2d(np.asarray(tips, dtype=float)).reshape(-1, 2)
    if len(tips) == 0 or len(crack) < 2:
        return PerimeterMeasure(0, 0.0, ())
    inside = region.contains(tips) & (region.clearance(tips) > 0)
    frames = tip_frames(crack)
    fields = []
    used = []
    for end, p, tau in frames:
        match = np.flatnonzero(np.linalg.norm(tips - p, axis=1) <= 1e-12 * max(1.0, np.abs(p).max()))
        if len(match) == 0 or not inside[match[0]]:
            continue
        used.append(int(match[0]))
        others = [q for e, q, _ in frames if e != end]
        R = min(region.clearance(p)[0], straight_run(crack, end))
        if domain is not None:
            R = min(R, domain.boundary_distance(p)[0])
        if others:
            R = min(R, 0.5 * np.linalg.norm(others[0] - p))
        # the rest of the crack (beyond the straight run) must stay outside the support
        R *= 0.95
        best, best_field = -np.inf, None
        for k in range(n_radii):
            r2 = R / 2**k
            f = PlateauField(p, tau, 0.5 * r2, r2)
            check_tangency(f, crack)
            v = length_variation(crack, f)
            if v > best:
                best, best_field = v, f
        fields.append(best_field)
    numeric = sum(length_variation(crack, f) for f in fields) if fields else 0.0
    return PerimeterMeasure(int(np.count_nonzero(inside)), float(numeric), tuple(used))
