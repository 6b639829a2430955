"""Triangulations, boundary polygons and time grids."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

COUPLING = 0  # boundary tag of the interface; positive tags are Dirichlet labels


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with tagged boundary edges.

    ``h`` is the nominal mesh size (side length of the largest square cell
    the start mesh was cut from); it halves with every red refinement.
    """

    vertices: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (m, 3), counterclockwise
    boundary_edges: np.ndarray  # (k, 2)
    boundary_tags: np.ndarray  # (k,)
    h: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        """(m, 3) lengths of the edges opposite each local vertex."""
        p = self.vertices[self.triangles]
        return np.stack(
            [np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1) for i in range(3)],
            axis=1,
        )

    @property
    def h_max(self) -> float:
        """Largest triangle diameter."""
        return float(self.edge_lengths().max())

    def inradii(self) -> np.ndarray:
        ell = self.edge_lengths()
        return 2.0 * np.abs(self.signed_areas()) / ell.sum(axis=1)

    def quasi_uniformity(self) -> float:
        """max_T h_T / min_T rho_T."""
        return float(self.edge_lengths().max() / self.inradii().min())

    def tagged_vertices(self, tag: int) -> np.ndarray:
        return np.unique(self.boundary_edges[self.boundary_tags == tag])


def _grid_mesh(xs, ys, keep, diagonal, classify, h) -> TriMesh:
    """Triangulate a tensor grid of cells.

    keep(xc, yc) selects cells by center; diagonal(xc, yc) True cuts a cell
    from lower-left to upper-right; classify(xm, ym) tags boundary edges.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    nx, ny = len(xs), len(ys)
    index = -np.ones((nx, ny), dtype=int)
    verts: list[tuple[float, float]] = []
    tris: list[tuple[int, int, int]] = []

    def vid(i, j):
        if index[i, j] < 0:
            index[i, j] = len(verts)
            verts.append((xs[i], ys[j]))
        return index[i, j]

    for j in range(ny - 1):
        for i in range(nx - 1):
            xc = 0.5 * (xs[i] + xs[i + 1])
            yc = 0.5 * (ys[j] + ys[j + 1])
            if not keep(xc, yc):
                continue
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if diagonal(xc, yc):
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    vertices = np.array(verts)
    triangles = np.array(tris, dtype=int)
    edges = _boundary_edges(triangles)
    mid = vertices[edges].mean(axis=1)
    tags = np.array([classify(x, y) for x, y in mid], dtype=int)
    return TriMesh(vertices, triangles, edges, tags, float(h))


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, oriented as in that triangle."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if counts.max() > 2:
        raise ValueError("non-conforming triangulation: edge shared by more than two triangles")
    return e[counts[inv] == 1]


def build_lshape_mesh(levels: int = 0) -> TriMesh:
    """L-shape (-1/4,1/4)^2 minus [0,1/4]x[-1/4,0], start size 0.125."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    g = np.linspace(-0.25, 0.25, 5)
    mesh = _grid_mesh(
        g, g,
        keep=lambda x, y: not (x > 0 and y < 0),
        diagonal=lambda x, y: True,
        classify=lambda x, y: COUPLING,
        h=0.125,
    )
    for _ in range(levels):
        mesh = uniform_refine(mesh)
    return mesh


# electrode rectangles [x0, x1] x [y0, y1]; label 1 on the left
ELECTRODES = {1: (-0.8, -0.6, -0.8, 0.8), 2: (0.6, 0.8, -0.8, 0.8)}


def build_capacitor_mesh(levels: int = 0, scale: float = 1.0) -> TriMesh:
    """(-2,2)^2 minus two electrodes, mirror symmetric in x.

    The start mesh has cells up to 1x1 (nominal h = 1), so ``levels=5``
    gives h = 0.03125. ``scale`` shrinks the whole geometry uniformly.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    xs = np.array([-2.0, -1.0, -0.8, -0.6, 0.0, 0.6, 0.8, 1.0, 2.0])
    ys = np.array([-2.0, -1.0, -0.8, 0.0, 0.8, 1.0, 2.0])

    def inside_electrode(x, y):
        return any(x0 < x < x1 and y0 < y < y1 for x0, x1, y0, y1 in ELECTRODES.values())

    def classify(x, y):
        if abs(abs(x) - 2.0) < 1e-12 or abs(abs(y) - 2.0) < 1e-12:
            return COUPLING
        return 1 if x < 0 else 2

    mesh = _grid_mesh(
        xs, ys,
        keep=lambda x, y: not inside_electrode(x, y),
        # mirrored diagonals keep the vertex set and connectivity symmetric
        diagonal=lambda x, y: x > 0,
        classify=classify,
        h=1.0,
    )
    if scale != 1.0:
        mesh = TriMesh(mesh.vertices * scale, mesh.triangles, mesh.boundary_edges,
                       mesh.boundary_tags, mesh.h * scale)
    for _ in range(levels):
        mesh = uniform_refine(mesh)
    return mesh


def uniform_refine(mesh: TriMesh) -> TriMesh:
    """Red refinement: every triangle into four via edge midpoints.

    Midpoints are keyed by the sorted vertex pair of their edge, so shared
    edges produce exactly one new vertex.
    """
    t = mesh.triangles
    nv = mesh.n_vertices
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    m = len(t)
    m01, m12, m20 = (nv + inv[k * m:(k + 1) * m] for k in range(3))
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.concatenate([
        np.stack([a, m01, m20], axis=1),
        np.stack([m01, b, m12], axis=1),
        np.stack([m20, m12, c], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    # unique keys are sorted lexicographically, hence by a*nv + b
    codes = uniq[:, 0] * nv + uniq[:, 1]
    be = mesh.boundary_edges
    bm = nv + np.searchsorted(codes, be.min(axis=1) * nv + be.max(axis=1))
    edges = np.concatenate([np.stack([be[:, 0], bm], axis=1), np.stack([bm, be[:, 1]], axis=1)])
    tags = np.concatenate([mesh.boundary_tags, mesh.boundary_tags])
    return TriMesh(vertices, tris, edges, tags, mesh.h / 2)


@dataclass(frozen=True)
class BoundaryMesh:
    """Closed polygon(s) of straight segments, traversed with the domain on the left.

    ``nodes`` are the boundary vertices (P1 trace dofs); ``segments`` index
    into ``nodes``; ``volume_index`` maps each node back to its mesh vertex
    (or is None for a standalone polygon).
    """

    nodes: np.ndarray  # (nb, 2)
    segments: np.ndarray  # (ns, 2)
    volume_index: np.ndarray | None = None

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def starts(self) -> np.ndarray:
        return self.nodes[self.segments[:, 0]]

    @property
    def ends(self) -> np.ndarray:
        return self.nodes[self.segments[:, 1]]

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.ends - self.starts, axis=1)

    @property
    def tangents(self) -> np.ndarray:
        return (self.ends - self.starts) / self.lengths[:, None]

    @property
    def normals(self) -> np.ndarray:
        """Unit normals pointing out of the domain (right of the traversal)."""
        t = self.tangents
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    @property
    def h(self) -> float:
        return float(self.lengths.max())


def polygon(points) -> BoundaryMesh:
    """Closed polygon through ``points`` in order (counterclockwise = outward normals)."""
    pts = np.asarray(points, float)
    n = len(pts)
    segs = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    return BoundaryMesh(pts, segs)


def extract_boundary(mesh: TriMesh, tag: int = COUPLING) -> BoundaryMesh:
    """Boundary polygon(s) of all edges carrying ``tag``, chained into loops."""
    sel = mesh.boundary_tags == tag
    if not sel.any():
        raise ValueError(f"no such boundary: tag {tag}")
    edges = mesh.boundary_edges[sel]
    nxt = {}
    for a, b in edges:
        if a in nxt:
            raise ValueError("boundary is not a union of simple closed loops")
        nxt[int(a)] = int(b)
    order: list[tuple[int, int]] = []
    remaining = dict(nxt)
    while remaining:
        start = min(remaining)
        a = start
        while True:
            b = remaining.pop(a, None)
            if b is None:
                raise ValueError("boundary edges do not form closed loops")
            order.append((a, b))
            a = b
            if a == start:
                break
    vol = np.array(sorted({a for a, _ in order}), dtype=int)
    local = {v: i for i, v in enumerate(vol)}
    segs = np.array([(local[a], local[b]) for a, b in order], dtype=int)
    return BoundaryMesh(mesh.vertices[vol], segs, vol)


def refine_boundary(bmesh: BoundaryMesh, times: int = 1) -> BoundaryMesh:
    """Split every segment into 2**times equal pieces; children stay in order.

    Child segments of parent e are ``e * 2**times + k``.
    """
    k = 2 ** times
    ns, nb = bmesh.n_segments, bmesh.n_nodes
    frac = np.arange(1, k) / k
    d = bmesh.ends - bmesh.starts
    inner = (bmesh.starts[:, None, :] + frac[None, :, None] * d[:, None, :]).reshape(-1, 2)
    ids = np.empty((ns, k + 1), dtype=int)
    ids[:, 0] = bmesh.segments[:, 0]
    ids[:, k] = bmesh.segments[:, 1]
    ids[:, 1:k] = nb + np.arange(ns * (k - 1)).reshape(ns, k - 1)
    segs = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    return BoundaryMesh(np.vstack([bmesh.nodes, inner]), segs)


def point_in_polygon(bmesh: BoundaryMesh, points) -> np.ndarray:
    """Even-odd ray casting against all loops; boundary points count as inside."""
    p = np.atleast_2d(np.asarray(points, float))
    a, b = bmesh.starts, bmesh.ends
    x = p[:, 0][:, None]
    y = p[:, 1][:, None]
    ay, by = a[None, :, 1], b[None, :, 1]
    ax, bx = a[None, :, 0], b[None, :, 0]
    crosses = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (y - ay) * (bx - ax) / (by - ay)
    inside = (np.sum(crosses & (x < xint), axis=1) % 2) == 1
    return inside | (distance_to_boundary(bmesh, p) < 1e-12 * (1.0 + bmesh.h))


def distance_to_boundary(bmesh: BoundaryMesh, points) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, float))
    a, d = bmesh.starts, bmesh.ends - bmesh.starts
    rel = p[:, None, :] - a[None, :, :]
    s = np.clip(np.einsum("pij,ij->pi", rel, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    closest = a[None] + s[..., None] * d[None]
    return np.linalg.norm(p[:, None, :] - closest, axis=2).min(axis=1)


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray
    step: float | None = None  # exact step of a uniform grid

    @property
    def steps(self) -> np.ndarray:
        if self.step is not None:
            return np.full(self.n_intervals, self.step)
        return np.diff(self.nodes)

    def tau(self, n: int) -> float:
        """Length of interval n (1-based)."""
        if self.step is not None:
            return self.step
        return float(self.nodes[n] - self.nodes[n - 1])

    @property
    def tau_max(self) -> float:
        return float(self.steps.max())

    @property
    def n_intervals(self) -> int:
        return len(self.nodes) - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    def index_of(self, t: float) -> int:
        """Index of the node closest to ``t``."""
        return int(np.argmin(np.abs(self.nodes - t)))


def build_time_grid(T: float, N: int) -> TimeGrid:
    if N < 1 or T <= 0:
        raise ValueError("need N >= 1 and T > 0")
    tau = T / N
    # one stored step so per-step matrices coincide bitwise
    return TimeGrid(np.arange(N + 1) * tau, tau)


def write_mesh(mesh: TriMesh, path) -> None:
    """Plain-text dump: counts line, vertices, triangles, tagged boundary edges."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines += [f"E {a} {b} {t}" for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, h: float = float("nan")) -> TriMesh:
    rows = Path(path).read_text().split("\n")
    nv, nt, ne = (int(v) for v in rows[0].split())
    verts = np.array([[float(v) for v in r.split()] for r in rows[1:1 + nv]])
    tris = np.array([[int(v) for v in r.split()[1:]] for r in rows[1 + nv:1 + nv + nt]], dtype=int)
    er = [r.split()[1:] for r in rows[1 + nv + nt:1 + nv + nt + ne]]
    edges = np.array([[int(a), int(b)] for a, b, _ in er], dtype=int).reshape(-1, 2)
    tags = np.array([int(t) for _, _, t in er], dtype=int)
    return TriMesh(verts, tris, edges, tags, h)
