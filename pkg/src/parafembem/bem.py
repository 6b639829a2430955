"""Galerkin boundary elements for the 2D Laplace kernel G(x, y) = -log|x - y| / (2 pi).

Flux space: piecewise constants on the segments. Trace space: continuous
piecewise linears on the boundary nodes. Normals point out of the domain.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import xlogy

from .mesh import BoundaryMesh, distance_to_boundary, point_in_polygon
from .quadrature import gauss_legendre

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
PARALLEL_TOL = 1e-12


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


def _local_coords(p, a, b):
    """Length h, tangential coordinate alpha and signed normal offset q of p w.r.t. [a, b]."""
    d = b - a
    h = np.sqrt(_dot(d, d))
    v = d / h[..., None]
    rel = p - a
    alpha = _dot(rel, v)
    q = -_cross(v, rel)  # positive on the right of a->b, i.e. along the outward normal
    return h, alpha, q


def log_segment_integral(p, a, b):
    """int_[a,b] log|p - y| ds_y, vectorised over broadcastable leading axes."""
    p, a, b = np.broadcast_arrays(*(np.asarray(z, float) for z in (p, a, b)))
    h, alpha, q = _local_coords(p, a, b)
    d = np.abs(q)

    def F(xi):
        return 0.5 * xlogy(xi, xi * xi + d * d) - xi + d * np.arctan2(xi, d)

    return F(h - alpha) - F(-alpha)


def _dl_moments(h, alpha, q):
    """q * int_0^h w(t) / ((t - alpha)^2 + q^2) dt for w = 1 and w = t."""
    d = np.abs(q)
    s0 = np.sign(q) * (np.arctan2(h - alpha, d) + np.arctan2(alpha, d))
    ra = alpha * alpha + q * q
    rb = (h - alpha) ** 2 + q * q
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(q == 0.0, 0.0, 0.5 * q * np.log(rb / ra))
    return s0, lg + alpha * s0


def double_layer_segment_integrals(p, a, b):
    """int_[a,b] d/dn_y G(p, y) phi(y) ds_y for the two end-node hats of the segment.

    Returns (I_a, I_b). The normal of [a, b] is its right-hand normal.
    """
    p, a, b = np.broadcast_arrays(*(np.asarray(z, float) for z in (p, a, b)))
    h, alpha, q = _local_coords(p, a, b)
    s0, s1 = _dl_moments(h, alpha, q)
    return (s0 - s1 / h) / TWO_PI, s1 / h / TWO_PI


def single_layer_point(p, a, b):
    """int_[a,b] G(p, y) ds_y."""
    return -log_segment_integral(p, a, b) / TWO_PI


# -- analytic segment-pair integrals -------------------------------------------


def _phi2(xi, d):
    """Second antiderivative of log sqrt(xi^2 + d^2)."""
    return (0.25 * xlogy(xi * xi - d * d, xi * xi + d * d) - 0.75 * xi * xi
            + d * xi * np.arctan2(xi, d))


def log_pair_integral(a1, b1, a2, b2) -> float:
    """int_[a1,b1] int_[a2,b2] log|x - y| ds_y ds_x in closed form.

    Non-parallel pairs are reduced to point-segment integrals through the
    homogeneity of log|r| about the intersection of the carrier lines;
    parallel pairs use the second antiderivative along the common direction.
    """
    a1, b1, a2, b2 = (np.asarray(z, float) for z in (a1, b1, a2, b2))
    h1 = np.hypot(*(b1 - a1))
    h2 = np.hypot(*(b2 - a2))
    u = (b1 - a1) / h1
    v = (b2 - a2) / h2
    cr = _cross(u, v)
    if abs(cr) <= PARALLEL_TOL:
        c = a2 if _dot(u, v) > 0 else b2
        w = a1 - c
        beta = _dot(w, u)
        d = abs(_cross(w, u))
        return float(_phi2(h1 + beta, d) - _phi2(h1 + beta - h2, d)
                     - _phi2(beta, d) + _phi2(beta - h2, d))
    # a1 + s0 u = a2 + t0 v
    rhs = a2 - a1
    s0 = _cross(rhs, -v) / _cross(u, -v)
    t0 = _cross(u, rhs) / _cross(u, -v)
    total = ((h1 - s0) * log_segment_integral(b1, a2, b2) + s0 * log_segment_integral(a1, a2, b2)
             + (h2 - t0) * log_segment_integral(b2, a1, b1) + t0 * log_segment_integral(a2, a1, b1)
             - h1 * h2)
    return float(0.5 * total)


def single_layer_pair(a1, b1, a2, b2) -> float:
    """int_e int_e' G(x, y) ds_y ds_x."""
    return -log_pair_integral(a1, b1, a2, b2) / TWO_PI


def single_layer_self(h):
    """Closed form of the diagonal entry: h^2 (3/2 - ln h) / (2 pi)."""
    h = np.asarray(h, float)
    return h * h * (1.5 - np.log(h)) / TWO_PI


def _rational_moments(h, alpha, delta):
    """int_0^h t^k / ((t - alpha)^2 + delta^2) dt for k = 0, 1 (delta > 0)."""
    m0 = (np.arctan((h - alpha) / delta) + np.arctan(alpha / delta)) / delta
    m1 = 0.5 * np.log(((h - alpha) ** 2 + delta ** 2) / (alpha ** 2 + delta ** 2)) + alpha * m0
    return m0, m1


def double_layer_adjacent(p, x_end, y_end, normal_y):
    """Double layer integrals for two segments sharing the vertex ``p``.

    Test segment [p, x_end] (constant weight), source segment [p, y_end]
    with outward normal ``normal_y``. Returns the integrals against the
    source hats at p and at y_end. The singularity sits at the corner of the
    parameter rectangle, so each integral reduces to edge integrals via the
    homogeneity of the kernel (degree -1) and of kernel * t (degree 0).
    """
    p, x_end, y_end, n = (np.asarray(z, float) for z in (p, x_end, y_end, normal_y))
    h1 = np.hypot(*(x_end - p))
    h2 = np.hypot(*(y_end - p))
    u = (x_end - p) / h1
    w = (y_end - p) / h2
    c = _dot(u, n)
    if abs(c) <= PARALLEL_TOL:
        return 0.0, 0.0
    # edge s = h1: x fixed at x_end, y over the source segment; the point
    # integrals use the right-hand normal of p -> y_end, flip if n is the other one
    orient = np.sign(_dot(np.array([w[1], -w[0]]), n))
    ia, ib = double_layer_segment_integrals(x_end, p, y_end)
    e_s0 = orient * (ia + ib)  # int k dt
    e_s1 = orient * h2 * ib  # int k t dt
    # edge t = h2: y fixed at y_end, x over the test segment; k = c s / (2 pi r^2)
    alpha = h2 * _dot(u, w)
    delta = h2 * abs(_cross(u, w))
    _, m1 = _rational_moments(h1, alpha, delta)
    e_t = c * m1 / TWO_PI
    i0 = h1 * e_s0 + h2 * e_t
    i1 = 0.5 * (h1 * e_s1 + h2 * h2 * e_t)
    return float(i0 - i1 / h2), float(i1 / h2)


# -- Galerkin matrices ---------------------------------------------------------


@dataclass
class BemSpacePair:
    """P0 flux space and P1 trace space on one boundary mesh."""

    boundary: BoundaryMesh

    @property
    def n_flux(self) -> int:
        return self.boundary.n_segments

    @property
    def n_trace(self) -> int:
        return self.boundary.n_nodes


def _segment_distances(a, b):
    """Pairwise minimum distances between segments (non-crossing assumed)."""
    d = b - a
    dd = _dot(d, d)

    def point_seg(p):
        # distances from every point to every segment, (n, n)
        rel = p[:, None, :] - a[None, :, :]
        s = np.clip(_dot(rel, d[None]) / dd[None], 0.0, 1.0)
        return np.linalg.norm(rel - s[..., None] * d[None], axis=2)

    da = point_seg(a)
    db = point_seg(b)
    return np.minimum(np.minimum(da, db), np.minimum(da.T, db.T))


def _pair_classes(bmesh: BoundaryMesh):
    """Masks: identical, vertex-adjacent, near separated, far separated."""
    segs = bmesh.segments
    n = len(segs)
    same = np.eye(n, dtype=bool)
    share = np.zeros((n, n), dtype=bool)
    for k in range(2):
        for m in range(2):
            share |= segs[:, k][:, None] == segs[:, m][None, :]
    adjacent = share & ~same
    dist = _segment_distances(bmesh.starts, bmesh.ends)
    hs = bmesh.lengths
    if np.any((dist < 1e-14 * hs.max()) & ~share):
        raise ValueError("degenerate geometry: distinct segments touch or overlap")
    far = ~share & (dist > 0.5 * (hs[:, None] + hs[None, :]))
    near = ~share & ~far
    return same, adjacent, near, far


def _tensor_gauss(bmesh, rows, cols, n, kernel, chunk=4096):
    """Tensor Gauss rule over segment pairs; kernel(x, y, j) -> (..., k) values."""
    xg, wg = gauss_legendre(n)
    a, b, h = bmesh.starts, bmesh.ends, bmesh.lengths
    out = []
    for s in range(0, len(rows), chunk):
        i = rows[s:s + chunk]
        j = cols[s:s + chunk]
        x = a[i, None, :] + xg[None, :, None] * (b[i] - a[i])[:, None, :]  # (p, n, 2)
        y = a[j, None, :] + xg[None, :, None] * (b[j] - a[j])[:, None, :]
        vals = kernel(x[:, :, None, :], y[:, None, :, :], j)  # (p, n, n, k)
        wts = (h[i] * h[j])[:, None, None] * wg[None, :, None] * wg[None, None, :]
        out.append(np.einsum("pqr,pqrk->pk", wts, vals))
    return np.concatenate(out) if out else np.zeros((0, 1))


def assemble_single_layer(pair: BemSpacePair) -> np.ndarray:
    """V[e, e'] = int_e int_e' G(x, y) ds_y ds_x (symmetric)."""
    bm = pair.boundary
    same, adjacent, near, far = _pair_classes(bm)
    n = bm.n_segments
    V = np.zeros((n, n))
    V[same] = single_layer_self(bm.lengths)
    a, b = bm.starts, bm.ends
    for i, j in zip(*np.nonzero(np.triu(adjacent))):
        V[i, j] = V[j, i] = single_layer_pair(a[i], b[i], a[j], b[j])

    def kern(x, y, j):
        r2 = _dot(x - y, x - y)
        return (-np.log(r2) / (2.0 * TWO_PI))[..., None]

    for mask, order in ((near, 16), (far, 8)):
        rows, cols = np.nonzero(np.triu(mask))
        vals = _tensor_gauss(bm, rows, cols, order, kern)[:, 0]
        V[rows, cols] = vals
        V[cols, rows] = vals
    return V


def assemble_double_layer(pair: BemSpacePair) -> np.ndarray:
    """K[e, j] = int_e int_Gamma d/dn_y G(x, y) phi_j(y) ds_y ds_x (P0 rows, P1 columns)."""
    bm = pair.boundary
    same, adjacent, near, far = _pair_classes(bm)
    n, nb = bm.n_segments, bm.n_nodes
    K = np.zeros((n, nb))
    segs, normals = bm.segments, bm.normals
    # same segment: (y - x) . n_y vanishes
    for i, j in zip(*np.nonzero(adjacent)):
        shared = set(segs[i]) & set(segs[j])
        p = shared.pop()
        x_end = segs[i, 1] if segs[i, 0] == p else segs[i, 0]
        y_end = segs[j, 1] if segs[j, 0] == p else segs[j, 0]
        vp, ve = double_layer_adjacent(bm.nodes[p], bm.nodes[x_end], bm.nodes[y_end], normals[j])
        K[i, p] += vp
        K[i, y_end] += ve

    def make_kernel(n_pts):
        xg, _ = gauss_legendre(n_pts)
        shape = np.stack([1.0 - xg, xg], axis=1)  # source hats at the y points

        def kern(x, y, j):
            r = y - x
            nj = normals[j][:, None, None, :]
            k = -_dot(r, nj) / (TWO_PI * _dot(r, r))
            return k[..., None] * shape[None, None, :, :]

        return kern

    for mask, order in ((near, 16), (far, 8)):
        rows, cols = np.nonzero(mask)
        vals = _tensor_gauss(bm, rows, cols, order, make_kernel(order))
        if len(rows):
            np.add.at(K, (rows, segs[cols, 0]), vals[:, 0])
            np.add.at(K, (rows, segs[cols, 1]), vals[:, 1])
    return K


def assemble_boundary_mass(pair: BemSpacePair) -> sp.csr_matrix:
    """M_Gamma[e, j] = int_e phi_j ds  (P0 x P1)."""
    bm = pair.boundary
    n = bm.n_segments
    rows = np.repeat(np.arange(n), 2)
    half = np.repeat(0.5 * bm.lengths, 2)
    return sp.csr_matrix((half, (rows, bm.segments.ravel())), shape=(n, bm.n_nodes))


def trace_restriction(pair: BemSpacePair, n_volume: int) -> sp.csr_matrix:
    """R: volume dofs -> boundary trace dofs."""
    vol = pair.boundary.volume_index
    nb = len(vol)
    return sp.csr_matrix((np.ones(nb), (np.arange(nb), vol)), shape=(nb, n_volume))


def assemble_trace_coupling(pair: BemSpacePair, n_volume: int):
    """C[i, e] = int_e phi_i ds (volume x P0) and the boundary mass M_Gamma."""
    Mg = assemble_boundary_mass(pair)
    R = trace_restriction(pair, n_volume)
    C = (R.T @ Mg.T).tocsr()
    return C, Mg


# -- potentials ----------------------------------------------------------------


def evaluate_exterior(pair: BemSpacePair, trace, flux, points, check_inside: bool = True):
    """u_e(x) = int d/dn_y G u_e ds_y - int G phi ds_y at exterior points.

    Returns (values, near) where ``near`` flags points closer to the boundary
    than the local segment length.
    """
    bm = pair.boundary
    pts = np.atleast_2d(np.asarray(points, float))
    if check_inside and np.any(point_in_polygon(bm, pts)):
        raise ValueError("interior evaluation point")
    trace = np.asarray(trace, float)
    flux = np.asarray(flux, float)
    a, b = bm.starts[None], bm.ends[None]
    p = pts[:, None, :]
    ia, ib = double_layer_segment_integrals(p, a, b)
    dl = ia @ trace[bm.segments[:, 0]] + ib @ trace[bm.segments[:, 1]]
    sl = single_layer_point(p, a, b) @ flux
    near = distance_to_boundary(bm, pts) < bm.h
    if np.any(near):
        warnings.warn(f"{int(near.sum())} evaluation points lie within one segment length of "
                      "the boundary", RuntimeWarning, stacklevel=2)
    return dl - sl, near


def radiation_coefficient(pair: BemSpacePair, flux) -> float:
    """a = (1 / 2 pi) int_Gamma phi ds."""
    return float(pair.boundary.lengths @ np.asarray(flux, float) / TWO_PI)


def segment_means(bmesh: BoundaryMesh, g, t: float = 0.0, n: int = 4) -> np.ndarray:
    """P0 projection: per-segment mean of boundary data g(x, y, t, nx, ny)."""
    xg, wg = gauss_legendre(n)
    a, b = bmesh.starts, bmesh.ends
    pts = a[:, None, :] + xg[None, :, None] * (b - a)[:, None, :]
    nrm = bmesh.normals
    nx = np.broadcast_to(nrm[:, 0:1], pts.shape[:2])
    ny = np.broadcast_to(nrm[:, 1:2], pts.shape[:2])
    return g(pts[..., 0], pts[..., 1], t, nx, ny) @ wg
