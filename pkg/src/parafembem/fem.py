"""P1 finite elements on a TriMesh."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

from . import linalg
from .mesh import COUPLING, TriMesh
from .quadrature import gauss_legendre, triangle_rule

LOAD_ORDER = 3

Evaluator = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ScalarField:
    """Vectorised evaluators of a space-time function f(x, y, t).

    ``grad`` returns a pair (df/dx, df/dy); ``dt`` the time derivative.
    """

    value: Evaluator
    grad: Optional[Callable] = None
    dt: Optional[Evaluator] = None

    def __call__(self, x, y, t):
        return np.broadcast_to(self.value(x, y, t), np.shape(x)).astype(float)


ZERO = ScalarField(lambda x, y, t: np.zeros_like(x),
                   lambda x, y, t: (np.zeros_like(x), np.zeros_like(x)),
                   lambda x, y, t: np.zeros_like(x))


def constant(c: float) -> ScalarField:
    return ScalarField(lambda x, y, t: np.full_like(x, c, dtype=float),
                       lambda x, y, t: (np.zeros_like(x), np.zeros_like(x)),
                       lambda x, y, t: np.zeros_like(x))


def on_boundary(field: ScalarField):
    """Boundary data that ignores the normal."""
    return lambda x, y, t, nx, ny: field(x, y, t)


def normal_derivative(field: ScalarField):
    """Boundary data  grad f . n."""
    def dn(x, y, t, nx, ny):
        gx, gy = field.grad(x, y, t)
        return gx * nx + gy * ny
    return dn


class FemSpace:
    """Continuous piecewise linears; dof i is mesh vertex i."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.areas = 0.5 * det
        # gradients of the three barycentric coordinates, (m, 3, 2)
        g1 = np.stack([d2[:, 1], -d2[:, 0]], axis=1) / det[:, None]
        g2 = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / det[:, None]
        self.grads = np.stack([-g1 - g2, g1, g2], axis=1)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_vertices

    def quadrature_points(self, degree: int = 4):
        """Physical points (m, q, 2), weights (m, q) and barycentric values (q, 3)."""
        bary, w = triangle_rule(degree)
        p = self.mesh.vertices[self.mesh.triangles]
        pts = np.einsum("qk,mkd->mqd", bary, p)
        return pts, self.areas[:, None] * w[None, :], bary

    def _scatter(self, local: np.ndarray) -> sp.csr_matrix:
        t = self.mesh.triangles
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        n = self.n_dofs
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))

    def evaluate(self, coeffs: np.ndarray, degree: int = 4) -> np.ndarray:
        """Values of a P1 function at the quadrature points, (m, q)."""
        _, _, bary = self.quadrature_points(degree)
        return np.einsum("qk,mk->mq", bary, coeffs[self.mesh.triangles])

    def gradient(self, coeffs: np.ndarray) -> np.ndarray:
        """Elementwise constant gradient, (m, 2)."""
        return np.einsum("mkd,mk->md", self.grads, coeffs[self.mesh.triangles])


def assemble_mass(space: FemSpace) -> sp.csr_matrix:
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return space._scatter(space.areas[:, None, None] * ref[None])


def assemble_stiffness(space: FemSpace, diffusion=1.0) -> sp.csr_matrix:
    """Stiffness matrix for a positive coefficient, scalar or one per triangle."""
    kappa = np.broadcast_to(np.asarray(diffusion, float), space.areas.shape)
    if np.any(kappa <= 0):
        raise ValueError("diffusion coefficient must be positive")
    local = np.einsum("mid,mjd->mij", space.grads, space.grads)
    return space._scatter((kappa * space.areas)[:, None, None] * local)


def boundary_edge_rule(mesh: TriMesh, tag: int = COUPLING, n: int = 4):
    """Gauss points on tagged boundary edges: (edges, points (k, n, 2), weights (k, n), shape (n, 2))."""
    edges = mesh.boundary_edges[mesh.boundary_tags == tag]
    x, w = gauss_legendre(n)
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    pts = a[:, None, :] + x[None, :, None] * (b - a)[:, None, :]
    shape = np.stack([1.0 - x, x], axis=1)
    return edges, pts, length[:, None] * w[None, :], shape


def edge_normals(mesh: TriMesh, edges: np.ndarray) -> np.ndarray:
    d = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    d = d / np.linalg.norm(d, axis=1)[:, None]
    return np.stack([d[:, 1], -d[:, 0]], axis=1)


def assemble_load(space: FemSpace, f: Optional[ScalarField], h: Optional[Callable] = None,
                  t: float = 0.0, quad_order: int = LOAD_ORDER, edge_points: int = 4) -> np.ndarray:
    """Vector of  int_Omega f phi_i dx + int_Gamma h phi_i ds  at time t.

    ``quad_order`` is the polynomial degree of f integrated exactly, so the
    triangle rule has degree quad_order + 1 (the default is the 6-point rule).
    ``h`` is boundary data ``h(x, y, t, nx, ny)`` (see :func:`on_boundary`,
    :func:`normal_derivative`), integrated over the coupling edges only.
    """
    if not 1 <= quad_order <= 4:
        raise ValueError(f"load quadrature order must be in 1..4, got {quad_order}")
    mesh = space.mesh
    b = np.zeros(space.n_dofs)
    if f is not None:
        pts, w, bary = space.quadrature_points(quad_order + 1)
        vals = f(pts[..., 0], pts[..., 1], t) * w
        np.add.at(b, mesh.triangles, vals @ bary)
    if h is not None:
        edges, pts, w, shape = boundary_edge_rule(mesh, COUPLING, edge_points)
        if len(edges):
            n = edge_normals(mesh, edges)[:, None, :]
            nx = np.broadcast_to(n[..., 0], w.shape)
            ny = np.broadcast_to(n[..., 1], w.shape)
            vals = h(pts[..., 0], pts[..., 1], t, nx, ny) * w
            np.add.at(b, edges, vals @ shape)
    return b


class L2Projector:
    """Reusable mass-matrix solve  M x = (g, phi_i)."""

    def __init__(self, space: FemSpace, quad_order: int = LOAD_ORDER):
        self.space = space
        self.quad_order = quad_order
        self.mass = assemble_mass(space)
        self._lu = linalg.factorize(self.mass.tocsc())

    def __call__(self, g: ScalarField, t: float = 0.0) -> np.ndarray:
        return self._lu.solve(assemble_load(self.space, g, None, t, self.quad_order))


def l2_project(space: FemSpace, g: ScalarField, t: float = 0.0, quad_order: int = LOAD_ORDER) -> np.ndarray:
    return L2Projector(space, quad_order)(g, t)


def interpolate(space: FemSpace, g: ScalarField, t: float = 0.0) -> np.ndarray:
    v = space.mesh.vertices
    return g(v[:, 0], v[:, 1], t)


DirichletSpec = Mapping[int, Evaluator]


def dirichlet_values(mesh: TriMesh, spec: DirichletSpec, t: float):
    """Constrained vertex ids (sorted) and their prescribed values at time t."""
    values: dict[int, float] = {}
    for label, g in spec.items():
        ids = mesh.tagged_vertices(label)
        if len(ids) == 0:
            raise ValueError(f"no such boundary: Dirichlet label {label}")
        x = mesh.vertices[ids]
        vals = np.broadcast_to(np.asarray(g(x[:, 0], x[:, 1], t), float), ids.shape)
        for i, v in zip(ids, vals):
            old = values.setdefault(int(i), float(v))
            if abs(old - v) > 1e-12 * max(1.0, abs(v)):
                raise ValueError("inconsistent Dirichlet data")
    dofs = np.array(sorted(values), dtype=int)
    return dofs, np.array([values[i] for i in dofs])


def constrain_matrix(matrix, dofs: np.ndarray) -> sp.csc_matrix:
    """Replace rows and columns of ``dofs`` by those of the identity."""
    n = matrix.shape[0]
    keep = np.ones(n)
    keep[dofs] = 0.0
    P = sp.diags(keep)
    return (P @ sp.csr_matrix(matrix) @ P + sp.diags(1.0 - keep)).tocsc()


def lift_rhs(matrix, rhs: np.ndarray, dofs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Move the known columns to the right-hand side and pin the constrained entries."""
    out = np.array(rhs, dtype=float)
    if len(dofs):
        out -= sp.csr_matrix(matrix)[:, dofs] @ values
        out[dofs] = values
    return out


def apply_dirichlet(matrix, rhs, mesh: TriMesh, spec: DirichletSpec, t: float):
    """Row replacement plus column elimination; returns (matrix, rhs, dofs, values)."""
    dofs, values = dirichlet_values(mesh, spec, t)
    return constrain_matrix(matrix, dofs), lift_rhs(matrix, rhs, dofs, values), dofs, values
