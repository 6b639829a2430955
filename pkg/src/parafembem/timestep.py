"""Weighted-average implicit Euler for the coupled FEM-BEM system.

Per step n the unknowns are the nodal values u^n (P1, volume) and the
flux phi^n (P0, boundary), solving

    M (u^n - u^{n-1}) / tau + A u^n - C phi^n = f^n
    (1/2 M_G - K) R u^n + V phi^n              = g^n

where f^n, g^n are averages of the data against the weight
omega(t) = (6 t - 2 t^n - 4 t^{n-1}) / tau. With omega = 1 the same loop
gives the midpoint (Crank-Nicolson) variant.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import bem, fem, linalg
from .mesh import COUPLING, TimeGrid, TriMesh, extract_boundary
from .quadrature import interval_rule

log = logging.getLogger(__name__)


class WeightScheme(enum.Enum):
    EULER = "euler"
    CRANK_NICOLSON = "cn"

    @property
    def theta(self) -> float:
        """Weight of u^n in the averaged state (u^{n-1} gets 1 - theta)."""
        return 1.0 if self is WeightScheme.EULER else 0.5

    def weight(self, t, t0: float, t1: float):
        """omega^n(t) on (t0, t1)."""
        return self.local_weight((np.asarray(t, float) - t0) / (t1 - t0))

    def local_weight(self, s):
        """omega^n at the local coordinate s = (t - t^{n-1}) / tau in [0, 1].

        (6 t - 2 t^n - 4 t^{n-1}) / tau = 6 s - 2, free of cancellation.
        """
        s = np.asarray(s, float)
        if self is WeightScheme.EULER:
            return 6.0 * s - 2.0
        return np.ones_like(s)


@dataclass(frozen=True)
class QuadConfig:
    volume_order: int = fem.LOAD_ORDER
    edge_points: int = 4
    time_points: int = 4
    first_interval_panels: int = 1


def weighted_average(g: Callable[[float], np.ndarray], t0: float, t1: float,
                     scheme: WeightScheme = WeightScheme.EULER, q_t: int = 4,
                     panels: int = 1):
    """(1/tau) int_{t0}^{t1} g(t) omega(t) dt by composite Gauss-Legendre."""
    if q_t < 2:
        raise ValueError("time quadrature needs at least 2 points")
    ss, ws = interval_rule(0.0, 1.0, q_t, panels)
    om = scheme.local_weight(ss) * ws
    acc = None
    for t, c in zip(t0 + (t1 - t0) * ss, om):
        term = c * np.asarray(g(t), float)
        acc = term if acc is None else acc + term
    return acc


@dataclass
class ProblemData:
    """Model data. ``g`` is the trace jump, ``h`` boundary data h(x, y, t, nx, ny)."""

    f: Optional[fem.ScalarField] = None
    g: Optional[fem.ScalarField] = None
    h: Optional[Callable] = None
    diffusion: float = 1.0
    dirichlet: dict = field(default_factory=dict)
    T: float = 1.0
    initial: Optional[fem.ScalarField] = None


class CoupledOperators:
    """All matrices of the coupled system on one mesh."""

    def __init__(self, mesh: TriMesh, diffusion: float = 1.0):
        self.mesh = mesh
        self.space = fem.FemSpace(mesh)
        self.pair = bem.BemSpacePair(extract_boundary(mesh, COUPLING))
        n = self.space.n_dofs
        self.M = fem.assemble_mass(self.space)
        self.A = fem.assemble_stiffness(self.space, diffusion)
        self.V = bem.assemble_single_layer(self.pair)
        self.K = bem.assemble_double_layer(self.pair)
        self.C, self.Mg = bem.assemble_trace_coupling(self.pair, n)
        self.R = bem.trace_restriction(self.pair, n)
        # (1/2 M_G - K) acting on trace dofs
        self.trace_op = 0.5 * self.Mg.toarray() - self.K

    @property
    def n_volume(self) -> int:
        return self.space.n_dofs

    @property
    def n_flux(self) -> int:
        return self.pair.n_flux


def assemble_saddle_system(M, A, C, K, V, Mg, R, tau: float, theta: float = 1.0):
    """Block matrix [[M/tau + theta A, -C], [theta (1/2 M_G - K) R, V]]."""
    if tau <= 0:
        raise ValueError("time step must be positive")
    n = M.shape[0]
    m = V.shape[0]
    if A.shape != (n, n) or C.shape != (n, m) or R.shape[1] != n or K.shape != (m, R.shape[0]):
        raise ValueError("dimension mismatch in coupled blocks")
    B = sp.csr_matrix((0.5 * sp.csr_matrix(Mg) - sp.csr_matrix(K)) @ R)
    return linalg.block_matrix([[M / tau + theta * A, -C], [theta * B, V]])


@dataclass
class CoupledTrajectory:
    """u at the time nodes (piecewise linear in t), phi per interval (piecewise constant)."""

    u: np.ndarray  # (N + 1, n_volume)
    phi: np.ndarray  # (N, n_flux)
    tgrid: TimeGrid
    ops: CoupledOperators
    n_factorizations: int = 0

    def u_at(self, t: float) -> np.ndarray:
        nodes = self.tgrid.nodes
        k = int(np.clip(np.searchsorted(nodes, t, side="right"), 1, len(nodes) - 1))
        s = (t - nodes[k - 1]) / (nodes[k] - nodes[k - 1])
        return (1.0 - s) * self.u[k - 1] + s * self.u[k]

    def phi_at(self, t: float) -> np.ndarray:
        nodes = self.tgrid.nodes
        k = int(np.clip(np.searchsorted(nodes, t, side="left"), 1, len(nodes) - 1))
        return self.phi[k - 1]

    def du(self, n: int) -> np.ndarray:
        """Difference quotient (u^n - u^{n-1}) / tau^n."""
        return (self.u[n] - self.u[n - 1]) / self.tgrid.tau(n)


class Stepper:
    """Factorised step operator; refactorises only when tau changes."""

    def __init__(self, ops: CoupledOperators, scheme: WeightScheme = WeightScheme.EULER,
                 dirichlet_dofs: np.ndarray | None = None):
        self.ops = ops
        self.scheme = scheme
        self.dofs = np.zeros(0, dtype=int) if dirichlet_dofs is None else dirichlet_dofs
        self.n_factorizations = 0
        self._tau = None

    def _prepare(self, tau: float):
        if tau == self._tau:
            return
        o = self.ops
        self.matrix = assemble_saddle_system(o.M, o.A, o.C, o.K, o.V, o.Mg, o.R, tau,
                                             self.scheme.theta)
        self.constrained = fem.constrain_matrix(self.matrix, self.dofs)
        self.lu = linalg.factorize(self.constrained)
        self.n_factorizations += 1
        self._tau = tau

    def step(self, prev_u, fhat, ghat, tau: float, dirichlet_values=None):
        self._prepare(tau)
        o = self.ops
        th = self.scheme.theta
        rhs1 = fhat + o.M @ prev_u / tau
        rhs2 = np.array(ghat, dtype=float)
        if th != 1.0:
            rhs1 -= (1.0 - th) * (o.A @ prev_u)
            rhs2 -= (1.0 - th) * (o.trace_op @ (o.R @ prev_u))
        rhs = np.concatenate([rhs1, rhs2])
        if len(self.dofs):
            rhs = fem.lift_rhs(self.matrix, rhs, self.dofs, dirichlet_values)
        x = self.lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("diverged")
        n = o.n_volume
        return x[:n], x[n:]


def step(stepper: Stepper, prev_u, fhat, ghat, tau: float, dirichlet_values=None):
    return stepper.step(prev_u, fhat, ghat, tau, dirichlet_values)


def data_averages(data: ProblemData, ops: CoupledOperators, t0: float, t1: float,
                  scheme: WeightScheme, quad: QuadConfig, panels: int = 1):
    """Weighted averages of the load functional and of the trace data."""
    space = ops.space
    nodes = ops.pair.boundary.nodes

    def load(t):
        return fem.assemble_load(space, data.f, data.h, t, quad.volume_order, quad.edge_points)

    fhat = weighted_average(load, t0, t1, scheme, quad.time_points, panels)
    if data.g is None:
        ghat = np.zeros(ops.n_flux)
    else:
        gnodes = weighted_average(lambda t: data.g(nodes[:, 0], nodes[:, 1], t), t0, t1,
                                  scheme, quad.time_points, panels)
        ghat = ops.trace_op @ gnodes
    return fhat, ghat


def solve_evolution(data: ProblemData, mesh: TriMesh, tgrid: TimeGrid,
                    scheme: WeightScheme = WeightScheme.EULER,
                    quad: QuadConfig = QuadConfig(),
                    ops: CoupledOperators | None = None,
                    callback: Callable | None = None) -> CoupledTrajectory:
    """March the fully discrete scheme over ``tgrid``.

    ``callback(n, t, u, phi)`` is called after every step.
    """
    if ops is None:
        ops = CoupledOperators(mesh, data.diffusion)
    if tgrid.tau_max > 0.25:
        warnings.warn(f"tau_max = {tgrid.tau_max} > 1/4; well-posedness is only "
                      "guaranteed for smaller steps", RuntimeWarning, stacklevel=2)
    dofs = np.zeros(0, dtype=int)
    if data.dirichlet:
        dofs, _ = fem.dirichlet_values(mesh, data.dirichlet, tgrid.nodes[1])
    stepper = Stepper(ops, scheme, dofs)
    N = tgrid.n_intervals
    u = np.zeros((N + 1, ops.n_volume))
    phi = np.zeros((N, ops.n_flux))
    if data.initial is not None:
        u[0] = fem.l2_project(ops.space, data.initial, 0.0, quad.volume_order)
    nodes = tgrid.nodes
    for n in range(1, N + 1):
        t0, t1 = nodes[n - 1], nodes[n]
        panels = quad.first_interval_panels if n == 1 else 1
        fhat, ghat = data_averages(data, ops, t0, t1, scheme, quad, panels)
        vals = fem.dirichlet_values(mesh, data.dirichlet, t1)[1] if data.dirichlet else None
        u[n], phi[n - 1] = stepper.step(u[n - 1], fhat, ghat, tgrid.tau(n), vals)
        if callback is not None:
            callback(n, t1, u[n], phi[n - 1])
    log.debug("solved %d steps with %d factorisations", N, stepper.n_factorizations)
    return CoupledTrajectory(u, phi, tgrid, ops, stepper.n_factorizations)
