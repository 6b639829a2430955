"""Space-time error norms of a coupled trajectory against an exact solution.

All time integrals use Gauss points per interval; the discrete u is linear
and the discrete flux constant on every interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bem, fem, linalg
from .fem import ScalarField
from .mesh import refine_boundary
from .quadrature import time_rule
from .timestep import CoupledTrajectory

COLUMNS = [
    "invmaxMeshsizeh", "numberTimeintervals",
    "errorL2", "errorL2proj", "errorH1semi", "errorH1semiproj",
    "errorH1dual", "errorenergyV", "errorenergyVproj",
    "globalEnergy", "globalEnergyproj",
]
ERROR_COLUMNS = COLUMNS[2:]


def _time_points(traj: CoupledTrajectory, q_t: int, first_panels: int):
    if q_t < 2:
        raise ValueError("time quadrature needs at least 2 points")
    return time_rule(traj.tgrid.nodes, q_t, first_panels)


def _spatial_errors_sq(space: fem.FemSpace, u: ScalarField, coeffs, t, degree):
    """(||u - u_h||^2_L2, ||grad(u - u_h)||^2_L2) by element quadrature."""
    pts, w, _ = space.quadrature_points(degree)
    x, y = pts[..., 0], pts[..., 1]
    e = u(x, y, t) - space.evaluate(coeffs, degree)
    gx, gy = u.grad(x, y, t)
    gh = space.gradient(coeffs)
    ex = gx - gh[:, 0:1]
    ey = gy - gh[:, 1:2]
    return float(np.sum(w * e * e)), float(np.sum(w * (ex * ex + ey * ey)))


def bochner_error(traj: CoupledTrajectory, exact: ScalarField, kind: str = "L2",
                  q_t: int = 4, first_panels: int = 1, degree: int = 4) -> float:
    """L2(0,T; L2) or L2(0,T; H1-seminorm) error of the volume field."""
    if kind not in ("L2", "H1semi"):
        raise ValueError(f"unknown norm kind {kind!r}")
    k = 0 if kind == "L2" else 1
    ts, ws, _ = _time_points(traj, q_t, first_panels)
    acc = 0.0
    for t, w in zip(ts, ws):
        acc += w * _spatial_errors_sq(traj.ops.space, exact, traj.u_at(t), t, degree)[k]
    return math.sqrt(acc)


def projected_reference(traj: CoupledTrajectory, exact: ScalarField, flux, t: float,
                        projector: Optional[fem.L2Projector] = None, edge_points: int = 4):
    """L2 projections of u(t) onto the volume space and of phi(t) onto P0."""
    projector = projector or fem.L2Projector(traj.ops.space)
    return projector(exact, t), bem.segment_means(traj.ops.pair.boundary, flux, t, edge_points)


class _DualNorm:
    """||z||_{H1} with (A_1 + M) z = <d_t u, v_i> - M d_tau u^n."""

    def __init__(self, space: fem.FemSpace):
        self.space = space
        self.M = fem.assemble_mass(space)
        self.lu = linalg.factorize((fem.assemble_stiffness(space, 1.0) + self.M).tocsc())

    def squared(self, dt_exact: ScalarField, du: np.ndarray, t: float) -> float:
        b = fem.assemble_load(self.space, dt_exact, None, t) - self.M @ du
        z = self.lu.solve(b)
        return float(z @ b)


def dual_norm_bound(traj: CoupledTrajectory, exact: ScalarField, q_t: int = 4,
                    first_panels: int = 1) -> float:
    """Upper bound for the dual norm of the time-derivative error."""
    if exact.dt is None:
        raise ValueError("exact solution needs a time derivative")
    dtf = ScalarField(exact.dt)
    dn = _DualNorm(traj.ops.space)
    ts, ws, idx = _time_points(traj, q_t, first_panels)
    acc = sum(w * dn.squared(dtf, traj.du(n), t) for t, w, n in zip(ts, ws, idx))
    return math.sqrt(acc)


class _VNorm:
    """Flux error in the single-layer energy on a boundary mesh refined ``extra`` times."""

    def __init__(self, traj: CoupledTrajectory, extra: int, edge_points: int):
        if extra < 1:
            raise ValueError("refine_extra must be >= 1")
        self.fine = refine_boundary(traj.ops.pair.boundary, extra)
        self.V = bem.assemble_single_layer(bem.BemSpacePair(self.fine))
        self.k = 2 ** extra
        self.edge_points = edge_points

    def squared(self, flux, phi_h: np.ndarray, t: float) -> float:
        e = bem.segment_means(self.fine, flux, t, self.edge_points) - np.repeat(phi_h, self.k)
        return float(e @ self.V @ e)


def v_energy_error(traj: CoupledTrajectory, flux, refine_extra: int = 2, q_t: int = 4,
                   first_panels: int = 1, edge_points: int = 4) -> float:
    """L2(0,T; V) norm of phi - phi_h; ``flux`` is boundary data phi(x, y, t, nx, ny)."""
    vn = _VNorm(traj, refine_extra, edge_points)
    ts, ws, idx = _time_points(traj, q_t, first_panels)
    acc = sum(w * vn.squared(flux, traj.phi[n - 1], t) for t, w, n in zip(ts, ws, idx))
    return math.sqrt(acc)


def measure(traj: CoupledTrajectory, exact: ScalarField, flux, q_t: int = 4,
            first_panels: int = 1, degree: int = 4, refine_extra: int = 2,
            edge_points: int = 4) -> dict:
    """Every error column for one trajectory in a single pass over time points."""
    ops = traj.ops
    space = ops.space
    proj = fem.L2Projector(space)
    A1 = fem.assemble_stiffness(space, 1.0)
    dn = _DualNorm(space)
    vn = _VNorm(traj, refine_extra, edge_points)
    dtf = ScalarField(exact.dt)
    acc = dict.fromkeys(["L2", "H1", "L2p", "H1p", "dual", "V", "Vp"], 0.0)
    ts, ws, idx = _time_points(traj, q_t, first_panels)
    for t, w, n in zip(ts, ws, idx):
        uh = traj.u_at(t)
        phih = traj.phi[n - 1]
        l2, h1 = _spatial_errors_sq(space, exact, uh, t, degree)
        ubar = proj(exact, t)
        e = ubar - uh
        pbar = bem.segment_means(ops.pair.boundary, flux, t, edge_points)
        ep = pbar - phih
        acc["L2"] += w * l2
        acc["H1"] += w * h1
        acc["L2p"] += w * float(e @ (proj.mass @ e))
        acc["H1p"] += w * float(e @ (A1 @ e))
        acc["dual"] += w * dn.squared(dtf, traj.du(n), t)
        acc["V"] += w * vn.squared(flux, phih, t)
        acc["Vp"] += w * float(ep @ ops.V @ ep)
    r = {k: math.sqrt(max(v, 0.0)) for k, v in acc.items()}
    row = {
        "errorL2": r["L2"], "errorL2proj": r["L2p"],
        "errorH1semi": r["H1"], "errorH1semiproj": r["H1p"],
        "errorH1dual": r["dual"],
        "errorenergyV": r["V"], "errorenergyVproj": r["Vp"],
    }
    row["globalEnergy"] = math.sqrt(r["L2"] ** 2 + r["H1"] ** 2 + r["dual"] ** 2) + r["V"]
    row["globalEnergyproj"] = math.sqrt(r["L2p"] ** 2 + r["H1p"] ** 2 + r["dual"] ** 2) + r["Vp"]
    return row


def compute_eoc(values, params) -> np.ndarray:
    """rate_l = log(e_{l-1}/e_l) / log(p_{l-1}/p_l); NaN where undefined."""
    e = np.asarray(values, float)
    p = np.asarray(params, float)
    if len(e) < 2 or len(e) != len(p):
        raise ValueError("need at least two levels of matching length")
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.log(e[:-1] / e[1:]) / np.log(p[:-1] / p[1:])
    bad = (e[:-1] <= 0) | (e[1:] <= 0) | ~np.isfinite(rates)
    rates[bad] = np.nan
    return rates


@dataclass
class ErrorReport:
    """One row per refinement level; EOCs computed against 1/h or against 1/tau."""

    rows: list = field(default_factory=list)
    name: str = ""

    def append(self, row: dict) -> None:
        bad = [k for k in ERROR_COLUMNS if not (np.isfinite(row[k]) and row[k] >= 0)]
        if bad:
            raise ValueError(f"invalid error values in columns {bad}")
        self.rows.append(dict(row))

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], float)

    def eoc(self, name: str, against: str = "invmaxMeshsizeh") -> np.ndarray:
        """Rates with respect to h (or tau): positive for decreasing errors."""
        # errors vs the inverse parameter: rate = log(e_{l-1}/e_l) / log(P_l/P_{l-1})
        return compute_eoc(self.column(name), 1.0 / self.column(against))

    def __len__(self) -> int:
        return len(self.rows)
