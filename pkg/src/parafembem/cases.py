"""Manufactured solutions on the L-shape and the data they induce."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fem import ScalarField, normal_derivative
from .timestep import ProblemData

EXTERIOR_CENTER = (-0.125, 0.125)
R_FLOOR = 1e-300


# spatial profile p(x) = (1 - 100 rho^2) exp(-50 rho^2), rho^2 = x^2 + y^2
def _hat(x, y):
    s = x * x + y * y
    return (1.0 - 100.0 * s) * np.exp(-50.0 * s)


def _hat_grad(x, y):
    s = x * x + y * y
    dp = np.exp(-50.0 * s) * (-150.0 + 5000.0 * s)  # dp/ds
    return 2.0 * x * dp, 2.0 * y * dp


def _hat_lap(x, y):
    s = x * x + y * y
    return np.exp(-50.0 * s) * (-600.0 + 70000.0 * s - 1.0e6 * s * s)


def _polar(x, y):
    r = np.maximum(np.hypot(x, y), R_FLOOR)
    theta = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    return r, theta


def _corner(x, y):
    r, th = _polar(x, y)
    return r ** (2.0 / 3.0) * np.sin(2.0 * th / 3.0)


def _corner_grad(x, y):
    r, th = _polar(x, y)
    c = (2.0 / 3.0) * r ** (-1.0 / 3.0)
    return -c * np.sin(th / 3.0), c * np.cos(th / 3.0)


@dataclass(frozen=True)
class ExactSolution:
    """Interior field u with its Laplacian, exterior field u_e."""

    u: ScalarField
    laplacian: Callable
    u_e: ScalarField
    nonzero_initial: bool = False

    def flux(self):
        """phi = d u_e / dn on the interface, as boundary data."""
        return normal_derivative(self.u_e)

    def problem(self, T: float = 1.0) -> ProblemData:
        u, ue, lap = self.u, self.u_e, self.laplacian
        f = ScalarField(lambda x, y, t: u.dt(x, y, t) - lap(x, y, t))
        g = ScalarField(lambda x, y, t: u(x, y, t) - ue(x, y, t))
        dn_u, dn_ue = normal_derivative(u), normal_derivative(ue)

        def h(x, y, t, nx, ny):
            return dn_u(x, y, t, nx, ny) - dn_ue(x, y, t, nx, ny)

        init = ScalarField(lambda x, y, t: u(x, y, 0.0)) if self.nonzero_initial else None
        return ProblemData(f=f, g=g, h=h, diffusion=1.0, T=T, initial=init)


def exterior_log(center=EXTERIOR_CENTER) -> ScalarField:
    """u_e = (1 - t) log |x - center|."""
    cx, cy = center

    def val(x, y, t):
        return (1.0 - t) * 0.5 * np.log((x - cx) ** 2 + (y - cy) ** 2)

    def grad(x, y, t):
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        return (1.0 - t) * (x - cx) / r2, (1.0 - t) * (y - cy) / r2

    def dt(x, y, t):
        return -0.5 * np.log((x - cx) ** 2 + (y - cy) ** 2)

    return ScalarField(val, grad, dt)


def smooth() -> ExactSolution:
    """sin(2 pi t) times the hat profile."""
    w = 2.0 * np.pi
    u = ScalarField(
        lambda x, y, t: np.sin(w * t) * _hat(x, y),
        lambda x, y, t: tuple(np.sin(w * t) * g for g in _hat_grad(x, y)),
        lambda x, y, t: w * np.cos(w * t) * _hat(x, y),
    )
    return ExactSolution(u, lambda x, y, t: np.sin(w * t) * _hat_lap(x, y), exterior_log())


def corner() -> ExactSolution:
    """(1 + t^2) r^(2/3) sin(2 theta / 3); harmonic in space."""
    u = ScalarField(
        lambda x, y, t: (1.0 + t * t) * _corner(x, y),
        lambda x, y, t: tuple((1.0 + t * t) * g for g in _corner_grad(x, y)),
        lambda x, y, t: 2.0 * t * _corner(x, y),
    )
    return ExactSolution(u, lambda x, y, t: np.zeros_like(x), exterior_log(), nonzero_initial=True)


def time_singular() -> ExactSolution:
    """t^(5/6) times the hat profile."""

    def dt(x, y, t):
        return (5.0 / 6.0) * t ** (-1.0 / 6.0) * _hat(x, y) if t > 0 else np.zeros_like(x)

    u = ScalarField(
        lambda x, y, t: t ** (5.0 / 6.0) * _hat(x, y),
        lambda x, y, t: tuple(t ** (5.0 / 6.0) * g for g in _hat_grad(x, y)),
        dt,
    )
    return ExactSolution(u, lambda x, y, t: t ** (5.0 / 6.0) * _hat_lap(x, y), exterior_log())


CASES = {"smooth": smooth, "corner": corner, "time_singular": time_singular}
