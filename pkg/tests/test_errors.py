import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parafembem import bem, cases, errors, fem
from parafembem.fem import ScalarField
from parafembem.mesh import BoundaryMesh, build_lshape_mesh, build_time_grid, refine_boundary
from parafembem.quadrature import triangle_rule
from parafembem.timestep import CoupledOperators, CoupledTrajectory, solve_evolution

# number of triangle-rule points -> rule degree
RULE_BY_POINTS = {len(triangle_rule(d)[1]): d for d in (1, 2, 4, 5)}


@pytest.fixture(scope="module")
def ops0():
    return CoupledOperators(build_lshape_mesh(0))


def trajectory(ops, u_of_t, phi_of_t, N=4):
    grid = build_time_grid(1.0, N)
    u = np.array([u_of_t(t) for t in grid.nodes])
    phi = np.array([phi_of_t(n) for n in range(N)])
    return CoupledTrajectory(u, phi, grid, ops)


def discrete_as_exact(traj):
    """The trajectory itself as an evaluator at quadrature points of the volume mesh."""
    space = traj.ops.space

    def value(x, y, t):
        return space.evaluate(traj.u_at(t), RULE_BY_POINTS[x.shape[1]])

    def grad(x, y, t):
        g = space.gradient(traj.u_at(t))
        return (np.broadcast_to(g[:, :1], x.shape), np.broadcast_to(g[:, 1:], x.shape))

    def dt(x, y, t):
        n = min(int(np.searchsorted(traj.tgrid.nodes, t)), traj.tgrid.n_intervals)
        return space.evaluate(traj.du(max(n, 1)), RULE_BY_POINTS[x.shape[1]])

    return ScalarField(value, grad, dt)


def test_zero_for_own_trajectory(ops0):
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((2, ops0.n_volume))
    traj = trajectory(ops0, lambda t: a + t * b, lambda n: np.zeros(ops0.n_flux))
    ex = discrete_as_exact(traj)
    assert errors.bochner_error(traj, ex, "L2") < 1e-13
    assert errors.bochner_error(traj, ex, "H1semi") < 1e-12
    assert errors.dual_norm_bound(traj, ex) < 1e-12


def test_linear_in_time_against_zero(ops0):
    traj = trajectory(ops0, lambda t: np.zeros(ops0.n_volume), lambda n: np.zeros(ops0.n_flux))
    u = ScalarField(lambda x, y, t: t + 0 * x, lambda x, y, t: (0 * x, 0 * x),
                    lambda x, y, t: 1 + 0 * x)
    assert errors.bochner_error(traj, u, "L2") == pytest.approx(math.sqrt(0.1875 / 3), rel=1e-13)
    assert errors.bochner_error(traj, u, "H1semi") == 0.0


def test_bochner_rejects(ops0):
    traj = trajectory(ops0, lambda t: np.zeros(ops0.n_volume), lambda n: np.zeros(ops0.n_flux))
    with pytest.raises(ValueError):
        errors.bochner_error(traj, fem.ZERO, "H2")
    with pytest.raises(ValueError):
        errors.bochner_error(traj, fem.ZERO, "L2", q_t=1)


def test_dual_norm_zero_when_stationary(ops0):
    c = np.full(ops0.n_volume, 2.5)
    traj = trajectory(ops0, lambda t: c, lambda n: np.zeros(ops0.n_flux))
    assert errors.dual_norm_bound(traj, fem.constant(2.5)) == 0.0


def test_dual_norm_single_hat(ops0):
    """d_t e_h = phi_i: z solves (A_1 + M) z = -M e_i and the bound is sqrt(z^T b)."""
    i = 3
    e = np.zeros(ops0.n_volume)
    e[i] = 1.0
    traj = trajectory(ops0, lambda t: t * e, lambda n: np.zeros(ops0.n_flux))
    dn = errors._DualNorm(ops0.space)
    b = -dn.M @ e
    z = dn.lu.solve(b)
    A1M = fem.assemble_stiffness(ops0.space, 1.0) + dn.M
    assert np.linalg.norm(A1M @ z - b) <= 1e-12 * np.linalg.norm(b)
    assert z @ b > 0
    assert errors.dual_norm_bound(traj, fem.ZERO) == pytest.approx(math.sqrt(z @ b), rel=1e-12)


def test_dual_norm_constant_shift_invariant():
    ex = cases.smooth()
    mesh = build_lshape_mesh(0)
    traj = solve_evolution(ex.problem(), mesh, build_time_grid(1.0, 20))
    shifted = ScalarField(lambda x, y, t: ex.u(x, y, t) + 3.0, ex.u.grad, ex.u.dt)
    assert errors.dual_norm_bound(traj, ex.u) == errors.dual_norm_bound(traj, shifted)


def nearest_segment_flux(bm, values):
    def flux(x, y, t, nx, ny):
        d = (x[..., None] - bm.midpoints[:, 0]) ** 2 + (y[..., None] - bm.midpoints[:, 1]) ** 2
        return values[np.argmin(d, axis=-1)]
    return flux


def test_v_error_zero_for_own_flux(ops0):
    phi = np.linspace(-1, 1, ops0.n_flux)
    traj = trajectory(ops0, lambda t: np.zeros(ops0.n_volume), lambda n: phi)
    flux = nearest_segment_flux(ops0.pair.boundary, phi)
    assert errors.v_energy_error(traj, flux) < 1e-12
    with pytest.raises(ValueError):
        errors.v_energy_error(traj, flux, refine_extra=0)


@pytest.mark.parametrize("h", [0.1, 0.4])
def test_v_norm_of_constant_on_one_segment(h):
    seg = BoundaryMesh(np.array([[0.0, 0.0], [h, 0.0]]), np.array([[0, 1]]))
    fine = refine_boundary(seg, 2)
    V = bem.assemble_single_layer(bem.BemSpacePair(fine))
    e = np.full(fine.n_segments, 0.7)
    assert e @ V @ e == pytest.approx(0.49 * (h * h / (2 * np.pi)) * (1.5 - np.log(h)), rel=1e-12)


def test_projected_reference(ops0):
    traj = trajectory(ops0, lambda t: np.zeros(ops0.n_volume), lambda n: np.zeros(ops0.n_flux))
    bm = ops0.pair.boundary
    vals = np.arange(bm.n_segments, dtype=float)
    ubar, pbar = errors.projected_reference(traj, fem.constant(1.5), nearest_segment_flux(bm, vals),
                                            0.3)
    assert np.allclose(ubar, 1.5, atol=1e-12)
    assert np.allclose(pbar, vals)


def test_compute_eoc_examples():
    assert np.allclose(errors.compute_eoc([1, 0.5, 0.25], [0.1, 0.05, 0.025]), [1, 1])
    h = 0.125 * 0.5 ** np.arange(4)
    assert np.allclose(errors.compute_eoc(h ** (2 / 3), h), 2 / 3)
    tau = 0.05 * 0.5 ** np.arange(4)
    assert np.allclose(errors.compute_eoc(tau ** (1 / 3), tau), 1 / 3)
    r = errors.compute_eoc([1.0, 0.0, 0.5], [1.0, 0.5, 0.25])
    assert np.isnan(r).all()
    with pytest.raises(ValueError):
        errors.compute_eoc([1.0], [1.0])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(1e-3, 10.0), st.integers(2, 6))
def test_eoc_recovers_power(p, c, n):
    h = 0.5 ** np.arange(n)
    assert np.allclose(errors.compute_eoc(c * h ** p, h), p, rtol=1e-9)


def test_report_rejects_bad_rows():
    rep = errors.ErrorReport()
    row = dict.fromkeys(errors.COLUMNS, 1.0)
    rep.append(row)
    with pytest.raises(ValueError):
        rep.append({**row, "errorL2": -1.0})
    with pytest.raises(ValueError):
        rep.append({**row, "errorH1dual": float("nan")})
    assert len(rep) == 1


@pytest.fixture(scope="module")
def smooth_rows():
    ex = cases.smooth()
    rep = errors.ErrorReport()
    for level in range(3):
        mesh = build_lshape_mesh(level)
        grid = build_time_grid(1.0, 20 * 2**level)
        traj = solve_evolution(ex.problem(), mesh, grid)
        row = errors.measure(traj, ex.u, ex.flux())
        row.update(invmaxMeshsizeh=1 / mesh.h, numberTimeintervals=grid.n_intervals)
        rep.append(row)
    return rep, traj, ex


def test_measure_matches_single_norms(smooth_rows):
    rep, traj, ex = smooth_rows
    row = rep.rows[-1]
    assert row["errorL2"] == pytest.approx(errors.bochner_error(traj, ex.u, "L2"), rel=1e-12)
    assert row["errorH1semi"] == pytest.approx(errors.bochner_error(traj, ex.u, "H1semi"), rel=1e-12)
    assert row["errorH1dual"] == pytest.approx(errors.dual_norm_bound(traj, ex.u), rel=1e-12)
    assert row["errorenergyV"] == pytest.approx(errors.v_energy_error(traj, ex.flux()), rel=1e-12)
    full = math.sqrt(row["errorL2"] ** 2 + row["errorH1semi"] ** 2 + row["errorH1dual"] ** 2)
    assert row["globalEnergy"] == pytest.approx(full + row["errorenergyV"], rel=1e-14)


def test_smooth_l2_steeper_than_energy(smooth_rows):
    rep = smooth_rows[0]
    assert rep.eoc("errorL2")[-1] >= 1.5
    assert rep.eoc("errorL2proj")[-1] >= 1.5
    assert rep.eoc("errorH1semi")[-1] > 0.8


def test_projected_columns_bounded_by_full_in_l2(smooth_rows):
    rep = smooth_rows[0]
    # the discrete part is the projection of the full error onto H^h, up to the time interpolation
    assert np.all(rep.column("errorL2proj") <= 1.01 * rep.column("errorL2"))
