import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from parafembem import cases, errors, fem
from parafembem.mesh import TimeGrid, build_lshape_mesh, build_time_grid
from parafembem.timestep import (CoupledOperators, ProblemData, QuadConfig, Stepper, WeightScheme,
                                 assemble_saddle_system, data_averages, solve_evolution,
                                 weighted_average)
from planted import max_relative_defect, planted_problem

EULER, CN = WeightScheme.EULER, WeightScheme.CRANK_NICOLSON


@pytest.fixture(scope="module")
def ops1():
    return CoupledOperators(build_lshape_mesh(1))


@pytest.mark.parametrize("scheme", [EULER, CN])
def test_weight_integrates_to_tau(scheme):
    assert weighted_average(lambda t: np.array([1.0]), 0.3, 0.55, scheme)[0] == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 1), st.floats(1e-2, 1))
def test_weight_identities(a, b, t0, tau):
    t1 = t0 + tau
    scale = 1e-13 * max(abs(a), abs(b), 1.0)

    def v(t):
        return np.array([a + (b - a) * (t - t0) / tau])

    assert abs(weighted_average(v, t0, t1, EULER)[0] - b) <= scale
    assert abs(weighted_average(v, t0, t1, CN)[0] - 0.5 * (a + b)) <= scale
    dv = weighted_average(lambda t: np.array([(b - a) / tau]), t0, t1, EULER)[0]
    assert dv == pytest.approx((b - a) / tau, rel=1e-13, abs=1e-13)


def test_weighted_average_needs_two_points():
    with pytest.raises(ValueError):
        weighted_average(lambda t: np.array([t]), 0.0, 1.0, EULER, q_t=1)


def test_saddle_system_reduces_to_heat_matrix(ops1):
    o = ops1
    Z = np.zeros_like(o.K)
    S = assemble_saddle_system(o.M, o.A, 0 * o.C, Z, np.eye(o.n_flux), 0 * o.Mg, o.R, 0.1)
    n = o.n_volume
    assert abs(S[:n, :n] - (o.M / 0.1 + o.A)).max() < 1e-14
    assert abs(S[:n, n:]).max() == 0 and abs(S[n:, :n]).max() == 0


def test_saddle_system_bitwise_repeatable(ops1):
    o = ops1
    S1 = assemble_saddle_system(o.M, o.A, o.C, o.K, o.V, o.Mg, o.R, 0.05)
    S2 = assemble_saddle_system(o.M, o.A, o.C, o.K, o.V, o.Mg, o.R, 0.05)
    assert (S1 != S2).nnz == 0


def test_saddle_system_errors(ops1):
    o = ops1
    with pytest.raises(ValueError, match="dimension mismatch"):
        assemble_saddle_system(o.M, o.A, o.C[:, :-1], o.K, o.V, o.Mg, o.R, 0.05)
    with pytest.raises(ValueError):
        assemble_saddle_system(o.M, o.A, o.C, o.K, o.V, o.Mg, o.R, 0.0)


def test_zero_data_zero_trajectory(ops1):
    traj = solve_evolution(ProblemData(), ops1.mesh, build_time_grid(1.0, 8), ops=ops1)
    assert np.all(traj.u == 0) and np.all(traj.phi == 0)


@pytest.mark.parametrize("scheme", [EULER, CN])
def test_planted_solution_reproduced(ops1, scheme):
    data, L, phi = planted_problem(ops1)
    traj = solve_evolution(data, ops1.mesh, build_time_grid(1.0, 10), scheme, ops=ops1)
    assert max_relative_defect(traj, L, phi) <= 1e-8


def test_planted_nonuniform_grid(ops1):
    data, L, phi = planted_problem(ops1)
    grid = TimeGrid(np.array([0.0, 0.05, 0.1, 0.25, 0.3, 0.5]))
    traj = solve_evolution(data, ops1.mesh, grid, ops=ops1)
    assert max_relative_defect(traj, L, phi) <= 1e-8
    assert traj.n_factorizations == 4  # steps 0.05, 0.05, 0.15, 0.05, 0.2

def test_single_factorization_uniform(ops1):
    data, _, _ = planted_problem(ops1)
    traj = solve_evolution(data, ops1.mesh, build_time_grid(1.0, 12), ops=ops1)
    assert traj.n_factorizations == 1


def test_matches_pure_fem_reference():
    """Coupling blocks switched off: the stepper is implicit Euler for the heat equation."""
    mesh = build_lshape_mesh(1)
    ops = CoupledOperators(mesh)
    ops.C = 0 * ops.C
    ops.Mg = 0 * ops.Mg
    ops.K = np.zeros_like(ops.K)
    ops.V = np.eye(ops.n_flux)
    ops.trace_op = np.zeros_like(ops.trace_op)
    ex = cases.smooth()
    data = ProblemData(f=ex.problem().f)
    grid = build_time_grid(1.0, 10)
    traj = solve_evolution(data, mesh, grid, ops=ops)

    quad = QuadConfig()
    space = fem.FemSpace(mesh)
    M, A = fem.assemble_mass(space), fem.assemble_stiffness(space)
    lhs = (M / grid.tau(1) + A).tocsc()
    u = np.zeros(space.n_dofs)
    for n in range(1, 11):
        fhat = weighted_average(lambda t: fem.assemble_load(space, data.f, None, t), grid.nodes[n - 1],
                                grid.nodes[n], EULER, quad.time_points)
        u = sp.linalg.spsolve(lhs, fhat + M @ u / grid.tau(n))
        assert np.abs(traj.u[n] - u).max() <= 1e-8 * max(np.abs(u).max(), 1.0)
    assert np.all(traj.phi == 0)


def test_large_step_warns(ops1):
    with pytest.warns(RuntimeWarning, match="tau_max"):
        solve_evolution(ProblemData(), ops1.mesh, build_time_grid(1.0, 2), ops=ops1)


def test_nan_data_diverges(ops1):
    data = ProblemData(f=fem.ScalarField(lambda x, y, t: np.full_like(x, np.nan)))
    with pytest.raises(FloatingPointError, match="diverged"):
        solve_evolution(data, ops1.mesh, build_time_grid(1.0, 4), ops=ops1)


def test_smooth_error_decreases():
    ex = cases.smooth()
    errs = []
    for level in (0, 1):
        traj = solve_evolution(ex.problem(), build_lshape_mesh(level), build_time_grid(1.0, 20 * 2**level))
        errs.append(errors.bochner_error(traj, ex.u, "H1semi"))
    assert errs[1] < errs[0]


def test_data_averages_shapes(ops1):
    data = cases.smooth().problem()
    f, g = data_averages(data, ops1, 0.0, 0.05, EULER, QuadConfig())
    assert f.shape == (ops1.n_volume,) and g.shape == (ops1.n_flux,)


def test_stepper_homogeneous(ops1):
    st_ = Stepper(ops1)
    u, phi = st_.step(np.zeros(ops1.n_volume), np.zeros(ops1.n_volume), np.zeros(ops1.n_flux), 0.1)
    assert np.all(u == 0) and np.all(phi == 0)
