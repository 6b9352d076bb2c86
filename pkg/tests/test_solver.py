import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import capped_cone, cone, shell, square
from sweepsim import oracles
from sweepsim.errors import AdmissionError, BoundViolated, ConfigurationError, InfeasibleInitial
from sweepsim.geometry import ITERATIVE_TOL
from sweepsim.solver import (
    SweepingProblem,
    Trajectory,
    admit,
    affine_in_t,
    catching_up,
    check_envelopes,
    gravity,
    march,
    refined_grid,
    solution_bound,
    uniform_grid,
    velocity_bound_check,
    zero_perturbation,
)

G0 = oracles.G0


def problem(x0, T=3.0, g=None, fam=cone):
    return SweepingProblem(fam(), g or zero_perturbation(2), x0, T)


def test_example1_exact():
    tr = catching_up(problem([0.0, 0.0]), 1000)
    np.testing.assert_allclose(tr.states, oracles.example1(tr.grid), atol=1e-12)


def test_example2_exact_on_grid():
    x0 = (0.5, 1.0)
    tr = catching_up(problem(x0), 300)
    np.testing.assert_allclose(tr.states, oracles.example2(x0, tr.grid), atol=1e-12)


@pytest.mark.parametrize("x0", [(0.0, 1.0), (0.3, 0.6), (-0.4, 1.5)])
def test_example3_first_order(x0):
    N = 1000
    p = SweepingProblem(cone(), gravity(2), x0, 1.0)
    tr = catching_up(p, N)
    err = np.linalg.norm(tr.states - oracles.example3(x0, tr.grid), axis=1).max()
    assert err <= 10 * (1.0 / N)


def test_refined_grid_solve():
    x0 = (0.0, 1.0)
    bp = oracles.breakpoints(x0, G0)
    grid = refined_grid(1.0, 500, [bp.theta1])
    assert grid.size > 501 and grid[0] == 0.0 and grid[-1] == 1.0
    tr = catching_up(SweepingProblem(cone(), gravity(2), x0, 1.0), 0, grid=grid)
    err = np.linalg.norm(tr.states - oracles.example3(x0, tr.grid), axis=1).max()
    assert err <= 10 / 500


@given(st.floats(-1, 1), st.floats(0, 2))
def test_states_stay_feasible(x1, dx2):
    x0 = (x1, abs(x1) + dx2)
    tr = catching_up(problem(x0, g=gravity(2)), 200, admission=False)
    F = cone()
    vals = np.array([F.max_value(t, x)[0] for t, x in zip(tr.grid, tr.states)])
    assert vals.max() <= 1e-12


def test_batch_march_matches_single():
    X0 = np.array([[0.5, 1.0], [-0.2, 0.3], [0.0, 2.0]])
    grid = uniform_grid(3.0, 100)
    B = march(capped_cone(), zero_perturbation(2), X0[:, :], grid)
    for j, x0 in enumerate(X0):
        np.testing.assert_array_equal(B[:, j], march(capped_cone(), zero_perturbation(2), x0, grid)[:, 0])


def test_seed_invariance_with_iterative_projection():
    x0 = (0.5, 1.0)
    p = problem(x0)
    exact = catching_up(p, 60, admission=False)
    ends = [catching_up(p, 60, method="iterative", seed=s, admission=False).states for s in (0, 1, 2)]
    for e in ends:
        np.testing.assert_allclose(e, exact.states, atol=10 * ITERATIVE_TOL)


def test_infeasible_initial_named():
    with pytest.raises(InfeasibleInitial) as exc:
        catching_up(problem([0.0, -1.0]), 100)
    assert "f1" in str(exc.value) and exc.value.violated == ("f1",)
    with pytest.raises(InfeasibleInitial) as exc:
        catching_up(problem([0.0, 1.5], fam=capped_cone), 100)
    assert exc.value.violated == ("f2",)


def test_initial_value_healing():
    with pytest.warns(UserWarning, match="projected"):
        tr = catching_up(problem([0.0, -0.005]), 100)
    np.testing.assert_allclose(tr.states[0], [0.0, 0.0], atol=1e-15)
    with pytest.raises(InfeasibleInitial):
        catching_up(problem([0.0, -0.005]), 100, heal_radius=1e-3)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        uniform_grid(3.0, 1)
    with pytest.raises(ConfigurationError):
        uniform_grid(1e-14, 10)
    p = problem([0.0, 0.0])
    for bad in ([0.0, 1.0], [0.0, 2.0, 1.0, 3.0], [0.1, 1.0, 3.0], [0.0, 1.0, 2.5]):
        with pytest.raises(ConfigurationError):
            catching_up(p, 0, grid=bad, admission=False)


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        SweepingProblem(cone(), zero_perturbation(2), [0.0, 0.0, 0.0])
    with pytest.raises(ConfigurationError):
        SweepingProblem(cone(), zero_perturbation(2), [0.0, np.nan])
    with pytest.raises(ConfigurationError):
        SweepingProblem(cone(), zero_perturbation(2), [0.0, 0.0], T=4.0)


def test_admission_rejects_nonconvex_shell():
    p = SweepingProblem(shell(), zero_perturbation(2), [2.0, 0.0])
    with pytest.raises(AdmissionError, match="A3"):
        catching_up(p, 10, gamma=1.0)


def test_admission_report_certificate():
    adm = admit(problem([0.0, 0.0]))
    assert adm.passed
    assert adm.certificate.r == pytest.approx(1e6)
    assert adm.certificate.theta == pytest.approx(1.0)


def test_envelope_checks():
    assert check_envelopes(problem([0.0, 1.0], g=gravity(2))) == []
    from sweepsim.solver import Perturbation

    liar = Perturbation(lambda t, x: np.array([0.0, 5.0]), lambda t: 0.1, None, True)
    bad = check_envelopes(problem([0.0, 1.0], g=liar))
    assert bad and bad[0]["kind"] == "growth"


def test_perturbations():
    g = gravity(2, 2.0)
    np.testing.assert_array_equal(g(0.5, np.zeros(2)), [0.0, 1.0])
    assert g.beta(0.5) == 1.0
    a = affine_in_t([1.0, 0.0], [0.0, 2.0])
    np.testing.assert_array_equal(a(1.0, None), [1.0, 2.0])
    assert a.beta(1.0) == pytest.approx(math.sqrt(5))
    X = np.ones((3, 2))
    np.testing.assert_array_equal(a.batch(1.0, X), [[1.0, 2.0]] * 3)
    assert zero_perturbation(3).is_zero


def test_constant_solution_on_static_set():
    x0 = (0.3, 0.7)
    tr = catching_up(SweepingProblem(square(), zero_perturbation(2), x0), 10)
    np.testing.assert_array_equal(tr.states, np.tile(x0, (11, 1)))


# -- velocity bound


def test_solution_bound_quadrature_matches_analytic():
    for x0, T, vd in [((0.0, 1.0), 1.0, 1.0), ((0.5, 1.0), 1.0, 1.0), ((0.0, 0.0), 0.7, 2.0)]:
        p = SweepingProblem(cone(), gravity(2), x0, T)
        b = solution_bound(p, vd)
        n0 = float(np.linalg.norm(x0))
        analytic = n0 + math.exp(G0 * T**2) * (G0 * T**2 * (1 + n0) + vd * T)
        assert b.M_x0 == pytest.approx(analytic, rel=1e-8)
    p = SweepingProblem(cone(), gravity(2), (0.0, 1.0), 1.0)
    assert solution_bound(p, 1.0).M_x0 == pytest.approx(1 + math.exp(9.8) * 20.6, rel=1e-8)


def test_solution_bound_unforced():
    b = solution_bound(problem([0.5, 1.0]), 1.0)
    assert b.M_x0 == pytest.approx(math.hypot(0.5, 1.0) + 3.0)
    assert b.envelope(1.0) == 1.0


@pytest.mark.parametrize(
    "x0,T,g", [((0.0, 0.0), 3.0, None), ((0.5, 1.0), 3.0, None), ((0.0, 1.0), 1.0, gravity(2))]
)
def test_velocity_bound_holds(x0, T, g):
    N = 1000
    p = problem(x0, T, g)
    tr = catching_up(p, N)
    rep = velocity_bound_check(tr, solution_bound(p, 1.0), 10 * T / N)
    assert rep.passed


def test_velocity_bound_violation_raises():
    p = problem([0.0, 0.0])
    tr = catching_up(p, 100)
    bad = tr.states.copy()
    bad[50:] += [0.0, 1.0]
    with pytest.raises(BoundViolated) as exc:
        velocity_bound_check(Trajectory(tr.grid, bad, p), solution_bound(p, 1.0))
    assert exc.value.step == 49
    rep = velocity_bound_check(Trajectory(tr.grid, bad, p), solution_bound(p, 1.0), raise_on_violation=False)
    assert not rep.passed and rep.worst_step == 49


def test_trajectory_accessors():
    tr = catching_up(problem([0.0, 0.0]), 10)
    assert len(tr) == 11
    assert tr.velocities.shape == (10, 2)
    np.testing.assert_allclose(tr.velocities, [[0.0, 1.0]] * 10)
    np.testing.assert_allclose(tr.endpoint, [0.0, 3.0])
