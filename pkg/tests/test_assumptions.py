import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from helpers import capped_cone, cone, shell, square
from sweepsim.assumptions import (
    active_generators,
    certify,
    check_A1,
    check_A3,
    check_A4,
    descent_direction,
)
from sweepsim.constraints import ConstraintFamily, MaxAffine
from sweepsim.errors import InfeasibleDirection
from sweepsim.geometry import min_norm_point

BUDGET = 2000


def polygon_lp(G, sides=64):
    """max delta s.t. <g, v> <= -delta for all rows g, v in the inscribed regular polygon."""
    G = np.atleast_2d(G)
    ang = 2 * np.pi * (np.arange(sides) + 0.5) / sides
    U = np.column_stack([np.cos(ang), np.sin(ang)])
    A = np.vstack([np.column_stack([G, np.ones(len(G))]), np.column_stack([U, np.zeros(sides)])])
    b = np.concatenate([np.zeros(len(G)), np.full(sides, math.cos(math.pi / sides))])
    res = linprog([0, 0, -1], A_ub=A, b_ub=b, bounds=[(None, None)] * 3, method="highs")
    return -res.fun, res.x[:2]


def circle_search(G, n=10_000):
    ang = 2 * np.pi * np.arange(n) / n
    V = np.column_stack([np.cos(ang), np.sin(ang)])
    margins = -(np.atleast_2d(G) @ V.T).max(axis=0)
    return margins.max()


# -- A1


def test_A1_examples():
    L1, per = check_A1(cone(), BUDGET)
    assert L1 == pytest.approx(1.0, abs=1e-12)
    assert check_A1(square(), BUDGET)[0] == 0.0
    L1, per = check_A1(capped_cone(), BUDGET)
    np.testing.assert_allclose(per, [1.0, 1.0], atol=1e-12)


def test_A1_never_exceeds_registered():
    for F in (cone(), capped_cone(), square()):
        assert check_A1(F, BUDGET)[0] <= F.time_lipschitz() + 1e-9


def test_A1_budget_floor():
    with pytest.raises(ValueError):
        check_A1(cone(), 50)


# -- A3


def test_A3_convex_passes():
    rep = check_A3(cone(), 1e-3, BUDGET)
    assert rep["passed"] and rep["violations"] == [] and rep["monotone"] == [True]


def test_A3_affine_any_gamma():
    F = ConstraintFamily(2, 1.0, [MaxAffine([[1.0, 2.0]], 1.0, 0.0)])
    rep = check_A3(F, 1e-12, BUDGET)
    assert rep["passed"] and rep["gamma_est"] == 0.0


def test_A3_shell_refuted_with_exact_defect():
    rep = check_A3(shell(), 1.0, BUDGET)
    assert not rep["passed"]
    assert rep["monotone"] == [False]
    t, i, x1, x2, lhs, rhs = rep["violations"][0]
    d2 = float(np.sum((np.array(x1) - np.array(x2)) ** 2))
    assert lhs == pytest.approx(-2.0 * d2, rel=1e-9)
    assert rep["gamma_est"] == pytest.approx(2.0, rel=1e-9)


def test_A3_shell_passes_with_gamma_two():
    assert check_A3(shell(), 2.0 + 1e-6, BUDGET)["passed"]


def test_A3_rejects_nonpositive_gamma():
    with pytest.raises(ValueError):
        check_A3(cone(), 0.0)


# -- A4


def test_A4_cone():
    mu, wit = check_A4(cone(), BUDGET)
    assert mu == pytest.approx(1.0, abs=1e-12)
    t, x, v, delta = wit[0]
    np.testing.assert_allclose(v, [0.0, 1.0], atol=1e-12)


def test_A4_capped_cone_top_corner_margin():
    mu, wit = check_A4(capped_cone(), BUDGET)
    # least margin sits where a wing meets the cap: hull{(+-1,-1), (0,1)}
    G = np.array([[1.0, -1.0], [0.0, 1.0]])
    assert mu == pytest.approx(1 / math.sqrt(5), abs=1e-12)
    assert np.linalg.norm(min_norm_point(G)) == pytest.approx(1 / math.sqrt(5), abs=1e-15)
    # 10^4 directions resolve the optimum to about (2 pi / 10^4)^2
    assert 1 / math.sqrt(5) - 1e-4 <= circle_search(G) <= 1 / math.sqrt(5) + 1e-12
    lp, _ = polygon_lp(G)
    assert abs(lp - 1 / math.sqrt(5)) <= (1 - math.cos(math.pi / 64))


def test_A4_single_affine():
    a = np.array([3.0, -4.0])
    F = ConstraintFamily(2, 1.0, [MaxAffine([a], 0.0, -1.0)])
    mu, wit = check_A4(F, BUDGET)
    assert mu == pytest.approx(5.0)
    np.testing.assert_allclose(wit[0][2], -a / 5.0)


def test_A4_refuted_on_degenerate_set():
    F = ConstraintFamily(2, 1.0, [MaxAffine([[1.0, 0.0]], 0.0, 0.0), MaxAffine([[-1.0, 0.0]], 0.0, 0.0)])
    with pytest.raises(InfeasibleDirection) as exc:
        check_A4(F, BUDGET)
    assert exc.value.witness is not None


@given(st.floats(0.1, 10.0))
def test_A4_scaling(c):
    mu, wit = check_A4(cone(), 400)
    mu_c, wit_c = check_A4(cone().scaled(c), 400)
    assert mu_c == pytest.approx(c * mu, rel=1e-9)
    np.testing.assert_allclose(wit_c[0][2], wit[0][2], atol=1e-9)


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=4))
def test_min_norm_margin_matches_lp(rows):
    G = np.array(rows)
    exact = float(np.linalg.norm(min_norm_point(G)))
    lp, _ = polygon_lp(G)
    lp = max(lp, 0.0)
    assert abs(lp - exact) <= (1 - math.cos(math.pi / 64)) * (1 + exact) + 1e-7


def test_descent_direction_and_active_generators():
    F = cone()
    assert active_generators(F, 0.0, [0.0, 1.0]) is None
    v, delta = descent_direction(F, 0.0, [0.0, 0.0])
    np.testing.assert_allclose(v, [0.0, 1.0], atol=1e-15)
    assert delta == pytest.approx(1.0)
    v, delta = descent_direction(F, 0.0, [1.0, 1.0])
    np.testing.assert_allclose(v, np.array([-1.0, 1.0]) / math.sqrt(2))


# -- full report


def test_certify_cone_report():
    rep = certify(cone(), 1e-6, BUDGET)
    assert rep.all_passed
    d = rep.to_dict()
    assert d["r"] == pytest.approx(1e6)
    assert d["theta"] == pytest.approx(1.0)
    assert d["rho"] is None
    assert "no violation found" in d["semantics"]


def test_certify_shell_refutes_A3_only():
    rep = certify(shell(), 1.0, BUDGET)
    assert rep.passed == {"A1": True, "A2": True, "A3": False, "A4": True}
    assert "r" not in rep.to_dict()


def test_certify_static_square():
    rep = certify(square(), 1e-6, BUDGET)
    assert rep.all_passed
    assert rep.L1_est == 0.0
    assert rep.mu_est == pytest.approx(1 / math.sqrt(2))
