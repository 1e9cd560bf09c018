import itertools
import math

import numpy as np
import pytest

from berknash.lp import EQ, FEAS_TOL, GEQ, LEQ, LinearProgram, solve_lp


def vertex_enumeration(lp):
    """Exhaustive oracle for programs with up to 3 variables: intersect every
    n-subset of constraint/bound hyperplanes and keep the best feasible point."""
    n = lp.objective.size
    rows = [(np.asarray(c, float), rel, b) for c, rel, b in lp.constraints]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if math.isfinite(lp.lower[j]):
            rows.append((e.copy(), GEQ, lp.lower[j]))
        if math.isfinite(lp.upper[j]):
            rows.append((e.copy(), LEQ, lp.upper[j]))
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        a = np.array([rows[i][0] for i in combo])
        b = np.array([rows[i][2] for i in combo])
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, b)
        feasible = all(
            (c @ x <= bb + 1e-9)
            if rel == LEQ
            else (c @ x >= bb - 1e-9)
            if rel == GEQ
            else abs(c @ x - bb) <= 1e-9
            for c, rel, bb in rows
        )
        if feasible:
            v = float(lp.objective @ x)
            if best is None or (v > best if lp.sense == "max" else v < best):
                best = v
    return best


def test_simple_bound():
    sol = solve_lp(LinearProgram.build([1.0], "max", [([1.0], LEQ, 1.0)]))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0)
    assert sol.value == pytest.approx(1.0)


def test_infeasible():
    sol = solve_lp(LinearProgram.build([1.0], "max", [([1.0], LEQ, -1.0)]))
    assert sol.status == "infeasible"


def test_two_variable_vertex():
    lp = LinearProgram.build(
        [1.0, 1.0], "max", [([1.0, 2.0], LEQ, 4.0), ([3.0, 1.0], LEQ, 6.0)]
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [1.6, 1.2], atol=1e-9)
    # x + y at the binding vertex (1.6, 1.2):
    assert sol.value == pytest.approx(2.8, abs=1e-9)
    assert sol.value == pytest.approx(vertex_enumeration(lp), abs=1e-9)


def test_unbounded():
    assert solve_lp(LinearProgram.build([1.0], "max", [])).status == "unbounded"
    lp = LinearProgram.build(
        [1.0, 0.0], "min", [([1.0, 1.0], EQ, 1.0)], lower=[-math.inf, 0.0]
    )
    assert solve_lp(lp).status == "unbounded"


def test_equality_and_free_variable():
    lp = LinearProgram.build(
        [-1.0, 0.0], "min", [([1.0, 1.0], EQ, 1.0)], lower=[-math.inf, 0.0]
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0)


def test_upper_bounds():
    lp = LinearProgram.build(
        [1.0, 1.0], "max", [([1.0, 1.0], GEQ, 0.5)], upper=[1.0, 2.0]
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [1.0, 2.0], atol=1e-9)


def test_deterministic():
    lp = LinearProgram.build(
        [1.0, 1.0, 0.0],
        "max",
        [([1.0, 1.0, 1.0], EQ, 1.0), ([1.0, -1.0, 0.0], LEQ, 0.2)],
    )
    first = solve_lp(lp)
    second = solve_lp(lp)
    np.testing.assert_array_equal(first.x, second.x)
    assert first.value == second.value


def test_solution_satisfies_constraints():
    rng = np.random.default_rng(17)
    for _ in range(100):
        n = int(rng.integers(1, 4))
        cons = [
            (rng.normal(size=n), rng.choice([LEQ, GEQ, EQ]), float(rng.normal()))
            for _ in range(int(rng.integers(1, 5)))
        ]
        lp = LinearProgram.build(rng.normal(size=n), rng.choice(["max", "min"]), cons)
        sol = solve_lp(lp)
        if sol.status != "optimal":
            continue
        for coeffs, rel, bound in lp.constraints:
            v = float(np.asarray(coeffs) @ sol.x)
            scale = 1.0 + float(np.max(np.abs(sol.x))) * (1.0 + float(np.max(np.abs(coeffs))))
            if rel == LEQ:
                assert v <= bound + FEAS_TOL * scale
            elif rel == GEQ:
                assert v >= bound - FEAS_TOL * scale
            else:
                assert abs(v - bound) <= FEAS_TOL * scale
        assert np.all(sol.x >= -FEAS_TOL * (1 + np.max(np.abs(sol.x))))


def test_matches_vertex_enumeration():
    rng = np.random.default_rng(19)
    checked = 0
    for _ in range(300):
        n = int(rng.integers(1, 4))
        cons = [
            (rng.normal(size=n), rng.choice([LEQ, GEQ, EQ]), float(rng.normal()))
            for _ in range(int(rng.integers(1, 5)))
        ]
        lp = LinearProgram.build(rng.normal(size=n), rng.choice(["max", "min"]), cons)
        sol = solve_lp(lp)
        oracle = vertex_enumeration(lp)
        if sol.status == "optimal":
            assert oracle is not None
            assert sol.value == pytest.approx(oracle, abs=1e-7)
            checked += 1
        elif sol.status == "infeasible":
            assert oracle is None
    assert checked > 50  # the generator must actually exercise the solver
