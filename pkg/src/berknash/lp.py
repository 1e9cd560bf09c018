"""Self-contained dense linear-program solver.

Two-phase tableau simplex with Bland's anti-cycling rule.  Every problem this
package generates is tiny (two variables for action-range programs, one
variable per reward for contract programs), so a dense deterministic method
is the right trade-off.  Optimal results are re-substituted into the
constraints before being returned; a violation raises instead of returning a
silently wrong answer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-11
_MAX_ITER = 10_000

LEQ, EQ, GEQ = "<=", "==", ">="


class LPError(RuntimeError):
    """Numeric breakdown or malformed program; never a silent wrong answer."""


@dataclass(frozen=True)
class LinearProgram:
    """max/min c.x subject to rows (a, rel, b) and per-variable bounds.

    Bounds default to x >= 0 with no upper bound; use ``-math.inf`` /
    ``math.inf`` for free or one-sided variables.
    """

    objective: np.ndarray
    sense: str = "max"
    constraints: tuple = ()
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    @staticmethod
    def build(objective, sense="max", constraints=(), lower=None, upper=None) -> "LinearProgram":
        c = np.asarray(objective, dtype=float)
        n = c.size
        if sense not in ("max", "min"):
            raise LPError(f"unknown sense {sense!r}")
        rows = []
        for coeffs, rel, bound in constraints:
            a = np.asarray(coeffs, dtype=float)
            if a.shape != (n,):
                raise LPError(f"constraint length {a.size} != {n} variables")
            if rel not in (LEQ, EQ, GEQ):
                raise LPError(f"unknown relation {rel!r}")
            rows.append((a, rel, float(bound)))
        lo = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
        hi = np.full(n, math.inf) if upper is None else np.asarray(upper, dtype=float)
        if lo.shape != (n,) or hi.shape != (n,):
            raise LPError("bound vectors must match variable count")
        return LinearProgram(objective=c, sense=sense, constraints=tuple(rows), lower=lo, upper=hi)


@dataclass(frozen=True)
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None


def solve_lp(lp: LinearProgram) -> LPSolution:
    """Solve the program and return an optimal basic solution or a status.

    Deterministic: Bland's rule with lowest-index tie-breaking throughout.
    """
    n = lp.objective.size
    c_orig = lp.objective if lp.sense == "max" else -lp.objective

    # Rewrite onto y >= 0: shift finite lower bounds, reflect upper-bounded
    # free variables, split doubly-free variables into y+ - y-.
    col_maps = []  # (kind, data) per original variable
    offsets = np.zeros(n)
    extra_rows = []
    ny = 0
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo > hi:
            return LPSolution(status="infeasible")
        if math.isfinite(lo):
            col_maps.append(("shift", ny))
            offsets[j] = lo
            if math.isfinite(hi):
                extra_rows.append((j, hi - lo))  # y_j <= hi - lo
            ny += 1
        elif math.isfinite(hi):
            col_maps.append(("reflect", ny))
            offsets[j] = hi
            ny += 1
        else:
            col_maps.append(("split", ny))
            ny += 2

    def expand(coeffs: np.ndarray) -> tuple[np.ndarray, float]:
        """Map a row over x to a row over y, returning (row, constant shift)."""
        row = np.zeros(ny)
        shift = 0.0
        for j, (kind, pos) in enumerate(col_maps):
            cj = coeffs[j]
            if cj == 0.0:
                continue
            if kind == "shift":
                row[pos] = cj
                shift += cj * offsets[j]
            elif kind == "reflect":
                row[pos] = -cj
                shift += cj * offsets[j]
            else:
                row[pos] = cj
                row[pos + 1] = -cj
        return row, shift

    rows = []
    for coeffs, rel, bound in lp.constraints:
        row, shift = expand(np.asarray(coeffs, dtype=float))
        # Row equilibration: pivot tolerances are per-entry, so rows with
        # uniformly tiny coefficients must be rescaled to stay well-posed.
        norm = float(np.max(np.abs(row)))
        if norm > 0.0:
            row = row / norm
            rows.append((row, rel, (bound - shift) / norm))
        else:
            rows.append((row, rel, bound - shift))
    for j, ub in extra_rows:
        row = np.zeros(ny)
        row[col_maps[j][1]] = 1.0
        rows.append((row, LEQ, ub))
    c_y, _ = expand(c_orig)

    m = len(rows)
    # Equality standard form: one slack per inequality, artificials as needed.
    n_slack = sum(1 for _, rel, _ in rows if rel != EQ)
    A = np.zeros((m, ny + n_slack))
    b = np.zeros(m)
    basis = np.full(m, -1, dtype=int)
    slack_pos = ny
    for i, (row, rel, bound) in enumerate(rows):
        sign = 1.0
        if bound < 0:
            row, rel, bound = -row, {LEQ: GEQ, GEQ: LEQ, EQ: EQ}[rel], -bound
        A[i, :ny] = row
        b[i] = bound
        if rel != EQ:
            A[i, slack_pos] = 1.0 if rel == LEQ else -1.0
            if rel == LEQ:
                basis[i] = slack_pos  # slack is a valid starting basic variable
            slack_pos += 1

    need_art = [i for i in range(m) if basis[i] < 0]
    n_art = len(need_art)
    T = np.zeros((m, ny + n_slack + n_art))
    T[:, : ny + n_slack] = A
    for k, i in enumerate(need_art):
        T[i, ny + n_slack + k] = 1.0
        basis[i] = ny + n_slack + k

    def pivot(tab, rhs, basis, r, col):
        piv = tab[r, col]
        if abs(piv) < _PIVOT_TOL:
            raise LPError(f"numeric breakdown: pivot magnitude {abs(piv):.2e}")
        tab[r] /= piv
        rhs[r] /= piv
        for i in range(tab.shape[0]):
            if i != r and tab[i, col] != 0.0:
                rhs[i] -= tab[i, col] * rhs[r]
                tab[i] -= tab[i, col] * tab[r]
        basis[r] = col

    def run_simplex(tab, rhs, basis, cost, allowed) -> str:
        """Minimize cost.y by Bland's rule; returns 'optimal' or 'unbounded'."""
        for _ in range(_MAX_ITER):
            # Reduced costs relative to the current basis.
            z = cost.copy()
            for i, bi in enumerate(basis):
                if cost[bi] != 0.0:
                    z -= cost[bi] * tab[i]
            entering = -1
            for j in range(tab.shape[1]):
                if allowed[j] and z[j] < -FEAS_TOL:
                    entering = j
                    break  # Bland: lowest index
            if entering < 0:
                return "optimal"
            pos = tab[:, entering] > _PIVOT_TOL
            if not np.any(pos):
                return "unbounded"
            ratios = np.full(tab.shape[0], math.inf)
            ratios[pos] = rhs[pos] / tab[pos, entering]
            best = ratios.min()
            # Bland tie-break: among minimal ratios, lowest basis variable index.
            candidates = [i for i in range(tab.shape[0]) if ratios[i] <= best + 1e-15]
            r = min(candidates, key=lambda i: basis[i])
            pivot(tab, rhs, basis, r, entering)
        raise LPError("iteration limit exceeded")

    total = ny + n_slack + n_art
    if n_art:
        phase1 = np.zeros(total)
        phase1[ny + n_slack :] = 1.0
        allowed = np.ones(total, dtype=bool)
        status = run_simplex(T, b, basis, phase1, allowed)
        if status != "optimal":
            raise LPError("phase-1 simplex reported unbounded")
        art_value = sum(b[i] for i in range(m) if basis[i] >= ny + n_slack)
        if art_value > 1e-7:
            return LPSolution(status="infeasible")
        # Drive leftover (degenerate) artificials out of the basis.
        for i in range(m):
            if basis[i] >= ny + n_slack:
                for j in range(ny + n_slack):
                    if abs(T[i, j]) > _PIVOT_TOL:
                        pivot(T, b, basis, i, j)
                        break
        allowed[ny + n_slack :] = False
    else:
        allowed = np.ones(total, dtype=bool)

    cost = np.zeros(total)
    cost[:ny] = -c_y  # maximize c_y.y == minimize -c_y.y
    status = run_simplex(T, b, basis, cost, allowed)
    if status == "unbounded":
        return LPSolution(status="unbounded")

    y = np.zeros(total)
    for i, bi in enumerate(basis):
        if bi >= ny + n_slack and b[i] > 1e-7:
            return LPSolution(status="infeasible")
        y[bi] = b[i]

    x = np.empty(n)
    for j, (kind, pos) in enumerate(col_maps):
        if kind == "shift":
            x[j] = offsets[j] + y[pos]
        elif kind == "reflect":
            x[j] = offsets[j] - y[pos]
        else:
            x[j] = y[pos] - y[pos + 1]
    value = float(lp.objective @ x)

    _check_solution(lp, x, value)
    return LPSolution(status="optimal", x=x, value=value)


def _check_solution(lp: LinearProgram, x: np.ndarray, value: float) -> None:
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    for coeffs, rel, bound in lp.constraints:
        lhs = float(np.asarray(coeffs, dtype=float) @ x)
        row_scale = scale * (1.0 + float(np.max(np.abs(coeffs))))
        err = {LEQ: lhs - bound, GEQ: bound - lhs, EQ: abs(lhs - bound)}[rel]
        if err > FEAS_TOL * row_scale:
            raise LPError(f"optimal point violates a constraint by {err:.3e}")
    for j in range(x.size):
        if x[j] < lp.lower[j] - FEAS_TOL * scale or x[j] > lp.upper[j] + FEAS_TOL * scale:
            raise LPError("optimal point violates a variable bound")
    if abs(float(lp.objective @ x) - value) > FEAS_TOL * (1.0 + abs(value)):
        raise LPError("objective value inconsistent with returned point")
