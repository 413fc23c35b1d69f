"""Rule-of-thumb curvature bounds and the constrained-fit visualizer.

Both rules fit global polynomials separately on each side of the cutoff:
the first takes the largest fitted second derivative of a quartic over the
observed support, the second doubles the (constant) second derivative of a
quadratic.  Each reports per-side goodness of fit so a user can discard
the value when the underlying polynomial is obviously misspecified.

The visualizer solves a constrained least squares problem over a
degree-two spline basis: curvature capped everywhere, and pinned to the
cap just off the cutoff, producing an "extreme" member of the smoothness
class scaled to the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .data import Sample
from .errors import DataError, RdcsError


@dataclass(frozen=True)
class RotResult:
    value: float
    order: int
    fit_coefficients: dict
    sup_location: float
    fit_r2: dict


@dataclass(frozen=True)
class ExtremeFunction:
    basis: dict
    coefficients: np.ndarray
    bound: float
    x0: float
    evaluations: np.ndarray  # columns (x, fitted value)
    rss: float
    curvature_signs: tuple


def _poly_fit(xs: np.ndarray, ys: np.ndarray, order: int, side: str):
    if len(np.unique(xs)) < order + 1:
        raise DataError(
            f"{side} side has fewer than {order + 1} distinct points; "
            f"order-{order} fit is rank deficient"
        )
    scale = max(np.abs(xs).max(), 1e-300)
    design = np.column_stack([(xs / scale) ** j for j in range(order + 1)])
    coef_scaled, *_ = np.linalg.lstsq(design, ys, rcond=None)
    coef = coef_scaled / scale ** np.arange(order + 1)
    resid = ys - design @ coef_scaled
    rss = float(resid @ resid)
    tss = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if tss == 0.0 else 1.0 - rss / tss
    return coef, r2


def _max_abs_second_derivative(coef: np.ndarray, lo: float, hi: float):
    """Closed-form maximum of |second derivative| of a polynomial (order
    <= 4) over [lo, hi]: endpoints plus the interior vertex."""
    order = len(coef) - 1
    a = 2.0 * coef[2] if order >= 2 else 0.0
    b = 6.0 * coef[3] if order >= 3 else 0.0
    c = 12.0 * coef[4] if order >= 4 else 0.0
    candidates = [lo, hi]
    if c != 0.0:
        vertex = -b / (2.0 * c)
        if lo < vertex < hi:
            candidates.append(vertex)
    vals = [abs(a + b * x + c * x * x) for x in candidates]
    best = int(np.argmax(vals))
    return vals[best], candidates[best]


def _rot(sample: Sample, dep, order: int, multiplier: float) -> RotResult:
    values = sample.dep(dep)
    best_val, best_loc = -1.0, 0.0
    coefs, r2s = {}, {}
    for name, mask in (("right", sample.right), ("left", ~sample.right)):
        xs, ys = sample.x[mask], values[mask]
        coef, r2 = _poly_fit(xs, ys, order, name)
        coefs[name] = coef
        r2s[name] = r2
        val, loc = _max_abs_second_derivative(coef, xs.min(), xs.max())
        if val > best_val:
            best_val, best_loc = val, loc
    return RotResult(value=multiplier * best_val, order=order,
                     fit_coefficients=coefs, sup_location=best_loc,
                     fit_r2=r2s)


def rot1(sample: Sample, dep="y") -> RotResult:
    """Largest fitted second derivative of per-side quartic fits."""
    return _rot(sample, dep, order=4, multiplier=1.0)


def rot2(sample: Sample, dep="y") -> RotResult:
    """Twice the curvature of per-side quadratic fits."""
    return _rot(sample, dep, order=2, multiplier=2.0)


def _side_basis(x_abs: np.ndarray, knots: np.ndarray) -> np.ndarray:
    cols = [np.ones_like(x_abs), x_abs, x_abs**2]
    cols += [np.maximum(0.0, x_abs - t) ** 2 for t in knots]
    return np.column_stack(cols)


def _side_curvature_rows(knots: np.ndarray, n_cols: int) -> np.ndarray:
    """Second derivative on each knot interval, as rows acting on the
    side's coefficient block.  Piecewise constant, so one row per interval
    is an exact everywhere-constraint."""
    n_intervals = len(knots) + 1
    rows = np.zeros((n_intervals, n_cols))
    rows[:, 2] = 2.0
    for j in range(len(knots)):
        rows[j + 1:, 3 + j] = 2.0
    return rows


def extreme_function(sample: Sample, dep, b: float, x0: float = 0.1,
                     knots: int = 50, solver: str = "CLARABEL") -> ExtremeFunction:
    """Least squares fit with |curvature| <= b everywhere and = b at +-x0.

    The equality's sign is free on each side; all four sign combinations
    are solved and the lowest-RSS solution kept.  Returns dense
    evaluations for plotting.
    """
    if not b > 0.0:
        raise DataError("the curvature bound must be positive")
    if knots < 4:
        raise DataError("need at least 4 knots per side")
    values = sample.dep(dep)
    sample.require_both_sides()

    blocks, curv_rows, eq_rows, knot_sets = [], [], [], {}
    masks = {"right": sample.right, "left": ~sample.right}
    for name in ("right", "left"):
        mask = masks[name]
        x_abs = np.abs(sample.x[mask])
        top = x_abs.max()
        side_knots = np.arange(1, knots + 1) * top / (knots + 1)
        knot_sets[name] = side_knots
        n_cols = 3 + knots
        basis = np.zeros((sample.n, n_cols))
        basis[mask] = _side_basis(x_abs, side_knots)
        blocks.append(basis)
        rows = _side_curvature_rows(side_knots, n_cols)
        curv_rows.append(rows)
        interval = int(np.searchsorted(side_knots, abs(x0), side="right"))
        eq_rows.append(rows[interval])

    n_right = blocks[0].shape[1]
    design = np.hstack(blocks)
    curv = np.zeros((curv_rows[0].shape[0] + curv_rows[1].shape[0],
                     design.shape[1]))
    curv[:curv_rows[0].shape[0], :n_right] = curv_rows[0]
    curv[curv_rows[0].shape[0]:, n_right:] = curv_rows[1]
    eq_right = np.concatenate([eq_rows[0], np.zeros(design.shape[1] - n_right)])
    eq_left = np.concatenate([np.zeros(n_right), eq_rows[1]])

    best = None
    for s_right in (1.0, -1.0):
        for s_left in (1.0, -1.0):
            gamma = cp.Variable(design.shape[1])
            objective = cp.Minimize(cp.sum_squares(design @ gamma - values))
            constraints = [
                curv @ gamma <= b,
                curv @ gamma >= -b,
                eq_right @ gamma == s_right * b,
                eq_left @ gamma == s_left * b,
            ]
            problem = cp.Problem(objective, constraints)
            try:
                problem.solve(solver=solver)
            except cp.error.SolverError:
                problem.solve(solver="OSQP", eps_abs=1e-10, eps_rel=1e-10,
                              max_iter=200000)
            if problem.status not in ("optimal", "optimal_inaccurate"):
                continue
            rss = float(problem.value)
            if best is None or rss < best[0]:
                best = (rss, np.array(gamma.value), (s_right, s_left))
    if best is None:
        raise RdcsError("constrained spline fit did not converge")
    rss, coef, signs = best

    xs_eval = []
    for name in ("right", "left"):
        mask = masks[name]
        top = np.abs(sample.x[mask]).max()
        grid = np.linspace(0.0, top, 400)
        xs_eval.append(grid if name == "right" else -grid[::-1])
    x_grid = np.concatenate([xs_eval[1], xs_eval[0]])
    fitted = evaluate_extreme(x_grid, coef, knot_sets, n_right)
    return ExtremeFunction(
        basis={"degree": 2, "knots_right": knot_sets["right"],
               "knots_left": knot_sets["left"]},
        coefficients=coef, bound=b, x0=x0,
        evaluations=np.column_stack([x_grid, fitted]),
        rss=rss, curvature_signs=signs,
    )


def evaluate_extreme(x: np.ndarray, coef: np.ndarray, knot_sets: dict,
                     n_right: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    right = x >= 0.0
    out[right] = _side_basis(x[right], knot_sets["right"]) @ coef[:n_right]
    out[~right] = _side_basis(-x[~right], knot_sets["left"]) @ coef[n_right:]
    return out


def extreme_curvature(x: np.ndarray, coef: np.ndarray, knot_sets: dict,
                      n_right: int) -> np.ndarray:
    """Second derivative of the fitted extreme function at x (w.r.t. x)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for name, mask, block in (("right", x >= 0.0, coef[:n_right]),
                              ("left", x < 0.0, coef[n_right:])):
        u = np.abs(x[mask])
        val = 2.0 * block[2] * np.ones_like(u)
        for j, t in enumerate(knot_sets[name]):
            val += 2.0 * block[3 + j] * (u >= t)
        out[mask] = val  # d2/dx2 == d2/du2 for u = |x|
    return out
