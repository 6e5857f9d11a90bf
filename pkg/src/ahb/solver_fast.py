"""Greedy box expansion (the fast approximation to the exact solver).

Starting from the owner's point, each step proposes, for every covariate,
pushing the nearer box edge out to the closest data coordinate beyond it.
Each proposal is scored by how much the outcome model varies on a grid over
the slab it would add; the lowest-variation proposal is taken. Expansion
stops once the best proposal's variation exceeds ``c`` times the previous
step's (plus a small absolute slack), provided the box already holds ``m``
controls and a unit of the opposite arm, or when no covariate can grow.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from ahb.batch import run_units
from ahb.boxes import HyperBox, MatchedGroup, fsum_objective, inside
from ahb.data import BINARY
from ahb.errors import ConfigError, InfeasibleError, MethodUnavailableError
from ahb.predictor import unit_predictions
from ahb.solver_mip import BoxSolution, normalized_gammas, unit_costs

_SENTINEL = sys.float_info.max


@dataclass(frozen=True)
class FastParams:
    """Greedy expansion settings.

    Attributes:
        c: stop multiplier on the step-to-step variation ratio (>= 1).
        grid_points_per_axis: grid resolution ``G`` (>= 2) on continuous axes.
        m: minimum control members before stopping is allowed.
        eps_abs: absolute slack on the stop test; ``None`` means
            ``1e-12 * scale**2`` with ``scale`` the largest absolute test
            prediction.
        gamma0, gamma1, beta, normalize: only used to report the exact-solver
            loss of the final group, for comparison.
    """

    c: float = 2.0
    grid_points_per_axis: int = 5
    m: int = 1
    eps_abs: float | None = None
    gamma0: float = 1.0
    gamma1: float = 1.0
    beta: float = 1.0
    normalize: bool = False

    def __post_init__(self):
        if self.c < 1:
            raise ConfigError("c must be >= 1")
        if self.grid_points_per_axis < 2:
            raise ConfigError("grid_points_per_axis must be >= 2")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.eps_abs is not None and self.eps_abs < 0:
            raise ConfigError("eps_abs must be nonnegative")


def nearest_expansion_target(box, j, X, owner=None):
    """Closest unit outside ``box`` along covariate ``j``.

    Returns ``(unit_index, "down" | "up")`` or ``None`` when every unit's
    ``j``-th coordinate already lies inside the box's ``j``-th interval.
    Equal gaps go ``down``; among units sharing the target coordinate the
    lowest index wins.
    """
    col = np.asarray(X, dtype=float)[:, j]
    below = np.flatnonzero(col < box.a[j])
    above = np.flatnonzero(col > box.b[j])
    down = up = None
    if below.size:
        top = col[below].max()
        down = (box.a[j] - top, int(below[col[below] == top][0]))
    if above.size:
        bottom = col[above].min()
        up = (bottom - box.b[j], int(above[col[above] == bottom][0]))
    if down is None and up is None:
        return None
    if up is None or (down is not None and down[0] <= up[0]):
        return down[1], "down"
    return up[1], "up"


def _axis_values(lo, hi, kind, G):
    if lo == hi:
        return np.array([lo])
    if kind == BINARY:
        return np.array([lo, hi])
    return np.linspace(lo, hi, G)


def _slab_grid(old_box, j, new_lo, new_hi, kinds, G):
    axes = []
    for k in range(old_box.p):
        if k == j:
            axes.append(_axis_values(new_lo, new_hi, kinds[k], G))
        else:
            axes.append(_axis_values(old_box.a[k], old_box.b[k], kinds[k], G))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _grown_axis(old_box, proposed_box):
    grew = np.flatnonzero((proposed_box.a != old_box.a) | (proposed_box.b != old_box.b))
    if grew.size != 1:
        raise ValueError("proposed box must differ from the old box in exactly one covariate")
    j = int(grew[0])
    if proposed_box.a[j] < old_box.a[j]:
        return j, proposed_box.a[j], old_box.a[j]
    return j, old_box.b[j], proposed_box.b[j]


def grid_variation(old_box, proposed_box, model, G=5, kinds=None):
    """Variation of ``f0`` and ``f1`` over the slab ``proposed \\ old``.

    The grown axis is gridded over the newly added interval (both ends
    included); every other axis over its full current range. Returns the
    population variance of ``f0`` on the grid plus that of ``f1``.
    """
    kinds = kinds or ("continuous",) * old_box.p
    j, lo, hi = _grown_axis(old_box, proposed_box)
    if lo == hi:
        return 0.0
    pts = _slab_grid(old_box, j, lo, hi, kinds, G)
    return float(np.var(model.predict(pts, 0)) + np.var(model.predict(pts, 1)))


def _proposal_variations(box, proposals, model, kinds, G):
    # one predict call per arm for every proposal's grid
    grids = [_slab_grid(box, j, lo, hi, kinds, G) for j, lo, hi in proposals]
    sizes = [g.shape[0] for g in grids]
    pts = np.concatenate(grids, axis=0)
    p0 = model.predict(pts, 0)
    p1 = model.predict(pts, 1)
    out = []
    start = 0
    for size in sizes:
        sl = slice(start, start + size)
        out.append(float(np.var(p0[sl]) + np.var(p1[sl])))
        start += size
    return out


@dataclass(frozen=True, eq=False)
class _Context:
    X: np.ndarray
    T: np.ndarray
    kinds: tuple
    model: object
    params: FastParams
    eps: float
    f0: np.ndarray
    f1: np.ndarray
    gamma0: float
    gamma1: float


def _context(test, model, params, preds=None):
    if not model.evaluable:
        raise MethodUnavailableError("the fast solver needs a model that can be evaluated at arbitrary covariates")
    f0, f1 = preds if preds is not None else unit_predictions(model, test)
    f0 = np.asarray(f0, dtype=float)
    f1 = np.asarray(f1, dtype=float)
    eps = params.eps_abs
    if eps is None:
        scale = max(float(np.max(np.abs(f0))), float(np.max(np.abs(f1))), 0.0) or 1.0
        eps = 1e-12 * scale**2
    g0, g1 = params.gamma0, params.gamma1
    if params.normalize:
        g0, g1 = normalized_gammas(g0, g1, f0, f1)
    return _Context(test.X, test.T, test.kinds, model, params, eps, f0, f1, g0, g1)


def _fast_unit(i, ctx, trace=None):
    X, T, params = ctx.X, ctx.T, ctx.params
    opposite = 1 - T[i]
    if np.sum(T == 0) < params.m:
        raise InfeasibleError(f"unit {i}: test set has fewer than m={params.m} controls", unit=i)
    box = HyperBox.degenerate(X[i], i)
    members = inside(X, box.a, box.b)
    v_prev = _SENTINEL
    step = 0
    while True:
        proposals, targets = [], []
        for j in range(X.shape[1]):
            target = nearest_expansion_target(box, j, X)
            if target is None:
                continue
            k, direction = target
            if direction == "down":
                proposals.append((j, X[k, j], box.a[j]))
            else:
                proposals.append((j, box.b[j], X[k, j]))
            targets.append((j, k, direction))
        satisfied = np.sum(T[members] == 0) >= params.m and np.any(T[members] == opposite)
        if not proposals:
            if not satisfied:
                raise InfeasibleError(f"unit {i}: box covers all data without meeting the match constraints", unit=i)
            break
        variations = _proposal_variations(box, proposals, ctx.model, ctx.kinds, params.grid_points_per_axis)
        best = int(np.argmin(variations))
        v_star = variations[best]
        if satisfied and v_star > params.c * v_prev + ctx.eps:
            break
        j, k, direction = targets[best]
        a, b = box.a.copy(), box.b.copy()
        if direction == "down":
            a[j] = X[k, j]
        else:
            b[j] = X[k, j]
        box = HyperBox(a, b, i)
        members = inside(X, a, b)
        v_prev = v_star
        step += 1
        if trace is not None:
            trace.append({"step": step, "covariate": j, "variation": v_star, "a": a.tolist(), "b": b.tolist()})
    idx = np.flatnonzero(members)
    idx.setflags(write=False)
    n_t = int(T[idx].sum())
    group = MatchedGroup(i, idx, n_t, len(idx) - n_t)
    costs = unit_costs(i, ctx.f0, ctx.f1, ctx.gamma0, ctx.gamma1)
    member_costs = {int(k): float(costs[k]) for k in idx}
    obj = fsum_objective(costs[idx].tolist(), params.beta)
    return BoxSolution(box, group, obj, False, member_costs)


def fast_box(i, test, model, params=None, preds=None, trace=None):
    """Greedy box for test unit ``i``.

    ``trace``, if a list, receives one dict per accepted expansion step.
    """
    params = params or FastParams()
    return _fast_unit(int(i), _context(test, model, params, preds), trace)


def _fast_unit_batch(i, ctx):
    return _fast_unit(i, ctx)


def fast_all(test, model, params=None, units=None, workers=1, preds=None):
    """Run :func:`fast_box` for each unit; see :func:`ahb.solver_mip.solve_all`."""
    params = params or FastParams()
    ctx = _context(test, model, params, preds)
    units = range(test.n) if units is None else units
    return run_units(_fast_unit_batch, ctx, units, workers)
