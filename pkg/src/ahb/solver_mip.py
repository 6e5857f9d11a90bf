"""Exact per-unit box optimization.

For owner ``i`` the loss of a box is

    sum_{k in box} (gamma1 |f1(x_i) - f1(x_k)| + gamma0 |f0(x_i) - f0(x_k)|) - beta * |box|

subject to the box containing ``x_i`` and at least ``m`` control units. The
loss depends on the box only through its membership, and any box can be
shrunk to candidate coordinates without changing membership, so the search
runs over bounds taken from candidate coordinates: lower bounds from values
``<= x_ij`` and upper bounds from values ``>= x_ij`` on each covariate.

:func:`solve_exact` is a best-first branch and bound over intervals of those
edge choices. :func:`brute_force_oracle` enumerates every edge combination
and exists to check it.

Among optimal groups the winner is the one whose tightest box has the
smallest volume, then the lexicographically smallest ``(a_1, b_1, a_2, ...)``.
The returned box is always that tightest box.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ahb.batch import run_units
from ahb.boxes import HyperBox, MatchedGroup, fsum_objective, inside
from ahb.errors import ConfigError, InfeasibleError
from ahb.predictor import unit_predictions

PREPROCESS_MODES = ("none", "sort", "threshold_L", "threshold_coord")


@dataclass(frozen=True)
class Preprocess:
    """Candidate reduction applied before solving.

    ``mode`` is one of ``none``, ``sort`` (``value`` = d, keep the d closest
    units per arm by prediction distance), ``threshold_L`` (keep prediction
    distance ``<= value``) or ``threshold_coord`` (keep units within ``value``
    of the owner on every covariate).
    """

    mode: str = "none"
    value: float | None = None

    def __post_init__(self):
        if self.mode not in PREPROCESS_MODES:
            raise ConfigError(f"unknown preprocessing mode {self.mode!r}")
        if self.mode != "none":
            if self.value is None or not self.value >= 0:
                raise ConfigError(f"preprocessing {self.mode} needs a nonnegative value")
            if self.mode == "sort" and (self.value < 1 or int(self.value) != self.value):
                raise ConfigError("sort preprocessing needs a positive integer d")

    @classmethod
    def parse(cls, text):
        """Parse ``none``, ``sort:50``, ``threshold_L:0.4``, ``threshold_coord:inf``."""
        if text is None or text == "none":
            return cls()
        mode, _, value = text.partition(":")
        if not value:
            raise ConfigError(f"preprocessing {mode!r} needs a value, e.g. {mode}:0.5")
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(f"bad preprocessing value {value!r}") from None
        if mode == "sort":
            if number != int(number):
                raise ConfigError("sort preprocessing needs a positive integer d")
            number = int(number)
        return cls(mode, number)

    def __str__(self):
        return "none" if self.mode == "none" else f"{self.mode}:{self.value:g}"


@dataclass(frozen=True)
class SolverParams:
    """Loss weights and constraints for the exact solver.

    Attributes:
        gamma0, gamma1: weights on control / treated prediction distances.
        beta: reward per member unit.
        m: minimum number of control units in every box.
        normalize: divide each gamma by the sample variance of ``|f_t|``
            over the test units.
        preprocess: candidate reduction, see :class:`Preprocess`.
        exclude_other_treated: for treated owners, drop every other treated
            unit from the candidates (control-only matching).
    """

    gamma0: float = 1.0
    gamma1: float = 1.0
    beta: float = 1.0
    m: int = 1
    normalize: bool = False
    preprocess: Preprocess = field(default_factory=Preprocess)
    exclude_other_treated: bool = False

    def __post_init__(self):
        if min(self.gamma0, self.gamma1, self.beta) < 0:
            raise ConfigError("gamma0, gamma1 and beta must be nonnegative")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.preprocess.mode == "sort" and self.preprocess.value < self.m:
            raise ConfigError("sort preprocessing needs d >= m")


@dataclass(frozen=True, eq=False)
class BoxSolution:
    """A unit's box and matched group.

    ``per_unit_costs`` maps every candidate's row index to its weighted
    prediction distance from the owner.
    """

    box: HyperBox
    group: MatchedGroup
    objective: float
    optimal: bool
    per_unit_costs: dict

    @property
    def owner(self):
        return self.box.owner


def normalized_gammas(gamma0, gamma1, f0, f1):
    """Divide each gamma by the sample variance of the absolute predictions."""
    if len(f0) < 2:
        raise ConfigError("normalization needs at least 2 units")
    v0 = float(np.var(np.abs(f0), ddof=1))
    v1 = float(np.var(np.abs(f1), ddof=1))
    for name, v in (("f0", v0), ("f1", v1)):
        if v == 0:
            raise ConfigError(f"cannot normalize: predictions of {name} are constant; disable normalization")
    return gamma0 / v0, gamma1 / v1


@dataclass(frozen=True, eq=False)
class _Context:
    X: np.ndarray
    T: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    params: SolverParams
    gamma0: float
    gamma1: float


def _context(test, model, params, preds=None):
    f0, f1 = preds if preds is not None else unit_predictions(model, test)
    f0 = np.asarray(f0, dtype=float)
    f1 = np.asarray(f1, dtype=float)
    g0, g1 = params.gamma0, params.gamma1
    if params.normalize:
        g0, g1 = normalized_gammas(g0, g1, f0, f1)
    return _Context(test.X, test.T, f0, f1, params, g0, g1)


def unit_cost(i, k, f0, f1, gamma0=1.0, gamma1=1.0):
    """Weighted prediction distance between units ``i`` and ``k``."""
    return gamma1 * abs(f1[i] - f1[k]) + gamma0 * abs(f0[i] - f0[k])


def unit_costs(i, f0, f1, gamma0=1.0, gamma1=1.0):
    """Vector of :func:`unit_cost` from ``i`` to every unit."""
    f0 = np.asarray(f0, dtype=float)
    f1 = np.asarray(f1, dtype=float)
    return gamma1 * np.abs(f1[i] - f1) + gamma0 * np.abs(f0[i] - f0)


def objective(group, costs, beta):
    """Loss of a matched group: summed member costs minus ``beta`` per member.

    ``costs`` is indexable by the group's member indices.
    """
    return fsum_objective([costs[k] for k in group.members], beta)


def _candidates(i, ctx):
    params = ctx.params
    n = ctx.X.shape[0]
    keep = np.ones(n, dtype=bool)
    if params.exclude_other_treated and ctx.T[i] == 1:
        keep &= ctx.T == 0
        keep[i] = True
    pre = params.preprocess
    if pre.mode != "none":
        dist = unit_costs(i, ctx.f0, ctx.f1)
        if pre.mode == "threshold_L":
            keep &= dist <= pre.value
        elif pre.mode == "threshold_coord":
            keep &= np.all(np.abs(ctx.X - ctx.X[i]) <= pre.value, axis=1)
        else:
            d = int(pre.value)
            chosen = np.zeros(n, dtype=bool)
            for arm in (0, 1):
                pool = np.flatnonzero(keep & (ctx.T == arm))
                pool = pool[pool != i]
                quota = d - 1 if ctx.T[i] == arm else d
                order = np.argsort(dist[pool], kind="stable")
                chosen[pool[order[:quota]]] = True
            keep &= chosen
    keep[i] = True
    cand = np.flatnonzero(keep)
    n_controls = int(np.sum(ctx.T[cand] == 0))
    if n_controls < params.m:
        raise InfeasibleError(
            f"unit {i}: only {n_controls} control candidates after preprocessing, need m={params.m}", unit=i
        )
    return cand


def preprocess(i, test, model, params, preds=None):
    """Candidate row indices for owner ``i`` (always including ``i``)."""
    return _candidates(i, _context(test, model, params, preds))


class _Problem:
    """One owner's search space restricted to its candidates."""

    def __init__(self, i, ctx, cand):
        self.owner = i
        self.cand = cand
        self.X = ctx.X[cand]
        self.ctrl = (ctx.T[cand] == 0).astype(np.int64)
        self.costs = unit_costs(i, ctx.f0, ctx.f1, ctx.gamma0, ctx.gamma1)[cand]
        self.beta = ctx.params.beta
        self.m = ctx.params.m
        self.w = self.costs - self.beta
        self.neg_w = np.minimum(self.w, 0.0)
        self.xi = ctx.X[i]
        self.own_local = int(np.searchsorted(cand, i))
        self.lower_vals = []
        self.upper_vals = []
        for j in range(self.X.shape[1]):
            col = np.unique(self.X[:, j])
            self.lower_vals.append(col[col <= self.xi[j]])
            self.upper_vals.append(col[col >= self.xi[j]])
        # rounding slack for bound comparisons; exact keys decide at leaves
        self.tol = 1e-9 * (float(np.sum(np.abs(self.costs))) + self.beta * len(cand) + 1.0)

    def snap(self, node):
        """Shrink a node to the boxes that are tight around their members.

        Every group has exactly one tight box, whose edges sit on member
        coordinates, so each side's range can be narrowed to coordinates of
        units in the current outer box. Returns ``None`` for an empty node.
        """
        alo, ahi, blo, bhi = (v.copy() for v in node)
        p = self.X.shape[1]
        for _ in range(4):
            outer_a = np.array([self.lower_vals[j][alo[j]] for j in range(p)])
            outer_b = np.array([self.upper_vals[j][bhi[j]] for j in range(p)])
            pts = self.X[inside(self.X, outer_a, outer_b)]
            changed = False
            for j in range(p):
                L, U = self.lower_vals[j], self.upper_vals[j]
                col = pts[:, j]
                lo_ok = col[(col >= L[alo[j]]) & (col <= L[ahi[j]])]
                hi_ok = col[(col >= U[blo[j]]) & (col <= U[bhi[j]])]
                if lo_ok.size == 0 or hi_ok.size == 0:
                    return None
                na, nA = np.searchsorted(L, lo_ok.min()), np.searchsorted(L, lo_ok.max())
                nb, nB = np.searchsorted(U, hi_ok.min()), np.searchsorted(U, hi_ok.max())
                if (na, nA, nb, nB) != (alo[j], ahi[j], blo[j], bhi[j]):
                    alo[j], ahi[j], blo[j], bhi[j] = na, nA, nb, nB
                    changed = True
            if not changed:
                break
        return alo, ahi, blo, bhi

    def lower_bound(self, node, inner, outer):
        """Lower bound on the loss of any feasible box in ``node``.

        Shell units (in the outer box, not the inner one) are counted only if
        they lower the loss. When the inner box lacks controls, any feasible
        box must also take in some shell control ``k`` and hence the hull of
        the inner box and ``x_k``; the bound is the cheapest such hull plus
        the remaining negative shell weight. Returns ``(bound, mask)`` where
        ``mask`` is the cheapest hull's membership (a feasible incumbent
        candidate) or ``None``.
        """
        shell = outer & ~inner
        base = float(self.w[inner].sum() + self.neg_w[shell].sum())
        need = self.m - int(self.ctrl[inner].sum())
        if need <= 0:
            return base, None
        ks = np.flatnonzero(shell & (self.ctrl == 1))
        _, ahi, blo, _ = node
        p = self.X.shape[1]
        inner_a = np.array([self.lower_vals[j][ahi[j]] for j in range(p)])
        inner_b = np.array([self.upper_vals[j][blo[j]] for j in range(p)])
        xk = self.X[ks]
        lo = np.minimum(inner_a, xk)
        hi = np.maximum(inner_b, xk)
        M = np.all((self.X[None, :, :] >= lo[:, None, :]) & (self.X[None, :, :] <= hi[:, None, :]), axis=2)
        vals = M @ (self.w - self.neg_w) + self.neg_w[outer].sum()
        short = need - (M @ self.ctrl - int(self.ctrl[inner].sum()))
        if np.any(short > 0):
            neg_ctrl = (self.neg_w < 0) & (self.ctrl == 1) & shell
            pos_ctrl = (self.w > 0) & (self.ctrl == 1) & shell
            step = float(self.w[pos_ctrl].min()) if pos_ctrl.any() else 0.0
            spare = neg_ctrl.sum() - M @ neg_ctrl.astype(np.int64)
            vals = vals + np.maximum(short - spare, 0) * step
        best = int(np.argmin(vals))
        return float(vals[best]), M[best]

    def key(self, local):
        """Exact ranking key of the group given by candidate-local indices."""
        obj = fsum_objective(self.costs[local].tolist(), self.beta)
        pts = self.X[local]
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        volume = float(np.prod(hi - lo))
        lex = tuple(v for pair in zip(lo.tolist(), hi.tolist()) for v in pair)
        return (obj, volume, lex)

    def solution(self, local, optimal):
        local = np.asarray(local, dtype=np.int64)
        obj, _, lex = self.key(local)
        lo = np.array(lex[0::2])
        hi = np.array(lex[1::2])
        box = HyperBox(lo, hi, self.owner)
        members = self.cand[local]
        n_t = int(len(local) - self.ctrl[local].sum())
        group = MatchedGroup(self.owner, _readonly(members), n_t, len(local) - n_t)
        costs = dict(zip(self.cand.tolist(), self.costs.tolist()))
        return BoxSolution(box, group, obj, optimal, costs)


def _readonly(arr):
    arr = np.array(arr, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _solve_problem(prob):
    p = prob.X.shape[1]
    L, U = prob.lower_vals, prob.upper_vals
    best_key = None
    best_local = None
    seen = set()
    counter = itertools.count()

    def consider(mask):
        nonlocal best_key, best_local
        if prob.ctrl[mask].sum() < prob.m:
            return
        local = np.flatnonzero(mask)
        sig = local.tobytes()
        if sig in seen:
            return
        seen.add(sig)
        key = prob.key(local)
        if best_key is None or key < best_key:
            best_key, best_local = key, local

    def bounds(node):
        alo, ahi, blo, bhi = node
        inner_a = np.array([L[j][ahi[j]] for j in range(p)])
        inner_b = np.array([U[j][blo[j]] for j in range(p)])
        outer_a = np.array([L[j][alo[j]] for j in range(p)])
        outer_b = np.array([U[j][bhi[j]] for j in range(p)])
        outer = inside(prob.X, outer_a, outer_b)
        inner = inside(prob.X, inner_a, inner_b)
        return inner, outer

    def push(node):
        node = prob.snap(node)
        if node is None:
            return
        inner, outer = bounds(node)
        if prob.ctrl[outer].sum() < prob.m:
            return
        lb, hull = prob.lower_bound(node, inner, outer)
        if hull is not None:
            consider(hull)
        if best_key is not None and lb - prob.tol > best_key[0]:
            return
        heapq.heappush(heap, (lb, next(counter), node, inner, outer))

    heap = []
    push((
        np.zeros(p, dtype=np.int64),
        np.array([len(v) - 1 for v in L], dtype=np.int64),
        np.zeros(p, dtype=np.int64),
        np.array([len(v) - 1 for v in U], dtype=np.int64),
    ))
    while heap:
        lb, _, node, inner, outer = heapq.heappop(heap)
        if best_key is not None and lb - prob.tol > best_key[0]:
            break
        consider(inner)
        consider(outer)
        if np.array_equal(inner, outer):
            continue
        alo, ahi, blo, bhi = node
        spans = np.concatenate([ahi - alo, bhi - blo])
        side = int(np.argmax(spans))
        for child in _split(node, side >= p, side % p):
            push(child)
    return best_local


def _split(node, upper, j):
    alo, ahi, blo, bhi = (v.copy() for v in node)
    if not upper:
        mid = (alo[j] + ahi[j]) // 2
        left = (alo.copy(), ahi.copy(), blo, bhi)
        left[1][j] = mid
        right = (alo.copy(), ahi.copy(), blo, bhi)
        right[0][j] = mid + 1
    else:
        mid = (blo[j] + bhi[j]) // 2
        left = (alo, ahi, blo.copy(), bhi.copy())
        left[3][j] = mid
        right = (alo, ahi, blo.copy(), bhi.copy())
        right[2][j] = mid + 1
    return left, right


def _solve_unit(i, ctx):
    cand = _candidates(i, ctx)
    prob = _Problem(i, ctx, cand)
    local = _solve_problem(prob)
    if local is None:
        raise InfeasibleError(f"unit {i}: no box contains m={ctx.params.m} controls", unit=i)
    return prob.solution(local, optimal=True)


def solve_exact(i, test, model, params, preds=None):
    """Globally optimal box for test unit ``i``.

    Args:
        i: row index of the owner in ``test``.
        test: the :class:`~ahb.data.Dataset` being matched (outcomes unused).
        model: outcome model providing ``f0``/``f1`` for test units.
        params: :class:`SolverParams`.
        preds: optional precomputed ``(f0, f1)`` over ``test``.

    Raises:
        InfeasibleError: fewer than ``m`` control candidates.
    """
    return _solve_unit(int(i), _context(test, model, params, preds))


MAX_ORACLE_CANDIDATES = 25
MAX_ORACLE_DIM = 3


def _oracle_unit(i, ctx):
    cand = _candidates(i, ctx)
    if len(cand) > MAX_ORACLE_CANDIDATES or ctx.X.shape[1] > MAX_ORACLE_DIM:
        raise ConfigError(
            f"brute-force oracle limited to {MAX_ORACLE_CANDIDATES} candidates and p <= {MAX_ORACLE_DIM}; "
            f"got {len(cand)} candidates, p={ctx.X.shape[1]}"
        )
    prob = _Problem(i, ctx, cand)
    p = prob.X.shape[1]
    per_dim = []
    for j in range(p):
        a, b = np.meshgrid(prob.lower_vals[j], prob.upper_vals[j], indexing="ij")
        col = prob.X[:, j]
        per_dim.append((col[None, :] >= a.reshape(-1, 1)) & (col[None, :] <= b.reshape(-1, 1)))
    rest = per_dim[1:]
    best_key, best_local = None, None
    for first in per_dim[0]:
        mask = first[None, :]
        for m_j in rest:
            mask = (mask[:, None, :] & m_j[None, :, :]).reshape(-1, mask.shape[-1])
        controls = mask.astype(np.int64) @ prob.ctrl
        approx = mask.astype(float) @ prob.w
        feasible = controls >= prob.m
        if not feasible.any():
            continue
        lowest = approx[feasible].min()
        if best_key is not None and lowest - prob.tol > best_key[0]:
            continue
        near = np.flatnonzero(feasible & (approx <= lowest + prob.tol))
        for pattern in np.unique(mask[near], axis=0):
            local = np.flatnonzero(pattern)
            key = prob.key(local)
            if best_key is None or key < best_key:
                best_key, best_local = key, local
    if best_local is None:
        raise InfeasibleError(f"unit {i}: no box contains m={ctx.params.m} controls", unit=i)
    return prob.solution(best_local, optimal=True)


def brute_force_oracle(i, test, model, params, preds=None):
    """Enumerate every candidate-coordinate box for owner ``i`` (tests only)."""
    return _oracle_unit(int(i), _context(test, model, params, preds))


def solve_all(test, model, params, units=None, workers=1, preds=None):
    """Solve every unit in ``units`` (default: all rows of ``test``).

    Returns a :class:`~ahb.batch.BatchResult`; infeasible units appear in
    ``errors`` rather than aborting the batch.
    """
    ctx = _context(test, model, params, preds)
    units = range(test.n) if units is None else units
    return run_units(_solve_unit, ctx, units, workers)


def verify_with_oracle(test, model, params, units=None, preds=None):
    """Compare :func:`solve_exact` with the oracle on every unit.

    Returns ``(agree, details)``; ``details`` lists disagreeing units.
    """
    ctx = _context(test, model, params, preds)
    units = range(test.n) if units is None else units
    bad = []
    for i in units:
        try:
            fast = _solve_unit(int(i), ctx)
        except InfeasibleError:
            fast = None
        try:
            slow = _oracle_unit(int(i), ctx)
        except InfeasibleError:
            slow = None
        if (fast is None) != (slow is None):
            bad.append(int(i))
        elif fast is not None and (fast.objective != slow.objective or fast.group != slow.group):
            bad.append(int(i))
    return not bad, bad


def with_params(params, **changes):
    return replace(params, **changes)
