"""Hyper-boxes, matched groups, and the Err/Var box diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ahb.errors import ValidationError


@dataclass(frozen=True, eq=False)
class HyperBox:
    """Closed axis-aligned box ``[a_1, b_1] x ... x [a_p, b_p]`` owned by one unit."""

    a: np.ndarray
    b: np.ndarray
    owner: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).copy()
        b = np.asarray(self.b, dtype=float).copy()
        if a.shape != b.shape or a.ndim != 1:
            raise ValidationError("box bounds must be 1-D vectors of equal length")
        if np.any(a > b):
            raise ValidationError("box has a lower bound above its upper bound")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def p(self):
        return self.a.shape[0]

    @property
    def widths(self):
        return self.b - self.a

    @property
    def volume(self):
        return float(np.prod(self.widths))

    def __eq__(self, other):
        return (
            isinstance(other, HyperBox)
            and self.owner == other.owner
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.owner, self.a.tobytes(), self.b.tobytes()))

    def __repr__(self):
        bounds = ", ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.a, self.b))
        return f"HyperBox(owner={self.owner}, {bounds})"

    @classmethod
    def degenerate(cls, x, owner):
        return cls(np.asarray(x, dtype=float), np.asarray(x, dtype=float), owner)

    @classmethod
    def bounding(cls, points, owner):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points.min(axis=0), points.max(axis=0), owner)


@dataclass(frozen=True, eq=False)
class MatchedGroup:
    """Units inside a box: sorted row indices plus arm counts."""

    owner: int
    members: np.ndarray
    n_t: int
    n_c: int

    @property
    def size(self):
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __eq__(self, other):
        return (
            isinstance(other, MatchedGroup)
            and self.owner == other.owner
            and np.array_equal(self.members, other.members)
        )

    def __hash__(self):
        return hash((self.owner, self.members.tobytes()))

    def __repr__(self):
        return f"MatchedGroup(owner={self.owner}, n={self.size}, n_t={self.n_t}, n_c={self.n_c})"

    @classmethod
    def from_members(cls, owner, members, T):
        members = np.unique(np.asarray(members, dtype=np.int64))
        members.setflags(write=False)
        n_t = int(np.asarray(T)[members].sum())
        return cls(owner, members, n_t, len(members) - n_t)

    def treated(self, T):
        return self.members[np.asarray(T)[self.members] == 1]

    def controls(self, T):
        return self.members[np.asarray(T)[self.members] == 0]


def inside(X, a, b):
    """Boolean mask of rows of ``X`` lying in the closed box ``[a, b]``."""
    X = np.asarray(X, dtype=float)
    return np.all((X >= a) & (X <= b), axis=1)


def contains(box, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (box.p,):
        raise ValidationError(f"point has dimension {x.shape}, box has {box.p}")
    return bool(np.all((box.a <= x) & (x <= box.b)))


def mmg(box, data, candidates=None):
    """The main matched group: every unit of ``data`` inside ``box``.

    ``candidates`` optionally restricts membership to a subset of row indices.
    """
    if box.p != data.p:
        raise ValidationError(f"box dimension {box.p} does not match data dimension {data.p}")
    if candidates is None:
        members = np.flatnonzero(inside(data.X, box.a, box.b))
    else:
        candidates = np.asarray(candidates, dtype=np.int64)
        members = candidates[inside(data.X[candidates], box.a, box.b)]
    return MatchedGroup.from_members(box.owner, members, data.T)


def _group_predictions(box, model, data, preds):
    group = mmg(box, data)
    if group.size == 0:
        raise ValidationError("matched group is empty")
    if preds is None:
        sub = data.subset(group.members)
        own = data.subset([box.owner])
        return (
            (model.predict_units(own, 0)[0], model.predict_units(sub, 0)),
            (model.predict_units(own, 1)[0], model.predict_units(sub, 1)),
        )
    f0, f1 = preds
    return (f0[box.owner], f0[group.members]), (f1[box.owner], f1[group.members])


def err_diagnostic(box, model, data, preds=None):
    """Distance between the owner's predicted outcomes and the group means.

    ``preds`` may hold precomputed ``(f0, f1)`` arrays over ``data``.
    """
    total = 0.0
    for own, members in _group_predictions(box, model, data, preds):
        total += abs(own - members.mean())
    return float(total)


def var_diagnostic(box, model, data, preds=None):
    """Population variance of member predictions under f0 plus under f1."""
    return float(sum(members.var() for _, members in _group_predictions(box, model, data, preds)))


def err_bound(box, model, data, preds=None):
    """Triangle-inequality surrogate: mean absolute owner-to-member difference."""
    total = 0.0
    for own, members in _group_predictions(box, model, data, preds):
        total += np.abs(own - members).mean()
    return float(total)


def var_bound(box, model, data, preds=None, C=None):
    """Surrogate ``(2C / n) * sum_k |f_t(x_k) - f_t(x_i)|`` summed over arms.

    ``C`` defaults to ``max_k |f_t(x_k) - mean_l f_t(x_l)|`` over the group,
    the smallest constant for which the bound holds on this box.
    """
    total = 0.0
    for own, members in _group_predictions(box, model, data, preds):
        c = C
        if c is None:
            c = np.max(np.abs(members - members.mean()))
        total += 2 * c * np.abs(members - own).mean()
    return float(total)


def box_rows(box, columns, owner_id):
    """Export rows ``(owner_id, covariate_name, lower, upper)``."""
    return [(owner_id, name, float(lo), float(hi)) for name, lo, hi in zip(columns, box.a, box.b)]


def fsum_objective(costs, beta):
    """Exactly-rounded ``sum(costs) - beta * len(costs)``."""
    return math.fsum(costs) - beta * len(costs)
