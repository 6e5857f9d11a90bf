"""Treatment-effect estimates from matched groups.

Within a group, the counterfactual means are the average observed outcome of
its control members (``y0_hat``) and of its treated members (``y1_hat``).
The owner is a member of its own group, so a treated owner contributes to
``y1_hat``.

Two ITE variants are supported:

* ``tau_a``: ``y1_hat - y0_hat``, for any owner whose group has both arms.
* ``tau_b``: ``Y_i - y0_hat``, for treated owners only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ahb.errors import ValidationError

VARIANTS = ("tau_a", "tau_b")


@dataclass(frozen=True)
class EffectEstimate:
    unit_id: str
    y0_hat: float | None
    y1_hat: float | None
    ite: float
    variant: str
    group_size: int
    n_c: int
    n_t: int
    treated: bool = True
    solver: str = ""

    def as_row(self):
        return {
            "unit_id": self.unit_id,
            "variant": self.variant,
            "ite": self.ite,
            "y0_hat": self.y0_hat,
            "y1_hat": self.y1_hat,
            "n_c": self.n_c,
            "n_t": self.n_t,
            "solver": self.solver,
        }


def _outcomes(test):
    if test.Y is None:
        raise ValidationError("estimation needs observed outcomes")
    return test.Y


def estimate_counterfactuals(group, test, need=(0, 1)):
    """``(y0_hat, y1_hat)`` over the group; a side not in ``need`` may be ``None``.

    Raises:
        ValidationError: a needed side has no members of that arm.
    """
    Y = _outcomes(test)
    out = []
    for t in (0, 1):
        members = group.members[test.T[group.members] == t]
        if members.size == 0:
            if t in need:
                arm = "control" if t == 0 else "treated"
                raise ValidationError(f"group of unit {test.unit_ids[group.owner]} has no {arm} members")
            out.append(None)
        else:
            out.append(math.fsum(Y[members]) / members.size)
    return tuple(out)


def ite(unit, group, test, variant="tau_a", solver=""):
    """ITE estimate for row ``unit`` from its matched ``group``."""
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    unit = int(unit)
    treated = bool(test.T[unit] == 1)
    if variant == "tau_b":
        if not treated:
            raise ValidationError(f"tau_b needs a treated unit; {test.unit_ids[unit]} is a control")
        y0, y1 = estimate_counterfactuals(group, test, need=(0,))
        value = float(_outcomes(test)[unit] - y0)
    else:
        y0, y1 = estimate_counterfactuals(group, test)
        value = float(y1 - y0)
    return EffectEstimate(
        test.unit_ids[unit], y0, y1, value, variant, group.size, group.n_c, group.n_t, treated, solver
    )


def estimate_all(solutions, test, variant="tau_a", solver=""):
    """Estimates for every solved unit.

    ``tau_b`` only covers treated owners. Returns ``(estimates, errors)``
    where ``errors`` maps row index to a message for units whose group
    lacks a needed arm.
    """
    estimates, errors = [], {}
    for unit, sol in solutions.items():
        if variant == "tau_b" and test.T[unit] != 1:
            continue
        try:
            estimates.append(ite(unit, sol.group, test, variant, solver))
        except ValidationError as exc:
            errors[unit] = str(exc)
    return estimates, errors


@dataclass(frozen=True)
class AttResult:
    value: float
    n_used: int
    n_excluded: int


def att(estimates, n_excluded=0):
    """Mean ITE over the treated units in ``estimates``.

    ``n_excluded`` counts treated units dropped upstream (failed solves) and
    is passed through for reporting.
    """
    values = [e.ite for e in estimates if e.treated]
    if not values:
        raise ValidationError("no treated-unit estimates to average")
    return AttResult(math.fsum(values) / len(values), len(values), int(n_excluded))


@dataclass(frozen=True)
class CateResult:
    value: float
    n_units: int
    total_group_size: int


def cate_by_value(estimates, test, covariate, value, bin_width=None):
    """Mean ITE over treated units whose ``covariate`` equals ``value``.

    With ``bin_width``, units in the half-open bin
    ``[value - bin_width / 2, value + bin_width / 2)`` are used instead.
    """
    j = covariate if isinstance(covariate, int) else list(test.columns).index(covariate)
    picked = []
    for e in estimates:
        if not e.treated:
            continue
        x = test.X[test.index_of(e.unit_id), j]
        if bin_width is None:
            hit = x == value
        else:
            hit = value - bin_width / 2 <= x < value + bin_width / 2
        if hit:
            picked.append(e)
    if not picked:
        raise ValidationError(f"no treated estimates with {test.columns[j]} at {value}")
    return CateResult(
        math.fsum(e.ite for e in picked) / len(picked), len(picked), sum(e.group_size for e in picked)
    )


def mutual_membership_rate(group_a, group_b):
    """``max(|A & B| / |A|, |A & B| / |B|)`` for two groups of the same owner."""
    both = np.intersect1d(group_a.members, group_b.members).size
    return max(both / group_a.size, both / group_b.size)
