"""Hyperparameter selection by validation loss.

For each candidate setting, every validation unit gets a box, and its own
observed arm is predicted from the other members of that arm in the box
(the owner itself is left out, otherwise a box holding only the owner would
predict perfectly). Units with no such member fall back to the mean outcome
of the rest of their arm in the validation set and are counted as
infeasible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from ahb.errors import ConfigError, InfeasibleError, ValidationError
from ahb.predictor import unit_predictions
from ahb.solver_fast import FastParams, fast_all
from ahb.solver_mip import Preprocess, SolverParams, normalized_gammas, solve_all

SOLVERS = ("mip", "fast")


def normalize_gammas(gamma0, gamma1, model, candidates):
    """Divide each gamma by the sample variance of ``|f_t|`` over ``candidates``."""
    f0, f1 = unit_predictions(model, candidates)
    return normalized_gammas(gamma0, gamma1, f0, f1)


def make_params(solver, setting):
    """Build solver params from a ``{name: value}`` setting."""
    cls = SolverParams if solver == "mip" else FastParams
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    known = {f.name for f in fields(cls)}
    unknown = set(setting) - known
    if unknown:
        raise ConfigError(f"unknown {solver} hyperparameters: {sorted(unknown)}")
    setting = dict(setting)
    if isinstance(setting.get("preprocess"), str):
        setting["preprocess"] = Preprocess.parse(setting["preprocess"])
    return cls(**setting)


@dataclass(frozen=True)
class LossResult:
    loss: float
    n_infeasible: int


def validation_loss(setting, validation, solver, model, workers=1, preds=None):
    """Squared error of matched predictions of each unit's observed outcome.

    Raises:
        InfeasibleError: no unit could be predicted from its box.
    """
    if validation.Y is None:
        raise ValidationError("validation data needs outcomes")
    params = make_params(solver, setting)
    run = solve_all if solver == "mip" else fast_all
    result = run(validation, model, params, workers=workers, preds=preds)
    Y, T = validation.Y, validation.T
    arm_sum = {t: math.fsum(Y[T == t]) for t in (0, 1)}
    arm_n = {t: int(np.sum(T == t)) for t in (0, 1)}
    terms = []
    n_bad = 0
    for i in range(validation.n):
        t = int(T[i])
        pred = None
        sol = result.solutions.get(i)
        if sol is not None:
            same = sol.group.members[(T[sol.group.members] == t) & (sol.group.members != i)]
            if same.size:
                pred = math.fsum(Y[same]) / same.size
        if pred is None:
            n_bad += 1
            if arm_n[t] < 2:
                continue
            pred = (arm_sum[t] - Y[i]) / (arm_n[t] - 1)
        terms.append((Y[i] - pred) ** 2)
    if n_bad == validation.n:
        raise InfeasibleError("every validation unit is infeasible under this setting")
    return LossResult(math.fsum(terms), n_bad)


@dataclass(frozen=True)
class TuneResult:
    best: dict
    best_loss: float
    table: list

    def rows(self):
        return [
            {"lambda_json": json.dumps(_jsonable(s), sort_keys=True), "loss": r.loss, "n_infeasible": r.n_infeasible}
            for s, r in self.table
        ]


def _jsonable(setting):
    return {k: (str(v) if isinstance(v, Preprocess) else v) for k, v in setting.items()}


def tune(grid, validation, solver, model, workers=1):
    """Evaluate every setting in ``grid``; the lowest loss wins, ties to the earliest."""
    grid = list(grid)
    if not grid:
        raise ConfigError("tuning grid is empty")
    preds = unit_predictions(model, validation)
    table = []
    for setting in grid:
        try:
            res = validation_loss(setting, validation, solver, model, workers, preds)
        except InfeasibleError:
            res = LossResult(math.inf, validation.n)
        table.append((dict(setting), res))
    best = min(range(len(table)), key=lambda k: (table[k][1].loss, k))
    if math.isinf(table[best][1].loss):
        raise InfeasibleError("every grid setting left all validation units infeasible")
    return TuneResult(table[best][0], table[best][1].loss, table)
