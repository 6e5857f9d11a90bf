"""Per-unit batch execution shared by both solvers.

Each unit's box is solved independently, so a batch is a map over unit
indices. Results are always returned in the order of ``units`` whatever the
worker count, and per-unit infeasibility is recorded instead of aborting.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ahb.errors import InfeasibleError

_WORKER_STATE = {}


@dataclass
class BatchResult:
    """Solutions keyed by unit index (in input order) plus per-unit errors."""

    solutions: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions.values())

    def __getitem__(self, unit):
        return self.solutions[unit]

    @property
    def units(self):
        return list(self.solutions)


def _init_worker(fn, context):
    _WORKER_STATE["fn"] = fn
    _WORKER_STATE["context"] = context


def _call(unit):
    return _guarded(_WORKER_STATE["fn"], _WORKER_STATE["context"], unit)


def _guarded(fn, context, unit):
    try:
        return unit, fn(unit, context), None
    except InfeasibleError as exc:
        return unit, None, str(exc)


def run_units(fn, context, units, workers=1):
    """Apply ``fn(unit, context)`` to every unit.

    ``fn`` must be a module-level function and ``context`` picklable when
    ``workers > 1``.
    """
    units = [int(u) for u in units]
    result = BatchResult()
    if workers <= 1 or len(units) <= 1:
        outcomes = (_guarded(fn, context, u) for u in units)
        for unit, sol, err in outcomes:
            _record(result, unit, sol, err)
        return result
    chunk = max(1, len(units) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(fn, context)) as pool:
        for unit, sol, err in pool.map(_call, units, chunksize=chunk):
            _record(result, unit, sol, err)
    return result


def _record(result, unit, sol, err):
    if err is None:
        result.solutions[unit] = sol
    else:
        result.errors[unit] = err
