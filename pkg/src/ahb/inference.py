"""Per-unit confidence intervals for ITE estimates.

Six constructions, all holding the matched group fixed:

``na_true``, ``na_conservative``, ``na_ensemble``
    Normal approximations ``ite +/- z * sqrt(V)``. Given per-arm outcome
    variances ``(v_c, v_t)``, ``V = v_t / n_t + v_c / n_c`` for ``tau_a``
    and ``V = v_t + v_c / n_c`` for ``tau_b`` (the owner's own outcome
    carries a full unit of noise). ``na_true`` uses the known noise variance
    for both arms; ``na_conservative`` uses
    ``max(2 v_c, 2 v_t, v_c + v_t)`` from the group's outcomes for both arms;
    ``na_ensemble`` uses the spread of the ensemble members' predictions at
    the owner for each arm.
``bootstrap``
    Percentile interval of the ITE recomputed after resampling each arm of
    the group with replacement.
``subsample``
    Each arm is subsampled without replacement to ``ceil(0.7 n)`` units
    (capped at ``n - 1``). Deviations of the subsample ITEs from the point
    estimate are rescaled by ``sqrt(b / (n - b))`` before taking
    percentiles, so the spread matches that of a full-size mean.
``posterior``
    Quantiles of the paired ensemble draws ``f1_b(x_i) - f0_b(x_i)``.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ahb.errors import ConfigError, MethodUnavailableError, ValidationError
from ahb.estimation import ite as ite_estimate

METHODS = ("na_ensemble", "na_true", "na_conservative", "bootstrap", "subsample", "posterior")


@dataclass(frozen=True)
class ResamplingConfig:
    n_resamples: int = 1000
    subsample_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.n_resamples < 1:
            raise ConfigError("n_resamples must be positive")
        if not 0 < self.subsample_fraction < 1:
            raise ConfigError("subsample_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class IntervalEstimate:
    unit_id: str
    method: str
    lower: float
    upper: float
    level: float
    n_resamples: int
    point: float

    @property
    def width(self):
        return self.upper - self.lower

    def covers(self, value):
        return self.lower <= value <= self.upper

    def as_row(self):
        return {"unit_id": self.unit_id, "method": self.method, "level": self.level,
                "lower": self.lower, "upper": self.upper}


def unit_rng(seed, unit_id):
    """Independent RNG stream per unit, stable across worker layouts."""
    return np.random.default_rng([int(seed), zlib.crc32(str(unit_id).encode())])


def _arm_outcomes(group, test):
    Y = test.Y
    return Y[group.controls(test.T)], Y[group.treated(test.T)]


def _combine(v_c, v_t, n_c, n_t, variant):
    if variant == "tau_b":
        return v_t + v_c / n_c
    return v_t / n_t + v_c / n_c


def _sample_var(y):
    return float(np.var(y, ddof=1)) if y.size >= 2 else math.nan


def _conservative_variance(y_c, y_t):
    v_c, v_t = _sample_var(y_c), _sample_var(y_t)
    options = [x for x in (2 * v_c, 2 * v_t, v_c + v_t) if not math.isnan(x)]
    if not options:
        raise ValidationError("conservative variance needs an arm with at least 2 members")
    return max(options)


def _bootstrap_means(y, rng, R):
    return y[rng.integers(0, y.size, size=(R, y.size))].mean(axis=1)


def _subsample_deviations(y, fraction, rng, R):
    # rescaled so their spread matches that of the full-size arm mean
    n = y.size
    b = min(math.ceil(fraction * n), n - 1)
    idx = np.argsort(rng.random((R, n)), axis=1)[:, :b]
    return (y[idx].mean(axis=1) - y.mean()) * math.sqrt(b / (n - b))


def _percentile(draws, level):
    alpha = 1 - level
    lo, hi = np.quantile(draws, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


def interval(
    unit,
    group,
    test,
    model=None,
    method="subsample",
    level=0.95,
    config=None,
    true_variance=None,
    variant="tau_a",
    draws=None,
):
    """Confidence interval for row ``unit``'s ITE.

    Args:
        unit: row index of the owner in ``test``.
        group: the owner's fixed matched group.
        test: dataset with outcomes.
        model: outcome model; needed by ``na_ensemble`` and ``posterior``.
        method: one of :data:`METHODS`.
        level: coverage level in (0, 1).
        config: :class:`ResamplingConfig` for ``bootstrap`` and ``subsample``.
        true_variance: noise variance, required by ``na_true``.
        variant: ``tau_a`` or ``tau_b``.
        draws: optional precomputed ``(draws0, draws1)`` member predictions at
            the owner, each of shape ``(B,)``.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown interval method {method!r}; choose from {METHODS}")
    if not 0 < level < 1:
        raise ConfigError("level must lie in (0, 1)")
    config = config or ResamplingConfig()
    unit = int(unit)
    est = ite_estimate(unit, group, test, variant)
    point = est.ite
    uid = test.unit_ids[unit]
    y_c, y_t = _arm_outcomes(group, test)
    z = float(norm.ppf(0.5 + level / 2))
    n_res = 0

    if method in ("na_ensemble", "posterior"):
        if draws is None:
            if model is None or not model.has_ensemble:
                raise MethodUnavailableError(f"{method} needs an outcome model with ensemble draws")
            own = test.subset([unit])
            draws = (model.ensemble_predict_units(own, 0)[:, 0], model.ensemble_predict_units(own, 1)[:, 0])
        d0, d1 = (np.asarray(d, dtype=float) for d in draws)

    if method == "na_true":
        if true_variance is None:
            raise MethodUnavailableError("na_true needs the true noise variance")
        half = z * math.sqrt(_combine(true_variance, true_variance, group.n_c, group.n_t, variant))
        lo, hi = point - half, point + half
    elif method == "na_conservative":
        v = _conservative_variance(y_c, y_t)
        half = z * math.sqrt(_combine(v, v, group.n_c, group.n_t, variant))
        lo, hi = point - half, point + half
    elif method == "na_ensemble":
        v_c, v_t = float(np.var(d0)), float(np.var(d1))
        half = z * math.sqrt(_combine(v_c, v_t, group.n_c, group.n_t, variant))
        lo, hi = point - half, point + half
    elif method == "posterior":
        lo, hi = _percentile(d1 - d0, level)
    else:
        if y_c.size < 2 or (variant == "tau_a" and y_t.size < 2):
            raise ValidationError(f"{method} needs at least 2 members in each arm used; unit {uid}")
        rng = unit_rng(config.seed, uid)
        R = n_res = config.n_resamples
        if method == "bootstrap":
            mean_c = _bootstrap_means(y_c, rng, R)
            if variant == "tau_b":
                reps = float(test.Y[unit]) - mean_c
            else:
                reps = _bootstrap_means(y_t, rng, R) - mean_c
        else:
            reps = point - _subsample_deviations(y_c, config.subsample_fraction, rng, R)
            if variant == "tau_a":
                reps = reps + _subsample_deviations(y_t, config.subsample_fraction, rng, R)
        lo, hi = _percentile(reps, level)
    return IntervalEstimate(uid, method, lo, hi, level, n_res, point)
