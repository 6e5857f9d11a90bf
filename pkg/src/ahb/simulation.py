"""Synthetic data with known effects, the MAE/ATT metric, and baselines.

Covariates are drawn independently: continuous ones from U(0, 1) and binary
ones from Bernoulli(0.5). Treatment follows ``Z ~ Bernoulli(expit(gamma . x))``
and the outcome is ``y = g(x) + h(x) Z + eps`` with ``eps ~ N(0, sigma^2)``.

Column order is all continuous covariates, then all binary ones. By default
``g`` reads the first ``n_confounding`` columns, ``h`` the next
``n_treatment`` and the remaining columns are irrelevant. Explicit index
lists override this.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from ahb.data import BINARY, CONTINUOUS, Dataset
from ahb.errors import ConfigError, ValidationError
from ahb.predictor import OracleModel

FUNCTION_KINDS = ("None", "Const", "Box", "Linear", "Quad", "Binary", "Mixed")


@dataclass(frozen=True)
class SurfaceFn:
    """One named response function applied to a fixed set of columns.

    Picklable, so oracle models built from it work across processes.
    ``Binary`` uses the first binary column in ``cols``; ``Mixed`` sums the
    continuous and the binary columns in ``cols``.
    """

    kind: str
    cols: tuple
    kinds: tuple = ()

    def __post_init__(self):
        if self.kind not in FUNCTION_KINDS:
            raise ConfigError(f"unknown function kind {self.kind!r}; choose from {FUNCTION_KINDS}")

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        sub = X[:, list(self.cols)]
        if self.kind == "None":
            return np.zeros(X.shape[0])
        if self.kind == "Const":
            return np.ones(X.shape[0])
        if self.kind == "Box":
            return (sub > 0.5).sum(axis=1).astype(float)
        if self.kind == "Linear":
            return sub.sum(axis=1)
        if self.kind == "Quad":
            return (sub**2).sum(axis=1)
        if self.kind == "Binary":
            bin_cols = [c for c, k in zip(self.cols, self.kinds) if k == BINARY] or list(self.cols)
            return X[:, bin_cols[0]].copy()
        return sub.sum(axis=1)  # Mixed


@dataclass(frozen=True)
class DgpConfig:
    """Simulation settings.

    Attributes:
        p_c, p_d: numbers of continuous and binary covariates.
        n_confounding, n_treatment, n_irrelevant: role split; must sum to
            ``p_c + p_d``.
        g_kind, h_kind: response functions from :data:`FUNCTION_KINDS`.
        gamma: propensity coefficients; ``None`` means 1 on the confounding
            columns and 0 elsewhere.
        sigma: noise standard deviation.
        n: number of units.
        seed: RNG seed.
        g_cols, h_cols: optional explicit column indices overriding the
            role split.
    """

    p_c: int = 2
    p_d: int = 0
    n_confounding: int = 2
    n_treatment: int = 0
    n_irrelevant: int = 0
    g_kind: str = "Linear"
    h_kind: str = "Const"
    gamma: tuple | None = None
    sigma: float = 1.0
    n: int = 600
    seed: int = 0
    g_cols: tuple | None = None
    h_cols: tuple | None = None

    def __post_init__(self):
        p = self.p_c + self.p_d
        if min(self.p_c, self.p_d, self.n_confounding, self.n_treatment, self.n_irrelevant) < 0:
            raise ConfigError("covariate counts must be nonnegative")
        if p < 1:
            raise ConfigError("need at least one covariate")
        if self.n_confounding + self.n_treatment + self.n_irrelevant != p:
            raise ConfigError(
                f"role split ({self.n_confounding}, {self.n_treatment}, {self.n_irrelevant}) "
                f"does not add up to p_c + p_d = {p}"
            )
        if self.gamma is not None and len(self.gamma) != p:
            raise ConfigError(f"gamma has length {len(self.gamma)}, expected {p}")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        for name in ("g", "h"):
            kind = getattr(self, f"{name}_kind")
            if kind not in FUNCTION_KINDS:
                raise ConfigError(f"unknown {name}_kind {kind!r}")
            cols = self.columns_for(name)
            if any(c < 0 or c >= p for c in cols):
                raise ConfigError(f"{name}_cols out of range")
            kinds = [self.kinds[c] for c in cols]
            if kind == "Binary" and BINARY not in kinds:
                raise ConfigError(f"{name}_kind Binary needs a binary covariate among its columns")
            if kind == "Mixed" and not (BINARY in kinds and CONTINUOUS in kinds):
                raise ConfigError(f"{name}_kind Mixed needs continuous and binary covariates among its columns")
            if kind in ("Box", "Linear", "Quad") and not cols:
                raise ConfigError(f"{name}_kind {kind} needs at least one covariate")

    @property
    def p(self):
        return self.p_c + self.p_d

    @property
    def kinds(self):
        return (CONTINUOUS,) * self.p_c + (BINARY,) * self.p_d

    @property
    def columns(self):
        return tuple(f"x{j + 1}" for j in range(self.p_c)) + tuple(f"w{j + 1}" for j in range(self.p_d))

    def columns_for(self, name):
        explicit = getattr(self, f"{name}_cols")
        if explicit is not None:
            return tuple(int(c) for c in explicit)
        if name == "g":
            return tuple(range(self.n_confounding))
        return tuple(range(self.n_confounding, self.n_confounding + self.n_treatment))

    def propensity_coefficients(self):
        if self.gamma is not None:
            return np.asarray(self.gamma, dtype=float)
        coef = np.zeros(self.p)
        coef[list(self.columns_for("g"))] = 1.0
        return coef

    def g(self):
        return SurfaceFn(self.g_kind, self.columns_for("g"), self.kinds)

    def h(self):
        return SurfaceFn(self.h_kind, self.columns_for("h"), self.kinds)

    def with_(self, **changes):
        d = asdict(self)
        d.update(changes)
        return DgpConfig(**d)

    def to_dict(self):
        d = asdict(self)
        for key in ("gamma", "g_cols", "h_cols"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        for key in ("gamma", "g_cols", "h_cols"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SimTruth:
    """Ground truth per unit, aligned with the generated dataset's rows."""

    g: np.ndarray
    h: np.ndarray
    e: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    sigma: float = 0.0

    @property
    def ite(self):
        return self.h

    def subset(self, rows):
        rows = np.asarray(rows)
        return SimTruth(self.g[rows], self.h[rows], self.e[rows], self.y0[rows], self.y1[rows], self.sigma)


def generate(config):
    """Draw one dataset and its truth. Same config (incl. seed) gives identical output."""
    rng = np.random.default_rng(config.seed)
    n = config.n
    Xc = rng.uniform(0.0, 1.0, size=(n, config.p_c))
    Xd = rng.binomial(1, 0.5, size=(n, config.p_d)).astype(float)
    X = np.hstack([Xc, Xd])
    e = expit(X @ config.propensity_coefficients())
    Z = rng.binomial(1, e).astype(np.int64)
    eps = rng.normal(0.0, config.sigma, size=n) if config.sigma > 0 else np.zeros(n)
    g = config.g()(X)
    h = config.h()(X)
    y0 = g + eps
    y1 = g + h + eps
    Y = np.where(Z == 1, y1, y0)
    ids = tuple(str(i) for i in range(n))
    data = Dataset(X, Z, Y, config.columns, config.kinds, ids)
    return data, SimTruth(g, h, e, y0, y1, float(config.sigma))


def make_oracle(config):
    """Oracle outcome model returning the true ``g`` and ``g + h``."""
    return OracleModel(config.g(), config.h())


def load_scenario(path):
    with open(path) as fh:
        raw = json.load(fh)
    return DgpConfig.from_dict(raw)


@dataclass(frozen=True)
class MaeAtt:
    """MAE over treated units, normalized by the true ATT unless it is zero."""

    value: float
    mae: float
    true_att: float
    normalized: bool


def evaluate_mae_att(estimates, truth, data):
    """MAE/ATT over treated units with an estimate.

    Args:
        estimates: mapping unit row index -> estimated ITE (or a list of
            :class:`~ahb.estimation.EffectEstimate`, matched by unit id).
        truth: :class:`SimTruth` aligned with ``data``.
        data: the dataset the estimates refer to.
    """
    est = _as_row_map(estimates, data)
    rows = [r for r in est if data.T[r] == 1]
    if not rows:
        raise ValidationError("no treated-unit estimates to evaluate")
    rows = np.asarray(sorted(rows))
    errors = np.abs(np.array([est[r] for r in rows]) - truth.h[rows])
    mae = float(errors.mean())
    att = float(truth.h[data.T == 1].mean())
    if att == 0:
        return MaeAtt(mae, mae, att, False)
    return MaeAtt(mae / abs(att), mae, att, True)


def _as_row_map(estimates, data):
    if isinstance(estimates, dict):
        return {int(k): float(v) for k, v in estimates.items()}
    return {data.index_of(e.unit_id): float(e.ite) for e in estimates}


# Baselines. All estimate tau_b for treated units, matching with replacement.

BASELINES = ("naive", "mahal_nn", "prognostic_nn", "best_cf")


def _knn_controls(dist, k):
    # dist: (n_treated, n_controls); stable order so ties go to lower index
    k = min(k, dist.shape[1])
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def naive(data):
    """Every treated unit gets ``Y_i`` minus the overall control mean."""
    _require_outcomes(data)
    treated = np.flatnonzero(data.T == 1)
    controls = np.flatnonzero(data.T == 0)
    if treated.size == 0 or controls.size == 0:
        raise ValidationError("naive estimator needs both arms")
    y0 = data.Y[controls].mean()
    return {int(i): float(data.Y[i] - y0) for i in treated}


def mahal_nn(data, k=1, ridge=1e-8):
    """1:k nearest-neighbor matching on Mahalanobis distance.

    A singular covariance gets a small ridge added to its diagonal.
    """
    _require_outcomes(data)
    treated, controls = _arms(data, k)
    cov = np.atleast_2d(np.cov(data.X, rowvar=False))
    scale = max(float(np.trace(cov)) / cov.shape[0], 1.0)
    try:
        prec = np.linalg.inv(cov)
        if not np.all(np.isfinite(prec)) or np.linalg.cond(cov) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        prec = np.linalg.inv(cov + ridge * scale * np.eye(cov.shape[0]))
    diff = data.X[treated][:, None, :] - data.X[controls][None, :, :]
    dist = np.einsum("tcj,jk,tck->tc", diff, prec, diff)
    return _tau_b(data, treated, controls, _knn_controls(dist, k))


def prognostic_nn(data, model, k=1):
    """1:k matching on the predicted control outcome ``f0``."""
    _require_outcomes(data)
    treated, controls = _arms(data, k)
    f0 = model.predict_units(data, 0)
    dist = np.abs(f0[treated][:, None] - f0[controls][None, :])
    return _tau_b(data, treated, controls, _knn_controls(dist, k))


def best_cf(data, truth, k=1):
    """1:k matching to controls whose outcomes are closest to the true ``Y_i(0)``."""
    _require_outcomes(data)
    treated, controls = _arms(data, k)
    dist = np.abs(truth.y0[treated][:, None] - data.Y[controls][None, :])
    return _tau_b(data, treated, controls, _knn_controls(dist, k))


def _require_outcomes(data):
    if data.Y is None:
        raise ValidationError("baselines need observed outcomes")


def _arms(data, k):
    if int(k) != k or k < 1:
        raise ConfigError("k must be a positive integer")
    treated = np.flatnonzero(data.T == 1)
    controls = np.flatnonzero(data.T == 0)
    if controls.size < k:
        raise ValidationError(f"need at least k={k} controls, have {controls.size}")
    return treated, controls


def _tau_b(data, treated, controls, nn):
    y0 = data.Y[controls][nn].mean(axis=1)
    return {int(i): float(data.Y[i] - y0[r]) for r, i in enumerate(treated)}


def baseline(method, data, model=None, truth=None, k=1):
    """Dispatch to a named baseline; returns ``{row index: ite}`` for treated units."""
    if method == "naive":
        return naive(data)
    if method == "mahal_nn":
        return mahal_nn(data, k)
    if method == "prognostic_nn":
        if model is None:
            raise ConfigError("prognostic_nn needs an outcome model")
        return prognostic_nn(data, model, k)
    if method == "best_cf":
        if truth is None:
            raise ConfigError("best_cf needs the simulation truth")
        return best_cf(data, truth, k)
    raise ConfigError(f"unknown baseline {method!r}; choose from {BASELINES}")


# Experiment harness: scenario x replicate x method.

AHB_METHODS = ("mip", "fast")
DEFAULT_KS = (1, 3, 5, 7, 10)


@dataclass(frozen=True)
class HarnessConfig:
    """How each replicate is split, modelled and matched.

    Attributes:
        predictor: ``builtin`` (bagged trees fitted on the training split)
            or ``oracle`` (true surfaces).
        train_fraction: share of the ``n`` units used for training.
        solver: exact-solver params.
        fast: greedy-solver params.
        variant: ITE variant for the AHB methods.
        ensemble: bagged-tree settings; the seed is offset per replicate.
        ks: ``k`` values swept by 1:k baselines given without an explicit k.
    """

    predictor: str = "builtin"
    train_fraction: float = 2 / 3
    solver: object = None
    fast: object = None
    variant: str = "tau_a"
    ensemble: object = None
    ks: tuple = DEFAULT_KS

    def __post_init__(self):
        from ahb.predictor import EnsembleConfig
        from ahb.solver_fast import FastParams
        from ahb.solver_mip import SolverParams

        if self.predictor not in ("builtin", "oracle"):
            raise ConfigError(f"unknown predictor {self.predictor!r}")
        if self.solver is None:
            object.__setattr__(self, "solver", SolverParams(normalize=True))
        if self.fast is None:
            object.__setattr__(self, "fast", FastParams(normalize=True))
        if self.ensemble is None:
            object.__setattr__(self, "ensemble", EnsembleConfig())


def parse_method(name):
    """``"mahal_nn:3"`` -> ``("mahal_nn", 3)``; plain names get ``k = None``."""
    base, _, k = name.partition(":")
    if base not in AHB_METHODS + BASELINES:
        raise ConfigError(f"unknown method {name!r}; choose from {AHB_METHODS + BASELINES}")
    if k:
        if base in AHB_METHODS or base == "naive":
            raise ConfigError(f"method {base} takes no k")
        try:
            k = int(k)
        except ValueError:
            raise ConfigError(f"bad k in method {name!r}") from None
        if k < 1:
            raise ConfigError(f"bad k in method {name!r}")
        return base, k
    return base, None


@dataclass
class Replicate:
    """One generated replicate with its fitted model and lazily solved boxes."""

    config: DgpConfig
    harness: HarnessConfig
    train: Dataset
    test: Dataset
    truth: SimTruth
    model: object
    workers: int = 1
    _runs: dict = field(default_factory=dict)

    def solve(self, solver):
        from ahb.predictor import unit_predictions
        from ahb.solver_fast import fast_all
        from ahb.solver_mip import solve_all

        if solver not in self._runs:
            if "preds" not in self._runs:
                self._runs["preds"] = unit_predictions(self.model, self.test)
            preds = self._runs["preds"]
            if solver == "mip":
                self._runs[solver] = solve_all(self.test, self.model, self.harness.solver, workers=self.workers, preds=preds)
            else:
                self._runs[solver] = fast_all(self.test, self.model, self.harness.fast, workers=self.workers, preds=preds)
        return self._runs[solver]

    def ahb_estimates(self, solver):
        from ahb.estimation import estimate_all

        run = self.solve(solver)
        ests, errors = estimate_all(run.solutions, self.test, self.harness.variant, solver)
        est = {self.test.index_of(e.unit_id): e.ite for e in ests if e.treated}
        n_treated = int(self.test.T.sum())
        return est, n_treated - len(est)


def make_replicate(config, harness=None, replicate=0, workers=1):
    """Generate replicate ``replicate`` (seed ``config.seed + replicate``), split, fit."""
    from ahb.data import SplitSpec, split
    from ahb.predictor import fit_builtin

    harness = harness or HarnessConfig()
    cfg = config.with_(seed=config.seed + replicate)
    data, truth = generate(cfg)
    train, _, test = split(data, SplitSpec(harness.train_fraction, seed=cfg.seed))
    test_truth = truth.subset([int(u) for u in test.unit_ids])
    if harness.predictor == "oracle":
        model = make_oracle(cfg)
    else:
        ens = harness.ensemble
        model = fit_builtin(train, type(ens)(ens.n_trees, ens.max_depth, ens.min_leaf, ens.seed + cfg.seed))
    return Replicate(cfg, harness, train, test, test_truth, model, workers)


def evaluate_method(rep, method):
    """MAE/ATT of one method on a replicate, plus excluded treated units and best k."""
    base, k = parse_method(method)
    if base in AHB_METHODS:
        est, excluded = rep.ahb_estimates(base)
        if not est:
            return _nan_row(excluded)
        return evaluate_mae_att(est, rep.truth, rep.test), excluded, None
    ks = [k] if k is not None else ([None] if base == "naive" else list(rep.harness.ks))
    best = None
    for kk in ks:
        if kk is not None and kk > int(np.sum(rep.test.T == 0)):
            continue
        est = baseline(base, rep.test, rep.model, rep.truth, kk or 1)
        score = evaluate_mae_att(est, rep.truth, rep.test)
        if best is None or score.value < best[0].value:
            best = (score, 0, kk)
    if best is None:
        raise ValidationError(f"{method}: too few controls for every k")
    return best


def _nan_row(excluded):
    return MaeAtt(float("nan"), float("nan"), float("nan"), False), excluded, None


def run_scenario(config, methods, replicates, harness=None, name="scenario", workers=1):
    """Every method on every replicate.

    Returns result rows ``(scenario, method, replicate, mae_over_att, mae,
    normalized, n_excluded, k)`` in (replicate, method) order.
    """
    methods = list(methods)
    for m in methods:
        parse_method(m)
    rows = []
    for r in range(replicates):
        rep = make_replicate(config, harness, r, workers)
        for m in methods:
            score, excluded, k = evaluate_method(rep, m)
            rows.append({
                "scenario": name,
                "method": m,
                "replicate": r,
                "mae_over_att": score.value,
                "mae": score.mae,
                "normalized": score.normalized,
                "n_excluded": excluded,
                "k": "" if k is None else k,
            })
    return rows


def summarize(rows):
    """Collapse result rows to ``(scenario, method, mean, sd, replicates)``."""
    out = {}
    for row in rows:
        out.setdefault((row["scenario"], row["method"]), []).append(row["mae_over_att"])
    summary = []
    for (scenario, method), vals in out.items():
        vals = np.asarray(vals, dtype=float)
        summary.append({
            "scenario": scenario,
            "method": method,
            "mae_over_att_mean": float(np.mean(vals)),
            "mae_over_att_sd": float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0,
            "replicates": int(vals.size),
        })
    return summary


def coverage_study(config, methods, replicates, harness=None, level=0.95, resampling=None, name="scenario", workers=1):
    """Coverage of the true ITE by each interval method over all test units.

    Boxes come from the exact solver. Units whose group cannot support a
    method are skipped for that method and do not count.
    """
    from ahb.errors import AHBError
    from ahb.inference import interval

    harness = harness or HarnessConfig()
    hits = {m: [] for m in methods}
    widths = {m: [] for m in methods}
    for r in range(replicates):
        rep = make_replicate(config, harness, r, workers)
        run = rep.solve("mip")
        draws = None
        if rep.model.has_ensemble and any(m in ("na_ensemble", "posterior") for m in methods):
            draws = (rep.model.ensemble_predict_units(rep.test, 0), rep.model.ensemble_predict_units(rep.test, 1))
        for unit, sol in run.solutions.items():
            if harness.variant == "tau_b" and rep.test.T[unit] != 1:
                continue
            unit_draws = None if draws is None else (draws[0][:, unit], draws[1][:, unit])
            for m in methods:
                try:
                    iv = interval(unit, sol.group, rep.test, rep.model, m, level, resampling,
                                  rep.truth.sigma**2, harness.variant, unit_draws)
                except AHBError:
                    continue
                hits[m].append(iv.covers(rep.truth.h[unit]))
                widths[m].append(iv.width)
    rows = []
    for m in methods:
        n = len(hits[m])
        rows.append({
            "setting": name,
            "method": m,
            "coverage": float(np.mean(hits[m])) if n else float("nan"),
            "mean_width": float(np.mean(widths[m])) if n else float("nan"),
            "n_intervals": n,
        })
    return rows
