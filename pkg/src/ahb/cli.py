"""Command-line interface.

Subcommands::

    ahb match      build boxes (and optionally ITE estimates) for a CSV dataset
    ahb intervals  per-unit confidence intervals, optionally scored against truth
    ahb tune       validation-loss grid search over solver settings
    ahb simulate   synthetic scenarios x replicates x methods
    ahb generate   write one synthetic dataset with its truth
    ahb replay     re-run a command from its run-manifest.json

Exit codes: 0 success, 2 configuration or validation error, 3 every unit
infeasible, 4 input/output or parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import zlib

import numpy as np
import pandas as pd

import ahb
from ahb.boxes import box_rows
from ahb.data import Dataset, Schema, SplitSpec, load_dataset, split
from ahb.errors import (
    AHBError,
    ConfigError,
    InfeasibleError,
    MethodUnavailableError,
    ParseError,
    ValidationError,
)
from ahb.estimation import VARIANTS, estimate_all
from ahb.inference import METHODS as INTERVAL_METHODS
from ahb.inference import ResamplingConfig, interval
from ahb.predictor import EnsembleConfig, ExternalModel, fit_builtin, unit_predictions
from ahb.simulation import (
    DgpConfig,
    HarnessConfig,
    coverage_study,
    generate,
    parse_method,
    run_scenario,
    summarize,
)
from ahb.solver_fast import FastParams, fast_all, fast_box
from ahb.solver_mip import Preprocess, SolverParams, solve_all, verify_with_oracle
from ahb.tuning import tune

log = logging.getLogger("ahb")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4
MANIFEST = "run-manifest.json"


def sub_seed(seed, stream):
    """Seed for a named random stream derived from the single run seed."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stream.encode())])
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------- arguments


def _add_model_args(p, need_outcomes=True):
    p.add_argument("--data", required=True, help="CSV with covariates, treatment and outcome")
    p.add_argument("--schema", required=True, help="JSON schema naming the column roles")
    p.add_argument("--predictor", default="builtin",
                   help="builtin | external:<predictions.csv> | oracle (simulation only)")
    p.add_argument("--train-data", help="separate training CSV for the builtin predictor")
    p.add_argument("--train-fraction", type=float, default=0.5,
                   help="share of --data used to fit the builtin predictor when --train-data is absent")
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)


def _add_solver_args(p):
    p.add_argument("--solver", choices=("mip", "fast"), default="mip")
    p.add_argument("--m", type=int, default=1, help="minimum controls per box")
    p.add_argument("--gamma0", type=float, default=1.0)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="divide gammas by the sample variance of |f_t| over the test units")
    p.add_argument("--preprocess", default="none", help="none | sort:<d> | threshold_L:<eps> | threshold_coord:<eps>")
    p.add_argument("--exclude-other-treated", action="store_true",
                   help="treated owners match to controls only")
    p.add_argument("--c", type=float, default=2.0, help="fast solver stop multiplier")
    p.add_argument("--grid", type=int, default=5, help="fast solver grid points per axis")


def build_parser():
    parser = argparse.ArgumentParser(prog="ahb", description="Adaptive hyper-box matching")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="construct boxes and estimate ITEs")
    _add_model_args(p)
    _add_solver_args(p)
    p.add_argument("--variant", choices=VARIANTS + ("none",), default="tau_a",
                   help="ITE estimator; 'none' writes boxes only and needs no outcomes")
    p.add_argument("--verify-oracle", action="store_true",
                   help="cross-check the exact solver by brute force (small inputs only)")
    p.add_argument("--trace", action="store_true", help="write fast-solver expansion steps to trace.csv")

    p = sub.add_parser("intervals", help="per-unit confidence intervals")
    _add_model_args(p)
    _add_solver_args(p)
    p.add_argument("--variant", choices=VARIANTS, default="tau_a")
    p.add_argument("--method", default="subsample", help=f"comma list from {', '.join(INTERVAL_METHODS)}")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--n-resamples", type=int, default=1000)
    p.add_argument("--subsample-fraction", type=float, default=0.7)
    p.add_argument("--true-variance", type=float, help="noise variance for na_true")
    p.add_argument("--coverage", action="store_true", help="score intervals against --truth")
    p.add_argument("--truth", help="CSV with columns id, ite")

    p = sub.add_parser("tune", help="grid search by validation loss")
    _add_model_args(p)
    p.add_argument("--solver", choices=("mip", "fast"), default="mip")
    p.add_argument("--grid-file", required=True, help="JSON list of settings, e.g. [{\"beta\": 0.5}]")
    p.add_argument("--validation-fraction", type=float, default=0.25)

    p = sub.add_parser("simulate", help="run synthetic scenarios")
    p.add_argument("--scenario", required=True, help="JSON object or list of objects (DGP settings, optional 'name')")
    p.add_argument("--methods", default="mip,fast,naive", help="comma list: mip, fast, naive, mahal_nn[:k], prognostic_nn[:k], best_cf[:k]")
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--n", type=int, help="override the scenario's n")
    p.add_argument("--sigma", type=float, help="override the scenario's sigma")
    p.add_argument("--predictor", choices=("builtin", "oracle"), default="builtin")
    p.add_argument("--train-fraction", type=float, default=2 / 3)
    p.add_argument("--variant", choices=VARIANTS, default="tau_a")
    p.add_argument("--coverage", help="comma list of interval methods; runs a coverage study instead")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--n-resamples", type=int, default=1000)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    _add_solver_args(p)

    p = sub.add_parser("generate", help="write one synthetic dataset, its truth and a schema")
    p.add_argument("--scenario", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", help="write outputs here instead of the recorded directory")
    p.add_argument("--workers", type=int, help="override the worker count")
    return parser


# ---------------------------------------------------------------- helpers


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _versions():
    import scipy
    import sklearn

    return {
        "ahb": ahb.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def _write_csv(frame, path, columns):
    frame = pd.DataFrame(frame, columns=columns)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _write_manifest(args, out_dir, extra):
    recorded = {k: v for k, v in vars(args).items() if k not in ("func",)}
    inputs = {}
    for key in ("data", "schema", "train_data", "grid_file", "scenario", "truth"):
        path = recorded.get(key)
        if path and os.path.exists(path):
            inputs[key] = {"path": os.path.abspath(path), "sha256": _sha256(path)}
    pred = recorded.get("predictor", "")
    if isinstance(pred, str) and pred.startswith("external:"):
        path = pred.split(":", 1)[1]
        if os.path.exists(path):
            inputs["predictions"] = {"path": os.path.abspath(path), "sha256": _sha256(path)}
    manifest = {
        "command": args.command,
        "args": recorded,
        "seeds": {name: sub_seed(args.seed, name) for name in ("split", "predictor", "resampling", "simulation")},
        "inputs": inputs,
        "versions": _versions(),
        **extra,
    }
    with open(os.path.join(out_dir, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solver_params(args):
    return SolverParams(
        gamma0=args.gamma0,
        gamma1=args.gamma1,
        beta=args.beta,
        m=args.m,
        normalize=args.normalize,
        preprocess=Preprocess.parse(args.preprocess),
        exclude_other_treated=args.exclude_other_treated,
    )


def _fast_params(args):
    if args.exclude_other_treated or args.preprocess != "none":
        raise ConfigError("--exclude-other-treated and --preprocess apply to the mip solver only")
    return FastParams(
        c=args.c, grid_points_per_axis=args.grid, m=args.m,
        gamma0=args.gamma0, gamma1=args.gamma1, beta=args.beta, normalize=args.normalize,
    )


def _load(path, schema, outcome_optional=False):
    schema = Schema.from_json(schema) if isinstance(schema, str) else schema
    if outcome_optional:
        schema = Schema.from_dict({**schema.to_dict(), "outcome_optional": True})
    return load_dataset(path, schema)


def _prepare(args, need_test_outcomes=True, validation_fraction=0.0):
    """Load data and the outcome model. Returns ``(train, validation, test, model)``.

    With ``--train-data`` or external predictions, all of ``--data`` is both
    the test and the validation set. Otherwise ``--data`` is split.
    """
    schema = Schema.from_json(args.schema)
    pred = args.predictor
    if pred == "oracle":
        raise ConfigError("the oracle predictor is only available in simulate")
    data = _load(args.data, schema, outcome_optional=not need_test_outcomes)
    if pred.startswith("external:"):
        return None, data, data, ExternalModel.from_csv(pred.split(":", 1)[1])
    if pred != "builtin":
        raise ConfigError(f"unknown predictor {pred!r}")
    config = EnsembleConfig(args.n_trees, args.max_depth, args.min_leaf, sub_seed(args.seed, "predictor"))
    if args.train_data:
        train, val, test = _load(args.train_data, schema), data, data
    else:
        if data.Y is None:
            raise ValidationError("the builtin predictor needs outcomes; supply --train-data or outcomes in --data")
        spec = SplitSpec(args.train_fraction, validation_fraction, sub_seed(args.seed, "split"))
        train, val, test = split(data, spec)
        if not need_test_outcomes:
            test = test.without_outcomes()
    if train.Y is None:
        raise ValidationError("training data has no outcomes")
    return train, val, test, fit_builtin(train, config)


def _solve(args, test, model, trace_rows=None):
    preds = unit_predictions(model, test)
    if args.solver == "mip":
        return solve_all(test, model, _solver_params(args), workers=args.workers, preds=preds)
    params = _fast_params(args)
    if trace_rows is None:
        return fast_all(test, model, params, workers=args.workers, preds=preds)
    result = fast_all(test, model, params, workers=args.workers, preds=preds)
    for unit in result.units:
        steps = []
        fast_box(unit, test, model, params, preds=preds, trace=steps)
        for s in steps:
            row = {"owner_id": test.unit_ids[unit], "step": s["step"],
                   "covariate": test.columns[s["covariate"]], "variation": s["variation"]}
            for name, lo, hi in zip(test.columns, s["a"], s["b"]):
                row[f"{name}_lower"] = lo
                row[f"{name}_upper"] = hi
            trace_rows.append(row)
    return result


def _report_errors(result, test):
    for unit, msg in sorted(result.errors.items()):
        log.warning("unit %s: %s", test.unit_ids[unit], msg)
    if result.errors:
        print(f"{len(result.errors)} of {len(result.errors) + len(result)} units infeasible", file=sys.stderr)
    if result.errors and not result.solutions:
        raise InfeasibleError("every unit is infeasible")


def _box_frames(result, test):
    boxes, groups = [], []
    for unit, sol in result.solutions.items():
        uid = test.unit_ids[unit]
        boxes.extend(box_rows(sol.box, test.columns, uid))
        groups.append({
            "owner_id": uid,
            "objective": sol.objective,
            "optimal": sol.optimal,
            "n_members": sol.group.size,
            "n_treated": sol.group.n_t,
            "n_controls": sol.group.n_c,
            "members": " ".join(test.unit_ids[k] for k in sol.group.members),
        })
    return boxes, groups


GROUP_COLUMNS = ["owner_id", "objective", "optimal", "n_members", "n_treated", "n_controls", "members"]
ESTIMATE_COLUMNS = ["unit_id", "variant", "ite", "y0_hat", "y1_hat", "n_c", "n_t", "solver"]


# ---------------------------------------------------------------- commands


def cmd_match(args):
    need_outcomes = args.variant != "none"
    if args.trace and args.solver != "fast":
        raise ConfigError("--trace is only available with --solver fast")
    train, _, test, model = _prepare(args, need_test_outcomes=need_outcomes)
    if args.variant == "tau_b" and not np.any(test.T == 1):
        raise ValidationError("tau_b estimates need treated units; the test set has only controls")
    os.makedirs(args.out_dir, exist_ok=True)
    extra = {}
    if args.verify_oracle:
        if args.solver != "mip":
            raise ConfigError("--verify-oracle checks the mip solver")
        agree, bad = verify_with_oracle(test, model, _solver_params(args))
        extra["oracle_agreement"] = agree
        extra["oracle_disagreements"] = [test.unit_ids[u] for u in bad]
    trace_rows = [] if args.trace else None
    result = _solve(args, test, model, trace_rows)
    _report_errors(result, test)
    boxes, groups = _box_frames(result, test)
    _write_csv(boxes, os.path.join(args.out_dir, "boxes.csv"), ["owner_id", "covariate", "lower", "upper"])
    _write_csv(groups, os.path.join(args.out_dir, "groups.csv"), GROUP_COLUMNS)
    if trace_rows is not None:
        cols = ["owner_id", "step", "covariate", "variation"]
        cols += [f"{c}_{side}" for c in test.columns for side in ("lower", "upper")]
        _write_csv(trace_rows, os.path.join(args.out_dir, "trace.csv"), cols)
    n_est_errors = 0
    if need_outcomes:
        ests, est_errors = estimate_all(result.solutions, test, args.variant, args.solver)
        n_est_errors = len(est_errors)
        for unit, msg in sorted(est_errors.items()):
            log.warning("%s", msg)
        _write_csv([e.as_row() for e in ests], os.path.join(args.out_dir, "estimates.csv"), ESTIMATE_COLUMNS)
    extra.update({
        "n_test": test.n,
        "n_train": 0 if train is None else train.n,
        "test_ids_sha256": hashlib.sha256("\n".join(test.unit_ids).encode()).hexdigest(),
        "infeasible_units": [test.unit_ids[u] for u in sorted(result.errors)],
        "estimate_errors": n_est_errors,
    })
    _write_manifest(args, args.out_dir, extra)
    return EXIT_OK


def cmd_intervals(args):
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    for m in methods:
        if m not in INTERVAL_METHODS:
            raise ConfigError(f"unknown interval method {m!r}; choose from {INTERVAL_METHODS}")
    if args.coverage and not args.truth:
        raise ConfigError("--coverage needs --truth")
    _, _, test, model = _prepare(args)
    os.makedirs(args.out_dir, exist_ok=True)
    result = _solve(args, test, model)
    _report_errors(result, test)
    config = ResamplingConfig(args.n_resamples, args.subsample_fraction, sub_seed(args.seed, "resampling"))
    truth = _read_truth(args.truth, test) if args.truth else None
    rows, skipped = [], 0
    for unit, sol in result.solutions.items():
        if args.variant == "tau_b" and test.T[unit] != 1:
            continue
        for m in methods:
            try:
                iv = interval(unit, sol.group, test, model, m, args.level, config, args.true_variance, args.variant)
            except (ValidationError, MethodUnavailableError) as exc:
                if isinstance(exc, MethodUnavailableError):
                    raise
                skipped += 1
                log.warning("%s", exc)
                continue
            row = iv.as_row()
            row["ite"] = iv.point
            if truth is not None:
                row["true_ite"] = truth[iv.unit_id]
                row["covered"] = iv.covers(truth[iv.unit_id])
            rows.append(row)
    cols = ["unit_id", "method", "level", "lower", "upper", "ite"]
    if truth is not None:
        cols += ["true_ite", "covered"]
    _write_csv(rows, os.path.join(args.out_dir, "intervals.csv"), cols)
    if args.coverage:
        frame = pd.DataFrame(rows, columns=cols)
        report = []
        for m in methods:
            sub = frame[frame["method"] == m]
            report.append({
                "setting": os.path.basename(args.data),
                "method": m,
                "coverage": float(sub["covered"].mean()) if len(sub) else float("nan"),
                "mean_width": float((sub["upper"] - sub["lower"]).mean()) if len(sub) else float("nan"),
            })
        _write_csv(report, os.path.join(args.out_dir, "coverage.csv"), ["setting", "method", "coverage", "mean_width"])
    _write_manifest(args, args.out_dir, {"n_test": test.n, "skipped_intervals": skipped})
    return EXIT_OK


def _read_truth(path, test):
    frame = pd.read_csv(path, dtype={"id": str})
    for col in ("id", "ite"):
        if col not in frame.columns:
            raise ParseError(f"truth file {path} lacks column {col!r}")
    truth = dict(zip(frame["id"], frame["ite"].astype(float)))
    missing = [u for u in test.unit_ids if u not in truth]
    if missing:
        raise ValidationError(f"truth file lacks {len(missing)} test ids, e.g. {missing[0]!r}")
    return truth


def cmd_tune(args):
    with open(args.grid_file, encoding="utf-8") as fh:
        try:
            grid = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"cannot parse grid file: {exc}") from exc
    if not isinstance(grid, list) or not all(isinstance(g, dict) for g in grid):
        raise ConfigError("grid file must hold a JSON list of objects")
    _, val, _, model = _prepare(args, validation_fraction=args.validation_fraction)
    os.makedirs(args.out_dir, exist_ok=True)
    result = tune(grid, val, args.solver, model, workers=args.workers)
    _write_csv(result.rows(), os.path.join(args.out_dir, "tuning.csv"), ["lambda_json", "loss", "n_infeasible"])
    print(json.dumps({"best": result.best, "loss": result.best_loss}, sort_keys=True))
    _write_manifest(args, args.out_dir, {"best": result.best, "best_loss": result.best_loss, "n_validation": val.n})
    return EXIT_OK


def _read_scenarios(path, args):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse scenario file: {exc}") from exc
    items = raw if isinstance(raw, list) else [raw]
    out = []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError("scenario entries must be JSON objects")
        item = dict(item)
        name = item.pop("name", f"{item.get('g_kind', 'Linear')}/{item.get('h_kind', 'Const')}#{k}")
        if getattr(args, "n", None) is not None:
            item["n"] = args.n
        if getattr(args, "sigma", None) is not None:
            item["sigma"] = args.sigma
        item.setdefault("seed", sub_seed(args.seed, f"simulation:{k}"))
        out.append((name, DgpConfig.from_dict(item)))
    return out


def cmd_simulate(args):
    scenarios = _read_scenarios(args.scenario, args)
    harness = HarnessConfig(
        predictor=args.predictor,
        train_fraction=args.train_fraction,
        solver=_solver_params(args),
        fast=FastParams(c=args.c, grid_points_per_axis=args.grid, m=args.m, gamma0=args.gamma0,
                        gamma1=args.gamma1, beta=args.beta, normalize=args.normalize),
        variant=args.variant,
        ensemble=EnsembleConfig(args.n_trees, args.max_depth, args.min_leaf, sub_seed(args.seed, "predictor")),
    )
    os.makedirs(args.out_dir, exist_ok=True)
    if args.coverage:
        methods = [m.strip() for m in args.coverage.split(",") if m.strip()]
        for m in methods:
            if m not in INTERVAL_METHODS:
                raise ConfigError(f"unknown interval method {m!r}")
        resampling = ResamplingConfig(args.n_resamples, seed=sub_seed(args.seed, "resampling"))
        rows = []
        for name, cfg in scenarios:
            rows += coverage_study(cfg, methods, args.replicates, harness, args.level, resampling, name, args.workers)
        _write_csv(rows, os.path.join(args.out_dir, "coverage.csv"),
                   ["setting", "method", "coverage", "mean_width", "n_intervals"])
    else:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        for m in methods:
            parse_method(m)
        rows = []
        for name, cfg in scenarios:
            rows += run_scenario(cfg, methods, args.replicates, harness, name, args.workers)
        _write_csv(rows, os.path.join(args.out_dir, "results.csv"),
                   ["scenario", "method", "replicate", "mae_over_att", "mae", "normalized", "n_excluded", "k"])
        _write_csv(summarize(rows), os.path.join(args.out_dir, "table.csv"),
                   ["scenario", "method", "mae_over_att_mean", "mae_over_att_sd", "replicates"])
    _write_manifest(args, args.out_dir, {"scenarios": {name: cfg.to_dict() for name, cfg in scenarios}})
    return EXIT_OK


def cmd_generate(args):
    (name, cfg), *rest = _read_scenarios(args.scenario, args)
    if rest:
        raise ConfigError("generate takes a single scenario")
    data, truth = generate(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    frame = pd.DataFrame(data.X, columns=data.columns)
    frame.insert(0, "id", data.unit_ids)
    frame["treated"] = data.T
    frame["y"] = data.Y
    _write_csv(frame, os.path.join(args.out_dir, "data.csv"), list(frame.columns))
    _write_csv({"id": data.unit_ids, "ite": truth.h, "g": truth.g, "propensity": truth.e},
               os.path.join(args.out_dir, "truth.csv"), ["id", "ite", "g", "propensity"])
    schema = {"treatment": "treated", "outcome": "y", "id_column": "id", "covariates": list(data.columns)}
    with open(os.path.join(args.out_dir, "schema.json"), "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2)
        fh.write("\n")
    _write_manifest(args, args.out_dir, {"scenario": cfg.to_dict(), "name": name})
    return EXIT_OK


def cmd_replay(args):
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse manifest: {exc}") from exc
    recorded = manifest.get("args")
    if not isinstance(recorded, dict) or "command" not in recorded:
        raise ConfigError("manifest has no recorded arguments")
    for key, info in manifest.get("inputs", {}).items():
        if os.path.exists(info["path"]) and _sha256(info["path"]) != info["sha256"]:
            log.warning("input %s changed since the manifest was written", info["path"])
    ns = argparse.Namespace(**recorded)
    if args.out_dir:
        ns.out_dir = args.out_dir
    if args.workers is not None:
        ns.workers = args.workers
    return COMMANDS[ns.command](ns)


COMMANDS = {
    "match": cmd_match,
    "intervals": cmd_intervals,
    "tune": cmd_tune,
    "simulate": cmd_simulate,
    "generate": cmd_generate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = cmd_replay if args.command == "replay" else COMMANDS[args.command]
    try:
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return handler(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AHBError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
