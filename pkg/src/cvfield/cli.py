"""Command line interface.

Commands: train, eval, rollout, export-field, grid-eval.  Configuration
comes from a JSON file (--config) with --set key=value overrides; nested
keys use dots (e.g. --set admm.rho=2.0).  Command-specific parameters
(rollout start point, export bounds, ...) also travel through --set.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import metrics, modelfile
from .dataset import (DemoSet, PreprocessConfig, finite_difference_velocities,
                      load_demonstrations, resample_and_average,
                      subsample_constraint_points)
from .dynamics import IntegratorSettings, TrainedField, export_field_grid, rollout
from .errors import ConfigError
from .features import build_vanishing_projector, sample_feature_map
from .kernels import CURL_FREE, GAUSSIAN_SEPARABLE, KernelKind
from .solver import ADMMSettings, admm_solve, assemble_problem


@dataclass
class TrainConfig:
    kernel: str = CURL_FREE
    sigma: float = 5.0
    num_features: int = 200
    lam: float = 0.01            # serialized as "lambda"
    tau: float = 0.0
    constraint_points: int = 250
    seed: int = 0
    admm: ADMMSettings = field(default_factory=ADMMSettings)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)

    def validate(self):
        if self.kernel not in (GAUSSIAN_SEPARABLE, CURL_FREE):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.num_features < 1:
            raise ConfigError("num_features must be at least 1")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive (0 is rejected)")
        if self.tau < 0:
            raise ConfigError("tau must be nonnegative")
        if self.constraint_points < 1:
            raise ConfigError("constraint_points must be at least 1")
        if self.seed < 0 or int(self.seed) != self.seed:
            raise ConfigError("seed must be a nonnegative integer")
        try:
            self.preprocess.validate()
        except ValueError as exc:
            raise ConfigError(str(exc))
        if self.admm.rho <= 0 or self.admm.max_iters < 1:
            raise ConfigError("admm.rho must be positive and admm.max_iters >= 1")
        if self.admm.eps_abs < 0 or self.admm.eps_rel < 0 or self.admm.slack_weight < 0:
            raise ConfigError("admm tolerances and slack_weight must be nonnegative")
        return self

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, sub in (("admm", ADMMSettings), ("preprocess", PreprocessConfig)):
            if key in d and not isinstance(d[key], sub):
                subknown = {f.name for f in fields(sub)}
                bad = set(d[key]) - subknown
                if bad:
                    raise ConfigError(f"unknown {key} keys: {sorted(bad)}")
                d[key] = sub(**d[key])
        return cls(**d).validate()


def train_field(demos, config):
    """Full training pipeline on an in-memory DemoSet.

    Fills in missing velocities, averages the demonstrations, subsamples
    constraint points, draws the feature map and solves the constrained
    regression.  Returns (field, report, averaged_demo).
    """
    config.validate()
    filled = DemoSet(
        [d if d.velocities is not None else finite_difference_velocities(d, config.preprocess)
         for d in demos.demos],
        demos.goal)
    avg = resample_and_average(filled, config.preprocess)
    cpoints = subsample_constraint_points(avg, config.constraint_points)
    kind = KernelKind(config.kernel, config.sigma)
    fm = sample_feature_map(kind, config.num_features, demos.dim, config.seed)
    Z = np.zeros((1, demos.dim))          # goal sits at the origin after loading
    proj = build_vanishing_projector(fm, Z)
    problem = assemble_problem(fm, proj, (avg.positions, avg.velocities),
                               cpoints, config.lam, config.tau)
    report = admm_solve(problem, config.admm)
    fieldobj = TrainedField(fm, proj, report.theta, Z, config.tau)
    return fieldobj, report, avg


def _apply_overrides(tree, overrides):
    for key, value in overrides:
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into {key!r}")
        node[parts[-1]] = value
    return tree


def _parse_set_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        if "," in raw:
            try:
                return [float(tok) for tok in raw.split(",") if tok.strip()]
            except ValueError:
                pass
        return raw


def _load_config(args):
    tree = {}
    if args.config:
        with open(args.config) as fh:
            tree = json.load(fh)
    overrides = [(k, _parse_set_value(v)) for k, v in
                 (item.split("=", 1) for item in args.set or [])]
    _apply_overrides(tree, overrides)
    if args.seed is not None:
        tree["seed"] = args.seed
    return TrainConfig.from_dict(tree), tree


def _params_from_set(args):
    params = {}
    _apply_overrides(params, [(k, _parse_set_value(v)) for k, v in
                              (item.split("=", 1) for item in args.set or [])])
    return params


def cmd_train(config, data_path, model_path):
    demos = load_demonstrations(data_path)
    fieldobj, report, _ = train_field(demos, config)
    modelfile.save_model(model_path, fieldobj, config.to_dict(), report)
    print(f"trained on {len(demos.demos)} demonstrations "
          f"({config.kernel}, sigma={config.sigma}, s={config.num_features})")
    print(f"iters={report.iters} converged={report.converged} "
          f"primal={report.primal_residual:.3e} dual={report.dual_residual:.3e}")
    print(f"objective={report.objective:.6e} "
          f"max_constraint_violation={report.max_constraint_violation:.3e}")
    print(f"model written to {model_path}")
    if not report.converged:
        print("solver did not converge within max_iters; "
              "if the primal residual has stalled the hard constraints may be "
              "infeasible - consider admm.slack_weight > 0 or more iterations",
              file=sys.stderr)
        return 2
    return 0


def _integrator_settings(params):
    s = IntegratorSettings()
    for key in ("rel_tol", "abs_tol", "max_step", "goal_radius", "horizon"):
        if key in params:
            setattr(s, key, float(params[key]))
    return s


def cmd_eval(model_path, data_path, test_path, out=None, grid_k=16, seed=0):
    fieldobj, _, _ = modelfile.load_model(model_path)
    train = load_demonstrations(data_path)
    test = load_demonstrations(test_path) if test_path else train
    report = metrics.evaluate(fieldobj, train, test)
    grid = metrics.grid_evaluate(fieldobj, train, grid_k=grid_k, seed=seed)
    doc = {"eval": asdict(report), "grid_eval": asdict(grid)}
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_grid_eval(model_path, data_path, out=None, grid_k=16, seed=0):
    fieldobj, _, _ = modelfile.load_model(model_path)
    demos = load_demonstrations(data_path)
    grid = metrics.grid_evaluate(fieldobj, demos, grid_k=grid_k, seed=seed)
    text = json.dumps(asdict(grid), indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_rollout(model_path, params, out=None):
    if "x0" not in params:
        raise ConfigError("rollout needs a start point: --set x0=x1,x2,...")
    fieldobj, _, _ = modelfile.load_model(model_path)
    x0 = np.asarray(params["x0"], dtype=float).ravel()
    ro = rollout(fieldobj, x0, _integrator_settings(params))
    n = ro.states.shape[1]
    header = ["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, n + 1)]
    rows = np.hstack([ro.times[:, None], ro.states, ro.velocities])
    _write_csv(out, header, rows)
    print(f"reached_goal={ro.reached_goal} time_to_goal={ro.time_to_goal} "
          f"n_field_evals={ro.n_field_evals} samples={ro.times.size}")
    return 0


def cmd_export_field(model_path, params, out):
    if "bounds" not in params:
        raise ConfigError("export-field needs --set bounds=x1min,x1max,x2min,x2max")
    fieldobj, _, _ = modelfile.load_model(model_path)
    resolution = int(params.get("resolution", 50))
    cols, rows = export_field_grid(fieldobj, np.asarray(params["bounds"], dtype=float), resolution)
    _write_csv(out, cols, rows)
    print(f"wrote {rows.shape[0]} grid rows to {out}")
    return 0


def _write_csv(path, header, rows):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if path:
            fh.close()


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cvfield",
        description="learn and evaluate contracting vector fields from demonstrations")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON training configuration")
        p.add_argument("--data", help="training demonstrations (CSV file or directory)")
        p.add_argument("--test", help="held-out demonstrations")
        p.add_argument("--model", help="model file path")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, default=None, help="feature-map seed override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config or command parameter")
        return p

    add("train", "fit a field to demonstrations and write a model file")
    add("eval", "score reproduction and grid convergence for a model")
    add("rollout", "integrate a model from --set x0=... and write the trajectory")
    add("export-field", "tabulate the field on a grid (--set bounds=..,resolution=..)")
    add("grid-eval", "grid convergence statistics only")
    return parser


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ConfigError(f"--{name} is required for this command")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            _require(args, "data", "model")
            config, _ = _load_config(args)
            return cmd_train(config, args.data, args.model)
        if args.command == "eval":
            _require(args, "model", "data")
            params = _params_from_set(args)
            return cmd_eval(args.model, args.data, args.test, args.out,
                            grid_k=int(params.get("grid_k", 16)), seed=args.seed or 0)
        if args.command == "grid-eval":
            _require(args, "model", "data")
            params = _params_from_set(args)
            return cmd_grid_eval(args.model, args.data, args.out,
                                 grid_k=int(params.get("grid_k", 16)), seed=args.seed or 0)
        if args.command == "rollout":
            _require(args, "model")
            return cmd_rollout(args.model, _params_from_set(args), args.out)
        if args.command == "export-field":
            _require(args, "model", "out")
            return cmd_export_field(args.model, _params_from_set(args), args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
