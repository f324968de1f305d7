"""Command line interface.

Commands: synth, fit, eval, loocv, stability, diag.  Every command writes
a manifest next to its primary output recording the resolved flags, input
fingerprints, and output fingerprints, so a rerun with the same flags can
be checked byte for byte.  Exit codes: 0 success, 1 usage or input
problems, 2 model or numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .data import (
    Dataset,
    gen_sparse_informative,
    gen_waveform,
    load_dense_csv,
    load_sparse_svmlight,
)
from .diagnostics import BoundInput, KLInput, generalization_bound, kl_feature_divergence
from .errors import DegenerateModelError, NumericError, PfcvmError, UndefinedMetricError
from .experiments import STANDARDIZE_CHOICES, run_loocv, run_stability
from .metrics import EvalReport, auc, cohen_kappa, error_rate
from .model import FittedModel, TrainConfig, fit

logger = logging.getLogger("pfcvm")

__all__ = ["main", "build_parser", "RunManifest"]


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- manifest -------------------------------------------------------------


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record written beside every command output.

    ``outputs`` maps each written file to its content hash; files whose
    bytes legitimately vary between runs (timing traces) are recorded
    with a null hash so the manifest itself stays reproducible.
    """

    command: str
    config: dict
    seed: int | None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add_input(self, path):
        self.inputs[str(path)] = _sha256_file(path)

    def add_output(self, path, hashed=True):
        self.outputs[str(path)] = _sha256_file(path) if hashed else None

    def save(self, path):
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "extra": self.extra,
        }
        with open(path, "w") as fh:
            fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _manifest_path(out_path) -> str:
    return f"{out_path}.manifest.json"


def _write_json(path, payload):
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# -- shared flag plumbing --------------------------------------------------


def _add_loader_flags(p):
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--format", choices=("csv", "svmlight"), default="csv")
    p.add_argument("--label-column", default="-1",
                   help="CSV label column position or header name (default last)")
    p.add_argument("--header", action="store_true",
                   help="first CSV row is a header")


def _add_config_flags(p):
    p.add_argument("--kernel", default="rbf",
                   help="rbf, linear, or poly:P (e.g. poly:3)")
    p.add_argument("--hyper-rule", choices=("mackay", "em"), default="mackay")
    p.add_argument("--lambda", dest="lam", type=float, default=5.0,
                   help="sharpness of the smoothed nonnegativity barrier")
    p.add_argument("--prune-max", type=float, default=1e6,
                   help="precision threshold for dropping a weight")
    p.add_argument("--tol", type=float, default=1e-3,
                   help="evidence change stopping tolerance")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--drop-e", choices=("true", "false"), default="true",
                   help="drop the second-order feature curvature term")
    p.add_argument("--seed", type=int, default=None)


def _parse_kernel(text):
    name, _, deg = text.partition(":")
    name = name.strip().lower()
    if name in ("poly", "polynomial"):
        degree = 2
        if deg:
            try:
                degree = int(deg)
            except ValueError:
                raise PfcvmError(f"bad polynomial order {deg!r}") from None
        return "polynomial", degree
    if deg:
        raise PfcvmError(f"kernel {name!r} takes no order suffix")
    if name in ("rbf", "linear"):
        return name, 2
    raise PfcvmError(f"unknown kernel {text!r}; pick rbf, linear, or poly:P")


def _config_from_args(args) -> TrainConfig:
    kernel, degree = _parse_kernel(args.kernel)
    return TrainConfig(
        kernel=kernel,
        degree=degree,
        lam=args.lam,
        prune_threshold_max=args.prune_max,
        evidence_tol=args.tol,
        max_iterations=args.max_iters,
        hyper_rule=args.hyper_rule,
        drop_e=args.drop_e == "true",
        rng_seed=args.seed,
    )


def _config_dict(args, names):
    return {name: getattr(args, name) for name in names}


def _load_dataset(args) -> Dataset:
    if args.format == "svmlight":
        return load_sparse_svmlight(args.data)
    label = args.label_column
    try:
        label = int(label)
    except ValueError:
        pass
    return load_dense_csv(args.data, label_column=label, has_header=args.header)


def _write_dataset_csv(path, dataset):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row, label in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [str(int(label))])


# -- commands ---------------------------------------------------------------


def cmd_synth(args):
    if args.kind == "waveform":
        dataset = gen_waveform(args.n_per_class, noise_dims=args.noise_dims,
                               seed=args.seed)
        extra = {}
    else:
        dataset, informative = gen_sparse_informative(
            args.n, args.m, args.k_informative, args.effect_size, seed=args.seed)
        extra = {"informative_features": [int(k) + 1 for k in informative]}
    _write_dataset_csv(args.out, dataset)
    manifest = RunManifest(
        command="synth",
        config=_config_dict(args, ("kind", "n_per_class", "noise_dims", "n", "m",
                                   "k_informative", "effect_size")),
        seed=args.seed,
        extra=extra,
    )
    manifest.add_output(args.out)
    manifest.save(_manifest_path(args.out))
    logger.info("wrote %s (%d samples, %d features)", args.out, dataset.n, dataset.m)
    print(f"wrote {args.out}: {dataset.n} samples, {dataset.m} features")
    return 0


_CONFIG_FLAG_NAMES = ("kernel", "hyper_rule", "lam", "prune_max", "tol",
                      "max_iters", "drop_e")


def cmd_fit(args):
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    logger.info("fitting on %d samples, %d features", dataset.n, dataset.m)
    model = fit(dataset, config)
    model.save(args.out)
    trace_path = f"{os.path.splitext(args.out)[0]}.trace.csv"
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "active_samples", "active_features",
                         "log_evidence", "seconds"])
        for row in model.trace:
            writer.writerow([row["iteration"], row["active_samples"],
                             row["active_features"], repr(row["log_evidence"]),
                             repr(row["seconds"])])
    manifest = RunManifest(
        command="fit",
        config=_config_dict(args, _CONFIG_FLAG_NAMES),
        seed=args.seed,
    )
    manifest.add_input(args.data)
    manifest.add_output(args.out)
    manifest.add_output(trace_path, hashed=False)
    manifest.save(_manifest_path(args.out))
    print(f"converged={model.converged} iterations={model.n_iterations} "
          f"relevance_vectors={len(model.rv_indices)} "
          f"features={len(model.feature_indices)} "
          f"evidence={model.final_evidence:.6f}")
    return 0


def cmd_eval(args):
    model = FittedModel.load(args.model)
    dataset = _load_dataset(args)
    probas = model.predict_probas(dataset.X)
    predicted = np.where(probas >= 0.5, 1.0, -1.0)
    err = error_rate(predicted, dataset.y)
    try:
        ranking = float(auc(probas, dataset.y))
    except UndefinedMetricError:
        ranking = None
    try:
        kappa, kappa_se = cohen_kappa(predicted, dataset.y)
    except UndefinedMetricError:
        kappa = kappa_se = None
    payload = {
        "error_rate": err,
        "auc": ranking,
        "kappa": kappa,
        "kappa_stderr": kappa_se,
        "n_samples": int(dataset.n),
    }
    _write_json(args.out, payload)
    manifest = RunManifest(command="eval", config={}, seed=None)
    manifest.add_input(args.model)
    manifest.add_input(args.data)
    manifest.add_output(args.out)
    manifest.save(_manifest_path(args.out))
    print(f"ERR    {err:.4f}")
    print(f"AUC    {'n/a' if ranking is None else f'{ranking:.4f}'}")
    if kappa is None:
        print("kappa  n/a")
    else:
        print(f"kappa  {kappa:.4f} +/- {1.96 * kappa_se:.4f} (95%)")
    return 0


def cmd_loocv(args):
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    result = run_loocv(dataset, config, standardize=args.standardize)
    _write_json(args.out, result.to_dict())
    manifest = RunManifest(
        command="loocv",
        config={**_config_dict(args, _CONFIG_FLAG_NAMES),
                "standardize": args.standardize},
        seed=args.seed,
    )
    manifest.add_input(args.data)
    manifest.add_output(args.out)
    manifest.save(_manifest_path(args.out))
    auc_text = "n/a" if result.auc is None else f"{result.auc:.4f}"
    print(f"folds {result.n_folds} failed {result.n_failed} "
          f"ERR {result.error_rate:.4f} AUC {auc_text} "
          f"mean_features {result.mean_selected_features:.2f}")
    return 0


def cmd_stability(args):
    if args.gen == "waveform":
        dataset = gen_waveform(args.n_per_class, noise_dims=args.noise_dims,
                               seed=args.seed)
        data_input = None
    else:
        dataset = _load_dataset(args)
        data_input = args.data
    config = _config_from_args(args)
    result = run_stability(
        dataset,
        repeats=args.repeats,
        per_class_train=args.per_class_train,
        config=config,
        seed=args.seed if args.seed is not None else 0,
        standardize=args.standardize,
    )
    _write_json(args.out, result.to_dict())
    freq_path = f"{os.path.splitext(args.out)[0]}.frequencies.csv"
    with open(freq_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "frequency"])
        for k, f in enumerate(result.selection_frequencies, start=1):
            writer.writerow([k, repr(f)])
    manifest = RunManifest(
        command="stability",
        config={**_config_dict(args, _CONFIG_FLAG_NAMES),
                "standardize": args.standardize, "repeats": args.repeats,
                "per_class_train": args.per_class_train, "gen": args.gen,
                "n_per_class": args.n_per_class, "noise_dims": args.noise_dims},
        seed=args.seed,
    )
    if data_input is not None:
        manifest.add_input(data_input)
    manifest.add_output(args.out)
    manifest.add_output(freq_path)
    manifest.save(_manifest_path(args.out))
    jac = "n/a" if result.jaccard is None else f"{result.jaccard:.4f}"
    pea = "n/a" if result.pearson is None else f"{result.pearson:.4f}"
    print(f"repeats {result.repeats} failed {result.n_failed} "
          f"jaccard {jac} pearson {pea} "
          f"mean_acc {result.mean_accuracy:.4f} "
          f"mean_features {result.mean_selected_features:.2f}")
    return 0


def _parse_vector(text, name):
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip()])
    except ValueError:
        raise PfcvmError(f"bad {name} list {text!r}") from None


def cmd_diag(args):
    if args.model is not None:
        model = FittedModel.load(args.model)
        theta = model.theta
        beta = model.beta
        beta0 = np.full_like(beta, model.init_beta)
        n = model.n_train
    else:
        for flag, value in (("--theta", args.theta), ("--beta", args.beta),
                            ("--beta0", args.beta0)):
            if value is None:
                raise PfcvmError(f"{flag} is required without --model")
        theta = _parse_vector(args.theta, "theta")
        beta = _parse_vector(args.beta, "beta")
        beta0 = _parse_vector(args.beta0, "beta0")
        n = args.n
    kl = kl_feature_divergence(KLInput(theta, beta, beta0))
    payload = {"kl": kl, "bound": None, "grid": None}
    if n is not None:
        bound = generalization_bound(BoundInput(
            empirical_loss=args.empirical_loss, kl=kl, n=n, c=args.bound_c,
            r=args.bound_r, g=args.bound_g, delta=args.bound_delta))
        payload["bound"] = bound
    if args.grid is not None:
        lo, hi, count = args.grid
        grid = np.linspace(lo, hi, int(count))
        b = beta[:1] if beta.size else np.array([1.0])
        b0 = beta0[:1] if beta0.size else np.array([1.0])
        payload["grid"] = [
            [float(t), kl_feature_divergence(KLInput([t], b, b0))] for t in grid
        ]
    _write_json(args.out, payload)
    manifest = RunManifest(
        command="diag",
        config={"empirical_loss": args.empirical_loss, "bound_r": args.bound_r,
                "bound_g": args.bound_g, "bound_c": args.bound_c,
                "bound_delta": args.bound_delta, "n": n,
                "grid": list(args.grid) if args.grid else None},
        seed=None,
    )
    if args.model is not None:
        manifest.add_input(args.model)
    manifest.add_output(args.out)
    manifest.save(_manifest_path(args.out))
    print(f"kl {kl:.6f}")
    if payload["bound"] is not None:
        print(f"bound {payload['bound']:.6f}")
    return 0


# -- parser -----------------------------------------------------------------


def _grid_spec(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be lo:hi:count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be lo:hi:count") from None
    if count < 1 or hi < lo:
        raise argparse.ArgumentTypeError("grid must satisfy lo <= hi, count >= 1")
    return lo, hi, count


def build_parser():
    parser = _Parser(prog="pfcvm",
                     description="Sparse Bayesian joint sample/feature selection")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=("waveform", "sparse-informative"),
                   required=True)
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--noise-dims", type=int, default=19)
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--k-informative", type=int, default=5)
    p.add_argument("--effect-size", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="train a model and write it as JSON")
    _add_loader_flags(p)
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a saved model on a dataset")
    p.add_argument("--model", required=True)
    _add_loader_flags(p)
    p.add_argument("--out", required=True, help="report output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loocv", help="leave-one-out evaluation")
    _add_loader_flags(p)
    _add_config_flags(p)
    p.add_argument("--standardize", choices=STANDARDIZE_CHOICES, default="none")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_loocv)

    p = sub.add_parser("stability", help="repeated-resample stability study")
    _add_loader_flags_optional(p)
    _add_config_flags(p)
    p.add_argument("--gen", choices=("waveform",), default=None,
                   help="generate the data pool instead of loading --data")
    p.add_argument("--n-per-class", type=int, default=300)
    p.add_argument("--noise-dims", type=int, default=19)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--per-class-train", type=int, default=200)
    p.add_argument("--standardize", choices=STANDARDIZE_CHOICES, default="none")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("diag", help="KL divergence and generalization bound")
    p.add_argument("--model", default=None, help="read theta/beta from a model file")
    p.add_argument("--theta", default=None, help="comma-separated means")
    p.add_argument("--beta", default=None, help="comma-separated posterior precisions")
    p.add_argument("--beta0", default=None, help="comma-separated prior precisions")
    p.add_argument("--n", type=int, default=None, help="sample count for the bound")
    p.add_argument("--empirical-loss", type=float, default=0.0)
    p.add_argument("--bound-r", type=float, default=2.0)
    p.add_argument("--bound-g", type=float, default=1.0)
    p.add_argument("--bound-c", type=float, default=1.0)
    p.add_argument("--bound-delta", type=float, default=0.05)
    p.add_argument("--grid", type=_grid_spec, default=None,
                   help="theta grid lo:hi:count for a KL curve")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diag)

    return parser


def _add_loader_flags_optional(p):
    p.add_argument("--data", default=None, help="dataset file")
    p.add_argument("--format", choices=("csv", "svmlight"), default="csv")
    p.add_argument("--label-column", default="-1")
    p.add_argument("--header", action="store_true")


def main(argv=None) -> int:
    level = os.environ.get("PFCVM_LOG")
    if level:
        logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO))
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "stability" and args.gen is None and args.data is None:
        parser.error("stability needs --data or --gen")
    try:
        return args.func(args)
    except (NumericError, DegenerateModelError) as exc:
        print(f"pfcvm: {exc}", file=sys.stderr)
        return 2
    except (PfcvmError, OSError) as exc:
        print(f"pfcvm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
