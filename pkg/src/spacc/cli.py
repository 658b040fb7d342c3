"""Command-line front end: ``spacc {fit,cv,simulate,evaluate}``.

Exit codes: 0 ok, 2 invalid input or arguments, 3 solver did not
converge, 4 file I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import SIGMA_DEFAULTS, ValidationError, compute_weights
from .cv import (PipelineConfig, PipelineError, estimate_noise, noise_threshold,
                 pipeline)
from .io import (aligned_labels, read_config, read_labels, read_matrix, write_csv,
                 write_matrix, write_probe_matrix, write_regions, write_response,
                 write_summary, write_truth)
from .metrics import evaluate
from .missing import MmConfig, mm_solve
from .simulate import PRESETS, RewasSimParams, SimulationError, preset, simulate
from .solver import SolverConfig, SolverError, extract_regions

logger = logging.getLogger("spacc")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


class NotConverged(RuntimeError):
    pass


def _float_list(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none", "auto") else float(text)


# name -> (type, default); flags, config file and defaults are layered in
# that order of precedence
OPTIONS = {
    "kind": (str, "custom"),
    "sigma": (_opt_float, None),
    "zero_cut": (float, 0.01),
    "gamma": (_opt_float, None),
    "gamma_grid": (_float_list, None),
    "n_gammas": (int, 50),
    "gamma_ratio": (float, 1e-4),
    "folds": (int, 5),
    "seed": (int, 0),
    "nu": (float, 0.25),
    "tol": (float, 1e-6),
    "max_iter": (int, 20000),
    "outer_tol": (float, 1e-7),
    "max_outer": (int, 500),
    "cv_tol": (_opt_float, 1e-3),
    "threshold": (_opt_float, None),
    "fusion_rule": (str, "max"),
    "log_base": (_opt_float, None),
    "impute": (_bool, False),
    "preset": (str, "cnv-easy"),
    "n": (int, None),
    "p": (int, None),
    "n_segments": (int, None),
    "workers": (int, 1),
}

# settings that cannot change any output and so stay out of the summary
_NOT_ECHOED = {"workers"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spacc", description="Spatial convex clustering of genomic probes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", required=True, help="directory for result files")
        p.add_argument("--config", help="key = value file; flags take precedence")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (never changes results)")
        p.add_argument("-v", "--verbose", action="store_true")

    def model(p):
        p.add_argument("--input", required=True, help="probe-matrix TSV")
        p.add_argument("--kind", choices=["cnv", "methylation", "custom"], default=None,
                       help="selects the default weight decay rate")
        p.add_argument("--sigma", type=float, default=None,
                       help="weight decay rate per basepair (required for custom)")
        p.add_argument("--zero-cut", type=float, default=None)
        p.add_argument("--nu", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--outer-tol", type=float, default=None)
        p.add_argument("--threshold", type=float, default=None,
                       help="fusion threshold (default: noise-scaled rule)")
        p.add_argument("--fusion-rule", choices=["max", "norm"], default=None)
        p.add_argument("--impute", action="store_const", const=True, default=None,
                       help="also write the data with missing entries imputed")

    p_fit = sub.add_parser("fit", help="fit at a fixed gamma")
    common(p_fit)
    model(p_fit)
    p_fit.add_argument("--gamma", type=float, default=None)

    p_cv = sub.add_parser("cv", help="choose gamma by cross-validation, then fit")
    common(p_cv)
    model(p_cv)
    p_cv.add_argument("--gamma-grid", type=_float_list, default=None,
                      help="comma-separated increasing gamma values")
    p_cv.add_argument("--n-gammas", type=int, default=None)
    p_cv.add_argument("--folds", type=int, default=None)
    p_cv.add_argument("--cv-tol", type=float, default=None,
                      help="solver tolerance inside CV cells")

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset with truth")
    common(p_sim)
    p_sim.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p_sim.add_argument("--n", type=int, default=None, help="subjects")
    p_sim.add_argument("--p", type=int, default=None, help="probes")
    p_sim.add_argument("--n-segments", type=int, default=None)

    p_ev = sub.add_parser("evaluate", help="compare an estimated region file to truth")
    common(p_ev)
    p_ev.add_argument("--truth", required=True)
    p_ev.add_argument("--estimate", required=True)
    return parser


def resolve(args) -> dict:
    """Effective settings: defaults < config file < flags."""
    cfg = {k: d for k, (_, d) in OPTIONS.items()}
    if args.config:
        for k, v in read_config(args.config).items():
            if k not in OPTIONS:
                raise ValidationError(f"unknown config key {k!r}")
            try:
                cfg[k] = OPTIONS[k][0](v)
            except ValueError as exc:
                raise ValidationError(f"config key {k}: {exc}") from None
    for k in OPTIONS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _decay(cfg) -> float:
    if cfg["sigma"] is not None:
        return cfg["sigma"]
    if cfg["kind"] in SIGMA_DEFAULTS:
        return SIGMA_DEFAULTS[cfg["kind"]]
    raise ValidationError("--kind custom needs --sigma")


def _mm(cfg) -> MmConfig:
    inner = SolverConfig(nu=cfg["nu"], tol=cfg["tol"], max_iter=cfg["max_iter"])
    return MmConfig(outer_tol=cfg["outer_tol"], max_outer=cfg["max_outer"], inner=inner)


def _echo(cfg, keys):
    out = []
    for k in keys:
        if k in _NOT_ECHOED:
            continue
        v = cfg[k]
        if isinstance(v, list):
            v = ",".join(repr(float(x)) for x in v)
        out.append((f"config.{k}", "auto" if v is None else v))
    return out


_MODEL_KEYS = ["kind", "sigma", "zero_cut", "nu", "tol", "max_iter", "outer_tol",
               "max_outer", "threshold", "fusion_rule", "impute"]


def _write_fit_outputs(out, X, state, regions, cfg):
    ids = X.get_probe_ids()
    write_regions(out / "regions.tsv", ids, X.positions, regions)
    write_matrix(out / "centroids.tsv", state.U, ids, X.positions, X.get_subject_ids())
    if cfg["impute"]:
        filled = np.where(X.mask, X.values, state.U)
        write_matrix(out / "imputed.tsv", filled, ids, X.positions, X.get_subject_ids())


def _log_base(cfg):
    return math.e if cfg["log_base"] is None else cfg["log_base"]


def run_fit(args, cfg, out) -> int:
    if cfg["gamma"] is None:
        raise ValidationError("fit needs --gamma (use 'cv' to choose it)")
    X = read_matrix(args.input).check()
    weights = compute_weights(X.positions, _decay(cfg), cfg["zero_cut"])
    state = mm_solve(X, weights, cfg["gamma"], _mm(cfg), cfg["workers"])
    sigma_hat = estimate_noise(X)
    threshold = cfg["threshold"]
    if threshold is None:
        threshold = noise_threshold(sigma_hat, *X.shape, _log_base(cfg))
    regions = extract_regions(state.V, threshold, cfg["fusion_rule"])
    _write_fit_outputs(out, X, state, regions, cfg)
    write_summary(out / "summary.txt", [
        ("command", "fit"), ("input", Path(args.input).name),
        ("n_subjects", X.shape[0]), ("n_probes", X.shape[1]),
        ("n_missing", X.n_missing), ("gamma", float(cfg["gamma"])),
        ("sigma_hat", sigma_hat), ("threshold", float(threshold)),
        ("n_regions", regions.n_regions), ("n_regions_exact", extract_regions(state.V).n_regions),
        ("iterations", state.iterations), ("final_residual", float(state.final_residual)),
        ("converged", state.converged),
        *_echo(cfg, ["gamma", *_MODEL_KEYS]),
    ])
    if not state.converged:
        raise NotConverged(f"solver stopped after {state.iterations} iterations "
                           f"(residual {state.final_residual:.3g}); outputs written")
    return EXIT_OK


def run_cv(args, cfg, out) -> int:
    X = read_matrix(args.input)
    grid = cfg["gamma_grid"]
    if grid is None and cfg["gamma"] is not None:
        grid = [cfg["gamma"]]
    pc = PipelineConfig(
        kind=cfg["kind"], sigma=_decay(cfg), zero_cut=cfg["zero_cut"],
        gamma_grid=grid, n_gammas=cfg["n_gammas"], gamma_ratio=cfg["gamma_ratio"],
        n_folds=cfg["folds"], seed=cfg["seed"], mm=_mm(cfg), cv_tol=cfg["cv_tol"],
        threshold=cfg["threshold"], log_base=_log_base(cfg),
        fusion_rule=cfg["fusion_rule"], worker_count=cfg["workers"])
    res = pipeline(X, pc)
    t = res.table
    _write_fit_outputs(out, X, res.state, res.regions, cfg)
    write_csv(out / "cv.csv", ["gamma", "fold", "mse"], t.rows())
    mean_regions = t.n_regions.mean(axis=0)
    write_csv(out / "sparsity.csv", ["gamma", "mean_regions", "mean_mse", "se_mse"],
              zip(t.gamma_grid, mean_regions, t.mean_mse(), t.se_mse()))
    write_summary(out / "summary.txt", [
        ("command", "cv"), ("input", Path(args.input).name),
        ("n_subjects", X.shape[0]), ("n_probes", X.shape[1]),
        ("n_missing", X.n_missing), ("n_gammas", len(t.gamma_grid)),
        ("gamma_star", t.gamma_star), ("sigma_hat", t.sigma_hat),
        ("threshold", t.threshold), ("n_regions", res.regions.n_regions),
        ("n_regions_exact", extract_regions(res.state.V).n_regions),
        ("iterations", res.state.iterations), ("converged", res.state.converged),
        *_echo(cfg, ["gamma_grid", "n_gammas", "gamma_ratio", "folds", "seed",
                     "cv_tol", *_MODEL_KEYS]),
    ])
    if not res.state.converged:
        raise NotConverged("final fit did not converge; outputs written")
    return EXIT_OK


def run_simulate(args, cfg, out) -> int:
    name = cfg["preset"]
    overrides = {"seed": cfg["seed"]}
    for k in ("n", "p", "n_segments"):
        if cfg[k] is not None:
            overrides[k] = cfg[k]
    params = preset(name, **overrides)
    result = simulate(params)
    X, truth = result[0], result[-1]
    regions = truth.regions if isinstance(params, RewasSimParams) else truth
    write_probe_matrix(out / "data.tsv", X)
    write_truth(out / "truth.tsv", X.get_probe_ids(), regions)
    items = [("command", "simulate"), ("preset", name), ("seed", cfg["seed"]),
             ("n_subjects", X.shape[0]), ("n_probes", X.shape[1]),
             ("n_regions", regions.n_regions)]
    if isinstance(params, RewasSimParams):
        write_response(out / "response.tsv", X.get_subject_ids(), result[1])
        items += [("causal_regions", ",".join(str(int(g)) for g in truth.causal_regions)),
                  ("betas", ",".join(repr(float(b)) for b in truth.betas))]
    write_summary(out / "summary.txt", items)
    return EXIT_OK


def run_evaluate(args, cfg, out) -> int:
    truth, est = aligned_labels(read_labels(args.truth), read_labels(args.estimate))
    if len(truth) < 2:
        raise ValidationError("need at least 2 probes to compare partitions")
    scores = evaluate(truth, est)
    write_csv(out / "evaluation.csv", ["metric", "value"], scores.items())
    for k, v in scores.items():
        print(f"{k}\t{v:.6f}")
    return EXIT_OK


COMMANDS = {"fit": run_fit, "cv": run_cv, "simulate": run_simulate, "evaluate": run_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        if cfg["workers"] < 1:
            raise ValidationError("--workers must be at least 1")
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except NotConverged as exc:
        print(f"spacc: not converged: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"spacc: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"spacc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, PipelineError, SimulationError, ValueError) as exc:
        print(f"spacc: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
