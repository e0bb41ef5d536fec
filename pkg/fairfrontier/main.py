#!/usr/bin/env python3
"""
fairfrontier - Fairness-Accuracy Frontier

Main entry point and CLI handler.
"""

import sys
import os
import argparse
import logging
import signal
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

# Fix sys.path BEFORE any fairfrontier imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd
from rich.logging import RichHandler

from fairfrontier import __version__
from fairfrontier import ui
from fairfrontier.config import RunConfig
from fairfrontier.core import U1, U2, Dataset, RiskPoint
from fairfrontier.dataio import (file_digest, load_dataset_csv, load_external_predictions, load_score_column,
                                 write_csv)
from fairfrontier.errors import EmptyResultError, FrontierError, InputError
from fairfrontier.geometry import (RiskGrid, estimate_feasible_set, estimate_frontier, estimate_pareto,
                                   fairest_point, frontier_grid)
from fairfrontier.inference import (distance_to_F_ci, estimate_status_quo, frontier_confidence_set, test_lda,
                                    test_weak_skew)
from fairfrontier.montecarlo import run_mc, seed_variability
from fairfrontier.policy import (ConstantPolicy, ScorePolicy, build_policy, evaluate_policy, export_policy,
                                 lda_policy, make_split, resolve_direction)
from fairfrontier.report import RunReport, Timings, format_results, write_json
from fairfrontier.supportfn import cross_fit_estimate
from fairfrontier.svg import render_svg, write_svg


logger = logging.getLogger("fairfrontier")

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
TESTS = ["skew", "lda", "dist-f"]


def signal_handler(sig, frame):
    """Handle Ctrl+C gracefully."""
    print("\n")
    ui.console.print("[yellow]Interrupted. Partial outputs are left in place.[/]")
    sys.exit(0)


def setup_logging(output_dir: Path, verbose: bool = False):
    """Rich console handler plus run.log in the output directory."""
    output_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=[
            RichHandler(console=ui.console, show_path=False),
            logging.FileHandler(output_dir / "run.log"),
        ],
        force=True
    )


# ============================================
# SHARED PLUMBING
# ============================================

def build_config(args) -> RunConfig:
    """Config file (if any) with command-line overrides applied on top."""
    cfg = RunConfig.load(Path(args.config)) if args.config else RunConfig()
    overrides = {
        "data.input": getattr(args, "input", None),
        "output.directory": getattr(args, "output", None),
        "run.threads": getattr(args, "threads", None),
        "run.seed": getattr(args, "seed", None),
        "output.hyperplanes": getattr(args, "hyperplanes", None),
        "policy.capacity": getattr(args, "capacity", None),
        "test.rho": getattr(args, "rho", None),
        "test.alpha": getattr(args, "alpha", None),
        "data.score_column": getattr(args, "score_column", None),
    }
    for key, value in overrides.items():
        if value is not None:
            cfg.set(key, value)
    cfg.validate()
    return cfg


def load_input(cfg: RunConfig) -> Tuple[Dataset, Dict[str, Any]]:
    path = cfg.get("data.input")
    if not path:
        raise InputError("No input file: pass --input or set data.input")
    labels = cfg.get("data.group_labels")
    dataset = load_dataset_csv(Path(path), cfg.get("data.y_column"), cfg.get("data.group_column"),
                               tuple(labels) if labels else None, cfg.get("data.covariates"))
    inputs = {"path": str(path), "sha256": file_digest(Path(path)), "n": dataset.n, "d_x": dataset.d_x,
              "group_labels": list(dataset.labels), "covariates": list(dataset.columns)}
    return dataset, inputs


def make_learner(cfg: RunConfig, dataset: Dataset, seed: Optional[int] = None):
    external = None
    if cfg.get("learner.method") == "external":
        external = load_external_predictions(Path(cfg.get("learner.external")), dataset.n)
    return cfg.learner(external, seed)


def fit_support(cfg: RunConfig, dataset: Dataset, grid=None, seed: Optional[int] = None):
    seed = cfg.seed if seed is None else seed
    return cross_fit_estimate(dataset, cfg.loss_spec(), make_learner(cfg, dataset, seed), cfg.folds, seed,
                              grid or cfg.direction_grid(), cfg.threads)


def parse_policy_spec(spec: str):
    """never, always or constant:<p>."""
    if spec == "never":
        return ConstantPolicy(0.0)
    if spec == "always":
        return ConstantPolicy(1.0)
    if spec.startswith("constant:"):
        try:
            return ConstantPolicy(float(spec.split(":", 1)[1]))
        except ValueError:
            raise InputError(f"Invalid policy spec: {spec}") from None
    raise InputError(f"Invalid policy spec: {spec}. Must be one of ['never', 'always', 'constant:<p>']")


def load_status_quo(args, cfg: RunConfig, dataset: Dataset):
    """The status-quo rule a*, from --policy-scores, --policy or data.score_column."""
    column = cfg.get("data.score_column") or "score"
    if getattr(args, "policy_scores", None):
        scores = load_score_column(Path(args.policy_scores), column, dataset.n)
        return ScorePolicy(scores, args.policy_scores), {"kind": "scores", "file": args.policy_scores,
                                                         "column": column}
    if getattr(args, "policy", None):
        return parse_policy_spec(args.policy), {"kind": "spec", "spec": args.policy}
    if cfg.get("data.score_column"):
        scores = load_score_column(Path(cfg.get("data.input")), column, dataset.n)
        return ScorePolicy(scores, "input"), {"kind": "input-column", "column": column}
    return None, None


def new_report(command: str, cfg: RunConfig, inputs: Dict[str, Any], n: Optional[int] = None) -> RunReport:
    return RunReport(version=__version__, command=command, inputs=inputs, config=cfg.to_dict(),
                     derived=cfg.derived(n) if n else {})


def finish(report: RunReport, timings: Timings, out: Path) -> Path:
    report.timings = timings.as_dict()
    path = report.write(out / "report.json")
    ui.show_success(f"Outputs written to {out}")
    return path


# ============================================
# COMMANDS
# ============================================

def cmd_estimate(args) -> int:
    """Feasible set, frontier, Pareto set, frontier band and the SVG plot."""
    cfg = build_config(args)
    out = cfg.output_dir
    timings = Timings(cfg.record_timings)
    dataset, inputs = load_input(cfg)
    n = dataset.n
    kappa = cfg.kappa(n)

    with timings.phase("crossfit"):
        sfe = fit_support(cfg, dataset)
    with timings.phase("geometry"):
        feasible = estimate_feasible_set(sfe, cfg.direction_grid())
        if feasible.empty:
            raise EmptyResultError("Estimated feasible set is empty")
        F_hat = estimate_frontier(sfe, kappa, frontier_grid(feasible, kappa, n, cfg.get("grid.resolution")),
                                  cfg.direction_grid(), cfg.half_grid(), cfg.threads)
        pareto = estimate_pareto(sfe, cfg.pareto_grid())
        fairest, side = fairest_point(sfe, cfg.get("frontier.c_bound"), float(cfg.get("frontier.etilde_tol")))

    report = new_report("estimate", cfg, inputs, n)
    for name, frame in (("h_grid.csv", sfe.grid_table()), ("feasible_set.csv", feasible.to_frame()),
                        ("frontier.csv", F_hat.to_frame()), ("pareto.csv", pareto.to_frame())):
        report.add_artifact(write_csv(frame, out / name))

    band = np.empty((0, 2))
    band_spacing = (0.0, 0.0)
    if not F_hat.empty:
        with timings.phase("band"):
            pad = 2.0 * kappa / np.sqrt(n)
            candidates = RiskGrid.around(F_hat.points.min(axis=0) - pad, F_hat.points.max(axis=0) + pad,
                                         cfg.get("frontier.band_candidates"), radius=sfe.risk_bound())
            cs = frontier_confidence_set(sfe, candidates, cfg.alpha, cfg.bootstrap(), cfg.inference_grids(n))
            band, band_spacing = cs.points, candidates.spacing
        report.add_result("band", cs.metadata)
    band_frame = pd.DataFrame({"e_r": band[:, 0], "e_b": band[:, 1]})
    report.add_artifact(write_csv(band_frame, out / "frontier_band.csv"))

    count = cfg.get("output.hyperplanes")
    hyperplanes = []
    if count:
        angles = 2.0 * np.pi * np.arange(count) / count
        Q = np.column_stack([np.cos(angles), np.sin(angles)])
        hyperplanes = list(zip(Q, sfe.h_many(Q)))
    markers = {"R": RiskPoint.of(sfe.support_points(U1)[0]), "B": RiskPoint.of(sfe.support_points(U2)[0]),
               "F": fairest}
    document = render_svg(feasible.vertices, hyperplanes, F_hat.points, band, band_spacing, markers,
                          title=f"Estimated feasible set and frontier (n={n})", version=__version__)
    report.add_artifact(write_svg(document, out / "frontier.svg"))

    report.add_result("points", {k: v.as_array() for k, v in markers.items()})
    report.add_result("fairest_side", side)
    report.add_result("feasible_set", {"vertices": int(feasible.vertices.shape[0]), "bound": feasible.bound})
    report.add_result("frontier", {"points": int(F_hat.points.shape[0]), "threshold": F_hat.threshold,
                                   "grid_spacing": F_hat.grid_spacing, **F_hat.metadata})
    ui.show_points(markers)
    finish(report, timings, out)

    if F_hat.empty:
        raise EmptyResultError("Empty frontier estimate; other artifacts were written")
    return 0


def run_test(name: str, sfe, sq, cfg: RunConfig, n: int, seed: int):
    bcfg = replace(cfg.bootstrap(), seed=seed)
    grids = cfg.inference_grids(n)
    if name == "skew":
        return test_weak_skew(sfe, cfg.alpha, bcfg, grids)
    if name == "lda":
        return test_lda(sfe, sq, cfg.alpha, bcfg, grids)
    return distance_to_F_ci(sfe, sq, cfg.rho, cfg.alpha, bcfg, grids)


def cmd_test(args) -> int:
    """Weak-skew, LDA or distance-to-F inference on a data file."""
    cfg = build_config(args)
    out = cfg.output_dir
    timings = Timings(cfg.record_timings)
    dataset, inputs = load_input(cfg)
    n = dataset.n

    sq = None
    a_star, policy_info = load_status_quo(args, cfg, dataset)
    if args.test in ("lda", "dist-f"):
        if a_star is None:
            raise InputError(f"{args.test} test needs a status-quo policy: --policy-scores FILE or --policy SPEC")
        sq = estimate_status_quo(dataset, cfg.loss_spec(), a_star)
        inputs["status_quo"] = policy_info

    with timings.phase("crossfit"):
        sfe = fit_support(cfg, dataset, cfg.inference_grids(n).full)
    with timings.phase("test"):
        result = run_test(args.test, sfe, sq, cfg, n, cfg.seed)

    record = result.to_dict()
    record.setdefault("test", args.test)
    record.setdefault("n", n)
    if sq is not None:
        record["e_star"] = sq.e_hat
    report = new_report(f"test {args.test}", cfg, inputs, n)
    report.add_result(args.test, record)

    repeats = cfg.get("mc.seed_repeats")
    if repeats:
        if args.test == "dist-f":
            ui.show_warning("Seed-variability loop covers skew and lda only; skipped")
        else:
            seeds = [cfg.seed + i for i in range(repeats)]
            frame, spread = seed_variability(
                lambda s: run_test(args.test, fit_support(cfg, dataset, cfg.inference_grids(n).full, s),
                                   sq, cfg, n, s),
                seeds)
            report.add_artifact(write_csv(frame, out / "seed_variability.csv"))
            report.add_result("seed_variability", spread)

    summary = out / "tests_summary.txt"
    summary.parent.mkdir(parents=True, exist_ok=True)
    summary.write_text(format_results([report.results[args.test]]))
    report.add_artifact(summary)
    ui.show_test_results([report.results[args.test]])
    finish(report, timings, out)
    return 0


def cmd_policy(args) -> int:
    """Build, evaluate and export a frontier-attaining policy."""
    cfg = build_config(args)
    out = cfg.output_dir
    timings = Timings(cfg.record_timings)
    dataset, inputs = load_input(cfg)
    rule = args.rule or cfg.get("policy.rule")
    loss = cfg.loss_spec()
    learner = make_learner(cfg, dataset)
    split = make_split(dataset.n, cfg.get("policy.split_ratio"), cfg.seed)
    train, held = split.apply(dataset)
    capacity = cfg.get("policy.capacity")
    summary: Dict[str, Any] = {"rule": rule, "capacity": capacity, "n_train": train.n, "n_eval": held.n}

    with timings.phase("policy"):
        if rule == "lda":
            a_star, policy_info = load_status_quo(args, cfg, dataset)
            if a_star is None:
                raise InputError("lda policy needs a status-quo policy: --policy-scores FILE or --policy SPEC")
            inputs["status_quo"] = policy_info
            if isinstance(a_star, ScorePolicy):
                a_star = ScorePolicy(a_star.scores[split.train], a_star.source)
            e_star = estimate_status_quo(train, loss, a_star).point
            result = lda_policy(train, held, loss, learner, e_star, cfg.kappa(train.n), cfg.folds, cfg.seed,
                                cfg.direction_grid(), cfg.half_grid(), cfg.get("grid.resolution"), cfg.threads)
            policy, risk = result.policy, result.risk
            summary.update({"target": result.target.as_array().tolist(), "e_star": e_star.as_array().tolist(),
                            "region_size": result.region_size, "preferred": result.preferred})
        else:
            sfe = fit_support(cfg, dataset) if rule == "egalitarian" else None
            q = resolve_direction(rule, sfe, cfg.get("frontier.c_bound"))
            policy = build_policy(train, loss, learner, q, capacity, cfg.seed)
            risk = evaluate_policy(policy, held, loss)

    summary.update({"q": [policy.q.q1, policy.q.q2], "cutoff": policy.cutoff,
                    "treated_train": float(policy.decide(train.x).mean()),
                    "treated_eval": float(policy.decide(held.x).mean()),
                    "e_r": risk.e_r, "e_b": risk.e_b})

    report = new_report(f"policy {rule}", cfg, inputs, dataset.n)
    decisions, meta = export_policy(policy, dataset, out / "policy_decisions.csv")
    report.add_artifact(decisions)
    report.add_artifact(meta)
    split_frame = {"row_id": np.arange(dataset.n), "split": np.where(np.isin(np.arange(dataset.n), split.train),
                                                                      "train", "eval")}
    report.add_artifact(write_csv(pd.DataFrame(split_frame), out / "policy_split.csv"))
    report.add_result("policy", summary)
    ui.show_policy_summary(summary)
    finish(report, timings, out)
    return 0


def cmd_mc(args) -> int:
    """Monte Carlo rejection-rate table."""
    cfg = build_config(args)
    if getattr(args, "replications", None):
        cfg.set("mc.replications", args.replications)
    if getattr(args, "workers", None):
        cfg.set("mc.workers", args.workers)
    out = cfg.output_dir
    timings = Timings(cfg.record_timings)
    mc = cfg.mc_config()

    with timings.phase("mc"):
        result = run_mc(mc)

    path = write_csv(result.table, out / "mc_table.csv")
    bootstrap = cfg.bootstrap()
    derived = {str(n): {"kappa_n": cfg.kappa(n), "B": bootstrap.draws, "s_n": bootstrap.step_for(n),
                        "varsigma": bootstrap.varsigma} for n in mc.sizes}
    sidecar = {"version": __version__, "config": cfg.to_dict(), "mc": mc.to_dict(), "derived": derived,
               "failures": result.failures, "truths": result.truths}
    if cfg.record_timings:
        sidecar["timings"] = {"elapsed": result.elapsed}
    write_json(sidecar, out / "mc_table.json")
    ui.show_mc_table(result.table, result.failures)
    ui.show_success(f"Monte Carlo table written to {path}")
    return 0


# ============================================
# ARGUMENTS
# ============================================

def common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', help='YAML run configuration')
    common.add_argument('--output', '-o', help='Output directory')
    common.add_argument('--threads', type=int, help='Worker threads (default: FAIRFRONTIER_THREADS or 1)')
    common.add_argument('--seed', type=int, help='Master seed')
    common.add_argument('--alpha', type=float, help='Test level')
    common.add_argument('--verbose', action='store_true', help='Debug logging')
    return common


def data_options() -> argparse.ArgumentParser:
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument('--input', '-i', help='Dataset CSV (y, group, covariates)')
    data.add_argument('--policy-scores', dest='policy_scores', help='CSV holding status-quo scores a*(X)')
    data.add_argument('--score-column', dest='score_column', help='Score column name (default: score)')
    data.add_argument('--policy', help='Status-quo rule: never, always or constant:<p>')
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="fairfrontier - Fairness-Accuracy Frontier",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Commands:
  estimate   Feasible set, frontier, Pareto set, band and SVG
  test       Weak-skew, LDA or distance-to-F inference
  policy     Build and evaluate a frontier-attaining policy
  mc         Monte Carlo rejection-rate table

Examples:
  fairfrontier estimate -i data/toy.csv --hyperplanes 100
  fairfrontier test skew -i data/toy.csv
  fairfrontier test lda -i data/toy.csv --policy never
  fairfrontier policy rawlsian -i data/toy.csv --capacity 0.03
  fairfrontier mc -c mc.yaml --replications 2
        """
    )
    parser.add_argument(
        '--version', '-v',
        action='version',
        version=f'fairfrontier {__version__}'
    )
    common, data = common_options(), data_options()
    sub = parser.add_subparsers(dest='command', required=True)

    estimate = sub.add_parser('estimate', parents=[common, data], help='Estimate the feasible set and frontier')
    estimate.add_argument('--hyperplanes', type=int, help='Supporting hyperplanes drawn in the SVG')

    test = sub.add_parser('test', parents=[common, data], help='Run one test')
    test.add_argument('test', choices=TESTS)
    test.add_argument('--rho', help='Distance functional for dist-f')

    policy = sub.add_parser('policy', parents=[common, data], help='Build a policy')
    policy.add_argument('rule', nargs='?',
                        help='rawlsian, majority, utilitarian, egalitarian, lda or angle:<radians>')
    policy.add_argument('--capacity', type=float, help='Largest treated share in training')

    mc = sub.add_parser('mc', parents=[common], help='Monte Carlo table')
    mc.add_argument('--replications', type=int, help='Replications per (n, DGP)')
    mc.add_argument('--workers', type=int, help='Worker processes')
    return parser


COMMANDS = {"estimate": cmd_estimate, "test": cmd_test, "policy": cmd_policy, "mc": cmd_mc}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse, configure logging and dispatch; returns the exit code."""
    args = build_parser().parse_args(argv)
    try:
        output = Path(args.output) if args.output else build_config(args).output_dir
        setup_logging(output, args.verbose)
        ui.show_banner(args.command)
        return COMMANDS[args.command](args)
    except FrontierError as e:
        ui.show_error(str(e))
        logger.debug("Failure detail", exc_info=True)
        return e.exit_code


def main():
    """CLI entry point."""
    signal.signal(signal.SIGINT, signal_handler)
    sys.exit(run())


if __name__ == "__main__":
    main()
