"""Command line front end: ``run``, ``audit`` and ``report``.

Every output file is tagged with the number of Byzantine agents, e.g.
``summary_f8.csv``, ``manifest_f8.json`` and ``ratefit_f8.json``. Exit codes:
0 ok, 1 validation or audit failure, 2 divergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .audit import LEMMAS, SLACK_TOL, lemma_audit, AuditReport
from .config import PRESETS, SCHEMA, build_config, load_values, resolve
from .errors import ConfigurationError, DivergenceError
from .simulator import (ExperimentDivergenceError, ExperimentResult, SimulationConfig,
                        run_experiment)

log = logging.getLogger("resilient_sgd")

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGENCE, EXIT_IO = 0, 1, 2, 3

COLUMNS = ("k", "alpha", "beta", "opt_error_mean", "opt_error_std", "W_mean", "W_std",
           "V_mean", "V_std", "bound", "contraction", "byz_survivors_mean")
AUDIT_COLUMNS = ("replication", "round", "agent", "step", "lhs", "rhs", "slack")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors count as validation failures
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats, plain digits for ints."""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return repr(float(value))


def _f_list(text: str) -> list[int]:
    try:
        out = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of ints: {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty f list")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="key=value config file or a run manifest")
    src.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--mode", choices=("sc", "pl"), help="objective (and its regime)")
    common.add_argument("--f", type=_f_list, help="number of Byzantine agents, e.g. 4,8,10")
    common.add_argument("--rounds", type=int, help="number of global rounds K")
    common.add_argument("--replications", type=int)
    common.add_argument("--strict", action="store_true",
                        help="refuse to run unless the theorem and filter conditions hold")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="resilient-sgd",
                     description="Byzantine-resilient two-time-scale local SGD simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", parents=[common], help="run experiments, write CSV")
    run.add_argument("--audit", action="store_true",
                     help="also evaluate the lemma inequalities (Population data only)")
    sub.add_parser("audit", parents=[common],
                   help="evaluate the lemma inequalities on recorded traces")
    sub.add_parser("report", parents=[common], help="run, then plot the results")
    return parser


def resolve_values(args) -> tuple[dict, list[int]]:
    """Merge file or preset values with flag overrides (flags win)."""
    if args.config is not None:
        values = load_values(args.config)
    else:
        values = resolve({"preset": args.preset})
    overrides = {"seed": args.seed, "objective": args.mode, "n_rounds": args.rounds,
                 "replications": args.replications}
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    if args.mode is not None:
        values["regime"] = "auto"
    f_values = args.f if args.f is not None else [values["n_byzantine"]]
    return values, f_values


def write_summary_csv(result: ExperimentResult, path: Path) -> None:
    s = result.summary
    cols = [s.k, s.alpha, s.beta, s.mean["opt_error"], s.std["opt_error"], s.mean["W"],
            s.std["W"], s.mean["V"], s.std["V"], s.bound, s.contraction,
            s.mean["byz_survivors"]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(len(s.k)):
            w.writerow([str(int(s.k[i]))] + [_fmt(c[i]) for c in cols[1:]])


def _rate_fit_doc(result: ExperimentResult) -> dict:
    fit = result.summary.rate_fit
    doc = {"metric": "V_mean", "window_fraction": 0.5, "fitted": fit is not None}
    if fit is not None:
        doc.update(asdict(fit))
    return doc


def _manifest(values: dict, config: SimulationConfig, outputs: dict, extra=None) -> dict:
    doc = {
        "tool": "resilient-sgd",
        "version": __version__,
        "master_seed": config.master_seed,
        "config": {k: values[k] for k in SCHEMA},
        "schedule": asdict(config.schedule),
        "curvature": asdict(config.curvature),
        "reports": {name: rep.as_dict() for name, rep in config.reports().items()},
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    return doc


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _check_strict(config: SimulationConfig) -> bool:
    reports = config.reports()
    bad = [f"{name}: {c.name}" for name in ("theorem", "filter")
           for c in reports[name].violations]
    for line in bad:
        print(f"strict mode violation {line}", file=sys.stderr)
    return not bad


def write_audit(report_by_rep: list[AuditReport], out: Path, tag: str) -> dict:
    paths, mins = {}, {}
    for lemma in LEMMAS:
        path = out / f"audit_{tag}_{lemma}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AUDIT_COLUMNS)
            for rep, report in enumerate(report_by_rep):
                for r in report.rows.get(lemma, []):
                    w.writerow([rep, r.round, r.agent, r.step, _fmt(r.lhs), _fmt(r.rhs),
                                _fmt(r.slack)])
        paths[lemma] = path.name
        slacks = [r.min_slack(lemma) for r in report_by_rep if r.min_slack(lemma) is not None]
        mins[lemma] = min(slacks) if slacks else None
    skipped = {}
    for report in report_by_rep:
        skipped.update(report.skipped)
    failures = sum(len(r.failures) for r in report_by_rep)
    return {"tables": paths, "min_slack": mins, "skipped": skipped, "failures": failures,
            "tolerance": SLACK_TOL}


def execute(args) -> int:
    values, f_values = resolve_values(args)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    auditing = args.command == "audit" or getattr(args, "audit", False)
    if args.command == "audit":
        values["data_mode"] = "population"
    if auditing:
        values["audit"] = True
    status = EXIT_OK
    csv_paths = {}
    for f in f_values:
        run_values = dict(values, n_byzantine=f)
        config = build_config(run_values)
        if args.strict and not _check_strict(config):
            return EXIT_VALIDATION
        tag = f"f{f}"
        result = run_experiment(config, workers=args.workers)
        outputs, extra = {}, {}
        if args.command != "audit":
            csv_path = out / f"summary_{tag}.csv"
            write_summary_csv(result, csv_path)
            _write_json(out / f"ratefit_{tag}.json", _rate_fit_doc(result))
            outputs.update(summary=csv_path.name, rate_fit=f"ratefit_{tag}.json")
            csv_paths[f] = csv_path
        if auditing:
            reports = [lemma_audit(t, config) for t in result.trajectories]
            extra["audit"] = write_audit(reports, out, tag)
            outputs["audit"] = extra["audit"]["tables"]
            if extra["audit"]["failures"]:
                print(f"audit failed for f={f}: {extra['audit']['failures']} negative slack(s)",
                      file=sys.stderr)
                status = EXIT_VALIDATION
        _write_json(out / f"manifest_{tag}.json", _manifest(run_values, config, outputs, extra))
        log.info("wrote outputs for f=%d to %s", f, out)
    if args.command == "report":
        from .plotting import convergence_figure
        name = f"convergence_{values['objective']}.png"
        convergence_figure(csv_paths, out / name,
                           title=f"{values['objective'].upper()} objective, "
                                 f"N={values['n_agents']}, T={values['t_local']}")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return execute(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ExperimentDivergenceError, DivergenceError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
