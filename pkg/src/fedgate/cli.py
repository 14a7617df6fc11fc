"""Command-line entry point.

Subcommands:
  analyze   run the 2-sigma filtering experiment on a dataset, print the
            observation/deviation tables, write JSON + plot CSVs + figure
  simulate  run a federated optimization from a config file (or replay a
            previous summary), write JSONL round stream + summary + figure
  compare   print summaries side by side
  fetch     download a registered dataset's raw original

Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 divergence.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import experiment_to_dict, emit_plot_data, run_filter_experiment
from .config import SimulationPlan, load_config, parse_config
from .dataset import load_csv
from .errors import ConfigError, DataError, DivergenceError, FedgateError
from .federation import RunHistory, run
from .model import WeightVector
from .problems import DatasetProblemSpec, build_problem
from .registry import REGISTRY, fetch, fingerprint, resolve, verify

SUMMARY_SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the ConfigError path."""

    def error(self, message):
        raise ConfigError([message])


def _json_safe(obj):
    """Replace non-finite floats with None so output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_json_safe(obj), indent=2, sort_keys=True, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


def _fmt(value, width=12) -> str:
    if value is None:
        return "n/a".rjust(width)
    return f"{value:.6g}".rjust(width)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- analyze


def _print_tables(result) -> None:
    name_width = max(len(o.attribute) for o in result.observations) + 2
    print("OBSERVATION")
    print("ATTRIBUTE".ljust(name_width) + "".join(
        h.rjust(12) for h in ("ACTUAL", "NORMAL", "OPTIMIZED")))
    for o in result.observations:
        print(o.attribute.ljust(name_width)
              + _fmt(o.actual) + _fmt(o.normal) + _fmt(o.optimized))
    print()
    print("DEVIATIONS (%)")
    print("ATTRIBUTE".ljust(name_width) + "".join(
        h.rjust(12) for h in ("NTA", "OTA", "OTN")))
    for d in result.deviations:
        print(d.attribute.ljust(name_width) + _fmt(d.nta) + _fmt(d.ota) + _fmt(d.otn))
    print()
    print("RESULT")
    print("ATTRIBUTE".ljust(name_width) + "IMPROVEMENT (%)".rjust(16))
    for d in result.deviations:
        print(d.attribute.ljust(name_width) + _fmt(d.improvement, 16))


def cmd_analyze(args) -> int:
    spec, path = resolve(args.data)
    x_col, y_col = args.x, args.y
    if spec is not None:
        x_col = x_col or spec.default_pair[0]
        y_col = y_col or spec.default_pair[1]
    if not x_col or not y_col:
        raise ConfigError(["--x and --y are required for datasets outside the registry"])
    if spec is not None:
        ok, actual = verify(spec, path)
        if not ok:
            print(
                f"warning: {path.name} does not match the pinned fingerprint "
                f"(rows {actual['row_count']} vs {spec.row_count}, "
                f"sha256 {actual['sha256'][:12]}... vs {spec.sha256[:12]}...)",
                file=sys.stderr,
            )
    dataset = load_csv(path, [x_col, y_col])
    result = run_filter_experiment(dataset, x_col, y_col, width=args.width)
    _print_tables(result)

    out = Path(args.out)
    report = experiment_to_dict(result)
    report["manifest"] = {
        "command": "analyze",
        "tool_version": __version__,
        "dataset": fingerprint(path),
        "width": float(args.width),
        "x_col": x_col,
        "y_col": y_col,
    }
    _write_json(out / "report.json", report)
    written = emit_plot_data(result, out)
    if not args.no_figure:
        from .plots import render_experiment_figure

        written.append(render_experiment_figure(result, out / "scatter.png"))
    print()
    print(f"report: {out / 'report.json'}")
    for p in written:
        print(f"wrote:  {p}")
    return 0


# --------------------------------------------------------------- simulate


def _dataset_fingerprints(plan: SimulationPlan) -> list[dict]:
    if not isinstance(plan.problem, DatasetProblemSpec):
        return []
    _, path = resolve(plan.problem.source)
    return [fingerprint(path)]


def _summary_dict(plan: SimulationPlan, history: RunHistory,
                  reference: WeightVector) -> dict:
    final = history.final_weights
    never = [cid for cid, flag in zip(history.client_ids, history.participated) if not flag]
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "manifest": {
            "command": "simulate",
            "tool_version": __version__,
            "seed": history.config.seed,
            "config": plan.document,
            "datasets": _dataset_fingerprints(plan),
        },
        "algorithm": history.config.algorithm,
        "rounds": len(history.rounds),
        "final_weights": [float(v) for v in final.as_array()],
        "final_loss": history.rounds[-1].global_loss,
        "client_ids": list(history.client_ids),
        "final_n0": [float(v) for v in history.final_n0],
        "mean_n0": float(history.final_n0.mean()),
        "never_participated": never,
        "empty_rounds": [r.round for r in history.rounds if r.empty_aggregation],
        "reference_weights": [float(v) for v in reference.as_array()],
        "reference_distance": final.distance_to(reference),
        "round_summaries": [
            {
                "round": r.round,
                "loss": r.global_loss,
                "selected": len(r.selected),
                "accepted": len(r.accepted),
                "rejected": len(r.rejected),
                "mean_beta": r.mean_beta,
                "n0": r.telemetry.n0,
            }
            for r in history.rounds
        ],
    }


def _round_record(r) -> dict:
    return {
        "round": r.round,
        "selected": list(r.selected),
        "accepted": list(r.accepted),
        "rejected": list(r.rejected),
        "weights": [float(v) for v in r.global_weights.as_array()],
        "loss": r.global_loss,
        "mean_beta": r.mean_beta,
        "empty_aggregation": r.empty_aggregation,
        "telemetry": {
            "total_seen": r.telemetry.total_seen,
            "total_rejected": r.telemetry.total_rejected,
            "n0": r.telemetry.n0,
            "kurtosis_raw": r.telemetry.kurtosis_raw,
            "kurtosis_excess": r.telemetry.kurtosis_excess,
            "tail_class": r.telemetry.tail_class,
            "ratio_raw_to_3n0": r.telemetry.ratio_raw_to_3n0,
        },
    }


def cmd_simulate(args) -> int:
    started = _now()
    if args.replay:
        doc = json.loads(Path(args.replay).read_text(encoding="utf-8"))
        embedded = doc.get("manifest", {}).get("config")
        if embedded is None:
            raise DataError(f"{args.replay} has no embedded manifest config")
        plan = parse_config(embedded)
    else:
        plan = load_config(args.config)
    if args.seed is not None:
        fed = replace(plan.federation, seed=args.seed)
        document = dict(plan.document)
        document["federation"] = dict(document["federation"], seed=args.seed)
        plan = SimulationPlan(problem=plan.problem, federation=fed,
                              initial_weights=plan.initial_weights, document=document)

    clients, reference = build_problem(plan.problem)
    w0 = plan.initial_weights or WeightVector.zeros(clients[0].dim)
    history = run(plan.federation, clients, w0)

    for r in history.rounds:
        beta = "n/a" if math.isnan(r.mean_beta) else f"{r.mean_beta:.3f}"
        flag = "  (no updates survived)" if r.empty_aggregation else ""
        print(f"round {r.round:3d}  loss {r.global_loss:.6e}  "
              f"selected {len(r.selected):2d}  accepted {len(r.accepted):2d}  "
              f"rejected {len(r.rejected):2d}  n0 {r.telemetry.n0:.3f}  "
              f"beta {beta}{flag}")

    out = Path(args.out)
    summary = _summary_dict(plan, history, reference)
    _write_json(out / "summary.json", summary)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "rounds.jsonl", "w", encoding="utf-8") as fh:
        for r in history.rounds:
            fh.write(json.dumps(_json_safe(_round_record(r)), sort_keys=True) + "\n")
    manifest = dict(summary["manifest"])
    manifest.update({
        "argv": list(sys.argv),
        "started": started,
        "finished": _now(),
        "out_dir": str(out),
    })
    _write_json(out / "manifest.json", manifest)
    written = [out / "summary.json", out / "rounds.jsonl", out / "manifest.json"]
    if not args.no_figure:
        from .plots import render_run_figure

        written.append(render_run_figure(history, out / "loss_n0.png"))
    print()
    print(f"final weights {summary['final_weights']}  "
          f"loss {summary['final_loss']:.6e}  "
          f"distance-to-reference {summary['reference_distance']:.6e}")
    for p in written:
        print(f"wrote: {p}")
    return 0


# ---------------------------------------------------------------- compare


def cmd_compare(args) -> int:
    if len(args.summaries) < 2:
        raise ConfigError(["compare needs at least two summary files"])
    rows = []
    for spath in args.summaries:
        path = Path(spath)
        if not path.is_file():
            raise DataError(f"summary file not found: {path}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        for key in ("algorithm", "rounds", "final_loss", "final_weights", "mean_n0"):
            if key not in doc:
                raise DataError(f"{path} is not a simulate summary (missing {key!r})")
        rows.append((path.name, doc))
    dims = {len(doc["final_weights"]) for _, doc in rows}
    if len(dims) != 1:
        raise DataError(f"summaries have incompatible weight dimensions: {sorted(dims)}")

    labels = [f"{doc['algorithm']} ({name})" for name, doc in rows]
    col = max(24, max(len(s) for s in labels) + 2)
    print("METRIC".ljust(24) + "".join(s.rjust(col) for s in labels))
    metrics = [
        ("rounds", lambda d: f"{d['rounds']}"),
        ("final loss", lambda d: f"{d['final_loss']:.6e}"),
        ("mean n0", lambda d: f"{d['mean_n0']:.4f}"),
        ("distance to reference", lambda d: "n/a" if d.get("reference_distance") is None
         else f"{d['reference_distance']:.6e}"),
    ]
    for label, fmt in metrics:
        print(label.ljust(24) + "".join(fmt(doc).rjust(col) for _, doc in rows))
    return 0


# ------------------------------------------------------------------ fetch


def cmd_fetch(args) -> int:
    path = fetch(args.name, args.out)
    actual = fingerprint(path)
    spec = REGISTRY[args.name]
    print(f"downloaded {spec.fetch_url} -> {path}")
    print(f"rows {actual['row_count']}  sha256 {actual['sha256']}")
    if actual["sha256"] != spec.sha256:
        print(
            "note: raw originals keep their upstream schema and will not match "
            "the bundled normalized copy's fingerprint",
            file=sys.stderr,
        )
    return 0


# ------------------------------------------------------------------- main


def build_parser() -> _Parser:
    parser = _Parser(prog="fedgate",
                     description="Gaussian-gated federated optimization toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[], help="run the 2-sigma filtering experiment")
    p.add_argument("--data", required=True,
                   help=f"registry name ({', '.join(sorted(REGISTRY))}) or CSV path")
    p.add_argument("--x", help="x-axis column (default: the dataset's registered pair)")
    p.add_argument("--y", help="y-axis column")
    p.add_argument("--width", type=float, default=2.0,
                   help="window half-width in standard deviations (inf disables)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run a federated optimization")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="JSON config file")
    group.add_argument("--replay", help="previous summary.json to re-run from its manifest")
    p.add_argument("--seed", type=int, help="override the federation seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="print simulate summaries side by side")
    p.add_argument("summaries", nargs="*", help="two or more summary.json files")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fetch", help="download a registered dataset's raw original")
    p.add_argument("name", choices=sorted(REGISTRY), help="dataset registry name")
    p.add_argument("--out", help="download target path")
    p.set_defaults(func=cmd_fetch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as err:
        for line in err.violations:
            print(f"error: {line}", file=sys.stderr)
        return 1
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FedgateError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
