"""Simulation config files: strict parsing, validation, normalization.

Configs are JSON with a fixed schema.  Unknown keys are rejected so a
typo cannot silently fall back to a default, and validation walks the
whole document before failing so one run reports every violation.  The
parsed plan carries a normalized document (all defaults materialized,
fixed key order); parsing that document again reproduces the same plan,
which is what makes replay-from-manifest exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .dataset import PARTITION_STRATEGIES, PartitionSpec
from .errors import ConfigError
from .federation import ALGORITHMS, STRAGGLER_POLICIES, WEIGHTINGS, FederationConfig
from .gkernel import GATE_MODES, GateConfig
from .model import LocalSolveConfig, WeightVector
from .problems import CorruptedFleetSpec, DatasetProblemSpec, LinearFleetSpec

SCHEMA_VERSION = 1

PROBLEM_TYPES = ("linear_fleet", "corrupted_fleet", "dataset")


@dataclass(frozen=True)
class SimulationPlan:
    problem: LinearFleetSpec | CorruptedFleetSpec | DatasetProblemSpec
    federation: FederationConfig
    initial_weights: WeightVector | None
    document: dict  # normalized config, embeddable in a manifest


class _Checker:
    """Accumulates violations while pulling typed values out of a dict."""

    def __init__(self):
        self.problems: list[str] = []

    def fail(self, message: str) -> None:
        self.problems.append(message)

    def section(self, doc: dict, key: str, where: str, required: bool = True) -> dict | None:
        value = doc.get(key)
        if value is None:
            if required and key not in doc:
                self.fail(f"{where}: missing section {key!r}")
            return None
        if not isinstance(value, dict):
            self.fail(f"{where}.{key}: expected an object")
            return None
        return value

    def unknown(self, section: dict, allowed: set[str], where: str) -> None:
        for key in sorted(set(section) - allowed):
            self.fail(f"{where}: unknown key {key!r}")

    def value(self, section, key, where, kind, *, required=False, default=None,
              minimum=None, maximum=None, choices=None, allow_none=False):
        if key not in section:
            if required:
                self.fail(f"{where}.{key}: required")
            return default
        value = section[key]
        if value is None and allow_none:
            return None
        if kind == "int":
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif kind == "num":
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        elif kind == "str":
            ok = isinstance(value, str)
        elif kind == "bool":
            ok = isinstance(value, bool)
        else:
            raise AssertionError(kind)
        if not ok:
            self.fail(f"{where}.{key}: expected {kind}, got {value!r}")
            return default
        if minimum is not None and value < minimum:
            self.fail(f"{where}.{key}: must be >= {minimum}, got {value!r}")
            return default
        if maximum is not None and value > maximum:
            self.fail(f"{where}.{key}: must be <= {maximum}, got {value!r}")
            return default
        if choices is not None and value not in choices:
            self.fail(f"{where}.{key}: must be one of {tuple(choices)}, got {value!r}")
            return default
        return value


def _parse_problem(check: _Checker, section: dict):
    before = len(check.problems)
    ptype = check.value(section, "type", "problem", "str", required=True, choices=PROBLEM_TYPES)
    if ptype is None:
        return None, {}
    base = {
        "n_clients": ("int", dict(minimum=1, default=10)),
        "samples_per_client": ("int", dict(minimum=2, default=50)),
        "slope": ("num", dict(default=2.0)),
        "intercept": ("num", dict(default=1.0)),
        "noise_std": ("num", dict(minimum=0, default=0.5)),
        "x_low": ("num", dict(default=-1.0)),
        "x_high": ("num", dict(default=1.0)),
        "seed": ("int", dict(minimum=0, default=0)),
    }
    if ptype == "corrupted_fleet":
        base["n_corrupted"] = ("int", dict(minimum=0, default=4))
        base["corruption_offset"] = ("num", dict(default=50.0))
    if ptype in ("linear_fleet", "corrupted_fleet"):
        check.unknown(section, {"type", *base}, "problem")
        fields = {
            key: check.value(section, key, "problem", kind, **opts)
            for key, (kind, opts) in base.items()
        }
        if fields["x_low"] is not None and fields["x_high"] is not None \
                and not fields["x_low"] < fields["x_high"]:
            check.fail("problem: x_low must be < x_high")
        if ptype == "corrupted_fleet" and None not in (fields["n_corrupted"], fields["n_clients"]) \
                and fields["n_corrupted"] > fields["n_clients"]:
            check.fail("problem.n_corrupted: must be <= n_clients")
        if len(check.problems) > before:
            return None, {}
        cls = LinearFleetSpec if ptype == "linear_fleet" else CorruptedFleetSpec
        return cls(**{k: float(v) if base[k][0] == "num" else v for k, v in fields.items()}), \
            {"type": ptype, **fields}
    # dataset problem
    check.unknown(section, {"type", "source", "x_col", "y_col", "partition"}, "problem")
    source = check.value(section, "source", "problem", "str", required=True)
    x_col = check.value(section, "x_col", "problem", "str", required=True)
    y_col = check.value(section, "y_col", "problem", "str", required=True)
    part = check.section(section, "partition", "problem")
    pfields = {"n_clients": 10, "strategy": "iid", "skew": 0.0, "seed": 0}
    if part is not None:
        check.unknown(part, set(pfields), "problem.partition")
        pfields["n_clients"] = check.value(part, "n_clients", "problem.partition", "int",
                                           minimum=1, default=10)
        pfields["strategy"] = check.value(part, "strategy", "problem.partition", "str",
                                          choices=PARTITION_STRATEGIES, default="iid")
        pfields["skew"] = check.value(part, "skew", "problem.partition", "num",
                                      minimum=0, maximum=1, default=0.0)
        pfields["seed"] = check.value(part, "seed", "problem.partition", "int",
                                      minimum=0, default=0)
    if len(check.problems) > before:
        return None, {}
    spec = DatasetProblemSpec(
        source=source, x_col=x_col, y_col=y_col,
        partition=PartitionSpec(
            n_clients=pfields["n_clients"], strategy=pfields["strategy"],
            skew=float(pfields["skew"]), seed=pfields["seed"],
        ),
    )
    doc = {"type": "dataset", "source": source, "x_col": x_col, "y_col": y_col,
           "partition": dict(pfields, skew=float(pfields["skew"]))}
    return spec, doc


def _problem_n_clients(problem) -> int:
    if isinstance(problem, DatasetProblemSpec):
        return problem.partition.n_clients
    return problem.n_clients


def parse_config(doc: dict) -> SimulationPlan:
    """Validate a config document and build the runnable plan."""
    check = _Checker()
    if not isinstance(doc, dict):
        raise ConfigError(["config root must be an object"])
    check.unknown(doc, {"schema_version", "kind", "problem", "federation", "initial_weights"},
                  "config")
    version = check.value(doc, "schema_version", "config", "int", required=True)
    if version is not None and version != SCHEMA_VERSION:
        check.fail(f"config.schema_version: expected {SCHEMA_VERSION}, got {version}")
    check.value(doc, "kind", "config", "str", required=True, choices=("simulate",))

    problem = None
    problem_doc: dict = {}
    psection = check.section(doc, "problem", "config")
    if psection is not None:
        problem, problem_doc = _parse_problem(check, psection)

    fed_doc: dict = {}
    fed = None
    fsection = check.section(doc, "federation", "config")
    if fsection is not None:
        allowed = {"algorithm", "rounds", "devices_per_round", "n_devices", "seed",
                   "straggler_fraction", "straggler_policy", "aggregation_weighting",
                   "sampling_probs", "solve", "gate"}
        check.unknown(fsection, allowed, "federation")
        algorithm = check.value(fsection, "algorithm", "federation", "str",
                                required=True, choices=ALGORITHMS)
        rounds = check.value(fsection, "rounds", "federation", "int", required=True, minimum=1)
        k = check.value(fsection, "devices_per_round", "federation", "int",
                        required=True, minimum=1)
        n_devices = check.value(fsection, "n_devices", "federation", "int", minimum=1,
                                allow_none=True)
        seed = check.value(fsection, "seed", "federation", "int", minimum=0, default=0)
        fraction = check.value(fsection, "straggler_fraction", "federation", "num",
                               minimum=0, maximum=1, default=0.0)
        policy = check.value(fsection, "straggler_policy", "federation", "str",
                             choices=STRAGGLER_POLICIES, allow_none=True)
        weighting = check.value(fsection, "aggregation_weighting", "federation", "str",
                                choices=WEIGHTINGS, default="uniform")
        probs = fsection.get("sampling_probs")
        if probs is not None and not (
            isinstance(probs, list)
            and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs)
        ):
            check.fail("federation.sampling_probs: expected a list of numbers or null")
            probs = None

        solve_doc = {"epochs": None, "learning_rate": None, "batch_size": 32,
                     "mu": 0.0, "seed": 0}
        ssection = check.section(fsection, "solve", "federation")
        if ssection is not None:
            check.unknown(ssection, set(solve_doc), "federation.solve")
            solve_doc["epochs"] = check.value(ssection, "epochs", "federation.solve", "int",
                                              required=True, minimum=1)
            solve_doc["learning_rate"] = check.value(
                ssection, "learning_rate", "federation.solve", "num", required=True)
            if isinstance(solve_doc["learning_rate"], (int, float)) \
                    and solve_doc["learning_rate"] is not None \
                    and solve_doc["learning_rate"] <= 0:
                check.fail("federation.solve.learning_rate: must be > 0")
            solve_doc["batch_size"] = check.value(ssection, "batch_size", "federation.solve",
                                                  "int", minimum=1, default=32)
            solve_doc["mu"] = check.value(ssection, "mu", "federation.solve", "num",
                                          minimum=0, default=0.0)
            solve_doc["seed"] = check.value(ssection, "seed", "federation.solve", "int",
                                            minimum=0, default=0)

        gate_doc = {"width": 2.0, "mode": "gated", "stats_include_rejected": False}
        gsection = check.section(fsection, "gate", "federation", required=False)
        if gsection is not None:
            check.unknown(gsection, set(gate_doc), "federation.gate")
            width = check.value(gsection, "width", "federation.gate", "num", default=2.0)
            if isinstance(width, (int, float)) and width <= 0:
                check.fail("federation.gate.width: must be > 0")
            else:
                gate_doc["width"] = float(width)
            gate_doc["mode"] = check.value(gsection, "mode", "federation.gate", "str",
                                           choices=GATE_MODES, default="gated")
            gate_doc["stats_include_rejected"] = check.value(
                gsection, "stats_include_rejected", "federation.gate", "bool", default=False)

        if problem is not None:
            implied = _problem_n_clients(problem)
            if n_devices is None:
                n_devices = implied
            elif n_devices != implied:
                check.fail(
                    f"federation.n_devices: {n_devices} does not match the problem's "
                    f"{implied} clients"
                )
            if probs is not None and len(probs) != implied:
                check.fail(
                    f"federation.sampling_probs: length {len(probs)} does not match "
                    f"{implied} clients"
                )
            if k is not None and n_devices is not None and k > n_devices:
                check.fail("federation.devices_per_round: must be <= n_devices")

        if not check.problems:
            try:
                fed = FederationConfig(
                    algorithm=algorithm,
                    n_devices=n_devices,
                    devices_per_round=k,
                    rounds=rounds,
                    solve=LocalSolveConfig(
                        epochs=solve_doc["epochs"],
                        learning_rate=float(solve_doc["learning_rate"]),
                        batch_size=solve_doc["batch_size"],
                        mu=float(solve_doc["mu"]),
                        seed=solve_doc["seed"],
                    ),
                    sampling_probs=None if probs is None else [float(p) for p in probs],
                    gate=GateConfig(
                        width=gate_doc["width"],
                        mode=gate_doc["mode"],
                        stats_include_rejected=gate_doc["stats_include_rejected"],
                    ),
                    straggler_fraction=float(fraction),
                    straggler_policy=policy,
                    aggregation_weighting=weighting,
                    seed=seed,
                )
            except ConfigError as err:
                check.problems.extend(err.violations)
        if fed is not None:
            fed_doc = {
                "algorithm": fed.algorithm,
                "rounds": fed.rounds,
                "devices_per_round": fed.devices_per_round,
                "n_devices": fed.n_devices,
                "seed": fed.seed,
                "straggler_fraction": float(fed.straggler_fraction),
                "straggler_policy": fed.straggler_policy,
                "aggregation_weighting": fed.aggregation_weighting,
                "sampling_probs": None if probs is None else [float(p) for p in probs],
                "solve": {
                    "epochs": fed.solve.epochs,
                    "learning_rate": float(fed.solve.learning_rate),
                    "batch_size": fed.solve.batch_size,
                    "mu": float(fed.solve.mu),
                    "seed": fed.solve.seed,
                },
                "gate": {
                    "width": float(fed.gate.width),
                    "mode": fed.gate.mode,
                    "stats_include_rejected": fed.gate.stats_include_rejected,
                },
            }

    w0 = None
    init = doc.get("initial_weights")
    if init is not None:
        if not (isinstance(init, list) and len(init) == 2
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in init)):
            check.fail("config.initial_weights: expected [slope, bias] or null")
        else:
            w0 = WeightVector(coefficients=[float(init[0])], bias=float(init[1]))

    if check.problems:
        raise ConfigError(check.problems)

    document = {
        "schema_version": SCHEMA_VERSION,
        "kind": "simulate",
        "problem": problem_doc,
        "federation": fed_doc,
        "initial_weights": None if w0 is None else [float(v) for v in w0.as_array()],
    }
    return SimulationPlan(problem=problem, federation=fed, initial_weights=w0,
                          document=document)


def load_config(path: str | Path) -> SimulationPlan:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError([f"config file {path} is not valid JSON: {err}"]) from err
    return parse_config(doc)
