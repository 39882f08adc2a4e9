"""Experiment harness: one-time setup, cycle simulation, reporting.

``zkfl setup``  compiles the training circuit, generates keys, prepares
                the dataset shards and writes the initial ledger snapshot.
``zkfl run``    replays `cycles` updating cycles over the artifacts and
                writes metrics/events/report files.
``zkfl report`` aggregates finished runs into comparison tables.

All run outputs that feed assertions (metrics.csv, events.jsonl) are
byte-deterministic for a fixed config; wall-clock measurements go to a
separate timings.csv.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import dataset as ds
from .circuit import (
    compile_train_step,
    load_constraint_system,
    load_keypair,
    save_artifact,
    load_artifact,
    save_constraint_system,
    save_keypair,
    setup as backend_setup,
)
from .circuit.compiler import DEFAULT_PRIME
from .errors import ArtifactMismatch, ConfigError, MissingMetrics
from .fixedpoint import FxConfig, encode
from .ledger import CostRule, Ledger, deploy
from .nn import Hyperparams, Model, accuracy, alpha_eff, model_digest
from .node import BYZANTINE_MODES, LearningNode

N = ds.N_FEATURES
M = ds.N_CLASSES


@dataclass(frozen=True)
class ExperimentConfig:
    n_nodes: int = 8
    batch_size: int = 40
    cycles: int = 300
    seed: int = 0
    alpha: float = 0.1  # picked by the documented grid search over {0.5, 0.1, 0.05, 0.01}
    scale_bits: int = 16
    magnitude_bits: int = 48
    cycle_length_blocks: int = 100
    dataset: str = "synthetic"  # "synthetic" or a path to the sensor data root
    unit: int = 0
    out_dir: str = "runs/default"
    per_node: int = 400  # synthetic datapoints per node
    skew: float = 0.0
    holdout_fraction: float = 0.2
    eval_cap: int = 2000  # held-out evaluation subsample bound
    byzantine: tuple = ()  # ((count, mode), ...)
    drop_late: bool = False
    prime: int = DEFAULT_PRIME
    inbox_capacity: int = 8
    cost_base: int = 21000
    cost_per_byte: int = 16
    cost_per_constraint: int = 1

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ConfigError("n_nodes must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.cycles < 1:
            raise ConfigError("cycles must be >= 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must be in (0, 1)")
        if self.alpha <= 0:
            raise ConfigError("alpha must be > 0")
        for count, mode in self.byzantine:
            if count < 1 or mode not in BYZANTINE_MODES:
                raise ConfigError(f"bad byzantine spec {count}:{mode}")

    @property
    def fx_config(self) -> FxConfig:
        return FxConfig(scale_bits=self.scale_bits, magnitude_bits=self.magnitude_bits)

    @property
    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            alpha=encode(self.alpha, self.fx_config),
            batch_size=self.batch_size,
            n=N,
            m=M,
        )

    @property
    def cost_rule(self) -> CostRule:
        return CostRule(self.cost_base, self.cost_per_byte, self.cost_per_constraint)

    def n_byzantine(self) -> int:
        return sum(count for count, _ in self.byzantine)

    def to_json(self) -> dict:
        out = asdict(self)
        out["byzantine"] = [[c, m] for c, m in self.byzantine]
        out["prime"] = str(self.prime)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        obj["byzantine"] = tuple((int(c), str(m)) for c, m in obj.get("byzantine", ()))
        if "prime" in obj:
            obj["prime"] = int(obj["prime"])
        return cls(**obj)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib

            obj = tomllib.loads(path.read_text())
        else:
            obj = json.loads(path.read_text())
        return cls.from_json(obj)


def account_address(index: int) -> str:
    return "0x" + hashlib.sha256(f"zkfl-account-{index}".encode()).hexdigest()[:40]


def node_stream_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + 7919 * index + 17


# --- setup -----------------------------------------------------------------


def _prepare_dataset(config: ExperimentConfig) -> dict:
    """Shard, split, standardize; returns the dataset artifact body."""
    if config.dataset == "synthetic":
        shards = ds.synthesize(config.n_nodes, config.per_node, config.seed, config.skew)
    else:
        root = Path(config.dataset)
        if not root.is_dir():
            raise ConfigError(f"dataset path {root} does not exist")
        shards = ds.load_uci(root, unit=config.unit)
        if config.n_nodes > len(shards):
            raise ConfigError(
                f"{config.n_nodes} nodes requested but only {len(shards)} shards available"
            )
        shards = shards[: config.n_nodes]

    trains, holdouts = [], []
    for i, shard in enumerate(shards):
        train, hold = ds.split_holdout(shard, config.holdout_fraction, config.seed + i)
        trains.append(train)
        holdouts.append(hold)
    stats = ds.compute_stats([dp for train in trains for dp in train])
    return {
        "stats": stats.to_json(),
        "train_shards": [
            [[list(dp.features), dp.label] for dp in train] for train in trains
        ],
        "holdout": [[list(dp.features), dp.label] for hold in holdouts for dp in hold],
    }


def cmd_setup(config: ExperimentConfig) -> dict:
    """Compile, generate keys, deploy the initial ledger; write artifacts."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config.fx_config
    hp = config.hyperparams

    data_body = _prepare_dataset(config)
    save_artifact(out / "dataset.bin", "dataset", data_body)
    (out / "stats.json").write_text(
        json.dumps(data_body["stats"], indent=2, sort_keys=True) + "\n"
    )

    cs = compile_train_step(hp, cfg, config.prime)
    save_constraint_system(out / "circuit.bin", cs)
    keys = backend_setup(cs)
    save_keypair(out / "keys.bin", keys)
    (out / "layout.json").write_text(
        json.dumps(cs.manifest, sort_keys=True, separators=(",", ":")) + "\n"
    )

    registered = [account_address(i) for i in range(config.n_nodes + config.n_byzantine())]
    ledger = deploy(
        registered=registered,
        initial_model=Model.zeros(N, M),
        verification_key=keys.verification_key,
        alpha_eff=alpha_eff(hp, cfg),
        fx_config=cfg,
        cycle_length_blocks=config.cycle_length_blocks,
        cost_rule=config.cost_rule,
    )
    (out / "ledger.json").write_text(
        json.dumps(ledger.to_snapshot(), sort_keys=True, separators=(",", ":")) + "\n"
    )
    (out / "config.json").write_text(
        json.dumps(config.to_json(), indent=2, sort_keys=True) + "\n"
    )

    print(f"constraint system: {len(cs.constraints)} constraints, "
          f"{cs.num_variables} wires, digest {cs.digest[:16]}")
    return {"constraints": len(cs.constraints), "digest": cs.digest}


# --- run ---------------------------------------------------------------------


_ARTIFACT_FIELDS = (
    "n_nodes", "batch_size", "seed", "alpha", "scale_bits", "magnitude_bits",
    "cycle_length_blocks", "dataset", "unit", "per_node", "skew",
    "holdout_fraction", "byzantine", "prime",
)


def _check_artifacts(config: ExperimentConfig, out: Path) -> ExperimentConfig:
    saved_path = out / "config.json"
    if not saved_path.exists():
        raise ArtifactMismatch(f"no setup artifacts under {out}; run `zkfl setup` first")
    saved = ExperimentConfig.from_json(json.loads(saved_path.read_text()))
    for name in _ARTIFACT_FIELDS:
        if getattr(saved, name) != getattr(config, name):
            raise ArtifactMismatch(
                f"config field {name!r} differs from the setup artifacts "
                f"({getattr(config, name)!r} vs {getattr(saved, name)!r})"
            )
    return saved


def _byzantine_modes(config: ExperimentConfig) -> list:
    modes = []
    for count, mode in config.byzantine:
        modes.extend([mode] * count)
    return modes


def cmd_run(config: ExperimentConfig, progress=None) -> dict:
    """Simulate the configured number of updating cycles over the artifacts."""
    out = Path(config.out_dir)
    _check_artifacts(config, out)
    cfg = config.fx_config
    hp = config.hyperparams

    cs = load_constraint_system(out / "circuit.bin")
    keys = load_keypair(out / "keys.bin")
    if keys.verification_key.digest != cs.digest:
        raise ArtifactMismatch("key pair bound to a different constraint system")
    if (cs.meta["n"], cs.meta["m"], cs.meta["batch_size"]) != (N, M, config.batch_size):
        raise ArtifactMismatch("constraint system shape differs from config")

    data = load_artifact(out / "dataset.bin", "dataset")
    stats = ds.FeatureStats.from_json(data["stats"])
    train_points = [
        [ds.Datapoint(features=tuple(feat), label=int(label)) for feat, label in shard]
        for shard in data["train_shards"]
    ]
    holdout_points = [
        ds.Datapoint(features=tuple(feat), label=int(label)) for feat, label in data["holdout"]
    ]
    encoded_shards = [ds.encode_points(shard, stats, cfg) for shard in train_points]
    eval_points = ds.encode_points(_cap_eval(holdout_points, config.eval_cap), stats, cfg)

    ledger = Ledger.from_snapshot(
        json.loads((out / "ledger.json").read_text()), keys.verification_key
    )

    nodes, streams = [], []
    modes = [None] * config.n_nodes + _byzantine_modes(config)
    for idx, mode in enumerate(modes):
        nodes.append(
            LearningNode(
                address=account_address(idx),
                hp=hp,
                cfg=cfg,
                cs=cs,
                proving_key=keys.proving_key,
                inbox_capacity=config.inbox_capacity,
                byzantine_mode=mode,
            )
        )
        shard = encoded_shards[idx % config.n_nodes]
        streams.append(ds.make_batches(shard, config.batch_size, node_stream_seed(config.seed, idx)))

    metrics_rows = []
    timings_rows = []
    for cycle in range(config.cycles):
        reports = []
        for idx, node in enumerate(nodes):
            if config.drop_late and (cycle + idx) % 4 == 0:
                continue  # this node misses the cycle entirely
            node.enqueue_batch(next(streams[idx]))
            reports.append(node.run_cycle(ledger))
        ledger.advance_block(config.cycle_length_blocks)

        model, _ = ledger.read_global()
        acc = accuracy(model, eval_points, cfg)
        accepted = sum(1 for r in reports if r.accepted)
        rejected = sum(1 for r in reports if r.submitted and not r.accepted)
        cumulative_cost = sum(cost for _, cost in ledger.cost_log)
        metrics_rows.append([cycle, f"{acc:.6f}", accepted, rejected, cumulative_cost])

        submitted = [r for r in reports if r.submitted]
        mean_wit = sum(r.witness_seconds for r in submitted) / max(len(submitted), 1)
        mean_prove = sum(r.prove_seconds for r in submitted) / max(len(submitted), 1)
        timings_rows.append([cycle, f"{mean_wit:.6f}", f"{mean_prove:.6f}"])

        if progress and (cycle + 1) % progress == 0:
            print(f"cycle {cycle + 1}/{config.cycles}: accuracy {acc:.4f}", file=sys.stderr)

    _write_csv(out / "metrics.csv",
               ["cycle", "accuracy", "accepted", "rejected", "cumulative_cost"],
               metrics_rows)
    _write_csv(out / "timings.csv",
               ["cycle", "mean_witness_seconds", "mean_prove_seconds"],
               timings_rows)
    with (out / "events.jsonl").open("w") as fh:
        for event in ledger.events:
            fh.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")
    node_dir = out / "nodes"
    node_dir.mkdir(exist_ok=True)
    for node in nodes:
        with (node_dir / f"{node.address}.jsonl").open("w") as fh:
            for report in node.metrics:
                fh.write(json.dumps(report.to_json(), sort_keys=True) + "\n")
    model, cycle_index = ledger.read_global()
    (out / "model.json").write_text(
        json.dumps(model.to_json(cfg), sort_keys=True, separators=(",", ":")) + "\n"
    )

    final_acc = float(metrics_rows[-1][1])
    return {
        "final_accuracy": final_acc,
        "cycles": config.cycles,
        "committed_digest": model_digest(model, cfg),
        "metrics_path": str(out / "metrics.csv"),
    }


def _cap_eval(points: list, cap: int) -> list:
    """Deterministic stratified subsample when the holdout is oversized."""
    if len(points) <= cap:
        return points
    by_label = {}
    for dp in points:
        by_label.setdefault(dp.label, []).append(dp)
    take_per_label = max(1, cap // len(by_label))
    capped = []
    for label in sorted(by_label):
        capped.extend(by_label[label][:take_per_label])
    return capped


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


# --- report --------------------------------------------------------------------


def _load_run(run_dir: Path) -> dict | None:
    metrics = run_dir / "metrics.csv"
    config = run_dir / "config.json"
    if not metrics.exists() or not config.exists():
        return None
    with metrics.open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return None
    cfg = json.loads(config.read_text())
    accs = [float(r["accuracy"]) for r in rows]
    reach = next((i for i, a in enumerate(accs) if a >= 0.6), None)
    return {
        "run": run_dir.name,
        "n_nodes": cfg["n_nodes"],
        "batch_size": cfg["batch_size"],
        "cycles": len(rows),
        "final_accuracy": accs[-1],
        "best_accuracy": max(accs),
        "cycles_to_0.6": reach,
        "total_cost": int(rows[-1]["cumulative_cost"]),
        "accuracy_series": accs,
    }


def cmd_report(runs_dir, out_path=None) -> dict:
    """Aggregate finished runs into the comparison tables."""
    runs_dir = Path(runs_dir)
    candidates = [runs_dir] + sorted(d for d in runs_dir.glob("*") if d.is_dir())
    runs = [r for r in (_load_run(d) for d in candidates) if r is not None]
    if not runs:
        raise MissingMetrics(f"no metrics.csv found under {runs_dir}")

    summary_header = ["run", "n_nodes", "batch_size", "cycles", "final_accuracy",
                      "best_accuracy", "cycles_to_0.6", "total_cost"]
    summary_rows = [[r[k] for k in summary_header] for r in runs]

    lines = ["\t".join(summary_header)]
    for row in summary_rows:
        lines.append("\t".join("" if v is None else str(v) for v in row))

    by_batch = {}
    for r in runs:
        by_batch.setdefault(r["batch_size"], []).append(r)
    ordered = sorted(
        (b, min(x["cycles_to_0.6"] for x in rs if x["cycles_to_0.6"] is not None))
        for b, rs in by_batch.items()
        if any(x["cycles_to_0.6"] is not None for x in rs)
    )
    if len(ordered) > 1:
        fastest = min(ordered, key=lambda t: t[1])
        lines.append(
            f"# fastest to 0.6 accuracy: batch size {fastest[0]} "
            f"({fastest[1]} cycles); ordering {[b for b, _ in ordered]} -> "
            f"{[c for _, c in ordered]}"
        )

    text = "\n".join(lines) + "\n"
    print(text, end="")

    if out_path is not None:
        out_path = Path(out_path)
        out_path.mkdir(parents=True, exist_ok=True)
        _write_csv(out_path / "summary.csv", summary_header,
                   [["" if v is None else v for v in row] for row in summary_rows])
        # accuracy-vs-cycles pivots along the two comparison axes
        for key, name in (("batch_size", "by_batch_size"), ("n_nodes", "by_nodes")):
            groups = {}
            for r in runs:
                groups.setdefault(r[key], r["accuracy_series"])
            depth = max(len(s) for s in groups.values())
            header = ["cycle"] + [f"{key}={k}" for k in sorted(groups)]
            rows = []
            for c in range(depth):
                row = [c]
                for k in sorted(groups):
                    series = groups[k]
                    row.append(f"{series[c]:.6f}" if c < len(series) else "")
                rows.append(row)
            _write_csv(out_path / f"accuracy_{name}.csv", header, rows)
        _write_csv(
            out_path / "cost_by_batch_size.csv",
            ["batch_size", "total_cost"],
            [[b, max(x["total_cost"] for x in rs)] for b, rs in sorted(by_batch.items())],
        )
    return {"runs": len(runs), "summary": summary_rows}


# --- argparse wiring --------------------------------------------------------------


def _parse_byzantine(values) -> tuple:
    out = []
    for value in values or ():
        try:
            count, mode = value.split(":", 1)
            out.append((int(count), mode))
        except ValueError:
            raise ConfigError(f"--byzantine expects <count>:<mode>, got {value!r}") from None
    return tuple(out)


def _add_common_flags(sub):
    sub.add_argument("--config", help="JSON or TOML config file")
    sub.add_argument("--nodes", type=int, dest="n_nodes")
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--cycles", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--scale-bits", type=int, dest="scale_bits")
    sub.add_argument("--dataset", help='"synthetic" or a path to the sensor data root')
    sub.add_argument("--unit", type=int, help="sensor unit (0..4) used for the 9 features")
    sub.add_argument("--out", dest="out_dir", help="artifact/output directory")
    sub.add_argument("--per-node", type=int, dest="per_node")
    sub.add_argument("--skew", type=float)
    sub.add_argument("--byzantine", action="append", metavar="N:MODE",
                     help="add N extra byzantine nodes (corrupt_model, corrupt_witness, replay_proof)")
    sub.add_argument("--drop-late", action="store_true", dest="drop_late", default=None,
                     help="nodes periodically miss cycles (liveness exercise)")


def _config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in ("n_nodes", "batch_size", "cycles", "seed", "alpha", "scale_bits",
                 "dataset", "unit", "out_dir", "per_node", "skew", "drop_late"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "byzantine", None):
        overrides["byzantine"] = _parse_byzantine(args.byzantine)
    return replace(base, **overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="zkfl",
        description="Federated learning with verifiable fixed-point training steps "
                    "on an emulated ledger.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_setup = subs.add_parser("setup", help="compile circuit, generate keys, prepare data")
    _add_common_flags(p_setup)

    p_run = subs.add_parser("run", help="simulate updating cycles over setup artifacts")
    _add_common_flags(p_run)
    p_run.add_argument("--progress", type=int, default=25,
                       help="print progress every N cycles (0 disables)")

    p_report = subs.add_parser("report", help="aggregate run metrics into tables")
    p_report.add_argument("--runs", required=True, help="directory containing run outputs")
    p_report.add_argument("--out", dest="out_dir", help="where to write summary CSVs")

    args = parser.parse_args(argv)
    try:
        if args.command == "setup":
            cmd_setup(_config_from_args(args))
        elif args.command == "run":
            cmd_run(_config_from_args(args), progress=args.progress or None)
        elif args.command == "report":
            cmd_report(args.runs, args.out_dir)
    except (ConfigError, ArtifactMismatch, MissingMetrics) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
