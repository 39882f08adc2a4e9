"""Sensor dataset ingestion, sharding and batch generation.

Input layout: ``a{01..19}/p{1..8}/s{01..60}.txt`` where each file holds a
5-second segment of 125 rows x 45 comma-separated sensor channels.  Two
adaptations are applied: the feature space is cut to the nine channels
of a single sensor unit, and the 19 activities are merged into 6
prediction classes (table shipped as a JSON config artifact).  Each of
the eight subjects becomes one node-local shard.

A synthetic generator with the same shard/feature/class shape stands in
when the real download is not available.
"""

from __future__ import annotations

import importlib.resources
import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDataError, FormatError, RangeError
from .fixedpoint import FxConfig, encode
from .nn import Batch

SEGMENT_ROWS = 125
SEGMENT_COLS = 45
N_FEATURES = 9
N_CLASSES = 6
N_SUBJECTS = 8
N_ACTIVITIES = 19
N_UNITS = SEGMENT_COLS // N_FEATURES


@dataclass(frozen=True)
class RawSegment:
    activity_id: int  # 1..19
    subject_id: int  # 1..8
    samples: tuple  # 125 rows of 45 floats


@dataclass(frozen=True)
class Datapoint:
    features: tuple  # 9 floats
    label: int  # 0..5


def parse_segment(data: bytes, activity_id: int, subject_id: int) -> RawSegment:
    """Lossless parse of one 125x45 comma-separated segment file."""
    if not 1 <= activity_id <= N_ACTIVITIES:
        raise RangeError(f"activity id {activity_id} outside 1..{N_ACTIVITIES}")
    if not 1 <= subject_id <= N_SUBJECTS:
        raise RangeError(f"subject id {subject_id} outside 1..{N_SUBJECTS}")
    text = data.decode("utf-8", errors="strict")
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) != SEGMENT_ROWS:
        raise FormatError(
            f"expected {SEGMENT_ROWS} lines, got {len(lines)}", line=len(lines) + 1
        )
    rows = []
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split(",")
        if len(tokens) != SEGMENT_COLS:
            raise FormatError(
                f"expected {SEGMENT_COLS} columns, got {len(tokens)}",
                line=lineno,
                column=len(tokens),
            )
        row = []
        for colno, token in enumerate(tokens, start=1):
            try:
                row.append(float(token))
            except ValueError:
                raise FormatError(
                    f"non-numeric token {token.strip()!r}", line=lineno, column=colno
                ) from None
        rows.append(tuple(row))
    return RawSegment(activity_id=activity_id, subject_id=subject_id, samples=tuple(rows))


def reduce_features(seg: RawSegment, unit: int = 0) -> list:
    """Columns of one sensor unit: [9*unit, 9*unit + 9) for every row."""
    if not 0 <= unit < N_UNITS:
        raise RangeError(f"sensor unit {unit} outside 0..{N_UNITS - 1}")
    lo = N_FEATURES * unit
    return [row[lo : lo + N_FEATURES] for row in seg.samples]


def default_merge_table() -> dict:
    """The shipped 19 -> 6 activity grouping."""
    with importlib.resources.files("zkfl.data").joinpath("class_merge.json").open() as fh:
        raw = json.load(fh)
    return {int(k): int(v) for k, v in raw["map"].items()}


def load_merge_table(path) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    table = {int(k): int(v) for k, v in raw["map"].items()}
    if sorted(table) != list(range(1, N_ACTIVITIES + 1)):
        raise FormatError("merge table must map every activity 1..19")
    if set(table.values()) != set(range(N_CLASSES)):
        raise FormatError(f"merge table must cover exactly {N_CLASSES} classes")
    return table


def merge_classes(activity_id: int, table: dict | None = None) -> int:
    if not 1 <= activity_id <= N_ACTIVITIES:
        raise RangeError(f"activity id {activity_id} outside 1..{N_ACTIVITIES}")
    if table is None:
        table = default_merge_table()
    return table[activity_id]


def shard_by_subject(segments, unit: int = 0, table: dict | None = None) -> list:
    """One shard of datapoints per subject; order of segments is irrelevant."""
    if table is None:
        table = default_merge_table()
    shards = [[] for _ in range(N_SUBJECTS)]
    for seg in sorted(segments, key=lambda s: (s.subject_id, s.activity_id)):
        label = merge_classes(seg.activity_id, table)
        shard = shards[seg.subject_id - 1]
        for features in reduce_features(seg, unit):
            shard.append(Datapoint(features=features, label=label))
    return shards


def load_uci(root, unit: int = 0, table: dict | None = None) -> list:
    """Walk the ``a*/p*/s*.txt`` tree under `root` into per-subject shards."""
    root = Path(root)
    segments = []
    for a in range(1, N_ACTIVITIES + 1):
        for p in range(1, N_SUBJECTS + 1):
            seg_dir = root / f"a{a:02d}" / f"p{p}"
            if not seg_dir.is_dir():
                raise FormatError(f"missing directory {seg_dir}")
            for path in sorted(seg_dir.glob("s*.txt")):
                segments.append(parse_segment(path.read_bytes(), a, p))
    if not segments:
        raise EmptyDataError(f"no segment files under {root}")
    return shard_by_subject(segments, unit, table)


# --- preprocessing ----------------------------------------------------------


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature z-score statistics, computed once on the training split."""

    mean: tuple
    std: tuple

    def to_json(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureStats":
        return cls(mean=tuple(obj["mean"]), std=tuple(obj["std"]))


def compute_stats(points) -> FeatureStats:
    if not points:
        raise EmptyDataError("cannot compute statistics on an empty set")
    arr = np.array([dp.features for dp in points], dtype=np.float64)
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    std[std == 0.0] = 1.0
    return FeatureStats(mean=tuple(mean.tolist()), std=tuple(std.tolist()))


def standardize(dp: Datapoint, stats: FeatureStats) -> Datapoint:
    features = tuple(
        (f - mu) / sd for f, mu, sd in zip(dp.features, stats.mean, stats.std)
    )
    return Datapoint(features=features, label=dp.label)


def encode_points(points, stats: FeatureStats, cfg: FxConfig) -> list:
    """Standardize and fix-point-encode: [(features_fx, label), ...]."""
    out = []
    for dp in points:
        std = standardize(dp, stats)
        out.append((tuple(encode(f, cfg) for f in std.features), dp.label))
    return out


def split_holdout(points, fraction: float = 0.2, seed: int = 0) -> tuple:
    """Stratified (train, holdout) split; deterministic in the seed."""
    rng = random.Random(seed)
    by_label = {}
    for dp in points:
        by_label.setdefault(dp.label, []).append(dp)
    train, hold = [], []
    for label in sorted(by_label):
        group = by_label[label]
        rng.shuffle(group)
        cut = int(round(len(group) * fraction))
        hold.extend(group[:cut])
        train.extend(group[cut:])
    return train, hold


def make_batches(encoded_points, batch_size: int, seed: int):
    """Infinite stream of fixed-size batches.

    Sampling is without replacement within an epoch and reshuffles per
    epoch; batch boundaries may straddle epochs so every point appears
    exactly once per epoch regardless of divisibility.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not encoded_points:
        raise EmptyDataError("cannot batch an empty shard")
    rng = random.Random(seed)
    buffer = []
    while True:
        while len(buffer) < batch_size:
            epoch = list(range(len(encoded_points)))
            rng.shuffle(epoch)
            buffer.extend(epoch)
        take, buffer = buffer[:batch_size], buffer[batch_size:]
        inputs = tuple(encoded_points[i][0] for i in take)
        labels = tuple(encoded_points[i][1] for i in take)
        yield Batch(inputs=inputs, labels=labels)


# --- synthetic substitute -----------------------------------------------------

# Gaussian clusters on a fixed +/- radius pattern, linearly separable with
# a comfortable margin, plus two strong shared "nuisance" directions that
# overlap the class-mean coordinates.  The nuisance makes the naive
# class-template classifier weak (~0.5 accuracy), so held-out accuracy
# climbs over many aggregation cycles instead of jumping after one step,
# while the optimal linear classifier still reaches ~0.95.
_SYNTH_RADIUS = 3.6
_SYNTH_NOISE = 1.0
_SYNTH_NUISANCE = 6.5


def _class_means() -> np.ndarray:
    means = np.zeros((N_CLASSES, N_FEATURES))
    for c in range(N_CLASSES):
        means[c][c] = _SYNTH_RADIUS
        means[c][(c + 3) % N_FEATURES] = -_SYNTH_RADIUS / 2.0
    return means


def _nuisance_directions() -> np.ndarray:
    u1 = np.ones(N_FEATURES) / 3.0
    u2 = np.array([1, -1, 1, -1, 1, -1, 1, -1, 1], dtype=np.float64) / 3.0
    return np.stack([u1, u2])


def synthesize(n_nodes: int, per_node: int, seed: int, skew: float = 0.0) -> list:
    """Cluster stand-in with the production shard shape (9 features, 6 classes).

    `skew` in [0, 1] shifts each node's class mixture away from uniform;
    at 0 every shard is identically distributed.
    """
    if n_nodes < 1 or per_node < 1:
        raise ValueError("n_nodes and per_node must be >= 1")
    if not 0.0 <= skew <= 1.0:
        raise ValueError("skew must be within [0, 1]")
    rng = np.random.default_rng(seed)
    means = _class_means()
    directions = _nuisance_directions()
    shards = []
    for _ in range(n_nodes):
        tilt = rng.random(N_CLASSES)
        probs = (1.0 - skew) * np.full(N_CLASSES, 1.0 / N_CLASSES) + skew * tilt / tilt.sum()
        probs = probs / probs.sum()
        labels = rng.choice(N_CLASSES, size=per_node, p=probs)
        noise = rng.normal(0.0, _SYNTH_NOISE, size=(per_node, N_FEATURES))
        shared = rng.normal(0.0, _SYNTH_NUISANCE, size=(per_node, len(directions)))
        feats = means[labels] + noise + shared @ directions
        shards.append(
            [
                Datapoint(features=tuple(feats[i].tolist()), label=int(labels[i]))
                for i in range(per_node)
            ]
        )
    return shards
