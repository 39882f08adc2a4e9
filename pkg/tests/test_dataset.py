import json
import random

import numpy as np
import pytest

from zkfl import dataset as ds
from zkfl.errors import EmptyDataError, FormatError, RangeError
from zkfl.fixedpoint import FxConfig, decode

CFG = FxConfig()


def make_segment_text(rng, rows=ds.SEGMENT_ROWS, cols=ds.SEGMENT_COLS):
    lines = []
    for _ in range(rows):
        lines.append(",".join(f"{rng.uniform(-10, 10):.4f}" for _ in range(cols)))
    return ("\n".join(lines) + "\n").encode()


# --- parsing --------------------------------------------------------------


def test_parse_well_formed():
    rng = random.Random(0)
    seg = ds.parse_segment(make_segment_text(rng), activity_id=3, subject_id=2)
    assert seg.activity_id == 3 and seg.subject_id == 2
    assert len(seg.samples) == 125
    assert all(len(row) == 45 for row in seg.samples)


def test_parse_wrong_row_count():
    rng = random.Random(0)
    with pytest.raises(FormatError):
        ds.parse_segment(make_segment_text(rng, rows=124), 1, 1)


def test_parse_non_numeric_token_position():
    rng = random.Random(0)
    text = make_segment_text(rng).decode()
    lines = text.splitlines()
    tokens = lines[41].split(",")
    tokens[6] = "oops"
    lines[41] = ",".join(tokens)
    with pytest.raises(FormatError) as err:
        ds.parse_segment("\n".join(lines).encode(), 1, 1)
    assert err.value.line == 42 and err.value.column == 7


def test_parse_wrong_column_count():
    rng = random.Random(0)
    text = make_segment_text(rng).decode().splitlines()
    text[10] = text[10] + ",1.0"
    with pytest.raises(FormatError) as err:
        ds.parse_segment("\n".join(text).encode(), 1, 1)
    assert err.value.line == 11


def test_parse_validates_ids():
    rng = random.Random(0)
    data = make_segment_text(rng)
    with pytest.raises(RangeError):
        ds.parse_segment(data, 20, 1)
    with pytest.raises(RangeError):
        ds.parse_segment(data, 1, 9)


# --- feature reduction --------------------------------------------------------


def test_reduce_features_units():
    rng = random.Random(1)
    seg = ds.parse_segment(make_segment_text(rng), 1, 1)
    unit0 = ds.reduce_features(seg, 0)
    assert len(unit0) == 125
    assert unit0[0] == seg.samples[0][0:9]
    unit4 = ds.reduce_features(seg, 4)
    assert unit4[7] == seg.samples[7][36:45]
    with pytest.raises(RangeError):
        ds.reduce_features(seg, 5)


# --- class merge ---------------------------------------------------------------


def test_merge_examples():
    assert ds.merge_classes(5) == ds.merge_classes(6)  # both stair directions
    assert ds.merge_classes(13) == ds.merge_classes(14)  # stepper / cross trainer
    table = ds.default_merge_table()
    assert sorted(table) == list(range(1, 20))
    assert set(table.values()) == set(range(6))  # surjective onto 6 classes
    with pytest.raises(RangeError):
        ds.merge_classes(0)
    with pytest.raises(RangeError):
        ds.merge_classes(20)


def test_merge_table_from_file(tmp_path):
    table = {str(a): (a - 1) % 6 for a in range(1, 20)}
    path = tmp_path / "merge.json"
    path.write_text(json.dumps({"map": table}))
    loaded = ds.load_merge_table(path)
    assert loaded[1] == 0 and loaded[7] == 0
    bad = {str(a): 0 for a in range(1, 20)}  # not surjective
    path.write_text(json.dumps({"map": bad}))
    with pytest.raises(FormatError):
        ds.load_merge_table(path)


# --- sharding -------------------------------------------------------------------


def fake_segments(rng, per_pair=1):
    segments = []
    for a in range(1, 20):
        for p in range(1, 9):
            for _ in range(per_pair):
                segments.append(ds.parse_segment(make_segment_text(rng), a, p))
    return segments


def test_shard_by_subject_partition():
    rng = random.Random(7)
    segments = fake_segments(rng)
    shards = ds.shard_by_subject(segments)
    assert len(shards) == 8
    total = sum(len(s) for s in shards)
    assert total == len(segments) * 125
    # no leakage: each shard holds exactly its subject's rows
    for i, shard in enumerate(shards):
        assert len(shard) == 19 * 125

    shuffled = list(segments)
    rng.shuffle(shuffled)
    again = ds.shard_by_subject(shuffled)
    assert again == shards  # segment file ordering is irrelevant


def test_shard_class_histograms_cover_all_classes():
    rng = random.Random(8)
    shards = ds.shard_by_subject(fake_segments(rng))
    for shard in shards:
        assert {dp.label for dp in shard} == set(range(6))


def test_load_uci_tree(tmp_path):
    rng = random.Random(9)
    for a in range(1, 20):
        for p in range(1, 9):
            d = tmp_path / f"a{a:02d}" / f"p{p}"
            d.mkdir(parents=True)
            for s in (1, 2):
                (d / f"s{s:02d}.txt").write_bytes(make_segment_text(rng))
    shards = ds.load_uci(tmp_path)
    assert len(shards) == 8
    assert all(len(s) == 19 * 2 * 125 for s in shards)
    with pytest.raises(FormatError):
        ds.load_uci(tmp_path / "nonexistent")


# --- preprocessing -----------------------------------------------------------------


def test_stats_standardize_invertible():
    rng = random.Random(10)
    points = [
        ds.Datapoint(features=tuple(rng.uniform(-100, 100) for _ in range(9)), label=0)
        for _ in range(500)
    ]
    stats = ds.compute_stats(points)
    for dp in points[:50]:
        std = ds.standardize(dp, stats)
        back = tuple(f * sd + mu for f, mu, sd in zip(std.features, stats.mean, stats.std))
        assert all(abs(a - b) <= 1e-9 * max(1.0, abs(b)) for a, b in zip(back, dp.features))
    roundtrip = ds.FeatureStats.from_json(stats.to_json())
    assert roundtrip == stats


def test_encode_points_uses_standardized_values():
    rng = random.Random(11)
    points = [
        ds.Datapoint(features=tuple(rng.uniform(-5, 5) for _ in range(9)), label=2)
        for _ in range(20)
    ]
    stats = ds.compute_stats(points)
    encoded = ds.encode_points(points, stats, CFG)
    for (features_fx, label), dp in zip(encoded, points):
        assert label == dp.label
        std = ds.standardize(dp, stats)
        for fx_val, f in zip(features_fx, std.features):
            assert abs(float(decode(fx_val, CFG)) - f) <= 1.0 / CFG.scale


def test_split_holdout_stratified_partition():
    rng = random.Random(12)
    points = [
        ds.Datapoint(features=(float(i), 0, 0, 0, 0, 0, 0, 0, 0), label=i % 6)
        for i in range(600)
    ]
    train, hold = ds.split_holdout(points, 0.2, seed=3)
    assert len(train) + len(hold) == 600
    assert len(hold) == 120
    assert {dp.label for dp in hold} == set(range(6))
    assert set(train).isdisjoint(set(hold))
    again = ds.split_holdout(points, 0.2, seed=3)
    assert again == (train, hold)


# --- batching ----------------------------------------------------------------------


def encoded_shard(n_points, seed):
    rng = random.Random(seed)
    points = [
        ds.Datapoint(features=tuple(rng.uniform(-2, 2) for _ in range(9)), label=rng.randrange(6))
        for _ in range(n_points)
    ]
    stats = ds.compute_stats(points)
    return ds.encode_points(points, stats, CFG)


def test_batches_deterministic_in_seed():
    shard = encoded_shard(50, 13)
    a = ds.make_batches(shard, 10, seed=42)
    b = ds.make_batches(shard, 10, seed=42)
    for _ in range(12):
        assert next(a) == next(b)
    c = ds.make_batches(shard, 10, seed=43)
    assert any(next(c) != next(ds.make_batches(shard, 10, seed=42)) for _ in range(3))


@pytest.mark.parametrize("batch_size", [10, 20, 30, 40])
def test_paper_batch_sizes(batch_size):
    shard = encoded_shard(45, 14)
    stream = ds.make_batches(shard, batch_size, seed=1)
    batch = next(stream)
    assert batch.size == batch_size


def test_every_point_once_per_epoch():
    shard = encoded_shard(30, 15)
    stream = ds.make_batches(shard, 7, seed=5)
    seen = []
    # 210 = lcm(30, 7); collecting that many points covers exactly 7 epochs
    for _ in range(30):
        batch = next(stream)
        seen.extend(zip(batch.inputs, batch.labels))
    counts = {}
    for item in seen:
        counts[item] = counts.get(item, 0) + 1
    per_epoch = {}
    for key, count in counts.items():
        per_epoch[count] = per_epoch.get(count, 0) + 1
    assert per_epoch == {7: 30}  # each of 30 points appeared exactly 7 times


def test_batches_empty_shard():
    with pytest.raises(EmptyDataError):
        next(ds.make_batches([], 5, seed=0))


# --- synthetic generator ----------------------------------------------------------


def test_synthesize_deterministic():
    a = ds.synthesize(4, 50, seed=9, skew=0.3)
    b = ds.synthesize(4, 50, seed=9, skew=0.3)
    assert a == b
    c = ds.synthesize(4, 50, seed=10, skew=0.3)
    assert a != c


def test_synthesize_shapes_and_labels():
    shards = ds.synthesize(3, 40, seed=1)
    assert len(shards) == 3
    for shard in shards:
        assert len(shard) == 40
        for dp in shard:
            assert len(dp.features) == 9
            assert 0 <= dp.label < 6


def test_skew_zero_shards_identically_distributed():
    shards = ds.synthesize(2, 4000, seed=21, skew=0.0)
    a = np.array([dp.features for dp in shards[0]])
    b = np.array([dp.features for dp in shards[1]])
    # two-sample mean test per feature at ~4.5 sigma
    diff = np.abs(a.mean(axis=0) - b.mean(axis=0))
    scale = np.sqrt(a.var(axis=0) / len(a) + b.var(axis=0) / len(b))
    assert np.all(diff <= 4.5 * scale)
    la = np.bincount([dp.label for dp in shards[0]], minlength=6) / len(a)
    lb = np.bincount([dp.label for dp in shards[1]], minlength=6) / len(b)
    assert np.all(np.abs(la - lb) < 0.05)


def test_central_linear_training_reaches_090():
    # reference-path sanity: the synthetic task is linearly learnable
    shards = ds.synthesize(4, 400, seed=0)
    points = [dp for shard in shards for dp in shard]
    train, hold = ds.split_holdout(points, 0.2, seed=0)
    stats = ds.compute_stats(train)
    Xtr = np.array([ds.standardize(dp, stats).features for dp in train])
    ytr = np.array([dp.label for dp in train])
    Xho = np.array([ds.standardize(dp, stats).features for dp in hold])
    yho = np.array([dp.label for dp in hold])
    W = np.zeros((9, 6))
    b = np.zeros(6)
    onehot = np.eye(6)[ytr]
    for _ in range(400):
        delta = (Xtr @ W + b - onehot) / 6
        W -= 0.5 * (Xtr.T @ delta) / len(Xtr)
        b -= 0.5 * delta.mean(axis=0)
    acc = ((Xho @ W + b).argmax(axis=1) == yho).mean()
    assert acc >= 0.90


def test_update_tx_schema_has_no_raw_data(cfg, tiny_circuit):
    # transactions carry models and proofs, never features or labels
    from zkfl.circuit import compute_witness, prove
    from zkfl.ledger import UpdateTx
    from zkfl.nn import Batch, Model, alpha_eff, model_digest
    from zkfl.fixedpoint import encode

    hp, cs, keys = tiny_circuit
    model = Model.zeros(1, 1)
    batch = Batch(inputs=((encode(0.5, cfg),),), labels=(0,))
    witness, new_model = compute_witness(cs, model, alpha_eff(hp, cfg), batch, cfg)
    proof = prove(cs, witness, keys.proving_key)
    tx = UpdateTx(
        sender="0xabc",
        local_model=new_model,
        proof=proof,
        claimed_old_model_digest=model_digest(model, cfg),
    )
    obj = tx.to_json(cfg)
    assert sorted(obj) == ["model", "old_digest", "proof", "sender"]
    assert sorted(obj["model"]) == ["biases", "m", "n", "scale_bits", "weights"]
    assert sorted(obj["proof"]) == ["backend", "payload", "public_inputs"]
    # private wires (features, labels) are not among the public inputs
    private = {w for row in cs.io["x"] for pair in row for w in pair}
    private |= {w for row in cs.io["y"] for w in row}
    assert private.isdisjoint(set(cs.public_inputs))
