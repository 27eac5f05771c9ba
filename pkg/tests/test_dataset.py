import json

import numpy as np
import pytest

from mirrornet.dataset import (
    HEADER, Dataset, DatasetError, SplitSpec, generate, holdout, manifest_path, read_dataset, split, write_dataset,
)
from mirrornet.env import STATS, Action, WorldConfig, check_state_vector
from mirrornet.oracle import OracleConfig, label_batch

WORLD = WorldConfig(rough_prob=0.05, fly_prob=0.1, scroll_column=26, max_gap=2)
ORACLE = OracleConfig(refill_ceiling=20, help_min_energy=1, leap_lookahead=3)


@pytest.fixture(scope="module")
def small():
    return generate(3000, WORLD, ORACLE, seed=5, shard_rows=1000)


def test_generate_exact_count_and_valid_rows(small):
    assert len(small) == 3000
    assert not small.features[:, STATS].any()
    for row in small.features[::97]:
        check_state_vector(row)


def test_generate_rows_unique(small):
    assert len(np.unique(small.features, axis=0)) == len(small)


def test_generate_is_deterministic(tmp_path):
    a = write_dataset(generate(1000, WORLD, ORACLE, 7), tmp_path / "a.csv")
    b = write_dataset(generate(1000, WORLD, ORACLE, 7), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert manifest_path(a).read_bytes() == manifest_path(b).read_bytes()


def test_workers_do_not_change_output():
    one = generate(1500, WORLD, ORACLE, 3, shard_rows=500, workers=1)
    two = generate(1500, WORLD, ORACLE, 3, shard_rows=500, workers=2)
    assert np.array_equal(one.features, two.features)
    assert np.array_equal(one.labels, two.labels)


def test_tiny_count_tops_up():
    ds = generate(10, WORLD, ORACLE, 1)
    assert len(ds) == 10


def test_dedup_cap_tops_up_with_duplicates():
    ds = generate(200, WorldConfig(rough_prob=0.0, fly_prob=0.0, scroll_column=26, max_gap=1), ORACLE, 2,
                  shard_rows=50, max_oversample=1.0)
    assert len(ds) == 200


def test_feature_labels_match_oracle_on_zeroed_rows():
    ds = generate(500, WORLD, ORACLE, 4, label_source="features")
    assert np.array_equal(label_batch(ds.features, ORACLE), ds.labels)


def test_bad_arguments():
    with pytest.raises(DatasetError):
        generate(0, WORLD, ORACLE, 1)
    with pytest.raises(DatasetError):
        generate(5, WORLD, ORACLE, 1, label_source="oracle")


def test_csv_round_trip(small, tmp_path):
    path = write_dataset(small, tmp_path / "d.csv", {"note": "x"})
    assert path.read_text().splitlines()[0] == HEADER
    back = read_dataset(path)
    assert np.array_equal(back.features, small.features)
    assert np.array_equal(back.labels, small.labels)
    meta = json.loads(manifest_path(path).read_text())
    assert meta["rows"] == 3000 and meta["note"] == "x"
    assert meta["label_histogram"] == small.histogram().tolist()


def test_csv_slow_path(tmp_path):
    ds = Dataset(np.full((3, 100), 1, dtype=np.int8), np.array([0, 1, 2]))
    path = write_dataset(ds, tmp_path / "d.csv")
    text = path.read_text().replace("\n", " \n", 2)  # break the fixed-width layout
    path.write_text(text)
    back = read_dataset(path)
    assert np.array_equal(back.features, ds.features) and np.array_equal(back.labels, ds.labels)


def test_read_errors(tmp_path):
    with pytest.raises(DatasetError, match="missing.csv"):
        read_dataset(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(DatasetError):
        read_dataset(bad)


def test_write_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(DatasetError, match="file"):
        write_dataset(Dataset(np.ones((1, 100)), [0]), blocker / "d.csv")


def test_split_counts_and_partition(small):
    spec = SplitSpec(test_size=400, proportions={Action.HOP: 0.4, Action.JUMP: 0.4, Action.LEAP: 0.1,
                                                 Action.HELP: 0.1})
    tr, te = split(small, spec, seed=0)
    assert te.histogram().tolist() == [160, 160, 40, 40]
    assert len(tr) + len(te) == len(small)
    rows = {r.tobytes() for r in te.features}
    assert not any(r.tobytes() in rows for r in tr.features)


def test_split_quarter_proportions():
    ds = Dataset(np.ones((8, 100)), [0, 1, 2, 3, 0, 1, 2, 3])
    _, te = split(ds, SplitSpec(test_size=4, proportions={a: 0.25 for a in Action}), 1)
    assert te.histogram().tolist() == [1, 1, 1, 1]


def test_split_rounding_remainder_goes_to_hop():
    spec = SplitSpec(test_size=7, proportions={a: 0.25 for a in Action})
    assert spec.counts() == {Action.HOP: 4, Action.JUMP: 1, Action.LEAP: 1, Action.HELP: 1}


def test_split_reports_deficit():
    ds = Dataset(np.ones((4, 100)), [0, 0, 0, 1])
    with pytest.raises(DatasetError, match="short by jump=1, leap=2, help=2"):
        split(ds, SplitSpec(test_size=8, proportions={a: 0.25 for a in Action}), 0)


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(proportions={Action.HOP: 0.5})
    assert SplitSpec().counts() == {Action.HOP: 40000, Action.JUMP: 40000, Action.LEAP: 10000, Action.HELP: 10000}


def test_holdout(small):
    rest, out = holdout(small, 0.1, 3)
    assert len(out) == 300 and len(rest) == 2700


@pytest.fixture(scope="module")
def desk_pair():
    from mirrornet.cli import DESK_ORACLE, DESK_WORLD
    return (generate(20_000, DESK_WORLD, DESK_ORACLE, seed=0),
            generate(20_000, DESK_WORLD, DESK_ORACLE, seed=0, label_source="state"))


def test_desk_label_histogram_regression(desk_pair):
    ds, _ = desk_pair
    hist = ds.histogram()
    assert hist.tolist() == [14845, 1633, 2954, 568]
    assert (hist / hist.sum() >= 0.01).all()


def test_state_labels_differ_only_by_hidden_energy(desk_pair):
    feat, state = desk_pair
    assert np.array_equal(feat.features, state.features)
    diff = feat.labels != state.labels
    assert 0 < diff.mean() < 0.02
    # hidden low energy can only veto a Leap the zeroed view would allow
    assert set(feat.labels[diff].tolist()) == {Action.LEAP}
