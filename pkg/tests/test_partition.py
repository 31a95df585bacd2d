import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costfl.errors import ConfigError, IntegrityError, ParseError, PartitionError
from costfl.partition import (
    ClientShard,
    LabeledDataset,
    PartitionSpec,
    class_histogram,
    generate_synthetic,
    load_csv_dataset,
    partition_non_iid,
    partition_report,
    train_test_split,
)


def test_synthetic_balanced_counts():
    ds = generate_synthetic(100, 10, 8, 3.0, 42)
    assert ds.features.shape == (100, 8)
    assert np.bincount(ds.labels).tolist() == [10] * 10


def test_synthetic_remainder_distribution():
    ds = generate_synthetic(7, 3, 2, 1.0, 1)
    assert sorted(np.bincount(ds.labels, minlength=3).tolist()) == [2, 2, 3]


def test_synthetic_deterministic():
    a = generate_synthetic(50, 5, 3, 2.0, 9)
    b = generate_synthetic(50, 5, 3, 2.0, 9)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


def test_synthetic_separation_scales_means():
    near = generate_synthetic(2000, 2, 4, 0.5, 3)
    far = generate_synthetic(2000, 2, 4, 5.0, 3)

    def gap(ds):
        m0 = ds.features[ds.labels == 0].mean(axis=0)
        m1 = ds.features[ds.labels == 1].mean(axis=0)
        return np.linalg.norm(m0 - m1)

    assert gap(far) > 5 * gap(near)


@pytest.mark.parametrize(
    "args",
    [(1, 2, 2, 1.0, 0), (10, 1, 2, 1.0, 0), (10, 2, 0, 1.0, 0), (10, 2, 2, 0.0, 0)],
)
def test_synthetic_rejects_bad_dimensions(args):
    with pytest.raises(ConfigError):
        generate_synthetic(*args)


def test_load_csv_two_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0.0,0.0,0\n1.0,1.0,1\n")
    ds = load_csv_dataset(p)
    assert len(ds) == 2 and ds.num_classes == 2 and ds.feature_dim == 2


def test_load_csv_reports_bad_line(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0.0,0.0,0\n1.0,abc,1\n")
    with pytest.raises(ParseError) as err:
        load_csv_dataset(p)
    assert err.value.line == 2


def test_load_csv_remaps_labels(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("f1,label\n0.5,3\n0.1,5\n0.7,3\n")
    ds = load_csv_dataset(p, header=True)
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.label_mapping == {3: 0, 5: 1}


def _dataset(n=600, L=4, seed=0):
    return generate_synthetic(n, L, 3, 1.0, seed)


def test_knob_one_gives_single_class_shards():
    ds = _dataset(1000, 5)
    shards = partition_non_iid(ds, PartitionSpec(10, 1.0, seed=3))
    for s in shards:
        assert np.count_nonzero(class_histogram(s, ds)) == 1


def test_knob_one_needs_enough_clients():
    with pytest.raises(ConfigError):
        partition_non_iid(_dataset(100, 4), PartitionSpec(3, 1.0, 0))


def test_empty_shard_is_an_error_by_default():
    ds = _dataset(8, 2)
    with pytest.raises(PartitionError):
        partition_non_iid(ds, PartitionSpec(50, 0.0, 0))
    shards = partition_non_iid(ds, PartitionSpec(50, 0.0, 0, allow_empty=True))
    assert sum(s.size for s in shards) == 8


def test_knob_zero_close_to_global_distribution():
    ds = generate_synthetic(10_000, 10, 2, 1.0, 0)
    glob = np.bincount(ds.labels) / len(ds)
    tvs = []
    for seed in range(20):
        for s in partition_non_iid(ds, PartitionSpec(10, 0.0, seed)):
            h = class_histogram(s, ds)
            tvs.append(0.5 * np.abs(h / h.sum() - glob).sum())
    assert np.mean(tvs) < 0.05


def test_half_knob_same_group_fraction():
    # analytic: 0.5 routed directly + 0.5 * 0.5 by the uniform route = 0.75
    ds = generate_synthetic(2000, 2, 2, 1.0, 0)
    fracs = []
    for seed in range(50):
        for s in partition_non_iid(ds, PartitionSpec(2, 0.5, seed)):
            h = class_histogram(s, ds)
            fracs.append(h[s.client_id % 2] / h.sum())
    assert abs(np.mean(fracs) - 0.75) <= 0.05


def test_knob_monotone_in_max_class_fraction():
    ds = generate_synthetic(2000, 5, 2, 1.0, 1)
    means = []
    for knob in (0.0, 0.5, 0.9, 1.0):
        vals = []
        for seed in range(20):
            for s in partition_non_iid(ds, PartitionSpec(10, knob, seed)):
                h = class_histogram(s, ds)
                vals.append(h.max() / h.sum())
        means.append(np.mean(vals))
    assert all(a <= b for a, b in zip(means, means[1:]))


@settings(max_examples=40, deadline=None)
@given(
    n_clients=st.integers(1, 12),
    knob=st.floats(0.0, 0.99),
    seed=st.integers(0, 2**31),
)
def test_partition_is_complete_disjoint_and_deterministic(n_clients, knob, seed):
    ds = _dataset(300, 3, seed=1)
    spec = PartitionSpec(n_clients, knob, seed, allow_empty=True)
    shards = partition_non_iid(ds, spec)
    allidx = np.concatenate([s.sample_indices for s in shards])
    assert sorted(allidx.tolist()) == list(range(len(ds)))
    again = partition_non_iid(ds, spec)
    assert all(np.array_equal(a.sample_indices, b.sample_indices) for a, b in zip(shards, again))


def test_class_histogram_cases():
    ds = LabeledDataset(np.zeros((4, 1)), np.array([0, 0, 0, 1]), 2)
    assert class_histogram(ClientShard(0, np.array([0, 1, 2])), ds).tolist() == [3, 0]
    assert class_histogram(ClientShard(1, np.array([], dtype=int)), ds).tolist() == [0, 0]
    with pytest.raises(IntegrityError):
        class_histogram(ClientShard(2, np.array([7])), ds)


def test_partition_report_round_trips_json():
    ds = _dataset(200, 4)
    spec = PartitionSpec(4, 0.5, 1)
    shards = partition_non_iid(ds, spec)
    report = json.loads(json.dumps(partition_report(shards, ds, spec)))
    assert [c["size"] for c in report["clients"]] == [s.size for s in shards]
    assert sum(sum(c["class_histogram"]) for c in report["clients"]) == 200


def test_train_test_split_is_disjoint():
    ds = _dataset(500, 4)
    tr, te = train_test_split(ds, 0.2, 5)
    assert len(tr) + len(te) == 500 and len(te) == 100
    rows = {tuple(r) for r in tr.features}
    assert not any(tuple(r) in rows for r in te.features)
