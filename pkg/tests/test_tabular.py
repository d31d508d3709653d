import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tagscope.audio_io import write_wav
from tagscope.errors import ClassTooSmall, DataError, DuplicateTrackId, EmptyGenreDir, MalformedRow
from tagscope.tabular import (
    FEATURE_GROUPS,
    FEATURE_NAMES,
    LabelMatrix,
    StandardScaler,
    assemble,
    fit_scaler,
    load_gtzan,
    load_jamendo,
    read_labels,
    read_store,
    split,
    transform,
    write_labels,
    write_store,
)


def test_assemble_layout():
    v = assemble(np.zeros(32), np.full(7, 0.5), np.arange(23.0), "t1", missing_chords=True)
    assert v.values.shape == (62,) and len(FEATURE_NAMES) == 62
    assert np.all(v.values[:32] == 0)
    assert np.all(v.values[32:39] == 0.5)
    np.testing.assert_array_equal(v.values[39:], np.arange(23.0))
    assert FEATURE_GROUPS.count("harmonic") == 32 and FEATURE_GROUPS.count("midlevel") == 7
    assert FEATURE_GROUPS.count("signal") == 23


def test_assemble_rejects_bad_blocks():
    with pytest.raises(DataError):
        assemble(np.zeros(31), np.zeros(7), np.zeros(23), "t")
    with pytest.raises(DataError):
        assemble(np.zeros(32), np.zeros(7), np.r_[np.zeros(22), np.nan], "t")


# scaler


def test_scaler_two_values():
    s = StandardScaler.fit([[1.0], [3.0]])
    np.testing.assert_array_equal(s.transform([[1.0], [3.0]])[:, 0], [-1.0, 1.0])


def test_scaler_constant_column_maps_to_zero():
    s = StandardScaler.fit([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    assert np.all(s.transform([[5.0, 2.0]])[:, 0] == 0.0)


def test_scaler_uses_train_statistics():
    s = fit_scaler(np.array([[0.0], [2.0]]))
    assert transform(s, np.array([[2.0]]))[0, 0] == 1.0


def test_scaler_on_feature_vectors():
    vs = [assemble(np.zeros(32), np.zeros(7), np.full(23, float(i)), f"t{i}") for i in range(3)]
    s = fit_scaler(vs)
    out = transform(s, vs[2])
    assert out.track_id == "t2" and out.values[-1] == pytest.approx(np.sqrt(1.5))


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 5)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_scaled_train_has_zero_mean_unit_std(X):
    Z = StandardScaler.fit(X).transform(X)
    assert np.all(np.isfinite(Z))
    for j in range(X.shape[1]):
        if np.ptp(X[:, j]) == 0:
            assert np.all(Z[:, j] == 0)
        elif X[:, j].std() > 1e-6 * max(1.0, np.abs(X[:, j]).max()):
            assert abs(Z[:, j].mean()) < 1e-6
            assert Z[:, j].std() == pytest.approx(1.0, abs=1e-6)


# store


def test_store_round_trip_is_lossless(tmp_path):
    rng = np.random.default_rng(0)
    vs = [assemble(rng.random(32), rng.random(7), rng.normal(size=23) * 1e3, f"t{i:02d}") for i in (3, 1, 2)]
    p = tmp_path / "f.csv"
    write_store(p, vs, config={"a": 1})
    store = read_store(p)
    assert store.track_ids == ["t01", "t02", "t03"]
    by_id = {v.track_id: v.values for v in vs}
    for tid, row in zip(store.track_ids, store.X):
        assert np.array_equal(row, by_id[tid])
    assert store.names == FEATURE_NAMES and store.groups == list(FEATURE_GROUPS)
    assert store.manifest["config"] == {"a": 1} and store.manifest["n_tracks"] == 3
    assert store.group_mask(["midlevel"]).sum() == 7


def test_store_rejects_duplicates_and_bad_rows(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("track_id,a\nx,1\nx,2\n")
    with pytest.raises(DuplicateTrackId):
        read_store(p)
    p.write_text("track_id,spectral_centroid\nx,1\ny\n")
    with pytest.raises(MalformedRow) as err:
        read_store(p)
    assert err.value.line == 3


def test_labels_round_trip(tmp_path):
    lab = LabelMatrix(["a", "b"], ["x", "y", "z"], [[1, 0, 1], [0, 0, 0]], "multilabel")
    write_labels(tmp_path / "l.csv", lab)
    back = read_labels(tmp_path / "l.csv")
    assert back.task_kind == "multilabel" and back.tag_names == ["x", "y", "z"]
    np.testing.assert_array_equal(back.Y, lab.Y)


# loaders


def test_load_gtzan(tmp_path):
    for g in ("blues", "rock"):
        (tmp_path / g).mkdir()
        for i in range(3):
            write_wav(tmp_path / g / f"{g}.0000{i}.wav", np.zeros(100), 22050)
    tracks, labels = load_gtzan(tmp_path)
    assert len(tracks) == 6 and labels.tag_names == ["blues", "rock"]
    assert labels.task_kind == "multiclass"
    np.testing.assert_array_equal(labels.Y.sum(axis=0), [3, 3])
    assert tracks[0][0] == "blues.00000"


def test_load_gtzan_errors(tmp_path):
    with pytest.raises(EmptyGenreDir):
        load_gtzan(tmp_path)
    (tmp_path / "jazz").mkdir()
    with pytest.raises(EmptyGenreDir):
        load_gtzan(tmp_path)
    (tmp_path / "pop").mkdir()
    write_wav(tmp_path / "jazz" / "same.wav", np.zeros(10), 22050)
    write_wav(tmp_path / "pop" / "same.wav", np.zeros(10), 22050)
    with pytest.raises(DuplicateTrackId):
        load_gtzan(tmp_path)


def test_load_jamendo(tmp_path):
    p = tmp_path / "tags.tsv"
    p.write_text("TRACK_ID\tARTIST_ID\tALBUM_ID\tPATH\tDURATION\tTAGS\n"
                 "track_1\ta\tb\t00/1.mp3\t10.0\tgenre---rock\n"
                 "track_2\ta\tb\t00/2.mp3\t10.0\tgenre---rock\tmood---happy\n"
                 "track_3\ta\tb\t00/3.mp3\t10.0\n")
    tracks, labels = load_jamendo(p)
    assert labels.tag_names == ["genre---rock", "mood---happy"]
    np.testing.assert_array_equal(labels.Y.sum(axis=1), [1, 2, 0])
    assert tracks[1] == ("track_2", "00/2.mp3")
    assert read_labels(p).Y.tolist() == labels.Y.tolist()


def test_load_jamendo_malformed_line(tmp_path):
    p = tmp_path / "tags.tsv"
    p.write_text("t1\ta.mp3\trock\nt2\n")
    with pytest.raises(MalformedRow) as err:
        load_jamendo(p)
    assert err.value.line == 2


# splits


def ten_classes():
    ids = [f"t{i:03d}" for i in range(100)]
    Y = np.zeros((100, 10), dtype=int)
    Y[np.arange(100), np.arange(100) % 10] = 1
    return ids, LabelMatrix(ids, [f"c{k}" for k in range(10)], Y, "multiclass")


def test_stratified_multiclass_split():
    ids, labels = ten_classes()
    s = split(ids, labels, (0.8, 0.1, 0.1), seed=7)
    for part, want in (("train", 8), ("validation", 1), ("test", 1)):
        np.testing.assert_array_equal(labels.rows(s.part(part)).sum(axis=0), np.full(10, want))


def test_split_determinism_and_seed_sensitivity():
    ids, labels = ten_classes()
    assert split(ids, labels, seed=7) == split(ids, labels, seed=7)
    assert split(ids, labels, seed=7).test != split(ids, labels, seed=8).test


def test_class_too_small():
    ids = ["a", "b", "c", "d"]
    labels = LabelMatrix(ids, ["x", "y"], [[1, 0], [1, 0], [1, 0], [0, 1]], "multiclass")
    with pytest.raises(ClassTooSmall):
        split(ids, labels)


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 120), st.integers(1, 6), st.integers(0, 1000))
def test_multilabel_split_partitions_ids(n, k, seed):
    rng = np.random.default_rng(seed)
    ids = [f"r{i}" for i in range(n)]
    labels = LabelMatrix(ids, [f"t{j}" for j in range(k)], rng.random((n, k)) < 0.3, "multilabel")
    s = split(ids, labels, seed=seed)
    parts = [set(s.train), set(s.validation), set(s.test)]
    assert sum(len(p) for p in parts) == n
    assert set.union(*parts) == set(ids)
    assert len(s.train) == pytest.approx(0.8 * n, abs=max(2, 0.05 * n))
    # every tag with at least ten positives has one in train
    Y = labels.rows(s.train)
    for j in range(k):
        if labels.Y[:, j].sum() >= 10:
            assert Y[:, j].sum() > 0
