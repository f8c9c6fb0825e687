import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmcca.dataset import (
    CenteringStats,
    DatasetError,
    LabelVector,
    MultisetDataset,
    apply_centering,
    build_indicator_dense,
    center,
    class_sums,
    is_centered,
    load_feature_table,
    load_idx,
    write_feature_table,
    write_idx,
)

from conftest import random_dataset


def test_feature_table_basic(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,1.5,2.0\n1,0.5,1.0\n")
    fm, lab = load_feature_table(p)
    assert fm.values.shape == (2, 2)
    np.testing.assert_array_equal(fm.values, [[1.5, 0.5], [2.0, 1.0]])
    np.testing.assert_array_equal(lab.labels, [0, 1])
    assert lab.n_classes == 2


def test_feature_table_header_skipped(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("label,f1,f2\n0,1.5,2.0\n1,0.5,1.0\n")
    fm, lab = load_feature_table(p)
    assert fm.values.shape == (2, 2)
    np.testing.assert_array_equal(lab.labels, [0, 1])


def test_feature_table_ragged_row_cites_line(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,1.5,2.0\n0,1.5\n1,0.5,1.0\n")
    with pytest.raises(DatasetError, match="line 2"):
        load_feature_table(p)


@pytest.mark.parametrize("body, line", [("0,1,2\n1,x,3\n", 2), ("0,1,2\n-1,1,2\n", 2), ("0,1,2\n1.5,1,2\n", 2)])
def test_feature_table_bad_cells(tmp_path, body, line):
    p = tmp_path / "t.csv"
    p.write_text(body)
    with pytest.raises(DatasetError, match=f"line {line}"):
        load_feature_table(p)


def test_feature_table_class_override(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,1\n1,2\n")
    _, lab = load_feature_table(p, n_classes=5)
    assert lab.n_classes == 5


def test_feature_table_roundtrip(tmp_path, rng):
    x = rng.standard_normal((4, 7))
    y = np.array([0, 1, 2, 0, 1, 2, 2])
    write_feature_table(tmp_path / "r.csv", x, y)
    fm, lab = load_feature_table(tmp_path / "r.csv")
    np.testing.assert_array_equal(fm.values, x)
    np.testing.assert_array_equal(lab.labels, y)


def _idx_pair(tmp_path, n_img=10, n_lab=10):
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, size=(n_img, 28, 28), dtype=np.uint8)
    labs = np.arange(n_lab) % 10
    write_idx(tmp_path / "img", tmp_path / "lab", imgs, labs)
    return imgs, labs


def test_load_idx(tmp_path):
    imgs, labs = _idx_pair(tmp_path)
    stack, lab = load_idx(tmp_path / "img", tmp_path / "lab")
    assert stack.shape == (10, 28, 28)
    assert stack.min() >= 0 and stack.max() <= 1
    np.testing.assert_allclose(stack * 255, imgs)
    assert len(lab) == 10
    np.testing.assert_array_equal(lab.labels, labs)


def test_load_idx_bad_magic(tmp_path):
    _idx_pair(tmp_path)
    raw = bytearray((tmp_path / "img").read_bytes())
    raw[3] = 0x01
    (tmp_path / "img").write_bytes(bytes(raw))
    with pytest.raises(DatasetError, match="magic"):
        load_idx(tmp_path / "img", tmp_path / "lab")


def test_load_idx_count_mismatch(tmp_path):
    _idx_pair(tmp_path, 10, 9)
    with pytest.raises(DatasetError, match="mismatch"):
        load_idx(tmp_path / "img", tmp_path / "lab")


def test_load_idx_truncated(tmp_path):
    _idx_pair(tmp_path)
    raw = (tmp_path / "img").read_bytes()
    (tmp_path / "img").write_bytes(raw[:-5])
    with pytest.raises(DatasetError, match="truncated"):
        load_idx(tmp_path / "img", tmp_path / "lab")


def _single(row, labels=None):
    row = np.atleast_2d(np.asarray(row, dtype=float))
    labels = np.zeros(row.shape[1], dtype=int) if labels is None else labels
    return MultisetDataset((row,), LabelVector(labels, 1))


def test_center_examples():
    out, stats = center(_single([1, 3]))
    np.testing.assert_array_equal(out.sets[0], [[-1, 1]])
    np.testing.assert_array_equal(stats.means[0], [2])

    out, stats = center(_single([-1, 1]))
    np.testing.assert_array_equal(out.sets[0], [[-1, 1]])
    np.testing.assert_array_equal(stats.means[0], [0])


def test_apply_centering_examples():
    stats = CenteringStats((np.array([2.0]),))
    np.testing.assert_array_equal(apply_centering(stats, _single([4])).sets[0], [[2]])

    zero = CenteringStats((np.zeros(2),))
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(apply_centering(zero, _single(x)).sets[0], x)


def test_apply_centering_set_count_mismatch(rng):
    ds = random_dataset(rng, (2, 3, 4), 6, 2)
    stats = CenteringStats((np.zeros(2), np.zeros(3)))
    with pytest.raises(DatasetError):
        apply_centering(stats, ds)


def test_center_single_sample_gives_zero():
    out, _ = center(_single([[5.0], [7.0]]))
    np.testing.assert_array_equal(out.sets[0], 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 60), scale=st.floats(1e-3, 1e6))
def test_centered_rows_sum_to_zero(seed, n, scale):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, (3, 5), n, 1)
    ds = MultisetDataset(tuple(scale * x + 10 * scale for x in ds.sets), ds.labels)
    out, _ = center(ds)
    for x in out.sets:
        assert is_centered(x)


def test_class_sums_example():
    s = class_sums(np.array([[1.0, 2.0, 3.0]]), LabelVector(np.array([0, 0, 1]), 2))
    np.testing.assert_array_equal(s, [[3, 3]])


def test_class_sums_empty_class():
    s = class_sums(np.array([[1.0, 2.0, 3.0]]), LabelVector(np.array([0, 1, 0]), 3))
    np.testing.assert_array_equal(s[:, 2], 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 50), c=st.integers(1, 6))
def test_class_sums_factorize_indicator(seed, n, c):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, n))
    y = rng.standard_normal((4, n))
    labels = LabelVector(rng.integers(0, c, size=n), c)
    a = build_indicator_dense(labels)
    dense = x @ a @ y.T
    fact = class_sums(x, labels) @ class_sums(y, labels).T
    np.testing.assert_allclose(fact, dense, rtol=1e-10, atol=1e-10 * np.abs(dense).max())


def test_class_sums_permutation_invariant(rng):
    x = rng.standard_normal((3, 20))
    labels = LabelVector(rng.integers(0, 4, size=20), 4)
    perm = rng.permutation(20)
    np.testing.assert_allclose(
        class_sums(x[:, perm], LabelVector(labels.labels[perm], 4)), class_sums(x, labels), rtol=1e-12
    )


def test_class_sums_row_total_is_zero_after_centering(rng):
    ds, _ = center(random_dataset(rng, (5,), 30, 3))
    s = class_sums(ds.sets[0], ds.labels)
    np.testing.assert_allclose(s.sum(axis=1), ds.sets[0].sum(axis=1), atol=1e-12)
    np.testing.assert_allclose(s.sum(axis=1), 0, atol=1e-12)


def test_indicator_examples():
    a = build_indicator_dense(LabelVector(np.array([0, 1, 0]), 2))
    np.testing.assert_array_equal(a, [[1, 0, 1], [0, 1, 0], [1, 0, 1]])

    a = build_indicator_dense(LabelVector(np.array([0, 0, 1]), 2))
    expected = np.zeros((3, 3))
    expected[:2, :2] = 1
    expected[2, 2] = 1
    np.testing.assert_array_equal(a, expected)


def test_indicator_rank():
    a = build_indicator_dense(LabelVector(np.array([0, 0, 1, 1, 2]), 3))
    assert np.linalg.matrix_rank(a) == 3


@settings(max_examples=40, deadline=None)
@given(labels=st.lists(st.integers(0, 7), min_size=1, max_size=40))
def test_indicator_rank_counts_present_classes(labels):
    lv = LabelVector(np.array(labels), 8)
    a = build_indicator_dense(lv)
    np.testing.assert_array_equal(a, a.T)
    rank = np.linalg.matrix_rank(a)
    assert rank == len(set(labels)) <= lv.n_classes


def test_indicator_cap():
    with pytest.raises(DatasetError):
        build_indicator_dense(LabelVector(np.zeros(11, dtype=int), 1), cap=10)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        MultisetDataset((np.ones((2, 3)), np.ones((2, 4))), LabelVector(np.zeros(3, dtype=int), 1))
    with pytest.raises(DatasetError):
        MultisetDataset((np.ones((2, 3)),), LabelVector(np.zeros(4, dtype=int), 1))
    with pytest.raises(DatasetError):
        MultisetDataset((np.array([[1.0, np.nan]]),), LabelVector(np.zeros(2, dtype=int), 1))
    with pytest.raises(DatasetError):
        LabelVector(np.array([0, 3]), 3)


def test_dataset_dims(rng):
    ds = random_dataset(rng, (2, 3, 4), 6, 2)
    assert ds.total_dim == 9
    np.testing.assert_array_equal(ds.offsets(), [0, 2, 5, 9])
