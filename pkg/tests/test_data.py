import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costlyfeat import data
from costlyfeat.errors import ParseError, ValidationError

from conftest import make_dataset


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_reindexes_labels_by_first_appearance(tmp_path):
    ds = data.load_csv(write(tmp_path, "x1,x2,label\n1,2,a\n3,4,b\n5,6,a\n"))
    assert (ds.n, ds.p, ds.class_count) == (3, 2, 2)
    assert ds.y.tolist() == [0, 1, 0]
    assert ds.class_names == ("a", "b")
    assert ds.feature_names == ("x1", "x2")
    np.testing.assert_array_equal(ds.costs, [1.0, 1.0])


def test_load_csv_empty_cell_is_missing(tmp_path):
    ds = data.load_csv(write(tmp_path, "x1,x2,label\n1,2,a\n,4,b\n5,6,a\n"))
    assert not ds.present[1, 0]
    assert ds.present.sum() == 5
    assert ds.X[1, 0] == 0.0


def test_load_csv_named_label_column(tmp_path):
    ds = data.load_csv(write(tmp_path, "cls,x1\nu,1\nv,2\n"), label_column="cls")
    assert ds.feature_names == ("x1",)
    assert ds.y.tolist() == [0, 1]


def test_load_csv_cost_row(tmp_path):
    ds = data.load_csv(write(tmp_path, "x1,x2,label\n#costs,0.3,0.9\n1,2,a\n3,4,b\n"))
    np.testing.assert_array_equal(ds.costs, [0.3, 0.9])
    assert ds.n == 2


def test_load_csv_wine_shape(tmp_path):
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    wine = sklearn_datasets.load_wine()
    lines = [",".join(list(wine.feature_names) + ["class"])]
    for row, label in zip(wine.data, wine.target):
        lines.append(",".join(repr(float(v)) for v in row) + f",c{label}")
    ds = data.load_csv(write(tmp_path, "\n".join(lines) + "\n"))
    assert ds.shape == (13, 3)
    assert ds.n == 178


@pytest.mark.parametrize("text, line", [
    ("x1,x2,label\n1,2,a\n3,b\n", 3),
    ("x1,x2,label\n1,2,a\n3,abc,b\n", 3),
    ("x1,x2,label\n1,2,a\n3,4,a\n5,6,a,7\n", 4),
])
def test_load_csv_parse_errors_carry_line(tmp_path, text, line):
    with pytest.raises(ParseError) as exc:
        data.load_csv(write(tmp_path, text))
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_load_csv_single_class_rejected(tmp_path):
    with pytest.raises(ValidationError):
        data.load_csv(write(tmp_path, "x,label\n1,a\n2,a\n"))


def test_save_load_roundtrip(tmp_path, tiny_ds):
    path = tmp_path / "out.csv"
    data.save_csv(tiny_ds, path)
    back = data.load_csv(path)
    np.testing.assert_array_equal(back.X, tiny_ds.X)
    np.testing.assert_array_equal(back.costs, tiny_ds.costs)
    assert back.feature_names == tiny_ds.feature_names


def test_assign_random_costs():
    np.testing.assert_array_equal(data.assign_random_costs(5, 1, 1, seed=9), np.ones(5))
    np.testing.assert_array_equal(data.assign_random_costs(13, 0.1, 1, seed=7),
                                  data.assign_random_costs(13, 0.1, 1, seed=7))
    big = data.assign_random_costs(1000, 0.1, 1, seed=3)
    assert 0.52 <= big.mean() <= 0.58
    with pytest.raises(ValidationError):
        data.assign_random_costs(3, 0.0, 1.0)


@given(p=st.integers(1, 50), lo=st.floats(0.01, 5), width=st.floats(0, 5), seed=st.integers(0, 2**31))
def test_random_costs_within_bounds(p, lo, width, seed):
    c = data.assign_random_costs(p, lo, lo + width, seed)
    assert np.all(c >= lo) and np.all(c <= lo + width)


def test_normalize_z_score_and_constant_column():
    tr = make_dataset([[1, 5], [2, 5], [3, 5]], [0, 1, 0])
    (trn, _, stats) = data.normalize(tr, [])
    np.testing.assert_allclose(trn.X[:, 0], [-1.2247, 0, 1.2247], atol=1e-4)
    np.testing.assert_array_equal(trn.X[:, 1], [0, 0, 0])
    assert stats.std[1] == 0


def test_normalize_uses_present_cells_only_and_keeps_mask():
    present = np.array([[True], [True], [True], [False]])
    tr = make_dataset([[1], [2], [3], [100]], [0, 1, 0, 1], present=present)
    other = make_dataset([[2], [4]], [0, 1], present=np.array([[True], [False]]))
    trn, (on,), stats = data.normalize(tr, [other])
    assert stats.mean[0] == pytest.approx(2.0)
    assert not trn.present[3, 0] and trn.X[3, 0] == 0
    assert on.X[0, 0] == pytest.approx(0.0)
    assert not on.present[1, 0]


def test_normalize_idempotent():
    rng = np.random.default_rng(4)
    tr = make_dataset(rng.normal(3, 2, size=(40, 3)), rng.integers(0, 2, 40))
    once, _, _ = data.normalize(tr, [])
    twice, _, _ = data.normalize(once, [])
    np.testing.assert_allclose(twice.X, once.X, atol=1e-9)


def test_split_sizes_and_determinism():
    spec = data.SplitSpec(0.6, 0.2, 0.2, seed=1)
    a = data.split_indices(10, spec)
    b = data.split_indices(10, spec)
    assert tuple(len(i) for i in a) == (6, 2, 2)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


@pytest.mark.parametrize("fracs", [(0.5, 0.5, 0.5), (0.0, 0.5, 0.5), (1.2, -0.1, -0.1)])
def test_split_spec_validation(fracs):
    with pytest.raises(ValidationError):
        data.SplitSpec(*fracs)


def test_split_empty_partition_rejected():
    with pytest.raises(ValidationError):
        data.split_indices(3, data.SplitSpec(0.6, 0.2, 0.2))


@settings(max_examples=50)
@given(n=st.integers(10, 400), tv=st.floats(0.1, 0.3), seed=st.integers(0, 1000))
def test_split_is_partition(n, tv, seed):
    parts = data.split_indices(n, data.SplitSpec(1 - 2 * tv, tv, tv, seed))
    allidx = np.concatenate(parts)
    assert sorted(allidx.tolist()) == list(range(n))
    assert all(len(p) > 0 for p in parts)


def test_make_unbalanced_hand_example():
    X = np.arange(200, dtype=float)[:, None]
    ds = make_dataset(X, [0] * 100 + [1] * 100)
    out = data.make_unbalanced(ds, 1, 0.2, seed=0)
    assert out.class_counts().tolist() == [100, 25]
    # majority rows untouched, survivors in original order
    np.testing.assert_array_equal(out.X[:100, 0], np.arange(100))
    assert np.all(np.diff(out.X[:, 0]) > 0)
    again = data.make_unbalanced(ds, 1, 0.2, seed=0)
    np.testing.assert_array_equal(out.X, again.X)


def test_make_unbalanced_boundary_and_errors():
    ds = make_dataset(np.zeros((200, 1)), [0] * 100 + [1] * 100)
    out = data.make_unbalanced(ds, 1, 0.5 - 1e-6, seed=0)
    assert ds.n - out.n <= 1
    with pytest.raises(ValidationError):
        data.make_unbalanced(ds, 1, 0.6)


@pytest.mark.parametrize("target", [0.2, 0.15, 0.1])
def test_make_unbalanced_table_settings(target):
    ds = make_dataset(np.zeros((400, 1)), [0] * 200 + [1] * 200)
    out = data.make_unbalanced(ds, 1, target, seed=5)
    m = out.class_counts()[1]
    assert abs(m - target * out.n) <= 1


def test_mask_random_cells_fraction():
    ds = make_dataset(np.ones((100, 10)), [0, 1] * 50)
    out = data.mask_random_cells(ds, 0.05, seed=2)
    assert (~out.present).sum() == 50


def test_dataset_invariants():
    with pytest.raises(ValidationError):
        make_dataset([[1.0]], [0], costs=np.array([0.0]), K=2)
    with pytest.raises(ValidationError):
        make_dataset([[1.0]], [2], K=2)
    ds = make_dataset([[1.0], [2.0]], [0, 1])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 3.0
