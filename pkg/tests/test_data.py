from pathlib import Path

import numpy as np
import pytest

from proxlearn.data import (SplitSpec, dataset_hash, gen_sinusoid, load_semeion, load_tabular,
                            load_wdbc, split, split_indices)
from proxlearn.errors import ConfigError, DataError

DATA = Path(__file__).resolve().parents[1] / "data"

# frozen from a first generation with numpy's PCG64; guards against silent changes
SINUSOID_HASH = "8a00091a024a0e6e853dacf5147bd1e9b7dc94736f154b5f5e56664cc333c9a4"


def needs(name):
    return pytest.mark.skipif(not (DATA / name).exists(), reason=f"data/{name} not present")


@needs("wdbc.data")
def test_wdbc_shape_labels_and_scaling():
    ds = load_wdbc(DATA / "wdbc.data")
    assert ds.X.shape == (569, 30)
    assert set(np.unique(ds.y)) == {-1, 1}
    np.testing.assert_allclose(ds.X.min(axis=0), -1.0, atol=1e-15)
    np.testing.assert_allclose(ds.X.max(axis=0), 1.0, atol=1e-15)
    raw = np.loadtxt(DATA / "wdbc.data", delimiter=",", usecols=range(2, 32))
    np.testing.assert_allclose(ds.raw_features(), raw, rtol=1e-12, atol=1e-12)


def test_wdbc_benign_is_negative(tmp_path):
    row_m = "1,M," + ",".join(["1.0"] * 30)
    row_b = "2,B," + ",".join(["2.0"] * 30)
    f = tmp_path / "w.data"
    f.write_text(row_m + "\n" + row_b + "\n")
    assert list(load_wdbc(f).y) == [1, -1]


@pytest.mark.parametrize("row", ["1,X," + ",".join(["1"] * 30), "1,M," + ",".join(["1"] * 29)])
def test_wdbc_bad_rows(tmp_path, row):
    f = tmp_path / "w.data"
    f.write_text(row + "\n")
    with pytest.raises(DataError):
        load_wdbc(f)


def semeion_row(pixels, digit):
    onehot = [0] * 10
    onehot[digit] = 1
    return " ".join(f"{p}.0000" for p in pixels) + " " + " ".join(str(v) for v in onehot)


def test_semeion_mapping(tmp_path):
    rng = np.random.default_rng(0)
    pix = rng.integers(0, 2, (3, 256))
    f = tmp_path / "s.data"
    f.write_text("\n".join(semeion_row(p, d) for p, d in zip(pix, [3, 0, 9])) + "\n")
    ds = load_semeion(f)
    assert ds.X.shape == (3, 256)
    np.testing.assert_array_equal(ds.X, 2 * pix - 1)
    assert list(ds.y) == [3, 0, 9]


def test_semeion_two_hot_rejected(tmp_path):
    line = " ".join(["1"] * 256) + " 1 1 0 0 0 0 0 0 0 0"
    f = tmp_path / "s.data"
    f.write_text(line + "\n")
    with pytest.raises(DataError, match="one-hot"):
        load_semeion(f)


@needs("semeion.data")
def test_semeion_full_file():
    assert load_semeion(DATA / "semeion.data").X.shape == (1593, 256)


@pytest.mark.parametrize(
    "name, fname, rows, n_x, lo, hi",
    [
        ("banana", "banana.csv", 5300, 2, 0.0, 8.0),
        ("diabetes", "diabetes.csv", 768, 8, 0.0, 1.0),
    ],
)
def test_tabular_minmax(name, fname, rows, n_x, lo, hi):
    if not (DATA / fname).exists():
        pytest.skip(f"data/{fname} not present")
    ds = load_tabular(DATA / fname, name)
    assert ds.X.shape == (rows, n_x)
    np.testing.assert_allclose(ds.X.min(axis=0), lo, atol=1e-12)
    np.testing.assert_allclose(ds.X.max(axis=0), hi, atol=1e-12)
    assert set(np.unique(ds.y)) == {-1, 1}
    assert list(ds.display_labels([-1, 1])) == [0, 1]


@needs("twonorm.csv")
def test_twonorm_factor():
    ds = load_tabular(DATA / "twonorm.csv", "twonorm")
    assert ds.X.shape == (7400, 20)
    raw = np.loadtxt(DATA / "twonorm.csv", delimiter=",", usecols=range(20))
    np.testing.assert_allclose(ds.X, 8 * raw, rtol=1e-15)
    np.testing.assert_allclose(ds.raw_features(), raw, rtol=1e-12)


def test_tabular_schema_mismatch(tmp_path):
    f = tmp_path / "b.csv"
    f.write_text("1.0,2.0,3.0,1\n")
    with pytest.raises(DataError):
        load_tabular(f, "banana")
    with pytest.raises(ConfigError):
        load_tabular(f, "iris")


def test_loaders_are_idempotent(tmp_path):
    f = tmp_path / "b.csv"
    f.write_text("0.5,1.0,1\n-2.0,3.0,-1\n1.5,-1.0,1\n")
    a, b = load_tabular(f, "banana"), load_tabular(f, "banana")
    np.testing.assert_array_equal(a.X, b.X)
    assert a.checksum == b.checksum


@pytest.mark.parametrize(
    "n, spec, n_train",
    [
        (569, SplitSpec("fraction", 0.7), 398),
        (1593, SplitSpec("head_count", n_train=1000, shuffle=False), 1000),
        (5300, SplitSpec("fraction", 0.5), 2650),
    ],
)
def test_split_sizes_and_partition(n, spec, n_train):
    tr, te = split_indices(n, spec)
    assert len(tr) == n_train and len(te) == n - n_train
    assert set(tr).isdisjoint(te) and set(tr) | set(te) == set(range(n))


def test_head_count_takes_first_rows():
    tr, te = split_indices(1593, SplitSpec("head_count", n_train=1000, shuffle=False))
    np.testing.assert_array_equal(tr, np.arange(1000))
    np.testing.assert_array_equal(te, np.arange(1000, 1593))


def test_split_deterministic_and_subsets_data():
    ds = gen_sinusoid(50, seed=2)
    a_tr, a_te = split(ds, SplitSpec("fraction", 0.6, seed=9))
    b_tr, _ = split(ds, SplitSpec("fraction", 0.6, seed=9))
    np.testing.assert_array_equal(a_tr.X, b_tr.X)
    assert len(a_tr) == 30 and len(a_te) == 20


@pytest.mark.parametrize("kwargs", [{"train_frac": 1.0}, {"mode": "head_count"}, {"mode": "random"}])
def test_bad_split_specs(kwargs):
    with pytest.raises(ConfigError):
        SplitSpec(**kwargs)


def test_degenerate_split():
    with pytest.raises(ConfigError):
        split_indices(3, SplitSpec("head_count", n_train=3))


def test_sinusoid_values():
    ds = gen_sinusoid(100)
    np.testing.assert_allclose(ds.y, np.sin(ds.X[:, 0]), rtol=0, atol=0)
    assert np.all(np.abs(ds.X) <= np.pi)
    assert np.sin(0.0) == 0.0 and np.sin(np.pi / 2) == 1.0


def test_sinusoid_hash_is_stable():
    assert dataset_hash(gen_sinusoid(100, seed=0)) == SINUSOID_HASH
    assert dataset_hash(gen_sinusoid(100, seed=0)) != dataset_hash(gen_sinusoid(100, seed=1))


@pytest.mark.parametrize("n, rng_", [(1, (-1, 1)), (10, (1.0, 1.0))])
def test_sinusoid_bad_args(n, rng_):
    with pytest.raises(ConfigError):
        gen_sinusoid(n, rng_)
