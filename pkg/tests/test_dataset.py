import numpy as np
import pytest

from hnswlab.dataset import Dataset


class TestDataset:
    def test_basic_shape_and_ids(self, rng):
        X = Dataset(rng.standard_normal((10, 3)))
        assert len(X) == 10
        assert X.dim == 3
        assert np.array_equal(X.ids, np.arange(10))

    def test_custom_ids_and_lookup(self, rng):
        vecs = rng.standard_normal((4, 2))
        X = Dataset(vecs, ids=np.array([10, 20, 30, 40]))
        assert X.row_of(30) == 2
        assert np.array_equal(X.vector(10), vecs[0])
        with pytest.raises(KeyError):
            X.row_of(99)

    def test_rejects_nan_and_empty(self):
        with pytest.raises(ValueError, match="NaN"):
            Dataset(np.array([[np.nan, 1.0]]))
        with pytest.raises(ValueError, match="non-empty"):
            Dataset(np.empty((0, 3)))

    def test_rejects_duplicate_ids(self, rng):
        with pytest.raises(ValueError, match="unique"):
            Dataset(rng.standard_normal((3, 2)), ids=np.array([1, 1, 2]))

    def test_content_hash_stable_and_sensitive(self, rng):
        vecs = rng.standard_normal((6, 4))
        a = Dataset(vecs.copy())
        b = Dataset(vecs.copy())
        assert a.content_hash() == b.content_hash()
        vecs2 = vecs.copy()
        vecs2[0, 0] += 1e-9
        assert Dataset(vecs2).content_hash() != a.content_hash()

    def test_hash_depends_on_ids(self, rng):
        vecs = rng.standard_normal((3, 2))
        a = Dataset(vecs, ids=np.array([0, 1, 2]))
        b = Dataset(vecs, ids=np.array([0, 1, 5]))
        assert a.content_hash() != b.content_hash()
