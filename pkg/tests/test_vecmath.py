import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hnswlab.errors import RankDeficiencyError
from hnswlab.vecmath import Metric, distance, dot, gram_schmidt


class TestDot:
    def test_orthogonal(self):
        assert dot([1, 0], [0, 1]) == 0.0

    def test_self_dot_is_squared_norm(self):
        assert dot([2, 3], [2, 3]) == 13.0

    def test_hand_sum(self):
        assert dot([1, 2, 3], [4, 5, 6]) == 32.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            dot([1, 2], [1, 2, 3])

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            dot([np.nan, 0], [1, 2])

    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=16),
        st.floats(-100, 100),
    )
    @settings(max_examples=50, deadline=None)
    def test_bilinear_in_scale(self, values, alpha):
        a = np.asarray(values)
        b = np.linspace(1, 2, a.size)
        lhs = dot(alpha * a, b)
        rhs = alpha * dot(a, b)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


class TestDistance:
    def test_l2_hand(self):
        assert distance([0, 0], [3, 4], Metric.L2) == 5.0

    def test_cosine_parallel(self):
        assert distance([1, 0], [2, 0], Metric.COSINE) == 0.0

    def test_cosine_orthogonal(self):
        assert distance([1, 0], [0, 5], Metric.COSINE) == 1.0

    def test_cosine_zero_vector_errors(self):
        with pytest.raises(ValueError, match="zero"):
            distance([0, 0], [1, 0], Metric.COSINE)

    def test_inner_product_is_negated_dot(self):
        assert distance([1, 2], [3, 4], Metric.INNER_PRODUCT) == -11.0

    def test_symmetry(self, rng):
        for _ in range(50):
            a, b = rng.standard_normal((2, 8))
            for m in (Metric.L2, Metric.COSINE):
                assert distance(a, b, m) == distance(b, a, m)

    def test_l2_triangle_inequality(self, rng):
        for _ in range(200):
            a, b, c = rng.standard_normal((3, 6))
            ab = distance(a, b)
            bc = distance(b, c)
            ac = distance(a, c)
            assert ac <= ab + bc + 1e-9


class TestGramSchmidt:
    def test_identity_rows_unchanged(self):
        V = np.eye(3)
        assert np.allclose(gram_schmidt(V), V)

    def test_hand_case(self):
        U = gram_schmidt(np.array([[3.0, 0.0], [1.0, 1.0]]))
        assert np.allclose(U, np.eye(2))

    def test_random_rows_orthonormal(self, rng):
        V = rng.standard_normal((5, 8))
        U = gram_schmidt(V)
        assert np.abs(U @ U.T - np.eye(5)).max() <= 1e-6

    def test_orthonormality_many_seeds(self):
        for seed in range(100):
            g = np.random.default_rng(seed)
            k, d = int(g.integers(1, 9)), int(g.integers(9, 33))
            U = gram_schmidt(g.standard_normal((k, d)))
            assert np.abs(U @ U.T - np.eye(k)).max() <= 1e-6, f"seed {seed}"

    def test_span_preserved(self, rng):
        V = rng.standard_normal((4, 10))
        U = gram_schmidt(V)
        # every original row lies in span(U): projecting onto U loses nothing
        residual = V - (V @ U.T) @ U
        assert np.abs(residual).max() < 1e-9 * np.abs(V).max()

    def test_rank_deficiency_names_row(self):
        V = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
        with pytest.raises(RankDeficiencyError) as exc:
            gram_schmidt(V)
        assert exc.value.row == 2
        assert "row 2" in str(exc.value)

    def test_more_rows_than_dims_rejected(self):
        with pytest.raises(ValueError, match="orthonormalize"):
            gram_schmidt(np.ones((3, 2)))
