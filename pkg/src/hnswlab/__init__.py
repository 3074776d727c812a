"""hnswlab: an instrumented HNSW laboratory.

From-scratch HNSW with graph instrumentation, synthetic datasets of
controlled intrinsic dimensionality, PCA and pointwise-LID estimators, an
exact-KNN oracle, and an experiment runner measuring how insertion order
moves recall and NDCG.
"""

from .dataset import Dataset
from .dimest import LidProfile, PcaReport, lid_mle, lid_profile, pca_intrinsic_dim
from .errors import DataError, InvariantError, RankDeficiencyError
from .hnsw import GraphStats, HnswIndex, HnswParams, NeighborSelect, SearchStats, build, new_index
from .knn import SearchResult, exact_search, exact_search_batch
from .metrics import mean_recall, ndcg_at_k, pearson, rank_change, recall_at_k
from .orders import OrderPlan, OrderStrategy, order_by_category, order_by_lid, order_random
from .synth import SynthSpec, generate_basis, generate_dataset, generate_query_set
from .vecmath import Metric, distance, dot, gram_schmidt

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DataError",
    "GraphStats",
    "HnswIndex",
    "HnswParams",
    "InvariantError",
    "LidProfile",
    "Metric",
    "NeighborSelect",
    "OrderPlan",
    "OrderStrategy",
    "PcaReport",
    "RankDeficiencyError",
    "SearchResult",
    "SearchStats",
    "SynthSpec",
    "build",
    "distance",
    "dot",
    "exact_search",
    "exact_search_batch",
    "generate_basis",
    "generate_dataset",
    "generate_query_set",
    "gram_schmidt",
    "lid_mle",
    "lid_profile",
    "mean_recall",
    "ndcg_at_k",
    "new_index",
    "order_by_category",
    "order_by_lid",
    "order_random",
    "pca_intrinsic_dim",
    "pearson",
    "rank_change",
    "recall_at_k",
    "__version__",
]
