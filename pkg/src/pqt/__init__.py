"""Product Quantization Tree: approximate nearest-neighbor search with a
two-level per-part quantizer tree, slope-table bin proposal and
line-quantization re-ranking."""

from . import _backend
from .bench import RecallReport, make_ground_truth, recall_at, run_benchmark, synth_clustered
from .binorder import build_slope_tables, dijkstra_order, heuristic_order
from .codebook import Codebook, TreeCodebooks, assign, train_kmeans, train_tree
from .config import ConfigError, PqtConfig
from .linequant import LineCodes, build_pair_table, distortion_stats, encode_line, encode_lines, line_distance
from .search import PqtIndex, QueryResult, brute_force_knn, build_index, knn_query, search_batch
from .tree import BinCode, InvertedLists, assign_bin, build_inverted_lists, encode_slot, traverse
from .vecio import GroundTruth, VectorSet, load_index, read_vecs, save_index, write_vecs

__version__ = "0.1.0"


def backend() -> str:
    """Name of the active kernel backend (``"cython"`` or ``"python"``)."""
    return _backend.name
