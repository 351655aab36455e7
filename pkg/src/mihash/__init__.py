"""Exact nearest-neighbor search over binary codes with multi-index hashing."""

from .codes import BinaryCode, CodeDatabase, Partition, consecutive_partition, extract_substring, hamming_distance
from .mih import MihIndex, Neighbors, RadiusSplit, SearchTrace, build_index, knn_search, range_search, split_radius
from .scan import scan_knn, scan_range

__all__ = [
    "BinaryCode",
    "CodeDatabase",
    "MihIndex",
    "Neighbors",
    "Partition",
    "RadiusSplit",
    "SearchTrace",
    "build_index",
    "consecutive_partition",
    "extract_substring",
    "hamming_distance",
    "knn_search",
    "range_search",
    "scan_knn",
    "scan_range",
    "split_radius",
]

__version__ = "0.1.0"
