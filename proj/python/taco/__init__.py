"""Subspace-collision approximate nearest neighbor search."""

from ._taco import (
    Index,
    IndexParams,
    TacoError,
    allocate,
    build_index,
    ground_truth,
    load_index,
    read_vectors,
    recall,
    search,
    select_candidates,
    write_vectors,
)

__all__ = [
    "Index",
    "IndexParams",
    "TacoError",
    "allocate",
    "build_index",
    "ground_truth",
    "load_index",
    "read_vectors",
    "recall",
    "search",
    "select_candidates",
    "write_vectors",
]
