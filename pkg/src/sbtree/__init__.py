"""Space-efficient B+ trees with load-balanced packed leaves."""

from .btree import BTree, InvariantReport, TreeParams, TreeStats
from .packed import PackedKeyBuffer

__all__ = ["BTree", "InvariantReport", "PackedKeyBuffer", "TreeParams", "TreeStats"]
