"""Concurrent ordered sets with linearizable range queries.

Each structural link carries a timestamped history (a bundle); updates
extend those histories under a shared logical clock and range queries walk
them to reconstruct the exact set contents at their snapshot time, while
point operations stay on the plain links.
"""

from .core import (
    Bundle,
    BundleEntry,
    GlobalClock,
    InvariantViolation,
    KEY_MAX,
    KEY_MIN,
    PENDING_TS,
    RelaxedClock,
    UpdatePlan,
    linearize_update,
    verify_bundle,
)
from .base import OrderedSetBase, Stats
from .reclaim import BundlePruner, ReclaimDomain
from .linkedlist import BundledList
from .skiplist import BundledSkipList
from .bst import BundledTree

STRUCTURES = {
    "list": BundledList,
    "skiplist": BundledSkipList,
    "bst": BundledTree,
}

__version__ = "0.1.0"

__all__ = [
    "Bundle",
    "BundleEntry",
    "BundledList",
    "BundledSkipList",
    "BundledTree",
    "BundlePruner",
    "GlobalClock",
    "InvariantViolation",
    "KEY_MAX",
    "KEY_MIN",
    "OrderedSetBase",
    "PENDING_TS",
    "ReclaimDomain",
    "RelaxedClock",
    "STRUCTURES",
    "Stats",
    "UpdatePlan",
    "linearize_update",
    "verify_bundle",
]
