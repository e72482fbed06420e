"""Cluster authentication, cross-cluster handoff, and group rekeying for
UAV swarms, with closed-form overhead models, a deterministic swarm
simulator, and an adversary harness."""

from .groups import GroupParams, full_group, tiny_group
from .registry import (
    ChCredential,
    CmCredential,
    GbsState,
    NuavCredential,
    PublicParams,
    setup_system,
)

__version__ = "0.1.0"

__all__ = [
    "GroupParams",
    "tiny_group",
    "full_group",
    "PublicParams",
    "GbsState",
    "ChCredential",
    "CmCredential",
    "NuavCredential",
    "setup_system",
    "__version__",
]
