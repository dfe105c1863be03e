"""One-hop overlay membership.

Every enhanced gateway keeps a full replica of the Global Lookup Table
(GLT). A joiner attaches through any live member, receives that member's
replica, and the member broadcasts the new entry to everyone else, so all
replicas converge after each join. There is no churn: members are
permanent for a run.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .geo import GeoCoordinate

_NODE_ID_RE = re.compile(r"^[0-9A-F]{6}$")

NODE_ID_SPACE = 1 << 24


@dataclass(frozen=True, order=True)
class NodeId:
    """24-bit overlay identifier rendered as 6 uppercase hex characters."""

    value: str

    def __post_init__(self) -> None:
        normalized = self.value.upper()
        if not _NODE_ID_RE.match(normalized):
            raise ValueError(f"node id must be 6 hex characters, got {self.value!r}")
        object.__setattr__(self, "value", normalized)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class NetworkCategory:
    """Label for what a sensor network measures; compared case-insensitively."""

    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("category name must be non-empty")

    @property
    def key(self) -> str:
        return self.name.casefold()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkCategory):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        return self.name


POLLUTION = NetworkCategory("Pollution")
TRAFFIC = NetworkCategory("Traffic")
HUMIDITY = NetworkCategory("Humidity")
TEMPERATURE = NetworkCategory("Temperature")
WIND_SPEED = NetworkCategory("WindSpeed")
FIRE_DETECTION = NetworkCategory("FireDetection")


@dataclass(frozen=True)
class GltEntry:
    """One member's row: identity, endpoint, network center and category."""

    node_id: NodeId
    address: str
    center: GeoCoordinate
    category: NetworkCategory


class GlobalLookupTable:
    """One member's replica of the overlay-wide membership table."""

    def __init__(self, owner_id: NodeId):
        self.owner_id = owner_id
        self._entries: dict[NodeId, GltEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, node_id: NodeId) -> bool:
        return node_id in self._entries

    def get(self, node_id: NodeId) -> GltEntry | None:
        return self._entries.get(node_id)

    def add(self, entry: GltEntry) -> bool:
        """Insert an entry; returns False without changes on a duplicate id."""
        if entry.node_id in self._entries:
            return False
        self._entries[entry.node_id] = entry
        return True

    def entries(self) -> list[GltEntry]:
        """All entries sorted by node id for deterministic iteration."""
        return sorted(self._entries.values(), key=lambda e: e.node_id)

    def lookup(self, category: NetworkCategory) -> list[GltEntry]:
        """Members collecting `category`, excluding the owner's own entry."""
        return [
            e
            for e in self.entries()
            if e.category == category and e.node_id != self.owner_id
        ]

    def member_ids(self) -> frozenset[NodeId]:
        return frozenset(self._entries)

    def copy_for(self, owner_id: NodeId) -> "GlobalLookupTable":
        replica = GlobalLookupTable(owner_id)
        replica._entries = dict(self._entries)
        return replica


@dataclass(frozen=True)
class AttachResult:
    accepted: bool
    reason: str | None
    glt: GlobalLookupTable | None


def generate_node_id(rng: random.Random, taken: set[NodeId] | frozenset[NodeId]) -> NodeId:
    """Draw a fresh 24-bit id; deterministic for a given rng state."""
    if len(taken) >= NODE_ID_SPACE:
        raise ValueError("node id space exhausted")
    while True:
        candidate = NodeId(f"{rng.getrandbits(24):06X}")
        if candidate not in taken:
            return candidate


class OverlayNetwork:
    """Membership state of the whole overlay, one GLT replica per member."""

    def __init__(self) -> None:
        self._replicas: dict[NodeId, GlobalLookupTable] = {}

    def member_ids(self) -> list[NodeId]:
        return sorted(self._replicas)

    def replica(self, node_id: NodeId) -> GlobalLookupTable:
        return self._replicas[node_id]

    def join(self, joiner: GltEntry, bootstrap: NodeId) -> AttachResult:
        """Attach `joiner` through `bootstrap` and broadcast the new entry.

        The first member bootstraps off itself. After a successful join all
        replicas hold identical membership.
        """
        if not self._replicas:
            if bootstrap != joiner.node_id:
                return AttachResult(False, f"unknown bootstrap {bootstrap}", None)
            replica = GlobalLookupTable(joiner.node_id)
            replica.add(joiner)
            self._replicas[joiner.node_id] = replica
            return AttachResult(True, None, replica)

        source = self._replicas.get(bootstrap)
        if source is None:
            return AttachResult(False, f"unknown bootstrap {bootstrap}", None)
        if joiner.node_id in source:
            return AttachResult(False, f"duplicate node id {joiner.node_id}", None)

        replica = source.copy_for(joiner.node_id)
        replica.add(joiner)
        self._replicas[joiner.node_id] = replica
        # new-member broadcast keeps every existing replica in sync
        for member_id, member_glt in self._replicas.items():
            if member_id != joiner.node_id:
                member_glt.add(joiner)
        return AttachResult(True, None, replica)
