"""2-layer Clos fabric model: ToRs, spines, per-GPU NICs, directed links.

Every inter-ToR shortest path crosses exactly one spine, so a route is fully
described by its spine index (or by being intra-ToR / intra-host). Links are
directed and full duplex: the up and down directions are independent
capacities.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

# Directed link: (tail node, head node). Nodes are tagged tuples:
#   ("tor", t) | ("spine", s) | ("nic", t, h, n)
Node = tuple
Link = tuple[Node, Node]

INTRA_HOST = "intra_host"
INTRA_TOR = "intra_tor"
SPINE = "spine"


class CommodityRouteError(ValueError):
    """No route exists for a commodity (e.g. every spine between its ToRs failed)."""


@dataclass(frozen=True, order=True)
class Endpoint:
    """One GPU/NIC position: rack, host within rack, NIC within host."""

    tor: int
    host: int
    nic: int

    def __str__(self) -> str:
        return f"t{self.tor}.h{self.host}.n{self.nic}"


@dataclass(frozen=True)
class Route:
    """A concrete path: its kind, spine index (if any) and directed links."""

    kind: str
    spine: int | None
    links: tuple[Link, ...]


@dataclass(frozen=True)
class ClosTopology:
    num_spines: int
    num_tors: int
    hosts_per_tor: int
    nics_per_host: int
    link_capacity: float  # bits/second, uniform on all links
    failed_spines: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.num_spines < 1:
            raise ValueError(f"num_spines must be >= 1, got {self.num_spines}")
        if self.num_tors < 2:
            raise ValueError(f"num_tors must be >= 2, got {self.num_tors}")
        if self.hosts_per_tor < 1:
            raise ValueError(f"hosts_per_tor must be >= 1, got {self.hosts_per_tor}")
        if self.nics_per_host < 1:
            raise ValueError(f"nics_per_host must be >= 1, got {self.nics_per_host}")
        if self.link_capacity <= 0:
            raise ValueError(f"link_capacity must be > 0, got {self.link_capacity}")
        bad = [s for s in self.failed_spines if not 0 <= s < self.num_spines]
        if bad:
            raise ValueError(f"failed spine indices out of range: {sorted(bad)}")
        if len(self.failed_spines) >= self.num_spines:
            raise ValueError("at least one spine must remain alive")

    @property
    def live_spines(self) -> list[int]:
        return [s for s in range(self.num_spines) if s not in self.failed_spines]

    @property
    def num_endpoints(self) -> int:
        return self.num_tors * self.hosts_per_tor * self.nics_per_host

    def endpoints(self):
        """All GPU/NIC endpoints in (tor, host, nic) order."""
        for t in range(self.num_tors):
            for h in range(self.hosts_per_tor):
                for n in range(self.nics_per_host):
                    yield Endpoint(t, h, n)

    def contains(self, ep: Endpoint) -> bool:
        return (
            0 <= ep.tor < self.num_tors
            and 0 <= ep.host < self.hosts_per_tor
            and 0 <= ep.nic < self.nics_per_host
        )


def build_topology(
    num_spines: int,
    num_tors: int,
    hosts_per_tor: int,
    nics_per_host: int,
    link_capacity: float,
) -> ClosTopology:
    """Construct a fabric with no failed spines. Rejects non-positive sizes."""
    return ClosTopology(num_spines, num_tors, hosts_per_tor, nics_per_host, link_capacity)


def nic_node(ep: Endpoint) -> Node:
    return ("nic", ep.tor, ep.host, ep.nic)


def nic_up_link(ep: Endpoint) -> Link:
    return (nic_node(ep), ("tor", ep.tor))


def nic_down_link(ep: Endpoint) -> Link:
    return (("tor", ep.tor), nic_node(ep))


def tor_up_link(tor: int, spine: int) -> Link:
    return (("tor", tor), ("spine", spine))


def tor_down_link(spine: int, tor: int) -> Link:
    return (("spine", spine), ("tor", tor))


def spine_route(src: Endpoint, dst: Endpoint, spine: int) -> Route:
    return Route(
        SPINE,
        spine,
        (
            nic_up_link(src),
            tor_up_link(src.tor, spine),
            tor_down_link(spine, dst.tor),
            nic_down_link(dst),
        ),
    )


def forced_route(topo: ClosTopology, src: Endpoint, dst: Endpoint) -> Route | None:
    """The unique route for same-host / same-ToR pairs, None for inter-ToR.

    Cheap commodity classification for the routing schemes, which would
    otherwise materialize every per-spine candidate just to inspect its kind.
    """
    if src == dst:
        raise ValueError(f"src and dst must differ, got {src}")
    if not topo.contains(src):
        raise ValueError(f"src endpoint {src} out of bounds")
    if not topo.contains(dst):
        raise ValueError(f"dst endpoint {dst} out of bounds")
    if src.tor == dst.tor and src.host == dst.host:
        return Route(INTRA_HOST, None, ())
    if src.tor == dst.tor:
        return Route(INTRA_TOR, None, (nic_up_link(src), nic_down_link(dst)))
    return None


def enumerate_routes(topo: ClosTopology, src: Endpoint, dst: Endpoint) -> list[Route]:
    """Shortest paths from src to dst, one per live spine for inter-ToR pairs.

    Same host: the single zero-link route. Same ToR: the single two-link NIC
    route. Distinct ToRs: one four-link route per live spine, ascending spine
    index.
    """
    forced = forced_route(topo, src, dst)
    if forced is not None:
        return [forced]
    live = topo.live_spines
    if not live:
        raise CommodityRouteError("no live spines connect distinct ToRs")
    return [spine_route(src, dst, s) for s in live]


def fail_spines(topo: ClosTopology, k: int, seed: int) -> ClosTopology:
    """Return a copy with k additional spines failed, sampled uniformly.

    Sampling is over currently live spines, without replacement, deterministic
    per seed. At least one spine must survive.
    """
    if k < 0:
        raise ValueError(f"failure count must be >= 0, got {k}")
    live = topo.live_spines
    if k >= len(live):
        raise ValueError(f"cannot fail {k} of {len(live)} live spines; one must survive")
    if k == 0:
        return topo
    rng = random.Random(seed)
    newly_failed = rng.sample(live, k)
    return replace(topo, failed_spines=topo.failed_spines | frozenset(newly_failed))
