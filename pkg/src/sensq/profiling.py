"""Decision profiling of ReLU nodes over a dataset.

A node "acts as identity" on an input when its pre-activation is >= 0
(equality counts toward identity) and "acts as zero" otherwise.  The
decision bias of a node is the majority count as a fraction of the
dataset, a number in [0.5, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .data import Dataset
from .errors import DatasetError, EncodingError
from .mlp import Mlp, NodeId, forward_batch


class Direction(Enum):
    IDENTITY = "identity"
    ZERO = "zero"


class NodeStatus(Enum):
    FIXED_IDENTITY = "I"
    FIXED_ZERO = "Z"
    FREE = "F"


@dataclass(frozen=True)
class NodeProfile:
    node: NodeId
    n_identity: int
    n_zero: int

    @property
    def direction(self) -> Direction:
        # A 50/50 tie resolves to identity: deterministic, and it keeps the
        # node's pass-through path alive in the underapproximation.
        return Direction.IDENTITY if self.n_identity >= self.n_zero else Direction.ZERO

    @property
    def d_bias(self) -> float:
        return max(self.n_identity, self.n_zero) / (self.n_identity + self.n_zero)


@dataclass(frozen=True)
class DBiasProfile:
    """Per-node identity/zero counts over one dataset."""

    nodes: tuple[NodeProfile, ...]

    def __getitem__(self, node: NodeId) -> NodeProfile:
        for p in self.nodes:
            if p.node == node:
                return p
        raise KeyError(node)

    def to_table(self) -> list[dict]:
        return [
            {
                "layer": p.node[0],
                "neuron": p.node[1],
                "n_identity": p.n_identity,
                "n_zero": p.n_zero,
                "direction": p.direction.value,
                "d_bias": p.d_bias,
            }
            for p in self.nodes
        ]


def compute_dbias(m: Mlp, d: Dataset) -> DBiasProfile:
    """Count identity vs zero decisions for every hidden node over d."""
    if len(d) == 0:
        raise DatasetError("decision profiling needs a non-empty dataset")
    zs, _, _ = forward_batch(m, d.features)
    profiles = []
    for l, z in enumerate(zs, start=1):
        n_id = (z >= 0.0).sum(axis=0)
        for i in range(z.shape[1]):
            profiles.append(NodeProfile((l, i), int(n_id[i]), len(d) - int(n_id[i])))
    return DBiasProfile(tuple(profiles))


def fix_order(p: DBiasProfile) -> list[NodeId]:
    """Unfix order: increasing d-bias, ties by (layer, neuron)."""
    return [
        prof.node
        for prof in sorted(p.nodes, key=lambda pr: (pr.d_bias, pr.node))
    ]


@dataclass(frozen=True)
class FixPlan:
    """Status per hidden node: fixed-identity, fixed-zero, or free ReLU."""

    statuses: tuple[tuple[NodeId, NodeStatus], ...]

    @classmethod
    def from_dict(cls, d: dict[NodeId, NodeStatus]) -> "FixPlan":
        return cls(tuple(sorted(d.items())))

    @classmethod
    def all_free(cls, m: Mlp) -> "FixPlan":
        return cls.from_dict({n: NodeStatus.FREE for n in m.hidden_node_ids()})

    def as_dict(self) -> dict[NodeId, NodeStatus]:
        return dict(self.statuses)

    def status(self, node: NodeId) -> NodeStatus:
        return self.as_dict()[node]

    def unfix(self, node: NodeId) -> "FixPlan":
        d = self.as_dict()
        if node not in d:
            raise EncodingError(f"cannot unfix unknown node {node}")
        d[node] = NodeStatus.FREE
        return FixPlan.from_dict(d)

    @property
    def n_free(self) -> int:
        return sum(1 for _, s in self.statuses if s is NodeStatus.FREE)

    def digest(self) -> str:
        """Compact I/Z/F string in (layer, neuron) order."""
        return "".join(s.value for _, s in self.statuses)

    def check_covers(self, m: Mlp) -> None:
        plan_nodes = [n for n, _ in self.statuses]
        if plan_nodes != m.hidden_node_ids():
            raise EncodingError(
                f"plan covers {len(plan_nodes)} nodes but model has "
                f"{m.n_relu_nodes} hidden nodes"
            )


def initial_fixplan(p: DBiasProfile) -> FixPlan:
    """Every node fixed in its majority direction; no free nodes."""
    return FixPlan.from_dict(
        {
            prof.node: (
                NodeStatus.FIXED_IDENTITY
                if prof.direction is Direction.IDENTITY
                else NodeStatus.FIXED_ZERO
            )
            for prof in p.nodes
        }
    )
