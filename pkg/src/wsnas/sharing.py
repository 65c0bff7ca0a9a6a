"""Weight-sharing policies: mapping (child, parameter key) to storage slots.

A policy decides which children read and write the same tensor.  Four
families are supported:

* full      -- one global copy of everything (the classic supernet);
* group_*   -- the 64 children are partitioned into m groups, each group
               owning one full-style copy (random or similarity partition);
* prefix    -- the stem and the first k cells are global, everything after
               them is private per child;
* none      -- every child owns a private copy of all of its tensors.

Slot identity is a pure function of (policy, child, key).  Group policies
canonicalize their extremes so that m=1 resolves exactly like full sharing
and m=64 exactly like no sharing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .engine.params import Slot
from .engine.rng import init_tensor, permutation
from .errors import ContractError, DomainError
from .space import (NUM_CHILDREN, ChildModelId, NetOptions, NetworkSpec,
                    ParamKey, ScaleProfile, TensorSpec, build_network,
                    enumerate_children)

GROUP_COUNTS = (1, 2, 4, 8, 16, 32, 64)


@dataclass(frozen=True)
class SharingPolicy:
    """kind: full | group_random | group_similarity | prefix | none."""

    kind: str
    m: int | None = None            # group count, must divide 64
    partition_seed: int | None = None  # group_random only
    k: int | None = None            # prefix only: number of shared cells, 0..4

    def __post_init__(self):
        if self.kind in ("group_random", "group_similarity"):
            if self.m is None or NUM_CHILDREN % self.m:
                raise DomainError(f"group count must divide {NUM_CHILDREN}, got {self.m}")
            if self.kind == "group_random" and self.partition_seed is None:
                raise DomainError("group_random requires a partition_seed")
        elif self.kind == "prefix":
            if self.k is None or not 0 <= self.k <= 4:
                raise DomainError(f"prefix k must lie in 0..4, got {self.k}")
        elif self.kind not in ("full", "none"):
            raise DomainError(f"unknown policy kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "group_random":
            return f"group_random(m={self.m},seed={self.partition_seed})"
        if self.kind == "group_similarity":
            return f"group_similarity(m={self.m})"
        if self.kind == "prefix":
            return f"prefix(k={self.k})"
        return self.kind

    def to_config(self) -> dict:
        out = {"policy": self.kind}
        if self.m is not None:
            out["m"] = self.m
        if self.partition_seed is not None:
            out["partition_seed"] = self.partition_seed
        if self.k is not None:
            out["k"] = self.k
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "SharingPolicy":
        kind = cfg["policy"]
        return cls(kind,
                   m=int(cfg["m"]) if "m" in cfg and cfg["m"] is not None else None,
                   partition_seed=(int(cfg["partition_seed"])
                                   if cfg.get("partition_seed") is not None else None),
                   k=int(cfg["k"]) if "k" in cfg and cfg["k"] is not None else None)


FULL = SharingPolicy("full")
NONE = SharingPolicy("none")


@dataclass(frozen=True)
class ParamSlotRef:
    """Resolved identity of a slot: scope plus qualified key."""

    scope: str      # "global" | "group<g>" | "child<id>"
    key: ParamKey

    @property
    def slot_id(self) -> str:
        return f"{self.scope}/{self.key.qualified}"


def make_partition(policy: SharingPolicy) -> dict[ChildModelId, int]:
    """Map every child to a 1-based group index.

    Similarity grouping slices the lexicographic order "111".."444" into m
    contiguous runs; random grouping slices a seeded shuffle of that order.
    Full behaves as m=1 and none as m=64.
    """
    children = enumerate_children()
    if policy.kind == "full":
        m = 1
    elif policy.kind == "none":
        m = NUM_CHILDREN
    elif policy.kind in ("group_random", "group_similarity"):
        m = policy.m
    else:
        raise DomainError(f"{policy.kind} policies do not define a partition")
    if policy.kind == "group_random":
        order = permutation(NUM_CHILDREN, policy.partition_seed, "partition")
        children = [children[i] for i in order]
    size = NUM_CHILDREN // m
    return {child: 1 + idx // size for idx, child in enumerate(children)}


def group_members(policy: SharingPolicy) -> dict[int, list[ChildModelId]]:
    """Groups as {group index: lexicographically sorted members}."""
    part = make_partition(policy)
    groups: dict[int, list[ChildModelId]] = {}
    for child in enumerate_children():
        groups.setdefault(part[child], []).append(child)
    return dict(sorted(groups.items()))


class _Resolver:
    """Caches the partition so per-key resolution stays cheap."""

    def __init__(self, policy: SharingPolicy):
        self.policy = policy
        self._partition = None
        self._group_size = None
        if policy.kind in ("group_random", "group_similarity"):
            self._partition = make_partition(policy)
            self._group_size = NUM_CHILDREN // policy.m

    def scope(self, child: ChildModelId, key: ParamKey) -> str:
        p = self.policy
        if p.kind == "full":
            return "global"
        if p.kind == "none":
            return f"child{child}"
        if p.kind == "prefix":
            if key.area == "stem" or (key.area in ("cell", "compress")
                                      and key.cell <= p.k):
                return "global"
            return f"child{child}"
        # group policies, canonicalized at the extremes
        if p.m == 1:
            return "global"
        if self._group_size == 1:
            return f"child{child}"
        return f"group{self._partition[child]:02d}"


def resolve(policy: SharingPolicy, child: ChildModelId, key: ParamKey,
            _resolver: _Resolver | None = None) -> ParamSlotRef:
    """Resolve one (child, key) pair to its storage slot.

    Raises ContractError if the key does not belong to the child's network
    (an edge key whose op differs from the child's choice at that edge).
    """
    if key.area == "cell" and key.op != child.op_at(key.edge).digit:
        raise ContractError(f"key {key} is foreign to child {child}")
    r = _resolver or _Resolver(policy)
    return ParamSlotRef(scope=r.scope(child, key), key=key)


class ParameterStore:
    """All slots needed by a set of children under one policy.

    Slot values are initialized from a counter-based stream keyed by
    (init_seed, slot id), so a slot's initial tensor does not depend on
    which other slots exist; stores restricted to a subset of children are
    bit-identical on the slots they share with the full store.
    """

    def __init__(self, policy: SharingPolicy, profile: ScaleProfile,
                 options: NetOptions, init_seed: int, dtype=np.float32,
                 members: Sequence[ChildModelId] | None = None):
        self.policy = policy
        self.profile = profile
        self.options = options
        self.init_seed = init_seed
        self.dtype = np.dtype(dtype)
        self.members = sorted(members if members is not None else enumerate_children())
        self._resolver = _Resolver(policy)
        self.slots: dict[str, Slot] = {}
        self._child_maps: dict[ChildModelId, dict[ParamKey, Slot]] = {}

        specs: dict[str, tuple[str, TensorSpec]] = {}
        for child in self.members:
            net = build_network(child, profile, options)
            for key, spec in net.all_params():
                ref = resolve(policy, child, key, self._resolver)
                specs.setdefault(ref.slot_id, (ref.scope, spec))
        for slot_id in sorted(specs):
            scope, spec = specs[slot_id]
            value = init_tensor(spec.init, spec.shape, spec.fan_in,
                                (init_seed, "init", slot_id), self.dtype)
            self.slots[slot_id] = Slot(slot_id=slot_id, scope=scope, value=value,
                                       kind=spec.kind)

    # -- lookups ---------------------------------------------------------------

    def slot_for(self, child: ChildModelId, key: ParamKey) -> Slot:
        ref = resolve(self.policy, child, key, self._resolver)
        try:
            return self.slots[ref.slot_id]
        except KeyError:
            raise ContractError(f"slot {ref.slot_id} not materialized here") from None

    def child_slot_map(self, child: ChildModelId) -> dict[ParamKey, Slot]:
        if child not in self._child_maps:
            net = build_network(child, self.profile, self.options)
            self._child_maps[child] = {key: self.slot_for(child, key)
                                       for key in net.param_keys()}
        return self._child_maps[child]

    def bind(self, child: ChildModelId):
        from .engine.network import BoundNetwork
        spec = build_network(child, self.profile, self.options)
        return BoundNetwork(spec, self.child_slot_map(child))

    def child_slots(self, child: ChildModelId) -> list[Slot]:
        seen: dict[str, Slot] = {}
        for slot in self.child_slot_map(child).values():
            seen.setdefault(slot.slot_id, slot)
        return [seen[sid] for sid in sorted(seen)]

    @property
    def slot_count(self) -> int:
        return len(self.slots)

    def param_count(self) -> int:
        return sum(s.value.size for s in self.slots.values() if s.trainable)

    # -- forking ---------------------------------------------------------------

    def fork_child(self, child: ChildModelId) -> "ParameterStore":
        """Deep-copy the slots reachable from one child into a private store.

        Slot ids are preserved so snapshots stay comparable, but the arrays
        are fresh copies: training the fork never touches the parent.
        """
        fork = object.__new__(ParameterStore)
        fork.policy = self.policy
        fork.profile = self.profile
        fork.options = self.options
        fork.init_seed = self.init_seed
        fork.dtype = self.dtype
        fork.members = [child]
        fork._resolver = self._resolver
        fork._child_maps = {}
        fork.slots = {}
        for slot in self.child_slots(child):
            fork.slots[slot.slot_id] = Slot(
                slot_id=slot.slot_id, scope=slot.scope, kind=slot.kind,
                value=slot.value.copy(),
                grad=None if slot.grad is None else slot.grad.copy(),
                velocity=None if slot.velocity is None else slot.velocity.copy())
        return fork

    def merge_from(self, other: "ParameterStore") -> None:
        """Adopt slots from a store materialized for other members."""
        for slot_id, slot in other.slots.items():
            mine = self.slots.get(slot_id)
            if mine is None:
                self.slots[slot_id] = slot
            else:
                mine.value[...] = slot.value
                if mine.trainable:
                    mine.velocity[...] = slot.velocity
        self._child_maps.clear()


def materialize(policy: SharingPolicy, profile: ScaleProfile,
                options: NetOptions | None = None, init_seed: int = 0,
                dtype=np.float32,
                members: Iterable[ChildModelId] | None = None) -> ParameterStore:
    """Allocate and initialize every distinct slot for the given children."""
    return ParameterStore(policy, profile, options or NetOptions(), init_seed,
                          dtype=dtype,
                          members=list(members) if members is not None else None)
