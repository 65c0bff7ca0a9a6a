"""The down-scaled cell search space and its network assembly.

A child model is named by three base-4 digits choosing the operation on each
edge of a densely connected 2-node cell DAG.  The full network stacks four
identical cells between a 2-conv stem and a pool+linear head, so the whole
space holds 4^3 = 64 children.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import DomainError, MalformedIdError

# Edges of the cell DAG over nodes x0 (input), x1, x2: every pair i<j.
EDGES: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2))
NUM_CELLS = 4
NUM_CHILDREN = 64


class OpCode(Enum):
    """The four candidate edge operations, keyed by their code digit."""

    MAX_POOL_3X3 = 1
    SEP_CONV_3X3 = 2
    SEP_CONV_5X5 = 3
    DIL_SEP_CONV_3X3 = 4

    @property
    def digit(self) -> int:
        return self.value

    @classmethod
    def from_digit(cls, digit: int) -> "OpCode":
        try:
            return cls(digit)
        except ValueError:
            raise MalformedIdError(f"op digit must be in 1..4, got {digit!r}") from None

    @property
    def kernel(self) -> int:
        return {1: 3, 2: 3, 3: 5, 4: 3}[self.value]

    @property
    def dilation(self) -> int:
        return 2 if self is OpCode.DIL_SEP_CONV_3X3 else 1

    @property
    def padding(self) -> int:
        # same-padding for stride 1: output spatial size equals input size
        return self.dilation * (self.kernel - 1) // 2

    @property
    def has_params(self) -> bool:
        return self is not OpCode.MAX_POOL_3X3


@dataclass(frozen=True, order=True)
class ChildModelId:
    """Three digits in [1,4] choosing O(0,1), O(0,2), O(1,2)."""

    digits: tuple[int, int, int]

    def __post_init__(self):
        if len(self.digits) != 3 or any(d not in (1, 2, 3, 4) for d in self.digits):
            raise MalformedIdError(f"child digits must be a triple in 1..4, got {self.digits!r}")

    def __str__(self) -> str:
        return "".join(str(d) for d in self.digits)

    @property
    def text(self) -> str:
        return str(self)

    def op_at(self, edge: tuple[int, int]) -> OpCode:
        return OpCode.from_digit(self.digits[EDGES.index(edge)])

    @property
    def ops(self) -> tuple[OpCode, OpCode, OpCode]:
        return tuple(OpCode.from_digit(d) for d in self.digits)


def parse_child_id(text: str) -> ChildModelId:
    """Parse the canonical 3-character code, e.g. "434"."""
    if not isinstance(text, str) or len(text) != 3:
        raise MalformedIdError(f"child id must be a 3-character string, got {text!r}")
    digits = []
    for ch in text:
        if ch not in "1234":
            raise MalformedIdError(f"child id {text!r} has digit {ch!r} outside 1..4")
        digits.append(int(ch))
    return ChildModelId(tuple(digits))


def enumerate_children() -> list[ChildModelId]:
    """All 64 children in lexicographic order, "111" first, "444" last."""
    return [
        ChildModelId((d1, d2, d3))
        for d1 in (1, 2, 3, 4)
        for d2 in (1, 2, 3, 4)
        for d3 in (1, 2, 3, 4)
    ]


@dataclass(frozen=True)
class ScaleProfile:
    """Network/training scale knobs; "paper" is the published setup."""

    name: str
    stem_channels: int
    cell_channels: int
    image_side: int
    num_classes: int
    batch_size: int
    epochs: int

    def __post_init__(self):
        for f in ("stem_channels", "cell_channels", "image_side", "num_classes",
                  "batch_size", "epochs"):
            if getattr(self, f) <= 0:
                raise DomainError(f"{f} must be positive")
        if self.stem_channels % 2:
            raise DomainError("stem_channels must be even (the stem expands in two steps)")

    def with_(self, **kw) -> "ScaleProfile":
        return replace(self, **kw)


PAPER_PROFILE = ScaleProfile("paper", stem_channels=48, cell_channels=16,
                             image_side=32, num_classes=10, batch_size=256, epochs=200)
DESK_PROFILE = ScaleProfile("desk", stem_channels=8, cell_channels=4,
                            image_side=16, num_classes=4, batch_size=32, epochs=20)
PROFILES = {"paper": PAPER_PROFILE, "desk": DESK_PROFILE}


@dataclass(frozen=True)
class NetOptions:
    """Architecture details the published description leaves open."""

    bn_momentum: float = 0.4      # new_stat = (1 - m) * old + m * batch
    bn_eps: float = 1e-5
    cell_combine: str = "concat"  # "concat" (2c channels out) or "sum" (c channels)
    double_sep_conv: bool = False  # apply the separable block twice per edge
    sgd_momentum_override: float | None = None

    def __post_init__(self):
        if self.cell_combine not in ("concat", "sum"):
            raise DomainError(f"cell_combine must be concat|sum, got {self.cell_combine!r}")
        if not 0.0 <= self.bn_momentum <= 1.0:
            raise DomainError("bn_momentum must lie in [0, 1]")


@dataclass(frozen=True)
class ParamKey:
    """Identity of one parameter or BN buffer within a child network.

    area is one of stem|compress|cell|head; cell (1-based) is set for
    compress/cell areas; edge and op identify the cell-edge operation.
    """

    area: str
    tensor: str
    cell: int | None = None
    edge: tuple[int, int] | None = None
    op: int | None = None

    @property
    def region_tag(self) -> str:
        if self.area == "stem":
            return "stem"
        if self.area == "head":
            return "head"
        if self.area == "compress":
            return f"cell{self.cell}.compress"
        return f"cell{self.cell}.edge{self.edge[0]}{self.edge[1]}.op{self.op}"

    @property
    def qualified(self) -> str:
        return f"{self.region_tag}/{self.tensor}"

    def sort_key(self) -> tuple[str, str]:
        return (self.region_tag, self.tensor)

    def __str__(self) -> str:
        return self.qualified


@dataclass(frozen=True)
class TensorSpec:
    """Shape plus initializer for one keyed tensor."""

    shape: tuple[int, ...]
    init: str           # kaiming | zeros | ones
    kind: str = "param"  # param (trained) or buffer (BN running stats)
    fan_in: int = 0


_BN_TENSORS = (("gamma", "ones", "param"), ("beta", "zeros", "param"),
               ("running_mean", "zeros", "buffer"), ("running_var", "ones", "buffer"))


def _bn_specs(prefix: str, channels: int, *, area: str, cell: int | None = None,
              edge: tuple[int, int] | None = None, op: int | None = None,
              ) -> list[tuple[ParamKey, TensorSpec]]:
    return [
        (ParamKey(area, f"{prefix}.{tensor}", cell=cell, edge=edge, op=op),
         TensorSpec((channels,), init, kind))
        for tensor, init, kind in _BN_TENSORS
    ]


@dataclass(frozen=True)
class NetworkSpec:
    """Structure of one child network at a given scale.

    The topology is fixed (stem, four identical cells, head); what varies per
    child is the operation on each of the three cell edges.  Parameter keys
    and shapes are derived here so that the sharing registry and the engine
    agree on a single naming scheme.
    """

    child: ChildModelId
    profile: ScaleProfile
    options: NetOptions = field(default_factory=NetOptions)

    @property
    def cell_out_channels(self) -> int:
        c = self.profile.cell_channels
        return 2 * c if self.options.cell_combine == "concat" else c

    def cell_in_channels(self, cell: int) -> int:
        return self.profile.stem_channels if cell == 1 else self.cell_out_channels

    # -- parameter enumeration ------------------------------------------------

    def stem_params(self) -> list[tuple[ParamKey, TensorSpec]]:
        s = self.profile.stem_channels
        mid = s // 2
        out = [(ParamKey("stem", "conv1.weight"),
                TensorSpec((mid, 3, 3, 3), "kaiming", fan_in=3 * 9))]
        out += _bn_specs("bn1", mid, area="stem")
        out += [(ParamKey("stem", "conv2.weight"),
                 TensorSpec((s, mid, 3, 3), "kaiming", fan_in=mid * 9))]
        out += _bn_specs("bn2", s, area="stem")
        return out

    def compress_params(self, cell: int) -> list[tuple[ParamKey, TensorSpec]]:
        c = self.profile.cell_channels
        cin = self.cell_in_channels(cell)
        out = [(ParamKey("compress", "conv.weight", cell=cell),
                TensorSpec((c, cin, 1, 1), "kaiming", fan_in=cin))]
        out += _bn_specs("bn", c, area="compress", cell=cell)
        return out

    def edge_params(self, cell: int, edge: tuple[int, int]) -> list[tuple[ParamKey, TensorSpec]]:
        op = self.child.op_at(edge)
        if not op.has_params:
            return []
        c = self.profile.cell_channels
        k = op.kernel
        base = {"cell": cell, "edge": edge, "op": op.digit}
        reps = 2 if self.options.double_sep_conv else 1
        out = []
        for r in range(reps):
            pre = "" if reps == 1 else f"sep{r + 1}."
            out.append((ParamKey("cell", f"{pre}depthwise.weight", **base),
                        TensorSpec((c, k, k), "kaiming", fan_in=k * k)))
            out.append((ParamKey("cell", f"{pre}pointwise.weight", **base),
                        TensorSpec((c, c, 1, 1), "kaiming", fan_in=c)))
            out += _bn_specs(f"{pre}bn", c, area="cell", **base)
        return out

    def head_params(self) -> list[tuple[ParamKey, TensorSpec]]:
        n, c = self.profile.num_classes, self.cell_out_channels
        return [
            (ParamKey("head", "fc.weight"), TensorSpec((n, c), "kaiming", fan_in=c)),
            (ParamKey("head", "fc.bias"), TensorSpec((n,), "zeros")),
        ]

    def all_params(self) -> list[tuple[ParamKey, TensorSpec]]:
        out = self.stem_params()
        for cell in range(1, NUM_CELLS + 1):
            out += self.compress_params(cell)
            for edge in EDGES:
                out += self.edge_params(cell, edge)
        out += self.head_params()
        return out

    def param_keys(self) -> list[ParamKey]:
        return [k for k, _ in self.all_params()]


def build_network(child: ChildModelId | str, profile: ScaleProfile,
                  options: NetOptions | None = None) -> NetworkSpec:
    """Assemble the network specification for one child at one scale."""
    if isinstance(child, str):
        child = parse_child_id(child)
    return NetworkSpec(child=child, profile=profile, options=options or NetOptions())


def iter_minibatch_count(train_size: int, batch_size: int) -> int:
    """Mini-batches per epoch: ceil(train_size / batch_size)."""
    return math.ceil(train_size / batch_size)
