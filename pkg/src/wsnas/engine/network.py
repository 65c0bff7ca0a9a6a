"""Binds a NetworkSpec to storage slots and runs forward/backward.

The network topology is fixed: a two-conv stem, four identical cells (1x1
compression followed by the three chosen edge operations, combined by
concatenation or summation), and a pool+linear head.  Node values follow
x_j = sum over i<j of O(i,j)(x_i).
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, NumericFault, ShapeError
from ..space import EDGES, NUM_CELLS, NetworkSpec, OpCode, ParamKey
from .layers import (BatchNorm2d, Conv2d, DepthwiseConv2d, GlobalAvgPool,
                     Linear, MaxPool3x3, ReLU)
from .loss import accuracy, softmax_cross_entropy
from .params import Slot


class _SlotMap:
    def __init__(self, mapping):
        self._mapping = mapping

    def __call__(self, key: ParamKey) -> Slot:
        try:
            return self._mapping[key]
        except KeyError:
            raise ContractError(f"no slot bound for key {key}") from None


def _bn(slots, area, prefix, momentum, eps, **kw) -> BatchNorm2d:
    def k(name):
        return slots(ParamKey(area, f"{prefix}.{name}", **kw))
    return BatchNorm2d(k("gamma"), k("beta"), k("running_mean"), k("running_var"),
                       momentum, eps)


class _SepConv:
    """ReLU -> depthwise kxk -> pointwise 1x1 -> BN; optionally applied twice."""

    def __init__(self, stages):
        self.stages = stages  # list of (relu, dw, pw, bn)

    def forward(self, x, train, update_running):
        for relu, dw, pw, bn in self.stages:
            x = relu.forward(x, train)
            x = dw.forward(x, train)
            x = pw.forward(x, train)
            x = bn.forward(x, train, update_running)
        return x

    def backward(self, dy):
        for relu, dw, pw, bn in reversed(self.stages):
            dy = bn.backward(dy)
            dy = pw.backward(dy)
            dy = dw.backward(dy)
            dy = relu.backward(dy)
        return dy


class _PoolOp:
    def __init__(self):
        self.pool = MaxPool3x3()

    def forward(self, x, train, update_running):
        return self.pool.forward(x, train)

    def backward(self, dy):
        return self.pool.backward(dy)


class _Cell:
    def __init__(self, index, compress_layers, edge_ops, combine):
        self.index = index
        self.relu, self.conv, self.bn = compress_layers
        self.edge_ops = edge_ops  # {(i, j): op object}
        self.combine = combine

    def forward(self, x, train, update_running):
        h = self.relu.forward(x, train)
        h = self.conv.forward(h, train)
        x0 = self.bn.forward(h, train, update_running)
        x1 = self.edge_ops[(0, 1)].forward(x0, train, update_running)
        x2 = (self.edge_ops[(0, 2)].forward(x0, train, update_running)
              + self.edge_ops[(1, 2)].forward(x1, train, update_running))
        if self.combine == "concat":
            return np.concatenate([x1, x2], axis=1)
        return x1 + x2

    def backward(self, dy):
        c = dy.shape[1] // 2 if self.combine == "concat" else dy.shape[1]
        if self.combine == "concat":
            d1, d2 = dy[:, :c], dy[:, c:]
        else:
            d1, d2 = dy, dy
        d1 = np.ascontiguousarray(d1)
        d2 = np.ascontiguousarray(d2)
        dx0 = self.edge_ops[(0, 2)].backward(d2)
        d1 = d1 + self.edge_ops[(1, 2)].backward(d2)
        dx0 = dx0 + self.edge_ops[(0, 1)].backward(d1)
        dx0 = self.bn.backward(dx0)
        dx0 = self.conv.backward(dx0)
        return self.relu.backward(dx0)


class BoundNetwork:
    """One child network wired to its storage slots."""

    def __init__(self, spec: NetworkSpec, slot_map: dict[ParamKey, Slot]):
        self.spec = spec
        slots = _SlotMap(slot_map)
        opts = spec.options
        mom, eps = opts.bn_momentum, opts.bn_eps

        self.stem = [
            Conv2d(slots(ParamKey("stem", "conv1.weight")), pad=1),
            _bn(slots, "stem", "bn1", mom, eps),
            ReLU(),
            Conv2d(slots(ParamKey("stem", "conv2.weight")), pad=1),
            _bn(slots, "stem", "bn2", mom, eps),
        ]
        self.cells = []
        for cell in range(1, NUM_CELLS + 1):
            compress = (ReLU(),
                        Conv2d(slots(ParamKey("compress", "conv.weight", cell=cell))),
                        _bn(slots, "compress", "bn", mom, eps, cell=cell))
            ops = {}
            for edge in EDGES:
                op = spec.child.op_at(edge)
                if op is OpCode.MAX_POOL_3X3:
                    ops[edge] = _PoolOp()
                    continue
                kw = {"cell": cell, "edge": edge, "op": op.digit}
                stages = []
                reps = 2 if opts.double_sep_conv else 1
                for r in range(reps):
                    pre = "" if reps == 1 else f"sep{r + 1}."
                    stages.append((
                        ReLU(),
                        DepthwiseConv2d(slots(ParamKey("cell", f"{pre}depthwise.weight", **kw)),
                                        pad=op.padding, dilation=op.dilation),
                        Conv2d(slots(ParamKey("cell", f"{pre}pointwise.weight", **kw))),
                        _bn(slots, "cell", f"{pre}bn", mom, eps, **kw),
                    ))
                ops[edge] = _SepConv(stages)
            self.cells.append(_Cell(cell, compress, ops, opts.cell_combine))
        self.gap = GlobalAvgPool()
        self.fc = Linear(slots(ParamKey("head", "fc.weight")),
                         slots(ParamKey("head", "fc.bias")))

        seen: dict[int, Slot] = {}
        for slot in slot_map.values():
            seen.setdefault(id(slot), slot)
        self.slots = sorted(seen.values(), key=lambda s: s.slot_id)
        self.param_slots = [s for s in self.slots if s.trainable]

    # -- compute --------------------------------------------------------------

    def forward(self, x: np.ndarray, train: bool = False,
                update_running: bool | None = None) -> np.ndarray:
        p = self.spec.profile
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != p.image_side \
                or x.shape[3] != p.image_side:
            raise ShapeError(f"batch must be (B,3,{p.image_side},{p.image_side}), "
                             f"got {x.shape}")
        h = x
        for layer in self.stem:
            if isinstance(layer, BatchNorm2d):
                h = layer.forward(h, train, update_running)
            else:
                h = layer.forward(h, train)
        for cell in self.cells:
            h = cell.forward(h, train, update_running)
        h = self.gap.forward(h, train)
        logits = self.fc.forward(h, train)
        if not np.isfinite(logits).all():
            raise NumericFault("non-finite logits")
        return logits

    def backward(self, dlogits: np.ndarray) -> None:
        dy = self.fc.backward(dlogits)
        dy = self.gap.backward(dy)
        for cell in reversed(self.cells):
            dy = cell.backward(dy)
        for layer in reversed(self.stem):
            dy = layer.backward(dy)

    def zero_grads(self) -> None:
        for slot in self.param_slots:
            slot.grad[...] = 0

    def loss_and_grads(self, batch: np.ndarray, labels: np.ndarray,
                       update_running: bool | None = None) -> float:
        """Train-mode forward + backward; populates every slot gradient."""
        self.zero_grads()
        logits = self.forward(batch, train=True, update_running=update_running)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        self.backward(dlogits)
        return loss

    def evaluate(self, images: np.ndarray, labels: np.ndarray,
                 chunk: int = 512) -> float:
        """Eval-mode accuracy over a dataset split; mutates nothing."""
        hits = 0
        for start in range(0, len(labels), chunk):
            logits = self.forward(images[start:start + chunk], train=False)
            hits += int((logits.argmax(axis=1) == labels[start:start + chunk]).sum())
        return hits / len(labels)


def bind_network(spec: NetworkSpec, slot_map: dict[ParamKey, Slot]) -> BoundNetwork:
    return BoundNetwork(spec, slot_map)


__all__ = ["BoundNetwork", "bind_network", "accuracy"]
