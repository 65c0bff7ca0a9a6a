"""Parameter storage slots and the binary snapshot container."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, FormatError

_MAGIC = b"WSNAP001"
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype(np.float32), 1: np.dtype(np.float64)}


@dataclass
class Slot:
    """One storage slot: a value tensor plus, for trained parameters, its
    gradient and momentum-velocity buffers.

    Velocity lives on the slot, so whenever two (child, key) pairs alias the
    same slot they alias the same momentum buffer as well.
    """

    slot_id: str
    scope: str                  # "global" | "group<g>" | "child<id>"
    value: np.ndarray
    kind: str = "param"         # "param" | "buffer"
    grad: np.ndarray | None = None
    velocity: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "param":
            if self.grad is None:
                self.grad = np.zeros_like(self.value)
            if self.velocity is None:
                self.velocity = np.zeros_like(self.value)

    @property
    def trainable(self) -> bool:
        return self.kind == "param"


def write_snapshot(slots: dict[str, Slot], fh) -> None:
    """Write slots (values, velocities, buffers) sorted by record key."""
    records = []
    for slot_id in sorted(slots):
        slot = slots[slot_id]
        records.append((slot_id, slot.value))
        if slot.trainable:
            records.append((slot_id + "#velocity", slot.velocity))
    fh.write(_MAGIC)
    fh.write(struct.pack("<I", len(records)))
    for key, arr in sorted(records, key=lambda r: r[0]):
        data = key.encode("utf-8")
        dt = np.dtype(arr.dtype)
        if dt not in _DTYPE_CODES:
            raise ContractError(f"snapshot cannot hold dtype {dt}")
        fh.write(struct.pack("<H", len(data)))
        fh.write(data)
        fh.write(struct.pack("<BB", _DTYPE_CODES[dt], arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype=dt.newbyteorder("<")).tobytes())


def read_snapshot(fh) -> dict[str, np.ndarray]:
    """Read a snapshot back as {record key: array}."""
    magic = fh.read(len(_MAGIC))
    if magic != _MAGIC:
        raise FormatError(f"bad snapshot magic {magic!r}", offset=0)
    (count,) = struct.unpack("<I", fh.read(4))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (klen,) = struct.unpack("<H", fh.read(2))
        key = fh.read(klen).decode("utf-8")
        code, ndim = struct.unpack("<BB", fh.read(2))
        if code not in _CODE_DTYPES:
            raise FormatError(f"unknown dtype code {code} for {key!r}")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        dt = _CODE_DTYPES[code]
        n = int(np.prod(shape)) if shape else 1
        raw = fh.read(n * dt.itemsize)
        if len(raw) != n * dt.itemsize:
            raise FormatError(f"truncated data for {key!r}")
        arr = np.frombuffer(raw, dtype=dt.newbyteorder("<")).astype(dt).reshape(shape)
        out[key] = arr
    return out


def snapshot_manifest(slots: dict[str, Slot], header: dict | None = None) -> str:
    """Text manifest: one 'key dtype shape' line per record, after headers."""
    lines = [f"# {k} = {v}" for k, v in sorted((header or {}).items())]
    for slot_id in sorted(slots):
        slot = slots[slot_id]
        shape = "x".join(str(d) for d in slot.value.shape)
        lines.append(f"{slot_id} {np.dtype(slot.value.dtype).name} {shape}")
        if slot.trainable:
            lines.append(f"{slot_id}#velocity {np.dtype(slot.value.dtype).name} {shape}")
    return "\n".join(lines) + "\n"


def snapshot_bytes(slots: dict[str, Slot]) -> bytes:
    buf = io.BytesIO()
    write_snapshot(slots, buf)
    return buf.getvalue()
