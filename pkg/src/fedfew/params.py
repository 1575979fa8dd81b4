"""Named, ordered parameter collections and their serialized form.

A ParamVector is the unit of broadcast, aggregation and checkpointing.  The
binary layout (all integers little-endian u32, values little-endian f64):

    u32 entry count
    per entry: u32 name length | name utf-8 | u32 rank | u32 dims... | f64 values
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import ShapeError, Tensor


class ParamVector:
    """Ordered list of (name, Tensor) pairs with stable iteration order."""

    def __init__(self, items):
        self._items: list[tuple[str, Tensor]] = []
        seen = set()
        for name, tensor in items:
            if name in seen:
                raise ValueError(f"duplicate parameter name {name!r}")
            seen.add(name)
            self._items.append((name, tensor))

    def items(self):
        return list(self._items)

    def names(self) -> list[str]:
        return [name for name, _ in self._items]

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self._items]

    def __getitem__(self, name: str) -> Tensor:
        for n, t in self._items:
            if n == name:
                return t
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def size(self) -> int:
        return sum(t.values.size for _, t in self._items)

    def copy(self) -> "ParamVector":
        return ParamVector((n, Tensor(t.values.copy())) for n, t in self._items)

    def zero_grad(self) -> None:
        for _, t in self._items:
            t.zero_grad()

    def same_template(self, other: "ParamVector") -> bool:
        return [(n, t.values.shape) for n, t in self._items] == [
            (n, t.values.shape) for n, t in other._items
        ]

    def grads(self) -> dict[str, np.ndarray]:
        return {n: t.grad for n, t in self._items}


def flatten(params: ParamVector) -> np.ndarray:
    if len(params) == 0:
        return np.zeros(0)
    return np.concatenate([t.values.ravel() for _, t in params])


def unflatten(vector: np.ndarray, template: ParamVector) -> ParamVector:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (template.size(),):
        raise ShapeError(
            f"vector of length {vector.shape} does not match template size {template.size()}"
        )
    out = []
    offset = 0
    for name, t in template:
        n = t.values.size
        out.append((name, Tensor(vector[offset : offset + n].reshape(t.values.shape).copy())))
        offset += n
    return ParamVector(out)


def to_bytes(params: ParamVector) -> bytes:
    chunks = [struct.pack("<I", len(params))]
    for name, t in params:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        shape = t.values.shape
        chunks.append(struct.pack("<I", len(shape)))
        for dim in shape:
            chunks.append(struct.pack("<I", dim))
        chunks.append(np.ascontiguousarray(t.values, dtype="<f8").tobytes())
    return b"".join(chunks)


def from_bytes(data: bytes) -> ParamVector:
    offset = 0

    def read(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise ValueError("truncated parameter payload")
        vals = struct.unpack_from(fmt, data, offset)
        offset += size
        return vals

    (count,) = read("<I")
    items = []
    for _ in range(count):
        (name_len,) = read("<I")
        if offset + name_len > len(data):
            raise ValueError("truncated parameter payload")
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = read("<I")
        shape = tuple(read("<" + "I" * rank)) if rank else ()
        n = int(np.prod(shape)) if shape else 1
        nbytes = 8 * n
        if offset + nbytes > len(data):
            raise ValueError("truncated parameter payload")
        values = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(shape)
        offset += nbytes
        items.append((name, Tensor(values.astype(np.float64))))
    if offset != len(data):
        raise ValueError(f"{len(data) - offset} trailing bytes after parameter payload")
    return ParamVector(items)
