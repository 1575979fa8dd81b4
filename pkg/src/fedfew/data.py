"""Datasets, class splits, and federated partitioning.

Feature vectors only: either synthetic Gaussian clusters or a CSV of
precomputed embeddings.  Labels are dense global class ids shared by every
client; partitioning assigns sample indices to clients either uniformly per
class (IID) or by Dirichlet-distributed per-class proportions (non-IID).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np


class CsvParseError(ValueError):
    pass


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64 in [0, num_classes)
    num_classes: int
    provenance: str

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise ValueError(f"{self.labels.shape} labels for {n} samples")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels out of range")
        counts = np.bincount(self.labels, minlength=self.num_classes)
        if (counts == 0).any():
            empty = int(np.argmin(counts))
            raise ValueError(f"class {empty} has no samples")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class ClassSplit:
    base: tuple[int, ...]
    validation: tuple[int, ...]
    novel: tuple[int, ...]

    def __post_init__(self):
        all_ids = self.base + self.validation + self.novel
        if len(set(all_ids)) != len(all_ids):
            raise ValueError("class split sides overlap")


@dataclass(frozen=True)
class Partition:
    by_client: tuple[np.ndarray, ...]  # sorted sample indices per client

    @property
    def num_clients(self) -> int:
        return len(self.by_client)


def synth_gaussian(
    num_classes: int, per_class: int, dim: int, separation: float, seed
) -> Dataset:
    """Isotropic unit-variance Gaussian clusters at random unit directions
    scaled by ``separation``; deterministic in the seed."""
    if min(num_classes, per_class, dim) <= 0:
        raise ValueError("num_classes, per_class and dim must be positive")
    from .seeding import spawn_rng

    rng = seed if isinstance(seed, np.random.Generator) else spawn_rng(seed, "synth")
    features = np.empty((num_classes * per_class, dim))
    labels = np.empty(num_classes * per_class, dtype=np.int64)
    for c in range(num_classes):
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        center = separation * direction
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = center + rng.normal(size=(per_class, dim))
        labels[block] = c
    return Dataset(features, labels, num_classes, "synthetic")


def save_csv(dataset: Dataset, path: str) -> None:
    """Write ``label,f0,...`` with 17 significant digits (round-trip exact)."""
    header = "label," + ",".join(f"f{i}" for i in range(dataset.dim))
    lines = [header]
    for y, row in zip(dataset.labels, dataset.features):
        lines.append(str(int(y)) + "," + ",".join(f"{v:.17g}" for v in row))
    body = "\n".join(lines) + "\n"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_csv(path: str) -> Dataset:
    """Parse ``label,f0,...,f{d-1}`` rows; labels are re-indexed densely
     0..|C|-1 in first-appearance order."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvParseError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    dim = len(header) - 1
    if dim < 1 or header[0] != "label" or header[1:] != [f"f{i}" for i in range(dim)]:
        raise CsvParseError(f"{path} line 1: expected header 'label,f0,...,f{{d-1}}'")
    raw_labels: list[int] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != dim + 1:
            raise CsvParseError(
                f"{path} line {lineno}: expected {dim + 1} fields, got {len(cells)}"
            )
        try:
            raw_labels.append(int(cells[0]))
        except ValueError:
            raise CsvParseError(
                f"{path} line {lineno}: non-integer label {cells[0]!r}"
            ) from None
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError:
            raise CsvParseError(f"{path} line {lineno}: non-numeric cell") from None
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    remap: dict[int, int] = {}
    for y in raw_labels:
        if y not in remap:
            remap[y] = len(remap)
    labels = np.array([remap[y] for y in raw_labels], dtype=np.int64)
    return Dataset(np.array(rows, dtype=np.float64), labels, len(remap), path)


def split_classes(num_classes: int, counts: tuple[int, int, int], seed) -> ClassSplit:
    """Uniform random disjoint base/validation/novel split of class ids."""
    b, v, n = counts
    if min(b, v, n) < 0 or b + v + n != num_classes:
        raise ValueError(f"split counts {counts} do not sum to {num_classes}")
    from .seeding import spawn_rng

    rng = seed if isinstance(seed, np.random.Generator) else spawn_rng(seed, "split")
    order = rng.permutation(num_classes)
    return ClassSplit(
        base=tuple(sorted(int(c) for c in order[:b])),
        validation=tuple(sorted(int(c) for c in order[b : b + v])),
        novel=tuple(sorted(int(c) for c in order[b + v :])),
    )


def largest_remainder(total: int, proportions: np.ndarray) -> np.ndarray:
    """Apportion ``total`` items to integer counts summing exactly to total."""
    proportions = np.asarray(proportions, dtype=np.float64)
    scaled = proportions / proportions.sum() * total
    counts = np.floor(scaled).astype(np.int64)
    short = total - int(counts.sum())
    if short:
        remainders = scaled - counts
        # ties broken toward lower client index (stable argsort on -remainder)
        top = np.argsort(-remainders, kind="stable")[:short]
        counts[top] += 1
    return counts


def dirichlet_proportions(rng: np.random.Generator, num_clients: int, alpha: float) -> np.ndarray:
    return rng.dirichlet(np.full(num_clients, alpha))


def _assign_dirichlet(
    labels: np.ndarray, num_classes: int, num_clients: int, alpha: float,
    rng: np.random.Generator,
) -> list[list[int]]:
    assigned: list[list[int]] = [[] for _ in range(num_clients)]
    for c in range(num_classes):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        counts = largest_remainder(len(idx), dirichlet_proportions(rng, num_clients, alpha))
        offset = 0
        for client, cnt in enumerate(counts):
            assigned[client].extend(int(i) for i in idx[offset : offset + cnt])
            offset += cnt
    return assigned


def _assign_iid(
    labels: np.ndarray, num_classes: int, num_clients: int, rng: np.random.Generator
) -> list[list[int]]:
    assigned: list[list[int]] = [[] for _ in range(num_clients)]
    dealt = 0
    for c in range(num_classes):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        # one continuous round-robin across classes: per-class counts differ
        # by at most one, and no client is empty whenever n >= num_clients
        for sample in idx:
            assigned[dealt % num_clients].append(int(sample))
            dealt += 1
    return assigned


def partition(dataset: Dataset, num_clients: int, mode: str, seed, alpha: float = 1.0) -> Partition:
    """Assign every sample index to exactly one client.

    IID deals each class round-robin after a seeded shuffle (per-class counts
    differ by at most one across clients).  Dirichlet draws per-class client
    proportions from Dir(alpha) and assigns contiguous blocks sized by
    largest-remainder apportionment (counts conserved exactly).  A draw that
    leaves some client with no samples at all is retried, at most 100 times.
    """
    if num_clients < 1:
        raise PartitionError("need at least one client")
    if num_clients > len(dataset):
        raise PartitionError(
            f"cannot partition {len(dataset)} samples into {num_clients} clients"
        )
    from .seeding import spawn_rng

    rng = seed if isinstance(seed, np.random.Generator) else spawn_rng(seed, "partition")
    for _ in range(100):
        if mode == "iid":
            assigned = _assign_iid(dataset.labels, dataset.num_classes, num_clients, rng)
        elif mode == "dirichlet":
            assigned = _assign_dirichlet(
                dataset.labels, dataset.num_classes, num_clients, alpha, rng
            )
        else:
            raise PartitionError(f"unknown partition mode {mode!r}")
        if all(assigned):
            return Partition(tuple(np.array(sorted(a), dtype=np.int64) for a in assigned))
    raise PartitionError(f"no non-empty {mode} partition found after 100 draws")


def save_partition(part: Partition, path: str) -> None:
    lines = ["client,sample_index"]
    for client, idx in enumerate(part.by_client):
        lines.extend(f"{client},{int(i)}" for i in idx)
    body = "\n".join(lines) + "\n"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_partition(path: str) -> Partition:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "client,sample_index":
        raise CsvParseError(f"{path}: expected header 'client,sample_index'")
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            client_s, idx_s = line.split(",")
            pairs.append((int(client_s), int(idx_s)))
        except ValueError:
            raise CsvParseError(f"{path} line {lineno}: bad row {line!r}") from None
    num_clients = max(c for c, _ in pairs) + 1 if pairs else 0
    by_client = [[] for _ in range(num_clients)]
    for client, idx in pairs:
        by_client[client].append(idx)
    return Partition(tuple(np.array(sorted(a), dtype=np.int64) for a in by_client))
