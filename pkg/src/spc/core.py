"""Core domain types: label interning, unit embeddings, per-user vector stores.

Storage convention: embedding components are float32; all accumulation
(dot products, means) happens in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_NORM_TOL = 1e-6


class SpcError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatchError(SpcError):
    pass


class NormalizationError(SpcError):
    pass


class LabelRegistry:
    """Bijective mapping between label strings and dense non-negative ids.

    Labels are compared byte-exact: no case folding, no Unicode
    normalization. Interning the same string twice yields the same id.
    """

    def __init__(self) -> None:
        self._id_of: dict[str, int] = {}
        self._label_of: list[str] = []

    def intern(self, label: str) -> int:
        if not isinstance(label, str) or label == "":
            raise SpcError("label must be a non-empty string")
        existing = self._id_of.get(label)
        if existing is not None:
            return existing
        new_id = len(self._label_of)
        self._id_of[label] = new_id
        self._label_of.append(label)
        return new_id

    def resolve(self, class_id: int) -> str:
        return self._label_of[class_id]

    def __len__(self) -> int:
        return len(self._label_of)

    def __contains__(self, label: str) -> bool:
        return label in self._id_of

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._label_of)


def normalize(raw) -> np.ndarray:
    """Scale a vector to unit L2 norm; returns a float32 array.

    Raises NormalizationError for the zero vector (no silent substitution).
    """
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 1:
        raise NormalizationError("expected a 1-d vector")
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise NormalizationError("cannot normalize zero or non-finite vector")
    return (v / norm).astype(np.float32)


def check_unit(vec: np.ndarray, tol: float = UNIT_NORM_TOL) -> None:
    norm = float(np.linalg.norm(np.asarray(vec, dtype=np.float64)))
    if abs(norm - 1.0) > tol:
        raise NormalizationError(f"vector norm {norm!r} is not 1 within {tol}")


@dataclass(frozen=True)
class LabeledRecord:
    """One stream element: a user's t-th record with its true class."""

    user: str
    t: int
    class_id: int
    vec: np.ndarray

    def __post_init__(self):
        if self.t < 1:
            raise SpcError(f"record index t must be >= 1, got {self.t}")


class UserStore:
    """Append-only per-user store of (embedding, class) pairs.

    Single-writer; readers may observe any consistent prefix. Prior entries
    are never mutated or reordered. Keeps a float64 mirror of the float32
    storage so ranking accumulates in 64-bit without per-call conversion.
    """

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise SpcError("dim must be positive")
        self.dim = dim
        cap = 32
        self._vecs32 = np.empty((cap, dim), dtype=np.float32)
        self._vecs64 = np.empty((cap, dim), dtype=np.float64)
        self._classes = np.empty(cap, dtype=np.int64)
        self._n = 0
        self.class_set: set[int] = set()

    def append(self, vec: np.ndarray, class_id: int) -> None:
        v = np.asarray(vec, dtype=np.float32)
        if v.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected dim {self.dim}, got shape {v.shape}")
        check_unit(v)
        if self._n == self._vecs32.shape[0]:
            self._grow()
        self._vecs32[self._n] = v
        self._vecs64[self._n] = v.astype(np.float64)
        self._classes[self._n] = class_id
        self._n += 1
        self.class_set.add(int(class_id))

    def _grow(self) -> None:
        cap = self._vecs32.shape[0] * 2
        for name in ("_vecs32", "_vecs64"):
            old = getattr(self, name)
            new = np.empty((cap, self.dim), dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)
        classes = np.empty(cap, dtype=np.int64)
        classes[: self._n] = self._classes[: self._n]
        self._classes = classes

    def __len__(self) -> int:
        return self._n

    @property
    def vectors(self) -> np.ndarray:
        """float32 view of the stored embeddings, in insertion order."""
        return self._vecs32[: self._n]

    @property
    def vectors64(self) -> np.ndarray:
        return self._vecs64[: self._n]

    @property
    def classes(self) -> np.ndarray:
        return self._classes[: self._n]


class PrototypeSet:
    """One unit-normalized mean embedding per initial class (shared by users).

    `counts` optionally records how many training samples produced each
    prototype; mean-update baselines need it for full-history seeding.
    """

    def __init__(self, dim: int, class_ids=(), vectors=None, counts=None) -> None:
        if dim < 1:
            raise SpcError("dim must be positive")
        self.dim = dim
        ids = np.asarray(list(class_ids), dtype=np.int64)
        if vectors is None:
            vectors = np.empty((0, dim), dtype=np.float32)
        vecs = np.asarray(vectors, dtype=np.float32).reshape(len(ids), dim)
        if len(set(ids.tolist())) != len(ids):
            raise SpcError("duplicate class id in prototype set")
        for row in vecs:
            check_unit(row)
        self.class_ids = ids
        self.matrix = vecs
        self.matrix64 = vecs.astype(np.float64)
        self.class_set: set[int] = set(int(c) for c in ids)
        self.counts: dict[int, int] | None = (
            {int(k): int(v) for k, v in counts.items()} if counts else None)

    def __len__(self) -> int:
        return len(self.class_ids)
