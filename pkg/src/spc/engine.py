"""Classification kernel: class similarity, weighted-max and linear-sum
ranking over a user store plus common prototypes, and the mean-update
baselines.

Scoring rules
-------------
Per class c over C = C_u ∪ C_m:

    weighted-max : score(c) = max( s(c, q, V_u), w * s(c, q, V_m) )
    linear-sum   : score(c) = (1 - w_s) * s(c, q, V_u) + w_s * s(c, q, V_m)

where s(c, q, V) is the maximum dot product between q and the stored
vectors of class c, and exactly 0 when V holds no vector of class c.

Tie rule (rankings are fully deterministic): score descending, then
classes present in the user store before prototype-only classes, then
smaller class id. Score comparisons are exact on the float64 accumulated
values; no epsilon is applied in ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (DimensionMismatchError, PrototypeSet, SpcError, UserStore,
                   check_unit, normalize)


@dataclass(frozen=True)
class SpcConfig:
    """Weighted-max configuration. w = 1 degenerates to plain 1-NN."""

    w: float = 0.85

    def __post_init__(self):
        if not (0.0 < self.w <= 1.0):
            raise SpcError(f"w must be in (0, 1], got {self.w}")


@dataclass(frozen=True)
class SumConfig:
    """Linear-combination configuration. w_s = 0 ignores the prototypes."""

    w_s: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.w_s <= 1.0):
            raise SpcError(f"w_s must be in [0, 1], got {self.w_s}")


@dataclass
class Ranking:
    """Classes with scores, best first. Scores are the post-weight values."""

    class_ids: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.class_ids)

    def top1(self) -> int:
        if len(self.class_ids) == 0:
            raise SpcError("empty ranking")
        return int(self.class_ids[0])

    def hit(self, true_class: int, k: int) -> bool:
        return true_class in self.class_ids[:k]

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(c), float(s)) for c, s in zip(self.class_ids, self.scores)]


@dataclass
class DotCounter:
    """Instrumentation: dot products spent per ranking call."""

    total: int = 0
    per_call: list = field(default_factory=list)

    def add(self, n: int) -> None:
        self.total += n
        self.per_call.append(n)


def _query64(query, dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (dim,):
        raise DimensionMismatchError(f"query shape {q.shape}, expected ({dim},)")
    check_unit(q)
    return q


def class_similarity(class_id: int, query, store) -> float:
    """Max dot product between query and stored vectors of one class.

    Returns exactly 0.0 when the store holds no vector of that class.
    `store` may be a UserStore or a PrototypeSet.
    """
    if isinstance(store, PrototypeSet):
        q = _query64(query, store.dim)
        mask = store.class_ids == class_id
        if not mask.any():
            return 0.0
        return float(np.max(store.matrix64[mask] @ q))
    q = _query64(query, store.dim)
    mask = store.classes == class_id
    if not mask.any():
        return 0.0
    return float(np.max(store.vectors64[mask] @ q))


def _aggregate_scores(dots_u, cls_u, dots_m, ids_m):
    """Per-class max of user dots plus prototype dots, absent classes 0.

    Returns (candidate ids, user score, proto score, user-presence flags).
    Shared by the per-call path below and the batched stream evaluator so
    both aggregate scores identically.
    """
    n_user = 0 if dots_u is None else len(dots_u)
    n_proto = 0 if dots_m is None else len(dots_m)
    if n_user == 0 and n_proto == 0:
        raise SpcError("nothing to predict: empty class union")
    max_id = -1
    if n_user:
        max_id = max(max_id, int(cls_u.max()))
    if n_proto:
        max_id = max(max_id, int(ids_m.max()))
    size = max_id + 1

    su = np.full(size, -np.inf)
    in_user = np.zeros(size, dtype=bool)
    if n_user:
        np.maximum.at(su, cls_u, dots_u)
        in_user[cls_u] = True

    sm = np.zeros(size)
    in_proto = np.zeros(size, dtype=bool)
    if n_proto:
        sm[ids_m] = dots_m
        in_proto[ids_m] = True

    cand = np.flatnonzero(in_user | in_proto)
    s_user = np.where(in_user[cand], su[cand], 0.0)
    s_proto = np.where(in_proto[cand], sm[cand], 0.0)
    return cand, s_user, s_proto, in_user[cand]


def _gather_scores(query, store: UserStore | None, protos: PrototypeSet | None):
    """Per-call scoring plumbing: compute dots, then aggregate per class."""
    dims = [s.dim for s in (store, protos) if s is not None]
    if not dims:
        raise SpcError("nothing to predict: no user store and no prototypes")
    dim = dims[0]
    if any(d != dim for d in dims):
        raise DimensionMismatchError("store/prototype dimension mismatch")
    q = _query64(query, dim)

    n_user = len(store) if store is not None else 0
    n_proto = len(protos) if protos is not None else 0
    dots_u = store.vectors64 @ q if n_user else None
    cls_u = store.classes if n_user else None
    dots_m = protos.matrix64 @ q if n_proto else None
    ids_m = protos.class_ids if n_proto else None
    cand, s_user, s_proto, user_flags = _aggregate_scores(
        dots_u, cls_u, dots_m, ids_m)
    return cand, s_user, s_proto, user_flags, n_user + n_proto, n_proto > 0


def _sorted_ranking(cand, scores, user_flags) -> Ranking:
    order = np.lexsort((cand, ~user_flags, -scores))
    return Ranking(class_ids=cand[order], scores=scores[order])


def spc_rank(query, store: UserStore | None, protos: PrototypeSet | None,
             cfg: SpcConfig, counter: DotCounter | None = None) -> Ranking:
    """Weighted-max personalized ranking over C_u ∪ C_m.

    With no prototype set at all there is nothing to take the max against,
    so the scores are the raw per-class user similarities (which keeps the
    user-only reduction exact even for negative similarities).
    """
    cand, s_user, s_proto, user_flags, ndots, has_protos = _gather_scores(
        query, store, protos)
    if counter is not None:
        counter.add(ndots)
    scores = np.maximum(s_user, cfg.w * s_proto) if has_protos else s_user
    return _sorted_ranking(cand, scores, user_flags)


def spc_sum_rank(query, store: UserStore | None, protos: PrototypeSet | None,
                 cfg: SumConfig, counter: DotCounter | None = None) -> Ranking:
    """Linear-combination ranking over C_u ∪ C_m."""
    cand, s_user, s_proto, user_flags, ndots, _ = _gather_scores(
        query, store, protos)
    if counter is not None:
        counter.add(ndots)
    scores = (1.0 - cfg.w_s) * s_user + cfg.w_s * s_proto
    return _sorted_ranking(cand, scores, user_flags)


def ncm_rank(query, protos: PrototypeSet,
             counter: DotCounter | None = None) -> Ranking:
    """Nearest-class-mean ranking over the prototype classes only."""
    if protos is None or len(protos) == 0:
        raise SpcError("empty prototype set")
    q = _query64(query, protos.dim)
    if counter is not None:
        counter.add(len(protos))
    scores = protos.matrix64 @ q
    flags = np.zeros(len(protos), dtype=bool)
    return _sorted_ranking(protos.class_ids.copy(), scores, flags)


def register(store: UserStore, vec, class_id: int) -> UserStore:
    """Append one (embedding, class) pair to the user store."""
    store.append(vec, class_id)
    return store


class MeanState:
    """Per-class running means for the incremental-mean baselines.

    Seeding modes:
      full-history : each initial class starts at its true training count
                     (the prototype stands for that many samples);
      mean-as-one  : each initial class starts at count 1 (the prototype
                     counts as a single sample).

    The accumulator stays raw in float64; the exposed prototype is
    normalize(accumulator / count), renormalized at read time only.
    """

    FULL_HISTORY = "full-history"
    MEAN_AS_ONE = "mean-as-one"

    def __init__(self, dim: int) -> None:
        self.dim = dim
        self._acc: dict[int, np.ndarray] = {}
        self._count: dict[int, int] = {}
        self._exposed: dict[int, np.ndarray] = {}

    @classmethod
    def from_prototypes(cls, protos: PrototypeSet, mode: str) -> "MeanState":
        state = cls(protos.dim)
        for i, c in enumerate(protos.class_ids):
            c = int(c)
            if mode == cls.FULL_HISTORY:
                if protos.counts is None or c not in protos.counts:
                    raise SpcError(
                        "full-history seeding needs per-class training counts")
                count = protos.counts[c]
            elif mode == cls.MEAN_AS_ONE:
                count = 1
            else:
                raise SpcError(f"unknown mean seeding mode {mode!r}")
            vec = protos.matrix64[i]
            state._acc[c] = vec * count
            state._count[c] = count
            state._expose(c)
        return state

    def _expose(self, class_id: int) -> None:
        mean = self._acc[class_id] / self._count[class_id]
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise SpcError(f"mean of class {class_id} cancelled to zero")
        self._exposed[class_id] = mean / norm

    def update(self, vec, class_id: int) -> "MeanState":
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected dim {self.dim}, got shape {v.shape}")
        check_unit(v)
        class_id = int(class_id)
        if class_id in self._acc:
            self._acc[class_id] = self._acc[class_id] + v
            self._count[class_id] += 1
        else:
            self._acc[class_id] = v.copy()
            self._count[class_id] = 1
        self._expose(class_id)
        return self

    def count(self, class_id: int) -> int:
        return self._count[class_id]

    def prototype(self, class_id: int) -> np.ndarray:
        return self._exposed[class_id].copy()

    def rank(self, query, counter: DotCounter | None = None) -> Ranking:
        if not self._exposed:
            raise SpcError("empty mean state")
        q = _query64(query, self.dim)
        ids = np.fromiter(sorted(self._exposed), dtype=np.int64)
        mat = np.stack([self._exposed[int(c)] for c in ids])
        if counter is not None:
            counter.add(len(ids))
        scores = mat @ q
        flags = np.zeros(len(ids), dtype=bool)
        return _sorted_ranking(ids, scores, flags)


def ncm_update(state: MeanState, vec, class_id: int) -> MeanState:
    """Fold one sample into the running per-class means."""
    return state.update(vec, class_id)
