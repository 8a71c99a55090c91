"""Prequential stream evaluation: replay each user's records through a
strategy (predict, score, then learn the true label), log per-record
outcomes, and aggregate them into bucketed report tables.

The harness itself tracks which classes a user has seen so far; the
in-union flag therefore reflects the protocol's bookkeeping even for
strategies that do not learn.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .core import LabeledRecord, PrototypeSet, SpcError, UserStore
from .data_io import ReportTable
from .engine import (DotCounter, MeanState, Ranking, SpcConfig, SumConfig,
                     _aggregate_scores, _sorted_ranking, ncm_rank, spc_rank,
                     spc_sum_rank)

STRATEGY_KINDS = ("spc", "spc-sum", "ncm-fixed", "ncm-incr", "1nn", "1nn-star")


@dataclass(frozen=True)
class Strategy:
    """Which classifier to replay the streams through.

    1nn is spc with w = 1 on the same code path; 1nn-star is spc with the
    prototype set dropped. `learn` disables user-store registration
    (diagnostic switch; the protocol default is to learn every record).
    """

    kind: str = "spc"
    w: float = 0.85
    w_s: float = 0.5
    mean_mode: str = MeanState.FULL_HISTORY
    learn: bool = True

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise SpcError(f"unknown strategy kind {self.kind!r}")
        if self.kind in ("spc", "1nn"):
            SpcConfig(self.w if self.kind == "spc" else 1.0)
        if self.kind == "spc-sum":
            SumConfig(self.w_s)
        if self.kind == "ncm-incr" and self.mean_mode not in (
                MeanState.FULL_HISTORY, MeanState.MEAN_AS_ONE):
            raise SpcError(f"unknown mean mode {self.mean_mode!r}")

    def label(self) -> str:
        if self.kind == "spc":
            return f"spc (w={self.w:g})"
        if self.kind == "spc-sum":
            return f"spc-sum (w_s={self.w_s:g})"
        if self.kind == "ncm-incr":
            return f"ncm-incr ({self.mean_mode})"
        return self.kind


@dataclass(frozen=True)
class Outcome:
    """Per-record evaluation result."""

    user: str
    t: int
    true_class: int
    hits: dict[int, bool]
    in_initial: bool
    in_union: bool
    predicted: int | None


def _check_contiguous(records: Sequence[LabeledRecord]) -> None:
    for i, rec in enumerate(records, start=1):
        if rec.t != i:
            raise SpcError(
                f"user {records[0].user!r}: stream t values not contiguous "
                f"(expected {i}, got {rec.t})")


class _StrategyState:
    """Mutable per-user state for one strategy replay."""

    def __init__(self, strategy: Strategy, protos: PrototypeSet | None, dim: int):
        self.strategy = strategy
        self.protos = protos
        kind = strategy.kind
        if kind in ("ncm-fixed", "ncm-incr") and (protos is None or len(protos) == 0):
            raise SpcError(f"strategy {kind} needs a non-empty prototype set")
        self.store = UserStore(dim) if kind in ("spc", "spc-sum", "1nn",
                                                "1nn-star") else None
        self.means = (MeanState.from_prototypes(protos, strategy.mean_mode)
                      if kind == "ncm-incr" else None)
        if kind == "spc":
            self.cfg = SpcConfig(strategy.w)
        elif kind == "1nn":
            self.cfg = SpcConfig(1.0)
        elif kind == "spc-sum":
            self.cfg = SumConfig(strategy.w_s)

    def rank(self, query, counter: DotCounter | None) -> Ranking | None:
        kind = self.strategy.kind
        if kind in ("spc", "1nn"):
            if len(self.store) == 0 and (self.protos is None or
                                         len(self.protos) == 0):
                return None
            return spc_rank(query, self.store, self.protos, self.cfg, counter)
        if kind == "1nn-star":
            if len(self.store) == 0:
                return None
            return spc_rank(query, self.store, None, SpcConfig(1.0), counter)
        if kind == "spc-sum":
            if len(self.store) == 0 and (self.protos is None or
                                         len(self.protos) == 0):
                return None
            return spc_sum_rank(query, self.store, self.protos, self.cfg,
                                counter)
        if kind == "ncm-fixed":
            return ncm_rank(query, self.protos, counter)
        return self.means.rank(query, counter)

    def learn(self, rec: LabeledRecord) -> None:
        if not self.strategy.learn:
            return
        if self.store is not None:
            self.store.append(rec.vec, rec.class_id)
        if self.means is not None:
            self.means.update(rec.vec, rec.class_id)


def _outcome(rec, ranking, k_list, max_k, initial, seen) -> Outcome:
    if ranking is None:
        hits = {k: False for k in k_list}
        predicted = None
    else:
        top = ranking.class_ids[:max_k]
        pos = np.flatnonzero(top == rec.class_id)
        rank_pos = int(pos[0]) if len(pos) else max_k
        hits = {k: rank_pos < k for k in k_list}
        predicted = int(top[0])
    return Outcome(
        user=rec.user, t=rec.t, true_class=rec.class_id, hits=hits,
        in_initial=rec.class_id in initial,
        in_union=rec.class_id in initial or rec.class_id in seen,
        predicted=predicted)


def _run_nn_family(records, protos, strategy, k_list,
                   counter) -> list[Outcome]:
    """Batched replay for the nearest-neighbor-family strategies.

    Under the predict-then-learn protocol the user store at step t holds
    exactly records 1..t-1, so all query/store dot products are the strict
    lower triangle of one Gram matrix and all prototype dot products are a
    single matrix product. Scores aggregate through the same helper as the
    per-call ranking functions.
    """
    dim = len(records[0].vec)
    use_protos = strategy.kind != "1nn-star" and protos is not None \
        and len(protos) > 0
    if use_protos and protos.dim != dim:
        raise SpcError(f"stream dim {dim} != prototype dim {protos.dim}")
    queries = np.empty((len(records), dim), dtype=np.float64)
    for i, rec in enumerate(records):
        v = np.asarray(rec.vec, dtype=np.float64)
        if v.shape != (dim,):
            raise SpcError(
                f"user {rec.user!r} t={rec.t}: vector shape {v.shape}")
        queries[i] = v
    norms = np.linalg.norm(queries, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
    if len(bad):
        raise SpcError(f"record t={records[bad[0]].t} is not unit-normalized")

    cls = np.fromiter((r.class_id for r in records), dtype=np.int64,
                      count=len(records))
    gram = queries @ queries.T if strategy.learn else None
    proto_dots = protos.matrix64 @ queries.T if use_protos else None

    if strategy.kind == "spc-sum":
        w_user, w_proto = 1.0 - strategy.w_s, strategy.w_s
        combine = lambda su, sm: w_user * su + w_proto * sm
    elif not use_protos:
        # no prototype side: raw user similarities (matches spc_rank)
        combine = lambda su, sm: su
    else:
        w = strategy.w if strategy.kind == "spc" else 1.0
        combine = lambda su, sm: np.maximum(su, w * sm)

    initial = protos.class_set if protos is not None else set()
    seen: set[int] = set()
    n_proto = len(protos) if use_protos else 0
    ids_m = protos.class_ids if use_protos else None
    max_k = max(k_list)
    outcomes = []
    for t, rec in enumerate(records):
        n_user = t if strategy.learn else 0
        if n_user == 0 and n_proto == 0:
            ranking = None
        else:
            dots_u = gram[:t, t] if n_user else None
            dots_m = proto_dots[:, t] if n_proto else None
            cand, s_user, s_proto, flags = _aggregate_scores(
                dots_u, cls[:t] if n_user else None, dots_m, ids_m)
            ranking = _sorted_ranking(cand, combine(s_user, s_proto), flags)
            if counter is not None:
                counter.add(n_user + n_proto)
        outcomes.append(_outcome(rec, ranking, k_list, max_k, initial, seen))
        seen.add(rec.class_id)
    return outcomes


def run_user_stream(records: Sequence[LabeledRecord],
                    protos: PrototypeSet | None,
                    strategy: Strategy,
                    k_list: Sequence[int] = (1, 5),
                    counter: DotCounter | None = None) -> list[Outcome]:
    """Replay one user's stream: predict, log, then register the true label.

    A record whose class cannot possibly be ranked (nothing stored yet and
    no prototypes) is logged as a miss with no prediction rather than an
    error; that is the 1-NN* cold start.
    """
    records = list(records)
    if not records:
        return []
    _check_contiguous(records)
    if strategy.kind in ("spc", "spc-sum", "1nn", "1nn-star"):
        return _run_nn_family(records, protos, strategy, k_list, counter)
    dim = len(records[0].vec)
    state = _StrategyState(strategy, protos, dim)
    initial = protos.class_set if protos is not None else set()
    seen: set[int] = set()
    max_k = max(k_list)
    outcomes = []
    for rec in records:
        ranking = state.rank(rec.vec, counter)
        outcomes.append(_outcome(rec, ranking, k_list, max_k, initial, seen))
        state.learn(rec)
        seen.add(rec.class_id)
    return outcomes


def group_by_user(records: Iterable[LabeledRecord]) -> dict[str, list[LabeledRecord]]:
    """Split a record sequence into per-user streams, preserving order."""
    by_user: dict[str, list[LabeledRecord]] = {}
    for rec in records:
        by_user.setdefault(rec.user, []).append(rec)
    return by_user


def run_streams(streams: dict[str, list[LabeledRecord]],
                protos: PrototypeSet | None, strategy: Strategy,
                k_list: Sequence[int] = (1, 5)) -> dict[str, list[Outcome]]:
    """Evaluate every user independently; users never share state."""
    return {user: run_user_stream(recs, protos, strategy, k_list)
            for user, recs in sorted(streams.items())}


def mean_accuracy(outcomes: dict[str, list[Outcome]], t: int, k: int) -> float:
    """Fraction of users whose record at index t was a top-k hit.

    Users whose stream is shorter than t are excluded; if none reaches t,
    that is an error.
    """
    hits, users = 0, 0
    for user_outcomes in outcomes.values():
        if t <= len(user_outcomes):
            users += 1
            if user_outcomes[t - 1].hits[k]:
                hits += 1
    if users == 0:
        raise SpcError(f"no user has a record at t={t}")
    return hits / users


@dataclass
class BucketReport:
    """Bucketed aggregate of the per-record outcomes.

    accuracy[k][b] is the per-bucket average of the per-t mean accuracy;
    the upper-limit rows are the analogous rates of the true class being
    in the initial class set / in the union seen so far. Conditional rows
    pool records across users within the bucket (None if the pool is
    empty).
    """

    bucket_width: int
    buckets: list[tuple[int, int]]
    k_list: tuple[int, ...]
    accuracy: dict[int, list[float]]
    in_initial: list[float]
    in_union: list[float]
    cond_initial: dict[int, list[float | None]]
    cond_outside: dict[int, list[float | None]]
    ragged: bool = False
    partial_final_bucket: bool = False

    def to_table(self, label: str) -> ReportTable:
        columns = [f"t{lo}-t{hi} top-{k}"
                   for lo, hi in self.buckets for k in self.k_list]
        nk = len(self.k_list)
        rows = [
            (label, [self.accuracy[k][b]
                     for b in range(len(self.buckets)) for k in self.k_list]),
            ("upper limit (initial)",
             [self.in_initial[b] for b in range(len(self.buckets))
              for _ in range(nk)]),
            ("upper limit (union)",
             [self.in_union[b] for b in range(len(self.buckets))
              for _ in range(nk)]),
            ("within initial classes",
             [self.cond_initial[k][b]
              for b in range(len(self.buckets)) for k in self.k_list]),
            ("outside initial classes",
             [self.cond_outside[k][b]
              for b in range(len(self.buckets)) for k in self.k_list]),
        ]
        notes = []
        if self.ragged:
            notes.append("streams have unequal lengths; per-t means average "
                         "only the users that reach t")
        if self.partial_final_bucket:
            notes.append("final bucket is shorter than the bucket width")
        return ReportTable(columns=columns, rows=rows, notes=notes)


def bucket_report(outcomes: dict[str, list[Outcome]], bucket_width: int = 50,
                  k_list: Sequence[int] = (1, 5)) -> BucketReport:
    if not outcomes or all(len(v) == 0 for v in outcomes.values()):
        raise SpcError("no outcomes to report")
    if bucket_width < 1:
        raise SpcError("bucket width must be >= 1")
    lengths = {len(v) for v in outcomes.values() if v}
    T = max(lengths)
    ragged = len(lengths) > 1
    buckets = [(lo, min(lo + bucket_width - 1, T))
               for lo in range(1, T + 1, bucket_width)]
    partial = T % bucket_width != 0

    k_list = tuple(k_list)
    accuracy = {k: [] for k in k_list}
    in_initial, in_union = [], []
    cond_initial = {k: [] for k in k_list}
    cond_outside = {k: [] for k in k_list}
    for lo, hi in buckets:
        ts = range(lo, hi + 1)
        for k in k_list:
            accuracy[k].append(
                float(np.mean([mean_accuracy(outcomes, t, k) for t in ts])))
        per_t_rates = {"init": [], "union": []}
        pool_in = {k: [] for k in k_list}
        pool_out = {k: [] for k in k_list}
        for t in ts:
            at_t = [o[t - 1] for o in outcomes.values() if t <= len(o)]
            if not at_t:
                continue
            per_t_rates["init"].append(np.mean([o.in_initial for o in at_t]))
            per_t_rates["union"].append(np.mean([o.in_union for o in at_t]))
            for o in at_t:
                pool = pool_in if o.in_initial else pool_out
                for k in k_list:
                    pool[k].append(o.hits[k])
        in_initial.append(float(np.mean(per_t_rates["init"])))
        in_union.append(float(np.mean(per_t_rates["union"])))
        for k in k_list:
            cond_initial[k].append(
                float(np.mean(pool_in[k])) if pool_in[k] else None)
            cond_outside[k].append(
                float(np.mean(pool_out[k])) if pool_out[k] else None)

    return BucketReport(bucket_width=bucket_width, buckets=buckets,
                        k_list=k_list, accuracy=accuracy,
                        in_initial=in_initial, in_union=in_union,
                        cond_initial=cond_initial, cond_outside=cond_outside,
                        ragged=ragged, partial_final_bucket=partial)


def evaluate(streams: dict[str, list[LabeledRecord]],
             protos: PrototypeSet | None, strategy: Strategy,
             k_list: Sequence[int] = (1, 5),
             bucket_width: int = 50) -> BucketReport:
    """Run every user through the strategy and bucket the outcomes."""
    return bucket_report(run_streams(streams, protos, strategy, k_list),
                         bucket_width=bucket_width, k_list=k_list)


def _grid_check(grid, lo: float, hi: float, lo_open: bool) -> list[float]:
    grid = list(grid)
    if not grid:
        raise SpcError("empty parameter grid")
    for v in grid:
        if (v <= lo if lo_open else v < lo) or v > hi:
            raise SpcError(f"grid value {v} out of range")
    return grid


def sweep_w(streams, protos, grid, k_list=(1, 5), bucket_width: int = 50):
    """One weighted-max evaluation per grid value, over identical streams."""
    grid = _grid_check(grid, 0.0, 1.0, lo_open=True)
    return [(w, evaluate(streams, protos, Strategy(kind="spc", w=w),
                         k_list=k_list, bucket_width=bucket_width))
            for w in grid]


def sweep_ws(streams, protos, grid, k_list=(1, 5), bucket_width: int = 50):
    """One linear-combination evaluation per grid value."""
    grid = _grid_check(grid, 0.0, 1.0, lo_open=False)
    return [(ws, evaluate(streams, protos, Strategy(kind="spc-sum", w_s=ws),
                          k_list=k_list, bucket_width=bucket_width))
            for ws in grid]


def sweep_table(results, param_name: str, k_list, bucket_width: int) -> ReportTable:
    """Flatten sweep results into one accuracy row per parameter value."""
    if not results:
        raise SpcError("empty sweep")
    first = results[0][1]
    columns = [f"t{lo}-t{hi} top-{k}" for lo, hi in first.buckets
               for k in first.k_list]
    rows = []
    for value, report in results:
        rows.append((f"{param_name}={value:g}",
                     [report.accuracy[k][b]
                      for b in range(len(report.buckets))
                      for k in report.k_list]))
    return ReportTable(columns=columns, rows=rows)


@dataclass
class CvResult:
    chosen_w: float
    folds: list[list[str]]
    train_best_w: list[float]
    heldout_accuracy: list[dict[float, float]]

    def to_table(self) -> ReportTable:
        grid = sorted(self.heldout_accuracy[0])
        columns = [f"w={w:g}" for w in grid]
        rows = []
        for i, held in enumerate(self.heldout_accuracy):
            rows.append((f"fold {i + 1} held-out", [held[w] for w in grid]))
        avg = {w: float(np.mean([h[w] for h in self.heldout_accuracy]))
               for w in grid}
        rows.append(("mean held-out", [avg[w] for w in grid]))
        notes = [f"chosen w = {self.chosen_w:g}",
                 "per-fold training argmax: "
                 + ", ".join(f"{w:g}" for w in self.train_best_w)]
        return ReportTable(columns=columns, rows=rows, notes=notes)


def cross_validate_w(streams, protos, grid, folds: int = 2,
                     objective_k: int = 1, seed: int = 0) -> CvResult:
    """Choose the weighting value by k-fold cross-validation over users.

    Per fold: the grid value maximizing mean accuracy (averaged over all t,
    then over training-fold users) is selected on the training side and the
    held-out accuracy of every grid value is recorded. The final choice
    maximizes the across-fold average of held-out accuracy; ties go to the
    smaller value.
    """
    grid = sorted(set(_grid_check(grid, 0.0, 1.0, lo_open=True)))
    if folds < 2:
        raise SpcError("folds must be >= 2")
    users = sorted(streams)
    if len(users) < folds:
        raise SpcError(f"need at least {folds} users, have {len(users)}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    order = [users[i] for i in rng.permutation(len(users))]
    fold_users = [order[i::folds] for i in range(folds)]

    # per-user mean hit rate for every grid value; folds aggregate from this
    user_acc: dict[float, dict[str, float]] = {}
    for w in grid:
        strategy = Strategy(kind="spc", w=w)
        accs = {}
        for user in users:
            outcomes = run_user_stream(streams[user], protos, strategy,
                                       k_list=(objective_k,))
            if not outcomes:
                raise SpcError(f"user {user!r} has an empty stream")
            accs[user] = float(np.mean([o.hits[objective_k]
                                        for o in outcomes]))
        user_acc[w] = accs

    def set_acc(w: float, members: list[str]) -> float:
        return float(np.mean([user_acc[w][u] for u in members]))

    train_best, heldout = [], []
    for i in range(folds):
        train = [u for j, fold in enumerate(fold_users)
                 for u in fold if j != i]
        best = min(grid, key=lambda w: (-set_acc(w, train), w))
        train_best.append(best)
        heldout.append({w: set_acc(w, fold_users[i]) for w in grid})

    chosen = min(grid, key=lambda w: (
        -float(np.mean([h[w] for h in heldout])), w))
    return CvResult(chosen_w=chosen, folds=fold_users,
                    train_best_w=train_best, heldout_accuracy=heldout)
