"""Adaptive frame selection.

A video's reduced candidate frames are searched for the subset that a
trained scorer ranks highest. Two scorer shapes exist:

* retrieval: the m chosen frame embeddings, concatenated in index order,
  feed one MLP; the score is the positive-class logit.
* generation: the mean of the chosen frame embeddings feeds a frame tower,
  the query embedding feeds a query tower, and the score is the dot
  product of the two tower outputs.

Training data comes from ranking sampled subsets by a raw signal (query
similarity for retrieval, answer quality for generation), keeping the top
three as positives and the bottom three as negatives.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from . import mlp
from .errors import (
    DimMismatch,
    IoFailure,
    MissingFile,
    MissingQuery,
    SchemaViolation,
    SpaceTooLarge,
    TooFewSubsets,
    ValidationError,
    WrongMode,
)
from .rng import derive_seed, substream
from .vecmath import cosine, mean_pool

RETRIEVAL_HIDDEN = (512, 256)
GENERATION_HIDDEN = (512, 512)
GENERATION_PROJ = 256
BRUTE_FORCE_CAP = 1_000_000
DEFAULT_RETRIEVAL_SUBSETS = 10
DEFAULT_GENERATION_SUBSETS = 40


@dataclass
class SubsetCandidate:
    video_id: str
    frame_indices: list[int]
    score: float | None = None


@dataclass
class SelectorModel:
    mode: str
    m: int
    candidate_count: int
    embedding_dim: int
    net: mlp.MLPParams | None = None
    frame_tower: mlp.MLPParams | None = None
    query_tower: mlp.MLPParams | None = None

    def __post_init__(self):
        if self.mode not in ("retrieval", "generation"):
            raise WrongMode(f"mode must be 'retrieval' or 'generation', got {self.mode!r}")
        if self.m < 1 or self.candidate_count < 1 or self.embedding_dim < 1:
            raise SchemaViolation("m", "m, candidate_count, embedding_dim must be >= 1")
        if self.mode == "retrieval":
            if self.net is None:
                raise SchemaViolation("net", "retrieval mode requires a net")
            want = self.m * self.embedding_dim
            if self.net.layer_dims[0] != want:
                raise DimMismatch(
                    f"retrieval net input dim {self.net.layer_dims[0]}, expected {want}")
        else:
            if self.frame_tower is None or self.query_tower is None:
                raise SchemaViolation("frame_tower", "generation mode requires both towers")
            if self.frame_tower.layer_dims[-1] != self.query_tower.layer_dims[-1]:
                raise DimMismatch("tower output dims differ")
            for name, tower in (("frame_tower", self.frame_tower),
                                ("query_tower", self.query_tower)):
                if tower.layer_dims[0] != self.embedding_dim:
                    raise DimMismatch(f"{name} input dim {tower.layer_dims[0]}, "
                                      f"expected {self.embedding_dim}")


@dataclass
class SelectorTrainingExample:
    video_id: str
    frame_indices: list[int]
    label: bool
    raw_signal: float
    query_id: str | None = None


@dataclass
class TrainingPair:
    """One (query, ground-truth video) pair for data collection."""
    query_id: str
    video_id: str
    candidates: np.ndarray
    query_vec: np.ndarray | None = None


def init_selector(mode: str, m: int, candidate_count: int, embedding_dim: int,
                  seed: int) -> SelectorModel:
    """Fresh selector with Glorot-initialized nets."""
    if mode == "retrieval":
        dims = [m * embedding_dim, *RETRIEVAL_HIDDEN, 2]
        net = mlp.init_mlp(dims, derive_seed(seed, "selector", "retrieval"))
        return SelectorModel(mode=mode, m=m, candidate_count=candidate_count,
                             embedding_dim=embedding_dim, net=net)
    if mode == "generation":
        dims = [embedding_dim, *GENERATION_HIDDEN, GENERATION_PROJ]
        frame_tower = mlp.init_mlp(dims, derive_seed(seed, "selector", "frame-tower"))
        query_tower = mlp.init_mlp(dims, derive_seed(seed, "selector", "query-tower"))
        return SelectorModel(mode=mode, m=m, candidate_count=candidate_count,
                             embedding_dim=embedding_dim,
                             frame_tower=frame_tower, query_tower=query_tower)
    raise WrongMode(f"unknown selector mode {mode!r}")


# --- subset sampling ------------------------------------------------------------

def sample_subsets(candidate_count: int, m: int, n_subsets: int,
                   seed: int) -> list[tuple[int, ...]]:
    """Distinct index subsets of size min(m, candidate_count).

    Returns the full lexicographic enumeration whenever n_subsets covers
    the whole combination space; otherwise draws n_subsets distinct
    subsets uniformly, deterministically for a given seed. The returned
    list is always in lexicographic order.
    """
    if candidate_count < 1 or m < 1 or n_subsets < 1:
        raise ValidationError("candidate_count, m, n_subsets must all be >= 1")
    size = min(m, candidate_count)
    total = math.comb(candidate_count, size)
    if n_subsets >= total:
        return [tuple(c) for c in combinations(range(candidate_count), size)]
    rng = substream(seed, "sample-subsets")
    seen: set[tuple[int, ...]] = set()
    while len(seen) < n_subsets:
        pick = tuple(sorted(rng.choice(candidate_count, size=size, replace=False).tolist()))
        seen.add(pick)
    return sorted(seen)


def _check_indices(frame_indices, candidate_count: int, require_sorted: bool) -> list[int]:
    idx = [int(i) for i in frame_indices]
    if any(i < 0 or i >= candidate_count for i in idx):
        raise ValidationError(f"frame index out of range [0, {candidate_count})")
    if len(set(idx)) != len(idx):
        raise ValidationError("frame indices must be distinct")
    if require_sorted and any(a >= b for a, b in zip(idx, idx[1:])):
        raise ValidationError("frame indices must be in ascending order")
    return idx


# --- scoring --------------------------------------------------------------------

def features_for_retrieval(candidates: np.ndarray, frame_indices) -> np.ndarray:
    """Concatenated frame embeddings in canonical ascending-index order."""
    cand = np.asarray(candidates, dtype=np.float64)
    idx = _check_indices(frame_indices, cand.shape[0], require_sorted=True)
    return cand[idx].reshape(-1)


def score_subset_retrieval(model: SelectorModel, candidates, frame_indices) -> float:
    """Positive-class logit of the concat net for one subset.

    frame_indices must be strictly increasing; the concatenation order is
    part of the scorer's input contract.
    """
    if model.mode != "retrieval":
        raise WrongMode(f"retrieval scorer called on {model.mode} model")
    feats = features_for_retrieval(candidates, frame_indices)
    if feats.shape[0] != model.net.layer_dims[0]:
        raise DimMismatch(
            f"subset features dim {feats.shape[0]}, net expects {model.net.layer_dims[0]}")
    logits = mlp.mlp_forward(model.net, feats)
    return float(logits[1])


def score_subset_generation(model: SelectorModel, candidates, frame_indices,
                            query) -> float:
    """Dot product of frame-tower(mean of subset) and query-tower(query).

    Index order does not matter; mean pooling is permutation-invariant.
    """
    if model.mode != "generation":
        raise WrongMode(f"generation scorer called on {model.mode} model")
    cand = np.asarray(candidates, dtype=np.float64)
    idx = _check_indices(frame_indices, cand.shape[0], require_sorted=False)
    pooled = mean_pool(cand[idx])
    q = np.asarray(query, dtype=np.float64)
    u = mlp.mlp_forward(model.frame_tower, pooled)
    w = mlp.mlp_forward(model.query_tower, q)
    return float(np.dot(u, w))


def _score_with_model(model: SelectorModel, candidates, subset, query) -> float:
    if model.mode == "retrieval":
        return score_subset_retrieval(model, candidates, subset)
    return score_subset_generation(model, candidates, subset, query)


# --- selection ------------------------------------------------------------------

def select_frames(model: SelectorModel, candidates, query=None,
                  n_subsets: int | None = None, seed: int = 0,
                  video_id: str = "") -> SubsetCandidate:
    """Best-scoring sampled subset of size m.

    Retrieval mode forbids a query; generation mode requires one. When the
    candidate pool is no bigger than m, all indices are returned without
    scoring. Ties go to the lexicographically smallest index list.
    """
    if model.mode == "retrieval" and query is not None:
        raise WrongMode("retrieval selection does not take a query")
    if model.mode == "generation" and query is None:
        raise MissingQuery("generation selection requires a query vector")
    cand = np.asarray(candidates, dtype=np.float64)
    count = cand.shape[0]
    if count <= model.m:
        return SubsetCandidate(video_id=video_id, frame_indices=list(range(count)))
    if n_subsets is None:
        n_subsets = (DEFAULT_RETRIEVAL_SUBSETS if model.mode == "retrieval"
                     else DEFAULT_GENERATION_SUBSETS)
    subsets = sample_subsets(count, model.m, n_subsets, seed)
    best: tuple[int, ...] | None = None
    best_score = -np.inf
    for subset in subsets:  # lexicographic order, so strict > keeps the smallest tie
        s = _score_with_model(model, cand, subset, query)
        if s > best_score:
            best, best_score = subset, s
    return SubsetCandidate(video_id=video_id, frame_indices=list(best),
                           score=float(best_score))


def brute_force_select(score_fn, candidates, m: int, query=None,
                       video_id: str = "") -> SubsetCandidate:
    """Exact argmax over every size-m index subset.

    score_fn is called as score_fn(frame_indices) with a tuple of ascending
    indices, or score_fn(frame_indices, query) when a query is supplied.
    The combination space must not exceed 1e6 subsets. Ties resolve to the
    lexicographically smallest index list, matching select_frames.

    Raises:
        SpaceTooLarge: when C(candidate_count, m) > 1e6.
    """
    cand = np.asarray(candidates, dtype=np.float64)
    count = cand.shape[0]
    size = min(m, count)
    total = math.comb(count, size)
    if total > BRUTE_FORCE_CAP:
        raise SpaceTooLarge(f"C({count}, {size}) = {total} exceeds {BRUTE_FORCE_CAP}")
    if count <= m:
        return SubsetCandidate(video_id=video_id, frame_indices=list(range(count)))
    best: tuple[int, ...] | None = None
    best_score = -np.inf
    for subset in combinations(range(count), size):
        s = float(score_fn(subset) if query is None else score_fn(subset, query))
        if s > best_score:
            best, best_score = subset, s
    return SubsetCandidate(video_id=video_id, frame_indices=list(best),
                           score=float(best_score))


# --- training-data collection -----------------------------------------------------

def collect_training_data(pairs, mode: str, m: int, n_subsets: int, seed: int,
                          signal_fn=None) -> list[SelectorTrainingExample]:
    """Label sampled subsets per pair: top 3 True, bottom 3 False.

    The raw signal is, by default, the cosine between the mean-pooled
    subset embedding and the query embedding (retrieval mode). A
    signal_fn(pair, frame_indices) -> float overrides it; generation mode
    requires one, since its native signal involves running a generator.

    Subsets are ranked by (signal descending, index list ascending); the
    first three become positives, the last three negatives, the middle is
    discarded. Pairs whose candidate pool is smaller than m are skipped
    with a warning.

    Raises:
        TooFewSubsets: when a pair yields fewer than 6 subsets.
    """
    if mode not in ("retrieval", "generation"):
        raise WrongMode(f"unknown mode {mode!r}")
    if mode == "generation" and signal_fn is None:
        raise ValidationError("generation-mode collection requires a signal_fn")
    out: list[SelectorTrainingExample] = []
    for pair in pairs:
        cand = np.asarray(pair.candidates, dtype=np.float64)
        count = cand.shape[0]
        if count < m:
            warnings.warn(
                f"skipping {pair.video_id}: {count} candidates < subset size {m}",
                stacklevel=2)
            continue
        pair_seed = derive_seed(seed, "collect", pair.query_id or "", pair.video_id)
        subsets = sample_subsets(count, m, n_subsets, pair_seed)
        if len(subsets) < 6:
            raise TooFewSubsets(
                f"pair ({pair.query_id}, {pair.video_id}) produced {len(subsets)} subsets")
        scored: list[tuple[float, tuple[int, ...]]] = []
        for subset in subsets:
            if signal_fn is not None:
                signal = float(signal_fn(pair, subset))
            else:
                if pair.query_vec is None:
                    raise MissingQuery(f"pair ({pair.query_id}, {pair.video_id}) has no query vector")
                signal = cosine(mean_pool(cand[list(subset)]), pair.query_vec)
            scored.append((signal, subset))
        ranked = sorted(scored, key=lambda t: (-t[0], t[1]))
        labeled = [(ranked[i], True) for i in range(3)]
        labeled += [(ranked[len(ranked) - 3 + i], False) for i in range(3)]
        for (signal, subset), label in labeled:
            out.append(SelectorTrainingExample(
                query_id=pair.query_id, video_id=pair.video_id,
                frame_indices=list(subset), label=label, raw_signal=signal))
    return out


# --- training --------------------------------------------------------------------

def build_retrieval_dataset(examples: list[SelectorTrainingExample],
                            candidates_map: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Concat features + binary labels for neural-core training."""
    xs, ys = [], []
    for ex in examples:
        cand = candidates_map[ex.video_id]
        xs.append(features_for_retrieval(cand, ex.frame_indices))
        ys.append(1 if ex.label else 0)
    if not xs:
        raise ValidationError("no training examples")
    return np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.int64)


def train_retrieval_selector(examples, candidates_map, m: int, embedding_dim: int,
                             candidate_count: int, cfg: mlp.TrainConfig,
                             ) -> tuple[SelectorModel, list[float]]:
    """Initialize and fit a retrieval-mode selector on labeled subsets."""
    x, y = build_retrieval_dataset(examples, candidates_map)
    model = init_selector("retrieval", m, candidate_count, embedding_dim, cfg.seed)
    net, trace = mlp.train(model.net, (x, y), cfg)
    model.net = net
    return model, trace


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def build_generation_dataset(examples: list[SelectorTrainingExample],
                             candidates_map: dict[str, np.ndarray],
                             queries_map: dict[str, np.ndarray],
                             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean-pooled subset vectors, query vectors, and binary labels."""
    pooled, queries, ys = [], [], []
    for ex in examples:
        cand = np.asarray(candidates_map[ex.video_id], dtype=np.float64)
        idx = _check_indices(ex.frame_indices, cand.shape[0], require_sorted=False)
        pooled.append(mean_pool(cand[idx]))
        queries.append(np.asarray(queries_map[ex.query_id], dtype=np.float64))
        ys.append(1 if ex.label else 0)
    if not pooled:
        raise ValidationError("no training examples")
    return (np.asarray(pooled, dtype=np.float64),
            np.asarray(queries, dtype=np.float64),
            np.asarray(ys, dtype=np.int64))


def train_generation_selector(examples, candidates_map, queries_map, m: int,
                              embedding_dim: int, candidate_count: int,
                              cfg: mlp.TrainConfig) -> tuple[SelectorModel, list[float]]:
    """Fit the twin towers with logistic loss on the dot-product score.

    The subset score s is treated as the positive-class logit, so the loss
    per example is binary cross-entropy on sigmoid(s). Both towers update
    together under one Adam state, deterministically for cfg.seed.
    """
    pooled, queries, labels = build_generation_dataset(examples, candidates_map, queries_map)
    model = init_selector("generation", m, candidate_count, embedding_dim, cfg.seed)
    ft, qt = model.frame_tower, model.query_tower
    flat = ft.weights + ft.biases + qt.weights + qt.biases
    adam_m = [np.zeros_like(a) for a in flat]
    adam_v = [np.zeros_like(a) for a in flat]
    rng = substream(cfg.seed, "train-shuffle")
    n = pooled.shape[0]
    step = 0
    trace: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start: start + cfg.batch_size]
            bp, bq, by = pooled[batch], queries[batch], labels[batch]
            u, cache_f = mlp.forward_batch(ft, bp)
            w, cache_q = mlp.forward_batch(qt, bq)
            s = np.einsum("ij,ij->i", u, w)
            # Stable BCE with s as the logit.
            epoch_loss += float(np.sum(np.maximum(s, 0) - s * by + np.log1p(np.exp(-np.abs(s)))))
            ds = (_sigmoid(s) - by) / len(batch)
            grads_f = mlp.backward_from_output_grad(ft, cache_f, ds[:, None] * w)
            grads_q = mlp.backward_from_output_grad(qt, cache_q, ds[:, None] * u)
            gflat = (grads_f.weights + grads_f.biases + grads_q.weights + grads_q.biases)
            step += 1
            for j, (arr, g) in enumerate(zip(flat, gflat)):
                if cfg.optimizer == "adam":
                    adam_m[j] = mlp.ADAM_BETA1 * adam_m[j] + (1 - mlp.ADAM_BETA1) * g
                    adam_v[j] = mlp.ADAM_BETA2 * adam_v[j] + (1 - mlp.ADAM_BETA2) * g * g
                    m_hat = adam_m[j] / (1 - mlp.ADAM_BETA1 ** step)
                    v_hat = adam_v[j] / (1 - mlp.ADAM_BETA2 ** step)
                    arr -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + mlp.ADAM_EPS)
                else:
                    arr -= cfg.learning_rate * g
        trace.append(epoch_loss / n)
    return model, trace


# --- persistence -----------------------------------------------------------------

def save_training_examples(examples: list[SelectorTrainingExample], path) -> None:
    """JSON-lines, one {query_id, video_id, frame_indices, label, raw_signal} per row."""
    lines = []
    for ex in examples:
        lines.append(json.dumps({
            "query_id": ex.query_id,
            "video_id": ex.video_id,
            "frame_indices": ex.frame_indices,
            "label": ex.label,
            "raw_signal": ex.raw_signal,
        }))
    try:
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_training_examples(path) -> list[SelectorTrainingExample]:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    out = []
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        out.append(SelectorTrainingExample(
            query_id=obj.get("query_id"),
            video_id=obj["video_id"],
            frame_indices=[int(i) for i in obj["frame_indices"]],
            label=bool(obj["label"]),
            raw_signal=float(obj["raw_signal"]),
        ))
    return out


def save_selector(model: SelectorModel, path) -> None:
    obj = {
        "mode": model.mode,
        "m": model.m,
        "candidate_count": model.candidate_count,
        "embedding_dim": model.embedding_dim,
    }
    if model.mode == "retrieval":
        obj["net"] = mlp.mlp_to_dict(model.net, model.mode)
    else:
        obj["frame_tower"] = mlp.mlp_to_dict(model.frame_tower, model.mode)
        obj["query_tower"] = mlp.mlp_to_dict(model.query_tower, model.mode)
    try:
        Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_selector(path) -> SelectorModel:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"selector file not valid JSON: {exc}") from exc
    mode = obj.get("mode")
    kwargs = dict(mode=mode, m=int(obj["m"]), candidate_count=int(obj["candidate_count"]),
                  embedding_dim=int(obj["embedding_dim"]))
    if mode == "retrieval":
        kwargs["net"] = mlp.mlp_from_dict(obj["net"])[0]
    else:
        kwargs["frame_tower"] = mlp.mlp_from_dict(obj["frame_tower"])[0]
        kwargs["query_tower"] = mlp.mlp_from_dict(obj["query_tower"])[0]
    return SelectorModel(**kwargs)
