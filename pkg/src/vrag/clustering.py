"""Frame-set reduction through k-means++ and Lloyd iteration.

A video's frames arrive as row vectors. Seeding follows the classic D^2
scheme, Lloyd iteration runs until the relative cost improvement drops
below tolerance, and the reduced frame set keeps the frame nearest each
centroid. Distances are plain Euclidean on the raw embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, TooFewFrames
from .rng import substream

DEFAULT_MAX_ITERS = 100
DEFAULT_TOL = 1e-4


@dataclass
class ClusterAssignment:
    k: int
    assignment: np.ndarray
    centroids: np.ndarray
    cost: float
    iterations: int
    history: list[float]


def _as_frame_array(frames) -> np.ndarray:
    arr = getattr(frames, "values", frames)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise DimMismatch(f"frames must be 2-d, got shape {arr.shape}")
    return arr


def _sq_dists(frames: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, frames x points."""
    diff = frames[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_pp_seed(frames, k: int, seed: int) -> np.ndarray:
    """Pick k initial centroids by D^2 sampling.

    The first centroid is uniform over frames; each later one is drawn with
    probability proportional to squared distance from the nearest centroid
    chosen so far. If every remaining frame coincides with a chosen
    centroid (all weights zero), the lowest unused frame index is taken so
    the seeds stay distinct as rows.

    Raises:
        TooFewFrames: if frames.count < k.
    """
    data = _as_frame_array(frames)
    n = data.shape[0]
    if k < 1:
        raise TooFewFrames(f"k must be >= 1, got {k}")
    if n < k:
        raise TooFewFrames(f"need at least {k} frames, got {n}")
    rng = substream(seed, "kmeans-seed")
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(data, data[chosen])[:, 0]
    while len(chosen) < k:
        total = float(d2.sum())
        if total <= 0.0:
            # Degenerate geometry: fall back to the lowest unused index.
            used = set(chosen)
            nxt = next(i for i in range(n) if i not in used)
        else:
            r = rng.random() * total
            nxt = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            nxt = min(nxt, n - 1)
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(data, data[[nxt]])[:, 0])
    return data[chosen].copy()


def _assign(data: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = _sq_dists(data, centroids)
    assignment = d2.argmin(axis=1)
    cost = float(d2[np.arange(data.shape[0]), assignment].sum())
    return assignment, cost


def _repair_empty(data: np.ndarray, centroids: np.ndarray,
                  assignment: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Give every empty cluster its own point.

    Empty clusters are handled in ascending index order; each one steals the
    frame farthest from its current centroid, considering only frames whose
    cluster would keep at least 2 members. Ties go to the lowest frame
    index. The stolen frame becomes the empty cluster's centroid, which can
    only lower that frame's contribution to the cost.
    """
    k = centroids.shape[0]
    assignment = assignment.copy()
    centroids = centroids.copy()
    counts = np.bincount(assignment, minlength=k)
    for c in range(k):
        if counts[c] > 0:
            continue
        own = centroids[assignment]
        dist = ((data - own) ** 2).sum(axis=1)
        movable = counts[assignment] >= 2
        if not movable.any():
            continue
        dist = np.where(movable, dist, -np.inf)
        far = int(dist.argmax())  # argmax takes the first (lowest) index on ties
        counts[assignment[far]] -= 1
        assignment[far] = c
        counts[c] = 1
        centroids[c] = data[far]
    return centroids, assignment


def lloyd_cluster(frames, seeds, max_iters: int = DEFAULT_MAX_ITERS,
                  tol: float = DEFAULT_TOL) -> ClusterAssignment:
    """Run Lloyd iteration from given seeds.

    Stops when the relative cost change falls below tol or after max_iters
    update rounds. The returned cost matches the returned assignment and
    centroids; history holds the cost after the initial assignment and
    after each update round, and it never increases.

    Raises:
        DimMismatch: if seeds and frames disagree on dimension.
    """
    data = _as_frame_array(frames)
    centroids = np.asarray(seeds, dtype=np.float64).copy()
    if centroids.ndim != 2 or centroids.shape[1] != data.shape[1]:
        raise DimMismatch(
            f"seeds shape {centroids.shape} incompatible with frames dim {data.shape[1]}")
    k = centroids.shape[0]
    assignment, cost = _assign(data, centroids)
    centroids, assignment = _repair_empty(data, centroids, assignment)
    if np.bincount(assignment, minlength=k).min() == 0:
        # Unrepairable only when n < k, which seeding forbids.
        raise DimMismatch("empty cluster could not be repaired")
    cost = float(((data - centroids[assignment]) ** 2).sum())
    history = [cost]
    iterations = 0
    for _ in range(max_iters):
        new_centroids = centroids.copy()
        for c in range(k):
            members = assignment == c
            new_centroids[c] = data[members].mean(axis=0)
        new_assignment, new_cost = _assign(data, new_centroids)
        new_centroids, new_assignment = _repair_empty(data, new_centroids, new_assignment)
        new_cost = float(((data - new_centroids[new_assignment]) ** 2).sum())
        iterations += 1
        history.append(new_cost)
        improved = cost - new_cost
        centroids, assignment = new_centroids, new_assignment
        old_cost, cost = cost, new_cost
        if improved <= tol * max(old_cost, 1e-12):
            break
    return ClusterAssignment(k=k, assignment=assignment, centroids=centroids,
                             cost=cost, iterations=iterations, history=history)


def reduce_frames(frames, k: int, seed: int) -> list[int]:
    """Reduce a frame set to at most k representative frame indices.

    Returns min(k, count) distinct indices sorted ascending. When count is
    at most k every index is returned. Otherwise frames are clustered and
    each cluster contributes the frame nearest its centroid, lowest index
    winning ties.
    """
    data = _as_frame_array(frames)
    n = data.shape[0]
    if n == 0:
        raise TooFewFrames("no frames to reduce")
    if n <= k:
        return list(range(n))
    seeds = kmeans_pp_seed(data, k, seed)
    result = lloyd_cluster(data, seeds)
    picked = []
    for c in range(k):
        members = np.flatnonzero(result.assignment == c)
        d2 = ((data[members] - result.centroids[c]) ** 2).sum(axis=1)
        picked.append(int(members[int(d2.argmin())]))  # argmin: lowest index on ties
    # Clusters are non-empty and disjoint, so representatives are distinct.
    return sorted(picked)
