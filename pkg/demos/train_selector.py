#!/usr/bin/env python3
# Train a frame-selection net on a corpus built to punish uniform striding:
# the informative frames sit at indices a stride never visits.

import numpy as np

from vrag.corpus import EmbeddingMatrix
from vrag.mlp import TrainConfig
from vrag.retrieval import VideoIndex, embed_video_repr, retrieve_topk, uniform_stride_indices
from vrag.rng import derive_seed
from vrag.selector import TrainingPair, collect_training_data, train_retrieval_selector

rng = np.random.default_rng(3)
dim, n_videos = 32, 12

identities = rng.standard_normal((n_videos, dim))
identities /= np.linalg.norm(identities, axis=1, keepdims=True)
noise = rng.standard_normal((8, dim))
noise /= np.linalg.norm(noise, axis=1, keepdims=True)

# 10 frames per video. Slots 1 and 2 carry the video's identity; the other
# eight slots hold noise frames shared by every video. A uniform stride over
# 10 frames picks 0, 3, 6, 9 and sees nothing but the shared noise.
print("uniform stride over 10 frames picks:", uniform_stride_indices(10, 4))

ids = [f"vid{i:02d}" for i in range(n_videos)]
frames_map = {}
for i, vid in enumerate(ids):
    rows = np.empty((10, dim))
    for j, slot in enumerate((0, 3, 4, 5, 6, 7, 8, 9)):
        rows[slot] = noise[j]
    rows[1] = identities[i]
    rows[2] = identities[i]
    frames_map[vid] = rows

pairs = [TrainingPair(query_id=f"q{i}", video_id=ids[i],
                      candidates=frames_map[ids[i]], query_vec=identities[i])
         for i in range(n_videos)]
examples = collect_training_data(pairs, "retrieval", m=4, n_subsets=210, seed=3)
pos = sum(1 for e in examples if e.label)
print(f"collected {len(examples)} labeled subsets ({pos} positive)")

model, losses = train_retrieval_selector(
    examples, frames_map, m=4, embedding_dim=dim, candidate_count=10,
    cfg=TrainConfig(epochs=120, seed=3))
print("loss first/last epoch:", round(losses[0], 4), "->", round(losses[-1], 4))


def r_at_1(selector):
    entries = []
    for vid in ids:
        visual = EmbeddingMatrix(video_id=vid, modality="visual", dim=dim, count=10,
                                 values=frames_map[vid].astype(np.float32),
                                 timestamps=np.arange(10, dtype=np.float32) + 0.5)
        entries.append(embed_video_repr(None, visual, None, selector=selector,
                                        alpha=0.0, seed=derive_seed(3, "index", vid),
                                        frames_per_video=4, n_subsets=210,
                                        candidates=10))
    index = VideoIndex(corpus_id="planted", alpha=0.0, dim=dim, entries=entries)
    hits = sum(retrieve_topk(index, identities[i], 1).ranked[0][0] == ids[i]
               for i in range(n_videos))
    return hits / n_videos


print("R@1 with uniform stride :", r_at_1(None))
print("R@1 with trained net    :", r_at_1(model))
