#!/usr/bin/env python3
# Walk through the retrieval half of the engine on a synthetic corpus:
# build per-video representations, blend the two modalities, rank.

import numpy as np

from vrag.corpus import EmbeddingMatrix
from vrag.retrieval import VideoIndex, embed_video_repr, retrieve_topk
from vrag.vecmath import cosine, l2_normalize

rng = np.random.default_rng(7)
dim = 24
n_videos = 8

# Every video gets a "topic" direction. Frames wobble around it, the text
# embedding sits exactly on it. Queries will be noisy copies of the topics.
topics = rng.standard_normal((n_videos, dim))
topics /= np.linalg.norm(topics, axis=1, keepdims=True)

entries = []
for i in range(n_videos):
    vid = f"video{i:02d}"
    frames = np.stack([l2_normalize(topics[i] + 0.3 * rng.standard_normal(dim))
                       for _ in range(12)])
    visual = EmbeddingMatrix(video_id=vid, modality="visual", dim=dim, count=12,
                             values=frames.astype(np.float32),
                             timestamps=np.arange(12, dtype=np.float32) + 0.5)
    entry = embed_video_repr(None, visual, topics[i], alpha=0.6)
    entries.append(entry)
    print(f"{vid}: visual repr vs topic cosine = "
          f"{cosine(entry.visual_repr, topics[i]):.4f}")

index = VideoIndex(corpus_id="walkthrough", alpha=0.6, dim=dim, entries=entries)

print()
print("query = noisy copy of topic 3, top 5:")
query = l2_normalize(topics[3] + 0.2 * rng.standard_normal(dim))
for vid, score in retrieve_topk(index, query, k=5).ranked:
    print(f"  {vid}  {score:.4f}")

# The blend weight matters when the modalities disagree. Give video 5 a text
# embedding that points at topic 0 and watch the ranking flip with alpha.
print()
print("video05 text deliberately points at topic 0:")
frames5 = np.stack([l2_normalize(topics[5] + 0.3 * rng.standard_normal(dim))
                    for _ in range(12)])
visual5 = EmbeddingMatrix(video_id="video05", modality="visual", dim=dim, count=12,
                          values=frames5.astype(np.float32),
                          timestamps=np.arange(12, dtype=np.float32) + 0.5)
for alpha in (0.0, 0.5, 1.0):
    twisted = embed_video_repr(None, visual5, topics[0], alpha=alpha)
    score_own = cosine(twisted.ensemble_repr, topics[5])
    score_other = cosine(twisted.ensemble_repr, topics[0])
    side = "own topic" if score_own > score_other else "hijacked by text"
    print(f"  alpha={alpha:.1f}  cos(own)={score_own:+.4f}  "
          f"cos(text target)={score_other:+.4f}  -> {side}")
