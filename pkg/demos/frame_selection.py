#!/usr/bin/env python3
# How a video's frames get reduced to candidates and then to a subset.
# Three planted shots -> cluster representatives -> scored subsets.

import math

import numpy as np

from vrag.clustering import kmeans_pp_seed, lloyd_cluster, reduce_frames
from vrag.selector import brute_force_select, init_selector, score_subset_retrieval, select_frames

rng = np.random.default_rng(11)

# 30 frames from three "shots" sitting far apart in embedding space.
shots = np.array([[8.0, 0.0], [0.0, 8.0], [-6.0, -6.0]])
frames = np.vstack([shots[i] + 0.4 * rng.standard_normal((10, 2)) for i in range(3)])
print("frames:", frames.shape)

seeds = kmeans_pp_seed(frames, 3, seed=0)
res = lloyd_cluster(frames, seeds)
print("lloyd iterations:", res.iterations)
print("cost history:", [round(c, 2) for c in res.history])
for c in range(3):
    members = np.where(res.assignment == c)[0]
    print(f"  cluster {c}: frames {members.tolist()}")

picked = reduce_frames(frames, 3, seed=0)
print("representatives (one per shot):", picked)

# Subset selection: a freshly initialized scorer is junk, but sampled
# selection must still agree exactly with brute force over all subsets.
cand = rng.standard_normal((7, 5))
model = init_selector("retrieval", 3, 7, 5, seed=1)
total = math.comb(7, 3)
fast = select_frames(model, cand, n_subsets=total, seed=1)
slow = brute_force_select(lambda s: score_subset_retrieval(model, cand, s), cand, 3)
print()
print(f"all {total} subsets scored")
print("sampled selection  :", fast.frame_indices, round(fast.score, 6))
print("brute-force argmax :", slow.frame_indices, round(slow.score, 6))
assert fast.frame_indices == slow.frame_indices
