"""Retrieval-augmented generation over video corpora.

The pipeline: ingest media into a manifest plus per-video embedding
files, index each video as an ensemble of text and visual vectors,
rank the corpus against query embeddings, assemble frame-and-transcript
contexts for the top videos, and send them to a chat-style generator.
Frame choice is either a uniform stride or a small learned scorer over
cluster-reduced candidates. Everything numeric is float64 numpy with
seeded, labeled random substreams, so runs are reproducible bit for bit.
"""

from __future__ import annotations

from .clustering import ClusterAssignment, kmeans_pp_seed, lloyd_cluster, reduce_frames
from .config import EngineConfig, apply_overrides, load_config, validate_config
from .corpus import (
    CorpusManifest,
    EmbeddingMatrix,
    VideoRecord,
    embedding_path,
    load_manifest,
    read_embeddings,
    save_manifest,
    validate_embed_response,
    write_embeddings,
)
from .errors import (
    DataCorruption,
    TransportError,
    ValidationError,
    VragError,
    exit_code_for,
)
from .generation import (
    GenerationContext,
    GenerationResult,
    assemble_context,
    generate_answer,
    generate_batch,
    geval_judge,
    synthesize_qa,
)
from .metrics import aggregate_report, bleu_4, rouge_l, tokenize
from .mlp import MLPParams, TrainConfig, gradient_check, init_mlp, mlp_forward, train
from .retrieval import (
    VideoIndex,
    build_index,
    load_index,
    recall_at_k,
    retrieve_topk,
    save_index,
)
from .rng import derive_seed, substream
from .selector import (
    SelectorModel,
    brute_force_select,
    collect_training_data,
    select_frames,
    train_generation_selector,
    train_retrieval_selector,
)
from .vecmath import cosine, interpolate_ensemble, l2_normalize, mean_pool

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment", "kmeans_pp_seed", "lloyd_cluster", "reduce_frames",
    "EngineConfig", "apply_overrides", "load_config", "validate_config",
    "CorpusManifest", "EmbeddingMatrix", "VideoRecord", "embedding_path",
    "load_manifest", "read_embeddings", "save_manifest",
    "validate_embed_response", "write_embeddings",
    "DataCorruption", "TransportError", "ValidationError", "VragError",
    "exit_code_for",
    "GenerationContext", "GenerationResult", "assemble_context",
    "generate_answer", "generate_batch", "geval_judge", "synthesize_qa",
    "aggregate_report", "bleu_4", "rouge_l", "tokenize",
    "MLPParams", "TrainConfig", "gradient_check", "init_mlp", "mlp_forward", "train",
    "VideoIndex", "build_index", "load_index", "recall_at_k", "retrieve_topk",
    "save_index",
    "derive_seed", "substream",
    "SelectorModel", "brute_force_select", "collect_training_data",
    "select_frames", "train_generation_selector", "train_retrieval_selector",
    "cosine", "interpolate_ensemble", "l2_normalize", "mean_pool",
    "__version__",
]
