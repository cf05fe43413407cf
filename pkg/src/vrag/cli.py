"""Command-line surface.

One JSON config drives every command; flags override config values. All
randomness is derived from the config seed plus fixed purpose labels, so
a command run twice over identical inputs writes identical bytes.

Query files are JSON-lines; each row carries query_id plus whichever of
question, query_vec, truth_video_id, answer, category the command needs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import generation as genmod
from . import metrics as metmod
from . import retrieval as retmod
from . import selector as selmod
from .client import EncoderClient, GeneratorClient
from .config import EngineConfig, apply_overrides, load_config
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
from .clustering import reduce_frames
from .errors import (
    ConfigError,
    MissingFile,
    ValidationError,
    VragError,
    exit_code_for,
)
from .mlp import TrainConfig
from .rng import derive_seed
from .stubs import make_transport

MEDIA_SUFFIXES = (".mp4", ".avi", ".mov", ".mkv", ".webm")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our exit 2 means transport, so remap."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- shared plumbing ---------------------------------------------------------------

def _load_engine_config(args) -> EngineConfig:
    path = args.config or os.environ.get("VRAG_CONFIG")
    if not path:
        raise ConfigError("config", "pass --config or set VRAG_CONFIG")
    cfg = load_config(path)
    overrides = {}
    for flag, dotted in (("alpha", "alpha"), ("seed", "seed"),
                         ("k", "retrieval.k"), ("gen_mode", "generation.mode"),
                         ("manifest", "manifest_path")):
        if hasattr(args, flag) and getattr(args, flag) is not None:
            overrides[dotted] = getattr(args, flag)
    return apply_overrides(cfg, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_resolved(cfg: EngineConfig) -> CorpusManifest:
    """Load the manifest; a relative embedding_dir is taken relative to it."""
    path = Path(cfg.manifest_path)
    m = load_manifest(path)
    emb = Path(m.embedding_dir)
    if not emb.is_absolute():
        m.embedding_dir = str(path.parent / emb)
    return m


def _encoder_client(cfg: EngineConfig) -> EncoderClient:
    return EncoderClient(base_url=cfg.endpoints.encoder_url,
                         transport=make_transport(cfg.endpoints.encoder_url))


def _generator_client(cfg: EngineConfig) -> GeneratorClient:
    return GeneratorClient(base_url=cfg.endpoints.generator_url,
                           model=cfg.endpoints.generator_model,
                           transport=make_transport(cfg.endpoints.generator_url))


def load_queries(path) -> list[dict]:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    rows = []
    seen = set()
    for n, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if "query_id" not in obj:
            raise ValidationError(f"{p}:{n}: query row missing query_id")
        if obj["query_id"] in seen:
            raise ValidationError(f"{p}:{n}: duplicate query_id {obj['query_id']!r}")
        seen.add(obj["query_id"])
        rows.append(obj)
    return rows


def _query_vector(row: dict, cfg: EngineConfig, encoder: EncoderClient | None) -> np.ndarray:
    if row.get("query_vec") is not None:
        return np.asarray(row["query_vec"], dtype=np.float64)
    if not row.get("question"):
        raise ValidationError(f"query {row['query_id']!r} has neither query_vec nor question")
    client = encoder if encoder is not None else _encoder_client(cfg)
    reply = client.embed_text([row["question"]])
    return np.asarray(reply["embeddings"][0], dtype=np.float64)


def _load_retrieval_selector(cfg: EngineConfig) -> selmod.SelectorModel:
    if not cfg.selector.retrieval_path:
        raise ConfigError("selector.retrieval_path", "required for adaptive mode")
    model = selmod.load_selector(cfg.selector.retrieval_path)
    if model.mode != "retrieval":
        raise ConfigError("selector.retrieval_path", f"selector mode is {model.mode!r}")
    return model


def _build_index(cfg: EngineConfig, manifest: CorpusManifest, selector_mode: str,
                 alpha: float | None = None) -> retmod.VideoIndex:
    selector = _load_retrieval_selector(cfg) if selector_mode == "adaptive" else None
    return retmod.build_index(
        manifest,
        alpha=cfg.alpha if alpha is None else alpha,
        selector=selector,
        seed=cfg.seed,
        frames_per_video=cfg.retrieval.frames_per_video,
        n_subsets=cfg.retrieval.n_subsets,
        candidates=cfg.retrieval.candidates)


def _recall_summary(results, truth: dict[str, str]) -> dict:
    return {f"r_at_{k}": retmod.recall_at_k(results, truth, k) for k in (1, 5, 10)}


# --- ingest ---------------------------------------------------------------------------

def _sidecar_meta(directory: Path, video_id: str) -> dict:
    meta_path = directory / f"{video_id}.meta.json"
    if meta_path.is_file():
        return json.loads(meta_path.read_text(encoding="utf-8"))
    return {}


def _ingest_precomputed(src: Path, emb_dir: Path) -> tuple[list[VideoRecord], int, list]:
    records, failures = [], []
    dim = None
    for visual_path in sorted(src.glob("*.visual.vrem")):
        video_id = visual_path.name[: -len(".visual.vrem")]
        try:
            visual = read_embeddings(visual_path)
            if dim is None:
                dim = visual.dim
            elif visual.dim != dim:
                raise ValidationError(f"dim {visual.dim} != corpus dim {dim}")
            (emb_dir / visual_path.name).write_bytes(visual_path.read_bytes())
            text_path = src / f"{video_id}.text.vrem"
            if text_path.is_file():
                text = read_embeddings(text_path)
                if text.dim != dim:
                    raise ValidationError(f"text dim {text.dim} != corpus dim {dim}")
                (emb_dir / text_path.name).write_bytes(text_path.read_bytes())
            meta = _sidecar_meta(src, video_id)
            records.append(VideoRecord(
                video_id=video_id,
                source_path=meta.get("source_path", ""),
                duration_s=float(meta.get("duration_s", visual.count)),
                frame_count=visual.count,
                subtitle=meta.get("subtitle"),
                aux_transcript=meta.get("aux_transcript"),
                category=meta.get("category"),
            ))
        except VragError as exc:
            failures.append((video_id, exc))
    return records, dim or 0, failures


def _ingest_encoded(cfg: EngineConfig, media_dir: Path, emb_dir: Path,
                    transcribe: bool) -> tuple[list[VideoRecord], int, str, list]:
    encoder = _encoder_client(cfg)
    health = encoder.healthz()
    dim = int(health["dim"])
    encoder_id = str(health.get("encoder_id", "unknown"))
    records, failures = [], []
    media = sorted(p for p in media_dir.iterdir()
                   if p.suffix.lower() in MEDIA_SUFFIXES)
    if not media:
        raise ValidationError(f"no media files under {media_dir}")
    for path in media:
        video_id = path.stem
        try:
            reply = encoder.embed_frames(str(path), fps=1.0)
            values = validate_embed_response(reply["embeddings"], dim=dim,
                                             timestamps=reply.get("timestamps"))
            visual = EmbeddingMatrix(
                video_id=video_id, modality="visual", dim=dim,
                count=values.shape[0], values=values,
                timestamps=np.asarray(reply["timestamps"], dtype=np.float32)
                if reply.get("timestamps") is not None else None)
            write_embeddings(visual, embedding_path(emb_dir, video_id, "visual"))
            subtitle = None
            sidecar = path.with_suffix(".txt")
            if sidecar.is_file():
                subtitle = sidecar.read_text(encoding="utf-8").strip()
            aux = None
            if subtitle is None and transcribe:
                aux = str(encoder.transcribe(str(path)).get("text", ""))
            text_src = subtitle if subtitle is not None else aux
            if text_src:
                text_reply = encoder.embed_text([text_src])
                tvals = validate_embed_response(text_reply["embeddings"], dim=dim)
                write_embeddings(
                    EmbeddingMatrix(video_id=video_id, modality="text", dim=dim,
                                    count=1, values=tvals[:1]),
                    embedding_path(emb_dir, video_id, "text"))
            records.append(VideoRecord(
                video_id=video_id, source_path=str(path),
                duration_s=visual.count / 1.0, frame_count=visual.count,
                subtitle=subtitle, aux_transcript=aux))
        except VragError as exc:
            failures.append((video_id, exc))
    return records, dim, encoder_id, failures


def cmd_ingest(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    emb_dir = out / "embeddings"
    emb_dir.mkdir(exist_ok=True)
    if args.precomputed:
        records, dim, failures = _ingest_precomputed(Path(args.precomputed), emb_dir)
        encoder_id = "precomputed"
    else:
        if not args.media_dir:
            raise ValidationError("pass --media-dir or --precomputed")
        records, dim, encoder_id, failures = _ingest_encoded(
            cfg, Path(args.media_dir), emb_dir, args.transcribe)
    if not records and not failures:
        raise ValidationError("nothing to ingest")
    manifest = CorpusManifest(
        corpus_id=args.corpus_id, encoder_id=encoder_id,
        embedding_dim=dim, embedding_dir="embeddings", videos=records)
    save_manifest(manifest, out / "manifest.json")
    print(f"ingested {len(records)} videos (dim {dim}) -> {out / 'manifest.json'}")
    if failures:
        for video_id, exc in failures:
            print(f"FAILED {video_id}: {exc}", file=sys.stderr)
        return max(exit_code_for(exc) for _, exc in failures)
    return 0


# --- index / retrieve -------------------------------------------------------------------

def cmd_index(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    manifest = _manifest_resolved(cfg)
    index = _build_index(cfg, manifest, args.selector_mode)
    retmod.save_index(index, out / "index.vidx")
    print(f"indexed {len(index.entries)} videos "
          f"(alpha={index.alpha}, selector={index.selector_mode}) -> {out / 'index.vidx'}")
    return 0


def cmd_retrieve(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    if args.index:
        index = retmod.load_index(args.index)
    else:
        index = _build_index(cfg, _manifest_resolved(cfg), args.selector_mode)
    rows = load_queries(args.queries)
    encoder = None
    results = []
    for row in rows:
        qvec = _query_vector(row, cfg, encoder)
        results.append(retmod.retrieve_topk(index, qvec, k=cfg.retrieval.k,
                                            query_id=row["query_id"]))
    retmod.save_results(results, out / "results.jsonl")
    print(f"retrieved top-{cfg.retrieval.k} for {len(results)} queries "
          f"-> {out / 'results.jsonl'}")
    truth = {r["query_id"]: r["truth_video_id"] for r in rows if r.get("truth_video_id")}
    if len(truth) == len(rows) and rows:
        summary = _recall_summary(results, truth)
        (out / "retrieve_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for k in (1, 5, 10):
            print(f"R@{k} {summary[f'r_at_{k}']:.4f}")
    return 0


# --- selector train / select --------------------------------------------------------------

def _candidate_pools(cfg: EngineConfig, manifest: CorpusManifest, video_ids,
                     section) -> tuple[dict, dict]:
    """Reduced candidate arrays and their original frame indices per video."""
    pools, reduced_map = {}, {}
    for video_id in video_ids:
        visual = read_embeddings(embedding_path(manifest.embedding_dir, video_id, "visual"))
        reduced = reduce_frames(visual.values, section.candidates,
                                derive_seed(cfg.seed, "reduce", video_id))
        pools[video_id] = visual.values.astype(np.float64)[reduced]
        reduced_map[video_id] = (reduced, visual)
    return pools, reduced_map


def _generation_signal_fn(cfg: EngineConfig, manifest: CorpusManifest,
                          reduced_map: dict, references: dict, questions: dict):
    client = _generator_client(cfg)

    def signal(pair: selmod.TrainingPair, subset) -> float:
        reduced, visual = reduced_map[pair.video_id]
        frame_idx = sorted(reduced[i] for i in subset)
        if visual.timestamps is not None:
            refs = [(i, float(visual.timestamps[i])) for i in frame_idx]
        else:
            refs = [(i, float(i)) for i in frame_idx]
        rec = manifest.record_for(pair.video_id)
        transcript = rec.subtitle if rec.subtitle is not None else rec.aux_transcript
        ctx = genmod.GenerationContext(
            query_id=pair.query_id, question=questions[pair.query_id],
            segments=[genmod.ContextSegment(video_id=pair.video_id, frame_refs=refs,
                                            transcript_text=transcript)],
            mode="video_plus_text" if transcript is not None else "video_only")
        result = genmod.generate_answer(ctx, client)
        return metmod.rouge_l(references[pair.query_id], result.answer_text)

    return signal


def cmd_selector_train(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    manifest = _manifest_resolved(cfg)
    mode = args.mode
    section = cfg.retrieval if mode == "retrieval" else cfg.generation
    rows = load_queries(args.pairs)
    for row in rows:
        if not row.get("video_id"):
            raise ValidationError(f"pair {row['query_id']!r} missing video_id")
    pools, reduced_map = _candidate_pools(
        cfg, manifest, sorted({r["video_id"] for r in rows}), section)
    encoder = None
    pairs = []
    for row in rows:
        pairs.append(selmod.TrainingPair(
            query_id=row["query_id"], video_id=row["video_id"],
            candidates=pools[row["video_id"]],
            query_vec=_query_vector(row, cfg, encoder)))
    signal_fn = None
    if mode == "generation":
        missing = [r["query_id"] for r in rows if not r.get("answer")]
        if missing:
            raise ValidationError(
                f"generation training rows need reference answers; missing for {missing[:3]}")
        signal_fn = _generation_signal_fn(
            cfg, manifest, reduced_map,
            references={r["query_id"]: r["answer"] for r in rows},
            questions={r["query_id"]: r.get("question", "") for r in rows})
    m = section.frames_per_video
    examples = selmod.collect_training_data(
        pairs, mode, m=m, n_subsets=section.n_subsets, seed=cfg.seed,
        signal_fn=signal_fn)
    selmod.save_training_examples(examples, out / "selector_examples.jsonl")
    train_cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                            epochs=args.epochs, seed=cfg.seed)
    dim = manifest.embedding_dim
    if mode == "retrieval":
        model, trace = selmod.train_retrieval_selector(
            examples, pools, m, dim, section.candidates, train_cfg)
    else:
        queries_map = {p.query_id: p.query_vec for p in pairs}
        model, trace = selmod.train_generation_selector(
            examples, pools, queries_map, m, dim, section.candidates, train_cfg)
    model_path = out / f"selector_{mode}.json"
    selmod.save_selector(model, model_path)
    (out / "train_trace.json").write_text(
        json.dumps({"mode": mode, "epochs": len(trace), "loss": trace}, indent=2) + "\n",
        encoding="utf-8")
    final = trace[-1] if trace else float("nan")
    print(f"trained {mode} selector on {len(examples)} examples "
          f"({len(trace)} epochs, final loss {final:.6f}) -> {model_path}")
    return 0


def cmd_selector_select(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    manifest = _manifest_resolved(cfg)
    path = (cfg.selector.retrieval_path if args.mode == "retrieval"
            else cfg.selector.generation_path)
    if not path:
        raise ConfigError(f"selector.{args.mode}_path", "no trained selector configured")
    model = selmod.load_selector(path)
    visual = read_embeddings(embedding_path(manifest.embedding_dir, args.video, "visual"))
    section = cfg.retrieval if args.mode == "retrieval" else cfg.generation
    query = None
    if model.mode == "generation":
        if not (args.query_text or args.query_vec):
            raise ValidationError("generation-mode selection needs --query-text or --query-vec")
        row = {"query_id": "adhoc", "question": args.query_text,
               "query_vec": json.loads(args.query_vec) if args.query_vec else None}
        query = _query_vector(row, cfg, None)
    reduced = reduce_frames(visual.values, section.candidates,
                            derive_seed(cfg.seed, "reduce", args.video))
    cand = visual.values.astype(np.float64)[reduced]
    chosen = selmod.select_frames(model, cand, query=query,
                                  n_subsets=section.n_subsets,
                                  seed=derive_seed(cfg.seed, "select", args.video),
                                  video_id=args.video)
    frame_indices = sorted(reduced[i] for i in chosen.frame_indices)
    payload = {"video_id": args.video, "mode": model.mode,
               "candidate_indices": list(reduced), "frame_indices": frame_indices}
    (out / "selection.json").write_text(json.dumps(payload, indent=2) + "\n",
                                        encoding="utf-8")
    print(f"selected frames {frame_indices} of {visual.count} for {args.video}")
    return 0


# --- generate / synthqa -----------------------------------------------------------------

def _assemble_all(cfg: EngineConfig, manifest: CorpusManifest, rows: list[dict],
                  results_by_qid: dict, mode: str, transcribe: bool) -> list:
    selector = None
    if cfg.selector.generation_path:
        selector = selmod.load_selector(cfg.selector.generation_path)
        if selector.mode != "generation":
            raise ConfigError("selector.generation_path", f"selector mode is {selector.mode!r}")
    encoder = _encoder_client(cfg) if (transcribe or selector is not None) else None
    contexts = []
    for row in rows:
        qid = row["query_id"]
        if qid not in results_by_qid:
            raise ValidationError(f"no retrieval result for query {qid!r}")
        query_vec = _query_vector(row, cfg, encoder) if selector is not None else None
        contexts.append(genmod.assemble_context(
            question=row.get("question", ""),
            retrieved=results_by_qid[qid],
            manifest=manifest,
            selector=selector,
            mode=mode,
            frames_per_video=cfg.generation.frames_per_video,
            candidates=cfg.generation.candidates,
            n_subsets=cfg.generation.n_subsets,
            seed=cfg.seed,
            query_vec=query_vec,
            asr_client=encoder if transcribe else None))
    return contexts


def cmd_generate(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    manifest = _manifest_resolved(cfg)
    rows = load_queries(args.queries)
    if args.results:
        results = retmod.load_results(args.results)
    else:
        index = _build_index(cfg, manifest, args.selector_mode)
        encoder = None
        results = [retmod.retrieve_topk(index, _query_vector(row, cfg, encoder),
                                        k=cfg.retrieval.k, query_id=row["query_id"])
                   for row in rows]
    results_by_qid = {r.query_id: r for r in results}
    mode = cfg.generation.mode
    contexts = _assemble_all(cfg, manifest, rows, results_by_qid, mode, args.transcribe)
    client = _generator_client(cfg)
    answers = genmod.generate_batch(contexts, client, frames_dir=args.frames_dir,
                                    max_inflight=cfg.max_inflight)
    genmod.save_generation_results(answers, out / "answers.jsonl")
    print(f"generated {len(answers)} answers ({mode}) -> {out / 'answers.jsonl'}")
    return 0


def cmd_synthqa(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    manifest = _manifest_resolved(cfg)
    client = _generator_client(cfg)
    wanted = args.videos or [rec.video_id for rec in manifest.videos]
    rows = []
    for video_id in wanted:
        rec = manifest.record_for(video_id)
        for ex in genmod.synthesize_qa(rec, client):
            rows.append({"question": ex.question, "answer": ex.answer,
                         "source_video_id": ex.source_video_id, "origin": ex.origin,
                         "category": rec.category})
    payload = "\n".join(json.dumps(r, ensure_ascii=False) for r in rows)
    (out / "synthetic_qa.jsonl").write_text(payload + ("\n" if rows else ""),
                                            encoding="utf-8")
    print(f"synthesized {len(rows)} QA pairs over {len(wanted)} videos "
          f"-> {out / 'synthetic_qa.jsonl'}")
    return 0


# --- eval / sweep ------------------------------------------------------------------------

def _score_rows(cfg: EngineConfig, answers: list, truth_rows: list[dict],
                judge: bool) -> list[dict]:
    refs = {r["query_id"]: r for r in truth_rows}
    client = _generator_client(cfg) if judge else None
    rows = []
    for res in answers:
        if res.query_id not in refs:
            raise ValidationError(f"no reference row for query {res.query_id!r}")
        ref = refs[res.query_id]
        if not ref.get("answer"):
            raise ValidationError(f"reference row {res.query_id!r} missing answer")
        row = {"query_id": res.query_id,
               "rouge_l": metmod.rouge_l(ref["answer"], res.answer_text),
               "bleu_4": metmod.bleu_4(ref["answer"], res.answer_text)}
        if judge:
            row["geval"] = genmod.geval_judge(
                ref.get("question", ""), ref["answer"], res.answer_text, client)
        if ref.get("category") is not None:
            row["category"] = ref["category"]
        rows.append(row)
    return rows


def _print_aggregates(label: str, agg: dict) -> None:
    parts = [f"ROUGE-L {100 * agg['rouge_l']:.2f}", f"BLEU-4 {100 * agg['bleu_4']:.2f}"]
    if "geval" in agg:
        parts.append(f"G-Eval {agg['geval']:.2f}")
    print(f"{label}: " + "  ".join(parts))


def _eval_compare(cfg: EngineConfig, args, out: Path) -> int:
    labels = [s.strip() for s in args.compare.split(",") if s.strip()]
    for label in labels:
        if label not in ("uniform", "adaptive"):
            raise ValidationError(f"--compare labels must be uniform/adaptive, got {label!r}")
    manifest = _manifest_resolved(cfg)
    rows = load_queries(args.queries)
    truth = {r["query_id"]: r["truth_video_id"] for r in rows if r.get("truth_video_id")}
    client = _generator_client(cfg)
    encoder = None
    table = []
    for label in labels:
        index = _build_index(cfg, manifest, label)
        results = [retmod.retrieve_topk(index, _query_vector(row, cfg, encoder),
                                        k=cfg.retrieval.k, query_id=row["query_id"])
                   for row in rows]
        results_by_qid = {r.query_id: r for r in results}
        contexts = _assemble_all(cfg, manifest, rows, results_by_qid,
                                 cfg.generation.mode, transcribe=False)
        answers = genmod.generate_batch(contexts, client, max_inflight=cfg.max_inflight)
        scored = _score_rows(cfg, answers, rows, judge=False)
        report = metmod.aggregate_report(scored)
        entry = {"method": label,
                 "r_at_1": retmod.recall_at_k(results, truth, 1) if truth else None,
                 "rouge_l": report.aggregates["rouge_l"],
                 "bleu_4": report.aggregates["bleu_4"]}
        table.append(entry)
        _print_aggregates(label, report.aggregates)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "r_at_1", "rouge_l", "bleu_4"])
    for entry in table:
        writer.writerow([entry["method"],
                         "" if entry["r_at_1"] is None else f"{entry['r_at_1']:.6f}",
                         f"{entry['rouge_l']:.6f}", f"{entry['bleu_4']:.6f}"])
    (out / "comparison.csv").write_text(buf.getvalue(), encoding="utf-8")
    print(f"wrote {out / 'comparison.csv'}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    if args.compare:
        return _eval_compare(cfg, args, out)
    if not args.answers:
        raise ValidationError("pass --answers (or --compare for pipeline comparison)")
    if not (args.truth or args.queries):
        raise ValidationError("pass --truth with reference answers")
    answers = genmod.load_generation_results(args.answers)
    truth_rows = load_queries(args.truth if args.truth else args.queries)
    scored = _score_rows(cfg, answers, truth_rows, judge=args.judge)
    categories = None
    if args.group_by == "category":
        categories = {r["query_id"]: r.get("category") for r in truth_rows
                      if r.get("category") is not None}
    report = metmod.aggregate_report(scored, categories)
    (out / "report.json").write_text(metmod.report_to_json(report), encoding="utf-8")
    (out / "report.csv").write_text(metmod.report_to_csv(report), encoding="utf-8")
    _print_aggregates("overall", report.aggregates)
    if report.group_by:
        for cat in sorted(report.group_by):
            _print_aggregates(f"  {cat}", report.group_by[cat])
    print(f"wrote {out / 'report.json'} and {out / 'report.csv'}")
    return 0


def cmd_sweep_alpha(args) -> int:
    cfg = _load_engine_config(args)
    out = _out_dir(args)
    manifest = _manifest_resolved(cfg)
    rows = load_queries(args.queries)
    truth = {r["query_id"]: r.get("truth_video_id") for r in rows}
    if any(v is None for v in truth.values()):
        raise ValidationError("sweep-alpha queries need truth_video_id on every row")
    encoder = None
    qvecs = {row["query_id"]: _query_vector(row, cfg, encoder) for row in rows}
    lines = [["alpha", "r_at_1", "r_at_5", "r_at_10"]]
    for step in range(11):
        alpha = step / 10.0
        index = _build_index(cfg, manifest, args.selector_mode, alpha=alpha)
        results = [retmod.retrieve_topk(index, qvecs[row["query_id"]], k=10,
                                        query_id=row["query_id"]) for row in rows]
        summary = _recall_summary(results, truth)
        lines.append([f"{alpha:.1f}", f"{summary['r_at_1']:.6f}",
                      f"{summary['r_at_5']:.6f}", f"{summary['r_at_10']:.6f}"])
        print(f"alpha {alpha:.1f}: R@1 {summary['r_at_1']:.4f} "
              f"R@5 {summary['r_at_5']:.4f} R@10 {summary['r_at_10']:.4f}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(lines)
    (out / "sweep_alpha.csv").write_text(buf.getvalue(), encoding="utf-8")
    print(f"wrote {out / 'sweep_alpha.csv'}")
    return 0


# --- entry point --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="vrag", description="Video corpus RAG engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, selector_mode=False):
        p.add_argument("--config", help="config JSON (or env VRAG_CONFIG)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--alpha", type=float, help="override ensemble alpha")
        if selector_mode:
            p.add_argument("--selector-mode", choices=("uniform", "adaptive"),
                           default="uniform", help="frame choice for indexing")

    p = sub.add_parser("ingest", help="build manifest + embedding files")
    common(p)
    p.add_argument("--media-dir", help="directory of media files to encode")
    p.add_argument("--precomputed", help="directory of existing .vrem files")
    p.add_argument("--transcribe", action="store_true",
                   help="fetch transcripts for subtitle-less videos")
    p.add_argument("--corpus-id", default="corpus")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("index", help="build and persist the video index")
    common(p, selector_mode=True)
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("retrieve", help="rank the corpus for each query")
    common(p, selector_mode=True)
    p.add_argument("--queries", required=True, help="queries JSONL")
    p.add_argument("--index", help="existing .vidx file (else built in memory)")
    p.add_argument("--k", type=int, help="override retrieval depth")
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("selector-train", help="collect labeled subsets and fit a scorer")
    common(p)
    p.add_argument("--pairs", required=True,
                   help="JSONL of {query_id, video_id, query_vec|question[, answer]}")
    p.add_argument("--mode", choices=("retrieval", "generation"), default="retrieval")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_selector_train)

    p = sub.add_parser("selector-select", help="apply a trained selector to one video")
    common(p)
    p.add_argument("--video", required=True)
    p.add_argument("--mode", choices=("retrieval", "generation"), default="retrieval")
    p.add_argument("--query-text", help="query text for generation mode")
    p.add_argument("--query-vec", help="JSON array query embedding, bypassing the encoder")
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_selector_select)

    p = sub.add_parser("generate", help="assemble contexts and call the generator")
    common(p, selector_mode=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--results", help="retrieval results JSONL (else retrieve in memory)")
    p.add_argument("--mode", dest="gen_mode", choices=("video_only", "video_plus_text"),
                   help="override generation mode")
    p.add_argument("--frames-dir", help="directory of <video_id>/<index>.jpg frames")
    p.add_argument("--transcribe", action="store_true",
                   help="fetch missing transcripts in video_plus_text mode")
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("synthqa", help="synthesize 3 QA pairs per video")
    common(p)
    p.add_argument("--videos", nargs="*", help="video ids (default: all)")
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_synthqa)

    p = sub.add_parser("eval", help="score answers with ROUGE-L/BLEU-4 (and G-Eval)")
    common(p)
    p.add_argument("--answers", help="generation results JSONL")
    p.add_argument("--truth", help="reference rows JSONL (query_id, answer, category)")
    p.add_argument("--queries", help="alias for --truth in --compare mode")
    p.add_argument("--judge", action="store_true", help="also query the judge endpoint")
    p.add_argument("--group-by", choices=("category",))
    p.add_argument("--compare", help="run the pipeline per method, e.g. uniform,adaptive")
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep-alpha", help="recall versus alpha in 0.1 steps")
    common(p, selector_mode=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--manifest", help="override config manifest_path")
    p.set_defaults(fn=cmd_sweep_alpha)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except VragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
