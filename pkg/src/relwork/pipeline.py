"""Stage pipeline: ingest, graph, eud, embed, label, train, summarize,
evaluate.

Each stage reads the previous stages' artifacts from the work
directory, writes its own atomically, and records a manifest with the
checksums of its inputs and the hash of the configuration.  Re-running
a stage whose manifest still matches is a no-op; a changed
configuration is an error unless forced, and changed inputs trigger a
rebuild.  All randomness is seeded from the configuration, so a whole
pipeline run is bit-reproducible.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import baselines as baselines_mod
from . import figures
from .corpus import (
    Corpus,
    CorpusError,
    LabeledSequence,
    build_candidate_sequence,
    ingest_corpus,
    is_eligible_target,
    label_oracle,
    order_references,
    write_corpus,
)
from .embedding import (
    EmbeddingTable,
    SkipGramParams,
    WalkParams,
    embed_nodes,
    load_table,
    save_table,
    train_skipgram,
)
from .evolution import EvolutionConfig, evolve
from .graph import (
    HeteroGraph,
    build_graph,
    load_graph,
    load_usefulness,
    save_graph,
    save_usefulness,
)
from .metrics import rouge_l, rouge_n
from .model import (
    AttentionConfig,
    SummarizerModel,
    TrainConfig,
    build_instance,
    encode_target,
    extract_summary,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .text import Sentence, normalize

logger = logging.getLogger(__name__)

STAGES = (
    "ingest", "graph", "eud", "embed", "label", "train", "summarize", "evaluate"
)

# What each stage needs to have run before it, and the artifact name a
# missing prerequisite is reported under.
STAGE_DEPENDENCIES: dict[str, tuple[str, ...]] = {
    "ingest": (),
    "graph": ("ingest",),
    "eud": ("ingest", "graph"),
    "embed": ("ingest", "graph", "eud"),
    "label": ("ingest",),
    "train": ("ingest", "label", "embed"),
    "summarize": ("ingest", "label", "embed", "train"),
    "evaluate": ("ingest", "label", "eud", "train", "summarize"),
}

STAGE_ARTIFACT_NAMES = {
    "ingest": "corpus",
    "graph": "graphs",
    "eud": "eud",
    "embed": "embeddings",
    "label": "labels",
    "train": "checkpoint",
    "summarize": "summaries",
    "evaluate": "report",
}


class StageError(Exception):
    """Pipeline failure with a machine-readable category."""

    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class GraphSection:
    damping: float = 0.85
    tolerance: float = 1e-10
    max_iterations: int = 200


@dataclass
class EvolutionSection:
    population_size: int = 24
    generations: int = 100
    scale_factor: float = 0.5
    crossover_rate: float = 0.9
    penalty: float | None = None
    seed: int = 0


@dataclass
class EmbeddingSection:
    dim: int = 128
    walks_per_node: int = 10
    walk_length: int = 40
    return_param: float = 1.0
    inout_param: float = 1.0
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0


@dataclass
class ModelSection:
    dim: int = 128
    widths: tuple[int, ...] = (3, 4, 5)
    epochs: int = 20
    learning_rate: float = 1e-3
    init_scale: float = 0.1
    seed: int = 0
    salience: bool = True
    novelty: bool = True
    text_relevance: bool = True
    graph_relevance: bool = True


@dataclass
class EvaluationSection:
    word_budget: int = 500
    byte_limit: int | None = None  # None: corpus-median gold byte length
    baselines: tuple[str, ...] = tuple(baselines_mod.BASELINE_KINDS)


@dataclass
class SplitSection:
    folds: int = 10
    fold_index: int = 0
    seed: int = 0


@dataclass
class EligibilitySection:
    min_references: int = 15
    min_gold_words: int = 500


@dataclass
class PipelineConfig:
    corpus_path: str = "corpus.jsonl"
    graph: GraphSection = field(default_factory=GraphSection)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    embedding: EmbeddingSection = field(default_factory=EmbeddingSection)
    model: ModelSection = field(default_factory=ModelSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    split: SplitSection = field(default_factory=SplitSection)
    eligibility: EligibilitySection = field(default_factory=EligibilitySection)

    def validate(self) -> None:
        if self.model.dim != self.embedding.dim:
            raise StageError(
                "config-error",
                "model dim and embedding dim must match so graph vectors "
                "feed the attention directly",
            )
        if self.split.folds < 2:
            raise StageError("config-error", "folds must be at least 2")
        if not 0 <= self.split.fold_index < self.split.folds:
            raise StageError("config-error", "fold index out of range")
        if self.evaluation.word_budget < 1:
            raise StageError("config-error", "word budget must be positive")
        if self.evaluation.byte_limit is not None and self.evaluation.byte_limit < 1:
            raise StageError("config-error", "byte limit must be positive")
        for kind in self.evaluation.baselines:
            if kind not in baselines_mod.BASELINE_KINDS:
                raise StageError("config-error", f"unknown baseline {kind!r}")

    def config_hash(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def attention(self) -> AttentionConfig:
        return AttentionConfig(
            salience=self.model.salience,
            novelty=self.model.novelty,
            text_relevance=self.model.text_relevance,
            graph_relevance=self.model.graph_relevance,
        )


# Small-scale overrides applied by --profile desk; everything else keeps
# the full-scale defaults above.
DESK_PROFILE = {
    "embedding": {"dim": 16, "walks_per_node": 5, "walk_length": 20, "epochs": 3},
    "model": {"dim": 16},
    "evolution": {"generations": 30},
    "split": {"folds": 3},
}


def _merge_section(section, values: dict, path: str) -> None:
    for key, value in values.items():
        if not hasattr(section, key):
            raise StageError("config-error", f"unknown config key {path}.{key}")
        current = getattr(section, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _merge_section(current, value, f"{path}.{key}")
        else:
            if isinstance(current, tuple) and isinstance(value, list):
                value = tuple(value)
            setattr(section, key, value)


def load_config(path=None, profile: str = "full") -> PipelineConfig:
    """Build the configuration: defaults, then file, then profile."""
    config = PipelineConfig()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except FileNotFoundError:
            raise StageError("config-error", f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise StageError("config-error", f"unreadable config file: {exc}") from None
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise StageError("config-error", "config file must hold a mapping")
        _merge_section(config, data, "config")
    if profile == "desk":
        for section, values in DESK_PROFILE.items():
            _merge_section(getattr(config, section), values, section)
    elif profile != "full":
        raise StageError("config-error", f"unknown profile {profile!r}")
    config.validate()
    return config


# ---------------------------------------------------------------------------
# Fold splitting


def split_folds(target_ids, folds: int, seed: int = 0) -> list[list[str]]:
    """Deterministic shuffle then round-robin deal into folds.

    Fold sizes differ by at most one.  More folds than targets cannot
    give every fold a test member and is rejected.
    """
    target_ids = sorted(target_ids)
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if folds > len(target_ids):
        raise ValueError(
            f"cannot split {len(target_ids)} targets into {folds} folds"
        )
    order = np.random.default_rng(seed).permutation(len(target_ids))
    out: list[list[str]] = [[] for _ in range(folds)]
    for position, idx in enumerate(order):
        out[position % folds].append(target_ids[int(idx)])
    return [sorted(fold) for fold in out]


def train_test_split(config: PipelineConfig, target_ids) -> tuple[list[str], list[str]]:
    folds = split_folds(target_ids, config.split.folds, config.split.seed)
    test = folds[config.split.fold_index]
    train_ids = sorted(t for k, fold in enumerate(folds) for t in fold
                       if k != config.split.fold_index)
    return train_ids, test


# ---------------------------------------------------------------------------
# Atomic writes and hashing


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_via(path: Path, writer) -> None:
    """Run writer(tmp_path), then move the result into place."""
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest_path(workdir: Path, stage: str) -> Path:
    return workdir / f"{stage}.manifest.json"


def _load_manifest(workdir: Path, stage: str) -> dict | None:
    path = _manifest_path(workdir, stage)
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _stage_inputs(stage: str, config: PipelineConfig, workdir: Path) -> dict[str, str]:
    """Hash every dependency output plus external inputs."""
    inputs: dict[str, str] = {}
    if stage == "ingest":
        corpus_path = Path(config.corpus_path)
        if not corpus_path.exists():
            raise StageError(
                "config-error", f"corpus file not found: {config.corpus_path}"
            )
        inputs[str(corpus_path)] = _sha256_file(corpus_path)
        return inputs
    for dep in STAGE_DEPENDENCIES[stage]:
        manifest = _load_manifest(workdir, dep)
        if manifest is None:
            raise StageError(
                "missing-artifact",
                f"missing artifact: {STAGE_ARTIFACT_NAMES[dep]}; "
                f"run the {dep} stage first",
            )
        for rel in manifest["outputs"]:
            path = workdir / rel
            if not path.exists():
                raise StageError(
                    "missing-artifact",
                    f"missing artifact: {STAGE_ARTIFACT_NAMES[dep]}; "
                    f"run the {dep} stage first",
                )
            inputs[rel] = _sha256_file(path)
    return inputs


def run_stage(stage: str, config: PipelineConfig, workdir, force: bool = False) -> dict:
    """Run one stage if needed; returns its manifest."""
    if stage not in STAGES:
        raise StageError("config-error", f"unknown stage {stage!r}")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    inputs = _stage_inputs(stage, config, workdir)
    config_hash = config.config_hash()

    existing = _load_manifest(workdir, stage)
    if existing is not None and not force:
        if existing.get("config_hash") != config_hash:
            raise StageError(
                "config-error",
                f"stage {stage} artifacts were built with a different "
                "configuration; rerun with --force to rebuild",
            )
        if existing.get("inputs") == inputs and all(
            (workdir / rel).exists() for rel in existing.get("outputs", [])
        ):
            logger.info("stage %s: up to date, skipping", stage)
            return existing

    logger.info("stage %s: running", stage)
    started = time.perf_counter()
    runner = _STAGE_RUNNERS[stage]
    outputs, extras = runner(config, workdir)
    manifest = {
        "stage": stage,
        "config_hash": config_hash,
        "inputs": inputs,
        "outputs": sorted(outputs),
        "duration_seconds": round(time.perf_counter() - started, 3),
    }
    manifest.update(extras)
    _atomic_write_text(
        _manifest_path(workdir, stage), json.dumps(manifest, indent=2, sort_keys=True)
    )
    logger.info(
        "stage %s: done in %.1fs", stage, manifest["duration_seconds"]
    )
    return manifest


def run_pipeline(config: PipelineConfig, workdir, force: bool = False) -> None:
    for stage in STAGES:
        run_stage(stage, config, workdir, force=force)


# ---------------------------------------------------------------------------
# Shared artifact accessors


def _read_targets(workdir: Path) -> list[dict]:
    with open(workdir / "targets.json", "r", encoding="utf-8") as fh:
        return json.load(fh)["targets"]


def _read_years(workdir: Path) -> list[int]:
    with open(workdir / "graphs" / "years.json", "r", encoding="utf-8") as fh:
        return json.load(fh)["years"]


def _load_year_graph(workdir: Path, year: int) -> HeteroGraph:
    return load_graph(
        workdir / "graphs" / f"{year}.nodes.tsv",
        workdir / "graphs" / f"{year}.edges.tsv",
    )


def _read_labels(workdir: Path) -> dict[str, dict]:
    rows = {}
    with open(workdir / "labels.jsonl", "r", encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            rows[row["target"]] = row
    return rows


def _sequence_from_row(row: dict) -> LabeledSequence:
    sentences = tuple(
        Sentence(
            tokens=tuple(s["tokens"]), doc_id=s["doc"], position=s["position"],
            raw=s.get("raw", ""),
        )
        for s in row["sentences"]
    )
    return LabeledSequence(
        target_id=row["target"],
        sentences=sentences,
        boundaries=tuple((b[0], b[1], b[2]) for b in row["boundaries"]),
        labels=tuple(row["labels"]) if row.get("labels") is not None else None,
    )


def _workdir_corpus(workdir: Path) -> Corpus:
    return ingest_corpus(workdir / "corpus.jsonl")


# ---------------------------------------------------------------------------
# Stage bodies


def _stage_ingest(config: PipelineConfig, workdir: Path):
    corpus = ingest_corpus(config.corpus_path)
    if len(corpus) == 0:
        raise StageError("data-error", "corpus has no usable record")
    for lineno, message in corpus.errors:
        logger.warning("corpus line %d skipped: %s", lineno, message)
    elig = config.eligibility
    targets = []
    for pid in corpus.ids():
        rec = corpus[pid]
        if not rec.related_work:
            continue
        if is_eligible_target(rec, elig.min_references, elig.min_gold_words):
            targets.append({
                "id": pid,
                "year": rec.year,
                "resolved_refs": sum(1 for r in rec.references if r.resolved),
                "gold_tokens": len(normalize(rec.related_work)),
            })
    if not targets:
        raise StageError("data-error", "no eligible target in the corpus")
    _atomic_via(
        workdir / "corpus.jsonl",
        lambda tmp: write_corpus((corpus[pid] for pid in corpus.ids()), tmp),
    )
    _atomic_write_text(
        workdir / "targets.json",
        json.dumps({"targets": targets}, indent=2, sort_keys=True),
    )
    return ["corpus.jsonl", "targets.json"], {
        "skipped_lines": len(corpus.errors),
        "eligible_targets": [t["id"] for t in targets],
    }


def _stage_graph(config: PipelineConfig, workdir: Path):
    corpus = _workdir_corpus(workdir)
    targets = _read_targets(workdir)
    years = sorted({t["year"] for t in targets})
    graph_dir = workdir / "graphs"
    graph_dir.mkdir(exist_ok=True)
    outputs = []
    for year in years:
        snapshot = build_graph(
            corpus, year,
            damping=config.graph.damping,
            tol=config.graph.tolerance,
            max_iters=config.graph.max_iterations,
        )
        nodes_rel = f"graphs/{year}.nodes.tsv"
        edges_rel = f"graphs/{year}.edges.tsv"
        tmp_nodes = workdir / (nodes_rel + ".tmp")
        tmp_edges = workdir / (edges_rel + ".tmp")
        save_graph(snapshot, tmp_nodes, tmp_edges)
        os.replace(tmp_nodes, workdir / nodes_rel)
        os.replace(tmp_edges, workdir / edges_rel)
        outputs += [nodes_rel, edges_rel]
        logger.info(
            "graph %d: %d nodes, %d edges", year, len(snapshot), snapshot.num_edges()
        )
    _atomic_write_text(
        graph_dir / "years.json", json.dumps({"years": years}, sort_keys=True)
    )
    outputs.append("graphs/years.json")
    return outputs, {}


def _ordered_refs_in_graph(rec, snapshot: HeteroGraph) -> list[str]:
    in_graph = {node.key for node in snapshot.papers()}
    return [rid for rid in order_references(rec) if rid in in_graph]


def _stage_eud(config: PipelineConfig, workdir: Path):
    corpus = _workdir_corpus(workdir)
    targets = _read_targets(workdir)
    train_ids, test_ids = train_test_split(config, [t["id"] for t in targets])
    years = {t["id"]: t["year"] for t in targets}
    snapshots: dict[int, HeteroGraph] = {}
    grouped_targets = []
    for tid in train_ids:
        year = years[tid]
        if year not in snapshots:
            snapshots[year] = _load_year_graph(workdir, year)
        refs = _ordered_refs_in_graph(corpus[tid], snapshots[year])
        if not refs:
            logger.warning("target %s has no reference in its snapshot", tid)
            continue
        grouped_targets.append((tid, refs, year))
    if not grouped_targets:
        raise StageError("data-error", "no training target with usable references")
    evo = config.evolution
    result = evolve(
        snapshots,
        grouped_targets,
        EvolutionConfig(
            population_size=evo.population_size,
            generations=evo.generations,
            scale_factor=evo.scale_factor,
            crossover_rate=evo.crossover_rate,
            penalty=evo.penalty,
            seed=evo.seed,
        ),
    )
    _atomic_via(workdir / "eud.txt", lambda tmp: save_usefulness(result.best.genome, tmp))
    trace = "generation\tbest_fitness\n" + "".join(
        f"{gen}\t{fitness:.12g}\n" for gen, fitness in enumerate(result.history)
    )
    _atomic_write_text(workdir / "eud_trace.tsv", trace)
    return ["eud.txt", "eud_trace.tsv"], {
        "train_targets": train_ids,
        "test_targets": test_ids,
        "best_fitness": result.best.fitness,
    }


def _word_training_documents(corpus: Corpus, train_ids) -> list[str]:
    """Papers whose sentences feed word-vector training.

    Only training targets and their references contribute; held-out
    targets never do, their unseen tokens map to the unknown vector.
    """
    doc_ids = set()
    for tid in train_ids:
        doc_ids.add(tid)
        for ref in corpus[tid].references:
            if ref.resolved:
                doc_ids.add(ref.paper_id)
    return sorted(doc_ids)


def _stage_embed(config: PipelineConfig, workdir: Path):
    corpus = _workdir_corpus(workdir)
    targets = _read_targets(workdir)
    train_ids, _ = train_test_split(config, [t["id"] for t in targets])
    eud = load_usefulness(workdir / "eud.txt")
    emb = config.embedding
    walk_params = WalkParams(
        walks_per_node=emb.walks_per_node,
        walk_length=emb.walk_length,
        return_param=emb.return_param,
        inout_param=emb.inout_param,
    )
    sg_params = SkipGramParams(
        dim=emb.dim, window=emb.window, negatives=emb.negatives,
        epochs=emb.epochs, learning_rate=emb.learning_rate,
    )
    emb_dir = workdir / "embeddings"
    emb_dir.mkdir(exist_ok=True)
    outputs = []
    for year in _read_years(workdir):
        snapshot = _load_year_graph(workdir, year)
        table = embed_nodes(snapshot, eud, walk_params, sg_params, seed=emb.seed)
        rel = f"embeddings/nodes_{year}.txt"
        _atomic_via(workdir / rel, lambda tmp, t=table: save_table(t, tmp))
        outputs.append(rel)
    sequences = []
    for doc_id in _word_training_documents(corpus, train_ids):
        for sentence in corpus[doc_id].accepted_sentences():
            sequences.append(list(sentence.tokens))
    words = train_skipgram(sequences, sg_params, seed=emb.seed)
    _atomic_via(workdir / "embeddings/words.txt", lambda tmp: save_table(words, tmp))
    outputs.append("embeddings/words.txt")
    return outputs, {"train_targets": train_ids}


def _stage_label(config: PipelineConfig, workdir: Path):
    corpus = _workdir_corpus(workdir)
    targets = _read_targets(workdir)
    rows = []
    for entry in targets:
        rec = corpus[entry["id"]]
        seq = build_candidate_sequence(rec, corpus)
        seq = label_oracle(seq, rec.related_work)
        rows.append(json.dumps({
            "target": seq.target_id,
            "year": rec.year,
            "boundaries": [list(b) for b in seq.boundaries],
            "sentences": [
                {
                    "tokens": list(s.tokens),
                    "doc": s.doc_id,
                    "position": s.position,
                    "raw": s.raw,
                }
                for s in seq.sentences
            ],
            "labels": list(seq.labels),
        }, sort_keys=True))
    _atomic_write_text(workdir / "labels.jsonl", "\n".join(rows) + "\n")
    return ["labels.jsonl"], {}


def _instances_for(
    config: PipelineConfig,
    workdir: Path,
    corpus: Corpus,
    target_ids,
    label_rows: dict[str, dict],
):
    """Build model instances, loading each year's node table once."""
    node_tables: dict[int, EmbeddingTable] = {}
    instances = []
    for tid in target_ids:
        row = label_rows[tid]
        year = row["year"]
        if year not in node_tables:
            node_tables[year] = load_table(workdir / f"embeddings/nodes_{year}.txt")
        seq = _sequence_from_row(row)
        rec = corpus[tid]
        target_sentences = [s.tokens for s in rec.accepted_sentences()]
        instances.append(
            build_instance(seq, target_sentences, node_tables[year])
        )
    return instances


def _stage_train(config: PipelineConfig, workdir: Path):
    corpus = _workdir_corpus(workdir)
    targets = _read_targets(workdir)
    train_ids, test_ids = train_test_split(config, [t["id"] for t in targets])
    label_rows = _read_labels(workdir)
    word_table = load_table(workdir / "embeddings/words.txt")
    mc = config.model
    model = SummarizerModel.initialize(
        mc.dim, word_table, widths=mc.widths, seed=mc.seed, init_scale=mc.init_scale
    )
    instances = _instances_for(config, workdir, corpus, train_ids, label_rows)
    result = train(
        model,
        instances,
        config.attention(),
        TrainConfig(epochs=mc.epochs, learning_rate=mc.learning_rate),
    )
    ckpt_tmp = workdir / "checkpoint.bin.tmp"
    manifest_tmp = workdir / "checkpoint.manifest.txt.tmp"
    save_checkpoint(model, ckpt_tmp, manifest_tmp)
    os.replace(ckpt_tmp, workdir / "checkpoint.bin")
    os.replace(manifest_tmp, workdir / "checkpoint.manifest.txt")
    trace = "epoch\tmean_loss\n" + "".join(
        f"{epoch + 1}\t{value:.12g}\n"
        for epoch, value in enumerate(result.epoch_losses)
    )
    _atomic_write_text(workdir / "loss_trace.tsv", trace)
    return (
        ["checkpoint.bin", "checkpoint.manifest.txt", "loss_trace.tsv"],
        {"train_targets": train_ids, "test_targets": test_ids,
         "final_loss": result.epoch_losses[-1]},
    )


def _stage_summarize(config: PipelineConfig, workdir: Path):
    corpus = _workdir_corpus(workdir)
    targets = _read_targets(workdir)
    _, test_ids = train_test_split(config, [t["id"] for t in targets])
    label_rows = _read_labels(workdir)
    model = load_checkpoint(workdir / "checkpoint.bin")
    attention = config.attention()
    rows = []
    for tid, inst in zip(
        test_ids, _instances_for(config, workdir, corpus, test_ids, label_rows)
    ):
        enc = encode_target(model, inst)
        chosen = extract_summary(
            model, attention, enc, config.evaluation.word_budget
        )
        seq = _sequence_from_row(label_rows[tid])
        rows.append(json.dumps({
            "target": tid,
            "indices": chosen,
            "tokens": [t for i in chosen for t in seq.sentences[i].tokens],
            "text": " ".join(seq.sentences[i].raw for i in chosen),
        }, sort_keys=True))
    _atomic_write_text(workdir / "summaries.jsonl", "\n".join(rows) + "\n")
    return ["summaries.jsonl"], {"test_targets": test_ids}


def _check_leakage(workdir: Path, test_ids) -> None:
    """No held-out target may have fed tuning, embeddings or training."""
    test_set = set(test_ids)
    for stage in ("eud", "embed", "train"):
        manifest = _load_manifest(workdir, stage)
        if manifest is None:
            continue
        overlap = test_set.intersection(manifest.get("train_targets", []))
        if overlap:
            raise StageError(
                "data-error",
                f"held-out targets {sorted(overlap)} leaked into the "
                f"{stage} stage; rebuild with a consistent split",
            )


def _median_gold_bytes(corpus: Corpus, targets) -> int:
    sizes = sorted(
        len(" ".join(normalize(corpus[t["id"]].related_work)).encode("utf-8"))
        for t in targets
    )
    return int(np.median(sizes))


_REPORT_COLUMNS = (
    "rouge1_recall", "rouge1_precision", "rouge1_f1",
    "rouge2_recall", "rouge2_precision", "rouge2_f1",
    "rougeL_recall", "rougeL_precision", "rougeL_f1",
)


def _score_row(candidate_tokens, reference_tokens, byte_limit) -> list[float]:
    r1 = rouge_n(candidate_tokens, reference_tokens, 1, byte_limit)
    r2 = rouge_n(candidate_tokens, reference_tokens, 2, byte_limit)
    rl = rouge_l(candidate_tokens, reference_tokens, byte_limit)
    return [
        r1.recall, r1.precision, r1.f1,
        r2.recall, r2.precision, r2.f1,
        rl.recall, rl.precision, rl.f1,
    ]


def _stage_evaluate(config: PipelineConfig, workdir: Path):
    corpus = _workdir_corpus(workdir)
    targets = _read_targets(workdir)
    _, test_ids = train_test_split(config, [t["id"] for t in targets])
    _check_leakage(workdir, test_ids)
    label_rows = _read_labels(workdir)
    summaries = {}
    with open(workdir / "summaries.jsonl", "r", encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            summaries[row["target"]] = row
    byte_limit = config.evaluation.byte_limit
    if byte_limit is None:
        byte_limit = _median_gold_bytes(corpus, targets)
        logger.info("reference byte limit from corpus median: %d", byte_limit)

    methods = ["model"] + list(config.evaluation.baselines)
    scores: dict[str, list[list[float]]] = {m: [] for m in methods}
    lines = ["method\ttarget\t" + "\t".join(_REPORT_COLUMNS)]
    for tid in test_ids:
        if tid not in summaries:
            raise StageError(
                "data-error", f"no summary for held-out target {tid}"
            )
        seq = _sequence_from_row(label_rows[tid])
        reference = normalize(corpus[tid].related_work)
        sentence_tokens = [list(s.tokens) for s in seq.sentences]
        counts = seq.token_counts()
        per_method = {"model": summaries[tid]["tokens"]}
        for kind in config.evaluation.baselines:
            chosen = baselines_mod.baseline_summarize(
                kind, sentence_tokens, counts, config.evaluation.word_budget
            )
            per_method[kind] = [t for i in chosen for t in sentence_tokens[i]]
        for method in methods:
            row = _score_row(per_method[method], reference, byte_limit)
            scores[method].append(row)
            lines.append(
                method + "\t" + tid + "\t" + "\t".join(f"{v:.6f}" for v in row)
            )
    mean_rows = {}
    for method in methods:
        means = np.asarray(scores[method]).mean(axis=0)
        mean_rows[method] = means
        lines.append(
            method + "\tMEAN\t" + "\t".join(f"{v:.6f}" for v in means)
        )
    _atomic_write_text(workdir / "report.tsv", "\n".join(lines) + "\n")

    figures_dir = workdir / "figures"
    figures_dir.mkdir(exist_ok=True)
    outputs = ["report.tsv"]
    figures.render_mean_rouge(
        {m: mean_rows[m] for m in methods}, figures_dir / "mean_rouge.png"
    )
    outputs.append("figures/mean_rouge.png")
    for rel, source, title, ylabel in (
        ("figures/eud_fitness.png", workdir / "eud_trace.tsv",
         "usefulness tuning", "best fitness"),
        ("figures/training_loss.png", workdir / "loss_trace.tsv",
         "extractor training", "mean loss"),
    ):
        values = figures.read_trace(source)
        if values:
            figures.render_series(values, title, ylabel, workdir / rel)
            outputs.append(rel)
    return outputs, {"byte_limit": byte_limit, "test_targets": test_ids}


_STAGE_RUNNERS = {
    "ingest": _stage_ingest,
    "graph": _stage_graph,
    "eud": _stage_eud,
    "embed": _stage_embed,
    "label": _stage_label,
    "train": _stage_train,
    "summarize": _stage_summarize,
    "evaluate": _stage_evaluate,
}
