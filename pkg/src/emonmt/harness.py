"""Experiment driver: four corpus variants, train, decode, score, report.

Each variant (baseline / arousal / dominance / valence) gets its own BPE
vocab, model, translations, and scores under output_dir/<variant>/. A
failed variant is recorded and does not abort the others.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from . import bleu
from .bpe import bpe_train, save_vocab
from .corpus import ParallelCorpus, ParallelPair, load_corpus
from .decoding import BeamConfig, translate_corpus
from .emotion import (
    Dimension,
    DistributionStats,
    bin_emotion,
    distribution_stats,
    load_scores,
)
from .errors import EmoNmtError, MissingScore, UsageError
from .model import (
    Checkpoint,
    ModelConfig,
    TrainConfig,
    average_checkpoints,
    load_checkpoint,
    save_checkpoint,
    train,
)

VARIANTS = ("baseline", "arousal", "dominance", "valence")
SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class ExperimentSpec:
    train_source: str
    train_target: str
    dev_source: str
    dev_target: str
    test_source: str
    test_target: str
    output_dir: str
    seed: int
    train_ids: str | None = None
    dev_ids: str | None = None
    test_ids: str | None = None
    score_file: str | None = None
    variants: tuple[str, ...] = VARIANTS
    bpe_size: int = 1000
    model: ModelConfig = field(default_factory=lambda: ModelConfig(vocab_size=1))
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    beam: BeamConfig = field(default_factory=BeamConfig)
    force: bool = False

    def __post_init__(self):
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise UsageError(f"unknown variant(s): {unknown}; choose from {VARIANTS}")
        if any(v != "baseline" for v in self.variants) and self.score_file is None:
            raise UsageError("tagged variants require a score file")


@dataclass
class ResultsTable:
    scores: dict[str, dict[str, float]]  # variant -> split -> BLEU
    errors: dict[str, str]

    def delta(self, variant: str, split: str) -> float | None:
        if "baseline" not in self.scores or variant not in self.scores:
            return None
        return self.scores[variant][split] - self.scores["baseline"][split]

    def render_text(self) -> str:
        variants = [v for v in VARIANTS if v in self.scores]
        with_delta = "baseline" in self.scores and len(variants) > 1
        lines = []
        header = f"{'split':<8}" + "".join(f"{v:>12}" for v in variants)
        lines.append(header)
        lines.append("-" * len(header))
        for split in ("dev", "test"):
            cells = [f"{self.scores[v][split]:12.2f}" for v in variants]
            lines.append(f"{split:<8}" + "".join(cells))
            if with_delta:
                deltas = [
                    " " * 12 if v == "baseline" else f"{self.delta(v, split):+12.2f}"
                    for v in variants
                ]
                lines.append(f"{'  delta':<8}" + "".join(deltas))
        for variant, message in sorted(self.errors.items()):
            lines.append(f"FAILED {variant}: {message}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["variant,split,bleu,delta_vs_baseline"]
        for variant in (v for v in VARIANTS if v in self.scores):
            for split in ("dev", "test"):
                d = self.delta(variant, split)
                delta = "" if d is None or variant == "baseline" else f"{d:.2f}"
                lines.append(f"{variant},{split},{self.scores[variant][split]:.2f},{delta}")
        return "\n".join(lines) + "\n"


def _load_splits(spec: ExperimentSpec) -> dict[str, ParallelCorpus]:
    return {
        "train": load_corpus(spec.train_source, spec.train_target, spec.train_ids, split="train"),
        "dev": load_corpus(spec.dev_source, spec.dev_target, spec.dev_ids, split="dev"),
        "test": load_corpus(spec.test_source, spec.test_target, spec.test_ids, split="test"),
    }


def _tag_corpus(corpus: ParallelCorpus, scores, dim: Dimension) -> ParallelCorpus:
    pairs = []
    for pair in corpus:
        token = bin_emotion(scores[pair.id], dim)
        pairs.append(ParallelPair(pair.id, f"{token.surface} {pair.source}", pair.target))
    return ParallelCorpus(pairs=tuple(pairs), split=corpus.split)


def prepare_variants(spec: ExperimentSpec) -> dict[str, dict[str, ParallelCorpus]]:
    """Per-variant corpora: baseline untouched, dimension variants tagged."""
    splits = _load_splits(spec)
    out: dict[str, dict[str, ParallelCorpus]] = {}
    tagged = [v for v in spec.variants if v != "baseline"]
    if "baseline" in spec.variants:
        out["baseline"] = dict(splits)
    if tagged:
        scores = load_scores(spec.score_file)
        all_ids = {p.id for corpus in splits.values() for p in corpus}
        missing = all_ids - scores.keys()
        if missing:
            raise MissingScore(missing)
        for variant in tagged:
            dim = Dimension(variant)
            out[variant] = {name: _tag_corpus(c, scores, dim) for name, c in splits.items()}
    return out


def _run_variant(spec: ExperimentSpec, variant: str, corpora: dict[str, ParallelCorpus]):
    var_dir = os.path.join(spec.output_dir, variant)
    os.makedirs(var_dir, exist_ok=True)

    vocab_path = os.path.join(var_dir, "vocab.txt")
    train_corpus = corpora["train"]
    vocab = bpe_train(train_corpus.sources() + train_corpus.targets(), spec.bpe_size)
    save_vocab(vocab, vocab_path)

    mcfg = replace(spec.model, vocab_size=len(vocab), seed=spec.seed)
    model_path = os.path.join(var_dir, "model.pt")

    params = None
    if not spec.force and os.path.exists(model_path):
        existing = load_checkpoint(model_path)
        if existing.config_hash == mcfg.hash():
            params = existing.params
    if params is None:
        checkpoints = train(
            train_corpus,
            corpora["dev"],
            vocab,
            mcfg,
            spec.train_cfg,
            log_path=os.path.join(var_dir, "train_log.csv"),
        )
        k = min(spec.train_cfg.avg_top_k, len(checkpoints))
        params = average_checkpoints(checkpoints, k)
        best_dev = min(c.dev_loss for c in checkpoints)
        save_checkpoint(
            Checkpoint(params=params, step=checkpoints[-1].step, dev_loss=best_dev, config_hash=mcfg.hash()),
            model_path,
        )

    scores = {}
    for split in ("dev", "test"):
        corpus = corpora[split]
        translations = translate_corpus(mcfg, params, vocab, corpus, spec.beam)
        hyp_path = os.path.join(var_dir, f"{split}.hyp.txt")
        with open(hyp_path, "w", encoding="utf-8", newline="\n") as f:
            for _, text in translations:
                f.write(text + "\n")
        with open(os.path.join(var_dir, f"{split}.hyp.tsv"), "w", encoding="utf-8", newline="\n") as f:
            for uid, text in translations:
                f.write(f"{uid}\t{text}\n")
        breakdown = bleu.corpus_bleu([t for _, t in translations], corpus.targets())
        scores[split] = breakdown.score
    with open(os.path.join(var_dir, "bleu.txt"), "w", encoding="utf-8", newline="\n") as f:
        for split in ("dev", "test"):
            f.write(f"{split}\t{scores[split]:.2f}\t{bleu.signature()}\n")
    return scores


def run_experiment(spec: ExperimentSpec) -> ResultsTable:
    os.makedirs(spec.output_dir, exist_ok=True)
    variants = prepare_variants(spec)
    table = ResultsTable(scores={}, errors={})
    for variant in (v for v in VARIANTS if v in variants):
        try:
            table.scores[variant] = _run_variant(spec, variant, variants[variant])
        except EmoNmtError as e:
            table.errors[variant] = f"{type(e).__name__}: {e}"
    with open(os.path.join(spec.output_dir, "report.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(table.render_text())
    with open(os.path.join(spec.output_dir, "report.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write(table.to_csv())
    return table


def stats_report(score_path, splits: dict[str, list[str]] | None = None) -> list[DistributionStats]:
    """Distribution stats per split per dimension; splits maps a split name
    to the utterance IDs it contains (None means one split over all rows)."""
    scores = load_scores(score_path)
    if splits is None:
        splits = {"all": list(scores)}
    out = []
    for split_name, ids in splits.items():
        missing = set(ids) - scores.keys()
        if missing:
            raise MissingScore(missing)
        subset = [scores[i] for i in ids]
        for dim in Dimension:
            out.append(distribution_stats(subset, dim, split=split_name))
    return out


def render_stats(stats: list[DistributionStats]) -> str:
    header = (
        f"{'split':<10}{'dimension':<11}{'count':>7}{'min':>8}{'q1':>8}"
        f"{'median':>8}{'q3':>8}{'max':>8}{'mean':>8}"
    )
    lines = [header, "-" * len(header)]
    for s in stats:
        lines.append(
            f"{s.split:<10}{s.dimension.value:<11}{s.count:>7}{s.min:>8.3f}{s.q1:>8.3f}"
            f"{s.median:>8.3f}{s.q3:>8.3f}{s.max:>8.3f}{s.mean:>8.3f}"
        )
    return "\n".join(lines) + "\n"


def stats_csv(stats: list[DistributionStats]) -> str:
    lines = ["split,dimension,count,min,q1,median,q3,max,mean"]
    for s in stats:
        lines.append(
            f"{s.split},{s.dimension.value},{s.count},{s.min:.6f},{s.q1:.6f},"
            f"{s.median:.6f},{s.q3:.6f},{s.max:.6f},{s.mean:.6f}"
        )
    return "\n".join(lines) + "\n"
