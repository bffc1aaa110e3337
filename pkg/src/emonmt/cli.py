"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.
A ``--config`` file holds ``key=value`` lines (keys are flag names with
underscores) and overrides anything given on the command line.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import bleu
from .bpe import bpe_train, load_vocab, save_vocab
from .corpus import load_corpus, save_corpus
from .decoding import BeamConfig, translate_corpus
from .emotion import Dimension, bin_emotion, ccc, load_scores
from .errors import DataError, TrainingError, UsageError
from .harness import (
    ExperimentSpec,
    VARIANTS,
    render_stats,
    run_experiment,
    stats_csv,
    stats_report,
)
from .model import (
    Checkpoint,
    ModelConfig,
    TrainConfig,
    average_checkpoints,
    load_checkpoint,
    save_checkpoint,
    train,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_corpus_flags(p):
    for split in ("train", "dev", "test"):
        p.add_argument(f"--{split}-source", required=True)
        p.add_argument(f"--{split}-target", required=True)
        p.add_argument(f"--{split}-ids")


def _add_model_flags(p):
    p.add_argument("--enc-layers", type=int, default=6)
    p.add_argument("--dec-layers", type=int, default=6)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--model-dim", type=int, default=256)
    p.add_argument("--ff-dim", type=int, default=1024)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-len", type=int, default=256)


def _add_train_flags(p):
    p.add_argument("--warmup-steps", type=int, default=8000)
    p.add_argument("--batch-size", type=int, default=96)
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--label-smoothing", type=float, default=0.1)
    p.add_argument("--avg-top-k", type=int, default=5)
    p.add_argument("--peak-scale", type=float, default=1.0)
    p.add_argument("--grad-clip", type=float, default=5.0)


def _add_beam_flags(p):
    p.add_argument("--beam-size", type=int, default=4)
    p.add_argument("--decode-max-len", type=int, default=64)
    p.add_argument("--length-penalty", type=float, default=0.6)


def build_parser() -> _Parser:
    parser = _Parser(prog="emonmt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="emotion score distribution statistics")
    p.add_argument("--scores", required=True)
    p.add_argument("--split", action="append", default=[], metavar="NAME=IDFILE")
    p.add_argument("--csv", help="also write the table as CSV to this path")

    p = sub.add_parser("bpe-train", help="learn a BPE vocab")
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--output", required=True)

    p = sub.add_parser("prepare", help="write per-variant tagged corpora")
    _add_corpus_flags(p)
    p.add_argument("--scores")
    p.add_argument("--variants", default=",".join(VARIANTS))
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--train-source", required=True)
    p.add_argument("--train-target", required=True)
    p.add_argument("--dev-source", required=True)
    p.add_argument("--dev-target", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--log")
    _add_model_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("translate", help="decode a source file")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--ids")
    p.add_argument("--seed", type=int, default=0,
                   help="seed the model was trained with (part of its config hash)")
    p.add_argument("--scores", help="score CSV for emotion-token injection")
    p.add_argument("--dimension", choices=[d.value for d in Dimension])
    _add_model_flags(p)
    _add_beam_flags(p)

    p = sub.add_parser("score-bleu", help="corpus BLEU of hypothesis vs reference file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--smooth", choices=["exp", "none"], default="exp")

    p = sub.add_parser("score-ccc", help="CCC between two score CSVs, per dimension")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)

    p = sub.add_parser("experiment", help="full variant comparison")
    _add_corpus_flags(p)
    p.add_argument("--scores")
    p.add_argument("--variants", default=",".join(VARIANTS))
    p.add_argument("--output-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--bpe-size", type=int, default=1000)
    p.add_argument("--force", action="store_true")
    _add_model_flags(p)
    _add_train_flags(p)
    _add_beam_flags(p)

    for name, sp in sub.choices.items():
        sp.add_argument("--config", help="key=value file overriding flags")
    return parser


def _apply_config(args) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{args.config}:{line_no}: expected key=value, got {line!r}")
            key = key.strip().replace("-", "_")
            if not hasattr(args, key):
                raise UsageError(f"{args.config}:{line_no}: unknown key {key!r}")
            current = getattr(args, key)
            value = value.strip()
            if isinstance(current, bool):
                value = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            setattr(args, key, value)


def _model_config(args, vocab_size: int, seed: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size,
        enc_layers=args.enc_layers,
        dec_layers=args.dec_layers,
        heads=args.heads,
        model_dim=args.model_dim,
        ff_dim=args.ff_dim,
        dropout=args.dropout,
        max_len=args.max_len,
        seed=seed,
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        warmup_steps=args.warmup_steps,
        batch_size=args.batch_size,
        epochs=args.epochs,
        label_smoothing=args.label_smoothing,
        avg_top_k=args.avg_top_k,
        peak_scale=args.peak_scale,
        grad_clip=args.grad_clip,
    )


def _beam_config(args) -> BeamConfig:
    return BeamConfig(
        beam_size=args.beam_size,
        max_len=args.decode_max_len,
        length_penalty=args.length_penalty,
    )


def _cmd_stats(args) -> int:
    splits = None
    if args.split:
        splits = {}
        for item in args.split:
            name, sep, path = item.partition("=")
            if not sep:
                raise UsageError(f"--split expects NAME=IDFILE, got {item!r}")
            with open(path, encoding="utf-8") as f:
                splits[name] = [line.strip() for line in f if line.strip()]
    stats = stats_report(args.scores, splits)
    sys.stdout.write(render_stats(stats))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as f:
            f.write(stats_csv(stats))
    return 0


def _cmd_bpe_train(args) -> int:
    texts = []
    for path in args.input:
        with open(path, encoding="utf-8") as f:
            texts.extend(line for line in f.read().split("\n") if line)
    vocab = bpe_train(texts, args.size)
    save_vocab(vocab, args.output)
    print(f"vocab of {len(vocab)} tokens ({len(vocab.merges)} merges) -> {args.output}")
    return 0


def _cmd_prepare(args) -> int:
    import os

    spec = ExperimentSpec(
        train_source=args.train_source,
        train_target=args.train_target,
        dev_source=args.dev_source,
        dev_target=args.dev_target,
        test_source=args.test_source,
        test_target=args.test_target,
        train_ids=args.train_ids,
        dev_ids=args.dev_ids,
        test_ids=args.test_ids,
        score_file=args.scores,
        variants=tuple(args.variants.split(",")),
        output_dir=args.output_dir,
        seed=0,
    )
    from .harness import prepare_variants

    for variant, corpora in prepare_variants(spec).items():
        var_dir = os.path.join(args.output_dir, variant)
        os.makedirs(var_dir, exist_ok=True)
        for split, corpus in corpora.items():
            save_corpus(
                corpus,
                os.path.join(var_dir, f"{split}.src"),
                os.path.join(var_dir, f"{split}.tgt"),
                os.path.join(var_dir, f"{split}.ids"),
            )
        print(f"prepared {variant} under {var_dir}")
    return 0


def _cmd_train(args) -> int:
    vocab = load_vocab(args.vocab)
    train_corpus = load_corpus(args.train_source, args.train_target)
    dev_corpus = load_corpus(args.dev_source, args.dev_target, split="dev")
    mcfg = _model_config(args, len(vocab), args.seed)
    tcfg = _train_config(args)
    checkpoints = train(train_corpus, dev_corpus, vocab, mcfg, tcfg, log_path=args.log)
    k = min(tcfg.avg_top_k, len(checkpoints))
    params = average_checkpoints(checkpoints, k)
    best_dev = min(c.dev_loss for c in checkpoints)
    save_checkpoint(
        Checkpoint(params=params, step=checkpoints[-1].step, dev_loss=best_dev, config_hash=mcfg.hash()),
        args.output,
    )
    print(f"trained {len(checkpoints) - 1} epochs, best dev loss {best_dev:.4f} -> {args.output}")
    return 0


def _cmd_translate(args) -> int:
    vocab = load_vocab(args.vocab)
    ckpt = load_checkpoint(args.model)
    mcfg = _model_config(args, len(vocab), seed=args.seed)
    if ckpt.config_hash != mcfg.hash():
        raise DataError(
            f"{args.model}: checkpoint config hash {ckpt.config_hash} does not match flags"
        )
    with open(args.source, encoding="utf-8") as f:
        lines = [line for line in f.read().split("\n") if line]
    from .corpus import ParallelCorpus, ParallelPair, normalize_text

    if args.ids:
        with open(args.ids, encoding="utf-8") as f:
            ids = [line.strip() for line in f if line.strip()]
    else:
        ids = [f"{i:04d}" for i in range(len(lines))]
    corpus = ParallelCorpus(
        pairs=tuple(
            ParallelPair(uid, normalize_text(line), "-") for uid, line in zip(ids, lines)
        )
    )
    token_map = None
    if args.scores:
        if not args.dimension:
            raise UsageError("--scores requires --dimension")
        dim = Dimension(args.dimension)
        token_map = {uid: bin_emotion(s, dim) for uid, s in load_scores(args.scores).items()}
    translations = translate_corpus(mcfg, ckpt.params, vocab, corpus, _beam_config(args), token_map)
    with open(args.output, "w", encoding="utf-8", newline="\n") as f:
        for _, text in translations:
            f.write(text + "\n")
    return 0


def _cmd_score_bleu(args) -> int:
    with open(args.hyp, encoding="utf-8") as f:
        hyps = f.read().split("\n")
    with open(args.ref, encoding="utf-8") as f:
        refs = f.read().split("\n")
    if hyps and hyps[-1] == "":
        hyps.pop()
    if refs and refs[-1] == "":
        refs.pop()
    breakdown = bleu.corpus_bleu(hyps, refs, smooth=args.smooth)
    precisions = "/".join(f"{100 * p:.1f}" for p in breakdown.precisions)
    print(f"BLEU = {breakdown.score:.2f} {precisions} (BP = {breakdown.brevity_penalty:.3f} "
          f"hyp_len = {breakdown.hyp_len} ref_len = {breakdown.ref_len})")
    print(bleu.signature(args.smooth))
    return 0


def _cmd_score_ccc(args) -> int:
    pred = load_scores(args.pred)
    gold = load_scores(args.gold)
    common = [uid for uid in gold if uid in pred]
    if len(common) != len(gold) or len(pred) != len(gold):
        raise DataError("pred and gold score files must cover the same IDs")
    for dim in Dimension:
        value = ccc([pred[u].value(dim) for u in common], [gold[u].value(dim) for u in common])
        print(f"ccc {dim.value} = {value:.4f}")
    return 0


def _cmd_experiment(args) -> int:
    spec = ExperimentSpec(
        train_source=args.train_source,
        train_target=args.train_target,
        dev_source=args.dev_source,
        dev_target=args.dev_target,
        test_source=args.test_source,
        test_target=args.test_target,
        train_ids=args.train_ids,
        dev_ids=args.dev_ids,
        test_ids=args.test_ids,
        score_file=args.scores,
        variants=tuple(args.variants.split(",")),
        output_dir=args.output_dir,
        seed=args.seed,
        bpe_size=args.bpe_size,
        model=_model_config(args, vocab_size=1, seed=args.seed),
        train_cfg=_train_config(args),
        beam=_beam_config(args),
        force=args.force,
    )
    table = run_experiment(spec)
    sys.stdout.write(table.render_text())
    if table.errors:
        return 3
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "bpe-train": _cmd_bpe_train,
    "prepare": _cmd_prepare,
    "train": _cmd_train,
    "translate": _cmd_translate,
    "score-bleu": _cmd_score_bleu,
    "score-ccc": _cmd_score_ccc,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args)
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except TrainingError as e:
        print(f"training failure: {e}", file=sys.stderr)
        return 3
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
