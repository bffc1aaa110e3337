"""Autoregressive generation: beam search with length normalization.

Hypothesis scores are summed log-probabilities divided by
generated_length ** length_penalty. Ties break toward the shorter
hypothesis, then lexicographic IDs, so decoding is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .bpe import BpeVocab, EOS_ID, PAD_ID, SOS_ID, decode, encode
from .corpus import ParallelCorpus
from .emotion import inject_token
from .errors import MissingToken, SourceTooLong
from .model import ModelConfig, build_model


@dataclass(frozen=True)
class BeamConfig:
    beam_size: int = 4
    max_len: int = 64
    length_penalty: float = 0.6

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.length_penalty < 0:
            raise ValueError("length_penalty must be >= 0")


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]  # starts with <sos>; ends with <eos> or at max_len
    score: float  # length-normalized log-probability


def _normalized(raw: float, gen_len: int, alpha: float) -> float:
    return raw / max(gen_len, 1) ** alpha


class Translator:
    """Holds a built model so repeated decoding avoids re-instantiation."""

    def __init__(self, cfg: ModelConfig, params):
        self.cfg = cfg
        self.model = build_model(cfg, params)
        self.model.eval()

    def beam_search(self, source, bcfg: BeamConfig) -> Hypothesis:
        source = list(source)
        if len(source) > self.cfg.max_len:
            raise SourceTooLong(f"source length {len(source)} exceeds {self.cfg.max_len}")
        max_len = min(bcfg.max_len, self.cfg.max_len - 1)
        alpha = bcfg.length_penalty

        with torch.no_grad():
            src = torch.tensor([source], dtype=torch.long)
            memory, src_mask = self.model.encode(src)

            live = [((SOS_ID,), 0.0)]  # (prefix ids, raw log-prob)
            finished: list[tuple[float, int, tuple[int, ...], float]] = []
            for _ in range(max_len):
                tgt = torch.tensor([list(ids) for ids, _ in live], dtype=torch.long)
                mem = memory.expand(len(live), -1, -1)
                msk = src_mask.expand(len(live), -1, -1, -1)
                logp = torch.log_softmax(self.model.decode(mem, msk, tgt)[:, -1, :], dim=-1)
                logp[:, PAD_ID] = float("-inf")  # keep hypotheses well-formed
                logp[:, SOS_ID] = float("-inf")

                candidates = []
                for (ids, raw), row in zip(live, logp):
                    top = torch.topk(row, min(bcfg.beam_size, row.shape[0]))
                    for lp, tok in zip(top.values.tolist(), top.indices.tolist()):
                        candidates.append((ids + (tok,), raw + lp))
                candidates.sort(key=lambda c: (-c[1], len(c[0]), c[0]))

                live = []
                for ids, raw in candidates[: bcfg.beam_size]:
                    if ids[-1] == EOS_ID:
                        norm = _normalized(raw, len(ids) - 1, alpha)
                        finished.append((-norm, len(ids), ids, raw))
                    else:
                        live.append((ids, raw))
                if not live:
                    break
                if finished:
                    best_finished = -min(finished)[0]
                    # optimistic bound: future tokens at log-prob 0 up to max_len
                    bound = max(
                        _normalized(raw, max(len(ids) - 1, max_len), alpha) if raw < 0 else 0.0
                        for ids, raw in live
                    )
                    if bound < best_finished:
                        break

        if not finished:
            # no hypothesis closed within max_len: take the best live prefix
            for ids, raw in live:
                norm = _normalized(raw, len(ids) - 1, alpha)
                finished.append((-norm, len(ids), ids, raw))
        finished.sort()
        neg_norm, _, ids, _ = finished[0]
        return Hypothesis(ids=ids, score=-neg_norm)


def greedy_decode(cfg: ModelConfig, params, source, max_len: int) -> list[int]:
    """Step-by-step argmax loop; the beam_size=1 reference path."""
    translator = Translator(cfg, params)
    ids = [SOS_ID]
    with torch.no_grad():
        src = torch.tensor([list(source)], dtype=torch.long)
        memory, src_mask = translator.model.encode(src)
        for _ in range(min(max_len, cfg.max_len - 1)):
            tgt = torch.tensor([ids], dtype=torch.long)
            logits = translator.model.decode(memory, src_mask, tgt)[0, -1]
            logits[PAD_ID] = float("-inf")
            logits[SOS_ID] = float("-inf")
            ids.append(int(torch.argmax(logits)))
            if ids[-1] == EOS_ID:
                break
    return ids


def beam_search(cfg: ModelConfig, params, source, bcfg: BeamConfig) -> Hypothesis:
    return Translator(cfg, params).beam_search(source, bcfg)


def translate_corpus(
    cfg: ModelConfig,
    params,
    vocab: BpeVocab,
    corpus: ParallelCorpus,
    bcfg: BeamConfig,
    token_map=None,
) -> list[tuple[str, str]]:
    """Translate every pair in corpus order; token_map optionally supplies
    the emotion token to inject per utterance ID."""
    translator = Translator(cfg, params)
    out = []
    for pair in corpus:
        if token_map is not None:
            if pair.id not in token_map:
                raise MissingToken(f"no emotion token for utterance {pair.id}")
            pair = inject_token(pair, token_map[pair.id])
        source_ids = encode(vocab, pair.source)
        hyp = translator.beam_search(source_ids, bcfg)
        out.append((pair.id, decode(vocab, hyp.ids)))
    return out
