"""Transformer encoder-decoder and its training loop.

Post-norm transformer with fixed sinusoidal positions, label-smoothing
loss, Adam moments (0.9 / 0.98 / 1e-9) under the Noam schedule, global
gradient clipping, per-epoch checkpoints with dev loss, and lowest-dev-loss
checkpoint averaging. Everything is deterministic given the config seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass

import torch
from torch import nn

from .bpe import BpeVocab, EOS_ID, PAD_ID, SOS_ID, encode
from .corpus import ParallelCorpus
from .errors import (
    ConfigMismatch,
    NonFiniteGradient,
    NotEnoughCheckpoints,
    SequenceTooLong,
)

ADAM_BETAS = (0.9, 0.98)
ADAM_EPS = 1e-9

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    enc_layers: int = 6
    dec_layers: int = 6
    heads: int = 4
    model_dim: int = 256
    ff_dim: int = 1024
    dropout: float = 0.1
    max_len: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError(f"model_dim {self.model_dim} not divisible by {self.heads} heads")
        for name in ("vocab_size", "enc_layers", "dec_layers", "heads", "model_dim", "ff_dim", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout {self.dropout} outside [0, 1)")

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TrainConfig:
    warmup_steps: int = 8000
    batch_size: int = 96
    epochs: int = 250
    label_smoothing: float = 0.1
    avg_top_k: int = 5
    peak_scale: float = 1.0
    grad_clip: float = 5.0

    def __post_init__(self):
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")
        if self.avg_top_k < 1:
            raise ValueError("avg_top_k must be >= 1")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError(f"label_smoothing {self.label_smoothing} outside [0, 1)")


@dataclass
class Checkpoint:
    params: dict[str, torch.Tensor]
    step: int
    dev_loss: float
    config_hash: str


def sinusoidal_positions(max_len: int, dim: int) -> torch.Tensor:
    pos = torch.arange(max_len, dtype=torch.float64).unsqueeze(1)
    inv = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    pe = torch.zeros(max_len, dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(pos * inv)
    pe[:, 1::2] = torch.cos(pos * inv[: dim // 2])
    return pe


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)
        self.last_weights = None  # (B, H, Tq, Tk), kept only when recording

    def forward(self, query, key, value, mask=None, record=False):
        b, tq, d = query.shape
        tk = key.shape[1]
        q = self.q_proj(query).view(b, tq, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(key).view(b, tk, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(value).view(b, tk, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if mask is not None:
            scores = scores.masked_fill(~mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        self.last_weights = weights.detach() if record else None
        out = self.dropout(weights) @ v
        out = out.transpose(1, 2).contiguous().view(b, tq, d)
        return self.out_proj(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, ff_dim: int, dropout: float):
        super().__init__()
        self.w1 = nn.Linear(dim, ff_dim)
        self.w2 = nn.Linear(ff_dim, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.w2(self.dropout(torch.relu(self.w1(x))))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.model_dim, cfg.heads, cfg.dropout)
        self.ff = FeedForward(cfg.model_dim, cfg.ff_dim, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.model_dim)
        self.norm2 = nn.LayerNorm(cfg.model_dim)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x, src_mask, record=False):
        x = self.norm1(x + self.dropout(self.self_attn(x, x, x, src_mask, record=record)))
        return self.norm2(x + self.dropout(self.ff(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.model_dim, cfg.heads, cfg.dropout)
        self.cross_attn = MultiHeadAttention(cfg.model_dim, cfg.heads, cfg.dropout)
        self.ff = FeedForward(cfg.model_dim, cfg.ff_dim, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.model_dim)
        self.norm2 = nn.LayerNorm(cfg.model_dim)
        self.norm3 = nn.LayerNorm(cfg.model_dim)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x, memory, src_mask, tgt_mask, record=False):
        x = self.norm1(x + self.dropout(self.self_attn(x, x, x, tgt_mask, record=record)))
        x = self.norm2(x + self.dropout(self.cross_attn(x, memory, memory, src_mask, record=record)))
        return self.norm3(x + self.dropout(self.ff(x)))


class Seq2SeqTransformer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        scale = 1.0 / math.sqrt(cfg.model_dim)
        self.src_embed = nn.Embedding(cfg.vocab_size, cfg.model_dim, padding_idx=PAD_ID)
        self.tgt_embed = nn.Embedding(cfg.vocab_size, cfg.model_dim, padding_idx=PAD_ID)
        for emb in (self.src_embed, self.tgt_embed):
            nn.init.uniform_(emb.weight, -scale, scale)
        self.out_proj = nn.Linear(cfg.model_dim, cfg.vocab_size)
        self.enc_layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.enc_layers))
        self.dec_layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.dec_layers))
        self.dropout = nn.Dropout(cfg.dropout)
        self.register_buffer(
            "positions", sinusoidal_positions(cfg.max_len, cfg.model_dim).float(), persistent=False
        )

    def _embed(self, table, ids):
        x = table(ids) * math.sqrt(self.cfg.model_dim)
        return self.dropout(x + self.positions[: ids.shape[1]].to(x.dtype))

    def encode(self, src_ids, record=False):
        # key mask: attention may never read pad positions
        src_mask = (src_ids != PAD_ID).unsqueeze(1).unsqueeze(1)
        x = self._embed(self.src_embed, src_ids)
        for layer in self.enc_layers:
            x = layer(x, src_mask, record=record)
        return x, src_mask

    def decode(self, memory, src_mask, tgt_ids, record=False):
        t = tgt_ids.shape[1]
        causal = torch.tril(torch.ones(t, t, dtype=torch.bool, device=tgt_ids.device))
        tgt_mask = causal.unsqueeze(0).unsqueeze(0) & (tgt_ids != PAD_ID).unsqueeze(1).unsqueeze(1)
        x = self._embed(self.tgt_embed, tgt_ids)
        for layer in self.dec_layers:
            x = layer(x, memory, src_mask, tgt_mask, record=record)
        return self.out_proj(x)

    def forward(self, src_ids, tgt_ids, record=False):
        memory, src_mask = self.encode(src_ids, record=record)
        return self.decode(memory, src_mask, tgt_ids, record=record)

    def attention_maps(self):
        """Recorded (B, H, Tq, Tk) weights from the last record=True pass."""
        maps = []
        for module in self.modules():
            if isinstance(module, MultiHeadAttention) and module.last_weights is not None:
                maps.append(module.last_weights)
        return maps


def build_model(cfg: ModelConfig, params=None, dtype=torch.float32) -> Seq2SeqTransformer:
    torch.manual_seed(cfg.seed)
    model = Seq2SeqTransformer(cfg).to(dtype)
    if params is not None:
        model.load_state_dict({k: v.to(dtype) for k, v in params.items()})
    return model


def init_params(cfg: ModelConfig) -> dict[str, torch.Tensor]:
    """Fresh parameters, bitwise-reproducible from (config, seed)."""
    model = build_model(cfg)
    return {k: v.detach().clone() for k, v in model.state_dict().items()}


def params_digest(params) -> str:
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(params[name].detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def forward(cfg: ModelConfig, params, source, target_prefix, mode: str = "eval") -> torch.Tensor:
    """Single-sequence forward pass; returns (len(target_prefix), vocab) logits."""
    if len(source) > cfg.max_len or len(target_prefix) > cfg.max_len:
        raise SequenceTooLong(
            f"source {len(source)} / target {len(target_prefix)} exceeds max_len {cfg.max_len}"
        )
    model = build_model(cfg, params)
    model.train(mode == "train")
    src = torch.tensor([list(source)], dtype=torch.long)
    tgt = torch.tensor([list(target_prefix)], dtype=torch.long)
    with torch.no_grad():
        logits = model(src, tgt)
    return logits[0]


def label_smoothing_loss(logits, gold, epsilon: float, pad_id: int = PAD_ID) -> torch.Tensor:
    """Cross entropy against the (1-eps, eps/(V-1)) smoothed target,
    averaged over non-pad gold positions."""
    vocab = logits.shape[-1]
    logits = logits.reshape(-1, vocab)
    gold = gold.reshape(-1)
    keep = gold != pad_id
    if not bool(keep.any()):
        raise ValueError("no non-pad gold positions")
    logits = logits[keep]
    gold = gold[keep]
    logp = torch.log_softmax(logits, dim=-1)
    gold_lp = logp.gather(1, gold.unsqueeze(1)).squeeze(1)
    if epsilon == 0.0:
        return -gold_lp.mean()
    other_lp = logp.sum(dim=-1) - gold_lp
    per_pos = -((1.0 - epsilon) * gold_lp + epsilon / (vocab - 1) * other_lp)
    return per_pos.mean()


def noam_lr(step: int, model_dim: int, warmup: int, peak_scale: float = 1.0) -> float:
    """Inverse-square-root schedule with linear warmup."""
    if step < 1:
        raise ValueError("step must be >= 1")
    return peak_scale * model_dim ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


def encode_pairs(corpus: ParallelCorpus, vocab: BpeVocab, max_len: int):
    """Tokenize a corpus into (src_ids, tgt_in_ids, tgt_out_ids) triples."""
    out = []
    for pair in corpus:
        src = encode(vocab, pair.source)
        tgt = encode(vocab, pair.target)
        if len(src) > max_len or len(tgt) + 1 > max_len:
            raise SequenceTooLong(f"{pair.id}: encoded length exceeds max_len {max_len}")
        out.append((src, [SOS_ID] + tgt, tgt + [EOS_ID]))
    return out


def _pad_batch(rows, device=None):
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), PAD_ID, dtype=torch.long, device=device)
    for i, r in enumerate(rows):
        out[i, : len(r)] = torch.tensor(r, dtype=torch.long)
    return out


def _batches(examples, batch_size):
    for i in range(0, len(examples), batch_size):
        chunk = examples[i : i + batch_size]
        yield (
            _pad_batch([c[0] for c in chunk]),
            _pad_batch([c[1] for c in chunk]),
            _pad_batch([c[2] for c in chunk]),
        )


def evaluate_loss(model, examples, tcfg: TrainConfig) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for src, tgt_in, tgt_out in _batches(examples, tcfg.batch_size):
            logits = model(src, tgt_in)
            n = int((tgt_out != PAD_ID).sum())
            total += float(label_smoothing_loss(logits, tgt_out, tcfg.label_smoothing)) * n
            count += n
    return total / max(count, 1)


def train(
    train_corpus: ParallelCorpus,
    dev_corpus: ParallelCorpus,
    vocab: BpeVocab,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    log_path=None,
) -> list[Checkpoint]:
    """Full training loop; returns the initial checkpoint plus one per epoch."""
    train_examples = encode_pairs(train_corpus, vocab, mcfg.max_len)
    dev_examples = encode_pairs(dev_corpus, vocab, mcfg.max_len)
    cfg_hash = mcfg.hash()

    model = build_model(mcfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=1.0, betas=ADAM_BETAS, eps=ADAM_EPS)

    def snapshot(step, dev_loss):
        params = {k: v.detach().clone() for k, v in model.state_dict().items()}
        return Checkpoint(params=params, step=step, dev_loss=dev_loss, config_hash=cfg_hash)

    log_rows = []
    step = 0
    checkpoints = [snapshot(0, evaluate_loss(model, dev_examples, tcfg))]
    for epoch in range(1, tcfg.epochs + 1):
        order = list(range(len(train_examples)))
        random.Random(mcfg.seed * 1_000_003 + epoch).shuffle(order)
        shuffled = [train_examples[i] for i in order]

        model.train()
        epoch_loss, epoch_tokens = 0.0, 0
        lr = 0.0
        for src, tgt_in, tgt_out in _batches(shuffled, tcfg.batch_size):
            step += 1
            lr = noam_lr(step, mcfg.model_dim, tcfg.warmup_steps, tcfg.peak_scale)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad()
            logits = model(src, tgt_in)
            loss = label_smoothing_loss(logits, tgt_out, tcfg.label_smoothing)
            loss.backward()
            for name, p in model.named_parameters():
                if p.grad is not None and not bool(torch.isfinite(p.grad).all()):
                    raise NonFiniteGradient(f"non-finite gradient in {name} at step {step}")
            torch.nn.utils.clip_grad_norm_(model.parameters(), tcfg.grad_clip)
            optimizer.step()
            n = int((tgt_out != PAD_ID).sum())
            epoch_loss += loss.detach().item() * n
            epoch_tokens += n

        dev_loss = evaluate_loss(model, dev_examples, tcfg)
        checkpoints.append(snapshot(step, dev_loss))
        log_rows.append((epoch, step, epoch_loss / max(epoch_tokens, 1), dev_loss, lr))

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "step", "train_loss", "dev_loss", "lr"])
            for row in log_rows:
                writer.writerow(row)
    return checkpoints


def average_checkpoints(checkpoints, k: int) -> dict[str, torch.Tensor]:
    """Mean of each tensor over the k checkpoints with lowest dev loss."""
    if len(checkpoints) < k:
        raise NotEnoughCheckpoints(f"need {k} checkpoints, have {len(checkpoints)}")
    hashes = {c.config_hash for c in checkpoints}
    if len(hashes) > 1:
        raise ConfigMismatch(f"mixed config hashes: {sorted(hashes)}")
    best = sorted(checkpoints, key=lambda c: (c.dev_loss, c.step))[:k]
    return {
        name: torch.stack([c.params[name].double() for c in best]).mean(dim=0).float()
        for name in best[0].params
    }


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "config_hash": ckpt.config_hash,
            "step": ckpt.step,
            "dev_loss": ckpt.dev_loss,
            "params": ckpt.params,
        },
        path,
    )


def load_checkpoint(path) -> Checkpoint:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ConfigMismatch(f"{path}: unsupported checkpoint version {blob.get('version')}")
    return Checkpoint(
        params=blob["params"],
        step=blob["step"],
        dev_loss=blob["dev_loss"],
        config_hash=blob["config_hash"],
    )


def backward(cfg: ModelConfig, params, src, tgt_in, tgt_out, epsilon: float = 0.0, dtype=torch.float64):
    """Gradients of the smoothed loss w.r.t. every parameter (dropout off)."""
    model = build_model(cfg, params, dtype=dtype)
    model.eval()
    logits = model(_pad_batch(src), _pad_batch(tgt_in))
    loss = label_smoothing_loss(logits, _pad_batch(tgt_out), epsilon)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        if not bool(torch.isfinite(g).all()):
            raise NonFiniteGradient(f"non-finite gradient in {name}")
        grads[name] = g.detach().clone()
    return grads
