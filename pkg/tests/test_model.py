import math

import numpy as np
import pytest
import torch

from conftest import toy_corpus
from emonmt.bpe import PAD_ID
from emonmt.errors import (
    ConfigMismatch,
    NotEnoughCheckpoints,
    SequenceTooLong,
)
from emonmt.model import (
    Checkpoint,
    ModelConfig,
    TrainConfig,
    average_checkpoints,
    backward,
    build_model,
    forward,
    init_params,
    label_smoothing_loss,
    load_checkpoint,
    noam_lr,
    params_digest,
    save_checkpoint,
    train,
)

TINY = ModelConfig(
    vocab_size=20, enc_layers=2, dec_layers=2, heads=2,
    model_dim=8, ff_dim=16, dropout=0.0, max_len=16, seed=3,
)

SRC = [[4, 5, 6, 7], [8, 9, 0, 0]]
TGT_IN = [[2, 10, 11], [2, 12, 0]]
TGT_OUT = [[10, 11, 3], [12, 3, 0]]


class TestInit:
    def test_deterministic(self):
        a, b = init_params(TINY), init_params(TINY)
        assert params_digest(a) == params_digest(b)

    def test_seed_changes_params(self):
        import dataclasses

        other = dataclasses.replace(TINY, seed=4)
        assert params_digest(init_params(TINY)) != params_digest(init_params(other))

    def test_layer_norm_init(self):
        params = init_params(TINY)
        for name, tensor in params.items():
            if "norm" in name and name.endswith("weight"):
                assert torch.equal(tensor, torch.ones_like(tensor))
            if "norm" in name and name.endswith("bias"):
                assert torch.equal(tensor, torch.zeros_like(tensor))

    def test_embedding_variance_near_init_scale(self):
        cfg = ModelConfig(vocab_size=400, enc_layers=1, dec_layers=1, heads=2,
                          model_dim=32, ff_dim=32, dropout=0.0, max_len=16, seed=0)
        params = init_params(cfg)
        emb = params["src_embed.weight"].numpy().ravel()
        assert emb.size >= 10_000
        scale = 1.0 / math.sqrt(cfg.model_dim)
        expected_var = scale**2 / 3.0  # uniform(-scale, scale)
        assert expected_var / 3 < emb.var() < expected_var * 3

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            ModelConfig(vocab_size=10, model_dim=10, heads=4)
        with pytest.raises(ValueError):
            ModelConfig(vocab_size=10, dropout=1.0)


class TestForward:
    def test_attention_rows_stochastic(self):
        model = build_model(TINY, init_params(TINY))
        model.eval()
        model(torch.tensor(SRC), torch.tensor(TGT_IN), record=True)
        maps = model.attention_maps()
        assert maps
        for weights in maps:
            sums = weights.sum(dim=-1)
            assert torch.allclose(sums, torch.ones_like(sums), atol=1e-6)

    def test_extra_padding_never_changes_logits(self):
        params = init_params(TINY)
        plain = forward(TINY, params, [4, 5, 6], [2, 10])
        padded = forward(TINY, params, [4, 5, 6, 0, 0, 0], [2, 10])
        assert torch.allclose(plain, padded, atol=1e-5)

    def test_eval_forward_deterministic(self):
        params = init_params(TINY)
        a = forward(TINY, params, SRC[0], TGT_IN[0])
        b = forward(TINY, params, SRC[0], TGT_IN[0])
        assert torch.equal(a, b)

    def test_causal_masking(self):
        params = init_params(TINY)
        base = forward(TINY, params, SRC[0], [2, 10, 11, 12])
        changed = forward(TINY, params, SRC[0], [2, 10, 15, 12])
        # position 2 changed: logits at positions 0-1 must be untouched
        assert torch.allclose(base[:2], changed[:2], atol=1e-6)
        assert not torch.allclose(base[2], changed[2], atol=1e-6)

    def test_sequence_too_long(self):
        params = init_params(TINY)
        with pytest.raises(SequenceTooLong):
            forward(TINY, params, list(range(4, 8)) * 10, [2])

    def test_logit_shape(self):
        params = init_params(TINY)
        logits = forward(TINY, params, SRC[0], TGT_IN[0])
        assert logits.shape == (len(TGT_IN[0]), TINY.vocab_size)


class TestLabelSmoothingLoss:
    def test_zero_epsilon_is_cross_entropy(self):
        logits = torch.randn(5, 11)
        gold = torch.tensor([4, 5, 6, 7, 8])
        mine = label_smoothing_loss(logits, gold, 0.0)
        ref = torch.nn.functional.cross_entropy(logits, gold)
        assert torch.allclose(mine, ref, atol=1e-6)

    @pytest.mark.parametrize("eps", [0.0, 0.1, 0.3])
    def test_uniform_logits_give_log_vocab(self, eps):
        vocab = 12
        logits = torch.zeros(4, vocab)
        gold = torch.tensor([4, 5, 6, 7])
        loss = label_smoothing_loss(logits, gold, eps)
        assert loss.item() == pytest.approx(math.log(vocab), abs=1e-6)

    def test_loss_bounded_below_by_smoothed_entropy(self):
        # floor for V=12, eps=0.1: -(0.9 ln 0.9 + 0.1 ln(0.1/11))
        vocab, eps = 12, 0.1
        floor = -((1 - eps) * math.log(1 - eps) + eps * math.log(eps / (vocab - 1)))
        gold = torch.tensor([4, 5, 6])
        for seed in range(5):
            g = torch.Generator().manual_seed(seed)
            logits = torch.randn(3, vocab, generator=g) * 5
            assert label_smoothing_loss(logits, gold, eps).item() >= floor - 1e-6

    def test_pad_positions_excluded(self):
        logits = torch.randn(4, 11)
        gold = torch.tensor([4, 5, PAD_ID, PAD_ID])
        with_pad = label_smoothing_loss(logits, gold, 0.1)
        without = label_smoothing_loss(logits[:2], gold[:2], 0.1)
        assert torch.allclose(with_pad, without, atol=1e-7)


class TestNoam:
    def test_branch_equality_at_warmup(self):
        warmup, dim, scale = 400, 64, 1.0
        lr = noam_lr(warmup, dim, warmup, scale)
        assert lr == pytest.approx(scale * dim**-0.5 * warmup**-0.5, abs=1e-15)

    def test_numeric_fixture(self):
        # 1 * 64^-1/2 * min(100^-1/2, 100 * 100^-3/2) = 0.125 * 0.1
        assert noam_lr(100, 64, 100, 1.0) == pytest.approx(0.0125, abs=1e-12)

    def test_shape(self):
        warmup = 50
        values = [noam_lr(s, 64, warmup) for s in range(1, 200)]
        before = values[: warmup - 1]
        after = values[warmup - 1 :]
        assert all(a < b for a, b in zip(before, before[1:]))
        assert all(a > b for a, b in zip(after, after[1:]))
        assert all(v > 0 for v in values)

    def test_step_zero_rejected(self):
        with pytest.raises(ValueError):
            noam_lr(0, 64, 100)


class TestBackward:
    def test_gradients_finite_and_complete(self):
        params = {k: v.double() for k, v in init_params(TINY).items()}
        grads = backward(TINY, params, SRC, TGT_IN, TGT_OUT, epsilon=0.1)
        assert set(grads) == {k for k in params}
        for g in grads.values():
            assert bool(torch.isfinite(g).all())

    def test_zero_output_projection_blocks_upstream_gradient(self):
        params = {k: v.double().clone() for k, v in init_params(TINY).items()}
        params["out_proj.weight"].zero_()
        grads = backward(TINY, params, SRC, TGT_IN, TGT_OUT)
        # logits = bias only, so nothing upstream of out_proj receives gradient
        assert torch.allclose(grads["src_embed.weight"], torch.zeros_like(grads["src_embed.weight"]))
        assert torch.allclose(grads["tgt_embed.weight"], torch.zeros_like(grads["tgt_embed.weight"]))
        assert grads["out_proj.bias"].abs().sum() > 0

    def test_gradient_linearity_in_loss_scale(self):
        cfg = TINY
        params = {k: v.double() for k, v in init_params(cfg).items()}
        model = build_model(cfg, params, dtype=torch.float64)
        model.eval()
        from emonmt.model import _pad_batch

        src, tgt_in, tgt_out = _pad_batch(SRC), _pad_batch(TGT_IN), _pad_batch(TGT_OUT)
        loss = label_smoothing_loss(model(src, tgt_in), tgt_out, 0.0)
        g1 = torch.autograd.grad(loss, model.out_proj.weight, retain_graph=True)[0]
        g2 = torch.autograd.grad(2.0 * loss, model.out_proj.weight)[0]
        assert torch.allclose(g2, 2.0 * g1, atol=1e-12)


class TestTrainLoop:
    def test_zero_epochs_returns_initial_checkpoint(self, toy_vocab, toy_model_config):
        corpus = toy_corpus()
        tcfg = TrainConfig(warmup_steps=10, batch_size=4, epochs=0, label_smoothing=0.1)
        ckpts = train(corpus, corpus, toy_vocab, toy_model_config, tcfg)
        assert len(ckpts) == 1
        assert ckpts[0].step == 0

    def test_identical_seeds_identical_digests(self, toy_vocab, toy_model_config):
        corpus = toy_corpus()
        tcfg = TrainConfig(warmup_steps=20, batch_size=5, epochs=2, label_smoothing=0.1)
        a = train(corpus, corpus, toy_vocab, toy_model_config, tcfg)
        b = train(corpus, corpus, toy_vocab, toy_model_config, tcfg)
        assert [params_digest(c.params) for c in a] == [params_digest(c.params) for c in b]
        assert [c.dev_loss for c in a] == [c.dev_loss for c in b]

    def test_params_stay_finite(self, toy_checkpoints):
        for ckpt in toy_checkpoints[:: max(1, len(toy_checkpoints) // 5)]:
            for tensor in ckpt.params.values():
                assert bool(torch.isfinite(tensor).all())

    def test_writes_training_log(self, toy_vocab, toy_model_config, tmp_path):
        corpus = toy_corpus()
        log = tmp_path / "log.csv"
        tcfg = TrainConfig(warmup_steps=20, batch_size=5, epochs=2, label_smoothing=0.1)
        train(corpus, corpus, toy_vocab, toy_model_config, tcfg, log_path=log)
        lines = log.read_text().strip().split("\n")
        assert lines[0] == "epoch,step,train_loss,dev_loss,lr"
        assert len(lines) == 3


class TestCheckpointAveraging:
    def _ckpt(self, value, dev_loss, step=1, h="cfg"):
        params = {"w": torch.tensor([float(value)])}
        return Checkpoint(params=params, step=step, dev_loss=dev_loss, config_hash=h)

    def test_identity_on_equal_checkpoints(self):
        ckpts = [self._ckpt(0.7, dev_loss=i) for i in range(4)]
        avg = average_checkpoints(ckpts, 4)
        assert torch.allclose(avg["w"], torch.tensor([0.7]))

    def test_midpoint(self):
        avg = average_checkpoints([self._ckpt(0.0, 1.0), self._ckpt(1.0, 2.0)], 2)
        assert avg["w"].item() == pytest.approx(0.5)

    def test_selects_lowest_dev_loss(self):
        # 7 checkpoints; the two worst (dev losses 9 and 8) must be excluded
        losses = [3.0, 9.0, 1.0, 8.0, 2.0, 5.0, 4.0]
        ckpts = [self._ckpt(v, loss) for v, loss in enumerate(losses)]
        avg = average_checkpoints(ckpts, 5)
        expected = (0 + 2 + 4 + 5 + 6) / 5  # indices with losses 3,1,2,5,4
        assert avg["w"].item() == pytest.approx(expected)

    def test_config_mismatch(self):
        with pytest.raises(ConfigMismatch):
            average_checkpoints([self._ckpt(0, 1, h="a"), self._ckpt(0, 1, h="b")], 2)

    def test_not_enough_checkpoints(self):
        with pytest.raises(NotEnoughCheckpoints):
            average_checkpoints([self._ckpt(0, 1)], 2)


class TestCheckpointFile:
    def test_roundtrip_preserves_eval_logits(self, tmp_path):
        params = init_params(TINY)
        ckpt = Checkpoint(params=params, step=17, dev_loss=1.25, config_hash=TINY.hash())
        path = tmp_path / "model.pt"
        save_checkpoint(ckpt, path)
        loaded = load_checkpoint(path)
        assert (loaded.step, loaded.dev_loss, loaded.config_hash) == (17, 1.25, TINY.hash())
        before = forward(TINY, params, SRC[0], TGT_IN[0])
        after = forward(TINY, loaded.params, SRC[0], TGT_IN[0])
        assert torch.equal(before, after)


def relative_group_error(fd: np.ndarray, an: np.ndarray) -> float:
    denom = max(np.abs(fd).max(), np.abs(an).max(), 1e-6)
    return float(np.abs(fd - an).max() / denom)


def finite_difference_check(cfg, samples_per_group=4, eps=0.1, h=1e-5, seed=0):
    """Central finite differences vs analytic gradients, sampled per tensor."""
    from emonmt.model import _pad_batch

    params = {k: v.double() for k, v in init_params(cfg).items()}
    grads = backward(cfg, params, SRC, TGT_IN, TGT_OUT, epsilon=eps)

    def loss_at(p):
        model = build_model(cfg, p, dtype=torch.float64)
        model.eval()
        with torch.no_grad():
            logits = model(_pad_batch(SRC), _pad_batch(TGT_IN))
            return label_smoothing_loss(logits, _pad_batch(TGT_OUT), eps).item()

    rng = np.random.default_rng(seed)
    report = {}
    for name, grad in grads.items():
        flat = grad.flatten()
        idxs = rng.choice(flat.numel(), size=min(samples_per_group, flat.numel()), replace=False)
        fd = np.zeros(len(idxs))
        an = np.zeros(len(idxs))
        for j, i in enumerate(idxs):
            plus = {k: v.clone() for k, v in params.items()}
            minus = {k: v.clone() for k, v in params.items()}
            plus[name].flatten()[i] += h
            minus[name].flatten()[i] -= h
            fd[j] = (loss_at(plus) - loss_at(minus)) / (2 * h)
            an[j] = flat[i].item()
        report[name] = relative_group_error(fd, an)
    return report


def test_finite_difference_spot_check():
    report = finite_difference_check(TINY, samples_per_group=2)
    worst = max(report.values())
    assert worst < 1e-3, {k: v for k, v in report.items() if v >= 1e-3}
