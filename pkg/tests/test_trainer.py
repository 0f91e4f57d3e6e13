import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import screenmatch.autodiff as ad
from screenmatch.encoder import EncoderConfig, init_model
from screenmatch.errors import EmptyCorpus, InvalidConfig
from screenmatch.featurize import (ABS_POSITION, CATEGORY, ModalityConfig,
                                   tokenize_screen)
from screenmatch.rng import derived_rng
from screenmatch.synthcorpus import generate_screen
from screenmatch.trainer import (Adam, TrainConfig, apply_mask, compute_loss,
                                 fixed_masks, grad_check, loss_graph,
                                 mask_tokens, masked_category_accuracy, train,
                                 write_history_csv)


def sample_tokens(tag="mask", screen_cat="login", cfg=ModalityConfig()):
    s = generate_screen(screen_cat, derived_rng(0, f"trainer-{tag}"))
    return tokenize_screen(s, cfg=cfg)


class TestMasking:
    def test_rate_zero_masks_nothing(self):
        t = sample_tokens()
        masked, mask = mask_tokens(t, 0.0, derived_rng(0, "m0"))
        assert mask == frozenset()
        assert masked.tokens == t.tokens

    def test_rate_one_masks_everything_eligible(self):
        t = sample_tokens()
        masked, mask = mask_tokens(t, 1.0, derived_rng(0, "m1"))
        assert mask == set(range(len(t.tokens)))
        for i in mask:
            assert not masked.tokens[i].features.any()
            assert masked.tokens[i].modality == t.tokens[i].modality
            assert masked.tokens[i].element_index == t.tokens[i].element_index

    def test_abs_position_never_masked(self):
        t = sample_tokens(cfg=ModalityConfig(use_relative=False))
        _, mask = mask_tokens(t, 1.0, derived_rng(0, "m2"))
        for i, tok in enumerate(t.tokens):
            if tok.modality == ABS_POSITION:
                assert i not in mask
            else:
                assert i in mask

    def test_deterministic_under_seed(self):
        t = sample_tokens()
        _, m1 = mask_tokens(t, 0.3, derived_rng(5, "det"))
        _, m2 = mask_tokens(t, 0.3, derived_rng(5, "det"))
        assert m1 == m2

    def test_invalid_rate(self):
        t = sample_tokens()
        with pytest.raises(InvalidConfig):
            mask_tokens(t, 1.5, derived_rng(0, "bad"))

    def test_positions_survive_masking(self):
        # masked tokens keep their relative geometry; only features zero out
        t = sample_tokens()
        masked, _ = mask_tokens(t, 1.0, derived_rng(0, "m3"))
        assert np.array_equal(masked.rel_x, t.rel_x)
        assert np.array_equal(masked.rel_y, t.rel_y)

    def test_fixed_masks_nonempty_and_stable(self):
        tokens = [sample_tokens(f"fm{i}") for i in range(4)]
        a = fixed_masks(tokens, 0.05, seed=0)
        b = fixed_masks(tokens, 0.05, seed=0)
        for (_, ma), (_, mb) in zip(a, b):
            assert ma and ma == mb

    def test_apply_mask(self):
        t = sample_tokens()
        masked = apply_mask(t, frozenset({0, 2}))
        assert not masked.tokens[0].features.any()
        assert masked.tokens[1].features.any()


class TestLoss:
    def test_empty_mask_is_zero(self, tiny_model):
        t = sample_tokens()
        loss = compute_loss(tiny_model, t, t, frozenset())
        assert loss.total == 0.0 and loss.masked_token_count == 0

    def test_components_sum_to_total(self, tiny_model):
        t = sample_tokens()
        masked, mask = mask_tokens(t, 0.4, derived_rng(0, "sum"))
        loss = compute_loss(tiny_model, t, masked, mask)
        assert loss.total == pytest.approx(
            loss.ce_category + loss.l2_appearance + loss.l2_text, abs=1e-9)
        assert loss.masked_token_count == len(mask)

    def test_components_nonnegative_and_finite(self, tiny_model):
        for i in range(5):
            t = sample_tokens(f"nn{i}", screen_cat="register")
            masked, mask = mask_tokens(t, 0.5, derived_rng(i, "nn"))
            loss = compute_loss(tiny_model, t, masked, mask)
            for part in (loss.total, loss.ce_category, loss.l2_appearance,
                         loss.l2_text):
                assert part >= 0.0 and math.isfinite(part)

    def test_category_only_mask_has_no_l2(self, tiny_model):
        t = sample_tokens()
        cat_idx = [i for i, tok in enumerate(t.tokens)
                   if tok.modality == CATEGORY][:2]
        mask = frozenset(cat_idx)
        loss = compute_loss(tiny_model, t, apply_mask(t, mask), mask)
        assert loss.l2_appearance == 0.0 and loss.l2_text == 0.0
        assert loss.ce_category > 0.0

    def test_loss_graph_backward_populates_grads(self, tiny_model):
        t = sample_tokens()
        masked, mask = mask_tokens(t, 0.4, derived_rng(0, "bk"))
        ad.zero_grads(tiny_model.params.values())
        node, _ = loss_graph(tiny_model, t, masked, mask)
        ad.backward(node)
        touched = sum(1 for _, p in tiny_model.named_tensors()
                      if p.grad is not None and np.any(p.grad != 0.0))
        assert touched > len(tiny_model.params) // 2


class TestAdam:
    def test_decay_only_on_matrices(self, tiny_model):
        opt = Adam(tiny_model, TrainConfig())
        for name in opt.decayed_names():
            assert tiny_model.params[name].value.ndim == 2
            assert not name.startswith("relbias")
        # biases and layer norm gains stay out
        assert "layers.0.ln1.g" not in opt.decayed_names()
        assert "layers.0.attn.bq" not in opt.decayed_names()

    def test_descent_sanity(self):
        # one optimizer step on a fixed batch lowers the loss nearly always
        wins = 0
        trials = 100
        for trial in range(trials):
            m = init_model(EncoderConfig(hidden=8, layers=1, heads=2,
                                         dropout=0.0, seed=trial))
            t = sample_tokens(f"descent-{trial}",
                              screen_cat=("login", "register", "search")[trial % 3])
            masked, mask = mask_tokens(t, 0.3, derived_rng(trial, "descent"))
            cfg = TrainConfig(learning_rate=1e-4)
            opt = Adam(m, cfg)
            ad.zero_grads(m.params.values())
            node, before = loss_graph(m, t, masked, mask)
            ad.backward(node)
            opt.step()
            after = compute_loss(m, t, masked, mask)
            wins += after.total < before.total
        assert wins >= 95, f"loss decreased in only {wins}/{trials} trials"

    def test_step_changes_all_touched_tensors(self, login_screen):
        m = init_model(EncoderConfig(hidden=8, layers=1, heads=2, dropout=0.0,
                                     seed=7))
        t = tokenize_screen(login_screen, cfg=m.cfg.modalities())
        masked, mask = mask_tokens(t, 0.5, derived_rng(1, "touch"))
        before = {n: p.value.copy() for n, p in m.named_tensors()}
        opt = Adam(m, TrainConfig())
        ad.zero_grads(m.params.values())
        node, _ = loss_graph(m, t, masked, mask)
        ad.backward(node)
        opt.step()
        changed = [n for n, p in m.named_tensors()
                   if not np.array_equal(before[n], p.value)]
        assert "proj.category.w" in changed
        assert "head.category.b" in changed


@pytest.fixture(scope="module")
def mini_run():
    screens = [generate_screen("login", derived_rng(i, "mini"))
               for i in range(6)]
    m = init_model(EncoderConfig(hidden=8, layers=1, heads=2, dropout=0.0,
                                 seed=0))
    cfg = TrainConfig(max_epochs=3, batch_size=2, seed=0)
    model, history = train(m, screens[:4], screens[4:], cfg)
    return model, history, cfg, screens


class TestTrainLoop:
    def test_history_shape(self, mini_run):
        _, history, cfg, _ = mini_run
        assert len(history) == cfg.max_epochs
        assert [e.epoch for e in history] == [1, 2, 3]
        for e in history:
            assert e.train_total == pytest.approx(
                e.train_ce_category + e.train_l2_appearance + e.train_l2_text,
                abs=1e-9)

    def test_restores_best_validation_params(self, mini_run):
        model, history, cfg, screens = mini_run
        mod_cfg = model.cfg.modalities()
        val_tokens = [tokenize_screen(s, cfg=mod_cfg) for s in screens[4:]]
        val_sets = fixed_masks(val_tokens, cfg.mask_rate, cfg.seed)
        total = 0.0
        for t, (masked, mask) in zip(val_tokens, val_sets):
            total += compute_loss(model, t, masked, mask).total
        total /= len(val_tokens)
        assert total == pytest.approx(min(e.val_total for e in history),
                                      abs=1e-9)

    def test_reproducible(self):
        screens = [generate_screen("popup", derived_rng(i, "repro"))
                   for i in range(4)]

        def run():
            m = init_model(EncoderConfig(hidden=8, layers=1, heads=2,
                                         dropout=0.25, seed=2))
            _, h = train(m, screens[:3], screens[3:],
                         TrainConfig(max_epochs=2, seed=3))
            return h

        h1, h2 = run(), run()
        for a, b in zip(h1, h2):
            assert a == b

    def test_empty_corpus_rejected(self, tiny_model):
        with pytest.raises(EmptyCorpus):
            train(tiny_model, [], [generate_screen("login", derived_rng(0, "e"))],
                  TrainConfig(max_epochs=1))
        with pytest.raises(EmptyCorpus):
            train(tiny_model, [generate_screen("login", derived_rng(0, "e"))], [],
                  TrainConfig(max_epochs=1))

    def test_patience_stops_early(self):
        screens = [generate_screen("login", derived_rng(i, "pat"))
                   for i in range(4)]
        m = init_model(EncoderConfig(hidden=8, layers=1, heads=2, dropout=0.0,
                                     seed=1))
        # learning rate 0 cannot improve validation, so patience cuts the run
        _, history = train(m, screens[:3], screens[3:],
                           TrainConfig(max_epochs=30, patience=2,
                                       learning_rate=1e-30, seed=0))
        assert len(history) <= 4

    def test_history_csv(self, mini_run, tmp_path):
        _, history, _, _ = mini_run
        path = tmp_path / "history.csv"
        write_history_csv(history, path)
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["epoch", "train_total", "val_total",
                           "train_ce_category", "train_l2_appearance",
                           "train_l2_text", "val_ce_category",
                           "val_l2_appearance", "val_l2_text"]
        assert len(rows) == 1 + len(history)
        assert float(rows[1][1]) == pytest.approx(history[0].train_total,
                                                  abs=1e-6)


class TestConfigValidation:
    @pytest.mark.parametrize("kw", [
        {"mask_rate": 0.0}, {"mask_rate": 1.5}, {"patience": 0},
        {"batch_size": 0}, {"max_epochs": 0}, {"learning_rate": 0.0},
    ])
    def test_rejects(self, kw):
        with pytest.raises(InvalidConfig):
            TrainConfig(**kw)


class TestGradCheckWrapper:
    def test_small_model_passes(self):
        m = init_model(EncoderConfig(hidden=8, layers=1, heads=2, dropout=0.0,
                                     seed=0))
        t = sample_tokens("gc", screen_cat="popup")
        _, mask = fixed_masks([t], 0.2, seed=0)[0]
        report = grad_check(m, t, mask, max_entries=6,
                            rng=np.random.default_rng(0))
        assert report.max_rel_err < 1e-4
        assert set(report.per_tensor) == set(m.params)

    def test_empty_mask_rejected(self, tiny_model):
        t = sample_tokens("gc2")
        with pytest.raises(InvalidConfig):
            grad_check(tiny_model, t, frozenset())


def test_masked_category_accuracy_bounds(tiny_model):
    tokens = [sample_tokens(f"acc{i}") for i in range(3)]
    sets = fixed_masks(tokens, 0.5, seed=1)
    acc = masked_category_accuracy(tiny_model, tokens, sets)
    assert 0.0 <= acc <= 1.0
