"""Masked-element-prediction training.

A portion of the input tokens have their features zeroed; the model must
reconstruct the category (cross entropy) and the appearance and text vectors
(squared L2) of the masked tokens from the surviving context. The three
components are summed into the total objective.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .encoder import EncoderModel
from .errors import EmptyCorpus, InvalidConfig
from .featurize import (APPEARANCE, CATEGORY, TEXT, DEFAULT_TEXT_ENCODER,
                        ModalityTokens, TextEncoder, Token, tokenize_screen)
from .rng import derived_rng

MASKABLE = (CATEGORY, APPEARANCE, TEXT)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    mask_rate: float = 0.15
    batch_size: int = 1
    max_epochs: int = 400
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_rate <= 1.0:
            raise InvalidConfig("mask_rate must lie in (0, 1]")
        if self.patience < 1:
            raise InvalidConfig("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidConfig("batch_size and max_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")


@dataclass(frozen=True)
class TrainLoss:
    total: float
    l2_appearance: float
    l2_text: float
    ce_category: float
    masked_token_count: int


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_total: float
    val_total: float
    train_ce_category: float
    train_l2_appearance: float
    train_l2_text: float
    val_ce_category: float
    val_l2_appearance: float
    val_l2_text: float


@dataclass(frozen=True)
class GradCheckReport:
    per_tensor: dict

    @property
    def max_rel_err(self) -> float:
        return max(self.per_tensor.values())


def mask_tokens(t: ModalityTokens, rate: float,
                rng: np.random.Generator) -> tuple[ModalityTokens, frozenset]:
    """Zero the features of each category/appearance/text token independently
    with probability `rate`; abs_position tokens are never touched."""
    if not 0.0 <= rate <= 1.0:
        raise InvalidConfig("mask rate must lie in [0, 1]")
    masked_tokens = []
    mask: set = set()
    for i, tok in enumerate(t.tokens):
        if tok.modality in MASKABLE and rng.random() < rate:
            zeroed = np.zeros_like(tok.features)
            zeroed.flags.writeable = False
            masked_tokens.append(Token(tok.element_index, tok.modality, zeroed))
            mask.add(i)
        else:
            masked_tokens.append(tok)
    return ModalityTokens(tokens=tuple(masked_tokens), rel_x=t.rel_x, rel_y=t.rel_y,
                          element_count=t.element_count,
                          element_centers=t.element_centers), frozenset(mask)


def _nonempty_mask(t: ModalityTokens, rate: float,
                   rng: np.random.Generator) -> tuple[ModalityTokens, frozenset]:
    """Training policy: redraw until at least one token is masked so every
    screen contributes gradient; forced to the first eligible token after
    1000 futile draws."""
    for _ in range(1000):
        masked, mask = mask_tokens(t, rate, rng)
        if mask:
            return masked, mask
    for i, tok in enumerate(t.tokens):
        if tok.modality in MASKABLE:
            zeroed = np.zeros_like(tok.features)
            zeroed.flags.writeable = False
            toks = list(t.tokens)
            toks[i] = Token(tok.element_index, tok.modality, zeroed)
            return ModalityTokens(tokens=tuple(toks), rel_x=t.rel_x, rel_y=t.rel_y,
                                  element_count=t.element_count,
                                  element_centers=t.element_centers), frozenset({i})
    return t, frozenset()


def loss_graph(m: EncoderModel, original: ModalityTokens, masked: ModalityTokens,
               mask: frozenset, train_mode: bool = False,
               rng: Optional[np.random.Generator] = None) -> tuple[Optional[ad.Var], TrainLoss]:
    """Build the loss tape. Returns (scalar Var or None when the mask is
    empty, TrainLoss with float components)."""
    if not mask:
        return None, TrainLoss(0.0, 0.0, 0.0, 0.0, 0)
    outputs, _ = m.forward(masked, train_mode=train_mode, rng=rng)
    by_modality: dict = {mod: [] for mod in MASKABLE}
    for i in sorted(mask):
        by_modality[original.tokens[i].modality].append(i)
    recon = m.reconstruct(outputs, masked,
                          token_indices={k: np.array(v, dtype=np.int64)
                                         for k, v in by_modality.items() if v})
    ce = ad.Var(0.0)
    l2_app = ad.Var(0.0)
    l2_text = ad.Var(0.0)
    if CATEGORY in recon:
        pred, idx = recon[CATEGORY]
        targets = np.array([int(np.argmax(original.tokens[i].features)) for i in idx])
        ce = ad.cross_entropy_mean(pred, targets)
    if APPEARANCE in recon:
        pred, idx = recon[APPEARANCE]
        targets = np.stack([original.tokens[i].features for i in idx])
        l2_app = ad.squared_error_mean(pred, targets)
    if TEXT in recon:
        pred, idx = recon[TEXT]
        targets = np.stack([original.tokens[i].features for i in idx])
        l2_text = ad.squared_error_mean(pred, targets)
    total = ad.add(ad.add(ce, l2_app), l2_text)
    stats = TrainLoss(
        total=float(ce.value) + float(l2_app.value) + float(l2_text.value),
        l2_appearance=float(l2_app.value),
        l2_text=float(l2_text.value),
        ce_category=float(ce.value),
        masked_token_count=len(mask),
    )
    return total, stats


def compute_loss(m: EncoderModel, original: ModalityTokens, masked: ModalityTokens,
                 mask: frozenset) -> TrainLoss:
    _, stats = loss_graph(m, original, masked, mask, train_mode=False)
    return stats


class Adam:
    """Adaptive-moment optimizer. Weight decay is folded into the gradient
    and applies only where the model's decay policy says so."""

    def __init__(self, model: EncoderModel, cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        self.step_count = 0
        self.m = {n: np.zeros_like(p.value) for n, p in model.params.items()}
        self.v = {n: np.zeros_like(p.value) for n, p in model.params.items()}

    def decayed_names(self) -> frozenset:
        return frozenset(n for n in self.model.params if self.model.decays(n))

    def step(self) -> None:
        cfg = self.cfg
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - cfg.beta1 ** t
        bias2 = 1.0 - cfg.beta2 ** t
        for name, p in self.model.named_tensors():
            g = p.grad if p.grad is not None else np.zeros_like(p.value)
            if cfg.weight_decay > 0.0 and self.model.decays(name):
                g = g + cfg.weight_decay * p.value
            self.m[name] = cfg.beta1 * self.m[name] + (1 - cfg.beta1) * g
            self.v[name] = cfg.beta2 * self.v[name] + (1 - cfg.beta2) * g * g
            mhat = self.m[name] / bias1
            vhat = self.v[name] / bias2
            p.value -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)


def fixed_masks(tokens_list: list, rate: float, seed: int) -> list:
    """Deterministic per-sample (masked, mask set) pairs, one named stream per
    sample; the validation masks train() scores against."""
    out = []
    for i, t in enumerate(tokens_list):
        rng = derived_rng(seed, f"val-mask-{i}")
        out.append(_nonempty_mask(t, rate, rng))
    return out


def masked_category_accuracy(m: EncoderModel, originals: list,
                             masked_sets: list) -> float:
    """Fraction of masked category tokens whose reconstruction argmax equals
    the true category, over (original, (masked, mask)) sample pairs."""
    hits = 0
    total = 0
    for original, (masked, mask) in zip(originals, masked_sets):
        idx = [i for i in sorted(mask)
               if original.tokens[i].modality == CATEGORY]
        if not idx:
            continue
        outputs, _ = m.forward(masked, train_mode=False)
        recon = m.reconstruct(outputs, masked,
                              token_indices={CATEGORY: np.array(idx, dtype=np.int64)})
        pred, _ = recon[CATEGORY]
        guesses = np.argmax(pred.value, axis=1)
        truths = np.array([int(np.argmax(original.tokens[i].features))
                           for i in idx])
        hits += int((guesses == truths).sum())
        total += len(idx)
    return hits / total if total else 0.0


def train(m: EncoderModel, corpus: list, val: list, cfg: TrainConfig,
          enc: TextEncoder = DEFAULT_TEXT_ENCODER) -> tuple[EncoderModel, list]:
    """Optimize `m` in place; returns (model restored to the best-validation
    epoch, per-epoch history). Reproducible for a fixed config seed."""
    if not corpus:
        raise EmptyCorpus("training corpus is empty")
    if not val:
        raise EmptyCorpus("validation corpus is empty")
    mod_cfg = m.cfg.modalities()
    train_tokens = [tokenize_screen(s, enc, mod_cfg) for s in corpus]
    val_tokens = [tokenize_screen(s, enc, mod_cfg) for s in val]

    # fixed validation masks: constant across epochs so val loss is comparable
    val_sets = fixed_masks(val_tokens, cfg.mask_rate, cfg.seed)

    opt = Adam(m, cfg)
    history: list = []
    best_val = np.inf
    best_params: Optional[dict] = None
    since_best = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = derived_rng(cfg.seed, f"epoch-{epoch}-order").permutation(len(train_tokens))
        mask_rng = derived_rng(cfg.seed, f"epoch-{epoch}-mask")
        drop_rng = derived_rng(cfg.seed, f"epoch-{epoch}-dropout")
        totals = np.zeros(3)
        n_screens = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            ad.zero_grads(m.params.values())
            for si in batch:
                t = train_tokens[si]
                masked, mask = _nonempty_mask(t, cfg.mask_rate, mask_rng)
                node, stats = loss_graph(m, t, masked, mask, train_mode=True,
                                         rng=drop_rng)
                if node is not None:
                    ad.backward(ad.scale(node, 1.0 / len(batch)))
                totals += (stats.ce_category, stats.l2_appearance, stats.l2_text)
                n_screens += 1
            opt.step()
        train_ce, train_app, train_text = totals / n_screens

        val_totals = np.zeros(3)
        for t, (masked, mask) in zip(val_tokens, val_sets):
            stats = compute_loss(m, t, masked, mask)
            val_totals += (stats.ce_category, stats.l2_appearance, stats.l2_text)
        val_ce, val_app, val_text = val_totals / len(val_tokens)
        val_total = float(val_totals.sum() / len(val_tokens))

        history.append(EpochStats(
            epoch=epoch,
            train_total=float(totals.sum() / n_screens),
            val_total=val_total,
            train_ce_category=float(train_ce),
            train_l2_appearance=float(train_app),
            train_l2_text=float(train_text),
            val_ce_category=float(val_ce),
            val_l2_appearance=float(val_app),
            val_l2_text=float(val_text),
        ))
        if val_total < best_val:
            best_val = val_total
            best_params = {n: p.value.copy() for n, p in m.params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    if best_params is not None:
        for n, p in m.params.items():
            p.value = best_params[n]
    ad.zero_grads(m.params.values())
    return m, history


def write_history_csv(history: list, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "train_total", "val_total", "train_ce_category",
                    "train_l2_appearance", "train_l2_text", "val_ce_category",
                    "val_l2_appearance", "val_l2_text"])
        for e in history:
            w.writerow([e.epoch, f"{e.train_total:.6f}", f"{e.val_total:.6f}",
                        f"{e.train_ce_category:.6f}", f"{e.train_l2_appearance:.6f}",
                        f"{e.train_l2_text:.6f}", f"{e.val_ce_category:.6f}",
                        f"{e.val_l2_appearance:.6f}", f"{e.val_l2_text:.6f}"])


def grad_check(m: EncoderModel, sample: ModalityTokens, mask: frozenset,
               step: float = 1e-3, max_entries: Optional[int] = None,
               rng: Optional[np.random.Generator] = None) -> GradCheckReport:
    """Verify analytic gradients of the masked loss against central finite
    differences; one norm-ratio entry per named tensor, every coordinate
    probed unless max_entries caps it. Runs the eval-mode forward, so
    dropout is inherently off."""
    if not mask:
        raise InvalidConfig("grad_check needs a non-empty mask set")
    masked, _ = _zero_mask(sample, mask)

    def fn(params: dict) -> ad.Var:
        node, _ = loss_graph(m, sample, masked, mask, train_mode=False)
        assert node is not None
        return node

    report = ad.grad_check(fn, m.params, step=step, max_entries=max_entries, rng=rng)
    return GradCheckReport(per_tensor=report)


def _zero_mask(t: ModalityTokens, mask: frozenset) -> tuple[ModalityTokens, frozenset]:
    """Apply a predetermined mask set (rather than drawing one)."""
    toks = list(t.tokens)
    for i in mask:
        tok = toks[i]
        zeroed = np.zeros_like(tok.features)
        zeroed.flags.writeable = False
        toks[i] = Token(tok.element_index, tok.modality, zeroed)
    return ModalityTokens(tokens=tuple(toks), rel_x=t.rel_x, rel_y=t.rel_y,
                          element_count=t.element_count,
                          element_centers=t.element_centers), mask


def apply_mask(t: ModalityTokens, mask: frozenset) -> ModalityTokens:
    masked, _ = _zero_mask(t, mask)
    return masked
