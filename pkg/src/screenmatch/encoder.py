"""Screen transformer: modality projections, self-attention with 2D relative
position bias, and per-element mean pooling."""

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import autodiff as ad
from .errors import CheckpointError, DimensionMismatch, InvalidConfig
from .featurize import (ABS_POSITION, APPEARANCE, CATEGORY, MODALITY_DIMS,
                        NUM_REL_BUCKETS, TEXT, ModalityConfig, ModalityTokens)
from .taxonomy import TAXONOMY_VERSION

CHECKPOINT_MAGIC = b"SMCK"
CHECKPOINT_FORMAT_VERSION = 1

# Modalities with reconstruction heads; abs_position is input-only.
RECONSTRUCTED_MODALITIES = (CATEGORY, APPEARANCE, TEXT)


@dataclass(frozen=True)
class EncoderConfig:
    hidden: int = 256
    layers: int = 4
    heads: int = 4
    dropout: float = 0.25
    use_relative: bool = True
    use_appearance: bool = True
    use_text: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.hidden <= 0 or self.layers <= 0 or self.heads <= 0:
            raise InvalidConfig("hidden, layers, and heads must be positive")
        if self.hidden % self.heads != 0:
            raise InvalidConfig(
                f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must lie in [0, 1)")

    def modalities(self) -> ModalityConfig:
        return ModalityConfig(use_relative=self.use_relative,
                              use_appearance=self.use_appearance,
                              use_text=self.use_text)

    def as_dict(self) -> dict:
        return {
            "hidden": self.hidden, "layers": self.layers, "heads": self.heads,
            "dropout": self.dropout, "use_relative": self.use_relative,
            "use_appearance": self.use_appearance, "use_text": self.use_text,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class ElementEmbeddings:
    screen_id: str
    element_ids: tuple
    vectors: np.ndarray  # (E, H)

    def __post_init__(self):
        if len(self.element_ids) != self.vectors.shape[0]:
            raise DimensionMismatch("one vector per element required")
        if not np.all(np.isfinite(self.vectors)):
            raise DimensionMismatch("embeddings must be finite")


def _tensor_rng(seed: int, name: str) -> np.random.Generator:
    tag = int.from_bytes(
        hashlib.blake2b(name.encode(), digest_size=8).digest(), "little")
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed, tag]))


def _xavier(seed: int, name: str, fan_in: int, fan_out: int) -> np.ndarray:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return _tensor_rng(seed, name).uniform(-a, a, size=(fan_in, fan_out))


class EncoderModel:
    """Parameter container plus the forward pass. Parameters live in a flat
    name -> Var dict so the optimizer and checkpoints treat them uniformly."""

    def __init__(self, cfg: EncoderConfig, params: dict):
        self.cfg = cfg
        self.params = params

    def __getitem__(self, name: str) -> ad.Var:
        return self.params[name]

    def named_tensors(self) -> list:
        return sorted(self.params.items())

    def decays(self, name: str) -> bool:
        """Weight-decay policy: 2-D projection/attention/FFN/head matrices
        only; never biases, layer-norm parameters, or relative-bias tables."""
        return self.params[name].value.ndim == 2 and not name.startswith("relbias")

    def model_version(self) -> str:
        """Content hash over the float32 checkpoint image of this model."""
        h = hashlib.sha256()
        h.update(json.dumps(self.cfg.as_dict(), sort_keys=True).encode())
        h.update(TAXONOMY_VERSION.encode())
        for name, p in self.named_tensors():
            h.update(name.encode())
            h.update(p.value.astype("<f4").tobytes())
        return h.hexdigest()[:16]

    # -- forward ---------------------------------------------------------

    def _check_tokens(self, t: ModalityTokens) -> None:
        for tok in t.tokens:
            want = MODALITY_DIMS[tok.modality]
            if tok.features.shape != (want,):
                raise DimensionMismatch(
                    f"{tok.modality} token has shape {tok.features.shape}, "
                    f"expected ({want},)")

    def embed_tokens(self, t: ModalityTokens) -> ad.Var:
        """Project every token into the hidden size and assemble the (T, H)
        input matrix."""
        self._check_tokens(t)
        n_tokens = len(t.tokens)
        total: Optional[ad.Var] = None
        for modality in (CATEGORY, APPEARANCE, TEXT, ABS_POSITION):
            idx = t.indices_of(modality)
            if idx.size == 0:
                continue
            feats = np.stack([t.tokens[i].features for i in idx])
            proj = ad.matmul(ad.Var(feats), self.params[f"proj.{modality}.w"])
            proj = ad.add(proj, self.params[f"proj.{modality}.b"])
            placed = ad.scatter_rows(proj, idx, n_tokens)
            total = placed if total is None else ad.add(total, placed)
        assert total is not None
        return total

    def forward(self, t: ModalityTokens, train_mode: bool = False,
                rng: Optional[np.random.Generator] = None
                ) -> tuple[ad.Var, "ElementEmbeddings"]:
        """Run the stack; returns per-token outputs (for reconstruction) and
        mean-pooled per-element embeddings."""
        cfg = self.cfg
        if train_mode and cfg.dropout > 0.0 and rng is None:
            raise InvalidConfig("train-mode forward with dropout needs an rng")
        x = self.embed_tokens(t)
        n_tokens = len(t.tokens)
        dh = cfg.hidden // cfg.heads
        inv_sqrt = 1.0 / math.sqrt(dh)

        bias: Optional[ad.Var] = None
        if cfg.use_relative:
            bias = ad.relative_bias(self.params["relbias.x"],
                                    self.params["relbias.y"],
                                    t.rel_x, t.rel_y)

        def split_heads(v: ad.Var) -> ad.Var:
            return ad.permute(ad.reshape(v, (n_tokens, cfg.heads, dh)), (1, 0, 2))

        for i in range(cfg.layers):
            pre = f"layers.{i}"
            h = ad.layer_norm(x, self.params[f"{pre}.ln1.g"], self.params[f"{pre}.ln1.b"])
            q = split_heads(ad.add(ad.matmul(h, self.params[f"{pre}.attn.wq"]),
                                   self.params[f"{pre}.attn.bq"]))
            # No key bias: softmax is invariant to per-row logit shifts, so a
            # key bias would be a dead parameter with identically zero gradient.
            k = split_heads(ad.matmul(h, self.params[f"{pre}.attn.wk"]))
            v = split_heads(ad.add(ad.matmul(h, self.params[f"{pre}.attn.wv"]),
                                   self.params[f"{pre}.attn.bv"]))
            scores = ad.scale(ad.matmul(q, ad.permute(k, (0, 2, 1))), inv_sqrt)
            if bias is not None:
                scores = ad.add(scores, bias)
            attn = ad.softmax_last(scores)
            if train_mode and cfg.dropout > 0.0:
                attn = ad.dropout(attn, cfg.dropout, rng)
            ctx = ad.reshape(ad.permute(ad.matmul(attn, v), (1, 0, 2)),
                             (n_tokens, cfg.hidden))
            out = ad.add(ad.matmul(ctx, self.params[f"{pre}.attn.wo"]),
                         self.params[f"{pre}.attn.bo"])
            x = ad.add(x, out)

            h2 = ad.layer_norm(x, self.params[f"{pre}.ln2.g"], self.params[f"{pre}.ln2.b"])
            f = ad.gelu(ad.add(ad.matmul(h2, self.params[f"{pre}.ffn.w1"]),
                               self.params[f"{pre}.ffn.b1"]))
            f = ad.add(ad.matmul(f, self.params[f"{pre}.ffn.w2"]),
                       self.params[f"{pre}.ffn.b2"])
            if train_mode and cfg.dropout > 0.0:
                f = ad.dropout(f, cfg.dropout, rng)
            x = ad.add(x, f)

        x = ad.layer_norm(x, self.params["lnf.g"], self.params["lnf.b"])

        pool = np.zeros((t.element_count, n_tokens))
        for j, tok in enumerate(t.tokens):
            pool[tok.element_index, j] = 1.0
        pool /= pool.sum(axis=1, keepdims=True)
        vectors = pool @ x.value
        return x, vectors

    def embed_screen(self, screen_id: str, element_ids: tuple,
                     t: ModalityTokens) -> ElementEmbeddings:
        _, vectors = self.forward(t, train_mode=False)
        return ElementEmbeddings(screen_id=screen_id, element_ids=element_ids,
                                 vectors=vectors)

    def reconstruct(self, outputs: ad.Var, t: ModalityTokens,
                    token_indices: Optional[dict] = None) -> dict:
        """Map token outputs through the per-modality reconstruction heads.

        Returns {modality: (predictions Var, token index array)}; abs_position
        tokens have no head and are skipped. `token_indices` restricts each
        modality to the given token positions (used for masked-token loss).
        """
        recon = {}
        for modality in RECONSTRUCTED_MODALITIES:
            idx = (token_indices.get(modality) if token_indices is not None
                   else t.indices_of(modality))
            if idx is None or len(idx) == 0:
                continue
            rows = ad.take_rows(outputs, np.asarray(idx, dtype=np.int64))
            pred = ad.add(ad.matmul(rows, self.params[f"head.{modality}.w"]),
                          self.params[f"head.{modality}.b"])
            recon[modality] = (pred, np.asarray(idx, dtype=np.int64))
        return recon


def init_model(cfg: EncoderConfig) -> EncoderModel:
    """Deterministic scaled-uniform initialization keyed by (seed, tensor
    name): Xavier bounds for matrices, 1/sqrt(fan_in) bounds for biases.

    Biases are drawn rather than zeroed so a fully masked (zero-feature)
    token never reaches layer norm as an exactly constant vector, where the
    normalization is at its eps singularity.
    """
    H = cfg.hidden
    seed = cfg.seed
    params: dict = {}

    def matrix(name: str, fan_in: int, fan_out: int) -> None:
        params[name] = ad.parameter(_xavier(seed, name, fan_in, fan_out))

    def bias(name: str, size: int, fan_in: int) -> None:
        a = 1.0 / math.sqrt(fan_in)
        params[name] = ad.parameter(_tensor_rng(seed, name).uniform(-a, a, size=size))

    def zeros(name: str, shape) -> None:
        params[name] = ad.parameter(np.zeros(shape))

    def ones(name: str, shape) -> None:
        params[name] = ad.parameter(np.ones(shape))

    for modality in (CATEGORY, APPEARANCE, TEXT, ABS_POSITION):
        matrix(f"proj.{modality}.w", MODALITY_DIMS[modality], H)
        # Unit-scale draw: the projection bias doubles as the modality
        # embedding, and it is all a fully masked token brings to layer norm,
        # so it must carry healthy variance on its own.
        bias(f"proj.{modality}.b", H, 1)
    for i in range(cfg.layers):
        pre = f"layers.{i}"
        for part in ("wq", "wk", "wv", "wo"):
            matrix(f"{pre}.attn.{part}", H, H)
        for part in ("bq", "bv", "bo"):
            bias(f"{pre}.attn.{part}", H, H)
        ones(f"{pre}.ln1.g", H)
        zeros(f"{pre}.ln1.b", H)
        ones(f"{pre}.ln2.g", H)
        zeros(f"{pre}.ln2.b", H)
        matrix(f"{pre}.ffn.w1", H, 4 * H)
        bias(f"{pre}.ffn.b1", 4 * H, H)
        matrix(f"{pre}.ffn.w2", 4 * H, H)
        bias(f"{pre}.ffn.b2", H, 4 * H)
    ones("lnf.g", H)
    zeros("lnf.b", H)
    zeros("relbias.x", (cfg.heads, NUM_REL_BUCKETS))
    zeros("relbias.y", (cfg.heads, NUM_REL_BUCKETS))
    for modality in RECONSTRUCTED_MODALITIES:
        matrix(f"head.{modality}.w", H, MODALITY_DIMS[modality])
        bias(f"head.{modality}.b", MODALITY_DIMS[modality], H)
    return EncoderModel(cfg, params)


# -- checkpoint i/o ------------------------------------------------------

def save_checkpoint(model: EncoderModel, path, text_encoder_tag: str) -> None:
    """Binary container: magic, u32 header length, JSON header, then the
    named tensors as little-endian float32 in header order."""
    index = []
    blobs = []
    for name, p in model.named_tensors():
        data = p.value.astype("<f4").tobytes()
        index.append({"name": name, "shape": list(p.value.shape)})
        blobs.append(data)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.cfg.as_dict(),
        "taxonomy_version": TAXONOMY_VERSION,
        "text_encoder": text_encoder_tag,
        "position_scheme": "additive-bias",
        "tensors": index,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        for blob in blobs:
            f.write(blob)
    tmp.replace(path)


def load_checkpoint(path, expect_text_encoder: Optional[str] = None) -> EncoderModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (hlen,) = struct.unpack("<I", data[4:8])
    try:
        header = json.loads(data[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header in {path}") from exc
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format {header.get('format_version')!r}")
    if header.get("taxonomy_version") != TAXONOMY_VERSION:
        raise CheckpointError(
            f"checkpoint taxonomy {header.get('taxonomy_version')!r} does not "
            f"match {TAXONOMY_VERSION!r}")
    if expect_text_encoder is not None and header.get("text_encoder") != expect_text_encoder:
        raise CheckpointError(
            f"checkpoint text encoder {header.get('text_encoder')!r} does not "
            f"match {expect_text_encoder!r}")
    cfg = EncoderConfig.from_dict(header["config"])
    params: dict = {}
    offset = 8 + hlen
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(data):
            raise CheckpointError(f"truncated checkpoint {path}")
        arr = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape)
        params[entry["name"]] = ad.parameter(arr.astype(np.float64))
        offset = end
    if offset != len(data):
        raise CheckpointError(f"trailing bytes in checkpoint {path}")
    model = EncoderModel(cfg, params)
    expected = {name for name, _ in init_model(cfg).named_tensors()}
    if set(params) != expected:
        raise CheckpointError("checkpoint tensor set does not match config")
    return model


def checkpoint_text_encoder(path) -> str:
    """Read just the text-encoder tag from a checkpoint header."""
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (hlen,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + hlen].decode("utf-8"))
    return header.get("text_encoder", "")
