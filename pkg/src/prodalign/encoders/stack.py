"""The four-encoder stack and its projection heads.

Unimodal image and text encoders feed stage-1 contrastive training; the
multimodal encoder shares the text encoder's blocks and adds one
cross-attention block over image-derived slots, producing the product
representation C; the query encoder mirrors the text encoder with its own
weights. Projection heads map into the shared d_proj space and are
L2-normalized wherever a contrastive loss consumes them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..datagen.types import Product, Query
from ..diffcore import Tensor
from ..seeding import rng_for
from .layers import CrossAttentionBlock, Linear, TransformerBlock

UNK_ID = 0


@dataclass(frozen=True)
class EncoderConfig:
    d_img: int = 64
    d_enc: int = 32
    d_proj: int = 16
    n_blocks: int = 4
    n_slots: int = 4
    img_hidden: int = 64


class ImageEncoder:
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.layers = [
            Linear(cfg.d_img, cfg.img_hidden, rng),
            Linear(cfg.img_hidden, cfg.d_enc, rng),
            Linear(cfg.d_enc, cfg.d_enc, rng),
        ]

    def __call__(self, features: Tensor) -> Tensor:
        x = features
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = dc.relu(x)
        return x

    def params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out.update(layer.params(f"{prefix}.l{i}"))
        return out


class TextEncoder:
    def __init__(self, vocab_size: int, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.emb = dc.parameter(rng.normal(0.0, 1.0, size=(vocab_size + 1, cfg.d_enc)))
        self.blocks = [TransformerBlock(cfg.d_enc, rng) for _ in range(cfg.n_blocks)]
        self.lnf_gain = dc.parameter(np.ones(cfg.d_enc))
        self.lnf_bias = dc.parameter(np.zeros(cfg.d_enc))

    def tokens_to_x(self, ids: np.ndarray) -> Tensor:
        return dc.embedding(self.emb, ids)

    def run_blocks(self, x: Tensor, start: int = 0) -> Tensor:
        for block in self.blocks[start:]:
            x = block(x)
        return x

    def pool(self, x: Tensor) -> Tensor:
        return dc.mean_pool(dc.layer_norm(x, self.lnf_gain, self.lnf_bias))

    def __call__(self, ids: np.ndarray) -> Tensor:
        return self.pool(self.run_blocks(self.tokens_to_x(ids)))

    def params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {f"{prefix}.emb": self.emb}
        for i, block in enumerate(self.blocks):
            out.update(block.params(f"{prefix}.block{i}"))
        out[f"{prefix}.lnf.gain"] = self.lnf_gain
        out[f"{prefix}.lnf.bias"] = self.lnf_bias
        return out


class EncoderStack:
    def __init__(self, vocab: list[str], cfg: EncoderConfig = EncoderConfig(), seed: int = 0):
        self.cfg = cfg
        self.vocab = {tok: i + 1 for i, tok in enumerate(vocab)}  # 0 is UNK
        vocab_size = len(vocab)
        self.image = ImageEncoder(cfg, rng_for(seed, "enc/image"))
        self.text = TextEncoder(vocab_size, cfg, rng_for(seed, "enc/text"))
        self.query = TextEncoder(vocab_size, cfg, rng_for(seed, "enc/query"))
        self.cross = CrossAttentionBlock(cfg.d_enc, cfg.n_slots, rng_for(seed, "enc/cross"))
        self.mm_lnf_gain = dc.parameter(np.ones(cfg.d_enc))
        self.mm_lnf_bias = dc.parameter(np.zeros(cfg.d_enc))
        self.image_proj = Linear(cfg.d_enc, cfg.d_proj, rng_for(seed, "enc/image_proj"))
        self.text_proj = Linear(cfg.d_enc, cfg.d_proj, rng_for(seed, "enc/text_proj"))
        self.proj_p = Linear(cfg.d_enc, cfg.d_proj, rng_for(seed, "enc/proj_p"))
        self.proj_q = Linear(cfg.d_enc, cfg.d_proj, rng_for(seed, "enc/proj_q"))

    # ---- tokenization ----
    def token_ids(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            raise ValueError("cannot encode an empty token sequence")
        return np.array([self.vocab.get(t.lower(), UNK_ID) for t in tokens], dtype=np.int64)

    # ---- encoder forwards (graph-building; use .data for inference) ----
    def encode_image_t(self, product: Product) -> Tensor:
        return self.image(dc.constant(product.image_features))

    def encode_text_t(self, tokens: list[str]) -> Tensor:
        return self.text(self.token_ids(tokens))

    def encode_product_t(self, product: Product) -> Tensor:
        text_x = self.text.run_blocks(self.text.tokens_to_x(self.token_ids(product.title)))
        return self.multimodal_from_parts(text_x, self.encode_image_t(product))

    def multimodal_from_parts(self, text_x: Tensor, image_vec: Tensor) -> Tensor:
        x = self.cross(text_x, image_vec)
        return dc.mean_pool(dc.layer_norm(x, self.mm_lnf_gain, self.mm_lnf_bias))

    def encode_query_t(self, query: Query | list[str]) -> Tensor:
        tokens = query.text if isinstance(query, Query) else query
        return self.query(self.token_ids(tokens))

    # ---- normalized projections (contrastive space) ----
    def itc_image_embed(self, product: Product) -> Tensor:
        return dc.l2_normalize(self.image_proj(self.encode_image_t(product)))

    def itc_text_embed(self, tokens: list[str]) -> Tensor:
        return dc.l2_normalize(self.text_proj(self.encode_text_t(tokens)))

    def product_embed(self, product: Product) -> Tensor:
        return dc.l2_normalize(self.proj_p(self.encode_product_t(product)))

    def query_embed(self, query: Query | list[str]) -> Tensor:
        return dc.l2_normalize(self.proj_q(self.encode_query_t(query)))

    # ---- inference conveniences ----
    def encode_image(self, product: Product) -> np.ndarray:
        return self.encode_image_t(product).data

    def encode_text(self, tokens: list[str]) -> np.ndarray:
        return self.encode_text_t(tokens).data

    def encode_product(self, product: Product) -> np.ndarray:
        return self.encode_product_t(product).data

    def encode_query(self, query: Query | list[str]) -> np.ndarray:
        return self.encode_query_t(query).data

    # ---- parameter bookkeeping ----
    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.image.params("image"))
        out.update(self.text.params("text"))
        out.update(self.query.params("query"))
        out.update(self.cross.params("mm.cross"))
        out["mm.lnf.gain"] = self.mm_lnf_gain
        out["mm.lnf.bias"] = self.mm_lnf_bias
        out.update(self.image_proj.params("proj.image"))
        out.update(self.text_proj.params("proj.text"))
        out.update(self.proj_p.params("proj.p"))
        out.update(self.proj_q.params("proj.q"))
        return out

    def stage1_parameters(self) -> dict[str, Tensor]:
        """Everything stage 1 may update: product-side encoders and ITC heads."""
        out: dict[str, Tensor] = {}
        out.update(self.image.params("image"))
        out.update(self.text.params("text"))
        out.update(self.cross.params("mm.cross"))
        out["mm.lnf.gain"] = self.mm_lnf_gain
        out["mm.lnf.bias"] = self.mm_lnf_bias
        out.update(self.image_proj.params("proj.image"))
        out.update(self.text_proj.params("proj.text"))
        return out

    def stage2_parameters(self) -> dict[str, Tensor]:
        """Stage 2 trains the product projection head and the query side only."""
        out: dict[str, Tensor] = {}
        out.update(self.proj_p.params("proj.p"))
        out.update(self.query.params("query"))
        out.update(self.proj_q.params("proj.q"))
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        if missing:
            raise ValueError(f"checkpoint missing tensors: {missing[:5]}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"{name}: shape {arr.shape} != expected {p.data.shape}")
            p.data = arr.copy()

    def snapshot_bytes(self, names: list[str] | None = None) -> dict[str, bytes]:
        params = self.named_parameters()
        if names is None:
            names = sorted(params)
        return {n: params[n].data.tobytes() for n in names}


def freeze_first_layers(stack: EncoderStack, k: int, encoders: tuple[str, ...] = ("image", "text")) -> None:
    """Exclude the token embedding and first k blocks from optimizer updates.

    For the image MLP, the first min(k, n_layers) linear layers freeze.
    k = 0 unfreezes the targeted encoders entirely.
    """
    n_blocks = stack.cfg.n_blocks
    if not 0 <= k <= n_blocks:
        raise ValueError(f"freeze count {k} out of range [0, {n_blocks}]")
    for target in encoders:
        if target == "image":
            n = len(stack.image.layers)
            for i, layer in enumerate(stack.image.layers):
                frozen = i < min(k, n)
                layer.w.frozen = frozen
                layer.b.frozen = frozen
        elif target in ("text", "query"):
            enc = stack.text if target == "text" else stack.query
            enc.emb.frozen = k > 0
            for i, block in enumerate(enc.blocks):
                frozen = i < k
                for p in block.params("x").values():
                    p.frozen = frozen
            enc.lnf_gain.frozen = False
            enc.lnf_bias.frozen = False
        else:
            raise ValueError(f"unknown encoder target {target!r}")


def init_query_from_text(stack: EncoderStack) -> None:
    """Deep-copy the (post-stage-1) text encoder weights into the query encoder."""
    text = stack.text.params("e")
    query = stack.query.params("e")
    for name, src in text.items():
        query[name].data = src.data.copy()
