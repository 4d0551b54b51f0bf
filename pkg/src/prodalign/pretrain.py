"""Stage-1 continual pre-training.

Minimizes a symmetric InfoNCE loss between image and text projections (ITC)
plus a binary matching loss (ITM) on the multimodal representation, where
each batch contributes its positives and two mined hard negatives per pair.
Training early-stops on the held-out ITM loss and restores the best-epoch
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .datagen.types import Catalog, Product
from .diffcore import NonFiniteLossError, SGD, Tensor
from .encoders import EncoderStack, freeze_first_layers
from .encoders.layers import Linear
from .seeding import rng_for, stable_fraction


@dataclass
class Stage1Config:
    batch_size: int = 32
    tau: float = 0.2
    lr: float = 0.05
    max_epochs: int = 40
    patience: int = 6
    freeze_k: int = 2
    eval_frac: float = 0.1

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("temperature must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


class ItmHead:
    """2-class matching classifier on the multimodal representation."""

    def __init__(self, d_enc: int, rng: np.random.Generator):
        self.linear = Linear(d_enc, 2, rng)

    def __call__(self, c: Tensor) -> Tensor:
        return self.linear(c)

    def params(self) -> dict[str, Tensor]:
        return self.linear.params("itm_head")


def cross_entropy_from_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of (n, k) logits against integer labels."""
    return dc.mean(dc.sub(dc.logsumexp(logits), dc.rowsel(logits, labels)))


def itc_from_sims(sims: Tensor, tau: float) -> Tensor:
    """Symmetric InfoNCE on an (B, B) similarity matrix with diagonal targets."""
    b = sims.shape[0]
    diag = np.arange(b)
    logits = dc.scale(sims, 1.0 / tau)
    i2t = cross_entropy_from_logits(logits, diag)
    t2i = cross_entropy_from_logits(dc.transpose(logits), diag)
    return dc.scale(dc.add(i2t, t2i), 0.5)


def itc_loss(stack: EncoderStack, batch: list[Product], tau: float) -> tuple[Tensor, np.ndarray]:
    """ITC loss over a batch; also returns the similarity matrix for mining."""
    if len(batch) < 2:
        raise ValueError("ITC needs a batch of at least 2 (no in-batch negatives otherwise)")
    img = dc.stack_rows([stack.itc_image_embed(p) for p in batch])
    txt = dc.stack_rows([stack.itc_text_embed(p.title) for p in batch])
    sims = dc.matmul(img, dc.transpose(txt))
    return itc_from_sims(sims, tau), sims.data.copy()


def mine_hard_negatives(
    sims: np.ndarray, tau: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample one hard negative per row and per column of the ITC similarities.

    For image i the sampled text index is drawn with probability proportional
    to softmax(sims[i, :] / tau) with the diagonal masked out, and
    symmetrically for texts. Returns (text_neg_for_image, image_neg_for_text).
    """
    b = sims.shape[0]

    def draw(row: np.ndarray, masked: int) -> int:
        logits = row / tau
        logits[masked] = -np.inf
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        return int(rng.choice(b, p=p))

    text_neg = np.array([draw(sims[i].copy(), i) for i in range(b)])
    img_neg = np.array([draw(sims[:, j].copy(), j) for j in range(b)])
    return text_neg, img_neg


def itm_from_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    return cross_entropy_from_logits(logits, labels)


def itm_loss(
    stack: EncoderStack,
    head: ItmHead,
    batch: list[Product],
    mined: tuple[np.ndarray, np.ndarray],
) -> Tensor:
    """2-class cross-entropy on B positives plus 2B mined negative pairings."""
    text_neg, img_neg = mined
    text_x = [stack.text.run_blocks(stack.text.tokens_to_x(stack.token_ids(p.title))) for p in batch]
    img_v = [stack.encode_image_t(p) for p in batch]
    rows: list[Tensor] = []
    labels: list[int] = []
    for i in range(len(batch)):
        rows.append(head(stack.multimodal_from_parts(text_x[i], img_v[i])))
        labels.append(1)
    for i in range(len(batch)):
        rows.append(head(stack.multimodal_from_parts(text_x[int(text_neg[i])], img_v[i])))
        labels.append(0)
    for j in range(len(batch)):
        rows.append(head(stack.multimodal_from_parts(text_x[j], img_v[int(img_neg[j])])))
        labels.append(0)
    return itm_from_logits(dc.stack_rows(rows), np.array(labels))


def split_catalog(catalog: Catalog, eval_frac: float) -> tuple[list[Product], list[Product]]:
    """Stable eval split by product_id hash."""
    train, eval_ = [], []
    for p in catalog.products:
        (eval_ if stable_fraction(f"stage1-eval/{p.product_id}") < eval_frac else train).append(p)
    return train, eval_


def _batches(items: list, size: int):
    for i in range(0, len(items), size):
        chunk = items[i : i + size]
        if len(chunk) >= 2:
            yield chunk


def _eval_itm(stack: EncoderStack, head: ItmHead, products: list[Product], cfg: Stage1Config, seed: int) -> float:
    rng = rng_for(seed, "stage1/eval-mining")
    total, weight = 0.0, 0
    for batch in _batches(products, cfg.batch_size):
        _, sims = itc_loss(stack, batch, cfg.tau)
        mined = mine_hard_negatives(sims, cfg.tau, rng)
        loss = itm_loss(stack, head, batch, mined)
        total += loss.item() * len(batch)
        weight += len(batch)
    return total / max(weight, 1)


def train_stage1(
    stack: EncoderStack,
    catalog: Catalog,
    cfg: Stage1Config,
    seed: int,
) -> tuple[ItmHead, list[dict]]:
    """Train ITC+ITM; early-stop on eval ITM; restore best-epoch weights."""
    head = ItmHead(stack.cfg.d_enc, rng_for(seed, "stage1/itm-head"))
    freeze_first_layers(stack, cfg.freeze_k, encoders=("image", "text"))
    train, eval_ = split_catalog(catalog, cfg.eval_frac)
    params = dict(stack.stage1_parameters())
    params.update(head.params())
    opt = SGD(list(params.values()), lr=cfg.lr)

    def snapshot() -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in params.items()}

    def restore(state: dict[str, np.ndarray]) -> None:
        for n, p in params.items():
            p.data = state[n].copy()

    history: list[dict] = []
    best_eval = math.inf
    best_state = snapshot()
    stall = 0
    for epoch in range(1, cfg.max_epochs + 1):
        rng = rng_for(seed, f"stage1/epoch/{epoch}")
        order = rng.permutation(len(train))
        epoch_itc, epoch_itm, n_batches = 0.0, 0.0, 0
        for batch in _batches([train[i] for i in order], cfg.batch_size):
            opt.zero_grad()
            loss_itc, sims = itc_loss(stack, batch, cfg.tau)
            mined = mine_hard_negatives(sims, cfg.tau, rng)
            loss_itm = itm_loss(stack, head, batch, mined)
            total = dc.add(loss_itc, loss_itm)
            if not math.isfinite(total.item()):
                raise NonFiniteLossError(
                    f"stage 1 diverged at epoch {epoch}: itc={loss_itc.item()}, itm={loss_itm.item()}"
                )
            total.backward()
            opt.step()
            epoch_itc += loss_itc.item()
            epoch_itm += loss_itm.item()
            n_batches += 1
        eval_itm = _eval_itm(stack, head, eval_, cfg, seed)
        history.append(
            {
                "epoch": epoch,
                "train_itc": epoch_itc / max(n_batches, 1),
                "train_itm": epoch_itm / max(n_batches, 1),
                "eval_itm": eval_itm,
            }
        )
        if eval_itm < best_eval:
            best_eval = eval_itm
            best_state = snapshot()
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    restore(best_state)
    return head, history
