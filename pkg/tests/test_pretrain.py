import math

import numpy as np
import pytest
from scipy import stats

from prodalign import diffcore as dc
from prodalign.datagen import generate_catalog
from prodalign.encoders import EncoderConfig, EncoderStack
from prodalign.pretrain import (
    ItmHead,
    Stage1Config,
    itc_from_sims,
    itc_loss,
    itm_from_logits,
    itm_loss,
    mine_hard_negatives,
    train_stage1,
)
from prodalign.seeding import rng_for

TINY = EncoderConfig(d_img=8, d_enc=10, d_proj=5, n_blocks=2, n_slots=2, img_hidden=8)


def test_itc_uniform_similarities_is_log_b():
    for b in (2, 5, 8):
        sims = dc.constant(np.ones((b, b)))
        assert itc_from_sims(sims, tau=0.1).item() == pytest.approx(math.log(b), abs=1e-12)


def test_itc_perfectly_separated_near_zero():
    # B=2 with diagonal +1 and off-diagonal -1 is geometrically realizable
    sims = dc.constant(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert itc_from_sims(sims, tau=0.1).item() < 1e-8


def test_itc_batch_of_one_errors():
    cat = generate_catalog(8, 2, seed=0, d_img=8)
    stack = EncoderStack(cat.vocabulary(), TINY, seed=1)
    with pytest.raises(ValueError):
        itc_loss(stack, cat.products[:1], tau=0.1)


def test_itc_grad_check():
    cat = generate_catalog(8, 2, seed=0, d_img=8)
    stack = EncoderStack(cat.vocabulary(), TINY, seed=1)
    batch = cat.products[:3]
    params = list(stack.stage1_parameters().values())

    def f():
        loss, _ = itc_loss(stack, batch, tau=0.2)
        return loss

    assert dc.grad_check(f, params, entries_per_param=4) < 1e-4


def test_mining_uniform_row_is_uniform():
    rng = rng_for(0, "mining-uniform")
    b = 5
    sims = np.zeros((b, b))
    counts = np.zeros(b)
    draws = 10000
    for _ in range(draws):
        text_neg, _ = mine_hard_negatives(sims, tau=0.1, rng=rng)
        counts[text_neg[0]] += 1
    assert counts[0] == 0  # diagonal masked
    expected = np.full(b - 1, draws / (b - 1))
    chi = stats.chisquare(counts[1:], expected)
    assert chi.pvalue > 0.01


def test_mining_peaks_on_dominant_similarity():
    rng = rng_for(1, "mining-peak")
    b = 6
    sims = np.zeros((b, b))
    sims[0, 3] = 1.0  # >> others at tau=0.1
    hits = 0
    draws = 10000
    for _ in range(draws):
        text_neg, _ = mine_hard_negatives(sims, tau=0.1, rng=rng)
        hits += text_neg[0] == 3
    assert hits / draws > 0.95


def test_mining_never_samples_diagonal():
    rng = rng_for(2, "mining-diag")
    sims = np.full((4, 4), 5.0)  # diagonal would dominate if unmasked
    for _ in range(200):
        text_neg, img_neg = mine_hard_negatives(sims, tau=0.05, rng=rng)
        assert all(text_neg[i] != i for i in range(4))
        assert all(img_neg[j] != j for j in range(4))


def test_mining_deterministic_given_seed():
    sims = np.random.default_rng(3).normal(size=(8, 8))
    a = mine_hard_negatives(sims, 0.1, rng_for(7, "m"))
    b = mine_hard_negatives(sims, 0.1, rng_for(7, "m"))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_itm_uniform_logits_is_log_two():
    logits = dc.constant(np.zeros((12, 2)))
    labels = np.array([1] * 4 + [0] * 8)
    assert itm_from_logits(logits, labels).item() == pytest.approx(math.log(2), abs=1e-12)


def test_itm_separating_head_loss_vanishes():
    margin = 40.0
    labels = np.array([1, 0, 1, 0])
    logits = np.zeros((4, 2))
    logits[labels == 1, 1] = margin
    logits[labels == 0, 0] = margin
    assert itm_from_logits(dc.constant(logits), labels).item() < 1e-12


def test_itm_grad_check():
    cat = generate_catalog(8, 2, seed=0, d_img=8)
    stack = EncoderStack(cat.vocabulary(), TINY, seed=2)
    head = ItmHead(TINY.d_enc, rng_for(3, "head"))
    batch = cat.products[:4]
    params = list(stack.stage1_parameters().values()) + list(head.params().values())
    mined = (np.array([1, 2, 3, 0]), np.array([2, 3, 0, 1]))

    def f():
        return itm_loss(stack, head, batch, mined)

    assert dc.grad_check(f, params, entries_per_param=4) < 1e-4


@pytest.fixture(scope="module")
def trained():
    cat = generate_catalog(60, 4, seed=11, d_img=8)
    stack = EncoderStack(cat.vocabulary(), TINY, seed=11)
    cfg = Stage1Config(batch_size=16, max_epochs=60, patience=12, freeze_k=1)
    head, history = train_stage1(stack, cat, cfg, seed=11)
    return cat, stack, head, history


def test_stage1_history_and_early_stop_restores_best(trained):
    cat, stack, head, history = trained
    evals = [h["eval_itm"] for h in history]
    best_epoch = history[int(np.argmin(evals))]["epoch"]
    assert best_epoch <= history[-1]["epoch"]
    # restored weights reproduce the best epoch's eval loss
    from prodalign.pretrain import _eval_itm, split_catalog

    _, eval_products = split_catalog(cat, 0.1)
    cfg = Stage1Config(batch_size=16, tau=0.2, freeze_k=1)
    now = _eval_itm(stack, head, eval_products, cfg, seed=11)
    assert now == pytest.approx(min(evals), abs=1e-9)


def test_stage1_train_itc_drops(trained):
    _, _, _, history = trained
    assert history[-1]["train_itc"] < history[0]["train_itc"]


def test_stage1_frozen_layers_untouched():
    cat = generate_catalog(30, 3, seed=13, d_img=8)
    stack = EncoderStack(cat.vocabulary(), TINY, seed=13)
    before = stack.snapshot_bytes(["text.emb"] + [f"text.block0.{n}" for n in ["wq.w", "wk.w", "wv.w", "wo.w"]])
    train_stage1(stack, cat, Stage1Config(batch_size=8, max_epochs=2, freeze_k=1), seed=13)
    after = stack.snapshot_bytes(list(before))
    assert before == after


def test_stage1_patience_one_stops_after_two_worsening_epochs(monkeypatch):
    cat = generate_catalog(30, 3, seed=17, d_img=8)
    stack = EncoderStack(cat.vocabulary(), TINY, seed=17)
    import prodalign.pretrain as pt

    fake_evals = iter([1.0, 2.0, 3.0, 4.0])
    monkeypatch.setattr(pt, "_eval_itm", lambda *a, **k: next(fake_evals))
    _, history = train_stage1(stack, cat, Stage1Config(batch_size=8, max_epochs=10, patience=1, freeze_k=1), seed=17)
    assert len(history) == 2


def test_stage1_alignment_margin(trained):
    cat, stack, _, _ = trained
    from prodalign.pretrain import split_catalog

    _, eval_products = split_catalog(cat, 0.1)
    if len(eval_products) < 4:
        eval_products = cat.products[:12]
    img = np.stack([stack.itc_image_embed(p).data for p in eval_products])
    txt = np.stack([stack.itc_text_embed(p.title).data for p in eval_products])
    sims = img @ txt.T
    match = np.mean(np.diag(sims))
    mismatch = (sims.sum() - np.trace(sims)) / (sims.size - len(sims))
    assert match - mismatch > 0.1
