import numpy as np
import pytest

from prodalign import diffcore as dc
from prodalign.checkpoint import CheckpointError, load_tensors, save_tensors
from prodalign.datagen import generate_catalog
from prodalign.diffcore import SGD
from prodalign.encoders import EncoderConfig, EncoderStack, freeze_first_layers, init_query_from_text

TINY = EncoderConfig(d_img=8, d_enc=12, d_proj=6, n_blocks=2, n_slots=2, img_hidden=10)


@pytest.fixture()
def catalog():
    return generate_catalog(20, 4, seed=1, d_img=8)


@pytest.fixture()
def stack(catalog):
    return EncoderStack(catalog.vocabulary(), TINY, seed=5)


def test_encode_product_deterministic(stack, catalog):
    p = catalog.products[0]
    c1 = stack.encode_product(p)
    c2 = stack.encode_product(p)
    assert np.array_equal(c1, c2)


def test_image_features_change_c(stack, catalog):
    p = catalog.products[0]
    base = stack.encode_product(p)
    import copy

    shifted = copy.deepcopy(p)
    shifted.image_features = p.image_features + 0.5
    assert not np.allclose(stack.encode_product(shifted), base)


def test_title_changes_c(stack, catalog):
    a, b = catalog.products[0], catalog.products[1]
    import copy

    swapped = copy.deepcopy(a)
    swapped.title = b.title
    assert not np.allclose(stack.encode_product(swapped), stack.encode_product(a))


def test_empty_title_errors(stack):
    with pytest.raises(ValueError):
        stack.encode_text([])


def test_oov_token_uses_unk(stack):
    a = stack.encode_text(["definitely-not-in-vocab"])
    b = stack.encode_text(["also-not-in-vocab"])
    assert np.array_equal(a, b)  # both collapse to the UNK embedding


def test_projections_unit_norm(stack, catalog):
    p = catalog.products[0]
    for vec in (
        stack.product_embed(p).data,
        stack.query_embed(["t0", "t1"]).data,
        stack.itc_image_embed(p).data,
        stack.itc_text_embed(p.title).data,
    ):
        assert abs(np.linalg.norm(vec) - 1.0) <= 1e-9


def test_batch_order_independence(stack, catalog):
    outs = [stack.encode_product(p) for p in catalog.products[:5]]
    rev = [stack.encode_product(p) for p in reversed(catalog.products[:5])]
    for a, b in zip(outs, reversed(rev)):
        assert np.array_equal(a, b)


def _one_sgd_step(stack, catalog, params):
    opt = SGD(list(params.values()), lr=0.05)
    opt.zero_grad()
    loss = dc.tsum(dc.mul(stack.product_embed(catalog.products[0]), stack.query_embed(["t1"])))
    loss = dc.add(loss, dc.tsum(stack.itc_image_embed(catalog.products[1])))
    loss = dc.add(loss, dc.tsum(stack.itc_text_embed(catalog.products[1].title)))
    loss.backward()
    opt.step()


def test_freeze_boundary_validation(stack):
    with pytest.raises(ValueError):
        freeze_first_layers(stack, TINY.n_blocks + 1)
    freeze_first_layers(stack, 0)
    assert not any(p.frozen for p in stack.named_parameters().values())


def test_freeze_first_layers_snapshot(stack, catalog):
    freeze_first_layers(stack, 1)
    frozen_names = [n for n, p in stack.named_parameters().items() if p.frozen]
    assert "text.emb" in frozen_names
    assert any(n.startswith("text.block0") for n in frozen_names)
    assert not any(n.startswith("text.block1") for n in frozen_names)

    before = stack.snapshot_bytes()
    _one_sgd_step(stack, catalog, stack.named_parameters())
    after = stack.snapshot_bytes()
    for name, p in stack.named_parameters().items():
        if p.frozen:
            assert before[name] == after[name], name
    # something unfrozen did move
    assert any(before[n] != after[n] for n in before)


def test_freeze_all_blocks_leaves_heads_training(stack, catalog):
    freeze_first_layers(stack, TINY.n_blocks)
    before = stack.snapshot_bytes()
    _one_sgd_step(stack, catalog, stack.named_parameters())
    after = stack.snapshot_bytes()
    for name in before:
        if name.startswith(("text.emb", "text.block", "image.l0", "image.l1")):
            assert before[name] == after[name], name
    assert any(before[n] != after[n] for n in before if n.startswith("proj."))


def test_init_query_from_text(stack):
    init_query_from_text(stack)
    tokens = ["t3", "t17", "t999"]
    assert np.array_equal(stack.encode_query(tokens), stack.encode_text(tokens))
    # deep copy: mutating query weights leaves text weights intact
    text_before = stack.text.emb.data.copy()
    stack.query.emb.data += 1.0
    assert np.array_equal(stack.text.emb.data, text_before)
    assert not np.array_equal(stack.encode_query(tokens), stack.encode_text(tokens))


def test_query_and_text_shapes_match(stack):
    tp = stack.text.params("e")
    qp = stack.query.params("e")
    assert set(tp) == set(qp)
    for name in tp:
        assert tp[name].shape == qp[name].shape


def test_state_dict_round_trip(stack, catalog):
    p = catalog.products[0]
    before = stack.encode_product(p)
    state = stack.state_dict()
    other = EncoderStack(catalog.vocabulary(), TINY, seed=99)
    assert not np.allclose(other.encode_product(p), before)
    other.load_state_dict(state)
    assert np.array_equal(other.encode_product(p), before)


def test_checkpoint_round_trip(tmp_path, stack):
    state = stack.state_dict()
    path = tmp_path / "weights.dclp"
    save_tensors(path, state)
    back = load_tensors(path)
    assert set(back) == set(state)
    for name in state:
        assert back[name].tobytes() == state[name].tobytes()


def test_checkpoint_magic_and_version(tmp_path):
    path = tmp_path / "bad.dclp"
    path.write_bytes(b"NOPE" + b"\x00" * 8)
    with pytest.raises(CheckpointError):
        load_tensors(path)
    path.write_bytes(b"DCLP" + (99).to_bytes(4, "little"))
    with pytest.raises(CheckpointError):
        load_tensors(path)


def test_stage2_param_partition(stack):
    s2 = set(stack.stage2_parameters())
    assert all(n.startswith(("proj.p", "proj.q", "query")) for n in s2)
    s1 = set(stack.stage1_parameters())
    assert not (s1 & s2)
