"""Model construction, attention plumbing, parity, causality, checkpoints."""

import math

import numpy as np
import pytest

import citetrend.autodiff as ad
from citetrend.autodiff import Tape, Tensor
from citetrend.features import build_features
from citetrend.graph import DocumentNode, build_graph, split_by_year
from citetrend.models import (CacheShapeMismatch, CausalityViolation,
                              CheckpointError, LogisticModel, MlpBaseline,
                              ModelConfig, ModelError, TrendModel,
                              UnknownCitedNode, build_edge_plan,
                              build_neighborhoods, build_model,
                              count_parameters, gat_parameter_total,
                              load_checkpoint, map_gat_weights_to_mlp,
                              prepare_inputs, save_checkpoint,
                              solve_mlp_widths)

SMALL = ModelConfig(text_units=8, affil_units=6, year_units=2,
                    hidden1=16, hidden2=5, dropout=0.1)


@pytest.fixture
def toy_inputs(toy_graph, toy_split):
    feats = build_features(toy_graph, toy_split, max_text_features=25,
                           max_affiliation_features=10)
    return prepare_inputs(toy_graph, toy_split, feats)


# -- neighborhoods and edge plans ----------------------------------------------


def test_neighborhoods_self_first_then_cited(toy_split):
    hoods = build_neighborhoods(toy_split)
    assert hoods["n6"] == ("n6", "n0", "n2", "n3")
    assert hoods["n8"] == ("n8", "n5")
    assert hoods["n1"] == ("n1",)  # cites nothing inside the window


def test_neighborhoods_reject_prior_edge_leaving_prior_set(toy_split):
    broken = toy_split.replace_edges(
        toy_split.prior_edges + (("n7", "n0"),), toy_split.target_edges)
    with pytest.raises(CausalityViolation):
        build_neighborhoods(broken)


def test_neighborhoods_reject_target_edge_into_target(toy_split):
    broken = toy_split.replace_edges(
        toy_split.prior_edges, toy_split.target_edges + (("n7", "n8"),))
    with pytest.raises(CausalityViolation):
        build_neighborhoods(broken)


def test_edge_plan_groups_and_self_loops(toy_split):
    plan = build_edge_plan(toy_split)
    assert plan.n_prior == 7
    assert plan.n_target == 3
    # each source's first entry is its self-loop
    for local, node_id in enumerate(plan.target_ids):
        rows = np.flatnonzero(plan.src_t == local)
        assert plan.dst_t[rows[0]] == plan.n_prior + local
    # n7 cites n6 and n2, so its group has 3 entries (self + 2)
    n7_local = plan.target_ids.index("n7")
    assert (plan.src_t == n7_local).sum() == 3
    # src groups are ascending (segment kernels rely on grouped-by-source)
    assert (np.diff(plan.src_p) >= 0).all()
    assert (np.diff(plan.src_t) >= 0).all()


# -- parameter parity -----------------------------------------------------------


def test_gat_parameter_total_hand_computed():
    # d_in=202, h1=202, h2=30:
    #   layer1 202*202 + 202 + (2*202+1) = 41411
    #   layer2 202*30  + 30  + (2*30+1)  = 6151
    #   head   30 + 1                    = 31
    assert gat_parameter_total(202, 202, 30) == 47593


def test_solve_mlp_widths_default_shape():
    # hand solve: u1=204 gives 204*203 = 41412 and
    # (47593 - 1 - 41412) / (204 + 2) = 6180 / 206 = 30 exactly
    assert solve_mlp_widths(202, 202, 30) == (204, 30)


def test_solved_widths_satisfy_the_equation():
    for d_in, h1, h2 in [(202, 202, 30), (10, 16, 8), (20, 12, 16)]:
        u1, u2 = solve_mlp_widths(d_in, h1, h2)
        assert u1 >= h1 and u2 >= 1
        total = u1 * (d_in + 1) + u2 * (u1 + 2) + 1
        assert total == gat_parameter_total(d_in, h1, h2)


def test_solver_refuses_impossible_triples():
    from citetrend.models import ParityError
    with pytest.raises(ParityError):
        solve_mlp_widths(50, 64, 16)


def test_full_model_parameter_parity_default_config():
    gnn = TrendModel(text_width=40, affil_width=12)
    mlp = MlpBaseline(text_width=40, affil_width=12)
    assert count_parameters(gnn) == count_parameters(mlp)


def test_parameter_parity_small_config():
    gnn = TrendModel(5, 4, SMALL)
    mlp = MlpBaseline(5, 4, SMALL)
    assert count_parameters(gnn) == count_parameters(mlp)


def test_parity_across_random_feature_widths():
    # the embedding stacks absorb feature-width changes identically in
    # both models, so parity holds for any input dimensions
    rng = np.random.default_rng(7)
    triples = [(202, 202, 30), (10, 16, 8), (20, 12, 16), (10, 64, 16)]
    for i in range(10):
        d_in, h1, h2 = triples[i % len(triples)]
        cfg = ModelConfig(text_units=d_in - 6, affil_units=4, year_units=2,
                          hidden1=h1, hidden2=h2)
        tw = int(rng.integers(5, 60))
        aw = int(rng.integers(2, 30))
        gnn = TrendModel(tw, aw, cfg)
        mlp = MlpBaseline(tw, aw, cfg)
        assert count_parameters(gnn) == count_parameters(mlp)


def test_glorot_init_bounds():
    model = TrendModel(30, 10, SMALL, seed=3)
    W = model.layer1.W.data
    limit = math.sqrt(6.0 / (W.shape[0] + W.shape[1]))
    assert np.abs(W).max() <= limit
    assert np.abs(W).max() > 0.5 * limit  # actually spread out
    assert not model.layer1.b.data.any()  # biases start at zero


def test_build_model_kinds():
    assert isinstance(build_model("gnn", 4, 3, SMALL), TrendModel)
    assert isinstance(build_model("mlp", 4, 3, SMALL), MlpBaseline)
    assert isinstance(build_model("logistic", 4, 3, SMALL), LogisticModel)
    with pytest.raises(ModelError):
        build_model("transformer", 4, 3, SMALL)


def test_same_seed_same_init():
    a = TrendModel(10, 5, SMALL, seed=11)
    b = TrendModel(10, 5, SMALL, seed=11)
    for p, q in zip(a.params, b.params):
        np.testing.assert_array_equal(p.data, q.data)
    c = TrendModel(10, 5, SMALL, seed=12)
    assert any(not np.array_equal(p.data, q.data)
               for p, q in zip(a.params, c.params))


# -- forward passes ---------------------------------------------------------------


def test_forward_shapes(toy_inputs):
    for kind in ("gnn", "mlp", "logistic"):
        model = build_model(kind, toy_inputs.text_width,
                            toy_inputs.affil_width, SMALL)
        logits_p, logits_t = model.forward(toy_inputs, mode="eval")
        assert logits_p.shape == (toy_inputs.plan.n_prior,)
        assert logits_t.shape == (toy_inputs.plan.n_target,)
        only_p, nothing = model.forward(toy_inputs, mode="eval",
                                        include_targets=False)
        assert nothing is None
        np.testing.assert_array_equal(only_p.data, logits_p.data)


def test_eval_mode_is_deterministic(toy_inputs):
    model = TrendModel(toy_inputs.text_width, toy_inputs.affil_width, SMALL)
    a, _ = model.forward(toy_inputs, mode="eval")
    b, _ = model.forward(toy_inputs, mode="eval")
    np.testing.assert_array_equal(a.data, b.data)


def test_train_mode_requires_rng(toy_inputs):
    model = TrendModel(toy_inputs.text_width, toy_inputs.affil_width, SMALL)
    with pytest.raises(ValueError, match="rng"):
        model.forward(toy_inputs, mode="train")
    with pytest.raises(ValueError, match="mode"):
        model.forward(toy_inputs, mode="predict")


def test_train_mode_dropout_reproducible(toy_inputs):
    model = TrendModel(toy_inputs.text_width, toy_inputs.affil_width, SMALL)
    a, _ = model.forward(toy_inputs, mode="train",
                         rng=np.random.default_rng(5))
    b, _ = model.forward(toy_inputs, mode="train",
                         rng=np.random.default_rng(5))
    c, _ = model.forward(toy_inputs, mode="train",
                         rng=np.random.default_rng(6))
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_width_mismatch_rejected(toy_inputs):
    model = TrendModel(toy_inputs.text_width + 1, toy_inputs.affil_width, SMALL)
    with pytest.raises(ad.ShapeMismatch):
        model.forward(toy_inputs, mode="eval")


def test_attention_weights_train_end_to_end(toy_inputs):
    # one training step must reach every parameter, including the
    # attention scorers (their gradients exist and are nonzero somewhere)
    model = TrendModel(toy_inputs.text_width, toy_inputs.affil_width, SMALL)
    y = np.zeros(toy_inputs.plan.n_prior)
    y[:2] = 1.0
    with Tape() as tape:
        logits_p, _ = model.forward(toy_inputs, mode="train",
                                    rng=np.random.default_rng(0),
                                    include_targets=False)
        loss = ad.bce_with_logits(logits_p, y)
        tape.backward(loss)
    assert model.layer1.att_w.grad is not None
    assert np.abs(model.layer1.att_w.grad).max() > 0
    assert model.stacks.text.W.grad is not None


# -- zero-edge equivalence --------------------------------------------------------


def zero_edge_inputs(graph, split, feats):
    return prepare_inputs(graph, split.replace_edges([], []), feats)


def test_mapped_weights_make_gat_equal_mlp(toy_graph, toy_split):
    feats = build_features(toy_graph, toy_split)
    inputs = zero_edge_inputs(toy_graph, toy_split, feats)
    gnn = TrendModel(inputs.text_width, inputs.affil_width, seed=0)
    mlp = MlpBaseline(inputs.text_width, inputs.affil_width, seed=1)
    map_gat_weights_to_mlp(gnn, mlp)
    gp, gt = gnn.forward(inputs, mode="eval")
    mp, mt = mlp.forward(inputs, mode="eval")
    np.testing.assert_allclose(gp.data, mp.data, atol=1e-9)
    np.testing.assert_allclose(gt.data, mt.data, atol=1e-9)


def test_mapping_rejects_too_small_mlp():
    # embed width 10 with hidden (12, 8) solves to dense widths (12, 11),
    # too narrow to hold a GAT built with hidden1=16
    narrow = ModelConfig(text_units=4, affil_units=4, year_units=2,
                         hidden1=12, hidden2=8)
    wide = ModelConfig(text_units=4, affil_units=4, year_units=2,
                       hidden1=16, hidden2=8)
    gnn = TrendModel(4, 3, wide)
    mlp = MlpBaseline(4, 3, narrow)
    with pytest.raises(ModelError):
        map_gat_weights_to_mlp(gnn, mlp)


# -- causality --------------------------------------------------------------------


def test_prior_logits_ignore_target_features(toy_graph, toy_split):
    feats = build_features(toy_graph, toy_split)
    inputs = prepare_inputs(toy_graph, toy_split, feats)
    model = TrendModel(inputs.text_width, inputs.affil_width, SMALL, seed=2)
    base_p, _ = model.forward(inputs, mode="eval")

    mutated = prepare_inputs(toy_graph, toy_split, feats)
    mutated.text_t[...] = 7.5
    mutated.year_t[...] = -2.0
    moved_p, _ = model.forward(mutated, mode="eval")
    np.testing.assert_array_equal(base_p.data, moved_p.data)


def test_prior_stage_ignores_target_edges(toy_graph, toy_split):
    feats = build_features(toy_graph, toy_split)
    inputs_full = prepare_inputs(toy_graph, toy_split, feats)
    fewer = toy_split.replace_edges(toy_split.prior_edges,
                                    toy_split.target_edges[:1])
    inputs_fewer = prepare_inputs(toy_graph, fewer, feats)
    model = TrendModel(inputs_full.text_width, inputs_full.affil_width,
                       SMALL, seed=4)
    a = model.prior_stage(inputs_full)
    b = model.prior_stage(inputs_fewer)
    np.testing.assert_array_equal(a.h1, b.h1)
    np.testing.assert_array_equal(a.proj1, b.proj1)
    np.testing.assert_array_equal(a.proj2, b.proj2)


def test_two_stage_equals_full_forward(toy_graph, toy_split):
    feats = build_features(toy_graph, toy_split)
    inputs = prepare_inputs(toy_graph, toy_split, feats)
    model = TrendModel(inputs.text_width, inputs.affil_width, SMALL, seed=6)
    _, logits_t = model.forward(inputs, mode="eval")
    cache = model.prior_stage(inputs)
    staged = model.predict_targets(cache, inputs.plan.target_ids,
                                   inputs.target_blocks(),
                                   toy_split.target_edges)
    np.testing.assert_array_equal(staged, logits_t.data)


def test_cache_reusable_for_new_targets(toy_graph, toy_split):
    feats = build_features(toy_graph, toy_split)
    inputs = prepare_inputs(toy_graph, toy_split, feats)
    model = TrendModel(inputs.text_width, inputs.affil_width, SMALL, seed=8)
    cache = model.prior_stage(inputs)
    # score a single synthetic newcomer citing n6 and n0
    text = np.zeros((1, inputs.text_width))
    affil = np.zeros((1, inputs.affil_width))
    year = np.array([[1.0, 1.0]])
    out = model.predict_targets(cache, ["fresh"], (text, affil, year),
                                [("fresh", "n6"), ("fresh", "n0")])
    assert out.shape == (1,)
    assert np.isfinite(out).all()


def test_predict_targets_validates(toy_graph, toy_split):
    feats = build_features(toy_graph, toy_split)
    inputs = prepare_inputs(toy_graph, toy_split, feats)
    model = TrendModel(inputs.text_width, inputs.affil_width, SMALL)
    cache = model.prior_stage(inputs)
    blocks = (np.zeros((1, inputs.text_width)),
              np.zeros((1, inputs.affil_width)), np.zeros((1, 2)))
    with pytest.raises(UnknownCitedNode):
        model.predict_targets(cache, ["t"], blocks, [("t", "nope")])
    with pytest.raises(UnknownCitedNode):
        model.predict_targets(cache, ["t"], blocks, [("other", "n0")])
    with pytest.raises(CacheShapeMismatch):
        model.predict_targets(cache, ["t"],
                              (np.zeros((1, inputs.text_width + 1)),
                               blocks[1], blocks[2]), [])


# -- checkpoints ------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["gnn", "mlp", "logistic"])
def test_checkpoint_round_trip_bit_exact(tmp_path, kind, toy_inputs):
    model = build_model(kind, toy_inputs.text_width, toy_inputs.affil_width,
                        SMALL, seed=13)
    # make weights non-initial so the round trip is meaningful
    for p in model.params:
        p.data += 0.25
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.kind == kind
    assert loaded.seed == 13
    assert loaded.config == model.config
    for p, q in zip(model.params, loaded.params):
        np.testing.assert_array_equal(p.data, q.data)
    a, _ = model.forward(toy_inputs, mode="eval")
    b, _ = loaded.forward(toy_inputs, mode="eval")
    np.testing.assert_array_equal(a.data, b.data)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_rejects_truncation(tmp_path):
    model = LogisticModel(4, 3, SMALL)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_rejects_trailing_bytes(tmp_path):
    model = LogisticModel(4, 3, SMALL)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)
