import numpy as np
import pytest

from ubli.cscbli import (PARAM_NAMES, CscbliConfig, SpringParams, _sample_negatives, build_unified,
                         contrastive_loss, contrastive_loss_and_grads, interpolate_rank, interpolated_scores,
                         load_spring_params, map_contextual, save_spring_params, spring_forward, train_cscbli)
from ubli.dictionary import Dictionary
from ubli.preprocess import normalize
from ubli.retrieval import best_matches, rank_targets
from ubli.synthetic import random_orthogonal, spring_fixture


def random_params(d0, d, rng, gamma_scale=1.0):
    return SpringParams(
        w0=rng.standard_normal((d0, d)) * 0.5,
        b0=rng.standard_normal(d) * 0.1,
        w1=rng.standard_normal((d, d)) * 0.5,
        b1=rng.standard_normal(d) * 0.1,
        gamma=rng.standard_normal(d) * gamma_scale,
    )


# --- spring network -----------------------------------------------------------------------

def test_zero_weights_give_zero_offsets(rng):
    np.testing.assert_array_equal(spring_forward(rng.standard_normal((5, 7)), SpringParams.zeros(7, 4)), 0.0)


def test_offsets_in_open_interval(rng):
    out = spring_forward(rng.standard_normal((50, 7)) * 3, random_params(7, 4, rng))
    assert np.all(np.abs(out) < 1.0)


def test_forward_matches_direct_formula(rng):
    a, p = rng.standard_normal((6, 7)), random_params(7, 4, rng)
    np.testing.assert_allclose(spring_forward(a, p), np.tanh(np.tanh(a @ p.w0 + p.b0) @ p.w1 + p.b1))


def test_forward_dimension_mismatch(rng):
    with pytest.raises(ValueError, match="contextual dimension"):
        spring_forward(rng.standard_normal((3, 5)), SpringParams.zeros(7, 4))


def test_init_contract(rng):
    p = SpringParams.init(7, 4, rng)
    np.testing.assert_array_equal(p.gamma, 0.0)
    np.testing.assert_array_equal(p.b0, 0.0)
    assert p.dims == (7, 4)
    assert np.all(np.abs(p.w0) <= 1 / np.sqrt(7)) and np.all(np.abs(p.w1) <= 1 / np.sqrt(4))
    p.check()


def test_check_rejects_bad_params(rng):
    p = SpringParams.zeros(3, 2)
    p.gamma = np.array([np.nan, 0.0])
    with pytest.raises(ValueError, match="not finite"):
        p.check()
    p = SpringParams.zeros(3, 2)
    p.b1 = np.zeros(3)
    with pytest.raises(ValueError, match="shape"):
        p.check()


# --- unified representation ------------------------------------------------------------------

def test_unified_equals_static_at_init(rng):
    e, a = rng.standard_normal((5, 4)), rng.standard_normal((5, 7))
    np.testing.assert_array_equal(build_unified(e, a, SpringParams.init(7, 4, rng)), e)


def test_unified_with_zero_spring_and_unit_gain(rng):
    e, a = rng.standard_normal((5, 4)), rng.standard_normal((5, 7))
    p = SpringParams.zeros(7, 4)
    p.gamma = np.ones(4)
    np.testing.assert_array_equal(build_unified(e, a, p), e)


def test_unified_offset_recomputed(rng):
    e, a, p = rng.standard_normal((6, 4)), rng.standard_normal((6, 7)), random_params(7, 4, rng)
    off = np.tanh(np.tanh(a @ p.w0 + p.b0) @ p.w1 + p.b1)
    np.testing.assert_allclose(build_unified(e, a, p) - e, p.gamma * off, atol=1e-8)


def test_unified_row_mismatch(rng):
    with pytest.raises(ValueError, match="row mismatch"):
        build_unified(rng.standard_normal((5, 4)), rng.standard_normal((6, 7)), SpringParams.zeros(7, 4))


# --- contextual mapping ------------------------------------------------------------------------

def test_map_contextual_identical_inputs(rng):
    a = rng.standard_normal((20, 6))
    mx, my = map_contextual(a, a.copy(), Dictionary.identity(20))
    np.testing.assert_allclose(mx, my, atol=1e-8)


def test_map_contextual_recovers_planted_rotation(rng):
    a = rng.standard_normal((30, 6))
    b = a @ random_orthogonal(6, rng)  # normalization commutes with rotation
    mx, my = map_contextual(a, b, Dictionary.identity(30))
    assert np.linalg.norm(mx - my) < 1e-6
    # the maps are orthogonal, so norms survive
    np.testing.assert_allclose(np.linalg.norm(mx, axis=1), 1.0, atol=1e-6)


# --- loss and gradients ---------------------------------------------------------------------------

def _fd_instance(rng, gamma_scale=1.0):
    n, d0, d = 5, 7, 4
    e_x, e_y = rng.standard_normal((n, d)), rng.standard_normal((n, d))
    a_x, a_y = rng.standard_normal((n, d0)), rng.standard_normal((n, d0))
    px, py = random_params(d0, d, rng, gamma_scale), random_params(d0, d, rng, gamma_scale)
    src, trg = np.array([0, 1, 2, 3, 4]), np.array([2, 0, 4, 1, 3])
    neg = _sample_negatives(trg, n, 2, rng)
    return e_x, e_y, a_x, a_y, px, py, src, trg, neg


@pytest.mark.parametrize("side", ["x", "y"])
def test_gradients_match_central_differences(rng, side):
    e_x, e_y, a_x, a_y, px, py, src, trg, neg = _fd_instance(rng)
    margin = 3.0  # every hinge active, so the loss is smooth around the point
    _, gx, gy = contrastive_loss_and_grads(e_x, e_y, a_x, a_y, px, py, src, trg, neg, margin)
    params, grads = (px, gx) if side == "x" else (py, gy)
    h = 1e-6
    for name in PARAM_NAMES:
        arr = getattr(params, name)
        numeric = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = contrastive_loss(e_x, e_y, a_x, a_y, px, py, src, trg, neg, margin)
            arr[idx] = orig - h
            down = contrastive_loss(e_x, e_y, a_x, a_y, px, py, src, trg, neg, margin)
            arr[idx] = orig
            numeric[idx] = (up - down) / (2 * h)
        np.testing.assert_allclose(grads[name], numeric, rtol=1e-4, atol=1e-8, err_msg=f"{side}.{name}")


def test_loss_matches_loop_reference(rng):
    e_x, e_y, a_x, a_y, px, py, src, trg, neg = _fd_instance(rng)
    for margin in (0.0, 0.3, 2.0):
        fast = contrastive_loss_and_grads(e_x, e_y, a_x, a_y, px, py, src, trg, neg, margin)[0]
        assert fast == pytest.approx(contrastive_loss(e_x, e_y, a_x, a_y, px, py, src, trg, neg, margin), abs=1e-12)


def test_gamma_gradient_nonzero_at_init(rng):
    e_x, e_y, a_x, a_y, px, py, src, trg, neg = _fd_instance(rng, gamma_scale=0.0)
    _, gx, _ = contrastive_loss_and_grads(e_x, e_y, a_x, a_y, px, py, src, trg, neg, 3.0)
    assert np.any(gx["gamma"] != 0)
    np.testing.assert_array_equal(gx["w0"], 0.0)


def test_negatives_never_hit_own_target(rng):
    trg = rng.integers(0, 6, 500)
    neg = _sample_negatives(trg, 6, 4, rng)
    assert neg.min() >= 0 and neg.max() < 6
    assert not np.any(neg == trg[:, None])


def test_loss_decreases_on_fixed_batch():
    f = spring_fixture(n=60, d=8, d0=10, seed=0)
    rng = np.random.default_rng(0)
    px = SpringParams.init(10, 8, rng)
    py = px.copy()
    src = np.arange(60)
    trg = f.perm
    neg = _sample_negatives(trg, 60, 5, rng)
    losses = []
    for _ in range(11):
        loss, gx, gy = contrastive_loss_and_grads(f.e_x, f.e_y, f.a_x, f.a_y, px, py, src, trg, neg, 1.0)
        losses.append(loss)
        for name in PARAM_NAMES:
            getattr(px, name)[...] -= 1e-3 * gx[name]
            getattr(py, name)[...] -= 1e-3 * gy[name]
    assert np.all(np.diff(losses) < 0)


# --- training ------------------------------------------------------------------------------------

def test_margin_zero_changes_nothing(rng):
    """Identical static spaces: each pair is its own nearest neighbour, so no hinge is active."""
    e = normalize(rng.standard_normal((40, 6)))
    a = rng.standard_normal((40, 9))
    cfg = CscbliConfig(margin=0.0, refine_rounds=3, epochs_per_round=2)
    init = SpringParams.init(9, 6, np.random.default_rng(cfg.seed))
    res = train_cscbli(e, e.copy(), a, a.copy(), cfg)
    assert all(loss == 0.0 for loss in res.loss_trace)
    for name in PARAM_NAMES:
        np.testing.assert_array_equal(getattr(res.params_x, name), getattr(init, name))
        np.testing.assert_array_equal(getattr(res.params_y, name), getattr(init, name))
    assert res.dictionary == res.initial_dictionary
    assert res.dictionary == Dictionary(np.arange(40), best_matches(e, e, "csls", 10)[0])


def test_training_beats_static_on_planted_corruption():
    static, trained = [], []
    for seed in range(5):
        f = spring_fixture(seed=seed)
        static.append(np.mean(best_matches(f.e_x, f.e_y, "csls", 10)[0] == f.perm))
        res = train_cscbli(f.e_x, f.e_y, f.a_x, f.a_y, CscbliConfig(seed=seed))
        fwd = dict(res.dictionary.pairs())
        trained.append(np.mean([fwd[i] == f.perm[i] for i in range(len(f.perm))]))
    assert np.median(trained) > np.median(static)


def test_training_stops_when_dictionary_stabilizes():
    f = spring_fixture(n=80, d=8, d0=10, seed=1)
    res = train_cscbli(f.e_x, f.e_y, f.a_x, f.a_y, CscbliConfig(refine_rounds=50, epochs_per_round=5))
    assert res.stabilized and res.rounds < 50
    params_x, params_y, dictionary = res
    assert dictionary is res.dictionary and params_x is res.params_x


def test_training_is_deterministic():
    f = spring_fixture(n=60, d=8, d0=10, seed=2)
    cfg = CscbliConfig(refine_rounds=2, epochs_per_round=2, seed=4)
    a = train_cscbli(f.e_x, f.e_y, f.a_x, f.a_y, cfg)
    b = train_cscbli(f.e_x, f.e_y, f.a_x, f.a_y, cfg)
    assert a.loss_trace == b.loss_trace and a.dictionary == b.dictionary
    np.testing.assert_array_equal(a.params_x.w0, b.params_x.w0)


def test_nan_loss_raises_with_diagnostics(rng):
    e = normalize(rng.standard_normal((10, 4)))
    e_bad = e.copy()
    e_bad[0] = 0.0  # a zero unified row has no direction
    a = rng.standard_normal((10, 5))
    with pytest.raises(FloatingPointError, match="gamma"):
        train_cscbli(e_bad, e, a, a, CscbliConfig(refine_rounds=1, epochs_per_round=1))


def test_training_input_validation(rng):
    e, a = rng.standard_normal((10, 4)), rng.standard_normal((10, 5))
    with pytest.raises(ValueError):
        train_cscbli(e, e, a, rng.standard_normal((10, 6)))
    with pytest.raises(ValueError):
        train_cscbli(e, e, a[:9], a)


def test_config_validation():
    for bad in (dict(learning_rate=0.0), dict(margin=-0.1), dict(lam=-1.0), dict(batch_size=0),
                dict(negatives_per_pair=0), dict(epochs_per_round=0)):
        with pytest.raises(ValueError):
            CscbliConfig(**bad)


# --- interpolation ----------------------------------------------------------------------------------

def test_hand_case_argmax_flips():
    u_x = u_y = np.eye(2)
    a_x, a_y = np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])
    s = interpolated_scores(u_x, u_y, a_x, a_y, 2.0)
    np.testing.assert_allclose(s, [[1, 2], [2, 1]])
    np.testing.assert_array_equal(interpolate_rank(u_x, u_y, a_x, a_y, 2.0, topn=1)[:, 0], [1, 0])
    np.testing.assert_array_equal(interpolate_rank(u_x, u_y, a_x, a_y, 0.0, topn=1)[:, 0], [0, 1])


def test_lambda_zero_is_unified_cosine_ranking(rng):
    u_x, u_y = rng.standard_normal((12, 4)), rng.standard_normal((15, 4))
    a_x, a_y = rng.standard_normal((12, 6)), rng.standard_normal((15, 6))
    np.testing.assert_array_equal(interpolate_rank(u_x, u_y, a_x, a_y, 0.0, topn=15),
                                  rank_targets(u_x, u_y, topn=15))


def test_scores_invariant_to_row_rescaling(rng):
    u_x, u_y = rng.standard_normal((6, 4)), rng.standard_normal((7, 4))
    a_x, a_y = rng.standard_normal((6, 5)), rng.standard_normal((7, 5))
    s = interpolated_scores(u_x, u_y, a_x, a_y, 0.7)
    c1, c2 = rng.uniform(0.1, 10, (6, 1)), rng.uniform(0.1, 10, (7, 1))
    np.testing.assert_allclose(interpolated_scores(u_x * c1, u_y * c2, a_x * c1, a_y * c2, 0.7), s, atol=1e-12)


def test_interpolate_rank_blocks_and_subsets(rng):
    u_x, u_y = rng.standard_normal((20, 4)), rng.standard_normal((9, 4))
    a_x, a_y = rng.standard_normal((20, 5)), rng.standard_normal((9, 5))
    rows = [19, 3, 7]
    full = np.argsort(-interpolated_scores(u_x, u_y, a_x, a_y, 0.4), axis=1, kind="stable")[rows, :4]
    np.testing.assert_array_equal(interpolate_rank(u_x, u_y, a_x, a_y, 0.4, rows, topn=4, block_size=2), full)
    with pytest.raises(ValueError):
        interpolated_scores(u_x, u_y, a_x[:5], a_y, 0.1)


def test_collapse_to_static_ranking(rng):
    e_x, e_y = rng.standard_normal((30, 5)), rng.standard_normal((25, 5))
    a_x, a_y = rng.standard_normal((30, 8)), rng.standard_normal((25, 8))
    p = SpringParams.init(8, 5, rng)
    u_x, u_y = build_unified(e_x, a_x, p), build_unified(e_y, a_y, p)
    np.testing.assert_array_equal(interpolate_rank(u_x, u_y, a_x, a_y, 0.0, topn=25),
                                  rank_targets(e_x, e_y, topn=25))


# --- persistence -------------------------------------------------------------------------------------

def test_spring_bundle_roundtrip(tmp_path, rng):
    px, py = random_params(7, 4, rng), random_params(7, 4, rng)
    save_spring_params(tmp_path, px, py)
    assert (tmp_path / "manifest.txt").read_text().strip() == "7 4"
    qx, qy = load_spring_params(tmp_path)
    for name in PARAM_NAMES:
        np.testing.assert_array_equal(getattr(qx, name), getattr(px, name))
        np.testing.assert_array_equal(getattr(qy, name), getattr(py, name))


def test_spring_bundle_manifest_mismatch(tmp_path, rng):
    save_spring_params(tmp_path, random_params(7, 4, rng), random_params(7, 4, rng))
    (tmp_path / "manifest.txt").write_text("6 4\n")
    with pytest.raises(ValueError, match="manifest"):
        load_spring_params(tmp_path)
