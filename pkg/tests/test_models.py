import math

import numpy as np
import pytest

from gradcheck import mlp_case, rcnn_case
from harvest_har.models import (
    AdamState,
    EnsembleParams,
    MlpConfig,
    RcnnConfig,
    TrainingError,
    adam_step,
    gnb_fit,
    gnb_predict,
)
from harvest_har.models.ensemble import combine, ensemble_components, ensemble_predict
from harvest_har.models.mlp import mlp_forward, mlp_grad, mlp_init, mlp_loss
from harvest_har.models.rcnn import (
    RcnnParams,
    rcnn_forward,
    rcnn_grad,
    rcnn_init,
    rcnn_predict_series,
    rcnn_sequence_probs,
    rcnn_zeros,
)
from harvest_har.models.serialize import ModelFormatError, dumps, load_model, loads, save_model
from harvest_har.models.training import subsequences, train, train_ensemble, train_mlp, train_rcnn

# ------------------------------------------------------------------- GNB


def brute_posterior(x, data, labels):
    """Bayes rule with Gaussian densities, one dimension and one point at a time."""
    joint = []
    for c in (0, 1):
        rows = [r for r, l in zip(data, labels) if l == c]
        prior = len(rows) / len(data)
        logp = math.log(prior)
        for d in range(len(x)):
            col = [r[d] for r in rows]
            mu = sum(col) / len(col)
            var = max(sum((v - mu) ** 2 for v in col) / len(col), 1e-9)
            logp += -0.5 * math.log(2 * math.pi * var) - (x[d] - mu) ** 2 / (2 * var)
        joint.append(logp)
    m = max(joint)
    e = [math.exp(j - m) for j in joint]
    return e[1] / (e[0] + e[1])


def gnb_instance(seed):
    rng = np.random.default_rng(seed)
    d, n = int(rng.integers(1, 6)), int(rng.integers(4, 30))
    data = rng.standard_normal((n, d)) * rng.uniform(0.2, 2.0, d)
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    data[labels == 1] += rng.uniform(-1, 1, d)
    x = rng.standard_normal(d)
    return data, labels, x


def test_gnb_matches_brute_force():
    for seed in range(100):
        data, labels, x = gnb_instance(seed)
        got = gnb_predict(gnb_fit(data, labels), x)
        assert abs(got - brute_posterior(x.tolist(), data.tolist(), labels.tolist())) < 1e-10


def test_gnb_examples():
    p = gnb_fit(np.array([[0.0], [1.0]]), [0, 1])
    assert p.means[:, 0].tolist() == [0.0, 1.0]
    assert p.priors.tolist() == [0.5, 0.5]
    data = np.array([[0.0], [0.2], [5.0], [5.2]])
    dup = gnb_fit(np.vstack([data, data]), [0, 0, 1, 1] * 2)
    one = gnb_fit(data, [0, 0, 1, 1])
    for a, b in zip((one.priors, one.means, one.variances), (dup.priors, dup.means, dup.variances)):
        assert np.allclose(a, b, rtol=0, atol=1e-15)
    assert gnb_predict(one, np.array([5.1])) > 0.99
    assert gnb_predict(one, np.array([2.6])) == pytest.approx(0.5, abs=1e-12)


def test_gnb_single_class():
    with pytest.raises(TrainingError):
        gnb_fit(np.zeros((3, 2)), [1, 1, 1])


# ------------------------------------------------------------------- MLP


def test_mlp_zero_weights():
    params = {k: np.zeros_like(v) for k, v in mlp_init(5, 7, np.random.default_rng(0)).items()}
    assert np.all(mlp_forward(params, np.random.default_rng(1).random((4, 5))) == 0.5)


@pytest.mark.parametrize("seed", range(20))
def test_mlp_gradient(seed):
    assert mlp_case(seed) < 1e-4


def test_mlp_loss_decreases_with_adam():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 2))
    y = (x[:, 0] + x[:, 1] > 0).astype(float)
    params = mlp_init(2, 8, rng)
    state = AdamState(lr=1e-2)
    start = mlp_loss(params, x, y)
    for _ in range(100):
        _, g = mlp_grad(params, x, y)
        params, state = adam_step(params, g, state)
    assert mlp_loss(params, x, y) < 0.5 * start


# ------------------------------------------------------------------ ADAM


def test_adam_zero_gradient_identity():
    p = {"a": np.array([1.0, -2.0]), "b": np.array(3.0)}
    new, state = adam_step(p, {k: np.zeros_like(v) for k, v in p.items()}, AdamState())
    assert state.t == 1
    for k in p:
        assert np.array_equal(new[k], p[k])


def test_adam_first_step():
    g = np.array([0.3, -5.0, 1e-3])
    p = {"w": np.zeros(3)}
    new, _ = adam_step(p, {"w": g}, AdamState(lr=0.01))
    # bias-corrected m / sqrt(v) is g / |g| on the first step
    want = -0.01 * g / (np.abs(g) + 1e-8)
    assert np.allclose(new["w"], want, rtol=1e-12, atol=0)
    assert np.array_equal(np.sign(new["w"]), -np.sign(g))


def test_adam_deterministic_and_pure():
    p = {"w": np.array([1.0, 2.0])}
    g = {"w": np.array([0.5, -0.5])}
    a, sa = adam_step(p, g, AdamState())
    b, sb = adam_step(p, g, AdamState())
    assert np.array_equal(a["w"], b["w"])
    assert np.array_equal(p["w"], [1.0, 2.0])


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState())


# -------------------------------------------------------------- ensemble


def toy_ensemble(seed=0, weight_nb=0.6):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((60, 4))
    y = (x[:, 0] > 0).astype(float)
    return train_ensemble(x, y, MlpConfig(hidden=8, epochs=3, seed=seed), weight_nb).params, x


def test_combine_examples():
    assert combine(1.0, 1.0) == pytest.approx(1.0)
    assert combine(1.0, 0.0) == pytest.approx(0.6)
    assert combine(0.25, 0.75) == pytest.approx(0.6 * 0.25 + 0.4 * 0.75)


def test_ensemble_is_weighted_sum():
    params, x = toy_ensemble()
    p_nb, p_mlp = ensemble_components(params, x)
    p = ensemble_predict(params, x)
    assert np.array_equal(p, 0.6 * p_nb + 0.4 * p_mlp)
    assert np.all((p >= np.minimum(p_nb, p_mlp)) & (p <= np.maximum(p_nb, p_mlp)))
    assert np.all((p > 0) & (p < 1))


def test_ensemble_weight_validation():
    params, _ = toy_ensemble()
    with pytest.raises(ValueError):
        EnsembleParams(params.gnb, params.mlp, params.feature_mean, params.feature_std, 0.7, 0.4)


def test_ensemble_components_reproducible():
    # the naive Bayes part equals a direct fit; the MLP part equals a direct training run
    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 4))
    y = (x[:, 0] > 0).astype(float)
    cfg = MlpConfig(hidden=8, epochs=3, seed=0)
    params = train_ensemble(x, y, cfg).params
    direct = gnb_fit(x, y.astype(int))
    assert np.array_equal(params.gnb.means, direct.means)
    mlp = train_mlp((x - params.feature_mean) / params.feature_std, y, cfg).params
    for k in mlp:
        assert np.array_equal(mlp[k], params.mlp[k])


# ------------------------------------------------------------------ RCNN

TINY = RcnnConfig(in_channels=2, width=8, conv1_filters=1, conv1_kernel=2, pool1=2,
                  conv2_filters=1, conv2_kernel=2, pool2=2, dense=2, hidden=2)


def straight_line_forward(w, x, h, c):
    """Loop-by-loop forward of the tiny network for one window."""
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    C, L = len(x), len(x[0])
    k1 = len(w["conv1_w"][0][0])
    a1 = []
    for t in range(L - k1 + 1):
        s = w["conv1_b"][0]
        for ch in range(C):
            for j in range(k1):
                s += w["conv1_w"][0][ch][j] * x[ch][t + j]
        a1.append(max(s, 0.0))
    p1 = [max(a1[2 * i], a1[2 * i + 1]) for i in range(len(a1) // 2)]
    k2 = len(w["conv2_w"][0][0])
    a2 = []
    for t in range(len(p1) - k2 + 1):
        s = w["conv2_b"][0]
        for j in range(k2):
            s += w["conv2_w"][0][0][j] * p1[t + j]
        a2.append(max(s, 0.0))
    p2 = [max(a2[2 * i], a2[2 * i + 1]) for i in range(len(a2) // 2)]
    d = [max(sum(p2[i] * w["dense_w"][i][u] for i in range(len(p2))) + w["dense_b"][u], 0.0)
         for u in range(len(w["dense_b"]))]
    H = len(h)
    z = [w["lstm_b"][g] + sum(d[u] * w["lstm_wx"][u][g] for u in range(len(d)))
         + sum(h[u] * w["lstm_wh"][u][g] for u in range(H)) for g in range(4 * H)]
    i = [sig(v) for v in z[:H]]
    f = [sig(v) for v in z[H:2 * H]]
    g = [math.tanh(v) for v in z[2 * H:3 * H]]
    o = [sig(v) for v in z[3 * H:]]
    c2 = [f[u] * c[u] + i[u] * g[u] for u in range(H)]
    h2 = [o[u] * math.tanh(c2[u]) for u in range(H)]
    p = sig(sum(h2[u] * w["out_w"][u] for u in range(H)) + w["out_b"])
    return p, h2, c2


def test_rcnn_zero_params():
    params = rcnn_zeros(RcnnConfig())
    p, (h, c) = rcnn_forward(params, np.zeros((4, 256)))
    assert p == 0.5
    assert not h.any() and not c.any()


def perturbed(cfg, seed):
    rng = np.random.default_rng(seed)
    params = rcnn_init(cfg, rng)
    return params.with_weights({k: v + 0.3 * rng.standard_normal(v.shape) for k, v in params.weights.items()})


def test_rcnn_carry_matters():
    params = perturbed(TINY, 1)
    x = np.random.default_rng(2).standard_normal((2, 8))
    p1, carry = rcnn_forward(params, x)
    p2, _ = rcnn_forward(params, x, carry)
    assert p1 != p2
    # a fresh carry makes the step a pure function of the window
    assert rcnn_forward(params, x)[0] == p1


@pytest.mark.parametrize("seed", range(5))
def test_rcnn_matches_straight_line(seed):
    rng = np.random.default_rng(seed + 100)
    params = perturbed(TINY, seed)
    w = {k: v.tolist() for k, v in params.weights.items()}
    h, c = [0.0, 0.0], [0.0, 0.0]
    carry = None
    for _ in range(3):
        x = rng.standard_normal((2, 8))
        want, h, c = straight_line_forward(w, x.tolist(), h, c)
        got, carry = rcnn_forward(params, x, carry)
        assert got == pytest.approx(want, abs=1e-12)
        assert np.allclose(carry[0], h, atol=1e-12) and np.allclose(carry[1], c, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_rcnn_gradient(seed):
    assert rcnn_case(seed) < 1e-4


def test_rcnn_pool_routing_subgradient():
    # conv1 weight taps see only the pooled-away input positions when the
    # routed positions carry no signal; their gradient must be exactly zero
    cfg = TINY
    rng = np.random.default_rng(0)
    params = rcnn_init(cfg, rng)
    w = dict(params.weights)
    w["conv1_w"] = np.zeros((1, 2, 2))
    w["conv1_w"][0, 0, 0] = 1.0
    w["conv1_b"] = np.zeros(1)
    params = params.with_weights(w)
    x = np.zeros((1, 1, 2, 8))
    # conv1 output equals x[0, t]; make even positions win every pool
    x[0, 0, 0, ::2] = np.arange(4) + 1.0
    _, grads = rcnn_grad(params, x, np.array([[1.0]]))
    # bumping odd-position inputs changes nothing routed; numeric check for the channel-1 taps
    eps = 1e-6
    for j in range(2):
        bumped = dict(w)
        bumped["conv1_w"] = w["conv1_w"].copy()
        bumped["conv1_w"][0, 1, j] += eps
        lp = rcnn_grad(params.with_weights(bumped), x, np.array([[1.0]]))[0]
        bumped["conv1_w"][0, 1, j] -= 2 * eps
        lm = rcnn_grad(params.with_weights(bumped), x, np.array([[1.0]]))[0]
        assert grads["conv1_w"][0, 1, j] == pytest.approx((lp - lm) / (2 * eps), abs=1e-9)
        # channel 1 is all zero, so its taps get an exactly zero subgradient
        assert grads["conv1_w"][0, 1, j] == 0.0


def test_rcnn_loss_scale_linearity():
    rng = np.random.default_rng(3)
    params = rcnn_init(TINY, rng)
    x = rng.standard_normal((2, 3, 2, 8))
    y = rng.random((2, 3))
    l1, g1 = rcnn_grad(params, x, y)
    l2, g2 = rcnn_grad(params, x, y, scale=2.0)
    assert l2 == pytest.approx(2 * l1)
    for k in g1:
        assert np.allclose(g2[k], 2 * g1[k], rtol=1e-14, atol=0)


def test_rcnn_sequence_matches_stepwise():
    rng = np.random.default_rng(4)
    params = rcnn_init(TINY, rng)
    x = rng.standard_normal((1, 5, 2, 8))
    probs = rcnn_sequence_probs(params, x)[0]
    carry = None
    for t in range(5):
        p, carry = rcnn_forward(params, x[0, t], carry)
        assert p == pytest.approx(probs[t], abs=1e-14)


def test_rcnn_series_context():
    rng = np.random.default_rng(5)
    params = rcnn_init(TINY, rng)
    x = rng.standard_normal((10, 2, 8))
    out = rcnn_predict_series(params, x, context=3)
    # window 6 is scored after windows 4 and 5 from a zero carry
    assert out[6] == pytest.approx(rcnn_sequence_probs(params, x[None, 4:7])[0, -1], abs=1e-14)
    assert out[1] == pytest.approx(rcnn_sequence_probs(params, x[None, :2])[0, -1], abs=1e-14)
    assert np.all((out > 0) & (out < 1))


def test_subsequences():
    assert subsequences(10, 4).tolist() == [0, 4]
    assert subsequences(10, 4, 2).tolist() == [2, 6]
    assert subsequences(9, 4, 2).tolist() == [2]
    assert subsequences(3, 4).tolist() == []


# -------------------------------------------------------------- training


def toy_windows(seed=0, n=48):
    rng = np.random.default_rng(seed)
    y = (np.arange(n) // 6 % 2).astype(float)
    x = rng.standard_normal((n, 2, 8)) * (0.2 + y[:, None, None])
    return x, y


def test_rcnn_training_reduces_loss_and_is_deterministic():
    x, y = toy_windows()
    cfg = RcnnConfig(**{**TINY.__dict__, "epochs": 15, "truncation": 4, "batch_size": 4, "lr": 1e-2})
    a = train_rcnn(x, y, cfg)
    b = train_rcnn(x, y, cfg)
    assert a.loss_trace[-1] < a.loss_trace[0]
    assert dumps(a.params) == dumps(b.params)


def test_ensemble_training_reduces_loss_and_is_deterministic():
    x, y = toy_windows()
    feats = x.reshape(x.shape[0], -1)
    cfg = MlpConfig(hidden=16, epochs=10, seed=1)
    a = train("ensemble", x, y, cfg, features=feats)
    b = train("ensemble", x, y, cfg, features=feats)
    assert a.loss_trace[-1] < a.loss_trace[0]
    assert dumps(a.params) == dumps(b.params)


@pytest.mark.parametrize("kind", ["ensemble", "rcnn"])
def test_single_class_training_rejected(kind):
    x, _ = toy_windows()
    with pytest.raises(TrainingError):
        train(kind, x, np.ones(x.shape[0]), RcnnConfig(**{**TINY.__dict__, "epochs": 1}) if kind == "rcnn" else None)


def test_unknown_kind():
    with pytest.raises(ValueError):
        train("svm", np.zeros((2, 4, 256)), [0, 1])


# --------------------------------------------------------- serialization


def test_rcnn_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    params = rcnn_init(TINY, rng, rng.random(2), rng.uniform(1, 2, 2))
    save_model(params, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert isinstance(back, RcnnParams) and back.config == params.config
    for k in params.weights:
        assert np.array_equal(back.weights[k], params.weights[k])
    assert np.array_equal(back.input_std, params.input_std)
    assert dumps(back) == dumps(params)


def test_ensemble_round_trip():
    params, x = toy_ensemble(weight_nb=0.55)
    back = loads(dumps(params))
    assert back.weight_nb == 0.55
    assert np.array_equal(ensemble_predict(back, x), ensemble_predict(params, x))


def test_corrupt_model_rejected():
    params, _ = toy_ensemble()
    blob = dumps(params)
    with pytest.raises(ModelFormatError):
        loads(b"garbage")
    with pytest.raises(ModelFormatError):
        loads(blob[:-8])
    with pytest.raises(ModelFormatError):
        loads(blob + b"\0" * 8)
    with pytest.raises(ModelFormatError):
        loads(blob.replace(b"MODEL 1", b"MODEL 9", 1))
