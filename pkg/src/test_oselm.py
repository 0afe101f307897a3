import numpy as np
import pytest

from oselm import (
    ActivationKind,
    HiddenLayer,
    InsufficientInitData,
    NotInitialized,
    OselmError,
    SingularGramWarning,
    Standardizer,
    activate,
    fit,
    init_phase,
    load_model,
    one_hot,
    predict,
    predict_batch,
    save_model,
    sequential_update,
)
from siggen import EventClass

SINUSOID = ActivationKind.SINUSOID


def make_problem(N, n, m, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(scale=1.5, size=(N, n))
    labels = rng.integers(0, m, size=N)
    return X, one_hot(labels, m)


def rel_diff(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def hidden_output(model, X):
    return activate(model.hidden, model.standardizer.transform(X))


def test_activation_examples():
    zero = HiddenLayer.frozen(np.zeros((1, 3)), np.zeros(1), ActivationKind.HARDLIM)
    assert activate(zero, np.array([5.0, -2.0, 1.0]))[0] == 1.0

    sig = HiddenLayer.frozen(np.zeros((1, 3)), np.zeros(1), ActivationKind.SIGMOID)
    assert activate(sig, np.array([1.0, 2.0, 3.0]))[0] == 0.5

    center = np.array([[0.3, -0.2, 0.9]])
    rbf = HiddenLayer.frozen(center, np.array([0.7]), ActivationKind.RBF)
    assert activate(rbf, center[0])[0] == 1.0


def test_activation_batch_shape():
    layer = HiddenLayer.random(7, 4, SINUSOID, np.random.default_rng(0))
    X = np.random.default_rng(1).normal(size=(5, 4))
    out = activate(layer, X)
    assert out.shape == (5, 7)
    np.testing.assert_array_equal(out[2], activate(layer, X[2]))


def test_hidden_layer_is_frozen():
    layer = HiddenLayer.random(5, 3, ActivationKind.RBF, np.random.default_rng(0))
    assert np.all(layer.biases_b > 0)
    with pytest.raises(ValueError):
        layer.weights_a[0, 0] = 1.0
    with pytest.raises(OselmError):
        HiddenLayer.frozen(np.zeros((2, 3)), np.array([0.5, 0.0]), ActivationKind.RBF)


def test_rbf_impact_factors_scaled_by_input_dimension():
    n = 66
    layer = HiddenLayer.random(700, n, ActivationKind.RBF, np.random.default_rng(1))
    scaled = layer.biases_b * n
    assert np.all(scaled > 0.0) and np.all(scaled <= 1.0)
    assert scaled.max() > 0.99 and scaled.min() < 0.01
    assert np.mean(scaled) == pytest.approx(0.5, abs=0.05)

    H = activate(layer, np.random.default_rng(2).normal(size=(200, n)))
    assert H.min() > 1e-6

    sigmoid = HiddenLayer.random(700, n, ActivationKind.SIGMOID, np.random.default_rng(1))
    assert sigmoid.biases_b.min() < -0.9 and sigmoid.biases_b.max() > 0.9


def test_parse_activation():
    assert ActivationKind.parse("Sinusoidal") is SINUSOID
    with pytest.raises(OselmError):
        ActivationKind.parse("tanh")


def test_square_system_exact_fit():
    X, T = make_problem(20, 5, 3)
    model = init_phase(X, T, L=20, activation=SINUSOID, rng_seed=4)
    assert np.max(np.abs(hidden_output(model, X) @ model.beta - T)) < 1e-6
    for row, target in zip(X, T):
        assert predict(model, row)[1] == model.classes[int(np.argmax(target))]


def test_constant_target():
    X, _ = make_problem(40, 5, 3)
    T = one_hot([2] * 40, 3)
    model = init_phase(X, T, L=10, activation=ActivationKind.SIGMOID, rng_seed=1)
    _, predicted = predict_batch(model, X)
    assert np.all(predicted == 2)


def test_init_matches_least_squares():
    X, T = make_problem(50, 5, 3, seed=3)
    model = init_phase(X, T, L=20, activation=SINUSOID, rng_seed=11)
    expected, *_ = np.linalg.lstsq(hidden_output(model, X), T, rcond=None)
    assert rel_diff(model.beta, expected) < 1e-8
    assert model.chunks_seen == 0


def test_insufficient_init_data():
    X, T = make_problem(10, 5, 3)
    with pytest.raises(InsufficientInitData):
        init_phase(X, T, L=20, activation=SINUSOID, rng_seed=0)


def test_singular_gram_uses_ridge():
    X = np.ones((30, 4))
    T = one_hot([0] * 15 + [1] * 15, 2)
    with pytest.warns(SingularGramWarning):
        model = init_phase(X, T, L=10, activation=ActivationKind.HARDLIM, rng_seed=0)
    assert model.ridge_lambda > 0.0
    assert np.all(np.isfinite(model.beta))


def test_zero_innovation_update():
    X, T = make_problem(20, 5, 3)
    model = init_phase(X, T, L=20, activation=SINUSOID, rng_seed=4)
    before = model.beta.copy()
    sequential_update(model, X[:6], hidden_output(model, X[:6]) @ before)
    assert np.max(np.abs(model.beta - before)) < 1e-10
    assert model.chunks_seen == 1


def test_one_by_one_matches_block():
    X, T = make_problem(120, 6, 3, seed=5)
    identity = Standardizer.identity(6)
    a = init_phase(X[:40], T[:40], L=15, activation=SINUSOID, rng_seed=2, standardizer=identity)
    b = init_phase(X[:40], T[:40], L=15, activation=SINUSOID, rng_seed=2, standardizer=identity)
    for i in range(40, 120):
        sequential_update(a, X[i], T[i])
    sequential_update(b, X[40:], T[40:])
    assert rel_diff(a.beta, b.beta) < 1e-6
    assert a.chunks_seen == 80 and b.chunks_seen == 1


@pytest.mark.parametrize("chunk", [1, 7, 50])
def test_sequential_matches_batch(chunk):
    X, T = make_problem(300, 10, 4, seed=8)
    identity = Standardizer.identity(10)
    batch = init_phase(X, T, L=50, activation=SINUSOID, rng_seed=9, standardizer=identity)
    online = init_phase(X[:50], T[:50], L=50, activation=SINUSOID, rng_seed=9, standardizer=identity)
    for start in range(50, 300, chunk):
        sequential_update(online, X[start : start + chunk], T[start : start + chunk])
        np.testing.assert_allclose(online.P, online.P.T, rtol=1e-8, atol=1e-12)
    assert rel_diff(online.beta, batch.beta) < 1e-6


def test_chunk_order_robustness():
    X, T = make_problem(250, 8, 3, seed=12)
    identity = Standardizer.identity(8)
    chunks = [(X[s : s + 50], T[s : s + 50]) for s in range(50, 250, 50)]
    forward = init_phase(X[:50], T[:50], L=30, activation=SINUSOID, rng_seed=1, standardizer=identity)
    backward = init_phase(X[:50], T[:50], L=30, activation=SINUSOID, rng_seed=1, standardizer=identity)
    for Xc, Tc in chunks:
        sequential_update(forward, Xc, Tc)
    for Xc, Tc in reversed(chunks):
        sequential_update(backward, Xc, Tc)
    assert rel_diff(forward.beta, backward.beta) < 1e-6


def test_update_before_init():
    X, T = make_problem(30, 5, 3)
    model = init_phase(X, T, L=10, activation=SINUSOID, rng_seed=0)
    model.P = None
    with pytest.raises(NotInitialized):
        sequential_update(model, X[:2], T[:2])


def test_zero_beta_ties_to_first_class():
    X, T = make_problem(30, 5, 3)
    model = init_phase(
        X, T, L=10, activation=SINUSOID, rng_seed=0, classes=[EventClass.S4, EventClass.S2, EventClass.S9]
    )
    model.beta = np.zeros_like(model.beta)
    scores, label = predict(model, X[0])
    assert np.all(scores == 0.0)
    assert label is EventClass.S4


def test_predict_deterministic():
    X, T = make_problem(60, 5, 3)
    model = init_phase(X, T, L=20, activation=ActivationKind.SIGMOID, rng_seed=0)
    assert predict(model, X[3])[0].tobytes() == predict(model, X[3].copy())[0].tobytes()


def test_fit_schedule():
    X, T = make_problem(230, 6, 3, seed=2)
    labels = [EventClass.first(3)[i] for i in np.argmax(T, axis=1)]
    model = fit(X, labels, EventClass.first(3), L=40, activation=SINUSOID, rng_seed=0, chunk_size=50)
    # 50 init rows, then 180 rows in chunks of 50
    assert model.chunks_seen == 4
    with pytest.raises(InsufficientInitData):
        fit(X[:30], labels[:30], EventClass.first(3), L=40, activation=SINUSOID, rng_seed=0)
    with pytest.raises(OselmError):
        fit(X, [EventClass.S9] * 230, EventClass.first(3), L=40, activation=SINUSOID, rng_seed=0)


def test_model_save_load(tmp_path):
    X, T = make_problem(80, 5, 3)
    model = init_phase(X, T, L=20, activation=ActivationKind.RBF, rng_seed=6)
    sequential_update(model, X[:10], T[:10])

    save_model(model, tmp_path / "model.json")
    restored = load_model(tmp_path / "model.json")
    np.testing.assert_array_equal(predict_batch(restored, X)[0], predict_batch(model, X)[0])
    assert restored.chunks_seen == 1 and restored.seed == 6
    sequential_update(restored, X[10:20], T[10:20])

    save_model(model, tmp_path / "slim.json", include_P=False)
    slim = load_model(tmp_path / "slim.json")
    assert slim.P is None
    with pytest.raises(NotInitialized):
        sequential_update(slim, X[:1], T[:1])
