import json
import sys
import threading

import numpy as np
import pytest

from ttattack.model import (
    BridgeEndpoint,
    BuiltinClassifier,
    InProcessEndpoint,
    Prediction,
    RemoteModelError,
    TransportError,
    initialize_classifier,
    input_gradient,
    load_desk_classifier,
    predict,
    query_blackbox,
    train_desk_classifier,
)
from ttattack.dataset import make_desk_dataset

from oracles import score_fd_grad


def small_classifier(seed=0):
    return initialize_classifier(seed, input_shape=(4, 4, 3), hidden=16, classes=5)


def test_prediction_invariants():
    pred = Prediction.from_probs(np.array([0.1, 0.6, 0.3]))
    assert pred.top_class == 2
    assert pred.top_score == 0.6
    with pytest.raises(ValueError):
        Prediction.from_probs(np.array([0.5, 0.6]))


def test_zero_weights_give_uniform_probs():
    clf = BuiltinClassifier(
        np.zeros((48, 16)), np.zeros(16), np.zeros((16, 5)), np.zeros(5),
        input_shape=(4, 4, 3),
    )
    pred = predict(clf, np.random.default_rng(0).random((4, 4, 3)))
    assert np.allclose(pred.probs, 0.2, atol=1e-15)


def test_probs_normalized_for_random_inputs():
    clf = small_classifier(1)
    rng = np.random.default_rng(2)
    for _ in range(10):
        pred = predict(clf, rng.random((4, 4, 3)))
        assert abs(pred.probs.sum() - 1.0) <= 1e-9
        assert pred.top_class == int(np.argmax(pred.probs)) + 1


def test_forward_determinism():
    clf = small_classifier(3)
    img = np.random.default_rng(4).random((4, 4, 3))
    a = predict(clf, img).probs
    b = predict(clf, img).probs
    assert np.array_equal(a, b)


def test_predict_rejects_wrong_shape():
    clf = small_classifier(5)
    with pytest.raises(ValueError):
        predict(clf, np.zeros((5, 4, 3)))
    with pytest.raises(ValueError):
        predict(clf, np.full((4, 4, 3), 1.5))


def test_input_gradient_matches_finite_differences():
    clf = small_classifier(6)
    rng = np.random.default_rng(7)
    img = np.clip(rng.random((4, 4, 3)), 0.05, 0.95)
    for class_index in (1, 3):
        grad = input_gradient(clf, img, class_index)
        ref = score_fd_grad(lambda x: clf.class_score(x, class_index), img)
        big = np.abs(ref) > 1e-10
        assert np.all(np.abs(grad[big] - ref[big]) <= 1e-4 * np.abs(ref[big]))


def test_gradients_over_classes_sum_to_zero():
    clf = small_classifier(8)
    img = np.random.default_rng(9).random((4, 4, 3))
    total = sum(input_gradient(clf, img, c) for c in range(1, clf.num_classes + 1))
    assert np.abs(total).max() <= 1e-9


def test_gradient_zero_when_every_unit_is_dead():
    clf = small_classifier(10)
    clf.b1[:] = -1e3  # all hidden pre-activations strictly negative
    img = np.random.default_rng(11).random((4, 4, 3))
    grad = input_gradient(clf, img, 2)
    assert np.all(grad == 0.0)


def test_input_gradient_rejects_black_box_only_models():
    class Opaque:
        def predict_batch(self, images):
            return np.full((images.shape[0], 3), 1 / 3)

    with pytest.raises(TypeError):
        input_gradient(Opaque(), np.zeros((4, 4, 3)), 1)


def test_class_index_range_is_checked():
    clf = small_classifier(12)
    img = np.random.default_rng(13).random((4, 4, 3))
    with pytest.raises(ValueError):
        clf.class_score(img, 0)
    with pytest.raises(ValueError):
        clf.class_score(img, 6)


# -- training and serialization --


def test_desk_training_reaches_90_percent():
    # the canonical seeded run that produced the frozen weights
    clf, accuracy = train_desk_classifier(seed=0)
    assert accuracy[-1] >= 0.90
    frozen = load_desk_classifier()
    assert np.array_equal(clf.w1, frozen.w1) and np.array_equal(clf.b2, frozen.b2)


def test_desk_training_is_deterministic():
    a, _ = train_desk_classifier(seed=2, count=300, epochs=3)
    b, _ = train_desk_classifier(seed=2, count=300, epochs=3)
    assert np.array_equal(a.w1, b.w1) and np.array_equal(a.b2, b.b2)


def test_frozen_desk_model_is_accurate_on_its_training_data():
    clf = load_desk_classifier()
    images, labels = make_desk_dataset(500, seed=0)
    preds = np.argmax(clf.predict_batch(images), axis=1) + 1
    assert np.mean(preds == labels) >= 0.90


def test_weights_roundtrip_and_layout(tmp_path):
    clf = small_classifier(14)
    path = tmp_path / "weights.nnw"
    clf.save(path)
    data = path.read_bytes()
    assert data[:4] == b"NNW1"
    header = np.frombuffer(data, dtype="<i8", count=5, offset=4)
    assert list(header) == [4, 4, 3, 16, 5]
    back = BuiltinClassifier.load(path)
    assert np.array_equal(back.w1, clf.w1)
    assert np.array_equal(back.b1, clf.b1)
    assert np.array_equal(back.w2, clf.w2)
    assert np.array_equal(back.b2, clf.b2)
    assert back.input_shape == (4, 4, 3)
    with pytest.raises(ValueError):
        BuiltinClassifier.from_bytes(b"ZZZZ" + data[4:])


# -- endpoints --


def test_in_process_endpoint_counts_queries():
    clf = small_classifier(15)
    endpoint = InProcessEndpoint(clf)
    rng = np.random.default_rng(16)
    img = rng.random((4, 4, 3))
    for expected in range(1, 6):
        pred = query_blackbox(endpoint, img)
        assert endpoint.queries == expected
    assert np.array_equal(pred.probs, predict(clf, img).probs)
    endpoint.query_batch(rng.random((7, 4, 4, 3)))
    assert endpoint.queries == 12


def test_endpoint_counter_is_thread_safe():
    clf = small_classifier(17)
    endpoint = InProcessEndpoint(clf)
    img = np.random.default_rng(18).random((4, 4, 3))

    def worker():
        for _ in range(50):
            endpoint.query(img)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert endpoint.queries == 400


# A scripted stand-in for a served model: a 99-row image provokes a garbled
# reply, a 99-column image provokes a model error reply.
FAKE_BRIDGE = r"""
import json, sys
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    req = json.loads(line)
    op = req.get("op")
    if req.get("height") == 99:
        print("this is not json")
    elif req.get("width") == 99:
        print(json.dumps({"error": "model exploded"}))
    elif op == "info":
        print(json.dumps({"model_name": "fake", "classes": 4, "height": 4, "width": 4}))
    elif op == "predict":
        print(json.dumps({"probs": [0.1, 0.2, 0.3, 0.4]}))
    elif op == "gradient":
        print(json.dumps({"grad": [0.5] * 48}))
    else:
        print(json.dumps({"error": "unknown op"}))
    sys.stdout.flush()
"""


def fake_bridge_endpoint():
    return BridgeEndpoint([sys.executable, "-c", FAKE_BRIDGE], name="fake")


def test_bridge_endpoint_predict_info_gradient():
    with fake_bridge_endpoint() as ep:
        info = ep.info()
        assert info["classes"] == 4
        img = np.random.default_rng(19).random((4, 4, 3))
        pred = ep.query(img)
        assert pred.top_class == 4
        assert ep.queries == 1
        grad = ep.gradient(img, 2)
        assert grad.shape == (4, 4, 3)
        assert np.all(grad == 0.5)
        assert ep.queries == 1  # gradient requests are not black-box queries


def test_bridge_endpoint_malformed_reply_is_transport_error():
    with fake_bridge_endpoint() as ep:
        ep.query(np.random.default_rng(20).random((4, 4, 3)))
        assert ep.queries == 1
        with pytest.raises(TransportError):
            ep.query(np.zeros((99, 4, 3)))
        assert ep.queries == 1  # failed query was not counted


def test_bridge_endpoint_model_error_is_distinct():
    with fake_bridge_endpoint() as ep:
        with pytest.raises(RemoteModelError):
            ep.query(np.zeros((4, 99, 3)))
        assert ep.queries == 0


def test_bridge_endpoint_dead_process_is_transport_error():
    ep = fake_bridge_endpoint()
    ep.close()
    with pytest.raises(TransportError):
        ep.query(np.zeros((4, 4, 3)))
    assert ep.queries == 0
