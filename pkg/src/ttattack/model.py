"""Classifiers and black-box endpoints.

The built-in classifier is a small dense net (flatten -> dense -> ReLU ->
dense -> softmax) implemented in numpy with analytic input gradients, big
enough for meaningful attribution maps and small enough that whole attack
campaigns run in seconds.  Black-box consumers only ever see the endpoint
interface: query in, class probabilities out, with a query counter.

Class indices are 1-based throughout the public API ({1, ..., C}).
"""

from __future__ import annotations

import json
import subprocess
import threading
from base64 import b64encode
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .binfmt import Reader, pack_floats, pack_ints
from .dataset import make_desk_dataset
from .images import validate_image

__all__ = [
    "Prediction",
    "BuiltinClassifier",
    "predict",
    "input_gradient",
    "query_blackbox",
    "InProcessEndpoint",
    "BridgeEndpoint",
    "BridgeClassifier",
    "TransportError",
    "RemoteModelError",
    "initialize_classifier",
    "train_desk_classifier",
    "load_desk_classifier",
    "DESK_MODEL_RESOURCE",
]

_MAGIC = b"NNW1"
DESK_MODEL_RESOURCE = "desk_model.nnw"


class TransportError(RuntimeError):
    """Bridge connection failure; safe to retry, no query was counted."""


class RemoteModelError(RuntimeError):
    """The served model itself rejected the request."""


@dataclass(frozen=True)
class Prediction:
    """Class probabilities plus the 1-based argmax and its score."""

    probs: np.ndarray
    top_class: int
    top_score: float

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "Prediction":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError(f"probability vector has bad shape {probs.shape}")
        if abs(float(probs.sum()) - 1.0) > 1e-9 or probs.min() < -1e-12:
            raise ValueError("probabilities must be non-negative and sum to 1")
        top = int(np.argmax(probs))
        return cls(probs=probs, top_class=top + 1, top_score=float(probs[top]))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class BuiltinClassifier:
    """Dense net: flatten -> dense(hidden) -> ReLU -> dense(C) -> softmax."""

    def __init__(self, w1, b1, w2, b2, input_shape=(32, 32, 3)):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)
        self.input_shape = tuple(int(v) for v in input_shape)
        flat = int(np.prod(self.input_shape))
        if self.w1.shape[0] != flat or self.w1.shape[1] != self.b1.shape[0]:
            raise ValueError("first layer shapes are not chain-compatible")
        if self.w2.shape[0] != self.b1.shape[0] or self.w2.shape[1] != self.b2.shape[0]:
            raise ValueError("second layer shapes are not chain-compatible")

    @property
    def num_classes(self) -> int:
        return self.w2.shape[1]

    def _flatten(self, image: np.ndarray) -> np.ndarray:
        image = validate_image(image)
        if image.shape != self.input_shape:
            raise ValueError(
                f"image shape {image.shape} does not match model input {self.input_shape}"
            )
        return image.reshape(1, -1)

    def forward(self, flat: np.ndarray) -> np.ndarray:
        """Probabilities for a (batch, H*W*3) array of flattened images."""
        hidden = np.maximum(flat @ self.w1 + self.b1, 0.0)
        return _softmax(hidden @ self.w2 + self.b2)

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 4 or images.shape[1:] != self.input_shape:
            raise ValueError(f"batch shape {images.shape} does not match model input")
        return self.forward(images.reshape(images.shape[0], -1))

    def class_score(self, image: np.ndarray, class_index: int) -> float:
        self._check_class(class_index)
        return float(self.forward(self._flatten(image))[0, class_index - 1])

    def class_score_gradient(self, image: np.ndarray, class_index: int) -> np.ndarray:
        """d probs[class] / d pixels via backprop; shape (H, W, 3)."""
        self._check_class(class_index)
        flat = self._flatten(image)
        grad = self.batch_score_gradient(flat, class_index)
        return grad.reshape(self.input_shape)

    def batch_score_gradient(self, flat: np.ndarray, class_index: int) -> np.ndarray:
        """Gradient of probs[class] for every row of a flattened batch."""
        self._check_class(class_index)
        c = class_index - 1
        pre = flat @ self.w1 + self.b1
        hidden = np.maximum(pre, 0.0)
        probs = _softmax(hidden @ self.w2 + self.b2)
        # softmax jacobian row: dp_c/dz = p_c * (e_c - p)
        dz = -probs * probs[:, c:c + 1]
        dz[:, c] += probs[:, c]
        dh = (dz @ self.w2.T) * (pre > 0.0)
        return dh @ self.w1.T

    def _check_class(self, class_index: int):
        if not (1 <= class_index <= self.num_classes):
            raise ValueError(
                f"class index {class_index} outside 1..{self.num_classes}"
            )

    # -- serialization: magic NNW1, int64 H, W, channels, hidden, classes,
    #    then w1, b1, w2, b2 as little-endian float64 --

    def to_bytes(self) -> bytes:
        h, w, ch = self.input_shape
        header = pack_ints([h, w, ch, self.b1.shape[0], self.num_classes])
        payload = b"".join(pack_floats(a) for a in (self.w1, self.b1, self.w2, self.b2))
        return _MAGIC + header + payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "BuiltinClassifier":
        r = Reader(data, _MAGIC)
        h, w, ch, hidden, classes = r.ints(5)
        flat = h * w * ch
        w1 = r.floats((flat, hidden))
        b1 = r.floats((hidden,))
        w2 = r.floats((hidden, classes))
        b2 = r.floats((classes,))
        r.expect_end()
        return cls(w1, b1, w2, b2, input_shape=(h, w, ch))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "BuiltinClassifier":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def predict(classifier, image: np.ndarray) -> Prediction:
    """Forward pass on one image."""
    image = validate_image(image)
    probs = classifier.predict_batch(image[None])[0]
    return Prediction.from_probs(probs)


def input_gradient(classifier, image: np.ndarray, class_index: int) -> np.ndarray:
    """d probs[class_index] / d pixels; only differentiable classifiers qualify."""
    fn = getattr(classifier, "class_score_gradient", None)
    if fn is None:
        raise TypeError("classifier does not expose input gradients")
    return fn(image, class_index)


def initialize_classifier(
    seed: int,
    input_shape=(32, 32, 3),
    hidden: int = 256,
    classes: int = 10,
    input_mean: float = 0.0,
) -> BuiltinClassifier:
    """He-scaled random weights; used for tests and as the training start.

    `input_mean` folds a constant input centering into the first bias
    (b1 = -mean * sum of w1 rows), which keeps the hidden pre-activations
    zero-mean at the start.  Without it, the large common component of
    near-uniform images can push every ReLU unit dead in the first steps of
    plain gradient descent.
    """
    rng = np.random.default_rng(seed)
    flat = int(np.prod(input_shape))
    w1 = rng.normal(0.0, np.sqrt(2.0 / flat), size=(flat, hidden))
    b1 = -float(input_mean) * w1.sum(axis=0)
    w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, classes))
    b2 = np.zeros(classes)
    return BuiltinClassifier(w1, b1, w2, b2, input_shape=input_shape)


def train_desk_classifier(
    seed: int = 0,
    count: int = 4000,
    epochs: int = 25,
    batch_size: int = 64,
    lr: float = 0.01,
) -> tuple[BuiltinClassifier, list[float]]:
    """Plain mini-batch gradient descent on the synthetic desk dataset.

    Deterministic for a fixed seed.  Returns the trained classifier and the
    per-epoch training accuracy trace.
    """
    images, labels = make_desk_dataset(count, seed)
    flat = images.reshape(count, -1)
    onehot = np.zeros((count, 10))
    onehot[np.arange(count), labels - 1] = 1.0
    clf = initialize_classifier(seed + 1, input_mean=float(flat.mean()))
    rng = np.random.default_rng(seed + 2)
    accuracy = []
    for _ in range(epochs):
        order = rng.permutation(count)
        for start in range(0, count, batch_size):
            rows = order[start:start + batch_size]
            x, y = flat[rows], onehot[rows]
            pre = x @ clf.w1 + clf.b1
            hidden = np.maximum(pre, 0.0)
            probs = _softmax(hidden @ clf.w2 + clf.b2)
            dz = (probs - y) / len(rows)
            gw2 = hidden.T @ dz
            gb2 = dz.sum(axis=0)
            dh = (dz @ clf.w2.T) * (pre > 0.0)
            gw1 = x.T @ dh
            gb1 = dh.sum(axis=0)
            clf.w1 -= lr * gw1
            clf.b1 -= lr * gb1
            clf.w2 -= lr * gw2
            clf.b2 -= lr * gb2
        preds = np.argmax(clf.forward(flat), axis=1) + 1
        accuracy.append(float(np.mean(preds == labels)))
    return clf, accuracy


def load_desk_classifier() -> BuiltinClassifier:
    """The frozen desk model shipped with the package."""
    data = resources.files("ttattack.assets").joinpath(DESK_MODEL_RESOURCE).read_bytes()
    return BuiltinClassifier.from_bytes(data)


# ---------------------------------------------------------------------------
# black-box endpoints


class InProcessEndpoint:
    """Black-box facade over a local classifier with a thread-safe counter."""

    def __init__(self, classifier):
        self._classifier = classifier
        self._lock = threading.Lock()
        self._queries = 0

    @property
    def queries(self) -> int:
        return self._queries

    def _count(self, n: int):
        with self._lock:
            self._queries += n

    def query(self, image: np.ndarray) -> Prediction:
        result = predict(self._classifier, image)
        self._count(1)
        return result

    def query_batch(self, images: np.ndarray) -> np.ndarray:
        probs = self._classifier.predict_batch(images)
        self._count(probs.shape[0])
        return probs


class BridgeEndpoint:
    """Black-box facade over a served model speaking line-delimited JSON.

    One request object per line on the child's stdin, one response per line
    on its stdout.  Transport problems raise TransportError and do not touch
    the query counter; error responses from the model raise RemoteModelError.
    """

    def __init__(self, command, name: str = "bridge"):
        if isinstance(command, str):
            command = command.split()
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self.name = name
        self._lock = threading.Lock()
        self._queries = 0

    @property
    def queries(self) -> int:
        return self._queries

    def close(self):
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _roundtrip(self, request: dict) -> dict:
        line = json.dumps(request, sort_keys=True)
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"bridge pipe failed: {exc}") from exc
        if not reply:
            raise TransportError("bridge closed its output")
        try:
            payload = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise TransportError(f"malformed bridge reply: {reply!r}") from exc
        if not isinstance(payload, dict):
            raise TransportError(f"malformed bridge reply: {reply!r}")
        if "error" in payload:
            raise RemoteModelError(str(payload["error"]))
        return payload

    @staticmethod
    def _encode_image(image: np.ndarray) -> dict:
        image = validate_image(image)
        raw = np.rint(image * 255.0).astype(np.uint8).tobytes()
        return {
            "image": b64encode(raw).decode("ascii"),
            "height": image.shape[0],
            "width": image.shape[1],
        }

    def info(self) -> dict:
        return self._roundtrip({"op": "info"})

    def query(self, image: np.ndarray) -> Prediction:
        request = {"op": "predict", **self._encode_image(image)}
        payload = self._roundtrip(request)
        if "probs" not in payload:
            raise TransportError("predict reply lacks probs")
        with self._lock:
            self._queries += 1
        return Prediction.from_probs(np.asarray(payload["probs"], dtype=np.float64))

    def query_batch(self, images: np.ndarray) -> np.ndarray:
        return np.stack([self.query(img).probs for img in images])

    def gradient(self, image: np.ndarray, class_index: int) -> np.ndarray:
        request = {
            "op": "gradient",
            "class_index": int(class_index),
            **self._encode_image(image),
        }
        payload = self._roundtrip(request)
        if "grad" not in payload:
            raise TransportError("gradient reply lacks grad")
        grad = np.asarray(payload["grad"], dtype=np.float64)
        return grad.reshape(np.asarray(image).shape)


class BridgeClassifier:
    """Differentiable-classifier adapter over a BridgeEndpoint.

    Lets a served model act as the attribution model: scores come from
    predict requests, input gradients from gradient requests.
    """

    def __init__(self, endpoint: BridgeEndpoint):
        self.endpoint = endpoint

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        return self.endpoint.query_batch(images)

    def class_score(self, image: np.ndarray, class_index: int) -> float:
        return float(self.endpoint.query(image).probs[class_index - 1])

    def class_score_gradient(self, image: np.ndarray, class_index: int) -> np.ndarray:
        return self.endpoint.gradient(image, class_index)


def query_blackbox(endpoint, image: np.ndarray) -> Prediction:
    """One counted prediction from any endpoint."""
    return endpoint.query(image)
