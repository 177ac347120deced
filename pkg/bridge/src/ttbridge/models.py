"""Served model wrappers: dense NNW1 nets and torchvision classifiers.

Every wrapper exposes the same three calls working on raw [0, 1] RGB float
tensors of shape (H, W, 3): info(), probabilities(x), gradient(x, class0).
Model-specific preprocessing happens inside the wrapper.
"""

from __future__ import annotations

import numpy as np
import torch

_I8 = np.dtype("<i8")
_F8 = np.dtype("<f8")


class DenseNet:
    """flatten -> linear -> ReLU -> linear -> softmax, from an NNW1 container."""

    def __init__(self, path):
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != b"NNW1":
            raise ValueError(f"not an NNW1 container: {path}")
        header = np.frombuffer(data, dtype=_I8, count=5, offset=4)
        h, w, ch, hidden, classes = (int(v) for v in header)
        offset = 4 + 5 * 8
        flat = h * w * ch

        def take(shape):
            nonlocal offset
            count = int(np.prod(shape))
            arr = np.frombuffer(data, dtype=_F8, count=count, offset=offset)
            offset += count * 8
            return torch.tensor(arr.reshape(shape), dtype=torch.float64)

        self.w1 = take((flat, hidden))
        self.b1 = take((hidden,))
        self.w2 = take((hidden, classes))
        self.b2 = take((classes,))
        if offset != len(data):
            raise ValueError("trailing bytes in NNW1 container")
        self.name = f"nnw:{path}"
        self.height, self.width, self.channels = h, w, ch
        self.classes = classes

    def info(self):
        return {
            "model_name": self.name,
            "classes": self.classes,
            "height": self.height,
            "width": self.width,
        }

    def _forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"model expects {(self.height, self.width, self.channels)}, got {tuple(x.shape)}"
            )
        hidden = torch.relu(x.reshape(1, -1) @ self.w1 + self.b1)
        return torch.softmax(hidden @ self.w2 + self.b2, dim=1)[0]

    def probabilities(self, x: torch.Tensor) -> np.ndarray:
        with torch.no_grad():
            return self._forward(x.to(torch.float64)).numpy()

    def gradient(self, x: torch.Tensor, class0: int) -> np.ndarray:
        x = x.to(torch.float64).clone().requires_grad_(True)
        probs = self._forward(x)
        probs[class0].backward()
        return x.grad.numpy()


class TorchvisionNet:
    """A pretrained torchvision classifier with its canonical preprocessing."""

    def __init__(self, name):
        from torchvision.models import get_model, get_model_weights

        weights = get_model_weights(name).DEFAULT
        self.model = get_model(name, weights=weights).eval()
        self.transform = weights.transforms()
        self.name = name
        self.classes = len(weights.meta.get("categories", [])) or 1000

    def info(self):
        # any input size works; the transform resizes internally
        return {
            "model_name": self.name,
            "classes": self.classes,
            "height": 0,
            "width": 0,
        }

    def _forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (H, W, 3) in [0, 1] -> (1, 3, H, W) -> preprocessing -> logits
        chw = x.permute(2, 0, 1).unsqueeze(0).to(torch.float32)
        logits = self.model(self.transform(chw))
        return torch.softmax(logits, dim=1)[0]

    def probabilities(self, x: torch.Tensor) -> np.ndarray:
        with torch.no_grad():
            return self._forward(x).numpy().astype(np.float64)

    def gradient(self, x: torch.Tensor, class0: int) -> np.ndarray:
        x = x.to(torch.float32).clone().requires_grad_(True)
        probs = self._forward(x)
        probs[class0].backward()
        return x.grad.numpy().astype(np.float64)


def load_model(name: str):
    if name.startswith("nnw:"):
        return DenseNet(name[4:])
    return TorchvisionNet(name)
