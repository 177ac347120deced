"""Line-delimited JSON request loop; see PROTOCOL.md for the wire format."""

from __future__ import annotations

import json
import sys
from base64 import b64decode

import numpy as np
import torch


def _decode_image(request) -> torch.Tensor:
    try:
        height = int(request["height"])
        width = int(request["width"])
        raw = b64decode(request["image"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad image payload: {exc}") from exc
    if height < 1 or width < 1 or len(raw) != height * width * 3:
        raise ValueError(
            f"payload length {len(raw)} does not match {height}x{width}x3"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return torch.tensor(pixels, dtype=torch.float64) / 255.0


def handle_request(model, line: str) -> dict:
    """One request line in, one response object out; never raises."""
    try:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"error": f"malformed request line: {exc}"}
        if not isinstance(request, dict):
            return {"error": "request must be a JSON object"}
        op = request.get("op")
        if op == "info":
            return model.info()
        if op == "predict":
            image = _decode_image(request)
            return {"probs": model.probabilities(image).tolist()}
        if op == "gradient":
            image = _decode_image(request)
            class_index = request.get("class_index")
            if not isinstance(class_index, int) or not (
                1 <= class_index <= model.info()["classes"]
            ):
                return {"error": f"class_index {class_index!r} outside 1..C"}
            grad = model.gradient(image, class_index - 1)
            return {"grad": grad.reshape(-1).tolist()}
        return {"error": f"unknown op {op!r}"}
    except Exception as exc:  # a bad request must not kill the server
        return {"error": str(exc)}


def serve(model, stdin=None, stdout=None):
    """Blocking request loop; returns when stdin closes."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    for line in stdin:
        if not line.strip():
            continue
        response = handle_request(model, line)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
