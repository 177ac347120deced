"""Regenerate the golden protocol transcript and its tiny served model.

Writes golden/tiny_model.nnw (a small deterministic NNW1 container) and
golden/transcript.jsonl, one {"send": ..., "expect": ...} pair per line.
Responses are produced by the same handler the server runs, so a replay
through the real process must match bit for bit.
"""

import json
import sys
from base64 import b64encode
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ttbridge.models import load_model  # noqa: E402
from ttbridge.server import handle_request  # noqa: E402

GOLDEN = Path(__file__).resolve().parents[1] / "golden"
HEIGHT = WIDTH = 8
HIDDEN = 12
CLASSES = 4


def write_tiny_model(path):
    rng = np.random.default_rng(20240817)
    flat = HEIGHT * WIDTH * 3
    w1 = rng.normal(0.0, np.sqrt(2.0 / flat), size=(flat, HIDDEN))
    b1 = rng.normal(0.0, 0.05, size=HIDDEN)
    w2 = rng.normal(0.0, np.sqrt(2.0 / HIDDEN), size=(HIDDEN, CLASSES))
    b2 = rng.normal(0.0, 0.05, size=CLASSES)
    header = np.array([HEIGHT, WIDTH, 3, HIDDEN, CLASSES], dtype="<i8")
    payload = b"".join(a.astype("<f8").tobytes() for a in (w1, b1, w2, b2))
    path.write_bytes(b"NNW1" + header.tobytes() + payload)


def image_payload(seed):
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 256, size=HEIGHT * WIDTH * 3, dtype=np.uint8)
    return {
        "image": b64encode(raw.tobytes()).decode("ascii"),
        "height": HEIGHT,
        "width": WIDTH,
    }


def main():
    GOLDEN.mkdir(exist_ok=True)
    model_path = GOLDEN / "tiny_model.nnw"
    write_tiny_model(model_path)
    model = load_model(f"nnw:{model_path}")

    requests = [
        json.dumps({"op": "info"}, sort_keys=True),
        json.dumps({"op": "predict", **image_payload(1)}, sort_keys=True),
        json.dumps({"op": "predict", **image_payload(2)}, sort_keys=True),
        json.dumps({"op": "predict", **image_payload(1)}, sort_keys=True),
        json.dumps(
            {"op": "gradient", "class_index": 2, **image_payload(1)}, sort_keys=True
        ),
        json.dumps(
            {"op": "gradient", "class_index": 0, **image_payload(1)}, sort_keys=True
        ),
        json.dumps(
            {"op": "predict", "image": "QUJD", "height": 4, "width": 4},
            sort_keys=True,
        ),
        json.dumps({"op": "launch"}, sort_keys=True),
        'this is {not} json',
    ]
    with open(GOLDEN / "transcript.jsonl", "w") as fh:
        for line in requests:
            response = json.dumps(handle_request(model, line))
            fh.write(json.dumps({"send": line, "expect": response}) + "\n")
    print(f"wrote {GOLDEN / 'tiny_model.nnw'} and {GOLDEN / 'transcript.jsonl'}")


if __name__ == "__main__":
    main()
