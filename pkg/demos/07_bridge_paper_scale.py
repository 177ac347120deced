"""Paper-scale attack through the bridge (manual; downloads model weights).

Serves a pretrained torchvision classifier as a black box over the stdio
JSON protocol and attacks real photographs with the same loop the desk
tests use. Expect most attacks on ImageNet-scale models to succeed within
a 10^4 query budget, at the cost of minutes per image on a CPU.

Requirements: the companion `ttbridge` package installed, torchvision with
downloaded weights, and a folder of labeled images:

    images/<wnid or class index>/*.png

Run:  python demos/07_bridge_paper_scale.py images/ mobilenet_v3_large vgg19
"""

import sys

import numpy as np

from ttattack import (
    AttackConfig,
    BridgeClassifier,
    BridgeEndpoint,
    ProtesConfig,
    load_labeled_folder,
    tetradat,
)


def main(folder, attacked_name, auxiliary_name):
    attacked = BridgeEndpoint(
        [sys.executable, "-m", "ttbridge", "serve", "--model", attacked_name]
    )
    aux_endpoint = BridgeEndpoint(
        [sys.executable, "-m", "ttbridge", "serve", "--model", auxiliary_name]
    )
    auxiliary = BridgeClassifier(aux_endpoint)
    print("attacked:", attacked.info())
    print("auxiliary:", aux_endpoint.info())

    images, labels, names = load_labeled_folder(folder)
    wins = attempted = 0
    for image, label in zip(images, labels):
        if attempted == 10:
            break
        if attacked.query(image).top_class != label:
            continue  # only attack correctly classified images
        if aux_endpoint.query(image).top_class != label:
            continue
        attempted += 1
        pixels = image.shape[0] * image.shape[1]
        config = AttackConfig(
            num_pixels=max(1, pixels // 10),
            budget=10_000,
            protes=ProtesConfig(seed=attempted),
            attribution_steps=15,
        )
        result = tetradat(attacked, auxiliary, image, config)
        wins += result.success
        print(f"image {attempted}: success={result.success} "
              f"{result.original_class}->{result.adversarial_class} "
              f"queries={result.queries} l1={result.l1:.0f} l2={result.l2:.1f}")
    print(f"\n{wins}/{attempted} successful attacks")
    attacked.close()
    aux_endpoint.close()


if __name__ == "__main__":
    if len(sys.argv) != 4:
        print(__doc__)
        sys.exit(2)
    main(sys.argv[1], sys.argv[2], sys.argv[3])
