"""Pixel-significance maps: plain gradients vs path-integrated gradients.

Renders both maps for one desk image and checks the completeness property
of the integrated map: summed over all entries it approaches the score
difference between the image and the black baseline.
"""

import numpy as np

from ttattack import (
    integrated_gradient_channels,
    integrated_gradients,
    load_desk_classifier,
    make_desk_dataset,
    predict,
    saliency,
    save_attribution,
    select_top_pixels,
)

clf = load_desk_classifier()
images, labels = make_desk_dataset(1, seed=321)
image = images[0]
c = predict(clf, image).top_class
print(f"image class: {c}")

sal = saliency(clf, image, c)
ig = integrated_gradients(clf, image, c, steps=15)
save_attribution(sal, "demo_saliency.png")
save_attribution(ig, "demo_integrated_gradients.png")
print("wrote demo_saliency.png and demo_integrated_gradients.png")

score = clf.class_score(image, c)
baseline_score = clf.class_score(np.zeros_like(image), c)
for steps in (15, 60, 200):
    total = integrated_gradient_channels(clf, image, c, steps=steps).sum()
    gap = abs(total - (score - baseline_score))
    print(f"completeness at {steps:3d} steps: sum {total:+.4f} vs "
          f"f(x)-f(black) {score - baseline_score:+.4f} (gap {gap:.5f})")

top = select_top_pixels(ig, 10)
print("ten most significant pixels (row, col):")
print(top)
