"""One full black-box attack on the desk classifier, traced run by run.

The optimizer spends the query budget over successive runs: each run stops
at the first prediction flip, the amplitude halves, and the probability
train carries over. The returned image is the latest flip that worked.
"""

import numpy as np

from ttattack import (
    AttackConfig,
    InProcessEndpoint,
    ProtesConfig,
    compute_norms,
    load_desk_classifier,
    make_desk_dataset,
    predict,
    save_image,
    tetradat,
)

clf = load_desk_classifier()
images, labels = make_desk_dataset(30, seed=2024)
index = next(
    i for i in range(30) if predict(clf, images[i]).top_class == labels[i]
)
image = images[index]
print(f"attacking image {index}: true class {labels[index]}")

endpoint = InProcessEndpoint(clf)
config = AttackConfig(
    num_pixels=102,  # ~10% of the 1024 pixels
    epsilon0=1.0,
    budget=10_000,
    protes=ProtesConfig(seed=0),
)
trace = []
result = tetradat(endpoint, clf, image, config, run_trace=trace)

print(f"\nruns ({len(trace)}):")
for run in trace:
    print(f"  amplitude {run['epsilon']:.4g}: {run['queries']} queries, "
          f"{'flipped' if run['success'] else 'no flip'}")
print(f"\nsuccess: {result.success}")
print(f"class {result.original_class} -> {result.adversarial_class} "
      f"at amplitude {result.final_epsilon:.4g}")
print(f"optimization queries: {result.queries} "
      f"(endpoint total {endpoint.queries} incl. the initial classification)")
print(f"perturbation norms (0-255 scale): l1 {result.l1:.1f}  "
      f"l2 {result.l2:.1f}  linf {result.linf:.1f}")
assert compute_norms(image, result.adversarial) == (result.l1, result.l2, result.linf)

save_image(image, "demo_attack_original.png")
save_image(result.adversarial, "demo_attack_adversarial.png")
amplified = np.clip(np.abs(result.adversarial - image) * 10.0, 0.0, 1.0)
save_image(amplified, "demo_attack_perturbation_x10.png")
print("\nwrote demo_attack_{original,adversarial,perturbation_x10}.png")
