"""Command-line entry points.

    attack run --config campaign.cfg
    attack report --results out/
    attack train-desk-model --seed 0 --out desk_model.nnw
    attack selftest

Exit codes: 0 success, 1 campaign/runtime error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np


def _cmd_run(args) -> int:
    from .harness import ConfigError, parse_campaign_config, run_campaign

    try:
        spec = parse_campaign_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_campaign(spec, progress=print)
    except Exception as exc:  # endpoint/source failures end the campaign
        print(f"campaign error: {exc}", file=sys.stderr)
        return 1
    print(
        f"attempted={summary.images_attempted} skipped={summary.images_skipped} "
        f"success_rate={summary.success_rate}"
    )
    print(f"results written to {spec.output_dir}")
    return 0


def _cmd_report(args) -> int:
    from .harness import emit_report

    try:
        written = emit_report(args.results, args.out)
    except FileNotFoundError as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def _cmd_train(args) -> int:
    from .model import train_desk_classifier

    start = time.perf_counter()
    clf, accuracy = train_desk_classifier(
        seed=args.seed, count=args.count, epochs=args.epochs
    )
    clf.save(args.out)
    print(
        f"trained in {time.perf_counter() - start:.1f}s, "
        f"final train accuracy {accuracy[-1]:.4f}, weights -> {args.out}"
    )
    return 0 if accuracy[-1] >= 0.9 else 1


def _selftest_checks():
    from . import attack, attribution, color, model, protes, tt

    rng = np.random.default_rng(0)

    def dense(t):
        v = t.cores[0]
        out = v.reshape(v.shape[1], v.shape[2])
        for core in t.cores[1:]:
            out = out @ core.reshape(core.shape[0], -1)
            out = out.reshape(-1, core.shape[2])
        return out.reshape(t.mode_sizes)

    t = tt.tt_random_nonneg([3, 4, 2, 3], rank=3, seed=7)
    full = dense(t)
    worst = 0.0
    for n in np.ndindex(*t.mode_sizes):
        idx = np.asarray(n) + 1
        worst = max(worst, abs(tt.tt_get(t, idx) - full[n]) / abs(full[n]))
    yield "entry evaluation matches dense contraction", worst < 1e-12

    draws = tt.tt_sample(t, 20_000, rng)
    flat = np.ravel_multi_index((draws - 1).T, t.mode_sizes)
    emp = np.bincount(flat, minlength=full.size) / draws.shape[0]
    tv = 0.5 * np.abs(emp - full.ravel() / full.sum()).sum()
    yield "sampler tracks the normalized tensor (TV < 0.05)", tv < 0.05

    batch = tt.tt_sample(t, 4, rng)
    grads = tt.tt_log_likelihood_grad(t, batch)
    h = 1e-6
    ok = True
    for ci in (0, len(t.cores) - 1):
        core = t.cores[ci]
        pos = (0, core.shape[1] // 2, core.shape[2] - 1)
        for sign in (1.0, -1.0):
            shifted = t.copy()
            shifted.cores[ci][pos] += sign * h
            val = sum(np.log(tt.tt_get(shifted, row)) for row in batch)
            if sign > 0:
                up = val
            else:
                down = val
        fd = (up - down) / (2 * h)
        if abs(fd - grads[ci][pos]) > 1e-4 * max(1.0, abs(fd)):
            ok = False
    yield "likelihood gradient matches finite differences", ok

    lattice = np.stack(
        np.meshgrid(*[np.linspace(0, 1, 7)] * 3, indexing="ij"), axis=-1
    ).reshape(-1, 3)
    rt = color.hsv_to_rgb(color.rgb_to_hsv(lattice))
    yield "HSV round-trip is lossless", float(np.abs(rt - lattice).max()) < 1e-9

    def objective(idx):
        return (idx[:, 0] - 2.0) ** 2 + (idx[:, 1] - 3.0) ** 2

    state, _ = protes.protes_minimize(
        [5, 5], objective, budget=600,
        config=protes.ProtesConfig(num_candidates=50, num_elites=5, seed=3),
    )
    yield "optimizer finds the planted quadratic minimum", state.best_value == 0.0

    clf = model.initialize_classifier(seed=5)
    img = np.random.default_rng(6).random((32, 32, 3))
    pred = model.predict(clf, img)
    amap = attribution.integrated_gradients(clf, img, pred.top_class, steps=8)
    sel = attribution.select_top_pixels(amap, 10)
    out = attack.perturb(img, np.full(10, 3), sel, 0.5)
    mask = np.zeros((32, 32), dtype=bool)
    mask[sel[:, 0], sel[:, 1]] = True
    yield "perturbation touches only selected pixels", bool(
        np.all(out[~mask] == img[~mask])
    )


def _cmd_selftest(_args) -> int:
    failures = 0
    for name, ok in _selftest_checks():
        print(f"{'PASS' if ok else 'FAIL'}: {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="attack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an attack campaign from a config file")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(fn=_cmd_run)

    p_rep = sub.add_parser("report", help="build panel figures and the summary table")
    p_rep.add_argument("--results", required=True)
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(fn=_cmd_report)

    p_train = sub.add_parser("train-desk-model", help="train and save the desk classifier")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--count", type=int, default=4000)
    p_train.add_argument("--epochs", type=int, default=25)
    p_train.add_argument("--out", default="desk_model.nnw")
    p_train.set_defaults(fn=_cmd_train)

    p_self = sub.add_parser("selftest", help="quick built-in sanity checks")
    p_self.set_defaults(fn=_cmd_selftest)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
