"""Campaign running, metrics, and report emission.

A campaign is described by a flat ``key = value`` text file (see
parse_campaign_config for the schema), iterates a labeled image source,
skips images that either model misclassifies, attacks the rest, and writes
per-image JSON records plus a summary.  Reports assemble four-panel figures
per attacked image and a summary table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attack import AttackConfig, AttackRefused, compute_norms, tetradat
from .attribution import integrated_gradients, save_attribution
from .dataset import load_labeled_folder, make_desk_dataset
from .images import load_image, save_image
from .model import (
    BridgeClassifier,
    BridgeEndpoint,
    BuiltinClassifier,
    InProcessEndpoint,
    TransportError,
    load_desk_classifier,
    predict,
)
from .protes import ProtesConfig

__all__ = [
    "ConfigError",
    "CampaignSpec",
    "CampaignSummary",
    "parse_campaign_config",
    "run_campaign",
    "compute_norms",
    "emit_report",
]

RESULTS_NAME = "results.jsonl"
SUMMARY_NAME = "summary.json"


class ConfigError(ValueError):
    """Bad or missing campaign configuration."""


@dataclass
class CampaignSpec:
    images: str  # "synthetic:seed=S,count=N" or a labeled folder path
    attacked: str  # "builtin:desk", "builtin:<weights.nnw>" or "bridge:<command>"
    auxiliary: str
    output_dir: str
    attack: AttackConfig
    seed: int = 0
    retries: int = 2


@dataclass(frozen=True)
class CampaignSummary:
    images_attempted: int
    images_skipped: int
    success_rate: float | None
    mean_l1: float | None
    mean_l2: float | None
    mean_queries: float | None

    def to_dict(self) -> dict:
        return {
            "images_attempted": self.images_attempted,
            "images_skipped": self.images_skipped,
            "success_rate": self.success_rate,
            "mean_l1": self.mean_l1,
            "mean_l2": self.mean_l2,
            "mean_queries": self.mean_queries,
        }


_INT_KEYS = {
    "budget", "num_pixels", "attribution_steps", "candidates", "elites",
    "ascent_steps", "rank", "seed", "retries",
}
_FLOAT_KEYS = {"epsilon0", "learning_rate"}
_STR_KEYS = {"images", "attacked", "auxiliary", "output"}


def parse_campaign_config(path) -> CampaignSpec:
    """Parse a flat key = value campaign file.

    Required keys: images, attacked, auxiliary, output, num_pixels.
    Optional keys with defaults: budget (10000), epsilon0 (1.0),
    attribution_steps (15), candidates (100), elites (10), ascent_steps
    (100), learning_rate (0.01), rank (5), seed (0), retries (2).
    Lines starting with '#' and blank lines are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    known = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    for key in ("images", "attacked", "auxiliary", "output", "num_pixels"):
        if key not in raw:
            raise ConfigError(f"missing required config key {key!r}")

    def geti(key, default):
        try:
            return int(raw.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"key {key!r} must be an integer") from exc

    def getf(key, default):
        try:
            return float(raw.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"key {key!r} must be a number") from exc

    protes = ProtesConfig(
        num_candidates=geti("candidates", 100),
        num_elites=geti("elites", 10),
        ascent_steps=geti("ascent_steps", 100),
        learning_rate=getf("learning_rate", 0.01),
        rank=geti("rank", 5),
        seed=geti("seed", 0),
    )
    attack = AttackConfig(
        num_pixels=geti("num_pixels", 0),
        epsilon0=getf("epsilon0", 1.0),
        budget=geti("budget", 10_000),
        protes=protes,
        attribution_steps=geti("attribution_steps", 15),
    )
    try:
        attack.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return CampaignSpec(
        images=raw["images"],
        attacked=raw["attacked"],
        auxiliary=raw["auxiliary"],
        output_dir=raw["output"],
        attack=attack,
        seed=geti("seed", 0),
        retries=geti("retries", 2),
    )


def _resolve_classifier(descriptor: str):
    kind, _, rest = descriptor.partition(":")
    if kind == "builtin":
        if rest in ("", "desk"):
            return load_desk_classifier()
        return BuiltinClassifier.load(rest)
    if kind == "bridge":
        if not rest:
            raise ConfigError("bridge descriptor needs a command")
        return BridgeClassifier(BridgeEndpoint(rest))
    raise ConfigError(f"unknown model descriptor {descriptor!r}")


def _resolve_endpoint(descriptor: str):
    model = _resolve_classifier(descriptor)
    if isinstance(model, BridgeClassifier):
        return model.endpoint
    return InProcessEndpoint(model)


def _iter_images(descriptor: str):
    kind, _, rest = descriptor.partition(":")
    if kind == "synthetic":
        params = dict(
            part.split("=", 1) for part in rest.split(",") if "=" in part
        )
        try:
            seed = int(params.get("seed", 0))
            count = int(params.get("count", 10))
        except ValueError as exc:
            raise ConfigError(f"bad synthetic descriptor {descriptor!r}") from exc
        images, labels = make_desk_dataset(count, seed)
        names = [f"img_{i:04d}" for i in range(count)]
        return list(zip(names, images, labels.tolist()))
    root = Path(descriptor)
    if not root.is_dir():
        raise ConfigError(f"image source is not a directory: {descriptor!r}")
    if not any(p.is_dir() for p in root.iterdir()):
        return []  # an empty source is a legal, zero-attempt campaign
    images, labels, _ = load_labeled_folder(root)
    names = [f"img_{i:04d}" for i in range(len(labels))]
    return list(zip(names, list(images), labels.tolist()))


def _image_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((base_seed, index)).generate_state(1)[0])


def run_campaign(spec: CampaignSpec, progress=None) -> CampaignSummary:
    """Attack every eligible image in the source and persist the results.

    Images misclassified by either the attacked or the attribution model are
    recorded as skipped.  Per-image records go to results.jsonl (one sorted
    JSON object per line, rewritten deterministically for a given spec);
    adversarial images, originals and attribution maps are written next to
    it; the summary lands in summary.json and is returned.
    """
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    auxiliary = _resolve_classifier(spec.auxiliary)
    endpoint = _resolve_endpoint(spec.attacked)
    entries = _iter_images(spec.images)

    # records are flushed as they land so a failed campaign keeps its
    # partial results on disk
    results_file = open(out / RESULTS_NAME, "w")

    def persist(record):
        results_file.write(json.dumps(record, sort_keys=True) + "\n")
        results_file.flush()

    attempted = skipped = successes = 0
    sum_l1 = sum_l2 = sum_queries = 0.0
    try:
        for index, (name, image, label) in enumerate(entries):
            seed = _image_seed(spec.seed, index)
            record = {"image": name, "label": label, "seed": seed}
            attacked_pred = _with_retries(
                lambda: endpoint.query(image), spec.retries
            )
            aux_pred = predict(auxiliary, image)
            if attacked_pred.top_class != label or aux_pred.top_class != label:
                skipped += 1
                record.update(
                    skipped=True,
                    attacked_prediction=attacked_pred.top_class,
                    auxiliary_prediction=aux_pred.top_class,
                )
                persist(record)
                if progress:
                    progress(f"{name}: skipped (misclassified)")
                continue
            attack_cfg = AttackConfig(
                num_pixels=spec.attack.num_pixels,
                epsilon0=spec.attack.epsilon0,
                budget=spec.attack.budget,
                protes=ProtesConfig(
                    num_candidates=spec.attack.protes.num_candidates,
                    num_elites=spec.attack.protes.num_elites,
                    ascent_steps=spec.attack.protes.ascent_steps,
                    learning_rate=spec.attack.protes.learning_rate,
                    rank=spec.attack.protes.rank,
                    seed=seed,
                ),
                attribution_steps=spec.attack.attribution_steps,
            )
            try:
                result = _with_retries(
                    lambda: tetradat(endpoint, auxiliary, image, attack_cfg),
                    spec.retries,
                )
            except AttackRefused:
                skipped += 1
                record.update(skipped=True, refused=True)
                persist(record)
                continue
            attempted += 1
            successes += int(result.success)
            if result.success:
                sum_l1 += result.l1
                sum_l2 += result.l2
            sum_queries += result.queries

            orig_file = f"{name}_original.png"
            adv_file = f"{name}_adversarial.png"
            att_file = f"{name}_attribution.png"
            save_image(image, out / orig_file)
            save_image(result.adversarial, out / adv_file)
            amap = integrated_gradients(
                auxiliary, image, result.original_class,
                steps=spec.attack.attribution_steps,
            )
            save_attribution(amap, out / att_file)
            record.update(
                skipped=False,
                success=result.success,
                adversarial=adv_file,
                original=orig_file,
                attribution=att_file,
                original_class=result.original_class,
                adversarial_class=result.adversarial_class,
                final_epsilon=result.final_epsilon,
                queries=result.queries,
                l1=result.l1,
                l2=result.l2,
                linf=result.linf,
            )
            persist(record)
            if progress:
                progress(
                    f"{name}: {'success' if result.success else 'failure'} "
                    f"({result.queries} queries)"
                )
    finally:
        results_file.close()
    summary = CampaignSummary(
        images_attempted=attempted,
        images_skipped=skipped,
        success_rate=(successes / attempted) if attempted else None,
        mean_l1=(sum_l1 / successes) if successes else None,
        mean_l2=(sum_l2 / successes) if successes else None,
        mean_queries=(sum_queries / attempted) if attempted else None,
    )
    with open(out / SUMMARY_NAME, "w") as fh:
        json.dump(summary.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return summary


def _with_retries(call, retries: int):
    attempts = 0
    while True:
        try:
            return call()
        except TransportError:
            attempts += 1
            if attempts > retries:
                raise


def emit_report(results_dir, out_dir=None) -> list[Path]:
    """Build per-image four-panel figures and the summary table.

    Panels: original, attribution map, the perturbation amplified 10x
    (clamped to [0, 1]), and the adversarial image with its predicted class.
    Missing artifacts skip the panel with a notice instead of failing.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    results_dir = Path(results_dir)
    out_dir = results_dir if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_file = results_dir / RESULTS_NAME
    if not results_file.is_file():
        raise FileNotFoundError(f"no {RESULTS_NAME} under {results_dir}")
    written: list[Path] = []
    with open(results_file) as fh:
        records = [json.loads(line) for line in fh if line.strip()]

    for record in records:
        if record.get("skipped", False):
            continue
        needed = ("original", "attribution", "adversarial")
        paths = {key: results_dir / record.get(key, "") for key in needed}
        missing = [key for key, p in paths.items() if not p.is_file()]
        if missing:
            print(f"notice: {record['image']}: missing {', '.join(missing)}, panel skipped")
            continue
        original = load_image(paths["original"])
        adversarial = load_image(paths["adversarial"])
        attribution = load_image(paths["attribution"])
        amplified = np.clip(np.abs(adversarial - original) * 10.0, 0.0, 1.0)
        fig, axes = plt.subplots(1, 4, figsize=(12, 3.4))
        panels = [
            (original, f"original: class {record['original_class']}"),
            (attribution, "attribution"),
            (amplified, "perturbation x10"),
            (adversarial, f"adversarial: class {record['adversarial_class']}"),
        ]
        for ax, (img, title) in zip(axes, panels):
            ax.imshow(img, interpolation="nearest")
            ax.set_title(title, fontsize=9)
            ax.axis("off")
        fig.tight_layout()
        panel_path = out_dir / f"{record['image']}_panel.png"
        fig.savefig(panel_path, dpi=120)
        plt.close(fig)
        written.append(panel_path)

    summary_file = results_dir / SUMMARY_NAME
    if summary_file.is_file():
        summary = json.loads(summary_file.read_text())
        table_path = out_dir / "summary_table.csv"
        columns = [
            "images_attempted", "images_skipped", "success_rate",
            "mean_l1", "mean_l2", "mean_queries",
        ]
        with open(table_path, "w") as fh:
            fh.write(",".join(columns) + "\n")
            fh.write(",".join(str(summary.get(c)) for c in columns) + "\n")
        written.append(table_path)
    else:
        print(f"notice: missing {SUMMARY_NAME}, table skipped")
    return written
