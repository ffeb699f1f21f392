"""Multi-run harnesses on the synthetic dataset.

``mechanism_check`` compares four synthetic presets per seed (standard,
standard+AgMax, CutMix, CutMix+AgMax) and reports the held-out agreement
gap and the CutMix accuracy difference. ``attack_check`` trains the
baseline per seed and sweeps FGSM strength. ``smoothing_table`` runs the
baseline / label smoothing / AgMax trio and tabulates the final epoch.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import TrainConfig, load_config
from .data import Dataset, generate_synth, load_cifar10_split
from .robustness import eval_under_attack
from .train.loop import MetricsRecord, Trainer

MI_GAP = 0.1
ACCURACY_SLACK = 0.005
TRIO = (
    ("baseline", "synth-presets/standard"),
    ("label-smoothing", "synth-presets/standard-ls"),
    ("agmax", "synth-presets/standard-agmax"),
)
TABLE_COLUMNS = ("name", "config", "epochs", "seeds", "top1", "top5", "mi", "loss")


def load_datasets(config: TrainConfig, root=None) -> tuple[Dataset, Dataset]:
    if config["data.source"] == "cifar10":
        base = root if root is not None else config["data.root"]
        return load_cifar10_split(base, "train"), load_cifar10_split(base, "test")
    return generate_synth(config.synth_spec())


def run(config: TrainConfig, datasets: Optional[tuple[Dataset, Dataset]] = None, on_epoch=None) -> Trainer:
    train, test = datasets if datasets is not None else load_datasets(config)
    trainer = Trainer(config, train, test)
    trainer.fit(on_epoch)
    return trainer


def final_record(preset: str, seed: int, epochs: Optional[int] = None, overrides=(), datasets=None) -> MetricsRecord:
    sets = list(overrides)
    if epochs is not None:
        sets.append(f"train.epochs={epochs}")
    cfg = load_config(preset, sets, seed=seed)
    return run(cfg, datasets).history[-1]


@dataclass
class MechanismResult:
    seeds: tuple
    epochs: int
    records: dict = field(default_factory=dict)  # preset -> [MetricsRecord per seed]

    def mean(self, preset: str, key: str) -> float:
        return float(np.mean([getattr(r, key) for r in self.records[preset]]))

    @property
    def mi_gap(self) -> float:
        return self.mean("synth-presets/standard-agmax", "mi") - self.mean("synth-presets/standard", "mi")

    @property
    def cutmix_delta(self) -> float:
        return self.mean("synth-presets/cutmix-agmax", "top1") - self.mean("synth-presets/cutmix", "top1")

    @property
    def passed(self) -> bool:
        return self.mi_gap >= MI_GAP and self.cutmix_delta >= -ACCURACY_SLACK

    def summary(self) -> str:
        lines = [f"{'preset':34s} {'top1':>8s} {'mi':>8s}"]
        for preset in self.records:
            lines.append(f"{preset:34s} {self.mean(preset, 'top1'):8.4f} {self.mean(preset, 'mi'):8.4f}")
        lines.append(f"held-out MI gap {self.mi_gap:+.4f} (need >= {MI_GAP})")
        lines.append(f"CutMix top-1 delta {self.cutmix_delta:+.4f} (need >= {-ACCURACY_SLACK})")
        return "\n".join(lines)


def mechanism_check(seeds=(0, 1, 2), epochs: int = 30) -> MechanismResult:
    presets = (
        "synth-presets/standard",
        "synth-presets/standard-agmax",
        "synth-presets/cutmix",
        "synth-presets/cutmix-agmax",
    )
    result = MechanismResult(tuple(seeds), epochs, {p: [] for p in presets})
    # every preset in the family shares the dataset definition
    datasets = generate_synth(load_config(presets[0]).synth_spec())
    for seed in seeds:
        for preset in presets:
            result.records[preset].append(final_record(preset, seed, epochs, datasets=datasets))
    return result


def attack_check(
    preset: str = "synth-presets/standard", seeds=(0, 1, 2), epochs: int = 10, epsilons=(0.0, 0.1, 0.3, 0.5)
) -> dict[float, list[float]]:
    """FGSM top-1 per epsilon, one entry per seed, on the test split."""
    datasets = generate_synth(load_config(preset).synth_spec())
    out: dict[float, list[float]] = {float(e): [] for e in epsilons}
    for seed in seeds:
        cfg = load_config(preset, [f"train.epochs={epochs}"], seed=seed)
        model = run(cfg, datasets).model
        for eps, acc in eval_under_attack(model, datasets[1], epsilons).items():
            out[eps].append(acc)
    return out


def smoothing_table(seeds=(0,), epochs: Optional[int] = None, overrides=()) -> list[dict]:
    """Final-epoch metrics for the trio, averaged over ``seeds``."""
    rows = []
    for name, preset in TRIO:
        recs = [final_record(preset, s, epochs, overrides) for s in seeds]
        rows.append(
            {
                "name": name,
                "config": preset,
                "epochs": recs[0].epoch + 1,
                "seeds": len(recs),
                **{k: float(np.mean([getattr(r, k) for r in recs])) for k in ("top1", "top5", "mi", "loss")},
            }
        )
    return rows


def format_table(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_table(rows: list[dict], path) -> Path:
    path = Path(path)
    path.write_text(format_table(rows))
    return path
