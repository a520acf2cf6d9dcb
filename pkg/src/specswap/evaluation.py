"""Model evaluation under clean, adversarial, and corrupted conditions.

Adversarial conditions are white-box: the attack is generated against
the model being evaluated. Corrupted-k report entries are unweighted
means over the implemented corruption types at severity k.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import attacks as atk
from .attacks import AttackConfig
from .corruptions import CORRUPTION_TYPES, corrupt_dataset
from .data import Dataset
from .spectral import adversarial_amplitude_swap

FGSM_EVAL_BUDGETS = (4, 8, 16, 32)  # numerators over 255

REPORT_COLUMNS = (
    "clean",
    "fgsm_4", "fgsm_8", "fgsm_16", "fgsm_32",
    "pgd_linf", "pgd_l2",
    "corrupted_1", "corrupted_2", "corrupted_3", "corrupted_4", "corrupted_5",
)


def default_pgd_linf(seed=0):
    return AttackConfig("pgd", "linf", 8.0 / 255.0, alpha=0.1, iters=20, seed=seed)


def default_pgd_l2(seed=0):
    return AttackConfig("pgd", "l2", 0.5, alpha=0.1, iters=20, seed=seed)


def predict(model, images, batch_size=256):
    images = np.asarray(images, dtype=np.float64)
    out = []
    for start in range(0, len(images), batch_size):
        out.append(model.forward(images[start:start + batch_size]).argmax(axis=1))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def accuracy(model, images, labels) -> float:
    """Percent of argmax-correct predictions."""
    if len(images) == 0:
        return 0.0
    return float(100.0 * np.mean(predict(model, images) == np.asarray(labels)))


@dataclass
class EvalCondition:
    kind: str  # "clean" | "attack" | "corrupt"
    attack: AttackConfig | None = None
    corruption: tuple | None = None  # (type, severity, seed)
    label: str = ""

    @staticmethod
    def clean():
        return EvalCondition("clean", label="clean")

    @staticmethod
    def attacked(config: AttackConfig, label=None):
        if label is None:
            label = f"{config.kind}_{config.norm}"
        return EvalCondition("attack", attack=config, label=label)

    @staticmethod
    def corrupted(corruption_type, severity, seed=0):
        return EvalCondition("corrupt", corruption=(corruption_type, severity, seed),
                             label=f"{corruption_type}_{severity}")


def evaluate(model, dataset: Dataset, condition: EvalCondition,
             attack_batch=256) -> float:
    """Accuracy (%) of the model on the dataset under one condition."""
    if condition.kind == "clean":
        return accuracy(model, dataset.images, dataset.labels)
    if condition.kind == "corrupt":
        kind, severity, seed = condition.corruption
        corrupted = corrupt_dataset(dataset, kind, severity, seed)
        return accuracy(model, corrupted.images, corrupted.labels)
    if condition.kind != "attack":
        raise ValueError(f"unknown condition kind {condition.kind!r}")
    correct = 0
    for start in range(0, len(dataset), attack_batch):
        images = dataset.images[start:start + attack_batch]
        labels = dataset.labels[start:start + attack_batch]
        adv = atk.attack(model, images, labels, condition.attack)
        correct += int((predict(model, adv) == labels).sum())
    return float(100.0 * correct / len(dataset)) if len(dataset) else 0.0


@dataclass
class EvalReport:
    regime: str
    accuracies: dict  # column name -> accuracy (%)
    metadata: dict = field(default_factory=dict)

    def row(self):
        return [self.accuracies.get(col, float("nan")) for col in REPORT_COLUMNS]


def full_report(model, dataset: Dataset, regime: str = "", seed: int = 0,
                pgd_linf: AttackConfig | None = None,
                pgd_l2: AttackConfig | None = None,
                corruption_seed: int = 0, metadata: dict | None = None,
                jobs: int = 1) -> EvalReport:
    """The full condition grid: clean, FGSM at four budgets, both PGD
    norms, and the per-severity corruption means.

    ``jobs > 1`` evaluates conditions on a thread pool; each condition
    is independent, so the result is identical either way.
    """
    conditions = {"clean": EvalCondition.clean()}
    for e0 in FGSM_EVAL_BUDGETS:
        cfg = AttackConfig("fgsm", "linf", e0 / 255.0, seed=seed)
        conditions[f"fgsm_{e0}"] = EvalCondition.attacked(cfg)
    conditions["pgd_linf"] = EvalCondition.attacked(pgd_linf or default_pgd_linf(seed))
    conditions["pgd_l2"] = EvalCondition.attacked(pgd_l2 or default_pgd_l2(seed))
    for severity in range(1, 6):
        for kind in CORRUPTION_TYPES:
            conditions[f"{kind}_{severity}"] = EvalCondition.corrupted(
                kind, severity, corruption_seed)

    def run_one(condition):
        # attacks call model.forward/backward, which cache activations;
        # give each worker its own frozen copy
        worker_model = model.copy() if jobs > 1 else model
        return evaluate(worker_model, dataset, condition)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = dict(zip(conditions,
                               pool.map(run_one, conditions.values())))
    else:
        results = {name: run_one(cond) for name, cond in conditions.items()}

    acc = {name: results[name] for name in
           ("clean", *(f"fgsm_{e0}" for e0 in FGSM_EVAL_BUDGETS),
            "pgd_linf", "pgd_l2")}
    for severity in range(1, 6):
        acc[f"corrupted_{severity}"] = float(np.mean(
            [results[f"{kind}_{severity}"] for kind in CORRUPTION_TYPES]))
    return EvalReport(regime, acc, metadata or {})


def fooling_table(model, dataset: Dataset, attack_config: AttackConfig,
                  attack_batch=256) -> dict:
    """Error rates (%) of a clean-trained model on clean, adversarial,
    and the two swapped image types, all derived from one adversarial
    batch per chunk."""
    wrong = {"clean": 0, "adv": 0, "aa": 0, "ap": 0}
    for start in range(0, len(dataset), attack_batch):
        images = dataset.images[start:start + attack_batch]
        labels = dataset.labels[start:start + attack_batch]
        adv = atk.attack(model, images, labels, attack_config)
        x_aa, x_ap = adversarial_amplitude_swap(images, adv)
        for key, batch in (("clean", images), ("adv", adv),
                           ("aa", x_aa), ("ap", x_ap)):
            wrong[key] += int((predict(model, batch) != labels).sum())
    n = max(len(dataset), 1)
    return {key: 100.0 * count / n for key, count in wrong.items()}


def emit_report(reports, path, fmt: str = "csv") -> None:
    """Write reports with a stable column order; accuracies at 1 decimal."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["regime", *REPORT_COLUMNS])
            for report in reports:
                writer.writerow([report.regime]
                                + [f"{v:.1f}" for v in report.row()])
    elif fmt == "json":
        payload = [
            {"regime": r.regime,
             "accuracies": {col: round(v, 1)
                            for col, v in zip(REPORT_COLUMNS, r.row())},
             "metadata": r.metadata}
            for r in reports
        ]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report(path, fmt: str = "csv"):
    """Parse a file written by :func:`emit_report`."""
    if fmt == "csv":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header != ["regime", *REPORT_COLUMNS]:
            raise ValueError(f"{path}: unexpected report header")
        return [
            EvalReport(row[0],
                       {col: float(v) for col, v in zip(REPORT_COLUMNS, row[1:])})
            for row in body
        ]
    if fmt == "json":
        with open(path) as fh:
            payload = json.load(fh)
        return [EvalReport(item["regime"], dict(item["accuracies"]),
                           item.get("metadata", {}))
                for item in payload]
    raise ValueError(f"unknown report format {fmt!r}")
