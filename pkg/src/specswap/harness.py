"""Training regimes and overfitting monitors.

A regime decides which images feed each optimization step: the clean
batch, freshly generated adversarial images, the amplitude/phase swap
outputs, amplitude-recombined (APR) images, or weighted combinations.
Adversarial sources are regenerated from the *current* model at every
step, so their spectra drift along with training.

Per-epoch test accuracies (clean / FGSM / PGD-linf) are recorded so the
catastrophic- and robust-overfitting detectors can run on the curves.
"""

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import attacks as atk
from .attacks import AttackConfig
from .data import Dataset, batch_iter
from .evaluation import EvalCondition, accuracy, evaluate
from .model import SGD, ConvClassifier, cross_entropy, lr_schedule, milestones_for
from .spectral import adversarial_amplitude_swap, apr_swap


class Regime(Enum):
    CLEAN = "clean"
    APR = "apr"
    C_ADV = "c_adv"
    C_AA = "c_aa"
    C_AP = "c_ap"
    ADV = "adv"
    AA = "aa"
    AP = "ap"
    ADV_APR = "adv_apr"

    @staticmethod
    def parse(name) -> "Regime":
        if isinstance(name, Regime):
            return name
        return Regime(str(name).lower())


TWO_SOURCE_REGIMES = frozenset({Regime.C_ADV, Regime.C_AA, Regime.C_AP})


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay: float = 0.1
    milestones: tuple | None = None  # default: 1/2 and 3/4 of the run
    seed: int = 0
    augment: bool = True  # random crop + horizontal flip
    crop_pad: int = 2
    flip_prob: float = 0.5
    mix_weight: float = 0.5  # weight of the clean source in two-source regimes
    eval_eps: float | None = None  # per-epoch record budget; default: attack eps
    eval_pgd_alpha: float = 0.1
    eval_pgd_iters: int = 20

    def __post_init__(self):
        if not 0.0 <= self.mix_weight <= 1.0:
            raise ValueError("mix_weight must lie in [0, 1]")

    def resolved_milestones(self):
        if self.milestones is not None:
            return tuple(self.milestones)
        return milestones_for(self.epochs)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    acc_clean: float
    acc_fgsm: float
    acc_pgd_linf: float


RECORD_COLUMNS = ("epoch", "lr", "train_loss", "acc_clean", "acc_fgsm",
                  "acc_pgd_linf")


@dataclass
class StepBatch:
    """Images/labels for one step plus per-source loss weights."""
    images: np.ndarray
    labels: np.ndarray
    source_weights: list
    source_slices: list

    def item_weights(self) -> np.ndarray:
        weights = np.empty(len(self.images))
        for sl, w in zip(self.source_slices, self.source_weights):
            count = sl.stop - sl.start
            weights[sl] = w / count if count else 0.0
        return weights


def _apr_partners(batch_size: int, rng) -> np.ndarray:
    # uniform over the other in-batch images; degenerate 1-item batch maps to itself
    if batch_size <= 1:
        return np.zeros(batch_size, dtype=np.int64)
    offsets = rng.integers(1, batch_size, size=batch_size)
    return (np.arange(batch_size) + offsets) % batch_size


def _apr_batch(images: np.ndarray, rng) -> np.ndarray:
    partners = _apr_partners(len(images), rng)
    return apr_swap(images, images[partners])


def build_step_batch(regime, images, labels, model, attack_config: AttackConfig,
                     rng, mix_weight: float = 0.5) -> StepBatch:
    """Assemble the training images for one step under a regime.

    Adversarial sources are generated against ``model`` as it is *now*;
    labels are always the clean labels.
    """
    regime = Regime.parse(regime)
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(images)

    def single(source):
        return StepBatch(source, labels, [1.0], [slice(0, n)])

    if regime is Regime.CLEAN:
        return single(images)
    if regime is Regime.APR:
        return single(_apr_batch(images, rng))
    if regime is Regime.ADV_APR:
        recombined = _apr_batch(images, rng)
        return single(atk.attack(model, recombined, labels, attack_config))

    adv = atk.attack(model, images, labels, attack_config)
    if regime is Regime.ADV:
        return single(adv)
    if regime in (Regime.AA, Regime.AP, Regime.C_AA, Regime.C_AP):
        x_aa, x_ap = adversarial_amplitude_swap(images, adv)
        if regime is Regime.AA:
            return single(x_aa)
        if regime is Regime.AP:
            return single(x_ap)
        second = x_aa if regime is Regime.C_AA else x_ap
    else:  # C_ADV
        second = adv
    return StepBatch(
        np.concatenate([images, second]),
        np.concatenate([labels, labels]),
        [mix_weight, 1.0 - mix_weight],
        [slice(0, n), slice(n, 2 * n)],
    )


def random_crop_flip(images: np.ndarray, rng, pad: int = 2,
                     flip_prob: float = 0.5) -> np.ndarray:
    """Random crop with zero padding plus horizontal flip, per image."""
    n, _, h, w = images.shape
    padded = np.pad(images, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    offsets = rng.integers(0, 2 * pad + 1, size=(n, 2))
    flips = rng.random(n) < flip_prob
    out = np.empty_like(images)
    for i in range(n):
        dy, dx = offsets[i]
        crop = padded[i, :, dy:dy + h, dx:dx + w]
        out[i] = crop[:, :, ::-1] if flips[i] else crop
    return out


def _stream(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence((int(seed), *tags)))


def _record_epoch(model, test_set, epoch, lr, train_loss, eps, cfg: TrainConfig):
    acc_clean = accuracy(model, test_set.images, test_set.labels)
    fgsm_cfg = AttackConfig("fgsm", "linf", eps)
    pgd_cfg = AttackConfig("pgd", "linf", eps, alpha=cfg.eval_pgd_alpha,
                           iters=cfg.eval_pgd_iters,
                           seed=int(cfg.seed * 100003 + epoch))
    acc_fgsm = evaluate(model, test_set, EvalCondition.attacked(fgsm_cfg))
    acc_pgd = evaluate(model, test_set, EvalCondition.attacked(pgd_cfg))
    return EpochRecord(epoch, lr, train_loss, acc_clean, acc_fgsm, acc_pgd)


def train(regime, train_set: Dataset, test_set: Dataset,
          train_config: TrainConfig | None = None,
          attack_config: AttackConfig | None = None,
          model: ConvClassifier | None = None):
    """Run a full training job; returns (model, list of EpochRecord)."""
    regime = Regime.parse(regime)
    cfg = train_config or TrainConfig()
    attack_config = attack_config or AttackConfig("fgsm", "linf", 8.0 / 255.0)
    if model is None:
        c, h, _ = train_set.image_shape
        model = ConvClassifier(c, h, train_set.num_classes, seed=cfg.seed)
    optimizer = SGD(model, cfg.lr, cfg.momentum, cfg.weight_decay)
    milestones = cfg.resolved_milestones()
    eval_eps = cfg.eval_eps if cfg.eval_eps is not None else attack_config.eps

    records = []
    for epoch in range(cfg.epochs):
        optimizer.lr = lr_schedule(epoch, cfg.lr, milestones, cfg.lr_decay)
        losses = []
        step = 0
        for images, labels in batch_iter(train_set, cfg.batch_size,
                                         shuffle_seed=(cfg.seed, 1, epoch)):
            if cfg.augment:
                images = random_crop_flip(images, _stream(cfg.seed, 2, epoch, step),
                                          cfg.crop_pad, cfg.flip_prob)
            step_attack = attack_config.with_seed(
                cfg.seed * 1000003 + epoch * 1009 + step)
            batch = build_step_batch(regime, images, labels, model, step_attack,
                                     _stream(cfg.seed, 4, epoch, step),
                                     cfg.mix_weight)
            logits = model.forward(batch.images)
            loss, dlogits = cross_entropy(logits, batch.labels,
                                          batch.item_weights())
            model.zero_grads()
            model.backward(dlogits)
            optimizer.step()
            losses.append(loss)
            step += 1
        records.append(_record_epoch(model, test_set, epoch, optimizer.lr,
                                     float(np.mean(losses)), eval_eps, cfg))
    return model, records


def detect_catastrophic_overfit(records, window: int = 5, pgd_drop: float = 20.0,
                                fgsm_slack: float = 5.0):
    """Onset epochs where PGD accuracy collapses while FGSM stays high.

    Fires when PGD-linf accuracy sits >= ``pgd_drop`` points below its
    maximum over the trailing ``window`` epochs while FGSM accuracy is
    within ``fgsm_slack`` of its own windowed maximum. Consecutive
    flagged epochs coalesce into one event at the onset.
    """
    if len(records) < 2:
        return []
    events, prev = [], False
    for e in range(len(records)):
        lo = max(0, e - window + 1)
        pgd_max = max(r.acc_pgd_linf for r in records[lo:e + 1])
        fgsm_max = max(r.acc_fgsm for r in records[lo:e + 1])
        fired = (pgd_max - records[e].acc_pgd_linf >= pgd_drop
                 and fgsm_max - records[e].acc_fgsm <= fgsm_slack)
        if fired and not prev:
            events.append(e)
        prev = fired
    return events


def detect_robust_overfit(records, drop: float = 10.0, trail: int = 3,
                          run_length: int = 5):
    """Onset epochs of a sustained PGD decline from the running maximum.

    The per-epoch condition is: global running max of PGD accuracy minus
    the trailing-``trail``-epoch mean >= ``drop``. An event is reported
    at the first epoch where the condition has held for ``run_length``
    consecutive epochs.
    """
    n = len(records)
    if n < max(trail, run_length):
        return []
    pgd = [r.acc_pgd_linf for r in records]
    conds = []
    best = -np.inf
    for e in range(n):
        best = max(best, pgd[e])
        if e >= trail - 1:
            conds.append(best - np.mean(pgd[e - trail + 1:e + 1]) >= drop)
        else:
            conds.append(False)
    events, prev = [], False
    for e in range(n):
        fired = e >= run_length - 1 and all(conds[e - run_length + 1:e + 1])
        if fired and not prev:
            events.append(e)
        prev = fired
    return events


def records_to_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([r.epoch, repr(r.lr), repr(r.train_loss),
                             repr(r.acc_clean), repr(r.acc_fgsm),
                             repr(r.acc_pgd_linf)])


def records_from_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != list(RECORD_COLUMNS):
        raise ValueError(f"{path}: unexpected record header")
    return [EpochRecord(int(e), float(lr), float(loss), float(a1), float(a2),
                        float(a3))
            for e, lr, loss, a1, a2, a3 in rows[1:]]
