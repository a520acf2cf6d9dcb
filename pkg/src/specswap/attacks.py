"""Gradient-based adversarial example generation: FGSM and PGD (l-inf / l2).

Attacks are white-box and read-only on the model. PGD interleaves the
norm-ball projection with the [0, 1] clamp and recomputes the
perturbation from the clamped point, so both constraints hold
simultaneously when the loop exits. Random starts draw one RNG stream
per batch item from (seed, item index), so results do not depend on how
a batch is split up.
"""

from dataclasses import dataclass, replace

import numpy as np

from .model import loss_and_input_grad

NORMS = ("linf", "l2")


@dataclass
class AttackConfig:
    kind: str = "fgsm"  # "fgsm" | "pgd"
    norm: str = "linf"  # "linf" | "l2"
    eps: float = 8.0 / 255.0
    alpha: float = 0.1
    iters: int = 20
    rand_start: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fgsm", "pgd"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.kind == "pgd":
            if self.alpha <= 0:
                raise ValueError("pgd needs alpha > 0")
            if self.iters < 1:
                raise ValueError("pgd needs iters >= 1")

    def with_seed(self, seed: int) -> "AttackConfig":
        return replace(self, seed=int(seed))


def _batched(images, labels):
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        return images[None], np.asarray([labels]), True
    return images, np.asarray(labels), False


def fgsm(model, images, labels, eps: float) -> np.ndarray:
    """x + eps * sign(grad), clamped to [0, 1]; sign(0) = 0."""
    x, y, single = _batched(images, labels)
    _, grad = loss_and_input_grad(model, x, y)
    adv = np.clip(x + eps * np.sign(grad), 0.0, 1.0)
    return adv[0] if single else adv


def project_linf(delta: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(delta, -eps, eps)


def _item_l2(delta):
    # norm over each item's whole grid; a lone image is one item
    if delta.ndim <= 3:
        return np.linalg.norm(delta)
    return np.sqrt((delta.reshape(delta.shape[0], -1) ** 2).sum(axis=1))


def project_l2(delta: np.ndarray, eps: float) -> np.ndarray:
    """Radial projection onto the l2 ball of radius eps (per item)."""
    delta = np.asarray(delta, dtype=np.float64)
    norms = _item_l2(delta)
    if delta.ndim <= 3:
        return delta if norms <= eps else delta * (eps / norms)
    scale = np.where(norms > eps, eps / np.maximum(norms, 1e-300), 1.0)
    return delta * scale.reshape(-1, *([1] * (delta.ndim - 1)))


def _random_start(shape, norm, eps, seed):
    n_items = shape[0]
    dim = int(np.prod(shape[1:]))
    delta = np.empty(shape)
    for i in range(n_items):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), i)))
        if norm == "linf":
            delta[i] = rng.uniform(-eps, eps, size=shape[1:])
        else:
            direction = rng.standard_normal(dim)
            direction /= max(np.linalg.norm(direction), 1e-300)
            radius = eps * rng.random() ** (1.0 / dim)
            delta[i] = (radius * direction).reshape(shape[1:])
    return delta


def pgd(model, images, labels, config: AttackConfig) -> np.ndarray:
    """Projected gradient ascent on the loss inside the eps-ball.

    The returned batch is the output of the final clamp, so pixels sit
    exactly in [0, 1] and a one-step l-inf run with alpha >= eps and no
    random start is bit-identical to FGSM.
    """
    x, y, single = _batched(images, labels)
    if config.rand_start and config.eps > 0:
        start = _random_start(x.shape, config.norm, config.eps, config.seed)
        x_adv = np.clip(x + start, 0.0, 1.0)
    else:
        x_adv = x
    for _ in range(config.iters):
        _, grad = loss_and_input_grad(model, x_adv, y)
        delta = x_adv - x
        if config.norm == "linf":
            delta = project_linf(delta + config.alpha * np.sign(grad), config.eps)
        else:
            norms = _item_l2(grad).reshape(-1, *([1] * (x.ndim - 1)))
            delta = project_l2(delta + config.alpha * grad / np.maximum(norms, 1e-12),
                               config.eps)
        x_adv = np.clip(x + delta, 0.0, 1.0)
    return x_adv[0] if single else x_adv


def attack(model, images, labels, config: AttackConfig) -> np.ndarray:
    if config.kind == "fgsm":
        return fgsm(model, images, labels, config.eps)
    return pgd(model, images, labels, config)


def directional_gain(model, images, labels):
    """Sum of |dloss/dx|: first-order loss gain per unit eps along FGSM."""
    x, y, single = _batched(images, labels)
    _, grad = loss_and_input_grad(model, x, y)
    gains = np.abs(grad).reshape(grad.shape[0], -1).sum(axis=1)
    return float(gains[0]) if single else gains
