"""Scikit-learn style wrappers around the training pipeline.

``SwapAugmentClassifier`` exposes the regime-based training loop through
the usual fit/predict/score surface so it can sit inside pipelines,
grid searches, and cross-validation. ``CorruptionTransformer`` and
``AmplitudeRecombiner`` are stateless transformers over image batches.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .attacks import AttackConfig
from .corruptions import CorruptionSpec, corrupt
from .data import Dataset
from .evaluation import predict as predict_labels
from .harness import Regime, TrainConfig, train
from .spectral import apr_swap
from .validation import as_image_batch, check_finite, encode_labels


class SwapAugmentClassifier(BaseEstimator, ClassifierMixin):
    """Small CNN classifier trained under a swap-augmentation regime.

    Parameters
    ----------
    regime : str, default="c_aa"
        Which images feed each step: "clean", "apr", "c_adv", "c_aa",
        "c_ap", "adv", "aa", "ap", or "adv_apr".
    attack : str, default="fgsm"
        Attack used to generate the adversarial source ("fgsm" or "pgd").
    norm : str, default="linf"
        PGD norm ("linf" or "l2").
    eps : float, default=8/255
        Perturbation budget in [0, 1] pixel units.
    alpha : float, default=0.1
        PGD step size.
    iters : int, default=10
        PGD iteration count.
    rand_start : bool, default=True
        Random start inside the eps-ball for PGD.
    epochs, batch_size, lr, momentum, weight_decay : training knobs.
    augment : bool, default=True
        Random crop with padding plus horizontal flip before the regime.
    eval_records : bool, default=False
        Record per-epoch test accuracies during fit (needs a held-out
        set via ``fit(..., test=(X, y))``); adds per-epoch attack evals.
    image_shape : tuple or None
        (C, H, W) for flat 2-D input; inferred for 3-D/4-D input.
    random_state : int, default=0
    """

    def __init__(self, regime="c_aa", attack="fgsm", norm="linf",
                 eps=8.0 / 255.0, alpha=0.1, iters=10, rand_start=True,
                 epochs=10, batch_size=64, lr=0.01, momentum=0.9,
                 weight_decay=5e-4, augment=True, eval_records=False,
                 image_shape=None, random_state=0):
        self.regime = regime
        self.attack = attack
        self.norm = norm
        self.eps = eps
        self.alpha = alpha
        self.iters = iters
        self.rand_start = rand_start
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.augment = augment
        self.eval_records = eval_records
        self.image_shape = image_shape
        self.random_state = random_state

    def _attack_config(self):
        return AttackConfig(self.attack, self.norm, self.eps, self.alpha,
                            self.iters, self.rand_start, int(self.random_state))

    def fit(self, X, y, test=None):
        images, _ = as_image_batch(check_finite(X), self.image_shape)
        self.classes_, labels = encode_labels(y)
        self.input_image_shape_ = images.shape[1:]
        train_set = Dataset(images, labels, len(self.classes_), "train")
        if test is not None and self.eval_records:
            timages, _ = as_image_batch(check_finite(test[0], "test X"),
                                        self.image_shape)
            tlabels = np.searchsorted(self.classes_, np.asarray(test[1]))
            test_set = Dataset(timages, tlabels, len(self.classes_), "test")
        else:
            # empty held-out set: per-epoch record accuracies read 0.0
            test_set = Dataset(images[:0], labels[:0], len(self.classes_), "test")
        cfg = TrainConfig(epochs=int(self.epochs), batch_size=int(self.batch_size),
                          lr=self.lr, momentum=self.momentum,
                          weight_decay=self.weight_decay, seed=int(self.random_state),
                          augment=self.augment)
        self.model_, self.records_ = train(Regime.parse(self.regime), train_set,
                                           test_set, cfg, self._attack_config())
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("fit must be called before predict")

    def decision_function(self, X):
        self._check_fitted()
        images, _ = as_image_batch(check_finite(X), self.image_shape)
        return self.model_.forward(images)

    def predict(self, X):
        self._check_fitted()
        images, _ = as_image_batch(check_finite(X), self.image_shape)
        return self.classes_[predict_labels(self.model_, images)]

    def predict_proba(self, X):
        logits = self.decision_function(X)
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True)


class CorruptionTransformer(BaseEstimator, TransformerMixin):
    """Apply one corruption type/severity to every image in X."""

    def __init__(self, corruption="gaussian_noise", severity=1,
                 image_shape=None, random_state=0):
        self.corruption = corruption
        self.severity = severity
        self.image_shape = image_shape
        self.random_state = random_state

    def fit(self, X, y=None):
        CorruptionSpec(self.corruption, self.severity)  # validate params
        return self

    def transform(self, X):
        spec = CorruptionSpec(self.corruption, self.severity,
                              int(self.random_state))
        images, flat = as_image_batch(check_finite(X), self.image_shape)
        out = np.empty_like(images)
        for i, img in enumerate(images):
            rng = np.random.default_rng(
                np.random.SeedSequence((int(self.random_state), i)))
            out[i] = corrupt(img, spec, rng=rng)
        return out.reshape(len(out), -1) if flat else out


class AmplitudeRecombiner(BaseEstimator, TransformerMixin):
    """Replace each image's amplitude spectrum with another's from X.

    Keeps every image's own phase (and therefore its label), pairing it
    with a randomly chosen other sample from the same batch.
    """

    def __init__(self, image_shape=None, random_state=0):
        self.image_shape = image_shape
        self.random_state = random_state

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        images, flat = as_image_batch(check_finite(X), self.image_shape)
        n = len(images)
        rng = np.random.default_rng(np.random.SeedSequence((int(self.random_state),)))
        if n > 1:
            partners = (np.arange(n) + rng.integers(1, n, size=n)) % n
        else:
            partners = np.zeros(n, dtype=np.int64)
        out = apr_swap(images, images[partners])
        return out.reshape(n, -1) if flat else out
