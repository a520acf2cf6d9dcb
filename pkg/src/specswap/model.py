"""A small convolutional classifier with hand-written forward/backward passes.

Desk-scale stand-in for the large residual networks used at benchmark
scale: conv3x3(C->8) - ReLU - pool2 - conv3x3(8->16) - ReLU - pool2 -
flatten - FC(->K). Everything runs in float64 so the finite-difference
gradient checks can be held to tight tolerances.
"""

import json
import struct

import numpy as np

MAGIC = b"SSWM"
VERSION = 1


def _glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv2D:
    """3x3 same-padding convolution, stride 1."""

    def __init__(self, in_channels, out_channels, kernel=3, rng=None):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        fan = kernel * kernel
        if rng is None:
            self.w = np.zeros((out_channels, in_channels, kernel, kernel))
        else:
            self.w = _glorot_uniform(
                rng,
                (out_channels, in_channels, kernel, kernel),
                in_channels * fan,
                out_channels * fan,
            )
        self.b = np.zeros(out_channels)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def spec(self):
        return {"kind": "conv", "in": self.in_channels, "out": self.out_channels,
                "kernel": self.kernel}

    def params(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]

    def _windows(self, x):
        p = self.kernel // 2
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        # (B, C, H, W, k, k) views, no copy
        return np.lib.stride_tricks.sliding_window_view(
            padded, (self.kernel, self.kernel), axis=(2, 3)
        )

    def forward(self, x):
        win = self._windows(x)
        self._cache = (x.shape, win)
        out = np.einsum("bchwij,ocij->bohw", win, self.w, optimize=True)
        return out + self.b[None, :, None, None]

    def backward(self, grad):
        if self._cache is None:
            raise RuntimeError("backward called before forward (stale activations)")
        x_shape, win = self._cache
        self.dw += np.einsum("bchwij,bohw->ocij", win, grad, optimize=True)
        self.db += grad.sum(axis=(0, 2, 3))
        # full correlation of the upstream gradient with flipped kernels
        w_flip = self.w[:, :, ::-1, ::-1]
        gwin = np.lib.stride_tricks.sliding_window_view(
            np.pad(grad, ((0, 0), (0, 0), (1, 1), (1, 1))),
            (self.kernel, self.kernel),
            axis=(2, 3),
        )
        dx = np.einsum("bohwij,ocij->bchw", gwin, w_flip, optimize=True)
        self._cache = None
        return dx


class ReLU:
    def __init__(self):
        self._mask = None

    def spec(self):
        return {"kind": "relu"}

    def params(self):
        return []

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        if self._mask is None:
            raise RuntimeError("backward called before forward (stale activations)")
        dx = grad * self._mask
        self._mask = None
        return dx


class MaxPool2x2:
    def __init__(self):
        self._cache = None

    def spec(self):
        return {"kind": "pool"}

    def params(self):
        return []

    def forward(self, x):
        b, c, h, w = x.shape
        tiles = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        flat = tiles.reshape(b, c, h // 2, w // 2, 4)
        idx = flat.argmax(axis=-1)
        self._cache = (x.shape, idx)
        return np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        if self._cache is None:
            raise RuntimeError("backward called before forward (stale activations)")
        x_shape, idx = self._cache
        b, c, h, w = x_shape
        flat = np.zeros((b, c, h // 2, w // 2, 4))
        np.put_along_axis(flat, idx[..., None], grad[..., None], axis=-1)
        dx = flat.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        self._cache = None
        return dx.reshape(x_shape)


class Flatten:
    def __init__(self):
        self._shape = None

    def spec(self):
        return {"kind": "flatten"}

    def params(self):
        return []

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        if self._shape is None:
            raise RuntimeError("backward called before forward (stale activations)")
        dx = grad.reshape(self._shape)
        self._shape = None
        return dx


class Dense:
    def __init__(self, in_features, out_features, rng=None):
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            self.w = np.zeros((out_features, in_features))
        else:
            self.w = _glorot_uniform(rng, (out_features, in_features),
                                     in_features, out_features)
        self.b = np.zeros(out_features)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def spec(self):
        return {"kind": "dense", "in": self.in_features, "out": self.out_features}

    def params(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]

    def forward(self, x):
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, grad):
        if self._x is None:
            raise RuntimeError("backward called before forward (stale activations)")
        self.dw += grad.T @ self._x
        self.db += grad.sum(axis=0)
        dx = grad @ self.w
        self._x = None
        return dx


_LAYER_KINDS = {"conv": Conv2D, "relu": ReLU, "pool": MaxPool2x2,
                "flatten": Flatten, "dense": Dense}


class ConvClassifier:
    """conv-relu-pool x2 -> flatten -> dense logits."""

    def __init__(self, in_channels=1, image_size=16, num_classes=4, seed=0,
                 layers=None):
        self.in_channels = in_channels
        self.image_size = image_size
        self.num_classes = num_classes
        if layers is not None:
            self.layers = layers
            return
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 901)))
        if image_size % 4 != 0:
            raise ValueError("image_size must be divisible by 4 (two 2x2 pools)")
        feat = 16 * (image_size // 4) ** 2
        self.layers = [
            Conv2D(in_channels, 8, rng=rng),
            ReLU(),
            MaxPool2x2(),
            Conv2D(8, 16, rng=rng),
            ReLU(),
            MaxPool2x2(),
            Flatten(),
            Dense(feat, num_classes, rng=rng),
        ]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        expected = (self.in_channels, self.image_size, self.image_size)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ValueError(f"expected batch of shape (B, {expected}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        grad = dlogits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, value, grad in layer.params():
                out.append((f"{i}.{name}", value, grad))
        return out

    def zero_grads(self):
        for _, _, grad in self.params():
            grad[...] = 0.0

    def copy(self) -> "ConvClassifier":
        clone = ConvClassifier(self.in_channels, self.image_size,
                               self.num_classes, layers=_build_layers(self.arch()))
        for (_, dst, _), (_, src, _) in zip(clone.params(), self.params()):
            dst[...] = src
        return clone

    def arch(self):
        return {
            "in_channels": self.in_channels,
            "image_size": self.image_size,
            "num_classes": self.num_classes,
            "layers": [layer.spec() for layer in self.layers],
        }


def _build_layers(arch):
    layers = []
    for spec in arch["layers"]:
        kind = spec["kind"]
        if kind == "conv":
            layers.append(Conv2D(spec["in"], spec["out"], spec["kernel"]))
        elif kind == "dense":
            layers.append(Dense(spec["in"], spec["out"]))
        else:
            layers.append(_LAYER_KINDS[kind]())
    return layers


def cross_entropy(logits: np.ndarray, labels: np.ndarray,
                  weights: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    ``weights`` replaces the uniform 1/B averaging with per-item weights
    (used by the mixed-source training regimes); they are applied as
    given, without renormalization.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    k = logits.shape[1]
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k - 1}]")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsumexp
    rows = np.arange(len(labels))
    if weights is None:
        weights = np.full(len(labels), 1.0 / len(labels))
    else:
        weights = np.asarray(weights, dtype=np.float64)
    loss = float(-(weights * logp[rows, labels]).sum())
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    grad *= weights[:, None]
    return loss, grad


def loss_and_input_grad(model, images, labels):
    """Forward + cross-entropy + backward; returns (loss, dloss/dimages)."""
    logits = model.forward(images)
    loss, dlogits = cross_entropy(logits, labels)
    model.zero_grads()
    dx = model.backward(dlogits)
    return loss, dx


def milestones_for(total_epochs: int) -> tuple[int, int]:
    """Decay points at 1/2 and 3/4 of the run (100/150 out of 200, scaled)."""
    return total_epochs // 2, (3 * total_epochs) // 4


def lr_schedule(epoch: int, base_lr: float, milestones, gamma: float = 0.1) -> float:
    """Step schedule; the decay applies at the milestone epoch (inclusive)."""
    lr = base_lr
    for m in milestones:
        if epoch >= m:
            lr *= gamma
    return lr


class SGD:
    """SGD with momentum and weight decay: v <- m*v + g + wd*theta; theta -= lr*v."""

    def __init__(self, model, lr=0.01, momentum=0.9, weight_decay=5e-4):
        self.model = model
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {name: np.zeros_like(value)
                         for name, value, _ in model.params()}

    def step(self):
        for name, value, grad in self.model.params():
            v = self.velocity[name]
            v *= self.momentum
            v += grad + self.weight_decay * value
            value -= self.lr * v
        self.model.zero_grads()


def save_model(model: ConvClassifier, path) -> None:
    """Checkpoint: 'SSWM' magic, version, JSON layer spec, f64 LE payload."""
    spec = json.dumps(model.arch(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(spec)))
        fh.write(spec)
        for _, value, _ in model.params():
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_model(path) -> ConvClassifier:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"not a model checkpoint (bad magic {blob[:4]!r})")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    spec_len = struct.unpack("<I", blob[8:12])[0]
    arch = json.loads(blob[12:12 + spec_len].decode("utf-8"))
    model = ConvClassifier(arch["in_channels"], arch["image_size"],
                           arch["num_classes"], layers=_build_layers(arch))
    offset = 12 + spec_len
    for _, value, _ in model.params():
        nbytes = value.size * 8
        chunk = blob[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise ValueError("truncated checkpoint payload")
        value[...] = np.frombuffer(chunk, dtype="<f8").reshape(value.shape)
        offset += nbytes
    if offset != len(blob):
        raise ValueError("trailing bytes after checkpoint payload")
    return model
