"""Minimal dense network stack with reverse-mode differentiation.

Layers are (weights, bias, activation) with an optional gradient
reversal attached at a layer's input; losses are cross-entropy, binary
cross-entropy and MSE; the optimizer is classic momentum SGD. Training
determinism is bitwise: float64 parameters, seeded init, fixed
reduction orders.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagicError, TruncatedPayloadError, VersionMismatchError

ACTIVATIONS = ("relu", "identity", "softmax_out", "sigmoid_out")
_PROB_EPS = 1e-12

CKPT_MAGIC = b"SLMDL"
CKPT_VERSION = 1


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str
    grl_lambda: float | None = None  # gradient reversal on this layer's input

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bad layer shapes: weights {self.weights.shape}, bias {self.bias.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.grl_lambda is not None and self.grl_lambda < 0:
            raise ValueError("grl_lambda must be nonnegative")


@dataclass
class MlpModel:
    layers: list[Layer]
    adapt_mask: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("model needs at least one layer")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.weights.shape[1] != prev.weights.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")
        for i, layer in enumerate(self.layers):
            if layer.activation in ("softmax_out", "sigmoid_out") and i != len(self.layers) - 1:
                raise ValueError(f"{layer.activation} only permitted on the final layer")
            if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
                raise ValueError("parameters must be finite")
        if not self.adapt_mask:
            self.adapt_mask = [True] * len(self.layers)
        if len(self.adapt_mask) != len(self.layers):
            raise ValueError("adapt_mask must have one flag per layer")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel(
            [
                Layer(l.weights.copy(), l.bias.copy(), l.activation, l.grl_lambda)
                for l in self.layers
            ],
            list(self.adapt_mask),
        )


@dataclass(frozen=True)
class GrlNode:
    """Identity forward; backward multiplies the gradient by -lam."""

    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        return -self.lam * np.asarray(upstream, dtype=np.float64)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.005
    momentum: float = 0.9
    seed: int = 0
    lambda_fd: float = 0.3  # moment matching wants ~0.01; see cli defaults
    lambda_schedule: str = "dann_ramp"  # constant | dann_ramp
    fd_loss: str = "dann"  # dann | moment_matching

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("batch_size and learning_rate must be positive")
        if self.lambda_fd < 0:
            raise ValueError("lambda_fd must be nonnegative")
        if self.lambda_schedule not in ("constant", "dann_ramp"):
            raise ValueError(f"unknown lambda_schedule {self.lambda_schedule!r}")
        if self.fd_loss not in ("dann", "moment_matching"):
            raise ValueError(f"unknown fd_loss {self.fd_loss!r}")


def lambda_at(cfg: TrainConfig, progress: float) -> float:
    """Effective feature-distance weight at training progress p in [0, 1].

    dann_ramp follows lambda_fd * (2 / (1 + exp(-10 p)) - 1)."""
    if cfg.lambda_schedule == "constant":
        return cfg.lambda_fd
    return cfg.lambda_fd * (2.0 / (1.0 + np.exp(-10.0 * progress)) - 1.0)


def init_mlp(dims, final_activation: str, rng: np.random.Generator,
             grl_at: int | None = None, grl_lambda: float = 1.0) -> MlpModel:
    """Glorot-uniform MLP; hidden layers relu, final layer as requested.

    grl_at marks the layer index whose input carries a gradient reversal.
    """
    layers = []
    for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        bound = np.sqrt(6.0 / (din + dout))
        w = rng.uniform(-bound, bound, size=(dout, din))
        act = final_activation if i == len(dims) - 2 else "relu"
        lam = grl_lambda if grl_at is not None and i == grl_at else None
        layers.append(Layer(w, np.zeros(dout), act, lam))
    return MlpModel(layers)


@dataclass
class ForwardRecord:
    inputs: np.ndarray
    pre: list
    post: list
    layer_shapes: tuple


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # evaluated on the non-overflowing branch for either sign
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(model: MlpModel, batch) -> ForwardRecord:
    """Per-layer activations for a (n, in_dim) batch."""
    a = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if a.shape[1] != model.in_dim:
        raise ValueError(f"batch dim {a.shape[1]} does not match model input {model.in_dim}")
    pre, post = [], []
    # overflow surfaces as the explicit finiteness error below, not a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for layer in model.layers:
            z = a @ layer.weights.T + layer.bias
            if layer.activation == "relu":
                a = np.maximum(z, 0.0)
            elif layer.activation == "identity":
                a = z
            elif layer.activation == "softmax_out":
                a = _softmax(z)
            else:  # sigmoid_out
                a = _sigmoid(z)
            if not np.all(np.isfinite(a)):
                raise FloatingPointError("non-finite intermediate values in forward pass")
            pre.append(z)
            post.append(a)
    return ForwardRecord(
        inputs=np.atleast_2d(np.asarray(batch, dtype=np.float64)),
        pre=pre,
        post=post,
        layer_shapes=tuple(l.weights.shape for l in model.layers),
    )


def backward(model: MlpModel, record: ForwardRecord, loss_grad):
    """Reverse-mode gradients.

    loss_grad is dL/d(output activation). Returns ([(dW, db) per layer],
    input_grad); a layer's grl_lambda multiplies the gradient passed to
    the previous layer by -lambda while leaving its own parameter
    gradients untouched.
    """
    if record.layer_shapes != tuple(l.weights.shape for l in model.layers):
        raise ValueError("stale activation record: shapes do not match model")
    g = np.asarray(loss_grad, dtype=np.float64)
    grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        z, a = record.pre[i], record.post[i]
        if layer.activation == "relu":
            dz = g * (z > 0)
        elif layer.activation == "identity":
            dz = g
        elif layer.activation == "softmax_out":
            dz = a * (g - (g * a).sum(axis=1, keepdims=True))
        else:  # sigmoid_out
            dz = g * a * (1.0 - a)
        a_prev = record.inputs if i == 0 else record.post[i - 1]
        grads[i] = (dz.T @ a_prev, dz.sum(axis=0))
        g = dz @ layer.weights
        if layer.grl_lambda is not None:
            g = -layer.grl_lambda * g
    return grads, g


def loss_eval(kind: str, prediction, target):
    """(mean loss, gradient w.r.t. prediction) for one of the three losses."""
    pred = np.asarray(prediction, dtype=np.float64)
    if kind == "cross_entropy":
        pred = np.atleast_2d(pred)
        y = np.asarray(target, dtype=np.int64)
        n, k = pred.shape
        if y.shape != (n,):
            raise ValueError(f"need {n} labels, got shape {y.shape}")
        if np.any(y < 0) or np.any(y >= k):
            raise ValueError("label id out of range")
        p = np.clip(pred, _PROB_EPS, 1.0 - _PROB_EPS)
        picked = p[np.arange(n), y]
        loss = float(-np.log(picked).mean())
        grad = np.zeros_like(p)
        grad[np.arange(n), y] = -1.0 / (n * picked)
        return loss, grad
    if kind == "bce":
        t = np.asarray(target, dtype=np.float64).reshape(pred.shape)
        p = np.clip(pred, _PROB_EPS, 1.0 - _PROB_EPS)
        loss = float(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)).mean())
        grad = (p - t) / (p * (1.0 - p)) / p.size
        return loss, grad
    if kind == "mse":
        t = np.asarray(target, dtype=np.float64).reshape(pred.shape)
        diff = pred - t
        loss = float((diff * diff).mean())
        grad = 2.0 * diff / diff.size
        return loss, grad
    raise ValueError(f"unknown loss kind {kind!r}")


def bce_with_logits(logits, target):
    """Fused sigmoid + BCE on raw logits: mean(softplus(z) - t z).

    The gradient (sigmoid(z) - t)/n stays bounded and nonzero under
    saturation, which the split sigmoid->bce path cannot guarantee; the
    adversarial domain heads train through this."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64).reshape(z.shape)
    softplus = np.where(z > 0, z + np.log1p(np.exp(-np.abs(z))), np.log1p(np.exp(-np.abs(z))))
    loss = float((softplus - t * z).mean())
    grad = (_sigmoid(z) - t) / z.size
    return loss, grad


class SgdState:
    """Per-layer momentum buffers for one model."""

    def __init__(self, model: MlpModel):
        self.velocity = [
            (np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers
        ]


def sgd_step(model: MlpModel, grads, state: SgdState, lr: float, momentum: float,
             trainable=None) -> None:
    """In-place classic momentum update; frozen layers stay bitwise unchanged."""
    if len(grads) != len(model.layers):
        raise ValueError("gradient count does not match layer count")
    for i, layer in enumerate(model.layers):
        if trainable is not None and not trainable[i]:
            continue
        dw, db = grads[i]
        if dw.shape != layer.weights.shape or db.shape != layer.bias.shape:
            raise ValueError(f"gradient shape mismatch at layer {i}")
        vw, vb = state.velocity[i]
        vw *= momentum
        vw += dw
        vb *= momentum
        vb += db
        layer.weights -= lr * vw
        layer.bias -= lr * vb


def update_array(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
                 lr: float, momentum: float) -> None:
    """Momentum update for a bare parameter array (e.g. an embedding table)."""
    velocity *= momentum
    velocity += grad
    param -= lr * velocity


def _grl_sign(model: MlpModel, layer_idx: int) -> float:
    # product of (-lambda) over reversal nodes strictly downstream of this layer
    mult = 1.0
    for j in range(layer_idx + 1, len(model.layers)):
        lam = model.layers[j].grl_lambda
        if lam is not None:
            mult *= -lam
    return mult


def grad_check(model: MlpModel, batch, target, kind: str = "mse", eps: float = 1e-4) -> float:
    """Worst relative error of analytic vs central-difference gradients.

    Reversal layers are part of the analytic graph: the numeric
    derivative of the scalar loss is multiplied by the product of
    (-lambda) over reversal nodes between a parameter and the loss, so
    the check validates the chain rule under the declared GRL semantics.
    Relative error uses a unit floor: |a - n| / max(|a| + |n|, 1).
    """
    rec = forward(model, batch)
    loss, lgrad = loss_eval(kind, rec.post[-1], target)
    grads, _ = backward(model, rec, lgrad)

    def loss_at() -> float:
        r = forward(model, batch)
        return loss_eval(kind, r.post[-1], target)[0]

    worst = 0.0
    for i, layer in enumerate(model.layers):
        sign = _grl_sign(model, i)
        for arr, g in ((layer.weights, grads[i][0]), (layer.bias, grads[i][1])):
            flat = arr.ravel()
            gflat = g.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + eps
                fp = loss_at()
                flat[j] = orig - eps
                fm = loss_at()
                flat[j] = orig
                numeric = sign * (fp - fm) / (2.0 * eps)
                analytic = gflat[j]
                err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1.0)
                worst = max(worst, err)
    return worst


_ACT_IDS = {name: i for i, name in enumerate(ACTIVATIONS)}


def save_model(path, model: MlpModel) -> None:
    """Checkpoint layout: "SLMDL", version u32, layer count u32, then per
    layer out u32, in u32, activation u8, adapt u8, grl u8, grl lambda
    f64, weights f32 row-major, bias f32. All little-endian."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, len(model.layers)))
        for layer, adapt in zip(model.layers, model.adapt_mask):
            out_d, in_d = layer.weights.shape
            fh.write(
                struct.pack(
                    "<IIBBBd",
                    out_d,
                    in_d,
                    _ACT_IDS[layer.activation],
                    1 if adapt else 0,
                    0 if layer.grl_lambda is None else 1,
                    0.0 if layer.grl_lambda is None else float(layer.grl_lambda),
                )
            )
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != CKPT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:5]!r}")
    pos = 5
    if len(blob) < pos + 8:
        raise TruncatedPayloadError(f"{path}: header truncated")
    version, n_layers = struct.unpack_from("<II", blob, pos)
    pos += 8
    if version != CKPT_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {CKPT_VERSION}")
    layers, mask = [], []
    head = struct.Struct("<IIBBBd")
    for _ in range(n_layers):
        if len(blob) < pos + head.size:
            raise TruncatedPayloadError(f"{path}: layer header truncated")
        out_d, in_d, act_id, adapt, has_grl, lam = head.unpack_from(blob, pos)
        pos += head.size
        if act_id >= len(ACTIVATIONS):
            raise VersionMismatchError(f"{path}: unknown activation id {act_id}")
        nbytes = (out_d * in_d + out_d) * 4
        if len(blob) < pos + nbytes:
            raise TruncatedPayloadError(f"{path}: parameter payload truncated")
        w = np.frombuffer(blob, dtype="<f4", count=out_d * in_d, offset=pos).reshape(out_d, in_d)
        pos += out_d * in_d * 4
        b = np.frombuffer(blob, dtype="<f4", count=out_d, offset=pos)
        pos += out_d * 4
        layers.append(
            Layer(
                w.astype(np.float64),
                b.astype(np.float64),
                ACTIVATIONS[act_id],
                float(lam) if has_grl else None,
            )
        )
        mask.append(bool(adapt))
    if pos != len(blob):
        raise TruncatedPayloadError(f"{path}: {len(blob) - pos} unexpected trailing bytes")
    return MlpModel(layers, mask)
