"""Fully-connected feedforward network: forward pass, losses, backprop.

Weights for layer k have shape (n_k, n_{k-1} + 1) when a bias column is used;
the constant input 1 is appended to the previous layer's state before each
matrix product.  Inputs may be a single vector (n1,) or a batch (n1, B) with
examples as columns; in the batched case backward() returns the mini-batch
average gradient.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import Matrix, RngStream, ShapeError

HIDDEN_ACTIVATIONS = ("sigmoid", "relu")
OUTPUT_ACTIVATIONS = ("sigmoid", "softmax")
LOSSES = ("quadratic", "cross_entropy")

CROSS_ENTROPY_FLOOR = 1e-12  # probability clamp before ln


def sigmoid(x):
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_derivative(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def relu(x):
    return np.maximum(x, 0.0)


def relu_derivative(x):
    # Subgradient at exactly 0 is taken as 0.
    return (x > 0).astype(np.float64)


def softmax(x):
    """Column-wise softmax (vector or matrix of column vectors)."""
    shifted = x - np.max(x, axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=0, keepdims=True)


def activation(x, kind: str):
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return relu(x)
    if kind == "softmax":
        return softmax(x)
    raise ValueError(f"unknown activation {kind!r}")


def activation_derivative(x, kind: str):
    if kind == "sigmoid":
        return sigmoid_derivative(x)
    if kind == "relu":
        return relu_derivative(x)
    raise ValueError(f"no element-wise derivative for activation {kind!r}")


@dataclass
class Architecture:
    """Layer widths plus activation/loss choices."""

    widths: list[int]
    hidden_activation: str = "sigmoid"
    output_activation: str = "sigmoid"
    loss: str = "quadratic"
    use_bias: bool = True

    def __post_init__(self):
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ValueError(f"need at least 2 layers with positive widths, got {self.widths}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.loss == "cross_entropy" and self.output_activation != "softmax":
            raise ValueError("cross_entropy loss requires softmax output")

    @property
    def n_layers(self) -> int:
        return len(self.widths)

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    def weight_shapes(self) -> list[tuple[int, int]]:
        extra = 1 if self.use_bias else 0
        return [
            (self.widths[k], self.widths[k - 1] + extra)
            for k in range(1, len(self.widths))
        ]


@dataclass
class ForwardTrace:
    """Per-layer states and pre-activations from one forward pass."""

    states: list[Matrix]     # s^1 .. s^L (s^1 = input)
    preacts: list[Matrix]    # h^2 .. h^L

    @property
    def output(self) -> Matrix:
        return self.states[-1]


def init_params(arch: Architecture, rng: RngStream) -> list[Matrix]:
    """Weights i.i.d. normal, mean 0, std 1/sqrt(fan-in)."""
    return [
        rng.normal(rows, cols, mean=0.0, std=1.0 / np.sqrt(cols))
        for rows, cols in arch.weight_shapes()
    ]


def check_params(arch: Architecture, params: list[Matrix]) -> None:
    shapes = [tuple(w.shape) for w in params]
    if shapes != arch.weight_shapes():
        raise ShapeError(f"weight shapes {shapes} do not match architecture {arch.weight_shapes()}")


def _augment(s: Matrix, use_bias: bool) -> Matrix:
    if not use_bias:
        return s
    if s.ndim == 1:
        return np.concatenate([s, np.ones(1)])
    return np.concatenate([s, np.ones((1, s.shape[1]))], axis=0)


def forward(params: list[Matrix], arch: Architecture, x: Matrix) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != arch.n_in:
        raise ShapeError(f"input has {x.shape[0]} rows, architecture expects {arch.n_in}")
    check_params(arch, params)
    states = [x]
    preacts = []
    last = len(params) - 1
    for k, w in enumerate(params):
        h = w @ _augment(states[-1], arch.use_bias)
        kind = arch.output_activation if k == last else arch.hidden_activation
        preacts.append(h)
        states.append(activation(h, kind))
    return ForwardTrace(states=states, preacts=preacts)


def loss(output: Matrix, target: Matrix, kind: str) -> float:
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ShapeError(f"output shape {output.shape} vs target shape {target.shape}")
    if kind == "quadratic":
        eps = target - output
        return 0.5 * float(np.sum(eps * eps))
    if kind == "cross_entropy":
        p = np.clip(output, CROSS_ENTROPY_FLOOR, None)
        return -float(np.sum(target * np.log(p)))
    raise ValueError(f"unknown loss {kind!r}")


def _output_error_signal(arch: Architecture, y: Matrix, target: Matrix) -> Matrix:
    """dE/dh at the output layer."""
    if arch.loss == "cross_entropy":
        # softmax + cross-entropy simplification
        return y - target
    neg_eps = y - target  # -(y* - y)
    if arch.output_activation == "sigmoid":
        return neg_eps * (y * (1.0 - y))
    # quadratic loss through softmax: apply the softmax Jacobian
    a = neg_eps * y
    return a - y * np.sum(a, axis=0, keepdims=True)


def backward(params: list[Matrix], arch: Architecture, trace: ForwardTrace,
             target: Matrix) -> list[Matrix]:
    """Gradients of the loss w.r.t. each weight matrix (no learning rate).

    For batched traces (columns = examples) the result is the mean gradient
    over the batch.
    """
    target = np.asarray(target, dtype=np.float64)
    y = trace.output
    if target.shape != y.shape:
        raise ShapeError(f"target shape {target.shape} vs output shape {y.shape}")
    batch = 1 if y.ndim == 1 else y.shape[1]

    kappa = _output_error_signal(arch, y, target)
    grads: list[Matrix] = [None] * len(params)
    for k in range(len(params) - 1, -1, -1):
        s_prev = _augment(trace.states[k], arch.use_bias)
        if kappa.ndim == 1:
            grads[k] = np.outer(kappa, s_prev)
        else:
            grads[k] = (kappa @ s_prev.T) / batch
        if k > 0:
            w = params[k][:, : arch.widths[k]]  # bias column does not backpropagate
            delta = w.T @ kappa
            kappa = delta * activation_derivative(trace.preacts[k - 1], arch.hidden_activation)
    return grads


# --- checkpoint container ------------------------------------------------

_MAGIC = b"RSGD"
_VERSION = 1
_ACT_CODES = {"sigmoid": 0, "relu": 1, "softmax": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}
_LOSS_CODES = {"quadratic": 0, "cross_entropy": 1}
_LOSS_NAMES = {v: k for k, v in _LOSS_CODES.items()}


def save_checkpoint(path, arch: Architecture, params: list[Matrix]) -> None:
    check_params(arch, params)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, arch.n_layers))
        f.write(struct.pack(f"<{arch.n_layers}I", *arch.widths))
        f.write(struct.pack("<BBBB",
                            _ACT_CODES[arch.hidden_activation],
                            _ACT_CODES[arch.output_activation],
                            _LOSS_CODES[arch.loss],
                            int(arch.use_bias)))
        for w in params:
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[Architecture, list[Matrix]]:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        version, n_layers = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        widths = list(struct.unpack(f"<{n_layers}I", f.read(4 * n_layers)))
        h_act, o_act, loss_code, bias_flag = struct.unpack("<BBBB", f.read(4))
        arch = Architecture(widths=widths,
                            hidden_activation=_ACT_NAMES[h_act],
                            output_activation=_ACT_NAMES[o_act],
                            loss=_LOSS_NAMES[loss_code],
                            use_bias=bool(bias_flag))
        params = []
        for rows, cols in arch.weight_shapes():
            raw = f.read(8 * rows * cols)
            if len(raw) != 8 * rows * cols:
                raise ValueError(f"{path}: truncated checkpoint payload")
            params.append(np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy())
        return arch, params
