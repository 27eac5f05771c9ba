"""Feed-forward ReLU/softmax classifier with hand-written backprop and Adam."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_INPUTS = 100
N_ACTIONS = 4
LOSS_EPS = 1e-12


@dataclass
class Network:
    """Weights are stored ``(out, in)``; layer ``k`` maps activations of layer
    ``k`` (0 = input) to layer ``k + 1``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k} expects {w.shape[1]} inputs, previous layer has {self.weights[k - 1].shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k} holds non-finite parameters")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def hidden_dims(self) -> list[int]:
        return self.layer_dims[1:-1]

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network) or self.layer_dims != other.layer_dims:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.params(), other.params()))


def init_network(layer_dims, rng: np.random.Generator) -> Network:
    """He-style uniform fan-in initialisation; biases start at zero."""
    dims = [int(d) for d in layer_dims]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def dropout_masks(net: Network, rate: float, batch: int, rng: np.random.Generator) -> list[np.ndarray] | None:
    """Inverted-dropout masks for every hidden layer (entries 0 or 1/(1-rate))."""
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    return [(rng.random((batch, h)) < keep) / keep for h in net.hidden_dims]


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ValueError(f"input has shape {x.shape}, network expects {net.layer_dims[0]} features")
    return x, single


def _run(net: Network, x: np.ndarray, masks):
    """Return (probabilities, post-ReLU activations, layer inputs used downstream)."""
    if masks is not None and len(masks) != len(net.hidden_dims):
        raise ValueError(f"expected {len(net.hidden_dims)} dropout masks, got {len(masks)}")
    hidden, inputs = [], [x]
    a = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if k == last:
            return softmax(z), hidden, inputs
        h = np.maximum(z, 0.0)
        hidden.append(h)
        a = h * masks[k] if masks is not None else h
        inputs.append(a)


def forward(net: Network, x, dropout_mask=None):
    """Class probabilities and per-hidden-layer ReLU activations.

    Accepts one input vector or an ``(n, 100)`` batch.
    """
    xb, single = _as_batch(net, x)
    probs, hidden, _ = _run(net, xb, dropout_mask)
    if single:
        return probs[0], [h[0] for h in hidden]
    return probs, hidden


def predict(net: Network, x, chunk: int = 65536) -> np.ndarray:
    """Argmax actions; ties go to the lowest action index."""
    xb, _ = _as_batch(net, x)
    out = np.empty(len(xb), dtype=np.int8)
    for s in range(0, len(xb), chunk):
        probs, _, _ = _run(net, xb[s : s + chunk], None)
        out[s : s + chunk] = np.argmax(probs, axis=1)
    return out


def loss(probs, label):
    """Cross-entropy ``-log p[label]`` with probabilities clamped at 1e-12."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 1:
        return float(-np.log(max(p[int(label)], LOSS_EPS)))
    lab = np.asarray(label, dtype=np.intp)
    return -np.log(np.maximum(p[np.arange(len(p)), lab], LOSS_EPS))


def mean_loss(net: Network, x, labels, chunk: int = 65536) -> float:
    xb, _ = _as_batch(net, x)
    labels = np.asarray(labels)
    total = 0.0
    for s in range(0, len(xb), chunk):
        probs, _, _ = _run(net, xb[s : s + chunk], None)
        total += float(loss(probs, labels[s : s + chunk]).sum())
    return total / len(xb)


def backward(net: Network, x, labels, dropout_mask=None):
    """Gradients of the summed cross-entropy over the batch.

    Returns ``(weight_grads, bias_grads)`` shaped like the network's parameters.
    """
    xb, single = _as_batch(net, x)
    lab = np.atleast_1d(np.asarray(labels, dtype=np.intp))
    if len(lab) != len(xb):
        raise ValueError(f"{len(xb)} inputs but {len(lab)} labels")
    probs, hidden, inputs = _run(net, xb, dropout_mask)
    delta = probs
    delta[np.arange(len(lab)), lab] -= 1.0
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        gw[k] = delta.T @ inputs[k]
        gb[k] = delta.sum(axis=0)
        if k:
            back = delta @ net.weights[k]
            if dropout_mask is not None:
                back = back * dropout_mask[k - 1]
            delta = back * (hidden[k - 1] > 0)
    return gw, gb


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
