"""Dense networks with hand-rolled forward and backward passes.

Hidden layers are ReLU; the output layer is identity or tanh.  Weights
are stored row-major as ``(fan_out, fan_in)`` so a layer computes
``W @ x + b``.  The backward pass returns exact gradients of a scalar
objective given its upstream derivative, which keeps the whole training
stack free of autodiff dependencies and lets tests check every gradient
against finite differences.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

IDENTITY = "identity"
TANH = "tanh"


@dataclass(eq=False)
class Mlp:
    """A fully-connected network: parameters plus output activation."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = IDENTITY

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"layer_dims needs >= 2 positive entries, got {dims}")
        if self.output_activation not in (IDENTITY, TANH):
            raise ValueError(f"output_activation must be identity or tanh, got {self.output_activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("one weight and bias array per layer is required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l + 1], dims[l]) or b.shape != (dims[l + 1],):
                raise ValueError(
                    f"layer {l} shapes {w.shape}/{b.shape} do not match dims {dims}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l} has non-finite parameters")
        self.layer_dims = dims

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat view of all parameter arrays, weights then bias per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def mlp_init(layer_dims, output_activation: str, rng: np.random.Generator) -> Mlp:
    """Initialize weights and biases uniformly in ``+-1/sqrt(fan_in)``."""
    dims = tuple(int(d) for d in layer_dims)
    weights, biases = [], []
    for l in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[l])
        weights.append(rng.uniform(-bound, bound, size=(dims[l + 1], dims[l])))
        biases.append(rng.uniform(-bound, bound, size=dims[l + 1]))
    return Mlp(layer_dims=dims, weights=weights, biases=biases, output_activation=output_activation)


def mlp_forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Forward pass for a single input ``(d,)`` or a batch ``(B, d)``.

    Returns the output in the matching shape and a cache consumed by
    :func:`mlp_backward`.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    a = x[None, :] if squeeze else x
    if a.ndim != 2 or a.shape[1] != net.in_dim:
        raise ValueError(f"input shape {x.shape} does not match in_dim {net.in_dim}")
    inputs, pres = [], []
    n_layers = len(net.weights)
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = a @ w.T + b
        pres.append(z)
        if l < n_layers - 1:
            a = np.maximum(z, 0.0)
        elif net.output_activation == TANH:
            a = np.tanh(z)
        else:
            a = z
    cache = {"inputs": inputs, "pres": pres, "out": a, "squeeze": squeeze}
    return (a[0] if squeeze else a), cache


def mlp_backward(net: Mlp, cache: dict, upstream: np.ndarray) -> tuple[list, np.ndarray]:
    """Backpropagate ``d objective / d output`` through the network.

    Parameters
    ----------
    net : Mlp
        The network the cache came from.
    cache : dict
        Second return value of :func:`mlp_forward`.
    upstream : np.ndarray
        Gradient at the output, same shape the forward pass returned.

    Returns
    -------
    grads : list of (dW, db)
        Per-layer parameter gradients, same shapes as the parameters.
    input_grad : np.ndarray
        Gradient with respect to the input, same shape as the input.
    """
    upstream = np.asarray(upstream, dtype=float)
    if cache["squeeze"]:
        upstream = upstream[None, :]
    if upstream.shape != cache["out"].shape:
        raise ValueError(
            f"upstream shape {upstream.shape} does not match output {cache['out'].shape}"
        )
    if net.output_activation == TANH:
        delta = upstream * (1.0 - cache["out"] ** 2)
    else:
        delta = upstream
    grads: list = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        grads[l] = (delta.T @ cache["inputs"][l], delta.sum(axis=0))
        if l > 0:
            delta = (delta @ net.weights[l]) * (cache["pres"][l - 1] > 0.0)
    input_grad = delta @ net.weights[0]
    return grads, (input_grad[0] if cache["squeeze"] else input_grad)


def grad_global_norm(grads: list) -> float:
    total = 0.0
    for dw, db in grads:
        total += float(np.sum(dw * dw)) + float(np.sum(db * db))
    return float(np.sqrt(total))


def sgd_step(net: Mlp, grads: list, lr: float, clip_norm: float) -> float:
    """In-place gradient descent step with global-norm clipping.

    Returns the pre-clip gradient norm for diagnostics.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be > 0, got {lr}")
    if clip_norm <= 0:
        raise ValueError(f"clip_norm must be > 0, got {clip_norm}")
    norm = grad_global_norm(grads)
    scale = lr if norm <= clip_norm else lr * clip_norm / norm
    for (dw, db), w, b in zip(grads, net.weights, net.biases):
        w -= scale * dw
        b -= scale * db
    return norm


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Polyak averaging: ``target <- tau * online + (1 - tau) * target``."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    if target.layer_dims != online.layer_dims:
        raise ValueError("target and online networks differ in architecture")
    for tp, op in zip(target.parameters(), online.parameters()):
        tp *= 1.0 - tau
        tp += tau * op


def clone_mlp(net: Mlp) -> Mlp:
    return Mlp(
        layer_dims=net.layer_dims,
        weights=[w.copy() for w in net.weights],
        biases=[b.copy() for b in net.biases],
        output_activation=net.output_activation,
    )


def numerical_gradients(net: Mlp, x: np.ndarray, upstream: np.ndarray, eps: float = 1e-6) -> list:
    """Central finite-difference parameter gradients of ``sum(upstream * out)``.

    Test oracle only; quadratic cost in parameter count.
    """
    upstream = np.asarray(upstream, dtype=float)

    def objective() -> float:
        y, _ = mlp_forward(net, x)
        return float(np.sum(upstream * y))

    grads = []
    for w, b in zip(net.weights, net.biases):
        dw = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + eps
            hi = objective()
            w[idx] = orig - eps
            lo = objective()
            w[idx] = orig
            dw[idx] = (hi - lo) / (2 * eps)
        db = np.zeros_like(b)
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + eps
            hi = objective()
            b[idx] = orig - eps
            lo = objective()
            b[idx] = orig
            db[idx] = (hi - lo) / (2 * eps)
        grads.append((dw, db))
    return grads
