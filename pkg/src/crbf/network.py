"""Deep complex-valued RBF network: layer types and the forward pass.

Layer ``l`` maps a complex input ``y_prev`` (length ``O[l-1]``) to a complex
output (length ``O[l]``) through ``I[l]`` Gaussian neurons::

    v_m   = ||y_prev - gamma_m||^2 / sigma_m
    phi_m = exp(-v_m)
    y     = W @ phi + b

Centers are stored one row per neuron, so ``gamma`` has shape ``(I, O_prev)``.
A single-layer network is the classical shallow C-RBF.

Layer indices in this package are zero-based: ``net.layers[0]`` is the first
hidden layer and ``net.layers[-1]`` produces the network output.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .complex_linalg import sq_distance
from .errors import InvalidArgumentError, NumericOverflowError, StateError

#: Kernel inputs are clamped here before ``exp(-v)``; ``exp(-700)`` is still a
#: normal double, anything much larger underflows through denormals.
V_MAX = 700.0


@dataclass
class Layer:
    """Free parameters of one hidden layer plus the last forward cache."""

    W: np.ndarray  # (O, I) complex synaptic weights
    b: np.ndarray  # (O,) complex bias
    gamma: np.ndarray  # (I, O_prev) complex centers, one row per neuron
    sigma: np.ndarray  # (I,) real positive kernel variances

    y_prev: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    phi: np.ndarray | None = field(default=None, repr=False)
    y: np.ndarray | None = field(default=None, repr=False)
    cache_valid: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.complex128, ndmin=2)
        self.b = np.array(self.b, dtype=np.complex128, ndmin=1)
        self.gamma = np.array(self.gamma, dtype=np.complex128, ndmin=2)
        self.sigma = np.array(self.sigma, dtype=np.float64, ndmin=1)
        self.validate()

    @property
    def n_neurons(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.gamma.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.W.shape[0]

    def validate(self) -> None:
        I = self.gamma.shape[0]
        if self.sigma.shape != (I,) or self.W.shape[1] != I:
            raise InvalidArgumentError(
                f"neuron count mismatch: gamma {self.gamma.shape}, "
                f"sigma {self.sigma.shape}, W {self.W.shape}"
            )
        if self.b.shape != (self.W.shape[0],):
            raise InvalidArgumentError(f"bias shape {self.b.shape} does not match W {self.W.shape}")
        if np.any(self.sigma <= 0):
            raise InvalidArgumentError("kernel variances must be strictly positive")

    def invalidate(self) -> None:
        self.cache_valid = False

    def require_cache(self) -> None:
        if not self.cache_valid:
            raise StateError("layer cache is stale; run a forward pass on this sample first")


@dataclass
class Network:
    """Ordered stack of layers with input count ``P`` and output count ``R``.

    ``input_norm`` and ``output_norm`` hold the :class:`crbf.initialization.NormStats`
    used to prepare training data, so inference can apply the same mapping.
    """

    P: int
    R: int
    layers: list[Layer]
    input_norm: Any = None
    output_norm: Any = None
    sigma_floor_hits: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def neurons(self) -> list[int]:
        return [layer.n_neurons for layer in self.layers]

    @property
    def outputs(self) -> list[int]:
        return [layer.n_outputs for layer in self.layers]

    def validate(self) -> None:
        if not self.layers:
            raise InvalidArgumentError("network needs at least one layer")
        if self.layers[0].n_inputs != self.P:
            raise InvalidArgumentError(
                f"first layer expects {self.layers[0].n_inputs} inputs, network has P={self.P}"
            )
        if self.layers[-1].n_outputs != self.R:
            raise InvalidArgumentError(
                f"last layer produces {self.layers[-1].n_outputs} outputs, network has R={self.R}"
            )
        for l in range(1, len(self.layers)):
            if self.layers[l].n_inputs != self.layers[l - 1].n_outputs:
                raise InvalidArgumentError(
                    f"layer {l} centers have {self.layers[l].n_inputs} columns but "
                    f"layer {l - 1} produces {self.layers[l - 1].n_outputs} outputs"
                )

    def invalidate(self) -> None:
        for layer in self.layers:
            layer.invalidate()

    def clone(self) -> "Network":
        return copy.deepcopy(self)

    def parameters(self):
        """Yield ``(layer_index, name, array)`` for every trainable array."""
        for l, layer in enumerate(self.layers):
            for name in ("W", "b", "gamma", "sigma"):
                yield l, name, getattr(layer, name)


def kernel_input(y_prev, gamma_m, sigma_m: float) -> float:
    """Gaussian kernel input ``||y_prev - gamma_m||^2 / sigma_m``."""
    if not sigma_m > 0:
        raise InvalidArgumentError(f"sigma_m must be positive, got {sigma_m}")
    return sq_distance(y_prev, gamma_m) / sigma_m


def kernel(v: float) -> float:
    """Gaussian kernel ``exp(-v)`` with ``v`` clamped to :data:`V_MAX`."""
    return float(np.exp(-min(v, V_MAX)))


def _kernel_inputs(layer: Layer, y_prev: np.ndarray) -> np.ndarray:
    diff = y_prev[None, :] - layer.gamma
    return np.sum(diff.real**2 + diff.imag**2, axis=1) / layer.sigma


def layer_forward(layer: Layer, y_prev) -> np.ndarray:
    """Evaluate one layer, caching ``y_prev``, ``v``, ``phi`` and the output."""
    y_prev = np.asarray(y_prev, dtype=np.complex128)
    if y_prev.shape != (layer.n_inputs,):
        raise InvalidArgumentError(
            f"layer expects input of length {layer.n_inputs}, got shape {y_prev.shape}"
        )
    v = np.minimum(_kernel_inputs(layer, y_prev), V_MAX)
    phi = np.exp(-v)
    y = layer.W @ phi + layer.b
    if not np.all(np.isfinite(y)):
        raise NumericOverflowError("layer output is not finite")
    layer.y_prev = y_prev
    layer.v = v
    layer.phi = phi
    layer.y = y
    layer.cache_valid = True
    return y


def network_forward(net: Network, x) -> np.ndarray:
    """Run ``x`` (already normalized, length ``P``) through every layer."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (net.P,):
        raise InvalidArgumentError(f"network expects input of length {net.P}, got shape {x.shape}")
    y = x
    for layer in net.layers:
        y = layer_forward(layer, y)
    return y


def predict(net: Network, X) -> np.ndarray:
    """Batched forward pass over the rows of ``X`` without touching any cache."""
    Y = np.asarray(X, dtype=np.complex128)
    if Y.ndim != 2 or Y.shape[1] != net.P:
        raise InvalidArgumentError(f"expected an (N, {net.P}) input matrix, got {Y.shape}")
    for layer in net.layers:
        diff = Y[:, None, :] - layer.gamma[None, :, :]
        v = np.sum(diff.real**2 + diff.imag**2, axis=2) / layer.sigma
        phi = np.exp(-np.minimum(v, V_MAX))
        Y = phi @ layer.W.T + layer.b
    return Y


def cost(d, y) -> float:
    """Instantaneous quadratic cost ``0.5 * ||d - y||^2``."""
    d = np.asarray(d, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if d.shape != y.shape:
        raise InvalidArgumentError(f"length mismatch: {d.shape} vs {y.shape}")
    return 0.5 * sq_distance(d, y)
