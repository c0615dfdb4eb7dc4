"""Per-sample steepest-descent training of deep C-RBF networks.

Backpropagation runs on two auxiliary quantities per layer:

* ``psi[l]`` (complex, length ``O[l]``): the output error ``d - y`` at the last
  layer, and ``sum_m delta[l+1][m] * (y[l] - gamma[l+1][m])`` below it;
* ``delta[l]`` (real, length ``I[l]``): ``-(Re(W)^T Re(psi) + Im(W)^T Im(psi)) * beta``
  with ``beta = phi / sigma``.

Updates then read::

    W     += eta_w * outer(psi, phi)
    b     += eta_b * psi
    gamma -= eta_gamma * delta[:, None] * (y_prev - gamma)
    sigma -= eta_sigma * delta * v

Gradient convention
-------------------
Let ``g`` be the gradient of the cost with respect to real coordinates, packed
as ``dJ/dRe + 1j * dJ/dIm`` for complex parameters.  The updates above equal
``-eta * s * g`` with a positive per-array scale ``s`` (see
:func:`update_scale`): the squared-distance derivative contributes a factor 2
that the recursion leaves out, once for ``gamma`` and once per layer crossed on
the way down.  :func:`gradients` restores those factors and is what the
finite-difference oracle checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, NumericOverflowError, StateError
from .network import Layer, Network, cost, network_forward, predict

SIGMA_FLOOR = 1e-6

Rates = tuple[float, float, float, float]


@dataclass
class TrainConfig:
    """Learning rates per layer as ``(eta_w, eta_b, eta_gamma, eta_sigma)``."""

    rates: list[Rates]
    epochs: int = 1
    seed: int = 0
    shuffle: bool = True
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        self.rates = [tuple(float(r) for r in quad) for quad in self.rates]
        for l, quad in enumerate(self.rates):
            if len(quad) != 4:
                raise InvalidArgumentError(f"layer {l}: expected 4 learning rates, got {len(quad)}")
            if not all(np.isfinite(r) and r >= 0 for r in quad):
                raise InvalidArgumentError(f"layer {l}: learning rates must be finite and >= 0: {quad}")
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be >= 0")

    def check_depth(self, net: Network) -> None:
        if len(self.rates) != net.depth:
            raise InvalidArgumentError(
                f"{len(self.rates)} learning-rate quadruples for a {net.depth}-layer network"
            )


@dataclass
class BackwardState:
    psi: list[np.ndarray | None]
    delta: list[np.ndarray | None]
    beta: list[np.ndarray | None]

    @classmethod
    def empty(cls, depth: int) -> "BackwardState":
        return cls([None] * depth, [None] * depth, [None] * depth)


@dataclass
class EpochMetrics:
    epoch: int
    train_mse: float
    val_mse: float
    sigma_floor_hits: int = 0

    @property
    def train_db(self) -> float:
        return mse_db(self.train_mse)

    @property
    def val_db(self) -> float:
        return mse_db(self.val_mse)


def mse_db(mse: float) -> float:
    """``10 log10(mse)``; zero maps to ``-inf``."""
    if mse < 0 or np.isnan(mse):
        raise InvalidArgumentError(f"MSE must be non-negative, got {mse}")
    if mse == 0:
        return float("-inf")
    return float(10.0 * np.log10(mse))


def compute_beta(layer: Layer) -> np.ndarray:
    layer.require_cache()
    return layer.phi / layer.sigma


def compute_psi(l: int, net: Network, d, state: BackwardState) -> np.ndarray:
    """Backpropagated error vector of layer ``l``.

    At the last layer this is ``d - y``; below it, every neuron ``m`` of layer
    ``l + 1`` contributes ``delta[m] * (y[l] - gamma[m])``.
    """
    L = net.depth
    if l == L - 1:
        if d is None:
            raise StateError("desired output is required at the last layer")
        layer = net.layers[l]
        layer.require_cache()
        return np.asarray(d, dtype=np.complex128) - layer.y
    delta_next = state.delta[l + 1]
    if delta_next is None:
        raise StateError(f"delta of layer {l + 1} must be computed before psi of layer {l}")
    nxt = net.layers[l + 1]
    nxt.require_cache()
    # (Y - Gamma)^T delta: rows of Y all equal y[l], which nxt cached as its input
    return (nxt.y_prev[None, :] - nxt.gamma).T @ delta_next


def compute_delta(l: int, net: Network, psi, beta) -> np.ndarray:
    layer = net.layers[l]
    psi = np.asarray(psi, dtype=np.complex128)
    beta = np.asarray(beta, dtype=np.float64)
    if psi.shape != (layer.n_outputs,) or beta.shape != (layer.n_neurons,):
        raise InvalidArgumentError(
            f"layer {l}: psi {psi.shape} / beta {beta.shape} do not match W {layer.W.shape}"
        )
    xi = layer.W.real.T @ psi.real + layer.W.imag.T @ psi.imag
    return -xi * beta


def backward(net: Network, d) -> BackwardState:
    """Run the psi/delta recursion from the last layer down, without updating."""
    state = BackwardState.empty(net.depth)
    for l in reversed(range(net.depth)):
        state.beta[l] = compute_beta(net.layers[l])
        state.psi[l] = compute_psi(l, net, d, state)
        state.delta[l] = compute_delta(l, net, state.psi[l], state.beta[l])
    return state


def update_layer(layer: Layer, psi, delta, rates: Rates, sigma_floor: float = SIGMA_FLOOR) -> int:
    """Apply the four parameter updates in place; returns the number of clamped variances."""
    layer.require_cache()
    eta_w, eta_b, eta_g, eta_s = rates
    psi = np.asarray(psi, dtype=np.complex128)
    delta = np.asarray(delta, dtype=np.float64)

    layer.W += eta_w * np.outer(psi, layer.phi)
    layer.b += eta_b * psi
    layer.gamma -= eta_g * delta[:, None] * (layer.y_prev[None, :] - layer.gamma)
    layer.sigma -= eta_s * delta * layer.v

    low = layer.sigma < sigma_floor
    hits = int(np.count_nonzero(low))
    if hits:
        layer.sigma[low] = sigma_floor
    layer.invalidate()
    for name in ("W", "b", "gamma", "sigma"):
        if not np.all(np.isfinite(getattr(layer, name))):
            raise NumericOverflowError(f"parameter {name} became non-finite")
    return hits


def backward_and_update(net: Network, d, cfg: TrainConfig) -> float:
    """One steepest-descent step on the sample whose forward pass is cached.

    All psi/delta values come from the pre-update parameters.  Returns the
    cost of the cached output before the update.
    """
    cfg.check_depth(net)
    for layer in net.layers:
        layer.require_cache()
    J = cost(d, net.layers[-1].y)
    state = backward(net, d)
    for l, layer in enumerate(net.layers):
        net.sigma_floor_hits += update_layer(
            layer, state.psi[l], state.delta[l], cfg.rates[l], cfg.sigma_floor
        )
    return J


def shallow_update(layer: Layer, d, rates: Rates, sigma_floor: float = SIGMA_FLOOR) -> int:
    """Closed-form update of a single-layer network written with xi and beta.

    ``xi = Re(W)^T Re(e) + Im(W)^T Im(e)`` is the synaptic transmittance; the
    center and variance updates are ``+eta * diag(xi * beta) (X - Gamma)`` and
    ``+eta * xi * beta * v``.
    """
    layer.require_cache()
    eta_w, eta_b, eta_g, eta_s = rates
    e = np.asarray(d, dtype=np.complex128) - layer.y
    xi = layer.W.real.T @ e.real + layer.W.imag.T @ e.imag
    beta = layer.phi / layer.sigma
    xb = xi * beta
    X = np.broadcast_to(layer.y_prev, layer.gamma.shape)

    layer.W = layer.W + eta_w * np.outer(e, layer.phi)
    layer.b = layer.b + eta_b * e
    layer.gamma = layer.gamma + eta_g * np.diag(xb) @ (X - layer.gamma)
    layer.sigma = layer.sigma + eta_s * xb * layer.v
    low = layer.sigma < sigma_floor
    layer.sigma[low] = sigma_floor
    layer.invalidate()
    return int(np.count_nonzero(low))


# --------------------------------------------------------------------------
# gradients and the finite-difference oracle


def update_scale(depth: int, l: int, name: str) -> float:
    """Positive factor ``s`` such that the update of ``name`` equals ``-eta * s * grad``."""
    s = 0.5 ** (depth - 1 - l)
    if name == "gamma":
        return 0.5 * s
    if name in ("W", "b", "sigma"):
        return s
    raise InvalidArgumentError(f"unknown parameter {name!r}")


def gradients(net: Network, d) -> list[dict[str, np.ndarray]]:
    """Exact cost gradients for every parameter, from the cached forward pass.

    Complex arrays are returned as ``dJ/dRe + 1j * dJ/dIm``; ``sigma`` is real.
    """
    state = backward(net, d)
    grads = []
    for l, layer in enumerate(net.layers):
        c = 2.0 ** (net.depth - 1 - l)
        psi, delta = state.psi[l], state.delta[l]
        grads.append(
            {
                "W": -c * np.outer(psi, layer.phi),
                "b": -c * psi,
                "gamma": 2.0 * c * delta[:, None] * (layer.y_prev[None, :] - layer.gamma),
                "sigma": c * delta * layer.v,
            }
        )
    return grads


@dataclass(frozen=True)
class ParamCoord:
    """One real scalar of the parameter set.

    ``part`` is ``"re"`` or ``"im"`` for complex arrays and ``"re"`` for ``sigma``.
    """

    layer: int
    name: str
    index: tuple[int, ...]
    part: str = "re"


def _locate(net: Network, coord: ParamCoord) -> np.ndarray:
    if not 0 <= coord.layer < net.depth:
        raise InvalidArgumentError(f"layer {coord.layer} out of range")
    if coord.name not in ("W", "b", "gamma", "sigma"):
        raise InvalidArgumentError(f"unknown parameter {coord.name!r}")
    arr = getattr(net.layers[coord.layer], coord.name)
    if len(coord.index) != arr.ndim or any(not 0 <= i < n for i, n in zip(coord.index, arr.shape)):
        raise InvalidArgumentError(f"index {coord.index} out of range for shape {arr.shape}")
    if coord.part not in ("re", "im") or (coord.name == "sigma" and coord.part == "im"):
        raise InvalidArgumentError(f"invalid part {coord.part!r} for {coord.name}")
    return arr


def _cost_extended(net: Network, x, d, coord: ParamCoord, step) -> np.longdouble:
    """Cost with one coordinate shifted by ``step``, evaluated in long double."""
    y = np.asarray(x, dtype=np.clongdouble)
    for l, layer in enumerate(net.layers):
        p = {name: getattr(layer, name).astype(np.clongdouble if name != "sigma" else np.longdouble)
             for name in ("W", "b", "gamma", "sigma")}
        if l == coord.layer:
            p[coord.name][coord.index] += step
        diff = y[None, :] - p["gamma"]
        v = np.sum(diff.real**2 + diff.imag**2, axis=1) / p["sigma"]
        phi = np.exp(-v)
        y = np.sum(p["W"] * phi[None, :], axis=1) + p["b"]
    e = np.asarray(d, dtype=np.clongdouble) - y
    return np.longdouble(0.5) * np.sum(e.real**2 + e.imag**2)


def fd_gradient(net: Network, x, d, coord: ParamCoord, h: float = 1e-5, extended: bool = False) -> float:
    """Central difference of the cost with respect to one real coordinate.

    With ``extended=True`` both perturbed costs are evaluated in long double,
    which removes the ~1e-12 round-off floor of the double-precision forward
    pass; the perturbed network is then never mutated.
    """
    if not h > 0:
        raise InvalidArgumentError("h must be positive")
    arr = _locate(net, coord)
    if extended:
        hl = np.longdouble(h)
        step = hl if coord.part == "re" else np.clongdouble(1j) * hl
        if coord.name == "sigma":
            step = hl
        j_plus = _cost_extended(net, x, d, coord, step)
        j_minus = _cost_extended(net, x, d, coord, -step)
        return float((j_plus - j_minus) / (2 * hl))
    original = arr[coord.index]
    step = h if coord.part == "re" else 1j * h
    try:
        arr[coord.index] = original + step
        j_plus = cost(d, network_forward(net, x))
        arr[coord.index] = original - step
        j_minus = cost(d, network_forward(net, x))
    finally:
        arr[coord.index] = original
        net.invalidate()
    return (j_plus - j_minus) / (2.0 * h)


def analytic_component(grads: list[dict[str, np.ndarray]], coord: ParamCoord) -> float:
    g = grads[coord.layer][coord.name][coord.index]
    return float(np.real(g) if coord.part == "re" else np.imag(g))


# --------------------------------------------------------------------------
# epochs


def _denormalizer(net: Network) -> Callable[[np.ndarray], np.ndarray]:
    if net.output_norm is None:
        return lambda y: y
    return net.output_norm.denormalize


def dataset_mse(net: Network, Y_hat, D) -> float:
    """Mean squared symbol error ``mean |d - y|^2`` in the original output scale."""
    denorm = _denormalizer(net)
    err = denorm(np.asarray(D)) - denorm(np.asarray(Y_hat))
    return float(np.mean(err.real**2 + err.imag**2))


def evaluate(net: Network, X, D) -> float:
    """MSE of the frozen network over a normalized dataset."""
    return dataset_mse(net, predict(net, X), D)


def train_epoch(
    net: Network,
    train_set: tuple[np.ndarray, np.ndarray],
    val_set: tuple[np.ndarray, np.ndarray] | None,
    cfg: TrainConfig,
    rng: np.random.Generator,
    epoch: int = 0,
    engine: str = "numba",
) -> EpochMetrics:
    """One pass of per-sample SGD over ``train_set`` followed by validation.

    Training MSE is accumulated online from each sample's output before its
    update; validation MSE uses the parameters frozen after the pass.
    ``engine="numpy"`` runs the reference layer-by-layer code path, ``"numba"``
    the compiled equivalent.
    """
    cfg.check_depth(net)
    X, D = (np.asarray(a, dtype=np.complex128) for a in train_set)
    if X.shape[0] != D.shape[0]:
        raise InvalidArgumentError("train inputs and targets differ in length")
    order = rng.permutation(X.shape[0]) if cfg.shuffle else np.arange(X.shape[0])
    hits_before = net.sigma_floor_hits

    if engine == "numba":
        Y_hat = _train_pass_numba(net, X, D, order, cfg, epoch)
    elif engine == "numpy":
        Y_hat = np.empty_like(D)
        for n in order:
            try:
                Y_hat[n] = network_forward(net, X[n])
                backward_and_update(net, D[n], cfg)
            except NumericOverflowError as exc:
                raise NumericOverflowError(f"epoch {epoch}, sample {n}: {exc}") from exc
    else:
        raise InvalidArgumentError(f"unknown engine {engine!r}")

    train_mse = dataset_mse(net, Y_hat, D)
    val_mse = evaluate(net, *val_set) if val_set is not None else float("nan")
    return EpochMetrics(epoch, train_mse, val_mse, net.sigma_floor_hits - hits_before)


def _train_pass_numba(net: Network, X, D, order, cfg: TrainConfig, epoch: int) -> np.ndarray:
    from numba.typed import List

    from ._kernels import sgd_pass

    Ws, bs, Gs, ss = List(), List(), List(), List()
    for layer in net.layers:
        Ws.append(layer.W)
        bs.append(layer.b)
        Gs.append(layer.gamma)
        ss.append(layer.sigma)
    rates = np.asarray(cfg.rates, dtype=np.float64)
    Y_hat = np.zeros_like(D)
    hits, bad = sgd_pass(Ws, bs, Gs, ss, X, D, order.astype(np.int64), rates, cfg.sigma_floor, Y_hat)
    net.invalidate()
    net.sigma_floor_hits += int(hits)
    if bad >= 0:
        raise NumericOverflowError(f"epoch {epoch}, sample {bad}: non-finite value during training")
    for l, name, arr in net.parameters():
        if not np.all(np.isfinite(arr)):
            raise NumericOverflowError(f"epoch {epoch}: layer {l} parameter {name} became non-finite")
    return Y_hat


def fit(
    net: Network,
    train_set,
    val_set,
    cfg: TrainConfig,
    rng: np.random.Generator,
    engine: str = "numba",
    callback: Callable[[EpochMetrics], None] | None = None,
) -> list[EpochMetrics]:
    """Train for ``cfg.epochs`` epochs and return the per-epoch metrics."""
    history = []
    for epoch in range(cfg.epochs):
        m = train_epoch(net, train_set, val_set, cfg, rng, epoch=epoch, engine=engine)
        history.append(m)
        if callback is not None:
            callback(m)
    return history
