"""Dataset normalization and parameter initialization for C-RBF networks.

The proposed scheme sizes every random draw from the architecture so that the
first layer's kernel input has expected value ``mu_v`` and the output variance
matches that of the normalized targets:

* inputs are normalized to zero mean and total variance ``c_sigma*mu_v/(2P)``,
  targets to ``c_sigma*mu_v/(2R)``;
* centers of layer ``l`` are ``CG(0, c_sigma*mu_v[l]/(2*O[l-1]))`` with ``O[0] = P``;
* biases start at zero and kernel variances at ``c_sigma``;
* weights are drawn with the variance returned by :func:`weight_variance`.

Three baselines (random, K-means and constellation-based centers) share
``b = 0``, ``sigma = 1`` and ``W ~ CG(0, 1)`` so only the centers differ.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .complex_linalg import cg_sample, complex_mean, complex_variance, component_stats
from .errors import InvalidArgumentError, UnsupportedSchemeError
from .network import Layer, Network, predict

#: Per-component variance ratio inside which the symmetric normalization is used.
SYMMETRY_TOLERANCE = (0.9, 1.1)


class Scheme(str, enum.Enum):
    PROPOSED = "proposed"
    RANDOM = "random"
    KMEANS = "kmeans"
    CONSTELLATION = "constellation"


@dataclass
class InitConfig:
    scheme: Scheme = Scheme.PROPOSED
    c_sigma: float = 1.0
    mu_v: float | Sequence[float] = 1.0
    random_center_variance: float = 1.0
    kmeans_max_iter: int = 300
    seed: int = 0

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if not self.c_sigma > 0:
            raise InvalidArgumentError("c_sigma must be positive and nonzero")
        mus = np.atleast_1d(np.asarray(self.mu_v, dtype=float))
        if not np.all(mus > 0):
            raise InvalidArgumentError("mu_v must be positive")
        if self.random_center_variance < 0:
            raise InvalidArgumentError("random_center_variance must be >= 0")

    def mu(self, l: int, depth: int) -> float:
        """Target kernel input of (zero-based) layer ``l``; index ``depth`` means the output."""
        mus = np.atleast_1d(np.asarray(self.mu_v, dtype=float))
        if mus.size == 1:
            return float(mus[0])
        if mus.size != depth:
            raise InvalidArgumentError(f"mu_v has {mus.size} entries for a {depth}-layer network")
        return float(mus[min(l, depth - 1)])


@dataclass(frozen=True)
class NetShape:
    """Dimensions ``P``, neurons per layer ``I`` and outputs per layer ``O`` (``O[-1] == R``)."""

    P: int
    neurons: tuple[int, ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        if self.P < 1 or not self.neurons or len(self.neurons) != len(self.outputs):
            raise InvalidArgumentError(f"invalid network shape {self}")
        if min(self.neurons) < 1 or min(self.outputs) < 1:
            raise InvalidArgumentError(f"layer sizes must be >= 1: {self}")

    @classmethod
    def build(cls, P: int, neurons: Sequence[int], R: int, hidden_outputs: Sequence[int] | int | None = None):
        """Shape from neuron counts; hidden layers output ``R`` values unless told otherwise."""
        neurons = tuple(int(n) for n in neurons)
        L = len(neurons)
        if hidden_outputs is None:
            hidden = (R,) * (L - 1)
        elif isinstance(hidden_outputs, (int, np.integer)):
            hidden = (int(hidden_outputs),) * (L - 1)
        else:
            hidden = tuple(int(o) for o in hidden_outputs)
            if len(hidden) != L - 1:
                raise InvalidArgumentError(f"need {L - 1} hidden output sizes, got {len(hidden)}")
        return cls(int(P), neurons, hidden + (int(R),))

    @property
    def R(self) -> int:
        return self.outputs[-1]

    @property
    def depth(self) -> int:
        return len(self.neurons)

    def inputs_of(self, l: int) -> int:
        return self.P if l == 0 else self.outputs[l - 1]


# --------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormStats:
    """Affine map between raw data and its normalized form.

    Symmetric mode: ``z = (x - mu) / sqrt(var) * scale``.
    Asymmetric mode normalizes each component by ``sqrt(2 * var_component)``.
    """

    mode: str
    scale: float
    mu: complex = 0j
    var: float = 1.0
    mu_re: float = 0.0
    mu_im: float = 0.0
    var_re: float = 0.5
    var_im: float = 0.5

    def normalize(self, data) -> np.ndarray:
        x = np.asarray(data, dtype=np.complex128)
        if self.mode == "symmetric":
            return (x - self.mu) / np.sqrt(self.var) * self.scale
        re = (x.real - self.mu_re) / np.sqrt(2.0 * self.var_re)
        im = (x.imag - self.mu_im) / np.sqrt(2.0 * self.var_im)
        return (re + 1j * im) * self.scale

    def denormalize(self, data) -> np.ndarray:
        z = np.asarray(data, dtype=np.complex128)
        if self.mode == "symmetric":
            return z / self.scale * np.sqrt(self.var) + self.mu
        re = z.real / self.scale * np.sqrt(2.0 * self.var_re) + self.mu_re
        im = z.imag / self.scale * np.sqrt(2.0 * self.var_im) + self.mu_im
        return re + 1j * im

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "scale": self.scale,
            "mu": [self.mu.real, self.mu.imag],
            "var": self.var,
            "mu_re": self.mu_re,
            "mu_im": self.mu_im,
            "var_re": self.var_re,
            "var_im": self.var_im,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        d = dict(d)
        d["mu"] = complex(*d["mu"])
        return cls(**d)


def target_variance(n: int, c_sigma: float = 1.0, mu_v: float = 1.0) -> float:
    """Total variance ``c_sigma * mu_v / (2n)`` of a normalized dataset with ``n`` columns."""
    return c_sigma * mu_v / (2.0 * n)


def fit_norm_stats(data, n: int, c_sigma: float = 1.0, mu_v: float = 1.0) -> NormStats:
    arr = np.asarray(data, dtype=np.complex128)
    if arr.size == 0:
        raise InvalidArgumentError("dataset is empty")
    if arr.ndim == 2 and arr.shape[1] != n:
        raise InvalidArgumentError(f"dataset has {arr.shape[1]} columns, expected {n}")
    scale = float(np.sqrt(target_variance(n, c_sigma, mu_v)))
    mu_re, mu_im, var_re, var_im = component_stats(arr)
    lo, hi = SYMMETRY_TOLERANCE
    symmetric = var_re > 0 and var_im > 0 and lo <= var_re / var_im <= hi
    if symmetric:
        return NormStats("symmetric", scale, mu=complex_mean(arr), var=complex_variance(arr),
                         mu_re=mu_re, mu_im=mu_im, var_re=var_re, var_im=var_im)
    if var_re == 0 and var_im == 0:
        raise InvalidArgumentError("dataset has zero variance")
    if var_re == 0:
        raise InvalidArgumentError("real component has zero variance")
    if var_im == 0:
        raise InvalidArgumentError("imaginary component has zero variance")
    return NormStats("asymmetric", scale, mu=complex_mean(arr), var=complex_variance(arr),
                     mu_re=mu_re, mu_im=mu_im, var_re=var_re, var_im=var_im)


def normalize_input(x, P: int, c_sigma: float = 1.0, mu_v1: float = 1.0):
    """Return ``(x_bar, stats)``: ``x`` shifted to zero mean, variance ``c_sigma*mu_v1/(2P)``."""
    stats = fit_norm_stats(x, P, c_sigma, mu_v1)
    return stats.normalize(x), stats


def normalize_output(d, R: int, c_sigma: float = 1.0, mu_vL: float = 1.0):
    """Return ``(d_bar, stats)``; same map as :func:`normalize_input` with ``R`` columns."""
    stats = fit_norm_stats(d, R, c_sigma, mu_vL)
    return stats.normalize(d), stats


def denormalize_output(y_bar, stats: NormStats) -> np.ndarray:
    return stats.denormalize(y_bar)


# --------------------------------------------------------------------------
# variance targets of the proposed scheme


def center_variance(shape: NetShape, l: int, cfg: InitConfig) -> float:
    return cfg.c_sigma * cfg.mu(l, shape.depth) / (2.0 * shape.inputs_of(l))


def output_variance_factor(shape: NetShape, l: int, cfg: InitConfig) -> float:
    """``Var(y[l]) / Var(W[l])`` predicted for zero biases and proposed centers."""
    var_g = center_variance(shape, l, cfg)
    mu = cfg.mu(l, shape.depth)
    ratio = var_g / (cfg.c_sigma * np.exp(mu))
    return 12.0 / 5.0 * ratio**2 * shape.neurons[l] * shape.inputs_of(l)


def weight_variance(shape: NetShape, l: int, cfg: InitConfig) -> float:
    """Variance of ``W[l]`` in the proposed scheme.

    The last layer matches the output variance to the normalized-target
    variance ``c_sigma*mu_v[L]/(2R)``.  Hidden layers use the closed form
    ``5 c O[l-1] / (6 I[l] O[l] mu_v[l+1] exp(-2 mu_v[l]))``.
    """
    L = shape.depth
    c = cfg.c_sigma
    if l == L - 1:
        return target_variance(shape.R, c, cfg.mu(l, L)) / output_variance_factor(shape, l, cfg)
    mu_l, mu_next = cfg.mu(l, L), cfg.mu(l + 1, L)
    return 5.0 * c * shape.inputs_of(l) / (
        6.0 * shape.neurons[l] * shape.outputs[l] * mu_next * np.exp(-2.0 * mu_l)
    )


# --------------------------------------------------------------------------
# schemes


def _assemble(shape: NetShape, gammas, Ws, sigmas) -> Network:
    layers = []
    for l in range(shape.depth):
        layers.append(Layer(W=Ws[l], b=np.zeros(shape.outputs[l], dtype=np.complex128),
                            gamma=gammas[l], sigma=sigmas[l]))
    return Network(P=shape.P, R=shape.R, layers=layers)


def init_proposed(shape: NetShape, cfg: InitConfig, rng: np.random.Generator) -> Network:
    gammas, Ws, sigmas = [], [], []
    for l in range(shape.depth):
        I, O_prev, O = shape.neurons[l], shape.inputs_of(l), shape.outputs[l]
        gammas.append(cg_sample(I, O_prev, center_variance(shape, l, cfg), rng))
        Ws.append(cg_sample(O, I, weight_variance(shape, l, cfg), rng))
        sigmas.append(np.full(I, cfg.c_sigma))
    return _assemble(shape, gammas, Ws, sigmas)


def _baseline_weights(shape: NetShape, rng) -> tuple[list, list]:
    Ws = [cg_sample(shape.outputs[l], shape.neurons[l], 1.0, rng) for l in range(shape.depth)]
    sigmas = [np.ones(shape.neurons[l]) for l in range(shape.depth)]
    return Ws, sigmas


def init_random(shape: NetShape, cfg: InitConfig, rng: np.random.Generator) -> Network:
    gammas = [
        cg_sample(shape.neurons[l], shape.inputs_of(l), cfg.random_center_variance, rng)
        for l in range(shape.depth)
    ]
    Ws, sigmas = _baseline_weights(shape, rng)
    return _assemble(shape, gammas, Ws, sigmas)


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, dim) real
    labels: np.ndarray
    inertia_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def kmeans(points, k: int, rng: np.random.Generator, max_iter: int = 300, tol: float = 1e-8) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding on real ``(n, dim)`` points."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise InvalidArgumentError("points must be a 2-D array")
    if k < 1 or points.shape[0] < k:
        raise InvalidArgumentError(f"need at least k={k} points, got {points.shape[0]}")
    centers = _kmeanspp(points, k, rng)
    result = KMeansResult(centers, np.zeros(points.shape[0], dtype=int))
    for it in range(1, max_iter + 1):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        result.inertia_history.append(float(d2[np.arange(len(labels)), labels].sum()))
        new = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):  # empty clusters keep their previous centroid
                new[j] = members.mean(axis=0)
        shift = float(np.max(np.sqrt(((new - centers) ** 2).sum(axis=1))))
        centers = new
        result.labels, result.iterations = labels, it
        if shift < tol:
            result.converged = True
            break
    result.centroids = centers
    return result


def _complex_to_real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=1)


def _real_to_complex(r: np.ndarray) -> np.ndarray:
    half = r.shape[1] // 2
    return r[:, :half] + 1j * r[:, half:]


def init_kmeans(shape: NetShape, cfg: InitConfig, x_bar, rng: np.random.Generator) -> Network:
    if shape.depth != 1:
        raise UnsupportedSchemeError("K-means initialization only supports single-layer networks")
    x_bar = np.asarray(x_bar, dtype=np.complex128)
    if x_bar.ndim != 2 or x_bar.shape[1] != shape.P:
        raise InvalidArgumentError(f"expected an (N, {shape.P}) normalized input matrix")
    res = kmeans(_complex_to_real(x_bar), shape.neurons[0], rng, max_iter=cfg.kmeans_max_iter)
    Ws, sigmas = _baseline_weights(shape, rng)
    return _assemble(shape, [_real_to_complex(res.centroids)], Ws, sigmas)


def constellation_centers(n_neurons: int, n_inputs: int, alphabet, target_var: float, rng):
    """Draw centers entrywise from ``alphabet``; return ``(raw, rescaled)``.

    The rescaled copy has the alphabet's zero-mean, ``target_var`` statistics.
    """
    alphabet = np.asarray(alphabet, dtype=np.complex128).ravel()
    if alphabet.size == 0:
        raise InvalidArgumentError("alphabet must be nonempty")
    raw = alphabet[rng.integers(alphabet.size, size=(n_neurons, n_inputs))]
    var_a = complex_variance(alphabet)
    if var_a == 0:
        return raw, np.zeros_like(raw)
    scaled = (raw - complex_mean(alphabet)) / np.sqrt(var_a) * np.sqrt(target_var)
    return raw, scaled


def init_constellation(shape: NetShape, cfg: InitConfig, alphabet, rng: np.random.Generator) -> Network:
    gammas = []
    for l in range(shape.depth):
        var = center_variance(shape, l, cfg)
        if l == 0:
            gammas.append(constellation_centers(shape.neurons[0], shape.P, alphabet, var, rng)[1])
        else:
            gammas.append(cg_sample(shape.neurons[l], shape.inputs_of(l), var, rng))
    Ws, sigmas = _baseline_weights(shape, rng)
    return _assemble(shape, gammas, Ws, sigmas)


def initialize(shape: NetShape, cfg: InitConfig, rng: np.random.Generator, *, x_bar=None, alphabet=None) -> Network:
    """Dispatch on ``cfg.scheme``."""
    if cfg.scheme is Scheme.PROPOSED:
        return init_proposed(shape, cfg, rng)
    if cfg.scheme is Scheme.RANDOM:
        return init_random(shape, cfg, rng)
    if cfg.scheme is Scheme.KMEANS:
        if x_bar is None:
            raise InvalidArgumentError("K-means initialization needs the normalized inputs")
        return init_kmeans(shape, cfg, x_bar, rng)
    if alphabet is None:
        raise InvalidArgumentError("constellation initialization needs an alphabet")
    return init_constellation(shape, cfg, alphabet, rng)


# --------------------------------------------------------------------------
# statistics check


@dataclass
class InitReport:
    mean_v1: float
    target_v1: float
    output_variance: float
    target_output_variance: float
    v1_ok: bool
    output_ok: bool

    @property
    def passed(self) -> bool:
        return self.v1_ok and self.output_ok


def measure_init_statistics(net: Network, probe) -> tuple[float, float]:
    """Mean first-layer kernel input and mean per-output variance of ``y^L`` over ``probe``."""
    X = np.asarray(probe, dtype=np.complex128)
    first = net.layers[0]
    diff = X[:, None, :] - first.gamma[None, :, :]
    v1 = np.sum(diff.real**2 + diff.imag**2, axis=2) / first.sigma
    Y = predict(net, X)
    centered = Y - Y.mean(axis=0)
    var_y = float(np.mean(centered.real**2 + centered.imag**2))
    return float(v1.mean()), var_y


def verify_init_statistics(
    net: Network,
    probe,
    cfg: InitConfig | None = None,
    v1_bounds: tuple[float, float] = (0.9, 1.1),
    output_rel_tol: float = 0.30,
) -> InitReport:
    """Compare measured kernel-input mean and output variance with their design targets.

    ``v1_bounds`` are relative to the target ``mu_v[1]``; the output variance is
    the per-output variance over the probe set, averaged across outputs.
    """
    cfg = cfg or InitConfig()
    L = net.depth
    target_v1 = cfg.mu(0, L)
    target_y = target_variance(net.R, cfg.c_sigma, cfg.mu(L - 1, L))
    mean_v1, var_y = measure_init_statistics(net, probe)
    lo, hi = v1_bounds
    return InitReport(
        mean_v1=mean_v1,
        target_v1=target_v1,
        output_variance=var_y,
        target_output_variance=target_y,
        v1_ok=lo * target_v1 <= mean_v1 <= hi * target_v1,
        output_ok=abs(var_y - target_y) <= output_rel_tol * target_y,
    )
