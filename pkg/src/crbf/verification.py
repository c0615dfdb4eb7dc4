"""Self-checks: finite-difference gradient suite, shallow/deep agreement, init statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complex_linalg import cg_sample, make_rng
from .initialization import InitConfig, InitReport, NetShape, init_proposed, target_variance, verify_init_statistics
from .network import Network, network_forward
from .training import (
    ParamCoord,
    TrainConfig,
    analytic_component,
    backward_and_update,
    fd_gradient,
    gradients,
    shallow_update,
    update_scale,
)

GRAD_RTOL = 1e-6
GRAD_ATOL = 1e-9
SMALL_GRAD = 1e-6


@dataclass
class GradCheck:
    coord: ParamCoord
    analytic: float
    numeric: float

    @property
    def abs_err(self) -> float:
        return abs(self.analytic - self.numeric)

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return 0.0 if scale == 0 else self.abs_err / scale

    @property
    def ok(self) -> bool:
        if max(abs(self.analytic), abs(self.numeric)) < SMALL_GRAD:
            return self.abs_err < GRAD_ATOL
        return self.rel_err < GRAD_RTOL


def all_coords(net: Network) -> list[ParamCoord]:
    coords = []
    for l, name, arr in net.parameters():
        parts = ("re",) if name == "sigma" else ("re", "im")
        for idx in np.ndindex(arr.shape):
            for part in parts:
                coords.append(ParamCoord(l, name, idx, part))
    return coords


def random_problem(rng, P=3, neurons=(4, 2), R=2) -> tuple[Network, np.ndarray, np.ndarray]:
    """Proposed-initialized network plus one normalized-scale sample ``(x, d)``."""
    net = init_proposed(NetShape.build(P, neurons, R), InitConfig(), rng)
    x = cg_sample(1, P, target_variance(P), rng)[0]
    d = cg_sample(1, R, target_variance(R), rng)[0]
    return net, x, d


def gradient_suite(seed: int = 0, min_coords: int = 200, h: float = 1e-5, extended: bool = True) -> list[GradCheck]:
    """Compare analytic gradients with central differences on fresh random problems
    until at least ``min_coords`` coordinates have been checked."""
    rng = make_rng(seed)
    checks: list[GradCheck] = []
    while len(checks) < min_coords:
        net, x, d = random_problem(rng)
        network_forward(net, x)
        grads = gradients(net, d)
        for coord in all_coords(net):
            checks.append(
                GradCheck(coord, analytic_component(grads, coord), fd_gradient(net, x, d, coord, h, extended))
            )
    return checks


def update_direction_suite(seed: int = 0, eta: float = 1e-3, h: float = 1e-5) -> list[tuple[ParamCoord, float, float]]:
    """Return ``(coord, increment, -eta * scale * fd_gradient)`` for one update step."""
    rng = make_rng(seed)
    net, x, d = random_problem(rng)
    cfg = TrainConfig([(eta,) * 4] * net.depth)
    fds = {c: fd_gradient(net, x, d, c, h) for c in all_coords(net)}
    before = net.clone()
    network_forward(net, x)
    backward_and_update(net, d, cfg)
    out = []
    for c, g in fds.items():
        old = getattr(before.layers[c.layer], c.name)[c.index]
        new = getattr(net.layers[c.layer], c.name)[c.index]
        inc = (new - old).real if c.part == "re" else (new - old).imag
        out.append((c, float(inc), -eta * update_scale(net.depth, c.layer, c.name) * g))
    return out


def shallow_equivalence(seed: int = 0, n_samples: int = 100, rates=(0.1, 0.1, 0.4, 0.2)) -> float:
    """Largest relative difference between deep-path and closed-form single-layer updates."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        net, x, d = random_problem(rng, P=16, neurons=(8,), R=4)
        twin = net.clone()
        network_forward(net, x)
        backward_and_update(net, d, TrainConfig([rates]))
        network_forward(twin, x)
        shallow_update(twin.layers[0], d, rates)
        for name in ("W", "b", "gamma", "sigma"):
            a = getattr(net.layers[0], name)
            b = getattr(twin.layers[0], name)
            scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
            worst = max(worst, float(np.max(np.abs(a - b)) / scale))
    return worst


def init_statistics(seed: int = 0, n_probe: int = 10_000, n_draws: int = 20, P=16, neurons=(64,), R=4):
    """Monte-Carlo check of the proposed scheme on a normalized Gaussian probe.

    Returns ``(first_report, mean_output_variance)`` where the second value is
    the output variance averaged over ``n_draws`` independent initializations.
    """
    rng = make_rng(seed)
    shape = NetShape.build(P, neurons, R)
    probe = cg_sample(n_probe, P, target_variance(P), rng)
    reports: list[InitReport] = []
    for _ in range(n_draws):
        net = init_proposed(shape, InitConfig(), rng)
        reports.append(verify_init_statistics(net, probe))
    return reports[0], float(np.mean([r.output_variance for r in reports]))
