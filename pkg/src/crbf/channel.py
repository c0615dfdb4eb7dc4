"""Flat-fading MIMO surrogate task: 16-QAM over a 4x4 Rayleigh channel with AWGN.

Each sample's target is the 4-symbol vector ``s[t]`` sent in slot ``t``; the
input stacks the received vectors ``r[t], r[t-1], r[t-2], r[t-3]`` (16
entries) with ``r = H s + n``.  ``H`` is drawn once per run (block fading, no
Doppler).  ``input_scheme="zero-pad"`` replaces the three past slots with
zeros.

Gray mapping, per axis (two bits each, first pair on the in-phase axis)::

    bits  00  01  11  10
    level -3  -1  +1  +3

so ``qam16_map(0b b3 b2 b1 b0) = (level(b3 b2) + 1j*level(b1 b0)) / sqrt(10)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .complex_linalg import cg_sample
from .errors import InvalidArgumentError

BITS_PER_SYMBOL = 4
N_ANTENNAS = 4
HISTORY = 3
_GRAY_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])  # indexed by the 2-bit value 00, 01, 10, 11


def qam16_map(bits: int) -> complex:
    """Gray-mapped, unit-average-power 16-QAM symbol for a 4-bit integer."""
    if not isinstance(bits, (int, np.integer)) or not 0 <= bits <= 15:
        raise InvalidArgumentError(f"16-QAM input must be an integer in 0..15, got {bits!r}")
    return complex(_GRAY_LEVELS[bits >> 2], _GRAY_LEVELS[bits & 0b11]) / np.sqrt(10.0)


QAM16 = np.array([qam16_map(k) for k in range(16)])


@dataclass(frozen=True)
class Constellation:
    name: str = "QAM16"
    symbols: np.ndarray = field(default_factory=lambda: QAM16.copy())
    bits_per_symbol: int = BITS_PER_SYMBOL


@dataclass
class ChannelRealization:
    H: np.ndarray  # (n_rx, n_tx)
    seed: int | None = None


def rayleigh_mimo(n_tx: int, n_rx: int, rng: np.random.Generator, seed: int | None = None) -> ChannelRealization:
    """i.i.d. CG(0, 1) channel gains, so ``|H_ij|`` is Rayleigh distributed."""
    if n_tx < 1 or n_rx < 1:
        raise InvalidArgumentError("antenna counts must be >= 1")
    return ChannelRealization(cg_sample(n_rx, n_tx, 1.0, rng), seed)


def awgn_variance(ebn0_db: float, bits_per_symbol: int = BITS_PER_SYMBOL, symbol_power: float = 1.0) -> float:
    """Total complex noise variance ``N0 = Es / (k * 10^(EbN0/10))``."""
    if bits_per_symbol < 1:
        raise InvalidArgumentError("bits_per_symbol must be >= 1")
    if not symbol_power > 0:
        raise InvalidArgumentError("symbol_power must be positive")
    return symbol_power / (bits_per_symbol * 10.0 ** (ebn0_db / 10.0))


@dataclass
class SupervisedDataset:
    inputs: np.ndarray  # (N, 16)
    targets: np.ndarray  # (N, 4)
    ebn0_db: float
    seed: int | None
    channel: ChannelRealization
    noise: np.ndarray | None = None  # (N + HISTORY, n_rx), kept for diagnostics

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def split(self, n_train: int) -> tuple["SupervisedDataset", "SupervisedDataset"]:
        def part(sl):
            return SupervisedDataset(self.inputs[sl], self.targets[sl], self.ebn0_db, self.seed, self.channel)

        return part(slice(0, n_train)), part(slice(n_train, None))


def generate_dataset(
    n_samples: int,
    ebn0_db: float,
    channel: ChannelRealization,
    rng: np.random.Generator,
    noise_variance: float | None = None,
    input_scheme: str = "stack",
    seed: int | None = None,
) -> SupervisedDataset:
    """Draw ``n_samples`` consecutive symbol slots through ``channel``.

    ``noise_variance`` overrides the value derived from ``ebn0_db``.
    """
    H = np.asarray(channel.H)
    if H.shape != (N_ANTENNAS, N_ANTENNAS):
        raise InvalidArgumentError(f"channel must be {N_ANTENNAS}x{N_ANTENNAS}, got {H.shape}")
    if n_samples < 1:
        raise InvalidArgumentError("n_samples must be >= 1")
    if input_scheme not in ("stack", "zero-pad"):
        raise InvalidArgumentError(f"unknown input scheme {input_scheme!r}")
    n0 = awgn_variance(ebn0_db) if noise_variance is None else float(noise_variance)

    n_slots = n_samples + HISTORY
    idx = rng.integers(16, size=(n_slots, N_ANTENNAS))
    s = QAM16[idx]
    noise = cg_sample(n_slots, N_ANTENNAS, n0, rng)
    r = s @ H.T + noise

    if input_scheme == "stack":
        cols = [r[HISTORY - k: n_slots - k] for k in range(HISTORY + 1)]
    else:
        zeros = np.zeros((n_samples, N_ANTENNAS), dtype=np.complex128)
        cols = [r[HISTORY:]] + [zeros] * HISTORY
    inputs = np.concatenate(cols, axis=1)
    targets = s[HISTORY:].copy()
    return SupervisedDataset(inputs, targets, float(ebn0_db), seed, channel, noise)


def write_dataset_csv(ds: SupervisedDataset, path) -> None:
    """CSV with ``index``, 16 input (re, im) pairs and 4 target (re, im) pairs per row."""
    path = Path(path)
    header = ["index"]
    header += [f"x{j}_{p}" for j in range(ds.inputs.shape[1]) for p in ("re", "im")]
    header += [f"d{j}_{p}" for j in range(ds.targets.shape[1]) for p in ("re", "im")]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(len(ds)):
            row = [n]
            for z in np.concatenate([ds.inputs[n], ds.targets[n]]):
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    n_in = sum(1 for h in header if h.startswith("x")) // 2
    vals = body[:, 1:]
    z = vals[:, 0::2] + 1j * vals[:, 1::2]
    return z[:, :n_in], z[:, n_in:]
