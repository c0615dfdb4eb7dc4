"""Complex array helpers: circular Gaussian sampling, dataset moments, distances.

Complex matrices and vectors are plain ``numpy`` arrays of dtype
``complex128``; real vectors are ``float64``.  All statistics use the
population convention (divide by N).

Random numbers come from ``numpy.random.Generator`` backed by PCG64.  Normal
variates are drawn with numpy's ziggurat sampler (``standard_normal``), so a
given (seed, stream) pair reproduces the same samples on any platform running
the same numpy generator.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional sub-stream path.

    ``make_rng(seed, k)`` gives worker ``k`` a stream that is statistically
    independent of ``make_rng(seed, j)`` for ``j != k``.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def cg_sample(rows: int, cols: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Draw a ``rows x cols`` matrix of i.i.d. CG(0, variance) entries.

    The total variance is split evenly, so real and imaginary parts are each
    N(0, variance / 2).
    """
    if not np.isfinite(variance):
        raise InvalidArgumentError(f"variance must be finite, got {variance}")
    if variance < 0:
        raise InvalidArgumentError(f"variance must be non-negative, got {variance}")
    if rows < 1 or cols < 1:
        raise InvalidArgumentError(f"shape must be positive, got ({rows}, {cols})")
    # one draw of shape (rows, cols, 2) keeps re/im interleaved per entry
    z = rng.standard_normal((rows, cols, 2))
    scale = np.sqrt(variance / 2.0)
    return scale * (z[..., 0] + 1j * z[..., 1])


def _as_nonempty(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.complex128)
    if arr.size == 0:
        raise InvalidArgumentError("data must be nonempty")
    return arr


def complex_mean(data) -> complex:
    """Arithmetic mean over every entry of ``data``."""
    arr = _as_nonempty(data)
    return complex(arr.mean())


def complex_variance(data) -> float:
    """Total complex variance ``E|z - mu|^2`` over every entry of ``data``."""
    arr = _as_nonempty(data)
    centered = arr - arr.mean()
    return float(np.mean(centered.real**2 + centered.imag**2))


def component_stats(data) -> tuple[float, float, float, float]:
    """Return ``(mean_re, mean_im, var_re, var_im)`` of the entries of ``data``."""
    arr = _as_nonempty(data)
    re, im = arr.real, arr.imag
    return float(re.mean()), float(im.mean()), float(re.var()), float(im.var())


def sq_distance(a, b) -> float:
    """Squared Euclidean distance between two complex vectors."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"length mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sum(diff.real**2 + diff.imag**2))
