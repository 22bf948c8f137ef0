"""
Numerical kernels: complementary error function, seeded Gaussian sampling and
the unitary discrete Fourier transform of complex quadrature vectors
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

# default seed when neither the config nor the caller supplies one
DEFAULT_SEED = 0


def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise ValueError("%s must be finite" % what)


def erfc(x):
    """
    Complementary error function (2/sqrt(pi)) * integral_x^inf exp(-t^2) dt

    Accepts a scalar or an array. Non-finite input is a domain error.

    >>> erfc(0.0)
    1.0
    """
    _check_finite(x, "erfc argument")
    if np.isscalar(x):
        return float(special.erfc(x))
    return special.erfc(np.asarray(x, dtype=float))


def make_rng(seed=None):
    """
    Returns a numpy Generator for the given seed (a SeedSequence is also accepted)
    """
    if seed is None:
        seed = DEFAULT_SEED
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        if int(seed) < 0 or int(seed) >= 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer, got %s" % seed)
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed, n):
    """
    Splits a seed into n independent, reproducible generator streams
    """
    if n < 1:
        raise ValueError("number of streams must be >= 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(
        DEFAULT_SEED if seed is None else int(seed))
    # children depend only on (entropy, spawn_key), never on earlier spawn() calls
    children = [np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i,)) for i in range(n)]
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def stream(seed, *keys):
    """
    Named child stream of a seed: the same (seed, keys) always give the same SeedSequence
    """
    return np.random.SeedSequence(DEFAULT_SEED if seed is None else int(seed), spawn_key=tuple(int(k) for k in keys))


def gaussian_sample(rng, mean, variance, size=None):
    """
    Draws i.i.d. samples from N(mean, variance). Zero variance returns the mean exactly.
    """
    _check_finite(mean, "mean")
    _check_finite(variance, "variance")
    if np.any(np.asarray(variance) < 0):
        raise ValueError("variance must be >= 0, got %s" % variance)
    if np.isscalar(variance) and variance == 0:
        return float(mean) if size is None else np.full(size, float(mean))
    return rng.normal(mean, np.sqrt(variance), size)


def complex_gaussian(rng, variance, size):
    """
    Circular complex vector whose real and imaginary parts are each i.i.d. N(0, variance)
    """
    return gaussian_sample(rng, 0.0, variance, size) + 1j * gaussian_sample(rng, 0.0, variance, size)


def _as_complex_vec(v):
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty 1-d complex vector, got shape %s" % str(v.shape))
    _check_finite(v, "vector components")
    return v


def dft(v):
    """
    Unitary DFT (1/sqrt(n) normalisation)
    """
    return np.fft.fft(_as_complex_vec(v), norm="ortho")


def idft(v):
    """
    Unitary inverse DFT, the exact inverse of dft()
    """
    return np.fft.ifft(_as_complex_vec(v), norm="ortho")


def snr_linear(snr_db):
    """
    dB -> linear power ratio; -inf dB maps to 0
    """
    if snr_db == -math.inf:
        return 0.0
    _check_finite(snr_db, "snr_db")
    return 10.0 ** (snr_db / 10.0)
