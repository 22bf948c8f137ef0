"""
Gaussian sub-channel model: transmittance, noise, the nu coefficient, block
transmission through the multicarrier link and Monte Carlo bit error rates
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

import cvqkdadapt.numerics as numerics

logger = logging.getLogger(__name__)

# each component of the transmittance is bounded by 1/sqrt(2) so that |T|^2 <= 1
MAX_COMPONENT = math.sqrt(0.5)

# trials per independently seeded Monte Carlo chunk
MC_CHUNK = 1 << 18


class TransmittanceError(ValueError):
    pass


class DegenerateChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Transmittance:
    """
    Complex transmittance of a sub-channel, real and imaginary parts equal
    """
    re: float
    im: float

    def __post_init__(self):
        for name, value in (("re", self.re), ("im", self.im)):
            if not math.isfinite(value) or value < 0.0 or value > MAX_COMPONENT:
                raise TransmittanceError("transmittance %s=%s outside [0, 1/sqrt(2)]" % (name, value))
        if self.re != self.im:
            raise TransmittanceError("transmittance re == im constraint violated (re=%s, im=%s)"
                                     % (self.re, self.im))

    @classmethod
    def from_magnitude_sq(cls, magnitude_sq):
        if not 0.0 <= magnitude_sq <= 1.0:
            raise TransmittanceError("|T|^2=%s outside [0, 1]" % magnitude_sq)
        component = math.sqrt(magnitude_sq / 2.0)
        return cls(component, component)

    @property
    def magnitude_sq(self):
        return self.re ** 2 + self.im ** 2


@dataclass(frozen=True)
class SubChannel:
    """
    One Gaussian sub-channel. fourier_gain is |F(T)|^2 and defaults to |T|^2.
    """
    index: int
    transmittance: Transmittance
    noise_variance: float
    fourier_gain: float | None = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("sub-channel index must be >= 0, got %d" % self.index)
        if not math.isfinite(self.noise_variance) or self.noise_variance <= 0.0:
            raise ValueError("sub-channel %d: noise variance must be > 0, got %s"
                             % (self.index, self.noise_variance))
        if self.fourier_gain is None:
            object.__setattr__(self, "fourier_gain", self.transmittance.magnitude_sq)
        if not math.isfinite(self.fourier_gain) or self.fourier_gain < 0.0:
            raise ValueError("sub-channel %d: fourier gain must be >= 0, got %s"
                             % (self.index, self.fourier_gain))

    @property
    def nu(self):
        return nu(self)


def nu(ch):
    """
    Noise-to-gain ratio sigma^2 / |F(T)|^2 of a sub-channel

    >>> nu(SubChannel(0, Transmittance.from_magnitude_sq(1.0), 0.5, 1.0))
    0.5
    """
    if ch.fourier_gain == 0.0:
        raise DegenerateChannelError("sub-channel %d has zero fourier gain, nu is undefined" % ch.index)
    return ch.noise_variance / ch.fourier_gain


@dataclass(frozen=True)
class ChannelEnsemble:
    """
    The l information-bearing sub-channels out of n_total. The remaining n_total - l
    carry no useful information and are represented by their count only.
    """
    sub_channels: tuple
    n_total: int

    def __post_init__(self):
        object.__setattr__(self, "sub_channels", tuple(self.sub_channels))
        if not self.sub_channels:
            raise ValueError("an ensemble needs at least one sub-channel")
        indices = [ch.index for ch in self.sub_channels]
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate sub-channel indices in ensemble")
        if max(indices) >= self.n_total:
            raise ValueError("sub-channel index %d outside [0, %d)" % (max(indices), self.n_total))
        for ch in self.sub_channels:
            if ch.fourier_gain == 0.0:
                raise DegenerateChannelError("sub-channel %d has zero fourier gain" % ch.index)

    @property
    def l(self):  # noqa: E743
        return len(self.sub_channels)

    def indices(self):
        return [ch.index for ch in self.sub_channels]

    def nus(self):
        return np.array([nu(ch) for ch in self.sub_channels])

    def gains(self):
        return np.array([ch.fourier_gain for ch in self.sub_channels])

    def noise_variances(self):
        return np.array([ch.noise_variance for ch in self.sub_channels])

    def subset(self, indices):
        """
        Ensemble restricted to the given sub-channel indices (in the order given)
        """
        lookup = {ch.index: ch for ch in self.sub_channels}
        missing = [i for i in indices if i not in lookup]
        if missing:
            raise ValueError("sub-channel(s) %s not in ensemble" % missing)
        return ChannelEnsemble([lookup[i] for i in indices], self.n_total)

    def table(self):
        return pd.DataFrame({"SUBCHANNEL": self.indices(),
                             "NOISE_VARIANCE": self.noise_variances(),
                             "TRANSMITTANCE_SQ": [ch.transmittance.magnitude_sq for ch in self.sub_channels],
                             "FOURIER_GAIN": self.gains(),
                             "NU": self.nus()})

    @classmethod
    def generate(cls, l, n_total, noise_range, transmittance_range, rng):
        """
        Draws l sub-channels with uniform noise variance and |T|^2 in the given ranges
        """
        if l < 1 or l > n_total:
            raise ValueError("need 1 <= l <= n_total, got l=%d n_total=%d" % (l, n_total))
        noise = rng.uniform(noise_range[0], noise_range[1], l)
        t2 = rng.uniform(transmittance_range[0], transmittance_range[1], l)
        return cls([SubChannel(i, Transmittance.from_magnitude_sq(float(t2[i])), float(noise[i]))
                    for i in range(l)], n_total)


@dataclass(frozen=True)
class QuadratureBlock:
    """
    Complex quadratures z_j = x_j + i p_j at a given modulation variance (shot-noise units)
    """
    quadratures: np.ndarray
    modulation_variance: float = field(default=0.0)

    def __post_init__(self):
        z = np.asarray(self.quadratures, dtype=complex)
        if z.ndim != 1 or z.size == 0:
            raise ValueError("quadrature block must be a non-empty 1-d vector")
        if not np.all(np.isfinite(z)):
            raise ValueError("quadrature block contains non-finite values")
        object.__setattr__(self, "quadratures", z)

    def __len__(self):
        return self.quadratures.size

    @classmethod
    def draw(cls, length, modulation_variance, rng):
        """
        Gaussian-modulated block, real and imaginary parts i.i.d. N(0, modulation_variance)
        """
        return cls(numerics.complex_gaussian(rng, modulation_variance, length), modulation_variance)


def transmit_block(block, ens, rng):
    """
    Sends a block through the multicarrier link. The inverse DFT spreads the block over
    the subcarriers; after the receiver DFT, bin i is sub-channel i and gets its own
    amplitude F(T_i) and noise: y_i = F(T_i) d_i + Delta_i, Delta_i ~ N(0, sigma_i^2) per part.
    """
    if len(block) != ens.l:
        raise ValueError("block length %d does not match %d sub-channels" % (len(block), ens.l))
    d = numerics.dft(numerics.idft(block.quadratures))
    noise = numerics.complex_gaussian(rng, ens.noise_variances(), ens.l)
    y = np.sqrt(ens.gains()) * d + noise
    return QuadratureBlock(y, block.modulation_variance)


def monte_carlo_ber(snr_db, trials, rng_or_seed=None):
    """
    Empirical BER of antipodal signalling on one quadrature over AWGN at the given SNR,
    with hard sign decisions. The expected value is 0.5 * erfc(sqrt(SNR)).

    Trials are split in fixed-size chunks, each with its own spawned stream, so the
    result depends only on the seed and the trial count.
    """
    if trials < 1:
        raise ValueError("monte carlo needs at least one trial")
    amplitude = math.sqrt(numerics.snr_linear(snr_db))
    seed = rng_or_seed
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2 ** 63))
    n_chunks = -(-trials // MC_CHUNK)
    errors = 0
    for chunk, rng in enumerate(numerics.spawn_rngs(seed, n_chunks)):
        n = min(MC_CHUNK, trials - chunk * MC_CHUNK)
        bits = rng.integers(0, 2, n)
        # noise variance 1/2 gives P(error) = erfc(A) / 2
        received = amplitude * (1 - 2 * bits) + rng.normal(0.0, math.sqrt(0.5), n)
        errors += int(np.count_nonzero((received < 0) != (bits == 1)))
    ber = errors / trials
    logger.debug("monte carlo at %s dB: %d errors in %d trials", snr_db, errors, trials)
    return ber


def analytic_ber(snr_db):
    """
    0.5 * erfc(sqrt(SNR_linear)), the antipodal-over-AWGN error probability
    """
    return 0.5 * numerics.erfc(math.sqrt(numerics.snr_linear(snr_db)))
