"""
Private rate curves of the adaption region, per-rate nu profiles and the SNR mapping
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# RateIndex kinds, in ladder order
ZERO = 0
MIN = 1
LEVEL = 2
MAX = 3

_KIND_LABELS = {ZERO: "zero", MIN: "min", MAX: "max"}


class LadderError(ValueError):
    pass


class ProfileError(ValueError):
    pass


class ProfileIncompleteError(KeyError):
    pass


@dataclass(frozen=True, order=True)
class RateIndex:
    """
    Position on the ladder: zero < min < level(0) < ... < level(r-1) < max
    """
    kind: int
    level: int = 0

    @classmethod
    def zero(cls):
        return cls(ZERO)

    @classmethod
    def minimum(cls):
        return cls(MIN)

    @classmethod
    def at_level(cls, q):
        if q < 0:
            raise ValueError("rate level must be >= 0, got %d" % q)
        return cls(LEVEL, q)

    @classmethod
    def maximum(cls):
        return cls(MAX)

    @classmethod
    def parse(cls, label):
        for kind, name in _KIND_LABELS.items():
            if label == name:
                return cls(kind)
        if label.startswith("L") and label[1:].isdigit():
            return cls.at_level(int(label[1:]))
        raise ValueError("unknown rate index label %r" % label)

    @property
    def label(self):
        return "L%d" % self.level if self.kind == LEVEL else _KIND_LABELS[self.kind]

    def __str__(self):
        return self.label


class RateLadder:
    """
    The ordered rate curves R_min < R(0) < ... < R(r-1) < R_max (bits per channel use),
    shared by all sub-channels. An optional capacity bounds R_max from above.
    """

    def __init__(self, r_min, levels, r_max, capacity=None):
        self.r_min = float(r_min)
        self.levels = tuple(float(x) for x in levels)
        self.r_max = float(r_max)
        self.capacity = None if capacity is None else float(capacity)

        violations = ladder_violations(self.r_min, self.levels, self.r_max, self.capacity)
        if violations:
            raise LadderError("; ".join(violations))

    @property
    def r(self):
        return len(self.levels)

    def n_positions(self):
        """
        Number of ladder positions including the zero-rate and boundary curves
        """
        return self.r + 3

    def position(self, idx):
        if idx.kind == ZERO:
            return 0
        if idx.kind == MIN:
            return 1
        if idx.kind == MAX:
            return self.r + 2
        if idx.level >= self.r:
            raise ProfileIncompleteError("level %d is not on a ladder with %d levels" % (idx.level, self.r))
        return idx.level + 2

    def index_at(self, position):
        if position == 0:
            return RateIndex.zero()
        if position == 1:
            return RateIndex.minimum()
        if position == self.r + 2:
            return RateIndex.maximum()
        if 2 <= position < self.r + 2:
            return RateIndex.at_level(position - 2)
        raise ValueError("ladder position %d outside [0, %d]" % (position, self.r + 2))

    def indices(self):
        return [self.index_at(p) for p in range(self.n_positions())]

    def next_index(self, idx):
        if idx.kind == MAX:
            raise ValueError("R_max has no successor on the ladder")
        return self.index_at(self.position(idx) + 1)

    def rates(self):
        return np.array((0.0, self.r_min) + self.levels + (self.r_max,))

    def rate(self, idx):
        return self.rates()[self.position(idx)]

    def table(self):
        return pd.DataFrame({"RATE_INDEX": [i.label for i in self.indices()], "RATE": self.rates()})

    def __eq__(self, other):
        return isinstance(other, RateLadder) and (self.r_min, self.levels, self.r_max, self.capacity) == \
            (other.r_min, other.levels, other.r_max, other.capacity)

    def __hash__(self):
        return hash((self.r_min, self.levels, self.r_max, self.capacity))

    def __repr__(self):
        return "RateLadder(r_min=%r, levels=%r, r_max=%r)" % (self.r_min, list(self.levels), self.r_max)


def ladder_violations(r_min, levels, r_max, capacity=None):
    """
    Returns the list of ordering violations for a candidate ladder (empty if valid)
    """
    violations = []
    rates = [r_min] + list(levels) + [r_max]
    if not levels:
        violations.append("ladder needs at least one rate level between R_min and R_max")
    if not all(math.isfinite(x) and x >= 0.0 for x in rates):
        violations.append("ladder rates must be finite and >= 0")
    elif any(a >= b for a, b in zip(rates[:-1], rates[1:])):
        violations.append("ladder ordering R_min < R(0) < ... < R(r-1) < R_max violated: %s" % rates)
    if capacity is not None and r_max > capacity:
        violations.append("R_max=%s exceeds the configured capacity %s" % (r_max, capacity))
    return violations


def snr_db(nu):
    """
    SNR in dB of a nu coefficient, 10 log10(1/nu)

    >>> snr_db(0.1)
    10.0
    """
    if not nu > 0.0:
        raise ValueError("nu must be > 0, got %s" % nu)
    return 10.0 * math.log10(1.0 / nu)


def nu_from_snr_db(snr):
    """
    Inverse of snr_db: nu = 10^(-SNR/10)
    """
    return 10.0 ** (-snr / 10.0)


class NuProfile:
    """
    Per-position table of (sigma^2 at rate, |F(T)|^2 at rate) for one sub-channel.
    nu = sigma / gain is non-increasing from zero rate to R_min and strictly
    decreasing from R_min up to R_max.
    """

    def __init__(self, ladder, sigma, gain):
        self.ladder = ladder
        self.sigma = np.asarray(sigma, dtype=float)
        self.gain = np.asarray(gain, dtype=float)

        expected = ladder.n_positions()
        if self.sigma.shape != (expected,) or self.gain.shape != (expected,):
            raise ProfileError("profile needs %d entries (one per ladder position), got %s and %s"
                               % (expected, self.sigma.shape, self.gain.shape))
        if not np.all(np.isfinite(self.sigma)) or not np.all(np.isfinite(self.gain)):
            raise ProfileError("profile entries must be finite")
        if np.any(self.sigma <= 0.0) or np.any(self.gain <= 0.0):
            raise ProfileError("profile sigma and gain entries must be > 0")

        self.nu = self.sigma / self.gain
        if self.nu[1] > self.nu[0]:
            raise ProfileError("nu monotonicity violated: nu(R_min)=%s > nu(0)=%s" % (self.nu[1], self.nu[0]))
        if np.any(np.diff(self.nu[1:]) >= 0.0):
            raise ProfileError("nu monotonicity violated: nu must strictly decrease from R_min to R_max, got %s"
                               % self.nu.tolist())
        self.snr = 10.0 * np.log10(1.0 / self.nu)

    @classmethod
    def from_nu(cls, ladder, nus):
        """
        Profile with unit gain, i.e. sigma equal to the given nu values
        """
        nus = np.asarray(nus, dtype=float)
        return cls(ladder, nus, np.ones_like(nus))

    @property
    def base_nu(self):
        return float(self.nu[0])

    def nu_at(self, idx):
        return nu_at(self, idx)

    def snr_at(self, idx):
        return float(self.snr[self.ladder.position(idx)])

    def table(self):
        return pd.DataFrame({"RATE_INDEX": [i.label for i in self.ladder.indices()],
                             "RATE": self.ladder.rates(),
                             "SIGMA": self.sigma,
                             "GAIN": self.gain,
                             "NU": self.nu,
                             "SNR_DB": self.snr})


def nu_at(profile, idx):
    """
    nu at a ladder position, sigma_R / gain_R
    """
    return float(profile.nu[profile.ladder.position(idx)])


def default_profile(base_nu, beta, ladder):
    """
    Exponential profile nu(R) = base_nu * exp(-beta * R) at every ladder position
    """
    if not base_nu > 0.0:
        raise ProfileError("base nu must be > 0, got %s" % base_nu)
    if not beta > 0.0:
        raise ProfileError("beta must be > 0 for nu to decrease with rate, got %s" % beta)
    return NuProfile.from_nu(ladder, base_nu * np.exp(-beta * ladder.rates()))
