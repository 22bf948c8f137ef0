"""
Multiuser extension: per-user logical channels, and modulation variance correction
that equalizes the error rate of a user's sub-channels at the set minimum
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from cvqkdadapt.adapt_core import BerPoint, f_function, run_adaption
from cvqkdadapt.channel_model import ChannelEnsemble
from cvqkdadapt.rate_ladder import MAX

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogicalChannel:
    """
    The m sub-channels assigned to user k, and the user's target secret key rate
    """
    user_id: int
    sub_channels: tuple
    target: float

    def __post_init__(self):
        object.__setattr__(self, "sub_channels", tuple(self.sub_channels))
        if self.user_id < 0:
            raise ValueError("user id must be >= 0, got %d" % self.user_id)
        if not self.sub_channels:
            raise ValueError("user %d has no sub-channels" % self.user_id)
        indices = self.indices()
        if len(set(indices)) != len(indices):
            raise ValueError("user %d has duplicate sub-channel indices" % self.user_id)

    @property
    def m(self):
        return len(self.sub_channels)

    def indices(self):
        return [ch.index for ch in self.sub_channels]

    def ensemble(self):
        return ChannelEnsemble(self.sub_channels, max(self.indices()) + 1)


@dataclass(frozen=True)
class VarianceCorrection:
    """
    Per-channel modulation variance correction of one user. corrections and phi hold
    the same numbers (delta - xi) in their two roles: the variance increment added to
    sigma_omega^2, and the residual delta the increment removes.
    """
    xi: float
    sigma_omega_sq: float
    deltas: np.ndarray
    corrections: np.ndarray
    corrected_variance: np.ndarray
    phi: np.ndarray
    snr_increments: np.ndarray | None = None

    def frame(self):
        data = {"DELTA": self.deltas,
                "XI": np.full(self.deltas.size, self.xi),
                "CORRECTION": self.corrections,
                "SIGMA_OMEGA_SQ": np.full(self.deltas.size, self.sigma_omega_sq),
                "CORRECTED_VARIANCE": self.corrected_variance,
                "PHI": self.phi}
        if self.snr_increments is not None:
            data["SNR_INCREMENT"] = self.snr_increments
        return pd.DataFrame(data)


def assign_logical_channels(ens, users, m, targets):
    """
    Splits an ensemble into `users` disjoint logical channels of m consecutive sub-channels
    """
    if users < 1 or m < 1:
        raise ValueError("need at least one user with at least one sub-channel")
    if users * m > ens.l:
        raise ValueError("%d users x %d sub-channels exceeds the %d sub-channels of the ensemble"
                         % (users, m, ens.l))
    if len(targets) != users:
        raise ValueError("%d targets supplied for %d users" % (len(targets), users))
    return [LogicalChannel(k, ens.sub_channels[k * m:(k + 1) * m], float(targets[k])) for k in range(users)]


def adapt_user(lc, ladder, profiles):
    """
    Adapts the user's m sub-channels to the user's target, exactly as run_adaption
    does for a full ensemble
    """
    if isinstance(profiles, dict):
        profiles = {i: profiles[i] for i in lc.indices() if i in profiles}
    allocation = run_adaption(lc.ensemble(), ladder, profiles, lc.target)
    logger.info("user %d: rate %s over %d sub-channels", lc.user_id, allocation.total_rate, lc.m)
    return allocation


def adapt_users(users, ladder, profiles):
    """
    Adapts every logical channel independently, returns {user_id: Allocation}
    """
    seen = set()
    for lc in users:
        if seen.intersection(lc.indices()):
            raise ValueError("user %d shares sub-channels with another user" % lc.user_id)
        seen.update(lc.indices())
    return {lc.user_id: adapt_user(lc, ladder, profiles) for lc in users}


def xi_user(deltas):
    """
    Minimum delta over a user's sub-channels, ignoring those at R_max (+inf)

    >>> xi_user([0.6, 0.5, 0.9])
    0.5
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0:
        raise ValueError("xi needs at least one delta")
    if np.any(np.isnan(deltas)):
        raise ValueError("deltas must not be NaN")
    finite = deltas[np.isfinite(deltas)]
    if finite.size == 0:
        raise ValueError("every sub-channel of the user is at R_max")
    return float(finite.min())


def variance_correction(deltas, sigma_omega_sq):
    """
    Variance increment delta - xi per sub-channel, the corrected modulation variance
    sigma_omega^2 + increment, and the residual phi = delta - xi
    """
    if not (math.isfinite(sigma_omega_sq) and sigma_omega_sq > 0.0):
        raise ValueError("modulation variance must be > 0, got %s" % sigma_omega_sq)
    deltas = np.asarray(deltas, dtype=float)
    if not np.all(np.isfinite(deltas)):
        raise ValueError("variance correction needs finite deltas (drop sub-channels at R_max first)")
    xi = xi_user(deltas)
    corrections = deltas - xi
    return VarianceCorrection(xi, float(sigma_omega_sq), deltas, corrections,
                              sigma_omega_sq + corrections, corrections.copy())


def snr_increment(phi, profile, up_to, xi):
    """
    SNR increment 10 log10(1/xi) - F at the next curve above up_to (F at R_max when
    up_to is already R_max)
    """
    if not xi > 0.0:
        raise ValueError("xi must be > 0, got %s" % xi)
    if phi < 0.0:
        raise ValueError("phi must be >= 0, got %s" % phi)
    ladder = profile.ladder
    nxt = up_to if up_to.kind == MAX else ladder.next_index(up_to)
    value = f_function(profile, nxt)[0]
    return 10.0 * math.log10(1.0 / xi) - value


def user_snr_increments(correction, profiles, indices):
    """
    Fills the snr_increments of a correction, one per sub-channel (profile and rate index)
    """
    values = np.array([snr_increment(phi, profile, idx, correction.xi)
                       for phi, profile, idx in zip(correction.phi, profiles, indices)])
    return replace(correction, snr_increments=values)


def input_snr_difference(sigma_omega_sq, corrected_variance):
    """
    SNR gain in dB of the corrected input quadratures over the uncorrected ones,
    10 log10(corrected / sigma_omega^2), at equal channel noise
    """
    corrected_variance = np.asarray(corrected_variance, dtype=float)
    return 10.0 * np.log10(corrected_variance / sigma_omega_sq)


def equalized_ber(lc, correction, pre_points):
    """
    BER of every sub-channel after the variance correction. Each sub-channel then
    operates at delta = xi, and its BER terms are by definition those of the lowest
    pre-correction BER point of the set. Only the rate index stays the sub-channel's own.
    """
    pre_points = list(pre_points)
    if len(pre_points) != lc.m or correction.deltas.size != lc.m:
        raise ValueError("user %d has %d sub-channels but %d BER points and %d corrections were given"
                         % (lc.user_id, lc.m, len(pre_points), correction.deltas.size))
    best = min(range(lc.m), key=lambda i: (pre_points[i].ber, i))
    ref = pre_points[best]
    return [BerPoint(p.rate_index, correction.xi, ref.snr_argument, ref.ber,
                     ref.numerator, ref.denominator, ref.clamped) for p in pre_points]
