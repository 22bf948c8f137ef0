"""
Iterative secret key rate adaption with error minimization

Each sub-channel carries a cumulative nu cost delta. At every step the sub-channel
with the smallest delta is moved one curve up the rate ladder, until the summed
private rate reaches the target. The bit error rate at each step is
0.5 * erfc(F), F built from the SNR values of the sub-channel's nu profile.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

import cvqkdadapt.numerics as numerics
from cvqkdadapt.channel_model import nu
from cvqkdadapt.rate_ladder import MAX, MIN, ProfileError, RateIndex

logger = logging.getLogger(__name__)

# relative tolerance for matching a profile's zero-rate nu to its sub-channel's nu
BASE_NU_RTOL = 1e-12


class ExhaustedChannelError(RuntimeError):
    pass


class NoEligibleChannelError(RuntimeError):
    pass


class InfeasibleTargetError(RuntimeError):
    """
    The target cannot be reached even with every sub-channel at R_max
    """

    def __init__(self, target, max_achievable, allocation=None):
        super().__init__("target %s exceeds the maximum achievable rate %s" % (target, max_achievable))
        self.target = target
        self.max_achievable = max_achievable
        self.allocation = allocation


@dataclass(frozen=True)
class DeltaState:
    """
    Current ladder position and cumulative delta of one sub-channel, with its history
    """
    channel: int
    current_index: RateIndex
    delta: float
    history: tuple = ()

    @classmethod
    def initial(cls, channel, profile):
        base = profile.base_nu
        return cls(channel, RateIndex.zero(), base, ((RateIndex.zero(), base),))

    @property
    def exhausted(self):
        return self.current_index.kind == MAX


@dataclass(frozen=True)
class BerPoint:
    """
    Analytic BER at a rate curve. numerator/denominator are the two SNR terms whose
    ratio (clamped at 0) is square-rooted into snr_argument.
    """
    rate_index: RateIndex
    delta: float
    snr_argument: float
    ber: float
    numerator: float = math.nan
    denominator: float = math.nan
    clamped: bool = False


@dataclass(frozen=True)
class TraceStep:
    step: int
    channel: int
    rate_index: RateIndex
    delta: float
    ber: BerPoint


@dataclass
class Allocation:
    """
    Result of an adaption run: per-channel achieved rates (ensemble order), their sum,
    the target and the step-by-step trace
    """
    channels: list
    rates: list
    total_rate: float
    target: float
    trace: list = field(default_factory=list)
    final_states: list = field(default_factory=list)

    @property
    def feasible(self):
        return self.total_rate >= self.target

    def final_deltas(self):
        return np.array([s.delta for s in self.final_states])

    def final_indices(self):
        return [s.current_index for s in self.final_states]

    def rate_of(self, channel):
        return self.rates[self.channels.index(channel)]

    def trace_frame(self):
        """
        Trace as a DataFrame, one row per step
        """
        rows = {"STEP": [], "SUBCHANNEL": [], "RATE_INDEX": [], "DELTA": [],
                "N": [], "D": [], "F_VALUE": [], "BER": []}
        for t in self.trace:
            rows["STEP"].append(t.step)
            rows["SUBCHANNEL"].append(t.channel)
            rows["RATE_INDEX"].append(t.rate_index.label)
            rows["DELTA"].append(t.delta)
            rows["N"].append(t.ber.numerator)
            rows["D"].append(t.ber.denominator)
            rows["F_VALUE"].append(t.ber.snr_argument)
            rows["BER"].append(t.ber.ber)
        return pd.DataFrame(rows)

    def channel_frame(self):
        """
        Final per-channel state, one row per sub-channel in ensemble order
        """
        return pd.DataFrame({"SUBCHANNEL": self.channels,
                             "RATE_INDEX": [i.label for i in self.final_indices()],
                             "RATE": self.rates,
                             "DELTA": self.final_deltas()})


def delta_diff(profile, at, next):
    """
    Difference of nu between two ladder positions, nu(at) - nu(next) > 0
    """
    if not at < next:
        raise ValueError("delta_diff needs at < next, got %s and %s" % (at, next))
    return profile.nu_at(at) - profile.nu_at(next)


def delta_step(state, ch, profile, ladder):
    """
    Moves a sub-channel one position up the ladder and updates its cumulative delta:
    delta(next) = delta(current) + (nu(next) - nu(next + 1)), and +inf at R_max
    """
    channel = getattr(ch, "index", ch)
    if channel != state.channel:
        raise ValueError("state belongs to sub-channel %d, not %d" % (state.channel, channel))
    if state.exhausted:
        raise ExhaustedChannelError("sub-channel %d is already at R_max" % state.channel)
    nxt = ladder.next_index(state.current_index)
    if nxt.kind == MAX:
        delta = math.inf
    else:
        delta = state.delta + delta_diff(profile, nxt, ladder.next_index(nxt))
    return replace(state, current_index=nxt, delta=delta, history=state.history + ((nxt, delta),))


def delta_chain(profile):
    """
    Cumulative delta at every ladder position of a profile (last entry +inf)
    """
    ladder = profile.ladder
    out = np.empty(ladder.n_positions())
    out[0] = profile.base_nu
    for p in range(1, ladder.n_positions() - 1):
        out[p] = out[p - 1] + (profile.nu[p] - profile.nu[p + 1])
    out[-1] = math.inf
    return out


def _argmin_delta(deltas):
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0 or not np.any(np.isfinite(deltas)):
        raise NoEligibleChannelError("every sub-channel is at R_max")
    # argmin returns the first minimum, i.e. the lowest index on ties
    return int(np.argmin(deltas))


def select_channel(states):
    """
    Position (in the given list) of the state with minimal delta, lowest position on ties

    >>> select_channel([0.7, 0.5, 0.9])
    1
    """
    return _argmin_delta([getattr(s, "delta", s) for s in states])


def f_function(profile, up_to):
    """
    F-value for a target rate curve: sqrt(max(0, N / D)) where
    N = SNR(nu_0) - (SNR(R(0)) - SNR(R_min)) and D is the sum of the SNR increments
    between consecutive rate levels below the target (1 when that sum is empty).

    Returns (F, N, D, clamped).
    """
    ladder = profile.ladder
    if up_to.kind < MIN:
        raise ValueError("F is defined from R_min upwards, got %s" % up_to)
    p = ladder.position(up_to)
    snr = profile.snr
    numerator = snr[0] - (snr[2] - snr[1])
    if p <= 2:
        denominator = 1.0
    else:
        denominator = float(np.sum(np.diff(snr[2:p + 1])))
        if denominator == 0.0:
            raise RuntimeError("zero SNR increment sum below %s, profile is not strictly monotone" % up_to)
    ratio = numerator / denominator
    clamped = ratio < 0.0
    if clamped:
        logger.debug("negative SNR ratio %s at %s clamped to 0", ratio, up_to)
        ratio = 0.0
    return math.sqrt(ratio), float(numerator), denominator, clamped


def ber_at(profile, up_to):
    """
    Analytic BER 0.5 * erfc(F) at a rate curve. The recorded delta is the
    cumulative delta of the position below, at which the step is evaluated.
    """
    value, numerator, denominator, clamped = f_function(profile, up_to)
    p = profile.ladder.position(up_to)
    delta = float(delta_chain(profile)[p - 1])
    ber = 0.5 * numerics.erfc(value)
    return BerPoint(up_to, delta, value, ber, numerator, denominator, clamped)


def check_profile(ch, profile, ladder):
    if profile.ladder != ladder:
        raise ProfileError("profile of sub-channel %d was built for a different ladder" % ch.index)
    if not math.isclose(profile.base_nu, nu(ch), rel_tol=BASE_NU_RTOL):
        raise ProfileError("profile of sub-channel %d starts at nu=%s but the channel has nu=%s"
                           % (ch.index, profile.base_nu, nu(ch)))


def align_profiles(ens, profiles):
    """
    Profiles in ensemble order, from a mapping keyed by sub-channel index or a sequence
    """
    if isinstance(profiles, dict):
        missing = [i for i in ens.indices() if i not in profiles]
        if missing:
            raise ProfileError("no nu profile for sub-channel(s) %s" % missing)
        return [profiles[i] for i in ens.indices()]
    profiles = list(profiles)
    if len(profiles) != ens.l:
        raise ProfileError("%d profiles supplied for %d sub-channels" % (len(profiles), ens.l))
    return profiles


def run_adaption(ens, ladder, profiles, target):
    """
    Runs the iterative secret key adapting algorithm until the summed private rate
    of the ensemble reaches the target. Deterministic for fixed inputs.

    Raises InfeasibleTargetError (carrying the maximum achievable rate) if the target
    exceeds what the ensemble delivers with every sub-channel at R_max.
    """
    if not (math.isfinite(target) and target >= 0.0):
        raise ValueError("target must be finite and >= 0, got %s" % target)
    profiles = align_profiles(ens, profiles)
    for ch, profile in zip(ens.sub_channels, profiles):
        check_profile(ch, profile, ladder)

    channels = ens.indices()
    max_achievable = sum([ladder.r_max] * ens.l)
    states = [DeltaState.initial(ch.index, p) for ch, p in zip(ens.sub_channels, profiles)]
    deltas = np.array([s.delta for s in states])
    rates = [0.0] * ens.l
    trace = []
    total = sum(rates)

    if target > max_achievable:
        allocation = Allocation(channels, rates, total, target, trace, states)
        raise InfeasibleTargetError(target, max_achievable, allocation)

    while total < target:
        i = _argmin_delta(deltas)
        pre_delta = states[i].delta
        states[i] = delta_step(states[i], channels[i], profiles[i], ladder)
        deltas[i] = states[i].delta
        rates[i] = float(ladder.rate(states[i].current_index))
        trace.append(TraceStep(len(trace), channels[i], states[i].current_index, pre_delta,
                               ber_at(profiles[i], states[i].current_index)))
        total = sum(rates)

    logger.info("adaption reached %s (target %s) in %d steps over %d sub-channels",
                total, target, len(trace), ens.l)
    return Allocation(channels, rates, total, target, trace, states)
