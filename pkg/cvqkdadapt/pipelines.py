"""
Experiment pipelines. Each pipeline turns an ExperimentConfig into one or more
tables, written as <pipeline>_<name>.csv next to a manifest.csv index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

import cvqkdadapt.numerics as numerics
import cvqkdadapt.utils as utils
from cvqkdadapt.adapt_core import InfeasibleTargetError, ber_at, run_adaption
from cvqkdadapt.channel_model import analytic_ber, monte_carlo_ber
from cvqkdadapt.config import MONTECARLO_STREAM, QUADRATURE_STREAM
from cvqkdadapt.multiuser import (
    LogicalChannel,
    adapt_users,
    assign_logical_channels,
    equalized_ber,
    input_snr_difference,
    user_snr_increments,
    variance_correction,
)
from cvqkdadapt.rate_ladder import MAX, MIN, default_profile, nu_from_snr_db

logger = logging.getLogger(__name__)

FIGURE_PIPELINES = ["fig2", "fig3", "fig4", "s1", "s2", "s3", "s4"]
PIPELINES = ["adapt", "multiuser", "equalize", "montecarlo"] + FIGURE_PIPELINES

# the empirical BER must lie within this many standard errors of the analytic value
CROSSCHECK_SIGMAS = 3.0
MIN_CROSSCHECK_TRIALS = 10000


@dataclass
class UserSet:
    """
    Transmitting sub-channels of one user after adaption, with their correction and BERs
    """
    logical_channel: LogicalChannel
    indices: list
    correction: object
    pre: list
    post: list


class ExperimentRun:
    """
    Runs pipelines for one config. Allocations shared by several pipelines are
    computed once, on first use.
    """

    def __init__(self, config):
        self.config = config

    @cached_property
    def figure_ensemble(self):
        ens = self.config.ensemble
        return ens.subset(ens.indices()[:self.config.figures.m])

    @cached_property
    def figure_allocation(self):
        ens = self.figure_ensemble
        target = self.config.figures.target
        if target is None:
            # on average every sub-channel on the first rate curve
            target = ens.l * self.config.ladder.levels[0]
        return run_adaption(ens, self.config.ladder, self.config.profiles, target)

    @cached_property
    def logical_channels(self):
        mu = self.config.multiuser
        return assign_logical_channels(self.config.ensemble, mu.users, mu.m, mu.targets)

    @cached_property
    def user_allocations(self):
        return adapt_users(self.logical_channels, self.config.ladder, self.config.profiles)

    @cached_property
    def user_sets(self):
        sets = []
        for lc in self.logical_channels:
            allocation = self.user_allocations[lc.user_id]
            # only sub-channels that transmit below R_max have a finite delta and a BER
            keep = [k for k, s in enumerate(allocation.final_states)
                    if MIN <= s.current_index.kind < MAX]
            if not keep:
                logger.warning("user %d has no transmitting sub-channel below R_max, skipped", lc.user_id)
                continue
            active = LogicalChannel(lc.user_id, [lc.sub_channels[k] for k in keep], lc.target)
            states = [allocation.final_states[k] for k in keep]
            profiles = [self.config.profiles[ch.index] for ch in active.sub_channels]
            indices = [s.current_index for s in states]
            correction = variance_correction([s.delta for s in states], self.config.multiuser.sigma_omega_sq)
            correction = user_snr_increments(correction, profiles, indices)
            pre = [ber_at(p, idx) for p, idx in zip(profiles, indices)]
            sets.append(UserSet(active, indices, correction, pre, equalized_ber(active, correction, pre)))
        return sets

    # pipelines, each returning {name: DataFrame}

    def adapt(self):
        c = self.config
        allocation = run_adaption(c.ensemble, c.ladder, c.profiles, c.target)
        trace = allocation.trace_frame()
        trace["RATE"] = [c.ladder.rate(t.rate_index) for t in allocation.trace]
        return {"trace": trace, "channels": allocation.channel_frame()}

    def multiuser(self):
        traces, channels = [], []
        for lc in self.logical_channels:
            allocation = self.user_allocations[lc.user_id]
            traces.append(allocation.trace_frame().assign(USER=lc.user_id))
            channels.append(allocation.channel_frame().assign(USER=lc.user_id))
        return {"trace": _user_first(pd.concat(traces, ignore_index=True)),
                "channels": _user_first(pd.concat(channels, ignore_index=True))}

    def equalize(self):
        rows = []
        for us in self.user_sets:
            frame = us.correction.frame()
            frame.insert(0, "SUBCHANNEL", us.logical_channel.indices())
            frame.insert(0, "USER", us.logical_channel.user_id)
            frame["PRE_BER"] = [p.ber for p in us.pre]
            frame["POST_BER"] = [p.ber for p in us.post]
            rows.append(frame)
        return {"users": _concat(rows)}

    def fig2(self):
        allocation = self.figure_allocation
        table = allocation.channel_frame()
        with np.errstate(divide="ignore"):
            table["SNR_DB"] = 10.0 * np.log10(1.0 / table["DELTA"].to_numpy())
        return {"delta": table}

    def _ber_rows(self, nu, extra):
        profile = default_profile(nu, self.config.beta, self.config.ladder)
        rows = []
        for idx in self.config.ladder.indices()[1:]:
            point = ber_at(profile, idx)
            rows.append(dict(extra, NU=nu, RATE_INDEX=idx.label, RATE=self.config.ladder.rate(idx),
                             DELTA=point.delta, N=point.numerator, D=point.denominator,
                             F_VALUE=point.snr_argument, BER=point.ber))
        return rows

    def fig3(self):
        rows = []
        for sweep, bounds in enumerate(self.config.figures.nu_sweeps):
            for nu in utils.linspace_range(bounds, self.config.figures.sweep_points):
                rows.extend(self._ber_rows(float(nu), {"SWEEP": sweep}))
        return {"ber_sweep": pd.DataFrame(rows)}

    def fig4(self):
        rows = []
        for snr in self.config.figures.snr_grid:
            rows.extend(self._ber_rows(nu_from_snr_db(snr), {"SNR_DB": snr}))
        return {"ber_snr": pd.DataFrame(rows)}

    def s1(self):
        frames = []
        for us in self.user_sets:
            c = us.correction
            frames.append(pd.DataFrame({"USER": us.logical_channel.user_id,
                                        "SUBCHANNEL": us.logical_channel.indices(),
                                        "RATE_INDEX": [i.label for i in us.indices],
                                        "DELTA": c.deltas,
                                        "XI": c.xi,
                                        "CORRECTION": c.corrections}))
        return {"correction": _concat(frames)}

    def s2(self):
        rng = numerics.make_rng(numerics.stream(self.config.seed, QUADRATURE_STREAM))
        frames = []
        for us in self.user_sets:
            c = us.correction
            # one standard draw per subcarrier, scaled to both variances
            g = numerics.gaussian_sample(rng, 0.0, 1.0, c.deltas.size)
            frames.append(pd.DataFrame({"USER": us.logical_channel.user_id,
                                        "SUBCHANNEL": us.logical_channel.indices(),
                                        "SIGMA_OMEGA_SQ": c.sigma_omega_sq,
                                        "X": math.sqrt(c.sigma_omega_sq) * g,
                                        "CORRECTED_VARIANCE": c.corrected_variance,
                                        "X_CORRECTED": np.sqrt(c.corrected_variance) * g}))
        return {"quadratures": _concat(frames)}

    def s3(self):
        frames = []
        for us in self.user_sets:
            c = us.correction
            frames.append(pd.DataFrame({"USER": us.logical_channel.user_id,
                                        "SUBCHANNEL": us.logical_channel.indices(),
                                        "PHI": c.phi,
                                        "INPUT_SNR_DIFF": input_snr_difference(c.sigma_omega_sq,
                                                                               c.corrected_variance),
                                        "SNR_INCREMENT": c.snr_increments}))
        return {"snr": _concat(frames)}

    def s4(self):
        frames = []
        for us in self.user_sets:
            frames.append(pd.DataFrame({"USER": us.logical_channel.user_id,
                                        "SUBCHANNEL": us.logical_channel.indices(),
                                        "RATE_INDEX": [i.label for i in us.indices],
                                        "PRE_N": [p.numerator for p in us.pre],
                                        "PRE_D": [p.denominator for p in us.pre],
                                        "PRE_BER": [p.ber for p in us.pre],
                                        "POST_DELTA": [p.delta for p in us.post],
                                        "POST_N": [p.numerator for p in us.post],
                                        "POST_D": [p.denominator for p in us.post],
                                        "POST_BER": [p.ber for p in us.post]}))
        return {"ber": _concat(frames)}

    def montecarlo(self):
        return {"crosscheck": montecarlo_crosscheck(self.config)}


def _concat(frames):
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def _user_first(frame):
    return frame[["USER"] + [c for c in frame.columns if c != "USER"]]


def montecarlo_crosscheck(config):
    """
    Analytic vs empirical BER at every SNR grid point, with a pass/fail at 3 standard errors
    """
    trials = config.montecarlo.trials
    if trials < MIN_CROSSCHECK_TRIALS:
        raise ValueError("cross-check needs at least %d trials, got %d" % (MIN_CROSSCHECK_TRIALS, trials))
    rows = []
    for k, snr in enumerate(config.montecarlo.snr_db):
        expected = analytic_ber(snr)
        empirical = monte_carlo_ber(snr, trials, numerics.stream(config.seed, MONTECARLO_STREAM, k))
        std_error = math.sqrt(expected * (1.0 - expected) / trials)
        passed = abs(empirical - expected) <= CROSSCHECK_SIGMAS * std_error
        if not passed:
            logger.warning("monte carlo at %s dB: empirical %s vs analytic %s (tolerance %s)",
                           snr, empirical, expected, CROSSCHECK_SIGMAS * std_error)
        rows.append({"SNR_DB": snr, "TRIALS": trials, "ANALYTIC_BER": expected,
                     "EMPIRICAL_BER": empirical, "STD_ERROR": std_error, "PASS": passed})
    return pd.DataFrame(rows)


def run_experiment(config, pipelines=None, out_dir=None):
    """
    Runs the named pipelines (all figure pipelines by default), writes their tables and
    the manifest, and returns {pipeline: {name: DataFrame}}.

    An unreachable target writes <pipeline>_infeasible.csv and re-raises.
    """
    if pipelines is None:
        pipelines = FIGURE_PIPELINES
    unknown = [name for name in pipelines if name not in PIPELINES]
    if unknown:
        raise ValueError("unknown pipeline(s) %s" % unknown)
    out_dir = utils.ensure_dir(out_dir if out_dir is not None else config.output_dir)
    run = ExperimentRun(config)
    results, manifest = {}, []
    for name in pipelines:
        pipeline = getattr(run, name)
        logger.info("running pipeline %s", name)
        try:
            tables = pipeline()
        except InfeasibleTargetError as e:
            table = pd.DataFrame({"TARGET": [e.target], "MAX_ACHIEVABLE": [e.max_achievable]})
            manifest.append(utils.write_table(out_dir, name, "infeasible", table))
            utils.write_manifest(out_dir, manifest, config.digest())
            raise
        for table_name, table in tables.items():
            manifest.append(utils.write_table(out_dir, name, table_name, table))
        results[name] = tables
    utils.write_manifest(out_dir, manifest, config.digest())
    return results
