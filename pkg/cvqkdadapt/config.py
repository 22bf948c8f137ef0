"""
Experiment configuration: a JSON file with one object per block, parsed and
validated into an ExperimentConfig before anything runs
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import cvqkdadapt.numerics as numerics
import cvqkdadapt.utils as utils
from cvqkdadapt.channel_model import ChannelEnsemble, SubChannel, Transmittance, nu
from cvqkdadapt.rate_ladder import NuProfile, RateLadder, default_profile, ladder_violations

logger = logging.getLogger(__name__)

# named seed streams
ENSEMBLE_STREAM = 0
QUADRATURE_STREAM = 1
MONTECARLO_STREAM = 2

BLOCKS = ["seed", "output_dir", "ensemble", "ladder", "profile", "target",
          "multiuser", "montecarlo", "figures"]

SNR_GRID = [15.0, 10.0, 5.0, 0.0, -5.0]
NU_SWEEPS = [[0.1, 0.3], [0.3, 0.9]]


class ConfigError(ValueError):
    pass


class ConfigInvalid(ValueError):
    """
    Raised when a config parses but violates one or more invariants
    """

    def __init__(self, violations):
        super().__init__("invalid config:\n  " + "\n  ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class MultiuserSettings:
    users: int = 1
    m: int = 1
    targets: tuple = (0.0,)
    sigma_omega_sq: float = 64.0


@dataclass(frozen=True)
class MonteCarloSettings:
    trials: int = 1000000
    snr_db: tuple = tuple(SNR_GRID)


@dataclass(frozen=True)
class FiguresSettings:
    m: int = 1000
    target: float | None = None
    nu_sweeps: tuple = tuple(tuple(s) for s in NU_SWEEPS)
    sweep_points: int = 21
    snr_grid: tuple = tuple(SNR_GRID)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    output_dir: Path
    ensemble: ChannelEnsemble
    ladder: RateLadder
    profiles: dict
    beta: float | None
    target: float
    multiuser: MultiuserSettings
    montecarlo: MonteCarloSettings
    figures: FiguresSettings
    raw: dict = field(default_factory=dict, compare=False)

    def digest(self):
        # where the outputs go does not change what they contain
        return utils.config_hash({k: v for k, v in self.raw.items() if k != "output_dir"})


@dataclass
class ValidationReport:
    path: str
    violations: list

    @property
    def ok(self):
        return not self.violations

    def __str__(self):
        if self.ok:
            return "%s: pass" % self.path
        return "%s: %d violation(s)\n  %s" % (self.path, len(self.violations), "\n  ".join(self.violations))


def read_config(path):
    """
    Reads the raw JSON object; parse errors carry the line and column
    """
    try:
        text = Path(path).read_text(encoding="utf8")
    except OSError as e:
        raise ConfigError("cannot read config %s: %s" % (path, e)) from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("%s: %s at line %d column %d" % (path, e.msg, e.lineno, e.colno)) from e
    if not isinstance(raw, dict):
        raise ConfigError("%s: top level must be a JSON object" % path)
    return raw


def _ensemble(block, seed, violations):
    if block is None:
        violations.append("ensemble: block missing")
        return None
    n_total = block.get("n_total")
    if "channels" in block:
        channels = []
        for k, entry in enumerate(block["channels"]):
            try:
                if "re" in entry or "im" in entry:
                    t = Transmittance(float(entry["re"]), float(entry["im"]))
                else:
                    t = Transmittance.from_magnitude_sq(float(entry["transmittance"]))
                channels.append(SubChannel(int(entry.get("index", k)), t, float(entry["noise_variance"]),
                                           None if entry.get("fourier_gain") is None
                                           else float(entry["fourier_gain"])))
            except (AttributeError, IndexError, KeyError, TypeError, ValueError) as e:
                violations.append("ensemble: channel %d: %s" % (k, e))
        if n_total is None and channels:
            n_total = max(ch.index for ch in channels) + 1
        if len(channels) != len(block["channels"]):
            return None
        try:
            return ChannelEnsemble(channels, int(n_total))
        except ValueError as e:
            violations.append("ensemble: %s" % e)
            return None
    gen = block.get("generator")
    if gen is None:
        violations.append("ensemble: needs either 'channels' or 'generator'")
        return None
    try:
        l = int(gen["l"])  # noqa: E741
        rng = numerics.make_rng(numerics.stream(seed, ENSEMBLE_STREAM))
        return ChannelEnsemble.generate(l, int(n_total if n_total is not None else l),
                                        gen["noise_variance"], gen["transmittance"], rng)
    except (IndexError, KeyError, TypeError, ValueError) as e:
        violations.append("ensemble: generator: %s" % e)
        return None


def _ladder(block, violations):
    if block is None:
        violations.append("ladder: block missing")
        return None
    try:
        r_min, levels, r_max = float(block["r_min"]), [float(x) for x in block["levels"]], float(block["r_max"])
        capacity = None if block.get("capacity") is None else float(block["capacity"])
    except (KeyError, TypeError, ValueError) as e:
        violations.append("ladder: %s" % e)
        return None
    problems = ladder_violations(r_min, levels, r_max, capacity)
    if problems:
        violations.extend("ladder: %s" % p for p in problems)
        return None
    return RateLadder(r_min, levels, r_max, capacity)


def _profiles(block, ensemble, ladder, violations):
    block = block or {}
    beta = block.get("beta")
    if beta is not None:
        beta = float(beta)
    table = block.get("table", {})
    if not isinstance(table, dict):
        raise TypeError("table must map sub-channel indices to profiles, got %s" % type(table).__name__)
    if ensemble is None or ladder is None:
        return {}, beta
    profiles = {}
    for ch in ensemble.sub_channels:
        entry = table.get(str(ch.index))
        try:
            if entry is not None:
                profile = NuProfile(ladder, entry["sigma"], entry["gain"])
                if abs(profile.base_nu - nu(ch)) > 1e-12 * nu(ch):
                    raise ValueError("zero-rate nu %s differs from the channel nu %s" % (profile.base_nu, nu(ch)))
            elif beta is not None:
                profile = default_profile(nu(ch), beta, ladder)
            else:
                raise ValueError("no table entry and no default beta")
        except (IndexError, KeyError, TypeError, ValueError) as e:
            violations.append("profile: sub-channel %d: %s" % (ch.index, e))
            continue
        profiles[ch.index] = profile
    return profiles, beta


def _multiuser(block, ensemble, violations):
    if block is None:
        return MultiuserSettings()
    settings = MultiuserSettings(int(block.get("users", 1)), int(block.get("m", 1)),
                                 tuple(float(t) for t in block.get("targets", [0.0])),
                                 float(block.get("sigma_omega_sq", 64.0)))
    if settings.users < 1 or settings.m < 1:
        violations.append("multiuser: users and m must be >= 1")
    elif ensemble is not None and settings.users * settings.m > ensemble.l:
        violations.append("multiuser: %d users x %d sub-channels exceeds l=%d"
                          % (settings.users, settings.m, ensemble.l))
    if len(settings.targets) != settings.users:
        violations.append("multiuser: %d targets for %d users" % (len(settings.targets), settings.users))
    if any(t < 0.0 for t in settings.targets):
        violations.append("multiuser: targets must be >= 0")
    if not settings.sigma_omega_sq > 0.0:
        violations.append("multiuser: sigma_omega_sq must be > 0")
    return settings


def _montecarlo(block, violations):
    if block is None:
        return MonteCarloSettings()
    settings = MonteCarloSettings(int(block.get("trials", MonteCarloSettings.trials)),
                                  tuple(float(s) for s in block.get("snr_db", SNR_GRID)))
    if settings.trials < 1:
        violations.append("montecarlo: trials must be >= 1")
    return settings


def _figures(block, ensemble, violations):
    if block is None:
        return FiguresSettings()
    settings = FiguresSettings(int(block.get("m", FiguresSettings.m)),
                               None if block.get("target") is None else float(block["target"]),
                               tuple(tuple(float(x) for x in s) for s in block.get("nu_sweeps", NU_SWEEPS)),
                               int(block.get("sweep_points", FiguresSettings.sweep_points)),
                               tuple(float(s) for s in block.get("snr_grid", SNR_GRID)))
    if ensemble is not None and not 1 <= settings.m <= ensemble.l:
        violations.append("figures: m=%d outside [1, l=%d]" % (settings.m, ensemble.l))
    for sweep in settings.nu_sweeps:
        if len(sweep) != 2 or not 0.0 < sweep[0] < sweep[1]:
            violations.append("figures: nu sweep %s must be [low, high] with 0 < low < high" % (sweep,))
    if settings.sweep_points < 2:
        violations.append("figures: sweep_points must be >= 2")
    return settings


def _guarded(name, default, violations, parser, block, *args):
    try:
        return parser(block, *args, violations)
    except (AttributeError, IndexError, KeyError, TypeError, ValueError) as e:
        violations.append("%s: %s" % (name, e))
        return default()


def parse_config(raw, seed=None, output_dir=None):
    """
    Builds an ExperimentConfig from a raw dict. Returns (config, violations); config is
    None whenever there is at least one violation.
    """
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    if output_dir is not None:
        raw["output_dir"] = str(output_dir)
    violations = ["unknown block '%s'" % k for k in raw if k not in BLOCKS]

    seed = raw.get("seed", numerics.DEFAULT_SEED)
    if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
        violations.append("seed: must be an unsigned 64-bit integer, got %r" % (seed,))
        seed = numerics.DEFAULT_SEED

    ensemble = _guarded("ensemble", lambda: None, violations, _ensemble, raw.get("ensemble"), seed)
    ladder = _guarded("ladder", lambda: None, violations, _ladder, raw.get("ladder"))
    profiles, beta = _guarded("profile", lambda: ({}, None), violations, _profiles, raw.get("profile"),
                              ensemble, ladder)

    target = raw.get("target", 0.0)
    if not isinstance(target, (int, float)) or target < 0:
        violations.append("target: must be a number >= 0, got %r" % (target,))
        target = 0.0

    multiuser = _guarded("multiuser", MultiuserSettings, violations, _multiuser, raw.get("multiuser"), ensemble)
    montecarlo = _guarded("montecarlo", MonteCarloSettings, violations, _montecarlo, raw.get("montecarlo"))
    figures = _guarded("figures", FiguresSettings, violations, _figures, raw.get("figures"), ensemble)

    if raw.get("figures") is not None and beta is None:
        violations.append("profile: the figure pipelines need a default beta")

    if violations:
        return None, violations
    output = Path(raw.get("output_dir") or utils.DEFAULT_OUTPUT_DIR)
    return ExperimentConfig(seed, output, ensemble, ladder, profiles, beta,
                            float(target), multiuser, montecarlo, figures, raw), []


def load_config(path, seed=None, output_dir=None):
    """
    Reads and validates a config file, raising ConfigInvalid with every violation found
    """
    config, violations = parse_config(read_config(path), seed, output_dir)
    if violations:
        raise ConfigInvalid(violations)
    logger.info("loaded config %s (seed %d, %d sub-channels)", path, config.seed, config.ensemble.l)
    return config


def validate_config(path):
    """
    Pass, or the full list of invariant violations, for a config file
    """
    _, violations = parse_config(read_config(path))
    return ValidationReport(str(path), violations)
