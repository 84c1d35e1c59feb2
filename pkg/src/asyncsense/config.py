"""Campaign configuration: JSON schema, validation, defaults, round-trip."""

import json
import math
from dataclasses import dataclass, field, asdict

from .exceptions import ConfigError

MODES = ("bounds-only", "estimator", "verify")
H_S_MODES = ("random", "fixed")


@dataclass(frozen=True)
class HsSpec:
    """Static channel specification: campaign-level random draw or a fixed vector."""

    mode: str = "random"
    power: float = 1.0                 # per-antenna E|h_m|^2 for mode=random
    re: tuple = None                   # fixed vector, real parts
    im: tuple = None

    def __post_init__(self):
        if self.mode not in H_S_MODES:
            raise ConfigError(f"field 'h_s.mode': must be one of {H_S_MODES}, got {self.mode!r}")
        if self.mode == "random":
            if not (isinstance(self.power, (int, float)) and math.isfinite(self.power)
                    and self.power > 0):
                raise ConfigError(f"field 'h_s.power': must be a positive number, got {self.power!r}")
        else:
            if self.re is None or self.im is None:
                raise ConfigError("field 'h_s': fixed mode needs 're' and 'im' lists")
            object.__setattr__(self, "re", tuple(float(x) for x in self.re))
            object.__setattr__(self, "im", tuple(float(x) for x in self.im))
            if len(self.re) != len(self.im):
                raise ConfigError("field 'h_s': 're' and 'im' must have equal length")
            if not all(math.isfinite(x) for x in self.re + self.im):
                raise ConfigError("field 'h_s': entries must be finite")


@dataclass(frozen=True)
class CampaignConfig:
    m: int = None
    t: int = None
    snr_db: tuple = None
    trials: int = None
    spacing: float = 0.5
    p_d: float = 1.0
    theta_d: float = 0.35
    h_s: HsSpec = field(default_factory=HsSpec)
    seed: int = 0
    out: str = None
    mode: str = "estimator"
    finite_t: bool = False
    finite_t_trials: int = 2000
    mc_bound_trials: int = 20000
    grid_points: int = 2048
    refine: bool = True
    source_count: int = 2
    phi_walk_std: float = 0.5
    threads: int = 1
    verify_trials: int = 2000

    def __post_init__(self):
        req = {"m": self.m, "t": self.t, "snr_db": self.snr_db, "trials": self.trials}
        for name, value in req.items():
            if value is None:
                raise ConfigError(f"field '{name}': required")
        _check_int(self.m, "m", minimum=2)
        _check_int(self.t, "t", minimum=2)
        _check_int(self.trials, "trials", minimum=1)
        _check_int(self.grid_points, "grid_points", minimum=64)
        _check_int(self.source_count, "source_count", minimum=1)
        _check_int(self.finite_t_trials, "finite_t_trials", minimum=2)
        _check_int(self.mc_bound_trials, "mc_bound_trials", minimum=2)
        _check_int(self.verify_trials, "verify_trials", minimum=20)
        _check_int(self.threads, "threads", minimum=1)
        _check_int(self.seed, "seed", minimum=0)
        try:
            object.__setattr__(self, "snr_db", tuple(float(x) for x in self.snr_db))
        except (TypeError, ValueError):
            raise ConfigError("field 'snr_db': must be a list of numbers")
        if len(self.snr_db) == 0:
            raise ConfigError("field 'snr_db': must be a non-empty list")
        for name in ("spacing", "p_d", "phi_walk_std"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"field '{name}': must be a positive number, got {v!r}")
        if not (isinstance(self.theta_d, (int, float)) and math.isfinite(self.theta_d)
                and abs(self.theta_d) < math.pi / 2):
            raise ConfigError(f"field 'theta_d': must lie in (-pi/2, pi/2), got {self.theta_d!r}")
        if not all(math.isfinite(x) for x in self.snr_db):
            raise ConfigError("field 'snr_db': entries must be finite")
        if self.mode not in MODES:
            raise ConfigError(f"field 'mode': must be one of {MODES}, got {self.mode!r}")
        if not isinstance(self.refine, bool) or not isinstance(self.finite_t, bool):
            raise ConfigError("fields 'refine' and 'finite_t' must be booleans")
        if self.h_s.mode == "fixed" and len(self.h_s.re) != self.m:
            raise ConfigError(
                f"field 'h_s': fixed vector length {len(self.h_s.re)} does not match m={self.m}"
            )


def _check_int(value, name, minimum):
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"field '{name}': must be an integer >= {minimum}, got {value!r}")


def config_to_dict(cfg: CampaignConfig) -> dict:
    d = asdict(cfg)
    d["snr_db"] = list(cfg.snr_db)
    h = {"mode": cfg.h_s.mode}
    if cfg.h_s.mode == "random":
        h["power"] = cfg.h_s.power
    else:
        h["re"] = list(cfg.h_s.re)
        h["im"] = list(cfg.h_s.im)
    d["h_s"] = h
    return d


def config_to_json(cfg: CampaignConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)


def emit_config(cfg: CampaignConfig, path: str):
    with open(path, "w", newline="") as fh:
        fh.write(config_to_json(cfg) + "\n")


def _from_dict(raw: dict) -> CampaignConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")
    known = set(CampaignConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
    kwargs = dict(raw)
    if "h_s" in kwargs:
        h = kwargs["h_s"]
        if not isinstance(h, dict):
            raise ConfigError("field 'h_s': must be an object")
        h_known = {"mode", "power", "re", "im"}
        h_unknown = set(h) - h_known
        if h_unknown:
            raise ConfigError(f"unknown field(s) in 'h_s': {', '.join(sorted(h_unknown))}")
        kwargs["h_s"] = HsSpec(**h)
    if "snr_db" in kwargs and not isinstance(kwargs["snr_db"], (list, tuple)):
        raise ConfigError("field 'snr_db': must be a list")
    return CampaignConfig(**kwargs)


def parse_config(path: str) -> CampaignConfig:
    """Load, validate, and default-fill a campaign config; unknown keys are rejected."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON (line {err.lineno}, col {err.colno}): {err.msg}")
    return _from_dict(raw)
