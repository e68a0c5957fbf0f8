"""
Run configuration files.

YAML with one section per record; every physical quantity carries its SI
unit in the key name (``mu_r_m``, ``l_s``, ...) so millimetres cannot sneak
in unnoticed. Unknown keys are rejected.
"""

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bubbles import BubbleEnvironment, FluidConstants
from .channel import CompositeChannelParams
from .errors import ParameterError
from .geometry import BeamSpec

# section -> {file key: constructor argument}
_KEYS = {
    "environment": {"l_s": "L", "mu_r_m": "mu_R", "sigma_x_m": "sigma_x", "r_max_m": "R_max", "window_s": "window"},
    "beam": {"sigma_m": "sigma", "aperture_radius_m": "aperture_radius", "center_height_m": "center_height"},
    "fluid": {"rho_kg_per_m3": "rho", "mu_pa_s": "mu_visc", "sigma_s_n_per_m": "sigma_s", "g_m_per_s2": "g"},
    "channel": {"alpha": "alpha", "beta": "beta", "h_l": "h_l", "avg_snr_db": "avg_snr_db",
                "p": "p", "q": "q", "gl_order": "gl_order"},
    "run": {"n_trials": "n_trials", "seed": "seed", "histogram_bins": "histogram_bins", "output_dir": "output_dir"},
}


@dataclass
class RunConfig:
    env: BubbleEnvironment
    channel: CompositeChannelParams = field(default_factory=CompositeChannelParams)
    n_trials: int = 100000
    seed: int = 2024
    output_dir: Path = Path("out")
    histogram_bins: int = 100
    source: Path = None

    def __post_init__(self):
        if self.n_trials < 1:
            raise ParameterError("n_trials must be at least 1")
        if self.histogram_bins < 2:
            raise ParameterError("histogram_bins must be at least 2")

    def to_record(self):
        """Config echo in file form, enough to reproduce a run."""
        env, beam, fluid, ch = self.env, self.env.beam, self.env.fluid, self.channel
        objs = {"environment": env, "beam": beam, "fluid": fluid, "channel": ch}
        rec = {}
        for section, keys in _KEYS.items():
            if section == "run":
                continue
            obj = objs[section]
            rec[section] = {k: getattr(obj, attr) for k, attr in keys.items() if attr != "avg_snr_db"}
        rec["channel"]["avg_snr_db"] = ch.avg_snr_db
        rec["run"] = {"n_trials": self.n_trials, "seed": self.seed,
                      "histogram_bins": self.histogram_bins, "output_dir": str(self.output_dir)}
        return rec


def _section(raw, name):
    body = raw.get(name) or {}
    if not isinstance(body, dict):
        raise ParameterError(f"section '{name}' must be a mapping")
    unknown = set(body) - set(_KEYS[name])
    if unknown:
        raise ParameterError(f"unknown keys in '{name}': {', '.join(sorted(unknown))}")
    return {_KEYS[name][k]: v for k, v in body.items()}


def parse_config(raw, source=None):
    if not isinstance(raw, dict):
        raise ParameterError("config must be a mapping")
    unknown = set(raw) - set(_KEYS)
    if unknown:
        raise ParameterError(f"unknown sections: {', '.join(sorted(unknown))}")
    try:
        env_args = _section(raw, "environment")
        if "L" not in env_args or "mu_R" not in env_args:
            raise ParameterError("environment needs l_s and mu_r_m")
        beam = BeamSpec(**{k: float(v) for k, v in _section(raw, "beam").items()})
        fluid = FluidConstants(**{k: float(v) for k, v in _section(raw, "fluid").items()})
        env = BubbleEnvironment(beam=beam, fluid=fluid, **{k: float(v) for k, v in env_args.items()})
        ch_args = _section(raw, "channel")
        snr_db = ch_args.pop("avg_snr_db", 0.0)
        if "gl_order" in ch_args:
            ch_args["gl_order"] = int(ch_args["gl_order"])
        channel = CompositeChannelParams(**{k: (v if k == "gl_order" else float(v)) for k, v in ch_args.items()})
        channel = channel.with_snr_db(float(snr_db))
        run = _section(raw, "run")
        for key in ("n_trials", "seed", "histogram_bins"):
            if key in run:
                if isinstance(run[key], bool) or int(run[key]) != run[key]:
                    raise ParameterError(f"run.{key} must be an integer")
                run[key] = int(run[key])
        if "output_dir" in run:
            run["output_dir"] = Path(run["output_dir"])
        return RunConfig(env=env, channel=channel, source=source, **run)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad config value: {exc}") from exc


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParameterError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(raw, source=path)
