"""INI run configuration with a fixed, unit-suffixed schema.

Every key has a documented default (see :data:`SCHEMA`); unknown sections
or keys are rejected. The SHA-256 digest of the fully resolved configuration
is stamped into every output file so mismatched replays can be detected.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .channel import ChannelModel
from .keyrate import DecoyParams, FailureProbs
from .noise_model import FiberPathModel, FrameSchedule, LinkNoise, PsdModel, SliceConfig, read_psd_table_text
from .recovery import RecoveryConfig
from .synth import BeatCarrier, RateProfile


class ConfigError(ValueError):
    """Invalid configuration file or value."""


# section -> key -> (type, default, description)
SCHEMA: dict[str, dict[str, tuple[str, object, str]]] = {
    "run": {
        "seed": ("int", 1, "master seed of every random substream"),
        "n_frames": ("int", 2000, "Q-frames per simulated run"),
        "max_events": ("int", 50_000_000, "abort when a run would exceed this many clicks"),
        "trajectory_sample_period_ns": ("float", 10.0, "sample period of synthesized fiber/colored noise"),
        "jitter_ps": ("float", 0.0, "Gaussian timing jitter (standard deviation)"),
    },
    "link_noise": {
        "laser_a_linewidth_khz": ("float", 5.9, "Lorentzian linewidth of Alice's laser"),
        "laser_b_linewidth_khz": ("float", 2.4, "Lorentzian linewidth of Bob's laser"),
        "fiber_a_psd": ("str", "", "fiber phase PSD for Alice's arm: '', 'builtin:302km', 'builtin:504km' or a file"),
        "fiber_b_psd": ("str", "", "fiber phase PSD for Bob's arm (same choices)"),
        "wavelength_nm": ("float", 1550.12, "optical carrier wavelength"),
    },
    "frame_schedule": {
        "t_r_us": ("float", 4.9152, "R-frame duration"),
        "t_q_us": ("float", 1.6384, "Q-frame duration"),
        "t_buffer_us": ("float", 0.0, "buffer between frames"),
    },
    "rate_profile": {
        "r_rate_mcps": ("float", 24.0, "per-detector count rate in R-frames"),
        "q_rate_mcps": ("float", 24.0, "per-detector count rate in Q-frames (characterization runs)"),
        "dark_rate_cps": ("float", 0.0, "per-detector dark/background rate"),
    },
    "carrier": {
        "nu_mhz": ("float", 80.0, "beat-note frequency"),
        "phi0_rad": ("float", 0.0, "initial phase"),
        "drift_hz_per_s": ("float", 0.0, "linear frequency drift"),
    },
    "recovery": {
        "bin_width_ps": ("float", 100.0, "time-bin width"),
        "f_lo_mhz": ("float", 50.0, "lower edge of the frequency search window"),
        "f_hi_mhz": ("float", 200.0, "upper edge of the frequency search window"),
        "target_resolution_mhz": ("float", 0.01, "frequency resolution reached by zero padding"),
        "duplex": ("bool", True, "estimate from both R-frames around a Q-frame"),
        "pad": ("bool", True, "zero pad the bin series"),
        "refine": ("bool", False, "parabolic sub-bin peak refinement"),
    },
    "slice": {
        "m": ("int", 16, "number of phase slices"),
        "accept_halfwidth_rad": ("float", math.nan, "accepted half-width around 0 and pi (nan: pi/m)"),
    },
    "decoy": {
        "mu_y": ("float", 0.49, "signal intensity"),
        "mu_x": ("float", 0.044, "decoy intensity"),
        "mu_o": ("float", 0.00005, "vacuum-source intensity"),
        "p_z": ("float", 0.878, "signal-window probability"),
        "epsilon": ("float", 0.28, "sending probability in signal windows"),
        "p_x": ("float", 0.115, "decoy-window probability"),
        "n_total": ("float", 1e10, "pulse pairs sent (forward model)"),
        "f_ec": ("float", 1.1, "error-correction inefficiency"),
        "eps_est": ("float", 1e-10, "failure probability of parameter estimation"),
        "eps_cor": ("float", 1e-10, "failure probability of error correction"),
        "eps_pa": ("float", 1e-10, "failure probability of privacy amplification"),
        "eps_hat": ("float", 1e-10, "smooth-entropy chain-rule coefficient"),
        "finite_size": ("bool", True, "apply statistical fluctuation corrections"),
    },
    "sns": {
        "pulse_period_ns": ("float", 1.6, "pulse slot period inside Q-frames"),
        "phase_levels": ("int", 16, "levels of the random phase modulation"),
        "gate_ps": ("float", 200.0, "gating window width centred on each slot"),
        "postselect_halfwidth_rad": ("float", math.pi / 16, "decoy-pair post-selection half-width"),
        "loss_db": ("float", 20.0, "total fiber loss of the simulated link"),
        "eta_det": ("float", 0.70, "detector efficiency"),
        "insertion_loss_db": ("float", 1.5, "measurement-setup insertion loss per arm"),
        "dark_prob": ("float", 2e-7, "noise-click probability per detector and gate (forward model)"),
        "misalignment": ("float", 0.03, "interference error of the forward model"),
    },
    "keyrate": {
        "slot_clock_ghz": ("float", 1.25, "pulse clock; slots per second = clock x duty cycle"),
    },
    "scenario": {
        "er_scan_t_r_us": ("floats", "0.4096,0.8192,1.6384,3.2768,4.9152,6.5536,9.8304", "R-frame durations of the ER scan"),
        "er_scan_rates_mcps": ("floats", "8,16,24", "count rates of the ER scan"),
        "er_scan_frames": ("int", 1500, "Q-frames per ER-scan point"),
        "linewidth_scan_khz": ("floats", "0,1,2,5,10,20,35.5,50,80", "linewidths of the linewidth scan"),
        "linewidth_scan_t_r_us": ("float", 5.0, "R-frame duration of the linewidth scan"),
        "linewidth_scan_t_q_us": ("float", 1.0, "Q-frame duration of the linewidth scan"),
        "skr_distances_km": ("floats", "0,25,50,75,100,150,200,250,300,350,400,450,500,550,600", "fiber lengths of the key-rate curve"),
        "skr_n_totals": ("floats", "1e10,1e11,1e12,1e13", "finite sizes of the key-rate curve"),
        "skr_dark_prob": ("float", 1.6e-8, "noise-click probability used for the key-rate curve"),
        "fft_hist_frames": ("int", 5000, "estimates per FFT histogram"),
        "fft_hist_bin_khz": ("float", 5.0, "histogram bin width"),
    },
}

BUILTIN_PSD = {"builtin:302km": "fiber_psd_302km.txt", "builtin:504km": "fiber_psd_504km.txt"}


def _coerce(kind: str, raw: str, where: str):
    try:
        if kind == "int":
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from None


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]] = field(default_factory=dict)
    source: str = "<defaults>"

    def __post_init__(self):
        resolved = {}
        for sec, keys in SCHEMA.items():
            given = self.values.get(sec, {})
            resolved[sec] = {}
            for key, (kind, default, _) in keys.items():
                val = given.get(key, default)
                if isinstance(val, str) and kind != "str":
                    val = _coerce(kind, val, f"[{sec}] {key}")
                resolved[sec][key] = val
        self.values = resolved

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    # -- I/O ------------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        values: dict[str, dict[str, object]] = {}
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"{source}: unknown section [{sec}]")
            values[sec] = {}
            for key, raw in cp.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
                kind = SCHEMA[sec][key][0]
                values[sec][key] = _coerce(kind, raw, f"{source} [{sec}] {key}")
        return cls(values, source)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text(), str(path))

    def with_overrides(self, **sections: dict[str, object]) -> "RunConfig":
        vals = {s: dict(v) for s, v in self.values.items()}
        for sec, kv in sections.items():
            for k in kv:
                if k not in SCHEMA.get(sec, {}):
                    raise ConfigError(f"unknown key {k!r} in [{sec}]")
            vals[sec].update(kv)
        return RunConfig(vals, self.source)

    def to_text(self) -> str:
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key in keys:
                lines.append(f"{key} = {_format(self.values[sec][key])}")
            lines.append("")
        return "\n".join(lines)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def provenance(self, extra: dict[str, object] | None = None) -> list[str]:
        """Comment lines stamped at the top of every output file."""
        from . import __version__

        lines = [f"tfqkd {__version__}", f"config_sha256 = {self.digest}", f"seed = {self['run']['seed']}"]
        for k, v in (extra or {}).items():
            lines.append(f"{k} = {v}")
        return lines

    # -- domain objects ---------------------------------------------------------

    def _fiber(self, spec: str, nu0: float) -> FiberPathModel:
        if not spec:
            return FiberPathModel.none()
        if spec in BUILTIN_PSD:
            text = resources.files("tfqkd").joinpath("data").joinpath(BUILTIN_PSD[spec]).read_text()
            psd = PsdModel.tabulated(read_psd_table_text(text), quantity="phase")
        else:
            path = Path(spec)
            if not path.is_file():
                raise ConfigError(f"fiber PSD file {spec!r} not found")
            psd = PsdModel.from_file(path)
        return FiberPathModel(psd=psd, nu0=nu0)

    def noise(self) -> LinkNoise:
        s = self["link_noise"]
        nu0 = 299_792_458.0 / (s["wavelength_nm"] * 1e-9)
        return LinkNoise(
            laser_a=PsdModel.from_linewidth(s["laser_a_linewidth_khz"] * 1e3),
            laser_b=PsdModel.from_linewidth(s["laser_b_linewidth_khz"] * 1e3),
            fiber_a=self._fiber(s["fiber_a_psd"], nu0),
            fiber_b=self._fiber(s["fiber_b_psd"], nu0),
            nu0=nu0,
        )

    def schedule(self) -> FrameSchedule:
        s = self["frame_schedule"]
        return FrameSchedule(s["t_r_us"] * 1e-6, s["t_q_us"] * 1e-6, s["t_buffer_us"] * 1e-6)

    def rates(self) -> RateProfile:
        s = self["rate_profile"]
        return RateProfile(s["r_rate_mcps"] * 1e6, s["q_rate_mcps"] * 1e6, s["dark_rate_cps"])

    def carrier(self) -> BeatCarrier:
        s = self["carrier"]
        return BeatCarrier(s["nu_mhz"] * 1e6, s["phi0_rad"], s["drift_hz_per_s"])

    def recovery(self) -> RecoveryConfig:
        s = self["recovery"]
        return RecoveryConfig(
            bin_width=s["bin_width_ps"] * 1e-12,
            search_window=(s["f_lo_mhz"] * 1e6, s["f_hi_mhz"] * 1e6),
            target_resolution=s["target_resolution_mhz"] * 1e6,
            duplex=s["duplex"], pad=s["pad"], refine=s["refine"],
        )

    def slice(self) -> SliceConfig:
        s = self["slice"]
        w = s["accept_halfwidth_rad"]
        return SliceConfig(m=s["m"], accept_halfwidth=None if math.isnan(w) else w)

    def decoy(self) -> DecoyParams:
        s = self["decoy"]
        return DecoyParams(
            s["mu_y"], s["mu_x"], s["mu_o"], s["p_z"], s["epsilon"], s["p_x"], n_total=s["n_total"],
            f_ec=s["f_ec"], failure=FailureProbs(s["eps_est"], s["eps_cor"], s["eps_pa"], s["eps_hat"]),
            finite_size=s["finite_size"],
        )

    def channel(self) -> ChannelModel:
        s = self["sns"]
        return ChannelModel(s["loss_db"], eta_det=s["eta_det"], insertion_loss_db=s["insertion_loss_db"],
                            dark_prob=s["dark_prob"], misalignment=s["misalignment"],
                            postselect_halfwidth=s["postselect_halfwidth_rad"])

    def slots_per_second(self) -> float:
        return self["keyrate"]["slot_clock_ghz"] * 1e9 * self.schedule().duty_cycle


def build_objects(cfg: RunConfig) -> None:
    """Construct every domain object once so invalid values fail early."""
    try:
        cfg.noise(), cfg.schedule(), cfg.rates(), cfg.carrier(), cfg.recovery(), cfg.slice()
        cfg.decoy(), cfg.channel()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
