"""Scenario files: schema, validation and the bundled figure reproductions.

A scenario is a YAML mapping::

    name: fig4_papr
    experiment: papr_ccdf        # papr_ccdf | oob_psd | uncoded_ber | capacity | sinr_table
    seed: 4
    n_trials: 100000             # trials, blocks per SNR point, or channel draws
    ofdm: {n_sc: 96, n_fft: 2048, n_cp: 0, scs_hz: 15000}
    curves:
      - {scheme: QPSK, beta_db: 0}
      - {scheme: RO_QPSK, beta_db: -5}
    channel: {profile: NTN-TDL-C, doppler_hz: 200, mse_db: null}
    equalizers: [MMSE]
    snr_grid_db: {start: 0, stop: 20, step: 1}     # or a plain list
    freq_grid: {start_sc: -100, stop_sc: 400, n_points: 2001}
    min_errors: 100
    budget_s: 120

``channel``, ``equalizers`` and ``snr_grid_db`` are needed by the link
experiments, ``freq_grid`` by ``oob_psd``.
"""

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import channel as chan
from .equalizer import EqualizerKind
from .modem import Scheme, check_block_length
from .waveform import OfdmConfig

EXPERIMENTS = ("papr_ccdf", "oob_psd", "uncoded_ber", "capacity", "sinr_table")
LINK_EXPERIMENTS = ("uncoded_ber", "capacity", "sinr_table")


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def as_dict(self):
        return {"field": self.path, "error": self.message}

    def __str__(self):
        return f"{self.path}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Curve:
    scheme: Scheme
    beta_db: float = 0.0

    @property
    def label(self):
        tag = self.scheme.value.lower()
        return tag if self.beta_db == 0 else f"{tag}_fdss{int(round(-self.beta_db))}db"


@dataclass
class Scenario:
    name: str
    experiment: str
    seed: int
    n_trials: int
    ofdm: OfdmConfig
    curves: list
    profile: str = "AWGN"
    doppler_hz: float = 200.0
    mse_db: float = None
    equalizers: list = field(default_factory=lambda: [EqualizerKind.MMSE])
    snr_grid_db: list = field(default_factory=list)
    freq_grid_hz: np.ndarray = None
    min_errors: int = 0
    budget_s: float = None
    description: str = ""
    raw: dict = field(default_factory=dict)


def bundled_scenarios():
    root = resources.files("dftsofdm.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def read_scenario(name_or_path):
    """Parse a bundled scenario name or YAML file into a raw mapping."""
    path = Path(str(name_or_path))
    if path.is_file():
        text = path.read_text()
    elif str(name_or_path) in bundled_scenarios():
        text = resources.files("dftsofdm.scenarios").joinpath(f"{name_or_path}.yaml").read_text()
    else:
        raise ScenarioError([Diagnostic("<scenario>", f"unknown scenario {name_or_path!r}; "
                                        f"bundled: {bundled_scenarios()}")])
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ScenarioError([Diagnostic("<scenario>", "scenario file must be a mapping")])
    return raw


def _grid(spec, path, diags):
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except (KeyError, TypeError, ValueError):
            diags.append(Diagnostic(path, "expected {start, stop, step} numbers"))
            return []
        if step <= 0 or stop < start:
            diags.append(Diagnostic(path, "need step > 0 and stop >= start"))
            return []
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    if isinstance(spec, (list, tuple)) and spec:
        try:
            return [float(v) for v in spec]
        except (TypeError, ValueError):
            pass
    diags.append(Diagnostic(path, "expected a non-empty list or {start, stop, step}"))
    return []


def validate(raw, overrides=None):
    """Check a raw scenario mapping; returns ``(scenario or None, diagnostics)``."""
    raw = copy.deepcopy(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    diags = []

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        diags.append(Diagnostic("experiment", f"must be one of {list(EXPERIMENTS)}"))

    seed = raw.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        diags.append(Diagnostic("seed", "a non-negative integer seed is required"))

    n_trials = raw.get("n_trials")
    if not isinstance(n_trials, int) or isinstance(n_trials, bool) or n_trials < 1:
        diags.append(Diagnostic("n_trials", "must be an integer >= 1"))

    ofdm_raw = raw.get("ofdm") or {}
    cfg = None
    try:
        cfg = OfdmConfig(n_sc=int(ofdm_raw.get("n_sc", 96)), n_fft=int(ofdm_raw.get("n_fft", 2048)),
                         n_cp=int(ofdm_raw.get("n_cp", 0)),
                         scs_hz=float(ofdm_raw.get("scs_hz", 15e3)))
    except (TypeError, ValueError) as exc:
        diags.append(Diagnostic("ofdm", str(exc)))

    curves = []
    curves_raw = raw.get("curves")
    if not isinstance(curves_raw, list) or not curves_raw:
        diags.append(Diagnostic("curves", "a non-empty list of {scheme, beta_db} is required"))
        curves_raw = []
    for i, c in enumerate(curves_raw):
        path = f"curves[{i}]"
        if not isinstance(c, dict):
            diags.append(Diagnostic(path, "expected a mapping"))
            continue
        try:
            scheme = Scheme.parse(c.get("scheme"))
        except ValueError as exc:
            diags.append(Diagnostic(f"{path}.scheme", str(exc)))
            continue
        beta_db = c.get("beta_db", 0.0)
        if not isinstance(beta_db, (int, float)) or beta_db > 0:
            diags.append(Diagnostic(f"{path}.beta_db", "must be a number <= 0"))
            continue
        if cfg is not None:
            try:
                check_block_length(scheme, cfg.n_sc)
            except ValueError as exc:
                diags.append(Diagnostic(f"{path}.scheme", f"{exc} (ofdm.n_sc must be even)"))
                continue
        curves.append(Curve(scheme, float(beta_db)))

    extra = {}
    if experiment in LINK_EXPERIMENTS:
        ch = raw.get("channel") or {}
        profile = ch.get("profile", "AWGN")
        try:
            prof = chan.load_profile(profile)
            if cfg is not None:
                delays = prof.sample_delays(cfg.sample_rate_hz)
                if np.any(delays >= max(cfg.n_cp, 1)):
                    diags.append(Diagnostic("channel.profile", f"max delay {delays.max()} samples "
                                            f"not covered by ofdm.n_cp={cfg.n_cp}"))
        except ValueError as exc:
            diags.append(Diagnostic("channel.profile", str(exc)))
        doppler = ch.get("doppler_hz", 200.0)
        if not isinstance(doppler, (int, float)) or doppler < 0:
            diags.append(Diagnostic("channel.doppler_hz", "must be a number >= 0"))
        mse_db = ch.get("mse_db")
        if mse_db is not None and not isinstance(mse_db, (int, float)):
            diags.append(Diagnostic("channel.mse_db", "must be a number or null"))
        eqs = []
        for i, e in enumerate(raw.get("equalizers") or ["MMSE"]):
            try:
                eqs.append(EqualizerKind.parse(e))
            except ValueError as exc:
                diags.append(Diagnostic(f"equalizers[{i}]", str(exc)))
        extra.update(profile=str(profile), doppler_hz=float(doppler) if isinstance(doppler, (int, float)) else 0.0,
                     mse_db=mse_db, equalizers=eqs,
                     snr_grid_db=_grid(raw.get("snr_grid_db"), "snr_grid_db", diags))
    if experiment == "oob_psd":
        fg = raw.get("freq_grid") or {}
        try:
            start, stop, n = float(fg["start_sc"]), float(fg["stop_sc"]), int(fg["n_points"])
            if n < 1 or stop < start:
                raise ValueError
            if cfg is not None:
                extra["freq_grid_hz"] = np.linspace(start, stop, n) * cfg.scs_hz
        except (KeyError, TypeError, ValueError):
            diags.append(Diagnostic("freq_grid", "expected {start_sc, stop_sc, n_points} "
                                    "with n_points >= 1"))
    if experiment == "papr_ccdf" and isinstance(n_trials, int) and n_trials < 1000:
        diags.append(Diagnostic("n_trials", "papr_ccdf needs >= 1000 trials to resolve 1e-3"))

    min_errors = raw.get("min_errors", 0)
    if not isinstance(min_errors, int) or min_errors < 0:
        diags.append(Diagnostic("min_errors", "must be a non-negative integer"))

    if diags:
        return None, diags
    return Scenario(name=str(raw.get("name", "scenario")), experiment=experiment, seed=seed,
                    n_trials=n_trials, ofdm=cfg, curves=curves, min_errors=min_errors,
                    budget_s=raw.get("budget_s"), description=str(raw.get("description", "")),
                    raw=raw, **extra), []


def load(name_or_path, overrides=None):
    scenario, diags = validate(read_scenario(name_or_path), overrides)
    if diags:
        raise ScenarioError(diags)
    return scenario
