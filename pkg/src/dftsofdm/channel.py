"""Block-fading tapped-delay-line channels.

Taps are drawn once per OFDM symbol and held constant across it. Tap 0 may
carry a Rician LOS component; all diffuse parts follow a Jakes Doppler
spectrum generated by a sum of sinusoids.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ._rng import as_generator
from .waveform import TimeSignal

log = logging.getLogger(__name__)

N_RAYS = 32


class ProfileWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TapProfile:
    name: str
    delays_s: np.ndarray
    powers_lin: np.ndarray
    rician_k: float = 0.0
    notes: tuple = field(default=())

    def __post_init__(self):
        if len(self.delays_s) != len(self.powers_lin) or len(self.delays_s) == 0:
            raise ValueError("delays and powers must be non-empty and of equal length")
        if np.any(np.asarray(self.delays_s) < 0):
            raise ValueError("tap delays must be non-negative")
        if np.any(np.diff(self.delays_s) < 0):
            raise ValueError("tap delays must be sorted ascending")
        if not math.isclose(float(np.sum(self.powers_lin)), 1.0, abs_tol=1e-9):
            raise ValueError("tap powers must sum to one")
        if self.rician_k < 0:
            raise ValueError("Rician K-factor must be non-negative")

    @property
    def n_taps(self):
        return len(self.delays_s)

    def sample_delays(self, sample_rate_hz):
        return np.rint(np.asarray(self.delays_s) * sample_rate_hz).astype(int)


_BUNDLED = {
    "NTN-TDL-C": "ntn_tdl_c.yaml",
    "NTN-TDL-A": "ntn_tdl_a.yaml",
    "TDL-C": "tdl_c.yaml",
    "AWGN": "awgn.yaml",
}


def bundled_profiles():
    return sorted(_BUNDLED)


def _canonical(name):
    # "NTN-TDL-C(3.5ns)" -> "NTN-TDL-C"
    return str(name).split("(")[0].strip().upper().replace("_", "-")


def profile_from_dict(spec, delay_scaling_s=None, source="<dict>", warn=True):
    """Build a normalized :class:`TapProfile` from the file schema.

    Keys: ``name``, ``delay_scaling_s``, ``normalized_delays``,
    ``powers_db`` and ``rician_k_db`` (``null`` for Rayleigh, ``.inf`` for a
    static tap). Powers that do not sum to one are rescaled with a
    :class:`ProfileWarning` (``warn=False`` only records it in ``notes``).
    """
    missing = {"name", "normalized_delays", "powers_db"} - set(spec)
    if missing:
        raise ValueError(f"{source}: missing keys {sorted(missing)}")
    scale = spec.get("delay_scaling_s", 0.0) if delay_scaling_s is None else delay_scaling_s
    delays = np.asarray(spec["normalized_delays"], dtype=float) * float(scale or 0.0)
    powers = 10.0 ** (np.asarray(spec["powers_db"], dtype=float) / 10.0)
    if delays.shape != powers.shape or delays.ndim != 1:
        raise ValueError(f"{source}: normalized_delays and powers_db must be equal-length lists")
    order = np.argsort(delays, kind="stable")
    if order[0] != 0:
        raise ValueError(f"{source}: the first listed tap must have the smallest delay")
    delays, powers = delays[order], powers[order]
    total = float(powers.sum())
    if not np.isfinite(total) or total <= 0:
        raise ValueError(f"{source}: tap powers cannot be normalized (sum={total})")
    notes = ()
    if not math.isclose(total, 1.0, rel_tol=1e-6):
        msg = f"{source}: tap powers sum to {total:.6g}; renormalized to 1"
        if warn:
            warnings.warn(msg, ProfileWarning, stacklevel=3)
            log.warning(msg)
        notes = (msg,)
    powers = powers / total
    k_db = spec.get("rician_k_db")
    k = 0.0 if k_db is None else 10.0 ** (float(k_db) / 10.0)
    return TapProfile(name=str(spec["name"]), delays_s=delays, powers_lin=powers,
                      rician_k=k, notes=notes)


def load_profile(name_or_path, delay_scaling_s=None):
    """Load a bundled profile by name or a custom YAML profile file.

    ``delay_scaling_s`` overrides the file's delay spread.
    """
    key = _canonical(name_or_path)
    bundled = key in _BUNDLED
    if bundled:
        # 3GPP tables are not unit-sum; normalizing them is expected
        text = resources.files("dftsofdm.profiles").joinpath(_BUNDLED[key]).read_text()
        source = key
    else:
        path = Path(str(name_or_path))
        if not path.is_file():
            raise ValueError(f"unknown channel profile {name_or_path!r}; bundled: "
                             f"{bundled_profiles()} or a path to a profile file")
        text = path.read_text()
        source = str(path)
    spec = yaml.safe_load(text)
    if not isinstance(spec, dict):
        raise ValueError(f"{source}: profile file must be a mapping")
    return profile_from_dict(spec, delay_scaling_s, source, warn=not bundled)


@dataclass(frozen=True)
class ChannelRealization:
    """Tap gains ``taps[..., symbol, tap]`` plus integer sample delays per tap."""

    taps: np.ndarray
    sample_delays: np.ndarray

    @property
    def n_symbols(self):
        return self.taps.shape[-2]

    @property
    def max_delay(self):
        return int(np.max(self.sample_delays))

    def symbol(self, index):
        return ChannelRealization(self.taps[..., index:index + 1, :], self.sample_delays)


def jakes_process(rng, shape, f_doppler_hz, times_s, n_rays=N_RAYS):
    """Unit-power complex fading sampled at ``times_s``.

    Sum of ``n_rays`` equal-power sinusoids with arrival angles
    ``(2 pi n - pi + theta) / n_rays`` (random common offset ``theta``) and
    independent uniform phases. The ensemble autocorrelation is
    ``J0(2 pi f_D tau)``. Output shape is ``shape + (len(times_s),)``.
    """
    t = np.asarray(times_s, dtype=float)
    theta = rng.uniform(-np.pi, np.pi, size=shape + (1,))
    n = np.arange(1, n_rays + 1)
    angles = (2.0 * np.pi * n - np.pi + theta) / n_rays
    phases = rng.uniform(-np.pi, np.pi, size=shape + (n_rays,))
    freqs = f_doppler_hz * np.cos(angles)
    arg = 2.0 * np.pi * freqs[..., None] * t + phases[..., None]
    return np.exp(1j * arg).sum(axis=-2) / math.sqrt(n_rays)


def realize_channel(profile, f_doppler_hz, n_symbols, symbol_duration_s, sample_rate_hz,
                    seed, n_realizations=None, n_cp=None, los_doppler_hz=None):
    """Draw block-fading tap gains for ``n_symbols`` consecutive OFDM symbols.

    Every tap is ``sqrt(power)`` times a unit-variance Jakes process sampled
    at the symbol starts. With ``rician_k > 0`` tap 0 is split into a LOS
    term of power ``K/(K+1)`` (Doppler ``los_doppler_hz``, default
    ``f_doppler_hz``, random initial phase) and a diffuse part of power
    ``1/(K+1)``; ``K = inf`` makes tap 0 a constant unit-modulus gain.

    ``n_realizations`` adds a leading axis of independent channels. If
    ``n_cp`` is given, a quantized delay at or beyond it is rejected.
    """
    if f_doppler_hz < 0:
        raise ValueError("Doppler frequency must be non-negative")
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    delays = profile.sample_delays(sample_rate_hz)
    if n_cp is not None and np.any(delays >= max(n_cp, 1)):
        raise ValueError(f"tap delay of {delays.max()} samples is not covered by the "
                         f"{n_cp}-sample cyclic prefix")
    rng = as_generator(seed)
    batch = () if n_realizations is None else (int(n_realizations),)
    times = np.arange(n_symbols) * symbol_duration_s
    diffuse = jakes_process(rng, batch + (profile.n_taps,), f_doppler_hz, times)
    amp = np.sqrt(np.asarray(profile.powers_lin))[:, None]
    taps = amp * diffuse
    k = profile.rician_k
    if k > 0:
        f_los = f_doppler_hz if los_doppler_hz is None else los_doppler_hz
        phi = rng.uniform(-np.pi, np.pi, size=batch + (1,))
        los = np.exp(1j * (2.0 * np.pi * f_los * times + phi))
        if math.isinf(k):
            if f_doppler_hz == 0 and los_doppler_hz is None:
                los = np.ones_like(los)
            tap0 = los
        else:
            tap0 = math.sqrt(k / (k + 1.0)) * los + math.sqrt(1.0 / (k + 1.0)) * diffuse[..., 0, :]
        taps[..., 0, :] = amp[0] * tap0
    return ChannelRealization(taps=np.swapaxes(taps, -1, -2), sample_delays=delays)


def _select(realization, symbol_index):
    taps = realization.taps
    if symbol_index is None:
        return taps
    return taps[..., symbol_index, :]


def convolve_taps(samples, taps, delays):
    """Linear convolution with sparse taps, truncated to the input length.

    ``taps`` has shape ``(..., n_taps)`` broadcasting against the leading
    axes of ``samples``.
    """
    out = np.zeros(np.broadcast_shapes(samples.shape[:-1], taps.shape[:-1]) + samples.shape[-1:],
                   dtype=complex)
    n = samples.shape[-1]
    for i, d in enumerate(np.asarray(delays)):
        if d >= n:
            continue
        out[..., d:] += taps[..., i:i + 1] * samples[..., :n - d]
    return out


def apply_channel(sig, realization, symbol_index, snr_lin, seed=None, noiseless=False):
    """y[n] = sqrt(snr) sum_l h_l s[n-l] + z[n] with unit-power complex noise.

    ``symbol_index`` picks which OFDM symbol's taps to use; ``None`` applies
    all symbols at once (the signal then carries a matching ``symbol`` axis).
    ``snr_lin = inf`` returns the unscaled noiseless convolution;
    ``noiseless=True`` keeps the sqrt(snr) scaling but drops the noise.
    """
    if realization.max_delay >= max(sig.n_cp, 1):
        raise ValueError(f"channel delay {realization.max_delay} >= cyclic prefix {sig.n_cp}")
    if snr_lin < 0:
        raise ValueError("snr must be non-negative")
    taps = _select(realization, symbol_index)
    y = convolve_taps(np.asarray(sig.samples), taps, realization.sample_delays)
    if math.isinf(snr_lin):
        return TimeSignal(samples=y, n_cp=sig.n_cp)
    y *= math.sqrt(snr_lin)
    if not noiseless:
        rng = as_generator(seed)
        y += complex_noise(rng, y.shape, 1.0)
    return TimeSignal(samples=y, n_cp=sig.n_cp)


def complex_noise(rng, shape, variance):
    """Circularly-symmetric complex Gaussian with E|z|^2 = variance."""
    s = math.sqrt(variance / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def freq_response(realization, symbol_index, cfg):
    """H_k = sum_l h_l exp(-j 2 pi k d_l / n_fft) for bins k = 0 .. n_sc-1."""
    taps = _select(realization, symbol_index)
    k = np.arange(cfg.n_sc)
    phase = np.exp(-2j * np.pi * np.outer(realization.sample_delays, k) / cfg.n_fft)
    return taps @ phase


def perturb_estimate(h_tilde, mse_db, seed):
    """Add circular Gaussian estimation error of power 10**(mse_db/10).

    ``mse_db = -inf`` (or ``None``) returns the input unchanged.
    """
    h = np.asarray(h_tilde, dtype=complex)
    if mse_db is None or (math.isinf(mse_db) and mse_db < 0):
        return h.copy()
    return h + complex_noise(as_generator(seed), h.shape, 10.0 ** (mse_db / 10.0))
