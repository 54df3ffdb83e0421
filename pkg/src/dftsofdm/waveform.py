"""FDSS windows, power normalization, CP-OFDM modulation, PAPR and average PSD.

Subcarriers occupy IFFT bins ``0 .. n_sc-1`` with no spectrum centering.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import modem
from ._rng import chunked_streams
from .modem import Scheme


@dataclass(frozen=True)
class FdssWindow:
    """Real frequency-domain spectral-shaping window F_k.

    ``beta`` is the linear amplitude ripple (min/max of the continuous
    envelope) and ``omega`` the factor that makes the mean of F_k^2 one.
    """

    values: np.ndarray
    beta: float
    omega: float
    beta_db: float = 0.0

    @property
    def n_sc(self):
        return self.values.shape[0]

    @property
    def mean_power(self):
        return float(np.mean(self.values ** 2))


def make_fdss(beta_db, n_sc):
    """Deformed Hann window ``(1 - c cos((2 pi k + pi) / n_sc)) / omega``.

    ``c = (1 - beta) / (1 + beta)`` with ``beta = 10 ** (beta_db / 20)``.
    ``beta_db = 0`` gives the flat window.
    """
    if beta_db > 0:
        raise ValueError(f"beta_db must be <= 0 dB, got {beta_db}")
    if n_sc < 1:
        raise ValueError("n_sc must be positive")
    beta = 10.0 ** (beta_db / 20.0)
    c = (1.0 - beta) / (1.0 + beta)
    omega = math.sqrt(1.0 + c * c / 2.0)
    k = np.arange(n_sc)
    values = (1.0 - c * np.cos((2.0 * np.pi * k + np.pi) / n_sc)) / omega
    values.setflags(write=False)
    return FdssWindow(values=values, beta=beta, omega=omega, beta_db=float(beta_db))


def no_fdss(n_sc):
    return make_fdss(0.0, n_sc)


@dataclass(frozen=True)
class OfdmConfig:
    n_sc: int = 96
    n_fft: int = 2048
    n_cp: int = 0
    scs_hz: float = 15e3

    def __post_init__(self):
        if min(self.n_sc, self.n_fft, self.scs_hz) <= 0 or self.n_cp < 0:
            raise ValueError("n_sc, n_fft and scs_hz must be positive and n_cp non-negative")
        if self.n_sc > self.n_fft:
            raise ValueError(f"n_sc={self.n_sc} exceeds n_fft={self.n_fft}")
        if self.n_cp >= self.n_fft:
            raise ValueError(f"n_cp={self.n_cp} must be below n_fft={self.n_fft}")

    @property
    def sample_rate_hz(self):
        return self.n_fft * self.scs_hz

    @property
    def useful_duration_s(self):
        return 1.0 / self.scs_hz

    @property
    def cp_duration_s(self):
        return self.n_cp / self.sample_rate_hz

    @property
    def symbol_duration_s(self):
        return (self.n_fft + self.n_cp) / self.sample_rate_hz

    @property
    def n_samples(self):
        return self.n_fft + self.n_cp


@dataclass(frozen=True)
class TimeSignal:
    """CP-prefixed OFDM symbol(s); the last axis holds ``n_cp + n_fft`` samples."""

    samples: np.ndarray
    n_cp: int

    @property
    def body(self):
        return self.samples[..., self.n_cp:]


def power_norm(scheme, window):
    """Amplitude factor eta that sets E|s[n]|^2 = n_sc / n_fft.

    i.i.d. schemes divide by the window's RMS; RO-QPSK uses the Hann-weighted
    mean of F_k^2 because its subcarrier powers are not flat.
    """
    f2 = np.asarray(window.values if isinstance(window, FdssWindow) else window) ** 2
    weights = modem.subcarrier_weights(scheme, f2.shape[-1])
    return 1.0 / math.sqrt(float(np.mean(weights * f2)))


def ofdm_modulate(grid, window, eta, cfg):
    """s[n] = eta / sqrt(n_fft) sum_k F_k X_k exp(j 2 pi n k / n_fft), CP prepended."""
    X = np.asarray(grid, dtype=complex)
    F = np.asarray(window.values if isinstance(window, FdssWindow) else window, dtype=float)
    if X.shape[-1] != cfg.n_sc or F.shape[-1] != cfg.n_sc:
        raise ValueError(f"grid ({X.shape[-1]}) and window ({F.shape[-1]}) "
                         f"must both have n_sc={cfg.n_sc} entries")
    padded = np.zeros(X.shape[:-1] + (cfg.n_fft,), dtype=complex)
    padded[..., :cfg.n_sc] = (eta * F) * X
    body = np.fft.ifft(padded, axis=-1, norm="ortho")
    if cfg.n_cp:
        body = np.concatenate([body[..., -cfg.n_cp:], body], axis=-1)
    return TimeSignal(samples=body, n_cp=cfg.n_cp)


def papr_db(sig, cfg):
    """(n_fft / n_sc) max |s[n]|^2 over the symbol body, in dB (CP excluded)."""
    samples = sig.body if isinstance(sig, TimeSignal) else np.asarray(sig)
    if samples.shape[-1] == 0:
        raise ValueError("empty signal")
    peak = np.max(np.abs(samples) ** 2, axis=-1)
    if np.any(peak == 0):
        raise ValueError("PAPR undefined for an all-zero signal")
    return 10.0 * np.log10(cfg.n_fft / cfg.n_sc * peak)


def transmit(bits, scheme, window, cfg, eta=None):
    """Bits -> symbols -> DFT precoding -> CP-OFDM in one call."""
    scheme = Scheme.parse(scheme)
    if eta is None:
        eta = power_norm(scheme, window)
    X = modem.dft_precode(modem.map_bits(bits, scheme))
    return ofdm_modulate(X, window, eta, cfg)


@dataclass(frozen=True)
class CcdfCurve:
    """Empirical CCDF: ``ccdf[i]`` is the fraction of trials strictly above ``papr_db[i]``."""

    papr_db: np.ndarray
    ccdf: np.ndarray

    def points(self):
        return list(zip(self.papr_db.tolist(), self.ccdf.tolist()))

    def at(self, level=1e-3):
        return ccdf_level(self.papr_db, level, presorted=True)


def ccdf_level(values, level=1e-3, presorted=False):
    """PAPR value at which the empirical CCDF crosses ``level``.

    Linear interpolation between the two sorted samples that bracket it.
    """
    x = np.asarray(values, dtype=float)
    if not presorted:
        x = np.sort(x)
    n = x.shape[0]
    ccdf = (n - 1 - np.arange(n)) / n
    if not ccdf[-1] <= level <= ccdf[0]:
        raise ValueError(f"level {level} outside the resolvable range for {n} trials")
    # ccdf is decreasing; np.interp wants increasing abscissae
    return float(np.interp(level, ccdf[::-1], x[::-1]))


PAPR_CHUNK = 2048


def papr_samples(scheme, beta_db, cfg, n_trials, seed, chunk=PAPR_CHUNK):
    """PAPR (dB) of ``n_trials`` independent random-bit OFDM symbols.

    Trials are generated in fixed-size chunks, each with its own stream
    spawned from ``seed``, so results do not depend on how chunks are run.
    """
    scheme = Scheme.parse(scheme)
    modem.check_block_length(scheme, cfg.n_sc)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    window = make_fdss(beta_db, cfg.n_sc)
    eta = power_norm(scheme, window)
    out = np.empty(n_trials)
    for start, size, rng in chunked_streams(seed, n_trials, chunk):
        bits = modem.random_bits(rng, scheme, cfg.n_sc, size)
        out[start:start + size] = papr_db(transmit(bits, scheme, window, cfg, eta), cfg)
    return out


def papr_ccdf(scheme, beta_db, cfg, n_trials, seed):
    values = np.sort(papr_samples(scheme, beta_db, cfg, n_trials, seed))
    n = values.shape[0]
    return CcdfCurve(papr_db=values, ccdf=(n - 1 - np.arange(n)) / n)


def sinc2(x):
    """sinc^2 with sinc(x) = sin(pi x)/(pi x); series form near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    s = np.sin(np.pi * safe) / (np.pi * safe)
    s = np.where(small, 1.0 - (np.pi * x) ** 2 / 6.0, s)
    return s * s


def avg_psd(scheme, window, eta, cfg, f_grid_hz):
    """Average power spectrum eta^2 sum_k w_k F_k^2 sinc^2(T (f - k scs)).

    ``w_k`` are ones for i.i.d. schemes and the Hann weights for RO-QPSK;
    ``T`` is the CP-inclusive symbol duration.
    """
    f = np.asarray(f_grid_hz, dtype=float)
    if f.size == 0:
        raise ValueError("empty frequency grid")
    F = np.asarray(window.values if isinstance(window, FdssWindow) else window, dtype=float)
    if F.shape[-1] != cfg.n_sc:
        raise ValueError("window length must equal n_sc")
    weights = modem.subcarrier_weights(scheme, cfg.n_sc) * F ** 2
    T = cfg.symbol_duration_s
    k = np.arange(cfg.n_sc)
    terms = sinc2(T * (f[..., None] - cfg.scs_hz * k))
    return eta ** 2 * terms @ weights
