"""Receiver side: OFDM demodulation, one-tap equalization, de-spreading,
de-rotation, RO-QPSK symbol combining and SINR-scaled LLRs.

Sign convention throughout: a positive LLR (or soft value) means bit 0.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import modem
from .modem import SQRT2, Scheme
from .waveform import FdssWindow, TimeSignal

ZF_FLOOR = 1e-12


class EqualizerKind(str, Enum):
    MF = "MF"
    ZF = "ZF"
    MMSE = "MMSE"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown equalizer {value!r}; expected MF, ZF or MMSE") from None


class SingularChannelError(ArithmeticError):
    """ZF equalization requested on a subcarrier with (near-)zero gain."""


@dataclass(frozen=True)
class EqualizedGains:
    """Per-subcarrier equalizer taps ``e`` and real equalized gains ``g = e * h_tilde``."""

    e: np.ndarray
    g: np.ndarray

    @property
    def n_sc(self):
        return self.g.shape[-1]


def ofdm_demodulate(y, cfg):
    """Drop the CP, FFT with 1/sqrt(n_fft) scaling, keep bins 0 .. n_sc-1."""
    samples = np.asarray(y.samples if isinstance(y, TimeSignal) else y)
    if samples.shape[-1] < cfg.n_cp + cfg.n_fft:
        raise ValueError(f"signal has {samples.shape[-1]} samples, need {cfg.n_cp + cfg.n_fft}")
    body = samples[..., cfg.n_cp:cfg.n_cp + cfg.n_fft]
    return np.fft.fft(body, axis=-1, norm="ortho")[..., :cfg.n_sc]


def effective_channel(h, window, eta, snr_lin):
    """H_tilde_k = eta sqrt(snr) F_k H_k, the channel the equalizer actually sees."""
    F = window.values if isinstance(window, FdssWindow) else np.asarray(window, dtype=float)
    return eta * np.sqrt(snr_lin) * F * np.asarray(h)


def make_equalizer(h_tilde, kind):
    """One-tap equalizer taps for MF (conjugate), ZF (inverse) or MMSE."""
    h = np.asarray(h_tilde, dtype=complex)
    kind = EqualizerKind.parse(kind)
    p = np.abs(h) ** 2
    if kind is EqualizerKind.MF:
        e = np.conj(h)
        g = p
    elif kind is EqualizerKind.ZF:
        if np.any(np.abs(h) < ZF_FLOOR):
            raise SingularChannelError("ZF equalizer: subcarrier gain below 1e-12")
        e = 1.0 / h
        g = np.ones_like(p)
    else:
        e = np.conj(h) / (p + 1.0)
        g = p / (p + 1.0)
    return EqualizedGains(e=e, g=g)


def equalize(Y, gains):
    return gains.e * np.asarray(Y)


def despread(y_eq):
    """r[m] = N^-1/2 sum_k Y~_k exp(j 2 pi k m / N)."""
    return modem.dft_despread(y_eq)


def derotate(r, scheme):
    """Rotate (pi/2-)BPSK back onto the real axis and keep the real part."""
    scheme = Scheme.parse(scheme)
    r = np.asarray(r)
    if scheme is Scheme.BPSK:
        return np.real(np.exp(-0.25j * np.pi) * r)
    if scheme is Scheme.PI2_BPSK:
        m = np.arange(r.shape[-1])
        return np.real(np.exp(-0.5j * np.pi * (0.5 + m % 2)) * r)
    raise ValueError(f"derotate applies to BPSK variants, not {scheme.value}")


def combine_roqpsk(r):
    """Merge the two copies of each bit into N/2 QPSK-like symbols.

    q_l = Re{(r[2l] - r[2l+1]) / 2} + j Im{(r[2l+1] - r[2l+2]) / 2}, with
    r[N] wrapping to r[0].
    """
    r = np.asarray(r)
    if r.shape[-1] % 2:
        raise ValueError("RO-QPSK combining needs an even block length")
    nxt = np.roll(r, -1, axis=-1)
    diff = (r - nxt) / 2.0
    return np.real(diff[..., 0::2]) + 1j * np.imag(diff[..., 1::2])


def soft_symbols(r, scheme):
    """Scheme-specific detector input: r itself, derotated reals, or combined symbols."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.QPSK:
        return np.asarray(r)
    if scheme is Scheme.RO_QPSK:
        return combine_roqpsk(r)
    return derotate(r, scheme)


def _iq_interleave(z):
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = np.real(z)
    out[..., 1::2] = np.imag(z)
    return out


def compute_llrs(received, scheme, sinr, gain):
    """Per-bit LLRs scaled by the effective SINR.

    ``received`` is the output of :func:`soft_symbols`; ``gain`` is mu_G
    (QPSK, BPSK variants) or the Hann-weighted mu_{w,G} (RO-QPSK).
    ``sinr`` and ``gain`` may be arrays broadcasting over leading axes.
    """
    scheme = Scheme.parse(scheme)
    gain = np.asarray(gain, dtype=float)
    if np.any(gain == 0):
        raise ValueError("LLR scaling needs a non-zero signal gain")
    scale = (np.asarray(sinr, dtype=float) / gain)[..., None]
    if scheme in (Scheme.BPSK, Scheme.PI2_BPSK):
        return scale * 2.0 * np.asarray(received, dtype=float)
    return scale * 2.0 * SQRT2 * _iq_interleave(np.asarray(received))


def hard_decisions(soft):
    """Bit 1 where the value is negative; an exact zero decides bit 0."""
    return (np.asarray(soft) < 0).astype(np.int8)


def detect_bits(r, scheme):
    """Hard bits straight from de-spread symbols."""
    scheme = Scheme.parse(scheme)
    soft = soft_symbols(r, scheme)
    if scheme in (Scheme.BPSK, Scheme.PI2_BPSK):
        return hard_decisions(soft)
    return hard_decisions(_iq_interleave(soft))
