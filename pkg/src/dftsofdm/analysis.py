"""Effective SINR after one-tap equalization and DFT de-spreading.

Closed forms for i.i.d. complex symbols, (pi/2-)BPSK and RO-QPSK, the
Q-function BER that follows from them, binary-input mutual information and
capacity curves averaged over block-fading channels. The Monte-Carlo
meters at the bottom push random blocks through the actual receiver chain
and are what the closed forms are checked against.

Gains are always the real equalized gains ``G_k = E_k * H_tilde_k``; all
statistics reduce over the last axis, so arrays of channels are evaluated
in one call.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from . import channel as chan
from . import equalizer as eq
from . import modem
from ._rng import as_generator, spawn
from .equalizer import EqualizedGains, EqualizerKind
from .modem import SQRT2, Scheme
from .waveform import OfdmConfig, make_fdss, power_norm

NEG_TOL = 1e-10


class ConsistencyError(ArithmeticError):
    """A power that must be non-negative came out clearly negative."""


@dataclass(frozen=True)
class SinrReport:
    signal_power: np.ndarray
    interference_power: np.ndarray
    noise_power: np.ndarray
    sinr_lin: np.ndarray
    mu: np.ndarray

    @property
    def sinr_db(self):
        return 10.0 * np.log10(self.sinr_lin)


def _report(mu, interference, noise):
    scale = np.maximum(1.0, mu * mu)
    if np.any(interference < -NEG_TOL * scale):
        raise ConsistencyError(f"negative interference power {np.min(interference):.3g}")
    interference = np.maximum(interference, 0.0)
    signal = mu * mu
    with np.errstate(divide="ignore"):
        sinr = signal / (interference + noise)
    return SinrReport(signal_power=signal, interference_power=interference,
                      noise_power=noise, sinr_lin=sinr, mu=mu)


def _g(gains):
    return np.asarray(gains.g if isinstance(gains, EqualizedGains) else gains, dtype=float)


def _e2(gains):
    return np.abs(np.asarray(gains.e)) ** 2


def ici_taps(g):
    """g_m = (1/N) sum_k G_k exp(j 2 pi k m / N): the de-spread channel taps."""
    return np.fft.ifft(np.asarray(g, dtype=complex), axis=-1)


def sinr_iid(gains):
    """SINR = mu_G^2 / (sigma_G^2 + mean |E|^2) for i.i.d. complex symbols."""
    g = _g(gains)
    mu = g.mean(axis=-1)
    var = (g * g).mean(axis=-1) - mu * mu
    return _report(mu, var, _e2(gains).mean(axis=-1))


def sinr_zf(h_tilde):
    """ZF closed form: N / sum |H_tilde_k|^-2."""
    h = np.abs(np.asarray(h_tilde)) ** 2
    return h.shape[-1] / np.sum(1.0 / h, axis=-1)


def sinr_mmse_identity(gains):
    """MMSE shortcut mu_G / (1 - mu_G); valid only for MMSE gains."""
    mu = _g(gains).mean(axis=-1)
    if np.any(mu >= 1.0):
        raise ValueError("mu_G >= 1: not an MMSE gain vector")
    return mu / (1.0 - mu)


def _partner(g, offset):
    # G_{(offset - k) mod N}
    n = g.shape[-1]
    idx = (offset - np.arange(n)) % n
    return g[..., idx]


def _require_even(n):
    if n % 2:
        raise ValueError(f"n_sc must be even, got {n}")


def sinr_bpsk(gains, variant=Scheme.BPSK):
    """SINR of the de-rotated real branch for BPSK or pi/2-BPSK.

    Interference ``zeta^2 = (1/2N) sum G_k (G_p(k) + G_k) - mu_G^2`` with
    partner ``p(k) = -k`` (BPSK) or ``N/2 - k`` (pi/2-BPSK), modulo N.
    """
    variant = Scheme.parse(variant)
    g = _g(gains)
    n = g.shape[-1]
    _require_even(n)
    if variant is Scheme.BPSK:
        partner = _partner(g, 0)
    elif variant is Scheme.PI2_BPSK:
        partner = _partner(g, n // 2)
    else:
        raise ValueError(f"not a BPSK variant: {variant.value}")
    mu = g.mean(axis=-1)
    zeta2 = (g * (partner + g)).sum(axis=-1) / (2 * n) - mu * mu
    return _report(mu, zeta2, 0.5 * _e2(gains).mean(axis=-1))


def sinr_roqpsk(gains, mode="exact"):
    """SINR of the combined RO-QPSK symbols.

    Signal gain and noise use Hann-weighted means; the interference is
    ``nu - mu_w^2`` where ``exact`` uses
    ``nu = (1/2N) sum w_k G_k (w_k G_k + (2 - w_k) G_{N/2-k})`` and
    ``approx`` the weighted second moment ``(1/N) sum w_k G_k^2``.
    """
    g = _g(gains)
    n = g.shape[-1]
    _require_even(n)
    w = modem.hann_weights(n)
    mu_w = (w * g).mean(axis=-1)
    if mode == "exact":
        nu = (w * g * (w * g + (2.0 - w) * _partner(g, n // 2))).sum(axis=-1) / (2 * n)
    elif mode == "approx":
        nu = (w * g * g).mean(axis=-1)
    else:
        raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")
    noise = 0.5 * (w * _e2(gains)).mean(axis=-1)
    return _report(mu_w, nu - mu_w * mu_w, noise)


def sinr_for(scheme, gains, mode="exact"):
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.QPSK:
        return sinr_iid(gains)
    if scheme is Scheme.RO_QPSK:
        return sinr_roqpsk(gains, mode)
    return sinr_bpsk(gains, scheme)


def roqpsk_signal_terms(g):
    """(mu_w, kappa) from the de-spread taps: Re{g_0 - g_{-1}} and Im{2 g_1 - g_2} / 2.

    ``kappa`` is the I/Q cross-talk coefficient inside the combined
    interference.
    """
    taps = ici_taps(g)
    mu_w = np.real(taps[..., 0] - taps[..., -1])
    kappa = 0.5 * np.imag(2.0 * taps[..., 1] - taps[..., 2 % taps.shape[-1]])
    return mu_w, kappa


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / SQRT2)


def ber_semi_analytic(scheme, sinr):
    """Gaussian-interference bit error probability Q(sqrt(SINR)).

    The same expression holds for every scheme once the scheme's own SINR
    is used: for the BPSK variants the SINR already contains the factor two
    gained by discarding the quadrature noise.
    """
    Scheme.parse(scheme)
    s = sinr.sinr_lin if isinstance(sinr, SinrReport) else np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR must be non-negative")
    return q_function(np.sqrt(s))


GH_POINTS = 64
_GH_CACHE = {}


def _gauss_hermite(n):
    if n not in _GH_CACHE:
        _GH_CACHE[n] = np.polynomial.hermite.hermgauss(n)
    return _GH_CACHE[n]


def mutual_info_binary(gain_h, noise_var, amplitude=1.0, method="gh", n_points=GH_POINTS,
                       n_mc=None, seed=None):
    """I(x; y | h) in bits for y = h x + n, x = +-amplitude, n ~ N(0, noise_var).

    ``method="gh"`` integrates with Gauss-Hermite quadrature; ``"mc"`` draws
    ``n_mc`` noise samples. Arguments broadcast.
    """
    noise_var = np.asarray(noise_var, dtype=float)
    if np.any(noise_var <= 0):
        raise ValueError("noise variance must be positive")
    snr = (np.asarray(gain_h, dtype=float) * amplitude) ** 2 / noise_var
    return binary_capacity(snr, method=method, n_points=n_points, n_mc=n_mc, seed=seed)


def binary_capacity(snr, method="gh", n_points=GH_POINTS, n_mc=None, seed=None):
    """Binary-input AWGN mutual information at per-branch SNR (h a)^2 / sigma^2."""
    s = np.asarray(snr, dtype=float)[..., None]
    root = np.sqrt(s)
    if method == "gh":
        t, wts = _gauss_hermite(n_points)
        u = SQRT2 * t
        f = np.logaddexp(0.0, -2.0 * s - 2.0 * root * u) / math.log(2.0)
        out = 1.0 - f @ wts / math.sqrt(math.pi)
    elif method == "mc":
        if not n_mc:
            raise ValueError("Monte-Carlo mutual information needs n_mc")
        u = as_generator(seed).standard_normal(int(n_mc))
        f = np.logaddexp(0.0, -2.0 * s - 2.0 * root * u) / math.log(2.0)
        out = 1.0 - f.mean(axis=-1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.clip(out, 0.0, 1.0)


def spectral_efficiency(scheme, report):
    """Bits per channel use with Gaussian-treated interference.

    QPSK: two binary branches at per-branch SNR = SINR. BPSK variants: one
    branch at SINR. RO-QPSK: two branches on the combined symbols, halved
    because every bit occupies two channel uses.
    """
    scheme = Scheme.parse(scheme)
    c = binary_capacity(report.sinr_lin)
    if scheme is Scheme.QPSK:
        return 2.0 * c
    return c


@dataclass(frozen=True)
class LinkSetup:
    """Everything needed to turn a channel draw into equalized gains."""

    profile: chan.TapProfile
    cfg: OfdmConfig
    f_doppler_hz: float = 200.0
    beta_db: float = 0.0
    mse_db: float = None

    def window(self):
        return make_fdss(self.beta_db, self.cfg.n_sc)


def draw_realizations(setup, n_realizations, rng, reject=None, max_rounds=100):
    """Independent single-symbol channel draws with optional rejection.

    ``reject`` maps a batch of frequency responses ``(R, n_sc)`` to a boolean
    mask; rejected draws are replaced from the same stream. Returns the
    accepted :class:`~dftsofdm.channel.ChannelRealization` (taps of shape
    ``(R, 1, L)``) and the number of rejected draws.
    """
    cfg = setup.cfg
    parts, filled, rejected = [], 0, 0
    delays = None
    for _ in range(max_rounds):
        need = n_realizations - filled
        real = chan.realize_channel(setup.profile, setup.f_doppler_hz, 1, cfg.symbol_duration_s,
                                    cfg.sample_rate_hz, rng, n_realizations=need, n_cp=cfg.n_cp)
        delays = real.sample_delays
        taps = real.taps
        if reject is not None:
            keep = ~reject(chan.freq_response(real, 0, cfg))
            rejected += int(need - keep.sum())
            taps = taps[keep]
        parts.append(taps)
        filled += taps.shape[0]
        if filled == n_realizations:
            return chan.ChannelRealization(np.concatenate(parts), delays), rejected
    raise RuntimeError(f"could not draw {n_realizations} acceptable channels")


def draw_responses(setup, n_realizations, rng, reject=None):
    """Frequency responses ``(R, n_sc)`` of independent draws, plus the rejection count."""
    real, rejected = draw_realizations(setup, n_realizations, rng, reject)
    return chan.freq_response(real, 0, setup.cfg), rejected


def zf_reject(setup, eta, snr_lin):
    F = setup.window().values

    def reject(H):
        return np.any(np.abs(eta * math.sqrt(snr_lin) * F * H) < eq.ZF_FLOOR, axis=-1)

    return reject


@dataclass(frozen=True)
class CapacityPoint:
    snr_db: float
    bpcu: float
    n_rejected: int = 0


def capacity_curve(scheme, setup, snr_grid_db, equalizer, n_realizations, seed):
    """Ergodic spectral efficiency versus SNR, one SINR report per channel draw.

    Each SNR point uses its own child stream of ``seed``.
    """
    scheme = Scheme.parse(scheme)
    modem.check_block_length(scheme, setup.cfg.n_sc)
    kind = EqualizerKind.parse(equalizer)
    window = setup.window()
    eta = power_norm(scheme, window)
    points = []
    for snr_db, child in zip(snr_grid_db, spawn(seed, len(snr_grid_db))):
        rng = np.random.default_rng(child)
        snr = 10.0 ** (snr_db / 10.0)
        reject = zf_reject(setup, eta, snr) if kind is EqualizerKind.ZF else None
        H, n_rej = draw_responses(setup, n_realizations, rng, reject)
        h_tilde = eq.effective_channel(H, window, eta, snr)
        if setup.mse_db is not None:
            h_tilde = chan.perturb_estimate(h_tilde, setup.mse_db, rng)
        report = sinr_for(scheme, eq.make_equalizer(h_tilde, kind))
        points.append(CapacityPoint(float(snr_db), float(spectral_efficiency(scheme, report).mean()),
                                    n_rej))
    return points


# Monte-Carlo meters -----------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_samples: int

    def zscore(self, expected, floor=1e-12):
        return (self.mean - expected) / max(self.stderr, floor)


def _reference(scheme, bits, x):
    # transmitted quantity the detector output should be proportional to
    if scheme is Scheme.QPSK:
        return x
    a = (1.0 - 2.0 * bits) / SQRT2
    if scheme is Scheme.RO_QPSK:
        return a[..., 0::2] + 1j * a[..., 1::2]
    return SQRT2 * a


def _block_estimate(power_per_block, n_samples):
    n_blocks = power_per_block.shape[0]
    se = power_per_block.std(ddof=1) / math.sqrt(n_blocks) if n_blocks > 1 else float("inf")
    return Estimate(float(power_per_block.mean()), float(se), n_samples)


def measure_interference(scheme, g, n_symbols, seed, chunk_blocks=8192):
    """Empirical residual interference power of the detector input.

    Random blocks are mapped, precoded, scaled by the real gains ``g`` and
    de-spread (noise-free); the detector input minus ``mu * reference`` is
    the interference. The standard error is taken over per-block means.
    """
    scheme = Scheme.parse(scheme)
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    modem.check_block_length(scheme, n)
    mu = sinr_roqpsk(EqualizedGains(e=g, g=g)).mu if scheme is Scheme.RO_QPSK else g.mean()
    n_blocks = -(-int(n_symbols) // n)
    per_block = []
    rng = as_generator(seed)
    done = 0
    while done < n_blocks:
        size = min(chunk_blocks, n_blocks - done)
        bits = modem.random_bits(rng, scheme, n, size)
        x = modem.map_bits(bits, scheme)
        r = eq.despread(g * modem.dft_precode(x))
        soft = eq.soft_symbols(r, scheme)
        err = soft - mu * _reference(scheme, bits, x)
        per_block.append(np.mean(np.abs(err) ** 2, axis=-1))
        done += size
    return _block_estimate(np.concatenate(per_block), n_blocks * n)


def measure_noise(scheme, e, n_symbols, seed, chunk_blocks=8192):
    """Empirical post-detector noise power for unit-variance subcarrier noise."""
    scheme = Scheme.parse(scheme)
    e = np.asarray(e, dtype=complex)
    n = e.shape[-1]
    n_blocks = -(-int(n_symbols) // n)
    per_block = []
    rng = as_generator(seed)
    done = 0
    while done < n_blocks:
        size = min(chunk_blocks, n_blocks - done)
        z = chan.complex_noise(rng, (size, n), 1.0)
        soft = eq.soft_symbols(eq.despread(e * z), scheme)
        per_block.append(np.mean(np.abs(soft) ** 2, axis=-1))
        done += size
    return _block_estimate(np.concatenate(per_block), n_blocks * n)
