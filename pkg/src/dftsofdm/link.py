"""Monte-Carlo uncoded BER through the full time-domain chain.

bits -> map -> DFT -> FDSS/CP-OFDM -> block-fading TDL + AWGN -> FFT ->
one-tap equalizer -> de-spread -> de-rotate / combine -> hard decisions.
Each OFDM symbol sees an independent channel draw; the semi-analytic BER
is averaged over the very same draws.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import analysis
from . import channel as chan
from . import equalizer as eq
from . import modem
from ._rng import spawn
from .equalizer import EqualizerKind
from .modem import Scheme
from .waveform import power_norm, transmit

BER_CHUNK = 512


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    ber: float
    ber_theory: float
    stderr: float
    stderr_paired: float
    n_errors: int
    n_bits: int
    n_blocks: int
    n_rejected: int = 0

    def within(self, n_sigma=3.0):
        """Simulation and theory agree to ``n_sigma`` paired standard errors."""
        return abs(self.ber - self.ber_theory) <= n_sigma * self.stderr_paired


def run_blocks(scheme, setup, snr_lin, equalizer, n_blocks, rng, eta=None):
    """Simulate ``n_blocks`` OFDM symbols; returns per-block error counts and theory BER."""
    scheme = Scheme.parse(scheme)
    kind = EqualizerKind.parse(equalizer)
    cfg = setup.cfg
    window = setup.window()
    if eta is None:
        eta = power_norm(scheme, window)
    reject = analysis.zf_reject(setup, eta, snr_lin) if kind is EqualizerKind.ZF else None
    real, n_rej = analysis.draw_realizations(setup, n_blocks, rng, reject)
    bits = modem.random_bits(rng, scheme, cfg.n_sc, n_blocks)
    sig = transmit(bits, scheme, window, cfg, eta)
    y = chan.apply_channel(sig, real, 0, snr_lin, rng)
    Y = eq.ofdm_demodulate(y, cfg)
    h_tilde = eq.effective_channel(chan.freq_response(real, 0, cfg), window, eta, snr_lin)
    if setup.mse_db is not None:
        h_tilde = chan.perturb_estimate(h_tilde, setup.mse_db, rng)
    gains = eq.make_equalizer(h_tilde, kind)
    r = eq.despread(eq.equalize(Y, gains))
    errors = np.count_nonzero(eq.detect_bits(r, scheme) != bits, axis=-1)
    theory = analysis.ber_semi_analytic(scheme, analysis.sinr_for(scheme, gains))
    return errors, theory, n_rej


def simulate_ber(scheme, setup, snr_db, equalizer, n_blocks, seed, chunk=BER_CHUNK,
                 min_errors=0, max_blocks=None):
    """Uncoded BER at one SNR.

    Blocks are simulated in chunks with streams spawned from ``seed``. If
    ``min_errors`` is set, chunks keep coming (up to ``max_blocks``) until
    that many bit errors are seen.

    ``stderr`` is the standard error of the BER itself (per-block error
    fractions, so correlation through the shared channel counts).
    ``stderr_paired`` is that of the per-block difference between the
    error fraction and that block's theoretical BER; the channel-to-channel
    spread cancels there, which makes it the right yardstick for the
    simulation-versus-theory comparison.
    """
    scheme = Scheme.parse(scheme)
    modem.check_block_length(scheme, setup.cfg.n_sc)
    snr = 10.0 ** (snr_db / 10.0)
    eta = power_norm(scheme, setup.window())
    bits_per_block = modem.n_bits(scheme, setup.cfg.n_sc)
    limit = max(n_blocks, max_blocks or n_blocks)
    n_chunks = -(-limit // chunk)
    errs, theo, rejected = [], [], 0
    done = 0
    for child in spawn(seed, n_chunks):
        size = min(chunk, limit - done)
        e, t, n_rej = run_blocks(scheme, setup, snr, equalizer, size,
                                 np.random.default_rng(child), eta)
        errs.append(e)
        theo.append(t)
        rejected += n_rej
        done += size
        if done >= n_blocks and sum(int(x.sum()) for x in errs) >= min_errors:
            break
    errs = np.concatenate(errs)
    theo = np.concatenate(theo)
    frac = errs / bits_per_block
    return BerPoint(snr_db=float(snr_db), ber=float(frac.mean()),
                    ber_theory=float(theo.mean()), stderr=_stderr(frac),
                    stderr_paired=_stderr(frac - theo),
                    n_errors=int(errs.sum()), n_bits=int(errs.size * bits_per_block),
                    n_blocks=int(errs.size), n_rejected=rejected)


def _stderr(x):
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("inf")


def ber_curve(scheme, setup, snr_grid_db, equalizer, n_blocks, seed, **kwargs):
    return [simulate_ber(scheme, setup, s, equalizer, n_blocks, child, **kwargs)
            for s, child in zip(snr_grid_db, spawn(seed, len(snr_grid_db)))]


def snr_at_ber(points, target=1e-3, theory=False):
    """SNR (dB) where the curve crosses ``target``, interpolating log10(BER) linearly."""
    snr = np.array([p.snr_db for p in points])
    ber = np.array([p.ber_theory if theory else p.ber for p in points])
    for i in range(len(snr) - 1):
        a, b = ber[i], ber[i + 1]
        if a >= target >= b and a > 0 and b > 0:
            la, lb, lt = math.log10(a), math.log10(b), math.log10(target)
            if la == lb:
                return float(snr[i])
            return float(snr[i] + (la - lt) / (la - lb) * (snr[i + 1] - snr[i]))
    raise ValueError(f"BER curve does not cross {target}")
