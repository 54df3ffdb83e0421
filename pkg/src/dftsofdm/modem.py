"""Bit-to-symbol mappers, DFT precoding and the RO-QPSK Hann weights.

Every mapper works on the last axis, so a ``(n_blocks, n_bits)`` array maps
to ``(n_blocks, n_sc)`` symbols in one call. Bits are indexed exactly as
transmitted: ``bits[..., i]`` is ``b_i``.

All four schemes emit symbols from the same unit-energy QPSK alphabet
``{(+-1 +- 1j)/sqrt(2)}``; they differ only in how bits are placed on the
I and Q branches.
"""

from enum import Enum

import numpy as np

SQRT2 = np.sqrt(2.0)


class Scheme(str, Enum):
    QPSK = "QPSK"
    BPSK = "BPSK"
    PI2_BPSK = "PI2_BPSK"
    RO_QPSK = "RO_QPSK"

    @classmethod
    def parse(cls, value):
        """Accept enum members and loose spellings such as ``"pi/2-bpsk"``."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("/", "").replace("-", "_").replace(" ", "_")
        aliases = {"PI2BPSK": "PI2_BPSK", "ROQPSK": "RO_QPSK"}
        key = aliases.get(key.replace("_", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected one of "
                             f"{[s.value for s in cls]}") from None

    @property
    def bits_per_symbol(self):
        return 2 if self is Scheme.QPSK else 1

    @property
    def iid(self):
        """True when the mapped symbols are i.i.d. (flat mean spectrum)."""
        return self is not Scheme.RO_QPSK


def _check_bits(bits):
    b = np.asarray(bits)
    if b.ndim == 0:
        raise ValueError("bits must be a sequence")
    if b.shape[-1] == 0:
        raise ValueError("bit block is empty")
    if b.dtype == bool:
        return b.astype(np.int8)
    if not np.issubdtype(b.dtype, np.integer):
        if not np.all(np.equal(np.mod(b, 1), 0)):
            raise ValueError("bits must be integers in {0, 1}")
        b = b.astype(np.int64)
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must take values in {0, 1}")
    return b


def bit_amplitudes(bits):
    """alpha_i = (1 - 2 b_i) / sqrt(2)."""
    return (1.0 - 2.0 * _check_bits(bits)) / SQRT2


def map_qpsk(bits):
    """Gray QPSK: x[m] = alpha_{2m} + j alpha_{2m+1}."""
    b = _check_bits(bits)
    if b.shape[-1] % 2:
        raise ValueError(f"QPSK needs an even number of bits, got {b.shape[-1]}")
    a = (1.0 - 2.0 * b) / SQRT2
    return a[..., 0::2] + 1j * a[..., 1::2]


def map_bpsk(bits):
    """BPSK on the 45-degree diagonal: x[m] = alpha_m (1 + j)."""
    a = bit_amplitudes(bits)
    return a * (1.0 + 1.0j)


def map_pi2_bpsk(bits):
    """BPSK with an extra factor j on odd symbol indices (NR convention)."""
    b = _check_bits(bits)
    if b.shape[-1] % 2:
        raise ValueError(f"pi/2-BPSK needs an even block length, got {b.shape[-1]}")
    x = map_bpsk(b)
    x[..., 1::2] *= 1j
    return x


def map_ro_qpsk(bits):
    """Repeated-and-offset QPSK.

    Each bit drives one branch of two consecutive symbols, the second time
    with its sign flipped::

        even m:  x[m] =  alpha_m     - j alpha_{m-1}
        odd m:   x[m] = -alpha_{m-1} + j alpha_m

    with indices taken modulo the block length (``alpha_{-1}`` is the last
    bit of the block). The block length must be even.
    """
    b = _check_bits(bits)
    n = b.shape[-1]
    if n % 2:
        raise ValueError(f"RO-QPSK needs an even block length, got {n}")
    a = (1.0 - 2.0 * b) / SQRT2
    prev = np.roll(a, 1, axis=-1)
    x = np.empty(a.shape, dtype=complex)
    x[..., 0::2] = a[..., 0::2] - 1j * prev[..., 0::2]
    x[..., 1::2] = -prev[..., 1::2] + 1j * a[..., 1::2]
    return x


_MAPPERS = {
    Scheme.QPSK: map_qpsk,
    Scheme.BPSK: map_bpsk,
    Scheme.PI2_BPSK: map_pi2_bpsk,
    Scheme.RO_QPSK: map_ro_qpsk,
}


def map_bits(bits, scheme):
    return _MAPPERS[Scheme.parse(scheme)](bits)


def n_bits(scheme, n_sc):
    """Number of bits carried by one block of ``n_sc`` symbols."""
    return Scheme.parse(scheme).bits_per_symbol * n_sc


def check_block_length(scheme, n_sc):
    """Raise ``ValueError`` if ``n_sc`` is not allowed for ``scheme``."""
    scheme = Scheme.parse(scheme)
    if n_sc < 1:
        raise ValueError("n_sc must be positive")
    if scheme in (Scheme.PI2_BPSK, Scheme.RO_QPSK) and n_sc % 2:
        raise ValueError(f"{scheme.value} requires an even n_sc, got {n_sc}")


def random_bits(rng, scheme, n_sc, n_blocks=None):
    shape = (n_bits(scheme, n_sc),) if n_blocks is None else (n_blocks, n_bits(scheme, n_sc))
    return rng.integers(0, 2, size=shape, dtype=np.int8)


def dft_precode(symbols):
    """Unitary DFT over the last axis: X_k = N^-1/2 sum_m x[m] exp(-j 2 pi k m / N)."""
    x = np.asarray(symbols, dtype=complex)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("symbol block is empty")
    return np.fft.fft(x, axis=-1, norm="ortho")


def dft_despread(coeffs):
    """Inverse of :func:`dft_precode`."""
    y = np.asarray(coeffs, dtype=complex)
    if y.ndim == 0 or y.shape[-1] == 0:
        raise ValueError("coefficient block is empty")
    return np.fft.ifft(y, axis=-1, norm="ortho")


def hann_weights(n_sc):
    """Mean subcarrier power of RO-QPSK: w_k = 1 - cos(2 pi k / n_sc).

    The weights sum to ``n_sc``.
    """
    if int(n_sc) != n_sc or n_sc < 2 or n_sc % 2:
        raise ValueError(f"n_sc must be a positive even integer, got {n_sc}")
    k = np.arange(int(n_sc))
    return 1.0 - np.cos(2.0 * np.pi * k / n_sc)


def subcarrier_weights(scheme, n_sc):
    """Expected |X_k|^2 for the scheme: all ones, or Hann weights for RO-QPSK."""
    if Scheme.parse(scheme) is Scheme.RO_QPSK:
        return hann_weights(n_sc)
    return np.ones(n_sc)
