"""Transmitter DSP: Gray QAM mapping and b-modulated burst spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BModAmplitudeError
from .nft import channel_response_nfd
from .signals import NfdSpectrum

DEFAULT_MARGIN = 0.01


def _gray(i):
    return i ^ (i >> 1)


def _bits_of(value, width):
    return [(value >> (width - 1 - j)) & 1 for j in range(width)]


@dataclass(frozen=True)
class Constellation:
    """Square QAM (or BPSK) with unit average energy and Gray labels.

    Point ``i * L + j`` has in-phase level index ``i`` and quadrature
    level index ``j``; level index 0 is the most positive level.  Labels
    are the Gray code of ``i`` followed by the Gray code of ``j``.
    """

    order: int
    points: np.ndarray
    labels: np.ndarray
    levels: np.ndarray
    level_labels: np.ndarray

    @classmethod
    def qam(cls, order):
        bits = math.log2(order)
        if order < 2 or bits != int(bits):
            raise ValueError(f"QAM order {order} is not a power of two")
        bits = int(bits)
        if order == 2:
            levels = np.array([1.0, -1.0])
            lab = np.array([[0], [1]])
            return cls(2, levels.astype(complex), lab, levels, lab)
        if bits % 2:
            raise ValueError(f"only square QAM orders are supported, got {order}")
        half = bits // 2
        L = 1 << half
        scale = math.sqrt(3.0 / (2.0 * (L * L - 1)))
        levels = (L - 1 - 2 * np.arange(L)) * scale
        level_labels = np.array([_bits_of(_gray(i), half) for i in range(L)])
        points = (levels[:, None] + 1j * levels[None, :]).ravel()
        labels = np.array(
            [np.concatenate([level_labels[i], level_labels[j]]) for i in range(L) for j in range(L)]
        )
        return cls(order, points, labels, levels, level_labels)

    @property
    def bits_per_symbol(self):
        return self.labels.shape[1]

    @property
    def is_square(self):
        return self.order != 2

    def nearest(self, values):
        """Index of the nearest point (lowest index wins ties)."""
        v = np.asarray(values)
        return np.argmin(np.abs(v[..., None] - self.points), axis=-1)

    def bits(self, indices):
        return self.labels[np.asarray(indices)].reshape(*np.shape(indices), -1)

    def indices_of(self, symbols):
        idx = self.nearest(symbols)
        if not np.allclose(self.points[idx], symbols, atol=1e-12):
            raise ValueError("symbols are not constellation points")
        return idx


@dataclass(frozen=True)
class SymbolBlock:
    """QAM symbols of ``n_blocks`` bursts, one column per burst."""

    symbols: np.ndarray
    bits: np.ndarray | None = None
    constellation: Constellation | None = None

    @property
    def n_subcarriers(self):
        return self.symbols.shape[0]

    @property
    def n_blocks(self):
        return self.symbols.shape[1]

    @classmethod
    def from_symbols(cls, symbols):
        s = np.asarray(symbols, dtype=complex)
        if s.ndim == 1:
            s = s[:, None]
        return cls(s)


def map_qam(bits, qam_order, n_subcarriers=None):
    """Gray-map a flat bit sequence to QAM symbols.

    Bits are consumed symbol by symbol, subcarrier-major within a burst.
    With ``n_subcarriers`` the result has one column per burst; otherwise
    a single column holds all symbols.
    """
    const = Constellation.qam(qam_order)
    k = const.bits_per_symbol
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % k:
        raise ValueError(f"{bits.size} bits do not divide into {k}-bit symbols")
    groups = bits.reshape(-1, k)
    if const.order == 2:
        idx = groups[:, 0]
    else:
        half = k // 2
        L = 1 << half
        weights = 1 << np.arange(half - 1, -1, -1)
        gi = groups[:, :half] @ weights
        gq = groups[:, half:] @ weights
        inv_gray = np.empty(L, dtype=np.int64)
        inv_gray[[_gray(i) for i in range(L)]] = np.arange(L)
        idx = inv_gray[gi] * L + inv_gray[gq]
    syms = const.points[idx]
    n_sub = syms.size if n_subcarriers is None else n_subcarriers
    if syms.size % n_sub:
        raise ValueError("symbol count is not a multiple of the subcarrier count")
    return SymbolBlock(syms.reshape(-1, n_sub).T, bits.copy(), const)


def subcarrier_indices(n):
    """k = -n/2 .. n/2 - 1 (for odd n, -(n//2) .. n - 1 - n//2)."""
    return np.arange(-(n // 2), n - n // 2)


def subcarrier_centers(plan):
    """lambda_k = -k alpha pi Ts / T0, ordered like :func:`subcarrier_indices`."""
    k = subcarrier_indices(plan.n_subcarriers_N)
    return -k * plan.compression_alpha * math.pi * plan.norm_time_Ts / plan.burst_T0


def synth_b_spectrum(block, m, plan, lambda_grid, column=None):
    """b-modulated spectrum of burst ``m`` on ``lambda_grid``.

    ``column`` selects the symbol column (defaults to ``m``); the block
    phase ramp always uses ``m``.  Raises :class:`BModAmplitudeError` if
    the spectrum is not b-modulation feasible.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    c = block.symbols[:, m if column is None else column]
    n = c.size
    if n != plan.n_subcarriers_N:
        raise ValueError("symbol column length differs from the plan's subcarrier count")
    k = subcarrier_indices(n)
    x = lam[:, None] * (plan.burst_T0 / plan.norm_time_Ts) + k[None, :] * (
        plan.compression_alpha * math.pi
    )
    b = plan.amplitude_A * (np.sinc(x / math.pi) @ c)
    if m:
        b = b * np.exp(-2j * m * lam * plan.block_T1 / plan.norm_time_Ts)
    spec = NfdSpectrum(lam, b)
    peak = spec.max_abs_b()
    if peak >= 1.0:
        raise BModAmplitudeError(f"max |b| = {peak:.4f}; reduce the amplitude A", peak)
    return spec


def check_b_feasibility(spec, margin=DEFAULT_MARGIN):
    """Return max |b|; raise if it reaches 1 - margin."""
    peak = spec.max_abs_b()
    if peak >= 1.0 - margin:
        raise BModAmplitudeError(
            f"max |b| = {peak:.4f} exceeds the feasibility limit {1.0 - margin:.4f}", peak
        )
    return peak


def apply_pdc(spec, total_distance_norm):
    """Pre-compensate half of the link's all-pass response."""
    half = channel_response_nfd(spec.lambda_grid, 0.5 * total_distance_norm)
    return spec.with_b(spec.b_values * np.conj(half))


def band_limit(spec, f_pass, f_stop, norm_time_Ts):
    """Raised-cosine roll-off of b between |f| = f_pass and f_stop (Hz).

    Frequencies map to the spectral parameter as |lambda| = pi Ts |f|.
    Points with |f| <= f_pass are untouched.
    """
    if f_stop <= f_pass:
        raise ValueError("stop edge must lie above the pass edge")
    f = np.abs(spec.lambda_grid) / (math.pi * norm_time_Ts)
    x = np.clip((f - f_pass) / (f_stop - f_pass), 0.0, 1.0)
    return spec.with_b(spec.b_values * 0.5 * (1.0 + np.cos(math.pi * x)))


def random_bits(rng, n_blocks, plan):
    return rng.integers(0, 2, size=n_blocks * plan.n_subcarriers_N * plan.bits_per_symbol)
