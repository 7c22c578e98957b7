"""Continuous-spectrum nonlinear Fourier transform for the focusing NLSE.

Convention (normalized units, see :mod:`ftn_nfdm.params`)::

    dq/dz = j q_tt + 2j |q|^2 q
    dv/dt = [[-j lam, q], [-conj(q), j lam]] v

with the Jost solution v -> (exp(-j lam t), 0) as t -> -inf and
v -> (a exp(-j lam t), b exp(j lam t)) as t -> +inf.  In the small-signal
limit b(lam) = -int conj(q(t)) exp(-2j lam t) dt, and along the fiber
b(lam, z) = b(lam, 0) exp(4j lam^2 z) while a(lam) is invariant.

The forward transform treats every sample as constant over its cell
(exact matrix exponential per cell), which makes it exact for
piecewise-constant signals and second-order accurate otherwise.  The
inverse transform is a discrete layer-peeling solve refined against that
forward transform, so forward(inverse(b)) reproduces b to the requested
tolerance on the grid.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import BModAmplitudeError, ConvergenceError, EdgeEnergyError, GridMismatchError
from .signals import NfdSpectrum, ScatteringData, TimeSignal, dft_lambda_grid

# b(lam, z) = b(lam, 0) * exp(-NLSE_SIGN * 4j lam^2 z)
NLSE_SIGN = -1

EDGE_WIDTH = 0.05
EDGE_THRESHOLD = 1e-4


@njit(cache=True)
def _scatter(q, h, lam):
    """Cell-wise exact transfer matrices; signal starts at t = -h/2."""
    n = q.size
    a = np.empty(lam.size, dtype=np.complex128)
    b = np.empty(lam.size, dtype=np.complex128)
    x_end = (n - 0.5) * h
    for i in range(lam.size):
        lm = lam[i]
        u = np.exp(0.5j * lm * h)
        w = 0j
        for k in range(n):
            qk = q[k]
            d = math.sqrt(lm * lm + qk.real * qk.real + qk.imag * qk.imag)
            cs = math.cos(d * h)
            sn = math.sin(d * h) / d if d * h > 1e-300 else h
            u, w = (cs - 1j * lm * sn) * u + qk * sn * w, -qk.conjugate() * sn * u + (
                cs + 1j * lm * sn
            ) * w
        a[i] = u * np.exp(1j * lm * x_end)
        b[i] = w * np.exp(-1j * lm * x_end)
    return a, b


@njit(cache=True)
def _peel(U, W, h):
    """Discrete layer peeling of the split-step scattering polynomials.

    ``U[k]`` multiplies zeta**-k in a, ``W[k]`` multiplies zeta**k in the
    time-referenced b, with zeta = exp(-2j lam h).
    """
    n = U.size
    U = U.copy()
    W = W.copy()
    q = np.zeros(n, dtype=np.complex128)
    for m in range(n - 1, -1, -1):
        r = -(W[m] / U[0]).conjugate()
        ar = abs(r)
        c = 1.0 / math.sqrt(1.0 + ar * ar)
        s = r * c
        sc = s.conjugate()
        for k in range(m + 1):
            uk = U[k]
            wk = W[m - k]
            U[k] = c * uk - s * wk
            W[m - k] = c * wk + sc * uk
        if ar > 0:
            q[m] = r / ar * math.atan(ar) / h
    return q


def channel_response_nfd(lambda_grid, distance_norm):
    """All-pass evolution factor of b over ``distance_norm`` normalized units."""
    if distance_norm < 0:
        raise ValueError("distance must be non-negative")
    lam = np.asarray(lambda_grid, dtype=float)
    return np.exp(-NLSE_SIGN * 4j * lam**2 * distance_norm)


def edge_energy_fraction(samples, width=EDGE_WIDTH):
    """Fraction of energy in the outer ``width`` of the window on each side."""
    p = np.abs(np.asarray(samples)) ** 2
    total = p.sum()
    if total == 0:
        return 0.0
    k = max(1, int(math.ceil(width * p.size)))
    return float((p[:k].sum() + p[-k:].sum()) / total)


def nft_forward(signal, lambda_grid, edge_threshold=EDGE_THRESHOLD, edge_width=EDGE_WIDTH):
    """Scattering coefficients a, b of ``signal`` on ``lambda_grid``.

    ``signal.samples`` are read as the normalized field; time is
    normalized by ``signal.time_scale``.  Pass ``edge_threshold=None`` to
    skip the window-boundary check (e.g. for noisy received windows).
    """
    q = signal.samples
    lam = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    if edge_threshold is not None:
        frac = edge_energy_fraction(q, edge_width)
        if frac >= edge_threshold:
            raise EdgeEnergyError(
                f"{frac:.3g} of the burst energy lies in the window edges", frac
            )
    h = signal.dt / signal.time_scale
    t0 = signal.t0 / signal.time_scale
    a, b = _scatter(q, h, lam)
    # shift theorem: the kernel ran with the first sample at t = 0
    b = b * np.exp(-2j * lam * t0)
    return ScatteringData(lam, a, b)


def _minphase_periodic(b_fft_order):
    """Min-phase a on a periodic DFT grid (FFT ordering), |a|^2 = 1 - |b|^2."""
    m = b_fft_order.size
    log_abs_a = 0.5 * np.log1p(-np.abs(b_fft_order) ** 2)
    cep = np.fft.fft(log_abs_a) / m
    fold = np.zeros(m, dtype=complex)
    fold[0] = cep[0]
    fold[1 : m // 2] = 2.0 * cep[1 : m // 2]
    fold[m // 2] = cep[m // 2]
    return np.exp(m * np.fft.ifft(fold))


def a_from_b_minphase(b_values, lambda_grid, pad_factor=8):
    """Minimum-phase a(lam) with |a|^2 = 1 - |b|^2 on a uniform grid.

    The grid is zero-padded (b = 0 outside) by ``pad_factor`` before the
    cepstral construction so that the periodic Hilbert transform
    approximates the one on the real line.
    """
    b = np.asarray(b_values, dtype=complex)
    lam = np.asarray(lambda_grid, dtype=float)
    if b.size == 0:
        return b.copy()
    peak = float(np.max(np.abs(b)))
    if peak >= 1.0:
        raise BModAmplitudeError(f"max |b| = {peak:.6g} >= 1", peak)
    if b.size > 1:
        steps = np.diff(lam)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise GridMismatchError("minimum-phase construction needs a uniform grid")
    m = 1 << int(math.ceil(math.log2(max(2, pad_factor * b.size))))
    padded = np.zeros(m, dtype=complex)
    padded[: b.size] = b
    return _minphase_periodic(padded)[: b.size]


def _embed_on_dft_grid(spec, n, h):
    """Place ``spec`` on the DFT grid of an n-sample grid (zero elsewhere)."""
    full = dft_lambda_grid(n, h)
    dl = full[1] - full[0]
    lam = spec.lambda_grid
    idx = np.rint(lam / dl)
    if np.max(np.abs(idx * dl - lam), initial=0.0) > 1e-9 * dl * max(1.0, np.max(np.abs(idx))):
        raise GridMismatchError(
            "spectrum grid is not a subset of the time grid's spectral grid "
            f"(spacing {dl:.6g})"
        )
    pos = idx.astype(int) + n // 2
    if pos.size and (pos.min() < 0 or pos.max() >= n):
        raise GridMismatchError("spectrum extends beyond the time grid's Nyquist range")
    b = np.zeros(n, dtype=complex)
    b[pos] = spec.b_values
    return full, b, pos


def inft_b(spec, grid, tol=1e-6, max_iter=30, refine=True):
    """Time-domain burst whose continuous spectrum is ``spec.b_values``.

    Parameters
    ----------
    spec : NfdSpectrum
        b(lam) on a subset of ``grid.lambda_grid()``.
    grid : TimeGrid
        Output sampling grid.
    tol : float
        Relative L2 tolerance of forward(result) against ``spec`` on the
        spectral grid.
    refine : bool
        If False, return the plain layer-peeling result without the
        forward-transform refinement loop.

    Returns
    -------
    TimeSignal
        Normalized field (``power_scale`` 1) on ``grid``.
    """
    n, h = grid.n, grid.h
    t0 = grid.t0 / grid.time_scale
    peak = spec.max_abs_b()
    if peak >= 1.0:
        raise BModAmplitudeError(f"max |b| = {peak:.6g} >= 1", peak)
    lam, target, pos = _embed_on_dft_grid(spec, n, h)
    if not np.any(target):
        return TimeSignal.on_grid(np.zeros(n, dtype=complex), grid)

    droop = np.sinc(lam * h / math.pi)
    b_in = target / droop
    norm = np.linalg.norm(target[pos])
    err = np.inf
    for _ in range(max_iter):
        q = _peel_from_b(b_in, lam, h, t0)
        if not refine:
            break
        _, b_out = _scatter(q, h, lam)
        b_out *= np.exp(-2j * lam * t0)
        resid = target - b_out
        err = np.linalg.norm(resid[pos]) / norm
        if err <= tol:
            break
        b_in = b_in + resid / droop
    else:
        raise ConvergenceError(
            f"inverse NFT residual {err:.3g} above tolerance {tol:.3g}", err
        )
    return TimeSignal.on_grid(q, grid)


def _peel_from_b(b, lam, h, t0):
    peak = float(np.max(np.abs(b)))
    if peak >= 1.0:
        raise ConvergenceError(f"refined spectrum left the b-modulation domain ({peak:.4g})")
    n = b.size
    bf = np.fft.ifftshift(b * np.exp(2j * lam * t0))
    af = _minphase_periodic(bf)
    U = np.fft.fft(af) / n
    W = np.fft.ifft(bf)
    return _peel(U, W, h)


def energy_from_spectrum(spec):
    """Normalized energy -1/pi * int log(1 - |b|^2) dlam (rectangle rule)."""
    return -float(np.sum(np.log1p(-np.abs(spec.b_values) ** 2))) * spec.spacing / math.pi
