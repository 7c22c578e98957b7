"""Fiber link: split-step propagation, lumped EDFAs with ASE, and OBPFs.

The field obeys

    dA/dz = -(alpha/2) A - j (beta2/2) d^2A/dt^2 + j gamma |A|^2 A

in SI units (A in sqrt(W)).  All stages accept either a
:class:`~ftn_nfdm.signals.TimeSignal` or, for the ``*_array`` variants, a
2-D array holding one burst per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import fft as sfft

from .errors import StepSizeError
from .params import PLANCK, db_to_linear, loss_db_per_km_to_nepers_per_m
from .signals import TimeSignal


@dataclass(frozen=True)
class StepControl:
    """Split-step size policy.

    Steps are ``dz_max`` km long.  The nonlinear phase of a step,
    gamma * P_peak * exp(-a z) * dz with P_peak the span input peak
    power, must not exceed ``max_phase`` rad: by default this raises
    :class:`StepSizeError`; with ``adaptive`` the step is shortened instead.
    """

    dz_max: float = 0.1
    max_phase: float = 1e-3
    adaptive: bool = False


@dataclass(frozen=True)
class SpanResult:
    signal: TimeSignal
    accumulated_ase_psd: float
    spans_done: int


def _omega(n, dt):
    return 2.0 * math.pi * sfft.fftfreq(n, dt)


def plan_steps(length_km, loss_db_km, gamma, peak_power, ctrl):
    """Step lengths (km) covering ``length_km``."""
    if length_km <= 0:
        return np.zeros(0)
    a = loss_db_per_km_to_nepers_per_m(loss_db_km) * 1e3
    phase_rate = gamma * peak_power  # rad/km at the span input
    if not ctrl.adaptive:
        n = max(1, int(math.ceil(length_km / ctrl.dz_max - 1e-9)))
        dz = length_km / n
        if phase_rate * dz > ctrl.max_phase * (1 + 1e-12):
            raise StepSizeError(
                f"nonlinear phase {phase_rate * dz:.3g} rad per step exceeds "
                f"the cap {ctrl.max_phase:.3g} rad"
            )
        return np.full(n, dz)
    steps = []
    z = 0.0
    while z < length_km - 1e-12:
        local = phase_rate * math.exp(-a * z)
        dz = ctrl.dz_max if local == 0 else min(ctrl.dz_max, ctrl.max_phase / local)
        dz = min(dz, length_km - z)
        steps.append(dz)
        z += dz
    return np.asarray(steps)


@njit(cache=True)
def _kerr(a, gdz):
    """In-place SPM rotation a *= exp(j gdz |a|^2) (C-contiguous array)."""
    flat = a.ravel()
    for k in range(flat.size):
        zr = flat[k].real
        zi = flat[k].imag
        p = gdz * (zr * zr + zi * zi)
        c = math.cos(p)
        s = math.sin(p)
        flat[k] = complex(zr * c - zi * s, zr * s + zi * c)


def ssfm_array(fields, dt, steps_km, loss_db_km, beta2, gamma):
    """Symmetric split-step propagation of every row of ``fields``.

    ``beta2`` in s^2/m, ``gamma`` in 1/(W km); returns a new array.
    Consecutive half linear steps are merged.
    """
    a = np.array(fields, dtype=complex, copy=True)
    if len(steps_km) == 0:
        return a
    shape = a.shape
    a = a.reshape(-1, shape[-1])
    w2 = _omega(shape[-1], dt) ** 2
    lin_rate = -0.5 * loss_db_per_km_to_nepers_per_m(loss_db_km) * 1e3 + 0.5j * beta2 * 1e3 * w2
    cache = {}

    def linear(dz):
        key = round(dz, 14)
        if key not in cache:
            cache[key] = np.exp(lin_rate * dz)
        return cache[key]

    spec = sfft.fft(a, axis=-1)
    spec *= linear(0.5 * steps_km[0])
    for i, dz in enumerate(steps_km):
        a = np.ascontiguousarray(sfft.ifft(spec, axis=-1, overwrite_x=True))
        if gamma:
            _kerr(a, gamma * dz)
        nxt = steps_km[i + 1] if i + 1 < len(steps_km) else 0.0
        spec = sfft.fft(a, axis=-1, overwrite_x=True)
        spec *= linear(0.5 * (dz + nxt))
    return sfft.ifft(spec, axis=-1, overwrite_x=True).reshape(shape)


def ssfm_propagate(signal, fiber, length=None, step_ctrl=None):
    """Propagate ``signal`` over ``length`` km (default: one span) of ``fiber``."""
    ctrl = step_ctrl or StepControl()
    length = fiber.span_length if length is None else length
    phys = signal.physical()
    peak = float(np.max(np.abs(phys.samples) ** 2)) if phys.n else 0.0
    steps = plan_steps(length, fiber.loss_alpha, fiber.gamma_nl, peak, ctrl)
    out = ssfm_array(
        phys.samples, phys.dt, steps, fiber.loss_alpha, fiber.beta2, fiber.gamma_nl
    )
    return phys.with_samples(out).to_units(signal.power_scale, signal.time_scale)


def ase_psd(gain_db, nf_db, frequency):
    """Single-polarization ASE PSD (G - 1) n_sp h nu with n_sp = NF/2, in W/Hz."""
    G = db_to_linear(gain_db)
    n_sp = db_to_linear(nf_db) / 2.0
    return (G - 1.0) * n_sp * PLANCK * frequency


def edfa_array(fields, dt, gain_db, nf_db, frequency, rngs):
    """Amplify each row and add white ASE; ``rngs`` holds one Generator per row."""
    G = db_to_linear(gain_db)
    out = np.asarray(fields, dtype=complex) * math.sqrt(G)
    psd = ase_psd(gain_db, nf_db, frequency)
    if psd == 0 or rngs is None:
        return out
    sigma = math.sqrt(psd / dt / 2.0)
    rows = out.reshape(-1, out.shape[-1])
    for row, rng in zip(rows, rngs):
        noise = rng.standard_normal((2, row.size))
        row += sigma * (noise[0] + 1j * noise[1])
    return out


def edfa(signal, gain_db, nf_db, rng_stream, frequency=None):
    """Lumped amplifier: gain sqrt(G) on the field plus white ASE noise.

    ``rng_stream`` is a seed, ``SeedSequence`` or ``Generator``;
    ``None`` disables the noise.  ``frequency`` defaults to 1550 nm.
    """
    nu = frequency if frequency is not None else 299792458.0 / 1550e-9
    phys = signal.physical()
    rng = None if rng_stream is None else [np.random.default_rng(rng_stream)]
    out = edfa_array(phys.samples[None, :], phys.dt, gain_db, nf_db, nu, rng)[0]
    return phys.with_samples(out).to_units(signal.power_scale, signal.time_scale)


def obpf_array(fields, dt, bandwidth):
    """Ideal rectangular filter passing |f| <= bandwidth/2."""
    a = np.asarray(fields, dtype=complex)
    n = a.shape[-1]
    f = sfft.fftfreq(n, dt)
    keep = np.abs(f) <= 0.5 * bandwidth * (1 + 1e-12)
    if keep.all():
        return a.copy()
    return sfft.ifft(sfft.fft(a, axis=-1) * keep, axis=-1)


def obpf(signal, bandwidth):
    """Baseband-equivalent ideal band-pass of two-sided width ``bandwidth`` Hz."""
    fs = 1.0 / signal.dt
    if bandwidth > fs * (1 + 1e-12):
        raise ValueError("filter bandwidth exceeds the simulation bandwidth")
    return signal.with_samples(obpf_array(signal.samples, signal.dt, bandwidth))


def substream(seed, *keys):
    """Child ``SeedSequence`` addressed by ``keys``; independent of call order."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(keys))


def span_streams(seed, n_spans):
    """Independent noise generators for each span of one burst."""
    if seed is None:
        return [None] * n_spans
    if isinstance(seed, np.random.Generator):
        return [seed] * n_spans
    return [np.random.default_rng(substream(seed, span)) for span in range(n_spans)]


def run_link_array(
    fields, dt, fiber, seeds=None, step_ctrl=None, noise=True, filtering=True, callback=None
):
    """Propagate a batch of bursts (rows) over all spans.

    ``seeds`` is a sequence of per-row seeds (``SeedSequence`` or int);
    each row gets its own spawned stream per span, so results do not
    depend on how rows are batched.
    """
    ctrl = step_ctrl or StepControl()
    a = np.array(fields, dtype=complex, copy=True)
    a2 = a.reshape(-1, a.shape[-1])
    if noise and seeds is not None:
        streams = [span_streams(s, fiber.n_spans) for s in seeds]
    else:
        streams = None
    nu = fiber.carrier_frequency
    for span in range(fiber.n_spans):
        peak = float(np.max(a2.real**2 + a2.imag**2)) if a2.size else 0.0
        steps = plan_steps(fiber.span_length, fiber.loss_alpha, fiber.gamma_nl, peak, ctrl)
        a2 = ssfm_array(a2, dt, steps, fiber.loss_alpha, fiber.beta2, fiber.gamma_nl)
        rngs = [s[span] for s in streams] if streams is not None else None
        a2 = edfa_array(a2, dt, fiber.span_loss_db, fiber.amp_noise_figure, nu, rngs)
        if filtering:
            a2 = obpf_array(a2, dt, fiber.obpf_bandwidth)
        if callback is not None:
            callback(span, a2)
    return a2.reshape(a.shape)


def link_spans(signal, fiber, rng=None, step_ctrl=None, filtering=True):
    """Yield a :class:`SpanResult` after every span."""
    phys = signal.physical()
    nu = fiber.carrier_frequency
    streams = span_streams(rng, fiber.n_spans)
    ctrl = step_ctrl or StepControl()
    psd_span = ase_psd(fiber.span_loss_db, fiber.amp_noise_figure, nu) if rng is not None else 0.0
    acc = 0.0
    a = phys.samples[None, :]
    for span in range(fiber.n_spans):
        peak = float(np.max(np.abs(a) ** 2))
        steps = plan_steps(fiber.span_length, fiber.loss_alpha, fiber.gamma_nl, peak, ctrl)
        a = ssfm_array(a, phys.dt, steps, fiber.loss_alpha, fiber.beta2, fiber.gamma_nl)
        rngs = None if streams[span] is None else [streams[span]]
        a = edfa_array(a, phys.dt, fiber.span_loss_db, fiber.amp_noise_figure, nu, rngs)
        if filtering:
            a = obpf_array(a, phys.dt, fiber.obpf_bandwidth)
        acc += psd_span
        out = phys.with_samples(a[0]).to_units(signal.power_scale, signal.time_scale)
        yield SpanResult(out, acc, span + 1)


def run_link(signal, fiber, rng=None, step_ctrl=None, filtering=True):
    """Span loop: SSFM, EDFA with gain equal to the span loss, OBPF.

    ``rng`` seeds the ASE (``None`` gives a noiseless link).
    """
    result = signal
    for result in link_spans(signal, fiber, rng, step_ctrl, filtering):
        pass
    return result.signal if isinstance(result, SpanResult) else signal
