import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftn_nfdm.channel import (
    StepControl,
    ase_psd,
    edfa,
    edfa_array,
    link_spans,
    obpf,
    obpf_array,
    plan_steps,
    run_link,
    run_link_array,
    ssfm_array,
    ssfm_propagate,
    substream,
)
from ftn_nfdm.errors import StepSizeError
from ftn_nfdm.params import PLANCK, FiberPlan
from ftn_nfdm.signals import TimeSignal

NU = 299792458.0 / 1550e-9
BETA2 = FiberPlan().beta2


def _gauss(n=2048, dt=1e-12, T=10e-12, P=1e-3):
    t = (np.arange(n) - n // 2) * dt
    return t, math.sqrt(P) * np.exp(-(t**2) / (2 * T**2))


def test_dispersion_gaussian_closed_form():
    t, a0 = _gauss()
    T, L = 10e-12, 10.0
    out = ssfm_array(a0, 1e-12, np.full(100, L / 100), 0.0, BETA2, 0.0)
    q = T**2 - 1j * BETA2 * L * 1e3
    expect = a0[t.size // 2] * T / np.sqrt(q) * np.exp(-(t**2) / (2 * q))
    assert np.max(np.abs(out - expect)) / np.max(np.abs(expect)) < 1e-6


def test_spm_closed_form_with_loss():
    rng = np.random.default_rng(0)
    a0 = 0.05 * (rng.standard_normal(256) + 1j * rng.standard_normal(256))
    a = 0.2 * math.log(10) / 10  # 1/km
    leff = -math.expm1(-a * 80) / a
    expect = a0 * math.exp(-a * 40) * np.exp(1j * 1.3 * np.abs(a0) ** 2 * leff)

    def err(n):
        out = ssfm_array(a0, 1e-12, np.full(n, 80.0 / n), 0.2, 0.0, 1.3)
        assert np.allclose(np.abs(out), np.abs(expect), rtol=1e-12)
        return np.max(np.abs(out - expect)) / np.max(np.abs(expect))

    # midpoint sampling of the decaying power: error falls as dz^2
    assert err(3200) < 1e-6
    assert err(800) / err(3200) == pytest.approx(16.0, rel=0.05)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 1e-1))
def test_lossless_energy_conserved(seed, power):
    rng = np.random.default_rng(seed)
    a0 = math.sqrt(power) * (rng.standard_normal(512) + 1j * rng.standard_normal(512))
    out = ssfm_array(a0, 2e-12, np.full(50, 0.2), 0.0, BETA2, 1.3)
    e0, e1 = np.sum(np.abs(a0) ** 2), np.sum(np.abs(out) ** 2)
    assert abs(e1 - e0) / e0 < 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 100.0))
def test_dispersion_is_invertible(seed, L):
    rng = np.random.default_rng(seed)
    a0 = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    fwd = ssfm_array(a0, 1e-12, np.array([L]), 0.0, BETA2, 0.0)
    back = ssfm_array(fwd, 1e-12, np.array([L]), 0.0, -BETA2, 0.0)
    assert np.allclose(back, a0, atol=1e-12)


def test_step_halving_second_order():
    _, a0 = _gauss(1024, 1e-12, 8e-12, 0.5)
    run = lambda n: ssfm_array(a0, 1e-12, np.full(n, 20.0 / n), 0.0, BETA2, 1.3)  # noqa: E731
    ref = run(4096)
    ns = np.array([32, 64, 128, 256])
    err = np.array([np.linalg.norm(run(n) - ref) for n in ns])
    slope = -np.polyfit(np.log(ns), np.log(err), 1)[0]
    assert abs(slope - 2.0) < 0.3


def test_step_planning():
    fixed = plan_steps(80.0, 0.2, 1.3, 1e-3, StepControl())
    assert fixed.size == 800 and fixed.sum() == pytest.approx(80.0, rel=1e-12)
    with pytest.raises(StepSizeError):
        plan_steps(80.0, 0.2, 1.3, 0.1, StepControl())
    ctrl = StepControl(adaptive=True)
    ad = plan_steps(80.0, 0.2, 1.3, 0.1, ctrl)
    z = np.concatenate(([0.0], np.cumsum(ad)[:-1]))
    a = 0.2 * math.log(10) / 10
    assert ad.sum() == pytest.approx(80.0, rel=1e-12)
    assert np.all(1.3 * 0.1 * np.exp(-a * z) * ad <= ctrl.max_phase * (1 + 1e-9))
    assert ad.max() <= ctrl.dz_max
    assert plan_steps(0.0, 0.2, 1.3, 1.0, StepControl()).size == 0


def test_ssfm_propagate_step_error():
    sig = TimeSignal(np.full(64, 1.0), 1e-12)  # 1 W peak
    with pytest.raises(StepSizeError):
        ssfm_propagate(sig, FiberPlan())
    out = ssfm_propagate(sig, FiberPlan(), step_ctrl=StepControl(adaptive=True))
    assert out.energy() == pytest.approx(sig.energy() * 10 ** -1.6, rel=1e-9)


def test_ase_noise_variance():
    n, dt = 2**20, 1e-12
    out = edfa_array(np.zeros((1, n)), dt, 16.0, 5.0, NU, [np.random.default_rng(3)])
    psd = (10**1.6 - 1) * (10**0.5 / 2) * PLANCK * NU
    assert ase_psd(16.0, 5.0, NU) == pytest.approx(psd, rel=1e-12)
    assert np.mean(np.abs(out) ** 2) == pytest.approx(psd / dt, rel=0.02)
    assert np.mean(out.real**2) == pytest.approx(psd / dt / 2, rel=0.02)


def test_unit_gain_adds_nothing():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(128) + 1j * rng.standard_normal(128)
    sig = TimeSignal(a, 1e-12)
    assert np.array_equal(edfa(sig, 0.0, 5.0, 7).samples, a)
    assert np.array_equal(edfa(sig, 10.0, 5.0, None).samples, a * math.sqrt(10.0))


def test_noise_streams_deterministic_and_batch_independent():
    fiber = FiberPlan(n_spans=2, span_length=10.0)
    rng = np.random.default_rng(0)
    a = 1e-3 * (rng.standard_normal((3, 256)) + 1j * rng.standard_normal((3, 256)))
    seeds = [substream(5, 0, k) for k in range(3)]
    batch = run_link_array(a, 4e-12, fiber, seeds)
    again = run_link_array(a, 4e-12, fiber, seeds)
    assert np.array_equal(batch, again)
    for k in range(3):
        single = run_link_array(a[k : k + 1], 4e-12, fiber, [seeds[k]])
        assert np.array_equal(single[0], batch[k])
    other = run_link_array(a, 4e-12, fiber, [substream(6, 0, k) for k in range(3)])
    assert not np.allclose(other, batch)


def test_substream_keys():
    a = np.random.default_rng(substream(1, 2, 3)).random()
    assert a == np.random.default_rng(substream(1, 2, 3)).random()
    assert a != np.random.default_rng(substream(1, 3, 2)).random()


def test_obpf_tones_and_noise():
    n, dt = 4000, 1e-12  # 1 THz sampling, 250 MHz bins
    t = np.arange(n) * dt
    inband = np.exp(2j * np.pi * 10e9 * t)
    outband = np.exp(2j * np.pi * 25e9 * t)
    sig = TimeSignal(inband + outband, dt)
    out = obpf(sig, 40e9).samples
    assert np.allclose(out, inband, atol=1e-12)
    rng = np.random.default_rng(2)
    w = rng.standard_normal((64, n)) + 1j * rng.standard_normal((64, n))
    ratio = np.mean(np.abs(obpf_array(w, dt, 40e9)) ** 2) / np.mean(np.abs(w) ** 2)
    kept = np.count_nonzero(np.abs(np.fft.fftfreq(n, dt)) <= 20e9) / n
    assert ratio == pytest.approx(kept, rel=0.02)
    with pytest.raises(ValueError):
        obpf(sig, 2e12)


def test_zero_spans_identity():
    sig = TimeSignal(np.arange(8) + 1j, 1e-12)
    out = run_link(sig, FiberPlan(n_spans=0), rng=1)
    assert np.array_equal(out.samples, sig.samples)
    assert list(link_spans(sig, FiberPlan(n_spans=0))) == []


def test_noiseless_link_energy_balance():
    # gain equals span loss: launched energy returns after every span
    _, a0 = _gauss(2048, 2e-12, 30e-12, 1e-3)
    sig = TimeSignal(a0, 2e-12)
    for res in link_spans(sig, FiberPlan(n_spans=3), filtering=False):
        assert res.signal.energy() == pytest.approx(sig.energy(), rel=1e-9)
    assert res.spans_done == 3 and res.accumulated_ase_psd == 0.0


def test_osnr_after_link():
    fiber = FiberPlan()
    n, dt = 4096, 1 / 160e9
    rows = 16
    seeds = [substream(9, k) for k in range(rows)]
    out = run_link_array(np.zeros((rows, n)), dt, fiber, seeds)
    f = np.fft.fftfreq(n, dt)
    band = np.abs(f) <= 16e9
    spec = np.abs(np.fft.fft(out, axis=-1)) ** 2 * dt / n  # W/Hz per bin
    measured = np.mean(spec[:, band])
    expect = fiber.n_spans * ase_psd(fiber.span_loss_db, fiber.amp_noise_figure, NU)
    launch = 1e-3
    osnr = 10 * math.log10(launch / (measured * 12.5e9))
    osnr_ref = 10 * math.log10(launch / (expect * 12.5e9))
    assert abs(osnr - osnr_ref) < 0.5
    spans = list(link_spans(TimeSignal(np.zeros(n), dt), fiber, rng=1))
    assert spans[-1].accumulated_ase_psd == pytest.approx(expect, rel=1e-12)
