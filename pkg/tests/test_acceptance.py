"""Acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (run with ``-s`` to see them).
The full-length noisy sweeps behind criteria 8 and 9 take about an hour and a half on
one core; their rows are cached as CSV under ``.acceptance_cache`` (or
``$FTN_ACCEPT_CACHE``), keyed by the config digest, so reruns are instant.
"""

import math
import os
import warnings
from contextlib import contextmanager

import numpy as np
import pytest

from ftn_nfdm.channel import ssfm_array
from ftn_nfdm.nft import inft_b, nft_forward
from ftn_nfdm.params import (
    FiberPlan,
    dispersion_to_beta2,
    guard_interval,
    paper_signal_plan,
)
from ftn_nfdm.rxdsp import ici_matrix, sphere_decode
from ftn_nfdm.runner.config import PAPER_CONFIG, default_config, parse_config
from ftn_nfdm.runner.figures import peak_row
from ftn_nfdm.runner.pipeline import RESULT_COLUMNS, ResultRow, read_rows, run_sweep, write_rows
from ftn_nfdm.signals import TimeGrid, TimeSignal
from ftn_nfdm.txdsp import Constellation, band_limit, map_qam, synth_b_spectrum

from test_nft import rect_closed_form

CACHE = os.environ.get(
    "FTN_ACCEPT_CACHE", os.path.join(os.path.dirname(os.path.dirname(__file__)), ".acceptance_cache")
)
HD_FEC = 3.8e-3
SYSTEMS = (1.0, 0.89, 0.8)


@contextmanager
def criterion(n, label):
    try:
        yield
    except BaseException:
        print(f"\nFAIL criterion {n}: {label}")
        raise
    print(f"\nPASS criterion {n}: {label}")


def _paper():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return default_config()


def _row_from_dict(d):
    out = {}
    for f in RESULT_COLUMNS:
        v = d[f]
        if f in ("digest", "mode", "decoder"):
            out[f] = v
        elif f in ("n_subcarriers", "seed", "n_blocks", "n_failed", "n_timeouts", "bit_errors", "n_bits"):
            out[f] = int(v)
        else:
            out[f] = float(v)
    return ResultRow(**out)


def cached_sweep(cfg):
    """Rows of ``run_sweep(cfg)``, reusing a CSV written by an earlier run."""
    path = os.path.join(CACHE, f"sweep_{cfg.digest()}.csv")
    if os.path.exists(path):
        return [_row_from_dict(d) for d in read_rows(path)]
    rows = list(run_sweep(cfg).rows)
    os.makedirs(CACHE, exist_ok=True)
    write_rows(path + ".tmp", rows)
    os.replace(path + ".tmp", path)
    return rows


@pytest.fixture(scope="session")
def paper_sweeps():
    cfg = _paper()
    return {a: cached_sweep(cfg.with_system(a)) for a in SYSTEMS}


def _key(r):
    return (r.q_db, r.q_est_db)


def test_c1_se_rate_table():
    with criterion(1, "SE 0.200/0.225/0.250 and net rate 25.6/28.8/32.0 Gb/s"):
        cfg = _paper()
        expect = {1.0: (16, 0.2, 25.6e9), 0.89: (18, 0.225, 28.8e9), 0.8: (20, 0.25, 32e9)}
        for a, (n, se, rate) in expect.items():
            s = cfg.with_system(a).signal
            assert s.n_subcarriers_N == n
            assert round(s.se, 12) == se
            assert round(s.net_rate) == rate


def test_c2_guard_interval():
    with criterion(2, "half guard interval at 960 km lies in [1.9, 2.2] ns"):
        beta2 = dispersion_to_beta2(16.8)
        half = guard_interval(32e9, beta2, 960e3, pdc=True)
        assert half == guard_interval(32e9, beta2, 960e3) / 2
        assert 1.9e-9 <= half <= 2.2e-9
        assert _paper().signal.guard_TGI == 2e-9


def test_c3_nft_round_trip():
    with criterion(3, "forward(inverse(b)) within 1e-3 over 100 random bursts"):
        plan = paper_signal_plan(16, 1.0, amplitude=0.2)
        n = 768
        grid = TimeGrid.centered(n, 1.5 * plan.block_T1 / n, 0.0, plan.norm_time_Ts)
        lam = grid.lambda_grid()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            blk = map_qam(rng.integers(0, 2, 64), 16, 16)
            spec = band_limit(synth_b_spectrum(blk, 0, plan, lam), 18e9, 20e9, plan.norm_time_Ts)
            spec = spec.with_b(spec.b_values * (rng.uniform(0.1, 0.9) / spec.max_abs_b()))
            back = nft_forward(inft_b(spec, grid, tol=1e-6), lam)
            err = np.linalg.norm(back.b_values - spec.b_values) / np.linalg.norm(spec.b_values)
            worst = max(worst, err)
        print(f"worst round-trip error {worst:.2e}")
        assert worst < 1e-3


def test_c4_rectangle_oracle():
    with criterion(4, "rectangle closed form < 1e-6, second-order refinement"):
        A = 0.8 * np.exp(0.3j)
        lam = np.linspace(-5, 5, 41)
        h, n, t0 = 0.01, 600, -3.0
        t = t0 + h * np.arange(n)
        q = np.zeros(n, complex)
        q[150:350] = A
        sd = nft_forward(TimeSignal(q, h, t0), lam, edge_threshold=None)
        a, b = rect_closed_form(A, t[150] - h / 2, t[349] + h / 2, lam)
        assert max(np.max(np.abs(sd.a_values - a)), np.max(np.abs(sd.b_values - b))) < 1e-6

        def err(m):
            hh = 4.0 / m
            tt = -2 + hh * np.arange(m + 1)
            qq = np.where(np.abs(tt) < 1 - 1e-12, A, 0).astype(complex)
            qq[np.isclose(np.abs(tt), 1)] = A / 2
            out = nft_forward(TimeSignal(qq, hh, -2.0), lam, edge_threshold=None)
            return np.max(np.abs(out.b_values - rect_closed_form(A, -1, 1, lam)[1]))

        ms = np.array([100, 200, 400, 800])
        slope = -np.polyfit(np.log(ms), np.log([err(m) for m in ms]), 1)[0]
        print(f"observed order {slope:.2f}")
        assert abs(slope - 2.0) < 0.3


def test_c5_ssfm_oracles():
    with criterion(5, "SSFM dispersion/SPM closed forms, energy, step order"):
        beta2 = FiberPlan().beta2
        dt, T, L = 1e-12, 10e-12, 10.0
        t = (np.arange(2048) - 1024) * dt
        a0 = 1e-1 * np.exp(-(t**2) / (2 * T**2))
        out = ssfm_array(a0, dt, np.full(100, L / 100), 0.0, beta2, 0.0)
        qc = T**2 - 1j * beta2 * L * 1e3
        exp_d = a0[1024] * T / np.sqrt(qc) * np.exp(-(t**2) / (2 * qc))
        assert np.max(np.abs(out - exp_d)) / np.max(np.abs(exp_d)) < 1e-6

        rng = np.random.default_rng(0)
        b0 = 0.05 * (rng.standard_normal(256) + 1j * rng.standard_normal(256))
        al = 0.2 * math.log(10) / 10
        leff = -math.expm1(-al * 80) / al
        exp_s = b0 * math.exp(-al * 40) * np.exp(1j * 1.3 * np.abs(b0) ** 2 * leff)
        out = ssfm_array(b0, 1e-12, np.full(3200, 80.0 / 3200), 0.2, 0.0, 1.3)
        assert np.max(np.abs(out - exp_s)) / np.max(np.abs(exp_s)) < 1e-6

        c0 = 0.1 * (rng.standard_normal(512) + 1j * rng.standard_normal(512))
        out = ssfm_array(c0, 2e-12, np.full(50, 0.2), 0.0, beta2, 1.3)
        e0 = np.sum(np.abs(c0) ** 2)
        assert abs(np.sum(np.abs(out) ** 2) - e0) / e0 < 1e-9

        g = np.sqrt(0.5) * np.exp(-(((np.arange(1024) - 512) * 1e-12) ** 2) / (2 * (8e-12) ** 2))
        run = lambda n: ssfm_array(g, 1e-12, np.full(n, 20.0 / n), 0.0, beta2, 1.3)  # noqa: E731
        ref = run(4096)
        ns = np.array([32, 64, 128, 256])
        slope = -np.polyfit(np.log(ns), np.log([np.linalg.norm(run(n) - ref) for n in ns]), 1)[0]
        print(f"step-halving slope {slope:.2f}")
        assert abs(slope - 2.0) < 0.3


def test_c6_convention_lock():
    with criterion(6, "noiseless lossless 960 km recovers every symbol, EVM < 2%"):
        text = PAPER_CONFIG.replace("loss = 0.2 dB/km", "loss = 0 dB/km")
        assert text != PAPER_CONFIG
        text += "\n[sweep]\namplitudes = 0.15, 0.3\nn_blocks = 4\nchunk = 4\n"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            cfg = parse_config(text)
        assert cfg.fiber.loss_alpha == 0.0 and cfg.fiber.n_spans * cfg.fiber.span_length == 960
        for a in (1.0, 0.8):
            for r in run_sweep(cfg.with_system(a)).rows:
                print(f"alpha {a} A {r.amplitude}: BER {r.ber}, EVM {r.evm_pct:.2f}%")
                assert r.ber == 0.0 and r.n_failed == 0
                assert r.evm_pct < 2.0


def test_c7_detector_exactness():
    with criterion(7, "sphere decoder equals exhaustive ML; noiseless FTN recovery to N=20"):
        import itertools

        qpsk, qam16 = Constellation.qam(4), Constellation.qam(16)
        G = ici_matrix(4, 0.8).entries
        cands = np.array(list(itertools.product(range(4), repeat=4)))
        grid = qpsk.points[cands] @ G.T
        rng = np.random.default_rng(7)
        agree = 0
        for _ in range(1000):
            x = qpsk.points[rng.integers(0, 4, 4)] @ G.T
            r = x + 0.4 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
            best = cands[int(np.argmin(np.sum(np.abs(r - grid) ** 2, axis=1)))]
            agree += np.array_equal(sphere_decode(r, G, qpsk).indices, best)
        assert agree == 1000
        for N in (4, 8, 12, 16, 20):
            Gn = ici_matrix(N, 0.8).entries
            for _ in range(10):
                idx = rng.integers(0, 16, N)
                assert np.array_equal(sphere_decode(Gn @ qam16.points[idx], Gn, qam16).indices, idx)


def test_c8_ftn_feasible_at_optimum(paper_sweeps):
    with criterion(8, "alpha 0.8 below HD-FEC at the Q optimum with one interior maximum"):
        rows = paper_sweeps[0.8]
        for r in rows:
            print(
                f"A {r.amplitude:.3f} P {r.avg_power_dbm:6.2f} dBm BER {r.ber:.2e} "
                f"Q {r.q_db:5.2f} Qest {r.q_est_db:5.2f} lost {r.n_failed}"
            )
        assert rows[0].n_blocks == 400 and rows[0].n_subcarriers == 20
        assert rows[0].decoder in ("iterative", "sphere")
        best = peak_row(rows)
        k = rows.index(best)
        assert best.ber < HD_FEC
        assert 0 < k < len(rows) - 1
        keys = [_key(r) for r in rows]
        assert all(keys[i] < keys[i + 1] for i in range(k))
        assert all(keys[i] > keys[i + 1] for i in range(k, len(rows) - 1))


def test_c9_peak_q_near_baseline(paper_sweeps):
    with criterion(9, "FTN peak Q within 1 dB of the baseline peak Q"):
        base = peak_row(paper_sweeps[1.0])
        for a in (0.89, 0.8):
            p = peak_row(paper_sweeps[a])
            if math.isfinite(p.q_db) and math.isfinite(base.q_db):
                delta, kind = p.q_db - base.q_db, "counted"
            else:
                delta, kind = p.q_est_db - base.q_est_db, "EVM-estimated"
            print(f"alpha {a}: peak Q delta {delta:+.2f} dB ({kind})")
            assert abs(delta) <= 1.0
