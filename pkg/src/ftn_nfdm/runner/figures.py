"""CSV data behind the subcarrier, SE and Q-vs-power figures."""

from __future__ import annotations

import math
import os
from dataclasses import replace

import numpy as np

from ..nft import inft_b
from ..params import build_normalization, normalized_se
from ..signals import TimeGrid
from ..txdsp import map_qam, subcarrier_indices, synth_b_spectrum
from .pipeline import run_sweep, write_rows

FIG4B_COLUMNS = ("power_dbm", "q_db", "mode", "alpha")


def _write(path, columns, rows):
    write_rows(path, [dict(zip(columns, r)) for r in rows], columns)
    return path


def fig1_data(config, alphas=(1.0, 0.8), n_subcarriers=16, amplitude=0.3, seed=0):
    """Subcarrier traces, burst envelope and power spectrum for each alpha.

    Returns three row lists: (alpha, k, lambda, abs_b),
    (alpha, t_ns, abs_q) and (alpha, f_ghz, power_db).
    """
    traces, envelopes, spectra = [], [], []
    smp = config.sampling
    for alpha in alphas:
        plan = replace(
            config.signal,
            n_subcarriers_N=n_subcarriers,
            compression_alpha=alpha,
            amplitude_A=amplitude,
        )
        nmap = build_normalization(plan, config.fiber)
        dt = plan.block_T1 / smp.samples_per_block
        grid = TimeGrid.centered(smp.window_samples(), dt, 0.0, plan.norm_time_Ts)
        lam = grid.lambda_grid()
        rng = np.random.default_rng(seed)
        bits = rng.integers(0, 2, n_subcarriers * plan.bits_per_symbol)
        blk = map_qam(bits, plan.qam_order, n_subcarriers)
        x = lam * plan.burst_T0 / plan.norm_time_Ts
        for k, c in zip(subcarrier_indices(n_subcarriers), blk.symbols[:, 0]):
            sub = np.abs(amplitude * c * np.sinc((x + k * alpha * math.pi) / math.pi))
            traces.extend((alpha, int(k), float(l), float(v)) for l, v in zip(lam, sub))
        spec = synth_b_spectrum(blk, 0, plan, lam)
        q = inft_b(spec, grid, tol=smp.inft_tol, max_iter=200)
        env = np.abs(q.samples) * math.sqrt(nmap.power_scale_P0)  # sqrt(W)
        envelopes.extend((alpha, float(t * 1e9), float(v)) for t, v in zip(grid.times, env))
        p = np.abs(np.fft.fftshift(np.fft.fft(q.samples))) ** 2
        f = np.fft.fftshift(np.fft.fftfreq(grid.n, dt))
        p_db = 10 * np.log10(np.maximum(p / p.max(), 1e-30))
        spectra.extend((alpha, float(fi * 1e-9), float(v)) for fi, v in zip(f, p_db))
    return traces, envelopes, spectra


def fig2a_data(config, n_values=range(1, 129), alphas=(1.0, 0.8), length_km=1000.0, pdc=True):
    """Normalized SE against N for each alpha: rows (n_subcarriers, alpha, se)."""
    B, beta2 = config.signal.bandwidth_B, config.fiber.beta2
    return [
        (int(n), float(a), normalized_se(int(n), a, B, beta2, length_km * 1e3, pdc))
        for a in alphas
        for n in n_values
    ]


def fig4b_data(config, threads=1, alphas=None, progress=None):
    """Q against measured launch power for the baseline and each FTN system.

    Returns (rows, results) with rows (power_dbm, q_db, mode, alpha) and
    ``results`` mapping alpha to its :class:`SweepResult`.
    """
    alphas = (1.0,) + tuple(config.figure_alphas if alphas is None else alphas)
    results, rows = {}, []
    for a in dict.fromkeys(alphas):
        cfg = config.nfdm_baseline() if a == 1 else config.with_system(a)
        res = run_sweep(cfg, threads=threads, progress=progress)
        results[a] = res
        rows.extend((r.avg_power_dbm, r.q_db, r.mode, r.alpha) for r in res)
    return rows, results


def peak_row(rows):
    """Row with the highest counted Q; error-free ties go to the higher estimate."""
    key = lambda r: (  # noqa: E731
        -math.inf if math.isnan(r.q_db) else r.q_db,
        -math.inf if math.isnan(r.q_est_db) else r.q_est_db,
    )
    return max(rows, key=key)


def q_deltas(results):
    """Peak Q of every system against the baseline.

    Rows (alpha, peak_power_dbm, peak_q_db, peak_q_est_db, delta_q_db,
    delta_q_est_db); the counted delta is nan when either peak is error-free.
    """
    peaks = {a: peak_row(list(res)) for a, res in results.items()}
    base = peaks.get(1.0)
    out = []
    for a, p in sorted(peaks.items(), reverse=True):
        dq = dq_est = math.nan
        if base is not None:
            if math.isfinite(p.q_db) and math.isfinite(base.q_db):
                dq = p.q_db - base.q_db
            dq_est = p.q_est_db - base.q_est_db
        out.append((a, p.avg_power_dbm, p.q_db, p.q_est_db, dq, dq_est))
    return out


Q_DELTA_COLUMNS = (
    "alpha", "peak_power_dbm", "peak_q_db", "peak_q_est_db", "delta_q_db", "delta_q_est_db"
)


def emit_figure_data(kind, config, out_dir, threads=1, progress=None):
    """Write the CSV file(s) for ``kind`` ('fig1', 'fig2a' or 'fig4b'); return the paths."""
    os.makedirs(out_dir, exist_ok=True)
    j = lambda name: os.path.join(out_dir, name)  # noqa: E731
    if kind == "fig1":
        traces, env, spec = fig1_data(config)
        return [
            _write(j("fig1a_subcarriers.csv"), ("alpha", "k", "lambda", "abs_b"), traces),
            _write(j("fig1b_envelope.csv"), ("alpha", "t_ns", "abs_q"), env),
            _write(j("fig1c_spectrum.csv"), ("alpha", "f_ghz", "power_db"), spec),
        ]
    if kind == "fig2a":
        return [_write(j("fig2a_se.csv"), ("n_subcarriers", "alpha", "se"), fig2a_data(config))]
    if kind == "fig4b":
        rows, results = fig4b_data(config, threads, progress=progress)
        paths = [_write(j("fig4b_q_vs_power.csv"), FIG4B_COLUMNS, rows)]
        paths.append(
            _write(j("fig4b_q_deltas.csv"), Q_DELTA_COLUMNS, q_deltas(results))
        )
        return paths
    raise ValueError(f"unknown figure kind {kind!r}")

