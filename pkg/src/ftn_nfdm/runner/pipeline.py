"""Monte-Carlo power sweep over the full transmitter, link and receiver chain.

Every block lives in its own simulation window (isolated burst) and is
driven by random streams addressed by explicit keys::

    data bits   substream(seed, 0, block)
    ASE noise   substream(seed, 1, amplitude_index, block, span)

Blocks are propagated in fixed chunks of ``config.chunk``, so the step
plan, and hence every number, is the same whatever the worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from ..channel import StepControl, obpf_array, run_link_array, substream
from ..errors import BModAmplitudeError, ConvergenceError, EdgeEnergyError, GridMismatchError
from ..nft import inft_b, nft_forward
from ..params import build_normalization, watt_to_dbm
from ..rxdsp import (
    SphereConfig,
    demap_subcarriers,
    equalize_nfd,
    ici_matrix,
    iterative_detect,
    q_from_ber,
    qam_ber_awgn,
    slice_symbols,
    sphere_decode,
    subcarrier_gate,
)
from ..signals import TimeGrid, TimeSignal, dft_lambda_grid
from ..txdsp import (
    DEFAULT_MARGIN,
    apply_pdc,
    band_limit,
    check_b_feasibility,
    map_qam,
    subcarrier_centers,
    synth_b_spectrum,
)

# BER charged to the bits of a block the transmitter could not launch
LOST_BLOCK_BER = 0.5

_TX_FAILURES = (BModAmplitudeError, ConvergenceError, GridMismatchError)


@dataclass(frozen=True)
class StageFailure:
    block: int
    stage: str
    message: str


@dataclass(frozen=True)
class BlockOutcome:
    block: int
    n_bits: int
    bit_errors: int
    sq_error: float = 0.0
    ref_energy: float = 0.0
    energy: float = 0.0
    timed_out: bool = False
    failure: StageFailure | None = None


@dataclass(frozen=True)
class ResultRow:
    digest: str
    amplitude: float
    avg_power_dbm: float
    ber: float
    q_db: float
    evm_pct: float
    q_est_db: float
    se: float
    net_rate: float
    mode: str
    decoder: str
    alpha: float
    n_subcarriers: int
    seed: int
    n_blocks: int
    n_failed: int
    n_timeouts: int
    bit_errors: int
    n_bits: int


RESULT_COLUMNS = tuple(f.name for f in fields(ResultRow))


@dataclass(frozen=True)
class SweepResult:
    rows: list
    failures: dict  # amplitude -> list of StageFailure

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]


def block_bits(config, block):
    s = config.signal
    rng = np.random.default_rng(substream(config.seed, 0, block))
    return rng.integers(0, 2, size=s.n_subcarriers_N * s.bits_per_symbol)


def _detector(config, G, const):
    dec = config.decoder
    cfg = SphereConfig(node_budget=dec.node_budget, max_condition=dec.max_condition)
    if dec.mode == "slicing":
        return lambda r: slice_symbols(r, const)
    if dec.mode == "sphere":
        return lambda r: sphere_decode(r, G, const, cfg=cfg)
    return lambda r: iterative_detect(
        r, G, const, n_iter=dec.n_iter, band_width=dec.band_width, cfg=cfg
    )


class _Setup:
    """Per-amplitude quantities shared by all chunks."""

    def __init__(self, config, amplitude):
        self.config = config
        self.plan = config.signal.with_amplitude(amplitude)
        self.nmap = build_normalization(self.plan, config.fiber)
        self.distance = self.nmap.distance_to_norm(config.fiber.total_length_m)
        smp = config.sampling
        self.dt = self.plan.block_T1 / smp.samples_per_block
        self.grid = TimeGrid.centered(smp.window_samples(), self.dt, 0.0, self.plan.norm_time_Ts)
        self.lam = self.grid.lambda_grid()
        self.centers = subcarrier_centers(self.plan)
        self.G = ici_matrix(self.plan.n_subcarriers_N, self.plan.compression_alpha)
        n1 = smp.rx_samples()
        if smp.rx_gate:
            self.rx_lam = dft_lambda_grid(n1, self.dt / self.plan.norm_time_Ts)
            self.gate = subcarrier_gate(self.rx_lam, self.plan, smp.rx_gate_margin)
        else:
            self.rx_lam, self.gate = self.centers, None

    def transmit(self, block):
        """Physical launch field of one burst (raises on tx-side failures)."""
        p, smp = self.plan, self.config.sampling
        spec = synth_b_spectrum(block, 0, p, self.lam)
        check_b_feasibility(spec, DEFAULT_MARGIN)
        spec = band_limit(spec, smp.taper_pass, smp.taper_stop, p.norm_time_Ts)
        if p.pdc_enabled:
            spec = apply_pdc(spec, self.distance)
        q = inft_b(spec, self.grid, tol=smp.inft_tol, max_iter=200)
        return TimeSignal.on_grid(q.samples, self.grid, self.nmap.power_scale_P0).physical()

    def receive(self, field):
        """Received symbol vector r from the physical field of one window."""
        n1 = self.config.sampling.rx_samples()
        i0 = self.grid.n // 2 - n1 // 2
        gate = TimeSignal(field[i0 : i0 + n1], self.dt, self.grid.t0 + i0 * self.dt)
        sd = nft_forward(gate.normalized(self.nmap), self.rx_lam, edge_threshold=None)
        eq = equalize_nfd(sd.spectrum(), self.distance, self.plan.pdc_enabled)
        return demap_subcarriers(eq, self.plan, 0, self.gate)


def run_chunk(config, amp_index, chunk_index):
    """Simulate blocks ``chunk_index * chunk ...`` at ``config.sweep[amp_index]``."""
    setup = _Setup(config, config.sweep[amp_index])
    fiber, smp = config.fiber, config.sampling
    start = chunk_index * config.chunk
    blocks = range(start, min(start + config.chunk, config.n_blocks))

    outcomes = {}
    launched = []
    for m in blocks:
        bits = block_bits(config, m)
        blk = map_qam(bits, setup.plan.qam_order, setup.plan.n_subcarriers_N)
        try:
            sig = setup.transmit(blk)
        except _TX_FAILURES as exc:
            fail = StageFailure(m, "tx", str(exc))
            lost = int(round(LOST_BLOCK_BER * bits.size))
            outcomes[m] = BlockOutcome(m, bits.size, lost, failure=fail)
            continue
        launched.append((m, blk, sig))

    if launched:
        ctrl = StepControl(smp.dz_max, smp.max_phase, smp.adaptive_steps)
        fields_in = np.array([s.samples for _, _, s in launched])
        seeds = [substream(config.seed, 1, amp_index, m) for m, _, _ in launched]
        out = run_link_array(
            fields_in, setup.dt, fiber, seeds, ctrl, filtering=config.obpf_every_span
        )
        if not config.obpf_every_span and fiber.n_spans:
            out = obpf_array(out, setup.dt, fiber.obpf_bandwidth)
        detect = _detector(config, setup.G, launched[0][1].constellation)
        for (m, blk, sig), field in zip(launched, out):
            c = blk.symbols[:, 0]
            try:
                r = setup.receive(field)
            except (EdgeEnergyError, GridMismatchError) as exc:
                fail = StageFailure(m, "rx", str(exc))
                lost = int(round(LOST_BLOCK_BER * blk.bits.size))
                outcomes[m] = BlockOutcome(m, blk.bits.size, lost, energy=sig.energy(), failure=fail)
                continue
            det = detect(r)
            rx_bits = blk.constellation.bits(det.indices).ravel()
            errors = int(np.count_nonzero(rx_bits != blk.bits))
            outcomes[m] = BlockOutcome(
                m,
                blk.bits.size,
                errors,
                float(np.sum(np.abs(r - setup.G @ c) ** 2)),
                float(np.sum(np.abs(c) ** 2)),
                sig.energy(),
                det.timed_out,
            )
    return [outcomes[m] for m in blocks]


def _q_or_edge(ber):
    """Q in dB; inf for an error-free count, nan for BER >= 0.5 or nan."""
    if ber == 0:
        return math.inf
    if 0 < ber < 0.5:
        return q_from_ber(ber)
    return math.nan


def _aggregate(config, amp_index, outcomes):
    plan = config.signal.with_amplitude(config.sweep[amp_index])
    outcomes = sorted(outcomes, key=lambda o: o.block)
    n_bits = sum(o.n_bits for o in outcomes)
    errors = sum(o.bit_errors for o in outcomes)
    ok = [o for o in outcomes if o.failure is None]
    sent = [o for o in outcomes if o.energy > 0]
    energy = math.fsum(o.energy for o in sent)
    power = watt_to_dbm(energy / len(sent) / plan.block_T1) if sent and energy > 0 else math.nan
    ref = math.fsum(o.ref_energy for o in ok)
    evm_pct = 100.0 * math.sqrt(math.fsum(o.sq_error for o in ok) / ref) if ref else math.nan
    ber = errors / n_bits
    q = _q_or_edge(ber)
    # Gaussian estimate: EVM of the launched blocks, lost blocks as counted
    lost_bits = sum(o.n_bits for o in outcomes if o.failure is not None)
    ber_est = math.nan
    if evm_pct > 0:
        ber_g = qam_ber_awgn((100.0 / evm_pct) ** 2, plan.qam_order)
        ber_est = (ber_g * (n_bits - lost_bits) + LOST_BLOCK_BER * lost_bits) / n_bits
    elif lost_bits:
        ber_est = LOST_BLOCK_BER * lost_bits / n_bits
    row = ResultRow(
        digest=config.digest(),
        amplitude=plan.amplitude_A,
        avg_power_dbm=power,
        ber=ber,
        q_db=q,
        evm_pct=evm_pct,
        q_est_db=_q_or_edge(ber_est),
        se=plan.se,
        net_rate=plan.net_rate,
        mode=config.system_mode,
        decoder=config.decoder.mode,
        alpha=plan.compression_alpha,
        n_subcarriers=plan.n_subcarriers_N,
        seed=config.seed,
        n_blocks=config.n_blocks,
        n_failed=len(outcomes) - len(ok),
        n_timeouts=sum(o.timed_out for o in ok),
        bit_errors=errors,
        n_bits=n_bits,
    )
    return row, [o.failure for o in outcomes if o.failure is not None]


def _task(args):
    config, ai, ci = args
    return ai, run_chunk(config, ai, ci)


def run_sweep(config, threads=1, progress=None):
    """One :class:`ResultRow` per amplitude, sorted by amplitude.

    ``threads`` > 1 spreads (amplitude, chunk) tasks over worker
    processes; results are identical to the serial run.  ``progress`` is
    called as ``progress(done, total)``.
    """
    n_chunks = -(-config.n_blocks // config.chunk)
    tasks = [(config, ai, ci) for ai in range(len(config.sweep)) for ci in range(n_chunks)]
    per_amp = {ai: [] for ai in range(len(config.sweep))}
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = pool.map(_task, tasks)
            for done, (ai, outs) in enumerate(results, start=1):
                per_amp[ai].extend(outs)
                if progress:
                    progress(done, len(tasks))
    else:
        for done, task in enumerate(tasks, start=1):
            ai, outs = _task(task)
            per_amp[ai].extend(outs)
            if progress:
                progress(done, len(tasks))
    rows, failures = [], {}
    for ai in sorted(per_amp, key=lambda i: config.sweep[i]):
        row, fails = _aggregate(config, ai, per_amp[ai])
        rows.append(row)
        failures[row.amplitude] = fails
    return SweepResult(rows, failures)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(path, rows, columns=RESULT_COLUMNS):
    """CSV with a fixed header; floats written with round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            get = row.get if isinstance(row, dict) else lambda k, r=row: getattr(r, k)
            w.writerow([_fmt(get(c)) for c in columns])


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
