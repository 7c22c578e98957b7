"""Experiment configuration: INI-style text with SI-suffixed values.

Schema (``*`` marks required keys, everything else has a default)::

    [signal]
    bandwidth*      = 32 GHz        # Hz
    n_subcarriers*  = 20
    alpha*          = 0.8           # compression factor in (0, 1]
    burst*          = 0.5 ns        # useful burst T0, s
    block*          = 2.5 ns        # total block T1, s (guard = T1 - T0)
    qam_order       = 16
    norm_time       = T0 / (2 pi)   # s
    pdc             = true

    [fiber]
    span_length     = 80 km
    n_spans         = 12
    loss            = 0.2 dB/km
    dispersion      = 16.8 ps/nm/km
    gamma           = 1.3 /W/km
    noise_figure    = 5 dB
    obpf_bandwidth  = 40 GHz
    obpf_every_span = true
    wavelength      = 1550 nm

    [sweep]
    amplitudes      = 0.1, 0.15, 0.2, 0.25, 0.3, 0.325, 0.35, 0.375, 0.4, 0.425, 0.45
    n_blocks        = 400
    seed            = 1
    chunk           = 20            # blocks propagated together
    figure_alphas   = 0.89, 0.8     # FTN systems added to fig4b

    [decoder]
    mode            = iterative     # slicing | sphere | iterative
    band_width      = 2
    n_iter          = 3
    node_budget     = 2000000
    max_condition   = 1e8

    [sampling]
    samples_per_block     = 512     # per T1
    window_factor         = 1.5     # simulation window / T1
    oversampling_headroom = 4       # minimum sample rate / B
    taper_pass            = 18 GHz
    taper_stop            = 20 GHz
    inft_tol              = 1e-4
    rx_window             = 1.2     # receiver NFT window / T1
    rx_gate               = true    # dual-domain gate before center sampling
    rx_gate_margin        = 0.3     # gate width T0 (1 + margin)
    adaptive_steps        = true
    dz_max                = 0.1 km
    max_phase             = 1e-3

Value grammar: ``number [unit]`` where ``number`` is a decimal literal and
``unit`` is an optional SI prefix (p n u m k M G T) followed by the base
unit of the key (s, Hz, m).  The product is formed in exact decimal
arithmetic and rounded once to the nearest float, so ``0.5 ns`` and
``5e-10`` give the same bits.  Keys with fixed units (dB, dB/km,
ps/nm/km, /W/km) accept only that literal unit.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
import warnings
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal, InvalidOperation

from ..errors import ConfigError
from ..params import FiberPlan, SignalPlan

_PREFIX = {
    "p": Decimal("1e-12"),
    "n": Decimal("1e-9"),
    "u": Decimal("1e-6"),
    "µ": Decimal("1e-6"),
    "m": Decimal("1e-3"),
    "": Decimal(1),
    "k": Decimal("1e3"),
    "M": Decimal("1e6"),
    "G": Decimal("1e9"),
    "T": Decimal("1e12"),
}
_NUMBER = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*?)\s*$")

# key -> (kind, unit, default); kind is 'float', 'int', 'bool', 'str', 'floats'
_SCHEMA = {
    "signal": {
        "bandwidth": ("float", "Hz", None),
        "n_subcarriers": ("int", None, None),
        "alpha": ("float", None, None),
        "burst": ("float", "s", None),
        "block": ("float", "s", None),
        "qam_order": ("int", None, 16),
        "norm_time": ("float", "s", "auto"),
        "pdc": ("bool", None, True),
    },
    "fiber": {
        "span_length": ("float", "km", 80.0),
        "n_spans": ("int", None, 12),
        "loss": ("float", "dB/km", 0.2),
        "dispersion": ("float", "ps/nm/km", 16.8),
        "gamma": ("float", "/W/km", 1.3),
        "noise_figure": ("float", "dB", 5.0),
        "obpf_bandwidth": ("float", "Hz", 40e9),
        "obpf_every_span": ("bool", None, True),
        "wavelength": ("float", "m", 1550e-9),
    },
    "sweep": {
        "amplitudes": ("floats", None, (0.1, 0.15, 0.2, 0.25, 0.3, 0.325, 0.35, 0.375, 0.4, 0.425, 0.45)),
        "n_blocks": ("int", None, 400),
        "seed": ("int", None, 1),
        "chunk": ("int", None, 20),
        "figure_alphas": ("floats", None, (0.89, 0.8)),
    },
    "decoder": {
        "mode": ("str", None, "iterative"),
        "band_width": ("int", None, 2),
        "n_iter": ("int", None, 3),
        "node_budget": ("int", None, 2_000_000),
        "max_condition": ("float", None, 1e8),
    },
    "sampling": {
        "samples_per_block": ("int", None, 512),
        "window_factor": ("float", None, 1.5),
        "oversampling_headroom": ("float", None, 4.0),
        "taper_pass": ("float", "Hz", 18e9),
        "taper_stop": ("float", "Hz", 20e9),
        "inft_tol": ("float", None, 1e-4),
        "rx_window": ("float", None, 1.2),
        "rx_gate": ("bool", None, True),
        "rx_gate_margin": ("float", None, 0.3),
        "adaptive_steps": ("bool", None, True),
        "dz_max": ("float", "km", 0.1),
        "max_phase": ("float", None, 1e-3),
    },
}
_REQUIRED = {("signal", k) for k in ("bandwidth", "n_subcarriers", "alpha", "burst", "block")}
DECODER_MODES = ("slicing", "sphere", "iterative")


def parse_quantity(text, unit=None):
    """Float value of ``text`` in the base unit ``unit`` (see module docs)."""
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"cannot parse a number from {text!r}")
    try:
        value = Decimal(m.group(1))
    except InvalidOperation as exc:  # pragma: no cover - regex guards this
        raise ValueError(f"bad number {m.group(1)!r}") from exc
    suffix = m.group(2).replace(" ", "")
    if not suffix:
        return float(value)
    if unit is None:
        raise ValueError(f"unexpected unit {suffix!r}")
    if unit in ("s", "Hz", "m", "km"):
        base = "m" if unit == "km" else unit
        if not suffix.endswith(base):
            raise ValueError(f"unit {suffix!r} is not a multiple of {base}")
        prefix = suffix[: -len(base)]
        if prefix not in _PREFIX:
            raise ValueError(f"unknown SI prefix {prefix!r}")
        value *= _PREFIX[prefix]
        if unit == "km":
            value /= Decimal(1000)
        return float(value)
    if suffix.replace("(", "").replace(")", "") != unit.replace(" ", ""):
        raise ValueError(f"expected unit {unit!r}, got {suffix!r}")
    return float(value)


@dataclass(frozen=True)
class SamplingConfig:
    samples_per_block: int = 512
    window_factor: float = 1.5
    oversampling_headroom: float = 4.0
    taper_pass: float = 18e9
    taper_stop: float = 20e9
    inft_tol: float = 1e-4
    rx_window: float = 1.2
    rx_gate: bool = True
    rx_gate_margin: float = 0.3
    adaptive_steps: bool = True
    dz_max: float = 0.1
    max_phase: float = 1e-3

    def window_samples(self):
        n = int(round(self.samples_per_block * self.window_factor))
        return n + (n % 2)

    def rx_samples(self):
        n = int(round(self.samples_per_block * self.rx_window))
        return min(n + (n % 2), self.window_samples())


@dataclass(frozen=True)
class DecoderConfig:
    mode: str = "iterative"
    band_width: int = 2
    n_iter: int = 3
    node_budget: int = 2_000_000
    max_condition: float = 1e8


@dataclass(frozen=True)
class ExperimentConfig:
    signal: SignalPlan
    fiber: FiberPlan
    sweep: tuple
    n_blocks: int = 400
    seed: int = 1
    chunk: int = 20
    figure_alphas: tuple = (0.89, 0.8)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    obpf_every_span: bool = True

    def digest(self):
        """Short hash identifying every setting that affects results."""
        text = repr(sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    @property
    def system_mode(self):
        return "nfdm" if self.signal.compression_alpha == 1 else "ftn"

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def with_system(self, alpha, decoder_mode=None):
        """Same link with compression ``alpha`` and N = round(T0 B / alpha)."""
        s = self.signal
        n = int(round(s.burst_T0 * s.bandwidth_B / alpha))
        sig = replace(s, compression_alpha=float(alpha), n_subcarriers_N=n)
        if decoder_mode is None:
            decoder_mode = "slicing" if alpha == 1 else (
                "iterative" if self.decoder.mode == "slicing" else self.decoder.mode
            )
        return replace(self, signal=sig, decoder=replace(self.decoder, mode=decoder_mode))

    def nfdm_baseline(self):
        return self.with_system(1.0, "slicing")


def _line_index(text):
    """(section, key) -> 1-based line number, plus section header lines."""
    where = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            where.setdefault((section, None), i)
        elif section is not None:
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            where.setdefault((section, key), i)
    return where


def _convert(kind, unit, raw):
    if kind == "float":
        return parse_quantity(raw, unit)
    if kind == "int":
        v = parse_quantity(raw)
        if v != int(v):
            raise ValueError(f"{raw!r} is not an integer")
        return int(v)
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{raw!r} is not a boolean")
    if kind == "floats":
        parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
        if not parts:
            raise ValueError("empty list")
        return tuple(parse_quantity(p) for p in parts)
    return raw.strip()


def parse_config(text):
    """Parse and validate configuration ``text`` into an :class:`ExperimentConfig`."""
    where = _line_index(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from exc

    values = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=where.get((section, None)))
        for key, raw in cp.items(section):
            line = where.get((section, key))
            if key not in _SCHEMA[section]:
                raise ConfigError("unknown key", field=f"{section}.{key}", line=line)
            kind, unit, _ = _SCHEMA[section][key]
            try:
                values[(section, key)] = _convert(kind, unit, raw)
            except ValueError as exc:
                raise ConfigError(str(exc), field=f"{section}.{key}", line=line) from exc

    for sec, key in sorted(_REQUIRED):
        if (sec, key) not in values:
            raise ConfigError("required value missing", field=f"{sec}.{key}")

    def get(sec, key):
        if (sec, key) in values:
            return values[(sec, key)]
        return _SCHEMA[sec][key][2]

    def fail(sec, key, msg):
        raise ConfigError(msg, field=f"{sec}.{key}", line=where.get((sec, key)))

    T0, T1 = get("signal", "burst"), get("signal", "block")
    if not 0 < T0 < T1:
        fail("signal", "block", "need 0 < burst < block")
    alpha = get("signal", "alpha")
    if not 0 < alpha <= 1:
        fail("signal", "alpha", f"{alpha} outside (0, 1]")
    Ts = get("signal", "norm_time")
    if Ts == "auto":
        Ts = T0 / (2.0 * math.pi)
    signal = SignalPlan(
        bandwidth_B=get("signal", "bandwidth"),
        n_subcarriers_N=get("signal", "n_subcarriers"),
        compression_alpha=alpha,
        qam_order=get("signal", "qam_order"),
        burst_T0=T0,
        block_T1=T1,
        guard_TGI=T1 - T0,
        norm_time_Ts=Ts,
        amplitude_A=1.0,
        pdc_enabled=get("signal", "pdc"),
    )
    try:
        fiber = FiberPlan(
            span_length=get("fiber", "span_length"),
            n_spans=get("fiber", "n_spans"),
            loss_alpha=get("fiber", "loss"),
            dispersion_D=get("fiber", "dispersion"),
            gamma_nl=get("fiber", "gamma"),
            amp_noise_figure=get("fiber", "noise_figure"),
            obpf_bandwidth=get("fiber", "obpf_bandwidth"),
            wavelength_ref=get("fiber", "wavelength"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="fiber.wavelength") from exc
    for plan, sec in ((fiber, "fiber"), (signal, "signal")):
        try:
            plan.validate(fiber) if sec == "signal" else plan.validate()
        except ConfigError as exc:
            key = _PLAN_KEYS.get(exc.field, exc.field)
            fail(sec, key, exc.message)

    amps = get("sweep", "amplitudes")
    if any(a <= 0 for a in amps):
        fail("sweep", "amplitudes", "amplitudes must be positive")
    for a in get("sweep", "figure_alphas"):
        if not 0 < a <= 1:
            fail("sweep", "figure_alphas", f"{a} outside (0, 1]")
    for key in ("n_blocks", "chunk"):
        if get("sweep", key) < 1:
            fail("sweep", key, "must be at least 1")

    decoder = DecoderConfig(
        mode=get("decoder", "mode"),
        band_width=get("decoder", "band_width"),
        n_iter=get("decoder", "n_iter"),
        node_budget=get("decoder", "node_budget"),
        max_condition=get("decoder", "max_condition"),
    )
    if decoder.mode not in DECODER_MODES:
        fail("decoder", "mode", f"{decoder.mode!r} not one of {', '.join(DECODER_MODES)}")
    if decoder.n_iter < 1:
        fail("decoder", "n_iter", "must be at least 1")
    if decoder.band_width < 0:
        fail("decoder", "band_width", "must be non-negative")
    if decoder.node_budget < 1:
        fail("decoder", "node_budget", "must be at least 1")

    sampling = SamplingConfig(
        **{k: get("sampling", k) for k in _SCHEMA["sampling"]}
    )
    if sampling.samples_per_block < 2:
        fail("sampling", "samples_per_block", "must be at least 2")
    if sampling.window_factor < 1:
        fail("sampling", "window_factor", "window must cover at least one block")
    rate = sampling.samples_per_block / T1
    if rate < sampling.oversampling_headroom * signal.bandwidth_B:
        fail(
            "sampling",
            "samples_per_block",
            f"sample rate {rate:.4g} Hz is below {sampling.oversampling_headroom:g} x bandwidth",
        )
    if not 0 < sampling.taper_pass < sampling.taper_stop:
        fail("sampling", "taper_stop", "need 0 < taper_pass < taper_stop")
    if sampling.dz_max <= 0 or sampling.max_phase <= 0 or sampling.inft_tol <= 0:
        fail("sampling", "dz_max", "step and tolerance settings must be positive")
    if not 0 < sampling.rx_window <= sampling.window_factor:
        fail("sampling", "rx_window", "receiver window must be positive and fit the simulation window")
    if sampling.rx_gate and not -1 < sampling.rx_gate_margin <= sampling.window_factor:
        fail("sampling", "rx_gate_margin", "gate must be wider than zero and fit the window")

    cfg = ExperimentConfig(
        signal=signal,
        fiber=fiber,
        sweep=tuple(sorted(amps)),
        n_blocks=get("sweep", "n_blocks"),
        seed=get("sweep", "seed"),
        chunk=get("sweep", "chunk"),
        figure_alphas=tuple(get("sweep", "figure_alphas")),
        sampling=sampling,
        decoder=decoder,
        obpf_every_span=get("fiber", "obpf_every_span"),
    )
    n_bits = cfg.n_blocks * signal.n_subcarriers_N * signal.bits_per_symbol
    if n_bits * 1e-3 < 100:
        warnings.warn(
            f"{n_bits} bits per power point give fewer than 100 expected errors at BER 1e-3",
            stacklevel=2,
        )
    return cfg


# plan field names reported by SignalPlan/FiberPlan.validate -> config keys
_PLAN_KEYS = {
    "burst_T0": "burst",
    "block_T1": "block",
    "norm_time_Ts": "norm_time",
    "guard": "block",
}


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


PAPER_CONFIG = """\
[signal]
bandwidth = 32 GHz
n_subcarriers = 20
alpha = 0.8
burst = 0.5 ns
block = 2.5 ns
qam_order = 16

[fiber]
span_length = 80 km
n_spans = 12
loss = 0.2 dB/km
dispersion = 16.8 ps/nm/km
gamma = 1.3 /W/km
noise_figure = 5 dB
obpf_bandwidth = 40 GHz
"""


def default_config():
    return parse_config(PAPER_CONFIG)
