"""Physical constants, unit conversions and link-budget arithmetic.

Normalized units used throughout the package follow the dimensionless
focusing NLSE

    dq/dz = j d^2q/dt^2 + 2j |q|^2 q,

obtained from the physical model

    dA/dZ = -j (beta2/2) d^2A/dT^2 + j gamma_eff |A|^2 A

with T = Ts t, Z = Z0 z, A = sqrt(P0) q, Z0 = 2 Ts^2/|beta2| and
P0 = |beta2| / (gamma_eff Ts^2).  Only anomalous dispersion (beta2 < 0)
maps onto the focusing form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy import constants

from .errors import ConfigError

SPEED_OF_LIGHT = constants.c
PLANCK = constants.h

DB_PER_NEPER_POWER = 10.0 / math.log(10.0)


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


def watt_to_dbm(p_w):
    return 10.0 * math.log10(p_w / 1e-3)


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def loss_db_per_km_to_nepers_per_m(loss_db_km):
    """Power attenuation coefficient in 1/m from a dB/km figure."""
    return loss_db_km / DB_PER_NEPER_POWER / 1e3


def dispersion_to_beta2(D, wavelength=1550e-9):
    """Group-velocity dispersion beta2 in s^2/m.

    Parameters
    ----------
    D : float
        Dispersion parameter in ps/(nm km).
    wavelength : float
        Reference wavelength in m.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    d_si = D * 1e-6  # ps/(nm km) -> s/m^2
    return -d_si * wavelength**2 / (2.0 * math.pi * SPEED_OF_LIGHT)


def guard_interval(B, beta2, L, pdc=False):
    """Dispersive guard interval 2*pi*B*|beta2|*L in seconds, halved under PDC."""
    if B <= 0:
        raise ValueError("bandwidth must be positive")
    if L < 0:
        raise ValueError("distance must be non-negative")
    t_gi = 2.0 * math.pi * B * abs(beta2) * L
    return 0.5 * t_gi if pdc else t_gi


def normalized_se(N, alpha, B, beta2, L, pdc=True):
    """Upper bound on the normalized spectral efficiency (symbol/s/Hz).

    The burst is sized so that T0 = N*alpha/B and the guard interval comes
    from :func:`guard_interval`.  With ``alpha == 1`` this is the classical
    NFDM bound; for ``alpha < 1`` it is 1/alpha times the NFDM bound at the
    same burst duration.  The no-PDC FTN case uses the full guard interval.
    """
    if N < 1:
        raise ValueError("need at least one subcarrier")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    c = 1.0 if pdc else 2.0
    return 1.0 / (alpha + c * math.pi * B**2 * abs(beta2) * L * alpha / N)


def layout_se(N, T1, B):
    """Spectral efficiency of a concrete burst layout, N / (T1 * B)."""
    return N / (T1 * B)


def net_rate(N, qam_order, T1):
    """Net bit rate in bit/s for N subcarriers of ``qam_order``-QAM every T1 seconds."""
    bits = math.log2(qam_order)
    if bits != int(bits) or qam_order < 2:
        raise ValueError(f"QAM order {qam_order} is not a power of two")
    return N * bits / T1


@dataclass(frozen=True)
class SignalPlan:
    """Burst layout of one NFDM / FTN-NFDM configuration (SI units)."""

    bandwidth_B: float
    n_subcarriers_N: int
    compression_alpha: float
    qam_order: int
    burst_T0: float
    block_T1: float
    guard_TGI: float
    norm_time_Ts: float
    amplitude_A: float = 0.3
    pdc_enabled: bool = True

    @property
    def bits_per_symbol(self):
        return int(round(math.log2(self.qam_order)))

    @property
    def se(self):
        return layout_se(self.n_subcarriers_N, self.block_T1, self.bandwidth_B)

    @property
    def net_rate(self):
        return net_rate(self.n_subcarriers_N, self.qam_order, self.block_T1)

    def with_amplitude(self, A):
        return replace(self, amplitude_A=A)

    def validate(self, fiber=None, guard_slack=0.1):
        """Raise :class:`ConfigError` if the layout is inconsistent.

        ``guard_slack`` is the relative shortfall of the guard interval that
        is tolerated against the dispersive estimate.
        """
        if self.bandwidth_B <= 0:
            raise ConfigError("must be positive", field="bandwidth")
        if self.n_subcarriers_N < 1:
            raise ConfigError("must be at least 1", field="n_subcarriers")
        if not 0 < self.compression_alpha <= 1:
            raise ConfigError(
                f"{self.compression_alpha} outside (0, 1]", field="alpha"
            )
        bits = math.log2(self.qam_order)
        if self.qam_order < 2 or bits != int(bits) or (int(bits) % 2 and self.qam_order != 2):
            raise ConfigError(
                f"{self.qam_order} is not a supported square QAM order", field="qam_order"
            )
        if self.burst_T0 <= 0:
            raise ConfigError("must be positive", field="burst_T0")
        if self.norm_time_Ts <= 0:
            raise ConfigError("must be positive", field="norm_time_Ts")
        if self.amplitude_A <= 0:
            raise ConfigError("must be positive", field="amplitude")
        packed = self.n_subcarriers_N * self.compression_alpha
        if abs(packed - self.burst_T0 * self.bandwidth_B) > 0.5 * self.compression_alpha:
            raise ConfigError(
                f"N*alpha = {packed:g} does not match T0*B = "
                f"{self.burst_T0 * self.bandwidth_B:g}",
                field="n_subcarriers",
            )
        if not math.isclose(self.block_T1, self.burst_T0 + self.guard_TGI, rel_tol=1e-9):
            raise ConfigError("T1 must equal T0 + TGI", field="block_T1")
        if fiber is not None:
            need = guard_interval(
                self.bandwidth_B, fiber.beta2, fiber.total_length_m, self.pdc_enabled
            )
            if self.guard_TGI < need * (1.0 - guard_slack):
                raise ConfigError(
                    f"guard interval {self.guard_TGI:.4g} s shorter than the "
                    f"dispersive estimate {need:.4g} s",
                    field="guard",
                )


@dataclass(frozen=True)
class FiberPlan:
    """Span-wise fiber link.  Lengths in km, loss in dB/km, D in ps/(nm km)."""

    span_length: float = 80.0
    n_spans: int = 12
    loss_alpha: float = 0.2
    dispersion_D: float = 16.8
    gamma_nl: float = 1.3
    amp_noise_figure: float = 5.0
    obpf_bandwidth: float = 40e9
    wavelength_ref: float = 1550e-9
    beta2: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "beta2", dispersion_to_beta2(self.dispersion_D, self.wavelength_ref)
        )

    @property
    def total_length(self):
        """Total length in km."""
        return self.span_length * self.n_spans

    @property
    def total_length_m(self):
        return self.total_length * 1e3

    @property
    def span_loss_db(self):
        return self.loss_alpha * self.span_length

    @property
    def carrier_frequency(self):
        return SPEED_OF_LIGHT / self.wavelength_ref

    def path_average_factor(self):
        """(1 - exp(-a L)) / (a L) for one span; 1 for a lossless span."""
        aL = loss_db_per_km_to_nepers_per_m(self.loss_alpha) * self.span_length * 1e3
        if aL == 0:
            return 1.0
        return -math.expm1(-aL) / aL

    def validate(self):
        if self.span_length <= 0 and self.n_spans > 0:
            raise ConfigError("must be positive", field="span_length")
        if self.n_spans < 0:
            raise ConfigError("must be non-negative", field="n_spans")
        if self.loss_alpha < 0:
            raise ConfigError("must be non-negative", field="loss")
        if self.gamma_nl < 0:
            raise ConfigError("must be non-negative", field="gamma")
        if self.obpf_bandwidth <= 0:
            raise ConfigError("must be positive", field="obpf_bandwidth")


@dataclass(frozen=True)
class NormalizationMap:
    """Scales between physical SI quantities and normalized NLSE units."""

    time_scale_Ts: float
    distance_scale_Z0: float
    power_scale_P0: float
    gamma_effective: float  # 1/(W km)

    def time_to_norm(self, t):
        return t / self.time_scale_Ts

    def time_to_phys(self, t):
        return t * self.time_scale_Ts

    def distance_to_norm(self, z_m):
        return z_m / self.distance_scale_Z0

    def distance_to_phys(self, z):
        return z * self.distance_scale_Z0

    def field_to_norm(self, a):
        return a / math.sqrt(self.power_scale_P0)

    def field_to_phys(self, q):
        return q * math.sqrt(self.power_scale_P0)


def build_normalization(signal, fiber):
    """Normalization for the path-averaged lossless equivalent of ``fiber``."""
    Ts = signal.norm_time_Ts
    if not Ts:
        raise ConfigError("normalization time must be non-zero", field="norm_time_Ts")
    if fiber.beta2 >= 0:
        raise ConfigError(
            "anomalous dispersion (D > 0) is required for the focusing NLSE",
            field="dispersion",
        )
    gamma_eff = fiber.gamma_nl * fiber.path_average_factor()
    if gamma_eff <= 0:
        raise ConfigError("nonlinearity must be positive", field="gamma")
    b2 = abs(fiber.beta2)
    Z0 = 2.0 * Ts**2 / b2
    P0 = b2 / (gamma_eff * 1e-3 * Ts**2)
    return NormalizationMap(Ts, Z0, P0, gamma_eff)


def paper_signal_plan(n_subcarriers=16, alpha=1.0, amplitude=0.3, pdc=True):
    """The 32 GHz, 2.5 ns block, 2 ns guard layout with T0 = 0.5 ns."""
    T0 = 0.5e-9
    return SignalPlan(
        bandwidth_B=32e9,
        n_subcarriers_N=n_subcarriers,
        compression_alpha=alpha,
        qam_order=16,
        burst_T0=T0,
        block_T1=2.5e-9,
        guard_TGI=2.0e-9,
        norm_time_Ts=T0 / (2.0 * math.pi),
        amplitude_A=amplitude,
        pdc_enabled=pdc,
    )
