"""Containers passed between the transmitter, channel and receiver stages."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid: ``n`` samples spaced ``dt`` starting at ``t0``.

    ``dt`` and ``t0`` are in seconds; ``time_scale`` converts them to the
    normalized time used by the NFT (t_norm = t / time_scale).
    """

    n: int
    dt: float
    t0: float
    time_scale: float = 1.0

    @classmethod
    def centered(cls, n, dt, center=0.0, time_scale=1.0):
        return cls(n, dt, center - (n // 2) * dt, time_scale)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def duration(self):
        return self.n * self.dt

    @property
    def center(self):
        return self.t0 + (self.n // 2) * self.dt

    @property
    def h(self):
        """Normalized sample spacing."""
        return self.dt / self.time_scale

    def lambda_grid(self):
        """DFT-compatible spectral grid, ascending, spacing pi/(n h)."""
        return dft_lambda_grid(self.n, self.h)


def dft_lambda_grid(n, h):
    """Spectral points j*pi/(n*h) for j = -n/2 .. n/2-1 (``n`` even)."""
    if n % 2:
        raise ValueError("grid size must be even")
    return np.arange(-n // 2, n // 2) * (math.pi / (n * h))


@dataclass(frozen=True)
class TimeSignal:
    """Complex baseband field on a uniform grid.

    The physical field in sqrt(W) is ``samples * sqrt(power_scale)``.
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0
    power_scale: float = 1.0
    time_scale: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    @classmethod
    def on_grid(cls, samples, grid, power_scale=1.0):
        return cls(samples, grid.dt, grid.t0, power_scale, grid.time_scale)

    @property
    def n(self):
        return self.samples.size

    @property
    def grid(self):
        return TimeGrid(self.n, self.dt, self.t0, self.time_scale)

    @property
    def times(self):
        return self.grid.times

    @property
    def window_length(self):
        return self.n * self.dt

    def energy(self):
        """Physical energy in J (or normalized energy for unit scales)."""
        return self.power_scale * float(np.sum(np.abs(self.samples) ** 2)) * self.dt

    def average_power(self, period=None):
        """Energy divided by ``period`` (default: the window length)."""
        return self.energy() / (period if period is not None else self.window_length)

    def to_units(self, power_scale, time_scale=None):
        """Same field expressed with different amplitude/time scales."""
        factor = math.sqrt(self.power_scale / power_scale)
        return replace(
            self,
            samples=self.samples * factor,
            power_scale=power_scale,
            time_scale=self.time_scale if time_scale is None else time_scale,
        )

    def physical(self):
        return self.to_units(1.0, 1.0)

    def normalized(self, nmap):
        return self.to_units(nmap.power_scale_P0, nmap.time_scale_Ts)

    def with_samples(self, samples):
        return replace(self, samples=samples)


@dataclass(frozen=True)
class NfdSpectrum:
    """Continuous nonlinear spectrum sampled on a uniform lambda grid."""

    lambda_grid: np.ndarray
    b_values: np.ndarray
    a_values: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambda_grid, dtype=float)
        b = np.asarray(self.b_values, dtype=complex)
        if lam.shape != b.shape or lam.ndim != 1:
            raise ValueError("lambda grid and b values must be matching 1-D arrays")
        object.__setattr__(self, "lambda_grid", lam)
        object.__setattr__(self, "b_values", b)
        if self.a_values is not None:
            a = np.asarray(self.a_values, dtype=complex)
            if a.shape != b.shape:
                raise ValueError("a values must match the grid")
            object.__setattr__(self, "a_values", a)

    @property
    def spacing(self):
        return float(self.lambda_grid[1] - self.lambda_grid[0])

    def max_abs_b(self):
        return float(np.max(np.abs(self.b_values))) if self.b_values.size else 0.0

    def with_b(self, b_values):
        return NfdSpectrum(self.lambda_grid, b_values, None)


@dataclass(frozen=True)
class ScatteringData:
    """Scattering coefficients a(lambda), b(lambda) on the real axis."""

    lambda_grid: np.ndarray
    a_values: np.ndarray
    b_values: np.ndarray

    def unimodularity_error(self):
        return float(
            np.max(np.abs(np.abs(self.a_values) ** 2 + np.abs(self.b_values) ** 2 - 1.0))
        )

    def spectrum(self):
        return NfdSpectrum(self.lambda_grid, self.b_values, self.a_values)
