"""MIMO channel realizations, geometric path model, AWGN and the COST207 Doppler PSD."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ArrayGeometry:
    n_t: int = 2
    n_r: int = 1
    length_t: float = 1.0  # array lengths normalized by the carrier wavelength
    length_r: float = 0.5
    wavelength: float = 0.125

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ConfigError("antenna counts must be >= 1", "geometry")
        if self.length_t <= 0 or self.length_r <= 0 or self.wavelength <= 0:
            raise ConfigError("array lengths and wavelength must be positive", "geometry")

    @property
    def spacing_t(self):
        return self.length_t / self.n_t

    @property
    def spacing_r(self):
        return self.length_r / self.n_r


@dataclass(frozen=True)
class PathSpec:
    attenuation: complex = 1.0
    omega_t: float = 0.0  # cos of the departure angle
    omega_r: float = 0.0  # cos of the arrival angle
    distance: float = 0.0  # metres, antenna 1 to antenna 1 along this path

    @classmethod
    def from_angles(cls, attenuation, phi_t, phi_r, distance):
        return cls(attenuation, float(np.cos(phi_t)), float(np.cos(phi_r)), distance)


@dataclass(frozen=True)
class DopplerParams:
    centers: tuple = (-0.8, 0.4)  # Hz
    gains: tuple = (1.0, 0.1)
    sigmas: tuple = (0.05, 0.1)  # Hz

    def __post_init__(self):
        if not len(self.centers) == len(self.gains) == len(self.sigmas):
            raise ConfigError("Doppler components need matching centers/gains/sigmas", "doppler")
        if any(a < 0 for a in self.gains) or sum(self.gains) <= 0:
            raise ConfigError("power gains must be >= 0 with a positive sum", "doppler.gains")
        if any(not s > 0 for s in self.sigmas):
            raise ConfigError("standard deviations must be positive", "doppler.sigmas")


def rayleigh_realization(n_rx, n_tx, rng, size=()):
    """iid CN(0, 1) channel matrices of shape ``size + (n_rx, n_tx)``."""
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    shape = shape + (int(n_rx), int(n_tx))
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def spatial_signature(omega, n, spacing):
    """Unit-norm uniform-linear-array response for directional cosine ``omega``.

    The same expression serves the transmit and the receive side; only the
    element count and normalized spacing differ.
    """
    if abs(omega) > 1:
        raise ValueError(f"directional cosine must lie in [-1, 1], got {omega}")
    k = np.arange(int(n))
    return np.exp(-2j * np.pi * k * spacing * omega) / np.sqrt(n)


def geometric_channel(paths, geom):
    """Sum over paths of ``a_b * e_r(omega_r) e_t(omega_t)^H``, shape ``(n_r, n_t)``."""
    paths = list(paths)
    if not paths:
        raise ValueError("at least one path is required")
    H = np.zeros((geom.n_r, geom.n_t), dtype=complex)
    for p in paths:
        ab = p.attenuation * np.sqrt(geom.n_t * geom.n_r) * np.exp(
            -2j * np.pi * p.distance / geom.wavelength
        )
        er = spatial_signature(p.omega_r, geom.n_r, geom.spacing_r)
        et = spatial_signature(p.omega_t, geom.n_t, geom.spacing_t)
        H += ab * np.outer(er, et.conj())
    return H


def awgn(signal, variance, rng):
    """Add circular complex Gaussian noise of total variance ``variance``."""
    if not variance > 0:
        raise ValueError("noise variance must be positive")
    x = np.asarray(signal, dtype=complex)
    return x + np.sqrt(variance / 2.0) * (
        rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    )


def doppler_psd(f, p):
    """Normalized Gaussian-mixture Doppler power spectral density."""
    f = np.asarray(f, dtype=float)
    total = float(sum(p.gains))
    out = np.zeros_like(f)
    for fc, a, s in zip(p.centers, p.gains, p.sigmas):
        out += a / np.sqrt(2.0 * np.pi * s * s) * np.exp(-((f - fc) ** 2) / (2.0 * s * s))
    out /= total
    return float(out) if out.ndim == 0 else out
