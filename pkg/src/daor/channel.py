"""ULA steering vectors and seeded Rician mmWave channel draws.

Random numbers
--------------
Every draw comes from a Philox-4x64-10 counter-based generator keyed with
the 64-bit seed (``numpy.random.Philox(key=seed)``, counter starting at 0).
Raw 64-bit words are turned into doubles on [0, 1) as ``(w >> 11) * 2**-53``
and Gaussians are produced with the Box-Muller transform, so the stream is
fixed by the algorithm and not by numpy's sampler implementations.

For a channel with ``L`` paths the words are consumed in this order:

1. ``2L`` uniforms ``(u1_l, u2_l)`` interleaved; ``alpha_l = (z0 + j z1)/sqrt(2)``
   with ``r = sqrt(-2 ln(1 - u1_l))``, ``z0 = r cos(2 pi u2_l)``, ``z1 = r sin(2 pi u2_l)``.
2. ``L`` uniforms giving the departure angles ``180 u`` degrees.
3. ``L`` uniforms giving the arrival angles ``180 u`` degrees.

Per-trial seeds are derived with :func:`mix_seed`, a SplitMix64 step.
"""

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import AngleOutOfRange, InvalidConfig, InvalidGeometry

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
ANGLE_TOL = 1e-9


@dataclass(frozen=True)
class ArrayGeometry:
    n_elements: int
    spacing_d: float = 0.5
    wavelength_lambda: float = 1.0

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise InvalidGeometry(f"n_elements must be a positive integer, got {self.n_elements}")
        if not (self.spacing_d > 0 and math.isfinite(self.spacing_d)):
            raise InvalidGeometry(f"spacing_d must be positive, got {self.spacing_d}")
        if not (self.wavelength_lambda > 0 and math.isfinite(self.wavelength_lambda)):
            raise InvalidGeometry(f"wavelength_lambda must be positive, got {self.wavelength_lambda}")

    @property
    def spacing_ratio(self):
        return self.spacing_d / self.wavelength_lambda


@dataclass(frozen=True)
class ChannelConfig:
    tx_geometry: ArrayGeometry
    rx_geometry: ArrayGeometry
    true_angle_phi: float = 45.0
    rician_k_linear: float = 1.0
    n_paths_L: int = 20

    def __post_init__(self):
        if not 0.0 < self.true_angle_phi < 180.0:
            raise InvalidConfig(f"true_angle_phi must lie in (0, 180), got {self.true_angle_phi}")
        if math.isnan(self.rician_k_linear) or self.rician_k_linear < 0:
            raise InvalidConfig(f"rician_k_linear must be >= 0, got {self.rician_k_linear}")
        if int(self.n_paths_L) != self.n_paths_L or self.n_paths_L < 1:
            raise InvalidConfig(f"n_paths_L must be a positive integer, got {self.n_paths_L}")

    @property
    def n_t(self):
        return self.tx_geometry.n_elements

    @property
    def n_r(self):
        return self.rx_geometry.n_elements


@dataclass(frozen=True)
class NlosPath:
    gain_alpha: complex
    dod_omega_t: float
    doa_omega_r: float


@dataclass(frozen=True)
class ChannelRealization:
    matrix_h: np.ndarray
    config: ChannelConfig
    paths: Tuple[NlosPath, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        if self.matrix_h.shape != (self.config.n_r, self.config.n_t):
            raise InvalidConfig(
                f"channel shape {self.matrix_h.shape} does not match "
                f"({self.config.n_r}, {self.config.n_t})")


def _check_angle(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < -ANGLE_TOL) or np.any(theta > 180.0 + ANGLE_TOL):
        raise AngleOutOfRange(f"angles must lie in [0, 180] degrees, got {theta}")
    return theta


def steering_matrix(thetas, geometry: ArrayGeometry):
    """Stack of normalized steering vectors, one column per angle (degrees)."""
    thetas = _check_angle(np.atleast_1d(thetas))
    n = geometry.n_elements
    m = np.arange(n)[:, None]
    phase = -2.0 * np.pi * geometry.spacing_ratio * m * np.cos(np.deg2rad(thetas))[None, :]
    return np.exp(1j * phase) / np.sqrt(n)


def steering_vector(theta, geometry: ArrayGeometry):
    """Normalized ULA response ``a(theta)``; ``theta`` is measured from the array axis."""
    if np.ndim(theta) != 0:
        raise AngleOutOfRange("steering_vector takes a scalar angle; use steering_matrix for grids")
    return steering_matrix([theta], geometry)[:, 0]


def make_los(config: ChannelConfig):
    a_r = steering_vector(config.true_angle_phi, config.rx_geometry)
    a_t = steering_vector(config.true_angle_phi, config.tx_geometry)
    return np.sqrt(config.n_t * config.n_r) * np.outer(a_r, a_t.conj())


def make_nlos(paths, config: ChannelConfig):
    if len(paths) == 0:
        raise InvalidConfig("make_nlos needs at least one path")
    alpha = np.array([p.gain_alpha for p in paths], dtype=complex)
    a_r = steering_matrix([p.doa_omega_r for p in paths], config.rx_geometry)
    a_t = steering_matrix([p.dod_omega_t for p in paths], config.tx_geometry)
    scale = np.sqrt(config.n_t * config.n_r / len(paths))
    return scale * (a_r * alpha[None, :]) @ a_t.conj().T


def splitmix64(x):
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(master_seed, trial_index):
    """Per-trial seed: ``splitmix64(master + trial_index * golden_gamma mod 2**64)``."""
    if master_seed < 0 or trial_index < 0:
        raise InvalidConfig("seeds and trial indices must be non-negative")
    return splitmix64((int(master_seed) + int(trial_index) * GOLDEN_GAMMA) & MASK64)


class UniformStream:
    """Doubles on [0, 1) drawn from Philox-4x64-10 keyed by a 64-bit seed."""

    def __init__(self, seed):
        if not 0 <= int(seed) <= MASK64:
            raise InvalidConfig(f"seed must be a 64-bit unsigned integer, got {seed}")
        self._bits = np.random.Philox(key=int(seed))

    def uniform(self, n):
        raw = self._bits.random_raw(n)
        return (raw >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def complex_normal(self, n):
        """``n`` draws of CN(0, 1): real and imaginary parts each N(0, 1/2)."""
        u = self.uniform(2 * n).reshape(n, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        ang = 2.0 * np.pi * u[:, 1]
        return (r * np.cos(ang) + 1j * r * np.sin(ang)) / np.sqrt(2.0)


def draw_paths(config: ChannelConfig, seed) -> List[NlosPath]:
    stream = UniformStream(seed)
    n = config.n_paths_L
    alpha = stream.complex_normal(n)
    omega_t = 180.0 * stream.uniform(n)
    omega_r = 180.0 * stream.uniform(n)
    return [NlosPath(complex(a), float(t), float(r)) for a, t, r in zip(alpha, omega_t, omega_r)]


def combine(h_los, h_nlos, k_linear):
    """Rician mixture of a LOS and an NLOS matrix for a linear K-factor."""
    if math.isinf(k_linear):
        return np.array(h_los, dtype=complex)
    if k_linear == 0:
        return np.array(h_nlos, dtype=complex)
    return np.sqrt(k_linear / (k_linear + 1.0)) * h_los + np.sqrt(1.0 / (k_linear + 1.0)) * h_nlos


def sample_channel(config: ChannelConfig, seed) -> ChannelRealization:
    """Draw one channel ``H`` (N_R x N_T); identical ``(config, seed)`` give identical bits."""
    paths = draw_paths(config, seed)
    h = combine(make_los(config), make_nlos(paths, config), config.rician_k_linear)
    return ChannelRealization(matrix_h=h, config=config, paths=tuple(paths), seed=int(seed))


def db_to_linear(db):
    return 10.0 ** (db / 10.0)
