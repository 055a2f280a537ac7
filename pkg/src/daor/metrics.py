"""Received covariance, achievable rate, DAOR and Bartlett beampattern."""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, ChannelRealization, steering_matrix
from .errors import AngleOutOfRange, DegenerateAngles, DimensionMismatch, InvalidConfig
from .numerics import logdet_hpd

DEFAULT_GRID_STEP = 0.25
DB_FLOOR = -80.0
MIN_ANGLE_SEPARATION = 0.5


@dataclass(frozen=True)
class Precoder:
    """Transmit matrix ``W`` (N_T x N_S) with ``trace(W W^H) = P``."""
    matrix_w: np.ndarray
    power_budget_p: float
    effective_streams: int = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.matrix_w, dtype=complex)
        if w.ndim != 2:
            raise DimensionMismatch(f"W must be a matrix, got shape {w.shape}")
        if not self.power_budget_p > 0:
            raise InvalidConfig("power budget must be positive")
        power = float(np.sum(np.abs(w) ** 2))
        if abs(power - self.power_budget_p) > 1e-8 * self.power_budget_p:
            raise InvalidConfig(
                f"trace(W W^H) = {power:.12g} differs from the budget {self.power_budget_p:.12g}")
        col = np.sum(np.abs(w) ** 2, axis=0)
        object.__setattr__(self, "matrix_w", w)
        object.__setattr__(self, "effective_streams", int(np.sum(col > 1e-12 * self.power_budget_p)))

    @property
    def n_streams(self):
        return self.matrix_w.shape[1]


@dataclass(frozen=True)
class LinkMetrics:
    rate_bits: float
    daor_gamma: float
    covariance_r: np.ndarray


class Verdict(str, enum.Enum):
    TRUE_DOMINANT = "TrueDominant"
    FAKE_DOMINANT = "FakeDominant"
    AMBIGUOUS = "Ambiguous"


@dataclass(frozen=True)
class Beampattern:
    grid: np.ndarray
    power_db: np.ndarray
    peak_angle: float

    def at(self, theta):
        """Pattern value (dB) at the grid point closest to ``theta``."""
        return float(self.power_db[np.argmin(np.abs(self.grid - theta))])


def _matrix(h):
    if isinstance(h, ChannelRealization):
        return h.matrix_h
    return np.atleast_2d(np.asarray(h, dtype=complex))


def _precoder(w):
    if isinstance(w, Precoder):
        return w.matrix_w
    w = np.asarray(w, dtype=complex)
    return w.reshape(-1, 1) if w.ndim == 1 else w


def _rx_geometry(h, rx_geometry):
    if rx_geometry is not None:
        return rx_geometry
    if isinstance(h, ChannelRealization):
        return h.config.rx_geometry
    return ArrayGeometry(_matrix(h).shape[0])


def _check_n0(n0):
    if not n0 > 0:
        raise InvalidConfig(f"noise power must be positive, got {n0}")


def covariance(h, w, n0):
    """``R = H W W^H H^H + N0 I``."""
    _check_n0(n0)
    hm, wm = _matrix(h), _precoder(w)
    if hm.shape[1] != wm.shape[0]:
        raise DimensionMismatch(f"H {hm.shape} and W {wm.shape} are incompatible")
    hw = hm @ wm
    r = hw @ hw.conj().T + n0 * np.eye(hm.shape[0])
    return 0.5 * (r + r.conj().T)


def achievable_rate(h, w, n0):
    """``log2 det(I + H W W^H H^H / N0)`` in bits/s/Hz."""
    r = covariance(h, w, n0)
    return max(0.0, float(logdet_hpd(r / n0)) / math.log(2.0))


def daor(h, w, n0, phi, phi_hat, rx_geometry=None, min_separation=MIN_ANGLE_SEPARATION):
    """Power toward ``phi_hat`` over power toward ``phi`` seen by the receive array.

    Set ``min_separation=0`` to allow coincident angles.
    """
    if abs(phi_hat - phi) < min_separation:
        raise DegenerateAngles(f"|phi_hat - phi| = {abs(phi_hat - phi)} < {min_separation} degrees")
    r = covariance(h, w, n0)
    a = steering_matrix([phi_hat, phi], _rx_geometry(h, rx_geometry))
    quad = np.sum(a.conj() * (r @ a), axis=0).real
    return float(quad[0] / quad[1])


def link_metrics(h, w, n0, phi, phi_hat, rx_geometry=None):
    return LinkMetrics(
        rate_bits=achievable_rate(h, w, n0),
        daor_gamma=daor(h, w, n0, phi, phi_hat, rx_geometry),
        covariance_r=covariance(h, w, n0),
    )


def angle_grid(grid_step=DEFAULT_GRID_STEP):
    if not 0 < grid_step <= 5:
        raise InvalidConfig(f"grid_step must lie in (0, 5], got {grid_step}")
    n = int(math.floor(180.0 / grid_step + 1e-9))
    return grid_step * np.arange(n + 1)


def beampattern(r, rx_geometry: ArrayGeometry, grid_step=DEFAULT_GRID_STEP) -> Beampattern:
    """Bartlett spectrum ``a(theta)^H R a(theta)`` on [0, 180] degrees, peak at 0 dB."""
    grid = angle_grid(grid_step)
    r = np.asarray(r, dtype=complex)
    if r.shape != (rx_geometry.n_elements,) * 2:
        raise DimensionMismatch(f"R {r.shape} does not match a {rx_geometry.n_elements}-element array")
    a = steering_matrix(grid, rx_geometry)
    power = np.sum(a.conj() * (r @ a), axis=0).real
    peak = int(np.argmax(power))
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(np.maximum(power, 0.0) / power[peak])
    power_db = np.maximum(power_db, DB_FLOOR)
    return Beampattern(grid=grid, power_db=power_db, peak_angle=float(grid[peak]))


def dominant_direction(b: Beampattern, phi, phi_hat, window=1.0, margin_db=0.1) -> Verdict:
    """Compare the pattern maxima within ``window`` degrees of each angle."""
    step = b.grid[1] - b.grid[0] if len(b.grid) > 1 else 0.0
    for ang in (phi, phi_hat):
        if ang < b.grid[0] - step or ang > b.grid[-1] + step:
            raise AngleOutOfRange(f"angle {ang} lies outside the pattern grid")
    window = max(window, step) + 1e-9
    true_pk = b.power_db[np.abs(b.grid - phi) <= window].max()
    fake_pk = b.power_db[np.abs(b.grid - phi_hat) <= window].max()
    if fake_pk - true_pk > margin_db:
        return Verdict.FAKE_DOMINANT
    if true_pk - fake_pk > margin_db:
        return Verdict.TRUE_DOMINANT
    return Verdict.AMBIGUOUS
