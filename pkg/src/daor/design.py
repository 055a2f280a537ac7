"""Privacy-constrained transmit beamformer design.

The DAOR of a precoder is the generalized Rayleigh quotient
``tr(W^H A_fake W) / tr(W^H A_true W)``, so its attainable range is the
span of the generalized eigenvalues of ``(A_fake, A_true)``. Depending on
where the threshold falls, a design is infeasible, the closed-form
boundary precoder, plain water-filling, or (interior thresholds) a search
over eigenmode subsets of ``A_fake - gamma_th A_true`` with an optimal
power split per subset.
"""

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from . import powalloc
from .channel import ChannelRealization, steering_vector
from .errors import DegenerateAngles, InfeasiblePrivacy, InvalidConfig, NoFeasibleSubset
from .metrics import MIN_ANGLE_SEPARATION, Precoder, achievable_rate, daor
from .numerics import generalized_eig, hermitian_eig

log = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-6
ZERO_EIGEN_RTOL = powalloc.ZERO_EIGEN_RTOL


class DesignCase(str, enum.Enum):
    INFEASIBLE = "Infeasible"
    BOUNDARY_MAX = "BoundaryMax"
    UNCONSTRAINED = "Unconstrained"
    INTERIOR = "Interior"


class Strategy(str, enum.Enum):
    OS = "OS"
    SS = "SS"
    WATERFILL = "WaterFill"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class DesignConfig:
    gamma_th: float
    power_p: float = 1.0
    noise_n0: float = 0.1
    n_streams: int = 4
    phi: float = 45.0
    phi_hat: float = 75.0
    boundary_tol_eps: float = 1e-6
    ss_shortlist_q: int = 10

    def __post_init__(self):
        if not (self.gamma_th >= 0 and math.isfinite(self.gamma_th)):
            raise InvalidConfig(f"gamma_th must be a finite value >= 0, got {self.gamma_th}")
        if not self.power_p > 0:
            raise InvalidConfig(f"power_p must be positive, got {self.power_p}")
        if not self.noise_n0 > 0:
            raise InvalidConfig(f"noise_n0 must be positive, got {self.noise_n0}")
        if int(self.n_streams) != self.n_streams or self.n_streams < 1:
            raise InvalidConfig(f"n_streams must be a positive integer, got {self.n_streams}")
        if int(self.ss_shortlist_q) != self.ss_shortlist_q or self.ss_shortlist_q < 1:
            raise InvalidConfig(f"ss_shortlist_q must be a positive integer, got {self.ss_shortlist_q}")
        if not self.boundary_tol_eps >= 0:
            raise InvalidConfig("boundary_tol_eps must be non-negative")
        for name in ("phi", "phi_hat"):
            if not 0 <= getattr(self, name) <= 180:
                raise InvalidConfig(f"{name} must lie in [0, 180] degrees")
        if abs(self.phi - self.phi_hat) < MIN_ANGLE_SEPARATION:
            raise DegenerateAngles("phi and phi_hat must differ by at least 0.5 degrees")

    def check_dimensions(self, n_t, n_r):
        if self.n_streams > min(n_t, n_r):
            raise InvalidConfig(
                f"n_streams={self.n_streams} exceeds min(N_T, N_R) = {min(n_t, n_r)}")


@dataclass(frozen=True)
class PrivacyQuadratics:
    a_fake: np.ndarray
    a_true: np.ndarray
    lambda_min: float
    lambda_max: float
    t_min: np.ndarray
    t_max: np.ndarray


@dataclass(frozen=True)
class DesignOutcome:
    precoder: Precoder
    case_label: DesignCase
    achieved_gamma: float
    rate_bits: float
    chosen_indices: Tuple[int, ...]
    solver_calls: int
    wall_time: float
    strategy: Strategy
    gamma_th: float
    quadratics: PrivacyQuadratics = field(repr=False)

    @property
    def gamma_max(self):
        return self.quadratics.lambda_max


def _h(h):
    return h.matrix_h if isinstance(h, ChannelRealization) else np.asarray(h, dtype=complex)


def _rx(h):
    from .channel import ArrayGeometry
    if isinstance(h, ChannelRealization):
        return h.config.rx_geometry
    return ArrayGeometry(_h(h).shape[0])


def build_quadratic_forms(h, cfg: DesignConfig) -> PrivacyQuadratics:
    """``A = H^H a a^H H + (N0/P) I`` for the fake and true directions, plus their DAOR bounds."""
    hm = _h(h)
    rx = _rx(h)
    n_t = hm.shape[1]
    reg = (cfg.noise_n0 / cfg.power_p) * np.eye(n_t)

    def form(theta):
        b = steering_vector(theta, rx).conj() @ hm
        return np.outer(b.conj(), b) + reg

    a_fake, a_true = form(cfg.phi_hat), form(cfg.phi)
    gen = generalized_eig(a_fake, a_true)
    return PrivacyQuadratics(
        a_fake=a_fake,
        a_true=a_true,
        lambda_min=float(gen.eigenvalues[-1]),
        lambda_max=float(gen.eigenvalues[0]),
        t_min=gen.eigenvectors[:, -1],
        t_max=gen.eigenvectors[:, 0],
    )


def boundary_precoder(t, p, n_streams) -> Precoder:
    """Rank-one precoder ``sqrt(P) t / |t|`` padded with zero columns."""
    t = np.asarray(t, dtype=complex).ravel()
    norm = np.linalg.norm(t)
    if norm == 0:
        raise InvalidConfig("boundary precoder needs a non-zero vector")
    w = np.zeros((t.size, n_streams), dtype=complex)
    w[:, 0] = math.sqrt(p) * t / norm
    return Precoder(w, p)


def waterfill_powers(gains, total_power, noise_n0, tol=1e-10):
    """Water-filling over parallel channels with power gains ``sigma_k**2``.

    The water level is found by bisection; the returned powers sum to
    ``total_power``.
    """
    gains = np.asarray(gains, dtype=float)
    if not np.any(gains > 0):
        return np.full(gains.shape, total_power / gains.size)
    with np.errstate(divide="ignore"):
        floor = np.where(gains > 0, noise_n0 / gains, np.inf)
    lo = floor.min()
    hi = lo + total_power
    for _ in range(500):
        mu = 0.5 * (lo + hi)
        s = np.maximum(0.0, mu - floor).sum()
        if abs(s - total_power) <= tol * total_power:
            break
        if s > total_power:
            hi = mu
        else:
            lo = mu
    p = np.maximum(0.0, mu - floor)
    return p * (total_power / p.sum())


def waterfill_precoder(h, cfg: DesignConfig) -> Precoder:
    hm = _h(h)
    _, sigma, vh = np.linalg.svd(hm)
    n_s = cfg.n_streams
    gains = np.zeros(n_s)
    top = min(n_s, sigma.size)
    gains[:top] = sigma[:top] ** 2
    p = waterfill_powers(gains, cfg.power_p, cfg.noise_n0)
    w = vh.conj().T[:, :n_s] * np.sqrt(p)[None, :]
    return Precoder(w, cfg.power_p)


def classify_case(q: PrivacyQuadratics, cfg: DesignConfig) -> DesignCase:
    eps = cfg.boundary_tol_eps * max(1.0, q.lambda_max)
    if cfg.gamma_th > q.lambda_max + eps:
        return DesignCase.INFEASIBLE
    if abs(cfg.gamma_th - q.lambda_max) <= eps:
        return DesignCase.BOUNDARY_MAX
    if cfg.gamma_th <= q.lambda_min:
        return DesignCase.UNCONSTRAINED
    return DesignCase.INTERIOR


def privacy_modes(q: PrivacyQuadratics, gamma_th):
    """Eigenvectors and descending eigenvalues of ``A_fake - gamma_th A_true``.

    The matrix is a rank-two update of ``(1 - gamma_th) N0/P I``, so at
    ``gamma_th = 1`` most eigenvalues vanish; values within
    ``ZERO_EIGEN_RTOL * max|lambda|`` of zero are returned as exact zeros.
    """
    eig = hermitian_eig(q.a_fake - gamma_th * q.a_true)
    lam = eig.eigenvalues.copy()
    lam[np.abs(lam) <= ZERO_EIGEN_RTOL * np.max(np.abs(lam))] = 0.0
    return eig.eigenvectors, lam


def complexity_report(n_t, n_s, q):
    """Solver calls of the exhaustive and shortlist strategies and the saving."""
    total = math.comb(n_t, n_s)
    if not 1 <= q <= total:
        raise InvalidConfig(f"q must lie in [1, C({n_t}, {n_s}) = {total}]")
    return total, q, 1.0 - q / total


@dataclass(frozen=True)
class _ModeSearch:
    """Read-only bundle shared by the subset searches of one design call."""
    subsets: np.ndarray
    g: np.ndarray
    lambdas: np.ndarray
    u: np.ndarray

    @classmethod
    def build(cls, hm, u, lam, n_s):
        subsets = np.array(list(combinations(range(u.shape[1]), n_s)), dtype=int)
        subsets = subsets[lam[subsets].max(axis=1) >= 0]
        if len(subsets) == 0:
            raise NoFeasibleSubset("no eigenmode subset has a non-negative privacy eigenvalue")
        hu = hm @ u
        g = np.transpose(hu[:, subsets], (1, 0, 2))
        return cls(subsets=subsets, g=g, lambdas=lam[subsets], u=u)

    def precoder(self, row, powers, total_power):
        cols = self.u[:, self.subsets[row]]
        return Precoder(cols * np.sqrt(powers)[None, :], total_power)


def _best(rates, feasible, rows):
    """Row with the highest rate; exact ties go to the lexicographically smallest subset."""
    cand = np.flatnonzero(feasible)
    if cand.size == 0:
        return None
    top = rates[cand].max()
    tied = cand[rates[cand] == top]
    return int(min(tied, key=lambda i: rows[i]))


def _search_os(search: _ModeSearch, cfg):
    res = powalloc.solve_batch(search.g, search.lambdas, cfg.power_p, cfg.noise_n0)
    rows = np.arange(len(search.subsets))
    pick = _best(res.rate_bits, res.feasible, rows)
    if pick is None:
        log.warning("no certified allocation among %d subsets; using best primal-feasible one",
                    len(rows))
        pick = _best(res.rate_bits, np.ones(len(rows), bool), rows)
    return search.precoder(pick, res.powers[pick], cfg.power_p), tuple(search.subsets[pick]), len(rows)


def _search_ss(search: _ModeSearch, cfg, q):
    equal = powalloc.equal_power_rates(search.g, cfg.power_p, cfg.noise_n0)
    order = np.argsort(-equal, kind="stable")
    solved_rows, rates, powers, ok = [], [], [], []
    pos = 0
    while sum(ok) < q and pos < len(order):
        chunk = order[pos:pos + q - sum(ok)]
        pos += len(chunk)
        res = powalloc.solve_batch(search.g[chunk], search.lambdas[chunk], cfg.power_p, cfg.noise_n0)
        solved_rows.extend(chunk.tolist())
        rates.extend(res.rate_bits.tolist())
        powers.extend(list(res.powers))
        ok.extend(res.feasible.tolist())
    rows = np.array(solved_rows)
    pick = _best(np.array(rates), np.array(ok, dtype=bool), rows)
    if pick is None:
        return None, (), len(rows)
    row = rows[pick]
    return search.precoder(row, powers[pick], cfg.power_p), tuple(search.subsets[row]), len(rows)


def _design(h, cfg: DesignConfig, shortlist: Optional[int]):
    start = time.perf_counter()
    hm = _h(h)
    cfg.check_dimensions(hm.shape[1], hm.shape[0])
    q = build_quadratic_forms(h, cfg)
    case = classify_case(q, cfg)
    chosen: Tuple[int, ...] = ()
    calls = 0
    if case is DesignCase.INFEASIBLE:
        raise InfeasiblePrivacy(cfg.gamma_th, q.lambda_max)
    if case is DesignCase.BOUNDARY_MAX:
        w, strategy = boundary_precoder(q.t_max, cfg.power_p, cfg.n_streams), Strategy.BOUNDARY
    elif case is DesignCase.UNCONSTRAINED:
        w, strategy = waterfill_precoder(h, cfg), Strategy.WATERFILL
    else:
        u, lam = privacy_modes(q, cfg.gamma_th)
        search = _ModeSearch.build(hm, u, lam, cfg.n_streams)
        if shortlist is None:
            w, chosen, calls = _search_os(search, cfg)
            strategy = Strategy.OS
        else:
            w, chosen, calls = _search_ss(search, cfg, shortlist)
            strategy = Strategy.SS
            if w is None:
                w, strategy = boundary_precoder(q.t_max, cfg.power_p, cfg.n_streams), Strategy.BOUNDARY
    gamma = daor(h, w, cfg.noise_n0, cfg.phi, cfg.phi_hat, rx_geometry=_rx(h))
    if case is not DesignCase.UNCONSTRAINED and cfg.gamma_th <= q.lambda_max:
        if gamma < cfg.gamma_th - FEASIBILITY_SLACK:
            raise AssertionError(
                f"designed precoder reaches DAOR {gamma:.9g} below the threshold {cfg.gamma_th:.9g}")
    return DesignOutcome(
        precoder=w,
        case_label=case,
        achieved_gamma=gamma,
        rate_bits=achievable_rate(h, w, cfg.noise_n0),
        chosen_indices=tuple(int(i) for i in chosen),
        solver_calls=calls,
        wall_time=time.perf_counter() - start,
        strategy=strategy,
        gamma_th=cfg.gamma_th,
        quadratics=q,
    )


def design_os(h, cfg: DesignConfig) -> DesignOutcome:
    """Exhaustive eigenmode-subset design with optimal power per subset."""
    return _design(h, cfg, shortlist=None)


def design_ss(h, cfg: DesignConfig, q: Optional[int] = None) -> DesignOutcome:
    """Shortlist design: rank subsets by equal-power rate, optimize only the top ``q``."""
    return _design(h, cfg, shortlist=cfg.ss_shortlist_q if q is None else q)
