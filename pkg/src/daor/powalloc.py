"""Power allocation over a fixed eigenmode subset under a privacy inequality.

Maximizes ``log2 det(I + G diag(p) G^H / N0)`` over
``{p >= 0, sum(p) = P, sum(p * lambda) >= 0}``.

The solver works on ``x = p / P`` and runs a log-barrier method whose
centering steps are damped Newton steps on the self-concordant function
``-t log det(I + G diag(x) G^H P/N0) - sum(log x) - log(lambda . x)``.
After the barrier phase the active set is read off from the barrier
multipliers, the bound coordinates are set to exactly zero and a few
equality-constrained Newton steps on that face finish the job. Every
problem in a batch is advanced independently (converged problems are
frozen), so a problem's answer does not depend on which batch it was
solved in.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InfeasibleSubset, InvalidConfig
from .numerics import logdet_hpd

LN2 = math.log(2.0)
KKT_TOL = 1e-6
PRIVACY_TOL = 1e-9
MAX_ITERATIONS = 5000
BARRIER_GROWTH = 20.0
BARRIER_GAP = 1e-9
CENTERING_TOL = 1e-10
POLISH_STEPS = 30
ZERO_EIGEN_RTOL = 1e-12


@dataclass(frozen=True)
class AllocationProblem:
    effective_channel_g: np.ndarray
    """``H U_I`` with one column per selected eigenmode (N_R x |I|)."""
    lambdas: np.ndarray
    total_power: float
    noise_n0: float

    def __post_init__(self):
        g = np.asarray(self.effective_channel_g, dtype=complex)
        lam = np.asarray(self.lambdas, dtype=float)
        if g.ndim != 2 or lam.shape != (g.shape[1],):
            raise DimensionMismatch(f"G {g.shape} and lambdas {lam.shape} disagree")
        if not self.total_power > 0 or not self.noise_n0 > 0:
            raise InvalidConfig("total_power and noise_n0 must be positive")
        if lam.max() < 0:
            raise InfeasibleSubset("all privacy eigenvalues are negative")
        object.__setattr__(self, "effective_channel_g", g)
        object.__setattr__(self, "lambdas", lam)


@dataclass(frozen=True)
class AllocationResult:
    powers: np.ndarray
    rate_bits: float
    kkt_residual: float
    iterations: int
    feasible: bool


@dataclass(frozen=True)
class BatchAllocation:
    """Stacked results for a batch of problems sharing ``P`` and ``N0``."""
    powers: np.ndarray
    rate_bits: np.ndarray
    kkt_residual: np.ndarray
    iterations: np.ndarray
    feasible: np.ndarray

    def __len__(self):
        return len(self.rate_bits)

    def item(self, i) -> AllocationResult:
        return AllocationResult(
            powers=self.powers[i].copy(),
            rate_bits=float(self.rate_bits[i]),
            kkt_residual=float(self.kkt_residual[i]),
            iterations=int(self.iterations[i]),
            feasible=bool(self.feasible[i]),
        )


def rate_bits(g, powers, noise_n0):
    """``log2 det(I + G diag(p) G^H / N0)`` for one or a stack of problems."""
    g = np.asarray(g, dtype=complex)
    powers = np.asarray(powers, dtype=float)
    gram = (g * powers[..., None, :]) @ np.swapaxes(g, -1, -2).conj()
    eye = np.eye(g.shape[-2])
    return logdet_hpd(eye + gram / noise_n0) / LN2


def rate_gradient(g, powers, noise_n0):
    """Analytic gradient of :func:`rate_bits` with respect to the powers."""
    g = np.asarray(g, dtype=complex)
    powers = np.asarray(powers, dtype=float)
    gram = (g * powers[..., None, :]) @ np.swapaxes(g, -1, -2).conj()
    k = np.eye(g.shape[-2]) + gram / noise_n0
    kg = np.linalg.solve(k, g)
    return np.sum(g.conj() * kg, axis=-2).real / (noise_n0 * LN2)


def equal_power_rates(g, total_power, noise_n0):
    g = np.asarray(g, dtype=complex)
    n_s = g.shape[-1]
    powers = np.full(g.shape[:-2] + (n_s,), total_power / n_s)
    return rate_bits(g, powers, noise_n0)


def equal_power_rate(prob: AllocationProblem):
    """Rate with ``P / |I|`` on every mode; the privacy inequality is not checked."""
    return float(equal_power_rates(prob.effective_channel_g, prob.total_power, prob.noise_n0))


def solve_power_allocation(prob: AllocationProblem) -> AllocationResult:
    batch = solve_batch(prob.effective_channel_g[None], prob.lambdas[None],
                        prob.total_power, prob.noise_n0)
    return batch.item(0)


def _derivatives(c, x):
    """Value, gradient and Hessian of ``ln det(I + C diag(x))`` (nats)."""
    k = x.shape[-1]
    a = np.eye(k) + c * x[:, None, :]
    m = np.linalg.solve(a, c)
    grad = np.diagonal(m, axis1=1, axis2=2).real
    hess = -(np.abs(m) ** 2)
    value = np.linalg.slogdet(a)[1]
    return value, grad, hess


def kkt_residual(x, grad, lam, privacy, zero_tol=0.0):
    """Scaled KKT residual of normalized powers ``x`` on the simplex.

    Multipliers for ``sum(x) = 1`` and the privacy inequality are fitted by
    least squares on the free coordinates; the residual is the worst of
    stationarity, dual feasibility, complementarity (all divided by
    ``max(1, |grad|_inf)``) and primal infeasibility.
    """
    x = np.atleast_2d(x)
    grad = np.atleast_2d(grad)
    lam = np.atleast_2d(lam)
    privacy = np.atleast_1d(privacy)
    scale = np.maximum(1.0, np.max(np.abs(grad), axis=1))
    free = x > zero_tol
    rho = np.sum(lam * x, axis=1)
    active = privacy & (rho <= PRIVACY_TOL)
    wf = free.astype(float)
    wl = lam * wf
    n = wf.sum(axis=1)
    s_l = wl.sum(axis=1)
    s_ll = (wl * lam).sum(axis=1)
    s_g = (grad * wf).sum(axis=1)
    s_lg = (wl * grad).sum(axis=1)
    # normal equations of  grad_i - nu + eta * lam_i = 0  over the free set
    det = n * s_ll - s_l ** 2
    solvable = active & (np.abs(det) > 1e-14 * np.maximum(1.0, n * s_ll))
    nu = np.where(n > 0, s_g / np.maximum(n, 1), 0.0)
    eta = np.zeros_like(nu)
    safe = np.where(solvable, det, 1.0)
    nu = np.where(solvable, (s_ll * s_g - s_l * s_lg) / safe, nu)
    eta = np.where(solvable, (s_l * s_g - n * s_lg) / safe, eta)
    # free set carries no privacy information: smallest eta that makes the
    # bound multipliers non-negative
    lean = active & ~solvable
    need = np.where(~free & (lam < 0), (grad - nu[:, None]) / np.where(lam < 0, -lam, 1.0), 0.0)
    eta = np.where(lean, np.maximum(0.0, need.max(axis=1)), eta)
    r = grad - nu[:, None] + eta[:, None] * lam
    stat = np.max(np.where(free, np.abs(r), 0.0), axis=1)
    mu = -r
    dual = np.max(np.where(free, 0.0, np.maximum(0.0, -mu)), axis=1)
    dual = np.maximum(dual, np.maximum(0.0, -eta))
    comp = np.max(np.where(free, 0.0, np.abs(x * mu)), axis=1) + np.abs(eta * rho)
    primal = (np.abs(x.sum(axis=1) - 1.0) + np.maximum(0.0, -x.min(axis=1))
              + np.where(privacy, np.maximum(0.0, -rho), 0.0))
    return np.maximum.reduce([stat / scale, dual / scale, comp / scale, primal])


def _initial_point(lam, fixed, privacy):
    free = ~fixed
    nfree = free.sum(axis=1, keepdims=True)
    x = np.where(free, 1.0 / nfree, 0.0)
    lmax = np.max(np.where(free, lam, -np.inf), axis=1)
    jmax = np.argmax(np.where(free, lam, -np.inf), axis=1)
    rho = np.sum(lam * x, axis=1)
    target = 0.5 * lmax
    need = privacy & (rho < target)
    theta = np.where(need, (target - rho) / np.where(need, lmax - rho, 1.0), 0.0)
    x = (1.0 - theta)[:, None] * x
    x[np.arange(len(x)), jmax] += theta
    return x


def _barrier(c, lam, fixed, privacy, counts):
    """Barrier phase; returns the final iterate, barrier weights and multipliers."""
    bsz, k = lam.shape
    free = ~fixed
    x = _initial_point(lam, fixed, privacy)
    m = free.sum(axis=1) + privacy
    _, g0, _ = _derivatives(c, x)
    gscale = np.maximum(1.0, np.max(np.abs(g0), axis=1))
    t = np.ones(bsz)
    t_final = m * gscale / BARRIER_GAP
    done = np.zeros(bsz, dtype=bool)
    eye = np.eye(k)
    while not done.all():
        idx = np.flatnonzero(~done)
        xs, ls, fr, pv, ts = x[idx], lam[idx], free[idx], privacy[idx], t[idx]
        _, grad, hess = _derivatives(c[idx], xs)
        rho = np.where(pv, np.sum(ls * xs, axis=1), 1.0)
        pvf = pv.astype(float)
        inv_x = np.where(fr, 1.0 / np.where(fr, xs, 1.0), 0.0)
        g = ts[:, None] * grad + inv_x + pvf[:, None] * ls / rho[:, None]
        hn = (-ts[:, None, None] * hess + (inv_x ** 2)[:, :, None] * eye
              + pvf[:, None, None] * ls[:, :, None] * ls[:, None, :] / (rho ** 2)[:, None, None])
        sx = np.where(fr, xs, 0.0)
        kmat = sx[:, :, None] * hn * sx[:, None, :]
        kmat = np.where(fr[:, :, None] & fr[:, None, :], kmat, 0.0) + (~fr)[:, :, None] * eye
        rhs = np.stack([sx * g, sx], axis=2)
        broken = ~(np.isfinite(kmat).all(axis=(1, 2)) & np.isfinite(rhs).all(axis=(1, 2)))
        if broken.any():
            kmat[broken] = eye
            rhs[broken] = 0.0
            rhs[broken, :, 1] = 1.0
            counts[idx[broken]] = MAX_ITERATIONS
        sol = np.linalg.solve(kmat, rhs)
        a, b = sol[..., 0], sol[..., 1]
        nu = np.sum(sx * a, axis=1) / np.where(broken, 1.0, np.sum(sx * b, axis=1))
        y = a - nu[:, None] * b
        dec2 = np.einsum("bi,bij,bj->b", y, kmat, y)
        d = sx * y

        # the decrement cannot resolve below the round-off of t * grad
        floor = (1e-15 * ts * gscale[idx] * m[idx]) ** 2
        centered = (dec2 <= np.maximum(CENTERING_TOL, floor)) | broken
        step = np.where(dec2 < 0.0625, 1.0, 1.0 / (1.0 + np.sqrt(np.maximum(dec2, 0.0))))
        ratio = np.where(d < 0, -xs / np.where(d < 0, d, -1.0), np.inf).min(axis=1)
        ld = np.sum(ls * d, axis=1)
        ratio = np.minimum(ratio, np.where(pv & (ld < 0), -rho / np.where(ld < 0, ld, -1.0), np.inf))
        step = np.minimum(step, 0.99 * ratio)
        step = np.where(centered, 0.0, step)
        x[idx] = xs + step[:, None] * d
        counts[idx] += 1

        finished = centered & (ts >= t_final[idx])
        grow = centered & ~finished
        t[idx] = np.where(grow, np.minimum(ts * BARRIER_GROWTH, t_final[idx]), ts)
        stalled = counts[idx] >= MAX_ITERATIONS
        done[idx] = finished | stalled
    rho = np.sum(lam * x, axis=1)
    mu = np.where(free, 1.0 / (t[:, None] * np.where(free, x, 1.0)), np.inf)
    eta = np.where(privacy, 1.0 / (t * np.where(privacy, rho, 1.0)), 0.0)
    return x, mu, eta, gscale


def _project_face(x, lam, free, active):
    """Renormalize onto ``sum(x) = 1`` (and ``lam . x = 0`` when active) on the free set."""
    x = np.where(free, x, 0.0)
    wf = free.astype(float)
    wl = lam * wf
    e = np.stack([wf, np.where(active[:, None], wl, 0.0)], axis=1)
    resid = np.stack([x.sum(axis=1) - 1.0, np.where(active, np.sum(wl * x, axis=1), 0.0)], axis=1)
    gram = e @ np.swapaxes(e, 1, 2)
    gram[~active, 1, 1] = 1.0
    coef = np.linalg.solve(gram, resid[:, :, None])[..., 0]
    return x - np.sum(e * coef[:, :, None], axis=1)


def _polish(c, x, lam, free, active):
    """Equality-constrained Newton on the identified face."""
    k = x.shape[1]
    wf = free.astype(float)
    e2 = np.where(active[:, None], lam * wf, 0.0)
    running = np.all(np.where(free, x > 0, True), axis=1)
    for _ in range(POLISH_STEPS):
        if not running.any():
            break
        idx = np.flatnonzero(running)
        xs, fr = x[idx], free[idx]
        value, grad, hess = _derivatives(c[idx], xs)
        reg = 1e-13 * np.maximum(1.0, np.max(np.abs(hess), axis=(1, 2)))
        kkt = np.zeros((len(idx), k + 2, k + 2))
        both = fr[:, :, None] & fr[:, None, :]
        kkt[:, :k, :k] = np.where(both, -hess, 0.0) + (reg[:, None] * fr + (~fr))[:, :, None] * np.eye(k)
        kkt[:, :k, k] = wf[idx]
        kkt[:, k, :k] = wf[idx]
        kkt[:, :k, k + 1] = e2[idx]
        kkt[:, k + 1, :k] = e2[idx]
        kkt[:, k + 1, k + 1] = np.where(active[idx], 0.0, 1.0)
        rhs = np.zeros((len(idx), k + 2, 1))
        rhs[:, :k, 0] = np.where(fr, grad, 0.0)
        d = np.where(fr, np.linalg.solve(kkt, rhs)[:, :k, 0], 0.0)
        xn = xs + d
        leaving = np.any(fr & (xn <= 0), axis=1)
        newval = _derivatives(c[idx], np.where(leaving[:, None], xs, xn))[0]
        improved = newval >= value - 1e-13 * np.maximum(1.0, np.abs(value))
        accept = ~leaving & improved
        x[idx] = np.where(accept[:, None], xn, xs)
        running[idx] = accept & (np.max(np.abs(d), axis=1) > 1e-15)
    return x


def solve_batch(g, lambdas, total_power, noise_n0) -> BatchAllocation:
    """Solve a stack of allocation problems sharing total power and noise level.

    ``g`` has shape (B, N_R, k) and ``lambdas`` shape (B, k).
    """
    g = np.asarray(g, dtype=complex)
    lam_raw = np.asarray(lambdas, dtype=float)
    if g.ndim != 3 or lam_raw.shape != (g.shape[0], g.shape[2]):
        raise DimensionMismatch(f"G {g.shape} and lambdas {lam_raw.shape} disagree")
    if not total_power > 0 or not noise_n0 > 0:
        raise InvalidConfig("total_power and noise_n0 must be positive")
    bsz, _, k = g.shape
    if bsz == 0:
        empty = np.zeros(0)
        return BatchAllocation(np.zeros((0, k)), empty, empty, np.zeros(0, int), np.zeros(0, bool))
    if np.any(lam_raw.max(axis=1) < 0):
        raise InfeasibleSubset("a subset has only negative privacy eigenvalues")

    lscale = np.max(np.abs(lam_raw), axis=1)
    lam = lam_raw / np.where(lscale > 0, lscale, 1.0)[:, None]
    # eigenvalues at round-off level carry no sign information
    lam = np.where(np.abs(lam) <= ZERO_EIGEN_RTOL, 0.0, lam)
    # max(lam) == 0 with negatives: only the zero-eigenvalue modes may carry power
    edge = (lam.max(axis=1) == 0) & (lam.min(axis=1) < 0)
    fixed = edge[:, None] & (lam < 0)
    privacy = (lam.min(axis=1) < 0) & ~edge

    c = (total_power / noise_n0) * (np.swapaxes(g, 1, 2).conj() @ g)
    counts = np.zeros(bsz, dtype=int)
    x_bar, mu, eta, gscale = _barrier(c, lam, fixed, privacy, counts)

    free0 = ~fixed
    at_bound = free0 & (x_bar * gscale[:, None] < mu)
    free = free0 & ~at_bound
    rho = np.sum(lam * x_bar, axis=1)
    active = privacy & (rho * gscale < eta)
    x_face = _project_face(x_bar, lam, free, active)
    x_pol = _polish(c, x_face.copy(), lam, free, active)

    _, grad_bar, _ = _derivatives(c, x_bar)
    _, grad_pol, _ = _derivatives(c, x_pol)
    constrained = lam.min(axis=1) < 0
    res_bar = kkt_residual(x_bar, grad_bar, lam, constrained)
    res_pol = kkt_residual(x_pol, grad_pol, lam, constrained)
    primal_pol = np.all(x_pol >= 0, axis=1) & (np.sum(lam * x_pol, axis=1) >= -PRIVACY_TOL)
    use_pol = primal_pol & (res_pol <= np.maximum(res_bar, KKT_TOL))
    x = np.where(use_pol[:, None], x_pol, x_bar)
    res = np.where(use_pol, res_pol, res_bar)

    x = np.maximum(x, 0.0)
    x = x / x.sum(axis=1, keepdims=True)
    powers = total_power * x
    rates = rate_bits(g, powers, noise_n0)
    rho = np.sum(lam * x, axis=1)
    feasible = (res <= KKT_TOL) & (rho >= -PRIVACY_TOL) & (counts < MAX_ITERATIONS)
    return BatchAllocation(powers=powers, rate_bits=rates, kkt_residual=res,
                           iterations=counts, feasible=feasible)
