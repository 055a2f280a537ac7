import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from conftest import random_complex
from daor.design import waterfill_powers
from daor.errors import DimensionMismatch, InfeasibleSubset
from daor.powalloc import (AllocationProblem, equal_power_rate, kkt_residual, rate_bits, rate_gradient,
                           solve_batch, solve_power_allocation)


def two_mode_grid_oracle(g, lam, p, n0, n=10_001):
    """Best rate over the feasible part of the segment p1 + p2 = P, endpoints included."""
    x = np.linspace(0.0, 1.0, n)
    if lam[0] != lam[1]:
        root = lam[1] / (lam[1] - lam[0])
        if 0 < root < 1:
            x = np.append(x, root)
    pw = p * np.stack([x, 1 - x], axis=1)
    ok = pw @ lam >= -1e-12 * p * np.abs(lam).max()
    return rate_bits(np.broadcast_to(g, (ok.sum(),) + g.shape), pw[ok], n0).max()


def slsqp_oracle(g, lam, p, n0):
    k = g.shape[1]
    cons = [{"type": "eq", "fun": lambda v: v.sum() - p}]
    if lam.min() < 0:
        cons.append({"type": "ineq", "fun": lambda v: lam @ v})
    best = -np.inf
    for start in np.eye(k) * p * 0.98 + p * 0.02 / k:
        if lam @ start < 0:
            continue
        res = minimize(lambda v: -rate_bits(g, np.maximum(v, 0), n0), start,
                       jac=lambda v: -rate_gradient(g, np.maximum(v, 0), n0),
                       bounds=[(0, p)] * k, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
        best = max(best, rate_bits(g, np.maximum(res.x, 0), n0))
    return best


def test_problem_validation(rng):
    g = random_complex(rng, 3, 2)
    with pytest.raises(DimensionMismatch):
        AllocationProblem(g, np.array([1.0]), 1.0, 0.1)
    with pytest.raises(InfeasibleSubset):
        AllocationProblem(g, np.array([-1.0, -2.0]), 1.0, 0.1)


def test_rate_bits_closed_form(rng):
    g = random_complex(rng, 4, 3)
    p = np.array([0.2, 0.5, 0.3])
    ref = np.linalg.slogdet(np.eye(4) + g @ np.diag(p) @ g.conj().T / 0.1)[1] / np.log(2)
    assert rate_bits(g, p, 0.1) == pytest.approx(ref, rel=1e-12)


def test_gradient_matches_central_differences(rng):
    g, p = random_complex(rng, 5, 4), np.array([0.1, 0.4, 0.3, 0.2])
    h = 1e-6
    fd = np.array([(rate_bits(g, p + h * e, 0.1) - rate_bits(g, p - h * e, 0.1)) / (2 * h)
                   for e in np.eye(4)])
    assert np.allclose(rate_gradient(g, p, 0.1), fd, rtol=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_two_modes_match_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    g = random_complex(rng, 3, 2)
    lam = np.array([rng.uniform(0.1, 2.0), -rng.uniform(0.1, 2.0)])
    res = solve_power_allocation(AllocationProblem(g, lam, 1.0, 0.1))
    assert res.feasible and res.kkt_residual <= 1e-6
    assert res.powers.sum() == pytest.approx(1.0, abs=1e-12)
    assert lam @ res.powers >= -1e-9
    assert res.rate_bits >= two_mode_grid_oracle(g, lam, 1.0, 0.1) - 1e-9


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.floats(-2.0, 2.0))
def test_matches_slsqp(seed, k, log_snr):
    rng = np.random.default_rng(seed)
    g = random_complex(rng, 3, k)
    lam = rng.standard_normal(k)
    lam[0] = abs(lam[0]) + 0.05
    n0 = 10.0 ** -log_snr
    res = solve_power_allocation(AllocationProblem(g, lam, 1.0, n0))
    assert res.feasible
    assert res.rate_bits >= slsqp_oracle(g, lam, 1.0, n0) - 1e-7


def test_orthogonal_unconstrained_is_waterfilling():
    q, _ = np.linalg.qr(random_complex(np.random.default_rng(4), 6, 6))
    sigma = np.array([3.0, 1.5, 0.4, 0.1])
    g = q[:, :4] * sigma
    res = solve_power_allocation(AllocationProblem(g, np.ones(4), 2.0, 0.5))
    assert np.allclose(res.powers, waterfill_powers(sigma ** 2, 2.0, 0.5), atol=1e-8)


def test_equal_gain_orthogonal_columns_split_evenly():
    res = solve_power_allocation(AllocationProblem(np.eye(3)[:, :2] * 2.0, np.array([1.0, 1.0]), 1.0, 0.1))
    assert np.allclose(res.powers, [0.5, 0.5], atol=1e-9)


def test_single_mode_takes_all_power(rng):
    res = solve_power_allocation(AllocationProblem(random_complex(rng, 2, 1), np.array([0.3]), 1.5, 0.1))
    assert res.powers == pytest.approx([1.5])


def test_zero_channel_is_feasible(rng):
    res = solve_power_allocation(AllocationProblem(np.zeros((2, 2)), np.array([1.0, -0.5]), 1.0, 0.1))
    assert res.feasible and res.rate_bits == 0.0
    assert np.array([1.0, -0.5]) @ res.powers >= -1e-9


def test_zero_max_eigenvalue_forces_negative_modes_off(rng):
    res = solve_power_allocation(AllocationProblem(random_complex(rng, 3, 3), np.array([0.0, -1.0, -2.0]), 1.0, 0.1))
    assert res.feasible
    assert np.allclose(res.powers, [1.0, 0.0, 0.0], atol=1e-12)


def test_more_modes_than_receive_antennas(rng):
    g = random_complex(rng, 2, 4)
    lam = np.array([1.0, 0.5, -0.2, -1.0])
    res = solve_power_allocation(AllocationProblem(g, lam, 1.0, 0.1))
    assert res.feasible
    assert res.rate_bits >= slsqp_oracle(g, lam, 1.0, 0.1) - 1e-7


def test_batch_results_do_not_depend_on_batch_mates():
    rng = np.random.default_rng(8)
    g = random_complex(rng, 12, 4, 3)
    lam = rng.standard_normal((12, 3))
    lam[:, 0] = np.abs(lam[:, 0]) + 0.1
    full = solve_batch(g, lam, 1.0, 0.1)
    part = solve_batch(g[5:9], lam[5:9], 1.0, 0.1)
    assert np.array_equal(full.powers[5:9], part.powers)
    assert np.array_equal(full.rate_bits[5:9], part.rate_bits)
    assert len(full) == 12 and full.feasible.all()


def test_solver_beats_equal_power_when_feasible(rng):
    g = random_complex(rng, 4, 3)
    prob = AllocationProblem(g, np.array([1.0, 0.5, 0.2]), 1.0, 0.1)
    assert solve_power_allocation(prob).rate_bits >= equal_power_rate(prob) - 1e-12


def test_kkt_residual_flags_suboptimal_point():
    grad = np.array([[2.0, 1.0]])
    lam = np.array([[1.0, 1.0]])
    assert kkt_residual(np.array([[1.0, 0.0]]), grad, lam, np.array([False]))[0] < 1e-12
    assert kkt_residual(np.array([[0.5, 0.5]]), grad, lam, np.array([False]))[0] > 0.1


def feasible_vertices(lam):
    k = lam.size
    verts = [np.eye(k)[i] for i in range(k) if lam[i] >= 0]
    for i in range(k):
        for j in range(k):
            if lam[i] > 0 > lam[j]:
                v = np.zeros(k)
                v[i], v[j] = -lam[j], lam[i]
                verts.append(v / (lam[i] - lam[j]))
    return verts


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5))
def test_solver_dominates_vertices_and_equal_power(seed, k):
    rng = np.random.default_rng(seed)
    g = random_complex(rng, 4, k)
    lam = rng.standard_normal(k)
    lam[0] = abs(lam[0]) + 0.01
    prob = AllocationProblem(g, lam, 2.0, 0.2)
    res = solve_power_allocation(prob)
    for v in feasible_vertices(lam):
        assert res.rate_bits >= rate_bits(g, 2.0 * v, 0.2) - 1e-9
    if lam.sum() >= 0:
        assert res.rate_bits >= equal_power_rate(prob) - 1e-9


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.0))
def test_rate_is_concave_on_the_simplex(seed, t):
    rng = np.random.default_rng(seed)
    g = random_complex(rng, 3, 4)
    p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    mid = rate_bits(g, t * p + (1 - t) * q, 0.1)
    assert mid >= t * rate_bits(g, p, 0.1) + (1 - t) * rate_bits(g, q, 0.1) - 1e-9
