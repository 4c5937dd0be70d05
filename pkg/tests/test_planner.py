import math

import numpy as np
import pytest

from racecms.errors import DomainError
from racecms.planner import (
    choose_k,
    cms_dimensions,
    memory_exponent,
    plan,
    reps_needed,
    resolution_epsilon,
    size_under_sparsity,
)


def test_choose_k_examples():
    assert choose_k(1.0, 0.5) == 1
    assert choose_k(100.0, 0.5) == 14
    with pytest.raises(DomainError):
        choose_k(10.0, 1.0)
    with pytest.raises(DomainError):
        choose_k(10.0, 0.0)


def test_choose_k_is_smallest():
    for B in (2.0, 7.5, 1e3, 123456.0):
        for delta in (0.1, 0.5, 0.9, 0.99):
            K = choose_k(B, delta)
            assert delta ** (-K / 2) >= B * (1 - 1e-12)
            assert K == 1 or delta ** (-(K - 1) / 2) < B


def test_resolution_epsilon_examples():
    assert resolution_epsilon(0.9, 0.5, 2) == pytest.approx(0.6075, rel=1e-12)
    assert resolution_epsilon(0.8, 0.75, 1) == pytest.approx(0.8 - 0.6, rel=1e-12)
    with pytest.raises(DomainError):
        resolution_epsilon(0.9, 1.0, 2)


def test_resolution_epsilon_identity_random():
    rng = np.random.default_rng(0)
    for _ in range(500):
        p, d, K = rng.uniform(0.05, 1), rng.uniform(0.05, 0.95), int(rng.integers(1, 30))
        assert resolution_epsilon(p, d, K) == pytest.approx(p**K - (p * d) ** K, rel=1e-9, abs=1e-300)


@pytest.mark.parametrize("N", [10**3, 10**4, 10**5])
def test_epsilon_asymptotic_with_integer_k(N):
    # the ceiling on K only costs a bounded factor; loose 1% check for large N
    pv, delta = 0.99, 0.5
    K = math.ceil(2 * math.log(N) / math.log(1 / delta))
    ratio = resolution_epsilon(pv, delta, K) / N ** (2 * math.log(pv) / math.log(1 / delta))
    assert 0.5 <= ratio <= 1.0


def test_reps_needed_examples():
    assert reps_needed(1.0, 1.0, 1 / math.e, 1) == 32
    assert reps_needed(4.0, 0.2, 0.01, 50) == pytest.approx(4 * reps_needed(4.0, 0.4, 0.01, 50), abs=4)
    raw = lambda dl: 32 * 2.0 * math.log(10 / dl) / 0.3**2
    assert raw(0.05) - raw(0.1) == pytest.approx(32 * 2.0 * math.log(2) / 0.09)
    with pytest.raises(DomainError):
        reps_needed(1.0, 0.0, 0.1, 1)


def test_cms_dimensions_examples():
    assert cms_dimensions(1.0, 1.0, 0.01, 10**6)[0] == 19
    assert cms_dimensions(2.0, 0.1, 0.5, 10)[1] == 218
    widths = [cms_dimensions(1.0, e, 0.1, 100)[1] for e in np.linspace(1.0, 0.01, 50)]
    assert widths == sorted(widths)


def test_memory_exponent_example_and_shape():
    b, b2 = memory_exponent(0.9, 0.5, 4)
    assert round(b, 3) == 4.912
    assert b2 == pytest.approx(2 * abs(math.log(0.9)) / math.log(2))
    pv = np.linspace(0.1, 0.99, 30)
    bs = [memory_exponent(p, 0.5, 4)[0] for p in pv]
    assert all(np.diff(bs) < 0)
    ds = np.linspace(0.05, 0.95, 30)
    bs = [memory_exponent(0.9, d, 4)[0] for d in ds]
    assert all(np.diff(bs) > 0)


def test_sublinear_frontier_matches_grid():
    pv, r = 0.95, 2
    # b = 1  <=>  log(1/delta) = 6|log pv| + 2 log r
    closed = math.exp(-(6 * abs(math.log(pv)) + 2 * math.log(r)))
    grid = np.linspace(1e-4, 0.5, 50_000)
    b = np.array([memory_exponent(pv, d, r)[0] for d in grid])
    scanned = grid[np.argmax(b >= 1.0)]
    assert abs(scanned - closed) <= grid[1] - grid[0]


def test_size_under_sparsity_shape():
    a = size_under_sparsity(1.0, 0.5, 0.1, 4, 1000)
    b = size_under_sparsity(1.0, 0.25, 0.1, 4, 1000)
    assert a > 0
    # eps^-3 times a log factor that also grows as eps shrinks
    assert b >= 8 * a
    lead = lambda C: 32 * 4 * C**3 / 0.5**3
    assert lead(2.0) == 8 * lead(1.0)
    sizes = [size_under_sparsity(1.0, 0.5, 0.1, 4, n) for n in (10, 100, 10**4, 10**6)]
    assert sizes == sorted(sizes)


def test_plan_warns_when_not_sublinear(caplog):
    with caplog.at_level("WARNING"):
        b = plan(0.9, 0.5, 4, 1000)
    assert not b.sublinear and "not sub-linear" in caplog.text
    assert b.K == choose_k(999.0, 0.5)
    assert b.size_bits == b.d * b.w * b.R * 4 * 16
