"""Parameter selection for the sketch.

Turns query-dependent quantities (collision probability of the v-th
neighbor, the stability ratio ``delta_ratio = p_{v+1} / p_v`` and the tail
mass ``B``) into concrete sketch parameters. Constants that the asymptotic
bounds hide are pinned: 32 for median-of-means, ``e`` for the count-min
width, and an error split of eps/4 between estimation and recovery.
All logarithms are natural.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .errors import DomainError

log = logging.getLogger(__name__)

MOM_CONSTANT = 32.0


def _ceil(x: float) -> int:
    # absorb float noise so exact integers are not bumped up by one
    return math.ceil(x - 1e-12 * max(1.0, abs(x)))


@dataclass(frozen=True)
class StabilityProfile:
    p_v: float
    p_v1: float
    delta: float
    B: float
    v: int


@dataclass(frozen=True)
class PlannerBudget:
    K: int
    epsilon: float
    d: int
    w: int
    M: int
    R: int
    delta_fail: float
    b: float
    b2: float
    size_bits: int

    @property
    def sublinear(self) -> bool:
        return self.b < 1.0


def choose_k(B: float, delta: float) -> int:
    """Smallest K >= 1 with ``delta ** (-K/2) >= B``."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"stability ratio must lie in (0, 1), got {delta}")
    if not B >= 1.0:
        raise DomainError(f"tail mass B must be >= 1, got {B}")
    log_b = math.log(B)
    half = 0.5 * math.log(1.0 / delta)
    if log_b == 0.0:
        return 1
    K = max(1, _ceil(log_b / half))
    while K * half < log_b:
        K += 1
    while K > 1 and (K - 1) * half >= log_b:
        K -= 1
    return K


def resolution_epsilon(p_v: float, delta: float, K: float) -> float:
    """Score gap ``p_v^K - p_{v+1}^K`` between the v-th and (v+1)-th neighbor.

    ``K`` may be real-valued; the asymptotic analysis plugs in an unrounded K.
    """
    if not 0.0 < p_v <= 1.0:
        raise DomainError("p_v must lie in (0, 1]")
    if not 0.0 < delta < 1.0:
        raise DomainError("stability ratio must lie in (0, 1); at 1 the neighbors are indistinguishable")
    if K < 1:
        raise DomainError("K must be >= 1")
    return p_v**K * -math.expm1(K * math.log(delta))


def reps_needed(s1_tilde_sq: float, epsilon: float, delta: float, M: int) -> int:
    """ACE repetitions per measurement so all ``M`` are within ``epsilon`` w.p. 1 - delta."""
    if s1_tilde_sq <= 0 or epsilon <= 0 or M < 1:
        raise DomainError("arguments must be positive")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    return max(1, _ceil(MOM_CONSTANT * s1_tilde_sq * math.log(M / delta) / epsilon**2))


def cms_dimensions(s1: float, epsilon: float, delta: float, N: int) -> tuple[int, int]:
    """Count-min rows and columns for additive error ``epsilon / 4``.

    The recovery error budget is ``eps_C * |s|_1`` with ``eps_C = eps / (4 |s|_1)``,
    so the width is ``ceil(e / eps_C)`` and the depth ``ceil(ln(N / delta))``.
    """
    if s1 <= 0 or epsilon <= 0 or N < 1:
        raise DomainError("arguments must be positive")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    d = max(1, _ceil(math.log(N / delta)))
    w = max(1, _ceil(math.e * 4.0 * s1 / epsilon))
    return d, w


def memory_exponent(p_v: float, delta: float, r: int) -> tuple[float, float]:
    """``(b, b2)``: the sketch needs ~N^b log^3 N bits; ``b2`` is the exponent of 1/eps."""
    if not 0.0 < p_v < 1.0:
        raise DomainError("p_v must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise DomainError("stability ratio must lie in (0, 1)")
    if r < 2:
        raise DomainError("r must be >= 2")
    denom = math.log(1.0 / delta)
    lp = abs(math.log(p_v))
    return (6.0 * lp + 2.0 * math.log(r)) / denom, 2.0 * lp / denom


def size_under_sparsity(C: float, epsilon: float, delta: float, r: int, N: int) -> float:
    """Sketch bits when ``|s~(q)|_1 <= C`` already holds at K = 1.

    32 * r * C^3/eps^3 * log(C/(eps*delta) * log(N/delta)) * log(N/delta) * log N,
    with every log factor floored at 1 so the count stays positive.
    """
    if C <= 0 or epsilon <= 0 or r < 2 or N < 1:
        raise DomainError("arguments must be positive")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    log_n_delta = math.log(N / delta)
    inner = max(1.0, math.log(C / (epsilon * delta) * log_n_delta))
    return (MOM_CONSTANT * r * C**3 / epsilon**3 * inner
            * max(1.0, log_n_delta) * max(1.0, math.log(N)))


def plan(p_v: float, delta: float, r: int, N: int, delta_fail: float = 0.05, v: int = 1,
         counter_bits: int = 16) -> PlannerBudget:
    """Full budget for an equidistant (worst-case) query.

    Tail mass is taken as ``B = N - v``; after choosing K the norms obey
    ``|s|_1, |s~|_1 <= v + 1``. Failure probability is split evenly between
    count-min recovery and MoM estimation. ``size_bits`` counts the counters
    of the realized layout (d*w*R ACE arrays of r counters each).
    """
    if N <= v:
        raise DomainError("need N > v")
    K = choose_k(max(1.0, float(N - v)), delta)
    eps = resolution_epsilon(p_v, delta, K)
    norm = float(v + 1)
    d, w = cms_dimensions(norm, eps, delta_fail / 2.0, N)
    M = d * w
    R = reps_needed(norm**2, eps / 4.0, delta_fail / 2.0, M)
    b, b2 = memory_exponent(p_v, delta, r)
    size_bits = d * w * R * r * counter_bits
    budget = PlannerBudget(K, eps, d, w, M, R, delta_fail, b, b2, size_bits)
    if not budget.sublinear:
        log.warning("memory exponent b = %.3f >= 1: sketch is not sub-linear for this query", b)
    return budget
