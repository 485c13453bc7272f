"""Acceptance-probability algebra: completeness, soundness bounds and the gap.

With test probability split ``q`` (compute) and ``(1-q)/2`` per test::

    alpha = q a + (1 - q)
    beta1 = q + (1-q)/2 + (1-q)/2 (1 - eps)
    beta2 = q + (1-q)(1 - eps)
    beta3 = q (b + delta) + (1 - q)
    delta = 2 sqrt(2 eps) + sqrt(2/3 + eps)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq


class NoVerifiableGap(ValueError):
    """``a - b - delta <= 0``: no positive completeness-soundness gap at these parameters."""


@dataclass(frozen=True)
class RateParams:
    epsilon: float
    q: float
    a: float
    b: float
    r: int | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon = {self.epsilon} outside (0, 1)")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q = {self.q} outside [0, 1]")
        if not self.a > self.b:
            raise ValueError(f"need a > b, got a={self.a}, b={self.b}")
        if self.r is not None and self.r < 1:
            raise ValueError(f"r = {self.r} must be a positive integer")

    @classmethod
    def amplified(cls, epsilon: float, q: float, r: int) -> "RateParams":
        """``a = 1 - 2^-r`` and ``b = 2^-r``."""
        return cls(epsilon, q, 1 - 2.0 ** -r, 2.0 ** -r, int(r))

    def with_q(self, q: float) -> "RateParams":
        return RateParams(self.epsilon, q, self.a, self.b, self.r)


@dataclass(frozen=True)
class BoundSet:
    alpha: float
    beta1: float
    beta2: float
    beta3: float
    delta: float
    delta1: float
    delta2: float
    delta3: float
    q_star: float
    q_star_valid: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


def delta_of(epsilon: float) -> float:
    if epsilon < 0:
        raise ValueError(f"epsilon = {epsilon} is negative")
    return 2 * math.sqrt(2 * epsilon) + math.sqrt(2 / 3 + epsilon)


def alpha(q: float, a: float) -> float:
    return q * a + (1 - q)


def beta1(q: float, epsilon: float) -> float:
    return q + (1 - q) / 2 + (1 - q) / 2 * (1 - epsilon)


def beta2(q: float, epsilon: float) -> float:
    return q + (1 - q) * (1 - epsilon)


def beta3(q: float, b: float, epsilon: float) -> float:
    return q * (b + delta_of(epsilon)) + (1 - q)


def delta1(q: float, a: float, epsilon: float) -> float:
    return q * (a - 1) + epsilon * (1 - q) / 2


def delta2(q: float, a: float, epsilon: float) -> float:
    return q * (a - 1) + epsilon * (1 - q)


def delta3(q: float, a: float, b: float, epsilon: float) -> float:
    return q * (a - b - delta_of(epsilon))


def q_star_denominator(params: RateParams) -> float:
    return 1 + params.epsilon / 2 - params.b - delta_of(params.epsilon)


def q_star(params: RateParams) -> float:
    """The ``q`` at which ``Delta1(q) = Delta3(q)``; NaN when the denominator is not positive."""
    den = q_star_denominator(params)
    if den <= 0:
        return math.nan
    return (params.epsilon / 2) / den


def bound_set(params: RateParams) -> BoundSet:
    p = params
    d = delta_of(p.epsilon)
    qs = q_star(p)
    return BoundSet(
        alpha=alpha(p.q, p.a),
        beta1=beta1(p.q, p.epsilon),
        beta2=beta2(p.q, p.epsilon),
        beta3=beta3(p.q, p.b, p.epsilon),
        delta=d,
        delta1=delta1(p.q, p.a, p.epsilon),
        delta2=delta2(p.q, p.a, p.epsilon),
        delta3=delta3(p.q, p.a, p.b, p.epsilon),
        q_star=qs,
        q_star_valid=not math.isnan(qs),
    )


def gap_at_qstar(params: RateParams) -> float:
    """Closed-form ``Delta3(q*) = (eps/2)(a-b-delta)/(1+eps/2-b-delta)``."""
    eps, a, b = params.epsilon, params.a, params.b
    d = delta_of(eps)
    if a - b - d <= 0:
        raise NoVerifiableGap(
            f"no verifiable gap at these parameters: a - b - delta = {a - b - d:.6g}")
    return (eps / 2) * (a - b - d) / (1 + eps / 2 - b - d)


def gap_lower_bound(epsilon: float, r: int) -> float:
    """``(eps/4)(1 - 2^{1-r} - 2 sqrt(2 eps) - sqrt(2/3 + eps))``."""
    return (epsilon / 4) * (1 - 2.0 ** (1 - r) - 2 * math.sqrt(2 * epsilon)
                            - math.sqrt(2 / 3 + epsilon))


def gap_limit(epsilon: float) -> float:
    """``lim_{r -> inf} Delta3(q*) = (eps/2)(1-delta)/(1+eps/2-delta)``."""
    d = delta_of(epsilon)
    return (epsilon / 2) * (1 - d) / (1 + epsilon / 2 - d)


def gap_margin(epsilon: float, r: int) -> float:
    """``a - b - delta`` in amplified form; positive iff a gap exists."""
    return 1 - 2.0 ** (1 - r) - delta_of(epsilon)


def gap_crossover(r: int, lo: float = 1e-12, hi: float = 1 / 3) -> float:
    """The ``eps`` where ``a - b - delta`` changes sign for amplification ``r``."""
    f_lo, f_hi = gap_margin(lo, r), gap_margin(hi, r)
    if f_lo <= 0:
        raise NoVerifiableGap(f"no gap for any epsilon >= {lo} at r = {r}")
    if f_hi > 0:
        raise ValueError(f"no sign change of a - b - delta in [{lo}, {hi}]")
    return float(brentq(gap_margin, lo, hi, args=(r,), xtol=1e-15))


def lower_bound_chain(epsilons, rs) -> list[dict]:
    """Evaluate ``Delta3(q*) >= gap_lower_bound`` on a grid.

    Only points with a positive right-hand side carry a claim; the rest are
    marked ``applicable=False``.
    """
    rows = []
    for r in rs:
        for eps in epsilons:
            params = RateParams.amplified(float(eps), 0.5, int(r))
            rhs = gap_lower_bound(float(eps), int(r))
            try:
                lhs = gap_at_qstar(params)
            except NoVerifiableGap:
                lhs = math.nan
            applicable = rhs > 0
            holds = (not applicable) or (not math.isnan(lhs) and lhs >= rhs - 1e-15)
            rows.append({"r": int(r), "epsilon": float(eps), "gap": lhs, "lower_bound": rhs,
                         "applicable": applicable, "holds": holds})
    return rows


# ---------------------------------------------------------------------------
# Soundness case analysis


@dataclass(frozen=True)
class SoundnessCase:
    """Which soundness case a measured ``(p_Gpass, p_psipass)`` falls in."""

    case: int
    epsilon: float
    bound_name: str
    bound: float


def measured_epsilon(p_gpass: float, p_psipass: float, floor: float = 1e-9) -> float:
    """``1 - min(p_Gpass, p_psipass)``, kept inside ``(0, 1)``."""
    eps = 1.0 - min(p_gpass, p_psipass)
    return min(max(eps, floor), 1.0 - floor)


def soundness_case(p_gpass: float, p_psipass: float, q: float, a: float, b: float,
                   epsilon: float | None = None) -> SoundnessCase:
    """Pick the applicable bound.

    With ``epsilon`` omitted it is measured as ``1 - min(p_G, p_psi)``; a test
    sitting exactly at ``1 - eps`` then counts as failing, so the case reflects
    which test the adversary loses on.
    """
    if epsilon is None:
        eps = measured_epsilon(p_gpass, p_psipass)
        g_ok = p_gpass > 1 - eps + 1e-12
        psi_ok = p_psipass > 1 - eps + 1e-12
        if 1 - min(p_gpass, p_psipass) < 1e-9:
            g_ok = psi_ok = True
    else:
        eps = epsilon
        g_ok = p_gpass >= 1 - eps
        psi_ok = p_psipass >= 1 - eps
    params = RateParams(eps, q, a, b)
    bs = bound_set(params)
    if g_ok and not psi_ok:
        return SoundnessCase(1, eps, "beta1", bs.beta1)
    if psi_ok and not g_ok:
        return SoundnessCase(2, eps, "beta1", bs.beta1)
    if not (g_ok or psi_ok):
        return SoundnessCase(3, eps, "beta2", bs.beta2)
    return SoundnessCase(4, eps, "beta3", bs.beta3)


def branch_bound(p_compute_max: float, p_gpass: float, p_psipass: float, q: float) -> float:
    """``q p_c + (1-q)/2 (p_G + p_psi)``: the acceptance identity the case bounds relax."""
    return q * p_compute_max + (1 - q) / 2 * (p_gpass + p_psipass)


def q_grid(n: int = 100) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)
