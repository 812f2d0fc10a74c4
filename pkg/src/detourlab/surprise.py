"""Information-theoretic primitives and the surprise calculus.

Natural log throughout. Division by a zero information dispersion is guarded:
when the reference distribution is uniform or degenerate nothing can be
surprising, so the coefficient is 0 unless the numerator itself is nonzero,
in which case the +infinity sentinel (math.inf) is returned. The sentinel
propagates through comparisons as "maximally surprising" and is never a NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .distribution import Distribution
from .errors import DegenerateReference, NegativeInput

INFINITE_SURPRISE = math.inf

#: slack for clamping tiny negative dispersion values caused by rounding
_DISPERSION_SLACK = 1e-12


def entropy(p: Distribution) -> float:
    """Shannon entropy in nats, with the 0*ln(0) := 0 convention."""
    arr = p.as_array()
    nz = arr[arr > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def information_dispersion(p: Distribution) -> float:
    """Variance of the surprisal -ln p(X) under p, in nats squared."""
    arr = p.as_array()
    nz = arr[arr > 0.0]
    h = -np.sum(nz * np.log(nz))
    v = float(np.sum(nz * np.log(nz) ** 2) - h * h)
    if v < -_DISPERSION_SLACK:
        raise AssertionError(f"dispersion {v} below numerical slack")
    # rounding can leave a tiny positive residue on uniform references
    return v if v > _DISPERSION_SLACK else 0.0


def cross_entropy(q: Distribution, p: Distribution) -> float:
    """H(Q,P) = -sum q_i ln p_i; +inf if q puts mass where p has none."""
    q.check_same_domain(p)
    qa, pa = q.as_array(), p.as_array()
    if np.any((qa > 0.0) & (pa == 0.0)):
        return INFINITE_SURPRISE
    mask = qa > 0.0
    return float(-np.sum(qa[mask] * np.log(pa[mask])))


def kl_divergence(q: Distribution, p: Distribution) -> float:
    """KL(Q||P) in nats; +inf sentinel on support violation."""
    q.check_same_domain(p)
    qa, pa = q.as_array(), p.as_array()
    if np.any((qa > 0.0) & (pa == 0.0)):
        return INFINITE_SURPRISE
    mask = qa > 0.0
    return float(np.sum(qa[mask] * np.log(qa[mask] / pa[mask])))


def surprise_divergence(q: Distribution, p: Distribution) -> float:
    """Standardized cross-entropy gap (H(Q,P) - H(P)) / sqrt(V_I(P))."""
    q.check_same_domain(p)
    num = cross_entropy(q, p)
    if not math.isinf(num):
        num -= entropy(p)
    v = information_dispersion(p)
    if v == 0.0:
        # Uniform or degenerate reference: surprising only if the numerator
        # is nonzero (e.g. q leaves p's support).
        return 0.0 if abs(num) <= 1e-9 else INFINITE_SURPRISE
    if math.isinf(num):
        return INFINITE_SURPRISE
    return num / math.sqrt(v)


def surprise_coefficient(outcome_index: int, p: Distribution) -> float:
    """Standardized surprisal |(-ln p_i) - H(p)| / sqrt(V_I(p)) of one outcome."""
    pi = p.prob_of(outcome_index)
    v = information_dispersion(p)
    if pi == 0.0:
        return INFINITE_SURPRISE
    if v == 0.0:
        return 0.0
    return abs(-math.log(pi) - entropy(p)) / math.sqrt(v)


def normal_cdf(x: float) -> float:
    if math.isinf(x):
        return 0.0 if x < 0 else 1.0
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def chi1_cdf(x: float) -> float:
    """CDF of the chi distribution with one degree of freedom: 2*Phi(x) - 1."""
    if x < 0:
        raise NegativeInput("chi distribution is supported on [0, inf)")
    return 2.0 * normal_cdf(x) - 1.0


def influence_probability(c_u: float) -> float:
    """P(HV=0 | C_U): belief that no latent influence occurred.

    Maps utility surprise from (-inf, inf) to [0, 1] through the chi(1) CDF,
    with P(HV=0 | 0) = 1/2 and the limits 0 and 1 at -inf/+inf.
    """
    if c_u < 0:
        return 0.5 - 0.5 * chi1_cdf(abs(c_u))
    return 0.5 + 0.5 * chi1_cdf(c_u)


@dataclass(frozen=True)
class SurpriseVerdict:
    """Outcome of one surprise hypothesis test."""

    coefficient: float
    p_value: float
    rejected: bool
    alpha: float


def surprise_test(outcome_index: int, p: Distribution, alpha: float) -> SurpriseVerdict:
    """Two-sided test of 'this outcome is not a surprise under p'.

    The statistic is the surprise coefficient; its null distribution is the
    half-normal, so p_value = 2*(1 - Phi(C_S)).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    c = surprise_coefficient(outcome_index, p)
    p_value = 0.0 if math.isinf(c) else 2.0 * (1.0 - normal_cdf(c))
    return SurpriseVerdict(c, p_value, p_value < alpha, alpha)


def _check_mc_reference(p: Distribution) -> np.ndarray:
    if information_dispersion(p) == 0.0:
        raise DegenerateReference("reference has zero information dispersion")
    return p.as_array()


def _scaled_divergences(p: Distribution, n: int, reps: int, seed) -> np.ndarray:
    """reps draws of sqrt(n) * D_S(P_hat || P) for samples of size n from p."""
    arr = _check_mc_reference(p)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, arr, size=reps)
    phat = counts / float(n)
    logp = np.where(arr > 0.0, np.log(np.maximum(arr, 1e-300)), 0.0)
    cross = -phat @ logp
    h = entropy(p)
    v = information_dispersion(p)
    return np.sqrt(n) * (cross - h) / math.sqrt(v)


def normality_mc_check(p: Distribution, n: int, reps: int, seed) -> tuple[float, float]:
    """Monte Carlo check that sqrt(n)*D_S(P_hat||P) is standard normal.

    Returns the Kolmogorov-Smirnov statistic and p-value against N(0,1).
    """
    if n < 100 or reps < 100:
        raise ValueError("need n >= 100 and reps >= 100")
    z = _scaled_divergences(p, n, reps, seed)
    ks = stats.kstest(z, "norm")
    return float(ks.statistic), float(ks.pvalue)


def h0_rejection_rate(p: Distribution, n: int, reps: int, alpha: float, seed) -> float:
    """Empirical rejection rate of the surprise test under H0.

    Each replication draws a size-n sample from p and rejects when the
    two-sided p-value of sqrt(n)*D_S(P_hat||P) falls below alpha.
    """
    z = np.abs(_scaled_divergences(p, n, reps, seed))
    pvals = 2.0 * (1.0 - stats.norm.cdf(z))
    return float(np.mean(pvals < alpha))
