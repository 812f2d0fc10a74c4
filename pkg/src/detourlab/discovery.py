"""Entropy-based causal coefficients, transfer entropy, and greedy parent
selection from discrete interaction logs.

All estimators are plain plug-in (maximum-likelihood) counts; zero-count
configurations contribute nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distribution import Distribution
from .errors import CardinalityOne, InsufficientData, ZeroBaseEntropy

#: documented plug-in estimation tolerance at n >= 1e4
EST_TOL = 0.01


@dataclass
class SampleLog:
    """Aligned discrete time series, one column per variable."""

    columns: dict[str, np.ndarray]
    cards: dict[str, int]

    def __post_init__(self):
        lengths = {len(col) for col in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError("all columns must have equal length")
        for name, col in self.columns.items():
            card = self.cards[name]
            if len(col) and (col.min() < 0 or col.max() >= card):
                raise ValueError(f"{name} values exceed cardinality {card}")

    @property
    def length(self) -> int:
        return len(next(iter(self.columns.values())))


@dataclass(frozen=True)
class EdgeCandidate:
    source: str
    target: str
    coefficient: float
    kind: str  # "intra" or "inter"


def _joint_entropy(*cols: np.ndarray) -> float:
    if not cols:
        return 0.0
    stacked = np.column_stack(cols)
    _, counts = np.unique(stacked, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def _cond_entropy(y: np.ndarray, cond: Sequence[np.ndarray]) -> float:
    if not cond:
        return _joint_entropy(y)
    return _joint_entropy(y, *cond) - _joint_entropy(*cond)


def causal_coefficient(x: Distribution, y: Distribution) -> float:
    """Normalized-entropy difference H(X)/ln|X| - H(Y)/ln|Y| (antisymmetric)."""
    from .surprise import entropy

    if len(x) < 2 or len(y) < 2:
        raise CardinalityOne("causal coefficient needs cardinality >= 2")
    return entropy(x) / math.log(len(x)) - entropy(y) / math.log(len(y))


def causal_action_coefficient(o_samples: np.ndarray,
                              d_samples: np.ndarray) -> float:
    """Plug-in mutual-information reduction H(O) - H(O|D)."""
    o = np.asarray(o_samples)
    d = np.asarray(d_samples)
    return _joint_entropy(o) - _cond_entropy(o, [d])


def _lagged(series: np.ndarray, lag: int, n: int) -> list[np.ndarray]:
    return [series[lag - k - 1: n - k - 1] for k in range(lag)]


def transfer_entropy(x_series: np.ndarray, y_series: np.ndarray,
                     lag: int = 1) -> float:
    """Entropy reduction of Y's next value from X's past, beyond Y's own past."""
    x = np.asarray(x_series)
    y = np.asarray(y_series)
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if len(y) - lag < 2 or len(x) != len(y):
        raise InsufficientData("series too short for the requested lag")
    target = y[lag:]
    y_past = _lagged(y, lag, len(y))
    x_past = _lagged(x, lag, len(x))
    return _cond_entropy(target, y_past) - _cond_entropy(target, y_past + x_past)


def normalized_transfer_entropy(act_series: np.ndarray,
                                obs_series: np.ndarray,
                                conditioning: Sequence[np.ndarray] = ()
                                ) -> float:
    """Fraction of H(Obs_{t+1} | Obs_t) removed by the action and extras."""
    obs = np.asarray(obs_series)
    act = np.asarray(act_series)
    if len(obs) < 2:
        raise InsufficientData("need at least two observations")
    target, own_past = obs[1:], obs[:-1]
    base = _cond_entropy(target, [own_past])
    if base <= 1e-12:
        raise ZeroBaseEntropy("target already deterministic given its past")
    extras = [np.asarray(c)[:-1] for c in conditioning]
    reduced = _cond_entropy(target, [own_past, act[:-1], *extras])
    value = (base - reduced) / base
    return min(1.0, max(0.0, value))


def forward_select(log: SampleLog, target: str,
                   candidates: Iterable[str],
                   threshold: float = 0.05) -> list[str]:
    """Greedy parent selection for target at t+1 from slice-t candidates.

    At each round the candidate with the largest normalized marginal entropy
    reduction is added; the loop stops when the best gain drops below the
    threshold or the residual entropy hits zero. Ties break by variable name,
    so the result is independent of candidate ordering.
    """
    if log.length < 2:
        raise InsufficientData("log too short for lag-1 selection")
    y = log.columns[target][1:]
    pool = sorted(set(candidates))
    selected: list[str] = []
    cond: list[np.ndarray] = []
    while pool:
        base = _cond_entropy(y, cond)
        if base <= 1e-12:
            break
        best_name, best_gain = None, -math.inf
        for name in pool:
            series = log.columns[name][:-1]
            gain = (base - _cond_entropy(y, cond + [series])) / base
            if gain > best_gain:
                best_name, best_gain = name, gain
        if best_gain < threshold:
            break
        selected.append(best_name)
        cond.append(log.columns[best_name][:-1])
        pool.remove(best_name)
    return selected


def empirical_distribution(col: np.ndarray, card: int) -> Distribution:
    counts = np.bincount(np.asarray(col), minlength=card).astype(float)
    return Distribution.from_probs(tuple(counts / counts.sum()))


def discover_structure(log: SampleLog, obs_vars: Sequence[str],
                       action_vars: Sequence[str],
                       threshold: float = 0.05) -> list[EdgeCandidate]:
    """Edge report: greedy inter-temporal parents plus intra coefficients."""
    edges: list[EdgeCandidate] = []
    candidates = list(obs_vars) + list(action_vars)
    for target in obs_vars:
        parents = forward_select(log, target, candidates, threshold)
        y = log.columns[target][1:]
        cond: list[np.ndarray] = []
        for parent in parents:
            base = _cond_entropy(y, cond)
            series = log.columns[parent][:-1]
            gain = (base - _cond_entropy(y, cond + [series])) / base
            edges.append(EdgeCandidate(parent, target, gain, "inter"))
            cond.append(series)
    for a in obs_vars:
        for b in obs_vars:
            if a >= b:
                continue
            c = causal_coefficient(
                empirical_distribution(log.columns[a], log.cards[a]),
                empirical_distribution(log.columns[b], log.cards[b]))
            source, sink = (a, b) if c > 0 else (b, a)
            if abs(c) > threshold:
                edges.append(EdgeCandidate(source, sink, abs(c), "intra"))
    return edges
