"""Closed-form transition matrices of the agent's initial model.

Each matrix is column-stochastic: entry (i, j) is the probability of moving
to bin i at t+1 given bin j at t, for fixed action categories. The step
forward category is `sf` in 0..4 and the step aside category is `sa` in
0..10; both enter the formulas as their integer indices.
"""

from __future__ import annotations

import numpy as np

N_DEPTH = 5
N_HEADING = 11
N_SF = 5
N_SA = 11

#: balance between step-aside and step-forward influence on the heading bin
HEADING_MIX = 0.2


def depth_matrix(sf: int) -> np.ndarray:
    """5x5 depth-bin transition; larger sf pushes depth one bin down."""
    m = np.zeros((N_DEPTH, N_DEPTH))
    drop = sf / 6.0
    m[0, 0] = 0.9999
    m[1, 0] = 0.0001
    for j in range(1, N_DEPTH):
        m[j - 1, j] = drop
        m[j, j] = 1.0 - drop
    return m


def _heading_f(sf: int, sa: int, p: float = HEADING_MIX):
    """The F family: stay, clockwise and counterclockwise drift weights."""
    side = (sa - 5) / 5.0
    fwd = sf / 6.0
    f1 = p * (1.0 - abs(side)) + (1.0 - p) * (1.0 - fwd)
    f1m = p * max(0.0, side) + (1.0 - p) * fwd
    f1p = -p * min(0.0, side)
    f2m = -p * min(0.0, side) + (1.0 - p) * fwd
    f2p = p * max(0.0, side)
    f3m = -p * min(0.0, side)
    f3p = p * max(0.0, side) + (1.0 - p) * fwd
    f4m = p * max(0.0, side)
    f4p = -p * min(0.0, side) + (1.0 - p) * fwd
    return f1, f1m, f1p, f2m, f2p, f3m, f3p, f4m, f4p


def heading_matrix(sf: int, sa: int, p: float = HEADING_MIX) -> np.ndarray:
    """11x11 heading-bin transition built from the F family."""
    f1, f1m, f1p, f2m, f2p, f3m, f3p, f4m, f4p = _heading_f(sf, sa, p)
    m = np.zeros((N_HEADING, N_HEADING))
    rows = [
        [(0, f1), (1, f1m), (10, f4p)],
        [(0, f1p), (1, f1), (2, f1m)],
        [(1, f1p), (2, f1), (3, f2m)],
        [(2, f1p), (3, f1), (4, f2m)],
        [(3, f2p), (4, f1), (5, f2m)],
        [(4, f2p), (5, f1), (6, f3m)],
        [(5, f2p), (6, f1), (7, f3m)],
        [(6, f3p), (7, f1), (8, f4m)],
        [(7, f3p), (8, f1), (9, f4m)],
        [(8, f4p), (9, f1), (10, f4m)],
        [(0, f1m), (9, f4p), (10, f1)],
    ]
    for i, entries in enumerate(rows):
        for j, value in entries:
            m[i, j] = value
    return m


def tvf_matrix(sa: int) -> np.ndarray:
    """2x2 target-in-visual-field transition; leaving depends on sidestep size."""
    side = abs(sa - 5) / 5.0
    m = np.zeros((2, 2))
    m[0, 0] = 0.9
    m[1, 0] = 0.1
    m[0, 1] = 0.4 * side + 0.01 * (1.0 - side)
    m[1, 1] = 0.6 * side + 0.99 * (1.0 - side)
    return m


def bt_stay_clear(sf: int, sa: int) -> float:
    """C: probability of staying clear of the barrier; discourages sidesteps."""
    return 0.99 if sa == 5 else 0.95


def bt_leave(sf: int, sa: int) -> float:
    """L: probability of leaving contact; biased toward sa > 5."""
    if sa < 5:
        return 0.5
    if sa == 5:
        return 0.6
    return 0.65


def bt_matrix(sf: int, sa: int) -> np.ndarray:
    c = bt_stay_clear(sf, sa)
    left = bt_leave(sf, sa)
    return np.array([[c, left], [1.0 - c, 1.0 - left]])
