"""Continuous 2D world, restrictors, sensing, and the discretization layer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DomainViolation
from .network import DiscreteAction, DiscreteObservation

#: half-open step-forward sampling intervals per category; top edge closed
SF_INTERVALS = ((0.0, 0.5), (0.5, 1.0), (1.0, 1.5), (1.5, 2.0), (2.0, 2.5))
SA_INTERVALS = ((-2.5, -2.1), (-2.1, -1.6), (-1.6, -1.1), (-1.1, -0.7),
                (-0.7, -0.2), (-0.2, 0.2), (0.2, 0.7), (0.7, 1.1),
                (1.1, 1.6), (1.6, 2.1), (2.1, 2.5))

TACTILE_RANGE = 2.0
VISUAL_RANGE = 2.0


@dataclass(frozen=True)
class WorldConfig:
    x_max: float = 10.0
    y_max: float = 15.0
    target_position: tuple[float, float] = (10.0, 7.5)
    agent_start: tuple[float, float] = (1.0, 7.5)
    agent_orientation: float = 0.0
    agent_width: float = 0.75
    agent_shape: str = "square"
    barrier_exists: bool = True
    barrier_start: tuple[float, float] = (4.5, 1.5)
    barrier_end: tuple[float, float] = (4.5, 15.0)
    spike_separation: float = 0.5
    spike_length: float = 0.5  # rendering metadata; plays no geometric role

    @property
    def d_max(self) -> float:
        return math.hypot(self.x_max, self.y_max)

    def spikes(self) -> np.ndarray:
        """Spike points at spike_separation intervals, endpoints included."""
        x0, y0 = self.barrier_start
        x1, y1 = self.barrier_end
        length = math.hypot(x1 - x0, y1 - y0)
        n = int(round(length / self.spike_separation))
        ts = np.linspace(0.0, 1.0, n + 1)
        return np.column_stack([x0 + ts * (x1 - x0), y0 + ts * (y1 - y0)])


@dataclass(frozen=True)
class WorldState:
    agent_position: tuple[float, float]
    config: WorldConfig = field(default_factory=WorldConfig)

    @classmethod
    def initial(cls, config: Optional[WorldConfig] = None) -> "WorldState":
        config = config or WorldConfig()
        return cls(config.agent_start, config)


@dataclass(frozen=True)
class ContinuousObservation:
    depth: float
    heading_angle: float
    barrier_tactile: int
    target_in_visual_field: int


def step_forward(state: WorldState, s: float) -> tuple[float, float]:
    """Candidate position for a forward move of magnitude s."""
    if not 0.0 <= s <= 2.5:
        raise DomainViolation(f"step forward value {s} outside [0, 2.5]")
    x, y = state.agent_position
    a = state.config.agent_orientation
    return (x + s * math.cos(a), y + s * math.sin(a))


def step_aside(state: WorldState, s: float) -> tuple[float, float]:
    """Candidate position for a sideways move; sign selects the side."""
    if not -2.5 <= s <= 2.5:
        raise DomainViolation(f"step aside value {s} outside [-2.5, 2.5]")
    x, y = state.agent_position
    a = state.config.agent_orientation
    if s < 0:
        angle = a - math.pi / 2.0
    else:
        angle = a + math.pi / 2.0
    m = abs(s)
    return (x + m * math.cos(angle), y + m * math.sin(angle))


def _body_hits_barrier(config: WorldConfig, center: tuple[float, float]) -> bool:
    """True when the agent's open square body intersects the barrier segment."""
    if not config.barrier_exists:
        return False
    hw = config.agent_width / 2.0
    bx = config.barrier_start[0]
    y_lo = min(config.barrier_start[1], config.barrier_end[1])
    y_hi = max(config.barrier_start[1], config.barrier_end[1])
    cx, cy = center
    return (abs(cx - bx) < hw) and (cy + hw > y_lo) and (cy - hw < y_hi)


def _axis_interval(p0: float, d: float, lo: float, hi: float):
    """Parameter interval where p0 + t*d lies in the open interval (lo, hi)."""
    if d == 0.0:
        return (-math.inf, math.inf) if lo < p0 < hi else None
    t0, t1 = (lo - p0) / d, (hi - p0) / d
    return (min(t0, t1), max(t0, t1))


def _barrier_clip(config: WorldConfig, start: tuple[float, float],
                  candidate: tuple[float, float]) -> tuple[float, float]:
    """Largest prefix of the displacement whose swept body stays clear.

    The barrier is treated as a solid segment: the spike separation is
    smaller than the agent width, so no gap is passable.
    """
    if not config.barrier_exists:
        return candidate
    hw = config.agent_width / 2.0
    bx = config.barrier_start[0]
    y_lo = min(config.barrier_start[1], config.barrier_end[1])
    y_hi = max(config.barrier_start[1], config.barrier_end[1])
    dx = candidate[0] - start[0]
    dy = candidate[1] - start[1]
    ix = _axis_interval(start[0], dx, bx - hw, bx + hw)
    iy = _axis_interval(start[1], dy, y_lo - hw, y_hi + hw)
    if ix is None or iy is None:
        return candidate
    t_lo = max(ix[0], iy[0], 0.0)
    t_hi = min(ix[1], iy[1], 1.0)
    if t_lo >= t_hi or t_lo > 1.0:
        return candidate
    # Entry parameter: the body touches but does not cross at t_lo.
    return (start[0] + t_lo * dx, start[1] + t_lo * dy)


def apply_restrictors(state: WorldState, candidate: tuple[float, float],
                      action_kind: str = "") -> tuple[float, float]:
    """BarrierImpact clipping followed by the MapBounds veto.

    BarrierImpact replaces the displacement with the largest magnitude that
    does not drive the body into the barrier; MapBounds then denies the whole
    action (returning the original position) if the result leaves the map.
    """
    config = state.config
    clipped = _barrier_clip(config, state.agent_position, candidate)
    x, y = clipped
    if not (0.0 <= x <= config.x_max and 0.0 <= y <= config.y_max):
        return state.agent_position
    return clipped


def observe(state: WorldState) -> ContinuousObservation:
    """Noiseless sensors: depth, heading angle, tactile flag, visual flag."""
    config = state.config
    xa, ya = state.agent_position
    xt, yt = config.target_position
    depth = math.hypot(xt - xa, yt - ya)
    heading = math.atan2(yt - ya, xt - xa)
    bt = 0
    if config.barrier_exists:
        spikes = config.spikes()
        inf_norms = np.max(np.abs(spikes - np.array([xa, ya])), axis=1)
        bt = int(np.min(inf_norms) <= TACTILE_RANGE)
    tvf = int(depth <= VISUAL_RANGE and -math.pi / 2 <= heading <= math.pi / 2)
    return ContinuousObservation(depth, heading, bt, tvf)


def discretize(c: ContinuousObservation,
               config: Optional[WorldConfig] = None) -> DiscreteObservation:
    """Bin a continuous observation; bins are half-open, top edges clamped."""
    config = config or WorldConfig()
    d_bin = min(4, int(math.floor(5.0 * c.depth / config.d_max)))
    ha_bin = min(10, int(math.floor(
        11.0 * (c.heading_angle + math.pi) / (2.0 * math.pi))))
    return DiscreteObservation(d_bin, ha_bin, c.barrier_tactile,
                               c.target_in_visual_field)


def observe_discrete(state: WorldState) -> DiscreteObservation:
    return discretize(observe(state), state.config)


def action_to_continuous(act: DiscreteAction,
                         rng: np.random.Generator) -> tuple[float, float]:
    """Sample uniform continuous decision values inside each category interval."""
    sf_lo, sf_hi = SF_INTERVALS[act.step_forward]
    sa_lo, sa_hi = SA_INTERVALS[act.step_aside]
    return (float(rng.uniform(sf_lo, sf_hi)), float(rng.uniform(sa_lo, sa_hi)))


def env_step(state: WorldState, act: DiscreteAction,
             rng: np.random.Generator
             ) -> tuple[WorldState, ContinuousObservation, tuple[float, float]]:
    """One environment transition: SF then SA, each through both restrictors.

    Returns the new state, its observation, and the sampled continuous
    decision values.
    """
    sf_cont, sa_cont = action_to_continuous(act, rng)
    pos = apply_restrictors(state, step_forward(state, sf_cont), "forward")
    mid = replace(state, agent_position=pos)
    pos = apply_restrictors(mid, step_aside(mid, sa_cont), "aside")
    new_state = replace(state, agent_position=pos)
    return new_state, observe(new_state), (sf_cont, sa_cont)
