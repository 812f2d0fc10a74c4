"""Two-slice dynamic decision network: structure, CPTs, inference, MEU.

The network predicts the four discretized observation variables at t+1 from
their values at t and the two action categories, optionally mediated by one
binary hidden variable. Inference is exact enumeration over the 220 joint
next-slice outcomes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import transitions
from .distribution import Distribution
from .errors import ArityMismatch, MissingCPT, UnknownVariable

OBS_VARS = ("D", "HA", "BT", "TVF")
OBS_CARDS = {"D": 5, "HA": 11, "BT": 2, "TVF": 2}
HIDDEN_NAME = "HV"
N_SF = transitions.N_SF
N_SA = transitions.N_SA

#: mass tolerance for joint distributions and CPT columns
PROB_TOL = 1e-9
#: utility values closer than this are merged into one atom
UTILITY_MERGE_TOL = 1e-9


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str  # chance | decision | utility | hidden
    cardinality: Optional[int] = None


@dataclass(frozen=True)
class DiscreteObservation:
    depth: int
    heading_angle: int
    barrier_tactile: int
    target_in_visual_field: int

    def __post_init__(self):
        for value, card, label in (
            (self.depth, 5, "depth"),
            (self.heading_angle, 11, "heading_angle"),
            (self.barrier_tactile, 2, "barrier_tactile"),
            (self.target_in_visual_field, 2, "target_in_visual_field"),
        ):
            if not 0 <= value < card:
                raise ValueError(f"{label}={value} outside 0..{card - 1}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.depth, self.heading_angle, self.barrier_tactile,
                self.target_in_visual_field)

    def value_of(self, var: str) -> int:
        return self.as_tuple()[OBS_VARS.index(var)]


@dataclass(frozen=True)
class DiscreteAction:
    step_forward: int
    step_aside: int

    def __post_init__(self):
        if not 0 <= self.step_forward < N_SF:
            raise ValueError(f"step_forward={self.step_forward} outside 0..4")
        if not 0 <= self.step_aside < N_SA:
            raise ValueError(f"step_aside={self.step_aside} outside 0..10")


@dataclass
class ConditionalTable:
    """Dense CPT: table[parent config..., child value] = probability.

    Parent configurations are laid out in row-major order of the declared
    parent list; that ordering is part of the serialization contract.
    """

    child: str
    parents: tuple[str, ...]
    parent_cards: tuple[int, ...]
    child_card: int
    table: np.ndarray

    def __post_init__(self):
        expected = tuple(self.parent_cards) + (self.child_card,)
        if self.table.shape != expected:
            raise ArityMismatch(
                f"table shape {self.table.shape} != declared {expected}")

    def validate_columns(self, tol: float = PROB_TOL) -> None:
        sums = self.table.sum(axis=-1)
        if np.any(self.table < 0.0) or np.max(np.abs(sums - 1.0)) > tol:
            raise ValueError(f"CPT for {self.child} has invalid columns")

    def column(self, config: tuple[int, ...]) -> np.ndarray:
        if len(config) != len(self.parents):
            raise ArityMismatch(
                f"{self.child}: got {len(config)} parent values, "
                f"expected {len(self.parents)}")
        return self.table[config]

    def copy(self) -> "ConditionalTable":
        return ConditionalTable(self.child, self.parents, self.parent_cards,
                                self.child_card, self.table.copy())

    def to_json(self) -> dict:
        return {
            "child": self.child,
            "parents": list(self.parents),
            "parent_cards": list(self.parent_cards),
            "child_card": self.child_card,
            "probs": self.table.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConditionalTable":
        cards = tuple(data["parent_cards"])
        table = np.array(data["probs"], dtype=float).reshape(
            cards + (data["child_card"],))
        return cls(data["child"], tuple(data["parents"]), cards,
                   data["child_card"], table)


@dataclass
class TwoSliceNetwork:
    """The agent's model: one CPT per observation variable, optional hidden node.

    Observation CPTs have parents (own value at t, SF, SA) and, for the hidden
    variable's children, an extra trailing HV parent. The hidden CPT's parents
    are slice-t observation variables.
    """

    cpts: dict[str, ConditionalTable]
    hidden: Optional[ConditionalTable] = None

    def __post_init__(self):
        for var in OBS_VARS:
            if var not in self.cpts:
                raise MissingCPT(f"no CPT for {var}")

    @property
    def has_hidden(self) -> bool:
        return self.hidden is not None

    @property
    def hidden_parents(self) -> tuple[str, ...]:
        return self.hidden.parents if self.hidden else ()

    @property
    def hidden_children(self) -> tuple[str, ...]:
        return tuple(v for v in OBS_VARS
                     if HIDDEN_NAME in self.cpts[v].parents)

    def variables(self) -> list[VariableSpec]:
        specs = [VariableSpec(v, "chance", OBS_CARDS[v]) for v in OBS_VARS]
        specs.append(VariableSpec("SF", "decision", N_SF))
        specs.append(VariableSpec("SA", "decision", N_SA))
        specs.append(VariableSpec("U", "utility"))
        if self.has_hidden:
            specs.append(VariableSpec(HIDDEN_NAME, "hidden", 2))
        return specs

    def validate(self) -> None:
        for cpt in self.cpts.values():
            cpt.validate_columns()
        if self.hidden is not None:
            self.hidden.validate_columns()

    def copy(self) -> "TwoSliceNetwork":
        return TwoSliceNetwork(
            {name: cpt.copy() for name, cpt in self.cpts.items()},
            self.hidden.copy() if self.hidden else None)

    def hidden_prior(self, obs: DiscreteObservation) -> np.ndarray:
        """P(HV | its slice-t parents) for the given observation."""
        config = tuple(obs.value_of(v) for v in self.hidden.parents)
        return self.hidden.column(config)

    def obs_column(self, var: str, obs: DiscreteObservation,
                   act: DiscreteAction, hv: Optional[int] = None) -> np.ndarray:
        """P(var at t+1 | obs, act[, hv]) as a probability vector."""
        cpt = self.cpts[var]
        config = [obs.value_of(var), act.step_forward, act.step_aside]
        if HIDDEN_NAME in cpt.parents:
            if hv is None:
                raise ArityMismatch(f"{var} requires an HV value")
            config.append(hv)
        return cpt.column(tuple(config))

    def to_json(self) -> dict:
        doc = {
            "format": "detourlab-network",
            "version": 1,
            "obs_vars": list(OBS_VARS),
            "cpts": {v: self.cpts[v].to_json() for v in OBS_VARS},
            "hidden": self.hidden.to_json() if self.hidden else None,
        }
        return doc

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "TwoSliceNetwork":
        cpts = {v: ConditionalTable.from_json(data["cpts"][v])
                for v in data["obs_vars"]}
        hidden = (ConditionalTable.from_json(data["hidden"])
                  if data.get("hidden") else None)
        return cls(cpts, hidden)

    @classmethod
    def from_json_str(cls, text: str) -> "TwoSliceNetwork":
        return cls.from_json(json.loads(text))


def initial_network() -> TwoSliceNetwork:
    """Network with the fixed closed-form transition matrices."""
    builders = {
        "D": lambda sf, sa: transitions.depth_matrix(sf),
        "HA": transitions.heading_matrix,
        "BT": transitions.bt_matrix,
        "TVF": lambda sf, sa: transitions.tvf_matrix(sa),
    }
    cpts = {}
    for var, card in OBS_CARDS.items():
        table = np.zeros((card, N_SF, N_SA, card))
        for sf in range(N_SF):
            for sa in range(N_SA):
                m = builders[var](sf, sa)
                table[:, sf, sa, :] = m.T  # (t value, t+1 value)
        cpts[var] = ConditionalTable(var, (var, "SF", "SA"),
                                     (card, N_SF, N_SA), card, table)
    net = TwoSliceNetwork(cpts)
    net.validate()
    return net


# --- utility ---------------------------------------------------------------

def energy_forward(sf: int) -> float:
    return 1.0 + 0.1 * math.sqrt(sf)


def energy_aside(sa: int) -> float:
    return 1.0 + 0.1 * math.sqrt(abs(sa - 5))


def utility(obs: DiscreteObservation, act: DiscreteAction) -> float:
    """Immediate utility of an observation under the taken action."""
    energy = energy_forward(act.step_forward) + energy_aside(act.step_aside)
    if obs.barrier_tactile == 1:
        return -10.0 - energy
    return (-2.0 * obs.depth - abs(obs.heading_angle - 5)
            + 10.0 * obs.target_in_visual_field - energy)


_UTILITY_TABLE: Optional[np.ndarray] = None


def utility_table() -> np.ndarray:
    """U[sf, sa, d, ha, bt, tvf] over all actions and joint outcomes."""
    global _UTILITY_TABLE
    if _UTILITY_TABLE is None:
        u = np.zeros((N_SF, N_SA, 5, 11, 2, 2))
        for sf in range(N_SF):
            for sa in range(N_SA):
                act = DiscreteAction(sf, sa)
                for d in range(5):
                    for ha in range(11):
                        for bt in range(2):
                            for tvf in range(2):
                                u[sf, sa, d, ha, bt, tvf] = utility(
                                    DiscreteObservation(d, ha, bt, tvf), act)
        _UTILITY_TABLE = u
    return _UTILITY_TABLE


# --- exact inference -------------------------------------------------------

JOINT_OUTCOMES = tuple(
    (d, ha, bt, tvf)
    for d in range(5) for ha in range(11) for bt in range(2) for tvf in range(2))


def _joint_array(net: TwoSliceNetwork, obs: DiscreteObservation,
                 act: DiscreteAction,
                 hv_belief: Optional[Distribution]) -> np.ndarray:
    """Joint next-slice probabilities as an array of shape (5, 11, 2, 2)."""
    if net.has_hidden:
        if hv_belief is not None:
            p_hv = hv_belief.as_array()
        else:
            p_hv = net.hidden_prior(obs)
        cols = []
        for var in OBS_VARS:
            if var in net.hidden_children:
                col = np.stack([net.obs_column(var, obs, act, hv)
                                for hv in range(2)])
            else:
                col = np.broadcast_to(net.obs_column(var, obs, act),
                                      (2, OBS_CARDS[var]))
            cols.append(col)
        return np.einsum("h,ha,hb,hc,he->abce", p_hv, *cols)
    if hv_belief is not None:
        raise ArityMismatch("hv_belief supplied but network has no hidden node")
    cols = [net.obs_column(var, obs, act) for var in OBS_VARS]
    return np.einsum("a,b,c,e->abce", *cols)


def predict_joint(net: TwoSliceNetwork, obs: DiscreteObservation,
                  act: DiscreteAction,
                  hv_belief: Optional[Distribution] = None) -> Distribution:
    """Exact product-of-CPTs prediction of the next joint observation."""
    joint = _joint_array(net, obs, act, hv_belief)
    return Distribution(JOINT_OUTCOMES, tuple(joint.ravel()))


def predicted_marginal(net: TwoSliceNetwork, var: str,
                       obs: DiscreteObservation,
                       act: DiscreteAction) -> Distribution:
    """P(var at t+1 | obs, act), marginalizing the hidden node by its CPT."""
    if var not in OBS_VARS:
        raise UnknownVariable(var)
    if net.has_hidden and var in net.hidden_children:
        p_hv = net.hidden_prior(obs)
        col = sum(p_hv[hv] * net.obs_column(var, obs, act, hv)
                  for hv in range(2))
    else:
        col = net.obs_column(var, obs, act)
    return Distribution.from_probs(tuple(col))


def expected_utility(net: TwoSliceNetwork, obs: DiscreteObservation,
                     act: DiscreteAction) -> float:
    joint = _joint_array(net, obs, act, None)
    u = utility_table()[act.step_forward, act.step_aside]
    return float(np.sum(joint * u))


def expected_utilities_all_actions(net: TwoSliceNetwork,
                                   obs: DiscreteObservation) -> np.ndarray:
    """Expected utility for every (SF, SA) pair at once, shape (5, 11)."""
    cols = []
    for var in OBS_VARS:
        cpt = net.cpts[var]
        block = cpt.table[obs.value_of(var)]  # (SF, SA[, HV], card)
        if net.has_hidden and HIDDEN_NAME not in cpt.parents:
            block = np.broadcast_to(block[:, :, None, :],
                                    block.shape[:2] + (2,) + block.shape[-1:])
        cols.append(block)
    u = utility_table()
    if net.has_hidden:
        p_hv = net.hidden_prior(obs)
        return np.einsum("h,fsha,fshb,fshc,fshe,fsabce->fs", p_hv, *cols, u)
    return np.einsum("fsa,fsb,fsc,fse,fsabce->fs", *cols, u)


def select_action_meu(net: TwoSliceNetwork,
                      obs: DiscreteObservation) -> tuple[DiscreteAction, float]:
    """Exhaustive MEU over the 55 actions; ties go to the lowest (SF, SA)."""
    scores = expected_utilities_all_actions(net, obs)
    flat = int(np.argmax(scores))  # first occurrence = lexicographic lowest
    sf, sa = divmod(flat, N_SA)
    return DiscreteAction(sf, sa), float(scores[sf, sa])


def utility_distribution(net: TwoSliceNetwork, obs: DiscreteObservation,
                         act: DiscreteAction) -> Distribution:
    """Pushforward of the predicted joint through the utility function.

    Utility values equal within 1e-9 are merged into a single atom whose
    label is the probability-weighted mean of the merged values.
    """
    joint = _joint_array(net, obs, act, None).ravel()
    values = utility_table()[act.step_forward, act.step_aside].ravel()
    order = np.argsort(values, kind="stable")
    atoms: list[float] = []
    masses: list[float] = []
    weighted: list[float] = []
    for idx in order:
        v, m = float(values[idx]), float(joint[idx])
        if atoms and v - atoms[-1] <= UTILITY_MERGE_TOL:
            masses[-1] += m
            weighted[-1] += m * v
        else:
            atoms.append(v)
            masses.append(m)
            weighted.append(m * v)
    labels = tuple(w / m if m > 0.0 else a
                   for a, m, w in zip(atoms, masses, weighted))
    return Distribution(labels, tuple(masses))
