"""Learning orchestration: surprise monitoring, hidden-variable insertion,
hard weighted EM, and the epoch loop that learns to detour."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import environment as env
from . import network as nw
from .distribution import Distribution
from .errors import DuplicateHidden, EmptyData, NoHiddenVariable, UnknownVariable
from .rng import PHASE_EPOCH, substream
from .surprise import (INFINITE_SURPRISE, SurpriseVerdict, influence_probability,
                       surprise_coefficient, surprise_test)

#: per-record EM weight floor: w_0 = 1, w_i = 1 + |dU| >= 1
MIN_WEIGHT = 1.0


@dataclass(frozen=True)
class AgentParams:
    alpha: float = 0.2
    epsilon: float = 1e-3
    max_iters: int = 50
    epoch_budget: int = 30
    steps_per_epoch: int = 100
    min_rejections: int = 2
    map_prior_strength: float = 1.0
    imputation: str = "hard"  # "hard" (threshold) or "sampled"

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.imputation not in ("hard", "sampled"):
            raise ValueError(f"unknown imputation mode {self.imputation!r}")


@dataclass(frozen=True)
class StepRecord:
    t: int
    obs_t: nw.DiscreteObservation
    obs_t1: nw.DiscreteObservation
    action: nw.DiscreteAction
    meu: float
    realized_utility: float
    c_u: float
    influence_p0: float
    per_variable: dict[str, SurpriseVerdict]
    weight: float = 1.0


@dataclass(frozen=True)
class HiddenVariableSpec:
    """XM insertion request: the same variables act as slice-t parents and
    slice-(t+1) children of the binary hidden node."""

    variables: tuple[str, ...]
    name: str = nw.HIDDEN_NAME
    cardinality: int = 2


@dataclass
class EpochSummary:
    epoch: int
    records: list[StepRecord]
    detected: bool
    selected_variables: tuple[str, ...]
    rejection_counts: dict[str, int]
    reached_target: bool
    path: list[dict] = field(default_factory=list)  # trajectory rows


def utility_surprise(u_dist: Distribution, realized_u: float,
                     meu: float) -> float:
    """Signed standardized surprisal of the realized utility (sign of U - MEU)."""
    sign = 1.0 if realized_u >= meu else -1.0
    idx = None
    for i, atom in enumerate(u_dist.outcomes):
        if abs(atom - realized_u) <= 1e-9:
            idx = i
            break
    if idx is None or u_dist.probs[idx] == 0.0:
        return sign * INFINITE_SURPRISE
    return sign * surprise_coefficient(idx, u_dist)


def detect_step(net: nw.TwoSliceNetwork, obs_t: nw.DiscreteObservation,
                act: nw.DiscreteAction, obs_t1: nw.DiscreteObservation,
                alpha: float, meu: Optional[float] = None,
                t: int = 0, _cache: Optional[dict] = None) -> StepRecord:
    """Surprise bookkeeping for one transition.

    Computes the utility surprise against the predicted utility distribution,
    the influence probability, and a per-variable surprise test of each
    realized value against its predicted marginal. `_cache` memoizes the
    predictions per (obs_t, act) context; valid only for a fixed network.
    """
    if meu is None:
        _, meu = nw.select_action_meu(net, obs_t)
    key = obs_t.as_tuple() + (act.step_forward, act.step_aside)
    hit = _cache.get(key) if _cache is not None else None
    if hit is None:
        u_dist = nw.utility_distribution(net, obs_t, act)
        marginals = {var: nw.predicted_marginal(net, var, obs_t, act)
                     for var in nw.OBS_VARS}
        if _cache is not None:
            _cache[key] = (u_dist, marginals)
    else:
        u_dist, marginals = hit
    realized = nw.utility(obs_t1, act)
    c_u = utility_surprise(u_dist, realized, meu)
    p0 = influence_probability(c_u)
    verdicts = {var: surprise_test(obs_t1.value_of(var), marginals[var], alpha)
                for var in nw.OBS_VARS}
    return StepRecord(t, obs_t, obs_t1, act, meu, realized, c_u, p0, verdicts)


def rejection_counts(records: Sequence[StepRecord]) -> dict[str, int]:
    """Per-variable rejection tallies over negatively-surprising steps only."""
    counts = {var: 0 for var in nw.OBS_VARS}
    for rec in records:
        if rec.influence_p0 >= 0.5:
            continue
        for var, verdict in rec.per_variable.items():
            if verdict.rejected:
                counts[var] += 1
    return counts


def select_related_variables(records: Sequence[StepRecord],
                             min_rejections: int) -> tuple[str, ...]:
    """Variables rejected often enough to be tied to the latent influence."""
    counts = rejection_counts(records)
    return tuple(v for v in nw.OBS_VARS if counts[v] >= min_rejections)


def insert_hidden_variable(net: nw.TwoSliceNetwork,
                           spec: HiddenVariableSpec) -> nw.TwoSliceNetwork:
    """Add a binary hidden node with the XM topology.

    The hidden CPT starts uniform and each child's enlarged CPT replicates
    its old table across both hidden values, so prediction is unchanged until
    the first EM pass.
    """
    if net.has_hidden:
        raise DuplicateHidden("network already contains a hidden variable")
    if not spec.variables:
        raise UnknownVariable("hidden variable spec selects no variables")
    for var in spec.variables:
        if var not in nw.OBS_VARS:
            raise UnknownVariable(var)
    selected = tuple(v for v in nw.OBS_VARS if v in spec.variables)
    new = net.copy()
    parent_cards = tuple(nw.OBS_CARDS[v] for v in selected)
    hidden_table = np.full(parent_cards + (2,), 0.5)
    new.hidden = nw.ConditionalTable(spec.name, selected, parent_cards, 2,
                                     hidden_table)
    for var in selected:
        old = new.cpts[var]
        table = np.stack([old.table, old.table], axis=-2)
        new.cpts[var] = nw.ConditionalTable(
            var, old.parents + (spec.name,), old.parent_cards + (2,),
            old.child_card, table)
    return new


# --- hard weighted EM --------------------------------------------------------


class _EmIndex:
    """Precomputed flat-index views of the records for vectorized EM.

    Hidden CPT tables are addressed as (n_parent_configs, 2); each child's
    table as (n_own_configs, 2, child_card) with the own-config axis covering
    (own value at t, SF, SA).
    """

    def __init__(self, net: nw.TwoSliceNetwork, records: Sequence[StepRecord]):
        h = net.hidden
        pa_cols = [np.array([rec.obs_t.value_of(v) for rec in records])
                   for v in h.parents]
        self.pa_idx = np.ravel_multi_index(pa_cols, h.parent_cards)
        self.n_parent_configs = int(np.prod(h.parent_cards))
        sf = np.array([rec.action.step_forward for rec in records])
        sa = np.array([rec.action.step_aside for rec in records])
        self.children = tuple(net.hidden_children)
        self.cfg_idx, self.next_val, self.n_own_configs, self.cards = {}, {}, {}, {}
        for var in self.children:
            card = nw.OBS_CARDS[var]
            own = np.array([rec.obs_t.value_of(var) for rec in records])
            self.cfg_idx[var] = np.ravel_multi_index(
                (own, sf, sa), (card, nw.N_SF, nw.N_SA))
            self.next_val[var] = np.array(
                [rec.obs_t1.value_of(var) for rec in records])
            self.n_own_configs[var] = card * nw.N_SF * nw.N_SA
            self.cards[var] = card

    def scores(self, net: nw.TwoSliceNetwork) -> np.ndarray:
        """Per-record log P(HV=hv, children realizations | blanket), (n, 2)."""
        h_table = net.hidden.table.reshape(self.n_parent_configs, 2)
        out = np.log(np.maximum(h_table[self.pa_idx], 1e-300))
        for var in self.children:
            table = net.cpts[var].table.reshape(
                self.n_own_configs[var], 2, self.cards[var])
            cols = table[self.cfg_idx[var], :, self.next_val[var]]
            out = out + np.log(np.maximum(cols, 1e-300))
        return out


def _m_step(net: nw.TwoSliceNetwork, idx: _EmIndex, imputed: np.ndarray,
            weights: np.ndarray, prior: float) -> nw.TwoSliceNetwork:
    """Weighted MAP re-estimation of the hidden CPT and its children's CPTs."""
    new = net.copy()
    h_counts = np.full((idx.n_parent_configs, 2), prior)
    np.add.at(h_counts, (idx.pa_idx, imputed), weights)
    new.hidden = dataclasses.replace(
        net.hidden, table=(h_counts / h_counts.sum(axis=-1, keepdims=True))
        .reshape(net.hidden.table.shape))
    for var in idx.children:
        counts = np.full((idx.n_own_configs[var], 2, idx.cards[var]), prior)
        np.add.at(counts, (idx.cfg_idx[var], imputed, idx.next_val[var]),
                  weights)
        table = counts / counts.sum(axis=-1, keepdims=True)
        new.cpts[var] = dataclasses.replace(
            net.cpts[var], table=table.reshape(net.cpts[var].table.shape))
    return new


def _impute_posterior(net: nw.TwoSliceNetwork, idx: _EmIndex) -> np.ndarray:
    """Argmax of P(HV | obs_t, act, obs_t1) through HV's Markov blanket."""
    return np.argmax(idx.scores(net), axis=1)


def _complete_loglik(net: nw.TwoSliceNetwork, idx: _EmIndex,
                     imputed: np.ndarray, weights: np.ndarray) -> float:
    scores = idx.scores(net)
    return float(weights @ scores[np.arange(len(imputed)), imputed])


def _max_param_delta(a: nw.TwoSliceNetwork, b: nw.TwoSliceNetwork) -> float:
    delta = 0.0
    if a.has_hidden and b.has_hidden:
        delta = float(np.max(np.abs(a.hidden.table - b.hidden.table)))
    for var in nw.OBS_VARS:
        ta, tb = a.cpts[var].table, b.cpts[var].table
        if ta.shape == tb.shape:
            delta = max(delta, float(np.max(np.abs(ta - tb))))
        else:
            delta = math.inf
    return delta


def hard_weighted_em(net: nw.TwoSliceNetwork, records: Sequence[StepRecord],
                     epsilon: float = 1e-3, max_iters: int = 50,
                     map_prior: float = 1.0, imputation: str = "hard",
                     rng: Optional[np.random.Generator] = None
                     ) -> tuple[nw.TwoSliceNetwork, list[dict]]:
    """CPT estimation with hard imputation of the hidden variable.

    Iteration 0 imputes HV from the stored influence probabilities
    (HV = 1 iff P(HV=1 | C_U) > 0.5, or a Bernoulli draw in "sampled" mode)
    and runs one weighted MAP count with symmetric Dirichlet smoothing.
    Later iterations re-impute HV as the blanket-posterior argmax and
    re-estimate, until the largest CPT change drops to epsilon.
    """
    if not net.has_hidden:
        raise NoHiddenVariable("insert a hidden variable before running EM")
    if not records:
        raise EmptyData("EM needs at least one step record")
    weights = np.array([rec.weight for rec in records])
    p_hv1 = np.array([1.0 - rec.influence_p0 for rec in records])
    if imputation == "sampled":
        if rng is None:
            raise ValueError("sampled imputation requires an rng")
        imputed = (rng.random(len(records)) < p_hv1).astype(int)
    else:
        imputed = (p_hv1 > 0.5).astype(int)
    idx = _EmIndex(net, records)
    log: list[dict] = []
    current = net
    for iteration in range(max_iters):
        if iteration > 0:
            imputed = _impute_posterior(current, idx)
        ll_before = _complete_loglik(current, idx, imputed, weights)
        updated = _m_step(current, idx, imputed, weights, map_prior)
        ll_after = _complete_loglik(updated, idx, imputed, weights)
        delta = _max_param_delta(current, updated)
        log.append({"iteration": iteration, "max_delta": delta,
                    "loglik_before": ll_before, "loglik_after": ll_after})
        current = updated
        if delta <= epsilon:
            break
    return current, log


# --- epoch loop ---------------------------------------------------------------


def run_epoch(net: nw.TwoSliceNetwork, world: env.WorldConfig,
              params: AgentParams, seed: int, epoch: int) -> EpochSummary:
    """One MEU interaction episode with surprise monitoring.

    Ends when the discretized target-in-visual-field flag turns on or after
    steps_per_epoch steps. Deterministic given (seed, epoch).
    """
    state = env.WorldState.initial(world)
    obs_t = env.observe_discrete(state)
    records: list[StepRecord] = []
    path: list[dict] = []
    reached = False
    prev_utility: Optional[float] = None
    meu_cache: dict = {}
    pred_cache: dict = {}
    for t in range(params.steps_per_epoch):
        cached = meu_cache.get(obs_t.as_tuple())
        if cached is None:
            cached = nw.select_action_meu(net, obs_t)
            meu_cache[obs_t.as_tuple()] = cached
        act, meu = cached
        rng = substream(seed, PHASE_EPOCH, epoch, t)
        state, cont_obs, (sf_c, sa_c) = env.env_step(state, act, rng)
        obs_t1 = env.discretize(cont_obs, world)
        rec = detect_step(net, obs_t, act, obs_t1, params.alpha, meu=meu, t=t,
                          _cache=pred_cache)
        if prev_utility is not None:
            rec = dataclasses.replace(
                rec, weight=MIN_WEIGHT + abs(prev_utility - rec.realized_utility))
        records.append(rec)
        path.append({
            "step": t, "x": state.agent_position[0],
            "y": state.agent_position[1],
            "sf_cat": act.step_forward, "sa_cat": act.step_aside,
            "sf_cont": sf_c, "sa_cont": sa_c,
            "bt": cont_obs.barrier_tactile,
            "tvf": cont_obs.target_in_visual_field,
            "depth": cont_obs.depth, "ha": cont_obs.heading_angle,
        })
        prev_utility = rec.realized_utility
        obs_t = obs_t1
        if obs_t1.target_in_visual_field == 1:
            reached = True
            break
    counts = rejection_counts(records)
    selected = select_related_variables(records, params.min_rejections)
    return EpochSummary(epoch, records, bool(selected), selected, counts,
                        reached, path)


def run_learning_process(world: env.WorldConfig, params: AgentParams,
                         seed: int
                         ) -> tuple[nw.TwoSliceNetwork, list[EpochSummary]]:
    """Full learning loop: MEU epochs, one-time HV insertion, weighted EM.

    EM after each epoch re-estimates from all records accumulated since the
    insertion; the loop stops when the across-epoch CPT change falls to
    epsilon or the epoch budget runs out.
    """
    params.validate()
    net = nw.initial_network()
    summaries: list[EpochSummary] = []
    em_records: list[StepRecord] = []
    for epoch in range(params.epoch_budget):
        summary = run_epoch(net, world, params, seed, epoch)
        summaries.append(summary)
        if not net.has_hidden:
            if not summary.selected_variables:
                continue
            net = insert_hidden_variable(
                net, HiddenVariableSpec(summary.selected_variables))
        em_records.extend(summary.records)
        before = net
        rng = substream(seed, 3, epoch) if params.imputation == "sampled" else None
        net, _ = hard_weighted_em(
            net, em_records, epsilon=params.epsilon,
            max_iters=params.max_iters, map_prior=params.map_prior_strength,
            imputation=params.imputation, rng=rng)
        if _max_param_delta(before, net) <= params.epsilon:
            break
    return net, summaries


def run_epochs(net: nw.TwoSliceNetwork, world: env.WorldConfig,
               params: AgentParams, seed: int,
               n_epochs: int) -> list[EpochSummary]:
    """Fixed-network evaluation epochs (no learning)."""
    return [run_epoch(net, world, params, seed, epoch)
            for epoch in range(n_epochs)]
