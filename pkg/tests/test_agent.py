import dataclasses
import math

import numpy as np
import pytest

from detourlab import agent, environment as env, network as nw
from detourlab.config import ExperimentConfig
from detourlab.distribution import Distribution
from detourlab.errors import (DuplicateHidden, EmptyData, NoHiddenVariable,
                              UnknownVariable)

CFG = ExperimentConfig()


def test_utility_surprise_examples():
    degenerate = Distribution(outcomes=(-3.0,), probs=(1.0,))
    assert agent.utility_surprise(degenerate, -3.0, -3.0) == 0.0
    d = Distribution(outcomes=(-12.0, -2.0), probs=(0.1, 0.9))
    cu = agent.utility_surprise(d, -12.0, -3.0)
    assert cu == pytest.approx(-3.0, abs=1e-12)
    # realized value with no predicted mass: signed infinity
    assert agent.utility_surprise(d, -50.0, -3.0) == -math.inf
    assert agent.utility_surprise(d, 4.0, -3.0) == math.inf


def test_detect_step_unsurprising():
    net = nw.initial_network()
    obs = nw.DiscreteObservation(2, 5, 0, 0)
    act, meu = nw.select_action_meu(net, obs)
    # modal prediction: depth decreases, everything else stays
    obs_t1 = nw.DiscreteObservation(1, 5, 0, 0)
    rec = agent.detect_step(net, obs, act, obs_t1, alpha=0.05)
    assert not any(v.rejected for v in rec.per_variable.values())
    assert rec.influence_p0 > 0.5


def test_detect_step_first_bump_rejects_bt():
    net = nw.initial_network()
    obs = nw.DiscreteObservation(1, 5, 0, 0)
    act = nw.DiscreteAction(4, 5)
    obs_t1 = nw.DiscreteObservation(1, 5, 1, 0)
    rec = agent.detect_step(net, obs, act, obs_t1, alpha=0.05)
    assert rec.per_variable["BT"].rejected
    assert rec.influence_p0 < 0.5


def test_detect_step_blocked_depth_rejected_at_default_alpha():
    net = nw.initial_network()
    obs = nw.DiscreteObservation(1, 5, 1, 0)
    act = nw.DiscreteAction(4, 6)
    obs_t1 = nw.DiscreteObservation(1, 5, 1, 0)  # depth unchanged though SF=4
    rec = agent.detect_step(net, obs, act, obs_t1, alpha=CFG.agent.alpha)
    assert rec.per_variable["D"].rejected


def test_select_related_variables_thresholds():
    net = nw.initial_network()
    obs = nw.DiscreteObservation(1, 5, 0, 0)
    rec = agent.detect_step(net, obs, nw.DiscreteAction(4, 5),
                            nw.DiscreteObservation(1, 5, 1, 0), alpha=0.05)
    assert agent.select_related_variables([], 1) == ()
    assert agent.select_related_variables([rec], 1) == ("BT",)
    assert agent.select_related_variables([rec], 2) == ()
    # positively-surprising steps never count toward the tallies
    calm = dataclasses.replace(rec, influence_p0=0.9)
    assert agent.select_related_variables([calm], 1) == ()


def test_insert_hidden_variable_structure():
    net = nw.initial_network()
    new = agent.insert_hidden_variable(net, agent.HiddenVariableSpec(("BT", "D")))
    assert new.has_hidden
    assert new.hidden.parents == ("D", "BT")  # canonical variable order
    assert new.hidden_children == ("D", "BT")
    assert new.cpts["BT"].parents == ("BT", "SF", "SA", "HV")
    np.testing.assert_array_equal(new.hidden.table, 0.5)
    with pytest.raises(DuplicateHidden):
        agent.insert_hidden_variable(new, agent.HiddenVariableSpec(("BT",)))
    with pytest.raises(UnknownVariable):
        agent.insert_hidden_variable(net, agent.HiddenVariableSpec(()))
    with pytest.raises(UnknownVariable):
        agent.insert_hidden_variable(net, agent.HiddenVariableSpec(("XX",)))


def test_insertion_neutrality():
    net = nw.initial_network()
    new = agent.insert_hidden_variable(net, agent.HiddenVariableSpec(("BT", "D")))
    rng = np.random.default_rng(9)
    for _ in range(20):
        obs = nw.DiscreteObservation(int(rng.integers(5)), int(rng.integers(11)),
                                     int(rng.integers(2)), int(rng.integers(2)))
        act = nw.DiscreteAction(int(rng.integers(5)), int(rng.integers(11)))
        a = np.asarray(nw.predict_joint(net, obs, act).as_array())
        b = np.asarray(nw.predict_joint(new, obs, act).as_array())
        np.testing.assert_allclose(a, b, atol=1e-12)
        assert nw.expected_utility(net, obs, act) == pytest.approx(
            nw.expected_utility(new, obs, act), abs=1e-12)


@pytest.fixture(scope="module")
def bump_records():
    net = nw.initial_network()
    summary = agent.run_epoch(net, CFG.world, CFG.agent, seed=0, epoch=0)
    return summary.records


def test_em_requires_hidden_and_data(bump_records):
    net = nw.initial_network()
    with pytest.raises(NoHiddenVariable):
        agent.hard_weighted_em(net, bump_records)
    hv = agent.insert_hidden_variable(net, agent.HiddenVariableSpec(("BT", "D")))
    with pytest.raises(EmptyData):
        agent.hard_weighted_em(hv, [])


def test_em_unvisited_configs_stay_uniform(bump_records):
    net = agent.insert_hidden_variable(
        nw.initial_network(), agent.HiddenVariableSpec(("BT", "D")))
    learned, log = agent.hard_weighted_em(net, bump_records)
    visited = {(r.obs_t.depth, r.obs_t.barrier_tactile) for r in bump_records}
    for d in range(5):
        for bt in range(2):
            if (d, bt) not in visited:
                np.testing.assert_array_equal(learned.hidden.table[d, bt], [0.5, 0.5])
    assert log[-1]["max_delta"] <= CFG.agent.epsilon
    assert len(log) <= CFG.agent.max_iters


def test_em_loglik_nondecreasing_per_m_step(bump_records):
    net = agent.insert_hidden_variable(
        nw.initial_network(), agent.HiddenVariableSpec(("BT", "D")))
    _, log = agent.hard_weighted_em(net, bump_records)
    for entry in log:
        assert entry["loglik_after"] >= entry["loglik_before"] - 1e-9


def test_em_degenerate_imputation_keeps_other_slice_uniform(bump_records):
    net = agent.insert_hidden_variable(
        nw.initial_network(), agent.HiddenVariableSpec(("BT", "D")))
    records = [dataclasses.replace(r, influence_p0=0.9, weight=1.0)
               for r in bump_records]  # everything imputed HV=0
    learned, log = agent.hard_weighted_em(net, records, max_iters=1)
    np.testing.assert_array_equal(learned.cpts["BT"].table[:, :, :, 1, :], 0.5)


def test_run_epoch_deterministic():
    net = nw.initial_network()
    a = agent.run_epoch(net, CFG.world, CFG.agent, seed=5, epoch=2)
    b = agent.run_epoch(net, CFG.world, CFG.agent, seed=5, epoch=2)
    assert [r.obs_t1 for r in a.records] == [r.obs_t1 for r in b.records]
    assert a.path == b.path
    c = agent.run_epoch(net, CFG.world, CFG.agent, seed=6, epoch=2)
    assert a.path != c.path


def test_no_barrier_run_reaches_target_without_detection():
    world = dataclasses.replace(CFG.world, barrier_exists=False)
    net, summaries = agent.run_learning_process(world, CFG.agent, seed=0)
    assert not net.has_hidden
    assert all(not s.detected for s in summaries)
    assert summaries[0].reached_target


def test_em_weights_floor():
    assert agent.MIN_WEIGHT == 1.0
    net = nw.initial_network()
    summary = agent.run_epoch(net, CFG.world, CFG.agent, seed=1, epoch=0)
    assert all(r.weight >= agent.MIN_WEIGHT for r in summary.records)
