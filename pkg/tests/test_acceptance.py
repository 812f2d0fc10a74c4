"""End-to-end acceptance suite.

Each test prints one [criterion N] PASS/FAIL line. Criteria 6-9 share a
module-scoped fixture of 20 pinned learning runs (seeds 0..19), so the first
of those tests pays the simulation cost for all of them.
"""

import dataclasses
import itertools
import math
import time

import numpy as np
import pytest

from detourlab import agent, cli, discovery, environment as env
from detourlab import network as nw, surprise, transitions
from detourlab.config import ExperimentConfig
from detourlab.distribution import Distribution
from detourlab.rng import substream

N_SEEDS = 20
EVAL_EPOCHS = 5
SURPRISE_CAP = cli.SURPRISE_CAP


def report(num, desc, ok, elapsed):
    status = "PASS" if ok else "FAIL"
    print(f"\n[criterion {num:2d}] {status} ({elapsed:.1f}s): {desc}")
    assert ok, f"criterion {num} failed: {desc}"


# --- shared learning-run fixture (criteria 6-9) ------------------------------

@pytest.fixture(scope="module")
def learning_runs():
    world = env.WorldConfig()
    params = agent.AgentParams()
    runs = {}
    for seed in range(N_SEEDS):
        net_post, summaries = agent.run_learning_process(world, params, seed)
        runs[seed] = (net_post, summaries)
    return runs


def first_detection(summaries):
    for s in summaries:
        if s.detected:
            return s
    return None


# --- 1: CPT validity ---------------------------------------------------------

def test_criterion_1_cpt_validity():
    t0 = time.perf_counter()
    ok = True
    builders = {
        "D": lambda sf, sa: transitions.depth_matrix(sf),
        "HA": transitions.heading_matrix,
        "BT": transitions.bt_matrix,
        "TVF": lambda sf, sa: transitions.tvf_matrix(sa),
    }
    for var, build in builders.items():
        for sf in range(nw.N_SF):
            for sa in range(nw.N_SA):
                m = build(sf, sa)
                ok &= bool(np.all(m >= 0.0))
                ok &= float(np.max(np.abs(m.sum(axis=0) - 1.0))) <= 1e-9
    net = nw.initial_network()
    for var in nw.OBS_VARS:
        t = net.cpts[var].table
        ok &= float(np.max(np.abs(t.sum(axis=-1) - 1.0))) <= 1e-9
    for sf in range(nw.N_SF):
        for sa in range(nw.N_SA):
            f1, f1m, f1p = transitions._heading_f(sf, sa)[:3]
            ok &= abs(f1 + f1m + f1p - 1.0) <= 1e-12
    elapsed = time.perf_counter() - t0
    report(1, "all CPT columns stochastic at 55 action pairs; "
              "F1 + F1- + F1+ = 1", ok and elapsed < 1.0, elapsed)


# --- 2: surprise theory ------------------------------------------------------

REFS = (
    Distribution.from_probs((0.2, 0.3, 0.5)),
    Distribution.from_probs((0.7, 0.2, 0.1)),
    Distribution.from_probs((0.05, 0.1, 0.15, 0.3, 0.4)),
)


def test_criterion_2_surprise_theory():
    t0 = time.perf_counter()
    ok = all(surprise.surprise_divergence(p, p) == 0.0 for p in REFS)

    rng = np.random.default_rng(20240817)
    for _ in range(1000):
        k = int(rng.integers(2, 8))
        # keep the reference bounded away from zero so Q's support is covered
        p = Distribution.from_probs(tuple(
            (rng.dirichlet(np.ones(k)) + 1e-4) / (1.0 + k * 1e-4)))
        q = Distribution.from_probs(tuple(rng.dirichlet(np.ones(k))))
        v = surprise.information_dispersion(p)
        if v == 0.0:
            continue
        lhs = surprise.surprise_divergence(q, p)
        rhs = (surprise.kl_divergence(q, p)
               + surprise.entropy(q) - surprise.entropy(p)) / math.sqrt(v)
        ok &= abs(lhs - rhs) <= 1e-9

    for i, p in enumerate(REFS):
        _, ks_p = surprise.normality_mc_check(p, n=10_000, reps=500,
                                              seed=1000 + i)
        ok &= ks_p > 0.01
        # more reps here than the KS check: the binomial noise of the
        # rejection rate at reps=500 is on the order of the tolerance
        rate = surprise.h0_rejection_rate(p, n=10_000, reps=2000,
                                          alpha=0.05, seed=2000 + i)
        ok &= abs(rate - 0.05) <= 0.02
    elapsed = time.perf_counter() - t0
    report(2, "Ds(P||P)=0; reformulation identity 1e-9 x1000; "
              "normality KS p>0.01; H0 rate 0.05+-0.02",
           ok and elapsed < 60.0, elapsed)


# --- 3: influence probability ------------------------------------------------

def test_criterion_3_influence_probability():
    t0 = time.perf_counter()
    ok = surprise.influence_probability(0.0) == 0.5
    grid = np.linspace(-40.0, 40.0, 4001)
    vals = np.array([surprise.influence_probability(float(x)) for x in grid])
    ok &= bool(np.all(np.diff(vals) >= 0.0))
    ok &= vals[0] < 1e-12 and vals[-1] > 1.0 - 1e-12
    for x in np.linspace(0.0, 8.0, 1000):
        a = surprise.influence_probability(float(x))
        b = surprise.influence_probability(float(-x))
        ok &= abs(a + b - 1.0) <= 1e-12
    elapsed = time.perf_counter() - t0
    report(3, "P(HV=0|0)=0.5; monotone limits 0 and 1; antisymmetry 1e-12",
           ok and elapsed < 1.0, elapsed)


# --- 4: inference correctness ------------------------------------------------

def test_criterion_4_inference_vs_bruteforce():
    t0 = time.perf_counter()
    net = nw.initial_network()
    u_tab = nw.utility_table()  # (SF, SA, 5, 11, 2, 2)
    all_obs = [nw.DiscreteObservation(d, ha, bt, tvf)
               for d in range(5) for ha in range(11)
               for bt in range(2) for tvf in range(2)]
    actions = [nw.DiscreteAction(sf, sa)
               for sf in range(nw.N_SF) for sa in range(nw.N_SA)]

    # Per-action merge structure of the utility pushforward, precomputed once.
    merge = {}
    for act in actions:
        values = u_tab[act.step_forward, act.step_aside].ravel()
        order = np.argsort(values, kind="stable")
        sv = values[order]
        gaps = np.diff(sv)
        # distinct utility values must be unambiguously separated
        assert np.all((gaps <= 1e-12) | (gaps > 2e-9))
        starts = np.concatenate(([0], np.flatnonzero(gaps > 1e-9) + 1))
        merge[act] = (order, sv, starts)

    max_joint = max_eu = max_mass = max_label = 0.0
    for obs in all_obs:
        for act in actions:
            cols = [np.asarray(net.obs_column(v, obs, act))
                    for v in nw.OBS_VARS]
            joint = (cols[0][:, None, None, None]
                     * cols[1][None, :, None, None]
                     * cols[2][None, None, :, None]
                     * cols[3][None, None, None, :])
            got = np.asarray(
                nw.predict_joint(net, obs, act).probs).reshape(5, 11, 2, 2)
            max_joint = max(max_joint, float(np.max(np.abs(got - joint))))

            u_slice = u_tab[act.step_forward, act.step_aside]
            eu = float(np.sum(joint * u_slice))
            max_eu = max(max_eu,
                         abs(nw.expected_utility(net, obs, act) - eu))

            order, sv, starts = merge[act]
            jm = joint.ravel()[order]
            masses = np.add.reduceat(jm, starts)
            wsum = np.add.reduceat(jm * sv, starts)
            labels = np.where(masses > 0.0,
                              wsum / np.maximum(masses, 1e-300), sv[starts])
            dist = nw.utility_distribution(net, obs, act)
            assert len(dist) == len(masses)
            max_mass = max(max_mass, float(np.max(np.abs(
                np.asarray(dist.probs) - masses))))
            max_label = max(max_label, float(np.max(np.abs(
                np.asarray(dist.outcomes, dtype=float) - labels))))
    ok = max(max_joint, max_eu, max_mass, max_label) <= 1e-9
    elapsed = time.perf_counter() - t0
    report(4, f"predict_joint/expected_utility/utility_distribution vs "
              f"brute force on 220x55 pairs (max err "
              f"{max(max_joint, max_eu, max_mass, max_label):.2e})",
           ok and elapsed < 30.0, elapsed)


# --- 5: environment soundness -------------------------------------------------

def _slab_hit(cfg, pos):
    """Independent open-set test: agent body intersects the barrier."""
    hw = cfg.agent_width / 2.0
    x, y = pos
    return (abs(x - cfg.barrier_start[0]) < hw
            and y + hw > min(cfg.barrier_start[1], cfg.barrier_end[1])
            and y - hw < max(cfg.barrier_start[1], cfg.barrier_end[1]))


def _free_position(cfg, rng):
    while True:
        pos = (float(rng.uniform(0.0, cfg.x_max)),
               float(rng.uniform(0.0, cfg.y_max)))
        if not _slab_hit(cfg, pos):
            return pos


def test_criterion_5_environment_soundness():
    t0 = time.perf_counter()
    cfg = env.WorldConfig()
    rng = np.random.default_rng(55)
    state = env.WorldState.initial(cfg)
    ok, clipped_seen = True, 0
    for step in range(100_000):
        act = nw.DiscreteAction(int(rng.integers(nw.N_SF)),
                                int(rng.integers(nw.N_SA)))
        state, _, _ = env.env_step(state, act, rng)
        x, y = state.agent_position
        ok &= 0.0 <= x <= cfg.x_max and 0.0 <= y <= cfg.y_max
        ok &= not _slab_hit(cfg, (x, y))
        if abs(x - (cfg.barrier_start[0] - cfg.agent_width / 2.0)) < 1e-12:
            clipped_seen += 1
        if step % 200 == 199:
            state = env.WorldState(_free_position(cfg, rng), cfg)
    ok &= clipped_seen > 0  # barrier actually exercised

    # clipping against a bisection oracle
    max_err = 0.0
    for _ in range(2000):
        start = _free_position(cfg, rng)
        cand = (start[0] + float(rng.uniform(-2.5, 2.5)),
                start[1] + float(rng.uniform(-2.5, 2.5)))
        got = env._barrier_clip(cfg, start, cand)
        ts = np.linspace(0.0, 1.0, 2049)
        pos = lambda t: (start[0] + t * (cand[0] - start[0]),
                         start[1] + t * (cand[1] - start[1]))
        hits = [_slab_hit(cfg, pos(t)) for t in ts]
        if not any(hits):
            expect = cand
        else:
            i = hits.index(True)
            lo, hi = ts[i - 1], ts[i]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _slab_hit(cfg, pos(mid)):
                    hi = mid
                else:
                    lo = mid
            expect = pos(lo)
        max_err = max(max_err, abs(got[0] - expect[0]),
                      abs(got[1] - expect[1]))
    ok &= max_err <= 1e-6
    elapsed = time.perf_counter() - t0
    report(5, f"1e5 random steps in bounds and barrier-free; clip vs "
              f"bisection oracle (max err {max_err:.2e})",
           ok and elapsed < 30.0, elapsed)


# --- 6: detection -------------------------------------------------------------

def test_criterion_6_detection(learning_runs):
    t0 = time.perf_counter()
    good, tvf_free = 0, True
    for seed in range(N_SEEDS):
        _, summaries = learning_runs[seed]
        det = first_detection(summaries)
        if det is not None and set(det.selected_variables) == {"BT", "D"}:
            good += 1
        for s in summaries:
            tvf_free &= "TVF" not in s.selected_variables

    world_nb = dataclasses.replace(env.WorldConfig(), barrier_exists=False)
    params = agent.AgentParams()
    nb_clean = 0
    for seed in range(N_SEEDS):
        net, summaries = agent.run_learning_process(world_nb, params, seed)
        if not net.has_hidden and not any(s.detected for s in summaries):
            nb_clean += 1
    ok = good >= 0.8 * N_SEEDS and tvf_free and nb_clean == N_SEEDS
    elapsed = time.perf_counter() - t0
    report(6, f"selected set == {{BT, D}} in {good}/{N_SEEDS} runs, "
              f"TVF never selected; no-barrier detections 0 in "
              f"{nb_clean}/{N_SEEDS}", ok and elapsed < 300.0, elapsed)


# --- 7: EM properties ----------------------------------------------------------

def test_criterion_7_em_properties(learning_runs):
    t0 = time.perf_counter()
    net0 = nw.initial_network()

    # insertion neutrality on random contexts
    spec = agent.HiddenVariableSpec(("D", "BT"))
    inserted = agent.insert_hidden_variable(net0, spec)
    rng = np.random.default_rng(77)
    neutral = True
    for _ in range(20):
        obs = nw.DiscreteObservation(int(rng.integers(5)),
                                     int(rng.integers(11)),
                                     int(rng.integers(2)),
                                     int(rng.integers(2)))
        act = nw.DiscreteAction(int(rng.integers(nw.N_SF)),
                                int(rng.integers(nw.N_SA)))
        before = np.asarray(nw.predict_joint(net0, obs, act).probs)
        after = np.asarray(nw.predict_joint(inserted, obs, act).probs)
        neutral &= float(np.max(np.abs(before - after))) <= 1e-12

    monotone = converged = uniform_unvisited = True
    for seed in range(N_SEEDS):
        _, summaries = learning_runs[seed]
        det = first_detection(summaries)
        if det is None:
            monotone = False
            continue
        net_h = agent.insert_hidden_variable(
            net0, agent.HiddenVariableSpec(det.selected_variables))
        fitted, log = agent.hard_weighted_em(net_h, det.records)
        monotone &= all(e["loglik_after"] >= e["loglik_before"] - 1e-9
                        for e in log)
        converged &= len(log) <= 50 and log[-1]["max_delta"] <= 1e-3
        visited = {tuple(r.obs_t.value_of(v) for v in fitted.hidden.parents)
                   for r in det.records}
        for config in itertools.product(
                *(range(c) for c in fitted.hidden.parent_cards)):
            if config not in visited:
                uniform_unvisited &= bool(
                    np.all(fitted.hidden.table[config] == 0.5))
    ok = neutral and monotone and converged and uniform_unvisited
    elapsed = time.perf_counter() - t0
    report(7, "insertion neutral 1e-12; loglik non-decreasing per M-step; "
              "unvisited HV configs exactly 0.5/0.5; converged <= 50 iters",
           ok and elapsed < 120.0, elapsed)


# --- 8: learned-model direction -------------------------------------------------

def test_criterion_8_learned_direction(learning_runs):
    t0 = time.perf_counter()
    good = 0
    for seed in range(N_SEEDS):
        net, _ = learning_runs[seed]
        if not net.has_hidden or net.hidden.parents != ("D", "BT"):
            continue
        h = net.hidden.table  # (D, BT, HV)
        cond_hv = h[1, 1, 1] > h[0, 0, 1]
        bt = net.cpts["BT"].table  # (BT_t, SF, SA, HV, BT_t1)
        cond_bt = float(bt[1, :, :, 1, 1].mean()) > float(
            bt[1, :, :, 0, 1].mean())
        good += int(cond_hv and cond_bt)
    ok = good >= 0.8 * N_SEEDS
    elapsed = time.perf_counter() - t0
    report(8, f"P(BT'=1|BT=1,HV=1) > P(BT'=1|BT=1,HV=0) and "
              f"P(HV=1|D=1,BT=1) > P(HV=1|D=0,BT=0) in {good}/{N_SEEDS} runs",
           ok, elapsed)


# --- 9: behavioral outcome -------------------------------------------------------

def _batch_metrics(epochs):
    recs = [r for e in epochs for r in e.records]
    return {
        "bt_events": float(np.mean(
            [sum(r.obs_t1.barrier_tactile for r in e.records)
             for e in epochs])),
        "cs_bt": float(np.mean(
            [min(r.per_variable["BT"].coefficient, SURPRISE_CAP)
             for r in recs])),
        "cs_d": float(np.mean(
            [min(r.per_variable["D"].coefficient, SURPRISE_CAP)
             for r in recs])),
        "c_u": float(np.mean(
            [min(abs(r.c_u), SURPRISE_CAP) for r in recs])),
        "reach": float(np.mean([e.reached_target for e in epochs])),
    }


def test_criterion_9_behavioral_outcome(learning_runs):
    t0 = time.perf_counter()
    world = env.WorldConfig()
    params = agent.AgentParams()
    wins = {k: 0 for k in ("bt_events", "cs_bt", "cs_d", "c_u", "reach")}
    for seed in range(N_SEEDS):
        net_post, _ = learning_runs[seed]
        pre = _batch_metrics(agent.run_epochs(
            nw.initial_network(), world, params, seed, EVAL_EPOCHS))
        post = _batch_metrics(agent.run_epochs(
            net_post, world, params, seed, EVAL_EPOCHS))
        for key in ("bt_events", "cs_bt", "cs_d", "c_u"):
            wins[key] += int(post[key] < pre[key])
        wins["reach"] += int(post["reach"] >= pre["reach"])
    ok = all(v >= 0.8 * N_SEEDS for v in wins.values())
    elapsed = time.perf_counter() - t0
    report(9, "post-learning decreases BT events "
              f"({wins['bt_events']}/{N_SEEDS}), BT surprise "
              f"({wins['cs_bt']}/{N_SEEDS}), depth surprise "
              f"({wins['cs_d']}/{N_SEEDS}), utility surprise "
              f"({wins['c_u']}/{N_SEEDS}); reach rate non-decreasing "
              f"({wins['reach']}/{N_SEEDS})",
           ok and elapsed < 600.0, elapsed)


# --- 10: causal-discovery sanity ---------------------------------------------------

def test_criterion_10_causal_discovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    x = rng.integers(0, 4, size=10_000)
    y = np.concatenate(([0], x[:-1]))  # y copies x with lag 1
    w = rng.integers(0, 4, size=10_000)
    ok = abs(discovery.transfer_entropy(x, y) - math.log(4.0)) <= 0.05
    ok &= abs(discovery.transfer_entropy(w, y)) <= 0.02

    base = ExperimentConfig()
    world = dataclasses.replace(base.world, agent_start=(5.5, 7.5))
    recovered = 0
    for seed in range(10):
        cfg = dataclasses.replace(base, seed=seed, world=world)
        log = cli.random_policy_log(cfg)
        hit = all(
            var in discovery.forward_select(
                log, var, (*nw.OBS_VARS, "SF", "SA"))
            for var in nw.OBS_VARS)
        recovered += int(hit)
    ok &= recovered >= 8
    elapsed = time.perf_counter() - t0
    report(10, f"TE recovers ln4 on copy chain and ~0 when independent; "
               f"self-edges recovered in {recovered}/10 seeds",
           ok and elapsed < 120.0, elapsed)


# --- 11: determinism ---------------------------------------------------------------

def test_criterion_11_replay_determinism(tmp_path):
    t0 = time.perf_counter()

    def cfg(seed, name, **kw):
        base = ExperimentConfig(seed=seed, output_dir=str(tmp_path / name),
                                epochs=3)
        small = dataclasses.replace(base.agent, epoch_budget=6,
                                    steps_per_epoch=60)
        disc = dataclasses.replace(base.discovery, samples=1500)
        return dataclasses.replace(base, agent=small, discovery=disc, **kw)

    nb_world = dataclasses.replace(ExperimentConfig().world,
                                   barrier_exists=False)
    bundles = [
        cli.cmd_run(cfg(11, "b1"), quiet=True),
        cli.cmd_run(cfg(12, "b2", world=nb_world), quiet=True),
        cli.cmd_learn(cfg(13, "b3"), quiet=True),
        cli.cmd_learn(cfg(14, "b4"), quiet=True),
        cli.cmd_discover(cfg(15, "b5"), quiet=True),
    ]
    ok = True
    for bundle in bundles:
        try:
            cli.cmd_replay(str(bundle), quiet=True)
        except Exception:
            ok = False
    elapsed = time.perf_counter() - t0
    report(11, "5 pinned bundles replay byte-for-byte",
           ok and elapsed < 120.0, elapsed)
