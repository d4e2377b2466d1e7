"""Acceptance gate: ten checks covering codec anchors, conservation laws,
LP optimality, deterministic consistency, bound dominance, gradient
correctness, desk-scale learning, sanity bands, and statistics.

Each test prints a single [PASS]/[FAIL] line with the measured numbers."""

import time

import numpy as np
import pytest
from oracle_lp import (
    discretization_budget,
    oracle_optimum,
    plan_grid,
    serial_scenario,
)
from test_codec import normalization_config
from test_lp import carrying_only_scenario
from test_ppo import fd_max_rel_err, gae_series_oracle, gradient_check_batch
from test_simulator import check_episode_invariants, run_traced_episode

from chainplan.chain import SCENARIO_NAMES
from chainplan.codec import Codec
from chainplan.harness import (
    EvalPlan,
    bootstrap_ci,
    evaluate_agent,
    gain_percent,
)
from chainplan.lp import (
    build_lp,
    forecast_plan,
    forecast_tables,
    perfect_information_bound,
    solve_lp,
)
from chainplan.ppo import PolicyBundle, PpoHyperparams, compute_gae, train
from chainplan.simulator import SupplyChainEnv, realize_episode
from chainplan.stochastic import derive_seed


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, f"criterion {number}: {detail}"


def test_criterion_01_codec_anchor_fidelity(catalog, capsys):
    t0 = time.perf_counter()
    codec = Codec(normalization_config())
    obs = np.zeros(27)
    obs[0], obs[10], obs[11] = 400.0, 330.0, 105.0
    obs[12], obs[13], obs[24], obs[26] = 280.0, 420.0, 138.0, 330.0
    norm = codec.normalize_observation(obs)
    expected = {0: 0.600, 10: 0.650, 11: -0.825, 12: -0.440, 13: -0.720,
                24: -0.310, 26: 0.833}
    rows_ok = all(round(norm[i], 3) == v for i, v in expected.items())

    action = -np.ones(14)
    action[1] = 0.050
    produced = codec.decode_action(action, np.zeros(8)).production[1]
    production_ok = abs(produced - 210.0) < 1e-9

    cut_codec = Codec(catalog["N0cl"].chain)
    stocks = np.zeros(8)
    stocks[2] = 295.0
    action = -np.ones(14)
    action[6], action[7] = 0.492, -0.864
    raw = cut_codec.decode_action(action, stocks)
    kept = stocks[2] - raw.shipments[4] - raw.shipments[5]
    cuts_ok = (abs(raw.shipments[4] - 200.0) <= 1.0
               and abs(raw.shipments[5] - 20.0) <= 1.0
               and abs(kept - 75.0) <= 1.0)
    elapsed = time.perf_counter() - t0
    ok = rows_ok and production_ok and cuts_ok and elapsed < 1.0
    verdict(capsys, 1, ok,
            f"normalization rows {'ok' if rows_ok else 'WRONG'}, production "
            f"0.050 -> {produced:.3f}, cuts -> "
            f"{raw.shipments[4]:.1f}/{raw.shipments[5]:.1f} keep {kept:.1f} "
            f"in {elapsed:.2f}s")


def test_criterion_02_codec_round_trip(catalog, capsys):
    chain = catalog["N20"].chain
    codec = Codec(chain)
    rng = np.random.default_rng(2024)
    senders = [(n, np.array(chain.outgoing(n)))
               for n in range(chain.n_nodes) if chain.outgoing(n)]
    trials = 10_000
    worst = 0.0
    for _ in range(trials):
        stocks = rng.uniform(1.0, chain.stock_cap)
        production = rng.uniform(0.0, chain.production_cap[chain.suppliers])
        shipments = np.zeros(chain.n_links)
        for node, out in senders:
            base = codec.raw_outbound_limit(node, stocks)
            total = rng.uniform(0.0, 1.0) * base
            split = rng.uniform(0.0, 1.0)
            shipments[out[0]] = split * total
            shipments[out[1]] = (1.0 - split) * total
        back = codec.decode_action(codec.encode_plan(production, shipments,
                                                     stocks), stocks)
        err = np.max(np.abs(back.production - production)
                     / chain.production_cap[chain.suppliers])
        for node, out in senders:
            base = codec.raw_outbound_limit(node, stocks)
            err = max(err, np.max(np.abs(back.shipments[out]
                                         - shipments[out])) / base)
        worst = max(worst, float(err))
    ok = worst <= 1e-9
    verdict(capsys, 2, ok,
            f"{trials} random feasible round trips, worst relative error "
            f"{worst:.2e} (bar 1e-9)")


def test_criterion_03_simulator_conservation(catalog, capsys):
    t0 = time.perf_counter()
    per_scenario = 59  # 59 x 17 = 1003 episodes
    episodes = 0
    for s, name in enumerate(SCENARIO_NAMES):
        spec = catalog[name]
        for k in range(per_scenario):
            env = run_traced_episode(spec, seed=derive_seed(3000 + s, k))
            check_episode_invariants(env)
            episodes += 1
    elapsed = time.perf_counter() - t0
    ok = episodes >= 1000
    verdict(capsys, 3, ok,
            f"mass balance, reward identity and stock bounds held on "
            f"{episodes} random-action episodes across "
            f"{len(SCENARIO_NAMES)} scenarios in {elapsed / 60:.1f} min")


def test_criterion_04_lp_matches_exhaustive_oracle(capsys):
    t0 = time.perf_counter()
    instances = 50
    worst_gap = 0.0
    for case in range(instances):
        rng = np.random.default_rng(4000 + case)
        n_nodes = int(rng.integers(2, 5))
        horizon = {2: int(rng.integers(3, 6)), 3: 3, 4: 2}[n_nodes]
        spc = 4 if n_nodes == 2 else 3
        spec = serial_scenario(rng, n_nodes, horizon)
        demands = rng.integers(0, 9, size=(horizon, 1)).astype(float)
        leads = np.ones((horizon, 1), dtype=np.int64)
        tleads = np.ones((horizon, spec.chain.n_links), dtype=np.int64)
        sol = solve_lp(build_lp(spec, demands, leads, tleads))
        assert sol.status == "optimal", f"instance {case} not optimal"
        best = oracle_optimum(spec, demands[:, 0], steps_per_channel=spc)
        budget = discretization_budget(spec, plan_grid(spec.chain, spc))
        assert sol.objective <= best + 1e-6, f"instance {case}: LP above oracle"
        assert best - sol.objective <= budget, f"instance {case}: gap > budget"
        worst_gap = max(worst_gap, (best - sol.objective) / max(budget, 1e-12))

    zero = carrying_only_scenario(horizon=8)
    sol = solve_lp(build_lp(zero, *forecast_tables(zero)))
    expected = 1.0 * (5 * 8 + 4 * 8) + 1.0 * (7 * 8 + 3 * 8)
    zero_ok = sol.status == "optimal" and abs(sol.objective - expected) <= 1e-6
    elapsed = time.perf_counter() - t0
    verdict(capsys, 4, zero_ok,
            f"{instances} tiny instances: LP <= grid-search optimum, gap "
            f"within discretization budget (worst {worst_gap:.0%} of budget); "
            f"zero-demand carrying cost {sol.objective:.6f} == {expected:.0f} "
            f"in {elapsed:.0f}s")


def test_criterion_05_deterministic_lp_replay(catalog, capsys):
    details = []
    ok = True
    for name in ("N0cl", "rN0cl"):
        spec = catalog[name]
        plan = forecast_plan(spec)
        report = evaluate_agent(plan, spec, EvalPlan((101, 102), 2))
        rel = np.max(np.abs(report.costs - plan.objective)) / plan.objective
        anchor = abs(plan.objective - 7_941_000.0) / 7_941_000.0
        ok = ok and rel <= 1e-6 and report.std == 0.0 and anchor <= 0.10
        details.append(f"{name} objective {plan.objective:,.0f} replay rel "
                       f"err {rel:.1e} std {report.std:.1f} "
                       f"({anchor:.1%} from 7,941k)")
    verdict(capsys, 5, ok, "; ".join(details))


def test_criterion_06_bound_dominance(catalog, capsys):
    t0 = time.perf_counter()
    plan = EvalPlan()  # 100 episodes per scenario
    untrained = PolicyBundle(27, 14, PpoHyperparams(), seed=0)
    details = []
    ok = True
    for name in ("N20", "rN50"):
        spec = catalog[name]
        bounds = np.array([
            perfect_information_bound(spec, realize_episode(spec, s))
            for s in plan.episode_seeds()])
        lp_rep = evaluate_agent(forecast_plan(spec), spec, plan)
        ppo_rep = evaluate_agent(untrained, spec, plan)
        slack = 1e-6
        lp_ok = bool((bounds <= lp_rep.costs + slack).all())
        ppo_ok = bool((bounds <= ppo_rep.costs + slack).all())
        ok = ok and lp_ok and ppo_ok
        details.append(
            f"{name}: bound mean {bounds.mean():,.0f} <= plan "
            f"(min margin {np.min(lp_rep.costs - bounds):,.0f}) and policy "
            f"(min margin {np.min(ppo_rep.costs - bounds):,.0f}) on all "
            f"{plan.n_episodes} episodes")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed <= 30 * 60
    verdict(capsys, 6, ok, "; ".join(details) + f" in {elapsed / 60:.1f} min")


def test_criterion_07_gradients_and_gae(capsys):
    bundle, batch = gradient_check_batch()
    fd_err = fd_max_rel_err(bundle, batch)

    rng = np.random.default_rng(77)
    rewards = rng.normal(size=50)
    values = rng.normal(size=50)
    dones = rng.random(50) < 0.1
    last = float(rng.normal())
    adv, _ = compute_gae(rewards, values, dones, np.array([last]),
                         gamma=0.99, lam=0.95)
    gae_err = float(np.max(np.abs(
        adv - gae_series_oracle(rewards, values, dones, last, 0.99, 0.95))))
    ok = fd_err <= 1e-4 and gae_err <= 1e-10
    verdict(capsys, 7, ok,
            f"loss gradients vs central finite differences max rel err "
            f"{fd_err:.2e} (bar 1e-4); GAE recursion vs series oracle max "
            f"err {gae_err:.2e} (bar 1e-10)")


def test_criterion_08_desk_scale_learning(catalog, capsys):
    t0 = time.perf_counter()
    spec = catalog["rN0cl"]
    res = train(spec, seed=1, total_steps=500_000, eval_every=18_000,
                eval_episodes=10)
    untrained = PolicyBundle(27, 14, PpoHyperparams(), seed=1)
    baseline = evaluate_agent(untrained, spec, EvalPlan((101,), 1)).mean
    bound = perfect_information_bound(
        spec, realize_episode(spec, EvalPlan((101,), 1).episode_seeds()[0]))
    elapsed = time.perf_counter() - t0
    improvement = 1.0 - res.best_cost / baseline
    ok = (not res.diverged and improvement >= 0.30
          and res.best_cost <= 1.5 * bound and elapsed <= 45 * 60)
    verdict(capsys, 8, ok,
            f"500k steps on rN0cl: best {res.best_cost:,.0f} vs untrained "
            f"{baseline:,.0f} ({improvement:.0%} improvement, bar 30%), "
            f"{res.best_cost / bound:.2f}x bound {bound:,.0f} (bar 1.5x), "
            f"{len(res.curve)} eval records, {elapsed / 60:.1f} min")


def test_criterion_09_untrained_policy_band(catalog, capsys):
    spec = catalog["N20"]
    bundle = PolicyBundle(27, 14, PpoHyperparams(), seed=0)
    env = SupplyChainEnv(spec)
    episodes = 30
    costs = np.empty(episodes)
    for k in range(episodes):
        obs = env.reset(seed=derive_seed(9100, k))
        rng = np.random.default_rng(derive_seed(9200, k))
        done = False
        while not done:
            action, _ = bundle.sample(obs, rng=rng)
            out = env.step(action)
            obs, done = out.observation, out.done
        costs[k] = env.total_cost
    mean = float(costs.mean())
    ok = 14e6 <= mean <= 24e6
    verdict(capsys, 9, ok,
            f"untrained policy sampling on N20: mean episode cost "
            f"{mean:,.0f} over {episodes} episodes, band [14M, 24M]")


def test_criterion_10_statistics(capsys):
    lo, hi = bootstrap_ci([5.0] * 30)
    zero_width = lo == 5.0 and hi == 5.0
    gain = gain_percent(10_298_000.0, 9_147_000.0)
    gain_ok = round(gain, 1) == 11.2
    ok = zero_width and gain_ok
    verdict(capsys, 10, ok,
            f"all-equal bootstrap interval width {hi - lo:.1f}; gain "
            f"10,298k vs 9,147k -> {gain:.4f}% rounds to {round(gain, 1)}")
