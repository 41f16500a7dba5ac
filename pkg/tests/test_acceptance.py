"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the run summary.
"""

import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

from planrefine import baselines, bench, domains, env, mtv, nn, ppo, socp
from planrefine.agent import ActorCritic, GnnPolicy
from planrefine.model import DynamicsParams, ValidationError
from planrefine.mtv import SegmentBoundary
from planrefine.ppo import PpoConfig, Sample, clip_schedule, ppo_loss
from gradcheck import max_relative_error

DESK_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "desk.json"
TRAIN_SEEDS = (1, 2, 3, 4, 5)
BENCH_SEED = 1

pytestmark = pytest.mark.slow


def test_mtv_matches_integration_oracle(verdict):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    compared, skipped, worst = 0, 0, 0.0
    while compared < 1000:
        U, V, k = rng.uniform(1, 20), rng.uniform(1, 20), rng.uniform(0.001, 0.2)
        cap = 0.9 * min(V, math.sqrt(2 * U / k))
        seg = SegmentBoundary(0.0, rng.uniform(0.1, 500), rng.uniform(0, cap), rng.uniform(0, cap),
                              DynamicsParams(U, V, k))
        closed = mtv.min_time_1d(seg)
        if closed.profile not in (mtv.BCB, mtv.BB):
            # overshooting boundary speeds: no closed form exists, redraw
            skipped += 1
            continue
        ref = mtv.oracle_min_time(seg)
        worst = max(worst, abs(closed.t_min - ref) / ref)
        compared += 1
    elapsed = time.perf_counter() - start
    verdict("1 MTV vs oracle", worst <= 1e-4 and elapsed <= 120,
            f"1000 segments, worst rel err {worst:.2e}, {skipped} redrawn, {elapsed:.0f}s")


def test_dragless_limit(verdict):
    U, V = 4.0, 12.0
    dyn = DynamicsParams(U, V, 1e-8)
    worst, profiles = 0.0, set()
    for d in np.geomspace(0.1, 500.0, 100):
        r = mtv.min_time_1d(SegmentBoundary(0.0, float(d), 0.0, 0.0, dyn))
        expected = 2 * math.sqrt(d / U) if d <= V * V / U else d / V + V / U
        worst = max(worst, abs(r.t_min - expected) / expected)
        profiles.add(r.profile)
    verdict("2 dragless limit", worst <= 1e-3 and profiles == {mtv.BB, mtv.BCB},
            f"100 distances, worst rel err {worst:.2e}, profiles {sorted(profiles)}")


def _random_instances(n, seed):
    rng = np.random.default_rng(seed)
    names = ["auv-2d", "norm-auv-2d", "onair-refuel", "sailing"]
    out = []
    while len(out) < n:
        name = names[len(out) % len(names)]
        try:
            out.append(domains.GENERATORS[name](domains.DomainSpec(name, 1), rng))
        except ValidationError:
            continue
    return out


def test_socp_contract(verdict):
    rng = np.random.default_rng(11)
    worst, violations, solved = 0.0, 0, 0
    for inst in _random_instances(100, 5):
        axis, norm = socp.nominal_bounds(inst)
        base = socp.solve_plan(inst, axis, norm)[1]
        if base is None:
            continue
        solved += 1
        worst = max(worst, socp.check_plan(inst, base))
        tight = socp.solve_plan(inst, axis * rng.uniform(0.05, 1.0, size=axis.shape), norm)[1]
        if tight is None:
            continue
        worst = max(worst, socp.check_plan(inst, tight))
        # solver round-off only
        if tight.makespan < base.makespan * (1 - 1e-7):
            violations += 1
    verdict("3 SOCP contract", solved == 100 and worst <= 1e-6 and violations == 0,
            f"{solved}/100 solved, worst violation {worst:.1e}, {violations} contraction violations")


def test_reward_contract(verdict, three_step):
    problems = []
    if abs(env.makespan_reward(100.0, 120.0) - 100 / 120) > 1e-12:
        problems.append("makespan branch")
    for n in (1, 2, 3):
        for ratios in itertools.product([-1.0, -0.5, -0.25, 0.0], repeat=n):
            if min(ratios) == 0.0:
                continue
            checks = [env.EdgeCheck(1.0, 1.0 + r, r, r, ()) for r in ratios]
            if env.gap_reward(checks) != sum(ratios) / n:
                problems.append(f"gap branch {ratios}")

    s0 = env.reset(three_step)
    _, r, done, _ = env.step(s0, np.zeros((s0.n_edges, 2)))
    if not (r == -1.0 and done):
        problems.append("infeasible branch")
    s1, r, _, _ = env.step(s0, np.ones((s0.n_edges, 2)))
    expected = sum(min(0.0, c.duration - c.t_min) / c.t_min for c in s1.checks) / len(s1.checks)
    if not (r < 0 and abs(r - expected) <= 1e-12):
        problems.append("gap branch via step")
    state = s0
    while True:
        state, r, _, _ = env.step(state, np.full((state.n_edges, 2), 0.9), horizon=1000)
        if state.feasible:
            break
    if r != min(1.0, state.t_planner / state.plan.makespan):
        problems.append("makespan branch via step")
    verdict("4 reward contract", not problems, "all three branches exact" if not problems else ", ".join(problems))


@pytest.fixture(scope="module")
def bench_report():
    methods = {"baseline-0.9": bench.baseline_method(0.9), "baseline-0.995": bench.baseline_method(0.995)}
    return bench.bench(list(domains.DEFAULT_COUNTS), methods, [BENCH_SEED])


@pytest.fixture(scope="module")
def desk_training():
    config = PpoConfig.from_file(DESK_CONFIG)
    instances = domains.toy_instances(4, 0)
    start = time.perf_counter()
    runs = {seed: ppo.train(instances, config, seed) for seed in TRAIN_SEEDS}
    return instances, runs, time.perf_counter() - start


def test_feasibility_recovery(verdict, bench_report, desk_training):
    rows = bench_report.rows
    coarse = [r for r in rows if r.method == "baseline-0.9"]
    infeasible = sum(not r.initial_feasible for r in coarse)
    recovered = sum(r.status == "feasible" and r.steps <= 200 for r in coarse)
    ratio_ok = all(r.ratio >= 1.0 for r in rows if r.status == "feasible")
    counts = {d: sum(r.domain == d for r in coarse) for d in domains.DEFAULT_COUNTS}

    instances, runs, _ = desk_training
    wins, cells = 0, 0
    for run in runs.values():
        for inst in instances:
            base = baselines.run_baseline(inst, 0.9)
            plan, _ = ppo.evaluate(run.model, inst)
            cells += 1
            wins += plan is not None and plan.makespan <= base.makespan
    ok = (counts == domains.DEFAULT_COUNTS and infeasible == len(coarse) == recovered and ratio_ok
          and wins >= 0.8 * cells)
    verdict("5 feasibility recovery", ok,
            f"{infeasible}/{len(coarse)} initially infeasible, {recovered} recovered by 0.9 within 200 steps, "
            f"ratios >= 1: {ratio_ok}, policy <= baseline on {wins}/{cells}")


def test_baseline_ordering(verdict, bench_report):
    by_key = {(r.instance, r.method): r for r in bench_report.rows}
    bad = []
    for (inst, method), coarse in by_key.items():
        if method != "baseline-0.9":
            continue
        fine = by_key[(inst, "baseline-0.995")]
        if not (fine.steps >= coarse.steps and fine.refined_makespan <= coarse.refined_makespan + 1e-9):
            bad.append(inst)
    n = len(bench_report.rows) // 2
    verdict("6 baseline ordering", not bad, f"{n - len(bad)}/{n} instances ordered" + (f", failing {bad}" if bad else ""))


def test_learning_signal(verdict, desk_training):
    _, runs, elapsed = desk_training
    improved, summary = 0, []
    for seed, run in runs.items():
        returns = np.array([e.ret for e in run.episodes])
        n = len(returns) // 10
        first, last = returns[:n].mean(), returns[-n:].mean()
        improved += last > first
        summary.append(f"{first:.2f}->{last:.2f}")
    verdict("7 learning signal", improved >= 4 and elapsed <= 1800,
            f"{improved}/5 seeds improve ({', '.join(summary)}), {elapsed:.0f}s")


def test_gradient_integrity(verdict, one_edge):
    rng = np.random.default_rng(8)
    errors = {}
    x = nn.tensor(rng.normal(size=(5, 4)), requires_grad=True)
    pos = nn.tensor(rng.uniform(0.5, 2.0, size=(5, 4)), requires_grad=True)
    for op in ("tanh", "sigmoid", "exp", "square"):
        errors[op] = max_relative_error(lambda: getattr(x, op)().sum(), [x])
    errors["log"] = max_relative_error(lambda: pos.log().sum(), [pos])
    shifted = nn.tensor(np.where(np.abs(x.data) < 1e-2, 0.5, x.data), requires_grad=True)
    errors["relu"] = max_relative_error(lambda: shifted.relu().sum(), [shifted])
    ids = np.array([0, 1, 1, 0, 2])
    errors["segment_mean"] = max_relative_error(lambda: nn.segment_mean(x, ids, 3).square().sum(), [x])

    model = ActorCritic(3, init_log_std=-0.5)
    for name in sorted({k.rsplit(".", 1)[0] for k in model.store.params}):
        W, b = model.store[f"{name}.W"], model.store[f"{name}.b"]
        inp = nn.tensor(rng.normal(size=(3, W.shape[0])))
        errors[name] = max_relative_error(lambda: ((inp @ W + b).tanh()).sum(), [W, b], per_param=40)

    state = env.reset(one_edge)
    action, extra = GnnPolicy(model, np.random.default_rng(0))(state)
    sample = Sample(extra["batch"], action, extra["log_prob"] - 0.05, extra["value"], 0.4, False, True)
    errors["policy loss"] = max_relative_error(
        lambda: ppo_loss(model, [sample], np.array([0.7]), np.array([0.9]), 0.2, PpoConfig())[0],
        list(model.store.params.values()))
    worst = max(errors, key=errors.get)
    verdict("8 gradient integrity", errors[worst] <= 1e-4,
            f"{len(errors)} checks, worst {worst} at {errors[worst]:.1e}")


def test_clip_decay_schedule(verdict):
    values = []
    for total in (PpoConfig().total_updates(), PpoConfig.from_file(DESK_CONFIG).total_updates(), 100):
        values.append(tuple(clip_schedule(k, total) for k in (0, total / 2, total)))
    ok = all(v == (0.2, 0.1, 0.05) for v in values)
    verdict("9 clip decay", ok, f"eps at k = 0, K/2, K: {values[0]}")


def test_bench_determinism(verdict, bench_report, tmp_path):
    methods = {"baseline-0.9": bench.baseline_method(0.9), "baseline-0.995": bench.baseline_method(0.995)}
    again = bench.bench(list(domains.DEFAULT_COUNTS), methods, [BENCH_SEED])
    a = bench.write_outputs(bench_report, tmp_path / "a")
    b = bench.write_outputs(again, tmp_path / "b")
    same = [x.read_bytes() == y.read_bytes() for x, y in zip(a, b)]
    verdict("10 determinism", len(a) == len(b) and all(same), f"{sum(same)}/{len(a)} output files identical")
