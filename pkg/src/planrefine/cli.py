"""Command line entry point: ``planrefine <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import baselines, bench, domains, env, model, ppo, socp
from .graph import build_graph


def _cmd_plan(args) -> int:
    inst = model.load_instance(args.instance)
    axis, norm = socp.nominal_bounds(inst)
    if args.dump_program:
        Path(args.dump_program).write_text(socp.build_program(inst, axis, norm).dump())
    result, plan = socp.solve_plan(inst, axis, norm)
    if plan is None:
        print(f"solver status: {result.status}", file=sys.stderr)
        return 1
    text = model.format_plan(plan)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_validate(args) -> int:
    inst = model.load_instance(args.instance)
    plan = model.load_plan(args.plan)
    graph, checks = env.evaluate_plan(plan, inst)
    if args.dump_graph:
        Path(args.dump_graph).write_text(graph.dump())
    for i, c in enumerate(checks):
        profiles = ",".join(a.profile for a in c.axes)
        print(f"edge {i} duration={c.duration:.9g} t_min={c.t_min:.9g} gap={c.gap:.9g} "
              f"ratio={c.ratio:.9g} profile={profiles}")
    feasible = all(c.gap == 0.0 for c in checks)
    print("second-order feasible" if feasible else "second-order infeasible")
    return 0 if feasible else 1


def _cmd_refine(args) -> int:
    inst = model.load_instance(args.instance)
    if args.weights:
        m = ppo.load_model(args.weights)
        plan, steps = ppo.evaluate(m, inst, args.horizon)
        status = "feasible" if plan is not None else "no-feasible-plan"
    else:
        res = baselines.run_baseline(inst, args.factor, args.max_steps)
        plan, steps, status = res.plan, res.steps, res.status
    print(f"status={status} steps={steps}", file=sys.stderr)
    if plan is None:
        return 1
    text = model.format_plan(plan)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _load_instances(paths) -> list[model.PlanInstance]:
    files = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.inst")) if p.is_dir() else [p])
    return [model.load_instance(f) for f in files]


def _cmd_train(args) -> int:
    config = ppo.PpoConfig.from_file(args.config) if args.config else ppo.PpoConfig()
    if args.episodes:
        config = ppo.PpoConfig(**{**config.__dict__, "episodes": args.episodes})
    if args.instances:
        instances = _load_instances(args.instances)
    else:
        instances = domains.generate(domains.DomainSpec(args.domain, args.count, args.instance_seed))
    result = ppo.train(instances, config, args.seed, args.out, args.log)
    last = result.episodes[-max(1, len(result.episodes) // 10):]
    print(f"episodes={len(result.episodes)} updates={len(result.updates)} "
          f"final_mean_return={sum(e.ret for e in last) / len(last):.4f}")
    return 0


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = args.count if args.count is not None else domains.DEFAULT_COUNTS.get(args.domain, 10)
    for inst in domains.generate(domains.DomainSpec(args.domain, count, args.seed)):
        model.save_instance(inst, out / f"{inst.name}.inst")
    print(f"wrote {count} instances to {out}")
    return 0


def _parse_methods(names, weights) -> dict[str, bench.Method]:
    methods = {}
    for name in names:
        if name.startswith("baseline-"):
            methods[name] = bench.baseline_method(float(name.split("-", 1)[1]))
        elif name == "policy":
            if not weights:
                raise SystemExit("method 'policy' needs --weights")
            for w in weights:
                m = ppo.load_model(w)
                methods[f"policy-{Path(w).stem}" if len(weights) > 1 else "policy"] = bench.policy_method(m)
        else:
            raise SystemExit(f"unknown method {name!r}")
    return methods


def _cmd_bench(args) -> int:
    methods = _parse_methods(args.methods.split(","), args.weights)
    report = bench.bench(args.domains.split(","), methods, [int(s) for s in args.seeds.split(",")])
    curves = {Path(p).stem: [e.ret for e in ppo.read_log(p)] for p in args.train_logs or []}
    bench.write_outputs(report, args.out, curves)
    sys.stdout.write(report.aggregates_text())
    if args.check:
        problems = bench.check(report)
        for p in problems:
            print(f"CHECK FAILED: {p}", file=sys.stderr)
        return 1 if problems else 0
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="planrefine", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("plan", help="solve the first-order program for an instance")
    s.add_argument("instance")
    s.add_argument("-o", "--out")
    s.add_argument("--dump-program", metavar="FILE", help="write the conic program in text form")
    s.set_defaults(func=_cmd_plan)

    s = sub.add_parser("validate", help="check a plan against second-order dynamics")
    s.add_argument("instance")
    s.add_argument("plan")
    s.add_argument("--dump-graph", metavar="FILE", help="write the plan graph in text form")
    s.set_defaults(func=_cmd_validate)

    s = sub.add_parser("refine", help="refine an instance with a baseline or trained policy")
    s.add_argument("instance")
    s.add_argument("--factor", type=float, default=0.9)
    s.add_argument("--max-steps", type=int, default=2000)
    s.add_argument("--weights")
    s.add_argument("--horizon", type=int, default=env.DEFAULT_HORIZON)
    s.add_argument("-o", "--out")
    s.set_defaults(func=_cmd_refine)

    s = sub.add_parser("train", help="train the graph policy with PPO")
    s.add_argument("instances", nargs="*", help="instance files or directories of *.inst")
    s.add_argument("--domain", default="toy", choices=sorted(domains.GENERATORS))
    s.add_argument("--count", type=int, default=4)
    s.add_argument("--instance-seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--episodes", type=int)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", default="weights.bin")
    s.add_argument("--log", default="train.csv")
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("gen", help="generate benchmark instances")
    s.add_argument("domain", choices=sorted(domains.GENERATORS))
    s.add_argument("--count", type=int)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", default="instances")
    s.set_defaults(func=_cmd_gen)

    s = sub.add_parser("bench", help="run the benchmark and write report, aggregates and figures")
    s.add_argument("--domains", default=",".join(domains.DEFAULT_COUNTS))
    s.add_argument("--methods", default="baseline-0.9,baseline-0.995")
    s.add_argument("--seeds", default="1")
    s.add_argument("--weights", action="append")
    s.add_argument("--train-logs", action="append")
    s.add_argument("--out", default="bench-out")
    s.add_argument("--check", action="store_true", help="exit nonzero if a benchmark property fails")
    s.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (model.ParseError, model.ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
