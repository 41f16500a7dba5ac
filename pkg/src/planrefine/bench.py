"""Benchmark harness: per-instance rows, aggregates, SVG figures, property checks."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import baselines, domains, env
from .model import GroundedPlan, PlanInstance

RECOVERY_STEP_CAP = 200


@dataclass(frozen=True)
class Row:
    domain: str
    instance: str
    seed: int
    method: str
    initial_makespan: float
    initial_feasible: int
    refined_makespan: float
    ratio: float
    steps: int
    status: str


@dataclass(frozen=True)
class Aggregate:
    domain: str
    method: str
    n: int
    feasible: int
    ratio_mean: float
    ratio_std: float
    steps_mean: float


@dataclass
class BenchReport:
    rows: list[Row]

    def aggregates(self) -> list[Aggregate]:
        keys = sorted({(r.domain, r.method) for r in self.rows})
        out = []
        for domain, method in keys:
            rows = [r for r in self.rows if r.domain == domain and r.method == method]
            ok = [r for r in rows if r.status == "feasible"]
            ratios = [r.ratio for r in ok]
            out.append(Aggregate(
                domain, method, len(rows), len(ok),
                statistics.fmean(ratios) if ratios else math.nan,
                statistics.stdev(ratios) if len(ratios) > 1 else math.nan,
                statistics.fmean(r.steps for r in ok) if ok else math.nan))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f.name for f in fields(Row)])
        for r in self.rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in astuple(r)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BenchReport":
        rows = []
        for d in csv.DictReader(io.StringIO(text)):
            rows.append(Row(d["domain"], d["instance"], int(d["seed"]), d["method"],
                            float(d["initial_makespan"]), int(d["initial_feasible"]),
                            float(d["refined_makespan"]), float(d["ratio"]), int(d["steps"]), d["status"]))
        return cls(rows)

    def aggregates_text(self) -> str:
        lines = [f"{'domain':<14} {'method':<16} {'n':>4} {'feasible':>8} {'ratio mean':>11} {'ratio std':>10} {'steps':>8}"]
        for a in self.aggregates():
            lines.append(f"{a.domain:<14} {a.method:<16} {a.n:>4} {a.feasible:>8} {a.ratio_mean:>11.4f} "
                         f"{a.ratio_std:>10.4f} {a.steps_mean:>8.2f}")
        return "\n".join(lines) + "\n"


# A method maps (instance, reset state) to (plan or None, steps, status).
Method = Callable[[PlanInstance, env.EnvState], tuple["GroundedPlan | None", int, str]]


def baseline_method(factor: float, max_steps: int = 2000) -> Method:
    def run(instance, state):
        res = baselines.run_baseline(instance, factor, max_steps, state=state)
        return res.plan, res.steps, res.status
    return run


def policy_method(model, horizon: int = env.DEFAULT_HORIZON) -> Method:
    from .agent import GnnPolicy

    def run(instance, state):
        plan, traj = env.episode(instance, GnnPolicy(model, deterministic=True), horizon, state=state)
        return plan, len(traj), "feasible" if plan is not None else "no-feasible-plan"
    return run


def run_bench(instance_sets: dict[str, list[PlanInstance]], methods: dict[str, Method], seed: int) -> BenchReport:
    rows = []
    for domain, instances in instance_sets.items():
        for inst in instances:
            state = env.reset(inst)
            t0 = state.plan.makespan
            for name, method in methods.items():
                try:
                    plan, steps, status = method(inst, state)
                except Exception as exc:  # recorded per row; the run continues
                    plan, steps, status = None, 0, f"error:{type(exc).__name__}"
                refined = plan.makespan if plan is not None else math.nan
                rows.append(Row(domain, inst.name, seed, name, t0, int(state.feasible), refined,
                                refined / t0 if plan is not None else math.nan, steps, status))
    return BenchReport(rows)


def bench(domain_names: Sequence[str], methods: dict[str, Method], seeds: Sequence[int],
          counts: dict[str, int] | None = None) -> BenchReport:
    counts = domains.DEFAULT_COUNTS if counts is None else counts
    rows = []
    for seed in seeds:
        sets = {d: domains.generate(domains.DomainSpec(d, counts.get(d, 10), seed)) for d in domain_names}
        rows.extend(run_bench(sets, methods, seed).rows)
    return BenchReport(rows)


def check(report: BenchReport, coarse: str = "baseline-0.9", fine: str = "baseline-0.995") -> list[str]:
    """Property violations; an empty list means every check passed."""
    problems = []
    for r in report.rows:
        if r.initial_feasible:
            problems.append(f"{r.instance}: initial plan already second-order feasible")
        if r.status == "feasible" and not r.ratio >= 1.0 - 1e-12:
            problems.append(f"{r.instance}/{r.method}: ratio {r.ratio} < 1")
    by_key = {(r.seed, r.instance, r.method): r for r in report.rows}
    for (seed, inst, method), r in sorted(by_key.items()):
        if method != coarse:
            continue
        if r.status != "feasible" or r.steps > RECOVERY_STEP_CAP:
            problems.append(f"{inst}: {coarse} did not recover within {RECOVERY_STEP_CAP} steps ({r.status})")
        f = by_key.get((seed, inst, fine))
        if f is not None and f.status == "feasible" and r.status == "feasible":
            if f.steps < r.steps:
                problems.append(f"{inst}: {fine} used fewer steps ({f.steps}) than {coarse} ({r.steps})")
            if f.refined_makespan > r.refined_makespan + 1e-9:
                problems.append(f"{inst}: {fine} makespan {f.refined_makespan} exceeds {coarse} "
                                f"{r.refined_makespan}")
    return problems


# ---------------------------------------------------------------------------
# SVG figures, written by hand so the output is byte-stable

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


class _Svg:
    def __init__(self, width: int, height: int):
        self.w, self.h = width, height
        self.parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
                      f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
                      f'<rect width="{width}" height="{height}" fill="white"/>']

    def add(self, s: str) -> None:
        self.parts.append(s)

    def text(self, x, y, s, anchor="start", size=11):
        s = s.replace("&", "&amp;").replace("<", "&lt;")
        self.add(f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}" font-size="{size}">{s}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


class _Axes:
    def __init__(self, svg: _Svg, box, xlim, ylim, title, xlabel, ylabel):
        self.svg = svg
        self.x0, self.y0, self.w, self.h = box
        self.xlim, self.ylim = xlim, ylim
        svg.add(f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" fill="none" stroke="black"/>')
        svg.text(self.x0 + self.w / 2, self.y0 - 8, title, "middle", 12)
        svg.text(self.x0 + self.w / 2, self.y0 + self.h + 32, xlabel, "middle")
        svg.add(f'<text x="{self.x0 - 42:.2f}" y="{self.y0 + self.h / 2:.2f}" text-anchor="middle" '
                f'transform="rotate(-90 {self.x0 - 42:.2f} {self.y0 + self.h / 2:.2f})">{ylabel}</text>')
        for t in _ticks(*ylim):
            y = self.py(t)
            svg.add(f'<line x1="{self.x0 - 4}" y1="{y:.2f}" x2="{self.x0}" y2="{y:.2f}" stroke="black"/>')
            svg.text(self.x0 - 6, y + 4, f"{t:g}", "end", 10)
        for t in _ticks(*xlim):
            x = self.px(t)
            svg.add(f'<line x1="{x:.2f}" y1="{self.y0 + self.h}" x2="{x:.2f}" y2="{self.y0 + self.h + 4}" stroke="black"/>')
            svg.text(x, self.y0 + self.h + 16, f"{t:g}", "middle", 10)

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo) * self.w

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return self.y0 + self.h - (y - lo) / (hi - lo) * self.h

    def legend(self, labels: Sequence[str]) -> None:
        for i, name in enumerate(labels):
            y = self.y0 + 14 + 14 * i
            self.svg.add(f'<rect x="{self.x0 + 8}" y="{y - 8}" width="10" height="10" fill="{PALETTE[i % len(PALETTE)]}"/>')
            self.svg.text(self.x0 + 22, y + 1, name)


def _padded(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.05
    return lo - pad, hi + pad


def makespan_figure(report: BenchReport, domain: str) -> str:
    """Per-instance refined makespan; methods with several seeds get mean and std bars."""
    rows = [r for r in report.rows if r.domain == domain and r.status == "feasible"]
    instances = sorted({r.instance for r in report.rows if r.domain == domain})
    methods = sorted({r.method for r in report.rows if r.domain == domain})
    svg = _Svg(640, 360)
    if not rows:
        svg.text(320, 180, f"{domain}: no feasible rows", "middle")
        return svg.render()
    ax = _Axes(svg, (70, 40, 540, 260), (-0.5, len(instances) - 0.5),
               _padded([r.refined_makespan for r in rows]), f"{domain}: refined makespan per instance",
               "instance", "makespan")
    for m_idx, method in enumerate(methods):
        colour = PALETTE[m_idx % len(PALETTE)]
        shift = (m_idx - (len(methods) - 1) / 2) * 0.15
        for i, inst in enumerate(instances):
            vals = [r.refined_makespan for r in rows if r.instance == inst and r.method == method]
            if not vals:
                continue
            mean = statistics.fmean(vals)
            x, y = ax.px(i + shift), ax.py(mean)
            if len(vals) > 1:
                sd = statistics.stdev(vals)
                svg.add(f'<line x1="{x:.2f}" y1="{ax.py(mean - sd):.2f}" x2="{x:.2f}" y2="{ax.py(mean + sd):.2f}" '
                        f'stroke="{colour}"/>')
            svg.add(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{colour}"/>')
    ax.legend(methods)
    return svg.render()


def training_figure(curves: dict[str, Sequence[float]], window: int = 20) -> str:
    """Moving-average episode return for each named training log."""
    svg = _Svg(640, 360)
    smoothed = {}
    for name, returns in curves.items():
        r = np.asarray(returns, dtype=float)
        w = max(1, min(window, r.size))
        smoothed[name] = np.convolve(r, np.ones(w) / w, mode="valid") if r.size else r
    values = [float(v) for s in smoothed.values() for v in s]
    if not values:
        svg.text(320, 180, "no training logs", "middle")
        return svg.render()
    longest = max(len(s) for s in smoothed.values())
    ax = _Axes(svg, (70, 40, 540, 260), (0, max(longest + window - 1, 1)), _padded(values),
               "episode return (moving average)", "episode", "return")
    for i, (name, s) in enumerate(smoothed.items()):
        pts = " ".join(f"{ax.px(j + window):.2f},{ax.py(v):.2f}" for j, v in enumerate(s))
        svg.add(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.2"/>')
    ax.legend(list(smoothed))
    return svg.render()


def write_outputs(report: BenchReport, out_dir: str | Path,
                  training_curves: dict[str, Sequence[float]] | None = None) -> list[Path]:
    out = Path(out_dir)
    figs = out / "figures"
    figs.mkdir(parents=True, exist_ok=True)
    written = [out / "report.csv", out / "aggregates.txt"]
    written[0].write_text(report.to_csv())
    written[1].write_text(report.aggregates_text())
    for domain in sorted({r.domain for r in report.rows}):
        path = figs / f"makespan-{domain}.svg"
        path.write_text(makespan_figure(report, domain))
        written.append(path)
    if training_curves:
        path = figs / "training.svg"
        path.write_text(training_figure(training_curves))
        written.append(path)
    return written
