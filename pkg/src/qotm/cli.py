"""Command-line experiment runner.

Each subcommand checks one claim, writes deterministic CSV/JSON files under
the output directory and a ``status/<command>.json`` record.  ``report``
collects the status records into ``manifest.json`` and ``summary.txt``.

Exit codes: 0 pass, 2 claim-check failure (printed with a FINDING marker),
3 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from scipy.stats import binom

from . import __version__
from .adversary import (
    attack_unlock_probs,
    builtin_strategies,
    corollary_mean_cap,
    lemma_acc_input_bound,
    lemma_log_tail,
    projective_sum_ceiling,
    r1_guess_cap,
    simulator_experiment,
    soundness_fraction,
)
from .bounds import azuma_supermartingale_bound, builtin_specs, standard_t_grid, verify_tail
from .disturbance import (
    CLAIM_BOUND,
    TAU_CON,
    EvolutionConfig,
    MultistartConfig,
    certify_net,
    guess_bound,
    objective,
    reports_consistent,
    solve_evolution,
    solve_multistart,
    sweep_claims,
)
from .protocol import (
    ACCEPT_FRACTION,
    chernoff_crossover,
    chernoff_failure_bound,
    correctness_crossover,
    honest_failure_exact,
    honest_read_monte_carlo,
    honest_success_exact,
    threshold_for,
)
from .qrac import COS2_PI_8, decode_prob, encode, other_bit_guess_prob

OK, FAIL, IO_ERROR = 0, 2, 3
ENV_OUTPUT_DIR = "QOTM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "qotm-results"

CLAIM_SAMPLES = 1_000_000
DE_POPULATION = 40
ADVERSARY_N = 100
TAILS_N = 1000
LARGE_N = 1_000_000

CLAIMS = {
    "qrac-check": "QRAC decoding optimum cos^2(pi/8)",
    "optimize": "disturbance program optimum reported as 0.253",
    "certify": "disturbance conjecture: optimum at most 0.3",
    "correctness": "honest read correctness (Chernoff argument)",
    "adversary": "soundness hybrids and proof constants",
    "tails": "supermartingale tail bound exp(-t^2/2n)",
}
COMMANDS = tuple(CLAIMS)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 0
    n_values: list[int] = field(default_factory=lambda: list(range(20, 201, 20)))
    restarts: int = 1000
    generations_max: int = 10000
    grid_step: float = 0.05
    trials: int = 100_000
    constraint_threshold: float = 0.83
    output_dir: str = ""

    def __post_init__(self):
        if not self.output_dir:
            self.output_dir = os.environ.get(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR)
        self.validate()

    def validate(self):
        try:
            self.seed = int(self.seed)
            self.n_values = [int(n) for n in self.n_values]
            for name in ("restarts", "generations_max", "trials"):
                setattr(self, name, int(getattr(self, name)))
            self.grid_step = float(self.grid_step)
            self.constraint_threshold = float(self.constraint_threshold)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from None
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if not self.n_values or min(self.n_values) < 1:
            raise ConfigError("n_values must be a non-empty list of counts >= 1")
        for name in ("restarts", "generations_max", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 < self.grid_step <= 0.25:
            raise ConfigError("grid_step must lie in (0, 0.25]")
        if not 0.5 < self.constraint_threshold < 0.854:
            raise ConfigError("constraint_threshold must lie in (0.5, 0.854)")

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> ExperimentConfig:
        values = {}
        if path:
            try:
                with open(path, encoding="utf-8") as fh:
                    values = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            if not isinstance(values, dict):
                raise ConfigError("config file must hold a JSON object")
            unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


# ---------------------------------------------------------------------------
# deterministic writers

class Run:
    """Output bookkeeping for one subcommand."""

    def __init__(self, cfg: ExperimentConfig, command: str, record_timing: bool):
        self.cfg = cfg
        self.command = command
        self.record_timing = record_timing
        self.root = Path(cfg.output_dir)
        self.outputs: list[str] = []
        self.findings: list[str] = []
        self.started = time.perf_counter()

    def stamp(self, record: dict) -> dict:
        return {**record, "seed": self.cfg.seed, "artifact_version": __version__}

    def _path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.root / name

    def write_json(self, name: str, record: dict):
        text = json.dumps(self.stamp(record), sort_keys=True, indent=2, ensure_ascii=False)
        self._path(name).write_text(text + "\n", encoding="utf-8")

    def write_csv(self, name: str, header: list[str], rows: list[dict]):
        header = list(header) + ["seed", "artifact_version"]
        with open(self._path(name), "w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, header, lineterminator="\r\n")
            w.writeheader()
            for row in rows:
                w.writerow(self.stamp(row))

    def check(self, ok: bool, what: str):
        if not ok:
            self.findings.append(what)
            print(f"FINDING [{self.command}] {what}")

    def timing(self, value: float | None) -> float | None:
        return value if self.record_timing else None

    def finish(self) -> int:
        code = FAIL if self.findings else OK
        status = {
            "command": self.command,
            "claim": CLAIMS[self.command],
            "exit_code": code,
            "outputs": self.outputs,
            "findings": self.findings,
            "wall_time": self.timing(time.perf_counter() - self.started),
        }
        status_dir = self.root / "status"
        status_dir.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.stamp(status), sort_keys=True, indent=2, ensure_ascii=False)
        (status_dir / f"{self.command}.json").write_text(text + "\n", encoding="utf-8")
        print(f"{self.command}: {'PASS' if code == OK else 'FAIL'}")
        return code


# ---------------------------------------------------------------------------
# subcommands

def cmd_qrac_check(run: Run, workers: int) -> None:
    rows = []
    for b0 in (0, 1):
        for b1 in (0, 1):
            state = encode(b0, b1)
            for alpha in (0, 1):
                p = decode_prob(alpha, state)
                other = other_bit_guess_prob(alpha, state)
                ok = abs(p - COS2_PI_8) <= 1e-12 and abs(other - 0.5) <= 1e-12
                rows.append({"b0": b0, "b1": b1, "alpha": alpha, "p_decode": p, "p_other_guess": other, "pass": ok})
                run.check(ok, f"row b0={b0} b1={b1} alpha={alpha}: p_decode={p!r}, p_other_guess={other!r}")
    run.write_csv("qrac_check.csv", ["b0", "b1", "alpha", "p_decode", "p_other_guess", "pass"], rows)


def cmd_optimize(run: Run, workers: int) -> None:
    cfg = run.cfg
    thr = cfg.constraint_threshold
    ms = solve_multistart(cfg.restarts, cfg.seed, MultistartConfig(threshold=thr), workers)
    de = solve_evolution(cfg.generations_max, DE_POPULATION, cfg.seed, EvolutionConfig(threshold=thr))
    for name, rep in (("multistart", ms), ("evolution", de)):
        d = rep.to_dict()
        d["wall_time"] = run.timing(rep.wall_time)
        d["constraint_threshold"] = thr
        run.write_json(f"optimize_{name}.json", d)
        run.check(0.24 <= rep.objective <= 0.27, f"{name} objective {rep.objective!r} outside [0.24, 0.27]")
        run.check(rep.constraint_value >= thr - TAU_CON, f"{name} constraint {rep.constraint_value!r} below {thr}")
        run.check(reports_consistent(rep), f"{name} report does not re-evaluate to its objective")
    delta = abs(ms.objective - de.objective)
    run.check(delta <= 0.01, f"solvers disagree by {delta!r}")
    print(f"optimize: multistart {ms.objective:.10f}, evolution {de.objective:.10f}")


def cmd_certify(run: Run, workers: int) -> None:
    cfg = run.cfg
    thr = cfg.constraint_threshold
    record = {"constraint_threshold": thr, "claim_bound": CLAIM_BOUND}
    for lattice, step in (("box", cfg.grid_step), ("slab", cfg.grid_step / 5)):
        s = certify_net(step, thr, lattice)
        record[f"net_{lattice}"] = s.to_dict()
        run.check(s.net_max <= CLAIM_BOUND, f"{lattice} net maximum {s.net_max!r} exceeds {CLAIM_BOUND}")
        if s.net_argmax is not None:
            val, _ = objective(s.net_argmax)
            run.check(abs(val - s.net_max) <= 1e-10, f"{lattice} net argmax re-evaluates to {val!r}")
        print(f"certify: {lattice} step {step:g}: {s.points_feasible}/{s.points_total} feasible, max {s.net_max:.6f}")
    run.check(record["net_box"]["points_feasible"] > 0, "box net has no feasible point")
    for conditioned in (False, True):
        sw = sweep_claims(CLAIM_SAMPLES, cfg.seed, conditioned=conditioned, threshold=thr)
        key = "sweep_conditioned" if conditioned else "sweep_unconditioned"
        record[key] = sw.to_dict()
        run.check(sw.violations == 0, f"{key}: {sw.violations} sampled POVMs violate the claim")
    run.write_json("certify.json", record)


def cmd_correctness(run: Run, workers: int) -> None:
    cfg = run.cfg
    rows = []
    for n in cfg.n_values:
        exact = honest_success_exact(n)
        failure = honest_failure_exact(n)
        chern = chernoff_failure_bound(n)
        mc = honest_read_monte_carlo(n, cfg.trials, cfg.seed, workers)
        sigma = math.sqrt(exact * (1 - exact) / cfg.trials)
        # on multiples of 20 the threshold is exactly 15% of n and the Hoeffding bound applies
        bound_ok = failure <= chern if n % 20 == 0 else True
        mc_ok = abs(mc - exact) <= 3 * sigma
        rows.append(
            {
                "n": n,
                "threshold": threshold_for(n),
                "p_success_exact": exact,
                "p_failure_exact": failure,
                "chernoff_bound": chern,
                "mc_trials": cfg.trials,
                "mc_success": mc,
                "mc_sigma": sigma,
                "pass": bound_ok and mc_ok,
            }
        )
        run.check(mc_ok, f"n={n}: Monte Carlo {mc!r} not within 3 sigma of {exact!r}")
        run.check(bound_ok, f"n={n}: exact failure {failure!r} exceeds Chernoff bound {chern!r}")
    run.write_csv(
        "correctness.csv",
        ["n", "threshold", "p_success_exact", "p_failure_exact", "chernoff_bound", "mc_trials", "mc_success", "mc_sigma", "pass"],
        rows,
    )
    large = honest_success_exact(LARGE_N)
    run.check(large >= 1 - 1e-6, f"n={LARGE_N}: success {large!r} below 1 - 1e-6")
    cross = correctness_crossover(1e-6)
    cross_c = chernoff_crossover(1e-6)
    statement = (
        f"honest failure first drops to 1e-6 at n={cross} (exact, multiples of 20); "
        f"the Chernoff bound needs n={cross_c}"
    )
    run.write_json(
        "correctness.json",
        {
            "large_n": LARGE_N,
            "large_n_success": large,
            "large_n_failure": honest_failure_exact(LARGE_N),
            "crossover_exact": cross,
            "crossover_chernoff": cross_c,
            "statement": statement,
        },
    )
    print(f"correctness: {statement}")


def cmd_adversary(run: Run, workers: int) -> None:
    cfg = run.cfg
    strategies = builtin_strategies()
    ns = sorted(set(cfg.n_values) | {ADVERSARY_N})
    rows = []
    for s in strategies:
        prev = None
        for n in ns:
            rep = attack_unlock_probs(s, n)
            rows.append(
                {
                    "strategy": s.label,
                    "n": n,
                    "q0": rep.extra["q0"],
                    "q1": rep.extra["q1"],
                    "p_unlock0": rep.p_unlock0,
                    "p_unlock1": rep.p_unlock1,
                    "p_unlock_both": rep.p_unlock_both,
                    "ordered": rep.ordered,
                }
            )
            run.check(rep.ordered, f"{s.label} n={n}: unlock probabilities out of order")
            # the tail only shrinks with n when per-bit success sits below the acceptance fraction
            if n % 20 == 0 and rep.extra["q1"] < float(ACCEPT_FRACTION):
                if prev is not None:
                    run.check(rep.p_unlock1 <= prev * (1 + 1e-9), f"{s.label} n={n}: p_unlock1 increased")
                prev = rep.p_unlock1
            if s.label == "z-basis":
                k = n - threshold_for(n)
                ref = float(binom.sf(k - 1, n, 0.5))
                run.check(
                    abs(rep.p_unlock1 - ref) <= 1e-6 * ref,
                    f"z-basis n={n}: p_unlock1 {rep.p_unlock1!r} vs binomial oracle {ref!r}",
                )
    run.write_csv(
        "adversary_exact.csv",
        ["strategy", "n", "q0", "q1", "p_unlock0", "p_unlock1", "p_unlock_both", "ordered"],
        rows,
    )

    sim_rows = []
    for i, s in enumerate(strategies):
        rep = simulator_experiment(s, ADVERSARY_N, cfg.trials, cfg.seed + i, workers)
        ok = rep.sim_total_variation <= rep.tv_bound
        sim_rows.append(
            {
                "strategy": s.label,
                "n": ADVERSARY_N,
                "trials": cfg.trials,
                "target": rep.target,
                "total_variation": rep.sim_total_variation,
                "accept_prob_other": rep.extra["accept_prob_other"],
                "tv_sigma": rep.tv_sigma,
                "tv_bound": rep.tv_bound,
                "pass": ok,
            }
        )
        run.check(ok, f"simulator {s.label}: TV {rep.sim_total_variation!r} exceeds {rep.tv_bound!r}")
    run.write_csv(
        "adversary_sim.csv",
        ["strategy", "n", "trials", "target", "total_variation", "accept_prob_other", "tv_sigma", "tv_bound", "pass"],
        sim_rows,
    )

    lemma = lemma_acc_input_bound()
    sound = soundness_fraction()
    cap = guess_bound(CLAIM_BOUND)
    run.check(lemma.holds, f"accepting-input mean cap {lemma.value!r} exceeds {lemma.cap}")
    run.check(sound.holds, f"guessable fraction {sound.value!r} exceeds {sound.cap}")
    run.check(abs(cap - 0.65) <= 1e-12, f"guess bound {cap!r} differs from 0.65")
    ceiling = projective_sum_ceiling()
    run.check(ceiling <= 1 + 1 / math.sqrt(2) + 1e-9, f"projective q0+q1 ceiling {ceiling!r} above 1+1/sqrt(2)")
    corollary = []
    for s in strategies:
        q0, q1 = s.per_bit(0), s.per_bit(1)
        if q0 >= cfg.constraint_threshold:
            r1cap = r1_guess_cap(s)
            ok = r1cap <= cap + TAU_CON and q1 <= r1cap + 1e-12
            corollary.append({"strategy": s.label, "q0": q0, "q1": q1, "r1_guess_cap": r1cap, "holds": ok})
            run.check(ok, f"{s.label}: r1 guess cap {r1cap!r} or q1 {q1!r} above {cap}")
    run.write_json(
        "adversary_constants.json",
        {
            "accept_input_mean_cap": dataclasses.asdict(lemma),
            "guess_bound": {"value": cap, "cap": 0.65, "holds": abs(cap - 0.65) <= 1e-12},
            "soundness_fraction": dataclasses.asdict(sound),
            "corollary_mean_cap": corollary_mean_cap(),
            "log_tail": {str(n): lemma_log_tail(n) for n in (10**5, 10**7)},
            "projective_sum_ceiling": ceiling,
            "corollary_checks": corollary,
        },
    )
    print(f"adversary: constants ({lemma.value:.4f}, {cap:.2f}, {sound.value:.2f})")


def cmd_tails(run: Run, workers: int) -> None:
    cfg = run.cfg
    grid = standard_t_grid(TAILS_N)
    summary = {}
    for i, spec in enumerate(builtin_specs(TAILS_N)):
        checks = verify_tail(spec, grid, cfg.trials, cfg.seed + i, workers)
        rows = [{"rule": spec.name, "n": TAILS_N, **c.to_dict()} for c in checks]
        run.write_csv(f"tails_{spec.name}.csv", ["rule", "n", "t", "bound", "empirical", "trials", "passed"], rows)
        for c in checks:
            run.check(c.passed, f"rule {spec.name} t={c.t!r}: empirical {c.empirical!r} above bound {c.bound!r}")
        summary[spec.name] = all(c.passed for c in checks)
    spot = azuma_supermartingale_bound(100, 10)
    run.check(abs(spot - math.exp(-0.5)) <= 1e-12, f"spot value {spot!r} differs from exp(-0.5)")
    run.write_json("tails.json", {"n": TAILS_N, "t_grid": grid, "rules_pass": summary, "spot_value_n100_t10": spot})


RUNNERS = {
    "qrac-check": cmd_qrac_check,
    "optimize": cmd_optimize,
    "certify": cmd_certify,
    "correctness": cmd_correctness,
    "adversary": cmd_adversary,
    "tails": cmd_tails,
}


def run_command(command: str, cfg: ExperimentConfig, workers: int = 1, record_timing: bool = False) -> int:
    run = Run(cfg, command, record_timing)
    try:
        RUNNERS[command](run, workers)
        return run.finish()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR


def cmd_report(cfg: ExperimentConfig, record_timing: bool = False) -> int:
    root = Path(cfg.output_dir)
    entries = []
    try:
        for command in COMMANDS:
            status_path = root / "status" / f"{command}.json"
            if not status_path.is_file():
                print(f"error: missing status file {status_path}", file=sys.stderr)
                return IO_ERROR
            status = json.loads(status_path.read_text(encoding="utf-8"))
            for name in status["outputs"]:
                if not (root / name).is_file():
                    print(f"error: missing output file {root / name}", file=sys.stderr)
                    return IO_ERROR
            entries.append(
                {
                    "command": command,
                    "claim": CLAIMS[command],
                    "exit_code": status["exit_code"],
                    "outputs": status["outputs"],
                    "findings": status["findings"],
                    "wall_time": status.get("wall_time") if record_timing else None,
                }
            )
        overall = all(e["exit_code"] == OK for e in entries)
        manifest = {
            "artifact_version": __version__,
            "seed": cfg.seed,
            "config": cfg.snapshot(),
            "entries": entries,
            "overall": "PASS" if overall else "FAIL",
        }
        (root / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        lines = [f"qotm {__version__}  seed {cfg.seed}", ""]
        for e in entries:
            mark = "PASS" if e["exit_code"] == OK else "FAIL"
            lines.append(f"{mark}  {e['command']:<12} {e['claim']}")
            lines.extend(f"      FINDING {f}" for f in e["findings"])
        lines += ["", f"overall: {manifest['overall']}"]
        (root / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    print(f"report: overall {manifest['overall']}")
    return OK if overall else FAIL


# ---------------------------------------------------------------------------
# argument parsing

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--n-values", type=_int_list, help="comma-separated list, e.g. 20,40,60")
    common.add_argument("--restarts", type=int)
    common.add_argument("--generations-max", type=int)
    common.add_argument("--grid-step", type=float)
    common.add_argument("--trials", type=int)
    common.add_argument("--constraint-threshold", type=float)
    common.add_argument("--output-dir", help=f"defaults to ${ENV_OUTPUT_DIR} or ./{DEFAULT_OUTPUT_DIR}")
    common.add_argument("--workers", type=int, default=1, help="process count; never changes results")
    common.add_argument("--record-timing", action="store_true", help="write wall times (breaks byte identity)")

    parser = argparse.ArgumentParser(prog="qotm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qotm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=CLAIMS[name])
    sub.add_parser("report", parents=[common], help="collect statuses into manifest.json and summary.txt")
    sub.add_parser("all", parents=[common], help="run every check, then report")
    return parser


OVERRIDES = ("seed", "n_values", "restarts", "generations_max", "grid_step", "trials", "constraint_threshold", "output_dir")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return IO_ERROR if exc.code else OK
    try:
        cfg = ExperimentConfig.load(args.config, {k: getattr(args, k) for k in OVERRIDES})
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return IO_ERROR
    if args.workers < 1:
        print("config error: workers must be >= 1", file=sys.stderr)
        return IO_ERROR
    if args.command == "report":
        return cmd_report(cfg, args.record_timing)
    if args.command == "all":
        codes = [run_command(c, cfg, args.workers, args.record_timing) for c in COMMANDS]
        if IO_ERROR in codes:
            return IO_ERROR
        return cmd_report(cfg, args.record_timing)
    return run_command(args.command, cfg, args.workers, args.record_timing)


if __name__ == "__main__":
    sys.exit(main())
