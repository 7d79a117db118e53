"""Acceptance criteria, one test each, at their stated sizes and tolerances.

Every test prints a single ``PASS``/``FAIL`` line.  Run directly with
``python3 tests/test_acceptance.py`` for the summary lines alone.
"""

import math
import sys
import time
from pathlib import Path

import pytest
from scipy.stats import binom

from qotm import cli
from qotm.adversary import (
    attack_unlock_probs,
    builtin_strategies,
    lemma_acc_input_bound,
    simulator_experiment,
    soundness_fraction,
)
from qotm.bounds import azuma_supermartingale_bound, builtin_specs, standard_t_grid, verify_tail
from qotm.disturbance import (
    Z_PROJECTIVE,
    certify_net,
    constraint,
    guess_bound,
    objective,
    solve_evolution,
    solve_multistart,
    sweep_claims,
)
from qotm.protocol import honest_read_monte_carlo, honest_success_exact, threshold_for
from qotm.qrac import COS2_PI_8, decode_prob, encode

SEED = 0


LINES: list[str] = []  # printed in the terminal summary by conftest


def emit(number: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_qrac_optimum():
    t = time.perf_counter()
    worst = max(abs(decode_prob(a, encode(b0, b1)) - COS2_PI_8) for a in (0, 1) for b0 in (0, 1) for b1 in (0, 1))
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-12 and abs(COS2_PI_8 - 0.8535533906) < 1e-10 and elapsed < 1.0
    emit(1, ok, f"max |p_decode - cos^2(pi/8)| = {worst:.2e} in {elapsed:.3f}s")


def test_criterion_02_program_reproduction():
    ms = solve_multistart(1000, SEED)
    de = solve_evolution(10000, cli.DE_POPULATION, SEED)
    ok = (
        0.24 <= ms.objective <= 0.27
        and 0.24 <= de.objective <= 0.27
        and abs(ms.objective - de.objective) <= 0.01
        and ms.constraint_value >= 0.83
        and de.constraint_value >= 0.83
    )
    emit(
        2,
        ok,
        f"multistart {ms.objective:.6f} (constraint {ms.constraint_value:.9f}), "
        f"evolution {de.objective:.6f} after {de.restarts_or_generations} generations "
        f"(constraint {de.constraint_value:.9f}), target 0.253",
    )


def test_criterion_03_conjecture_evidence():
    net = certify_net(0.05)
    val, _ = objective(net.net_argmax)
    unc = sweep_claims(10**6, SEED)
    con = sweep_claims(10**6, SEED, conditioned=True)
    ok = (
        net.net_max <= 0.30
        and net.points_feasible > 0
        and abs(val - net.net_max) <= 1e-10
        and unc.violations == 0
        and con.violations == 0
    )
    emit(
        3,
        ok,
        f"net_max {net.net_max:.6f} over {net.points_total} points ({net.points_feasible} feasible); "
        f"claim violations {unc.violations}/{unc.samples} feasible and {con.violations}/{con.samples} "
        f"constraint-satisfying POVMs (max {con.max_objective_nonvacuous:.6f})",
    )


def test_criterion_04_projective_collapse():
    val, _ = objective(Z_PROJECTIVE)
    con = constraint(Z_PROJECTIVE)
    ok = abs(val) <= 1e-10 and abs(con - COS2_PI_8) <= 1e-10 and con >= 0.83
    emit(4, ok, f"Z-basis objective {val:.1e}, constraint {con:.10f}")


def test_criterion_05_correctness_tails():
    trials = 10**5
    p = honest_success_exact(20)
    mc = honest_read_monte_carlo(20, trials, SEED)
    sigma = math.sqrt(p * (1 - p) / trials)
    large = honest_success_exact(10**6)
    ok = abs(mc - p) <= 3 * sigma and abs(p - 0.66) < 0.01 and large >= 1 - 1e-6
    emit(5, ok, f"n=20 Monte Carlo {mc:.5f} vs exact {p:.5f} ({abs(mc - p) / sigma:.2f} sigma); n=1e6 success {large!r}")


def test_criterion_06_proof_constants():
    lemma = lemma_acc_input_bound()
    sound = soundness_fraction()
    g = guess_bound(0.3)
    ok = (
        abs(lemma.value - 0.8444) <= 1e-12
        and lemma.holds
        and abs(g - 0.65) <= 1e-12
        and abs(sound.value - 0.82) <= 1e-12
        and sound.holds
    )
    emit(6, ok, f"({lemma.value:.4f} <= 0.845, {g:.2f}, {sound.value:.2f} <= 0.85)")


def test_criterion_07_adversary_tails():
    z = next(s for s in builtin_strategies() if s.label == "z-basis")
    rep = attack_unlock_probs(z, 100)
    ref = float(binom.sf(84, 100, 0.5))
    series = [attack_unlock_probs(z, n).p_unlock1 for n in range(20, 201, 20)]
    mono = all(b <= a for a, b in zip(series, series[1:]))
    ok = threshold_for(100) == 15 and abs(rep.p_unlock1 - ref) <= 1e-6 * ref and mono
    emit(7, ok, f"p_unlock1(100) = {rep.p_unlock1:.6e} vs oracle {ref:.6e}; nonincreasing over n=20..200: {mono}")


def test_criterion_08_simulator():
    rows = []
    ok = True
    for i, s in enumerate(builtin_strategies()):
        rep = simulator_experiment(s, 100, 10**5, SEED + i)
        ok &= rep.sim_total_variation <= rep.tv_bound
        rows.append(f"{s.label} {rep.sim_total_variation:.4g}<={rep.tv_bound:.4g}")
    emit(8, ok, "TV vs bound: " + ", ".join(rows))


def test_criterion_09_supermartingale():
    n, trials = 1000, 10**5
    t = time.perf_counter()
    checks = [c for i, spec in enumerate(builtin_specs(n)) for c in verify_tail(spec, standard_t_grid(n), trials, SEED + i)]
    elapsed = time.perf_counter() - t
    spot = azuma_supermartingale_bound(100, 10)
    ok = all(c.passed for c in checks) and len(checks) == 16 and abs(spot - math.exp(-0.5)) <= 1e-15 and round(spot, 5) == 0.60653
    emit(9, ok, f"{sum(c.passed for c in checks)}/{len(checks)} tail checks pass in {elapsed:.1f}s; spot value {spot:.5f}")


def _snapshot(root: Path) -> dict:
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    out = str(tmp_path / "run")
    first = cli.main(["all", "--seed", str(SEED), "--output-dir", out])
    before = _snapshot(tmp_path / "run")
    second = cli.main(["all", "--seed", str(SEED), "--workers", "2", "--output-dir", out])
    after = _snapshot(tmp_path / "run")
    changed = sorted(str(k) for k in before if before[k] != after.get(k))
    ok = first == second == 0 and before.keys() == after.keys() and not changed
    emit(10, ok, f"{len(before)} files byte-identical across reruns with 1 and 2 workers (changed: {changed or 'none'})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
