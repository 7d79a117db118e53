"""Concentration bounds and exact binomial tails.

``azuma_supermartingale_bound`` is the ``exp(-t^2 / 2n)`` tail for sums of
indicators whose conditional success probabilities are capped.
``verify_tail`` checks it by Monte Carlo against adaptive Bernoulli processes.
The ``log_binom_*`` helpers evaluate binomial tails exactly in log space so
probabilities far below the double-precision underflow of a naive sum stay
representable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .parallel import block_sizes, map_blocks


# ---------------------------------------------------------------------------
# log-space binomial machinery

def logsumexp_fsum(logs) -> float:
    """``log(sum(exp(logs)))`` with a max shift and compensated summation."""
    logs = np.asarray(logs, dtype=float).ravel()
    if logs.size == 0:
        return -math.inf
    top = float(np.max(logs))
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(np.exp(logs - top)))


def log_binom_pmf(n: int, k, p: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + xlogy(k, p) + xlog1py(n - k, -p)


def log_binom_cdf(n: int, k: int, p: float) -> float:
    """``log P[Bin(n, p) <= k]``."""
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    return min(0.0, logsumexp_fsum(log_binom_pmf(n, np.arange(0, k + 1), p)))


def log_binom_sf(n: int, k: int, p: float) -> float:
    """``log P[Bin(n, p) >= k]``."""
    if k <= 0:
        return 0.0
    if k > n:
        return -math.inf
    return min(0.0, logsumexp_fsum(log_binom_pmf(n, np.arange(k, n + 1), p)))


def binom_cdf(n: int, k: int, p: float) -> float:
    return math.exp(log_binom_cdf(n, k, p))


def binom_sf(n: int, k: int, p: float) -> float:
    return math.exp(log_binom_sf(n, k, p))


# ---------------------------------------------------------------------------
# Azuma-Hoeffding for capped adaptive indicators

def azuma_supermartingale_bound(n: int, t: float) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    return math.exp(-t * t / (2.0 * n))


# rule(step, successes_so_far, last_outcome, cap) -> success probability per trial
AdaptiveRule = Callable[[int, np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class AdaptiveBernoulliSpec:
    """An adaptive indicator process whose step-``i`` probability never exceeds ``caps[i]``.

    The rule sees the history prefix through two sufficient statistics: the
    running number of successes and the previous outcome.
    """

    n: int
    caps: tuple[float, ...]
    rule: AdaptiveRule
    name: str = "custom"

    def __post_init__(self):
        if len(self.caps) != self.n:
            raise ValueError("caps must have length n")
        if any(not 0.0 <= c <= 1.0 for c in self.caps):
            raise ValueError("caps must lie in [0, 1]")


def saturating_rule(i, successes, last, cap):
    return np.full(successes.shape, cap)


def zero_rule(i, successes, last, cap):
    return np.zeros(successes.shape)


def decaying_rule(i, successes, last, cap):
    return cap * 0.99 ** successes


def rebound_rule(i, successes, last, cap):
    # full cap after a failure, half after a success
    return np.where(last == 1, 0.5 * cap, cap)


BUILTIN_RULES: dict[str, AdaptiveRule] = {
    "saturating": saturating_rule,
    "zero": zero_rule,
    "decaying": decaying_rule,
    "rebound": rebound_rule,
}


def builtin_specs(n: int, cap: float = 0.5) -> list[AdaptiveBernoulliSpec]:
    caps = (cap,) * n
    return [AdaptiveBernoulliSpec(n, caps, rule, name) for name, rule in BUILTIN_RULES.items()]


@dataclass(frozen=True)
class TailCheck:
    t: float
    bound: float
    empirical: float
    trials: int
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def tail_slack(bound: float, trials: int) -> float:
    return 3.0 * math.sqrt(bound * (1.0 - bound) / trials)


def _simulate_block(spec: AdaptiveBernoulliSpec, size: int, ss: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(ss)
    successes = np.zeros(size, dtype=np.int64)
    last = np.zeros(size, dtype=np.int8)
    for i, cap in enumerate(spec.caps):
        prob = np.asarray(spec.rule(i, successes, last, cap), dtype=float)
        if np.any(prob > cap + 1e-12) or np.any(prob < 0):
            raise ValueError(f"rule {spec.name!r} left [0, cap] at step {i}")
        x = rng.random(size) < prob
        successes += x
        last = x.astype(np.int8)
    return successes - math.fsum(spec.caps)


def simulate_deviations(spec: AdaptiveBernoulliSpec, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Samples of ``sum X_i - sum p_i``; identical for any worker count."""
    sizes = block_sizes(trials)
    root = np.random.SeedSequence(seed)
    seeds = root.spawn(len(sizes))
    parts = map_blocks(_simulate_block, [(spec, s, ss) for s, ss in zip(sizes, seeds)], workers)
    return np.concatenate(parts)


def verify_tail(
    spec: AdaptiveBernoulliSpec,
    t_grid: Sequence[float],
    trials: int,
    seed: int,
    workers: int = 1,
) -> list[TailCheck]:
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    dev = simulate_deviations(spec, trials, seed, workers)
    checks = []
    for t in t_grid:
        bound = azuma_supermartingale_bound(spec.n, t)
        # small offset guards float noise in the fsum of caps
        empirical = float(np.mean(dev >= t - 1e-9))
        passed = empirical <= bound + tail_slack(bound, trials)
        checks.append(TailCheck(float(t), bound, empirical, trials, bool(passed)))
    return checks


def standard_t_grid(n: int) -> list[float]:
    r = math.sqrt(n)
    return [0.5 * r, r, 2 * r, 3 * r]
