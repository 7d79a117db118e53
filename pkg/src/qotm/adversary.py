"""Product-strategy attacks on the one-time memory.

A :class:`ProductStrategy` measures every qubit with the same two-outcome POVM
and turns each outcome bit into guesses for ``r0[i]`` and ``r1[i]`` through
fixed lookup tables.  It then queries some of the oracles with the guessed
strings.  For such strategies all per-bit statistics are exact and the unlock
probabilities are binomial or multinomial tails.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

from .bounds import log_binom_sf, logsumexp_fsum
from .disturbance import (
    CLAIM_BOUND,
    DEFAULT_THRESHOLD,
    PovmParams,
    guess_bound,
    objective,
    params_for_angle,
    solve_multistart,
)
from .parallel import block_sizes, map_blocks
from .protocol import threshold_for
from .qmath import HermitianOp2, QubitPovm, trace_product
from .qrac import encode

QRAC_CEILING = 0.854
MAX_OUTPUTS = 2**16


class OutputSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ProductStrategy:
    """Same POVM on every qubit; ``guess0[c]`` / ``guess1[c]`` map outcome ``c`` to bit guesses.

    ``queries`` lists the oracles queried (in order) with the guessed strings;
    ``target`` is the message the simulator asks for.
    """

    povm: QubitPovm
    guess0: tuple[int, int] = (0, 1)
    guess1: tuple[int, int] = (0, 1)
    label: str = "strategy"
    queries: tuple[int, ...] = (0, 1)
    target: int | None = None

    @property
    def output_alphabet(self) -> int:
        return 2 ** len(self.queries)

    def outcome1_probs(self) -> np.ndarray:
        """``P[c = 1 | b0, b1]`` as a 2x2 array."""
        p = [[trace_product(self.povm.e1, encode(b0, b1).rho) for b1 in (0, 1)] for b0 in (0, 1)]
        return np.clip(np.array(p), 0.0, 1.0)

    def joint_correct(self) -> np.ndarray:
        """``J[x, y] = P[guess0 correct == x, guess1 correct == y]`` for one uniform qubit."""
        p1 = self.outcome1_probs()
        J = np.zeros((2, 2))
        for b0 in (0, 1):
            for b1 in (0, 1):
                for c, pc in ((0, 1.0 - p1[b0, b1]), (1, p1[b0, b1])):
                    J[int(self.guess0[c] == b0), int(self.guess1[c] == b1)] += 0.25 * pc
        return J

    def per_bit(self, alpha: int) -> float:
        J = self.joint_correct()
        return float(J[1, :].sum() if alpha == 0 else J[:, 1].sum())

    def simulator_target(self) -> int:
        if self.target is not None:
            return self.target
        return 0 if self.per_bit(0) >= self.per_bit(1) else 1

    def guesses(self, outcomes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g0 = np.asarray(self.guess0, dtype=np.uint8)[outcomes]
        g1 = np.asarray(self.guess1, dtype=np.uint8)[outcomes]
        return g0, g1

    def attack(self, inst, rng: np.random.Generator) -> tuple:
        """Run against an :class:`~qotm.protocol.OtmInstance`; returns the oracle replies."""
        p1 = self.outcome1_probs()[inst.r0, inst.r1]
        c = (rng.random(inst.n) < p1).astype(np.uint8)
        x = self.guesses(c)
        return tuple(inst.oracle(j)(x[j]) for j in self.queries)


def projective_strategy(phi: float, guess0=(0, 1), guess1=(0, 1), label=None, queries=(0, 1), target=None):
    povm = params_for_angle(phi).to_povm()
    return ProductStrategy(povm, tuple(guess0), tuple(guess1), label or f"angle-{math.degrees(phi):.2f}", tuple(queries), target)


Z_POVM = QubitPovm(HermitianOp2.diag(1.0, 0.0), HermitianOp2.diag(0.0, 1.0))
X_POVM = projective_strategy(math.pi / 4).povm
TRIVIAL_POVM = QubitPovm(HermitianOp2.diag(0.5, 0.5), HermitianOp2.diag(0.5, 0.5))

# every map from an outcome bit to a guessed bit
GUESS_TABLES = ((0, 0), (1, 1), (0, 1), (1, 0))


# ---------------------------------------------------------------------------
# success profiles

@dataclass(frozen=True)
class SuccessProfile:
    p: tuple[float, ...]
    threshold: float = DEFAULT_THRESHOLD
    set_lo: tuple[int, ...] = ()
    set_hi: tuple[int, ...] = ()

    @classmethod
    def from_probs(cls, p, threshold: float = DEFAULT_THRESHOLD) -> SuccessProfile:
        p = tuple(float(x) for x in p)
        lo = tuple(i for i, x in enumerate(p) if x < threshold)
        hi = tuple(i for i, x in enumerate(p) if x >= threshold)
        return cls(p, threshold, lo, hi)

    def to_dict(self) -> dict:
        return asdict(self)


def profile_of(strategy: ProductStrategy, alpha: int, n: int = 1) -> SuccessProfile:
    """Exact per-bit probabilities of guessing ``r_alpha[i]`` (equal across ``i``)."""
    return SuccessProfile.from_probs([strategy.per_bit(alpha)] * n)


# ---------------------------------------------------------------------------
# proof arithmetic

@dataclass(frozen=True)
class ConstantCheck:
    value: float
    cap: float
    holds: bool


def lemma_acc_input_bound() -> ConstantCheck:
    """Mean per-bit success cap when at least 2/5 of the bits sit below 0.83."""
    mean_cap = QRAC_CEILING * 3 / 5 + DEFAULT_THRESHOLD * 2 / 5
    return ConstantCheck(mean_cap, 0.845, mean_cap <= 0.845)


def lemma_log_tail(n: int) -> float:
    """Natural log of ``exp(-(0.85 n - 0.845 n)^2 / 2n)``."""
    t = (0.85 - 0.845) * n
    return -t * t / (2.0 * n)


def soundness_fraction() -> ConstantCheck:
    """Fraction of ``r1`` guessable: all low-success bits plus 70% of the rest."""
    fraction = 2 / 5 + 7 / 10 * 3 / 5
    return ConstantCheck(fraction, 0.85, fraction <= 0.85)


def corollary_mean_cap(per_bit_cap: float = None) -> float:
    cap = guess_bound(CLAIM_BOUND) if per_bit_cap is None else per_bit_cap
    return 2 / 5 * 1.0 + 3 / 5 * cap


# ---------------------------------------------------------------------------
# exact unlock probabilities

@dataclass
class HybridReport:
    label: str
    n: int
    trials: int
    p_unlock0: float
    p_unlock1: float
    p_unlock_both: float
    sim_total_variation: float | None = None
    tv_sigma: float | None = None
    tv_bound: float | None = None
    target: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def ordered(self) -> bool:
        probs = (self.p_unlock0, self.p_unlock1, self.p_unlock_both)
        return all(0.0 <= p <= 1.0 for p in probs) and self.p_unlock_both <= min(self.p_unlock0, self.p_unlock1) * (1 + 1e-12)

    def to_dict(self) -> dict:
        return asdict(self)


def log_both_tail(n: int, k: int, J: np.ndarray) -> float:
    """``log P[N0 >= k and N1 >= k]`` for ``n`` i.i.d. draws of the 2x2 joint ``J``.

    Counts ``a`` (both right), ``b`` (only r0), ``c`` (only r1), ``d`` (neither).
    """
    p11, p10, p01, p00 = J[1, 1], J[1, 0], J[0, 1], J[0, 0]
    logs = []
    B, C = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    for a in range(n + 1):
        D = n - a - B - C
        ok = (D >= 0) & (a + B >= k) & (a + C >= k)
        if not ok.any():
            continue
        b, c, d = B[ok], C[ok], D[ok]
        lp = (
            gammaln(n + 1) - gammaln(a + 1) - gammaln(b + 1) - gammaln(c + 1) - gammaln(d + 1)
            + xlogy(a, p11) + xlogy(b, p10) + xlogy(c, p01) + xlogy(d, p00)
        )
        logs.append(lp)
    if not logs:
        return -math.inf
    total = logsumexp_fsum(np.concatenate(logs))
    if math.isnan(total):
        raise ValueError("joint distribution produced a NaN tail")
    return min(0.0, total)


def attack_unlock_probs(strategy: ProductStrategy, n: int) -> HybridReport:
    """Exact probabilities that the strategy's queries unlock O0, O1, and both."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = n - threshold_for(n)  # correct bits needed
    J = strategy.joint_correct()
    q = (float(J[1, :].sum()), float(J[:, 1].sum()))
    p = [0.0, 0.0]
    for j in set(strategy.queries):
        p[j] = math.exp(log_binom_sf(n, k, q[j]))
    both = math.exp(log_both_tail(n, k, J)) if set(strategy.queries) >= {0, 1} else 0.0
    return HybridReport(
        strategy.label, n, 0, p[0], p[1], both, target=strategy.simulator_target(), extra={"q0": q[0], "q1": q[1]}
    )


# ---------------------------------------------------------------------------
# simulator vs real view

def _sim_block(strategy: ProductStrategy, n: int, size: int, ss: np.random.SeedSequence, coupled: bool):
    # one block of real-world and simulated views, as output-code histograms
    thr = threshold_for(n)
    p1 = strategy.outcome1_probs()
    target = strategy.simulator_target()
    real_ss, sim_ss = ss.spawn(2)
    hists = []
    for world, wss in (("real", real_ss), ("sim", real_ss if coupled else sim_ss)):
        rng = np.random.default_rng(wss)
        r = rng.integers(0, 2, (2, size, n), dtype=np.uint8)
        c = (rng.random((size, n)) < p1[r[0], r[1]]).astype(np.uint8)
        x = strategy.guesses(c)
        code = np.zeros(size, dtype=np.int64)
        for pos, j in enumerate(strategy.queries):
            if world == "sim" and j != target:
                continue  # null oracle: always rejects
            acc = np.count_nonzero(x[j] != r[j], axis=1) <= thr
            code |= acc.astype(np.int64) << pos
        hists.append(np.bincount(code, minlength=strategy.output_alphabet))
    return hists[0], hists[1]


def _sim_block_instances(strategy, n, size, ss, coupled, m0, m1):
    # same experiment through real OtmInstance objects and oracles
    from .protocol import otm_prep

    target = strategy.simulator_target()
    counts = (Counter(), Counter())
    rng = np.random.default_rng(ss)
    for _ in range(size):
        s_prep, s_meas, s_fake, s_prep2, s_meas2 = (int(x) for x in rng.integers(0, 2**63, 5))
        if coupled:
            s_prep2, s_meas2 = s_prep, s_meas
        inst = otm_prep(n, m0, m1, s_prep)
        counts[0][strategy.attack(inst, np.random.default_rng(s_meas))] += 1
        hidden = m1 if target == 0 else m0
        fake = np.random.default_rng(s_fake).integers(0, 256, len(hidden), dtype=np.uint8).tobytes()
        ms = (m0, fake) if target == 0 else (fake, m1)
        sim = otm_prep(n, ms[0], ms[1], s_prep2, null_oracle=1 - target)
        counts[1][strategy.attack(sim, np.random.default_rng(s_meas2))] += 1
    return counts


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def tv_noise_sigma(pooled: dict, trials: int) -> float:
    """Scale of the empirical TV between two same-law samples of size ``trials``."""
    return 0.5 * math.fsum(math.sqrt(2.0 * v * (1.0 - v) / trials) for v in pooled.values())


def simulator_experiment(
    strategy: ProductStrategy,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    engine: str = "batch",
    m0: bytes = b"message-zero",
    m1: bytes = b"message-one",
    coupled: bool = True,
) -> HybridReport:
    """Empirical TV distance between the strategy's real and simulated views.

    In the simulated world the oracle the simulator did not ask about is null
    and its message is replaced by random bytes.  ``engine="instance"`` routes
    every trial through :func:`~qotm.protocol.otm_prep` and the oracle objects;
    ``"batch"`` is a vectorised equivalent for large trial counts.

    With ``coupled=True`` both worlds reuse the same preparation and
    measurement randomness.  Each world keeps its exact marginal law, so the
    TV estimate is unchanged in expectation.  The two views then differ only
    on trials where the unasked oracle would have accepted.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if strategy.output_alphabet > MAX_OUTPUTS:
        raise OutputSpaceTooLarge(f"{strategy.output_alphabet} outputs exceed {MAX_OUTPUTS}")
    exact = attack_unlock_probs(strategy, n)
    sizes = block_sizes(trials)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if engine == "batch":
        parts = map_blocks(_sim_block, [(strategy, n, s, ss, coupled) for s, ss in zip(sizes, seeds)], workers)
        real = sum(p[0] for p in parts)
        sim = sum(p[1] for p in parts)
        real_f = {k: v / trials for k, v in enumerate(real) if v}
        sim_f = {k: v / trials for k, v in enumerate(sim) if v}
    elif engine == "instance":
        parts = map_blocks(_sim_block_instances, [(strategy, n, s, ss, coupled, m0, m1) for s, ss in zip(sizes, seeds)], workers)
        real_c, sim_c = Counter(), Counter()
        for a, b in parts:
            real_c.update(a)
            sim_c.update(b)
        real_f = {k: v / trials for k, v in real_c.items()}
        sim_f = {k: v / trials for k, v in sim_c.items()}
    else:
        raise ValueError(f"unknown engine {engine!r}")
    tv = total_variation(real_f, sim_f)
    pooled = {k: 0.5 * (real_f.get(k, 0.0) + sim_f.get(k, 0.0)) for k in set(real_f) | set(sim_f)}
    sigma = tv_noise_sigma(pooled, trials)
    target = strategy.simulator_target()
    accept_other = exact.p_unlock1 if target == 0 else exact.p_unlock0
    exact.trials = trials
    exact.sim_total_variation = tv
    exact.tv_sigma = sigma
    exact.tv_bound = accept_other + 3.0 * sigma
    exact.extra["accept_prob_other"] = accept_other
    exact.extra["engine"] = engine
    exact.extra["coupled"] = coupled
    return exact


# ---------------------------------------------------------------------------
# strategy families

def best_single_angle(step_deg: float = 0.01) -> tuple[ProductStrategy, float]:
    """Projective strategy maximising ``min(q0, q1)`` over an angle sweep and all guess maps."""
    phis = np.deg2rad(np.arange(0.0, 180.0, step_deg))
    best = (-1.0, None)
    for g0 in GUESS_TABLES:
        for g1 in GUESS_TABLES:
            q0, q1 = _angle_sweep(phis, g0, g1)
            score = np.minimum(q0, q1)
            i = int(np.argmax(score))
            if score[i] > best[0] + 1e-15:
                best = (float(score[i]), (phis[i], g0, g1))
    phi, g0, g1 = best[1]
    return projective_strategy(phi, g0, g1, label="best-angle"), float(phi)


def _angle_sweep(phis: np.ndarray, g0, g1) -> tuple[np.ndarray, np.ndarray]:
    # P[c = 0 | state at angle theta] = cos^2(theta - phi); code states are real
    q0 = np.zeros_like(phis)
    q1 = np.zeros_like(phis)
    for b0 in (0, 1):
        for b1 in (0, 1):
            theta = encode(b0, b1).angle
            pc0 = np.cos(theta - phis) ** 2
            for c, pc in ((0, pc0), (1, 1.0 - pc0)):
                q0 += 0.25 * pc * (g0[c] == b0)
                q1 += 0.25 * pc * (g1[c] == b1)
    return q0, q1


def projective_sum_ceiling(step_deg: float = 0.1) -> float:
    """Largest per-bit ``q0 + q1`` over an angle grid of projective strategies."""
    phis = np.deg2rad(np.arange(0.0, 180.0, step_deg))
    top = 0.0
    for g0 in GUESS_TABLES:
        for g1 in GUESS_TABLES:
            q0, q1 = _angle_sweep(phis, g0, g1)
            top = max(top, float((q0 + q1).max()))
    return top


def r1_guess_cap(strategy: ProductStrategy) -> float:
    """Best ``r1[i]`` guess given ``b0`` and the outcome-averaged post-measurement state."""
    val, _ = objective(PovmParams.from_povm(strategy.povm))
    return guess_bound(val)


def disturbance_optimal_strategy(restarts: int = 20, seed: int = 0) -> ProductStrategy:
    rep = solve_multistart(restarts, seed)
    return ProductStrategy(rep.best_params.to_povm(), (0, 1), (0, 1), "disturbance-optimal", (0, 1))


def builtin_strategies() -> list[ProductStrategy]:
    best, _ = best_single_angle()
    return [
        ProductStrategy(Z_POVM, (0, 1), (0, 1), "honest-0", (0,), 0),
        ProductStrategy(X_POVM, (0, 1), (0, 1), "honest-1", (1,), 1),
        ProductStrategy(Z_POVM, (0, 1), (0, 1), "z-basis", (0, 1), 0),
        ProductStrategy(TRIVIAL_POVM, (0, 1), (0, 1), "random-o1", (1,), 0),
        ProductStrategy(TRIVIAL_POVM, (0, 0), (0, 0), "null", (), 0),
        best,
        disturbance_optimal_strategy(),
    ]
