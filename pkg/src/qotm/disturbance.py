"""How much a two-outcome measurement must disturb the QRAC.

A POVM ``(E0, I - E0)`` with ``E0 = a0 I + v . sigma`` is scored by the trace
distance between the outcome-averaged post-measurement states of
``enc(b0, 0)`` and ``enc(b0, 1)`` (maximised over ``b0``), subject to the
measurement recovering ``b0`` with average probability at least a threshold
(0.83 by default).

Two evaluation routes exist:

* :func:`objective` / :func:`constraint` build the operators explicitly with
  :mod:`qotm.qmath` (slow, literal).
* :func:`objective_batch` / :func:`constraint_batch` use the closed form
  ``Phi(u . sigma) = (A u + (1 - A)(n . u) n) . sigma`` with
  ``A = sqrt(a0^2 - r^2) + sqrt((1 - a0)^2 - r^2)``, ``r = |v|``,
  ``n = v / r``.  They are vectorised and drive the solvers and the net.

The test-suite checks the two routes against each other.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .parallel import map_blocks
from .qmath import (
    TAU_NUM,
    TAU_PSD,
    BlochVector,
    HermitianOp2,
    QubitPovm,
    born_prob,
    post_measurement_mixture,
    trace_distance,
)
from .qrac import encode, mixture_rho

DEFAULT_THRESHOLD = 0.83
CLAIM_BOUND = 0.3
TAU_CON = 1e-6


class InfeasiblePovm(ValueError):
    pass


class NoFeasiblePoint(RuntimeError):
    pass


@dataclass(frozen=True)
class PovmParams:
    """``E0 = a0 I + vx X + vy Y + vz Z`` and ``E1 = I - E0``."""

    a0: float
    vx: float
    vy: float
    vz: float

    @classmethod
    def from_array(cls, x) -> PovmParams:
        a0, vx, vy, vz = (float(c) for c in x)
        return cls(a0, vx, vy, vz)

    @classmethod
    def from_povm(cls, povm: QubitPovm) -> PovmParams:
        a0, v = povm.e0.to_bloch()
        return cls(a0, v.x, v.y, v.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.vx, self.vy, self.vz])

    @property
    def radius(self) -> float:
        return math.sqrt(self.vx**2 + self.vy**2 + self.vz**2)

    def feasible(self, tol: float = TAU_PSD) -> bool:
        r = self.radius
        return self.a0 - r >= -tol and self.a0 + r <= 1.0 + tol

    def effect(self) -> HermitianOp2:
        return HermitianOp2.from_bloch(self.a0, BlochVector(self.vx, self.vy, self.vz))

    def to_povm(self) -> QubitPovm:
        if not self.feasible():
            raise InfeasiblePovm(f"{self} is not a valid POVM")
        return QubitPovm.from_effect(self.effect())

    def to_dict(self) -> dict:
        return asdict(self)


Z_PROJECTIVE = PovmParams(0.5, 0.0, 0.0, 0.5)
TRIVIAL = PovmParams(0.5, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# literal route

def objective(params: PovmParams) -> tuple[float, int]:
    """``max_b0 T(Phi(enc(b0,0)), Phi(enc(b0,1)))`` and the maximising ``b0`` (ties -> 0)."""
    povm = params.to_povm()
    values = []
    for b0 in (0, 1):
        s0 = post_measurement_mixture(povm, encode(b0, 0).rho)
        s1 = post_measurement_mixture(povm, encode(b0, 1).rho)
        values.append(trace_distance(s0, s1))
    if values[1] > values[0] + TAU_NUM:
        return values[1], 1
    return values[0], 0


def constraint(params: PovmParams) -> float:
    """Average probability of recovering ``b0`` with the effects as guesses."""
    povm = params.to_povm()
    return 0.5 * (born_prob(povm.e0, mixture_rho(0)) + born_prob(povm.e1, mixture_rho(1)))


# ---------------------------------------------------------------------------
# closed-form vectorised route

def _bloch(op: HermitianOp2) -> np.ndarray:
    return op.to_bloch()[1].as_array()


# Bloch difference of the two states that must stay hard to tell apart, per b0
_DIFFS = np.array([_bloch(encode(b0, 0).rho) - _bloch(encode(b0, 1).rho) for b0 in (0, 1)])
# constraint = 1/2 + v . _CON_DIR
_CON_DIR = _bloch(mixture_rho(0)) - _bloch(mixture_rho(1))


def _split(p: np.ndarray):
    p = np.asarray(p, dtype=float)
    return p[..., 0], p[..., 1:]


def objective_batch(p, per_b0: bool = False) -> np.ndarray:
    """Objective for an array of parameter rows ``(..., 4)``; inputs must be PSD-feasible."""
    a0, v = _split(p)
    r = np.linalg.norm(v, axis=-1)
    root0 = np.sqrt(np.clip(a0 * a0 - r * r, 0.0, None))
    root1 = np.sqrt(np.clip((1.0 - a0) ** 2 - r * r, 0.0, None))
    A = root0 + root1
    safe = np.where(r > 0, r, 1.0)
    n = v / safe[..., None]
    vals = []
    for u in _DIFFS:
        nu = n @ u
        w = A[..., None] * u + ((1.0 - A) * nu)[..., None] * n
        vals.append(np.linalg.norm(w, axis=-1))
    vals = np.stack(vals, axis=-1)
    return vals if per_b0 else vals.max(axis=-1)


def constraint_batch(p) -> np.ndarray:
    _, v = _split(p)
    return 0.5 + v @ _CON_DIR


def psd_violation(p) -> np.ndarray:
    a0, v = _split(p)
    r = np.linalg.norm(v, axis=-1)
    return np.maximum(0.0, r - a0) + np.maximum(0.0, a0 + r - 1.0)


def repair(p) -> np.ndarray:
    """Clamp ``a0`` to [0, 1] and shrink ``v`` radially into the PSD cone."""
    p = np.array(p, dtype=float)
    a0 = np.clip(p[..., 0], 0.0, 1.0)
    v = p[..., 1:]
    r = np.linalg.norm(v, axis=-1)
    rmax = np.minimum(a0, 1.0 - a0)
    scale = np.where(r > rmax, rmax / np.where(r > 0, r, 1.0), 1.0)
    p[..., 0] = a0
    p[..., 1:] = v * scale[..., None]
    return p


def sample_feasible(rng: np.random.Generator, size: int) -> np.ndarray:
    """``a0 ~ U[0,1]``, isotropic direction, ``|v| ~ U[0, min(a0, 1-a0)]``."""
    a0 = rng.random(size)
    d = rng.standard_normal((size, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.random(size) * np.minimum(a0, 1.0 - a0)
    return np.column_stack([a0, d * r[:, None]])


def sample_constrained(rng: np.random.Generator, size: int, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Feasible points that also meet the recovery constraint."""
    vz_min = min_vz(threshold)
    vz = vz_min + (0.5 - vz_min) * rng.random(size)
    a0 = vz + (1.0 - 2.0 * vz) * rng.random(size)
    room = np.sqrt(np.clip(np.minimum(a0, 1.0 - a0) ** 2 - vz**2, 0.0, None))
    rt = room * rng.random(size)
    phi = 2.0 * math.pi * rng.random(size)
    return np.column_stack([a0, rt * np.cos(phi), rt * np.sin(phi), vz])


def min_vz(threshold: float) -> float:
    # the constraint depends on v only through its z component
    return (threshold - 0.5) / _CON_DIR[2]


def project_constraint(x, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Nearby valid point with ``constraint >= threshold`` (for thresholds below 0.854).

    Raises ``vz`` to its minimum, centres ``a0`` enough to hold that ``vz``
    and shrinks ``(vx, vy)`` to stay inside the PSD cone.
    """
    a0, vx, vy, vz = repair(x)
    lo = min_vz(threshold) * (1.0 + 1e-14)  # keeps round-off on the feasible side
    if vz >= lo:
        return np.array([a0, vx, vy, vz])
    vz = lo
    a0 = min(max(a0, vz), 1.0 - vz)
    rmax = min(a0, 1.0 - a0)
    t = math.hypot(vx, vy)
    room = math.sqrt(max(rmax * rmax - vz * vz, 0.0))
    if t > room:
        vx, vy = vx * room / t, vy * room / t
    return np.array([a0, vx, vy, vz])


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class OptimizationReport:
    best_params: PovmParams
    objective: float
    constraint_value: float
    argmax_b0: int
    solver: str
    restarts_or_generations: int
    seed: int
    wall_time: float | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["best_params"] = self.best_params.to_dict()
        return d


def _finish(x, solver, count, seed, started) -> OptimizationReport:
    params = PovmParams.from_array(repair(x))
    value, b0 = objective(params)
    return OptimizationReport(
        best_params=params,
        objective=value,
        constraint_value=constraint(params),
        argmax_b0=b0,
        solver=solver,
        restarts_or_generations=count,
        seed=seed,
        wall_time=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# multi-start simplex refinement

@dataclass(frozen=True)
class MultistartConfig:
    threshold: float = DEFAULT_THRESHOLD
    penalty: float = 10.0
    escalation_tol: float = 1e-4
    max_escalations: int = 3
    xatol: float = 1e-8
    fatol: float = 1e-8
    maxiter: int = 2000
    initial_points: tuple[tuple[float, float, float, float], ...] | None = None


def _objective_scalar(a0: float, vx: float, vy: float, vz: float) -> float:
    # float-only copy of objective_batch for the simplex inner loop
    r = math.sqrt(vx * vx + vy * vy + vz * vz)
    A = math.sqrt(max(a0 * a0 - r * r, 0.0)) + math.sqrt(max((1.0 - a0) ** 2 - r * r, 0.0))
    if r > 0:
        nx, ny, nz = vx / r, vy / r, vz / r
    else:
        nx = ny = nz = 0.0
    best = 0.0
    for ux, uy, uz in _DIFFS_T:
        nu = (nx * ux + ny * uy + nz * uz) * (1.0 - A)
        wx, wy, wz = A * ux + nu * nx, A * uy + nu * ny, A * uz + nu * nz
        best = max(best, math.sqrt(wx * wx + wy * wy + wz * wz))
    return best


_DIFFS_T = [tuple(float(c) for c in u) for u in _DIFFS]
_CON_T = tuple(float(c) for c in _CON_DIR)


def _penalised(x, weight, threshold):
    a0, vx, vy, vz = (float(c) for c in x)
    r = math.sqrt(vx * vx + vy * vy + vz * vz)
    psd = max(0.0, r - a0) + max(0.0, a0 + r - 1.0)
    con = 0.5 + vx * _CON_T[0] + vy * _CON_T[1] + vz * _CON_T[2]
    a = min(max(a0, 0.0), 1.0)
    rmax = min(a, 1.0 - a)
    if r > rmax:
        s = rmax / r
        vx, vy, vz = vx * s, vy * s, vz * s
    return -_objective_scalar(a, vx, vy, vz) + weight * (max(0.0, threshold - con) + psd)


def _one_restart(index: int, seed: int, cfg: MultistartConfig, start):
    if start is None:
        start = sample_feasible(np.random.default_rng([seed, index]), 1)[0]
    x = np.asarray(start, dtype=float)
    weight = cfg.penalty
    for _ in range(cfg.max_escalations + 1):
        res = minimize(
            _penalised,
            x,
            args=(weight, cfg.threshold),
            method="Nelder-Mead",
            options={"xatol": cfg.xatol, "fatol": cfg.fatol, "maxiter": cfg.maxiter},
        )
        x = repair(res.x)
        if cfg.threshold - float(constraint_batch(x)) <= cfg.escalation_tol:
            break
        weight *= 2.0
    # the penalty leaves residual violations of order escalation_tol; close them exactly
    x = project_constraint(x, cfg.threshold)
    con = float(constraint_batch(x))
    return x, float(objective_batch(x)), con


def _restart_block(indices, seed, cfg, starts):
    return [_one_restart(i, seed, cfg, s) for i, s in zip(indices, starts)]


def solve_multistart(
    restarts: int,
    seed: int,
    config: MultistartConfig | None = None,
    workers: int = 1,
) -> OptimizationReport:
    """Best feasible optimum over ``restarts`` penalised Nelder-Mead runs."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    cfg = config or MultistartConfig()
    started = time.perf_counter()
    starts = [None] * restarts
    if cfg.initial_points is not None:
        for i, p in enumerate(cfg.initial_points[:restarts]):
            starts[i] = p
    chunk = 50
    jobs = [
        (list(range(lo, min(lo + chunk, restarts))), seed, cfg, starts[lo : lo + chunk])
        for lo in range(0, restarts, chunk)
    ]
    results = [r for block in map_blocks(_restart_block, jobs, workers) for r in block]
    best = None
    for x, val, con in results:
        if con < cfg.threshold - TAU_CON:
            continue
        if best is None or val > best[1]:
            best = (x, val)
    if best is None:
        raise NoFeasiblePoint(f"none of {restarts} restarts ended feasible")
    return _finish(best[0], "multistart", restarts, seed, started)


# ---------------------------------------------------------------------------
# differential evolution

@dataclass(frozen=True)
class EvolutionConfig:
    threshold: float = DEFAULT_THRESHOLD
    mutation: tuple[float, float] = (0.5, 1.0)
    recombination: float = 0.9
    tol: float = 1e-12
    initial_population: tuple[tuple[float, float, float, float], ...] | None = None


def _better(f_new, c_new, f_old, c_old):
    """Feasibility-first comparison (violation ``c``, objective ``f``)."""
    both_ok = (c_new <= 0) & (c_old <= 0)
    return np.where(both_ok, f_new > f_old, c_new < c_old)


def solve_evolution(
    generations_max: int,
    population: int,
    seed: int,
    config: EvolutionConfig | None = None,
) -> OptimizationReport:
    """DE/rand/1/bin with radial repair and feasibility-first selection."""
    if population < 8:
        raise ValueError("population must be >= 8")
    cfg = config or EvolutionConfig()
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    if cfg.initial_population is not None:
        pop = repair(np.array(cfg.initial_population, dtype=float))
        if len(pop) != population:
            raise ValueError("initial_population size must equal population")
    else:
        pop = sample_feasible(rng, population)
    fit = objective_batch(pop)
    viol = np.maximum(0.0, cfg.threshold - constraint_batch(pop))
    lo_f, hi_f = cfg.mutation
    idx = np.arange(population)
    others = np.array([np.delete(idx, i) for i in idx])
    gen = 0
    for gen in range(1, generations_max + 1):
        # three distinct partners per member, none equal to the member
        r = np.argsort(rng.random((population, population - 1)), axis=1)[:, :3]
        r1, r2, r3 = (others[idx, r[:, k]] for k in range(3))
        f = lo_f + (hi_f - lo_f) * rng.random()
        mutant = pop[r1] + f * (pop[r2] - pop[r3])
        cross = rng.random((population, 4)) < cfg.recombination
        cross[idx, rng.integers(0, 4, population)] = True
        trial = repair(np.where(cross, mutant, pop))
        t_fit = objective_batch(trial)
        t_viol = np.maximum(0.0, cfg.threshold - constraint_batch(trial))
        take = _better(t_fit, t_viol, fit, viol)
        pop[take] = trial[take]
        fit[take] = t_fit[take]
        viol[take] = t_viol[take]
        if np.all(viol <= 0) and fit.max() - fit.min() <= cfg.tol:
            break
    ok = viol <= 0
    if not ok.any():
        raise NoFeasiblePoint("no feasible population member")
    best = np.flatnonzero(ok)[np.argmax(fit[ok])]
    return _finish(pop[best], "evolution", gen, seed, started)


# ---------------------------------------------------------------------------
# grid certification

@dataclass(frozen=True)
class CertifierSummary:
    grid_step: float
    points_total: int
    points_feasible: int
    net_max: float
    net_argmax: PovmParams | None
    lattice: str = "box"
    bound_kind: str = "heuristic"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["net_argmax"] = None if self.net_argmax is None else self.net_argmax.to_dict()
        return d


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    k = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(k + 1), 12)


def certify_net(
    grid_step: float,
    threshold: float = DEFAULT_THRESHOLD,
    lattice: str = "box",
) -> CertifierSummary:
    """Exhaustive objective maximum over a parameter lattice.

    ``box``: ``a0`` in [0, 1] and each ``v`` component in [-1, 1], all at
    ``grid_step``.  ``slab``: the same ``a0`` axis, ``vx, vy`` in [-0.5, 0.5]
    and ``vz`` spanning only the constraint-satisfying range, so every point
    is near the feasible set.  Neither is a proof: no Lipschitz argument backs
    the grid.
    """
    if not 0 < grid_step <= 0.25:
        raise ValueError("grid_step must lie in (0, 0.25]")
    a_axis = _axis(0.0, 1.0, grid_step)
    if lattice == "box":
        vx = vy = vz = _axis(-1.0, 1.0, grid_step)
    elif lattice == "slab":
        vx = vy = _axis(-0.5, 0.5, grid_step)
        lo = min_vz(threshold)
        vz = np.linspace(lo, 0.5, int(math.ceil((0.5 - lo) / grid_step)) + 1)
    else:
        raise ValueError(f"unknown lattice {lattice!r}")
    V = np.stack(np.meshgrid(vx, vy, vz, indexing="ij"), axis=-1).reshape(-1, 3)
    r = np.linalg.norm(V, axis=1)
    con = 0.5 + V @ _CON_DIR
    con_ok = con >= threshold - TAU_NUM
    total = feasible = 0
    best_val, best_p = -math.inf, None
    for a0 in a_axis:
        total += len(V)
        mask = con_ok & (a0 - r >= -TAU_PSD) & (a0 + r <= 1.0 + TAU_PSD)
        if not mask.any():
            continue
        pts = np.column_stack([np.full(mask.sum(), a0), V[mask]])
        feasible += len(pts)
        vals = objective_batch(pts)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_p = float(vals[k]), PovmParams.from_array(pts[k])
    return CertifierSummary(
        grid_step=grid_step,
        points_total=total,
        points_feasible=feasible,
        net_max=best_val if best_p is not None else 0.0,
        net_argmax=best_p,
        lattice=lattice,
    )


# ---------------------------------------------------------------------------
# consequences

def guess_bound(objective_bound: float) -> float:
    """Best guessing probability for a bit hidden behind states at trace distance ``objective_bound``."""
    if not 0.0 <= objective_bound <= 1.0:
        raise ValueError("objective_bound must lie in [0, 1]")
    return 0.5 * (1.0 + objective_bound)


@dataclass(frozen=True)
class ClaimInstance:
    constraint: float
    objective: float
    claim_holds: bool


def verify_claim_instance(
    params: PovmParams,
    threshold: float = DEFAULT_THRESHOLD,
    bound: float = CLAIM_BOUND,
) -> ClaimInstance:
    con = constraint(params)
    val, _ = objective(params)
    return ClaimInstance(con, val, bool(con < threshold or val <= bound))


@dataclass
class ClaimSweep:
    samples: int
    conditioned: bool
    nonvacuous: int
    violations: int
    max_objective_nonvacuous: float
    worst_params: PovmParams | None = field(default=None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_params"] = None if self.worst_params is None else self.worst_params.to_dict()
        return d


def sweep_claims(
    samples: int,
    seed: int,
    conditioned: bool = False,
    threshold: float = DEFAULT_THRESHOLD,
    bound: float = CLAIM_BOUND,
    chunk: int = 200_000,
) -> ClaimSweep:
    """Check the claim on random feasible POVMs.

    Unconditioned draws rarely meet the constraint (the claim is then
    vacuous); ``conditioned=True`` samples only constraint-satisfying POVMs.
    """
    rng = np.random.default_rng(seed)
    nonvac = viol = 0
    worst_val, worst = -math.inf, None
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        pts = sample_constrained(rng, m, threshold) if conditioned else sample_feasible(rng, m)
        done += m
        active = constraint_batch(pts) >= threshold
        if not active.any():
            continue
        vals = objective_batch(pts[active])
        nonvac += int(active.sum())
        viol += int((vals > bound).sum())
        k = int(np.argmax(vals))
        if vals[k] > worst_val:
            worst_val, worst = float(vals[k]), PovmParams.from_array(pts[active][k])
    return ClaimSweep(
        samples=samples,
        conditioned=conditioned,
        nonvacuous=nonvac,
        violations=viol,
        max_objective_nonvacuous=worst_val if worst is not None else 0.0,
        worst_params=worst,
    )


def params_for_angle(phi: float) -> PovmParams:
    """Projective measurement onto ``cos(phi)|0> + sin(phi)|1>``."""
    return PovmParams(0.5, 0.5 * math.sin(2 * phi), 0.0, 0.5 * math.cos(2 * phi))


def reports_consistent(report: OptimizationReport, tol: float = TAU_NUM) -> bool:
    val, _ = objective(report.best_params)
    return abs(val - report.objective) <= tol and abs(constraint(report.best_params) - report.constraint_value) <= tol
