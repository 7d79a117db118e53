"""One-time memory from QRAC qubits and two fuzzy-lock oracles.

``otm_prep`` samples two secret strings, encodes them pairwise into QRAC
qubits and wraps each string with its message in a :class:`FuzzyLockOracle`.
``otm_read`` measures every qubit in one decoding basis and queries the
matching oracle once.

Oracles are ordinary in-process callables that log every query, standing in
for stateless hardware that accepts only classical queries.
"""

from __future__ import annotations

import base64
import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bounds import log_binom_cdf, log_binom_sf
from .qrac import OUTCOME0_PROB, SIN2_PI_8, QracState, encode
from .parallel import block_sizes, map_blocks

ACCEPT_FRACTION = Fraction(85, 100)
MAX_MESSAGE = 64
BOT = None  # the rejecting reply


def threshold_for(n: int) -> int:
    """Largest accepted Hamming distance, ``floor((1 - 0.85) n)`` in exact arithmetic."""
    return math.floor((1 - ACCEPT_FRACTION) * n)


def check_message(m: bytes, max_len: int = MAX_MESSAGE) -> bytes:
    if not isinstance(m, (bytes, bytearray)):
        raise TypeError("messages are byte strings")
    if len(m) > max_len:
        raise ValueError(f"message longer than {max_len} octets")
    return bytes(m)


def _bits(x) -> np.ndarray:
    b = np.asarray(x, dtype=np.uint8).ravel()
    if np.any(b > 1):
        raise ValueError("bit strings hold only 0/1")
    return b


def bits_to_hex(bits) -> str:
    return np.packbits(_bits(bits)).tobytes().hex()


def hex_to_bits(text: str, n: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))[:n].copy()


@dataclass(frozen=True)
class QueryRecord:
    query: bytes  # packed bits
    reply: bytes | None


class FuzzyLockOracle:
    """Release ``message`` for queries within Hamming distance ``threshold`` of ``r``.

    In ``null`` mode every query is rejected.
    """

    def __init__(self, r, message: bytes, mode: str = "real", oracle_id: int = 0):
        if mode not in ("real", "null"):
            raise ValueError(f"unknown oracle mode {mode!r}")
        self.r = _bits(r)
        self.r.setflags(write=False)
        self.message = check_message(message)
        self.mode = mode
        self.oracle_id = oracle_id
        self.threshold = threshold_for(len(self.r))
        self.transcript: list[QueryRecord] = []

    @property
    def n(self) -> int:
        return len(self.r)

    def accepts(self, query) -> bool:
        q = _bits(query)
        if len(q) != self.n:
            raise ValueError(f"query has {len(q)} bits, expected {self.n}")
        return self.mode == "real" and int(np.count_nonzero(q != self.r)) <= self.threshold

    def __call__(self, query) -> bytes | None:
        reply = self.message if self.accepts(query) else BOT
        self.transcript.append(QueryRecord(np.packbits(_bits(query)).tobytes(), reply))
        return reply

    def __repr__(self):
        return f"FuzzyLockOracle(id={self.oracle_id}, n={self.n}, mode={self.mode!r}, queries={len(self.transcript)})"


@dataclass
class OtmInstance:
    n: int
    r0: np.ndarray
    r1: np.ndarray
    qubits: tuple[QracState, ...]
    oracle0: FuzzyLockOracle
    oracle1: FuzzyLockOracle
    seed: int | None
    m0: bytes = field(repr=False, default=b"")
    m1: bytes = field(repr=False, default=b"")

    def oracle(self, alpha: int) -> FuzzyLockOracle:
        return self.oracle1 if alpha else self.oracle0

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "r0": bits_to_hex(self.r0),
                "r1": bits_to_hex(self.r1),
                "seed": self.seed,
                "m0": base64.b16encode(self.m0).decode(),
                "m1": base64.b16encode(self.m1).decode(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> OtmInstance:
        d = json.loads(text)
        n = int(d["n"])
        return _build(
            n,
            hex_to_bits(d["r0"], n),
            hex_to_bits(d["r1"], n),
            base64.b16decode(d["m0"]),
            base64.b16decode(d["m1"]),
            d.get("seed"),
        )

    def transcript_rows(self) -> list[dict]:
        rows = []
        for oracle in (self.oracle0, self.oracle1):
            for i, rec in enumerate(oracle.transcript):
                rows.append(
                    {
                        "query_hex": rec.query.hex(),
                        "reply": "⊥" if rec.reply is None else rec.reply.hex(),
                        "oracle_id": oracle.oracle_id,
                        "index": i,
                    }
                )
        return rows

    def transcripts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["query_hex", "reply", "oracle_id", "index"], lineterminator="\r\n")
        w.writeheader()
        w.writerows(self.transcript_rows())
        return buf.getvalue()


_TABLE = [encode(0, 0), encode(0, 1), encode(1, 0), encode(1, 1)]


def _build(n, r0, r1, m0, m1, seed, null_oracle: int | None = None) -> OtmInstance:
    qubits = tuple(_TABLE[k] for k in (2 * r0 + r1).tolist())
    modes = ["real", "real"]
    if null_oracle is not None:
        modes[null_oracle] = "null"
    return OtmInstance(
        n=n,
        r0=r0,
        r1=r1,
        qubits=qubits,
        oracle0=FuzzyLockOracle(r0, m0, modes[0], 0),
        oracle1=FuzzyLockOracle(r1, m1, modes[1], 1),
        seed=seed,
        m0=check_message(m0),
        m1=check_message(m1),
    )


def otm_prep(n: int, m0: bytes, m1: bytes, seed: int, null_oracle: int | None = None) -> OtmInstance:
    """Prepare an instance; ``null_oracle`` switches one oracle to null mode (simulator use)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    r0 = rng.integers(0, 2, n, dtype=np.uint8)
    r1 = rng.integers(0, 2, n, dtype=np.uint8)
    return _build(n, r0, r1, m0, m1, seed, null_oracle)


def measure_qubits(inst: OtmInstance, alpha: int, rng: np.random.Generator) -> np.ndarray:
    """Measure every qubit in decoding basis ``alpha``; qubit ``i`` consumes uniform ``i``."""
    p0 = OUTCOME0_PROB[alpha, inst.r0, inst.r1]
    u = rng.random(inst.n)
    return (u >= p0).astype(np.uint8)


def otm_read(inst: OtmInstance, alpha: int, rng) -> bytes | None:
    if alpha not in (0, 1):
        raise ValueError("alpha must be 0 or 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return inst.oracle(alpha)(measure_qubits(inst, alpha, rng))


def _read_block(n: int, size: int, ss: np.random.SeedSequence, m0: bytes, m1: bytes) -> int:
    rng = np.random.default_rng(ss)
    ok = 0
    for _ in range(size):
        alpha = int(rng.integers(0, 2))
        inst = otm_prep(n, m0, m1, int(rng.integers(0, 2**63)))
        ok += otm_read(inst, alpha, rng) == (m1 if alpha else m0)
    return ok


def honest_read_monte_carlo(
    n: int, trials: int, seed: int, workers: int = 1, m0: bytes = b"m0", m1: bytes = b"m1"
) -> float:
    """Fraction of fresh instances whose honest read (random ``alpha``) returns the right message."""
    sizes = block_sizes(trials)
    seeds = np.random.SeedSequence([seed, n]).spawn(len(sizes))
    hits = map_blocks(_read_block, [(n, s, ss, m0, m1) for s, ss in zip(sizes, seeds)], workers)
    return sum(hits) / trials


# ---------------------------------------------------------------------------
# correctness analytics

ERROR_PROB = SIN2_PI_8
MARGIN = float(1 - ACCEPT_FRACTION) - SIN2_PI_8


def honest_success_exact(n: int) -> float:
    """``P[Bin(n, sin^2(pi/8)) <= threshold(n)]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(log_binom_cdf(n, threshold_for(n), ERROR_PROB))


def honest_failure_exact(n: int) -> float:
    """``1 - honest_success_exact(n)``, summed directly so tiny values survive."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(log_binom_sf(n, threshold_for(n) + 1, ERROR_PROB))


def chernoff_failure_bound(n: int) -> float:
    """Hoeffding bound ``exp(-2 n delta^2)`` on the honest failure probability."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(-2.0 * n * MARGIN * MARGIN)


def correctness_crossover(target: float = 1e-6, step: int = 20) -> int:
    """Smallest multiple of ``step`` whose exact honest failure is at most ``target``.

    On multiples of 20 the threshold is exactly 15% of ``n``, which makes the
    failure probability monotone there.
    """
    hi = step
    while honest_failure_exact(hi) > target:
        hi *= 2
    lo = hi // 2 if hi > step else 0
    # invariant: failure(hi) <= target, failure(lo) > target (or lo == 0)
    while hi - lo > step:
        mid = (lo + hi) // 2 // step * step
        if mid <= lo:
            mid = lo + step
        if honest_failure_exact(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def chernoff_crossover(target: float = 1e-6) -> int:
    return math.ceil(math.log(1.0 / target) / (2.0 * MARGIN * MARGIN))
