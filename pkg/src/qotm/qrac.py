"""The optimal 2 -> 1 quantum random access code.

Bits ``(b0, b1)`` are encoded into the real qubit state
``psi(theta) = cos(theta)|0> + sin(theta)|1>``.  Bit ``b0`` is read out in the
Z basis (``alpha = 0``) and bit ``b1`` in the basis ``{psi(pi/4), psi(-pi/4)}``
(``alpha = 1``); either read succeeds with probability ``cos^2(pi/8)``.

Angles for ``b0 = 1`` are ``-5pi/8`` (b1 = 0) and ``5pi/8`` (b1 = 1).  The
opposite assignment decodes ``b1`` as ``b0 XOR b1`` in the second basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qmath import BlochVector, HermitianOp2, QubitPovm, born_prob

# angles in units of pi/8
ANGLE_EIGHTHS = {(0, 0): 1, (0, 1): -1, (1, 0): -5, (1, 1): 5}

COS2_PI_8 = math.cos(math.pi / 8) ** 2
SIN2_PI_8 = math.sin(math.pi / 8) ** 2


def psi(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)], dtype=complex)


def _bit(b) -> int:
    b = int(b)
    if b not in (0, 1):
        raise ValueError(f"not a bit: {b!r}")
    return b


@dataclass(frozen=True)
class QracState:
    b0: int
    b1: int
    rho: HermitianOp2

    @property
    def angle(self) -> float:
        return ANGLE_EIGHTHS[(self.b0, self.b1)] * math.pi / 8

    def bit(self, alpha: int) -> int:
        return self.b1 if alpha else self.b0


@dataclass(frozen=True)
class DecodingBasis:
    alpha: int
    effects: QubitPovm


_STATES = {
    key: QracState(key[0], key[1], HermitianOp2.projector(psi(k * math.pi / 8)))
    for key, k in ANGLE_EIGHTHS.items()
}

_BASES = {
    0: DecodingBasis(0, QubitPovm(HermitianOp2.diag(1.0, 0.0), HermitianOp2.diag(0.0, 1.0))),
    1: DecodingBasis(
        1,
        QubitPovm(
            HermitianOp2.projector(psi(math.pi / 4)),
            HermitianOp2.projector(psi(-math.pi / 4)),
        ),
    ),
}

# P[outcome = 0] for every (alpha, b0, b1); used on hot sampling paths
OUTCOME0_PROB = np.array(
    [
        [[born_prob(_BASES[a].effects.e0, _STATES[(b0, b1)].rho) for b1 in (0, 1)] for b0 in (0, 1)]
        for a in (0, 1)
    ]
)


def encode(b0: int, b1: int) -> QracState:
    return _STATES[(_bit(b0), _bit(b1))]


def decoding_basis(alpha: int) -> DecodingBasis:
    return _BASES[_bit(alpha)]


def decode_prob(alpha: int, state: QracState) -> float:
    """Probability that measuring in basis ``alpha`` returns the encoded bit ``b_alpha``."""
    effects = decoding_basis(alpha).effects.effects()
    return born_prob(effects[state.bit(alpha)], state.rho)


def other_bit_guess_prob(alpha: int, state: QracState) -> float:
    """Guess rate for ``b_{1-alpha}`` from a basis-``alpha`` outcome.

    Averaged over both values of the other bit (with ``b_alpha`` fixed); the
    code is unbiased so this is exactly one half.
    """
    alpha = _bit(alpha)
    effects = decoding_basis(alpha).effects.effects()
    total = 0.0
    for other in (0, 1):
        bits = [state.b0, state.b1]
        bits[1 - alpha] = other
        total += born_prob(effects[other], encode(*bits).rho)
    return 0.5 * total


def qubit_rng(seed: int, index: int) -> np.random.Generator:
    """Generator keyed by ``(seed, index)``, independent of the order of use."""
    return np.random.default_rng([seed, index])


def sample_decode(alpha: int, state: QracState, rng: np.random.Generator) -> int:
    """Measure ``state`` in basis ``alpha`` and return the outcome bit."""
    p0 = OUTCOME0_PROB[_bit(alpha), state.b0, state.b1]
    return 0 if rng.random() < p0 else 1


def mixture_rho(b0: int) -> HermitianOp2:
    b0 = _bit(b0)
    return 0.5 * (encode(b0, 0).rho + encode(b0, 1).rho)


def bloch_of(state: QracState) -> BlochVector:
    return state.rho.to_bloch()[1]
