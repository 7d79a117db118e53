import math

import numpy as np
import pytest

from qotm.qmath import trace_distance
from qotm.qrac import (
    COS2_PI_8,
    OUTCOME0_PROB,
    decode_prob,
    decoding_basis,
    encode,
    mixture_rho,
    other_bit_guess_prob,
    qubit_rng,
    sample_decode,
)

BITS = [(b0, b1) for b0 in (0, 1) for b1 in (0, 1)]


def test_cos2_constant():
    # [PAPER] optimal QRAC success cos^2(pi/8) < 0.854
    assert math.isclose(COS2_PI_8, math.cos(math.pi / 8) ** 2, abs_tol=1e-15)
    assert 0.8535 < COS2_PI_8 < 0.854


@pytest.mark.parametrize("b0,b1", BITS)
@pytest.mark.parametrize("alpha", (0, 1))
def test_decode_prob_is_cos2(b0, b1, alpha):
    assert abs(decode_prob(alpha, encode(b0, b1)) - COS2_PI_8) <= 1e-12


@pytest.mark.parametrize("b0,b1", BITS)
@pytest.mark.parametrize("alpha", (0, 1))
def test_other_bit_is_unbiased(b0, b1, alpha):
    # [DERIVED] averaged over the other bit a basis-alpha outcome carries no information about it
    assert abs(other_bit_guess_prob(alpha, encode(b0, b1)) - 0.5) <= 1e-12


@pytest.mark.parametrize("b0,b1", BITS)
def test_states_match_independent_vectors(b0, b1):
    # oracle: decode with explicit numpy projectors on the Z and X bases
    rho = encode(b0, b1).rho.matrix()
    z = [np.array([1, 0]), np.array([0, 1])]
    x = [np.array([1, 1]) / math.sqrt(2), np.array([1, -1]) / math.sqrt(2)]
    assert np.isclose(np.vdot(z[b0], rho @ z[b0]).real, COS2_PI_8)
    assert np.isclose(np.vdot(x[b1], rho @ x[b1]).real, COS2_PI_8)
    assert np.isclose(np.trace(rho).real, 1) and np.allclose(rho @ rho, rho)


def test_bases_are_projective_and_complete():
    for alpha in (0, 1):
        e0, e1 = decoding_basis(alpha).effects.effects()
        assert np.allclose(e0.matrix() + e1.matrix(), np.eye(2))
        assert np.allclose(e0.matrix() @ e0.matrix(), e0.matrix())


def test_outcome_table_agrees_with_born_rule():
    for alpha in (0, 1):
        e0 = decoding_basis(alpha).effects.e0
        for b0, b1 in BITS:
            ref = np.trace(e0.matrix() @ encode(b0, b1).rho.matrix()).real
            assert math.isclose(OUTCOME0_PROB[alpha, b0, b1], ref, abs_tol=1e-12)


def test_sampling_frequency():
    rng = np.random.default_rng(5)
    s = encode(1, 0)
    hits = sum(sample_decode(0, s, rng) == 1 for _ in range(20000))
    sigma = math.sqrt(COS2_PI_8 * (1 - COS2_PI_8) / 20000)
    assert abs(hits / 20000 - COS2_PI_8) < 4 * sigma


def test_qubit_rng_order_independent():
    a = qubit_rng(7, 3).random()
    qubit_rng(7, 1).random()
    assert qubit_rng(7, 3).random() == a


def test_mixtures_separate_first_bit():
    # averaging over b1 leaves states whose trace distance is cos^2 - sin^2 = 1/sqrt(2)
    assert math.isclose(trace_distance(mixture_rho(0), mixture_rho(1)), 1 / math.sqrt(2), abs_tol=1e-12)


def test_bad_bits_rejected():
    with pytest.raises(ValueError):
        encode(2, 0)
    with pytest.raises(ValueError):
        decoding_basis(-1)
