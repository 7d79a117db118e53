import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binom

from qotm.protocol import (
    MARGIN,
    FuzzyLockOracle,
    OtmInstance,
    chernoff_crossover,
    chernoff_failure_bound,
    correctness_crossover,
    hex_to_bits,
    bits_to_hex,
    honest_failure_exact,
    honest_read_monte_carlo,
    honest_success_exact,
    measure_qubits,
    otm_prep,
    otm_read,
    threshold_for,
)
from qotm.qrac import COS2_PI_8, SIN2_PI_8


def test_threshold_uses_exact_arithmetic():
    assert [threshold_for(n) for n in (1, 6, 7, 20, 40, 100, 200)] == [0, 0, 1, 3, 6, 15, 30]
    # 0.15 * n in floating point lands just below an integer for some n
    for n in range(1, 2000):
        assert threshold_for(n) == (15 * n) // 100


def test_margin():
    assert math.isclose(MARGIN, 0.15 - SIN2_PI_8)
    assert 0.0035 < MARGIN < 0.0036


@given(st.integers(1, 400))
def test_success_matches_scipy(n):
    ref = binom.cdf(threshold_for(n), n, SIN2_PI_8)
    assert math.isclose(honest_success_exact(n), ref, rel_tol=1e-9)
    assert math.isclose(honest_success_exact(n) + honest_failure_exact(n), 1.0, abs_tol=1e-12)


def test_single_qubit_success():
    # [DERIVED] n=1 accepts only an exact match
    assert math.isclose(honest_success_exact(1), COS2_PI_8, abs_tol=1e-15)


def test_n20_value():
    # [DERIVED] exact binomial sum at n=20
    assert abs(honest_success_exact(20) - 0.66494) < 1e-5


def test_large_n_is_reliable():
    assert honest_success_exact(10**6) >= 1 - 1e-6
    assert 0 < honest_failure_exact(10**6) < 1e-20


@given(st.integers(1, 500))
def test_chernoff_dominates_on_multiples_of_20(k):
    n = 20 * k
    assert honest_failure_exact(n) <= chernoff_failure_bound(n)


def test_crossovers():
    n = correctness_crossover(1e-6)
    assert n % 20 == 0
    assert honest_failure_exact(n) <= 1e-6 < honest_failure_exact(n - 20)
    c = chernoff_crossover(1e-6)
    assert chernoff_failure_bound(c) <= 1e-6 < chernoff_failure_bound(c - 1)
    assert n < c


def test_oracle_accepts_within_threshold():
    r = np.zeros(20, dtype=np.uint8)
    o = FuzzyLockOracle(r, b"hello")
    q = r.copy()
    q[:3] = 1
    assert o(q) == b"hello"
    q[3] = 1
    assert o(q) is None
    assert len(o.transcript) == 2 and o.transcript[1].reply is None
    with pytest.raises(ValueError):
        o(np.zeros(19, dtype=np.uint8))


def test_null_oracle_rejects_everything():
    r = np.ones(10, dtype=np.uint8)
    assert FuzzyLockOracle(r, b"x", mode="null")(r) is None
    with pytest.raises(ValueError):
        FuzzyLockOracle(r, b"x", mode="other")


def test_message_limits():
    with pytest.raises(ValueError):
        otm_prep(8, b"a" * 65, b"b", 0)
    with pytest.raises(TypeError):
        otm_prep(8, "text", b"b", 0)
    with pytest.raises(ValueError):
        otm_prep(0, b"a", b"b", 0)


def test_prep_deterministic_and_json_round_trip():
    a = otm_prep(37, b"zero", b"one", 12)
    b = otm_prep(37, b"zero", b"one", 12)
    assert np.array_equal(a.r0, b.r0) and np.array_equal(a.r1, b.r1)
    c = OtmInstance.from_json(a.to_json())
    assert np.array_equal(c.r0, a.r0) and np.array_equal(c.r1, a.r1)
    assert (c.m0, c.m1, c.seed) == (a.m0, a.m1, a.seed)
    assert [s.rho for s in c.qubits] == [s.rho for s in a.qubits]


@given(st.lists(st.integers(0, 1), min_size=1, max_size=70))
def test_bits_hex_round_trip(bits):
    assert list(hex_to_bits(bits_to_hex(bits), len(bits))) == bits


def test_qubits_encode_secret_pairs():
    inst = otm_prep(16, b"a", b"b", 3)
    for q, b0, b1 in zip(inst.qubits, inst.r0, inst.r1):
        assert (q.b0, q.b1) == (b0, b1)


def test_read_and_transcript_csv():
    inst = otm_prep(20, b"m0", b"m1", 5)
    out = otm_read(inst, 1, 9)
    assert out in (b"m1", None)
    assert len(inst.oracle1.transcript) == 1 and not inst.oracle0.transcript
    rows = list(csv.DictReader(io.StringIO(inst.transcripts_csv())))
    assert rows[0]["oracle_id"] == "1" and rows[0]["index"] == "0"
    assert rows[0]["reply"] == ("⊥" if out is None else out.hex())
    with pytest.raises(ValueError):
        otm_read(inst, 2, 0)


def test_measurement_error_rate():
    # each honest outcome is wrong with probability sin^2(pi/8)
    inst = otm_prep(4000, b"", b"", 1)
    rng = np.random.default_rng(2)
    x = measure_qubits(inst, 0, rng)
    err = np.mean(x != inst.r0)
    assert abs(err - SIN2_PI_8) < 4 * math.sqrt(SIN2_PI_8 * (1 - SIN2_PI_8) / 4000)


def test_monte_carlo_agrees_with_exact():
    trials = 20000
    p = honest_success_exact(20)
    mc = honest_read_monte_carlo(20, trials, seed=1)
    assert abs(mc - p) <= 3 * math.sqrt(p * (1 - p) / trials)


def test_monte_carlo_worker_independent():
    assert honest_read_monte_carlo(12, 12000, 3, workers=1) == honest_read_monte_carlo(12, 12000, 3, workers=2)
