"""Binary linear codes, BSC sampling, and ML decoding."""

import math

import numpy as np
import pytest

from otmbench.f2codes import (
    LinearCode,
    bits_to_int,
    bsc_sample,
    encode,
    exact_failure_prob,
    f2_rank,
    int_to_bits,
    mc_failure_prob,
    ml_decode,
    random_code,
)

CHANNEL_P = math.sin(math.pi / 8) ** 2


def repetition_code(n):
    return LinearCode(n=n, k=1, generator=np.ones((n, 1), dtype=np.uint8), seed=0)


def test_bits_int_roundtrip():
    for v in (0, 1, 5, 100, 2**12 - 1):
        assert bits_to_int(int_to_bits(v, 13)) == v
    assert int_to_bits(5, 4).tolist() == [0, 1, 0, 1]


def test_f2_rank_known_cases():
    assert f2_rank(np.eye(4, dtype=np.uint8)) == 4
    assert f2_rank(np.zeros((3, 3), dtype=np.uint8)) == 0
    # duplicated row collapses the rank
    m = np.array([[1, 0], [1, 0], [0, 1]], dtype=np.uint8)
    assert f2_rank(m) == 2


def test_f2_rank_invariant_under_row_swap():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = rng.integers(0, 2, size=(6, 4), dtype=np.uint8)
        perm = rng.permutation(6)
        assert f2_rank(m) == f2_rank(m[perm])


def test_random_code_shape_and_rank():
    code = random_code(10, 4, seed=42)
    assert code.generator.shape == (10, 4)
    assert f2_rank(code.generator) == 4
    assert random_code(10, 4, seed=42).generator.tolist() == code.generator.tolist()
    ints = code.codeword_ints
    assert len(ints) == 16
    assert len(set(ints.tolist())) == 16, "full column rank means distinct codewords"


def test_encode_linearity():
    code = random_code(9, 3, seed=5)
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = rng.integers(0, 2, size=3, dtype=np.uint8)
        b = rng.integers(0, 2, size=3, dtype=np.uint8)
        lhs = encode(code, (a ^ b))
        rhs = encode(code, a) ^ encode(code, b)
        assert np.array_equal(lhs, rhs)


def test_codewords_ordered_by_message_integer():
    code = random_code(6, 3, seed=11)
    for idx in range(8):
        m = int_to_bits(idx, 3)
        assert np.array_equal(code.codewords[idx], encode(code, m))


def test_min_distance_brute_force():
    assert repetition_code(5).min_distance() == 5
    code = random_code(7, 3, seed=1)
    cws = code.codewords
    want = min(
        int((cws[i] ^ cws[j]).sum())
        for i in range(len(cws))
        for j in range(len(cws))
        if i != j
    )
    assert code.min_distance() == want


def oracle_decode(code, word):
    # independent nearest-codeword rule; ties -> smallest message integer
    dists = [int((cw ^ word).sum()) for cw in code.codewords]
    best = dists.index(min(dists))
    return int_to_bits(best, code.k)


def test_ml_decode_matches_oracle_small_codes():
    for n, k, seed in ((5, 2, 0), (6, 3, 1), (8, 4, 2)):
        code = random_code(n, k, seed)
        for w in range(2**n):
            word = int_to_bits(w, n)
            assert np.array_equal(ml_decode(code, word), oracle_decode(code, word))


def test_ml_decode_tie_break_prefers_smaller_message():
    # word 01 sits at distance 1 from both codewords of the 2-bit
    # repetition code; the tie must resolve to message 0
    code = repetition_code(2)
    out = ml_decode(code, np.array([0, 1], dtype=np.uint8))
    assert bits_to_int(out) == 0


def test_repetition3_exact_failure_closed_form():
    """Majority vote on 3 bits fails on >= 2 flips: 3p^2(1-p) + p^3."""
    code = repetition_code(3)
    p = CHANNEL_P
    want = 3 * p**2 * (1 - p) + p**3
    assert exact_failure_prob(code, p) == pytest.approx(want, abs=1e-12)
    assert exact_failure_prob(code, 0.0) == 0.0


def test_exact_failure_monotone_in_p():
    code = repetition_code(3)
    probs = [exact_failure_prob(code, p) for p in (0.01, 0.1, 0.2, 0.4)]
    assert probs == sorted(probs)


def test_mc_failure_matches_exact():
    code = random_code(7, 2, seed=9)
    exact = exact_failure_prob(code, CHANNEL_P)
    trials = 100_000
    emp = mc_failure_prob(code, CHANNEL_P, trials=trials, seed=17)
    sigma = math.sqrt(exact * (1 - exact) / trials)
    assert abs(emp - exact) <= 4 * sigma, f"empirical {emp} vs exact {exact}"


def test_bsc_sample_statistics_and_determinism():
    word = np.zeros(2000, dtype=np.uint8)
    out = bsc_sample(word, 0.3, seed=4)
    assert np.array_equal(out, bsc_sample(word, 0.3, seed=4))
    rate = out.mean()
    assert abs(rate - 0.3) <= 4 * math.sqrt(0.3 * 0.7 / 2000)
    assert np.array_equal(bsc_sample(word, 0.0, seed=4), word)
    with pytest.raises(ValueError):
        bsc_sample(word, 1.5, seed=0)


def test_json_roundtrip():
    code = random_code(8, 3, seed=21)
    back = LinearCode.from_json(code.to_json())
    assert back.n == code.n and back.k == code.k
    assert np.array_equal(back.generator, code.generator)


def test_code_validation():
    with pytest.raises(ValueError):
        random_code(4, 5, seed=0)
    rank_deficient = np.array([[1, 1], [1, 1], [0, 0]], dtype=np.uint8)
    with pytest.raises(Exception):
        LinearCode(n=3, k=2, generator=rank_deficient, seed=0)
