"""Protocol round trips, extractor guarantees, leakage and simulator checks."""

import dataclasses
import itertools
import math

import numpy as np
import pytest

from otmbench.collinfo import JointDistribution, conditional_collision_mi, collision_mi
from otmbench.errors import ResourceLimitError
from otmbench.f2codes import random_code
from otmbench.povmsearch import Povm
from otmbench.protocol import (
    PER_PAIR_BOUNDS,
    Extractor,
    LeakageSweep,
    ProtocolParams,
    leakage_experiment,
    make_extractor,
    mc_correctness,
    otm_prep,
    otm_read,
    otrm_prep,
    otrm_read,
    simulator_transcript,
)
from otmbench.qrac import measure_prob, measurement_for, qrac_encode

CHANNEL_P = math.sin(math.pi / 8) ** 2


def test_params_validation():
    p = ProtocolParams(n=15, lam=8, rate=0.2)
    assert p.k == 3
    assert p.msg_len == 1
    assert ProtocolParams(n=10, lam=16, k=2).msg_len == 2
    with pytest.raises(ValueError):
        ProtocolParams(n=10, lam=8)  # neither k nor rate
    with pytest.raises(ValueError):
        ProtocolParams(n=10, lam=8, k=2, rate=0.3)  # k and rate disagree
    with pytest.raises(ValueError):
        ProtocolParams(n=10, lam=7, k=2)  # lam not a byte multiple
    with pytest.raises(ValueError):
        ProtocolParams(n=10, lam=8, rate=0.17)  # k not an integer


def test_otrm_prep_structure_and_determinism():
    params = ProtocolParams(n=8, lam=8, k=3, seed_root=5)
    inst = otrm_prep(params)
    again = otrm_prep(params)
    assert np.array_equal(inst.r0, again.r0)
    assert np.array_equal(inst.c1, again.c1)
    assert len(inst.qubits) == 8
    # codewords really encode the drawn messages
    assert np.array_equal(inst.c0, (inst.code0.generator @ inst.r0) % 2)
    assert np.array_equal(inst.c1, (inst.code1.generator @ inst.r1) % 2)
    different = otrm_prep(params, seed=6)
    assert not (
        np.array_equal(different.r0, inst.r0)
        and np.array_equal(different.r1, inst.r1)
    )


def test_otrm_prep_qubits_encode_codeword_pairs():
    params = ProtocolParams(n=6, lam=8, k=2, seed_root=1)
    inst = otrm_prep(params)
    for i, q in enumerate(inst.qubits):
        want = qrac_encode(int(inst.c0[i]), int(inst.c1[i]))
        assert abs(q.theta - want.theta) <= 1e-12


def find_zero_free_codes(n, k):
    # a zero generator row pins that qubit's bit to 0; skip such draws
    seed = 0
    while True:
        c0 = random_code(n, k, seed)
        c1 = random_code(n, k, seed + 1)
        if (c0.generator.sum(axis=1) > 0).all() and (
            c1.generator.sum(axis=1) > 0
        ).all():
            return c0, c1
        seed += 2


def test_codeword_bit_pairs_uniform_over_messages():
    """Each qubit sees every (c0[i], c1[i]) combination equally often."""
    c0, c1 = find_zero_free_codes(6, 3)
    counts = np.zeros((6, 2, 2), dtype=int)
    for u, v in itertools.product(range(8), range(8)):
        w0, w1 = c0.codewords[u], c1.codewords[v]
        for i in range(6):
            counts[i, w0[i], w1[i]] += 1
    assert (counts == 16).all()


def test_otrm_read_decodes_and_reports():
    params = ProtocolParams(n=9, lam=8, k=2, seed_root=3)
    inst = otrm_prep(params)
    res = otrm_read(inst, alpha=1, seed=11)
    assert res.alpha == 1
    assert res.word.shape == (9,)
    assert res.success == bool(np.array_equal(res.message, inst.r1))
    assert np.array_equal(res.codeword, (inst.code1.generator @ res.message) % 2)
    with pytest.raises(ValueError):
        otrm_read(inst, alpha=2, seed=0)


def test_otrm_read_failure_rate_tracks_exact_benchmark():
    params = ProtocolParams(n=7, lam=8, k=2, seed_root=0)
    codes = (random_code(7, 2, 100), random_code(7, 2, 101))
    out = mc_correctness(params, alpha=0, trials=2000, seed=42, codes=codes)
    sigma = math.sqrt(out["exact_failure"] * (1 - out["exact_failure"]) / 2000)
    assert abs(out["empirical_failure"] - out["exact_failure"]) <= 4 * sigma


# ---------------------------------------------------------------------------
# extractor


def test_extractor_matrix_is_toeplitz():
    ext = make_extractor(6, 3, seed=2)
    t = ext.matrix
    assert t.shape == (3, 6)
    for i in range(1, 3):
        for j in range(1, 6):
            assert t[i, j] == t[i - 1, j - 1], "diagonals must be constant"


def test_extractor_identity_seed():
    bits = np.zeros(9, dtype=np.uint8)
    bits[4] = 1  # the diagonal of a 5x5 Toeplitz map
    ext = make_extractor(5, 5, bits)
    x = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    assert np.array_equal(ext.apply(x), x)


def test_extractor_apply_is_linear():
    ext = make_extractor(8, 4, seed=9)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.integers(0, 2, 8, dtype=np.uint8)
        y = rng.integers(0, 2, 8, dtype=np.uint8)
        assert np.array_equal(ext.apply(x ^ y), ext.apply(x) ^ ext.apply(y))


def test_extractor_zero_output_length():
    ext = make_extractor(4, 0, seed=0)
    assert ext.apply(np.array([1, 1, 0, 1], dtype=np.uint8)).shape == (0,)


def test_two_universality_exact():
    """Every distinct input pair collides on exactly 2^-out of the seeds."""
    input_len, output_len = 4, 2
    seed_bits = input_len + output_len - 1
    inputs = [np.array(v, dtype=np.uint8) for v in itertools.product((0, 1), repeat=4)]
    collisions = np.zeros((16, 16), dtype=int)
    for s in range(2**seed_bits):
        bits = np.array([(s >> i) & 1 for i in range(seed_bits)], dtype=np.uint8)
        ext = Extractor(bits=tuple(bits), input_len=input_len, output_len=output_len)
        outs = [ext.apply(x) for x in inputs]
        for i in range(16):
            for j in range(i + 1, 16):
                collisions[i, j] += np.array_equal(outs[i], outs[j])
    want = 2**seed_bits // 4
    off_diag = collisions[np.triu_indices(16, k=1)]
    assert (off_diag == want).all()


def test_extraction_distance_for_flat_source():
    """Uniform source on 2^6 of 2^7 strings, 2 output bits: SD <= 1/8."""
    input_len, output_len = 7, 2
    seed_bits = input_len + output_len - 1
    support = np.array(
        [[(v >> i) & 1 for i in range(input_len)] for v in range(64)], dtype=np.uint8
    )
    total = 0.0
    n_seeds = 2**seed_bits
    rng = np.random.default_rng(0)
    sample = rng.choice(n_seeds, size=64, replace=False)  # spot-check the average
    for s in sample:
        bits = np.array([(s >> i) & 1 for i in range(seed_bits)], dtype=np.uint8)
        ext = Extractor(bits=tuple(bits), input_len=input_len, output_len=output_len)
        hist = np.zeros(4)
        for x in support:
            o = ext.apply(x)
            hist[2 * o[0] + o[1]] += 1
        total += 0.5 * np.abs(hist / 64 - 0.25).sum()
    # leftover-hash bound (1/2) sqrt(2^(out - Hmin)) = 1/8; the sampled
    # average sits below it with margin
    assert total / len(sample) <= 0.125 + 0.02


# ---------------------------------------------------------------------------
# full OTM wrap


def test_otm_round_trip_exhaustive_small():
    params = ProtocolParams(n=5, lam=8, k=2, seed_root=7)
    for m0_bit, m1_bit, alpha in itertools.product((0, 1), (0, 1), (0, 1)):
        m0 = np.array([m0_bit], dtype=np.uint8)
        m1 = np.array([m1_bit], dtype=np.uint8)
        for seed in range(5):
            pkg = otm_prep(m0, m1, params, seed=seed)
            res = otm_read(pkg, alpha, seed=seed + 1000)
            assert res.alpha == alpha
            if res.inner.success:
                want = m0 if alpha == 0 else m1
                assert np.array_equal(res.message, want)


def test_otm_ciphertext_masks_message():
    params = ProtocolParams(n=5, lam=16, k=2, seed_root=7)
    m0 = np.array([1, 0], dtype=np.uint8)
    m1 = np.array([0, 1], dtype=np.uint8)
    pkg = otm_prep(m0, m1, params, seed=3)
    assert np.array_equal(pkg.ct0, m0 ^ pkg.ext0.apply(pkg.instance.c0))
    assert np.array_equal(pkg.ct1, m1 ^ pkg.ext1.apply(pkg.instance.c1))


def test_otm_tampered_ciphertext_flips_output_bit():
    params = ProtocolParams(n=5, lam=16, k=2, seed_root=7)
    m0 = np.array([1, 1], dtype=np.uint8)
    m1 = np.array([0, 0], dtype=np.uint8)
    pkg = otm_prep(m0, m1, params, seed=4)
    flipped = dataclasses.replace(pkg, ct0=pkg.ct0 ^ np.array([1, 0], dtype=np.uint8))
    a = otm_read(pkg, 0, seed=9)
    b = otm_read(flipped, 0, seed=9)
    assert np.array_equal(a.message ^ b.message, np.array([1, 0], dtype=np.uint8))


# ---------------------------------------------------------------------------
# leakage experiments


def test_leakage_single_basis_anchors():
    rep = leakage_experiment(1, strategy=[0.0])
    assert rep.ic_b0 == pytest.approx(math.log2(1.5), abs=1e-9)
    assert abs(rep.ic_b1) <= 1e-9
    assert rep.lesser == 1, "the conjugate-basis bit is the lesser one"
    rep = leakage_experiment(1, strategy=[math.pi / 8])
    assert rep.total == pytest.approx(2 * math.log2(1.25), abs=1e-9)
    rep = leakage_experiment(1, strategy=[math.pi / 4])
    assert rep.ic_b1 == pytest.approx(math.log2(1.5), abs=1e-9)
    assert rep.lesser == 0


def test_leakage_two_qubit_product_strategy():
    rep = leakage_experiment(2, strategy=[0.0, math.pi / 4])
    # one basis per bit: both bits leak the single-basis amount
    assert rep.ic_b0 == pytest.approx(math.log2(1.5), abs=1e-9)
    assert rep.ic_b1 == pytest.approx(math.log2(1.5), abs=1e-9)
    assert rep.all_ok
    for q, entry in rep.bounds.items():
        assert entry["limit"] == pytest.approx(2 * PER_PAIR_BOUNDS[q], abs=1e-12)


def test_leakage_accepts_povm_entries():
    third = np.eye(2) / 3
    v1 = np.array([math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)])
    v2 = np.array([math.cos(4 * math.pi / 3), math.sin(4 * math.pi / 3)])
    trine = Povm((
        2 / 3 * np.outer([1.0, 0.0], [1.0, 0.0]),
        2 / 3 * np.outer(v1, v1),
        2 / 3 * np.outer(v2, v2),
    ))
    rep = leakage_experiment(1, strategy=[trine])
    assert rep.all_ok
    assert rep.total >= 0.0
    assert third is not None


def test_leakage_small_sweep_all_ok():
    sweep = leakage_experiment(2, exhaustive=True, angles=[0.0, math.pi / 8, math.pi / 4])
    assert isinstance(sweep, LeakageSweep)
    assert len(sweep.reports) == 9
    assert sweep.all_ok
    for q, worst in sweep.worst.items():
        assert worst <= 2 * PER_PAIR_BOUNDS[q] + 1e-9


def test_leakage_argument_errors():
    with pytest.raises(ResourceLimitError):
        leakage_experiment(9)
    with pytest.raises(ValueError):
        leakage_experiment(2, strategy=[0.0])
    with pytest.raises(ValueError):
        leakage_experiment(1, strategy=[0.0], exhaustive=True)
    with pytest.raises(ResourceLimitError):
        leakage_experiment(5, exhaustive=True, angles=[j * 0.1 for j in range(9)])


def test_honest_receiver_leaves_other_string_bounded():
    """Full matched-basis readout stays within the per-pair leakage budget."""
    n, k = 6, 2
    c0 = random_code(n, k, 50)
    c1 = random_code(n, k, 51)
    meas = measurement_for(0)
    tables = []
    for i in range(n):
        t = np.empty((2, 2, 2))
        for x, y in itertools.product((0, 1), repeat=2):
            t[x, y] = measure_prob(qrac_encode(x, y), meas)
        tables.append(t)
    table = np.zeros((4, 4, 2**n))
    for u, v in itertools.product(range(4), range(4)):
        w0, w1 = c0.codewords[u], c1.codewords[v]
        probs = np.ones(1)
        for i in range(n):
            probs = np.multiply.outer(probs, tables[i][w0[i], w1[i]]).reshape(-1)
        table[u, v] = probs / 16.0
    d = JointDistribution(("c0", "c1", "out"), table)
    limit = n * PER_PAIR_BOUNDS["conditional"] + 1e-9
    assert conditional_collision_mi(d, ("c1",), ("out",), ("c0",)) <= limit
    assert collision_mi(d, ("c1",), ("out",)) <= n * PER_PAIR_BOUNDS["greater"] + 1e-9


# ---------------------------------------------------------------------------
# simulator


def test_simulator_empty_messages_no_distance():
    params = ProtocolParams(n=4, lam=0, k=2, seed_root=0)
    rep = simulator_transcript(
        np.zeros(0, dtype=np.uint8), np.zeros(0, dtype=np.uint8), params
    )
    assert rep.exact_sd == 0.0


def test_simulator_measures_nothing_closed_form():
    """With a square code, real ct1 is uniform except on the all-zero seed.

    c1 is then uniform over all 2^n words, so a Toeplitz row extracts a
    perfectly uniform bit unless the row is zero (one seed in 2^n), where
    the real ciphertext is constant and contributes SD 1/2.
    """
    params = ProtocolParams(n=4, lam=8, k=4, seed_root=0)
    rep = simulator_transcript(
        np.array([0], dtype=np.uint8), np.array([1], dtype=np.uint8), params, seed=5
    )
    assert rep.exact_sd == pytest.approx(0.5 * 2.0**-4, abs=1e-12)
    assert rep.exact_sd <= rep.lhl_bound + 1e-12


def test_simulator_all_matched_basis_adversary():
    params = ProtocolParams(n=6, lam=8, k=2, seed_root=0)
    rep = simulator_transcript(
        np.array([1], dtype=np.uint8),
        np.array([0], dtype=np.uint8),
        params,
        adversary_strategy=[0.0] * 6,
        seed=0,
    )
    assert rep.exact_sd <= rep.lhl_bound + 1e-12
    assert rep.min_entropy_c1 >= 0.0
    assert rep.real_view.names == rep.sim_view.names


def test_simulator_distance_shrinks_with_shorter_messages():
    m2 = simulator_transcript(
        np.array([1, 0], dtype=np.uint8),
        np.array([0, 1], dtype=np.uint8),
        ProtocolParams(n=5, lam=16, k=2, seed_root=0),
        seed=2,
    )
    m1 = simulator_transcript(
        np.array([1], dtype=np.uint8),
        np.array([0], dtype=np.uint8),
        ProtocolParams(n=5, lam=8, k=2, seed_root=0),
        seed=2,
    )
    assert m1.exact_sd <= m2.exact_sd + 1e-12


def test_simulator_resource_limit():
    params = ProtocolParams(n=10, lam=32, k=2, seed_root=0)
    with pytest.raises(ResourceLimitError):
        simulator_transcript(
            np.zeros(4, dtype=np.uint8), np.zeros(4, dtype=np.uint8), params
        )
