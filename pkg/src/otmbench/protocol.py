"""One-time memory protocol over QRAC qubits and random linear codes.

Two layers.  The random-string layer samples two codewords, encodes them
pairwise into qubits, and lets a reader recover exactly one of the two
strings by measuring every qubit in that string's basis and ML-decoding
the resulting noisy word.  The message layer wraps this with Toeplitz
extractors: each message is one-time-padded by the extractor output of
its codeword, so recovering a codeword unlocks exactly one message.

Everything here is a simulator: instances retain their secrets so tests
can score success rates against ground truth, enumerate exact adversary
view distributions, and compare them with the ideal simulation in which
the unread ciphertext is replaced by fresh uniform bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math
from typing import NamedTuple, Sequence

import numpy as np

from .collinfo import (
    JointDistribution,
    avg_conditional_min_entropy,
    collision_mi,
    conditional_collision_mi,
)
from .errors import InvariantViolationError, ResourceLimitError
from .f2codes import LinearCode, bits_to_int, encode, int_to_bits, ml_decode, random_code
from .povmsearch import Povm
from .qrac import (
    BasisMeasurement,
    measure_prob,
    measurement_for,
    qrac_encode,
    sample_measurement,
)
from .seeds import derive_seed

__all__ = [
    "PER_PAIR_BOUNDS",
    "ProtocolParams",
    "OtrmInstance",
    "ReadResult",
    "Extractor",
    "OtmPackage",
    "OtmReadResult",
    "LeakageReport",
    "LeakageSweep",
    "SimulatorReport",
    "otrm_prep",
    "otrm_read",
    "make_extractor",
    "otm_prep",
    "otm_read",
    "mc_correctness",
    "leakage_experiment",
    "simulator_transcript",
]

# Certified per-pair leakage constants; a product strategy on m pairs is
# held to m times each.
PER_PAIR_BOUNDS = {"greater": 0.59, "total": 0.65, "conditional": 0.59}

_CHANNEL_P = math.sin(math.pi / 8) ** 2   # bit-flip rate seen by the matched basis


@dataclass(frozen=True)
class ProtocolParams:
    """Sizes for one protocol run.

    Give k or rate; the other is derived (both are accepted only when
    consistent).  The message length is lam/8 bits and must come out
    integral.
    """

    n: int
    lam: int
    k: int | None = None
    rate: float | None = None
    eps1: float | None = None
    eps2: float | None = None
    geometry: object = None
    seed_root: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")
        if self.k is None and self.rate is None:
            raise ValueError("give k or rate")
        if self.k is None:
            k = self.rate * self.n
            if abs(k - round(k)) > 1e-9:
                raise ValueError(f"rate*n = {k} is not an integer")
            object.__setattr__(self, "k", int(round(k)))
        if self.rate is None:
            object.__setattr__(self, "rate", self.k / self.n)
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if abs(self.rate * self.n - self.k) > 1e-9:
            raise ValueError(f"rate {self.rate} inconsistent with k={self.k}, n={self.n}")
        if self.lam < 0 or self.lam % 8:
            raise ValueError(f"lam must be a nonnegative multiple of 8, got {self.lam}")

    @property
    def msg_len(self) -> int:
        return self.lam // 8


@dataclass(frozen=True)
class OtrmInstance:
    """Sender view of one random-string memory: secrets included."""

    code0: LinearCode
    code1: LinearCode
    r0: np.ndarray
    r1: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    qubits: tuple

    def __post_init__(self):
        n = self.code0.n
        if self.code1.n != n or len(self.qubits) != n:
            raise InvariantViolationError("code lengths and qubit count disagree")
        for name, code, r, c in (("0", self.code0, self.r0, self.c0),
                                 ("1", self.code1, self.r1, self.c1)):
            if not np.array_equal(encode(code, r), c):
                raise InvariantViolationError(f"c{name} is not the encoding of r{name}")
        for i, q in enumerate(self.qubits):
            want = qrac_encode(int(self.c0[i]), int(self.c1[i]))
            if abs(q.theta - want.theta) > 1e-12:
                raise InvariantViolationError(f"qubit {i} does not encode its bit pair")

    def code(self, alpha: int) -> LinearCode:
        return self.code0 if alpha == 0 else self.code1

    def message(self, alpha: int) -> np.ndarray:
        return self.r0 if alpha == 0 else self.r1

    def codeword(self, alpha: int) -> np.ndarray:
        return self.c0 if alpha == 0 else self.c1


def otrm_prep(params: ProtocolParams, seed: int | None = None,
              codes: tuple | None = None) -> OtrmInstance:
    """Sample messages, encode, and prepare the qubit list.

    Fresh codes are drawn from the seed unless a fixed public pair is
    supplied.  All randomness derives from labeled sub-streams, so one
    integer reproduces the instance.
    """
    root = params.seed_root if seed is None else seed
    if codes is None:
        codes = (
            random_code(params.n, params.k, derive_seed(root, "code0")),
            random_code(params.n, params.k, derive_seed(root, "code1")),
        )
    code0, code1 = codes
    if code0.n != params.n or code0.k != params.k:
        raise ValueError("code0 shape disagrees with params")
    if code1.n != params.n or code1.k != params.k:
        raise ValueError("code1 shape disagrees with params")
    rng = np.random.default_rng(derive_seed(root, "messages"))
    r0 = rng.integers(0, 2, size=params.k, dtype=np.uint8)
    r1 = rng.integers(0, 2, size=params.k, dtype=np.uint8)
    c0, c1 = encode(code0, r0), encode(code1, r1)
    qubits = tuple(qrac_encode(int(a), int(b)) for a, b in zip(c0, c1))
    return OtrmInstance(code0, code1, r0, r1, c0, c1, qubits)


@dataclass(frozen=True)
class ReadResult:
    """Outcome of one full read: the decode plus ground-truth scoring."""

    alpha: int
    word: np.ndarray          # raw measurement outcomes, one bit per qubit
    message: np.ndarray       # ML-decoded k-bit message
    codeword: np.ndarray      # re-encoding of message
    success: bool             # message equals the instance's secret


def otrm_read(instance: OtrmInstance, alpha: int, seed) -> ReadResult:
    """Measure every qubit in basis alpha and ML-decode the word.

    The matched basis turns each qubit into one use of a binary symmetric
    channel at crossover sin^2(pi/8) on the chosen codeword; decode
    failure is reported via the success flag (the receiver itself cannot
    detect it).
    """
    if alpha not in (0, 1):
        raise ValueError(f"alpha must be 0 or 1, got {alpha}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    meas = measurement_for(alpha)
    word = np.array(
        [sample_measurement(q, meas, rng) for q in instance.qubits], dtype=np.uint8
    )
    msg = ml_decode(instance.code(alpha), word)
    return ReadResult(
        alpha=alpha,
        word=word,
        message=msg,
        codeword=encode(instance.code(alpha), msg),
        success=bool(np.array_equal(msg, instance.message(alpha))),
    )


@dataclass(frozen=True)
class Extractor:
    """Toeplitz two-universal hash over F2, fixed by its public seed bits."""

    bits: np.ndarray
    input_len: int
    output_len: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8) & 1
        object.__setattr__(self, "bits", bits)
        if not 0 <= self.output_len <= self.input_len:
            raise ValueError(
                f"need 0 <= output_len <= input_len, got {self.output_len}, {self.input_len}"
            )
        want = self.input_len + self.output_len - 1 if self.output_len else 0
        if bits.shape != (max(want, 0),):
            raise ValueError(f"seed must hold {want} bits, got shape {bits.shape}")

    @property
    def matrix(self) -> np.ndarray:
        if self.output_len == 0:
            return np.zeros((0, self.input_len), dtype=np.uint8)
        i = np.arange(self.output_len)[:, None]
        j = np.arange(self.input_len)[None, :]
        # constant diagonals: entry (i, j) reads seed position i - j + input_len - 1
        return self.bits[i - j + self.input_len - 1]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8) & 1
        if x.shape != (self.input_len,):
            raise ValueError(f"input must hold {self.input_len} bits")
        return (self.matrix @ x) % 2


def make_extractor(input_len: int, output_len: int, seed) -> Extractor:
    """Build a Toeplitz extractor from a seed.

    seed is an RNG seed (int or Generator) for a random public seed, or
    an explicit bit array of length input_len + output_len - 1.
    """
    want = input_len + output_len - 1 if output_len else 0
    if isinstance(seed, (int, np.integer, np.random.Generator)):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        bits = rng.integers(0, 2, size=want, dtype=np.uint8)
    else:
        bits = np.asarray(seed, dtype=np.uint8)
    return Extractor(bits=bits, input_len=input_len, output_len=output_len)


@dataclass(frozen=True)
class OtmPackage:
    """Message-layer package: instance, ciphertexts, public extractors."""

    instance: OtrmInstance
    ct0: np.ndarray
    ct1: np.ndarray
    ext0: Extractor
    ext1: Extractor


def otm_prep(m0, m1, params: ProtocolParams, seed: int | None = None,
             codes: tuple | None = None) -> OtmPackage:
    """Pad each message with its codeword's extractor output."""
    m0 = np.asarray(m0, dtype=np.uint8) & 1
    m1 = np.asarray(m1, dtype=np.uint8) & 1
    if m0.shape != (params.msg_len,) or m1.shape != (params.msg_len,):
        raise ValueError(f"messages must hold lam/8 = {params.msg_len} bits")
    root = params.seed_root if seed is None else seed
    instance = otrm_prep(params, derive_seed(root, "otrm"), codes=codes)
    ext0 = make_extractor(params.n, params.msg_len, derive_seed(root, "ext0"))
    ext1 = make_extractor(params.n, params.msg_len, derive_seed(root, "ext1"))
    return OtmPackage(
        instance=instance,
        ct0=m0 ^ ext0.apply(instance.c0),
        ct1=m1 ^ ext1.apply(instance.c1),
        ext0=ext0,
        ext1=ext1,
    )


@dataclass(frozen=True)
class OtmReadResult:
    alpha: int
    message: np.ndarray
    success: bool
    inner: ReadResult


def otm_read(pkg: OtmPackage, alpha: int, seed) -> OtmReadResult:
    """Read one string, re-derive its pad, and unmask the ciphertext.

    The output equals the hidden message exactly when the inner decode
    succeeded; otherwise the pad is wrong and the output is garbage, and
    the success flag (ground truth, for scoring) says so.
    """
    inner = otrm_read(pkg.instance, alpha, seed)
    ext = pkg.ext0 if alpha == 0 else pkg.ext1
    ct = pkg.ct0 if alpha == 0 else pkg.ct1
    return OtmReadResult(
        alpha=alpha,
        message=ct ^ ext.apply(inner.codeword),
        success=inner.success,
        inner=inner,
    )


def mc_correctness(params: ProtocolParams, alpha: int, trials: int, seed: int,
                   codes: tuple | None = None) -> dict:
    """Monte-Carlo read success rate over fresh instances.

    Returns counts plus the exact benchmark failure probability of the
    code used (fixed codes advised: with fresh codes per trial the exact
    benchmark is an average, not a constant).
    """
    if codes is None:
        codes = (
            random_code(params.n, params.k, derive_seed(seed, "mc-code0")),
            random_code(params.n, params.k, derive_seed(seed, "mc-code1")),
        )
    from .f2codes import exact_failure_prob

    failures = 0
    for t in range(trials):
        inst = otrm_prep(params, derive_seed(seed, f"trial{t}"), codes=codes)
        res = otrm_read(inst, alpha, derive_seed(seed, f"read{t}"))
        failures += not res.success
    exact = exact_failure_prob(codes[alpha], _CHANNEL_P)
    return {
        "alpha": alpha,
        "trials": trials,
        "failures": failures,
        "empirical_failure": failures / trials,
        "exact_failure": exact,
    }


# ---------------------------------------------------------------------------
# exact leakage experiments

def _strategy_tables(strategy) -> list:
    """Per-qubit outcome tables t[x, y, o] = P(outcome o | bits (x, y))."""
    tables = []
    for entry in strategy:
        if isinstance(entry, Povm):
            els = entry.elements
            t = np.empty((2, 2, len(els)))
            for x, y in itertools.product((0, 1), repeat=2):
                rho = qrac_encode(x, y).density_matrix()
                for o, m in enumerate(els):
                    t[x, y, o] = float(np.trace(m @ rho))
        else:
            meas = entry if isinstance(entry, BasisMeasurement) else BasisMeasurement(float(entry))
            t = np.empty((2, 2, 2))
            for x, y in itertools.product((0, 1), repeat=2):
                t[x, y] = measure_prob(qrac_encode(x, y), meas)
        tables.append(t)
    return tables


def _product_joint(tables) -> JointDistribution:
    """Joint of (b0-string, b1-string, outcome-string) under uniform IID pairs."""
    p = np.ones((1, 1, 1))
    for t in tables:
        p = np.einsum("ABC,xyo->AxByCo", p, 0.25 * t).reshape(
            p.shape[0] * 2, p.shape[1] * 2, p.shape[2] * t.shape[2]
        )
    return JointDistribution(("b0", "b1", "out"), p)


@dataclass(frozen=True)
class LeakageReport:
    """Exact per-strategy leakage figures against the m-fold pair bounds."""

    m: int
    strategy: tuple
    ic_b0: float
    ic_b1: float
    total: float
    cond_b0: float            # I_c(b0-string : outcomes | b1-string)
    cond_b1: float
    lesser: int               # index of the string with the smaller leakage
    bounds: dict = field(compare=False)

    @property
    def greater_value(self) -> float:
        return max(self.ic_b0, self.ic_b1)

    @property
    def conditional_value(self) -> float:
        return max(self.cond_b0, self.cond_b1)

    @property
    def all_ok(self) -> bool:
        return all(v["ok"] for v in self.bounds.values())


@dataclass(frozen=True)
class LeakageSweep:
    m: int
    reports: tuple
    worst: dict
    all_ok: bool


def _single_leakage(m: int, strategy, tables) -> LeakageReport:
    d = _product_joint(tables)
    ic0 = collision_mi(d, ("b0",), ("out",))
    ic1 = collision_mi(d, ("b1",), ("out",))
    c0 = conditional_collision_mi(d, ("b0",), ("out",), ("b1",))
    c1 = conditional_collision_mi(d, ("b1",), ("out",), ("b0",))
    values = {
        "greater": max(ic0, ic1),
        "total": ic0 + ic1,
        "conditional": max(c0, c1),
    }
    bounds = {
        q: {"value": values[q], "limit": m * PER_PAIR_BOUNDS[q],
            "ok": values[q] <= m * PER_PAIR_BOUNDS[q] + 1e-9}
        for q in PER_PAIR_BOUNDS
    }
    label = tuple(
        e if isinstance(e, Povm) else
        (e.theta if isinstance(e, BasisMeasurement) else float(e))
        for e in strategy
    )
    return LeakageReport(
        m=m, strategy=label, ic_b0=ic0, ic_b1=ic1, total=ic0 + ic1,
        cond_b0=c0, cond_b1=c1, lesser=0 if ic0 <= ic1 else 1, bounds=bounds,
    )


def leakage_experiment(m: int, strategy=None, exhaustive: bool = False,
                       angles: Sequence[float] | None = None):
    """Exact leakage of product strategies on m independent pairs.

    One strategy (per-qubit basis angle, BasisMeasurement, or Povm per
    entry) gives one LeakageReport.  With exhaustive=True the grid of
    per-qubit angles (default: 9 angles, multiples of pi/16 up to pi/2)
    is swept over all product assignments and the worst case per figure
    is reported.
    """
    if not 1 <= m <= 5:
        raise ResourceLimitError(f"m = {m} outside exact-enumeration range 1..5")
    if exhaustive:
        if strategy is not None:
            raise ValueError("exhaustive sweep generates its own strategies")
        if angles is None:
            angles = [j * math.pi / 16 for j in range(9)]
        if len(angles) ** m > 20_000:
            raise ResourceLimitError(
                f"{len(angles)}^{m} product strategies exceed the sweep budget"
            )
        base_tables = {a: _strategy_tables([a])[0] for a in angles}
        reports = []
        for combo in itertools.product(angles, repeat=m):
            reports.append(_single_leakage(m, combo, [base_tables[a] for a in combo]))
        worst = {
            q: max(r.bounds[q]["value"] for r in reports) for q in PER_PAIR_BOUNDS
        }
        return LeakageSweep(
            m=m,
            reports=tuple(reports),
            worst=worst,
            all_ok=all(r.all_ok for r in reports),
        )
    if strategy is None or len(strategy) != m:
        raise ValueError(f"strategy must list {m} per-qubit measurements")
    return _single_leakage(m, tuple(strategy), _strategy_tables(strategy))


# ---------------------------------------------------------------------------
# exact simulator comparison

class SimulatorReport(NamedTuple):
    real_view: JointDistribution
    sim_view: JointDistribution
    exact_sd: float
    min_entropy_c1: float
    lhl_bound: float


def simulator_transcript(m0, m1, params: ProtocolParams, adversary_strategy=None,
                         seed: int = 0) -> SimulatorReport:
    """Exact adversary-view distributions, real versus simulated.

    The view is (extractor seeds, measurement outcomes, ct0, ct1) with
    uniform messages r0, r1, uniform extractor seeds, and a fixed
    product measurement strategy.  The simulation replaces ct1 by fresh
    uniform bits.  Returns both exact view distributions, their exact
    statistical distance, the average conditional min-entropy of c1
    given the rest of the view, and the leftover-hash bound
    (1/2) * sqrt(2^(msg_len - min_entropy)) that the distance must obey.
    """
    m0 = np.asarray(m0, dtype=np.uint8) & 1
    m1 = np.asarray(m1, dtype=np.uint8) & 1
    msg = params.msg_len
    if m0.shape != (msg,) or m1.shape != (msg,):
        raise ValueError(f"messages must hold lam/8 = {msg} bits")
    n, k = params.n, params.k
    strategy = adversary_strategy
    if strategy is None:
        strategy = []          # measures nothing: trivial outcome alphabet
    tables = _strategy_tables(strategy)
    if len(tables) > n:
        raise ValueError("strategy lists more qubits than the instance holds")
    n_out = int(np.prod([t.shape[2] for t in tables])) if tables else 1
    w_count = 2 ** (n + msg - 1) if msg else 1
    cells = w_count * w_count * n_out * 4 ** msg
    if cells > 1 << 24:
        raise ResourceLimitError(
            f"view table would hold {cells} cells; shrink n, lam, or the strategy"
        )

    code0 = random_code(n, k, derive_seed(seed, "sim-code0"))
    code1 = random_code(n, k, derive_seed(seed, "sim-code1"))
    msgs = np.array([int_to_bits(r, k) for r in range(2 ** k)])
    cws0 = np.array([encode(code0, r) for r in msgs])
    cws1 = np.array([encode(code1, r) for r in msgs])

    # extractor output (packed int) for every seed value and message index
    def ext_table(cws):
        if msg == 0:
            return np.zeros((1, 2 ** k), dtype=np.int64)
        out = np.empty((w_count, 2 ** k), dtype=np.int64)
        for w in range(w_count):
            ext = make_extractor(n, msg, int_to_bits(w, n + msg - 1))
            for r in range(2 ** k):
                out[w, r] = bits_to_int(ext.apply(cws[r]))
        return out

    ext0, ext1 = ext_table(cws0), ext_table(cws1)
    m0_int, m1_int = bits_to_int(m0), bits_to_int(m1)

    def outcome_probs(c0, c1):
        p = np.ones(1)
        for i, t in enumerate(tables):
            p = np.multiply.outer(p, t[int(c0[i]), int(c1[i])]).reshape(-1)
        return p

    nc = 2 ** msg
    real = np.zeros((w_count, w_count, n_out, nc, nc))
    # side table for the min-entropy of c1: (c1 value, w0, outcome, ct0)
    cw1_ints = np.array([bits_to_int(c) for c in cws1])
    c1_vals = np.sort(np.unique(cw1_ints))
    c1_index = {v: i for i, v in enumerate(c1_vals)}
    side = np.zeros((len(c1_vals), w_count, n_out, nc))

    weight = 0.25 ** k / (w_count * w_count)
    w0_idx = np.arange(w_count)[:, None, None]
    w1_idx = np.arange(w_count)[None, :, None]
    o_idx = np.arange(n_out)[None, None, :]
    for r0, r1 in itertools.product(range(2 ** k), repeat=2):
        pout = outcome_probs(cws0[r0], cws1[r1])
        ct0 = (m0_int ^ ext0[:, r0])[:, None, None]      # varies along w0
        ct1 = (m1_int ^ ext1[:, r1])[None, :, None]      # varies along w1
        real[w0_idx, w1_idx, o_idx, ct0, ct1] += weight * pout[None, None, :]
        side[c1_index[cw1_ints[r1]], w0_idx[:, 0], o_idx[0], ct0[:, 0]] += (
            (0.25 ** k / w_count) * pout[None, :]
        )

    sim = real.sum(axis=-1, keepdims=True) / nc
    sim = np.broadcast_to(sim, real.shape).copy()
    names = ("w0", "w1", "out", "ct0", "ct1")
    real_view = JointDistribution(names, real)
    sim_view = JointDistribution(names, sim)
    exact_sd = 0.5 * float(np.abs(real - sim).sum())

    side_d = JointDistribution(("c1", "w0", "out", "ct0"), side)
    hmin = avg_conditional_min_entropy(side_d, ("c1",), ("w0", "out", "ct0"))
    lhl = 0.5 * math.sqrt(2.0 ** (msg - hmin))
    if exact_sd > lhl + 1e-12:
        raise InvariantViolationError(
            f"exact SD {exact_sd} exceeds the leftover-hash bound {lhl}"
        )
    return SimulatorReport(
        real_view=real_view,
        sim_view=sim_view,
        exact_sd=exact_sd,
        min_entropy_c1=hmin,
        lhl_bound=lhl,
    )
