"""Single-qubit encoding of two classical bits with basis-choice readout.

States are real single-qubit pure states |psi_theta> = cos(theta)|0> +
sin(theta)|1>.  Two bits (b0, b1) map to one of four states so that
measuring in the computational basis recovers b0, and measuring in the
pi/4-rotated basis recovers b1, each with probability cos^2(pi/8).

The angle table is

    (0,0) -> pi/8    (0,1) -> -pi/8    (1,0) -> 3pi/8    (1,1) -> 5pi/8

(the same four states as writing the b0=1 entries as +-5pi/8, relabeled so
that both readouts actually succeed with the advertised probability; angles
are equivalent mod pi up to a global sign).
"""

from __future__ import annotations

from dataclasses import dataclass
import json
import math

import numpy as np

from .collinfo import JointDistribution

__all__ = [
    "QubitState",
    "BasisMeasurement",
    "SUCCESS_PROB",
    "ENCODING_ANGLES",
    "qrac_encode",
    "measurement_for",
    "measure_prob",
    "sample_measurement",
    "qrac_success_table",
    "product_outcome_distribution",
    "states_equal",
]

SUCCESS_PROB = math.cos(math.pi / 8) ** 2

ENCODING_ANGLES = {
    (0, 0): math.pi / 8,
    (0, 1): -math.pi / 8,
    (1, 0): 3 * math.pi / 8,
    (1, 1): 5 * math.pi / 8,
}


@dataclass(frozen=True)
class QubitState:
    """Real pure state at angle theta from |0>."""

    theta: float

    def density_matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c * c, c * s], [c * s, s * s]])

    def to_json(self) -> str:
        return json.dumps({"theta": self.theta})


@dataclass(frozen=True)
class BasisMeasurement:
    """Orthonormal-basis measurement {psi_theta, psi_{theta+pi/2}}.

    Outcome 0 is the projector onto psi_theta.
    """

    theta: float

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            QubitState(self.theta).density_matrix(),
            QubitState(self.theta + math.pi / 2).density_matrix(),
        )


def measurement_for(alpha: int) -> BasisMeasurement:
    """Readout basis for bit alpha: Z basis for b0, pi/4 basis for b1."""
    if alpha not in (0, 1):
        raise ValueError(f"alpha must be 0 or 1, got {alpha}")
    return BasisMeasurement(0.0 if alpha == 0 else math.pi / 4)


def qrac_encode(b0: int, b1: int) -> QubitState:
    if b0 not in (0, 1) or b1 not in (0, 1):
        raise ValueError(f"bits must be 0/1, got ({b0}, {b1})")
    return QubitState(ENCODING_ANGLES[(b0, b1)])


def measure_prob(state: QubitState, meas: BasisMeasurement) -> tuple[float, float]:
    """Exact outcome distribution (p0, p1) of measuring ``state`` in ``meas``."""
    delta = state.theta - meas.theta
    p0 = math.cos(delta) ** 2
    return (p0, 1.0 - p0)


def sample_measurement(state: QubitState, meas: BasisMeasurement, seed) -> int:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p0, _ = measure_prob(state, meas)
    return int(rng.random() >= p0)


def qrac_success_table() -> dict:
    """P[readout of b_alpha is correct] for all (b0, b1, alpha).

    All eight entries equal cos^2(pi/8).
    """
    table = {}
    for (b0, b1), _ in ENCODING_ANGLES.items():
        state = qrac_encode(b0, b1)
        for alpha, want in ((0, b0), (1, b1)):
            probs = measure_prob(state, measurement_for(alpha))
            table[(b0, b1, alpha)] = probs[want]
    return table


def states_equal(a: QubitState, b: QubitState, tol: float = 1e-12) -> bool:
    """Equality up to global sign: theta differing by a multiple of pi."""
    return math.isclose(
        math.cos(a.theta - b.theta) ** 2, 1.0, rel_tol=0.0, abs_tol=tol
    )


def product_outcome_distribution(pairs, measurements) -> JointDistribution:
    """Exact joint outcome distribution for fixed encoded bit pairs.

    Parameters
    ----------
    pairs : sequence of (b0, b1)
        Bits encoded on each of the m qubits.
    measurements : sequence of BasisMeasurement
        Basis used on each qubit.

    Returns
    -------
    JointDistribution over variables o1..om, one binary axis per qubit.
    """
    pairs = list(pairs)
    measurements = list(measurements)
    if len(pairs) != len(measurements):
        raise ValueError("one measurement per qubit required")
    table = np.ones(())
    for (b0, b1), meas in zip(pairs, measurements):
        p = np.array(measure_prob(qrac_encode(b0, b1), meas))
        table = np.multiply.outer(table, p)
    names = tuple(f"o{i+1}" for i in range(len(pairs)))
    return JointDistribution(names, table.reshape((2,) * len(pairs)))
