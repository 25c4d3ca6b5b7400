"""Grid geometry for shallow local circuits.

A depth-d circuit of ell-local gates on a D-dimensional grid can move
information at most ell**d sites in L-infinity distance.  Partitioning the
grid into outer hypercubes with a buffer shell of that width makes the
inner cubes' reverse light cones pairwise disjoint, which is the geometric
fact everything downstream leans on.  This module builds such partitions,
certifies the containment claim, and searches for parameter sizes where
the shell overhead fits inside a 1/100 budget.

Circuits are represented purely by their geometry.  Gate contents never
matter here: only which sites a cone can reach.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math
from typing import NamedTuple

from .errors import InvariantViolationError, ResourceLimitError

__all__ = [
    "GridSpec",
    "HypercubePartition",
    "IndependenceReport",
    "ShellCounts",
    "FeasibilityWitness",
    "build_partition",
    "reverse_lightcone",
    "certify_independence",
    "shell_accounting",
    "find_feasible_params",
    "regroup_measurements",
]

# build_partition materializes every cell index; keep it at desk scale.
_MAX_CELLS = 1 << 22


@dataclass(frozen=True)
class GridSpec:
    """D-dimensional grid of side**D qubits with ell-local depth-d circuits."""

    D: int
    side: int
    ell: int
    depth: int

    def __post_init__(self):
        if self.D < 1:
            raise ValueError(f"dimension must be >= 1, got {self.D}")
        if self.side < 1:
            raise ValueError(f"side must be >= 1, got {self.side}")
        if self.ell < 2:
            raise ValueError(f"gate locality must be >= 2, got {self.ell}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")

    @property
    def n(self) -> int:
        return self.side**self.D

    @property
    def cone_radius(self) -> int:
        # ell**0 == 1: a depth-0 circuit still gets a radius-1 cone so the
        # formula stays uniform; this only widens the certified region.
        return self.ell**self.depth

    def index(self, coords) -> int:
        idx = 0
        for c in coords:
            if not 0 <= c < self.side:
                raise ValueError(f"coordinate {c} outside [0, {self.side})")
            idx = idx * self.side + c
        return idx

    def coords(self, index: int) -> tuple:
        if not 0 <= index < self.n:
            raise ValueError(f"qubit index {index} outside grid of {self.n}")
        out = []
        for _ in range(self.D):
            out.append(index % self.side)
            index //= self.side
        return tuple(reversed(out))


class ShellCounts(NamedTuple):
    cu: int
    cu_bar: int
    q: int
    shell_fraction: float


@dataclass(frozen=True)
class HypercubePartition:
    """Tiling of a grid by outer cubes, each split into inner cube + shell.

    Outer cubes have side 2r + 2*ell**d; the centered inner cube has side
    2r, leaving a shell of width ell**d on every face.
    """

    grid: GridSpec
    r: int
    outer_side: int
    q: int
    inner_cubes: list
    shells: list
    CU: set = field(repr=False)
    CU_bar: set = field(repr=False)

    def __post_init__(self):
        g = self.grid
        if g.n % self.outer_side**g.D != 0:
            raise InvariantViolationError(
                f"{g.n} cells not a multiple of {self.outer_side}**{g.D}"
            )
        inner = (2 * self.r) ** g.D
        for j, cu in enumerate(self.inner_cubes):
            if len(cu) != inner:
                raise InvariantViolationError(
                    f"inner cube {j} has {len(cu)} cells, expected {inner}"
                )
        if len(self.inner_cubes) != self.q or len(self.shells) != self.q:
            raise InvariantViolationError("cube list lengths disagree with q")
        if sum(len(c) for c in self.inner_cubes) != len(self.CU):
            raise InvariantViolationError("inner cubes overlap")
        if self.CU | self.CU_bar != set(range(g.n)) or self.CU & self.CU_bar:
            raise InvariantViolationError("CU, CU_bar do not partition the grid")
        want_bar = g.n - self.q * inner
        if len(self.CU_bar) != want_bar:
            raise InvariantViolationError(
                f"|CU_bar| = {len(self.CU_bar)}, expected {want_bar}"
            )

    def cube_position(self, j: int) -> tuple:
        """Position of outer cube j on the cube grid, C order."""
        per_axis = self.grid.side // self.outer_side
        out = []
        for _ in range(self.grid.D):
            out.append(j % per_axis)
            j //= per_axis
        return tuple(reversed(out))

    def outer_box(self, j: int) -> list:
        """Per-axis (lo, hi) inclusive bounds of outer cube j."""
        pos = self.cube_position(j)
        return [(p * self.outer_side, (p + 1) * self.outer_side - 1) for p in pos]

    def inner_box(self, j: int) -> list:
        w = self.grid.cone_radius
        return [(lo + w, hi - w) for lo, hi in self.outer_box(j)]


def _box_cells(grid: GridSpec, box) -> set:
    ranges = [range(lo, hi + 1) for lo, hi in box]
    return {grid.index(c) for c in itertools.product(*ranges)}


def build_partition(grid: GridSpec, r: int) -> HypercubePartition:
    """Tile the grid into outer cubes of side 2r + 2*ell**d.

    Requires the grid side to be divisible by the outer side.
    """
    if r < 1:
        raise ValueError(f"inner radius must be >= 1, got {r}")
    outer_side = 2 * r + 2 * grid.cone_radius
    if grid.side % outer_side != 0:
        raise ValueError(
            f"grid side {grid.side} not divisible by outer side {outer_side}"
        )
    if grid.n > _MAX_CELLS:
        raise ResourceLimitError(
            f"{grid.n} cells exceeds the explicit-partition limit {_MAX_CELLS}"
        )
    per_axis = grid.side // outer_side
    q = per_axis**grid.D
    inner_cubes, shells = [], []
    w = grid.cone_radius
    for pos in itertools.product(range(per_axis), repeat=grid.D):
        outer = [(p * outer_side, (p + 1) * outer_side - 1) for p in pos]
        inner = [(lo + w, hi - w) for lo, hi in outer]
        outer_cells = _box_cells(grid, outer)
        inner_cells = _box_cells(grid, inner)
        inner_cubes.append(inner_cells)
        shells.append(outer_cells - inner_cells)
    CU = set().union(*inner_cubes)
    CU_bar = set().union(*shells)
    return HypercubePartition(
        grid=grid,
        r=r,
        outer_side=outer_side,
        q=q,
        inner_cubes=inner_cubes,
        shells=shells,
        CU=CU,
        CU_bar=CU_bar,
    )


def reverse_lightcone(grid: GridSpec, qubit: int) -> set:
    """All sites a depth-d circuit could have fed into this qubit.

    L-infinity ball of radius ell**d, clipped at the grid boundary.  This
    is a superset of the true reverse cone of any concrete circuit, which
    is the safe direction for independence certification.
    """
    center = grid.coords(qubit)
    R = grid.cone_radius
    box = [(max(0, c - R), min(grid.side - 1, c + R)) for c in center]
    return _box_cells(grid, box)


@dataclass(frozen=True)
class IndependenceReport:
    passed: bool
    cubes_checked: int
    method: str
    # (cube index, inner qubit, cell its cone reaches outside the claim)
    counterexample: tuple | None = None


def certify_independence(
    part: HypercubePartition, outer_shrink: int = 0, method: str = "auto"
) -> IndependenceReport:
    """Check that every inner-cube qubit's cone stays inside its outer cube.

    ``outer_shrink`` trims the claimed region by that many cells on every
    face, which lets tests confirm the certificate is tight: the honest
    claim passes and any smaller one fails.

    The interval method checks, per axis, the extreme inner coordinates
    only.  The clipped cone bounds max(0, p-R) and min(side-1, p+R) are
    monotone in p, so the extremes dominate every interior qubit; this
    certifies the same statement as the exhaustive set check.
    """
    grid = part.grid
    if method == "auto":
        method = "exhaustive" if grid.n <= 20_000 else "interval"
    R = grid.cone_radius

    if method == "exhaustive":
        for j in range(part.q):
            claim = [
                (lo + outer_shrink, hi - outer_shrink) for lo, hi in part.outer_box(j)
            ]
            claim_cells = _box_cells(grid, claim) if all(lo <= hi for lo, hi in claim) else set()
            for qubit in sorted(part.inner_cubes[j]):
                cone = reverse_lightcone(grid, qubit)
                escaped = cone - claim_cells
                if escaped:
                    return IndependenceReport(
                        False, j + 1, method, (j, qubit, min(escaped))
                    )
        return IndependenceReport(True, part.q, method)

    if method != "interval":
        raise ValueError(f"unknown method {method!r}")

    for j in range(part.q):
        inner = part.inner_box(j)
        claim = [(lo + outer_shrink, hi - outer_shrink) for lo, hi in part.outer_box(j)]
        base = [lo for lo, _ in inner]
        for axis in range(grid.D):
            ilo, ihi = inner[axis]
            clo, chi = claim[axis]
            reach_lo = max(0, ilo - R)
            reach_hi = min(grid.side - 1, ihi + R)
            if reach_lo < clo:
                witness = list(base)
                witness[axis] = ilo
                cell = list(witness)
                cell[axis] = reach_lo
                return IndependenceReport(
                    False, j + 1, method, (j, grid.index(witness), grid.index(cell))
                )
            if reach_hi > chi:
                witness = list(base)
                witness[axis] = ihi
                cell = list(witness)
                cell[axis] = reach_hi
                return IndependenceReport(
                    False, j + 1, method, (j, grid.index(witness), grid.index(cell))
                )
    return IndependenceReport(True, part.q, method)


def shell_accounting(part: HypercubePartition) -> ShellCounts:
    """Closed-form cell counts, cross-checked against the explicit sets."""
    g = part.grid
    inner = (2 * part.r) ** g.D
    outer = part.outer_side**g.D
    cu = part.q * inner
    cu_bar = g.n - cu
    fraction = 1.0 - inner / outer
    if cu != len(part.CU) or cu_bar != len(part.CU_bar):
        raise InvariantViolationError(
            f"closed-form counts ({cu}, {cu_bar}) disagree with explicit sets "
            f"({len(part.CU)}, {len(part.CU_bar)})"
        )
    return ShellCounts(cu, cu_bar, part.q, fraction)


@dataclass(frozen=True)
class FeasibilityWitness:
    """Concrete (n, r) satisfying the two parameter constraints.

    The budget inequality charges three inner-cube-sized terms, the shell
    four times over, and the two log terms against n/100:

        2*(2r)**D + 2*log2(1/eps1) + log2(1/eps2) + 4*|CU_bar| + (2r)**D
            <= n / 100                                             (1)
        |CU_bar| >= log2(1/eps1)                                   (2)

    with |CU_bar| = n * (1 - (2r)**D / (2r + 2*ell**d)**D).  Both sides
    are stored as evaluated and re-checked on construction.
    """

    D: int
    ell: int
    depth: int
    eps1: float
    eps2: float
    r: int
    side: int
    n: int
    cu_bar: int
    eq1_lhs: float
    eq1_rhs: float
    eq2_lhs: float
    eq2_rhs: float

    def __post_init__(self):
        if self.eq1_lhs > self.eq1_rhs:
            raise InvariantViolationError(
                f"budget inequality fails: {self.eq1_lhs} > {self.eq1_rhs}"
            )
        if self.eq2_lhs < self.eq2_rhs:
            raise InvariantViolationError(
                f"shell-size inequality fails: {self.eq2_lhs} < {self.eq2_rhs}"
            )


def _eval_constraints(D, ell, depth, eps1, eps2, r, t):
    inner = (2 * r) ** D
    outer_side = 2 * r + 2 * ell**depth
    outer = outer_side**D
    n = (t * outer_side) ** D
    cu_bar = t**D * (outer - inner)
    log1 = math.log2(1.0 / eps1)
    log2_ = math.log2(1.0 / eps2)
    lhs1 = 3 * inner + 2 * log1 + log2_ + 4 * cu_bar
    return n, cu_bar, float(lhs1), n / 100.0, float(cu_bar), log1


def find_feasible_params(
    eps1: float, eps2: float, ell: int, depth: int, D: int
) -> FeasibilityWitness:
    """Smallest r, then smallest grid, meeting both constraints.

    Stage one grows r until the n-proportional part of the budget fits:
    400 * (outer - inner) < outer in exact integers, where outer and inner
    are the per-cube cell counts.  Stage two grows the number of outer
    cubes per axis until the remaining (per-cube constant) terms fit too.
    Everything is integer arithmetic except the two log terms, and the
    returned witness re-verifies both inequalities by substitution.
    """
    if not (0.0 < eps1 < 1.0 and 0.0 < eps2 < 1.0):
        raise ValueError("smoothing parameters must lie in (0, 1)")
    GridSpec(D=D, side=1, ell=ell, depth=depth)  # bounds check on ell, d, D

    width = ell**depth
    r = 1
    while True:
        inner = (2 * r) ** D
        outer = (2 * r + 2 * width) ** D
        if 400 * (outer - inner) < outer:
            break
        r += 1

    slack = outer - 400 * (outer - inner)  # > 0 by the loop above
    log1 = math.log2(1.0 / eps1)
    consts = 2 * log1 + math.log2(1.0 / eps2)
    # need t**D * slack / 100 >= 3*inner + consts, plus the shell-size floor
    t_pow = max(
        math.ceil((300 * inner + 100 * consts) / slack),
        math.ceil(log1 / (outer - inner)),
        1,
    )
    t = max(1, math.ceil(t_pow ** (1.0 / D)))
    while t > 1 and (t - 1) ** D >= t_pow:
        t -= 1
    while t**D < t_pow:
        t += 1

    # float rounding paranoia: substitution is the authority
    while True:
        n, cu_bar, lhs1, rhs1, lhs2, rhs2 = _eval_constraints(
            D, ell, depth, eps1, eps2, r, t
        )
        if lhs1 <= rhs1 and lhs2 >= rhs2:
            break
        t += 1

    return FeasibilityWitness(
        D=D,
        ell=ell,
        depth=depth,
        eps1=eps1,
        eps2=eps2,
        r=r,
        side=t * (2 * r + 2 * width),
        n=n,
        cu_bar=cu_bar,
        eq1_lhs=lhs1,
        eq1_rhs=rhs1,
        eq2_lhs=lhs2,
        eq2_rhs=rhs2,
    )


def regroup_measurements(part: HypercubePartition, outcome_assignment: dict) -> list:
    """Collect per-qubit outcomes into per-cube groups.

    Non-adaptive circuits let us reorder measurements freely, so grouping
    by cube is purely a relabeling.  Every inner-cube qubit must be
    assigned; outcomes on shell qubits are ignored.  Group j lists cube
    j's outcomes in qubit order, and the concatenation of all groups is a
    permutation of the assigned inner-cube outcomes.
    """
    missing = part.CU - outcome_assignment.keys()
    if missing:
        raise ValueError(f"unassigned inner-cube qubits, e.g. {min(missing)}")
    return [
        [outcome_assignment[qubit] for qubit in sorted(cube)]
        for cube in part.inner_cubes
    ]
