"""Collision (Renyi-2) entropy toolkit for small discrete joints.

A joint distribution is a dense probability table over named variables.
All quantities are computed exactly in float64:

    H_c(X)     = -log2 sum_x p(x)^2
    H_c(X|Y)   = -log2 sum_{x,y} p(x,y) p(x|y)
    I_c(X:Y)   = H_c(X) - H_c(X|Y)
    I_c(X:Y|Z) = H_c(X|Z) - H_c(X|YZ)

Conventions: variable groups may be a single name or a sequence of names;
zero-mass conditioning slices contribute nothing (0 * anything = 0); logs
are base 2 throughout.  Smoothing operations measure statistical distance
on the marginal over the variables involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import json
import math

import numpy as np

from .errors import InvariantViolationError

__all__ = [
    "JointDistribution",
    "SmoothedDistribution",
    "random_joint",
    "collision_entropy",
    "conditional_collision_entropy",
    "collision_mi",
    "conditional_collision_mi",
    "min_entropy",
    "avg_conditional_min_entropy",
    "statistical_distance",
    "markov_smooth",
    "smooth_collision_mi_upper",
]

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class JointDistribution:
    """Dense joint over named finite variables.

    ``table`` has one axis per name, entries nonnegative and summing to 1
    within tolerance (the constructor renormalizes the residual rounding).
    """

    names: tuple[str, ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        names = tuple(self.names)
        table = np.asarray(self.table, dtype=float)
        if len(names) != table.ndim:
            raise ValueError(f"{len(names)} names for a {table.ndim}-axis table")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        if table.size == 0:
            raise ValueError("empty table")
        if np.any(table < -1e-12):
            raise ValueError("negative probability entry")
        mass = float(table.sum())
        if abs(mass - 1.0) > _MASS_TOL:
            raise ValueError(f"probabilities sum to {mass}, not 1")
        table = np.clip(table, 0.0, None) / mass
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "table", table)

    # -- structure helpers -------------------------------------------------

    def axes_of(self, group) -> tuple[int, ...]:
        names = (group,) if isinstance(group, str) else tuple(group)
        missing = [n for n in names if n not in self.names]
        if missing:
            raise ValueError(f"unknown variable(s) {missing}; have {self.names}")
        return tuple(self.names.index(n) for n in names)

    def sizes_of(self, group) -> tuple[int, ...]:
        return tuple(self.table.shape[a] for a in self.axes_of(group))

    def marginal(self, group) -> "JointDistribution":
        axes = self.axes_of(group)
        keep = [self.names[a] for a in axes]
        drop = tuple(i for i in range(self.table.ndim) if i not in axes)
        summed = self.table.sum(axis=drop) if drop else self.table
        current = [self.names[a] for a in sorted(axes)]
        perm = [current.index(n) for n in keep]
        return JointDistribution(tuple(keep), np.transpose(summed, perm))

    def grouped(self, *groups) -> np.ndarray:
        """Marginal table reshaped to one flat axis per group, in order."""
        flat_names = []
        for g in groups:
            flat_names.extend((g,) if isinstance(g, str) else g)
        marg = self.marginal(flat_names)
        shape = []
        for g in groups:
            shape.append(int(np.prod(marg.sizes_of(g), dtype=int)))
        return marg.table.reshape(shape)

    # -- serialization -----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.names) + ",prob\n")
        for idx in np.ndindex(*self.table.shape):
            buf.write(",".join(str(i) for i in idx))
            buf.write(f",{float(self.table[idx])!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "JointDistribution":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if len(lines) < 2:
            raise ValueError("distribution CSV needs a header and at least one row")
        header = [h.strip() for h in lines[0].split(",")]
        if header[-1] != "prob":
            raise ValueError("last CSV column must be 'prob'")
        names = tuple(header[:-1])
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")
            if len(cells) != len(header):
                raise ValueError(f"row has {len(cells)} cells, expected {len(header)}")
            rows.append(([int(c) for c in cells[:-1]], float(cells[-1])))
        shape = [max(r[0][i] for r in rows) + 1 for i in range(len(names))]
        table = np.zeros(shape)
        for idx, prob in rows:
            table[tuple(idx)] = prob
        return cls(names, table)

    def to_json(self) -> str:
        return json.dumps(
            {
                "variables": [
                    {"name": n, "size": int(s)} for n, s in zip(self.names, self.table.shape)
                ],
                "table": self.table.ravel().tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "JointDistribution":
        try:
            obj = json.loads(text)
            names = tuple(v["name"] for v in obj["variables"])
            shape = tuple(int(v["size"]) for v in obj["variables"])
            table = np.asarray(obj["table"], dtype=float).reshape(shape)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed distribution description: {exc}") from exc
        return cls(names, table)


def random_joint(names, sizes, seed) -> JointDistribution:
    """Uniformly random point of the probability simplex over the table."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = tuple(int(s) for s in sizes)
    flat = rng.dirichlet(np.ones(int(np.prod(shape))))
    return JointDistribution(tuple(names), flat.reshape(shape))


# -- entropies ------------------------------------------------------------


def _norm_group(group) -> tuple:
    if group is None:
        return ()
    return (group,) if isinstance(group, str) else tuple(group)


def collision_entropy(d: JointDistribution, target) -> float:
    p = d.grouped(_norm_group(target)).ravel()
    return -math.log2(float(np.dot(p, p)))


def conditional_collision_entropy(d: JointDistribution, target, given=None) -> float:
    given = _norm_group(given)
    if not given:
        return collision_entropy(d, target)
    joint = d.grouped(_norm_group(target), given)  # (T, G)
    pg = joint.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pg > 0.0, (joint * joint) / pg, 0.0)
    return -math.log2(float(ratio.sum()))


def collision_mi(d: JointDistribution, x, y) -> float:
    return collision_entropy(d, x) - conditional_collision_entropy(d, x, y)


def conditional_collision_mi(d: JointDistribution, x, y, z=None) -> float:
    x, y, z = _norm_group(x), _norm_group(y), _norm_group(z)
    if not z:
        return collision_mi(d, x, y)
    return conditional_collision_entropy(d, x, z) - conditional_collision_entropy(
        d, x, y + z
    )


def min_entropy(d: JointDistribution, target) -> float:
    p = d.grouped(_norm_group(target)).ravel()
    return -math.log2(float(p.max()))


def avg_conditional_min_entropy(d: JointDistribution, target, given) -> float:
    """-log2 E_g[max_t p(t|g)], the average-case conditional min-entropy."""
    joint = d.grouped(_norm_group(target), _norm_group(given))
    return -math.log2(float(joint.max(axis=0).sum()))


def statistical_distance(p: JointDistribution, q: JointDistribution) -> float:
    if p.names != q.names or p.table.shape != q.table.shape:
        raise ValueError("distributions live on different variable sets")
    return 0.5 * float(np.abs(p.table - q.table).sum())


# -- smoothing ------------------------------------------------------------


@dataclass(frozen=True)
class SmoothedDistribution:
    """Result of a truncate-and-renormalize smoothing step.

    ``sd_exact`` is the exact statistical distance between ``base`` and
    ``truncated``; ``sd_bound`` is the Markov guarantee E[p(X|Z)]/cap,
    checked to dominate ``sd_exact`` on construction.
    """

    base: JointDistribution
    truncated: JointDistribution
    cap: float
    sd_exact: float
    sd_bound: float

    def __post_init__(self):
        if self.sd_exact > self.sd_bound + 1e-12:
            raise InvariantViolationError(
                f"exact SD {self.sd_exact} exceeds Markov bound {self.sd_bound}"
            )


def markov_smooth(d: JointDistribution, target, given, cap: float) -> SmoothedDistribution:
    """Remove all (target, given) events with p(target|given) >= cap, renormalize.

    Removed mass equals Pr[p(X|Z) >= cap] <= E[p(X|Z)]/cap = 2^-Hc(X|Z)/cap.
    """
    if cap <= 0.0:
        raise ValueError("cap must be positive")
    target, given = _norm_group(target), _norm_group(given)
    t_axes, g_axes = d.axes_of(target), d.axes_of(given)
    joint = d.grouped(target, given)  # (T, G)
    pg = joint.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(pg > 0.0, joint / pg, 0.0)
    kill = cond >= cap  # (T, G) mask over flattened groups
    # broadcast the mask back onto the full table
    t_sizes = d.sizes_of(target)
    g_sizes = d.sizes_of(given)
    mask_full = np.zeros(d.table.shape, dtype=bool)
    it = np.ndindex(*joint.shape)
    for tg in it:
        if not kill[tg]:
            continue
        t_idx = np.unravel_index(tg[0], t_sizes)
        g_idx = np.unravel_index(tg[1], g_sizes)
        sel = [slice(None)] * d.table.ndim
        for ax, i in zip(t_axes, t_idx):
            sel[ax] = i
        for ax, i in zip(g_axes, g_idx):
            sel[ax] = i
        mask_full[tuple(sel)] = True
    removed = float(d.table[mask_full].sum())
    if removed >= 1.0 - 1e-12:
        raise ValueError(f"cap {cap} removes all probability mass")
    new_table = np.where(mask_full, 0.0, d.table) / (1.0 - removed)
    truncated = JointDistribution(d.names, new_table)
    expectation = float((joint * cond).sum())  # E[p(X|Z)] = 2^-Hc(X|Z)
    return SmoothedDistribution(
        base=d,
        truncated=truncated,
        cap=cap,
        sd_exact=statistical_distance(d, truncated),
        sd_bound=expectation / cap,
    )


def _floor_y_witness(d: JointDistribution, x, y, z) -> JointDistribution:
    """Nearby distribution with p(y|z) >= 1/(2|Y|^2) for every slice z.

    Raising at most |Y| conditional masses by at most the floor moves at
    most 1/(2|Y|) of probability, so the statistical distance to ``d`` is
    at most 1/(2|Y|); the floor still forces p(x|y,z) <= 2|Y| p(x|z), hence
    I_c of the witness is at most 1 + log2|Y| <= 2 log2|Y| for |Y| >= 2.
    """
    x, y, z = _norm_group(x), _norm_group(y), _norm_group(z)
    order = x + y + z
    marg = d.marginal(order)
    nx = int(np.prod(marg.sizes_of(x), dtype=int))
    ny = int(np.prod(marg.sizes_of(y), dtype=int))
    nz = int(np.prod(marg.sizes_of(z), dtype=int)) if z else 1
    table = marg.table.reshape(nx, ny, nz).copy()
    floor = 1.0 / (2 * ny**2)
    for iz in range(nz):
        pz = table[:, :, iz].sum()
        if pz <= 0.0:
            continue
        cond = table[:, :, iz].sum(axis=0) / pz  # p(y|z)
        deficient = cond < floor
        # water-fill: raise deficient ys to the floor, scale the rest down;
        # repeat because scaling can push new ys below the floor
        new_cond = cond.copy()
        while True:
            need = floor * deficient.sum()
            keep = ~deficient
            scale = (1.0 - need) / new_cond[keep].sum()
            candidate = new_cond * scale
            newly = keep & (candidate < floor)
            if not newly.any():
                new_cond = np.where(deficient, floor, candidate)
                break
            deficient |= newly
        for iy in range(ny):
            if cond[iy] > 0.0:
                table[:, iy, iz] *= new_cond[iy] / cond[iy]
            elif new_cond[iy] > 0.0:
                table[:, iy, iz] = new_cond[iy] * pz / nx
    names = tuple(order)
    return JointDistribution(names, (table / table.sum()).reshape(marg.table.shape))


def smooth_collision_mi_upper(
    d: JointDistribution, x, y, z=None, epsilon: float = 0.0
) -> float:
    """Certified upper bound on the epsilon-smoothed I_c(X:Y|Z).

    Exhibits explicit witness distributions within statistical distance
    ``epsilon`` of the (X, Y, Z) marginal and returns the smallest exact
    I_c among them; never claims to find the true minimum.  With
    epsilon = 0 this is exactly the unsmoothed quantity.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    x, y, z = _norm_group(x), _norm_group(y), _norm_group(z)
    marg = d.marginal(x + y + z)
    candidates = [conditional_collision_mi(marg, x, y, z if z else None)]
    if epsilon > 0.0:
        ny = int(np.prod(marg.sizes_of(y), dtype=int))
        witness = _floor_y_witness(marg, x, y, z)
        if statistical_distance(marg, witness) <= epsilon + 1e-12:
            candidates.append(conditional_collision_mi(witness, x, y, z if z else None))
        # truncation witnesses: cut the largest p(x | y z) spikes the budget allows
        joint = marg.grouped(x, y + z)
        pg = joint.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(pg > 0.0, joint / pg, 0.0)
        levels = np.unique(cond[cond > 0.0])[::-1]
        for cap in levels[:8]:
            removed = float(joint[cond >= cap].sum())
            if removed > epsilon:
                break
            if removed == 0.0:
                continue
            try:
                sm = markov_smooth(marg, x, y + z, cap=float(cap))
            except ValueError:
                continue
            if sm.sd_exact <= epsilon + 1e-12:
                candidates.append(
                    conditional_collision_mi(sm.truncated, x, y, z if z else None)
                )
    return min(candidates)
