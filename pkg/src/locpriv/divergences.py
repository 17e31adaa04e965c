"""Exact divergences between finitely supported distributions.

Every pairwise operation aligns the two supports on their union (missing
atoms get mass zero) and works in natural log.  Absolute-continuity
failures return the explicit marker :data:`INF` so downstream bound
evaluators can branch on ``math.isinf`` instead of guessing at sentinel
floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Constructors renormalize a mass vector whose total is within this of 1
# and reject anything further off.
MASS_TOL = 1e-9

# Explicit +infinity marker for divergences that blow up (support escapes).
INF = float("inf")


def is_inf(value: float) -> bool:
    """True when ``value`` is the +infinity marker."""
    return math.isinf(value)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability mass function over an explicit finite support.

    ``support`` holds hashable, unique atoms (opaque identifiers: ints,
    strings, tuples).  ``mass`` is renormalized on construction when its
    total is within :data:`MASS_TOL` of one.
    """

    support: tuple
    mass: tuple

    def __post_init__(self) -> None:
        support = tuple(self.support)
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim != 1 or len(support) != mass.size:
            raise ValueError("support and mass must be 1-d and equal length")
        if len(support) == 0:
            raise ValueError("empty support")
        if len(set(support)) != len(support):
            raise ValueError("support atoms must be unique")
        if np.any(mass < 0.0):
            raise ValueError("negative mass entry")
        total = float(mass.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"mass sums to {total:.12g}, outside tolerance of 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", tuple(float(m) for m in mass / total))

    # ---- convenience constructors -------------------------------------

    @classmethod
    def point_mass(cls, atom) -> "DiscreteDistribution":
        return cls((atom,), (1.0,))

    @classmethod
    def bernoulli(cls, p: float) -> "DiscreteDistribution":
        """Distribution on {0, 1} with P(1) = p."""
        if not 0.0 <= p <= 1.0:
            raise ValueError("bernoulli parameter outside [0, 1]")
        return cls((0, 1), (1.0 - p, p))

    @classmethod
    def uniform(cls, atoms: Iterable) -> "DiscreteDistribution":
        atoms = tuple(atoms)
        return cls(atoms, (1.0 / len(atoms),) * len(atoms))

    # ---- accessors -----------------------------------------------------

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mass, dtype=float)

    def prob_of(self, atom) -> float:
        try:
            return self.mass[self.support.index(atom)]
        except ValueError:
            return 0.0

    def to_json_dict(self) -> dict:
        return {"support": list(self.support), "mass": list(self.mass)}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DiscreteDistribution":
        atoms = obj["support"]
        # JSON round-trips tuples as lists; re-freeze them so atoms hash.
        atoms = [tuple(a) if isinstance(a, list) else a for a in atoms]
        return cls(tuple(atoms), tuple(obj["mass"]))


def aligned(p: DiscreteDistribution, q: DiscreteDistribution):
    """Union support of ``p`` and ``q`` plus both mass vectors on it.

    Order is deterministic: p's atoms first, then q's unseen atoms in q's
    order (atoms need not be mutually comparable, so no sort).
    """
    atoms = list(p.support)
    seen = set(atoms)
    for a in q.support:
        if a not in seen:
            atoms.append(a)
            seen.add(a)
    pv = np.array([p.prob_of(a) for a in atoms])
    qv = np.array([q.prob_of(a) for a in atoms])
    return atoms, pv, qv


# ---- divergences -------------------------------------------------------


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Total variation sup-distance, 0.5 * sum |p - q|."""
    _, pv, qv = aligned(p, q)
    return float(0.5 * np.abs(pv - qv).sum())


def kl(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """KL(p || q) in nats; INF when p is not absolutely continuous w.r.t. q."""
    _, pv, qv = aligned(p, q)
    active = pv > 0.0
    if np.any(qv[active] == 0.0):
        return INF
    return float(np.sum(pv[active] * np.log(pv[active] / qv[active])))


def hellinger(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Hellinger distance sqrt(0.5 * sum (sqrt p - sqrt q)^2), in [0, 1]."""
    _, pv, qv = aligned(p, q)
    return float(math.sqrt(0.5 * np.sum((np.sqrt(pv) - np.sqrt(qv)) ** 2)))


def chi_square(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """chi^2(p || q) = sum (p - q)^2 / q; INF off q's support."""
    _, pv, qv = aligned(p, q)
    if np.any((qv == 0.0) & (pv > 0.0)):
        return INF
    active = qv > 0.0
    return float(np.sum((pv[active] - qv[active]) ** 2 / qv[active]))


def chi_affinity(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """1 + chi^2(p || q); equals the second moment of dp/dq under q."""
    c = chi_square(p, q)
    return INF if is_inf(c) else 1.0 + c


def renyi(p: DiscreteDistribution, q: DiscreteDistribution, alpha: float) -> float:
    """Renyi divergence of order alpha >= 1 (alpha = 1 falls back to KL)."""
    if alpha < 1.0:
        raise ValueError("renyi order must be >= 1")
    if alpha == 1.0:
        return kl(p, q)
    _, pv, qv = aligned(p, q)
    if np.any((qv == 0.0) & (pv > 0.0)):
        return INF
    active = qv > 0.0
    s = float(np.sum(pv[active] ** alpha * qv[active] ** (1.0 - alpha)))
    return float(np.log(s) / (alpha - 1.0))


def fk_divergence(p: DiscreteDistribution, q: DiscreteDistribution, k: float) -> float:
    """f-divergence for f(t) = |t - 1|^k with k > 1.

    k = 2 recovers chi_square exactly; INF when p has mass off q's support.
    """
    if k <= 1.0:
        raise ValueError("fk order must exceed 1")
    _, pv, qv = aligned(p, q)
    if np.any((qv == 0.0) & (pv > 0.0)):
        return INF
    active = qv > 0.0
    ratio = pv[active] / qv[active]
    return float(np.sum(np.abs(ratio - 1.0) ** k * qv[active]))


# ---- combinators -------------------------------------------------------


def mixture(
    components: Sequence[DiscreteDistribution], weights: Sequence[float]
) -> DiscreteDistribution:
    """Convex combination sum_i w_i P_i on the union support."""
    if len(components) != len(weights) or not components:
        raise ValueError("need matching, nonempty components and weights")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("negative mixture weight")
    total = float(w.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"mixture weights sum to {total:.12g}")
    w = w / total
    atoms: list = []
    seen = set()
    for comp in components:
        for a in comp.support:
            if a not in seen:
                atoms.append(a)
                seen.add(a)
    mass = np.zeros(len(atoms))
    index = {a: i for i, a in enumerate(atoms)}
    for wi, comp in zip(w, components):
        for a, m in zip(comp.support, comp.mass):
            mass[index[a]] += wi * m
    return DiscreteDistribution(tuple(atoms), tuple(mass))


def product(p: DiscreteDistribution, q: DiscreteDistribution) -> DiscreteDistribution:
    """Independent product on pair atoms (a, b)."""
    atoms = []
    mass = []
    for a, pa in zip(p.support, p.mass):
        for b, qb in zip(q.support, q.mass):
            atoms.append((a, b))
            mass.append(pa * qb)
    return DiscreteDistribution(tuple(atoms), tuple(mass))
