"""Contraction of divergences through private channels, and packing complexity.

Two kinds of results live here: exhaustive finite-alphabet checks that a
channel's output divergences contract the way its measured privacy level
says they must, and the chi-squared / sup-norm complexity functionals of a
packing family that drive the high-dimensional lower bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import FiniteChannel, push_forward, verify_chi2, verify_fk
from .divergences import (
    INF,
    DiscreteDistribution,
    aligned,
    chi_square,
    fk_divergence,
    is_inf,
    product,
    tv_distance,
)

JOINT_ATOM_CAP = 1_000_000
CINF_SUPPORT_CAP = 20

SLACK_TOL = 1e-9


# ---- packing families ------------------------------------------------------


@dataclass(frozen=True)
class PackingFamily:
    """A base distribution P0 plus the perturbed members {P_v}."""

    base: DiscreteDistribution
    members: tuple

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise ValueError("packing family needs at least one member")
        object.__setattr__(self, "members", members)

    def union_support(self) -> list:
        atoms = list(self.base.support)
        seen = set(atoms)
        for m in self.members:
            for a in m.support:
                if a not in seen:
                    atoms.append(a)
                    seen.add(a)
        return atoms


def power_iteration(
    mat: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000, seed: int = 0
) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Stops when the Rayleigh quotient's relative change drops below ``tol``.
    The start vector is a fixed seeded Gaussian so repeated calls are
    deterministic and eigenvalue ties (common in symmetric packings) do not
    strand the iteration in a null space.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("power iteration needs a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(m)) == 0.0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(m.shape[0])
    v /= np.linalg.norm(v)
    rayleigh = float(v @ m @ v)
    for _ in range(max_iter):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new_rayleigh = float(v @ m @ v)
        if abs(new_rayleigh - rayleigh) <= tol * max(1.0, abs(new_rayleigh)):
            return new_rayleigh
        rayleigh = new_rayleigh
    return rayleigh


def _aligned_family(fam: PackingFamily, pstar: DiscreteDistribution | None):
    atoms = fam.union_support()
    base = np.array([fam.base.prob_of(a) for a in atoms])
    diffs = np.array(
        [[fam.base.prob_of(a) - m.prob_of(a) for a in atoms] for m in fam.members]
    )
    if pstar is None:
        star = base
    else:
        star = np.array([pstar.prob_of(a) for a in atoms])
    return atoms, base, diffs, star


def complexity_c2(fam: PackingFamily, pstar: DiscreteDistribution | None = None) -> float:
    """Chi-squared modulus of the packing at reference P*.

    sup over test functions with ||f||_{L^2(P*)} <= 1 of the mean squared
    linear discrepancy (1/|V|) sum_v (int f d(P0 - P_v))^2.  The supremum is
    the top eigenvalue of the member Gram matrix, found by power iteration.
    The infimum over P* is the caller's job; default P* is the base.
    """
    _, _, diffs, star = _aligned_family(fam, pstar)
    if np.any(star <= 0.0):
        raise ValueError("reference P* must be strictly positive on the union support")
    u = diffs / np.sqrt(star)[None, :]
    gram = (u @ u.T) / len(fam.members)
    return max(0.0, power_iteration(gram))


def complexity_cinf(fam: PackingFamily, pstar: DiscreteDistribution | None = None) -> float:
    """Sup-norm modulus: sup over ||f||_inf <= 1 by sign-vertex enumeration.

    The objective is convex in f, so the max sits at a vertex of the cube;
    all 2^m sign patterns are enumerated (support cap 20).  P* only enters
    through its support, which must cover the union support.
    """
    _, _, diffs, star = _aligned_family(fam, pstar)
    if np.any(star <= 0.0):
        raise ValueError("reference P* must be strictly positive on the union support")
    m = diffs.shape[1]
    if m > CINF_SUPPORT_CAP:
        raise ValueError(f"support size {m} exceeds vertex-enumeration cap {CINF_SUPPORT_CAP}")
    best = 0.0
    total = 1 << (m - 1)  # f and -f tie; pin the first sign
    chunk = 1 << 14
    cols = np.arange(m - 1)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        signs = np.ones((idx.size, m))
        bits = (idx[:, None] >> cols[None, :]) & 1
        signs[:, 1:] = 2.0 * bits - 1.0
        vals = (signs @ diffs.T) ** 2
        best = max(best, float(vals.mean(axis=1).max()))
    return best


# ---- contraction checks -----------------------------------------------------


@dataclass(frozen=True)
class ContractionReport:
    """One checked instance: lhs <= rhs within slack, plus the privacy used."""

    name: str
    lhs: float
    rhs: float
    epsilon_used: float
    holds: bool
    slack: float


def check_fk_contraction(
    channel: FiniteChannel,
    p0: DiscreteDistribution,
    p1: DiscreteDistribution,
    k: float,
) -> ContractionReport:
    """Check D_fk(M0 || M1) <= (2 eps)^k * TV(P0, P1)^k for one instance.

    eps is the channel's measured f_k privacy level; M_a is the push-forward
    of P_a.
    """
    eps = verify_fk(channel, k)
    m0 = push_forward(p0, channel)
    m1 = push_forward(p1, channel)
    lhs = fk_divergence(m0, m1, k)
    tv = tv_distance(p0, p1)
    if is_inf(eps):
        rhs = INF if tv > 0.0 else 0.0
    else:
        rhs = (2.0 * eps) ** k * tv**k
    holds = lhs <= rhs + SLACK_TOL
    slack = rhs - lhs if not (is_inf(rhs) or is_inf(lhs)) else INF
    return ContractionReport("fk-contraction", lhs, rhs, eps, holds, slack)


def product_channel(channels: Sequence[FiniteChannel]) -> FiniteChannel:
    """Independent per-coordinate composition with tuple alphabets."""
    if not channels:
        raise ValueError("need at least one channel")
    inputs: list = [(a,) for a in channels[0].inputs]
    outputs: list = [(b,) for b in channels[0].outputs]
    kernel = channels[0].as_matrix()
    for ch in channels[1:]:
        inputs = [a + (x,) for a in inputs for x in ch.inputs]
        outputs = [b + (z,) for b in outputs for z in ch.outputs]
        kernel = np.kron(kernel, ch.as_matrix())
        if len(inputs) * len(outputs) > JOINT_ATOM_CAP:
            raise ValueError("joint alphabet exceeds enumeration cap")
    return FiniteChannel(tuple(inputs), tuple(outputs), tuple(map(tuple, kernel)))


def _product_many(dists: Sequence[DiscreteDistribution]) -> DiscreteDistribution:
    joint = DiscreteDistribution(tuple((a,) for a in dists[0].support), dists[0].mass)
    for d in dists[1:]:
        flat = product(joint, d)
        atoms = tuple(a + (b,) for (a, b) in flat.support)
        joint = DiscreteDistribution(atoms, flat.mass)
    return joint


def check_tensorized_chi(
    channels: Sequence[FiniteChannel],
    p0_list: Sequence[DiscreteDistribution],
    p1_list: Sequence[DiscreteDistribution],
) -> ContractionReport:
    """Brute-force check of the tensorized chi-squared contraction.

    lhs = chi^2 between the joint output marginals of the product channel;
    rhs = prod_i (1 + 4 eps^2 TV(P0_i, P1_i)^2) - 1 with eps^2 the worst
    per-coordinate measured chi-squared privacy level.
    """
    n = len(channels)
    if not (len(p0_list) == len(p1_list) == n and n >= 1):
        raise ValueError("coordinate lists must have equal positive length")
    eps2 = max(verify_chi2(ch) for ch in channels)
    joint_channel = product_channel(channels)
    m0 = push_forward(_product_many(p0_list), joint_channel)
    m1 = push_forward(_product_many(p1_list), joint_channel)
    lhs = chi_square(m0, m1)
    tvs = [tv_distance(a, b) for a, b in zip(p0_list, p1_list)]
    if is_inf(eps2):
        rhs = INF if any(t > 0.0 for t in tvs) else 0.0
    else:
        rhs = float(np.prod([1.0 + 4.0 * eps2 * t**2 for t in tvs]) - 1.0)
    holds = lhs <= rhs + SLACK_TOL
    slack = rhs - lhs if not (is_inf(rhs) or is_inf(lhs)) else INF
    return ContractionReport("tensorized-chi2", lhs, rhs, eps2, holds, slack)


@dataclass(frozen=True)
class KlTensorBound:
    """Product-channel KL budget: the per-coordinate sum and its relaxation."""

    tight: float
    loose: float


def kl_tensor_bound(n: int, epsilon2: float, tv_list: Sequence[float]) -> KlTensorBound:
    """KL(M0^n || M1^n) budget under per-coordinate chi-squared privacy eps^2.

    tight = sum_i log(1 + 4 eps^2 tv_i^2); loose = 4 eps^2 sum_i tv_i^2.
    """
    tvs = np.asarray(tv_list, dtype=float)
    if tvs.size != n:
        raise ValueError("tv_list length must equal n")
    if np.any((tvs < 0.0) | (tvs > 1.0)):
        raise ValueError("TV entries must lie in [0, 1]")
    if epsilon2 < 0.0:
        raise ValueError("epsilon2 must be nonnegative")
    tight = float(np.sum(np.log1p(4.0 * epsilon2 * tvs**2)))
    loose = float(4.0 * epsilon2 * np.sum(tvs**2))
    return KlTensorBound(tight, loose)


def dobrushin_coefficient(channel: FiniteChannel) -> float:
    """Max pairwise TV between channel rows (the strong data-processing rate)."""
    rows = channel.row_distributions()
    worst = 0.0
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            worst = max(worst, tv_distance(rows[i], rows[j]))
    return worst


# ---- the master packing bound ----------------------------------------------


def _linf_ratio(num: DiscreteDistribution, den: DiscreteDistribution) -> float:
    """sup_x num(x)/den(x) over the union support; INF off den's support."""
    _, nv, dv = aligned(num, den)
    if np.any((dv == 0.0) & (nv > 0.0)):
        return INF
    active = dv > 0.0
    return float(np.max(nv[active] / dv[active])) if np.any(active) else 0.0


def big_tensor_bound(
    fam: PackingFamily,
    n: int,
    mode: str,
    privacy: float,
    reference: DiscreteDistribution | None = None,
    pstar: DiscreteDistribution | None = None,
) -> float:
    """Information budget KL(M0^n || mean_v M_v^n) for a packing family.

    mode "dp" (privacy = eps):
        n (e^{eps/2} - e^{-eps/2})^2 / 4 * Cinf * min(e^eps, max_v ||dP/dP_v||_inf)
    mode "chi2" (privacy = eps^2):
        n eps^2 * C2 * max_v ||dP_v/dP||_inf
    ``reference`` is the sampling distribution P (defaults to the base);
    ``pstar`` is the complexity reference (defaults to the base).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if privacy < 0.0:
        raise ValueError("privacy level must be nonnegative")
    ref = reference if reference is not None else fam.base
    if mode == "dp":
        eps = privacy
        ratios = [_linf_ratio(ref, m) for m in fam.members]
        ratio = min(math.exp(eps), max(ratios))
        c = complexity_cinf(fam, pstar)
        return n * (math.exp(eps / 2.0) - math.exp(-eps / 2.0)) ** 2 / 4.0 * c * ratio
    if mode == "chi2":
        eps2 = privacy
        ratios = [_linf_ratio(m, ref) for m in fam.members]
        worst = max(ratios)
        if is_inf(worst):
            return INF
        c = complexity_c2(fam, pstar)
        return n * eps2 * c * worst
    raise ValueError("mode must be 'dp' or 'chi2'")


# ---- concrete packings -------------------------------------------------------


def _cube_atoms(d: int) -> list[tuple]:
    atoms = []
    for idx in range(1 << d):
        atoms.append(tuple(1 if (idx >> j) & 1 else -1 for j in range(d)))
    return atoms


def hypercube_mean_packing(d: int, delta: float) -> PackingFamily:
    """Mean-separated packing on {-1,1}^d: p_v(x) = 2^{-d}(1 + delta v.x).

    Base is uniform; members are indexed by v in {+-e_j}, so E_{P_v}[X]
    = delta * v and the chi-squared complexity at the base is delta^2/d.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    atoms = _cube_atoms(d)
    base = DiscreteDistribution(tuple(atoms), (1.0 / len(atoms),) * len(atoms))
    members = []
    for j in range(d):
        for sign in (1.0, -1.0):
            mass = [(1.0 + delta * sign * a[j]) / len(atoms) for a in atoms]
            members.append(DiscreteDistribution(tuple(atoms), tuple(mass)))
    return PackingFamily(base, tuple(members))


def sparse_logistic_packing(d: int, delta: float, theta0: float) -> PackingFamily:
    """Logistic packing: y | x follows intercept theta0 plus delta v.x tilts.

    Atoms are ((x_1..x_d), y) with x uniform on the cube and
    P(y | x) = 1/(1 + exp(-y (theta0 + theta_v . x))), theta_v = delta v,
    v ranging over {+-e_j}.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    xs = _cube_atoms(d)
    px = 1.0 / len(xs)

    def joint(vj: int | None, sign: float) -> DiscreteDistribution:
        atoms = []
        mass = []
        for x in xs:
            tilt = theta0 + (sign * delta * x[vj] if vj is not None else 0.0)
            for y in (-1, 1):
                atoms.append((x, y))
                mass.append(px / (1.0 + math.exp(-y * tilt)))
        return DiscreteDistribution(tuple(atoms), tuple(mass))

    base = joint(None, 0.0)
    members = [joint(j, s) for j in range(d) for s in (1.0, -1.0)]
    return PackingFamily(base, tuple(members))


def logreg_complexity_bound(theta0: float, delta: float, d: int) -> float:
    """Closed-form cap on the logistic packing's chi-squared complexity.

    2 * max((alpha - beta)^2 / d, (alpha + beta)^2) with
    alpha = e^t0/(e^t0+1) - e^t0/(e^t0+e^-delta),
    beta  = e^t0/(e^t0+1) - e^t0/(e^t0+e^delta),
    evaluated at P* uniform on the joint (x, y) space.
    """
    e0 = math.exp(theta0)
    alpha = e0 / (e0 + 1.0) - e0 / (e0 + math.exp(-delta))
    beta = e0 / (e0 + 1.0) - e0 / (e0 + math.exp(delta))
    return 2.0 * max((alpha - beta) ** 2 / d, (alpha + beta) ** 2)


def uniform_joint_reference(fam: PackingFamily) -> DiscreteDistribution:
    """Uniform distribution on the packing's union support."""
    atoms = fam.union_support()
    return DiscreteDistribution(tuple(atoms), (1.0 / len(atoms),) * len(atoms))


# ---- randomized sweeps --------------------------------------------------------


def random_channel(
    rng: np.random.Generator, n_inputs: int, n_outputs: int
) -> FiniteChannel:
    """Dirichlet-row channel on integer alphabets (strictly positive rows)."""
    kernel = rng.dirichlet(np.ones(n_outputs), size=n_inputs)
    return FiniteChannel(
        tuple(range(n_inputs)), tuple(range(n_outputs)), tuple(map(tuple, kernel))
    )


def random_distribution_pair(rng: np.random.Generator, n_atoms: int):
    p = rng.dirichlet(np.ones(n_atoms))
    q = rng.dirichlet(np.ones(n_atoms))
    atoms = tuple(range(n_atoms))
    return (
        DiscreteDistribution(atoms, tuple(p)),
        DiscreteDistribution(atoms, tuple(q)),
    )


def fk_contraction_sweep(
    instances: int,
    k_values: Sequence[float] = (1.5, 2.0, 3.0),
    max_inputs: int = 4,
    max_outputs: int = 4,
    seed: int = 0,
) -> list[ContractionReport]:
    """Randomized fk-contraction instances; every report should hold."""
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(instances):
        n_in = int(rng.integers(2, max_inputs + 1))
        n_out = int(rng.integers(2, max_outputs + 1))
        ch = random_channel(rng, n_in, n_out)
        p0, p1 = random_distribution_pair(rng, n_in)
        k = k_values[i % len(k_values)]
        reports.append(check_fk_contraction(ch, p0, p1, k))
    return reports


def tensorization_sweep(
    instances: int, coords: Sequence[int] = (2, 3), seed: int = 0
) -> list[ContractionReport]:
    """Randomized tensorized chi-squared instances on binary alphabets."""
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(instances):
        n = coords[i % len(coords)]
        channels = [random_channel(rng, 2, 2) for _ in range(n)]
        pairs = [random_distribution_pair(rng, 2) for _ in range(n)]
        reports.append(
            check_tensorized_chi(channels, [a for a, _ in pairs], [b for _, b in pairs])
        )
    return reports
