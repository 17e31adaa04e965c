"""Finite privatization channels and the two workhorse mechanisms.

A channel is a row-stochastic kernel from an input alphabet to an output
alphabet.  Verifiers measure the channel's actual privacy level under each
definition (sup log-ratio, Renyi, |t-1|^k f-divergence, chi-squared) by
exhaustive row comparison; they return measured levels, never verdicts,
so callers decide what "private enough" means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .divergences import (
    INF,
    DiscreteDistribution,
    chi_square,
    fk_divergence,
    is_inf,
    renyi,
)

ROW_TOL = 1e-9


@dataclass(frozen=True)
class FiniteChannel:
    """Row-stochastic kernel: kernel[i][j] = P(output j | input i)."""

    inputs: tuple
    outputs: tuple
    kernel: tuple

    def __post_init__(self) -> None:
        inputs = tuple(self.inputs)
        outputs = tuple(self.outputs)
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim != 2 or k.shape != (len(inputs), len(outputs)):
            raise ValueError("kernel shape must be (len(inputs), len(outputs))")
        if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
            raise ValueError("channel alphabets must have unique atoms")
        if np.any(k < 0.0):
            raise ValueError("negative kernel entry")
        sums = k.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_TOL):
            bad = float(np.max(np.abs(sums - 1.0)))
            raise ValueError(f"kernel row off stochastic by {bad:.3g}")
        k = k / sums[:, None]
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "kernel", tuple(tuple(row) for row in k))

    def as_matrix(self) -> np.ndarray:
        return np.asarray(self.kernel, dtype=float)

    def row(self, x) -> DiscreteDistribution:
        """Output distribution given input atom ``x``."""
        i = self.inputs.index(x)
        return DiscreteDistribution(self.outputs, self.kernel[i])

    def row_distributions(self) -> list[DiscreteDistribution]:
        return [DiscreteDistribution(self.outputs, r) for r in self.kernel]

    def to_json_dict(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "kernel": [list(r) for r in self.kernel],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FiniteChannel":
        freeze = lambda a: tuple(a) if isinstance(a, list) else a  # noqa: E731
        return cls(
            tuple(freeze(a) for a in obj["inputs"]),
            tuple(freeze(a) for a in obj["outputs"]),
            tuple(tuple(r) for r in obj["kernel"]),
        )


# ---- privacy verifiers --------------------------------------------------


def verify_ldp(channel: FiniteChannel) -> float:
    """Measured pure-DP level: max over outputs/input pairs of |log ratio|.

    INF when one row places mass where another does not (ratio diverges).
    A constant channel measures 0.
    """
    k = channel.as_matrix()
    worst = 0.0
    for i in range(k.shape[0]):
        for j in range(i + 1, k.shape[0]):
            a, b = k[i], k[j]
            both = (a > 0.0) & (b > 0.0)
            if np.any((a > 0.0) != (b > 0.0)):
                return INF
            if np.any(both):
                worst = max(worst, float(np.max(np.abs(np.log(a[both] / b[both])))))
    return worst


def _pairwise_max(channel: FiniteChannel, div) -> float:
    rows = channel.row_distributions()
    worst = 0.0
    for i, ri in enumerate(rows):
        for j, rj in enumerate(rows):
            if i == j:
                continue
            val = div(ri, rj)
            if is_inf(val):
                return INF
            worst = max(worst, val)
    return worst


def verify_renyi(channel: FiniteChannel, alpha: float) -> float:
    """Measured Renyi-privacy level: max pairwise Renyi divergence of rows."""
    return _pairwise_max(channel, lambda a, b: renyi(a, b, alpha))


def verify_chi2(channel: FiniteChannel) -> float:
    """Measured chi-squared privacy level (this is epsilon^2, not epsilon)."""
    return _pairwise_max(channel, chi_square)


def verify_fk(channel: FiniteChannel, k: float) -> float:
    """Measured |t-1|^k-divergence privacy epsilon: (max pairwise D_fk)^(1/k)."""
    worst = _pairwise_max(channel, lambda a, b: fk_divergence(a, b, k))
    if is_inf(worst):
        return INF
    return float(worst ** (1.0 / k))


# ---- randomized response -------------------------------------------------


@dataclass(frozen=True)
class RandomizedResponseBit:
    """Binary randomized response: keep the bit w.p. e^eps/(e^eps + 1).

    ``debiased`` rescales the released bit to an unbiased estimate of the
    input, (e^eps+1)/(e^eps-1) * (b - 1/(e^eps+1)).
    """

    epsilon: float
    debiased: bool = True

    def __post_init__(self) -> None:
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be finite and positive")

    @property
    def keep_prob(self) -> float:
        return 1.0 / (1.0 + math.exp(-self.epsilon))

    @property
    def debias_scale(self) -> float:
        e = math.exp(self.epsilon)
        return (e + 1.0) / (e - 1.0)

    @property
    def conditional_variance(self) -> float:
        """Var of the debiased output given the input, e^eps/(e^eps - 1)^2."""
        e = math.exp(self.epsilon)
        return e / (e - 1.0) ** 2

    def channel(self) -> FiniteChannel:
        a = self.keep_prob
        return FiniteChannel((0, 1), (0, 1), ((a, 1.0 - a), (1.0 - a, a)))


def rr_privatize(bit, mech: RandomizedResponseBit, rng: np.random.Generator) -> float:
    """Release one bit through randomized response."""
    v = int(bit)
    if v not in (0, 1):
        raise ValueError("randomized response input must be a bit")
    b = v if rng.random() < mech.keep_prob else 1 - v
    if not mech.debiased:
        return float(b)
    return mech.debias_scale * (b - (1.0 - mech.keep_prob))


def rr_privatize_many(
    bits: np.ndarray, mech: RandomizedResponseBit, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized twin of :func:`rr_privatize` for long bit arrays."""
    v = np.asarray(bits)
    if not np.all((v == 0) | (v == 1)):
        raise ValueError("randomized response input must be bits")
    keep = rng.random(v.shape) < mech.keep_prob
    b = np.where(keep, v, 1 - v).astype(float)
    if not mech.debiased:
        return b
    return mech.debias_scale * (b - (1.0 - mech.keep_prob))


# ---- vector Laplace -------------------------------------------------------


@dataclass(frozen=True)
class LaplaceVectorMechanism:
    """Per-coordinate Laplace noise for vectors in the sup-norm ball.

    Inputs live in {x : ||x||_inf <= bound}; each coordinate gets
    Laplace(2 * bound * dim / epsilon) noise, giving sup log-density ratio
    exactly epsilon between any two admissible inputs.  epsilon = +inf is
    allowed and releases the input unchanged.
    """

    epsilon: float
    bound: float
    dim: int

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if not (self.bound > 0.0 and math.isfinite(self.bound)):
            raise ValueError("bound must be finite and positive")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")

    @property
    def scale(self) -> float:
        if math.isinf(self.epsilon):
            return 0.0
        return 2.0 * self.bound * self.dim / self.epsilon

    @property
    def noise_variance(self) -> float:
        """Per-coordinate variance 2 * scale^2."""
        return 2.0 * self.scale**2


def laplace_privatize(
    x: np.ndarray, mech: LaplaceVectorMechanism, rng: np.random.Generator
) -> np.ndarray:
    """Release a vector (or a stack of row vectors) through Laplace noise."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape[-1] != mech.dim:
        raise ValueError(f"expected last dimension {mech.dim}, got {arr.shape[-1]}")
    if np.max(np.abs(arr)) > mech.bound + 1e-12:
        raise ValueError("input outside the mechanism's sup-norm ball")
    if mech.scale == 0.0:
        return arr.copy()
    return arr + rng.laplace(0.0, mech.scale, size=arr.shape)


def analytic_log_ratio_bound(mech) -> float:
    """Worst-case log density ratio over admissible input pairs, in closed form.

    RandomizedResponseBit: log(keep/flip) = epsilon exactly.
    LaplaceVectorMechanism: L1 diameter (2 * bound * dim) over the noise
    scale, which is epsilon exactly by construction.
    """
    if isinstance(mech, RandomizedResponseBit):
        return math.log(mech.keep_prob / (1.0 - mech.keep_prob))
    if isinstance(mech, LaplaceVectorMechanism):
        if math.isinf(mech.epsilon):
            return INF
        return 2.0 * mech.bound * mech.dim / mech.scale
    raise TypeError(f"no analytic audit for {type(mech).__name__}")


# ---- composition -----------------------------------------------------------


def push_forward(p: DiscreteDistribution, channel: FiniteChannel) -> DiscreteDistribution:
    """Output marginal of ``channel`` when the input is drawn from ``p``.

    Every atom of ``p`` must be a channel input.
    """
    index = {a: i for i, a in enumerate(channel.inputs)}
    k = channel.as_matrix()
    out = np.zeros(len(channel.outputs))
    for a, m in zip(p.support, p.mass):
        if a not in index:
            raise ValueError(f"atom {a!r} is not a channel input")
        out += m * k[index[a]]
    return DiscreteDistribution(channel.outputs, tuple(out))
