"""Loss geometry, moduli of continuity, and minimax bounds under privacy.

The central object is the loss-induced distance
    d_L(P0, P1) = inf_theta { L(theta, P0) + L(theta, P1) }
and its modulus of continuity over a TV ball.  Everything downstream
(two-point bounds, achievability, super-efficiency, the packing bounds)
is a closed-form function of those two plus sample size and privacy level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .divergences import INF, DiscreteDistribution, mixture, tv_distance
from .information import ONE_PARAM_RISK_CONST

GOLDEN_TOL = 1e-10
CURVE_TOL = 1e-12

# Second pinned universal constant (same reasoning as ONE_PARAM_RISK_CONST:
# the statements carry unspecified constants; these are fixed once here so
# downstream tables are reproducible, and tests assert scaling only).
LOGISTIC_PRED_CONST = 1.0 / 8.0


def _as_vector(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _mean_functional(p: DiscreteDistribution):
    """Default parameter: expectation of (numeric or tuple) atoms."""
    atoms = np.asarray(
        [a if isinstance(a, (tuple, list)) else (a,) for a in p.support], dtype=float
    )
    out = p.as_array() @ atoms
    return float(out[0]) if out.size == 1 else out


def _golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Minimum value of f on [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return min(fc, fd)


def _sigmoid(t: float) -> float:
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@dataclass(frozen=True)
class LossSpec:
    """A loss L(theta, P) together with its induced distance d_L.

    kind:
      * "squared":            L = 0.5 ||theta - theta(P)||^2, d_L closed form.
      * "truncated-squared":  Phi(t) = min(t^2, 1) of the distance.
      * "prediction-logistic": absolute prediction gap of a one-parameter
        logistic model; d_L = |sigma(-theta0) - sigma(-theta1)|.
      * "phi":                user Phi (nondecreasing, Phi(0)=0) of the
        distance; d_L via the segment infimum, golden-section at 1e-10.
    ``theta`` extracts the parameter from a distribution (defaults to the
    atom expectation).
    """

    kind: str
    phi: Callable[[float], float] | None = None
    theta: Callable[[DiscreteDistribution], object] = field(default=_mean_functional)

    def __post_init__(self) -> None:
        kinds = ("squared", "truncated-squared", "prediction-logistic", "phi")
        if self.kind not in kinds:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "phi" and self.phi is None:
            raise ValueError("kind 'phi' needs an explicit phi")

    # -- scalar gauge applied to a parameter gap --------------------------

    def _gauge(self, t: float) -> float:
        if self.kind == "squared":
            return 0.5 * t * t
        if self.kind == "truncated-squared":
            return min(t * t, 1.0)
        if self.kind == "phi":
            return float(self.phi(t))
        raise ValueError("prediction-logistic has no distance gauge")

    def loss(self, theta_value, p: DiscreteDistribution) -> float:
        """Evaluate L(theta, P); zero at theta = theta(P)."""
        if self.kind == "prediction-logistic":
            t0 = float(np.atleast_1d(self.theta(p))[0])
            t = float(np.atleast_1d(theta_value)[0])
            return abs(_sigmoid(-t) - _sigmoid(-t0))
        gap = float(np.linalg.norm(_as_vector(theta_value) - _as_vector(self.theta(p))))
        return self._gauge(gap)

    def dist(self, p0: DiscreteDistribution, p1: DiscreteDistribution) -> float:
        """Induced distance d_L(P0, P1) = inf_theta L(theta,P0) + L(theta,P1)."""
        if self.kind == "prediction-logistic":
            a = float(np.atleast_1d(self.theta(p0))[0])
            b = float(np.atleast_1d(self.theta(p1))[0])
            return abs(_sigmoid(-a) - _sigmoid(-b))
        gap = float(np.linalg.norm(_as_vector(self.theta(p0)) - _as_vector(self.theta(p1))))
        if self.kind == "squared":
            return 0.25 * gap * gap
        if gap == 0.0:
            return 0.0
        return _golden_section(
            lambda lam: self._gauge(lam * gap) + self._gauge((1.0 - lam) * gap),
            0.0,
            1.0,
            GOLDEN_TOL,
        )


def lossdist(loss: LossSpec, p0: DiscreteDistribution, p1: DiscreteDistribution) -> float:
    """Module-level alias for ``loss.dist``."""
    return loss.dist(p0, p1)


# ---- modulus of continuity ------------------------------------------------


@dataclass(frozen=True)
class ModulusCurve:
    """Tabulated delta -> omega(delta); deltas strictly increasing, values
    nondecreasing (within 1e-12, asserted on construction)."""

    deltas: tuple
    values: tuple

    def __post_init__(self) -> None:
        d = np.asarray(self.deltas, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.size != v.size or d.size < 2:
            raise ValueError("curve needs matching deltas/values, at least two points")
        if np.any(np.diff(d) <= 0.0):
            raise ValueError("deltas must be strictly increasing")
        if np.any(d <= 0.0):
            raise ValueError("deltas must be positive")
        if np.any(np.diff(v) < -CURVE_TOL):
            raise ValueError("modulus values must be nondecreasing")
        object.__setattr__(self, "deltas", tuple(float(x) for x in d))
        object.__setattr__(self, "values", tuple(float(x) for x in v))


def modulus_search(
    loss: LossSpec,
    p0: DiscreteDistribution,
    candidates: Sequence[DiscreteDistribution],
    delta: float,
) -> float:
    """omega(delta; P0) over a candidate set: max d_L(P, P0) s.t. TV <= delta."""
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    best = 0.0
    for p in candidates:
        if tv_distance(p, p0) <= delta + 1e-12:
            best = max(best, loss.dist(p0, p))
    return best


def modulus_curve(
    loss: LossSpec,
    p0: DiscreteDistribution,
    candidates: Sequence[DiscreteDistribution],
    deltas: Sequence[float],
) -> ModulusCurve:
    vals = [modulus_search(loss, p0, candidates, d) for d in deltas]
    return ModulusCurve(tuple(deltas), tuple(vals))


def family_modulus(
    loss: LossSpec, p0: DiscreteDistribution, candidates: Sequence[DiscreteDistribution]
) -> Callable[[float], float]:
    """Close over a candidate family to get a callable omega(delta)."""
    return lambda delta: modulus_search(loss, p0, candidates, delta)


def mean_mixture_family(
    p0: DiscreteDistribution, delta: float
) -> list[DiscreteDistribution]:
    """The extremal mean-shift contaminations (1-delta) P0 + delta point(x).

    One member per support atom; each sits at TV distance at most delta
    from P0, and their mean shifts bracket the mean-estimation modulus.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    out = []
    for a in p0.support:
        out.append(mixture([p0, DiscreteDistribution.point_mass(a)], [1.0 - delta, delta]))
    return out


def bernoulli_grid_family(step: float = 1e-3) -> list[DiscreteDistribution]:
    """Bernoulli(p) for p on a regular grid over [0, 1]."""
    ps = np.arange(0.0, 1.0 + 0.5 * step, step)
    return [DiscreteDistribution.bernoulli(min(1.0, float(p))) for p in ps]


# ---- two-point machinery ----------------------------------------------------


def delta_epsilon(epsilon: float) -> float:
    """Bias edge of the eps-private bit release: e^eps/(e^eps+1) - 1/2.

    At least eps/5 for eps <= 7/4.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    return 1.0 / (1.0 + math.exp(-epsilon)) - 0.5


@dataclass(frozen=True)
class Theorem1Bound:
    """Private two-point lower bound: exact radius and the simplified one."""

    exact: float
    simplified: float
    radius_exact: float
    radius_simplified: float


def theorem1_lower(
    modulus: Callable[[float], float], n: int, epsilon2: float
) -> Theorem1Bound:
    """Local minimax risk >= (1/8) omega(radius) for the two TV radii.

    exact radius: sqrt(e^{1/(2n)} - 1) / (2 eps);
    simplified:   1 / sqrt(8 n eps^2).
    """
    if n < 1 or epsilon2 <= 0.0:
        raise ValueError("need n >= 1 and epsilon2 > 0")
    eps = math.sqrt(epsilon2)
    r_exact = math.sqrt(math.expm1(1.0 / (2.0 * n))) / (2.0 * eps)
    r_simpl = 1.0 / math.sqrt(8.0 * n * epsilon2)
    return Theorem1Bound(
        exact=modulus(r_exact) / 8.0,
        simplified=modulus(r_simpl) / 8.0,
        radius_exact=r_exact,
        radius_simplified=r_simpl,
    )


@dataclass(frozen=True)
class AchievableBound:
    value: float
    delta_eps: float
    radius: float


def achievable_upper(
    modulus: Callable[[float], float],
    n: int,
    epsilon: float,
    gamma: float,
    beta: float,
    alpha: float,
) -> AchievableBound:
    """Matching upper bound for losses with reverse-triangle constant gamma
    and polynomial modulus growth (beta, alpha):

        gamma * beta^alpha * (alpha/2)^{alpha/2} e^{-alpha/2}
              * omega( sqrt(2) / (delta_eps sqrt(n)) ).
    """
    if n < 1 or epsilon <= 0.0 or alpha <= 0.0 or beta <= 0.0 or gamma <= 0.0:
        raise ValueError("need positive n, epsilon, alpha, beta, gamma")
    de = delta_epsilon(epsilon)
    radius = math.sqrt(2.0) / (de * math.sqrt(n))
    const = gamma * beta**alpha * math.exp((alpha / 2.0) * (math.log(alpha / 2.0) - 1.0))
    return AchievableBound(const * modulus(radius), de, radius)


@dataclass(frozen=True)
class GrowthFit:
    """Smallest polynomial growth certificate fitted to a modulus curve.

    alpha_hat is the largest log-log slope over grid pairs; beta_hat the
    smallest multiplier making (beta c)^alpha cover every ratio at that
    alpha. ``holds`` reports whether the certificate covers all pairs."""

    alpha_hat: float
    beta_hat: float
    holds: bool


def growth_check(curve: ModulusCurve) -> GrowthFit:
    d = np.asarray(curve.deltas)
    v = np.asarray(curve.values)
    slopes = []
    for i in range(d.size):
        for j in range(i + 1, d.size):
            if v[j] <= 0.0:
                continue
            if v[i] == 0.0:
                return GrowthFit(INF, INF, False)
            ratio = v[j] / v[i]
            if ratio > 1.0:
                slopes.append(math.log(ratio) / math.log(d[j] / d[i]))
    alpha = max(slopes) if slopes else 0.0
    beta = 1.0
    if alpha > 0.0:
        for i in range(d.size):
            for j in range(i + 1, d.size):
                if v[i] <= 0.0 or v[j] <= 0.0:
                    continue
                c = d[j] / d[i]
                beta = max(beta, (v[j] / v[i]) ** (1.0 / alpha) / c)
    holds = True
    for i in range(d.size):
        for j in range(i + 1, d.size):
            c = d[j] / d[i]
            lhs = v[j]
            rhs = (beta * c) ** alpha * v[i] if alpha > 0.0 else v[i]
            if lhs > rhs * (1.0 + 1e-9) + 1e-15:
                holds = False
    return GrowthFit(alpha, beta, holds)


# ---- named closed-form bounds ----------------------------------------------


def hinge(x: float) -> float:
    return max(x, 0.0)


def bernoulli_lower(n: int, epsilon2: float) -> float:
    """Parameter-free private Bernoulli floor C / (n eps^2), C pinned."""
    if n < 1 or epsilon2 <= 0.0:
        raise ValueError("need n >= 1 and epsilon2 > 0")
    return ONE_PARAM_RISK_CONST / (n * epsilon2)


def logistic_tv(theta0: float, theta1: float) -> float:
    """TV between the one-parameter logistic joints at theta0 and theta1:
    |e^t1 - e^t0| / ((1 + e^t0)(1 + e^t1))."""
    e0, e1 = math.exp(theta0), math.exp(theta1)
    return abs(e1 - e0) / ((1.0 + e0) * (1.0 + e1))


def logistic_joint(theta: float) -> DiscreteDistribution:
    """Joint law of (x, y) uniform-x logistic: atoms ((x, y)), x,y in {-1,1}."""
    atoms = []
    mass = []
    for x in (-1, 1):
        for y in (-1, 1):
            atoms.append((x, y))
            mass.append(0.5 * _sigmoid(y * theta * x))
    return DiscreteDistribution(tuple(atoms), tuple(mass))


def logistic_theta(p: DiscreteDistribution) -> float:
    """Invert :func:`logistic_joint`: theta from the mass at ((1, 1))."""
    p11 = p.prob_of((1, 1))
    if not 0.0 < 2.0 * p11 < 1.0:
        raise ValueError("mass at ((1,1)) not in the open logistic range")
    q = 2.0 * p11
    return math.log(q / (1.0 - q))


def prediction_logistic_loss() -> LossSpec:
    """LossSpec for the logistic prediction gap, wired to logistic_joint."""
    return LossSpec(kind="prediction-logistic", theta=logistic_theta)


@dataclass(frozen=True)
class LogisticPredBound:
    value: float
    regime: str
    modulus_delta: float
    nonprivate: float


def logistic_pred_lower(theta0: float, n: int, epsilon2: float) -> LogisticPredBound:
    """Private prediction-risk floor c * min(1/sqrt(n eps^2), 1/(1+e^|t0|)).

    Reports which modulus regime the TV radius 1/sqrt(8 n eps^2) falls in
    (linear when below e^{-|t0|}, plateau beyond) and the non-private rate
    sqrt(2/pi) / sqrt((2 + e^t0 + e^-t0) n) for contrast: the private rate
    loses the e^{-|t0|} scaling entirely.
    """
    if n < 1 or epsilon2 <= 0.0:
        raise ValueError("need n >= 1 and epsilon2 > 0")
    t = abs(theta0)
    value = LOGISTIC_PRED_CONST * min(
        1.0 / math.sqrt(n * epsilon2), 1.0 / (1.0 + math.exp(t))
    )
    delta = 1.0 / math.sqrt(8.0 * n * epsilon2)
    regime = "linear" if delta < math.exp(-t) else "plateau"
    nonpriv = math.sqrt(2.0 / math.pi) / math.sqrt(
        (2.0 + math.exp(theta0) + math.exp(-theta0)) * n
    )
    return LogisticPredBound(value, regime, delta, nonpriv)


def constrained_risk(delta: float, gap: float, affinity: float) -> float:
    """Risk transfer: doing better than delta at P0 forces at P1 at least
    ( sqrt(gap) - sqrt(affinity * delta) )_+^2, gap = d_L/2 split evaluated
    by the caller, affinity = 1 + chi^2(P1 || P0)."""
    if delta < 0.0 or gap < 0.0 or affinity < 1.0:
        raise ValueError("need delta, gap >= 0 and affinity >= 1")
    return hinge(math.sqrt(gap) - math.sqrt(affinity * delta)) ** 2


def superefficiency_floor(
    modulus: Callable[[float], float],
    n: int,
    epsilon2: float,
    eta: float,
    t: float,
    gamma: float,
) -> float:
    """Price of beating the modulus rate by eta at one point:

    gamma^{-1} (1/2 - eta^{(1-t)/2})_+^2 * omega( (1/4) sqrt(t log(1/eta) / (n eps^2)) )
    for any t in [0, 1]; gamma is the loss's reverse-triangle constant.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if n < 1 or epsilon2 <= 0.0 or gamma <= 0.0:
        raise ValueError("need n >= 1, epsilon2 > 0, gamma > 0")
    radius = 0.25 * math.sqrt(t * math.log(1.0 / eta) / (n * epsilon2))
    return hinge(0.5 - eta ** ((1.0 - t) / 2.0)) ** 2 * modulus(radius) / gamma


def le_cam_private(separation: float, tv_marginals: float) -> float:
    """Two-point (possibly mixture-vs-mixture) risk floor:
    0.5 * separation * (1 - TV between the private output marginals)."""
    if separation < 0.0 or not 0.0 <= tv_marginals <= 1.0:
        raise ValueError("need separation >= 0 and tv in [0, 1]")
    return 0.5 * separation * (1.0 - tv_marginals)


def highdim_mean_lower(
    d: int,
    n: int,
    epsilon2: float,
    phi: Callable,
    psi_cols: Sequence,
) -> float:
    """Hypercube-packing floor for estimating a linear map psi of the mean:

    0.5 * min_j Phi( (sqrt(d/(4 n eps^2)) ∧ 1) * psi(e_j) ).
    ``psi_cols`` are the d columns psi(e_j) (scalars or vectors).
    """
    if d < 1 or n < 1 or epsilon2 <= 0.0:
        raise ValueError("need d, n >= 1 and epsilon2 > 0")
    if len(psi_cols) != d:
        raise ValueError("psi_cols must have one column per dimension")
    scale = min(math.sqrt(d / (4.0 * n * epsilon2)), 1.0)
    vals = []
    for col in psi_cols:
        c = _as_vector(col)
        vals.append(float(phi(scale * (c[0] if c.size == 1 else c))))
    return 0.5 * min(vals)


@dataclass(frozen=True)
class SparseLogisticBound:
    value: float
    delta_n: float
    branches: tuple


def sparse_logistic_lower(
    theta0: float,
    d: int,
    n: int,
    epsilon2: float,
    phi: Callable,
    psi_cols: Sequence,
) -> SparseLogisticBound:
    """Sparse logistic packing floor 0.5 * min_j Phi(delta_n psi(e_j)) with

    delta_n^2 = min( e^{2 t0} d / (64 n eps^2),
                     e^{t0} / (8 (1 - e^{-t0}) sqrt(n eps^2)),
                     1 ).
    theta0 = 0 sends the middle branch to +inf (it drops out of the min);
    theta0 must be nonnegative.
    """
    if theta0 < 0.0:
        raise ValueError("theta0 must be nonnegative")
    if d < 1 or n < 1 or epsilon2 <= 0.0:
        raise ValueError("need d, n >= 1 and epsilon2 > 0")
    if len(psi_cols) != d:
        raise ValueError("psi_cols must have one column per dimension")
    b1 = math.exp(2.0 * theta0) * d / (64.0 * n * epsilon2)
    denom = 1.0 - math.exp(-theta0)
    b2 = INF if denom == 0.0 else math.exp(theta0) / (8.0 * denom * math.sqrt(n * epsilon2))
    delta_sq = min(b1, b2, 1.0)
    delta_n = math.sqrt(delta_sq)
    vals = []
    for col in psi_cols:
        c = _as_vector(col)
        vals.append(float(phi(delta_n * (c[0] if c.size == 1 else c))))
    return SparseLogisticBound(0.5 * min(vals), delta_n, (b1, b2, 1.0))


def mis_expfam_lower(
    grad_phi,
    hess_a: np.ndarray,
    mean0,
    mean_candidates: Sequence,
    n: int,
    epsilon2: float,
    phi: Callable[[float], float],
) -> float:
    """Mis-specified exponential-family floor:

    (1/4) max over candidate means mu of
        Phi( grad_phi . (hess_a)^{-1} (mean0 - mu) / (2 sqrt(8 n eps^2)) ).
    """
    if n < 1 or epsilon2 <= 0.0:
        raise ValueError("need n >= 1 and epsilon2 > 0")
    h = np.atleast_2d(np.asarray(hess_a, dtype=float))
    g = np.linalg.solve(h, _as_vector(grad_phi))
    m0 = _as_vector(mean0)
    denom = 2.0 * math.sqrt(8.0 * n * epsilon2)
    best = 0.0
    for mu in mean_candidates:
        arg = abs(float(g @ (m0 - _as_vector(mu)))) / denom
        best = max(best, float(phi(arg)))
    return 0.25 * best
