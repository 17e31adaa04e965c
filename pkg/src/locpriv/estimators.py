"""Locally private estimators whose risk tracks the L1-information.

Contents: the two-stage threshold estimator for one-parameter exponential
families, the one-step corrected estimators for (possibly mis-specified)
exponential families and conditional logistic GLMs, noisy mirror-descent
SGD and the non-private MLE used as experiment baselines, the debiased
randomized-response Bernoulli estimator, and the private two-point test.

All randomness flows through an explicit numpy Generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .channels import LaplaceVectorMechanism, RandomizedResponseBit, laplace_privatize, rr_privatize_many
from .divergences import INF, DiscreteDistribution, aligned

BRACKET_CAP = 1e3
BISECT_TOL = 1e-10
NEWTON_TOL = 1e-10
NEWTON_CAP = 200
MLE_TOL = 1e-8
MLE_CAP = 100
THETA_CAP = 50.0
# Sup-norm radius the clamped stage-1 pilot is shrunk into.  The one-step
# correction is insensitive to pilot *bias* at first order but very sensitive
# to pilot *curvature*: once the pilot saturates the link, the Hessian it
# hands to stage 2 is near-singular and the dual-norm noise scale explodes.
# 1.1 keeps log-odds within the flat part of tanh for sup-bounded covariates.
PILOT_CAP = 1.1


class EstimationError(RuntimeError):
    """Base failure signal for estimator-internal solvers."""


class ConvergenceError(EstimationError):
    """Iterative solver hit its cap without meeting tolerance."""


class DomainError(EstimationError):
    """Requested mean lies outside the family's achievable range."""


# ---- one-parameter exponential families -------------------------------------


@dataclass(frozen=True)
class ExpFamily1D:
    """One-parameter exponential family p_theta = exp(theta T - A(theta)).

    kind "finite": explicit statistic values plus positive base weights.
    kind "gaussian-location": T(x) = x under N(theta, 1).
    """

    kind: str
    t_values: tuple | None = None
    weights: tuple | None = None

    def __post_init__(self) -> None:
        if self.kind == "finite":
            t = np.asarray(self.t_values, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            if t.ndim != 1 or t.size < 2 or t.size != w.size:
                raise ValueError("finite family needs >= 2 matching values/weights")
            if np.any(w <= 0.0):
                raise ValueError("base weights must be positive")
            if len(set(t.tolist())) != t.size:
                raise ValueError("statistic values must be distinct")
            order = np.argsort(t)
            object.__setattr__(self, "t_values", tuple(t[order]))
            object.__setattr__(self, "weights", tuple(w[order]))
        elif self.kind == "gaussian-location":
            if self.t_values is not None or self.weights is not None:
                raise ValueError("gaussian-location takes no values/weights")
        else:
            raise ValueError(f"unknown family kind {self.kind!r}")

    @classmethod
    def gaussian_location(cls) -> "ExpFamily1D":
        return cls("gaussian-location")

    @classmethod
    def finite(cls, t_values: Sequence[float], weights: Sequence[float]) -> "ExpFamily1D":
        return cls("finite", tuple(t_values), tuple(weights))

    @classmethod
    def bernoulli(cls) -> "ExpFamily1D":
        """Bernoulli in canonical form: P(T=1) = e^theta/(1 + e^theta)."""
        return cls.finite((0.0, 1.0), (1.0, 1.0))

    # -- finite-kind internals --------------------------------------------

    def _logits(self, theta: float) -> np.ndarray:
        t = np.asarray(self.t_values)
        return theta * t + np.log(np.asarray(self.weights))

    def _probs(self, theta: float) -> np.ndarray:
        z = self._logits(theta)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    # -- cumulant and derivatives ------------------------------------------

    def log_partition(self, theta: float) -> float:
        if self.kind == "gaussian-location":
            return 0.5 * theta * theta
        z = self._logits(theta)
        m = float(z.max())
        return m + math.log(float(np.exp(z - m).sum()))

    def mean(self, theta: float) -> float:
        """A'(theta) = E_theta[T]."""
        if self.kind == "gaussian-location":
            return theta
        p = self._probs(theta)
        return float(p @ np.asarray(self.t_values))

    def variance(self, theta: float) -> float:
        """A''(theta) = Var_theta(T)."""
        if self.kind == "gaussian-location":
            return 1.0
        p = self._probs(theta)
        t = np.asarray(self.t_values)
        mu = float(p @ t)
        return float(p @ (t - mu) ** 2)

    def l1_information(self, theta: float) -> float:
        """E_theta |T - A'(theta)|, the scalar L1-information."""
        if self.kind == "gaussian-location":
            return math.sqrt(2.0 / math.pi)
        p = self._probs(theta)
        t = np.asarray(self.t_values)
        return float(p @ np.abs(t - float(p @ t)))

    def tail(self, t: float, theta: float) -> float:
        """Psi(t, theta) = P_theta(T >= t); nondecreasing in theta."""
        if self.kind == "gaussian-location":
            return float(ndtr(theta - t))
        p = self._probs(theta)
        return float(p[np.asarray(self.t_values) >= t].sum())

    def sample(self, theta: float, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian-location":
            return rng.normal(theta, 1.0, size=n)
        return rng.choice(np.asarray(self.t_values), size=n, p=self._probs(theta))

    def default_clip(self) -> float:
        """Stage-1 clip level: 6 for the Gaussian, support bound otherwise."""
        if self.kind == "gaussian-location":
            return 6.0
        t = np.asarray(self.t_values)
        return float(max(abs(t.min()), abs(t.max())))


def psi(fam: ExpFamily1D, t: float, theta: float) -> float:
    """Tail functional Psi(t, theta) = P_theta(T >= t)."""
    return fam.tail(t, theta)


def invert_h(fam: ExpFamily1D, p: float, t: float) -> float:
    """H(p, t) = inf { theta : Psi(t, theta) >= p }.

    Geometric bracket expansion from theta = 0 capped at |theta| = 1e3,
    then bisection to a 1e-10 bracket.  p below Psi's attainable range
    returns -INF (the infimum runs away), p above it returns +INF.
    """
    if fam.tail(t, -BRACKET_CAP) >= p:
        return -INF
    if fam.tail(t, BRACKET_CAP) < p:
        return INF
    lo, hi = -1.0, 1.0
    while fam.tail(t, lo) >= p and lo > -BRACKET_CAP:
        lo = max(lo * 2.0, -BRACKET_CAP)
    while fam.tail(t, hi) < p and hi < BRACKET_CAP:
        hi = min(hi * 2.0, BRACKET_CAP)
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if fam.tail(t, mid) >= p:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ExpFamOneStep:
    theta_hat: float
    t_hat: float
    z_bar: float
    n_stage2: int
    clamped: bool
    g_n: float | None


def expfam_onestep(
    fam: ExpFamily1D,
    sample: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
    clip_bound: float | None = None,
    theta0: float | None = None,
) -> ExpFamOneStep:
    """Two-stage private threshold estimator for the natural parameter.

    The total sample (size 2n) is split in half.  Stage 1 releases a
    clipped-Laplace mean of the statistic as the threshold t_hat; stage 2
    releases the bits 1{T_i >= t_hat} through randomized response, debiases
    their mean, and inverts the tail map: theta_hat = H(z_bar, t_hat).
    epsilon = +inf turns both privatizations off.  A z_bar outside Psi's
    attainable range clamps theta_hat to the bracket edge and sets the flag.
    ``theta0``, when given, adds the diagnostic g_n = Psi(t_hat, theta0).
    """
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise ValueError("need a flat sample of size >= 4")
    private = math.isfinite(epsilon)
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    n1 = x.size // 2
    stage1, stage2 = x[:n1], x[n1:]

    clip = fam.default_clip() if clip_bound is None else float(clip_bound)
    clipped = np.clip(stage1, -clip, clip)
    if private:
        clipped = clipped + rng.laplace(0.0, 2.0 * clip / epsilon, size=n1)
    t_hat = float(clipped.mean())

    v = (stage2 >= t_hat).astype(float)
    if private:
        mech = RandomizedResponseBit(epsilon, debiased=True)
        z = rr_privatize_many(v, mech, rng)
    else:
        z = v
    z_bar = float(z.mean())

    theta = invert_h(fam, z_bar, t_hat)
    clamped = math.isinf(theta)
    if clamped:
        theta = math.copysign(BRACKET_CAP, theta)
    g_n = fam.tail(t_hat, theta0) if theta0 is not None else None
    return ExpFamOneStep(theta, t_hat, z_bar, int(stage2.size), clamped, g_n)


def expfam_asymptotic_variance(fam: ExpFamily1D, theta0: float, epsilon: float) -> float:
    """Limit of Var(sqrt(n) (theta_hat - theta0)) for the two-stage estimator:

    4 J^{-2} ( e^eps/(e^eps - 1)^2 + G (1 - G) ),
    J = E|T - A'(theta0)|, G = Psi(A'(theta0), theta0).
    """
    j = fam.l1_information(theta0)
    g = fam.tail(fam.mean(theta0), theta0)
    if math.isinf(epsilon):
        noise = 0.0
    else:
        e = math.exp(epsilon)
        noise = e / (e - 1.0) ** 2
    return 4.0 / j**2 * (noise + g * (1.0 - g))


# ---- multivariate exponential families ---------------------------------------


@dataclass(frozen=True)
class MultiExpFamily:
    """Finite-support d-dim family p_theta(x) ~ w(x) exp(theta . x)."""

    points: tuple
    weights: tuple

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != w.size or pts.shape[0] < 2:
            raise ValueError("need >= 2 support points with matching weights")
        if np.any(w <= 0.0):
            raise ValueError("base weights must be positive")
        object.__setattr__(self, "points", tuple(map(tuple, pts)))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @classmethod
    def rademacher(cls) -> "MultiExpFamily":
        """d = 1 on {-1, +1}: A(theta) = log(e^theta + e^-theta)."""
        return cls(((-1.0,), (1.0,)), (1.0, 1.0))

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def _matrix(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def _probs(self, theta: np.ndarray) -> np.ndarray:
        z = self._matrix() @ theta + np.log(np.asarray(self.weights))
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def log_partition(self, theta) -> float:
        z = self._matrix() @ np.asarray(theta, dtype=float) + np.log(
            np.asarray(self.weights)
        )
        m = float(z.max())
        return m + math.log(float(np.exp(z - m).sum()))

    def grad(self, theta) -> np.ndarray:
        """grad A(theta) = E_theta[X]."""
        p = self._probs(np.asarray(theta, dtype=float))
        return p @ self._matrix()

    def hess(self, theta) -> np.ndarray:
        """grad^2 A(theta) = cov_theta(X)."""
        p = self._probs(np.asarray(theta, dtype=float))
        pts = self._matrix()
        mu = p @ pts
        centered = pts - mu
        return (centered * p[:, None]).T @ centered

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        p = self._probs(np.asarray(theta, dtype=float))
        idx = rng.choice(len(self.points), size=n, p=p)
        return self._matrix()[idx]

    def mean_box(self) -> tuple[np.ndarray, np.ndarray]:
        pts = self._matrix()
        return pts.min(axis=0), pts.max(axis=0)


def _newton_mean_solve(
    value: Callable,
    grad: Callable,
    hess: Callable,
    mu: np.ndarray,
    dim: int,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_CAP,
) -> tuple[np.ndarray, bool]:
    """Damped Newton on theta -> A(theta) - mu.theta; returns (theta, converged)."""
    theta = np.zeros(dim)
    for _ in range(max_iter):
        g = grad(theta) - mu
        if float(np.linalg.norm(g)) <= tol:
            return theta, True
        try:
            step = np.linalg.solve(hess(theta), -g)
        except np.linalg.LinAlgError:
            return theta, False
        f0 = value(theta) - float(mu @ theta)
        slope = float(g @ step)
        t = 1.0
        while t > 2.0**-30:
            cand = theta + t * step
            if value(cand) - float(mu @ cand) <= f0 + 1e-4 * t * slope:
                break
            t *= 0.5
        theta = theta + t * step
        if float(np.linalg.norm(theta)) > THETA_CAP:
            return theta, False
    return theta, False


def grad_astar(fam: MultiExpFamily, mu) -> np.ndarray:
    """grad A*(mu): the theta with E_theta[X] = mu, by damped Newton.

    Raises DomainError when mu falls outside the support box (a necessary
    condition for solvability) and ConvergenceError past the iteration cap.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    lo, hi = fam.mean_box()
    if np.any(mu <= lo) or np.any(mu >= hi):
        raise DomainError(f"mean {mu} outside the achievable open box")
    theta, ok = _newton_mean_solve(fam.log_partition, fam.grad, fam.hess, mu, fam.dim)
    if not ok:
        raise ConvergenceError("conjugate-gradient-inverse Newton hit its cap")
    return theta


# ---- mis-specified exponential-family one-step -------------------------------


def _as_functional(functional, dim: int):
    """Accept a linear functional (vector) or a (value, grad) callable pair."""
    if isinstance(functional, tuple) and len(functional) == 2 and callable(functional[0]):
        return functional
    v = np.atleast_1d(np.asarray(functional, dtype=float))
    if v.size != dim:
        raise ValueError(f"functional must have dimension {dim}")
    return (lambda th: float(v @ th)), (lambda th: v)


@dataclass(frozen=True)
class MisExpFamOneStep:
    phi_hat: float
    variance_hat: float
    theta_tilde: np.ndarray
    mu_tilde: np.ndarray
    n_stage1: int


def mis_expfam_onestep(
    fam: MultiExpFamily,
    sample: np.ndarray,
    functional,
    epsilon: float,
    rng: np.random.Generator,
) -> MisExpFamOneStep:
    """One-step corrected private estimator of phi(theta(P)).

    theta(P) = grad A*(E_P[X]) projects the (possibly mis-specified) data
    distribution onto the family.  Stage 1 (ceil(n^{2/3}) samples) releases
    a Laplace-noised mean and solves for the pilot theta_tilde; stage 2
    releases the linearized statistic grad phi . hess^{-1} X plus scalar
    Laplace noise at scale dualnorm/eps.  Data must lie in the unit
    sup-norm ball.  variance_hat is a non-private plug-in diagnostic of the
    asymptotic variance (empirical covariance of the stage-2 half).
    """
    x = np.atleast_2d(np.asarray(sample, dtype=float))
    n, d = x.shape
    if d != fam.dim:
        raise ValueError(f"sample dimension {d} != family dimension {fam.dim}")
    if np.max(np.abs(x)) > 1.0 + 1e-9:
        raise ValueError("data must lie in the unit sup-norm ball")
    n1 = int(math.ceil(n ** (2.0 / 3.0)))
    if n - n1 < 1:
        raise ValueError("sample too small to split")
    value, grad = _as_functional(functional, d)
    private = math.isfinite(epsilon)

    mech = LaplaceVectorMechanism(epsilon, bound=1.0, dim=d)
    stage1 = laplace_privatize(x[:n1], mech, rng)
    mu_tilde = stage1.mean(axis=0)
    theta_tilde = grad_astar(fam, mu_tilde)

    g = np.linalg.solve(fam.hess(theta_tilde), np.atleast_1d(grad(theta_tilde)))
    dual = float(np.abs(g).sum())
    x2 = x[n1:]
    z = x2 @ g
    if private:
        z = z + rng.laplace(0.0, dual / epsilon, size=z.size)
    phi_hat = value(theta_tilde) + float(z.mean()) - float(g @ mu_tilde)

    cov = np.cov(x2, rowvar=False).reshape(d, d)
    noise_var = 0.0 if not private else 2.0 * dual**2 / epsilon**2
    variance_hat = float(g @ cov @ g) + noise_var
    return MisExpFamOneStep(phi_hat, variance_hat, theta_tilde, mu_tilde, n1)


def mis_expfam_variance(grad_phi, hess_a, cov, epsilon: float) -> float:
    """Asymptotic variance of the one-step estimator:

    grad_phi . hess^{-1} cov hess^{-1} grad_phi + (2/eps^2) ||hess^{-1} grad_phi||_1^2.
    """
    h = np.atleast_2d(np.asarray(hess_a, dtype=float))
    g = np.linalg.solve(h, np.atleast_1d(np.asarray(grad_phi, dtype=float)))
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    noise = 0.0 if math.isinf(epsilon) else 2.0 * float(np.abs(g).sum()) ** 2 / epsilon**2
    return float(g @ c @ g) + noise


# ---- conditional logistic GLM -------------------------------------------------


@dataclass(frozen=True)
class GlmLogistic:
    """Binary-response GLM with known finite covariate distribution.

    Covariate atoms x (without intercept) carry weights; the sufficient
    statistic is T(x, y) = y * [x; 1] and the conditional log-partition
    averaged over covariates is A(theta) = E_x log(e^{u.theta} + e^{-u.theta})
    with u = [x; 1].
    """

    x_atoms: tuple
    x_weights: tuple

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.x_atoms, dtype=float))
        w = np.asarray(self.x_weights, dtype=float)
        if pts.shape[0] != w.size or pts.shape[0] < 1:
            raise ValueError("need covariate atoms with matching weights")
        if np.any(w < 0.0) or w.sum() <= 0.0:
            raise ValueError("covariate weights must be nonnegative, not all zero")
        object.__setattr__(self, "x_atoms", tuple(map(tuple, pts)))
        object.__setattr__(self, "x_weights", tuple(float(x) for x in w / w.sum()))

    @classmethod
    def uniform_cube(cls, d: int) -> "GlmLogistic":
        """Covariates uniform on {-1, 1}^d."""
        atoms = [
            tuple(1.0 if (i >> j) & 1 else -1.0 for j in range(d)) for i in range(1 << d)
        ]
        return cls(tuple(atoms), (1.0 / len(atoms),) * len(atoms))

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "GlmLogistic":
        """Empirical covariate law of a population matrix (uniform weights)."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return cls(tuple(map(tuple, rows)), (1.0 / rows.shape[0],) * rows.shape[0])

    @property
    def dim(self) -> int:
        return len(self.x_atoms[0]) + 1

    def design(self) -> np.ndarray:
        """Atoms with the intercept column appended: rows u = [x; 1]."""
        pts = np.asarray(self.x_atoms, dtype=float)
        return np.hstack([pts, np.ones((pts.shape[0], 1))])

    @property
    def t_bound(self) -> float:
        """Sup-norm radius of the sufficient statistic."""
        return float(np.max(np.abs(self.design())))

    def suff_stat(self, x_rows: np.ndarray, y: np.ndarray) -> np.ndarray:
        x_rows = np.atleast_2d(np.asarray(x_rows, dtype=float))
        u = np.hstack([x_rows, np.ones((x_rows.shape[0], 1))])
        return u * np.asarray(y, dtype=float)[:, None]

    def log_partition(self, theta) -> float:
        s = self.design() @ np.asarray(theta, dtype=float)
        vals = np.abs(s) + np.log1p(np.exp(-2.0 * np.abs(s)))
        return float(np.asarray(self.x_weights) @ vals)

    def grad(self, theta) -> np.ndarray:
        u = self.design()
        s = u @ np.asarray(theta, dtype=float)
        w = np.asarray(self.x_weights) * np.tanh(s)
        return w @ u

    def hess(self, theta) -> np.ndarray:
        u = self.design()
        s = u @ np.asarray(theta, dtype=float)
        w = np.asarray(self.x_weights) * (1.0 - np.tanh(s) ** 2)
        return (u * w[:, None]).T @ u

    def mean_box(self) -> tuple[np.ndarray, np.ndarray]:
        bound = np.abs(self.design()).T @ np.asarray(self.x_weights)
        return -bound, bound

    def cov_t(self, theta) -> np.ndarray:
        """Model-implied covariance of T(X, Y) at theta."""
        u = self.design()
        w = np.asarray(self.x_weights)
        s = u @ np.asarray(theta, dtype=float)
        cond = (u * (w * (1.0 - np.tanh(s) ** 2))[:, None]).T @ u
        m = (u * (w * np.tanh(s))[:, None]).sum(axis=0)
        second = (u * (w * np.tanh(s) ** 2)[:, None]).T @ u
        return cond + second - np.outer(m, m)

    def theta_from_mean(self, mu, strict: bool = True) -> tuple[np.ndarray, bool]:
        """Solve E_theta[T] = mu by damped Newton; (theta, converged)."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if strict:
            lo, hi = self.mean_box()
            if np.any(mu <= lo) or np.any(mu >= hi):
                raise DomainError(f"mean {mu} outside the achievable open box")
        theta, ok = _newton_mean_solve(
            self.log_partition, self.grad, self.hess, mu, self.dim
        )
        if strict and not ok:
            raise ConvergenceError("GLM conjugate Newton hit its cap")
        return theta, ok

    def sample(self, theta, n: int, rng: np.random.Generator):
        """Draw (x_rows, y) with P(y=1|x) = e^{u.theta}/(e^{u.theta}+e^{-u.theta})."""
        w = np.asarray(self.x_weights)
        idx = rng.choice(len(self.x_atoms), size=n, p=w)
        x_rows = np.asarray(self.x_atoms, dtype=float)[idx]
        u = np.hstack([x_rows, np.ones((n, 1))])
        s = u @ np.asarray(theta, dtype=float)
        prob_pos = 1.0 / (1.0 + np.exp(-2.0 * s))
        y = np.where(rng.random(n) < prob_pos, 1.0, -1.0)
        return x_rows, y


@dataclass(frozen=True)
class GlmOneStep:
    phi_hat: float
    variance_hat: float
    theta_tilde: np.ndarray
    init_converged: bool
    n_stage1: int


def _glm_stage1(model, t_stats, epsilon, rng, clamp_init):
    n = t_stats.shape[0]
    n1 = int(math.ceil(n ** (2.0 / 3.0)))
    if n - n1 < 1:
        raise ValueError("sample too small to split")
    mech = LaplaceVectorMechanism(epsilon, bound=model.t_bound, dim=model.dim)
    stage1 = laplace_privatize(t_stats[:n1], mech, rng)
    mu_tilde = stage1.mean(axis=0)
    if not clamp_init:
        theta_tilde, ok = model.theta_from_mean(mu_tilde, strict=True)
        return n1, mu_tilde, theta_tilde, ok
    # Clip into the strict interior and shrink further (toward 0, an interior
    # point of the symmetric achievable set) until the solve lands at a
    # stable pilot.  The correction term must use the mean actually solved
    # for, so the clamped mean is what gets returned.
    lo, hi = model.mean_box()
    mu = np.clip(mu_tilde, 0.95 * lo, 0.95 * hi)
    for _ in range(60):
        theta_tilde, ok = model.theta_from_mean(mu, strict=False)
        if ok and float(np.abs(theta_tilde).max()) <= PILOT_CAP:
            return n1, mu, theta_tilde, ok
        mu = 0.7 * mu
    theta_tilde, _ = model.theta_from_mean(np.zeros(model.dim), strict=False)
    return n1, np.zeros(model.dim), theta_tilde, False


def glm_onestep_coords(
    model: GlmLogistic,
    sample,
    vs: Sequence,
    epsilon: float,
    rng: np.random.Generator,
    clamp_init: bool = False,
):
    """One-step estimates of v . theta for several v sharing one stage 1.

    Returns (estimates, variances, pilot GlmOneStep); the pilot's phi_hat
    and variance_hat refer to the first v.
    """
    x_rows, y = sample
    t_stats = model.suff_stat(x_rows, y)
    if np.max(np.abs(t_stats)) > model.t_bound + 1e-9:
        raise ValueError("sufficient statistics escape the declared bound")
    private = math.isfinite(epsilon)
    n1, mu_tilde, theta_tilde, ok = _glm_stage1(model, t_stats, epsilon, rng, clamp_init)
    hess = model.hess(theta_tilde)
    t2 = t_stats[n1:]
    cov = np.cov(t2, rowvar=False).reshape(model.dim, model.dim)
    estimates = []
    variances = []
    for v in vs:
        vv = np.atleast_1d(np.asarray(v, dtype=float))
        g = np.linalg.solve(hess, vv)
        dual = model.t_bound * float(np.abs(g).sum())
        z = t2 @ g
        if private:
            z = z + rng.laplace(0.0, dual / epsilon, size=z.size)
        estimates.append(float(z.mean()) + float(vv @ theta_tilde) - float(g @ mu_tilde))
        noise_var = 0.0 if not private else 2.0 * dual**2 / epsilon**2
        variances.append(float(g @ cov @ g) + noise_var)
    pilot = GlmOneStep(estimates[0], variances[0], theta_tilde, ok, n1)
    return np.asarray(estimates), np.asarray(variances), pilot


def glm_onestep(
    model: GlmLogistic,
    sample,
    v,
    epsilon: float,
    rng: np.random.Generator,
    clamp_init: bool = False,
) -> GlmOneStep:
    """One-step corrected private estimator of v . theta(P).

    Stage 1 privatizes ceil(n^{2/3}) sufficient statistics with vector
    Laplace noise and solves the conjugate equation for the pilot; stage 2
    averages the linearized scalar statistic with Laplace noise at scale
    t_bound * ||hess^{-1} v||_1 / eps and recenters at the pilot.
    """
    _, _, pilot = glm_onestep_coords(model, sample, [v], epsilon, rng, clamp_init)
    return pilot


def glm_variance(model: GlmLogistic, theta0, v, epsilon: float, cov_t=None) -> float:
    """Asymptotic variance of the GLM one-step at theta0:

    ||hess^{-1} v||^2_{cov(T)} + (2/eps^2) (t_bound ||hess^{-1} v||_1)^2.
    """
    g = np.linalg.solve(model.hess(theta0), np.atleast_1d(np.asarray(v, dtype=float)))
    c = model.cov_t(theta0) if cov_t is None else np.atleast_2d(np.asarray(cov_t, float))
    noise = (
        0.0
        if math.isinf(epsilon)
        else 2.0 * (model.t_bound * float(np.abs(g).sum())) ** 2 / epsilon**2
    )
    return float(g @ c @ g) + noise


def private_sgd(
    model: GlmLogistic,
    sample,
    epsilon: float,
    rng: np.random.Generator,
    step_scale: float = 0.05,
    average: bool = False,
) -> np.ndarray:
    """Noisy population-gradient SGD baseline, one pass, eta_k = step_scale/sqrt(k).

    theta^{k+1} = theta^k - eta_k (grad A(theta^k) - Z^k) where Z^k is the
    k-th sufficient statistic through the vector Laplace mechanism.
    """
    x_rows, y = sample
    t_stats = model.suff_stat(x_rows, y)
    n = t_stats.shape[0]
    private = math.isfinite(epsilon)
    mech = LaplaceVectorMechanism(epsilon, bound=model.t_bound, dim=model.dim)
    if private:
        noise = rng.laplace(0.0, mech.scale, size=t_stats.shape)
        z_all = t_stats + noise
    else:
        z_all = t_stats
    u = model.design()
    w = np.asarray(model.x_weights)
    theta = np.zeros(model.dim)
    running = np.zeros(model.dim)
    inv_sqrt = step_scale / np.sqrt(np.arange(1, n + 1))
    for k in range(n):
        grad = ((w * np.tanh(u @ theta)) @ u) - z_all[k]
        theta = theta - inv_sqrt[k] * grad
        if average:
            running += theta
    return running / n if average else theta


@dataclass(frozen=True)
class MleResult:
    theta: np.ndarray
    converged: bool
    iterations: int


def mle_logistic(model: GlmLogistic, sample) -> MleResult:
    """Non-private MLE by damped Newton; flags (not raises) on separation."""
    x_rows, y = sample
    t_stats = model.suff_stat(x_rows, y)
    x_rows = np.atleast_2d(np.asarray(x_rows, dtype=float))
    u = np.hstack([x_rows, np.ones((x_rows.shape[0], 1))])
    t_mean = t_stats.mean(axis=0)
    theta = np.zeros(model.dim)
    for it in range(MLE_CAP):
        s = u @ theta
        grad = np.tanh(s) @ u / u.shape[0] - t_mean
        if float(np.linalg.norm(grad)) <= MLE_TOL:
            # A vanishing gradient at a separating direction is saturation,
            # not a maximizer: the MLE exists iff no direction classifies
            # every label with strictly positive margin.
            separated = bool(theta @ theta > 0.0) and bool(np.all(np.asarray(y) * s > 0.0))
            return MleResult(theta, not separated, it)
        w = 1.0 - np.tanh(s) ** 2
        hess = (u * w[:, None]).T @ u / u.shape[0]
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            return MleResult(theta, False, it)
        f0 = float(np.mean(np.abs(s) + np.log1p(np.exp(-2.0 * np.abs(s)))) - t_mean @ theta)
        slope = float(grad @ step)
        t = 1.0
        while t > 2.0**-30:
            cand = theta + t * step
            sc = u @ cand
            f1 = float(
                np.mean(np.abs(sc) + np.log1p(np.exp(-2.0 * np.abs(sc)))) - t_mean @ cand
            )
            if f1 <= f0 + 1e-4 * t * slope:
                break
            t *= 0.5
        theta = theta + t * step
        if float(np.linalg.norm(theta)) > THETA_CAP:
            return MleResult(theta, False, it)
    return MleResult(theta, False, MLE_CAP)


# ---- randomized-response Bernoulli -------------------------------------------


@dataclass(frozen=True)
class RrEstimate:
    p_hat: float
    analytic_variance: float
    z_bar: float


def rr_bernoulli_estimate(
    bits: np.ndarray, epsilon: float, rng: np.random.Generator
) -> RrEstimate:
    """Debiased randomized-response mean: p_hat = (z_bar - q)/(1 - 2q).

    q = 1/(e^eps + 1) is the flip probability.  analytic_variance is the
    plug-in m(1-m)/(n (1-2q)^2) with m = z_bar, the flipped-bit mean.
    """
    v = np.asarray(bits)
    n = v.size
    if n < 1:
        raise ValueError("empty sample")
    if math.isinf(epsilon):
        z_bar = float(np.asarray(v, dtype=float).mean())
        return RrEstimate(z_bar, z_bar * (1.0 - z_bar) / n, z_bar)
    mech = RandomizedResponseBit(epsilon, debiased=False)
    z = rr_privatize_many(v, mech, rng)
    z_bar = float(z.mean())
    q = 1.0 - mech.keep_prob
    p_hat = (z_bar - q) / (1.0 - 2.0 * q)
    var = z_bar * (1.0 - z_bar) / (n * (1.0 - 2.0 * q) ** 2)
    return RrEstimate(p_hat, var, z_bar)


def rr_bernoulli_variance(p: float, n: int, epsilon: float) -> float:
    """Exact sampling variance of the debiased estimator at true p."""
    q = 1.0 / (1.0 + math.exp(epsilon))
    m = p * (1.0 - q) + (1.0 - p) * q
    return m * (1.0 - m) / (n * (1.0 - 2.0 * q) ** 2)


# ---- private two-point test ----------------------------------------------------


@dataclass(frozen=True)
class TwoPointResult:
    estimate: object
    k_n: float
    threshold: float
    error_bound: float
    degenerate: bool


def two_point_test(
    sample: Sequence,
    p0: DiscreteDistribution,
    p1: DiscreteDistribution,
    theta0,
    theta1,
    epsilon: float,
    rng: np.random.Generator,
) -> TwoPointResult:
    """Private likelihood-region test between P0 and P1.

    Each sample point is reduced to the bit 1{x in A}, A = {p0 > p1},
    released through randomized response; the debiased hit rate K_n is
    compared to the midpoint (P0(A) + P1(A))/2.  The returned error_bound
    is the Hoeffding envelope exp(-n delta_eps^2 TV^2 / 2).  Identical
    hypotheses short-circuit to theta0 with the degenerate flag.
    """
    atoms, pv, qv = aligned(p0, p1)
    if np.all(pv == qv):
        return TwoPointResult(theta0, 0.0, 0.0, 1.0, True)
    a_set = {a for a, pa, qa in zip(atoms, pv, qv) if pa > qa}
    bits = np.array([1.0 if x in a_set else 0.0 for x in sample])
    n = bits.size
    if n < 1:
        raise ValueError("empty sample")
    delta = 1.0 / (1.0 + math.exp(-epsilon)) - 0.5
    mech = RandomizedResponseBit(epsilon, debiased=False)
    z = rr_privatize_many(bits, mech, rng)
    k_n = (float(z.mean()) - (0.5 - delta)) / (2.0 * delta)
    p0a = float(pv[[a in a_set for a in atoms]].sum())
    p1a = float(qv[[a in a_set for a in atoms]].sum())
    threshold = 0.5 * (p0a + p1a)
    tv = float(0.5 * np.abs(pv - qv).sum())
    bound = math.exp(-n * delta**2 * tv**2 / 2.0)
    estimate = theta0 if k_n >= threshold else theta1
    return TwoPointResult(estimate, k_n, threshold, bound, False)
