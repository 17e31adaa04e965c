"""L1-information: the seminorm that replaces Fisher information locally.

For a dominated family with score vector s(x) at the base point, the
relevant local quantity under privacy is J(h) = E|h . s(X)| rather than
the quadratic form h . I h.  This module computes J, its dual norm, and
the generic plug-in lower bound built from them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .divergences import INF, DiscreteDistribution

SCORE_MEAN_TOL = 1e-8
DUAL_SUPPORT_CAP = 64

# Pinned constant for the one-parameter truncated-squared risk bound. The
# underlying statement carries an unspecified universal constant; this value
# is fixed here once so downstream tables are reproducible, and tests assert
# scaling (in n and the privacy level), not the constant.
ONE_PARAM_RISK_CONST = 1.0 / 512.0


@dataclass(frozen=True)
class ScoreModel:
    """A base distribution plus the score vector at each support atom.

    ``scores`` is one length-``dim`` vector per atom, in support order.
    The mixed moment E[s(X)] must vanish (tolerance 1e-8), as any score
    function of a dominated family does at the true parameter.
    """

    base: DiscreteDistribution
    scores: tuple
    dim: int

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.shape != (len(self.base.support), self.dim):
            raise ValueError("scores must be one dim-vector per support atom")
        mean = self.base.as_array() @ s
        if np.max(np.abs(mean)) > SCORE_MEAN_TOL:
            raise ValueError(f"score mean {mean} is not zero within tolerance")
        object.__setattr__(self, "scores", tuple(map(tuple, s)))

    def score_matrix(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=float)


def fisher_info(model: ScoreModel) -> np.ndarray:
    """Classical Fisher information matrix E[s s^T]."""
    s = model.score_matrix()
    p = model.base.as_array()
    return (s * p[:, None]).T @ s


def l1_info(model: ScoreModel, direction) -> float:
    """L1-information seminorm J(h) = E |h . s(X)|."""
    h = np.atleast_1d(np.asarray(direction, dtype=float))
    if h.size != model.dim:
        raise ValueError(f"direction must have dimension {model.dim}")
    s = model.score_matrix()
    return float(model.base.as_array() @ np.abs(s @ h))


def l1_dual_norm(model: ScoreModel, v) -> float:
    """Dual norm J*(v) = sup { v . h : J(h) <= 1 }.

    Dimension one has the closed form |v| / E|s|.  Higher dimensions solve
    the epigraph LP over the polyhedral unit ball (HiGHS); an unbounded
    program (degenerate seminorm) returns the INF marker.  Supports larger
    than 64 atoms are rejected, matching the desk-scale contract.
    """
    vv = np.atleast_1d(np.asarray(v, dtype=float))
    if vv.size != model.dim:
        raise ValueError(f"functional must have dimension {model.dim}")
    p = model.base.as_array()
    s = model.score_matrix()
    if len(model.base.support) > DUAL_SUPPORT_CAP:
        raise ValueError(f"support exceeds dual-norm cap {DUAL_SUPPORT_CAP}")
    if model.dim == 1:
        denom = float(p @ np.abs(s[:, 0]))
        if denom == 0.0:
            return 0.0 if vv[0] == 0.0 else INF
        return abs(float(vv[0])) / denom
    active = p > 0.0
    pa, sa = p[active], s[active]
    m, d = sa.shape
    # Variables (h, t): maximize v.h  s.t.  +-s_x.h <= t_x,  p.t <= 1, t >= 0.
    c = np.concatenate([-vv, np.zeros(m)])
    a_ub = np.zeros((2 * m + 1, d + m))
    a_ub[:m, :d] = sa
    a_ub[:m, d:] = -np.eye(m)
    a_ub[m : 2 * m, :d] = -sa
    a_ub[m : 2 * m, d:] = -np.eye(m)
    a_ub[2 * m, d:] = pa
    b_ub = np.concatenate([np.zeros(2 * m), [1.0]])
    bounds = [(None, None)] * d + [(0.0, None)] * m
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 3:  # unbounded: v is not dominated by the seminorm
        return INF
    if not res.success:
        raise RuntimeError(f"dual-norm LP failed: {res.message}")
    return float(-res.fun)


def generic_private_lb(
    model: ScoreModel,
    grad_phi,
    n: int,
    epsilon2: float,
    loss_phi: Callable[[float], float],
) -> float:
    """Plug-in local minimax lower bound for estimating phi(theta).

    (1/(16 sqrt 2)) * Phi( J*(grad phi) / (2 sqrt(2 n eps^2)) ).
    """
    if n < 1 or epsilon2 <= 0.0:
        raise ValueError("need n >= 1 and epsilon2 > 0")
    dual = l1_dual_norm(model, grad_phi)
    if math.isinf(dual):
        return INF
    arg = dual / (2.0 * math.sqrt(2.0 * n * epsilon2))
    return loss_phi(arg) / (16.0 * math.sqrt(2.0))


def one_param_info_bound(model: ScoreModel, n: int, epsilon2: float) -> float:
    """Truncated-squared risk floor for a one-parameter model.

    min( C / (n eps^2 (E|score|)^2), C ) with the pinned constant C.
    """
    if model.dim != 1:
        raise ValueError("one-parameter bound needs a scalar score model")
    if n < 1 or epsilon2 <= 0.0:
        raise ValueError("need n >= 1 and epsilon2 > 0")
    e_abs = l1_info(model, 1.0)
    if e_abs == 0.0:
        return ONE_PARAM_RISK_CONST
    val = ONE_PARAM_RISK_CONST / (n * epsilon2 * e_abs**2)
    return min(val, ONE_PARAM_RISK_CONST)


# ---- stock models -------------------------------------------------------


def bernoulli_score_model(p: float) -> ScoreModel:
    """Score model of Bernoulli(p): s(x) = (x - p) / (p (1 - p)).

    E|s| = 2 for every p in (0, 1), which is what makes the private
    Bernoulli risk parameter-free.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be interior to (0, 1)")
    base = DiscreteDistribution.bernoulli(p)
    denom = p * (1.0 - p)
    scores = ((0.0 - p) / denom, (1.0 - p) / denom)
    return ScoreModel(base, scores, 1)


def score_model_from_map(
    base: DiscreteDistribution, score_map: dict, dim: int
) -> ScoreModel:
    """Build a ScoreModel from an atom -> vector mapping."""
    scores = []
    for a in base.support:
        if a not in score_map:
            raise ValueError(f"score map missing atom {a!r}")
        vec = np.atleast_1d(np.asarray(score_map[a], dtype=float))
        scores.append(tuple(vec))
    return ScoreModel(base, tuple(scores), dim)
