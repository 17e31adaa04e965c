import math

import numpy as np
import pytest

from locpriv import (
    DiscreteDistribution,
    FiniteChannel,
    LaplaceVectorMechanism,
    RandomizedResponseBit,
    analytic_log_ratio_bound,
    is_inf,
    laplace_privatize,
    push_forward,
    rr_privatize,
    rr_privatize_many,
    verify_chi2,
    verify_fk,
    verify_ldp,
    verify_renyi,
)
from locpriv.contraction import random_channel

LN3 = math.log(3.0)


def test_rr_channel_measures_its_epsilon():
    for eps in (0.1, 0.5, 1.0, LN3, 2.0):
        ch = RandomizedResponseBit(eps).channel()
        assert math.isclose(verify_ldp(ch), eps, rel_tol=1e-12)


def test_rr_chi2_closed_form():
    """chi-squared privacy of binary RR is (e^eps - 1)^2 / e^eps."""
    for eps in (0.5, 1.0, LN3):
        ch = RandomizedResponseBit(eps).channel()
        expect = (math.exp(eps) - 1.0) ** 2 / math.exp(eps)
        assert math.isclose(verify_chi2(ch), expect, rel_tol=1e-12)


def test_rr_renyi_and_fk():
    ch = RandomizedResponseBit(LN3).channel()
    assert math.isclose(verify_renyi(ch, 2.0), math.log(7.0 / 3.0), rel_tol=1e-12)
    assert math.isclose(verify_fk(ch, 2.0), math.sqrt(4.0 / 3.0), rel_tol=1e-12)


def test_ldp_implies_chi2_growth_bound():
    """eps-DP forces chi2 privacy <= (e^eps - 1)^2 on random channels."""
    rng = np.random.default_rng(7)
    for _ in range(50):
        ch = random_channel(rng, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        eps = verify_ldp(ch)
        assert verify_chi2(ch) <= math.expm1(eps) ** 2 + 1e-9


def test_constant_channel_is_perfectly_private():
    ch = FiniteChannel((0, 1), ("z",), ((1.0,), (1.0,)))
    assert verify_ldp(ch) == 0.0
    assert verify_chi2(ch) == 0.0


def test_ldp_infinite_on_support_mismatch():
    ch = FiniteChannel((0, 1), (0, 1), ((1.0, 0.0), (0.5, 0.5)))
    assert is_inf(verify_ldp(ch))


def test_rr_mechanism_constants():
    mech = RandomizedResponseBit(LN3)
    assert math.isclose(mech.keep_prob, 0.75, rel_tol=1e-12)
    assert math.isclose(mech.debias_scale, 2.0, rel_tol=1e-12)
    assert math.isclose(mech.conditional_variance, 0.75, rel_tol=1e-12)


def test_rr_privatize_unbiased():
    mech = RandomizedResponseBit(1.0)
    rng = np.random.default_rng(0)
    bits = np.ones(200_000)
    z = rr_privatize_many(bits, mech, rng)
    assert abs(z.mean() - 1.0) < 5e-3
    raw = rr_privatize_many(bits, RandomizedResponseBit(1.0, debiased=False), rng)
    assert set(np.unique(raw)) <= {0.0, 1.0}


def test_rr_privatize_scalar_matches_vector_semantics():
    mech = RandomizedResponseBit(2.0, debiased=False)
    rng = np.random.default_rng(3)
    vals = {rr_privatize(1, mech, rng) for _ in range(50)}
    assert vals <= {0.0, 1.0}
    with pytest.raises(ValueError):
        rr_privatize(2, mech, rng)


def test_laplace_mechanism_scale_and_variance():
    mech = LaplaceVectorMechanism(epsilon=1.0, bound=1.0, dim=2)
    assert math.isclose(mech.scale, 4.0, rel_tol=1e-12)
    assert math.isclose(mech.noise_variance, 32.0, rel_tol=1e-12)


def test_laplace_privatize_shapes_and_ball_check():
    mech = LaplaceVectorMechanism(epsilon=2.0, bound=1.0, dim=3)
    rng = np.random.default_rng(1)
    x = rng.uniform(-1.0, 1.0, size=(100, 3))
    z = laplace_privatize(x, mech, rng)
    assert z.shape == x.shape
    assert abs((z - x).mean()) < 0.5
    with pytest.raises(ValueError):
        laplace_privatize(2.0 * np.ones((5, 3)), mech, rng)


def test_laplace_noise_free_at_infinite_epsilon():
    mech = LaplaceVectorMechanism(epsilon=float("inf"), bound=1.0, dim=2)
    rng = np.random.default_rng(2)
    x = np.zeros((4, 2))
    assert np.array_equal(laplace_privatize(x, mech, rng), x)


def test_analytic_log_ratio_bounds():
    assert math.isclose(analytic_log_ratio_bound(RandomizedResponseBit(1.3)), 1.3)
    mech = LaplaceVectorMechanism(epsilon=0.7, bound=2.0, dim=3)
    assert math.isclose(analytic_log_ratio_bound(mech), 0.7, rel_tol=1e-12)
    with pytest.raises(TypeError):
        analytic_log_ratio_bound(object())


def test_laplace_empirical_log_ratio_within_analytic():
    """Density-ratio audit: log f(z|x) - log f(z|x') <= eps over the ball."""
    mech = LaplaceVectorMechanism(epsilon=1.5, bound=1.0, dim=2)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        x0 = rng.uniform(-1, 1, 2)
        x1 = rng.uniform(-1, 1, 2)
        z = x0 + rng.laplace(0.0, mech.scale, 2)
        gap = (np.abs(z - x1).sum() - np.abs(z - x0).sum()) / mech.scale
        worst = max(worst, abs(gap))
    assert worst <= analytic_log_ratio_bound(mech) + 1e-12


def test_push_forward_bernoulli_through_rr():
    p = DiscreteDistribution.bernoulli(0.3)
    ch = RandomizedResponseBit(LN3).channel()
    m = push_forward(p, ch)
    assert math.isclose(m.prob_of(1), 0.4, rel_tol=1e-12)


def test_channel_json_round_trip():
    ch = RandomizedResponseBit(1.0).channel()
    back = FiniteChannel.from_json_dict(ch.to_json_dict())
    assert back.inputs == ch.inputs
    assert np.allclose(back.as_matrix(), ch.as_matrix())


def test_channel_row_validation():
    with pytest.raises(ValueError):
        FiniteChannel((0, 1), (0, 1), ((0.5, 0.4), (0.5, 0.5)))
    with pytest.raises(ValueError):
        FiniteChannel((0, 1), (0, 1), ((0.5, 0.5),))
