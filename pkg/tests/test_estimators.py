import math

import numpy as np
import pytest
from scipy.special import ndtri

from locpriv import (
    ExpFamily1D,
    GlmLogistic,
    MultiExpFamily,
    RandomizedResponseBit,
    expfam_asymptotic_variance,
    expfam_onestep,
    glm_onestep,
    glm_variance,
    grad_astar,
    mis_expfam_onestep,
    mis_expfam_variance,
    mle_logistic,
    private_sgd,
    rr_bernoulli_estimate,
    rr_bernoulli_variance,
    rr_privatize_many,
    two_point_test,
)
from locpriv.divergences import DiscreteDistribution
from locpriv.estimators import ConvergenceError, DomainError, invert_h, psi

LN3 = math.log(3.0)
GAUSS = ExpFamily1D.gaussian_location()
BERN = ExpFamily1D.bernoulli()
ATANH_HALF = 0.5493061443340549


def _rademacher_family():
    return MultiExpFamily(((1.0,), (-1.0,)), (1.0, 1.0))


# ---- family primitives -------------------------------------------------------


def test_gaussian_family_basics():
    assert GAUSS.mean(0.7) == 0.7
    assert GAUSS.variance(0.7) == 1.0
    assert math.isclose(GAUSS.l1_information(0.0), math.sqrt(2.0 / math.pi))
    assert GAUSS.tail(0.3, 0.3) == 0.5


def test_bernoulli_family_tail():
    # P(T >= 0.5) = P(T = 1) = e^theta / (1 + e^theta)
    assert math.isclose(psi(BERN, 0.5, LN3), 0.75, rel_tol=1e-12)
    assert math.isclose(psi(BERN, -1.0, LN3), 1.0, rel_tol=1e-12)
    assert math.isclose(BERN.mean(0.0), 0.5, rel_tol=1e-12)
    assert math.isclose(BERN.l1_information(0.0), 0.5, rel_tol=1e-12)


def test_finite_family_validation():
    with pytest.raises(ValueError):
        ExpFamily1D.finite((0.0,), (1.0,))
    with pytest.raises(ValueError):
        ExpFamily1D.finite((0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        ExpFamily1D.finite((0.0, 1.0), (1.0, -1.0))


def test_default_clip():
    assert GAUSS.default_clip() == 6.0
    assert ExpFamily1D.finite((-3.0, 2.0), (1.0, 1.0)).default_clip() == 3.0


def test_invert_h_closed_forms():
    assert abs(invert_h(BERN, 0.5, 0.5)) <= 1e-9
    assert math.isclose(invert_h(BERN, 0.75, 0.5), LN3, abs_tol=1e-9)
    # gaussian: Psi(t, theta) = ndtr(theta - t), so H(p, t) = t + ndtri(p)
    for p, t in ((0.3, 0.0), (0.9, -1.2), (0.5, 2.0)):
        assert math.isclose(invert_h(GAUSS, p, t), t + float(ndtri(p)), abs_tol=1e-8)


def test_invert_h_range_markers():
    assert math.isinf(invert_h(BERN, 1.0 + 1e-9, 0.5))
    assert invert_h(BERN, -0.5, 0.5) == -math.inf


def test_invert_h_round_trip_identity():
    for fam, grid in ((BERN, np.linspace(-3, 3, 13)), (GAUSS, np.linspace(-2, 2, 9))):
        t = 0.5 if fam.kind == "finite" else 0.1
        for theta in grid:
            p = psi(fam, t, float(theta))
            if 0.0 < p < 1.0:
                assert abs(invert_h(fam, p, t) - theta) <= 1e-8


# ---- two-stage estimator -------------------------------------------------------


def test_expfam_onestep_noise_free_threshold():
    """With eps = inf and a huge clip, stage 1 is exactly the half-mean."""
    rng = np.random.default_rng(0)
    x = rng.normal(0.4, 1.0, size=1000)
    res = expfam_onestep(GAUSS, x, float("inf"), rng, clip_bound=1e6)
    assert math.isclose(res.t_hat, float(x[:500].mean()), rel_tol=1e-12)
    assert res.n_stage2 == 500
    assert not res.clamped


def test_expfam_onestep_recovers_gaussian_location():
    rng = np.random.default_rng(42)
    x = GAUSS.sample(0.3, 20_000, rng)
    res = expfam_onestep(GAUSS, x, float("inf"), rng)
    assert abs(res.theta_hat - 0.3) < 0.05


def test_expfam_onestep_private_still_consistent():
    rng = np.random.default_rng(7)
    x = GAUSS.sample(0.0, 200_000, rng)
    res = expfam_onestep(GAUSS, x, 1.0, rng, theta0=0.0)
    assert abs(res.theta_hat) < 0.05
    assert res.g_n is not None and abs(res.g_n - 0.5) < 0.05


def test_expfam_onestep_reproducible():
    x = GAUSS.sample(0.0, 5000, np.random.default_rng(1))
    a = expfam_onestep(GAUSS, x, 1.0, np.random.default_rng(5))
    b = expfam_onestep(GAUSS, x, 1.0, np.random.default_rng(5))
    assert a == b


def test_stage2_rr_conditional_variance():
    """Debiased RR of a constant bit: Var = e^eps/(e^eps-1)^2 within 2%."""
    mech = RandomizedResponseBit(1.0)
    rng = np.random.default_rng(123)
    w = rr_privatize_many(np.ones(1_000_000), mech, rng)
    assert abs(w.var() / mech.conditional_variance - 1.0) < 0.02


def test_expfam_asymptotic_variance_value():
    got = expfam_asymptotic_variance(GAUSS, 0.0, 1.0)
    want = 2.0 * math.pi * (math.e / (math.e - 1.0) ** 2 + 0.25)
    assert math.isclose(got, want, rel_tol=1e-12)
    assert abs(got - 7.357) < 2e-3
    # removing the privacy noise leaves only the thresholding price
    assert math.isclose(
        expfam_asymptotic_variance(GAUSS, 0.0, float("inf")),
        2.0 * math.pi * 0.25,
        rel_tol=1e-12,
    )


# ---- conjugate duality --------------------------------------------------------


def test_grad_astar_rademacher():
    fam = _rademacher_family()
    assert abs(grad_astar(fam, [0.0])[0]) <= 1e-10
    assert math.isclose(grad_astar(fam, [0.5])[0], ATANH_HALF, abs_tol=1e-9)


def test_grad_astar_round_trip():
    fam = _rademacher_family()
    for mu in np.linspace(-0.9, 0.9, 19):
        theta = grad_astar(fam, [mu])
        assert abs(fam.grad(theta)[0] - mu) <= 1e-9


def test_grad_astar_domain_marker():
    fam = _rademacher_family()
    with pytest.raises(DomainError):
        grad_astar(fam, [1.0])


def test_multi_family_hessian():
    fam = _rademacher_family()
    assert math.isclose(fam.hess(np.zeros(1))[0, 0], 1.0, rel_tol=1e-12)
    assert math.isclose(fam.log_partition(np.zeros(1)), math.log(2.0), rel_tol=1e-12)


def test_mis_expfam_noise_free_matches_delta_method():
    fam = _rademacher_family()
    rng = np.random.default_rng(3)
    x = rng.choice([-1.0, 1.0], size=1000, p=[0.4, 0.6])[:, None]
    functional = (lambda th: float(th[0]), lambda th: [1.0])
    res = mis_expfam_onestep(fam, x, functional, float("inf"), rng)
    n1 = math.ceil(1000 ** (2.0 / 3.0))
    mu1 = float(x[:n1].mean())
    theta1 = math.atanh(mu1)
    g = 1.0 / (1.0 - mu1**2)  # 1/A''(theta_tilde)
    want = theta1 + g * (float(x[n1:].mean()) - mu1)
    assert math.isclose(res.phi_hat, want, rel_tol=1e-9)
    assert res.n_stage1 == n1


def test_mis_expfam_rejects_unbounded_data():
    fam = _rademacher_family()
    rng = np.random.default_rng(0)
    functional = (lambda th: 0.0, lambda th: [1.0])
    with pytest.raises(ValueError):
        mis_expfam_onestep(fam, 2.0 * np.ones((100, 1)), functional, 1.0, rng)


def test_mis_expfam_variance_worked_value():
    assert math.isclose(mis_expfam_variance([1.0], [[1.0]], [[1.0]], 1.0), 3.0)
    assert math.isclose(
        mis_expfam_variance([1.0], [[1.0]], [[1.0]], float("inf")), 1.0
    )


# ---- GLM logistic ---------------------------------------------------------------


def test_glm_uniform_cube_geometry():
    model = GlmLogistic.uniform_cube(2)
    assert model.dim == 3
    assert model.t_bound == 1.0
    assert np.allclose(model.hess(np.zeros(3)), np.eye(3))
    assert np.allclose(model.cov_t(np.zeros(3)), np.eye(3))


def test_glm_variance_worked_value():
    model = GlmLogistic.uniform_cube(2)
    v = np.array([1.0, 0.0, 0.0])
    assert math.isclose(glm_variance(model, np.zeros(3), v, 1.0), 3.0, rel_tol=1e-12)
    assert math.isclose(
        glm_variance(model, np.zeros(3), v, float("inf")), 1.0, rel_tol=1e-12
    )


def test_glm_sample_marginals():
    model = GlmLogistic.uniform_cube(2)
    rng = np.random.default_rng(2)
    x, y = model.sample(np.zeros(3), 4000, rng)
    assert set(np.unique(y)) <= {-1.0, 1.0}
    assert abs(y.mean()) < 0.1
    theta = np.array([0.0, 0.0, 1.0])  # bias coordinate tilts the marginal
    _, y1 = model.sample(theta, 4000, rng)
    assert y1.mean() > 0.5


def test_glm_onestep_noise_free_matches_manual():
    model = GlmLogistic.uniform_cube(2)
    rng = np.random.default_rng(11)
    sample = model.sample(np.array([0.3, -0.2, 0.1]), 2000, rng)
    res = glm_onestep(model, sample, np.array([1.0, 0.0, 0.0]), float("inf"), rng)
    t = model.suff_stat(sample[0], sample[1])
    n1 = math.ceil(2000 ** (2.0 / 3.0))
    mu1 = t[:n1].mean(axis=0)
    theta1, _ = model.theta_from_mean(mu1, strict=True)
    g = np.linalg.solve(model.hess(theta1), np.array([1.0, 0.0, 0.0]))
    want = float(t[n1:].mean(axis=0) @ g) + theta1[0] - float(g @ mu1)
    assert math.isclose(res.phi_hat, want, rel_tol=1e-9)
    assert res.init_converged


def test_glm_theta_from_mean_strict_raises_outside_box():
    model = GlmLogistic.uniform_cube(2)
    with pytest.raises(DomainError):
        model.theta_from_mean(np.array([2.0, 0.0, 0.0]), strict=True)
    theta, ok = model.theta_from_mean(np.array([2.0, 0.0, 0.0]), strict=False)
    assert not ok
    assert np.all(np.isfinite(theta))


def test_private_sgd_deterministic_and_sane():
    model = GlmLogistic.uniform_cube(2)
    theta_star = np.array([0.5, 0.0, 0.0])
    data = model.sample(theta_star, 20_000, np.random.default_rng(8))
    a = private_sgd(model, data, 4.0, np.random.default_rng(9))
    b = private_sgd(model, data, 4.0, np.random.default_rng(9))
    assert np.array_equal(a, b)
    assert np.linalg.norm(a - theta_star) < 0.4


def test_private_sgd_error_shrinks_with_n():
    model = GlmLogistic.uniform_cube(2)
    theta_star = np.array([0.4, -0.3, 0.2])
    meds = []
    for n in (500, 50_000):
        errs = []
        for trial in range(9):
            data = model.sample(theta_star, n, np.random.default_rng(100 + trial))
            est = private_sgd(model, data, 2.0, np.random.default_rng(200 + trial))
            errs.append(np.linalg.norm(est - theta_star))
        meds.append(np.median(errs))
    assert meds[1] < meds[0]


def test_mle_logistic_symmetric_and_separation():
    model = GlmLogistic.uniform_cube(2)
    atoms = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
    xs = np.array([row for row in atoms for _ in range(2)] * 2)
    ys = np.array([1.0, -1.0] * 8)  # each atom carries both labels equally
    res = mle_logistic(model, (xs, ys))
    assert res.converged
    assert np.linalg.norm(res.theta) < 1e-6
    sep = mle_logistic(model, (xs, np.ones(16)))
    assert not sep.converged  # separated data flags, never raises


def test_mle_matches_sampled_truth():
    model = GlmLogistic.uniform_cube(2)
    theta_star = np.array([0.6, -0.4, 0.2])
    data = model.sample(theta_star, 50_000, np.random.default_rng(21))
    res = mle_logistic(model, data)
    assert res.converged
    assert np.linalg.norm(res.theta - theta_star) < 0.05


# ---- randomized response and testing ------------------------------------------


def test_rr_estimate_infinite_epsilon_is_sample_mean():
    bits = np.array([1.0, 0.0, 1.0, 1.0])
    res = rr_bernoulli_estimate(bits, float("inf"), np.random.default_rng(0))
    assert res.p_hat == 0.75


def test_rr_variance_half_ln3_is_one_over_n():
    assert math.isclose(rr_bernoulli_variance(0.5, 100, LN3), 1.0 / 100.0, rel_tol=1e-12)


def test_rr_estimate_unbiased_mc():
    rng = np.random.default_rng(77)
    p_hats = []
    for _ in range(300):
        bits = (rng.random(2000) < 0.3).astype(float)
        p_hats.append(rr_bernoulli_estimate(bits, 1.0, rng).p_hat)
    assert abs(np.mean(p_hats) - 0.3) < 0.01


def test_two_point_degenerate():
    p = DiscreteDistribution.bernoulli(0.4)
    res = two_point_test([0, 1, 0], p, p, "a", "b", 1.0, np.random.default_rng(0))
    assert res.degenerate and res.estimate == "a"


def test_two_point_frozen_bound_and_decision():
    p0 = DiscreteDistribution.bernoulli(0.25)
    p1 = DiscreteDistribution.bernoulli(0.75)
    rng = np.random.default_rng(5)
    sample = (rng.random(800) < 0.25).astype(int)  # drawn from p0
    res = two_point_test(sample, p0, p1, "t0", "t1", LN3, rng)
    assert math.isclose(res.error_bound, math.exp(-6.25), rel_tol=1e-12)
    assert res.estimate == "t0"
    assert not res.degenerate
