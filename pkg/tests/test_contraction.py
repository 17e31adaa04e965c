import math

import numpy as np
import pytest

from locpriv import (
    DiscreteDistribution,
    PackingFamily,
    RandomizedResponseBit,
    big_tensor_bound,
    check_fk_contraction,
    check_tensorized_chi,
    complexity_c2,
    complexity_cinf,
    dobrushin_coefficient,
    fk_contraction_sweep,
    hypercube_mean_packing,
    kl_tensor_bound,
    logreg_complexity_bound,
    product_channel,
    sparse_logistic_packing,
    tensorization_sweep,
    uniform_joint_reference,
)
from locpriv.contraction import power_iteration, random_channel

LN3 = math.log(3.0)


def _gram_eigen_oracle(fam: PackingFamily) -> float:
    """Independent route to C2 at the base: top eigenvalue of the Gram
    matrix of (p_v - p*) / sqrt(p*), via numpy's dense solver."""
    atoms = fam.union_support()
    base = np.array([fam.base.prob_of(a) for a in atoms])
    rows = np.array(
        [[m.prob_of(a) for a in atoms] for m in fam.members], dtype=float
    )
    u = (rows - base) / np.sqrt(base)
    gram = (u @ u.T) / len(fam.members)
    return float(np.linalg.eigvalsh(gram)[-1])


@pytest.mark.parametrize("d,delta", [(1, 0.3), (2, 0.05), (2, 0.5), (3, 0.1), (4, 0.25)])
def test_hypercube_c2_closed_form(d, delta):
    fam = hypercube_mean_packing(d, delta)
    c2 = complexity_c2(fam)
    assert math.isclose(c2, delta**2 / d, rel_tol=1e-9)
    assert math.isclose(c2, _gram_eigen_oracle(fam), rel_tol=1e-9)


@pytest.mark.parametrize("d,delta", [(1, 0.4), (2, 0.4), (3, 0.2)])
def test_hypercube_cinf_closed_form(d, delta):
    """Parseval over the cube characters caps the sign-vector objective at
    delta^2/d, attained by f = sign(x_j)."""
    fam = hypercube_mean_packing(d, delta)
    assert math.isclose(complexity_cinf(fam), delta**2 / d, rel_tol=1e-9)


def test_power_iteration_matches_eigvalsh():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.standard_normal((6, 6))
        m = a @ a.T
        assert math.isclose(
            power_iteration(m), float(np.linalg.eigvalsh(m)[-1]), rel_tol=1e-9
        )
    assert power_iteration(np.zeros((3, 3))) == 0.0


def test_fk_contraction_sweep_holds():
    reports = fk_contraction_sweep(60, seed=123)
    assert len(reports) == 60
    assert all(r.holds for r in reports)
    assert all(r.slack >= -1e-9 for r in reports)


def test_tensorization_sweep_holds():
    reports = tensorization_sweep(20, seed=321)
    assert all(r.holds for r in reports)


def test_fk_contraction_single_instance_values():
    ch = RandomizedResponseBit(LN3).channel()
    p0 = DiscreteDistribution.bernoulli(0.5)
    p1 = DiscreteDistribution.bernoulli(0.9)
    rep = check_fk_contraction(ch, p0, p1, 2.0)
    assert rep.holds
    # rhs = (2 eps_f2)^2 tv^2 with eps_f2 = sqrt(4/3), tv = 0.4
    assert math.isclose(rep.rhs, 4.0 * (4.0 / 3.0) * 0.16, rel_tol=1e-12)
    assert rep.lhs <= rep.rhs


def test_tensorized_chi_closed_form_rhs():
    chans = [RandomizedResponseBit(1.0).channel()] * 2
    p0s = [DiscreteDistribution.bernoulli(0.5)] * 2
    p1s = [DiscreteDistribution.bernoulli(0.8)] * 2
    rep = check_tensorized_chi(chans, p0s, p1s)
    eps2 = (math.e - 1.0) ** 2 / math.e
    assert math.isclose(rep.rhs, (1.0 + 4.0 * eps2 * 0.09) ** 2 - 1.0, rel_tol=1e-12)
    assert rep.holds


def test_kl_tensor_bound_values():
    b = kl_tensor_bound(1, 1.0, [0.5])
    assert math.isclose(b.tight, math.log(2.0), rel_tol=1e-12)
    assert math.isclose(b.loose, 1.0, rel_tol=1e-12)
    many = kl_tensor_bound(3, 0.7, [0.1, 0.2, 0.3])
    assert many.tight <= many.loose + 1e-12
    with pytest.raises(ValueError):
        kl_tensor_bound(2, 1.0, [0.5])


def test_dobrushin_rr():
    for eps in (0.5, 1.0, LN3):
        ch = RandomizedResponseBit(eps).channel()
        expect = (math.exp(eps) - 1.0) / (math.exp(eps) + 1.0)
        assert math.isclose(dobrushin_coefficient(ch), expect, rel_tol=1e-12)


def test_product_channel_matches_kron():
    a = RandomizedResponseBit(1.0).channel()
    b = RandomizedResponseBit(2.0).channel()
    joint = product_channel([a, b])
    assert joint.inputs[0] == (0, 0)
    assert np.allclose(joint.as_matrix(), np.kron(a.as_matrix(), b.as_matrix()))


def test_big_tensor_chi2_closed_form():
    d, delta, n, eps2 = 3, 0.2, 50, 0.8
    fam = hypercube_mean_packing(d, delta)
    got = big_tensor_bound(fam, n, "chi2", eps2)
    # max_v ||dP_v/dP0||_inf = 1 + delta on the cube
    assert math.isclose(got, n * eps2 * (delta**2 / d) * (1.0 + delta), rel_tol=1e-9)


def test_big_tensor_dp_closed_form():
    d, delta, n, eps = 2, 0.3, 20, 1.0
    fam = hypercube_mean_packing(d, delta)
    got = big_tensor_bound(fam, n, "dp", eps)
    sinh2 = (math.exp(eps / 2.0) - math.exp(-eps / 2.0)) ** 2
    ratio = min(math.exp(eps), 1.0 / (1.0 - delta))
    assert math.isclose(got, n * sinh2 / 4.0 * (delta**2 / d) * ratio, rel_tol=1e-9)


def test_big_tensor_rejects_bad_mode():
    fam = hypercube_mean_packing(2, 0.1)
    with pytest.raises(ValueError):
        big_tensor_bound(fam, 10, "hellinger", 1.0)


def test_sparse_logistic_family_shape():
    fam = sparse_logistic_packing(2, 0.5, 1.0)
    assert len(fam.members) == 4
    for m in fam.members:
        assert math.isclose(sum(m.mass), 1.0, abs_tol=1e-12)
    # conditional mass of y=1 at any x under the base is sigmoid(theta0)
    p = fam.base.prob_of(((1, 1), 1)) / 0.25
    assert math.isclose(p, 1.0 / (1.0 + math.exp(-1.0)), rel_tol=1e-12)


def test_logreg_complexity_caps_measured_c2():
    for theta0 in (0.0, 1.0):
        fam = sparse_logistic_packing(2, 0.5, theta0)
        c2 = complexity_c2(fam, uniform_joint_reference(fam))
        assert c2 <= logreg_complexity_bound(theta0, 0.5, 2) + 1e-9
        assert c2 > 0.0


def test_logreg_complexity_frozen_value():
    got = logreg_complexity_bound(0.0, 0.5, 2)
    a = 0.5 - 1.0 / (1.0 + math.exp(-0.5))
    b = 0.5 - 1.0 / (1.0 + math.exp(0.5))
    assert math.isclose(got, 2.0 * max((a - b) ** 2 / 2.0, (a + b) ** 2), rel_tol=1e-12)
    assert math.isclose(got, 0.05998515119362207, rel_tol=1e-9)


def test_packing_family_validation():
    base = DiscreteDistribution.bernoulli(0.5)
    with pytest.raises(ValueError):
        PackingFamily(base, ())


def test_random_channel_rows_are_proper():
    rng = np.random.default_rng(0)
    ch = random_channel(rng, 3, 4)
    assert np.allclose(ch.as_matrix().sum(axis=1), 1.0)
    assert ch.as_matrix().shape == (3, 4)
