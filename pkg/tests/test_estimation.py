import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from submed.core import (BasisSpec, BasisTerm, IdentificationError, ObservationTable,
                         SampleSizeError, WeakInstrumentError)
from submed.design import build_design
from submed.estimation import (fit_mediator_ols, fit_outcome_gmm, fit_proposed, fit_traditional,
                               recover_gamma)
from submed.simulation import TREATMENTS, canonical_spec


def gmm_objective_minimizer(phi, L1, alpha, y):
    """Independent route: trust-region Newton on the raw quadratic
    (y - X theta)' Phi Phi' (y - X theta), from a zero start."""
    X = np.column_stack([phi[:, :L1], phi[:, L1:] @ alpha[L1:]])
    W = phi @ phi.T
    H = 2 * X.T @ W @ X
    g0 = X.T @ W @ y

    def f(t):
        r = y - X @ t
        return r @ W @ r

    def jac(t):
        return H @ t - 2 * g0

    res = minimize(f, np.zeros(X.shape[1]), jac=jac, hess=lambda t: H, method="trust-exact",
                   options={"gtol": 1e-12 * np.abs(g0).max(), "maxiter": 500})
    return res.x


def random_instance(seed):
    """Small identifiable problem: n <= 100, L <= 8."""
    rng = np.random.default_rng(seed)
    while True:
        J = int(rng.integers(2, 4))
        names = [f"z{k + 1}" for k in range(J)]
        pool = names + [f"{a}*{b}" for i, a in enumerate(names) for b in names[i + 1:]]
        pool += [f"{a}^2" for a in names]
        k = int(rng.integers(2, min(8, len(pool) + 1)))
        picked = ["1"] + list(rng.choice(pool, size=k - 1, replace=False))
        L = len(picked)
        L1 = int(rng.integers(1, L))
        spec = BasisSpec(tuple(BasisTerm.parse(t) for t in picked), L1)
        n = int(rng.integers(L + 2, 101))
        Z = rng.integers(1, 5, size=(n, J)).astype(float) if rng.random() < 0.5 else rng.normal(size=(n, J))
        m = rng.normal(size=n) + Z.sum(1) + Z[:, 0] * Z[:, 1]
        y = rng.normal(size=n) + m + Z[:, -1]
        data = ObservationTable(tuple(names), Z, m, y)
        try:
            fit_proposed(spec, data)
        except IdentificationError:
            continue
        return spec, data


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gmm_closed_form_matches_numerical_minimizer(seed):
    spec, data = random_instance(seed)
    d = build_design(spec, data)
    alpha = fit_mediator_ols(d, data.mediator)
    delta, beta = fit_outcome_gmm(d, alpha, data.outcome)
    closed = np.append(delta, beta)
    oracle = gmm_objective_minimizer(d.phi, spec.outcome_count, alpha, data.outcome)
    assert np.linalg.norm(closed - oracle) <= 1e-6 * np.linalg.norm(oracle)


def noiseless_data(spec, alpha, gamma, beta, n=60, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.integers(1, 4, size=(n, 3)).astype(float)
    data = ObservationTable(TREATMENTS, Z, np.zeros(n), np.zeros(n))
    phi = build_design(spec, data).phi
    m = phi @ alpha
    y = phi[:, : spec.outcome_count] @ gamma + beta * m
    return ObservationTable(TREATMENTS, Z, m, y)


def test_noiseless_mediator_recovery():
    spec = canonical_spec(1)
    data = noiseless_data(spec, np.ones(7), np.zeros(6), 1.0)
    assert np.allclose(fit_mediator_ols(build_design(spec, data), data.mediator), 1.0, atol=1e-8, rtol=0)


def test_constant_mediator_gives_intercept_only():
    spec = canonical_spec(2)
    data = noiseless_data(spec, np.zeros(7), np.zeros(4), 0.0)
    data = ObservationTable(TREATMENTS, data.treatments, np.full(data.n, 3.25), data.outcome)
    alpha = fit_mediator_ols(build_design(spec, data), data.mediator)
    assert np.allclose(alpha, [3.25, 0, 0, 0, 0, 0, 0], atol=1e-10)


def test_noiseless_outcome_recovery():
    spec = canonical_spec(2)
    alpha = np.array([0.5, 1, -1, 2, 1, 0.5, 1.5])
    gamma, beta = np.array([1.0, -2.0, 0.5, 3.0]), 0.75
    data = noiseless_data(spec, alpha, gamma, beta)
    d = build_design(spec, data)
    delta, b = fit_outcome_gmm(d, fit_mediator_ols(d, data.mediator), data.outcome)
    assert np.allclose(delta, gamma + beta * alpha[:4], atol=1e-8, rtol=0)
    assert abs(b - beta) < 1e-8


def test_recover_gamma_examples():
    assert recover_gamma(np.array([3.0, 3.0]), 1.0, np.array([1.0, 2.0, 9.0])).tolist() == [2.0, 1.0]
    delta = np.array([0.3, -1.2])
    assert recover_gamma(delta, 0.0, np.array([5.0, 6.0, 7.0])).tolist() == delta.tolist()


def test_sim1_mediator_and_beta(sim1_n2000):
    spec = canonical_spec(1)
    fit = fit_proposed(spec, sim1_n2000)
    # 4 x asymptotic OLS standard errors at n = 2000: sqrt(2 diag(E[phi phi']^-1) / n),
    # E[phi phi'] taken from a 200000-row draw
    se = np.array([0.356, 0.140, 0.140, 0.139, 0.0474, 0.0474, 0.0474])
    assert np.all(np.abs(fit.alpha - [0, 1, 1, 1, 1, 1, 1]) <= 4 * se)
    assert abs(fit.beta - 1) <= 0.1
    assert fit.condition_numbers["mediator"] > 1 and fit.condition_numbers["outcome"] > 1


def test_sim2_gamma_at_large_n(sim2_large):
    fit = fit_proposed(canonical_spec(2), sim2_large)
    # n = 20000: SE(gamma_l) is below 0.25 for every coefficient
    assert np.all(np.abs(fit.gamma - [0, 1, 1, 1]) <= 0.5)
    assert abs(fit.beta - 1) <= 0.05


def test_insufficient_sample_size():
    spec = canonical_spec(1)
    data = noiseless_data(spec, np.ones(7), np.zeros(6), 1.0, n=7)
    with pytest.raises(SampleSizeError, match="insufficient sample size"):
        fit_proposed(spec, data)


def test_zero_mediator_aborts_on_weak_instruments(sim1_n500):
    spec = canonical_spec(1)
    data = ObservationTable(TREATMENTS, sim1_n500.treatments, np.zeros(500), sim1_n500.outcome)
    assert np.array_equal(fit_mediator_ols(build_design(spec, data), data.mediator), np.zeros(7))
    with pytest.raises(WeakInstrumentError, match="outcome: weak instruments") as info:
        fit_proposed(spec, data)
    assert info.value.stage == "outcome"


def test_rank_deficient_design_reports_stage():
    spec = canonical_spec(1)
    Z = np.tile([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [3.0, 1.0, 2.0]], (10, 1))
    data = ObservationTable(TREATMENTS, Z, np.arange(30.0), np.arange(30.0))
    with pytest.raises(IdentificationError, match="^validate: basis not linearly independent"):
        fit_proposed(spec, data)


def test_traditional_consistent_without_confounding():
    rng = np.random.default_rng(42)
    n = 5000
    Z = rng.integers(1, 4, (n, 3)).astype(float)
    z1, z2, z3 = Z.T
    m = z1 + z2 + z3 + z1 * z2 + z1 * z3 + z2 * z3 + rng.normal(size=n)
    y = z1 + z2 + z3 + m + z1 * z2 + z1 * z3 + rng.normal(size=n)
    data = ObservationTable(TREATMENTS, Z, m, y)
    spec = canonical_spec(1)
    assert abs(fit_traditional(spec, data).beta - fit_proposed(spec, data).beta) <= 0.05


def test_traditional_biased_under_confounding(sim1_n2000):
    spec = canonical_spec(1)
    trad = fit_traditional(spec, sim1_n2000)
    # probability limit 1 + 2 / (4/9 + 2) = 1.818
    assert trad.beta - 1 >= 0.5
    assert np.array_equal(trad.alpha, fit_proposed(spec, sim1_n2000).alpha)


def test_determinism(sim1_n500):
    a = fit_proposed(canonical_spec(1), sim1_n500)
    b = fit_proposed(canonical_spec(1), sim1_n500)
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("c", [0.5, 3.0, 1024.0])
def test_scale_equivariance(sim1_n500, c):
    spec = canonical_spec(1)
    base = fit_proposed(spec, sim1_n500)
    ys = ObservationTable(TREATMENTS, sim1_n500.treatments, sim1_n500.mediator, c * sim1_n500.outcome)
    fy = fit_proposed(spec, ys)
    for got, want in ((fy.delta, base.delta), (fy.gamma, base.gamma), ([fy.beta], [base.beta])):
        np.testing.assert_allclose(got, c * np.asarray(want), rtol=1e-10, atol=1e-10)
    ty, tb = fit_traditional(spec, ys), fit_traditional(spec, sim1_n500)
    np.testing.assert_allclose(ty.gamma, c * tb.gamma, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(ty.beta, c * tb.beta, rtol=1e-10)

    ms = ObservationTable(TREATMENTS, sim1_n500.treatments, c * sim1_n500.mediator, sim1_n500.outcome)
    fm = fit_proposed(spec, ms)
    np.testing.assert_allclose(fm.alpha, c * base.alpha, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(fm.beta, base.beta / c, rtol=1e-10)
    np.testing.assert_allclose(fm.beta * fm.alpha, base.beta * base.alpha, rtol=1e-10, atol=1e-10)


@given(st.permutations(list(range(40))))
@settings(max_examples=25, deadline=None)
def test_row_permutation_invariance(perm):
    rng = np.random.default_rng(7)
    Z = rng.integers(1, 4, (40, 3)).astype(float)
    m = Z.sum(1) + Z[:, 1] * Z[:, 2] + rng.normal(size=40)
    data = ObservationTable(TREATMENTS, Z, m, m + rng.normal(size=40))
    spec = canonical_spec(1)
    a, b = fit_proposed(spec, data), fit_proposed(spec, data.take(np.array(perm)))
    for x, y in ((a.alpha, b.alpha), (a.delta, b.delta), (a.gamma, b.gamma), ([a.beta], [b.beta])):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)
