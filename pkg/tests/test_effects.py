import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from submed.core import (BasisSpec, BasisTerm, ConfigurationError, EffectContrast, FittedMediation,
                         ObservationTable)
from submed.effects import (average_effects, conditional_effects, effect_table, predict_gm,
                            predict_gy)
from submed.estimation import fit_proposed, fit_traditional
from submed.simulation import TREATMENTS, canonical_spec, true_fit


def dgp_gm(z1, z2, z3):
    return z1 + z2 + z3 + z1 * z2 + z1 * z3 + z2 * z3


def dgp_gy(study, z1, z2, z3):
    return z1 + z2 + z3 + (z1 * z2 + z1 * z3 if study == 1 else 0)


def zero_fit():
    spec = canonical_spec(1)
    return FittedMediation(spec, np.zeros(7), 0.0, np.zeros(6), np.zeros(6), 0, TREATMENTS)


def test_predict_gm_examples():
    assert predict_gm(zero_fit(), (3, 1, 2)) == 0
    fit = true_fit(1)
    assert predict_gm(fit, (1, 1, 1)) == 6
    assert predict_gm(fit, (2, 1, 1)) == 9


def test_predict_gy_examples():
    assert predict_gy(zero_fit(), (3, 1, 2)) == 0
    assert predict_gy(true_fit(1), (2, 2, 2)) == 14
    assert predict_gy(true_fit(2), (3, 1, 2)) == 6


@pytest.mark.parametrize("study", [1, 2])
@pytest.mark.parametrize("z", [(1, 2, 3), (3, 3, 1), (2, 1, 2)])
def test_predictions_match_dgp(study, z):
    fit = true_fit(study)
    assert predict_gm(fit, z) == dgp_gm(*z)
    assert predict_gy(fit, z) == dgp_gy(study, *z)


def brute_conditional(study, j, hi, lo, others):
    """Evaluate the generating polynomials at the two profiles."""
    zh, zl = list(others), list(others)
    zh.insert(j, hi)
    zl.insert(j, lo)
    cnde = dgp_gy(study, *zh) - dgp_gy(study, *zl)
    cnie = 1.0 * (dgp_gm(*zh) - dgp_gm(*zl))
    return cnde, cnie, cnde + cnie


def test_conditional_examples():
    est = conditional_effects(true_fit(1), EffectContrast(0, 2, 1, (2, 2)))
    assert est.values() == (5, 5, 10) == brute_conditional(1, 0, 2, 1, (2, 2))
    est = conditional_effects(true_fit(2), EffectContrast(1, 3, 1, (1, 1)))
    assert est.values() == brute_conditional(2, 1, 3, 1, (1, 1)) == (2, 6, 8)
    assert conditional_effects(true_fit(1), EffectContrast(2, 2, 2, (1, 3))).values() == (0, 0, 0)


def test_conditional_requires_all_other_coordinates():
    with pytest.raises(ConfigurationError):
        conditional_effects(true_fit(1), EffectContrast(0, 2, 1, (2,)))
    with pytest.raises(ConfigurationError):
        conditional_effects(true_fit(1), EffectContrast(0, 2, 1))


@pytest.mark.parametrize("study,j,expected", [
    (1, 0, (5, 5, 10)), (1, 1, (3, 5, 8)), (1, 2, (3, 5, 8)),
    (2, 0, (1, 5, 6)), (2, 1, (1, 5, 6)), (2, 2, (1, 5, 6)),
])
def test_average_effects_on_exact_uniform_design(uniform_grid_table, study, j, expected):
    est = average_effects(true_fit(study), uniform_grid_table, EffectContrast(j, 2, 1))
    assert np.allclose(est.values(), expected, atol=1e-12)


def test_average_null_contrast(uniform_grid_table):
    assert average_effects(true_fit(1), uniform_grid_table, EffectContrast(1, 3, 3)).values() == (0, 0, 0)


def test_effect_table(uniform_grid_table):
    fit = true_fit(1)
    rows = effect_table(fit, uniform_grid_table, [EffectContrast(j, 2, 1) for j in range(3)])
    assert [tuple(np.round(r.values(), 12)) for r in rows] == [(5, 5, 10), (3, 5, 8), (3, 5, 8)]
    c = EffectContrast(0, 3, 1, (1, 1))
    a, b = effect_table(fit, None, [c, c])
    assert a == b
    assert effect_table(fit, None, [EffectContrast(0, 1, 1, (2, 2))])[0].values() == (0, 0, 0)
    with pytest.raises(ConfigurationError, match="z1"):
        effect_table(fit, None, [EffectContrast(0, 2, 1)])
    with pytest.raises(ConfigurationError):
        effect_table(fit, uniform_grid_table, [])


@pytest.fixture(scope="module")
def fitted(request):
    from submed.simulation import StudyDGP, generate_study_dataset
    data = generate_study_dataset(StudyDGP(1, 300, seed=21))
    return fit_proposed(canonical_spec(1), data), fit_traditional(canonical_spec(1), data), data


levels = st.sampled_from([0.0, 1.0, 1.5, 2.0, 3.0, -1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2), levels, levels, levels)
def test_decomposition_antisymmetry_chaining(fitted, j, a, b, c):
    for fit in fitted[:2]:
        data = fitted[2]
        ab = average_effects(fit, data, EffectContrast(j, a, b))
        ba = average_effects(fit, data, EffectContrast(j, b, a))
        assert ab.te == ab.nde + ab.nie
        assert ba.values() == tuple(-v for v in ab.values())
        bc = average_effects(fit, data, EffectContrast(j, b, c))
        ac = average_effects(fit, data, EffectContrast(j, a, c))
        assert np.allclose(np.add(ab.values(), bc.values()), ac.values(), rtol=0, atol=1e-12 * 50)
        cond = EffectContrast(j, a, b, (2.0, 1.0))
        cab, cba = conditional_effects(fit, cond), conditional_effects(fit, cond.swapped())
        assert cab.te == cab.nde + cab.nie
        assert cba.values() == tuple(-v for v in cab.values())


@pytest.mark.parametrize("j", [0, 1, 2])
def test_average_equals_mean_of_conditionals(fitted, j):
    fit, _, data = fitted
    avg = average_effects(fit, data, EffectContrast(j, 3, 1))
    rows = []
    for z in data.treatments:
        others = tuple(np.delete(z, j))
        rows.append(conditional_effects(fit, EffectContrast(j, 3, 1, others)).values())
    assert np.allclose(avg.values(), np.mean(rows, axis=0), rtol=0, atol=1e-12)


def test_treatment_absent_from_basis_has_zero_effects():
    spec = BasisSpec(tuple(BasisTerm.parse(t) for t in ["1", "z1", "z2", "z1*z2"]), 3)
    fit = FittedMediation(spec, np.array([1.0, 2.0, 3.0, 4.0]), 0.5, np.array([1.0, 1.0, 1.5]),
                          np.array([0.5, 0.0, 0.0]), 10, TREATMENTS)
    rng = np.random.default_rng(0)
    data = ObservationTable(TREATMENTS, rng.integers(1, 4, (20, 3)), np.zeros(20), np.zeros(20))
    assert average_effects(fit, data, EffectContrast(2, 3, 1)).values() == (0, 0, 0)


def test_average_effects_rejects_mismatched_data(uniform_grid_table):
    fit = true_fit(1)
    other = ObservationTable(("a", "b", "c"), uniform_grid_table.treatments,
                             uniform_grid_table.mediator, uniform_grid_table.outcome)
    with pytest.raises(ConfigurationError, match="differ"):
        average_effects(fit, other, EffectContrast(0, 2, 1))
