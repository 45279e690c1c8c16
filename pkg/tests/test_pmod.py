import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import INTERVAL_MASS_05_02, PHI_0_1414213562, PMOD, phi_series
from vqualkit.errors import InvalidDistribution, InvalidSummary
from vqualkit.fusion import OpinionSummary
from vqualkit.pmod import (
    MIDPOINTS,
    MU_CLAMP,
    TAIL_BAND,
    PairLabel,
    Pmod,
    QualityLevel,
    build_pmod,
    expected_score,
    gaussian_interval_mass,
    level_of,
    pairwise_label,
    pairwise_prob,
    pairwise_prob_unit,
    reachable_target,
    std_normal_cdf,
)


def S(mu, sigma, item="x"):
    return OpinionSummary(item, mu, sigma, 6)


def test_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(40.0) == 1.0
    assert std_normal_cdf(-40.0) == 0.0
    assert abs(std_normal_cdf(0.1414213562) - PHI_0_1414213562) < 1e-12


def test_cdf_against_series():
    for x in np.linspace(-8, 8, 33):
        assert abs(std_normal_cdf(x) - phi_series(x)) < 1e-12


def test_interval_mass():
    assert gaussian_interval_mass(0.5, 1.0, -math.inf, math.inf) == 1.0
    assert abs(gaussian_interval_mass(0.5, 0.2, 0.4, 0.6) - INTERVAL_MASS_05_02) < 1e-12
    assert gaussian_interval_mass(0.5, 0.3, 0.5, 0.5 + 1e-12) < 1e-11


def test_level_of_boundaries():
    assert level_of(0.0) is QualityLevel.LOW
    assert level_of(0.2) is QualityLevel.POOR
    assert level_of(0.59999) is QualityLevel.FAIR
    assert level_of(0.8) is QualityLevel.HIGH
    assert level_of(1.0) is QualityLevel.HIGH
    with pytest.raises(InvalidSummary):
        level_of(1.01)
    assert QualityLevel.GOOD.bounds == (0.6, 0.8)
    assert [lv.label for lv in QualityLevel] == ["low", "poor", "fair", "good", "high"]


def test_pmod_point_mass():
    probs = build_pmod(S(0.5, 1e-9)).probs
    np.testing.assert_allclose(probs, [0, 0, 1, 0, 0], atol=1e-12)


def test_pmod_symmetric():
    p = build_pmod(S(0.5, 0.2)).probs
    assert p[0] == pytest.approx(p[4], abs=1e-15)
    assert p[1] == pytest.approx(p[3], abs=1e-15)
    assert abs(np.dot(p, MIDPOINTS) - 0.5) < 1e-12


@pytest.mark.parametrize("key", sorted(PMOD))
def test_pmod_matches_oracle(key):
    probs = build_pmod(S(*key)).probs
    np.testing.assert_allclose(probs, PMOD[key], rtol=1e-10, atol=1e-15)


def test_pmod_small_sigma_between_midpoints():
    p = build_pmod(S(0.75, 1e-6)).probs
    np.testing.assert_allclose(p, [0, 0, 0, 0.75, 0.25], atol=1e-12)


def test_pmod_clamps_target():
    lo, hi = MU_CLAMP
    assert build_pmod(S(0.0, 0.1)).target_mu == lo
    assert build_pmod(S(1.0, 0.1)).target_mu == hi
    with pytest.raises(InvalidSummary):
        build_pmod(S(1.2, 0.1))


def test_reachable_target_strictly_increasing():
    mus = np.concatenate([np.linspace(0, 0.11, 500), np.linspace(0.89, 1, 500)])
    t = np.array([reachable_target(m) for m in mus])
    assert np.all(np.diff(t) > 0)
    assert t.min() >= MU_CLAMP[0] and t.max() <= MU_CLAMP[1]
    inside = (mus >= MU_CLAMP[0]) & (mus <= MU_CLAMP[1])
    assert np.abs(t - mus)[inside].max() <= TAIL_BAND
    assert reachable_target(0.5) == 0.5


def test_pmod_scores_keep_tail_order():
    mus = [0.0, 0.01, 0.05, 0.0999, 0.1, 0.5, 0.9, 0.95, 0.999, 1.0]
    scores = [expected_score(build_pmod(S(m, 0.05)).probs) for m in mus]
    assert all(a < b for a, b in zip(scores, scores[1:]))


@settings(max_examples=300, deadline=None)
@given(mu=st.floats(0.0, 1.0), sigma=st.floats(0.0, 0.6))
def test_pmod_invariants_property(mu, sigma):
    pm = build_pmod((mu, sigma))
    p = np.asarray(pm.probs)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1) <= 1e-9
    target = min(max(mu, MU_CLAMP[0]), MU_CLAMP[1])
    assert abs(float(p @ MIDPOINTS) - target) <= 1e-6
    assert abs(expected_score(p) - (reachable_target(mu) - 0.1) / 0.8) < 1e-9


def test_pmod_type_validation():
    with pytest.raises(InvalidDistribution):
        Pmod((0.5, 0.5, 0, 0, 0.1), 0.2)
    with pytest.raises(InvalidDistribution):
        Pmod((0, 0, 1, 0, 0), 0.7)
    pm = build_pmod(S(0.75, 0.15))
    assert Pmod.from_dict(pm.to_dict()) == pm


def test_expected_score():
    assert expected_score([0, 0, 0, 0, 1]) == 1.0
    assert expected_score([0.2] * 5) == 0.5
    assert expected_score([0.1, 0.2, 0.4, 0.2, 0.1]) == 0.5
    with pytest.raises(InvalidDistribution):
        expected_score([0.5, 0.6, 0, 0, 0])


def test_pairwise_prob():
    assert pairwise_prob(0.3, 0.2, 0.3, 0.5) == 0.5
    assert abs(pairwise_prob(0.7, 1, 0.5, 1) - PHI_0_1414213562) < 1e-6
    assert pairwise_prob_unit(0.7, 0.5) == pairwise_prob(0.7, 1, 0.5, 1)
    with pytest.raises(InvalidSummary):
        pairwise_prob(0.1, 0.0, 0.2, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 3), st.floats(-5, 5), st.floats(0.01, 3))
def test_pairwise_antisymmetry(m1, s1, m2, s2):
    assert abs(pairwise_prob(m1, s1, m2, s2) + pairwise_prob(m2, s2, m1, s1) - 1) < 1e-12


def test_pairwise_label_cases():
    assert pairwise_label(S(0.8, 0.1), S(0.2, 0.1)).p_true == 1.0
    assert pairwise_label(S(0.2, 0.1), S(0.8, 0.1)).p_true == 0.0
    assert pairwise_label(S(0.5, 0.1), S(0.45, 0.1)).p_true == 0.5
    # gap exactly equal to the combined std is a tie
    assert pairwise_label(S(0.75, 0.5), S(0.25, 0.0)).p_true == 0.5


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 0.5), st.floats(0, 1), st.floats(0, 0.5))
def test_pairwise_label_mirror(m1, s1, m2, s2):
    a, b = S(m1, s1), S(m2, s2)
    assert pairwise_label(a, b) == pairwise_label(b, a).mirrored()


def test_pair_label_validation():
    with pytest.raises(InvalidDistribution):
        PairLabel(0.3)
    assert PairLabel.from_dict(PairLabel(0.5).to_dict()) == PairLabel(0.5)
