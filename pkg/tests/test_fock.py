import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberloop.fock import (
    IntensityLaw,
    PhotonDistribution,
    TruncationWarning,
    hs_distance,
    photon_number_probs,
    poisson_transform,
    truncated_state,
)


def test_delta_law_is_poisson_before_renormalization():
    raw = photon_number_probs(IntensityLaw.delta(0.6), 10)
    assert raw[0] == pytest.approx(math.exp(-0.6), abs=1e-15)
    assert raw[0] == pytest.approx(0.548812, abs=5e-7)
    n = np.arange(11)
    expected = [0.6**k * math.exp(-0.6) / math.factorial(k) for k in n]
    np.testing.assert_allclose(raw, expected, rtol=1e-13)


def test_exponential_law_vacuum_term():
    rho = poisson_transform(IntensityLaw.exponential(2.1), 200)
    assert rho.probs[0] == pytest.approx(1 / 3.1, abs=1e-13)
    assert rho.probs[0] == pytest.approx(0.322581, abs=5e-7)


def test_vacuum_law():
    rho = poisson_transform(IntensityLaw.delta(0.0), 7)
    np.testing.assert_array_equal(rho.probs, np.eye(8)[0])
    assert rho.tail_mass == 0.0


def test_two_delta_defaults_to_equal_weights():
    law = IntensityLaw.two_delta(0.94, 4.6)
    assert law.params["weight"] == 0.5
    mix = photon_number_probs(law, 30)
    a = photon_number_probs(IntensityLaw.delta(0.94), 30)
    b = photon_number_probs(IntensityLaw.delta(4.6), 30)
    np.testing.assert_allclose(mix, 0.5 * a + 0.5 * b, rtol=1e-14)


def test_two_delta_unit_weight_equals_delta():
    for i1 in (0.0, 0.3, 4.6):
        a = poisson_transform(IntensityLaw.two_delta(i1, 2.0, 1.0), 40)
        b = poisson_transform(IntensityLaw.delta(i1), 40)
        np.testing.assert_array_equal(a.probs, b.probs)


@pytest.mark.parametrize("mean", [0.5, 2.1, 5.0])
def test_exponential_quadrature_matches_bose_einstein(mean):
    closed = photon_number_probs(IntensityLaw.exponential(mean), 40)
    n = np.arange(41)
    np.testing.assert_allclose(closed, mean**n / (1 + mean) ** (n + 1), rtol=1e-12, atol=0)
    quad = photon_number_probs(IntensityLaw.exponential(mean), 40, method="quadrature")
    assert np.max(np.abs(quad - closed)) < 1e-10


def test_uniform_closed_form_against_quadrature():
    law = IntensityLaw.uniform(2.0, 1.2)
    closed = photon_number_probs(law, 25)
    quad = photon_number_probs(law, 25, method="quadrature")
    assert np.max(np.abs(closed - quad)) < 1e-12


def test_uniform_zero_width_is_delta():
    a = photon_number_probs(IntensityLaw.uniform(1.5, 0.0), 12)
    b = photon_number_probs(IntensityLaw.delta(1.5), 12)
    np.testing.assert_allclose(a, b, rtol=1e-14)


def test_quadrature_rejected_for_discrete_laws():
    with pytest.raises(ValueError):
        photon_number_probs(IntensityLaw.delta(1.0), 5, method="quadrature")


def test_truncation_warning_and_tail_mass():
    with pytest.warns(TruncationWarning):
        rho = poisson_transform(IntensityLaw.delta(4.6), 5)
    raw = photon_number_probs(IntensityLaw.delta(4.6), 5)
    assert rho.tail_mass == pytest.approx(1 - raw.sum(), rel=1e-12)
    np.testing.assert_allclose(rho.probs, raw / raw.sum(), rtol=1e-14)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        poisson_transform(IntensityLaw.delta(0.6), 12)


@pytest.mark.parametrize(
    "make",
    [
        lambda: IntensityLaw.delta(-0.1),
        lambda: IntensityLaw.two_delta(1.0, 2.0, 1.5),
        lambda: IntensityLaw.uniform(1.0, 1.2),
        lambda: IntensityLaw.exponential(float("nan")),
        lambda: IntensityLaw("gaussian", {"mean": 1.0}),
    ],
)
def test_invalid_laws_rejected(make):
    with pytest.raises(ValueError):
        make()


def test_negative_cutoff_rejected():
    with pytest.raises(ValueError):
        poisson_transform(IntensityLaw.delta(1.0), -1)


laws = st.one_of(
    st.builds(IntensityLaw.delta, st.floats(0, 8)),
    st.builds(IntensityLaw.two_delta, st.floats(0, 8), st.floats(0, 8), st.floats(0, 1)),
    st.builds(
        lambda c, f: IntensityLaw.uniform(c, c * f),
        st.floats(0, 8), st.floats(0, 1),
    ),
    st.builds(IntensityLaw.exponential, st.floats(0, 5)),
)


@settings(max_examples=200, deadline=None)
@given(laws, st.integers(0, 40))
def test_transform_output_is_a_distribution(law, cutoff):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        rho = poisson_transform(law, cutoff)
    assert np.all(rho.probs >= 0)
    assert abs(rho.probs.sum() - 1) < 1e-12
    assert 0 <= rho.tail_mass <= 1


def test_hs_distance_examples():
    a = PhotonDistribution([0.9, 0.1])
    assert hs_distance(a, a) == 0
    assert hs_distance(PhotonDistribution([1, 0]), PhotonDistribution([0, 1])) == 2
    assert hs_distance(a, PhotonDistribution([0.8, 0.2])) == pytest.approx(0.02, abs=1e-15)


def test_hs_distance_cutoff_mismatch():
    with pytest.raises(ValueError):
        hs_distance(PhotonDistribution.vacuum(2), PhotonDistribution.vacuum(3))


simplex = st.integers(1, 8).flatmap(
    lambda k: st.lists(st.floats(0.0, 1.0), min_size=k + 1, max_size=k + 1).filter(lambda v: sum(v) > 0)
)


@given(simplex, simplex)
def test_hs_distance_metric_properties(u, v):
    if len(u) != len(v):
        return
    a = PhotonDistribution(np.array(u) / sum(u))
    b = PhotonDistribution(np.array(v) / sum(v))
    d = hs_distance(a, b)
    assert d >= 0
    assert d == hs_distance(b, a)
    assert (d == 0) == np.array_equal(a.probs, b.probs)


def test_truncated_state_examples():
    np.testing.assert_allclose(truncated_state(0.9, 0.1).probs, [0.0, 0.9, 0.1], atol=1e-16)
    np.testing.assert_array_equal(truncated_state(0, 0).probs, [1, 0, 0])
    np.testing.assert_allclose(truncated_state(0.998, 0.002).probs, [0.0, 0.998, 0.002], atol=1e-16)


@pytest.mark.parametrize("r1,r2", [(0.98, 0.2), (-0.1, 0.5), (0.5, -0.01)])
def test_truncated_state_rejects_invalid(r1, r2):
    with pytest.raises(ValueError):
        truncated_state(r1, r2)


def test_distribution_validation():
    with pytest.raises(ValueError):
        PhotonDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        PhotonDistribution([1.1, -0.1])
    rho = PhotonDistribution([0.25, 0.75])
    assert rho.cutoff == 1
    assert rho.mean() == 0.75
    with pytest.raises(ValueError):
        rho.probs[0] = 1.0


def test_law_serialization_round_trip():
    for law in (IntensityLaw.delta(4.6), IntensityLaw.two_delta(0.94, 4.6),
                IntensityLaw.uniform(2.0, 1.2), IntensityLaw.exponential(2.1)):
        assert IntensityLaw.from_dict(law.to_dict()) == law


def test_narrow_uniform_is_continuous_across_branches():
    a = photon_number_probs(IntensityLaw.uniform(2.0, 1.0001e-4), 20)
    b = photon_number_probs(IntensityLaw.uniform(2.0, 0.9999e-4), 20)
    q = photon_number_probs(IntensityLaw.uniform(2.0, 0.9999e-4), 20, method="quadrature")
    assert np.max(np.abs(a - b)) < 1e-11
    assert np.max(np.abs(b - q)) < 1e-12
