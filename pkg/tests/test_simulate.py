import io

import numpy as np
import pytest
from scipy import stats

from fiberloop.detector import DetectorConfig, outcome_probs, response_matrix
from fiberloop.fock import PhotonDistribution
from fiberloop.simulate import BLOCK_PULSES, EventHistogram, frequencies, sample_events


def test_vacuum_never_clicks(loop3):
    hist = sample_events(PhotonDistribution.vacuum(4), loop3, 1000, seed=3)
    assert hist.counts[0] == 1000
    assert hist.pulses == 1000


def test_single_photon_two_channels_converges():
    cfg = DetectorConfig((0.5, 0.5), (0.5,))
    N = 400_000
    hist = sample_events(PhotonDistribution.fock(1, 1), cfg, N, seed=11)
    f = frequencies(hist)
    target = np.array([0.5, 0.25, 0.25, 0.0])
    sigma = np.sqrt(target * (1 - target) / N)
    assert np.all(np.abs(f - target) <= 4 * sigma)
    assert hist.counts[3] == 0


def test_same_seed_same_histogram(loop3):
    rho = PhotonDistribution.poisson(1.2, 12)
    a = sample_events(rho, loop3, 5000, seed=42)
    b = sample_events(rho, loop3, 5000, seed=42)
    np.testing.assert_array_equal(a.counts, b.counts)
    c = sample_events(rho, loop3, 5000, seed=43)
    assert not np.array_equal(a.counts, c.counts)


def test_worker_count_does_not_change_result(loop3):
    rho = PhotonDistribution.poisson(0.8, 10)
    N = 3 * BLOCK_PULSES + 123
    one = sample_events(rho, loop3, N, seed=5, workers=1)
    many = sample_events(rho, loop3, N, seed=5, workers=4)
    np.testing.assert_array_equal(one.counts, many.counts)


def test_frequencies_examples():
    assert frequencies(EventHistogram([2, 1, 1, 0], 2)).tolist() == [0.5, 0.25, 0.25, 0.0]
    np.testing.assert_array_equal(frequencies(EventHistogram([0, 0, 7, 0], 2)), [0, 0, 1, 0])


def test_million_pulses_match_analytic_model(loop3):
    rho = PhotonDistribution.poisson(1.5, 14)
    N = 1_000_000
    f = frequencies(sample_events(rho, loop3, N, seed=2024))
    p = outcome_probs(response_matrix(loop3, rho.cutoff), rho)
    assert np.max(np.abs(f - p)) < 5e-3
    sigma = np.sqrt(p * (1 - p) / N)
    assert np.all(np.abs(f - p) <= 5 * sigma + 1e-12)


def test_merge_is_commutative_associative_and_weighted(loop3):
    rho = PhotonDistribution.poisson(0.7, 10)
    a = sample_events(rho, loop3, 1000, seed=1)
    b = sample_events(rho, loop3, 3000, seed=2)
    c = sample_events(rho, loop3, 500, seed=3)
    np.testing.assert_array_equal((a + b).counts, (b + a).counts)
    np.testing.assert_array_equal(((a + b) + c).counts, (a + (b + c)).counts)
    merged = frequencies(a + b)
    weighted = (1000 * frequencies(a) + 3000 * frequencies(b)) / 4000
    np.testing.assert_allclose(merged, weighted, rtol=1e-14)
    with pytest.raises(ValueError):
        a + EventHistogram([1, 0], 1)


def test_disjoint_seeds_are_independent(loop3):
    rho = PhotonDistribution.poisson(1.0, 12)
    a = sample_events(rho, loop3, 50_000, seed=100)
    b = sample_events(rho, loop3, 50_000, seed=101)
    table = np.vstack([a.counts, b.counts])
    table = table[:, table.sum(axis=0) > 0]
    _, pvalue, _, _ = stats.chi2_contingency(table)
    assert pvalue > 0.001


def test_csv_round_trip(loop3):
    hist = sample_events(PhotonDistribution.poisson(1.0, 12), loop3, 2000, seed=9)
    text = hist.to_csv()
    assert text.splitlines()[0] == "# pulses=2000 channels=3 seed=9"
    assert text.splitlines()[1].startswith("000,")
    back = EventHistogram.from_csv(io.StringIO(text))
    np.testing.assert_array_equal(back.counts, hist.counts)
    assert back.seed == 9 and back.channels == 3


@pytest.mark.parametrize(
    "text",
    [
        "00,1\n0,2\n",
        "00,1\n00,2\n",
        "0a,1\n",
        "# pulses=5\n00,1\n",
        "# channels=3\n00,1\n",
        "00;1\n",
        "",
    ],
)
def test_csv_rejects_malformed(text):
    with pytest.raises(ValueError):
        EventHistogram.from_csv(io.StringIO(text))


def test_histogram_validation():
    with pytest.raises(ValueError):
        EventHistogram([1, 2, 3], 2)
    with pytest.raises(ValueError):
        EventHistogram([1, -1], 1)
    with pytest.raises(ValueError):
        sample_events(PhotonDistribution.vacuum(1), DetectorConfig((1.0,)), 0, seed=1)
