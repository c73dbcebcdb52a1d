import math

import numpy as np
import pytest

from apermimo.arrays import regular_layout
from apermimo.engine import ScenarioConfig
from apermimo.synthesis import (
    MIN_SEPARATION,
    CumulativeDistribution,
    DegenerateProfileError,
    DensityProfile,
    cumulative_density,
    density_taper,
    invert_cumulative,
    reference_profile,
    synthesize_aperiodic,
)


def _uniform_profile(x_max=7.0, n=64):
    x = np.linspace(0.0, x_max, n)
    return DensityProfile(positions=x, values=np.ones(n))


def _ramp_profile(n=4_097):
    x = np.linspace(0.0, 1.0, n)
    return DensityProfile(positions=x, values=x.copy())


def _scan_invert(profile: DensityProfile, targets, n_scan=1_000_001):
    """Brute-force inversion through a dense scan of the cumulative.

    Trapezoid cumulative on a fine grid, then linear interpolation inside
    the bracketing grid cell; accurate well below the grid pitch because
    the cumulative is smooth.
    """
    x = np.linspace(0.0, profile.x_max, n_scan)
    mu = np.interp(x, profile.positions, profile.values)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (mu[1:] + mu[:-1]) * np.diff(x))))
    out = []
    for t in np.asarray(targets) * cum[-1]:
        j = int(np.searchsorted(cum, t, side="left"))
        if j == 0:
            out.append(x[0])
            continue
        frac = (t - cum[j - 1]) / (cum[j] - cum[j - 1])
        out.append(x[j - 1] + frac * (x[j] - x[j - 1]))
    return np.asarray(out)


# ----------------------------------------------------------- cumulative


def test_cumulative_of_uniform_density():
    cum = cumulative_density(_uniform_profile())
    assert cum.total == pytest.approx(7.0, abs=1e-12)
    for x in (0.0, 1.3, 3.5, 7.0):
        assert cum.evaluate(x) == pytest.approx(x, abs=1e-12)


def test_cumulative_of_ramp_density():
    cum = cumulative_density(_ramp_profile())
    assert cum.total == pytest.approx(0.5, abs=1e-9)
    assert cum.evaluate(0.6) == pytest.approx(0.18, abs=1e-9)


def test_cumulative_matches_fine_quadrature():
    rng = np.random.default_rng(23)
    x = np.concatenate(([0.0], np.sort(rng.uniform(0.0, 7.0, 30)), [7.0]))
    v = rng.uniform(0.1, 2.0, x.size)
    profile = DensityProfile(positions=x, values=v)
    cum = cumulative_density(profile)
    grid = np.linspace(0.0, 7.0, 1_000_001)
    mu = np.interp(grid, x, v)
    oracle = np.trapezoid(mu, grid)
    assert cum.total == pytest.approx(oracle, rel=1e-8)


def test_profile_validation():
    with pytest.raises(ValueError):
        DensityProfile(positions=np.array([0.1, 1.0]), values=np.ones(2))
    with pytest.raises(ValueError):
        DensityProfile(positions=np.array([0.0, 1.0, 0.5]), values=np.ones(3))
    with pytest.raises(ValueError):
        DensityProfile(positions=np.array([0.0, 1.0]), values=np.array([-0.1, 1.0]))
    with pytest.raises(DegenerateProfileError):
        DensityProfile(positions=np.array([0.0, 1.0]), values=np.zeros(2))


# ------------------------------------------------------------- inversion


def test_invert_uniform_is_identity():
    cum = cumulative_density(_uniform_profile())
    assert invert_cumulative(cum, 3.5) == pytest.approx(3.5, abs=1e-12)
    assert invert_cumulative(cum, 0.0) == 0.0
    assert invert_cumulative(cum, 7.0) == pytest.approx(7.0, abs=1e-12)


def test_invert_ramp_closed_form():
    # i(x) = x^2 / 2 with total 0.5, so the preimage of 0.25 is 1/sqrt(2)
    cum = cumulative_density(_ramp_profile())
    x = invert_cumulative(cum, 0.25)
    assert x == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-6)


def test_invert_plateau_leftmost():
    profile = DensityProfile(
        positions=np.array([0.0, 1.0, 1.0 + 1e-9, 2.0, 2.0 + 1e-9, 3.0]),
        values=np.array([1.0, 1.0, 0.0, 0.0, 1.0, 1.0]),
    )
    cum = cumulative_density(profile)
    assert invert_cumulative(cum, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_invert_out_of_range():
    cum = cumulative_density(_uniform_profile())
    with pytest.raises(ValueError):
        invert_cumulative(cum, -0.1)
    with pytest.raises(ValueError):
        invert_cumulative(cum, cum.total + 0.1)


def test_invert_roundtrip_tolerance():
    rng = np.random.default_rng(24)
    x = np.concatenate(([0.0], np.sort(rng.uniform(0.0, 5.0, 40)), [5.0]))
    v = rng.uniform(0.0, 3.0, x.size)
    v[0] = 0.5
    profile = DensityProfile(positions=x, values=v)
    cum = cumulative_density(profile)
    for frac in rng.uniform(0.0, 1.0, 200):
        target = frac * cum.total
        pos = invert_cumulative(cum, target)
        assert abs(float(cum.evaluate(pos)) - target) <= 1e-10 * cum.total


# ---------------------------------------------------------- density taper


def test_taper_uniform_recovers_regular_grid():
    layout = density_taper(_uniform_profile(), 8)
    np.testing.assert_allclose(layout.positions, np.arange(8.0), atol=1e-9)
    assert layout.positions[0] == 0.0
    assert layout.positions[-1] == 7.0


def test_taper_ramp_three_elements():
    layout = density_taper(_ramp_profile(), 3)
    np.testing.assert_allclose(
        layout.positions, [0.0, 1.0 / math.sqrt(2.0), 1.0], atol=1e-5
    )


def test_taper_matches_dense_scan_oracle():
    # triangular density, peak at the aperture center
    x = np.linspace(0.0, 7.0, 201)
    v = 1.0 + 4.0 * np.minimum(x, 7.0 - x) / 7.0
    profile = DensityProfile(positions=x, values=v)
    m = 16
    layout = density_taper(profile, m)
    oracle = _scan_invert(profile, np.arange(m) / (m - 1))
    np.testing.assert_allclose(layout.positions, oracle, atol=1e-6)


def test_taper_random_profiles_against_scan():
    rng = np.random.default_rng(25)
    for _ in range(5):
        x = np.concatenate(([0.0], np.sort(rng.uniform(0.0, 7.0, 25)), [7.0]))
        v = rng.uniform(0.05, 2.0, x.size)
        profile = DensityProfile(positions=x, values=v)
        m = int(rng.integers(4, 12))
        layout = density_taper(profile, m)
        oracle = _scan_invert(profile, np.arange(m) / (m - 1))
        np.testing.assert_allclose(layout.positions, oracle, atol=1e-6)


def test_taper_scale_invariance():
    x = np.linspace(0.0, 7.0, 101)
    v = 1.0 + np.sin(x) ** 2
    a = density_taper(DensityProfile(positions=x, values=v), 9)
    b = density_taper(DensityProfile(positions=x, values=250.0 * v), 9)
    np.testing.assert_allclose(a.positions, b.positions, atol=1e-12)


def test_taper_equal_mass_between_elements():
    rng = np.random.default_rng(26)
    x = np.concatenate(([0.0], np.sort(rng.uniform(0.0, 7.0, 50)), [7.0]))
    v = rng.uniform(0.1, 2.0, x.size)
    profile = DensityProfile(positions=x, values=v)
    m = 10
    layout = density_taper(profile, m)
    cum = cumulative_density(profile)
    masses = np.diff(cum.evaluate(layout.positions))
    np.testing.assert_allclose(
        masses, cum.total / (m - 1), atol=1e-9 * cum.total
    )


def test_taper_center_heavy_density_packs_center():
    x = np.linspace(0.0, 7.0, 301)
    v = 0.2 + np.exp(-((x - 3.5) ** 2))
    layout = density_taper(DensityProfile(positions=x, values=v), 8)
    gaps = np.diff(layout.positions)
    assert gaps[3] < gaps[0]
    assert gaps[3] < gaps[-1]


def test_taper_min_separation_enforced_with_warning():
    # nearly all mass inside a 0.02-wavelength sliver around the center
    x = np.array([0.0, 3.49, 3.5, 3.51, 7.0])
    v = np.array([1e-6, 1e-6, 1e4, 1e-6, 1e-6])
    profile = DensityProfile(positions=x, values=v)
    with pytest.warns(RuntimeWarning):
        layout = density_taper(profile, 8)
    assert np.all(np.diff(layout.positions) >= MIN_SEPARATION - 1e-12)
    assert layout.positions[0] == 0.0
    assert layout.positions[-1] == 7.0


def test_taper_rejects_tiny_m():
    with pytest.raises(ValueError):
        density_taper(_uniform_profile(), 1)


def test_taper_impossible_separation():
    x = np.linspace(0.0, 0.2, 11)
    profile = DensityProfile(positions=x, values=np.exp(-50 * x))
    with pytest.raises(ValueError):
        density_taper(profile, 9)


# ----------------------------------------------- environment-driven design


def test_reference_profile_warns_on_few_realizations():
    sc = ScenarioConfig(M=2, K=1, waves_per_ue=1, realizations=100, master_seed=7)
    with pytest.warns(RuntimeWarning, match="realizations"):
        profile = reference_profile(sc, dense_oversampling=2, realizations=2_000)
    assert profile.positions.size == int(round(sc.aperture * 2)) + 1
    assert profile.x_max == pytest.approx(sc.aperture)


def test_reference_oversampling_validation():
    sc = ScenarioConfig(M=2, K=1)
    with pytest.raises(ValueError):
        reference_profile(sc, dense_oversampling=1, realizations=20_000)


@pytest.fixture(scope="module")
def rimp_reference():
    """Dense reference run in rich multipath over an 8-element aperture."""
    sc = ScenarioConfig(M=8, K=2, waves_per_ue=20, realizations=100_000, master_seed=20260818)
    return reference_profile(sc, dense_oversampling=8, realizations=100_000)


def test_rich_multipath_profile_symmetric(rimp_reference):
    mu = rimp_reference.values
    folded = 0.5 * (mu + mu[::-1])
    assert np.max(np.abs(mu - mu[::-1]) / folded) <= 0.02


def test_rich_multipath_synthesis_stays_regular(rimp_reference):
    """Statistically uniform illumination must not move elements far off
    the equispaced grid."""
    layout = density_taper(rimp_reference, 8)
    regular = regular_layout(8, 7.0)
    assert np.max(np.abs(layout.positions - regular.positions)) <= 0.15


def test_synthesize_aperiodic_wraps_taper():
    sc = ScenarioConfig(M=4, K=1, waves_per_ue=2, realizations=50, master_seed=99)
    layout = synthesize_aperiodic(sc, dense_oversampling=4, realizations=10_000)
    profile = reference_profile(sc, dense_oversampling=4, realizations=10_000)
    expected = density_taper(profile, 4)
    np.testing.assert_array_equal(layout.positions, expected.positions)
    assert layout.positions[0] == 0.0
    assert layout.positions[-1] == pytest.approx(3.0)
