"""Random propagation environments and downlink channel assembly.

Each user is illuminated by L plane waves with uniformly random angle of
arrival (within a 120 degree sector), amplitude, phase and linear
polarization orientation. L = 1 models a random line-of-sight (RLOS) link;
L in [10, 20] approaches rich isotropic multipath (RIMP). The channel row
of user k over elements at positions x_m (in wavelengths) is

    h[k, m] = (1 / norm) * sum_l a_l * exp(j phi_l) * cos(psi_l) * g(theta_l)
                                * exp(j 2 pi x_m sin(theta_l))

with g the Huygens element pattern and cos(psi) the scalar polarization
mismatch between the wave and a co-polarized array.

All randomness flows through per-(realization, user) streams derived from
(master_seed, stream_kind, realization_index, ue_index) via numpy's
SeedSequence, so any realization can be regenerated in isolation and in
any order.
"""

from dataclasses import dataclass

import numpy as np

from .arrays import ArrayLayout, huygens_gain

SECTOR_HALF_ANGLE = np.pi / 3.0  # 120 degree cell sector
MAX_WAVES = 20
RIMP_MIN_WAVES = 10

# stream kinds keep evaluation, calibration and synthesis draws disjoint
STREAM_EVAL = 0
STREAM_CALIBRATION = 1
STREAM_SYNTHESIS = 2
STREAM_SYNTHESIS_CAL = 3

DEFAULT_CALIBRATION_DRAWS = 20_000


@dataclass(frozen=True)
class PlaneWave:
    """One incoming plane wave: angle of arrival, amplitude, phase, polarization."""

    aoa: float
    amplitude: float
    phase: float
    pol_angle: float

    def __post_init__(self):
        if not -SECTOR_HALF_ANGLE <= self.aoa <= SECTOR_HALF_ANGLE:
            raise ValueError(f"aoa {self.aoa} outside the 120 degree sector")
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError(f"amplitude {self.amplitude} outside [0, 1]")


@dataclass(frozen=True)
class WaveSet:
    """The waves illuminating one user."""

    waves: tuple

    def __post_init__(self):
        if not 1 <= len(self.waves) <= MAX_WAVES:
            raise ValueError(f"wave count {len(self.waves)} outside [1, {MAX_WAVES}]")

    def __len__(self) -> int:
        return len(self.waves)

    def as_arrays(self):
        """(aoa, amplitude, phase, pol_angle) arrays, each of length L."""
        aoa = np.array([w.aoa for w in self.waves])
        amp = np.array([w.amplitude for w in self.waves])
        phase = np.array([w.phase for w in self.waves])
        pol = np.array([w.pol_angle for w in self.waves])
        return aoa, amp, phase, pol


@dataclass(frozen=True)
class Environment:
    """Propagation environment on the RLOS-to-RIMP continuum."""

    waves_per_ue: int

    def __post_init__(self):
        if not 1 <= self.waves_per_ue <= MAX_WAVES:
            raise ValueError(
                f"waves_per_ue {self.waves_per_ue} outside [1, {MAX_WAVES}]"
            )

    @property
    def label(self) -> str:
        if self.waves_per_ue == 1:
            return "RLOS"
        if self.waves_per_ue >= RIMP_MIN_WAVES:
            return "RIMP"
        return f"intermediate({self.waves_per_ue})"


def wave_stream(master_seed: int, kind: int, realization: int, ue: int) -> np.random.Generator:
    """Independent random stream for one (realization, user) pair."""
    return np.random.default_rng([master_seed, kind, realization, ue])


def _draw_wave_params(rng: np.random.Generator, num_waves: int):
    """Draw (aoa, amplitude, phase, pol_angle) arrays from one stream.

    Consumes exactly 4 * num_waves uniforms in a fixed order; both the
    object-level sampler and the engine's batch path rely on this layout.
    """
    u = rng.random(4 * num_waves)
    aoa = (2.0 * u[:num_waves] - 1.0) * SECTOR_HALF_ANGLE
    amplitude = u[num_waves : 2 * num_waves]
    phase = 2.0 * np.pi * u[2 * num_waves : 3 * num_waves]
    pol_angle = np.pi * u[3 * num_waves :]
    return aoa, amplitude, phase, pol_angle


def sample_waves(env: Environment, rng: np.random.Generator) -> WaveSet:
    """Sample one user's wave set for the given environment."""
    aoa, amplitude, phase, pol = _draw_wave_params(rng, env.waves_per_ue)
    return WaveSet(
        tuple(
            PlaneWave(aoa[i], amplitude[i], phase[i], pol[i])
            for i in range(env.waves_per_ue)
        )
    )


def sample_wave_blocks(master_seed, kind, indices, num_users, num_waves):
    """Wave parameters for a range of realizations, as (n, K, L) arrays.

    Each (realization, user) pair draws from its own stream, so the result
    is independent of how realizations are grouped into blocks.
    """
    n = len(indices)
    shape = (n, num_users, num_waves)
    aoa = np.empty(shape)
    amplitude = np.empty(shape)
    phase = np.empty(shape)
    pol = np.empty(shape)
    for j, idx in enumerate(indices):
        for k in range(num_users):
            rng = wave_stream(master_seed, kind, int(idx), k)
            aoa[j, k], amplitude[j, k], phase[j, k], pol[j, k] = _draw_wave_params(
                rng, num_waves
            )
    return aoa, amplitude, phase, pol


def wave_field(positions, aoa, amplitude, phase, pol_angle, norm: float):
    """Sum plane-wave contributions onto array elements.

    The wave arrays share a trailing axis of length L; any leading axes
    broadcast, so (L,) inputs give one channel row of length M while
    (B, K, L) inputs give a (B, K, M) stack of channel matrices.
    """
    coeff = amplitude * np.exp(1j * phase) * np.cos(pol_angle) * huygens_gain(aoa)
    progression = np.exp(2j * np.pi * np.sin(aoa)[..., None] * positions)
    return np.einsum("...l,...lm->...m", coeff, progression) / norm


def assemble_channel(layout: ArrayLayout, wavesets, norm: float) -> np.ndarray:
    """Assemble the K x M downlink channel matrix from per-user wave sets."""
    if len(wavesets) < 1:
        raise ValueError("need at least one wave set")
    if norm <= 0.0:
        raise ValueError(f"norm must be positive, got {norm}")
    rows = []
    for ws in wavesets:
        aoa, amp, phase, pol = ws.as_arrays()
        rows.append(wave_field(layout.positions, aoa, amp, phase, pol, norm))
    return np.stack(rows, axis=0)


def calibration_from_samples(mean_square_entries) -> float:
    """Calibration constant from per-realization mean-square channel entries."""
    vals = np.asarray(mean_square_entries, dtype=float)
    if vals.size == 0:
        raise ValueError("no calibration samples")
    return float(np.sqrt(np.mean(vals)))


def calibrate_normalization(
    scenario,
    layout: ArrayLayout,
    n_cal: int = DEFAULT_CALIBRATION_DRAWS,
    kind: int = STREAM_CALIBRATION,
) -> float:
    """Estimate the channel normalization constant for one scenario/layout.

    Returns c = sqrt(mean ||H0||_F^2 / (K M)) over n_cal raw realizations
    drawn from the dedicated calibration streams; dividing channels by c
    makes the ensemble-average per-element channel power 1. Deterministic
    for a fixed master seed.
    """
    if n_cal < 1_000:
        raise ValueError(f"n_cal must be at least 1000, got {n_cal}")
    vals = np.empty(n_cal)
    block = 4096
    for start in range(0, n_cal, block):
        idx = range(start, min(start + block, n_cal))
        aoa, amp, phase, pol = sample_wave_blocks(
            scenario.master_seed, kind, idx, scenario.K, scenario.waves_per_ue
        )
        h = wave_field(layout.positions, aoa, amp, phase, pol, 1.0)
        vals[idx.start : idx.stop] = np.mean(np.abs(h) ** 2, axis=(1, 2))
    return calibration_from_samples(vals)
