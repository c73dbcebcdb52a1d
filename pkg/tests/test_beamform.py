import numpy as np
import pytest

from apermimo.beamform import (
    COND_LIMIT,
    RESIDUAL_LIMIT,
    Precoder,
    SingularChannelError,
    _zf_solve,
    downlink_sinr,
    uplink_zf_sinr,
    zf_precoder,
)


def _random_channel(rng, k, m):
    return rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))


def test_zf_reconstructs_identity():
    rng = np.random.default_rng(0)
    for k, m in ((2, 8), (4, 16), (8, 16)):
        h = _random_channel(rng, k, m)
        pre = zf_precoder(h)
        np.testing.assert_allclose(h @ pre.weights, np.eye(k), atol=1e-10)


def test_zf_matches_svd_pseudoinverse():
    """Independent oracle: the SVD pseudoinverse of a full-row-rank matrix."""
    rng = np.random.default_rng(1)
    h = _random_channel(rng, 4, 12)
    pre = zf_precoder(h)
    np.testing.assert_allclose(pre.weights, np.linalg.pinv(h), atol=1e-10)


def test_beta_is_inverse_weight_power():
    rng = np.random.default_rng(2)
    h = _random_channel(rng, 3, 9)
    pre = zf_precoder(h)
    trace = np.sum(np.abs(pre.weights) ** 2)
    assert pre.beta == pytest.approx(1.0 / trace, rel=1e-12)


def test_zf_scale_equivariance():
    rng = np.random.default_rng(3)
    h = _random_channel(rng, 3, 9)
    c = 2.5
    pre1 = zf_precoder(h)
    pre2 = zf_precoder(c * h)
    np.testing.assert_allclose(pre2.weights, pre1.weights / c, rtol=1e-10)
    assert pre2.beta == pytest.approx(pre1.beta * c * c, rel=1e-10)


def test_singular_channel_rejected():
    h = np.ones((2, 6), dtype=complex)  # duplicated rows
    with pytest.raises(SingularChannelError) as exc:
        zf_precoder(h)
    assert exc.value.cond > COND_LIMIT or not np.isfinite(exc.value.cond)


def test_wide_channel_rejected():
    with pytest.raises(ValueError):
        zf_precoder(np.ones((4, 2), dtype=complex))


def test_downlink_sinr_equalized_by_zf():
    rng = np.random.default_rng(4)
    h = _random_channel(rng, 4, 10)
    pre = zf_precoder(h)
    snr = 1.7
    sinr = downlink_sinr(h, pre, snr)
    np.testing.assert_allclose(sinr, pre.beta * snr, rtol=1e-9)


def test_downlink_sinr_general_precoder():
    """Non-orthogonal precoder checked against a per-user loop."""
    rng = np.random.default_rng(5)
    k, m = 3, 8
    h = _random_channel(rng, k, m)
    w = h.conj().T  # matched transmission, leaves residual interference
    beta = 1.0 / np.sum(np.abs(w) ** 2)
    pre = Precoder(weights=w, beta=beta, cond=1.0)
    snr = 2.0
    sinr = downlink_sinr(h, pre, snr)
    for kk in range(k):
        sig = beta * snr * abs(h[kk] @ w[:, kk]) ** 2
        interf = beta * snr * sum(
            abs(h[kk] @ w[:, j]) ** 2 for j in range(k) if j != kk
        )
        assert sinr[kk] == pytest.approx(sig / (interf + 1.0), rel=1e-12)


def test_downlink_sinr_needs_positive_snr():
    rng = np.random.default_rng(6)
    h = _random_channel(rng, 2, 6)
    pre = zf_precoder(h)
    with pytest.raises(ValueError):
        downlink_sinr(h, pre, 0.0)


def test_uplink_sinr_matches_decoder_noise_norms():
    """The uplink combiner is the pseudoinverse of G = H^T; its row norms
    set the post-combining noise power."""
    rng = np.random.default_rng(7)
    h = _random_channel(rng, 3, 9)
    snr = 0.8
    sinr = uplink_zf_sinr(h, snr)
    g = h.T
    d = np.linalg.pinv(g)
    np.testing.assert_allclose(d @ g, np.eye(3), atol=1e-10)
    noise = np.sum(np.abs(d) ** 2, axis=1)
    np.testing.assert_allclose(sinr, snr / noise, rtol=1e-9)


def test_uplink_rejects_singular():
    with pytest.raises(SingularChannelError):
        uplink_zf_sinr(np.ones((2, 5), dtype=complex), 1.0)


def _steering_pair(du, m=57, aperture=7.0, a2=1.0, u0=0.3):
    x = np.linspace(0.0, aperture, m)
    h = np.stack(
        [
            np.exp(2j * np.pi * x * (u0 - du / 2)),
            a2 * np.exp(2j * np.pi * x * (u0 + du / 2)),
        ]
    )
    return h


def test_batch_solve_masks_bad_slices():
    rng = np.random.default_rng(8)
    good = _random_channel(rng, 2, 8)
    bad = np.ones((2, 8), dtype=complex)
    batch = np.stack([good, bad])
    res = _zf_solve(batch)
    assert res.ok[0] and not res.ok[1]
    assert np.all(res.weights[1] == 0.0)
    assert res.beta[1] == 0.0
    assert np.isinf(res.residual[1])
    np.testing.assert_allclose(batch[0] @ res.weights[0], np.eye(2), atol=1e-10)


def test_batch_solve_independent_of_grouping():
    rng = np.random.default_rng(9)
    hs = _random_channel(rng, 8 * 2, 6).reshape(8, 2, 6)
    full = _zf_solve(hs)
    first = _zf_solve(hs[:4])
    second = _zf_solve(hs[4:])
    np.testing.assert_array_equal(full.weights[:4], first.weights)
    np.testing.assert_array_equal(full.weights[4:], second.weights)
    np.testing.assert_array_equal(full.beta[:4], first.beta)
    np.testing.assert_array_equal(full.residual[4:], second.residual)


def test_near_collision_refinement_keeps_residual_gate():
    """Draws beyond the plain float64 solve's accuracy must either pass the
    residual gate after refinement or be rejected, never accepted dirty."""
    for du in (1e-4, 1e-5, 3e-6):
        h = _steering_pair(du)
        res = _zf_solve(h[None])
        assert res.cond[0] <= COND_LIMIT
        if res.ok[0]:
            assert res.residual[0] <= RESIDUAL_LIMIT
            np.testing.assert_allclose(
                np.abs(h @ res.weights[0] - np.eye(2)).max(),
                res.residual[0],
                atol=1e-12,
            )
    assert _zf_solve(_steering_pair(1e-5)[None]).ok[0]  # refinement recovers this


def test_hopeless_collision_rejected():
    res = _zf_solve(_steering_pair(1e-8)[None])
    assert not res.ok[0]


def test_accepted_residuals_bounded_at_scale():
    """Random realistic batch: every accepted draw satisfies the gate."""
    rng = np.random.default_rng(10)
    m, k, n = 16, 8, 400
    x = np.arange(m) * 1.0
    u = rng.uniform(-0.85, 0.85, size=(n, k))
    amp = rng.uniform(0, 1, size=(n, k, 1))
    h = amp * np.exp(2j * np.pi * x * u[..., None])
    res = _zf_solve(h)
    assert res.ok.sum() > n * 0.9
    assert res.residual[res.ok].max() <= RESIDUAL_LIMIT
