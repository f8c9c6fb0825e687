import numpy as np
import pytest
from scipy.integrate import quad

from dmcca.features import (
    FeatureError,
    GaborBankSpec,
    Stat,
    ZernikeSpec,
    digit_feature_sets,
    gabor_features,
    gabor_kernel,
    radial_polynomial,
    zernike_features,
    zernike_indices,
    zernike_moments,
)


def blob(rng, size=28):
    img = np.zeros((size, size))
    y, x = np.mgrid[:size, :size]
    for _ in range(4):
        cy, cx = rng.uniform(6, size - 6, 2)
        img += np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / rng.uniform(4, 20))
    return img


def grating(size, freq, phi):
    y, x = np.mgrid[:size, :size].astype(float)
    return np.cos(2 * np.pi * freq * (x * np.cos(phi) + y * np.sin(phi)))


def test_kernels_are_dc_free():
    spec = GaborBankSpec()
    for f in spec.frequencies():
        for t in spec.angles():
            k = gabor_kernel(f, t)
            assert abs(k.sum()) < 1e-12 * np.abs(k).sum()


def test_default_lengths():
    img = blob(np.random.default_rng(0))
    for stat in Stat:
        assert gabor_features(img, stat=stat).shape == (24,)
    assert zernike_features(img).shape == (36,)


def test_constant_image_has_no_gabor_response():
    img = np.full((28, 28), 3.0)
    feats = gabor_features(img, stat=Stat.MEAN)
    assert np.all(np.abs(feats) <= 1e-6 * 3.0)


@pytest.mark.parametrize("stat", list(Stat))
def test_gabor_offset_invariance(stat):
    img = blob(np.random.default_rng(1))
    a = gabor_features(img, stat=stat)
    b = gabor_features(img + 0.7, stat=stat)
    np.testing.assert_allclose(b, a, rtol=1e-6, atol=1e-6 * np.abs(a).max())


@pytest.mark.parametrize("k", range(6))
def test_grating_peaks_in_matching_orientation(k):
    spec = GaborBankSpec()
    scale = 1
    freq = spec.frequencies()[scale]
    n_or = spec.orientations
    for shift in (0, 1):
        phi = (k + shift) * np.pi / n_or
        feats = gabor_features(grating(64, freq, phi), spec, Stat.MEAN)
        channel = feats[scale * n_or:(scale + 1) * n_or]
        assert np.argmax(channel) == (k + shift) % n_or


def test_gabor_feature_order_scale_major():
    spec = GaborBankSpec()
    img = grating(64, spec.frequencies()[3], 0.0)
    feats = gabor_features(img, spec, Stat.MEAN)
    assert np.argmax(feats) == 3 * spec.orientations


def test_gabor_spec_validation():
    with pytest.raises(FeatureError):
        GaborBankSpec(f_max=0.6)
    with pytest.raises(FeatureError):
        GaborBankSpec(scales=0)
    with pytest.raises(FeatureError):
        gabor_features(np.zeros(5))


def test_zernike_index_count():
    # brute count of (n, m) with 0 <= m <= n <= 10 and n - m even
    count = sum(1 for n in range(11) for m in range(n + 1) if (n - m) % 2 == 0)
    assert count == 36
    assert len(zernike_indices(10)) == 36 == ZernikeSpec().n_features
    assert zernike_indices(2) == [(0, 0), (1, 1), (2, 0), (2, 2)]


def test_radial_polynomials():
    rho = np.linspace(0, 1, 11)
    np.testing.assert_allclose(radial_polynomial(2, 0, rho), 2 * rho ** 2 - 1)
    np.testing.assert_allclose(radial_polynomial(4, 2, rho), 4 * rho ** 4 - 3 * rho ** 2)
    np.testing.assert_allclose(radial_polynomial(6, 0, rho),
                               20 * rho ** 6 - 30 * rho ** 4 + 12 * rho ** 2 - 1, atol=1e-12)
    for n, m in zernike_indices(10):
        assert radial_polynomial(n, m, 1.0) == pytest.approx(1.0)


def _z00_by_integration(size):
    # constant image on a size x size grid, disk reaching the corner pixel centres
    radius = (size - 1) / 2 * np.sqrt(2)
    half = size / 2 / radius
    area = quad(lambda u: 2 * min(half, np.sqrt(max(0.0, 1 - u * u))), -half, half, limit=200)[0]
    return area / np.pi


@pytest.mark.parametrize("size, rtol", [(28, 5e-3), (64, 1e-3)])
def test_constant_image_z00(size, rtol):
    z = zernike_features(np.ones((size, size)))
    assert z[0] == pytest.approx(_z00_by_integration(size), rel=rtol)


def test_zernike_rotation_invariance():
    rng = np.random.default_rng(2)
    for _ in range(5):
        img = blob(rng)
        a = zernike_features(img)
        for k in (1, 2, 3):
            b = zernike_features(np.rot90(img, k))
            np.testing.assert_allclose(b, a, rtol=1e-3, atol=1e-3 * a.max())


def test_zernike_complex_phase_rotates():
    img = blob(np.random.default_rng(3))
    z = zernike_moments(img)
    zr = zernike_moments(np.rot90(img))
    m = np.array([mm for _, mm in zernike_indices(10)])
    # 90 degree rotation multiplies Z_nm by a unit phase exp(+-i m pi/2)
    ratio = zr[np.abs(z) > 1e-6] / z[np.abs(z) > 1e-6]
    np.testing.assert_allclose(np.abs(ratio), 1, atol=1e-9)
    phases = np.exp(1j * m[np.abs(z) > 1e-6] * np.pi / 2)
    assert np.allclose(ratio, phases, atol=1e-9) or np.allclose(ratio, phases.conj(), atol=1e-9)


def test_zero_image_gives_zero_moments():
    np.testing.assert_array_equal(zernike_features(np.zeros((28, 28))), 0)


def test_extractors_deterministic():
    img = blob(np.random.default_rng(4))
    assert np.array_equal(gabor_features(img), gabor_features(img.copy()))
    assert np.array_equal(zernike_features(img), zernike_features(img.copy()))


def test_digit_feature_sets_shapes():
    rng = np.random.default_rng(5)
    imgs = np.stack([blob(rng) for _ in range(3)])
    feats = digit_feature_sets(imgs)
    assert feats["gabor_mean"].shape == (24, 3)
    assert feats["gabor_std"].shape == (24, 3)
    assert feats["zernike"].shape == (36, 3)
    np.testing.assert_array_equal(feats["gabor_mean"][:, 1], gabor_features(imgs[1], stat=Stat.MEAN))
