"""Image descriptors for the digit experiment.

* Gabor bank statistics: the image is filtered by a bank of complex,
  zero-mean Gabor kernels (scales x orientations) and each magnitude map
  is reduced to one number (mean, standard deviation or median).
* Zernike moment magnitudes up to a maximum order over the disk that
  encloses the intensity mass.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.signal import fftconvolve

_KERNEL_EXTENT = 3.0
_BATCH = 200


class FeatureError(ValueError):
    pass


class Stat(str, enum.Enum):
    MEAN = "mean"
    STD = "std"
    MEDIAN = "median"


@dataclass(frozen=True)
class GaborBankSpec:
    scales: int = 4
    orientations: int = 6
    f_min: float = 0.05
    f_max: float = 0.4
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.scales < 1 or self.orientations < 1:
            raise FeatureError("scales and orientations must be positive")
        if not 0 < self.f_min <= self.f_max <= 0.5:
            raise FeatureError("need 0 < f_min <= f_max <= 0.5 cycles/pixel")
        if self.bandwidth <= 0:
            raise FeatureError("bandwidth must be positive")

    @property
    def n_filters(self) -> int:
        return self.scales * self.orientations

    def frequencies(self) -> np.ndarray:
        return np.geomspace(self.f_min, self.f_max, self.scales)

    def angles(self) -> np.ndarray:
        return np.arange(self.orientations) * np.pi / self.orientations


def gabor_kernel(frequency: float, theta: float, bandwidth: float = 1.0) -> np.ndarray:
    """Complex isotropic Gabor kernel with its DC response removed.

    The carrier oscillates along ``(cos theta, sin theta)`` in (column, row)
    coordinates.  A multiple of the envelope is subtracted so the kernel
    sums to zero, and the result is scaled by the envelope mass.
    """
    # envelope width for a given octave bandwidth of the magnitude response
    b = 2.0 ** bandwidth
    sigma = np.sqrt(np.log(2) / 2) * (b + 1) / (b - 1) / (np.pi * frequency)
    half = int(np.ceil(_KERNEL_EXTENT * sigma))
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(float)
    env = np.exp(-(x ** 2 + y ** 2) / (2 * sigma ** 2))
    carrier = np.exp(2j * np.pi * frequency * (x * np.cos(theta) + y * np.sin(theta)))
    kappa = (env * carrier).sum() / env.sum()
    kernel = env * (carrier - kappa)
    return kernel / env.sum()


@lru_cache(maxsize=8)
def _bank(spec: GaborBankSpec) -> tuple[np.ndarray, ...]:
    return tuple(gabor_kernel(f, t, spec.bandwidth)
                 for f in spec.frequencies() for t in spec.angles())


def gabor_responses(images: np.ndarray, spec: GaborBankSpec = GaborBankSpec()) -> np.ndarray:
    """Magnitude maps, shape ``(n_images, n_filters, H, W)``.

    Images are extended by mirror reflection before filtering, so a
    constant image (or constant offset) produces no response at the borders.
    """
    images = np.asarray(images, dtype=float)
    if images.ndim == 2:
        images = images[None]
    if images.ndim != 3 or images.shape[1] == 0 or images.shape[2] == 0:
        raise FeatureError(f"expected a nonempty image or image stack, got shape {images.shape}")
    if not np.all(np.isfinite(images)):
        raise FeatureError("images contain non-finite pixels")
    out = np.empty((images.shape[0], spec.n_filters) + images.shape[1:])
    for k, kernel in enumerate(_bank(spec)):
        half = kernel.shape[0] // 2
        padded = np.pad(images, ((0, 0), (half, half), (half, half)), mode="symmetric")
        resp = fftconvolve(padded, kernel[None], mode="valid", axes=(1, 2))
        out[:, k] = np.abs(resp)
    return out


_REDUCERS = {
    Stat.MEAN: lambda a: a.mean(axis=(-2, -1)),
    Stat.STD: lambda a: a.std(axis=(-2, -1)),
    Stat.MEDIAN: lambda a: np.median(a.reshape(a.shape[:-2] + (-1,)), axis=-1),
}


def gabor_features(image: np.ndarray, spec: GaborBankSpec = GaborBankSpec(),
                   stat: Stat | str = Stat.MEAN) -> np.ndarray:
    """One statistic per filter, ordered scale-major then orientation."""
    if np.ndim(image) != 2:
        raise FeatureError(f"expected a 2-D image, got shape {np.shape(image)}")
    stat = Stat(stat)
    return gabor_features_batch(np.asarray(image)[None], spec, (stat,))[stat][0]


def gabor_features_batch(images: np.ndarray, spec: GaborBankSpec = GaborBankSpec(),
                         stats=(Stat.MEAN, Stat.STD)) -> dict:
    """Map each requested statistic to an ``(n_images, n_filters)`` array."""
    images = np.asarray(images, dtype=float)
    stats = [Stat(s) for s in stats]
    parts: dict = {s: [] for s in stats}
    for start in range(0, images.shape[0], _BATCH):
        mags = gabor_responses(images[start:start + _BATCH], spec)
        for s in stats:
            parts[s].append(_REDUCERS[s](mags))
    return {s: np.concatenate(parts[s]) for s in stats}


@dataclass(frozen=True)
class ZernikeSpec:
    max_order: int = 10

    def __post_init__(self):
        if self.max_order < 0:
            raise FeatureError("max_order must be non-negative")

    def indices(self) -> list[tuple[int, int]]:
        return zernike_indices(self.max_order)

    @property
    def n_features(self) -> int:
        return len(self.indices())


def zernike_indices(max_order: int) -> list[tuple[int, int]]:
    return [(n, m) for n in range(max_order + 1) for m in range(n + 1) if (n - m) % 2 == 0]


@lru_cache(maxsize=8)
def _radial_table(max_order: int) -> np.ndarray:
    """Coefficients ``T[j, k]`` of ``rho**k`` in ``R_nm`` for the j-th (n, m) pair."""
    idx = zernike_indices(max_order)
    table = np.zeros((len(idx), max_order + 1))
    for j, (n, m) in enumerate(idx):
        for s in range((n - m) // 2 + 1):
            table[j, n - 2 * s] = ((-1) ** s * factorial(n - s)
                                   / (factorial(s) * factorial((n + m) // 2 - s)
                                      * factorial((n - m) // 2 - s)))
    return table


def radial_polynomial(n: int, m: int, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    for s in range((n - m) // 2 + 1):
        out += ((-1) ** s * factorial(n - s)
                / (factorial(s) * factorial((n + m) // 2 - s) * factorial((n - m) // 2 - s))
                * rho ** (n - 2 * s))
    return out


def zernike_moments(image: np.ndarray, spec: ZernikeSpec = ZernikeSpec()) -> np.ndarray:
    """Complex moments ``Z_nm`` in ``(n, m)`` lexicographic order.

    The disk is centred on the intensity centroid and its radius reaches the
    farthest nonzero pixel; pixel ``p`` contributes
    ``(n+1)/pi * f_p * R_nm(rho_p) exp(-i m theta_p) / r**2``.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise FeatureError(f"expected a nonempty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise FeatureError("image contains non-finite pixels")
    idx = spec.indices()
    mass = img.sum()
    nz = img != 0
    if not nz.any() or mass == 0:
        return np.zeros(len(idx), dtype=complex)
    rows, cols = np.nonzero(nz)
    f = img[rows, cols]
    cy = (f * rows).sum() / mass
    cx = (f * cols).sum() / mass
    dy, dx = rows - cy, cols - cx
    dist = np.hypot(dx, dy)
    radius = dist.max()
    if radius == 0:
        radius = 1.0
    rho = dist / radius
    theta = np.arctan2(dy, dx)
    powers = rho[None, :] ** np.arange(spec.max_order + 1)[:, None]
    radial = _radial_table(spec.max_order) @ powers
    m = np.array([mm for _, mm in idx])
    n = np.array([nn for nn, _ in idx])
    phase = np.exp(-1j * m[:, None] * theta[None, :])
    z = (radial * phase) @ f
    return z * (n + 1) / (np.pi * radius ** 2)


def zernike_features(image: np.ndarray, spec: ZernikeSpec = ZernikeSpec()) -> np.ndarray:
    return np.abs(zernike_moments(image, spec))


def digit_feature_sets(images: np.ndarray, gabor: GaborBankSpec = GaborBankSpec(),
                       zernike: ZernikeSpec = ZernikeSpec()) -> dict[str, np.ndarray]:
    """The three digit descriptors as ``(features x samples)`` matrices."""
    stats = gabor_features_batch(images, gabor, (Stat.MEAN, Stat.STD))
    zern = np.stack([zernike_features(im, zernike) for im in images])
    return {
        "gabor_mean": stats[Stat.MEAN].T,
        "gabor_std": stats[Stat.STD].T,
        "zernike": zern.T,
    }
