"""
Conversion between 8-bit sRGB pixels and the perceptually uniform JzAzBz colorspace

The forward chain is sRGB gamma expansion -> CIE XYZ (D65) -> cone-like LMS of the
adapted tristimulus values -> perceptual quantizer -> Iz/az/bz -> Jz. All arithmetic is
done in float64; bulk image buffers may be float32 and are promoted on entry.

References
----------
Safdar, M., Cui, G., Kim, Y.J. and Luo, M.R., 2017.
Perceptually uniform color space for image signals including high dynamic range and wide gamut.
Optics Express, 25(13), pp.15131-15151.
https://doi.org/10.1364/OE.25.015131

IEC 61966-2-1:1999, Multimedia systems and equipment - Colour measurement and management -
Part 2-1: Default RGB colour space - sRGB.
"""
from typing import NamedTuple

import numpy as np


class SrgbPixel(NamedTuple):
    r: int
    g: int
    b: int


class JzazbzCoord(NamedTuple):
    jz: float
    az: float
    bz: float


# nominal ranges spanned by the images of all 8-bit sRGB tuples
JZ_RANGE = (0.0, 0.167)
AZ_RANGE = (-0.1, 0.11)
BZ_RANGE = (-0.156, 0.115)
JZAZBZ_RANGES = (JZ_RANGE, AZ_RANGE, BZ_RANGE)

# absolute luminance (cd/m^2) assigned to sRGB white, keeps the whole gamut inside the nominal ranges
SRGB_WHITE_LUMINANCE = 99.0

_SRGB_THRESHOLD = 0.04045
_LINEAR_THRESHOLD = 0.04045 / 12.92

# linear sRGB -> XYZ, D65 white
_RGB_TO_XYZ = np.array([[0.4124564, 0.3575761, 0.1804375],
                        [0.2126729, 0.7151522, 0.0721750],
                        [0.0193339, 0.1191920, 0.9503041]])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)

# JzAzBz model constants
_B, _G = 1.15, 0.66
_C1, _C2, _C3 = 3424.0 / 4096.0, 2413.0 / 128.0, 2392.0 / 128.0
_N, _P = 2610.0 / 16384.0, 1.7 * 2523.0 / 32.0
_D, _D0 = -0.56, 1.6295499532821566e-11
_XYZ_TO_LMS = np.array([[0.41478972, 0.579999, 0.0146480],
                        [-0.2015100, 1.120649, 0.0531008],
                        [-0.0166008, 0.264800, 0.6684799]])
_LMS_TO_XYZ = np.linalg.inv(_XYZ_TO_LMS)
_LMS_TO_IAB = np.array([[0.5, 0.5, 0.0],
                        [3.524000, -4.066708, 0.542708],
                        [0.199076, 1.096799, -1.295875]])
_IAB_TO_LMS = np.linalg.inv(_LMS_TO_IAB)


class ClampCounter(object):
    def __init__(self):
        """
        Caller-owned tally of pixels that needed clamping on inversion
        """
        self.events = 0
        self.pixels = 0

    def add(self, events, pixels):
        self.events += int(events)
        self.pixels += int(pixels)


def _check_last_axis(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != 3:
        raise TypeError(f'the last axis should have size 3 (not shape {x.shape}).')
    return x


def srgb_to_linear(srgb):
    """Expand 8-bit sRGB channel values in [0, 255] into linear RGB in [0, 1]."""
    c = np.asarray(srgb, dtype=np.float64) / 255.0
    return np.where(c <= _SRGB_THRESHOLD, c / 12.92, np.power((np.maximum(c, 0.0) + 0.055) / 1.055, 2.4))


def linear_to_srgb(linear):
    """Compress linear RGB into unrounded, unclamped sRGB channel values on the [0, 255] scale."""
    c = np.asarray(linear, dtype=np.float64)
    encoded = np.where(c <= _LINEAR_THRESHOLD, 12.92 * c,
                       1.055 * np.power(np.maximum(c, _LINEAR_THRESHOLD), 1.0 / 2.4) - 0.055)
    return 255.0 * encoded


def _perceptual_quantizer(x):
    t = np.power(np.maximum(x, 0.0) / 10000.0, _N)
    return np.power((_C1 + _C2 * t) / (1.0 + _C3 * t), _P)


def _inverse_perceptual_quantizer(x):
    t = np.power(np.maximum(x, 0.0), 1.0 / _P)
    ratio = (_C1 - t) / (_C3 * t - _C2)
    return 10000.0 * np.power(np.maximum(ratio, 0.0), 1.0 / _N)


def xyz_to_jzazbz(xyz):
    """Map absolute XYZ (cd/m^2) of shape (..., 3) to JzAzBz."""
    xyz = _check_last_axis(xyz)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    adapted = np.stack((_B * x - (_B - 1.0) * z, _G * y - (_G - 1.0) * x, z), axis=-1)
    lms = _perceptual_quantizer(adapted @ _XYZ_TO_LMS.T)
    iab = lms @ _LMS_TO_IAB.T
    iz = iab[..., 0]
    jz = ((1.0 + _D) * iz) / (1.0 + _D * iz) - _D0
    return np.stack((jz, iab[..., 1], iab[..., 2]), axis=-1)


def jzazbz_to_xyz(jzazbz):
    """Inverse of `xyz_to_jzazbz`."""
    jzazbz = _check_last_axis(jzazbz)
    jz = jzazbz[..., 0] + _D0
    iz = jz / (1.0 + _D - _D * jz)
    iab = np.stack((iz, jzazbz[..., 1], jzazbz[..., 2]), axis=-1)
    adapted = _inverse_perceptual_quantizer(iab @ _IAB_TO_LMS.T) @ _LMS_TO_XYZ.T
    xa, ya, z = adapted[..., 0], adapted[..., 1], adapted[..., 2]
    x = (xa + (_B - 1.0) * z) / _B
    y = (ya + (_G - 1.0) * x) / _G
    return np.stack((x, y, z), axis=-1)


def srgb_array_to_jzazbz(srgb):
    """Vectorised sRGB -> JzAzBz over an array of shape (..., 3) of channel values in [0, 255]."""
    srgb = _check_last_axis(srgb)
    xyz = (srgb_to_linear(srgb) @ _RGB_TO_XYZ.T) * SRGB_WHITE_LUMINANCE
    return xyz_to_jzazbz(xyz)


def jzazbz_array_to_srgb(jzazbz, clamp_counter=None):
    """Vectorised JzAzBz -> sRGB returning uint8 channels of shape (..., 3).

    Out-of-gamut coordinates are clamped channel-wise to [0, 255] after rounding, never rejected.
    A pixel counts as a clamp event when rounding alone would leave one of its channels out of range.
    """
    xyz = jzazbz_to_xyz(jzazbz) / SRGB_WHITE_LUMINANCE
    srgb = np.rint(linear_to_srgb(xyz @ _XYZ_TO_RGB.T))
    srgb = np.where(np.isfinite(srgb), srgb, 0.0)
    out_of_range = np.any((srgb < 0.0) | (srgb > 255.0), axis=-1)
    if clamp_counter is not None:
        clamp_counter.add(np.count_nonzero(out_of_range), out_of_range.size)
    return np.clip(srgb, 0.0, 255.0).astype(np.uint8)


def check_srgb_pixel(pixel):
    pixel = SrgbPixel(*(int(c) for c in pixel))
    for name, value in zip(pixel._fields, pixel):
        if not 0 <= value <= 255:
            raise ValueError(f'channel {name} should be in [0, 255] (not {value}).')
    return pixel


def srgb_to_jzazbz(pixel):
    """Convert one sRGB pixel, or an array of shape (..., 3), into JzAzBz.

    A `SrgbPixel` (or any 3-sequence of ints) yields a `JzazbzCoord`; a `numpy.ndarray`
    yields an array of the same shape.
    """
    if isinstance(pixel, np.ndarray) and pixel.ndim > 1:
        return srgb_array_to_jzazbz(pixel)
    pixel = check_srgb_pixel(pixel)
    return JzazbzCoord(*(float(c) for c in srgb_array_to_jzazbz(np.array(pixel, dtype=np.float64))))


def jzazbz_to_srgb(coord, clamp_counter=None):
    """Convert one JzAzBz coordinate, or an array of shape (..., 3), into sRGB (clamped, rounded)."""
    if isinstance(coord, np.ndarray) and coord.ndim > 1:
        return jzazbz_array_to_srgb(coord, clamp_counter)
    coord = JzazbzCoord(*(float(c) for c in coord))
    return SrgbPixel(*(int(c) for c in jzazbz_array_to_srgb(np.array(coord), clamp_counter)))


def in_nominal_range(jzazbz, atol=1e-12):
    """Boolean mask of whether each JzAzBz triple lies inside the nominal ranges.

    `atol` absorbs floating-point noise at the black point, where jz is zero only to ~1e-26.
    """
    jzazbz = _check_last_axis(jzazbz)
    inside = np.ones(jzazbz.shape[:-1], dtype=bool)
    for axis, (low, high) in enumerate(JZAZBZ_RANGES):
        inside &= (jzazbz[..., axis] >= low - atol) & (jzazbz[..., axis] <= high + atol)
    return inside
