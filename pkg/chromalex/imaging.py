"""
Image loading, anti-aliased compression to the canonical size and colorgram composition
"""
import io
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image, UnidentifiedImageError

from chromalex import colorspace
from chromalex.errors import DecodeError, EmptyInput
from chromalex.validation import check_pixels

logger = logging.getLogger(__name__)

CANONICAL_SIZE = 300


class ColorSpace(Enum):
    SRGB = 'srgb'
    JZAZBZ = 'jzazbz'


@dataclass(frozen=True, eq=False)
class ImageArray(object):
    """Height x width x 3 pixel grid in a declared colorspace.

    SRGB pixels are uint8; JZAZBZ pixels are float64.
    """
    pixels: np.ndarray
    space: ColorSpace = ColorSpace.SRGB

    def __post_init__(self):
        pixels = check_pixels(self.pixels)
        if self.space is ColorSpace.SRGB:
            if pixels.min() < 0 or pixels.max() > 255:
                raise ValueError(f'sRGB channels should be in [0, 255] (not [{pixels.min()}, {pixels.max()}]).')
            if np.issubdtype(pixels.dtype, np.floating):
                pixels = np.rint(pixels)
            pixels = pixels.astype(np.uint8)
        else:
            pixels = pixels.astype(np.float64)
        object.__setattr__(self, 'pixels', pixels)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ImageArray):
            return NotImplemented
        return self.space is other.space and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class Colorgram(object):
    image: ImageArray
    source_count: int

    def __post_init__(self):
        if self.image.space is not ColorSpace.SRGB:
            raise ValueError('a colorgram is stored in sRGB.')
        if (self.image.width, self.image.height) != (CANONICAL_SIZE, CANONICAL_SIZE):
            raise ValueError(f'a colorgram should be {CANONICAL_SIZE}x{CANONICAL_SIZE} '
                             f'(not {self.image.width}x{self.image.height}).')
        if self.source_count < 1:
            raise ValueError(f'source_count should >= 1 (not {self.source_count}).')

    def __eq__(self, other):
        if not isinstance(other, Colorgram):
            return NotImplemented
        return self.source_count == other.source_count and self.image == other.image


def _composite_over_white(rgba):
    alpha = rgba[..., 3:4].astype(np.float64) / 255.0
    color = rgba[..., :3].astype(np.float64)
    return np.rint(color * alpha + 255.0 * (1.0 - alpha)).astype(np.uint8)


# 16-bit grayscale, as Pillow opens 16-bit PNG and TIFF files
WIDE_GRAY_MODES = ('I', 'I;16', 'I;16L', 'I;16B', 'I;16N')


def _wide_gray_to_rgb(img):
    gray = np.clip(np.rint(np.asarray(img, dtype=np.float64) / 257.0), 0, 255).astype(np.uint8)
    return np.repeat(gray[..., np.newaxis], 3, axis=-1)


def load_image(data):
    """
    Decode PNG/JPEG (or any raster format Pillow reads) bytes into an sRGB `ImageArray`
    :param data: Encoded image bytes
    :return: ImageArray at the original dimensions, alpha composited over white
    """
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            has_alpha = img.mode in ('RGBA', 'LA', 'PA') or (img.mode == 'P' and 'transparency' in img.info)
            if img.mode in WIDE_GRAY_MODES:
                pixels = _wide_gray_to_rgb(img)
            elif has_alpha:
                pixels = _composite_over_white(np.asarray(img.convert('RGBA')))
            else:
                pixels = np.asarray(img.convert('RGB'))
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError, Image.DecompressionBombError) as e:
        raise DecodeError(f'cannot decode image: {e}') from e
    return ImageArray(np.array(pixels, dtype=np.uint8), ColorSpace.SRGB)


def load_image_file(path):
    with open(path, 'rb') as f:
        data = f.read()
    try:
        return load_image(data)
    except DecodeError as e:
        raise DecodeError(f'{path}: {e}') from e


def resize_antialiased(img, size=CANONICAL_SIZE):
    """Compress (or enlarge) an sRGB image to `size` x `size`.

    Downscaling uses an area-averaging box filter so every source pixel contributes;
    images smaller than the target on either axis are enlarged bilinearly.
    """
    if img.space is not ColorSpace.SRGB:
        raise ValueError('resizing happens in sRGB, before the colorspace transform.')
    if img.width == size and img.height == size:
        return img
    if img.width >= size and img.height >= size:
        resample = Image.Resampling.BOX
    else:
        resample = Image.Resampling.BILINEAR
    resized = Image.fromarray(img.pixels).resize((size, size), resample=resample)
    return ImageArray(np.asarray(resized, dtype=np.uint8), ColorSpace.SRGB)


def to_jzazbz(img):
    if img.space is ColorSpace.JZAZBZ:
        return img
    return ImageArray(colorspace.srgb_array_to_jzazbz(img.pixels), ColorSpace.JZAZBZ)


def compose_colorgram(images):
    """
    Average a word's images pixel by pixel in JzAzBz and convert the mean back to sRGB
    :param images: List of sRGB ImageArray, resized to the canonical size here if needed
    :return: Colorgram
    """
    if len(images) == 0:
        raise EmptyInput('cannot compose a colorgram from zero images.')
    stack = np.stack([to_jzazbz(resize_antialiased(img)).pixels for img in images])
    return colorgram_from_mean(np.mean(stack, axis=0), len(images))


def colorgram_from_mean(mean_jzazbz, source_count):
    """Invert a per-pixel mean JzAzBz grid into a displayable colorgram, clamping out-of-gamut means."""
    counter = colorspace.ClampCounter()
    pixels = colorspace.jzazbz_array_to_srgb(mean_jzazbz, counter)
    if counter.events:
        logger.debug('colorgram of %d images clamped %d of %d pixels', source_count, counter.events, counter.pixels)
    return Colorgram(ImageArray(pixels, ColorSpace.SRGB), source_count)


def save_colorgram(colorgram, path):
    Image.fromarray(colorgram.image.pixels).save(path, format='PNG')


def load_colorgram(path, source_count):
    return Colorgram(load_image_file(path), source_count)
