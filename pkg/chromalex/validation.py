import re
from urllib.parse import quote

import numpy as np


def squeeze_and_check(x, size=None, allow_empty=False):
    """Squeeze the input `x` into a 1-d float64 `numpy.ndarray`.
        And check whether its number of dimensions == 1. If not, raise a TypeError.
        Optionally, check whether its size == `size`. If not, raise a ValueError.
    """
    x = np.squeeze(np.asarray(x, dtype=np.float64))
    if (x.ndim == 0) and (x.size == 1):
        x = np.array([x])
    if x.ndim != 1:
        raise TypeError(f'The number of dimensions should == 1 (not {x.ndim}) after numpy.squeeze(x).')
    if (not allow_empty) and x.size == 0:
        raise ValueError('the size should != 0.')
    if (size is not None) and x.size != size:
        raise ValueError(f'The size should == {size} (not {x.size}).')
    return x


def check_matrix(x, min_rows=1):
    """Convert `x` into a 2-d float64 `numpy.ndarray` with at least `min_rows` rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    if x.ndim != 2:
        raise TypeError(f'The number of dimensions should == 2 (not {x.ndim}).')
    if x.shape[0] < min_rows:
        raise ValueError(f'The number of rows should >= {min_rows} (not {x.shape[0]}).')
    if not np.all(np.isfinite(x)):
        raise ValueError('the matrix contains NaN or infinite values.')
    return x


def check_pixels(pixels):
    """Check that `pixels` is a height x width x 3 array."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise TypeError(f'pixels should have shape (height, width, 3) (not {pixels.shape}).')
    if pixels.shape[0] < 1 or pixels.shape[1] < 1:
        raise ValueError(f'pixels should be at least 1x1 (not {pixels.shape[1]}x{pixels.shape[0]}).')
    return pixels


def safe_filename(name):
    """`name` itself when it is a plain file name, otherwise its percent-encoding."""
    if re.fullmatch(r'[\w\-.]+', name) and not name.startswith('.'):
        return name
    return quote(name, safe='')
