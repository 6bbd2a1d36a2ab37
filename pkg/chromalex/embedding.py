"""
Word-color embeddings: 8-bin JzAzBz distributions per image, their per-word mean and
standard deviation, and the distribution/vector similarity measures used to compare them.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.special import rel_entr

from chromalex import colorspace, imaging
from chromalex.errors import DimensionMismatch, EmptyInput, SupportError, ZeroVector
from chromalex.imaging import ColorSpace
from chromalex.validation import squeeze_and_check

logger = logging.getLogger(__name__)

N_BINS = 8
NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BinGrid(object):
    """2 x 2 x 2 split of a box of colorspace, each axis cut at its midpoint.

    Bins are indexed first-axis-major: index = 4*i_0 + 2*i_1 + i_2, where i_k is 0 for the
    half-open lower interval [lo, mid) and 1 for the closed upper interval [mid, hi].
    """
    ranges: Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]

    def __post_init__(self):
        if len(self.ranges) != 3:
            raise ValueError(f'a bin grid spans 3 axes (not {len(self.ranges)}).')
        for low, high in self.ranges:
            if not low < high:
                raise ValueError(f'axis range should have low < high (not [{low}, {high}]).')

    @property
    def edges(self):
        return tuple((low, 0.5 * (low + high), high) for low, high in self.ranges)

    def assign(self, coords):
        """
        Bin index of every coordinate triple
        :param coords: Array of shape (..., 3)
        :return: (flat int array of bin indices, number of coordinates clamped into the box)
        """
        coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
        low = np.array([r[0] for r in self.ranges])
        high = np.array([r[1] for r in self.ranges])
        outside = np.any((coords < low) | (coords > high), axis=1)
        clamped = np.clip(coords, low, high)
        upper = (clamped >= 0.5 * (low + high)).astype(np.int64)
        return 4 * upper[:, 0] + 2 * upper[:, 1] + upper[:, 2], int(np.count_nonzero(outside))


JZAZBZ_GRID = BinGrid(colorspace.JZAZBZ_RANGES)
RGB_GRID = BinGrid(((0.0, 255.0), (0.0, 255.0), (0.0, 255.0)))


@dataclass(frozen=True)
class ColorDistribution(object):
    """Normalized mass function over the 8 subvolumes of a `BinGrid`."""
    mass: Tuple[float, ...]

    def __post_init__(self):
        mass = squeeze_and_check(self.mass, size=N_BINS)
        if np.any(mass < 0.0) or not np.all(np.isfinite(mass)):
            raise ValueError(f'distribution components should be non-negative (not {mass.tolist()}).')
        if abs(float(np.sum(mass)) - 1.0) > NORMALIZATION_TOLERANCE:
            raise ValueError(f'distribution components should sum to 1 (not {float(np.sum(mass))!r}).')
        object.__setattr__(self, 'mass', tuple(float(m) for m in mass))

    @property
    def array(self):
        return np.array(self.mass, dtype=np.float64)

    @classmethod
    def from_counts(cls, counts):
        counts = squeeze_and_check(counts, size=N_BINS)
        total = float(np.sum(counts))
        if total <= 0.0:
            raise EmptyInput('cannot normalize an all-zero histogram.')
        return cls(tuple(counts / total))

    @classmethod
    def coerce(cls, x):
        return x if isinstance(x, cls) else cls(tuple(squeeze_and_check(x, size=N_BINS)))


def histogram_jzazbz(img, grid=JZAZBZ_GRID):
    """
    Fraction of an image's pixels in each JzAzBz subvolume
    :param img: ImageArray in JZAZBZ; coordinates marginally outside the grid are clamped in
    :param grid: BinGrid, the nominal JzAzBz box by default
    :return: ColorDistribution
    """
    if img.space is not ColorSpace.JZAZBZ:
        raise ValueError('histogram_jzazbz expects an image already transformed to JzAzBz.')
    index, clamped = grid.assign(img.pixels)
    if clamped:
        logger.debug('clamped %d of %d pixels into the JzAzBz grid', clamped, index.size)
    return ColorDistribution.from_counts(np.bincount(index, minlength=N_BINS))


def histogram_rgb(img):
    """Octant RGB distribution of an sRGB image, as stored under "rgb-dist"."""
    if img.space is not ColorSpace.SRGB:
        raise ValueError('histogram_rgb expects an sRGB image.')
    index, _ = RGB_GRID.assign(img.pixels)
    return ColorDistribution.from_counts(np.bincount(index, minlength=N_BINS))


def aggregate_word(distributions):
    """
    Component-wise mean and population standard deviation of a word's image distributions
    :param distributions: List of ColorDistribution (one per image)
    :return: (ColorDistribution mean, 8-element numpy array of standard deviations)
    """
    if len(distributions) == 0:
        raise EmptyInput('cannot aggregate zero distributions.')
    stack = np.stack([ColorDistribution.coerce(d).array for d in distributions])
    mean = np.mean(stack, axis=0)
    std = np.std(stack, axis=0)
    return ColorDistribution(tuple(mean)), std


def concat_embedding(mean, std, include_std=True):
    """8-dim (mean) or 16-dim (mean followed by std) feature vector in fixed bin order."""
    mean = ColorDistribution.coerce(mean).array
    if not include_std:
        return mean
    std = squeeze_and_check(std, size=N_BINS)
    if np.any(std < 0.0):
        raise ValueError(f'standard deviations should be non-negative (not {std.tolist()}).')
    return np.concatenate((mean, std))


def kl_divergence(p, q):
    """Kullback-Leibler divergence sum_k p_k ln(p_k / q_k) in nats, with 0 ln(0 / q) = 0."""
    p, q = ColorDistribution.coerce(p).array, ColorDistribution.coerce(q).array
    support = p > 0.0
    if np.any(q[support] == 0.0):
        raise SupportError('q has zero mass where p has positive mass.')
    return float(np.sum(rel_entr(p, q)))


def js_divergence(c1, c2):
    """
    Jensen-Shannon divergence between two color distributions
    :return: Value in [0, ln 2]; lower values mean more similar distributions
    """
    c1, c2 = ColorDistribution.coerce(c1), ColorDistribution.coerce(c2)
    return float(js_divergence_rows(c1.array[np.newaxis], c2.array[np.newaxis])[0])


def js_divergence_rows(p, q):
    """Row-wise JS divergence of two stacks of distributions of shape (n, 8)."""
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 2 or p.shape[1] != N_BINS:
        raise ValueError(f'expected two arrays of shape (n, {N_BINS}) (not {p.shape} and {q.shape}).')
    midpoint = 0.5 * (p + q)
    value = 0.5 * (np.sum(rel_entr(p, midpoint), axis=1) + np.sum(rel_entr(q, midpoint), axis=1))
    return np.clip(value, 0.0, np.log(2.0))


def cosine_similarity_rows(u, v):
    """Row-wise cosine similarity of two stacks of text vectors; NaN where a row has zero norm."""
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f'vectors of different shapes ({u.shape} != {v.shape}).')
    norms = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        value = np.sum(u * v, axis=1) / norms
    return np.where(norms > 0.0, np.clip(value, -1.0, 1.0), np.nan)


def cosine_similarity(u, v):
    """Cosine similarity of two text vectors. Color distributions are compared with `js_divergence`."""
    if isinstance(u, ColorDistribution) or isinstance(v, ColorDistribution):
        raise TypeError('color distributions are compared with js_divergence, not cosine similarity.')
    u, v = squeeze_and_check(u), squeeze_and_check(v)
    if u.size != v.size:
        raise DimensionMismatch(f'vectors of different dimension ({u.size} != {v.size}).')
    norm_u, norm_v = np.linalg.norm(u), np.linalg.norm(v)
    if norm_u == 0.0 or norm_v == 0.0:
        raise ZeroVector('cosine similarity is undefined for a zero vector.')
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


@dataclass(frozen=True)
class WordColorEmbedding(object):
    word: str
    jzazbz_dist: ColorDistribution
    jzazbz_dist_std: Optional[Tuple[float, ...]]
    rgb_dist: Tuple[float, ...]
    jzazbz_vector: Tuple[float, float, float]
    rgb_vector: Tuple[float, float, float]
    colorgram: Optional[imaging.Colorgram]
    image_count: int
    concreteness_mean: Optional[float] = None
    concreteness_sd: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'jzazbz_dist', ColorDistribution.coerce(self.jzazbz_dist))
        if self.jzazbz_dist_std is not None:
            std = squeeze_and_check(self.jzazbz_dist_std, size=N_BINS)
            if np.any(std < 0.0):
                raise ValueError(f'jzazbz_dist_std should be non-negative (not {std.tolist()}).')
            object.__setattr__(self, 'jzazbz_dist_std', tuple(float(s) for s in std))
        object.__setattr__(self, 'rgb_dist', ColorDistribution.coerce(self.rgb_dist).mass)
        for name in ('jzazbz_vector', 'rgb_vector'):
            vector = squeeze_and_check(getattr(self, name), size=3)
            object.__setattr__(self, name, tuple(float(c) for c in vector))
        if self.image_count < 1:
            raise ValueError(f'image_count should >= 1 (not {self.image_count}).')

    def embedding_vector(self, include_std=True):
        if include_std and self.jzazbz_dist_std is None:
            raise ValueError(f'{self.word!r} was embedded without standard deviations.')
        return concat_embedding(self.jzazbz_dist, self.jzazbz_dist_std, include_std)

    def with_concreteness(self, mean, sd):
        return replace(self, concreteness_mean=mean, concreteness_sd=sd)


def embedding_vector(embedding, include_std=True):
    return embedding.embedding_vector(include_std)


class WordEmbedder(object):
    def __init__(self, options=None):
        """
        Pipeline from a word's decoded images to its WordColorEmbedding
        :param options: dict with the optional keys
            * 'include_std' - keep per-bin standard deviations (`bool`, default: True),
            * 'n_threads'   - worker threads, one task per image (`int`, default: 1),
            * 'colorgram'   - compose the colorgram (`bool`, default: True).
        """
        options = options or {}
        self.include_std = options.get('include_std', True)
        self.n_threads = max(1, int(options.get('n_threads', 1)))
        self.colorgram = options.get('colorgram', True)

    def _image_statistics(self, img):
        srgb = imaging.resize_antialiased(img)
        jzazbz = imaging.to_jzazbz(srgb)
        return {'jzazbz_dist': histogram_jzazbz(jzazbz),
                'rgb_dist': histogram_rgb(srgb),
                'jzazbz_vector': np.mean(jzazbz.pixels.reshape(-1, 3), axis=0),
                'rgb_vector': np.mean(srgb.pixels.reshape(-1, 3).astype(np.float64), axis=0),
                'jzazbz_pixels': jzazbz.pixels if self.colorgram else None}

    def embed(self, word, images):
        """
        Embed one word
        :param word: The word
        :param images: List of sRGB ImageArray (any size; compressed to 300x300 here)
        :return: WordColorEmbedding
        """
        if len(images) == 0:
            raise EmptyInput(f'no usable images for {word!r}.')
        stats, pixel_sum = [], None
        with ThreadPoolExecutor(max_workers=self.n_threads) as executor:
            # map yields in input order, so the reduction order is fixed
            for s in executor.map(self._image_statistics, images):
                pixels = s.pop('jzazbz_pixels')
                if pixels is not None:
                    pixel_sum = np.array(pixels) if pixel_sum is None else pixel_sum + pixels
                stats.append(s)
        mean, std = aggregate_word([s['jzazbz_dist'] for s in stats])
        rgb_mean, _ = aggregate_word([s['rgb_dist'] for s in stats])
        colorgram = None
        if self.colorgram:
            colorgram = imaging.colorgram_from_mean(pixel_sum / len(images), len(images))
        return WordColorEmbedding(
            word=word,
            jzazbz_dist=mean,
            jzazbz_dist_std=tuple(std) if self.include_std else None,
            rgb_dist=rgb_mean.mass,
            jzazbz_vector=tuple(np.mean(np.stack([s['jzazbz_vector'] for s in stats]), axis=0)),
            rgb_vector=tuple(np.mean(np.stack([s['rgb_vector'] for s in stats]), axis=0)),
            colorgram=colorgram,
            image_count=len(images))
