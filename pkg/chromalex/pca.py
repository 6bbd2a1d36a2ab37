"""
Principal component analysis by eigendecomposition of the sample covariance
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from chromalex.errors import RankDeficient
from chromalex.validation import check_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PcaModel(object):
    """Fitted components.

    `components` holds one unit-length principal axis per column, ordered by descending
    `eigenvalues`; the largest-magnitude loading of each axis is positive.
    """
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    rank: int

    @property
    def n_features(self):
        return self.mean.size


def pca_fit(data):
    """
    Fit principal components
    :param data: Matrix of shape (n_rows, n_features), n_rows >= 2
    :return: PcaModel
    """
    data = check_matrix(data, min_rows=2)
    n, d = data.shape
    mean = np.mean(data, axis=0)
    centered = data - mean
    cov = np.dot(centered.T, centered) / (n - 1)
    eigenvalues, vectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues, kind='stable')[::-1]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    vectors = vectors[:, order]
    signs = np.sign(vectors[np.argmax(np.abs(vectors), axis=0), np.arange(d)])
    vectors = vectors * np.where(signs == 0.0, 1.0, signs)
    tol = eigenvalues[0] * max(n, d) * np.finfo(np.float64).eps if d else 0.0
    rank = int(np.count_nonzero(eigenvalues > tol))
    return PcaModel(mean, vectors, eigenvalues, rank)


def _n_components(model, k, n_rows=None):
    if k < 1 or k > model.n_features:
        raise ValueError(f'k should be in [1, {model.n_features}] (not {k}).')
    if k > model.rank:
        message = f'{k} components requested but the data has numerical rank {model.rank}; truncating.'
        logger.warning(message)
        warnings.warn(message, RankDeficient, stacklevel=3)
        k = model.rank
    return k


def pca_transform(model, rows, k):
    """
    Project rows onto the top-`k` principal components
    :param model: PcaModel
    :param rows: Matrix of shape (m, n_features)
    :param k: Target dimension; truncated to the numerical rank with a RankDeficient warning
    :return: Matrix of shape (m, k)
    """
    rows = check_matrix(rows)
    if rows.shape[1] != model.n_features:
        raise ValueError(f'rows should have {model.n_features} columns (not {rows.shape[1]}).')
    k = _n_components(model, k)
    return np.dot(rows - model.mean, model.components[:, :k])


def pca_inverse_transform(model, scores):
    """Map projected rows back into the original feature space."""
    scores = check_matrix(scores)
    k = scores.shape[1]
    return model.mean + np.dot(scores, model.components[:, :k].T)


def fit_transform(data, k):
    """Fit on `data` and project it, with k checked against min(rows - 1, features)."""
    data = check_matrix(data, min_rows=2)
    limit = min(data.shape[0] - 1, data.shape[1])
    if k > limit:
        raise ValueError(f'k should <= min(rows - 1, features) = {limit} (not {k}).')
    model = pca_fit(data)
    return model, pca_transform(model, data, k)
