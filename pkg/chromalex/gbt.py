"""
Gradient-boosted regression trees for binary classification under logistic loss

Each round fits a depth-limited tree to the gradient and hessian of the loss by exact greedy
split search and sets Newton leaf weights. The tree's contribution is then shrunk by the
learning rate and, if needed, backtracked until the training log-loss does not increase.

References
----------
Friedman, J.H., 2001.
Greedy function approximation: A gradient boosting machine.
Annals of Statistics, 29(5), pp.1189-1232.

Chen, T. and Guestrin, C., 2016.
XGBoost: A scalable tree boosting system.
KDD 2016, pp.785-794.
https://arxiv.org/abs/1603.02754
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import expit

from chromalex.errors import DegenerateLabels
from chromalex.validation import check_matrix, squeeze_and_check

logger = logging.getLogger(__name__)


def logistic_loss(labels, margin):
    """Mean log-loss of 0/1 labels given raw margins, computed without overflow."""
    return float(np.mean(np.where(labels == 1, np.logaddexp(0.0, -margin), np.logaddexp(0.0, margin))))


def _gradient_hessian(labels, margin):
    # sigmoid(F) - y written so that flipping labels and margins negates the gradient exactly
    gradient = np.where(labels == 1, -expit(-margin), expit(margin))
    hessian = expit(margin) * expit(-margin)
    return gradient, hessian


@dataclass
class _Node(object):
    value: float = 0.0
    feature: Optional[int] = None
    threshold: float = 0.0
    left: Optional['_Node'] = None
    right: Optional['_Node'] = None

    def predict(self, rows, out, index):
        if self.feature is None:
            out[index] = self.value
            return
        go_left = rows[index, self.feature] <= self.threshold
        self.left.predict(rows, out, index[go_left])
        self.right.predict(rows, out, index[~go_left])

    def scale(self, factor):
        if self.feature is None:
            self.value *= factor
        else:
            self.left.scale(factor)
            self.right.scale(factor)


class GradientBoostedTrees(object):
    def __init__(self, options=None):
        """
        Boosted trees classifier
        :param options: dict with the optional keys
            * 'rounds'           - boosting rounds (`int`, default: 200),
            * 'depth'            - maximal tree depth (`int`, default: 3),
            * 'learning_rate'    - shrinkage of every tree (`float`, default: 0.1),
            * 'reg_lambda'       - L2 penalty on leaf weights (`float`, default: 1.0),
            * 'min_child_weight' - minimal hessian sum of a leaf (`float`, default: 1e-6),
            * 'min_samples_leaf' - minimal samples of a leaf (`int`, default: 1),
            * 'subsample'        - row fraction drawn per round (`float`, default: 1.0),
            * 'seed_rng'         - seed of the row subsampling (`int`, default: 2022).
        """
        options = options or {}
        self.rounds = int(options.get('rounds', 200))
        self.depth = int(options.get('depth', 3))
        self.learning_rate = float(options.get('learning_rate', 0.1))
        self.reg_lambda = float(options.get('reg_lambda', 1.0))
        self.min_child_weight = float(options.get('min_child_weight', 1e-6))
        self.min_samples_leaf = int(options.get('min_samples_leaf', 1))
        self.subsample = float(options.get('subsample', 1.0))
        self.seed_rng = options.get('seed_rng', 2022)
        if self.rounds < 1 or self.depth < 1:
            raise ValueError(f'rounds and depth should >= 1 (not {self.rounds}, {self.depth}).')
        if not 0.0 < self.learning_rate <= 1.0 or not 0.0 < self.subsample <= 1.0:
            raise ValueError('learning_rate and subsample should be in (0, 1].')
        self.rng = np.random.default_rng(self.seed_rng)
        self.base_score = 0.0
        self.trees: List[_Node] = []
        self.loss_history: List[float] = []
        self.n_features = None

    def _leaf(self, g, h):
        return -g / (h + self.reg_lambda)

    def _score(self, g, h):
        return g * g / (h + self.reg_lambda)

    def _best_split(self, rows, gradient, hessian, index):
        g_total, h_total = np.sum(gradient[index]), np.sum(hessian[index])
        parent = self._score(g_total, h_total)
        best = (0.0, None, 0.0)
        n = index.size
        for feature in range(rows.shape[1]):
            order = index[np.argsort(rows[index, feature], kind='stable')]
            values = rows[order, feature]
            g_left, h_left = np.cumsum(gradient[order])[:-1], np.cumsum(hessian[order])[:-1]
            g_right, h_right = g_total - g_left, h_total - h_left
            counts = np.arange(1, n)
            valid = ((values[1:] > values[:-1]) & (counts >= self.min_samples_leaf) &
                     (n - counts >= self.min_samples_leaf) &
                     (h_left >= self.min_child_weight) & (h_right >= self.min_child_weight))
            if not np.any(valid):
                continue
            gain = 0.5 * (self._score(g_left, h_left) + self._score(g_right, h_right) - parent)
            gain = np.where(valid, gain, -np.inf)
            position = int(np.argmax(gain))
            if gain[position] > best[0]:
                best = (float(gain[position]), feature, 0.5 * (values[position] + values[position + 1]))
        return best

    def _build(self, rows, gradient, hessian, index, depth):
        node = _Node(value=self._leaf(np.sum(gradient[index]), np.sum(hessian[index])))
        if depth == self.depth or index.size < 2 * self.min_samples_leaf:
            return node
        gain, feature, threshold = self._best_split(rows, gradient, hessian, index)
        if feature is None or gain <= 1e-12:
            return node
        go_left = rows[index, feature] <= threshold
        node.feature, node.threshold = feature, threshold
        node.left = self._build(rows, gradient, hessian, index[go_left], depth + 1)
        node.right = self._build(rows, gradient, hessian, index[~go_left], depth + 1)
        return node

    @staticmethod
    def _tree_output(tree, rows):
        out = np.zeros(rows.shape[0])
        tree.predict(rows, out, np.arange(rows.shape[0]))
        return out

    def fit(self, features, labels):
        """
        Train on a feature matrix and 0/1 labels
        :param features: Matrix of shape (n_samples, n_features)
        :param labels: Sequence of 0/1 labels (1 is the positive class)
        :return: self
        """
        rows = check_matrix(features)
        labels = squeeze_and_check(labels)
        if labels.size != rows.shape[0]:
            raise ValueError(f'labels should have {rows.shape[0]} entries (not {labels.size}).')
        if not np.all((labels == 0.0) | (labels == 1.0)):
            raise ValueError('labels should be 0 or 1.')
        labels = labels.astype(np.int64)
        n_positive = int(np.sum(labels))
        n_negative = labels.size - n_positive
        if min(n_positive, n_negative) < 2:
            raise DegenerateLabels(f'each class needs >= 2 samples (got {n_negative} negative, {n_positive} positive).')
        self.n_features = rows.shape[1]
        self.base_score = float(np.log(n_positive) - np.log(n_negative))
        self.trees = []
        margin = np.full(labels.size, self.base_score)
        loss = logistic_loss(labels, margin)
        self.loss_history = [loss]
        all_rows = np.arange(labels.size)
        for _ in range(self.rounds):
            gradient, hessian = _gradient_hessian(labels, margin)
            index = all_rows
            if self.subsample < 1.0:
                size = max(2, int(round(self.subsample * labels.size)))
                index = np.sort(self.rng.choice(labels.size, size=size, replace=False))
            tree = self._build(rows, gradient, hessian, index, 0)
            update = self._tree_output(tree, rows)
            step = self.learning_rate
            for _ in range(30):
                trial = logistic_loss(labels, margin + step * update)
                if trial <= loss:
                    break
                step *= 0.5
            else:
                step, trial = 0.0, loss
            tree.scale(step)
            margin = margin + step * update
            loss = trial
            self.trees.append(tree)
            self.loss_history.append(loss)
        logger.debug('trained %d trees, log-loss %.6f -> %.6f', len(self.trees), self.loss_history[0], loss)
        return self

    def decision_function(self, features):
        if self.n_features is None:
            raise ValueError('the model has not been fitted.')
        rows = check_matrix(features)
        if rows.shape[1] != self.n_features:
            raise ValueError(f'features should have {self.n_features} columns (not {rows.shape[1]}).')
        margin = np.full(rows.shape[0], self.base_score)
        for tree in self.trees:
            margin += self._tree_output(tree, rows)
        return margin

    def predict_proba(self, features):
        return expit(self.decision_function(features))

    def predict(self, features):
        return (self.decision_function(features) > 0.0).astype(np.int64)

    def score(self, features, labels):
        return float(np.mean(self.predict(features) == squeeze_and_check(labels).astype(np.int64)))


def gbt_train(features, labels, params=None):
    return GradientBoostedTrees(params).fit(features, labels)


def gbt_predict(model, rows):
    return model.predict(rows)
