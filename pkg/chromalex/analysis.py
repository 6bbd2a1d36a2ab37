"""
Statistical analyses of word-color embeddings against text vectors and human ratings:
binned similarity trends, concreteness regressions with model comparison, and
metaphorical-vs-literal classification and similarity tests
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from chromalex.embedding import cosine_similarity_rows, js_divergence_rows
from chromalex.errors import InsufficientData, InsufficientJoin, SampleMismatch, SingularDesign
from chromalex.gbt import GradientBoostedTrees, gbt_predict, gbt_train
from chromalex.pca import pca_fit, pca_transform
from chromalex.ranktests import jonckheere_terpstra, wilcoxon_rank_sum
from chromalex.store import LabeledPair, PairLabel
from chromalex.validation import squeeze_and_check

logger = logging.getLogger(__name__)

__all__ = ['PairSimilarityRecord', 'PairLabel', 'LabeledPair', 'ModelKind', 'RegressionReport',
           'ClassifierReport', 'TrendPoint', 'GroupSummary', 'binned_trend', 'quantile_bins',
           'bayesian_information_criterion', 'fit_regression', 'compare_models', 'pca_fit', 'pca_transform',
           'gbt_train', 'gbt_predict', 'wilcoxon_rank_sum', 'jonckheere_terpstra', 'pair_similarity_records',
           'quartile_split', 'concreteness_regression', 'similarity_trend', 'group_summary', 'metaphor_pipeline',
           'metaphor_similarity', 'stratified_split', 'RankedWord', 'RankedPair', 'concreteness_extremes',
           'pair_similarity_extremes']

DEFAULT_N_BINS = 40
DEFAULT_N_PARTNERS = 500
MIN_JOINED_PAIRS = 50
DEFAULT_N_EXTREMES = 10
VARIANCE_FLOOR = 1e-12
Z_95 = 1.96


class PairSimilarityRecord(NamedTuple):
    word_a: str
    word_b: str
    js_sim: float
    cos_sim: Optional[float] = None
    concreteness_sum: Optional[float] = None


class ModelKind(Enum):
    LINEAR = 'linear'
    POLY3 = 'poly3'

    @property
    def degree(self):
        return 1 if self is ModelKind.LINEAR else 3


@dataclass(frozen=True)
class RegressionReport(object):
    model_kind: ModelKind
    coefficients: Tuple[float, ...]
    r_squared: float
    log_likelihood: float
    bic: float
    n: int

    @property
    def n_parameters(self):
        # regression coefficients plus the noise variance
        return len(self.coefficients) + 1

    def predict(self, x):
        return np.polynomial.polynomial.polyval(squeeze_and_check(x), self.coefficients)


@dataclass(frozen=True)
class ClassifierReport(object):
    embedding_name: str
    pca_dims: int
    train_accuracy: float
    test_accuracy: float
    seed: int
    n_train: int = 0
    n_test: int = 0


class TrendPoint(NamedTuple):
    mean_x: float
    mean_y: float
    count: int


class GroupSummary(NamedTuple):
    n: int
    mean: float
    sem: float
    ci_half_width: float


def quantile_bins(x, n_bins=DEFAULT_N_BINS):
    """
    Split sample positions into `n_bins` equal-count bins of increasing x
    The first `len(x) % n_bins` bins hold one extra point.
    :return: List of index arrays into `x`
    """
    x = squeeze_and_check(x)
    if n_bins < 1:
        raise ValueError(f'n_bins should >= 1 (not {n_bins}).')
    if x.size < n_bins:
        raise InsufficientData(f'{x.size} points cannot fill {n_bins} bins.')
    order = np.argsort(x, kind='stable')
    base, extra = divmod(x.size, n_bins)
    sizes = [base + (1 if i < extra else 0) for i in range(n_bins)]
    return np.split(order, np.cumsum(sizes)[:-1])


def binned_trend(x, y, n_bins=DEFAULT_N_BINS):
    """
    Mean x and mean y within equal-count quantile bins of x
    :return: List of TrendPoint(mean_x, mean_y, count) in increasing x order
    """
    x, y = squeeze_and_check(x), squeeze_and_check(y)
    if x.size != y.size:
        raise ValueError(f'x and y should have the same length ({x.size} != {y.size}).')
    return [TrendPoint(float(np.mean(x[b])), float(np.mean(y[b])), int(b.size)) for b in quantile_bins(x, n_bins)]


def bayesian_information_criterion(log_likelihood, n_parameters, n):
    return float(n_parameters * np.log(n) - 2.0 * log_likelihood)


def fit_regression(x, y, kind=ModelKind.LINEAR):
    """
    Least-squares polynomial fit with Gaussian likelihood and BIC
    :param x: Predictor values
    :param y: Response values
    :param kind: ModelKind.LINEAR or ModelKind.POLY3
    :return: RegressionReport, coefficients in increasing power order
    """
    x, y = squeeze_and_check(x), squeeze_and_check(y)
    if x.size != y.size:
        raise ValueError(f'x and y should have the same length ({x.size} != {y.size}).')
    kind = ModelKind(kind)
    design = np.vander(x, kind.degree + 1, increasing=True)
    n, p = design.shape
    if n < p + 2:
        raise InsufficientData(f'a {kind.value} fit needs >= {p + 2} samples (not {n}).')
    if np.linalg.matrix_rank(design) < p:
        raise SingularDesign(f'the {kind.value} design matrix is rank deficient.')
    coefficients = np.linalg.lstsq(design, y, rcond=None)[0]
    residuals = y - np.dot(design, coefficients)
    rss = float(np.dot(residuals, residuals))
    centered = y - np.mean(y)
    tss = float(np.dot(centered, centered))
    r_squared = 1.0 - rss / tss if tss > 0.0 else 1.0
    variance = max(rss / n, VARIANCE_FLOOR)
    log_likelihood = -0.5 * n * np.log(2.0 * np.pi * variance) - rss / (2.0 * variance)
    return RegressionReport(kind, tuple(float(c) for c in coefficients), float(r_squared),
                            float(log_likelihood), bayesian_information_criterion(log_likelihood, p + 1, n), n)


def compare_models(a, b):
    """Signed (lnL_a - lnL_b, BIC_a - BIC_b) of two fits of the same sample."""
    if a.n != b.n:
        raise SampleMismatch(f'reports were fitted on different samples (n = {a.n} and {b.n}).')
    return a.log_likelihood - b.log_likelihood, a.bic - b.bic


def group_summary(values):
    """Mean with its standard error and 95% confidence half-width (1.96 sem)."""
    values = squeeze_and_check(values)
    sem = float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return GroupSummary(int(values.size), float(np.mean(values)), sem, Z_95 * sem)


def _concreteness_of(embedding, concreteness):
    if concreteness is not None and embedding.word in concreteness:
        return concreteness.get(embedding.word)[0]
    return embedding.concreteness_mean


def pair_similarity_records(embeddings, words=None, n_partners=DEFAULT_N_PARTNERS, seed=2022,
                            text_vectors=None, concreteness=None, n_threads=1):
    """
    JS divergence (and text cosine similarity) between each word and randomly drawn partners
    :param embeddings: dict word -> WordColorEmbedding
    :param words: Words to pair up (default: all embeddings, sorted)
    :param n_partners: Partners drawn per word without replacement, capped at len(words) - 1
    :param seed: Seed of the partner sampling
    :param text_vectors: Optional TextVectorTable; pairs with a missing or zero vector get cos_sim None
    :param concreteness: Optional ConcretenessTable overriding the embeddings' own ratings
    :param n_threads: Worker threads, one task per word
    :return: List of PairSimilarityRecord grouped by word in `words` order
    """
    words = sorted(embeddings) if words is None else [w for w in words if w in embeddings]
    n = len(words)
    if n < 2:
        raise InsufficientData(f'pairing needs >= 2 embedded words (not {n}).')
    k = min(n_partners, n - 1)
    dists = np.stack([embeddings[w].jzazbz_dist.array for w in words])
    ratings = [_concreteness_of(embeddings[w], concreteness) for w in words]
    vectors, has_vector = None, np.zeros(n, dtype=bool)
    if text_vectors is not None:
        vectors = np.zeros((n, text_vectors.dimension))
        for i, w in enumerate(words):
            if w in text_vectors:
                vectors[i], has_vector[i] = text_vectors.get(w), True
    rng = np.random.default_rng(seed)
    partners = []
    for i in range(n):
        draw = rng.choice(n - 1, size=k, replace=False)
        partners.append(np.where(draw >= i, draw + 1, draw))

    def task(i):
        js = js_divergence_rows(np.repeat(dists[i:i + 1], k, axis=0), dists[partners[i]])
        cos = np.full(k, np.nan)
        if vectors is not None and has_vector[i]:
            cos = cosine_similarity_rows(np.repeat(vectors[i:i + 1], k, axis=0), vectors[partners[i]])
            cos[~has_vector[partners[i]]] = np.nan
        records = []
        for j, value, c in zip(partners[i], js, cos):
            rating_sum = None if ratings[i] is None or ratings[j] is None else ratings[i] + ratings[j]
            records.append(PairSimilarityRecord(words[i], words[j], float(value),
                                                None if np.isnan(c) else float(c), rating_sum))
        return records

    with ThreadPoolExecutor(max_workers=max(1, n_threads)) as executor:
        return [r for records in executor.map(task, range(n)) for r in records]


def quartile_split(records):
    """
    Pairs whose summed concreteness is in the top ("concrete") and bottom ("abstract") quartile
    :return: (concrete records, abstract records); records without concreteness are ignored
    """
    rated = [r for r in records if r.concreteness_sum is not None]
    if not rated:
        raise InsufficientData('no pair carries a concreteness rating.')
    sums = np.array([r.concreteness_sum for r in rated])
    low, high = np.percentile(sums, [25.0, 75.0])
    return [r for r in rated if r.concreteness_sum >= high], [r for r in rated if r.concreteness_sum <= low]


@dataclass
class ConcretenessAnalysis(object):
    """Binned similarity against binned summed concreteness, per backend, with fitted models."""
    trends: Dict[str, List[TrendPoint]] = field(default_factory=dict)
    reports: Dict[Tuple[str, ModelKind], RegressionReport] = field(default_factory=dict)
    comparisons: List[Tuple[str, str, float, float]] = field(default_factory=list)
    n_pairs: int = 0


def concreteness_regression(records, n_bins=DEFAULT_N_BINS):
    """
    Regress binned summed concreteness on binned pair similarity
    Pairs are binned into `n_bins` equal-count bins of summed concreteness; within every bin the
    mean similarity (JS for "color", cosine for "text") is the predictor of the mean concreteness.
    LINEAR and POLY3 fits are compared within each backend and, when text similarities exist,
    across backends on the same bins.
    :param records: List of PairSimilarityRecord
    :return: ConcretenessAnalysis
    """
    rated = [r for r in records if r.concreteness_sum is not None]
    backends = {'color': lambda r: r.js_sim}
    with_text = [r for r in rated if r.cos_sim is not None]
    if with_text:
        # both backends are binned on the same pairs so their fits share one sample
        rated = with_text
        backends['text'] = lambda r: r.cos_sim
    if len(rated) < n_bins:
        raise InsufficientData(f'{len(rated)} rated pairs cannot fill {n_bins} bins.')
    concreteness = np.array([r.concreteness_sum for r in rated])
    analysis = ConcretenessAnalysis(n_pairs=len(rated))
    for backend, similarity_of in backends.items():
        similarity = np.array([similarity_of(r) for r in rated])
        trend = binned_trend(concreteness, similarity, n_bins)
        analysis.trends[backend] = trend
        x = np.array([p.mean_y for p in trend])
        y = np.array([p.mean_x for p in trend])
        for kind in ModelKind:
            analysis.reports[(backend, kind)] = fit_regression(x, y, kind)
        delta_lnl, delta_bic = compare_models(analysis.reports[(backend, ModelKind.POLY3)],
                                              analysis.reports[(backend, ModelKind.LINEAR)])
        analysis.comparisons.append((f'{backend}:poly3', f'{backend}:linear', delta_lnl, delta_bic))
    if 'text' in backends:
        for kind in ModelKind:
            delta_lnl, delta_bic = compare_models(analysis.reports[('color', kind)], analysis.reports[('text', kind)])
            analysis.comparisons.append((f'color:{kind.value}', f'text:{kind.value}', delta_lnl, delta_bic))
    return analysis


@dataclass
class SimilarityTrend(object):
    """Binned JS divergence against binned text cosine similarity, overall and by concreteness quartile."""
    trends: Dict[str, List[TrendPoint]] = field(default_factory=dict)
    jt: Dict[str, Tuple[float, float]] = field(default_factory=dict)


def similarity_trend(records, n_bins=DEFAULT_N_BINS):
    """
    Color similarity as a function of text similarity
    For every group ("all", and "concrete"/"abstract" when ratings exist) the pairs are binned by
    cosine similarity; a Jonckheere-Terpstra test checks that JS divergence falls as cosine
    similarity rises (groups are tested in decreasing-cosine order).
    :return: SimilarityTrend
    """
    paired = [r for r in records if r.cos_sim is not None]
    groups = {'all': paired}
    if any(r.concreteness_sum is not None for r in paired):
        groups['concrete'], groups['abstract'] = quartile_split(paired)
    result = SimilarityTrend()
    for name, group in groups.items():
        if len(group) < n_bins:
            if name == 'all':
                raise InsufficientData(f'{len(group)} pairs with text vectors cannot fill {n_bins} bins.')
            logger.warning('skipping the %s trend: %d pairs for %d bins', name, len(group), n_bins)
            continue
        cos = np.array([r.cos_sim for r in group])
        js = np.array([r.js_sim for r in group])
        result.trends[name] = binned_trend(cos, js, n_bins)
        if n_bins >= 3:
            bins = quantile_bins(cos, n_bins)
            result.jt[name] = tuple(jonckheere_terpstra([js[b] for b in reversed(bins)]))
    return result


def _joinable(pair, color_embeddings, text_vectors):
    return all(w in color_embeddings and w in text_vectors for w in (pair.adjective, pair.noun))


def join_pairs(pairs, color_embeddings, text_vectors):
    """Pairs whose two words have both a color embedding and a text vector, and the dropped count."""
    joined = [p for p in pairs if _joinable(p, color_embeddings, text_vectors)]
    dropped = len(pairs) - len(joined)
    if dropped:
        logger.info('join dropped %d of %d labeled pairs', dropped, len(pairs))
    return joined, dropped


def color_pair_features(pairs, color_embeddings):
    """Adjective and noun 8-bin mean distributions followed by their JS divergence (17 columns)."""
    adjectives = np.stack([color_embeddings[p.adjective].jzazbz_dist.array for p in pairs])
    nouns = np.stack([color_embeddings[p.noun].jzazbz_dist.array for p in pairs])
    return np.column_stack((adjectives, nouns, js_divergence_rows(adjectives, nouns)))


def text_pair_features(pairs, text_vectors):
    """Element-wise difference adjective vector minus noun vector."""
    return np.stack([text_vectors.get(p.adjective) - text_vectors.get(p.noun) for p in pairs])


def stratified_split(labels, test_fraction=0.2, rng=None):
    """
    Per-class shuffled train/test split
    Each class sends round(test_fraction * size) samples to the test set, at least one, and
    always keeps two for training.
    :return: (sorted train indices, sorted test indices)
    """
    labels = np.asarray(labels)
    rng = rng if rng is not None else np.random.default_rng()
    train, test = [], []
    for value in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == value))
        n_test = min(max(1, int(round(test_fraction * members.size))), members.size - 2)
        if n_test < 1:
            raise InsufficientData(f'class {value!r} has {members.size} samples, too few to split.')
        test.append(members[:n_test])
        train.append(members[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def metaphor_pipeline(pairs, color_embeddings, text_vectors, dims_sweep, seed=2022, params=None,
                      min_pairs=MIN_JOINED_PAIRS):
    """
    Metaphorical-vs-literal classification accuracy of both backends across PCA dimensions
    One stratified 80/20 split drawn from `seed` is shared by every backend and dimension;
    PCA is fitted on all joined pairs of a backend before projecting.
    :param pairs: List of LabeledPair
    :param color_embeddings: dict word -> WordColorEmbedding
    :param text_vectors: TextVectorTable
    :param dims_sweep: PCA target dimensions; a dimension above a backend's feature count is skipped
    :param seed: Seed of the split and of the boosted trees
    :param params: Options of GradientBoostedTrees ('rounds', 'depth', 'learning_rate', ...)
    :return: List of ClassifierReport, color reports first, each in `dims_sweep` order
    """
    joined, _ = join_pairs(pairs, color_embeddings, text_vectors)
    if len(joined) < min_pairs:
        raise InsufficientJoin(f'{len(joined)} joinable pairs, at least {min_pairs} needed.')
    labels = np.array([1 if p.label is PairLabel.METAPHORICAL else 0 for p in joined])
    train, test = stratified_split(labels, rng=np.random.default_rng(seed))
    features = {'color': color_pair_features(joined, color_embeddings),
                'text': text_pair_features(joined, text_vectors)}
    reports = []
    for name, data in features.items():
        model = pca_fit(data)
        for k in dims_sweep:
            if k > min(data.shape[0] - 1, data.shape[1]):
                logger.warning('skipping %s at %d dimensions: only %d features', name, k, data.shape[1])
                continue
            projected = pca_transform(model, data, k)
            options = dict(params or {})
            options['seed_rng'] = seed
            classifier = GradientBoostedTrees(options).fit(projected[train], labels[train])
            reports.append(ClassifierReport(name, int(k),
                                            classifier.score(projected[train], labels[train]),
                                            classifier.score(projected[test], labels[test]),
                                            seed, int(train.size), int(test.size)))
            logger.info('%s @ %d dims: train %.3f, test %.3f', name, k,
                        reports[-1].train_accuracy, reports[-1].test_accuracy)
    return reports


@dataclass
class MetaphorSimilarity(object):
    """Pair similarity by label, per backend, and the Wilcoxon rank-sum test between labels."""
    summaries: Dict[Tuple[str, PairLabel], GroupSummary] = field(default_factory=dict)
    tests: Dict[str, Tuple[float, float]] = field(default_factory=dict)


def metaphor_similarity(pairs, color_embeddings, text_vectors):
    """
    Compare the similarity of metaphorical and literal pairs
    Color similarity is the JS divergence (lower = more similar); text similarity is cosine.
    :return: MetaphorSimilarity
    """
    joined, _ = join_pairs(pairs, color_embeddings, text_vectors)
    result = MetaphorSimilarity()
    by_label = {label: [p for p in joined if p.label is label] for label in PairLabel}
    if any(len(group) == 0 for group in by_label.values()):
        raise InsufficientJoin('both metaphorical and literal pairs are needed.')
    values = {}
    for label, group in by_label.items():
        color = color_pair_features(group, color_embeddings)[:, -1]
        adjectives = np.stack([text_vectors.get(p.adjective) for p in group])
        nouns = np.stack([text_vectors.get(p.noun) for p in group])
        cos = cosine_similarity_rows(adjectives, nouns)
        values[('color', label)] = color
        values[('text', label)] = cos[~np.isnan(cos)]
    for key, data in values.items():
        if data.size:
            result.summaries[key] = group_summary(data)
    for backend in ('color', 'text'):
        a, b = values[(backend, PairLabel.METAPHORICAL)], values[(backend, PairLabel.LITERAL)]
        if a.size and b.size:
            result.tests[backend] = tuple(wilcoxon_rank_sum(a, b))
    return result


class RankedWord(NamedTuple):
    end: str  # 'most' or 'least'
    rank: int
    word: str
    concreteness: float


class RankedPair(NamedTuple):
    backend: str
    end: str  # 'most' or 'least' similar
    rank: int
    adjective: str
    noun: str
    label: PairLabel
    similarity: float


def concreteness_extremes(words, concreteness, n=DEFAULT_N_EXTREMES):
    """
    The most and least concrete of `words`
    :param concreteness: Mapping with `get(word) -> (mean, sd)` or None, e.g. a ConcretenessTable
    :param n: Words per end, fewer when not enough words are rated
    :return: List of RankedWord, the most concrete first (rank 1 = highest mean), then the least concrete
    """
    if n < 1:
        raise ValueError(f'n should >= 1 (not {n!r}).')
    rated = sorted((concreteness.get(w)[0], w) for w in words if concreteness.get(w) is not None)
    if not rated:
        raise InsufficientData('no rated words to rank.')
    n = min(n, len(rated))
    most = sorted(rated, key=lambda item: (-item[0], item[1]))[:n]
    return [RankedWord('most', i + 1, w, float(m)) for i, (m, w) in enumerate(most)] + \
        [RankedWord('least', i + 1, w, float(m)) for i, (m, w) in enumerate(rated[:n])]


def pair_similarity_extremes(pairs, color_embeddings, text_vectors, n=DEFAULT_N_EXTREMES):
    """
    The most and least similar adjective-noun pairs under each backend
    Color similarity is the JS divergence (most similar = lowest), text similarity the cosine
    (most similar = highest); pairs with an undefined cosine are left out of the text ranking.
    :return: List of RankedPair, color before text, each 'most' before 'least'
    """
    if n < 1:
        raise ValueError(f'n should >= 1 (not {n!r}).')
    joined, _ = join_pairs(pairs, color_embeddings, text_vectors)
    if not joined:
        raise InsufficientJoin('no labeled pair has color embeddings and text vectors for both words.')
    adjectives = np.stack([text_vectors.get(p.adjective) for p in joined])
    nouns = np.stack([text_vectors.get(p.noun) for p in joined])
    similarity = {'color': (color_pair_features(joined, color_embeddings)[:, -1], 1.0),
                  'text': (cosine_similarity_rows(adjectives, nouns), -1.0)}
    rows = []
    for backend, (values, sign) in similarity.items():
        # ascending order puts the most similar pair first
        ranked = sorted((sign * v, p.adjective, p.noun, i) for i, (p, v) in enumerate(zip(joined, values))
                        if not np.isnan(v))
        k = min(n, len(ranked))
        for end, chosen in (('most', ranked[:k]), ('least', ranked[::-1][:k])):
            for rank, (_, _, _, i) in enumerate(chosen, start=1):
                pair = joined[i]
                rows.append(RankedPair(backend, end, rank, pair.adjective, pair.noun, pair.label, float(values[i])))
    return rows
