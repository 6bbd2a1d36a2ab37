import numpy as np
import pytest

from chromalex import analysis
from chromalex.analysis import (LabeledPair, ModelKind, PairLabel, PairSimilarityRecord, RegressionReport,
                                bayesian_information_criterion, binned_trend, compare_models, fit_regression)
from chromalex.embedding import js_divergence
from chromalex.errors import InsufficientData, InsufficientJoin, SampleMismatch, SingularDesign
from chromalex.store import ConcretenessTable, TextVectorTable


def _text_table(vectors):
    vectors = {w: np.asarray(v, dtype=np.float64) for w, v in vectors.items()}
    return TextVectorTable(vectors, len(next(iter(vectors.values()))))


def _separable_inputs(separable_pairs, make_embedding):
    pairs, masses, vectors = separable_pairs
    embeddings = {word: make_embedding(word, mass) for word, mass in masses.items()}
    return pairs, embeddings, _text_table(vectors)


class TestBinnedTrend:
    def test_one_point_per_bin(self):
        x = np.arange(40.0)
        trend = binned_trend(x[::-1], 2.0 * x[::-1], 40)
        assert [(p.mean_x, p.mean_y, p.count) for p in trend] == [(float(i), 2.0 * i, 1) for i in range(40)]

    def test_constant_y(self):
        rng = np.random.default_rng(0)
        trend = binned_trend(rng.normal(size=200), np.full(200, 3.5), 40)
        assert all(p.mean_y == 3.5 for p in trend)

    def test_remainder_goes_to_first_bins(self):
        sizes = [p.count for p in binned_trend(np.random.default_rng(1).normal(size=81), np.zeros(81), 40)]
        assert sizes == [3] + [2] * 39

    def test_counts_balanced(self):
        sizes = [b.size for b in analysis.quantile_bins(np.random.default_rng(2).normal(size=1234), 40)]
        assert max(sizes) - min(sizes) <= 1
        assert sum(sizes) == 1234

    def test_too_few_points(self):
        with pytest.raises(InsufficientData):
            binned_trend(np.arange(10.0), np.arange(10.0), 40)


class TestRegression:
    def test_perfect_linear(self):
        x = np.linspace(0.0, 1.0, 25)
        report = fit_regression(x, 3.0 - 2.0 * x, ModelKind.LINEAR)
        assert abs(report.r_squared - 1.0) <= 1e-9
        np.testing.assert_allclose(report.coefficients, [3.0, -2.0], atol=1e-9)
        assert np.isfinite(report.log_likelihood)
        assert report.n_parameters == 3

    def test_perfect_cubic(self):
        x = np.linspace(-2.0, 2.0, 30)
        report = fit_regression(x, x ** 3, ModelKind.POLY3)
        assert abs(report.r_squared - 1.0) <= 1e-9

    def test_matches_normal_equations(self):
        x = np.array([0.1, 0.4, 0.5, 0.9, 1.3, 1.7, 2.0, 2.2, 2.9, 3.1])
        y = np.array([1.2, 1.9, 2.1, 2.0, 3.3, 3.1, 4.8, 4.4, 6.1, 6.0])
        for kind in ModelKind:
            design = np.column_stack([x ** k for k in range(kind.degree + 1)])
            expected = np.linalg.solve(design.T @ design, design.T @ y)
            np.testing.assert_allclose(fit_regression(x, y, kind).coefficients, expected, atol=1e-8)

    def test_likelihood_and_bic(self):
        x = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        y = np.array([0.1, 0.9, 2.2, 2.8, 4.1, 5.0])
        report = fit_regression(x, y)
        rss = float(np.sum((y - report.predict(x)) ** 2))
        sigma2 = rss / x.size
        expected = -0.5 * x.size * np.log(2.0 * np.pi * sigma2) - rss / (2.0 * sigma2)
        assert report.log_likelihood == pytest.approx(expected, abs=1e-9)
        assert report.bic == pytest.approx(3 * np.log(6) - 2.0 * expected, abs=1e-9)

    def test_poly3_never_worse(self):
        rng = np.random.default_rng(100)
        for _ in range(100):
            x = rng.uniform(-1.0, 1.0, size=20)
            y = rng.normal(size=20)
            linear = fit_regression(x, y, ModelKind.LINEAR)
            cubic = fit_regression(x, y, ModelKind.POLY3)
            assert cubic.r_squared >= linear.r_squared - 1e-12

    def test_errors(self):
        with pytest.raises(SingularDesign):
            fit_regression(np.ones(10), np.arange(10.0))
        with pytest.raises(InsufficientData):
            fit_regression([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
        with pytest.raises(InsufficientData):
            fit_regression(np.arange(5.0), np.arange(5.0), ModelKind.POLY3)


class TestCompareModels:
    @staticmethod
    def _report(n_coefficients, log_likelihood, n):
        return RegressionReport(ModelKind.LINEAR, (0.0,) * n_coefficients, 0.5, log_likelihood,
                                bayesian_information_criterion(log_likelihood, n_coefficients + 1, n), n)

    def test_identical(self):
        report = self._report(2, -10.0, 50)
        assert compare_models(report, report) == (0.0, 0.0)

    def test_two_extra_parameters(self):
        d_lnl, d_bic = compare_models(self._report(4, -7.5, 100), self._report(2, -7.5, 100))
        assert d_lnl == 0.0
        assert abs(d_bic - 2.0 * np.log(100.0)) <= 1e-9

    def test_sample_mismatch(self):
        with pytest.raises(SampleMismatch):
            compare_models(self._report(2, -1.0, 100), self._report(2, -1.0, 99))


class TestSummaries:
    def test_group_summary(self):
        summary = analysis.group_summary([1.0, 2.0, 3.0, 4.0])
        assert summary.n == 4
        assert summary.mean == 2.5
        assert summary.sem == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
        assert summary.ci_half_width == pytest.approx(1.96 * summary.sem)

    def test_single_value(self):
        assert analysis.group_summary([7.0]).sem == 0.0

    def test_stratified_split(self):
        labels = np.array([0] * 60 + [1] * 40)
        train, test = analysis.stratified_split(labels, rng=np.random.default_rng(4))
        assert np.intersect1d(train, test).size == 0
        assert np.union1d(train, test).tolist() == list(range(100))
        assert np.sum(labels[test] == 0) == 12
        assert np.sum(labels[test] == 1) == 8
        again = analysis.stratified_split(labels, rng=np.random.default_rng(4))
        np.testing.assert_array_equal(again[1], test)

    def test_stratified_split_keeps_two_for_training(self):
        train, test = analysis.stratified_split(np.array([0, 0, 0, 1, 1, 1]), rng=np.random.default_rng(0))
        assert test.size == 2
        assert train.size == 4
        with pytest.raises(InsufficientData):
            analysis.stratified_split(np.array([0, 0, 1, 1, 1]), rng=np.random.default_rng(0))


class TestPairRecords:
    def _embeddings(self, make_embedding, n=20):
        rng = np.random.default_rng(31)
        return {f'w{i:02d}': make_embedding(f'w{i:02d}', rng.dirichlet(np.ones(8)), concreteness=1.0 + 0.2 * i)
                for i in range(n)}

    def test_partners(self, make_embedding):
        embeddings = self._embeddings(make_embedding)
        records = analysis.pair_similarity_records(embeddings, n_partners=5, seed=3)
        assert len(records) == 100
        for word in embeddings:
            partners = [r.word_b for r in records if r.word_a == word]
            assert len(partners) == len(set(partners)) == 5
            assert word not in partners
        record = records[0]
        assert record.js_sim == pytest.approx(js_divergence(embeddings[record.word_a].jzazbz_dist,
                                                            embeddings[record.word_b].jzazbz_dist), abs=1e-12)
        assert record.cos_sim is None
        expected = embeddings[record.word_a].concreteness_mean + embeddings[record.word_b].concreteness_mean
        assert record.concreteness_sum == pytest.approx(expected)

    def test_deterministic_across_threads(self, make_embedding):
        embeddings = self._embeddings(make_embedding)
        single = analysis.pair_similarity_records(embeddings, n_partners=7, seed=9)
        threaded = analysis.pair_similarity_records(embeddings, n_partners=7, seed=9, n_threads=4)
        assert single == threaded

    def test_partners_capped(self, make_embedding):
        embeddings = self._embeddings(make_embedding, n=4)
        assert len(analysis.pair_similarity_records(embeddings, n_partners=500)) == 12

    def test_text_and_table_concreteness(self, make_embedding):
        embeddings = self._embeddings(make_embedding, n=3)
        vectors = _text_table({'w00': [1.0, 0.0], 'w01': [1.0, 1.0]})
        table = ConcretenessTable({'w00': (2.0, 0.1), 'w01': (3.0, 0.1), 'w02': (4.0, 0.1)})
        records = analysis.pair_similarity_records(embeddings, text_vectors=vectors, concreteness=table,
                                                   n_partners=2)
        by_pair = {(r.word_a, r.word_b): r for r in records}
        assert by_pair[('w00', 'w01')].cos_sim == pytest.approx(1.0 / np.sqrt(2.0))
        assert by_pair[('w00', 'w02')].cos_sim is None
        assert by_pair[('w01', 'w02')].concreteness_sum == 7.0

    def test_needs_two_words(self, make_embedding):
        with pytest.raises(InsufficientData):
            analysis.pair_similarity_records(self._embeddings(make_embedding, n=1))

    def test_quartile_split(self):
        records = [PairSimilarityRecord('a', 'b', 0.1, None, float(i)) for i in range(100)]
        records.append(PairSimilarityRecord('a', 'c', 0.1))
        concrete, abstract = analysis.quartile_split(records)
        assert min(r.concreteness_sum for r in concrete) >= 74.25
        assert max(r.concreteness_sum for r in abstract) <= 24.75
        assert len(concrete) == len(abstract) == 25


class TestConcretenessRegression:
    def test_planted_linear_relation(self):
        rng = np.random.default_rng(40)
        js = rng.uniform(0.05, 0.6, size=400)
        records = [PairSimilarityRecord('a', 'b', float(v), None, 9.0 - 8.0 * float(v)) for v in js]
        result = analysis.concreteness_regression(records, n_bins=40)
        assert set(result.trends) == {'color'}
        assert abs(result.reports[('color', ModelKind.LINEAR)].r_squared - 1.0) <= 1e-9
        np.testing.assert_allclose(result.reports[('color', ModelKind.LINEAR)].coefficients, [9.0, -8.0], atol=1e-9)
        assert [(a, b) for a, b, _, _ in result.comparisons] == [('color:poly3', 'color:linear')]

    def test_both_backends(self):
        rng = np.random.default_rng(41)
        records = [PairSimilarityRecord('a', 'b', float(j), float(c), float(s))
                   for j, c, s in zip(rng.uniform(0, 0.6, 300), rng.uniform(-0.2, 0.8, 300),
                                      rng.uniform(2, 10, 300))]
        records += [PairSimilarityRecord('a', 'c', 0.3, None, 5.0)] * 10
        result = analysis.concreteness_regression(records, n_bins=20)
        assert result.n_pairs == 300
        assert set(result.trends) == {'color', 'text'}
        assert len(result.reports) == 4
        assert [(a, b) for a, b, _, _ in result.comparisons] == [
            ('color:poly3', 'color:linear'), ('text:poly3', 'text:linear'),
            ('color:linear', 'text:linear'), ('color:poly3', 'text:poly3')]

    def test_unrated(self):
        with pytest.raises(InsufficientData):
            analysis.concreteness_regression([PairSimilarityRecord('a', 'b', 0.1)] * 100)


class TestSimilarityTrend:
    def _records(self, n=400):
        rng = np.random.default_rng(50)
        cos = rng.uniform(-0.2, 0.9, size=n)
        js = 0.5 - 0.3 * cos + rng.normal(0.0, 0.02, size=n)
        concreteness = rng.uniform(2.0, 10.0, size=n)
        return [PairSimilarityRecord('a', 'b', float(j), float(c), float(s)) for j, c, s in zip(js, cos, concreteness)]

    def test_trend_and_jt(self):
        result = analysis.similarity_trend(self._records(), n_bins=10)
        assert set(result.trends) == {'all', 'concrete', 'abstract'}
        means = [p.mean_y for p in result.trends['all']]
        assert means == sorted(means, reverse=True)
        assert result.jt['all'][1] < 1e-6

    def test_without_text(self):
        with pytest.raises(InsufficientData):
            analysis.similarity_trend([PairSimilarityRecord('a', 'b', 0.1, None, 4.0)] * 50, n_bins=10)


class TestMetaphor:
    def test_separable_fixture(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        reports = analysis.metaphor_pipeline(pairs, embeddings, vectors, [2, 4, 8], seed=2022, params={'rounds': 50})
        assert [(r.embedding_name, r.pca_dims) for r in reports] == [
            ('color', 2), ('color', 4), ('color', 8), ('text', 2), ('text', 4), ('text', 8)]
        for report in reports:
            assert report.n_train == 96
            assert report.n_test == 24
            if report.embedding_name == 'color':
                assert report.test_accuracy == 1.0
                assert report.train_accuracy == 1.0

    def test_reproducible(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        first = analysis.metaphor_pipeline(pairs, embeddings, vectors, [2, 4], seed=5, params={'rounds': 20})
        second = analysis.metaphor_pipeline(pairs, embeddings, vectors, [2, 4], seed=5, params={'rounds': 20})
        assert first == second

    @pytest.mark.filterwarnings('ignore::chromalex.errors.RankDeficient')
    def test_skips_dimensions_above_feature_count(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        reports = analysis.metaphor_pipeline(pairs, embeddings, vectors, [12], params={'rounds': 5})
        assert [(r.embedding_name, r.pca_dims) for r in reports] == [('color', 12)]

    def test_full_dimension_pca_preserves_distances(self, separable_pairs, make_embedding):
        from scipy.spatial.distance import pdist

        pairs, _, vectors = _separable_inputs(separable_pairs, make_embedding)
        features = analysis.text_pair_features(pairs, vectors)
        projected = analysis.pca_transform(analysis.pca_fit(features), features, features.shape[1])
        np.testing.assert_allclose(pdist(projected), pdist(features), atol=1e-9)

    def test_features(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        color = analysis.color_pair_features(pairs[:4], embeddings)
        assert color.shape == (4, 17)
        literal = [i for i, p in enumerate(pairs[:4]) if p.label is PairLabel.LITERAL]
        np.testing.assert_allclose(color[literal, -1], np.log(2.0), atol=1e-12)
        text = analysis.text_pair_features(pairs[:4], vectors)
        np.testing.assert_array_equal(text[0], vectors.get(pairs[0].adjective) - vectors.get(pairs[0].noun))

    def test_insufficient_join(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        unknown = [LabeledPair('unknown', p.noun, p.label) for p in pairs[40:]]
        with pytest.raises(InsufficientJoin):
            analysis.metaphor_pipeline(pairs[:40] + unknown, embeddings, vectors, [2])

    def test_similarity_by_label(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        result = analysis.metaphor_similarity(pairs, embeddings, vectors)
        literal = result.summaries[('color', PairLabel.LITERAL)]
        metaphorical = result.summaries[('color', PairLabel.METAPHORICAL)]
        assert literal.n == metaphorical.n == 60
        assert literal.mean == pytest.approx(np.log(2.0))
        assert literal.mean > metaphorical.mean
        assert result.tests['color'][1] < 0.01
        assert set(result.tests) == {'color', 'text'}

    def test_similarity_needs_both_labels(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        with pytest.raises(InsufficientJoin):
            analysis.metaphor_similarity([p for p in pairs if p.label is PairLabel.LITERAL], embeddings, vectors)


class TestExtremes:
    def test_concreteness_ends(self):
        table = ConcretenessTable({'a': (4.9, 0.1), 'b': (1.2, 0.3), 'c': (3.0, 0.2), 'd': (4.9, 0.4)})
        ranked = analysis.concreteness_extremes(['a', 'b', 'c', 'd', 'unrated'], table, n=2)
        assert [(r.end, r.rank, r.word, r.concreteness) for r in ranked] == [
            ('most', 1, 'a', 4.9), ('most', 2, 'd', 4.9), ('least', 1, 'b', 1.2), ('least', 2, 'c', 3.0)]

    def test_concreteness_n_capped(self):
        table = ConcretenessTable({'a': (2.0, 0.1), 'b': (3.0, 0.1)})
        ranked = analysis.concreteness_extremes(['a', 'b'], table)
        assert [r.word for r in ranked] == ['b', 'a', 'a', 'b']

    def test_concreteness_invalid(self):
        table = ConcretenessTable({'a': (2.0, 0.1)})
        with pytest.raises(InsufficientData):
            analysis.concreteness_extremes(['z'], table)
        with pytest.raises(ValueError):
            analysis.concreteness_extremes(['a'], table, n=0)

    def test_pair_ends(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        ranked = analysis.pair_similarity_extremes(pairs, embeddings, vectors, n=5)
        assert len(ranked) == 20
        color_most = [r for r in ranked if r.backend == 'color' and r.end == 'most']
        color_least = [r for r in ranked if r.backend == 'color' and r.end == 'least']
        assert [r.rank for r in color_most] == [1, 2, 3, 4, 5]
        assert all(r.label is PairLabel.METAPHORICAL for r in color_most)
        assert [r.similarity for r in color_most] == sorted(r.similarity for r in color_most)
        assert all(r.label is PairLabel.LITERAL for r in color_least)
        np.testing.assert_allclose([r.similarity for r in color_least], np.log(2.0), atol=1e-12)
        expected = min(js_divergence(embeddings[p.adjective].jzazbz_dist, embeddings[p.noun].jzazbz_dist)
                       for p in pairs)
        assert color_most[0].similarity == pytest.approx(expected, abs=1e-12)

    def test_pair_text_ends(self, separable_pairs, make_embedding):
        pairs, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        ranked = [r for r in analysis.pair_similarity_extremes(pairs, embeddings, vectors, n=3) if r.backend == 'text']
        cosines = []
        for p in pairs:
            a, b = vectors.get(p.adjective), vectors.get(p.noun)
            cosines.append(float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b))))
        assert [r.similarity for r in ranked if r.end == 'most'] == pytest.approx(sorted(cosines, reverse=True)[:3])
        assert [r.similarity for r in ranked if r.end == 'least'] == pytest.approx(sorted(cosines)[:3])

    def test_pair_join_failure(self, separable_pairs, make_embedding):
        _, embeddings, vectors = _separable_inputs(separable_pairs, make_embedding)
        with pytest.raises(InsufficientJoin):
            analysis.pair_similarity_extremes([LabeledPair('unknown', 'other', 'literal')], embeddings, vectors)
