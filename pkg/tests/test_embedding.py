import numpy as np
import pytest

from chromalex import imaging
from chromalex.embedding import (JZAZBZ_GRID, N_BINS, BinGrid, ColorDistribution, WordEmbedder, aggregate_word,
                                 concat_embedding, cosine_similarity, cosine_similarity_rows, histogram_jzazbz,
                                 js_divergence, js_divergence_rows, kl_divergence)
from chromalex.errors import DimensionMismatch, EmptyInput, SupportError, ZeroVector
from chromalex.imaging import ColorSpace, ImageArray


def _one_hot(k):
    mass = np.zeros(N_BINS)
    mass[k] = 1.0
    return ColorDistribution(tuple(mass))


def _random_distributions(rng, n):
    return rng.dirichlet(np.full(N_BINS, 0.7), size=n)


def _direct_js(p, q):
    """Midpoint mixture and both KL sums written out term by term."""
    m = [(pk + qk) / 2.0 for pk, qk in zip(p, q)]
    kl_pm = sum(pk * np.log(pk / mk) for pk, mk in zip(p, m) if pk > 0.0)
    kl_qm = sum(qk * np.log(qk / mk) for qk, mk in zip(q, m) if qk > 0.0)
    return 0.5 * kl_pm + 0.5 * kl_qm


class TestBinGrid:
    def test_midpoints(self):
        (_, jz_mid, _), (_, az_mid, _), (_, bz_mid, _) = JZAZBZ_GRID.edges
        assert jz_mid == pytest.approx(0.0835)
        assert az_mid == pytest.approx(0.005)
        assert bz_mid == pytest.approx(-0.0205)

    def test_half_open_lower_interval(self):
        mids = np.array([mid for _, mid, _ in JZAZBZ_GRID.edges])
        index, clamped = JZAZBZ_GRID.assign([mids, np.nextafter(mids, -np.inf)])
        assert index.tolist() == [7, 0]
        assert clamped == 0

    def test_clamps_outside(self):
        index, clamped = JZAZBZ_GRID.assign([[0.2, -0.5, 0.0]])
        assert index.tolist() == [5]
        assert clamped == 1

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            BinGrid(((0.0, 1.0), (1.0, 1.0), (0.0, 1.0)))


class TestColorDistribution:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            ColorDistribution((0.5,) * N_BINS)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ColorDistribution((1.5, -0.5) + (0.0,) * 6)

    def test_rejects_wrong_size(self):
        with pytest.raises(ValueError):
            ColorDistribution((1.0,) + (0.0,) * 6)

    def test_from_counts(self):
        assert ColorDistribution.from_counts([1, 1, 0, 0, 0, 0, 0, 2]).mass == (0.25, 0.25, 0, 0, 0, 0, 0, 0.5)
        with pytest.raises(EmptyInput):
            ColorDistribution.from_counts([0] * N_BINS)


class TestHistogram:
    def test_hand_enumerated_pixels(self):
        coords = np.array([[[0.01, -0.05, -0.1], [0.1, 0.05, 0.0]],
                           [[0.15, -0.09, 0.1], [0.05, 0.1, -0.15]]])
        dist = histogram_jzazbz(ImageArray(coords, ColorSpace.JZAZBZ))
        expected = np.zeros(N_BINS)
        expected[[0, 7, 5, 2]] = 0.25
        np.testing.assert_allclose(dist.array, expected, atol=0)

    def test_solid_black(self):
        img = imaging.to_jzazbz(ImageArray(np.zeros((300, 300, 3), dtype=np.uint8)))
        assert histogram_jzazbz(img).mass == _one_hot(1).mass

    def test_two_colors(self):
        pixels = np.zeros((10, 10, 3), dtype=np.uint8)
        pixels[:, 5:] = 255
        dist = histogram_jzazbz(imaging.to_jzazbz(ImageArray(pixels)))
        assert dist.mass[1] == pytest.approx(0.5)
        assert dist.mass[5] == pytest.approx(0.5)

    def test_normalized_on_random_images(self):
        rng = np.random.default_rng(500)
        for _ in range(500):
            img = ImageArray(rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8))
            mass = histogram_jzazbz(imaging.to_jzazbz(img)).array
            assert np.all(mass >= 0.0)
            assert abs(mass.sum() - 1.0) <= 1e-9

    def test_requires_jzazbz(self):
        with pytest.raises(ValueError):
            histogram_jzazbz(ImageArray(np.zeros((2, 2, 3), dtype=np.uint8)))


class TestAggregate:
    def test_identical(self):
        dist = ColorDistribution(tuple(np.full(N_BINS, 1.0 / N_BINS)))
        mean, std = aggregate_word([dist] * 4)
        np.testing.assert_allclose(mean.array, dist.array, atol=1e-15)
        np.testing.assert_array_equal(std, np.zeros(N_BINS))

    def test_population_std(self):
        mean, std = aggregate_word([_one_hot(0), _one_hot(1)])
        np.testing.assert_allclose(mean.array, [0.5, 0.5, 0, 0, 0, 0, 0, 0])
        np.testing.assert_allclose(std, [0.5, 0.5, 0, 0, 0, 0, 0, 0])

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        dists = [ColorDistribution(tuple(d)) for d in _random_distributions(rng, 5)]
        mean_a, std_a = aggregate_word(dists)
        mean_b, std_b = aggregate_word(dists[::-1])
        np.testing.assert_allclose(mean_a.array, mean_b.array, atol=1e-15)
        np.testing.assert_allclose(std_a, std_b, atol=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            aggregate_word([])


class TestConcat:
    def test_mean_only(self):
        assert concat_embedding(_one_hot(3), np.zeros(N_BINS), include_std=False).tolist() == _one_hot(3).array.tolist()

    def test_with_std(self):
        std = np.linspace(0.0, 0.4, N_BINS)
        vector = concat_embedding(_one_hot(2), std)
        assert vector.shape == (16,)
        np.testing.assert_array_equal(vector[:N_BINS], _one_hot(2).array)
        np.testing.assert_array_equal(vector[N_BINS:], std)


class TestDivergences:
    def test_kl(self):
        assert kl_divergence(_one_hot(0), _one_hot(0)) == 0.0
        half = ColorDistribution((0.5, 0.5) + (0.0,) * 6)
        assert kl_divergence(_one_hot(0), half) == pytest.approx(np.log(2.0), abs=1e-15)
        with pytest.raises(SupportError):
            kl_divergence(_one_hot(0), _one_hot(1))

    def test_js_examples(self):
        p = ColorDistribution(tuple(np.full(N_BINS, 1.0 / N_BINS)))
        assert js_divergence(p, p) == 0.0
        assert js_divergence(_one_hot(0), _one_hot(1)) == pytest.approx(np.log(2.0), abs=1e-15)

    def test_metric_properties(self):
        rng = np.random.default_rng(2022)
        triples = _random_distributions(rng, 3000).reshape(1000, 3, N_BINS)
        for p, q, r in triples:
            pq, qp = js_divergence(p, q), js_divergence(q, p)
            assert 0.0 <= pq <= np.log(2.0)
            assert abs(pq - qp) <= 1e-12
            assert js_divergence(p, p) <= 1e-12
            assert np.sqrt(pq) <= np.sqrt(js_divergence(p, r)) + np.sqrt(js_divergence(r, q)) + 1e-12

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(17)
        pairs = _random_distributions(rng, 2000).reshape(1000, 2, N_BINS)
        # sparse pairs exercise the 0 ln 0 convention
        pairs[::10, 0, :4] = 0.0
        pairs[::10, 0] /= pairs[::10, 0].sum(axis=1, keepdims=True)
        for p, q in pairs:
            assert abs(js_divergence(p, q) - _direct_js(p, q)) <= 1e-12

    def test_rows_match_scalar(self):
        rng = np.random.default_rng(5)
        p, q = _random_distributions(rng, 50), _random_distributions(rng, 50)
        p[0] = _one_hot(0).array
        q[0] = _one_hot(1).array
        expected = [js_divergence(a, b) for a, b in zip(p, q)]
        np.testing.assert_array_equal(js_divergence_rows(p, q), expected)

    def test_rows_shape_check(self):
        with pytest.raises(ValueError):
            js_divergence_rows(np.zeros((2, 8)), np.zeros((3, 8)))


class TestCosine:
    def test_examples(self):
        assert cosine_similarity([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
        assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1.0 / np.sqrt(2.0))

    def test_errors(self):
        with pytest.raises(ZeroVector):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(DimensionMismatch):
            cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_refuses_color_distributions(self):
        with pytest.raises(TypeError):
            cosine_similarity(_one_hot(0), _one_hot(1))

    def test_rows_nan_for_zero_vector(self):
        values = cosine_similarity_rows([[1.0, 1.0], [0.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]])
        assert values[0] == pytest.approx(1.0 / np.sqrt(2.0))
        assert np.isnan(values[1])


class TestWordEmbedder:
    @staticmethod
    def _solid(color, size=40):
        return ImageArray(np.full((size, size, 3), color, dtype=np.uint8))

    @pytest.mark.parametrize('color, bin_index', [((255, 255, 255), 5), ((0, 0, 0), 1), ((255, 0, 0), 7)])
    def test_solid_images_fill_one_bin(self, color, bin_index):
        embedding = WordEmbedder().embed('w', [self._solid(color)] * 3)
        assert embedding.jzazbz_dist.mass == _one_hot(bin_index).mass
        assert embedding.jzazbz_dist_std == (0.0,) * N_BINS
        assert embedding.image_count == 3
        assert embedding.colorgram.source_count == 3

    def test_mixed_images(self):
        images = [self._solid((255, 0, 0)), self._solid((255, 0, 0)), self._solid((255, 255, 255)),
                  self._solid((0, 0, 0))]
        embedding = WordEmbedder({'n_threads': 2}).embed('fire', images)
        expected = np.zeros(N_BINS)
        expected[[7, 5, 1]] = [0.5, 0.25, 0.25]
        np.testing.assert_allclose(embedding.jzazbz_dist.array, expected, atol=1e-15)
        assert embedding.embedding_vector().shape == (16,)

    def test_without_std(self):
        embedding = WordEmbedder({'include_std': False, 'colorgram': False}).embed('w', [self._solid((0, 0, 0))])
        assert embedding.jzazbz_dist_std is None
        assert embedding.colorgram is None
        assert embedding.embedding_vector(include_std=False).shape == (8,)
        with pytest.raises(ValueError):
            embedding.embedding_vector()

    def test_no_images(self):
        with pytest.raises(EmptyInput):
            WordEmbedder().embed('w', [])
