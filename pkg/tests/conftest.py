import threading

import numpy as np
import pytest
from PIL import Image
from werkzeug.serving import make_server

from chromalex.embedding import WordColorEmbedding
from chromalex.search_server import create_app

RED = (255, 0, 0)
WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
BLUE = (0, 0, 255)

# word -> colors of its solid images, in file-name order
CORPUS = {
    'apple': [RED] * 5,
    'snow': [WHITE] * 3,
    'night': [BLACK] * 3,
    'fire': [RED, RED, WHITE, BLACK],
}


def save_png(path, color=None, size=(20, 20), pixels=None):
    path.parent.mkdir(parents=True, exist_ok=True)
    if pixels is None:
        pixels = np.full((size[1], size[0], 3), color, dtype=np.uint8)
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path, format='PNG')
    return path


@pytest.fixture
def write_png():
    return save_png


@pytest.fixture
def image_root(tmp_path):
    root = tmp_path / 'images'
    for word, colors in CORPUS.items():
        for i, color in enumerate(colors):
            save_png(root / word / f'img{i:02d}.png', color)
    return root


@pytest.fixture
def word_file(tmp_path):
    def write(words, name='words.txt'):
        path = tmp_path / name
        path.write_text(''.join(f'{w}\n' for w in words), encoding='utf-8')
        return path
    return write


@pytest.fixture
def make_embedding():
    def make(word, mass, std=None, concreteness=None, image_count=10):
        mass = tuple(float(m) for m in mass)
        return WordColorEmbedding(word=word,
                                  jzazbz_dist=mass,
                                  jzazbz_dist_std=std,
                                  rgb_dist=mass,
                                  jzazbz_vector=(0.08, 0.0, 0.0),
                                  rgb_vector=(127.0, 127.0, 127.0),
                                  colorgram=None,
                                  image_count=image_count,
                                  concreteness_mean=concreteness,
                                  concreteness_sd=None if concreteness is None else 0.5)
    return make


def separable_fixture(n_pairs=120, seed=7, dim=10):
    """
    Adjective-noun pairs whose color features separate the two labels

    Every adjective spreads its mass over bins 0-3. A metaphorical pair's noun does too, while a
    literal pair's noun lives in bins 4-7, so the noun block and the JS divergence split the labels.
    :return: (list of LabeledPair, dict word -> mass, dict word -> text vector)
    """
    from chromalex.store import LabeledPair, PairLabel

    rng = np.random.default_rng(seed)
    pairs, masses, vectors = [], {}, {}

    def dirichlet_mass(low):
        mass = np.zeros(8)
        mass[low:low + 4] = rng.dirichlet([5.0] * 4)
        return mass

    for i in range(n_pairs):
        label = PairLabel.METAPHORICAL if i % 2 == 0 else PairLabel.LITERAL
        adjective, noun = f'adj{i:03d}', f'noun{i:03d}'
        masses[adjective] = dirichlet_mass(0)
        masses[noun] = dirichlet_mass(0 if label is PairLabel.METAPHORICAL else 4)
        vectors[adjective] = rng.normal(size=dim)
        vectors[noun] = rng.normal(size=dim)
        pairs.append(LabeledPair(adjective, noun, label))
    return pairs, masses, vectors


@pytest.fixture
def separable_pairs():
    return separable_fixture()


@pytest.fixture
def write_text_vectors(tmp_path):
    def write(vectors, name='vectors.txt', header=False):
        path = tmp_path / name
        lines = [f'{len(vectors)} {len(next(iter(vectors.values())))}'] if header else []
        lines += [' '.join([word] + [repr(float(v)) for v in vector]) for word, vector in vectors.items()]
        path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return path
    return write


@pytest.fixture
def stub_server():
    """Start the image-search app on a free local port; yields a factory returning the base URL."""
    servers = []

    def start(root):
        app = create_app(root)
        server = make_server('127.0.0.1', 0, app, threaded=True)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append((server, thread, app))
        return f'http://127.0.0.1:{server.server_port}', app

    yield start
    for server, thread, _ in servers:
        server.shutdown()
        thread.join(timeout=5)
