"""
Persistence of word-color embeddings and loaders for the tables they are joined with:
crowd-sourced concreteness ratings and pre-trained text vectors.
"""
import csv
import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from chromalex import encoder, imaging
from chromalex.embedding import N_BINS, WordColorEmbedding
from chromalex.errors import DimensionMismatch, ParseError
from chromalex.validation import safe_filename

logger = logging.getLogger(__name__)

# on-disk field names of an embedding record
RGB_DIST = 'rgb-dist'
JZAZBZ_DIST = 'jzazbz-dist'
JZAZBZ_DIST_STD = 'jzazbz-dist-std'
COLORGRAM = 'colorgram'
RGB_VECTOR = 'rgb-vector'
JZAZBZ_VECTOR = 'jzazbz-vector'
CONCRETENESS_MEAN = 'concreteness-mean'
CONCRETENESS_SD = 'concreteness-sd'
IMAGE_COUNT = 'image-count'

DEFAULT_CONCRETENESS_SCALE = (1.0, 5.0)


@dataclass
class EmbeddingFile(object):
    path: Path
    entries: Dict[str, WordColorEmbedding]
    errors: List[ParseError] = field(default_factory=list)
    # word -> colorgram PNG path, resolved against the directory of `path`
    colorgram_paths: Dict[str, str] = field(default_factory=dict)


class PairLabel(Enum):
    METAPHORICAL = 'metaphorical'
    LITERAL = 'literal'


@dataclass(frozen=True)
class LabeledPair(object):
    adjective: str
    noun: str
    label: PairLabel

    def __post_init__(self):
        if not self.adjective or not self.noun:
            raise ValueError(f'adjective and noun should be non-empty (not {self.adjective!r}, {self.noun!r}).')
        if not isinstance(self.label, PairLabel):
            object.__setattr__(self, 'label', PairLabel(str(self.label).strip().lower()))


@dataclass(frozen=True)
class ConcretenessTable(object):
    entries: Dict[str, Tuple[float, float]]
    scale: Tuple[float, float] = DEFAULT_CONCRETENESS_SCALE
    duplicates: int = 0

    def __contains__(self, word):
        return word in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, word):
        return self.entries.get(word)


@dataclass(frozen=True)
class TextVectorTable(object):
    vectors: Dict[str, np.ndarray]
    dimension: int

    def __contains__(self, word):
        return word in self.vectors

    def __len__(self):
        return len(self.vectors)

    def get(self, word):
        return self.vectors.get(word)


def atomic_write_bytes(path, data):
    """Write `data` to a temporary file next to `path`, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def colorgram_filename(word):
    return f'{safe_filename(word)}.png'


def _record(embedding, colorgram_path):
    record = {RGB_DIST: list(embedding.rgb_dist),
              JZAZBZ_DIST: list(embedding.jzazbz_dist.mass),
              COLORGRAM: colorgram_path,
              RGB_VECTOR: list(embedding.rgb_vector),
              JZAZBZ_VECTOR: list(embedding.jzazbz_vector),
              CONCRETENESS_MEAN: embedding.concreteness_mean,
              CONCRETENESS_SD: embedding.concreteness_sd,
              IMAGE_COUNT: embedding.image_count}
    if embedding.jzazbz_dist_std is not None:
        record[JZAZBZ_DIST_STD] = list(embedding.jzazbz_dist_std)
    return record


def save_embeddings(entries, path):
    """
    Write embeddings as a JSON object keyed by word, with colorgrams as PNG sidecar files
    :param entries: dict word -> WordColorEmbedding, or an iterable of WordColorEmbedding
    :param path: Destination JSON path; colorgrams go to `<stem>_colorgrams/` next to it
    :return: EmbeddingFile
    """
    path = Path(path)
    if isinstance(entries, dict):
        entries = list(entries.values())
    colorgram_dir = path.parent / f'{path.stem}_colorgrams'
    records = {}
    for embedding in entries:
        colorgram_path = None
        if embedding.colorgram is not None:
            colorgram_dir.mkdir(parents=True, exist_ok=True)
            target = colorgram_dir / colorgram_filename(embedding.word)
            imaging.save_colorgram(embedding.colorgram, target)
            colorgram_path = target.relative_to(path.parent).as_posix()
        records[embedding.word] = _record(embedding, colorgram_path)
    atomic_write_bytes(path, (encoder.dumps(records) + '\n').encode('utf-8'))
    logger.info('saved %d embeddings to %s', len(records), path)
    return EmbeddingFile(path, {e.word: e for e in entries})


def _float_list(word, record, name, size):
    value = record.get(name)
    if not isinstance(value, list) or len(value) != size:
        length = len(value) if isinstance(value, list) else type(value).__name__
        raise ParseError(f'expected a list of {size} numbers (got {length})', word=word, field=name)
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ParseError(f'non-numeric component: {e}', word=word, field=name) from e


def _optional_float(word, record, name):
    value = record.get(name)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f'expected a number (got {type(value).__name__})', word=word, field=name)
    return float(value)


def _parse_record(word, record, base_dir, load_colorgrams):
    if not isinstance(record, dict):
        raise ParseError('record should be a JSON object', word=word)
    image_count = record.get(IMAGE_COUNT, 100)
    if isinstance(image_count, bool) or not isinstance(image_count, int) or image_count < 1:
        raise ParseError(f'expected a positive integer (got {image_count!r})', word=word, field=IMAGE_COUNT)
    std = None
    if record.get(JZAZBZ_DIST_STD) is not None:
        std = _float_list(word, record, JZAZBZ_DIST_STD, N_BINS)
    colorgram = None
    colorgram_path = record.get(COLORGRAM)
    if load_colorgrams and colorgram_path is not None:
        try:
            colorgram = imaging.load_colorgram(base_dir / colorgram_path, image_count)
        except (OSError, ValueError) as e:
            raise ParseError(f'cannot load colorgram {colorgram_path}: {e}', word=word, field=COLORGRAM) from e
    values = {'jzazbz_dist': _float_list(word, record, JZAZBZ_DIST, N_BINS),
              'rgb_dist': _float_list(word, record, RGB_DIST, N_BINS),
              'jzazbz_vector': _float_list(word, record, JZAZBZ_VECTOR, 3),
              'rgb_vector': _float_list(word, record, RGB_VECTOR, 3)}
    try:
        return WordColorEmbedding(word=word, jzazbz_dist_std=std, colorgram=colorgram, image_count=image_count,
                                  concreteness_mean=_optional_float(word, record, CONCRETENESS_MEAN),
                                  concreteness_sd=_optional_float(word, record, CONCRETENESS_SD),
                                  **values)
    except ValueError as e:
        raise ParseError(str(e), word=word) from e


def load_embeddings(path, skip_invalid=False, load_colorgrams=True):
    """
    Read an embedding JSON file written by `save_embeddings` (or the released corpus format)
    :param path: JSON path
    :param skip_invalid: Skip malformed entries and report them in `EmbeddingFile.errors`
        instead of raising the first ParseError
    :param load_colorgrams: Decode the PNG sidecars into Colorgram objects
    :return: EmbeddingFile with words lowercased
    """
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f'{path} is not valid JSON: {e}', line=e.lineno) from e
    if not isinstance(data, dict):
        raise ParseError(f'{path} should hold a JSON object keyed by word')
    entries, errors, colorgram_paths = {}, [], {}
    for word, record in data.items():
        try:
            embedding = _parse_record(word.lower(), record, path.parent, load_colorgrams)
        except ParseError as e:
            if not skip_invalid:
                raise
            logger.warning('skipping malformed entry: %s', e)
            errors.append(e)
            continue
        entries[embedding.word] = embedding
        if isinstance(record.get(COLORGRAM), str):
            colorgram_paths[embedding.word] = (path.parent / record[COLORGRAM]).as_posix()
    return EmbeddingFile(path, entries, errors, colorgram_paths)


def attach_concreteness(embeddings, table):
    """Copy concreteness ratings from `table` onto the embeddings of the words it covers."""
    out = {}
    for word, embedding in embeddings.items():
        rating = table.get(word)
        out[word] = embedding.with_concreteness(*rating) if rating is not None else embedding
    return out


def _read_lines(path):
    with open(path, 'r', encoding='utf-8-sig') as f:
        return f.read().splitlines()


def _parse_scale(comment, path):
    match = re.match(r'#\s*scale\s*[=:]\s*([-+0-9.eE]+)\s*[,;\s]\s*([-+0-9.eE]+)\s*$', comment)
    if match is None:
        return None
    try:
        low, high = float(match.group(1)), float(match.group(2))
    except ValueError as e:
        raise ParseError(f'{path}: malformed scale declaration {comment!r}') from e
    if not low < high:
        raise ParseError(f'{path}: scale should have low < high (not {low}, {high})')
    return low, high


def load_concreteness(path):
    """
    Read concreteness ratings from a CSV/TSV file with header `word,concreteness-mean,concreteness-sd`
    Leading `#` lines are comments; `# scale=1,5` declares the rating scale bounds.
    :param path: Ratings file
    :return: ConcretenessTable keyed by lowercase word, duplicates resolved last-wins
    """
    lines = _read_lines(path)
    scale = DEFAULT_CONCRETENESS_SCALE
    start = 0
    while start < len(lines) and (not lines[start].strip() or lines[start].lstrip().startswith('#')):
        declared = _parse_scale(lines[start].strip(), path)
        if declared is not None:
            scale = declared
        start += 1
    if start == len(lines):
        raise ParseError(f'{path}: missing header row')
    delimiter = '\t' if '\t' in lines[start] else ','
    rows = csv.reader(lines[start:], delimiter=delimiter)
    header = [h.strip().lower() for h in next(rows)]
    try:
        columns = [header.index(name) for name in ('word', CONCRETENESS_MEAN, CONCRETENESS_SD)]
    except ValueError as e:
        raise ParseError(f'{path}: header should contain word, {CONCRETENESS_MEAN}, {CONCRETENESS_SD} '
                         f'(got {header})', line=start + 1) from e
    entries, duplicates = {}, 0
    for offset, row in enumerate(rows):
        line = start + 2 + offset
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) <= max(columns):
            raise ParseError(f'{path}: expected {len(header)} columns (got {len(row)})', line=line)
        word = row[columns[0]].strip().lower()
        values = []
        for name, column in zip((CONCRETENESS_MEAN, CONCRETENESS_SD), columns[1:]):
            try:
                values.append(float(row[column]))
            except ValueError as e:
                raise ParseError(f'{path}: non-numeric rating {row[column]!r}', word=word, field=name, line=line) from e
        mean, sd = values
        if not scale[0] <= mean <= scale[1]:
            raise ParseError(f'{path}: rating {mean} outside scale [{scale[0]}, {scale[1]}]',
                             word=word, field=CONCRETENESS_MEAN, line=line)
        if sd < 0.0:
            raise ParseError(f'{path}: negative standard deviation {sd}', word=word, field=CONCRETENESS_SD, line=line)
        if word in entries:
            duplicates += 1
            logger.warning('%s line %d: duplicate word %r, keeping the last rating', path, line, word)
        entries[word] = (mean, sd)
    return ConcretenessTable(entries, scale, duplicates)


def _is_header(tokens):
    return len(tokens) == 2 and all(re.fullmatch(r'\d+', t) for t in tokens)


def load_text_vectors(path):
    """
    Read pre-trained text vectors in the plain-text `word v1 v2 ... vD` format
    A first line of exactly two integers (`count dim`) is treated as a header.
    :param path: Vector file
    :return: TextVectorTable keyed by lowercase word; the first of several case variants wins
    """
    vectors, dimension, declared_count = {}, None, None
    for line_number, line in enumerate(_read_lines(path), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if line_number == 1 and _is_header(tokens):
            declared_count, dimension = int(tokens[0]), int(tokens[1])
            continue
        word, values = tokens[0].lower(), tokens[1:]
        if dimension is None:
            dimension = len(values)
        if len(values) != dimension:
            raise DimensionMismatch(f'{path}: expected {dimension} components for {word!r} (got {len(values)})',
                                    line=line_number)
        try:
            vector = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as e:
            raise ParseError(f'{path}: non-numeric component', word=word, line=line_number) from e
        vectors.setdefault(word, vector)
    if declared_count is not None and declared_count != len(vectors):
        logger.info('%s declares %d vectors, read %d distinct words', path, declared_count, len(vectors))
    if dimension is None or dimension == 0:
        raise ParseError(f'{path}: no vectors found')
    return TextVectorTable(vectors, dimension)


def load_word_list(path):
    """UTF-8 word list, one word per line; `#` starts a comment. Words are lowercased, duplicates dropped."""
    words = []
    seen = set()
    for line in _read_lines(path):
        word = line.split('#', 1)[0].strip().lower()
        if word and word not in seen:
            seen.add(word)
            words.append(word)
    return words


def inner_join(words, *tables):
    """
    Keep the words present in every table
    :param words: Candidate words, order preserved
    :param tables: Objects supporting `in` (dicts, ConcretenessTable, TextVectorTable)
    :return: (list of kept words, number of dropped words)
    """
    kept = [w for w in words if all(w in t for t in tables)]
    dropped = len(words) - len(kept)
    if dropped:
        logger.info('join dropped %d of %d words', dropped, len(words))
    return kept, dropped


def load_labeled_pairs(path):
    """
    Read adjective-noun pairs from a CSV file with header `adjective,noun,label`
    :param path: CSV path; label is "metaphorical" or "literal" (case-insensitive)
    :return: List of LabeledPair with lowercase words, in file order
    """
    lines = _read_lines(path)
    rows = csv.reader(lines)
    try:
        header = [h.strip().lower() for h in next(rows)]
    except StopIteration as e:
        raise ParseError(f'{path}: missing header row') from e
    try:
        columns = [header.index(name) for name in ('adjective', 'noun', 'label')]
    except ValueError as e:
        raise ParseError(f'{path}: header should contain adjective, noun, label (got {header})', line=1) from e
    pairs = []
    for line, row in enumerate(rows, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) <= max(columns):
            raise ParseError(f'{path}: expected {len(header)} columns (got {len(row)})', line=line)
        adjective, noun, label = (row[c].strip() for c in columns)
        try:
            pairs.append(LabeledPair(adjective.lower(), noun.lower(), PairLabel(label.lower())))
        except ValueError as e:
            raise ParseError(f'{path}: {e}', field='label', line=line) from e
    return pairs
