"""
Acquisition of per-word image sets from local directories or an image-search HTTP endpoint,
with an on-disk cache and a shared token-bucket rate limit
"""
import datetime
import hashlib
import json
import logging
import mimetypes
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple
from urllib.parse import quote_plus, urlparse

import requests

from chromalex import __version__, encoder
from chromalex.errors import ConfigError, NotFound
from chromalex.store import atomic_write_bytes
from chromalex.validation import safe_filename

logger = logging.getLogger(__name__)

DEFAULT_EXTRA_QUERY = 'safe=off&site=&tbm=isch&source=hp&gs_l=img'
DEFAULT_USER_AGENT = f'chromalex/{__version__}'
IMAGE_EXTENSIONS = ('.bmp', '.gif', '.jpeg', '.jpg', '.png', '.tif', '.tiff', '.webp')
MANIFEST_NAME = 'manifest.json'


class IngestionMode(Enum):
    LOCAL_DIR = 'local_dir'
    HTTP_SEARCH = 'http_search'


@dataclass(frozen=True)
class IngestionConfig(object):
    """Where images come from and how they are cached.

    `root_or_endpoint` is a directory holding one subdirectory per word (LOCAL_DIR) or a URL
    template with a `{query}` placeholder (HTTP_SEARCH).
    """
    mode: IngestionMode
    root_or_endpoint: str
    images_per_word: int = 100
    extra_query: str = DEFAULT_EXTRA_QUERY
    rate_limit: float = 1.0
    cache_dir: Path = Path('cache')
    timeout: float = 30.0
    user_agent: str = DEFAULT_USER_AGENT
    max_in_flight: int = 4

    def __post_init__(self):
        if not isinstance(self.mode, IngestionMode):
            raise ConfigError(f'mode should be one of {[m.value for m in IngestionMode]} (not {self.mode!r}).')
        if isinstance(self.images_per_word, bool) or not isinstance(self.images_per_word, int) \
                or self.images_per_word < 1:
            raise ConfigError(f'images_per_word should >= 1 (not {self.images_per_word!r}).')
        if self.max_in_flight < 1:
            raise ConfigError(f'max_in_flight should >= 1 (not {self.max_in_flight!r}).')
        if self.timeout <= 0:
            raise ConfigError(f'timeout should > 0 (not {self.timeout!r}).')
        if self.mode is IngestionMode.HTTP_SEARCH:
            if not self.rate_limit > 0:
                raise ConfigError(f'rate_limit should > 0 in HTTP mode (not {self.rate_limit!r}).')
            if '{query}' not in self.root_or_endpoint:
                raise ConfigError(f'endpoint template should contain {{query}} (not {self.root_or_endpoint!r}).')
            if urlparse(self.root_or_endpoint).scheme not in ('http', 'https'):
                raise ConfigError(f'endpoint should be an http(s) URL (not {self.root_or_endpoint!r}).')
        object.__setattr__(self, 'cache_dir', Path(self.cache_dir))

    @classmethod
    def from_options(cls, options):
        """
        Build a config from a flat dict of string or typed values (CLI flags, config file)
        :param options: dict with keys 'mode', 'root' or 'endpoint', and optionally
            'images_per_word', 'extra_query', 'rate_limit', 'cache_dir', 'timeout',
            'user_agent', 'max_in_flight'
        """
        try:
            mode = IngestionMode(str(options.get('mode', IngestionMode.LOCAL_DIR.value)).lower())
        except ValueError as e:
            raise ConfigError(f'unknown ingestion mode {options.get("mode")!r}.') from e
        key = 'root' if mode is IngestionMode.LOCAL_DIR else 'endpoint'
        if not options.get(key):
            raise ConfigError(f'{mode.value} mode needs a {key!r} setting.')
        try:
            return cls(mode=mode,
                       root_or_endpoint=str(options[key]),
                       images_per_word=int(options.get('images_per_word', 100)),
                       extra_query=str(options.get('extra_query', DEFAULT_EXTRA_QUERY)),
                       rate_limit=float(options.get('rate_limit', 1.0)),
                       cache_dir=Path(options.get('cache_dir', 'cache')),
                       timeout=float(options.get('timeout', 30.0)),
                       user_agent=str(options.get('user_agent', DEFAULT_USER_AGENT)),
                       max_in_flight=int(options.get('max_in_flight', 4)))
        except (TypeError, ValueError) as e:
            raise ConfigError(f'invalid ingestion setting: {e}') from e

    def snapshot(self):
        return {'mode': self.mode, 'root_or_endpoint': self.root_or_endpoint,
                'images_per_word': self.images_per_word, 'extra_query': self.extra_query,
                'rate_limit': self.rate_limit, 'cache_dir': self.cache_dir, 'timeout': self.timeout,
                'user_agent': self.user_agent, 'max_in_flight': self.max_in_flight}


@dataclass(frozen=True)
class WordImageSet(object):
    word: str
    image_paths: Tuple[Path, ...]
    fetched_at: datetime.datetime
    shortfall: int


@dataclass
class IngestionReport(object):
    sets: List[WordImageSet] = field(default_factory=list)
    failures: Dict[str, Exception] = field(default_factory=dict)
    cancelled: List[str] = field(default_factory=list)


class TokenBucket(object):
    def __init__(self, rate, capacity=1.0, clock=time.monotonic, sleep=time.sleep):
        """
        Thread-safe token bucket; `acquire` blocks until a token is available
        :param rate: Tokens added per second
        :param capacity: Bucket size, i.e. the largest burst
        """
        if not rate > 0:
            raise ConfigError(f'rate should > 0 (not {rate!r}).')
        self.rate = float(rate)
        self.capacity = float(capacity)
        self._clock = clock
        self._sleep = sleep
        self._tokens = self.capacity
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self):
        with self._lock:
            now = self._clock()
            self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
            self._last = now
            if self._tokens < 1.0:
                self._sleep((1.0 - self._tokens) / self.rate)
                self._last = self._clock()
                self._tokens = 1.0
            self._tokens -= 1.0


def json_lines_parser(body):
    """Image URLs from a JSON-lines result page, one `{"url": ...}` object (or bare string) per line."""
    urls = []
    for line in body.splitlines():
        line = line.strip()
        if not line:
            continue
        item = json.loads(line)
        url = item.get('url') if isinstance(item, dict) else item
        if isinstance(url, str) and url:
            urls.append(url)
    return urls


def build_search_url(template, word, extra_query=DEFAULT_EXTRA_QUERY):
    url = template.format(query=quote_plus(word))
    if extra_query:
        url += ('&' if '?' in url else '?') + extra_query
    return url


def load_cached_set(cache_dir, word, images_per_word=None):
    """
    Read a word's cache entry
    :param cache_dir: Cache root
    :param word: The word
    :param images_per_word: Requested set size; an entry made for another size is stale.
        None accepts any entry.
    :return: WordImageSet, or None if the entry is missing, stale or incomplete
    """
    directory = Path(cache_dir) / safe_filename(word)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        return None
    try:
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
        requested = int(manifest['images_per_word'])
        paths = tuple(directory / image['file'] for image in manifest['images'])
        fetched_at = datetime.datetime.fromisoformat(manifest['fetched_at'])
    except (OSError, ValueError, KeyError, TypeError) as e:
        logger.warning('ignoring unreadable cache manifest %s: %s', manifest_path, e)
        return None
    if images_per_word is not None and requested != images_per_word:
        return None
    if not all(p.is_file() for p in paths):
        return None
    return WordImageSet(word, paths, fetched_at, requested - len(paths))


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def _extension(url, content_type):
    suffix = Path(urlparse(url).path).suffix.lower()
    if suffix in IMAGE_EXTENSIONS:
        return suffix
    guessed = mimetypes.guess_extension((content_type or '').split(';')[0].strip())
    return guessed or '.img'


class Ingestor(object):
    def __init__(self, cfg, parser=json_lines_parser, session=None, stop_event=None):
        """
        Fetches and caches image sets for one configuration
        :param cfg: IngestionConfig
        :param parser: Callable turning a result-page body into an ordered list of image URLs
        :param session: `requests.Session` to reuse (HTTP mode only)
        :param stop_event: `threading.Event`; once set, no new word is started
        """
        self.cfg = cfg
        self.parser: Callable[[str], List[str]] = parser
        self.stop_event = stop_event or threading.Event()
        self.cache_hits = 0
        self.network_requests = 0
        self._bucket = TokenBucket(cfg.rate_limit) if cfg.mode is IngestionMode.HTTP_SEARCH else None
        self._session = session
        self._locks: Dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._counter_lock = threading.Lock()

    @property
    def session(self):
        if self._session is None:
            self._session = requests.Session()
            self._session.headers.update({'User-Agent': self.cfg.user_agent})
        return self._session

    def _word_lock(self, word):
        with self._locks_guard:
            return self._locks.setdefault(word, threading.Lock())

    def word_dir(self, word):
        return self.cfg.cache_dir / safe_filename(word)

    def load_cached_set(self, word):
        """The cached WordImageSet of `word`, or None if the cache entry is missing or stale."""
        return load_cached_set(self.cfg.cache_dir, word, self.cfg.images_per_word)

    def ingest_word(self, word):
        """
        Obtain the image set of one word, from the cache when possible
        :param word: The word
        :return: WordImageSet in rank order (HTTP) or filename order (LOCAL_DIR)
        """
        with self._word_lock(word):
            cached = self.load_cached_set(word)
            if cached is not None:
                with self._counter_lock:
                    self.cache_hits += 1
                logger.debug('cache hit for %r', word)
                return cached
            if self.cfg.mode is IngestionMode.LOCAL_DIR:
                images = self._collect_local(word)
            else:
                images = self._collect_http(word)
            self._write_cache(word, images)
            image_set = self.load_cached_set(word)
        if image_set.shortfall > 0:
            logger.warning('%r: obtained %d of %d images (shortfall %d)', word, len(image_set.image_paths),
                           self.cfg.images_per_word, image_set.shortfall)
        return image_set

    def _collect_local(self, word):
        root = Path(self.cfg.root_or_endpoint)
        source = root / word
        if not source.is_dir():
            source = root / safe_filename(word)
        if not source.is_dir():
            raise NotFound(f'no image directory for {word!r} under {root}.')
        files = sorted(p for p in source.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)
        if not files:
            raise NotFound(f'no image files in {source}.')
        images = []
        for path in files[:self.cfg.images_per_word]:
            images.append((path.as_posix(), path.suffix.lower(), path.read_bytes()))
        return images

    def _get(self, url):
        self._bucket.acquire()
        with self._counter_lock:
            self.network_requests += 1
        response = self.session.get(url, timeout=self.cfg.timeout)
        response.raise_for_status()
        return response

    def _collect_http(self, word):
        search_url = build_search_url(self.cfg.root_or_endpoint, word, self.cfg.extra_query)
        try:
            urls = self.parser(self._get(search_url).text)
        except (requests.RequestException, ValueError) as e:
            raise NotFound(f'search for {word!r} failed: {e}') from e
        if not urls:
            raise NotFound(f'search for {word!r} returned no results.')
        images = []
        for url in urls:
            if len(images) == self.cfg.images_per_word:
                break
            try:
                response = self._get(url)
            except requests.RequestException as e:
                logger.warning('%r: skipping %s: %s', word, url, e)
                continue
            images.append((url, _extension(url, response.headers.get('Content-Type')), response.content))
        if not images:
            raise NotFound(f'none of the {len(urls)} results for {word!r} could be downloaded.')
        return images

    def _write_cache(self, word, images):
        directory = self.word_dir(word)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for rank, (source, extension, data) in enumerate(images, start=1):
            name = f'{rank:03d}{extension}'
            atomic_write_bytes(directory / name, data)
            entries.append({'rank': rank, 'file': name, 'source': source, 'sha256': _sha256(data)})
        manifest = {'word': word,
                    'mode': self.cfg.mode,
                    'images_per_word': self.cfg.images_per_word,
                    'fetched_at': datetime.datetime.now(datetime.timezone.utc).isoformat(),
                    'images': entries}
        # the manifest goes last, so a word is only a cache hit once all its images are in place
        atomic_write_bytes(directory / MANIFEST_NAME, encoder.dumps(manifest).encode('utf-8'))

    def ingest_corpus(self, words, progress=None):
        """
        Ingest many words, isolating per-word failures
        :param words: Non-empty list of words
        :param progress: Optional callable invoked once per finished word
        :return: IngestionReport with sets in input order
        """
        if len(words) == 0:
            raise ConfigError('no words to ingest.')

        def task(word):
            if self.stop_event.is_set():
                return word, None, None
            try:
                return word, self.ingest_word(word), None
            except (NotFound, OSError) as e:
                logger.warning('failed to ingest %r: %s', word, e)
                return word, None, e
            finally:
                if progress is not None:
                    progress()

        report = IngestionReport()
        with ThreadPoolExecutor(max_workers=self.cfg.max_in_flight) as executor:
            for word, image_set, error in executor.map(task, words):
                if image_set is not None:
                    report.sets.append(image_set)
                elif error is not None:
                    report.failures[word] = error
                else:
                    report.cancelled.append(word)
        return report


def ingest_word(word, cfg, ingestor: Optional[Ingestor] = None):
    return (ingestor or Ingestor(cfg)).ingest_word(word)


def ingest_corpus(words, cfg, ingestor: Optional[Ingestor] = None, progress=None):
    return (ingestor or Ingestor(cfg)).ingest_corpus(words, progress)
