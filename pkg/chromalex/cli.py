"""
Command-line interface

    chromalex ingest WORDS [--mode local_dir --root DIR | --mode http_search --endpoint URL] ...
    chromalex embed WORDS CACHE OUT.json [--std | --no-std] [--concreteness FILE]
    chromalex compare EMBEDDINGS.json WORD_A WORD_B
    chromalex analyze {concreteness,similarity-trend,metaphor} ...
    chromalex serve IMAGE_ROOT [--host HOST] [--port PORT]

Every command accepts --config FILE (key = value lines, optional [chromalex] section),
--seed, --out and --threads; flags override the config file.
"""
import argparse
import configparser
import contextlib
import csv
import logging
import re
import signal
import sys
import threading
from enum import IntEnum
from pathlib import Path

from tqdm import tqdm

from chromalex import __version__, analysis, imaging, plots, store
from chromalex.embedding import WordEmbedder, js_divergence
from chromalex.errors import (ChromalexError, ConfigError, DecodeError, DegenerateLabels, DimensionMismatch,
                              InsufficientData, InsufficientJoin, ParseError, SingularDesign)
from chromalex.ingestion import IngestionConfig, Ingestor, load_cached_set
from chromalex.manifest import RunManifest, hash_inputs

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'
DEFAULT_SEED = 2022
DEFAULT_OUT = 'chromalex-out'
DEFAULT_DIMS_SWEEP = (2, 4, 8, 16)


class ExitCode(IntEnum):
    OK = 0
    FAILURE = 1  # no word could be ingested
    CONFIG = 2  # invalid configuration or unreadable input
    EMBED = 3  # no word had usable images
    LOOKUP = 4  # word missing from an embedding file
    ANALYSIS_JOIN = 5  # too few samples survived joining the inputs


def read_config(path):
    """
    Read `key = value` settings from an INI/TOML-like file
    :param path: Config file, or None
    :return: dict with dashes in keys replaced by underscores and surrounding quotes stripped
    """
    if path is None:
        return {}
    text = Path(path).read_text(encoding='utf-8')
    if not re.search(r'^\s*\[', text, re.MULTILINE):
        text = '[chromalex]\n' + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(f'cannot parse {path}: {e}') from e
    options = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            value = value.strip()
            if len(value) >= 2 and value[0] == value[-1] and value[0] in '"\'':
                value = value[1:-1]
            options[key.replace('-', '_')] = value
    return options


def resolve_options(args, keys):
    """Config file values overridden by every flag in `keys` given on the command line."""
    options = read_config(getattr(args, 'config', None))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def _typed(options, key, default, cast):
    value = options.get(key, default)
    try:
        return cast(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f'invalid value for {key}: {value!r}') from e


def _to_bool(value):
    if isinstance(value, bool):
        return value
    lowered = str(value).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {value!r}')


def _to_positive_int(value):
    number = int(value)
    if number < 1:
        raise ValueError(f'expected a positive integer (not {value!r})')
    return number


def _to_dims(value):
    if isinstance(value, (list, tuple)):
        dims = [int(v) for v in value]
    else:
        dims = [int(v) for v in str(value).replace(' ', '').split(',') if v]
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f'dimensions should be positive integers (not {value!r})')
    return dims


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
    return path


@contextlib.contextmanager
def _stop_on_sigint(stop_event):
    """Turn SIGINT into `stop_event` so in-flight cache writes can finish."""
    if threading.current_thread() is not threading.main_thread():
        yield
        return
    previous = signal.getsignal(signal.SIGINT)

    def handler(signum, frame):
        logger.warning('interrupted, finishing in-flight downloads')
        stop_event.set()

    signal.signal(signal.SIGINT, handler)
    try:
        yield
    finally:
        signal.signal(signal.SIGINT, previous)


def _finish(command, options, seed, inputs, out_dir, outputs):
    manifest = RunManifest(command=command, config=options, seed=seed, input_hashes=hash_inputs(inputs),
                           outputs=[Path(p).name for p in outputs])
    return manifest.write(out_dir)


INGEST_KEYS = ('mode', 'root', 'endpoint', 'images_per_word', 'extra_query', 'rate_limit', 'cache_dir',
               'timeout', 'user_agent', 'max_in_flight', 'out')


def cmd_ingest(args):
    options = resolve_options(args, INGEST_KEYS)
    words = store.load_word_list(args.words)
    if not words:
        print('no words', file=sys.stderr)
        return ExitCode.CONFIG
    cfg = IngestionConfig.from_options(options)
    out_dir = Path(options.get('out', cfg.cache_dir))
    stop_event = threading.Event()
    ingestor = Ingestor(cfg, stop_event=stop_event)
    with _stop_on_sigint(stop_event), \
            tqdm(total=len(words), desc='ingest', unit='word', disable=args.quiet) as bar:
        report = ingestor.ingest_corpus(words, progress=bar.update)
    obtained = {s.word: s for s in report.sets}
    rows = []
    for word in words:
        if word in obtained:
            image_set = obtained[word]
            rows.append((word, len(image_set.image_paths), image_set.shortfall, 'ok'))
        elif word in report.failures:
            rows.append((word, 0, cfg.images_per_word, f'failed: {report.failures[word]}'))
        else:
            rows.append((word, 0, cfg.images_per_word, 'cancelled'))
    header = ('word', 'obtained', 'shortfall', 'status')
    report_path = _write_csv(out_dir / 'ingest-report.csv', header, rows)
    print('\t'.join(header))
    for row in rows:
        print('\t'.join(str(c) for c in row))
    logger.info('ingested %d of %d words (%d failed, %d cancelled)', len(report.sets), len(words),
                len(report.failures), len(report.cancelled))
    _finish('ingest', cfg.snapshot(), None, [args.words], out_dir, [report_path])
    return ExitCode.OK if report.sets else ExitCode.FAILURE


def _load_images(word, image_set):
    images = []
    for path in image_set.image_paths:
        try:
            images.append(imaging.load_image_file(path))
        except (DecodeError, OSError) as e:
            logger.warning('%r: skipping undecodable image %s: %s', word, path, e)
    return images


def cmd_embed(args):
    options = resolve_options(args, ('threads', 'include_std', 'out'))
    include_std = _typed(options, 'include_std', True, _to_bool)
    threads = _typed(options, 'threads', 1, int)
    words = store.load_word_list(args.words)
    if not words:
        print('no words', file=sys.stderr)
        return ExitCode.CONFIG
    concreteness = store.load_concreteness(args.concreteness) if args.concreteness else None
    embedder = WordEmbedder({'include_std': include_std, 'n_threads': threads})
    embeddings = {}
    for word in tqdm(words, desc='embed', unit='word', disable=args.quiet):
        image_set = load_cached_set(args.cache, word)
        if image_set is None:
            logger.warning('%r: no cached images', word)
            continue
        images = _load_images(word, image_set)
        if not images:
            logger.warning('%r: none of %d cached images could be decoded', word, len(image_set.image_paths))
            continue
        embedding = embedder.embed(word, images)
        if concreteness is not None and word in concreteness:
            embedding = embedding.with_concreteness(*concreteness.get(word))
        embeddings[word] = embedding
    if not embeddings:
        print('no word had usable images', file=sys.stderr)
        return ExitCode.EMBED
    output = Path(args.output)
    store.save_embeddings(embeddings, output)
    out_dir = Path(options.get('out', output.parent))
    _finish('embed', {'include_std': include_std, 'threads': threads, 'cache': args.cache}, None,
            [args.words, args.cache, args.concreteness], out_dir, [output])
    logger.info('embedded %d of %d words into %s', len(embeddings), len(words), output)
    return ExitCode.OK


def cmd_compare(args):
    entries = store.load_embeddings(args.embeddings, load_colorgrams=False).entries
    for word in (args.word_a, args.word_b):
        if word.lower() not in entries:
            print(f'word not found: {word}', file=sys.stderr)
            return ExitCode.LOOKUP
    value = js_divergence(entries[args.word_a.lower()].jzazbz_dist, entries[args.word_b.lower()].jzazbz_dist)
    print(f'{value:.6f}')
    return ExitCode.OK


ANALYZE_KEYS = ('seed', 'threads', 'out', 'n_partners', 'n_bins', 'n_extremes', 'dims_sweep', 'rounds', 'depth',
                'learning_rate')


def _analyze_settings(args):
    options = resolve_options(args, ANALYZE_KEYS)
    settings = {'seed': _typed(options, 'seed', DEFAULT_SEED, int),
                'threads': _typed(options, 'threads', 1, int),
                'n_partners': _typed(options, 'n_partners', analysis.DEFAULT_N_PARTNERS, int),
                'n_bins': _typed(options, 'n_bins', analysis.DEFAULT_N_BINS, int),
                'n_extremes': _typed(options, 'n_extremes', analysis.DEFAULT_N_EXTREMES, _to_positive_int)}
    out_dir = Path(options.get('out', DEFAULT_OUT))
    out_dir.mkdir(parents=True, exist_ok=True)
    return options, settings, out_dir


def _trend_rows(name, trend):
    return [(name, i, p.mean_x, p.mean_y, p.count) for i, p in enumerate(trend)]


def cmd_analyze_concreteness(args):
    options, settings, out_dir = _analyze_settings(args)
    embedding_file = store.load_embeddings(args.embeddings, load_colorgrams=False)
    embeddings = embedding_file.entries
    concreteness = store.load_concreteness(args.concreteness)
    text_vectors = store.load_text_vectors(args.text_vectors) if args.text_vectors else None
    tables = [concreteness] + ([text_vectors] if text_vectors is not None else [])
    words, _ = store.inner_join(sorted(embeddings), *tables)
    if len(words) < 2:
        raise InsufficientJoin(f'{len(words)} words have both an embedding and a concreteness rating.')
    records = analysis.pair_similarity_records(embeddings, words, settings['n_partners'], settings['seed'],
                                               text_vectors, concreteness, settings['threads'])
    result = analysis.concreteness_regression(records, settings['n_bins'])
    outputs = [_write_csv(out_dir / 'concreteness-trend.csv',
                          ('backend', 'bin', 'mean_concreteness', 'mean_similarity', 'count'),
                          [row for name, trend in result.trends.items() for row in _trend_rows(name, trend)])]
    outputs.append(_write_csv(out_dir / 'concreteness-models.csv',
                              ('backend', 'model', 'coefficients', 'r_squared', 'log_likelihood', 'bic', 'n'),
                              [(backend, kind.value, ' '.join(repr(c) for c in r.coefficients), r.r_squared,
                                r.log_likelihood, r.bic, r.n) for (backend, kind), r in result.reports.items()]))
    outputs.append(_write_csv(out_dir / 'concreteness-comparisons.csv',
                              ('model_a', 'model_b', 'delta_log_likelihood', 'delta_bic'), result.comparisons))
    extremes = analysis.concreteness_extremes(words, concreteness, settings['n_extremes'])
    outputs.append(_write_csv(out_dir / 'concreteness-extremes.csv',
                              ('end', 'rank', 'word', 'concreteness_mean', 'colorgram'),
                              [(r.end, r.rank, r.word, r.concreteness, embedding_file.colorgram_paths.get(r.word, ''))
                               for r in extremes]))
    for backend, trend in result.trends.items():
        label = 'JS divergence (lower = more similar)' if backend == 'color' else 'cosine similarity'
        outputs.append(plots.write_line_chart_svg(
            out_dir / f'concreteness-trend-{backend}.svg', f'{backend} similarity vs. summed concreteness',
            'summed concreteness', label, [(backend, [p.mean_x for p in trend], [p.mean_y for p in trend])]))
    _finish('analyze concreteness', {**options, **settings}, settings['seed'],
            [args.embeddings, args.concreteness, args.text_vectors], out_dir, outputs)
    return ExitCode.OK


def cmd_analyze_similarity_trend(args):
    options, settings, out_dir = _analyze_settings(args)
    embeddings = store.load_embeddings(args.embeddings, load_colorgrams=False).entries
    text_vectors = store.load_text_vectors(args.text_vectors)
    concreteness = store.load_concreteness(args.concreteness) if args.concreteness else None
    words, _ = store.inner_join(sorted(embeddings), text_vectors)
    if len(words) < 2:
        raise InsufficientJoin(f'{len(words)} words have both a color embedding and a text vector.')
    records = analysis.pair_similarity_records(embeddings, words, settings['n_partners'], settings['seed'],
                                               text_vectors, concreteness, settings['threads'])
    result = analysis.similarity_trend(records, settings['n_bins'])
    outputs = [_write_csv(out_dir / 'similarity-trend.csv', ('group', 'bin', 'mean_cosine', 'mean_js', 'count'),
                          [row for name, trend in result.trends.items() for row in _trend_rows(name, trend)])]
    outputs.append(_write_csv(out_dir / 'similarity-jt.csv', ('group', 'jt', 'p_value'),
                              [(name, jt, p) for name, (jt, p) in result.jt.items()]))
    outputs.append(plots.write_line_chart_svg(
        out_dir / 'similarity-trend.svg', 'color similarity vs. text similarity', 'cosine similarity',
        'JS divergence (lower = more similar)',
        [(name, [p.mean_x for p in trend], [p.mean_y for p in trend]) for name, trend in result.trends.items()]))
    _finish('analyze similarity-trend', {**options, **settings}, settings['seed'],
            [args.embeddings, args.text_vectors, args.concreteness], out_dir, outputs)
    return ExitCode.OK


def cmd_analyze_metaphor(args):
    options, settings, out_dir = _analyze_settings(args)
    dims_sweep = _typed(options, 'dims_sweep', DEFAULT_DIMS_SWEEP, _to_dims)
    params = {'rounds': _typed(options, 'rounds', 200, int),
              'depth': _typed(options, 'depth', 3, int),
              'learning_rate': _typed(options, 'learning_rate', 0.1, float)}
    embedding_file = store.load_embeddings(args.embeddings, load_colorgrams=False)
    embeddings = embedding_file.entries
    text_vectors = store.load_text_vectors(args.text_vectors)
    pairs = store.load_labeled_pairs(args.pairs)
    reports = analysis.metaphor_pipeline(pairs, embeddings, text_vectors, dims_sweep, settings['seed'], params)
    outputs = [_write_csv(out_dir / 'metaphor-accuracy.csv',
                          ('embedding', 'pca_dims', 'train_accuracy', 'test_accuracy', 'seed', 'n_train', 'n_test'),
                          [(r.embedding_name, r.pca_dims, r.train_accuracy, r.test_accuracy, r.seed, r.n_train,
                            r.n_test) for r in reports])]
    series = []
    for name in ('color', 'text'):
        subset = [r for r in reports if r.embedding_name == name]
        if subset:
            series.append((name, [r.pca_dims for r in subset], [r.test_accuracy for r in subset]))
    outputs.append(plots.write_line_chart_svg(out_dir / 'metaphor-accuracy.svg', 'metaphor classification',
                                              'PCA dimensions', 'test set accuracy', series))
    similarity = analysis.metaphor_similarity(pairs, embeddings, text_vectors)
    outputs.append(_write_csv(out_dir / 'metaphor-similarity.csv',
                              ('backend', 'label', 'n', 'mean', 'sem', 'ci_half_width'),
                              [(backend, label.value, *s) for (backend, label), s in similarity.summaries.items()]))
    outputs.append(_write_csv(out_dir / 'metaphor-wilcoxon.csv', ('backend', 'u', 'p_value'),
                              [(backend, u, p) for backend, (u, p) in similarity.tests.items()]))
    colorgrams = embedding_file.colorgram_paths
    extremes = analysis.pair_similarity_extremes(pairs, embeddings, text_vectors, settings['n_extremes'])
    outputs.append(_write_csv(out_dir / 'metaphor-extremes.csv',
                              ('backend', 'end', 'rank', 'adjective', 'noun', 'label', 'similarity',
                               'adjective_colorgram', 'noun_colorgram'),
                              [(r.backend, r.end, r.rank, r.adjective, r.noun, r.label.value, r.similarity,
                                colorgrams.get(r.adjective, ''), colorgrams.get(r.noun, '')) for r in extremes]))
    for backend, label in (('color', 'JS divergence (lower = more similar)'), ('text', 'cosine similarity')):
        bars = [(pair_label.value, s.mean, s.ci_half_width) for (b, pair_label), s in similarity.summaries.items()
                if b == backend]
        if bars:
            outputs.append(plots.write_bar_chart_svg(out_dir / f'metaphor-similarity-{backend}.svg',
                                                     f'{backend} similarity of adjective-noun pairs', label, bars))
    _finish('analyze metaphor', {**options, **settings, **params, 'dims_sweep': dims_sweep},
            settings['seed'], [args.embeddings, args.text_vectors, args.pairs], out_dir, outputs)
    return ExitCode.OK


def cmd_serve(args):
    from chromalex.search_server import serve
    serve(args.image_root, host=args.host, port=args.port)
    return ExitCode.OK


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='file of key = value settings')
    common.add_argument('--seed', type=int, help=f'random seed (default: {DEFAULT_SEED})')
    common.add_argument('--out', help='output directory')
    common.add_argument('--threads', type=int, help='worker threads')
    return common


def build_parser():
    parser = argparse.ArgumentParser(prog='chromalex', description='Word-color embeddings in JzAzBz colorspace.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='warnings only, no progress bars')
    common = _common_parser()
    commands = parser.add_subparsers(dest='command', required=True)

    ingest = commands.add_parser('ingest', parents=[common], help='fetch and cache image sets')
    ingest.add_argument('words', help='word list, one word per line')
    ingest.add_argument('--mode', choices=('local_dir', 'http_search'))
    ingest.add_argument('--root', help='directory with one image folder per word (local_dir)')
    ingest.add_argument('--endpoint', help='search URL template with {query} (http_search)')
    ingest.add_argument('--images-per-word', dest='images_per_word', type=int)
    ingest.add_argument('--extra-query', dest='extra_query')
    ingest.add_argument('--rate-limit', dest='rate_limit', type=float, help='requests per second')
    ingest.add_argument('--cache-dir', dest='cache_dir')
    ingest.add_argument('--timeout', type=float, help='seconds')
    ingest.add_argument('--user-agent', dest='user_agent')
    ingest.add_argument('--max-in-flight', dest='max_in_flight', type=int)
    ingest.set_defaults(handler=cmd_ingest)

    embed = commands.add_parser('embed', parents=[common], help='compute word-color embeddings')
    embed.add_argument('words', help='word list, one word per line')
    embed.add_argument('cache', help='image cache populated by `ingest`')
    embed.add_argument('output', help='embedding JSON to write')
    embed.add_argument('--std', dest='include_std', action='store_const', const=True,
                       help='store per-bin standard deviations (default)')
    embed.add_argument('--no-std', dest='include_std', action='store_const', const=False,
                       help='omit per-bin standard deviations')
    embed.add_argument('--concreteness', help='ratings to attach to the embeddings')
    embed.set_defaults(handler=cmd_embed)

    compare = commands.add_parser('compare', parents=[common], help='JS divergence of two words')
    compare.add_argument('embeddings')
    compare.add_argument('word_a')
    compare.add_argument('word_b')
    compare.set_defaults(handler=cmd_compare)

    analyze = commands.add_parser('analyze', help='run an analysis')
    analyses = analyze.add_subparsers(dest='analysis', required=True)
    concreteness = analyses.add_parser('concreteness', parents=[common])
    concreteness.add_argument('--embeddings', required=True)
    concreteness.add_argument('--concreteness', required=True)
    concreteness.add_argument('--text-vectors', dest='text_vectors')
    trend = analyses.add_parser('similarity-trend', parents=[common])
    trend.add_argument('--embeddings', required=True)
    trend.add_argument('--text-vectors', dest='text_vectors', required=True)
    trend.add_argument('--concreteness')
    for sub in (concreteness, trend):
        sub.add_argument('--n-partners', dest='n_partners', type=int)
        sub.add_argument('--n-bins', dest='n_bins', type=int)
    concreteness.set_defaults(handler=cmd_analyze_concreteness)
    trend.set_defaults(handler=cmd_analyze_similarity_trend)
    metaphor = analyses.add_parser('metaphor', parents=[common])
    metaphor.add_argument('--embeddings', required=True)
    metaphor.add_argument('--text-vectors', dest='text_vectors', required=True)
    metaphor.add_argument('--pairs', required=True, help='CSV with header adjective,noun,label')
    metaphor.add_argument('--dims', dest='dims_sweep', help='comma-separated PCA dimensions')
    metaphor.add_argument('--rounds', type=int)
    metaphor.add_argument('--depth', type=int)
    metaphor.add_argument('--learning-rate', dest='learning_rate', type=float)
    for sub in (concreteness, metaphor):
        sub.add_argument('--n-extremes', dest='n_extremes', type=int, help='words or pairs listed per end')
    metaphor.set_defaults(handler=cmd_analyze_metaphor)

    serve = commands.add_parser('serve', help='serve a local image directory as a search endpoint')
    serve.add_argument('image_root')
    serve.add_argument('--host', default='127.0.0.1')
    serve.add_argument('--port', default=5000, type=int)
    serve.set_defaults(handler=cmd_serve)
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        return int(args.handler(args))
    except (ConfigError, ParseError, DimensionMismatch, OSError) as e:
        logger.error('%s', e)
        return int(ExitCode.CONFIG)
    except (InsufficientData, InsufficientJoin, SingularDesign, DegenerateLabels) as e:
        logger.error('%s', e)
        return int(ExitCode.ANALYSIS_JOIN)
    except ChromalexError as e:
        logger.error('%s', e)
        return int(ExitCode.FAILURE)


if __name__ == '__main__':
    sys.exit(main())
