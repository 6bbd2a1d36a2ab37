"""
A local image-search endpoint serving a directory of per-word image folders
in the JSON-lines result format read by `ingestion.json_lines_parser`
"""
import logging
import threading
from pathlib import Path

from flask import Flask, Response, abort, jsonify, request, send_from_directory, url_for

from chromalex import encoder
from chromalex.ingestion import IMAGE_EXTENSIONS
from chromalex.validation import safe_filename

logger = logging.getLogger(__name__)


def _word_directory(image_root, word):
    for name in (word, safe_filename(word)):
        directory = image_root / name
        if name and directory.is_dir() and directory.resolve().parent == image_root.resolve():
            return directory
    return None


def create_app(image_root):
    """
    Build the Flask app
    :param image_root: Directory with one subdirectory of images per word
    :return: flask.Flask; `app.config['REQUEST_COUNT']` counts the requests served
    """
    image_root = Path(image_root)
    app = Flask(__name__)
    app.config['IMAGE_ROOT'] = image_root
    app.config['REQUEST_COUNT'] = 0
    counter_lock = threading.Lock()

    @app.before_request
    def count_request():
        with counter_lock:
            app.config['REQUEST_COUNT'] += 1

    # endpoint to search images of a word
    @app.route('/search', methods=['GET'])
    def search():
        word = request.args.get('q', '').strip().lower()
        directory = _word_directory(image_root, word) if word else None
        lines = []
        if directory is not None:
            for path in sorted(directory.iterdir()):
                if path.is_file() and path.suffix.lower() in IMAGE_EXTENSIONS:
                    url = url_for('image', word=directory.name, name=path.name, _external=True)
                    lines.append(encoder.dumps({'url': url}, indent=None) + '\n')
        logger.debug('search %r -> %d results', word, len(lines))
        return Response(''.join(lines), status=200, mimetype='application/x-ndjson')

    # endpoint to download one image
    @app.route('/images/<word>/<name>', methods=['GET'])
    def image(word, name):
        directory = _word_directory(image_root, word)
        if directory is None:
            abort(404)
        return send_from_directory(directory.resolve(), name)

    # endpoint to get server status
    @app.route('/status', methods=['GET'])
    def get_status():
        words = sum(1 for p in image_root.iterdir() if p.is_dir()) if image_root.is_dir() else 0
        return jsonify({'status': 'serving', 'words': words, 'requests': app.config['REQUEST_COUNT']}), 200

    return app


def serve(image_root, host='127.0.0.1', port=5000):
    app = create_app(image_root)
    logger.info('serving images from %s at http://%s:%d/search?q={query}', image_root, host, port)
    app.run(host=host, port=port, threaded=True)
