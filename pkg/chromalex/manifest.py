"""
Run manifests: how an output directory was produced
"""
import datetime
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from chromalex import __version__, encoder
from chromalex.store import atomic_write_bytes

MANIFEST_NAME = 'run-manifest.json'


def hash_file(path):
    """SHA-256 of a file's content."""
    sha256_hash = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            sha256_hash.update(block)
    return sha256_hash.hexdigest()


def hash_inputs(paths):
    hashes = {}
    for path in paths:
        if path is None:
            continue
        path = Path(path)
        if path.is_file():
            hashes[path.as_posix()] = hash_file(path)
        elif path.is_dir():
            # a directory (e.g. an image cache) is identified by its per-word manifests
            digest = hashlib.sha256()
            for member in sorted(path.rglob('manifest.json')):
                digest.update(member.relative_to(path).as_posix().encode('utf-8'))
                digest.update(member.read_bytes())
            hashes[path.as_posix()] = digest.hexdigest()
    return hashes


@dataclass
class RunManifest(object):
    command: str
    config: Dict
    seed: int
    input_hashes: Dict[str, str]
    tool_version: str = __version__
    started_at: datetime.datetime = field(
        default_factory=lambda: datetime.datetime.now(datetime.timezone.utc))
    finished_at: Optional[datetime.datetime] = None
    outputs: List[str] = field(default_factory=list)

    def compute_hash(self):
        """
        Return the hash of everything that determines the outputs (timestamps excluded)
        """
        content = {'command': self.command, 'config': self.config, 'seed': self.seed,
                   'input_hashes': self.input_hashes, 'tool_version': self.tool_version}
        return hashlib.sha256(json.dumps(content, cls=encoder.NumpyEncoder, sort_keys=True).encode()).hexdigest()

    def write(self, out_dir):
        if self.finished_at is None:
            self.finished_at = datetime.datetime.now(datetime.timezone.utc)
        record = asdict(self)
        record['run_hash'] = self.compute_hash()
        path = Path(out_dir) / MANIFEST_NAME
        atomic_write_bytes(path, (encoder.dumps(record) + '\n').encode('utf-8'))
        return path


def load_manifest(path):
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)
