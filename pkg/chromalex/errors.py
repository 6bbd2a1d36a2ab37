"""
Exceptions raised across chromalex
"""


class ChromalexError(Exception):
    """Base class of every error raised by chromalex."""


class DecodeError(ChromalexError):
    """Image bytes are corrupt or in an unsupported format."""


class EmptyInput(ChromalexError):
    """An aggregation was asked to reduce an empty list."""


class SupportError(ChromalexError):
    """KL divergence where q has no mass where p does."""


class ZeroVector(ChromalexError):
    """Cosine similarity of a zero-norm vector."""


class ParseError(ChromalexError):
    def __init__(self, message, word=None, field=None, line=None):
        """
        Malformed record in one of the input files
        :param message: Human-readable description
        :param word: Word whose record is malformed, if known
        :param field: Offending field name, if known
        :param line: 1-based line number, if known
        """
        parts = [message]
        if word is not None:
            parts.append(f'word={word!r}')
        if field is not None:
            parts.append(f'field={field!r}')
        if line is not None:
            parts.append(f'line={line}')
        super().__init__(', '.join(parts))
        self.word = word
        self.field = field
        self.line = line


class DimensionMismatch(ChromalexError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f'{message} (line {line})')
        self.line = line


class NotFound(ChromalexError):
    """No images could be obtained for a word."""


class ConfigError(ChromalexError):
    """Invalid configuration value."""


class InsufficientData(ChromalexError):
    """Fewer samples than an analysis needs."""


class SingularDesign(ChromalexError):
    """Regression design matrix is rank deficient."""


class SampleMismatch(ChromalexError):
    """Two regression reports were fitted on different samples."""


class DegenerateLabels(ChromalexError):
    """Classifier labels do not contain two usable classes."""


class InsufficientJoin(ChromalexError):
    """Too few items survived joining the input tables."""


class RankDeficient(UserWarning):
    """PCA asked for more components than the numerical rank of the data."""
