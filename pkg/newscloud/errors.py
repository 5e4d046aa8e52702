"""Exceptions raised by newscloud.

Each exception also derives from the closest builtin, so callers that only catch
ValueError / OSError / RuntimeError keep working.
"""

from __future__ import annotations

import os
from typing import Optional


class NewsCloudError(Exception):
    """Base class for all newscloud pipeline errors."""


class CorpusFormatError(NewsCloudError, ValueError):
    """Corpus file is not valid JSON, or not shaped like a corpus."""

    def __init__(
        self,
        message: str,
        path: Optional[os.PathLike | str] = None,
        line: int = 0,
        column: int = 0,
        context: str = "",
    ):
        if path is None:
            location = ""
        elif line:
            location = f"{path}:{line}:{column}: "
        else:
            location = f"{path}: "
        text = f"{location}{message}"
        if context:
            text += f"\n    {context}"
        super().__init__(text)
        self.path = path
        self.line = line
        self.column = column


class CorpusValidationError(NewsCloudError, ValueError):
    """A document violates a corpus invariant."""

    def __init__(self, doc_id: str, message: str):
        super().__init__(f"document {doc_id!r}: {message}")
        self.doc_id = doc_id


class ResourceError(NewsCloudError, FileNotFoundError):
    """A language resource or model file could not be read."""

    def __init__(self, path: os.PathLike | str, message: str = "resource file not found"):
        super().__init__(f"{message}: {path}")
        self.path = path


class ArpaFormatError(NewsCloudError, ValueError):
    """Malformed ARPA language model text."""

    def __init__(self, message: str, line_no: int = 0, line: str = ""):
        text = f"line {line_no}: {message}" if line_no else message
        if line:
            text += f": {line!r}"
        super().__init__(text)
        self.line_no = line_no


class MPHConstructionError(NewsCloudError, RuntimeError):
    """Minimal perfect hash construction ran out of attempts."""


class ModelFormatError(NewsCloudError, ValueError):
    """A binary model container is corrupt or truncated."""


class ModelVersionError(ModelFormatError):
    """A binary model container was written by an unsupported format version."""

    def __init__(self, kind: str, found: int, supported: int):
        super().__init__(
            f"{kind} container version {found} is not supported (this reader handles {supported})"
        )
        self.found = found
        self.supported = supported


class SchemaMismatchError(NewsCloudError, ValueError):
    """A model was trained on a different feature schema than the one in use."""


class ConfigError(NewsCloudError, ValueError):
    """Bad run configuration: unknown key, unparsable or out-of-range value."""
