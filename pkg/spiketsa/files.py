"""Output helpers: every artifact is written to a temporary sibling and renamed into place."""

import os
import tempfile
from contextlib import ExitStack, contextmanager

import pandas as pd

CSV_OPTIONS = {"index": False, "lineterminator": "\n", "float_format": "%.17g"}


def ensure_dir(path):
    """Create ``path`` (and parents) if it does not exist."""
    if path and not os.path.exists(path):
        os.makedirs(path)
    return path


@contextmanager
def atomic_path(path):
    """Yield a temporary path next to ``path``; rename it over ``path`` only if the block succeeds."""
    directory = os.path.dirname(os.path.abspath(path))
    ensure_dir(directory)
    fd, temp = tempfile.mkstemp(prefix=f".{os.path.basename(path)}.", suffix=".tmp", dir=directory)
    os.close(fd)
    try:
        yield temp
        os.replace(temp, path)
    finally:
        if os.path.exists(temp):
            os.remove(temp)


@contextmanager
def atomic_paths(*paths):
    """Temporary paths for several artifacts that appear together.

    Nothing is renamed unless the whole block succeeds, so a failure while
    writing any one of them leaves none behind.
    """
    with ExitStack() as stack:
        yield [stack.enter_context(atomic_path(path)) for path in paths]


def write_csv(frame: pd.DataFrame, path, **kwargs):
    """DataFrame to CSV with no index, '\\n' line endings and full float precision."""
    options = dict(CSV_OPTIONS)
    options.update(kwargs)
    frame.to_csv(path, **options)
    return path


def atomic_write_bytes(path, data: bytes):
    with atomic_path(path) as temp:
        with open(temp, "wb") as f:
            f.write(data)
    return path


def atomic_write_text(path, text: str):
    with atomic_path(path) as temp:
        with open(temp, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    return path


def atomic_write_csv(frame: pd.DataFrame, path, **kwargs):
    with atomic_path(path) as temp:
        write_csv(frame, temp, **kwargs)
    return path
