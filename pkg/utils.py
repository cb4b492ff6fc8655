"""
Utility functions for the dual-decoding toolkit.

This module provides helpers used throughout the application:
- Atomic file output (temp file + rename)
- Line-oriented corpus reading and writing
- Seeded random generators
"""

import logging
import os
import tempfile
import zlib

import numpy as np

from errors import InputError

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def atomic_write_bytes(path, payload):
    """
    Write bytes so that readers see either the old file or the complete new one.

    Args:
        path (str): Destination path
        payload (bytes): File content
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logger.debug(f"Wrote {len(payload)} bytes to {path}")


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_lines(path, lines):
    """Atomically write one line per item, UTF-8, trailing newline."""
    atomic_write_text(path, "".join(f"{line}\n" for line in lines))


def read_lines(path, allow_empty=False):
    """
    Read a UTF-8 text file into a list of lines without newline characters.

    Args:
        path (str): File to read
        allow_empty (bool): Whether blank lines are acceptable

    Returns:
        list: Lines of the file

    Raises:
        InputError: missing file, or a blank line when not allowed
    """
    if not os.path.exists(path):
        raise InputError(f"No such file: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.rstrip("\n").rstrip("\r") for line in handle]
    if not allow_empty:
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                raise InputError(f"{path}:{number}: empty line")
    return lines


def require_files(paths):
    """Raise InputError for the first path that does not exist."""
    for path in paths:
        if path and not os.path.exists(path):
            raise InputError(f"No such file: {path}")


def make_rng(seed):
    """Seeded numpy Generator; every stochastic component takes one of these."""
    return np.random.default_rng(seed)


def derive_seed(seed, *labels):
    """
    Derive a child seed for a named component so components stay independent.

    Args:
        seed (int): Run seed
        labels (str): Component names

    Returns:
        int: Deterministic child seed
    """
    sequence = np.random.SeedSequence([seed] + [zlib.crc32(label.encode("utf-8")) for label in labels])
    return int(sequence.generate_state(1)[0])
