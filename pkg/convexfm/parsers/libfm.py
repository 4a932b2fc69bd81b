"""
The libFM text format.

One sample per line: ``<target> <index>:<value> <index>:<value> ...`` with
0-based integer indices. Blank lines and lines starting with ``#`` are
skipped, except for two header directives this package writes so that the
feature layout survives a round trip::

    # convexfm-dim 2625
    # convexfm-block users 0 943
    # convexfm-block items 943 1682
"""

import os
import re
from collections.abc import Iterable, Iterator

import numpy as np

from convexfm.exceptions import ParseError
from convexfm.protocols.cfm import BlockData, LibfmData

DIM_DIRECTIVE = "# convexfm-dim"
BLOCK_DIRECTIVE = "# convexfm-block"
_INDEX = re.compile(r"\d+")


def format_float(value: float) -> str:
    """Formats a float so that parsing it back gives the same bits."""
    return repr(float(value))


def parse_line(line: str, lineno: int | None = None,
               path: str | None = None) -> tuple[float, np.ndarray,
                                                 np.ndarray]:
    """Parse one sample line.

    :param line: The line, without comments.
    :param lineno: The line number, for error messages.
    :param path: The file name, for error messages.
    :raises ParseError: A token is malformed or non-finite, or an index
        repeats.
    :return: The target, the sorted indices and their values.
    """
    tokens = line.split()
    try:
        target = float(tokens[0])
    except ValueError:
        raise ParseError(f"malformed target {tokens[0]!r}",
                         path=path, line=lineno) from None
    if not np.isfinite(target):
        raise ParseError(f"non-finite target {tokens[0]!r}",
                         path=path, line=lineno)
    indices = []
    values = []
    for token in tokens[1:]:
        index, sep, value = token.partition(":")
        if not sep or not _INDEX.fullmatch(index):
            raise ParseError(f"malformed feature {token!r}",
                             path=path, line=lineno)
        try:
            values.append(float(value))
        except ValueError:
            raise ParseError(f"malformed value in {token!r}",
                             path=path, line=lineno) from None
        indices.append(int(index))
    indices = np.asarray(indices, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ParseError("non-finite feature value", path=path, line=lineno)
    order = np.argsort(indices, kind="stable")
    indices, values = indices[order], values[order]
    if np.any(np.diff(indices) == 0):
        raise ParseError("duplicate feature index", path=path, line=lineno)
    return target, indices, values


def parse_directive(line: str, lineno: int,
                    path: str | None) -> tuple[str, object] | None:
    """Parse a header directive; returns ``None`` for ordinary comments."""
    tokens = line.split()
    keyword, fields = " ".join(tokens[:2]), tokens[2:]
    try:
        if keyword == DIM_DIRECTIVE:
            (dim,) = fields
            return "dim", int(dim)
        if keyword == BLOCK_DIRECTIVE:
            name, offset, width = fields
            return "block", {"name": name, "offset": int(offset),
                             "width": int(width)}
    except ValueError:
        raise ParseError(f"malformed header {line!r}",
                         path=path, line=lineno) from None
    return None


def parse_lines(lines: Iterable[str], dim: int | None = None,
                path: str | None = None) -> LibfmData:
    """Parse libFM lines.

    :param lines: The lines.
    :param dim: Overrides the number of columns; by default it is the
        header value, else one more than the largest index.
    :param path: The file name, for error messages.
    :raises ParseError: A line is malformed or an index is out of range.
    :rtype: LibfmData
    """
    targets = []
    offsets = [0]
    indices = []
    values = []
    header_dim = None
    blocks: list[BlockData] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            directive = parse_directive(line, lineno, path)
            if directive is None:
                continue
            kind, payload = directive
            if kind == "dim":
                header_dim = payload
            else:
                blocks.append(payload)
            continue
        target, row_indices, row_values = parse_line(line, lineno, path)
        if dim is not None and row_indices.size \
           and row_indices[-1] >= dim:
            raise ParseError(f"index {row_indices[-1]} out of range for "
                             f"dimension {dim}", path=path, line=lineno)
        targets.append(target)
        indices.append(row_indices)
        values.append(row_values)
        offsets.append(offsets[-1] + row_indices.size)
    col_indices = np.concatenate(indices) if indices \
        else np.zeros(0, dtype=np.int64)
    if dim is None:
        dim = header_dim
    if dim is None:
        dim = int(col_indices.max()) + 1 if col_indices.size else 0
    elif col_indices.size and col_indices.max() >= dim:
        raise ParseError(f"index {col_indices.max()} out of range for "
                         f"dimension {dim}", path=path)
    if not blocks or sum(block["width"] for block in blocks) != dim:
        blocks = [{"name": "libfm", "offset": 0, "width": dim}]
    return {
        "targets": np.asarray(targets, dtype=np.float64),
        "row_offsets": np.asarray(offsets, dtype=np.int64),
        "col_indices": col_indices,
        "values": np.concatenate(values) if values else np.zeros(0),
        "dim": dim,
        "blocks": blocks,
    }


def read(path: str | os.PathLike, dim: int | None = None) -> LibfmData:
    """Read a libFM file. See :py:func:`parse_lines`."""
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh, dim, os.fspath(path))


def format_lines(data: LibfmData) -> Iterator[str]:
    """Yields the lines of a libFM file, header directives first."""
    yield f"{DIM_DIRECTIVE} {data['dim']}\n"
    for block in data["blocks"]:
        yield (f"{BLOCK_DIRECTIVE} {block['name']} {block['offset']} "
               f"{block['width']}\n")
    offsets = data["row_offsets"]
    for row, target in enumerate(data["targets"]):
        lo, hi = offsets[row], offsets[row + 1]
        features = " ".join(
            f"{index}:{format_float(value)}"
            for index, value in zip(data["col_indices"][lo:hi],
                                    data["values"][lo:hi])
        )
        yield f"{format_float(target)} {features}".rstrip() + "\n"


def write(path: str | os.PathLike, data: LibfmData) -> None:
    """Write a libFM file that :py:func:`read` restores exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(format_lines(data))
