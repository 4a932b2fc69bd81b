"""
Raw MovieLens rating files.

The 100K release separates ``user item rating timestamp`` with tabs; the
1M, 10M and 20M releases use ``::``.
"""

import os
from collections.abc import Iterable, Iterator

from convexfm.exceptions import ParseError
from convexfm.protocols.cfm import RatingFormat, RatingRecord


def parse_record(line: str, fmt: RatingFormat, lineno: int | None = None,
                 path: str | None = None) -> RatingRecord:
    """Parse one rating line.

    :param line: The line, stripped.
    :param fmt: The file layout.
    :raises ParseError: Wrong number of fields or a non-numeric rating.
    :rtype: RatingRecord
    """
    fields = line.split(fmt.separator)
    if len(fields) != 4:
        raise ParseError(f"expected 4 fields, got {len(fields)}",
                         path=path, line=lineno)
    user, item, rating, timestamp = (field.strip() for field in fields)
    if not user or not item:
        raise ParseError("empty user or item id", path=path, line=lineno)
    try:
        value = float(rating)
    except ValueError:
        raise ParseError(f"non-numeric rating {rating!r}",
                         path=path, line=lineno) from None
    return {"user": user, "item": item, "rating": value,
            "timestamp": timestamp}


def parse_records(lines: Iterable[str], fmt: RatingFormat,
                  path: str | None = None) -> Iterator[RatingRecord]:
    """Parse rating lines, skipping blank ones."""
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line:
            yield parse_record(line, fmt, lineno, path)


def read(path: str | os.PathLike,
         fmt: RatingFormat = RatingFormat.TAB_100K) -> list[RatingRecord]:
    """Read every rating of a MovieLens file."""
    # ratings are ASCII, but the 1M release ships other files as latin-1
    with open(path, encoding="latin-1") as fh:
        return list(parse_records(fh, fmt, os.fspath(path)))
