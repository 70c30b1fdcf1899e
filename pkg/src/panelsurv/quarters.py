"""Quarter index arithmetic.

A quarter is a single integer, ``year * 4 + (quarter_of_year - 1)``, so age
and difference computations are exact integer arithmetic.  Files use the
human-readable ``YYYYQn`` form.
"""

import re

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


def parse_quarter(text):
    """Convert ``'YYYYQn'`` (or an already-encoded integer string) to the index."""
    if isinstance(text, int):
        return text
    text = text.strip()
    m = _QUARTER_RE.match(text)
    if m:
        year, q = int(m.group(1)), int(m.group(2))
        return year * 4 + (q - 1)
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    raise ValueError(f"not a quarter: {text!r} (expected YYYYQn or an integer index)")


def format_quarter(index):
    """Render an integer quarter index as ``YYYYQn``."""
    year, q = divmod(int(index), 4)
    return f"{year:04d}Q{q + 1}"
