"""
ICD-10-CM code validation.

Codes are validated syntactically by default. When a code table (one code per
line) is supplied, membership in the table is required instead, which is the
strict mode used when an official code release is available.
"""

from __future__ import annotations

from pathlib import Path
from typing import AbstractSet, FrozenSet, Optional

from icdcoder.domain.errors import CodeRejected
from icdcoder.domain.models import CODE_PATTERN, IcdCode


def canonicalize(raw: str) -> str:
    """Trim and uppercase a raw code string."""
    return (raw or "").strip().upper()


def validate_code(raw: str, code_table: Optional[AbstractSet[str]] = None) -> IcdCode:
    """
    Turn a raw code string into a canonical `IcdCode`.

    Parameters
    ----------
    raw
        Any string, e.g. ``" i10 "``.
    code_table
        Optional set of canonical code strings. When given, the code must be
        a member; the syntactic pattern still applies so `IcdCode` invariants hold.

    Returns
    -------
    IcdCode
        Canonical code.

    Raises
    ------
    CodeRejected
        With reason ``"empty"``, ``"malformed"`` or ``"not_in_table"``.
    """
    value = canonicalize(raw)
    if not value:
        raise CodeRejected(raw, "empty")
    if code_table is not None and value not in code_table:
        raise CodeRejected(raw, "not_in_table")
    if not CODE_PATTERN.match(value):
        raise CodeRejected(raw, "malformed")
    return IcdCode(value)


def load_code_table(path: str | Path) -> FrozenSet[str]:
    """
    Read a code table file: one code per line, ``#`` comments and blanks ignored.

    Tokens after the first whitespace on a line (e.g. descriptions) are ignored.
    """
    codes = set()
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            codes.add(canonicalize(line.split()[0]))
    return frozenset(codes)
