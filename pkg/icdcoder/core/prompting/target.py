"""
Output convention for coding answers.

    MAINCODE: I10
    OTHERCODE: E11.9, N18.3

`format_target` renders training targets; `parse_prediction` reads model output
back, collecting problems as warnings instead of failing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from icdcoder.core.corpus.codes import validate_code
from icdcoder.domain.errors import CodeRejected
from icdcoder.domain.models import IcdCode

MAIN_PREFIX = "MAINCODE: "
OTHER_PREFIX = "OTHERCODE: "
SEPARATOR = ", "

_MAIN_LINE = re.compile(r"^\s*maincode\s*:(.*)$", re.IGNORECASE | re.MULTILINE)
_OTHER_LINE = re.compile(r"^\s*othercode\s*:(.*)$", re.IGNORECASE | re.MULTILINE)


@dataclass(frozen=True)
class PredictionCodes:
    """
    Codes parsed from a model answer.

    Parameters
    ----------
    main_code
        Predicted main code, absent if missing or invalid.
    other_codes
        Predicted secondary codes, duplicate-free, never containing `main_code`.
    parse_warnings
        Problems met while parsing.
    """

    main_code: Optional[IcdCode] = None
    other_codes: Tuple[IcdCode, ...] = ()
    parse_warnings: Tuple[str, ...] = ()

    def code_set(self) -> frozenset:
        codes = set(self.other_codes)
        if self.main_code is not None:
            codes.add(self.main_code)
        return frozenset(codes)

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "PredictionCodes":
        """
        Read a pre-parsed ``{"main_code", "other_codes"}`` prediction with the same rules.

        A string `other_codes` is taken as one separated list, like an
        ``OTHERCODE`` line.
        """
        main = obj.get("main_code")
        others = obj.get("other_codes") or []
        if isinstance(others, str):
            others = [others]
        lines = [f"{MAIN_PREFIX}{main}"] if main else []
        lines.append(OTHER_PREFIX + SEPARATOR.join(str(c) for c in others))
        return parse_prediction("\n".join(lines))


def format_target(main: IcdCode, others: Sequence[IcdCode]) -> str:
    return f"{MAIN_PREFIX}{main.value}\n{OTHER_PREFIX}{SEPARATOR.join(c.value for c in others)}"


def parse_prediction(raw: str) -> PredictionCodes:
    """
    Parse a model answer.

    The first ``MAINCODE`` and ``OTHERCODE`` lines are used (case-insensitive).
    Invalid tokens, duplicates and repeats of the main code are dropped with
    a warning; a missing ``MAINCODE`` line leaves `main_code` absent.
    """
    text = raw if isinstance(raw, str) else ""
    warnings: List[str] = []

    main: Optional[IcdCode] = None
    m = _MAIN_LINE.search(text)
    if m is None:
        warnings.append("missing MAINCODE line")
    else:
        tokens = [t.strip() for t in m.group(1).split(",") if t.strip()]
        if not tokens:
            warnings.append("empty MAINCODE value")
        else:
            try:
                main = validate_code(tokens[0])
            except CodeRejected as e:
                warnings.append(f"invalid main code {tokens[0]!r}: {e.reason}")
            for extra in tokens[1:]:
                warnings.append(f"extra token on MAINCODE line ignored: {extra!r}")

    others: List[IcdCode] = []
    o = _OTHER_LINE.search(text)
    if o is None:
        warnings.append("missing OTHERCODE line")
    else:
        for token in (t.strip() for t in o.group(1).split(",")):
            if not token:
                continue
            try:
                code = validate_code(token)
            except CodeRejected as e:
                warnings.append(f"invalid code {token!r}: {e.reason}")
                continue
            if code == main:
                warnings.append(f"duplicate of main code {code.value!r}")
            elif code in others:
                warnings.append(f"duplicate code {code.value!r}")
            else:
                others.append(code)

    return PredictionCodes(main_code=main, other_codes=tuple(others), parse_warnings=tuple(warnings))
