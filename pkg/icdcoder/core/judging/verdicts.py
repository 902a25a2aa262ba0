"""
Judge verdict extraction.

Judges usually answer with a bare ``A`` or ``B`` but sometimes deviate, e.g.
``2 (Note: This result does NOT follow your format)``. An ordered cascade of
regular expressions recovers the decision; the first match wins and anything
unmatched is recorded as a tie.
"""

from __future__ import annotations

import re
from typing import List, Tuple

from icdcoder.domain.matchups import Verdict

_CASCADE: List[Tuple[re.Pattern, dict]] = [
    # 1. bare letter, optionally quoted/bracketed: "A", "[[B]]", "B."
    (re.compile(r"^\W*([AB])\W*$"), {"A": Verdict.A, "B": Verdict.B}),
    # 2. trailing letter token: "Verdict: B", "Final answer: [[A]]"
    (re.compile(r"(?:^|[\s:\"'\[\(])([AB])[\]\)\"'.!\s]*$"), {"A": Verdict.A, "B": Verdict.B}),
    # 3. numeral standing alone at the start: "2 (Note: ...)"
    (re.compile(r"^\s*([12])(?=$|[\s()\[\]:,])"), {"1": Verdict.A, "2": Verdict.B}),
    # 4. explicit phrase
    (
        re.compile(r"response\s*([ab])\s+is\s+(?:the\s+)?better", re.IGNORECASE),
        {"a": Verdict.A, "b": Verdict.B, "A": Verdict.A, "B": Verdict.B},
    ),
]


def parse_verdict(raw: str) -> Verdict:
    """
    Extract a verdict from judge output.

    Total and deterministic: never raises; unmatched text gives `Verdict.TIE`.
    """
    text = raw if isinstance(raw, str) else ""
    for pattern, mapping in _CASCADE:
        m = pattern.search(text)
        if m:
            return mapping[m.group(1)]
    return Verdict.TIE
