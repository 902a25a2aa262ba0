"""
Record cleaning.

Raw JSON objects from the corpus file are turned into validated
`CodedRecord` objects. Every section goes through character normalization
and rule-based removal of non-clinical spans; records with missing or
invalid codes, or with an empty discharge diagnosis, are dropped and logged
to a rejection list instead of aborting the run.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import AbstractSet, Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from icdcoder.domain.errors import CodeRejected, InvalidPattern, ValidationError
from icdcoder.domain.models import CodedRecord, IcdCode, Rejection, SectionKind, unique_codes
from icdcoder.core.corpus.codes import validate_code
from icdcoder.runtime.worker_pool import BoundedWorkerPool

logger = logging.getLogger(__name__)

# Full-width (CJK) punctuation and spaces to their ASCII equivalents.
PUNCTUATION_TABLE: Dict[str, str] = {
    "　": " ",
    "，": ",",
    "、": ",",
    "。": ".",
    "．": ".",
    "：": ":",
    "；": ";",
    "！": "!",
    "？": "?",
    "（": "(",
    "）": ")",
    "［": "[",
    "］": "]",
    "【": "[",
    "】": "]",
    "｛": "{",
    "｝": "}",
    "“": '"',
    "”": '"',
    "‘": "'",
    "’": "'",
    "＂": '"',
    "＇": "'",
    "－": "-",
    "～": "~",
    "／": "/",
    "％": "%",
    "＋": "+",
    "＝": "=",
    "＃": "#",
    "＆": "&",
    "＊": "*",
}

_TRANSLATION = str.maketrans(PUNCTUATION_TABLE)
_MARKUP = re.compile(r"</?p\s*/?>", re.IGNORECASE)
_SPACES = re.compile(r"[ \t]+")
_BLANK_RUNS = re.compile(r"\n{3,}")

DEFAULT_STRIP_RULES: Tuple[str, ...] = (
    r"\[PRINTED[^\]\n]*\]",
    r"(?im)^[ \t]*(?:electronically signed by|signed by|dictated by|transcribed by)\b[^\n]*$",
    r"(?im)^[ \t]*page \d+ of \d+[ \t]*$",
    r"(?m)^[ \t]*[-=_*]{3,}[ \t]*$",
    r"(?im)^[ \t]*(?:print(?:ed)? (?:date|time)|report generated)[ \t]*:[^\n]*$",
)


def normalize_text(raw: str) -> str:
    """
    Character-level normalization of clinical text.

    - full-width punctuation is mapped to half-width (`PUNCTUATION_TABLE`)
    - ``<p>`` / ``</p>`` markup is removed
    - runs of spaces/tabs collapse to one space
    - runs of three or more line breaks collapse to two
    - leading/trailing whitespace is stripped

    The function is total and idempotent.
    """
    if not raw:
        return ""
    text = raw.translate(_TRANSLATION)
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    while True:
        stripped = _MARKUP.sub("", text)
        if stripped == text:
            break
        text = stripped
    text = _SPACES.sub(" ", text)
    text = _BLANK_RUNS.sub("\n\n", text)
    return text.strip()


def compile_rules(rules: Sequence[Union[str, re.Pattern]]) -> List[re.Pattern]:
    """
    Compile stripping rules, reporting the index of the first invalid one.

    Raises
    ------
    InvalidPattern
        If a rule does not compile.
    """
    compiled: List[re.Pattern] = []
    for i, rule in enumerate(rules):
        if isinstance(rule, re.Pattern):
            compiled.append(rule)
            continue
        try:
            compiled.append(re.compile(rule))
        except re.error as e:
            raise InvalidPattern(i, rule, str(e)) from e
    return compiled


def _tidy(text: str) -> str:
    return _BLANK_RUNS.sub("\n\n", text).strip()


def strip_nonclinical(text: str, rules: Union[Sequence[str], Sequence[re.Pattern]]) -> str:
    """
    Delete every span matched by `rules`, applied in order.

    Rules are re-applied until the text stops changing, and blank lines left
    behind by deleted lines are tidied, so the result is a fixed point.

    Parameters
    ----------
    text
        Section text.
    rules
        Pattern strings (compiled here) or pre-compiled patterns.

    Raises
    ------
    InvalidPattern
        If a rule string does not compile.
    """
    compiled = compile_rules(rules)
    out = text
    while True:
        stripped = out
        for rx in compiled:
            stripped = rx.sub("", stripped)
        if stripped == out:
            return out
        out = _tidy(stripped)


@dataclass(frozen=True)
class CleaningOptions:
    """
    Options for `clean_corpus`.

    Parameters
    ----------
    rules
        Non-clinical stripping rules; defaults to `DEFAULT_STRIP_RULES`.
    code_table
        Optional strict code table.
    parallelism
        Worker threads used to clean records.
    """

    rules: Tuple[str, ...] = DEFAULT_STRIP_RULES
    code_table: Optional[AbstractSet[str]] = None
    parallelism: int = 1


class RecordRejected(ValidationError):
    """A raw record was dropped; `reason` is the rejection-log reason."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _clean_sections(raw: Any, rules: Sequence[re.Pattern]) -> Dict[SectionKind, Optional[str]]:
    if not isinstance(raw, Mapping):
        raise RecordRejected("malformed_sections")
    sections: Dict[SectionKind, Optional[str]] = {}
    for kind in SectionKind:
        value = raw.get(kind.value)
        if value is None:
            sections[kind] = None
            continue
        if not isinstance(value, str):
            raise RecordRejected("malformed_sections")
        cleaned = strip_nonclinical(normalize_text(value), rules)
        sections[kind] = cleaned or None
    return sections


def _parse_codes(
    record_id: str,
    main_raw: Any,
    others_raw: Any,
    code_table: Optional[AbstractSet[str]],
) -> Tuple[IcdCode, List[IcdCode]]:
    if others_raw is None:
        others_raw = []
    if not isinstance(others_raw, list) or not all(isinstance(c, str) for c in others_raw):
        raise RecordRejected("malformed_codes")
    if main_raw is not None and not isinstance(main_raw, str):
        raise RecordRejected("malformed_codes")

    main_missing = main_raw is None or not main_raw.strip()
    if main_missing:
        if not any(c.strip() for c in others_raw):
            raise RecordRejected("no_codes")
        raise RecordRejected("missing_main_code")

    try:
        main = validate_code(main_raw, code_table)
        others = [validate_code(c, code_table) for c in others_raw]
    except CodeRejected as e:
        raise RecordRejected(e.reason) from e

    kept, dropped = unique_codes([main] + others)
    if dropped:
        logger.warning(
            "record %s: dropped duplicate codes %s",
            record_id,
            ", ".join(c.value for c in dropped),
        )
    return main, kept[1:]


def clean_record(obj: Mapping[str, Any], rules: Sequence[re.Pattern], code_table: Optional[AbstractSet[str]] = None) -> CodedRecord:
    """
    Clean and validate one raw record object.

    Raises
    ------
    RecordRejected
        With the rejection-log reason.
    """
    raw_id = obj.get("id")
    if raw_id is None or str(raw_id).strip() == "":
        raise RecordRejected("missing_id")
    record_id = str(raw_id)

    sections = _clean_sections(obj.get("sections"), rules)
    if not sections.get(SectionKind.DISCHARGE_DIAGNOSIS):
        raise RecordRejected("empty_discharge_diagnosis")

    main, others = _parse_codes(record_id, obj.get("main_code"), obj.get("other_codes"), code_table)
    try:
        return CodedRecord(id=record_id, sections=sections, main_code=main, other_codes=tuple(others))
    except ValidationError as e:
        raise RecordRejected("invalid_record") from e


def clean_corpus(
    raw_records: Sequence[Mapping[str, Any]],
    options: Optional[CleaningOptions] = None,
) -> Tuple[List[CodedRecord], List[Rejection]]:
    """
    Clean a corpus of raw record objects.

    Parameters
    ----------
    raw_records
        JSON-decoded objects in the corpus input format.
    options
        Stripping rules, code table and parallelism.

    Returns
    -------
    tuple
        ``(records, rejections)``. Retained records keep input order; every
        dropped record appears in `rejections` with its reason.

    Raises
    ------
    InvalidPattern
        If a stripping rule is invalid (checked before any record is touched).
    """
    opts = options or CleaningOptions()
    rules = compile_rules(opts.rules)

    def _one(obj: Any) -> Union[CodedRecord, Rejection]:
        if not isinstance(obj, Mapping):
            return Rejection(id="<unknown>", reason="not_an_object")
        try:
            return clean_record(obj, rules, opts.code_table)
        except RecordRejected as r:
            rid = obj.get("id")
            rid = "" if rid is None else str(rid)
            return Rejection(id=rid if rid.strip() else "<unknown>", reason=r.reason)

    pool = BoundedWorkerPool(opts.parallelism, name="clean")
    results = pool.map(_one, list(raw_records))

    records: List[CodedRecord] = []
    rejections: List[Rejection] = []
    for i, res in enumerate(results):
        if isinstance(res, Rejection):
            if res.id == "<unknown>":
                res = Rejection(id=f"<record {i}>", reason=res.reason)
            logger.debug("rejected %s: %s", res.id, res.reason)
            rejections.append(res)
        else:
            records.append(res)

    logger.info("cleaning kept %d of %d records (%d rejected)", len(records), len(results), len(rejections))
    return records, rejections
