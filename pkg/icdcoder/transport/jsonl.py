from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Tuple

from icdcoder.core.corpus.codes import validate_code
from icdcoder.domain.errors import InputFormatError, ValidationError
from icdcoder.domain.models import CodedRecord, Rejection, SectionKind, unique_codes


_DECODER = json.JSONDecoder()


def decode_line(line: str, path: str, line_no: int) -> List[Any]:
    """
    Decode every JSON value on one line of a JSONL file.

    Writers that forget the newline leave several values back to back
    (``{"id": "a"}{"id": "b"}``); each is returned in order. A blank line
    gives an empty list.

    Raises
    ------
    InputFormatError
        If the line is not valid JSON, with the column of the failure.
    """
    values: List[Any] = []
    pos, end = 0, len(line)
    while True:
        while pos < end and line[pos].isspace():
            pos += 1
        if pos >= end:
            return values
        try:
            value, pos = _DECODER.raw_decode(line, pos)
        except json.JSONDecodeError as e:
            raise InputFormatError(path, line_no, f"invalid JSON at column {e.colno}: {e.msg}") from e
        values.append(value)


def read_jsonl(path: str | Path, objects_only: bool = True) -> List[Tuple[int, Any]]:
    """
    Read a JSONL file into ``(line_no, value)`` pairs.

    Blank lines are skipped. A line holding several concatenated values
    yields each of them under the same line number.

    Parameters
    ----------
    path
        File to read.
    objects_only
        Reject values that are not JSON objects. The cleaning stage turns
        them off so that stray values end up in its rejection log.

    Raises
    ------
    InputFormatError
        For invalid JSON, or a non-object value under `objects_only`; carries
        the file path and line number.
    """
    p = Path(path)
    out: List[Tuple[int, Any]] = []
    with p.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            for value in decode_line(line, str(p), line_no):
                if objects_only and not isinstance(value, dict):
                    raise InputFormatError(str(p), line_no, f"expected a JSON object, got {type(value).__name__}")
                out.append((line_no, value))
    return out


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str | Path, objects: Iterable[Mapping[str, Any]]) -> None:
    """Write objects one per line (sorted keys off, UTF-8), atomically."""
    lines = [json.dumps(o, ensure_ascii=False) for o in objects]
    _atomic_write_text(Path(path), "".join(line + "\n" for line in lines))


def write_json(path: str | Path, obj: Any) -> None:
    """Write a JSON document with 2-space indent, atomically."""
    _atomic_write_text(Path(path), json.dumps(obj, ensure_ascii=False, indent=2) + "\n")


def read_json(path: str | Path) -> Any:
    p = Path(path)
    try:
        with p.open("r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise InputFormatError(str(p), e.lineno, f"invalid JSON: {e.msg}") from e


def encode_record(r: CodedRecord) -> Dict[str, Any]:
    """Inverse of the corpus input format."""
    return {
        "id": r.id,
        "sections": {k.value: r.section_text(k) for k in SectionKind.by_priority()},
        "main_code": r.main_code.value,
        "other_codes": [c.value for c in r.other_codes],
    }


def encode_rejection(rej: Rejection) -> Dict[str, Any]:
    return {"id": rej.id, "reason": rej.reason}


def decode_record(obj: Mapping[str, Any]) -> CodedRecord:
    """
    Decode an already-cleaned record object without re-normalizing its text.

    Raises
    ------
    KeyError
        If a required field is missing.
    ValidationError
        If codes or record invariants are violated.
    """
    sections_raw = obj["sections"]
    if not isinstance(sections_raw, Mapping):
        raise ValidationError("sections must be an object")
    sections = {k: (sections_raw.get(k.value) or None) for k in SectionKind}
    main = validate_code(str(obj["main_code"]))
    others, _ = unique_codes(validate_code(str(c)) for c in obj.get("other_codes") or [])
    others = [c for c in others if c != main]
    return CodedRecord(id=str(obj["id"]), sections=sections, main_code=main, other_codes=tuple(others))


def load_records(path: str | Path) -> List[CodedRecord]:
    """
    Read a cleaned corpus file.

    Raises
    ------
    InputFormatError
        For undecodable lines or records violating invariants, with line context.
    """
    records: List[CodedRecord] = []
    for line_no, obj in read_jsonl(path):
        try:
            records.append(decode_record(obj))
        except KeyError as e:
            raise InputFormatError(str(path), line_no, f"missing field {e}") from e
        except ValidationError as e:
            raise InputFormatError(str(path), line_no, str(e)) from e
    return records
