"""
Section-aware instruction prompts.

A prompt is an instruction header followed by one block per section in
priority order:

    ### Discharge Diagnosis
    <text>

Universal prompts always carry all five blocks and fill missing sections with
``Nil``; section-specific prompts only carry the sections of their mode that
the record actually has. Prompts over the token budget lose tokens from the
tail of the lowest-priority section first; the discharge diagnosis is only cut
when it alone does not fit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

from icdcoder.core.prompting.tokens import TokenBudget, Tokenizer, whitespace_tokenizer
from icdcoder.domain.errors import BudgetTooSmall, ValidationError
from icdcoder.domain.models import CodedRecord, SectionKind

logger = logging.getLogger(__name__)

NIL = "Nil"
HEADER_PREFIX = "### "

DEFAULT_INSTRUCTION = (
    "Assign ICD-10-CM codes to the discharge summary below. Reply with two lines: "
    "MAINCODE: <main code> and OTHERCODE: <other codes, comma separated>."
)


class PromptKind(str, Enum):
    UNIVERSAL = "universal"
    SPECIFIC = "specific"


@dataclass(frozen=True)
class PromptMode:
    """
    Which sections a prompt carries.

    Parameters
    ----------
    kind
        Universal or section-specific.
    included_sections
        Sections in priority order; all five for universal prompts.
    """

    kind: PromptKind
    included_sections: Tuple[SectionKind, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(set(self.included_sections), key=lambda s: s.priority))
        object.__setattr__(self, "included_sections", ordered)
        if SectionKind.DISCHARGE_DIAGNOSIS not in ordered:
            raise ValidationError("a prompt mode must include the discharge diagnosis")
        if self.kind is PromptKind.UNIVERSAL and len(ordered) != len(SectionKind):
            raise ValidationError("universal mode renders all sections")

    @classmethod
    def universal(cls) -> "PromptMode":
        return cls(PromptKind.UNIVERSAL, tuple(SectionKind.by_priority()))

    @classmethod
    def specific(cls, sections: Iterable[SectionKind]) -> "PromptMode":
        return cls(PromptKind.SPECIFIC, tuple(sections))

    @classmethod
    def parse(cls, kind: str, sections_csv: Optional[str] = None) -> "PromptMode":
        """
        Build a mode from CLI values, e.g. ``("specific", "dd,mh")``.

        The discharge diagnosis is added to specific modes when omitted.
        """
        try:
            k = PromptKind(kind.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown prompt mode {kind!r}") from None
        if k is PromptKind.UNIVERSAL:
            return cls.universal()
        names = [n for n in (sections_csv or "dd").split(",") if n.strip()]
        sections = {SectionKind.from_short_name(n) for n in names}
        sections.add(SectionKind.DISCHARGE_DIAGNOSIS)
        return cls.specific(sections)

    @property
    def label(self) -> str:
        if self.kind is PromptKind.UNIVERSAL:
            return "universal"
        return "+".join(s.short_name for s in self.included_sections)


def incremental_modes() -> List[PromptMode]:
    """Cumulative section-specific modes: dd, dd+op, dd+op+mh, dd+op+mh+pr, all five."""
    chain = SectionKind.by_priority()
    return [PromptMode.specific(chain[: i + 1]) for i in range(len(chain))]


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    token_count: int
    warnings: Tuple[str, ...] = ()


SectionTexts = List[Tuple[SectionKind, str]]


def truncate_sections(
    sections: Sequence[Tuple[SectionKind, str]],
    budget: int,
    tokenizer: Tokenizer = whitespace_tokenizer,
) -> Tuple[SectionTexts, List[str]]:
    """
    Trim section texts until their summed token count fits `budget`.

    Parameters
    ----------
    sections
        ``(kind, text)`` pairs; must include the discharge diagnosis.
    budget
        Tokens available for section text.
    tokenizer
        Counting function.

    Returns
    -------
    (sections, warnings)
        Sections in priority order, emptied ones kept with ``""`` text.
    """
    ordered: SectionTexts = sorted(((k, t or "") for k, t in sections), key=lambda kt: kt[0].priority)
    if not any(k is SectionKind.DISCHARGE_DIAGNOSIS for k, _ in ordered):
        raise ValidationError("truncation needs a discharge diagnosis section")

    counts = [tokenizer.count(t) for _, t in ordered]
    warnings: List[str] = []
    excess = sum(counts) - max(budget, 0)

    # lowest priority first; the discharge diagnosis (index 0) comes last
    for i in reversed(range(len(ordered))):
        if excess <= 0:
            break
        kind, text = ordered[i]
        if counts[i] == 0:
            continue
        if kind is SectionKind.DISCHARGE_DIAGNOSIS:
            keep = max(counts[i] - excess, 0)
            warnings.append(
                f"{kind.display_name} alone exceeds the budget; kept first {keep} of {counts[i]} tokens"
            )
        elif counts[i] <= excess:
            keep = 0
            warnings.append(f"{kind.display_name} removed ({counts[i]} tokens)")
        else:
            keep = counts[i] - excess
            warnings.append(f"{kind.display_name} truncated to {keep} of {counts[i]} tokens")
        ordered[i] = (kind, tokenizer.truncate(text, keep))
        excess -= counts[i] - keep
        counts[i] = keep

    return ordered, warnings


def _blocks(record: CodedRecord, mode: PromptMode) -> SectionTexts:
    out: SectionTexts = []
    for kind in mode.included_sections:
        text = record.section_text(kind)
        if text:
            out.append((kind, text.strip()))
        elif mode.kind is PromptKind.UNIVERSAL:
            out.append((kind, ""))
    return out


def _assemble(instruction: str, blocks: SectionTexts, mode: PromptMode) -> str:
    parts = [instruction.strip()] if instruction.strip() else []
    for kind, text in blocks:
        if not text:
            if mode.kind is PromptKind.UNIVERSAL:
                text = NIL
            else:
                continue
        parts.append(f"{HEADER_PREFIX}{kind.display_name}\n{text}")
    return "\n\n".join(parts)


def build_prompt(
    record: CodedRecord,
    mode: PromptMode,
    budget: Optional[TokenBudget] = None,
    instruction: str = DEFAULT_INSTRUCTION,
) -> RenderedPrompt:
    """
    Render a record and report truncation warnings.

    Raises
    ------
    BudgetTooSmall
        The header and section headers leave no room for diagnosis text.
    """
    budget = budget or TokenBudget()
    blocks = _blocks(record, mode)

    # fixed cost: everything but the section bodies
    if mode.kind is PromptKind.SPECIFIC:
        skeleton = _assemble(instruction, [(k, "x") for k, _ in blocks], mode)
        overhead = budget.count(skeleton) - len(blocks) * budget.count("x")
    else:
        skeleton = _assemble(instruction, [(k, "") for k, _ in blocks], mode)
        overhead = budget.count(skeleton) - sum(budget.count(NIL) for _, t in blocks if t)
    room = budget.max_tokens - overhead
    if room < 1:
        raise BudgetTooSmall(
            f"budget of {budget.max_tokens} tokens leaves no room for the discharge diagnosis "
            f"after {overhead} tokens of headers"
        )

    all_warnings: List[str] = []
    while True:
        trimmed, warnings = truncate_sections(blocks, room, budget.tokenizer)
        text = _assemble(instruction, trimmed, mode)
        count = budget.count(text)
        if count <= budget.max_tokens:
            all_warnings.extend(warnings)
            break
        # tokenizers that do not count additively need another pass
        room -= count - budget.max_tokens
        if room < 1:
            raise BudgetTooSmall(f"cannot fit record {record.id!r} into {budget.max_tokens} tokens")

    for w in all_warnings:
        logger.debug("record %s: %s", record.id, w)
    return RenderedPrompt(text=text, token_count=count, warnings=tuple(all_warnings))


def render_prompt(
    record: CodedRecord,
    mode: PromptMode,
    budget: Optional[TokenBudget] = None,
    instruction: str = DEFAULT_INSTRUCTION,
) -> str:
    return build_prompt(record, mode, budget, instruction).text

