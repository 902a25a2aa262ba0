"""
Probe prompts for the code-definition matchups.

Each candidate is asked to describe the condition(s) an ICD-10-CM code denotes;
the judge sees the code and both answers and must reply ``A`` or ``B``.
Both templates can be overridden from the config file; ``{code}`` is the only
placeholder in the candidate template, the judge template also needs
``{response_a}`` and ``{response_b}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from icdcoder.domain.errors import ConfigError
from icdcoder.domain.models import IcdCode

DEFAULT_CANDIDATE_TEMPLATE = (
    "You are a clinical coding assistant. Generate the medical condition(s) associated with "
    "the ICD-10-CM code {code}. State the condition name and give a one-sentence clinical "
    "description."
)

DEFAULT_JUDGE_TEMPLATE = (
    "You are an expert clinical coding specialist reviewing two assistants. Both were asked to "
    "generate the medical condition(s) associated with the ICD-10-CM code {code}.\n\n"
    "[Response A]\n{response_a}\n[End of Response A]\n\n"
    "[Response B]\n{response_b}\n[End of Response B]\n\n"
    "Judge which response describes the condition(s) of code {code} more accurately and with "
    "better clinical specificity and ICD-10-CM terminology. Ignore length and style. "
    'Output only a single letter: "A" if Response A is better, or "B" if Response B is better.'
)

_RESPONSE_SLOT = re.compile(r"\{(response_a|response_b)\}")


@dataclass(frozen=True)
class ProbePrompts:
    """
    Prompts for one probe code.

    Parameters
    ----------
    candidate_prompt
        Prompt sent to every candidate.
    judge_prompt_template
        Judge prompt with the code filled in and ``{response_a}`` /
        ``{response_b}`` slots left open.
    """

    candidate_prompt: str
    judge_prompt_template: str

    def judge_prompt(self, response_a: str, response_b: str) -> str:
        return render_judge_prompt(self.judge_prompt_template, response_a, response_b)


def build_probe_prompts(
    code: IcdCode,
    candidate_template: Optional[str] = None,
    judge_template: Optional[str] = None,
) -> ProbePrompts:
    """
    Fill the code slot of both templates.

    Raises
    ------
    ConfigError
        If an overriding judge template lacks a response slot.
    """
    cand = candidate_template or DEFAULT_CANDIDATE_TEMPLATE
    judge = judge_template or DEFAULT_JUDGE_TEMPLATE
    if "{response_a}" not in judge or "{response_b}" not in judge:
        raise ConfigError("judge template needs {response_a} and {response_b}")
    return ProbePrompts(
        candidate_prompt=cand.replace("{code}", code.value),
        judge_prompt_template=judge.replace("{code}", code.value),
    )


def render_judge_prompt(template: str, response_a: str, response_b: str) -> str:
    """
    Insert both responses verbatim in a single pass, so braces inside a
    response are never treated as slots.
    """
    values = {"response_a": response_a, "response_b": response_b}
    return _RESPONSE_SLOT.sub(lambda m: values[m.group(1)], template)
