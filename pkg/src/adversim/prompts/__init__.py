"""Versioned prompt templates for the three agent roles.

The templates live as markdown assets next to this module. The deterministic
mock client never loads them; it keys off the cue phrases below, which the
render functions embed verbatim.
"""

from __future__ import annotations

from importlib import resources
from string import Template

PROMPT_VERSION = "1"

# cue phrases the mock client matches on
INIT_CUE = "Write an initial scoring function."
REFL_CUE = "state one specific, actionable suggestion"
MODI_CUE = "Revise the scoring function below"
MINOR_CLAUSE = ("Restrict the change to numeric constants only: do not add, "
                "remove, or reorder terms, features, or function calls; the "
                "structure of the expression must stay exactly as it is.")

SYSTEM_TEXT = ("You help build adversarial traffic scenarios for testing "
               "automated driving software in simulation.")

_FEATURE_DOCS = """\
- dist: current distance to the ego vehicle (m)
- min_dist: smallest distance to the ego over the observed history (m)
- rel_speed: magnitude of the relative velocity (m/s)
- closing_speed: rate at which the gap shrinks; positive means approaching (m/s)
- ttc: time to collision, dist/closing_speed, capped at 99 s
- heading_align: cosine between the vehicle's heading and the bearing to the ego
- lateral_offset: lateral position in the ego frame, left positive (m)
- ahead: longitudinal position in the ego frame, forward positive (m)
- speed: the vehicle's own speed (m/s)
- path_cross: 1.0 when the vehicle's extrapolated motion passes near the ego route, else 0.0"""


def _load(name: str) -> Template:
    text = resources.files(__package__).joinpath(name).read_text(encoding="utf-8")
    return Template(text)


_INIT = _load("initialization.md")
_REFL = _load("reflection.md")
_MODI = _load("modification.md")


def _messages(body: str) -> list[dict[str, str]]:
    return [{"role": "system", "content": SYSTEM_TEXT},
            {"role": "user", "content": body}]


def render_init(error_note: str = "") -> list[dict[str, str]]:
    body = _INIT.substitute(features=_FEATURE_DOCS, error_note=error_note)
    assert INIT_CUE in body
    return _messages(body)


def render_reflection(memory_pairs: list[tuple[str, float]], program: str,
                      rate: float, minor_only: bool) -> list[dict[str, str]]:
    if memory_pairs:
        lines = ["## Earlier attempts (oldest first)", ""]
        for src, r in memory_pairs:
            lines.append(f"- success rate {r:.4f} with:")
            lines.append("")
            lines.append("```")
            lines.append(src)
            lines.append("```")
            lines.append("")
        memory_section = "\n".join(lines) + "\n"
    else:
        memory_section = ""
    minor = f"## Constraint\n\n{MINOR_CLAUSE}\n\n" if minor_only else ""
    body = _REFL.substitute(program=program, rate=f"{rate:.4f}",
                            memory_section=memory_section,
                            features=_FEATURE_DOCS, minor_clause=minor)
    assert REFL_CUE in body
    return _messages(body)


def render_modification(program: str, suggestion: str, minor_only: bool,
                        error_note: str = "") -> list[dict[str, str]]:
    minor = f"## Constraint\n\n{MINOR_CLAUSE}\n\n" if minor_only else ""
    body = _MODI.substitute(program=program, suggestion=suggestion,
                            features=_FEATURE_DOCS, minor_clause=minor,
                            error_note=error_note)
    assert MODI_CUE in body
    return _messages(body)


def parse_error_note(error: str) -> str:
    return ("\nYour previous reply could not be used: " + error +
            "\nReply again with one fenced code block containing a valid expression.")
