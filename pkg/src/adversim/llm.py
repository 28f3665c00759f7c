"""Chat-completion clients: a thin HTTP backend and a deterministic mock.

The mock is the offline stand-in for a real model: it reads the request kind
from cue phrases in the rendered prompt and answers with scoring programs
drawn from a template pool, mutated either coefficient-only or structurally.
Its replies are a pure function of (messages, seed, call counter).
"""

from __future__ import annotations

import os
import re

import numpy as np
import requests

from . import prompts
from .dsl import (BinOp, Call, Feature, Neg, Num, iter_nodes, parse_program,
                  pretty_print, program_from_ast, replace_nth_literal)
from .errors import ClientError
from .features import FEATURE_NAMES

ENV_URL = "ADVERSIM_LLM_URL"
ENV_MODEL = "ADVERSIM_LLM_MODEL"
ENV_KEY = "ADVERSIM_LLM_KEY"

_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)


def extract_fenced_block(text: str, index: int = 0) -> str | None:
    """The ``index``-th fenced code block in ``text``, stripped, or None."""
    blocks = _FENCE_RE.findall(text)
    if not blocks or index >= len(blocks):
        return None
    return blocks[index].strip()


class ChatClient:
    """Interface: send role-tagged messages, get the reply text back."""

    def send(self, messages: list[dict[str, str]], temperature: float) -> str:
        raise NotImplementedError


class HttpChatClient(ChatClient):
    """JSON-over-HTTP chat-completion backend configured from the environment."""

    def __init__(self, url: str | None = None, model: str | None = None,
                 api_key: str | None = None, timeout: float = 120.0):
        self.url = url or os.environ.get(ENV_URL)
        self.model = model or os.environ.get(ENV_MODEL, "default")
        self.api_key = api_key or os.environ.get(ENV_KEY)
        self.timeout = timeout
        if not self.url:
            raise ClientError(f"no chat backend configured ({ENV_URL} unset)")

    def send(self, messages: list[dict[str, str]], temperature: float) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "messages": messages,
                   "temperature": temperature}
        try:
            resp = requests.post(self.url, json=payload, headers=headers,
                                 timeout=self.timeout)
        except requests.RequestException as exc:
            raise ClientError(f"chat request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ClientError(f"chat backend returned HTTP {resp.status_code}")
        try:
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ClientError(f"malformed chat response: {exc}") from exc


# ---------------------------------------------------------------------------
# deterministic mock
# ---------------------------------------------------------------------------

INIT_POOL = (
    "1.0/max(ttc, 0.5)",
    "2.0*exp(-dist/15.0) + 1.0/max(ttc, 0.5)",
    "1.0/max(ttc, 0.5) + 0.5*path_cross + 0.05*closing_speed",
    "exp(-min_dist/12.0) + 0.2*heading_align*speed/10.0",
    "1.0/max(dist, 1.0) + 0.3*exp(-abs(lateral_offset)/4.0)",
    "clip(closing_speed, 0.0, 15.0)/max(ttc, 0.5) + 0.4*path_cross",
)

_TERM_POOL = (
    "0.5*path_cross",
    "1.0/max(ttc, 0.5)",
    "2.0*exp(-dist/20.0)",
    "0.1*clip(closing_speed, 0.0, 15.0)",
    "0.3*heading_align",
    "1.5*exp(-min_dist/10.0)",
    "0.05*speed",
    "0.2*exp(-abs(lateral_offset)/3.0)",
    "0.5/max(abs(ahead)/10.0, 0.3)",
)

_SUGGESTIONS = (
    "Rebalance the weights so near-term threat dominates the score.",
    "Emphasize vehicles whose motion converges on the ego path.",
    "Reduce the influence of slow, distant vehicles.",
    "Sharpen the distance decay so only nearby vehicles score highly.",
    "Strengthen the closing-speed contribution relative to raw distance.",
    "Account for vehicles approaching from the side, not only head-on.",
)


class DeterministicMockClient(ChatClient):
    """Seeded offline chat stand-in; replies depend only on
    (messages, seed, call counter)."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls = 0

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.calls,)))

    def send(self, messages: list[dict[str, str]], temperature: float) -> str:
        rng = self._rng()
        self.calls += 1
        body = messages[-1]["content"]
        if prompts.INIT_CUE in body:
            src = INIT_POOL[int(rng.integers(len(INIT_POOL)))]
            return ("Considering approach speed and proximity first.\n\n"
                    f"```\n{src}\n```\n")
        if prompts.MODI_CUE in body:
            return self._modify(body, rng)
        if prompts.REFL_CUE in body:
            idx = int(rng.integers(len(_SUGGESTIONS)))
            hint = _SUGGESTIONS[idx]
            if prompts.MINOR_CLAUSE in body:
                hint += " Adjust one numeric coefficient only."
            return f"The current form is reasonable but can improve. Suggestion: {hint}\n"
        # unknown prompt kind: echo a safe default program
        return f"```\n{INIT_POOL[0]}\n```\n"

    def _modify(self, body: str, rng: np.random.Generator) -> str:
        src = extract_fenced_block(body, 0) or INIT_POOL[0]
        try:
            program = parse_program(src)
        except Exception:
            program = parse_program(INIT_POOL[0])
        minor = prompts.MINOR_CLAUSE in body
        if minor:
            new_ast = self._tweak_literal(program.ast, rng)
        else:
            new_ast = self._structural(program.ast, rng)
        new_src = pretty_print(new_ast)
        return f"Applying the suggestion.\n\n```\n{new_src}\n```\n"

    @staticmethod
    def _tweak_literal(ast, rng: np.random.Generator):
        literals = [n for n in iter_nodes(ast) if isinstance(n, Num)]
        if not literals:
            return ast
        idx = int(rng.integers(len(literals)))
        factor = float(np.exp(rng.uniform(-0.9, 0.9)))
        value = round(literals[idx].value * factor, 6)
        if value <= 0:
            value = round(literals[idx].value, 6) or 0.001
        return replace_nth_literal(ast, idx, value)

    def _structural(self, ast, rng: np.random.Generator):
        roll = rng.random()
        if roll < 0.35:
            term = parse_program(_TERM_POOL[int(rng.integers(len(_TERM_POOL)))]).ast
            op = "+" if rng.random() < 0.8 else "-"
            return BinOp(op, ast, term)
        if roll < 0.55 and isinstance(ast, BinOp) and ast.op in "+-":
            return ast.left if rng.random() < 0.5 else ast.right
        if roll < 0.8:
            feats = [n for n in iter_nodes(ast) if isinstance(n, Feature)]
            if feats:
                target = feats[int(rng.integers(len(feats)))]
                repl = Feature(str(rng.choice(FEATURE_NAMES)))
                return _swap_feature(ast, target, repl, [0])
        src = INIT_POOL[int(rng.integers(len(INIT_POOL)))]
        base = parse_program(src).ast
        term = parse_program(_TERM_POOL[int(rng.integers(len(_TERM_POOL)))]).ast
        return BinOp("+", base, term) if rng.random() < 0.5 else base


def _swap_feature(node, target, repl, seen):
    """Replace the first occurrence (by identity) of ``target`` with ``repl``."""
    if node is target and seen[0] == 0:
        seen[0] = 1
        return repl
    if isinstance(node, Neg):
        return Neg(_swap_feature(node.operand, target, repl, seen))
    if isinstance(node, BinOp):
        return BinOp(node.op, _swap_feature(node.left, target, repl, seen),
                     _swap_feature(node.right, target, repl, seen))
    if isinstance(node, Call):
        return Call(node.func, tuple(_swap_feature(a, target, repl, seen)
                                     for a in node.args))
    return node
