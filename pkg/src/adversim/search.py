"""Iterative scoring-program search: initialization, reflection, modification,
small-scale test, best-of-N candidate selection, and local optimization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import prompts
from .attack import AttackContext, attack_success
from .dsl import ScoreProgram, parse_program
from .engine import ReplayAgent
from .errors import GenerationError, StructureViolation
from .identify import ProgramMethod
from .llm import ChatClient, extract_fenced_block

DEFAULT_TEMPERATURE = 0.7
MAX_ATTEMPTS = 3


@dataclass
class Memory:
    """Chronological (program, full success rate) pairs fed to reflection."""
    entries: list[tuple[ScoreProgram, float]] = field(default_factory=list)

    def add(self, program: ScoreProgram, rate: float) -> None:
        self.entries.append((program, rate))

    def pairs(self) -> list[tuple[str, float]]:
        return [(p.source, r) for p, r in self.entries]


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 8
    candidates_per_iter: int = 11
    initial_baseline: float = 0.40
    local_opt_threshold: float = 0.60
    test_subsample: int = 20
    full_eval_size: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.candidates_per_iter < 2:
            raise ValueError("candidates_per_iter must be >= 2")
        for name in ("initial_baseline", "local_opt_threshold"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass
class CandidateRecord:
    suggestion: str
    program_source: str
    small_eval: float
    accepted: bool


@dataclass
class IterationLog:
    iteration: int
    candidates: list[CandidateRecord]
    selected_source: str
    full_eval: float

    def to_jsonable(self) -> dict:
        return {
            "iteration": self.iteration,
            "candidates": [{
                "suggestion": c.suggestion,
                "program": c.program_source,
                "small_eval": c.small_eval,
                "accepted": c.accepted,
            } for c in self.candidates],
            "selected": self.selected_source,
            "full_eval": self.full_eval,
        }


# ---------------------------------------------------------------------------
# the three agent calls
# ---------------------------------------------------------------------------

def function_init(client: ChatClient, temperature: float = DEFAULT_TEMPERATURE,
                  max_attempts: int = MAX_ATTEMPTS) -> ScoreProgram:
    """Ask for an initial program; retry with the parse error appended."""
    error_note = ""
    last_error = "no reply"
    for _ in range(max_attempts):
        reply = client.send(prompts.render_init(error_note=error_note), temperature)
        block = extract_fenced_block(reply)
        if block is None:
            last_error = "no fenced code block in the reply"
        else:
            try:
                return parse_program(block)
            except Exception as exc:
                last_error = str(exc)
        error_note = prompts.parse_error_note(last_error)
    raise GenerationError(f"no parseable program after {max_attempts} attempts: "
                          f"{last_error}")


def function_refl(client: ChatClient, memory: Memory, f: ScoreProgram,
                  e: float, minor_only: bool,
                  temperature: float = DEFAULT_TEMPERATURE) -> str:
    messages = prompts.render_reflection(memory.pairs(), f.source, e, minor_only)
    return client.send(messages, temperature)


def function_modi(client: ChatClient, f: ScoreProgram, suggestion: str,
                  minor_only: bool, temperature: float = DEFAULT_TEMPERATURE,
                  max_attempts: int = MAX_ATTEMPTS) -> ScoreProgram:
    """Ask for the revised program; under minor_only the structure hash must
    match the incumbent, enforced mechanically with retries."""
    error_note = ""
    last_error = "no reply"
    structure_broken = False
    for _ in range(max_attempts):
        messages = prompts.render_modification(f.source, suggestion, minor_only,
                                               error_note=error_note)
        reply = client.send(messages, temperature)
        block = extract_fenced_block(reply)
        if block is None:
            last_error = "no fenced code block in the reply"
            structure_broken = False
        else:
            try:
                program = parse_program(block)
            except Exception as exc:
                last_error = str(exc)
                structure_broken = False
            else:
                if minor_only and program.structure_hash != f.structure_hash:
                    last_error = ("the revision changed the expression structure; "
                                  "only numeric constants may differ")
                    structure_broken = True
                else:
                    return program
        error_note = prompts.parse_error_note(last_error)
    if structure_broken:
        raise StructureViolation(last_error)
    raise GenerationError(f"no usable program after {max_attempts} attempts: "
                          f"{last_error}")


def test_sim(program: ScoreProgram, scenarios, n_attackers: int, agent,
             ctx: AttackContext, null_optimizer: bool = False) -> float:
    """Small-scale simulation test: attacked-collision fraction over the subsample."""
    return attack_success(scenarios, ProgramMethod(program), n_attackers, agent,
                          ctx, null_optimizer=null_optimizer)


# ---------------------------------------------------------------------------
# the search loop
# ---------------------------------------------------------------------------

def run_identifier_search(cfg: SearchConfig, client: ChatClient, scenarios,
                          n_attackers: int = 2, seed: int = 0,
                          agent=None, ctx: AttackContext | None = None,
                          temperature: float = DEFAULT_TEMPERATURE
                          ) -> tuple[ScoreProgram, list[IterationLog]]:
    """Evolve an identification program over ``cfg.iterations`` rounds.

    Per round up to Q candidates are generated; the first whose small-scale
    result beats the previous one is taken, otherwise the argmax at j=Q.
    While the current full evaluation sits at or above the local-optimization
    threshold, the first floor(Q/2) candidates are restricted to
    coefficient-only edits. Returns the program with the best full evaluation
    seen, plus per-iteration logs.
    """
    if agent is None:
        agent = ReplayAgent()
    if ctx is None:
        ctx = AttackContext()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(0x5EA4C4,)))
    pool = list(scenarios)
    k = min(cfg.test_subsample, len(pool))
    subsample = [pool[int(i)] for i in rng.choice(len(pool), size=k, replace=False)]
    full_set = pool if cfg.full_eval_size is None else pool[:cfg.full_eval_size]

    def full_eval(p: ScoreProgram) -> float:
        return attack_success(full_set, ProgramMethod(p), n_attackers, agent, ctx)

    def small_eval(p: ScoreProgram) -> float:
        return test_sim(p, subsample, n_attackers, agent, ctx)

    logs: list[IterationLog] = []
    memory = Memory()
    try:
        current = function_init(client, temperature)
        current_full = full_eval(current)
    except (GenerationError, StructureViolation):
        raise
    logs.append(IterationLog(iteration=0, candidates=[],
                             selected_source=current.source, full_eval=current_full))
    memory.add(current, current_full)
    best, best_full = current, current_full
    e_prev = cfg.initial_baseline

    q = cfg.candidates_per_iter
    minor_budget = q // 2
    for i in range(1, cfg.iterations + 1):
        minor_phase = current_full >= cfg.local_opt_threshold
        records: list[CandidateRecord] = []
        selected: ScoreProgram | None = None
        selected_small = e_prev
        evals: list[tuple[float, int, ScoreProgram]] = []
        try:
            for j in range(1, q + 1):
                minor_only = minor_phase and j <= minor_budget
                suggestion = function_refl(client, memory, current, current_full,
                                           minor_only, temperature)
                candidate = function_modi(client, current, suggestion, minor_only,
                                          temperature)
                e_ij = small_eval(candidate)
                accepted = e_ij > e_prev
                records.append(CandidateRecord(suggestion=suggestion,
                                               program_source=candidate.source,
                                               small_eval=e_ij, accepted=accepted))
                evals.append((e_ij, j - 1, candidate))
                if accepted:
                    selected = candidate
                    selected_small = e_ij
                    break
        except (GenerationError, StructureViolation):
            # abort with partial logs: callers persist what exists
            if records:
                logs.append(IterationLog(iteration=i, candidates=records,
                                         selected_source=current.source,
                                         full_eval=current_full))
            raise
        if selected is None:
            # argmax over the Q candidates, ties to the lowest index
            e_best, _, cand_best = max(evals, key=lambda t: (t[0], -t[1]))
            selected = cand_best
            selected_small = e_best
        current = selected
        current_full = full_eval(current)
        logs.append(IterationLog(iteration=i, candidates=records,
                                 selected_source=current.source,
                                 full_eval=current_full))
        memory.add(current, current_full)
        if current_full > best_full:
            best, best_full = current, current_full
        e_prev = selected_small
    return best, logs


def persist_logs(logs: list[IterationLog], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(json.dumps(log.to_jsonable(), sort_keys=True))
            fh.write("\n")
