"""Command-line entry point.

Subcommands: gen-corpus, identify, attack, search, train, eval, report.
Exit codes: 0 success, 2 validation/configuration errors, 3 client errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import (AdversimError, ClientError, ConfigError, GenerationError,
                     IoError, ParseError, SchemaError, StructureViolation,
                     TooFewVehicles, ValidationError)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CLIENT = 3

_VALIDATION_ERRORS = (SchemaError, ValidationError, ConfigError, ParseError,
                      TooFewVehicles, IoError, ValueError)
_CLIENT_ERRORS = (ClientError, GenerationError, StructureViolation)


def _parse_weights(text: str | None) -> dict[str, float] | None:
    if not text:
        return None
    out = {}
    for part in text.split(","):
        name, _, w = part.partition("=")
        if not w:
            raise ConfigError(f"bad template weight {part!r}; use name=weight")
        out[name.strip()] = float(w)
    return out


def _method_from_args(args) -> "IdentifierMethod":
    from .dsl import parse_program
    from .identify import (KineticFieldMethod, MinTTCMethod, ProgramMethod,
                           RandomMethod)
    name = args.method
    if name == "random":
        return RandomMethod(seed=getattr(args, "seed", 0) or 0)
    if name == "min_ttc":
        return MinTTCMethod()
    if name == "kinetic_field":
        return KineticFieldMethod()
    if name == "program":
        path = getattr(args, "program_file", None)
        if not path:
            raise ConfigError("--method program requires --program-file")
        with open(path, "r", encoding="utf-8") as fh:
            return ProgramMethod(parse_program(fh.read().strip()))
    raise ConfigError(f"unknown method {name!r}")


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2))
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    from .corpus import generate_corpus
    from .scenario import save_scenario_set
    weights = _parse_weights(args.templates)
    corpus = generate_corpus(args.seed, args.n, templates=weights, split=args.split)
    save_scenario_set(corpus, args.out)
    print(f"wrote {len(corpus.scenarios)} scenarios to {args.out}")
    return EXIT_OK


def cmd_identify(args) -> int:
    from .identify import identify
    from .scenario import load_scenario
    scenario = load_scenario(args.scenario)
    method = _method_from_args(args)
    ids = identify(scenario, method, args.n_attackers)
    print(json.dumps({"scenario": scenario.id, "attackers": ids}))
    return EXIT_OK


def cmd_attack(args) -> int:
    from .attack import AttackContext, attack_scenario
    from .engine import ReplayAgent
    from .scenario import ensure_dir, load_scenario_set
    from .td3 import TD3Policy

    corpus = load_scenario_set(args.set)
    method = _method_from_args(args)
    if args.agent == "replay":
        agent = ReplayAgent()
    else:
        if not args.ckpt:
            raise ConfigError("--agent policy requires --ckpt")
        with open(args.ckpt, "rb") as fh:
            agent, _ = TD3Policy.deserialize(fh.read())
    ctx = AttackContext()
    ensure_dir(args.out)
    crashed = 0
    for scenario in corpus.scenarios:
        result, plan = attack_scenario(scenario, method, args.n_attackers, agent, ctx)
        crashed += 1 if result.collided else 0
        record = {
            "scenario_id": scenario.id,
            "attack_start": scenario.attack_start,
            "collided": result.collided,
            "collision_step": result.collision_step,
            "route_completion": result.route_completion,
            "plan": plan.to_jsonable() if plan is not None else None,
        }
        _write_json(record, os.path.join(args.out, f"{scenario.id}.plan.json"))
    summary = {"scenarios": len(corpus.scenarios), "crashed": crashed,
               "attack_success_rate": crashed / len(corpus.scenarios)}
    _write_json(summary, os.path.join(args.out, "summary.json"))
    print(json.dumps(summary))
    return EXIT_OK


def cmd_search(args) -> int:
    from .dsl import parse_program
    from .llm import DeterministicMockClient, HttpChatClient
    from .scenario import ensure_dir, load_scenario_set
    from .search import SearchConfig, persist_logs, run_identifier_search

    cfg_obj = _load_json(args.config) if args.config else {}
    seed = int(cfg_obj.pop("seed", args.seed or 0))
    n_attackers = int(cfg_obj.pop("n_attackers", 2))
    temperature = float(cfg_obj.pop("temperature", 0.7))
    try:
        cfg = SearchConfig(**cfg_obj)
    except TypeError as exc:
        raise ConfigError(f"bad search config: {exc}") from exc
    corpus = load_scenario_set(args.set)
    client = (DeterministicMockClient(seed=seed) if args.client == "mock"
              else HttpChatClient())
    ensure_dir(args.out)
    logs = []
    try:
        best, logs = run_identifier_search(cfg, client, corpus.scenarios,
                                           n_attackers=n_attackers, seed=seed,
                                           temperature=temperature)
    finally:
        if logs:
            persist_logs(logs, os.path.join(args.out, "logs.jsonl"))
    with open(os.path.join(args.out, "best_program.txt"), "w", encoding="utf-8") as fh:
        fh.write(best.source + "\n")
    history = [{"iteration": log.iteration, "full_eval": log.full_eval}
               for log in logs if log.selected_source == best.source]
    _write_json({"source": best.source, "structure_hash": best.structure_hash,
                 "eval_history": history},
                os.path.join(args.out, "best_program.json"))
    persist_logs(logs, os.path.join(args.out, "logs.jsonl"))
    print(json.dumps({"best": best.source,
                      "best_full_eval": max((l.full_eval for l in logs), default=None)}))
    return EXIT_OK


def cmd_train(args) -> int:
    from .scenario import ensure_dir, load_scenario_set
    from .td3 import config_hash
    from .training import TrainConfig, curves_csv, train_adversarial

    cfg_obj = _load_json(args.config)
    train_path = cfg_obj.pop("train_set")
    eval_path = cfg_obj.pop("eval_set", None)
    method_name = cfg_obj.pop("method", "kinetic_field")
    program_file = cfg_obj.pop("program_file", None)
    n_attackers = int(cfg_obj.pop("n_attackers", 2))
    ns = argparse.Namespace(method=method_name, program_file=program_file,
                            seed=cfg_obj.get("seed", 0))
    method = _method_from_args(ns)
    try:
        cfg = TrainConfig(**cfg_obj)
    except TypeError as exc:
        raise ConfigError(f"bad train config: {exc}") from exc
    train_set = load_scenario_set(train_path).scenarios
    eval_set = load_scenario_set(eval_path).scenarios if eval_path else None
    policy, snapshots = train_adversarial(cfg, train_set, method, n_attackers,
                                          eval_set=eval_set)
    ensure_dir(args.out)
    meta = {"step": cfg.max_steps, "config_hash": cfg.hash(), "seed": cfg.seed}
    with open(os.path.join(args.out, "checkpoint.bin"), "wb") as fh:
        fh.write(policy.serialize(meta))
    with open(os.path.join(args.out, "curves.csv"), "w", encoding="utf-8") as fh:
        fh.write(curves_csv(snapshots))
    print(json.dumps({"checkpoint": os.path.join(args.out, "checkpoint.bin"),
                      "snapshots": len(snapshots), "config_hash": meta["config_hash"]}))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .scenario import load_scenario_set
    from .td3 import TD3Policy
    from .training import evaluate

    with open(args.ckpt, "rb") as fh:
        policy, _ = TD3Policy.deserialize(fh.read())
    corpus = load_scenario_set(args.set)
    conditions = tuple(c.strip() for c in args.conditions.split(",") if c.strip())
    method = _method_from_args(args)
    metrics = evaluate(policy, corpus.scenarios, conditions, method)
    payload = metrics.to_jsonable()
    if args.out:
        _write_json(payload, args.out)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import Report, emit_report

    report = Report()
    for path in args.metrics or []:
        obj = _load_json(path)
        label = os.path.splitext(os.path.basename(path))[0]
        for cond, m in sorted(obj.items()):
            report.training_rows.append({
                "dataset": label, "condition": cond,
                "crash_rate": m["crash_rate"],
                "crash_half_variance": m.get("crash_half_variance", 0.0),
                "route_completion": m["route_completion"],
                "completion_half_variance": m.get("completion_half_variance", 0.0),
            })
    for path in args.search_logs or []:
        label = os.path.splitext(os.path.basename(path))[0]
        points = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    log = json.loads(line)
                    points.append((log["iteration"], log["full_eval"]))
        report.search_curves.append((label, points))
    for path in args.curves or []:
        label = os.path.splitext(os.path.basename(path))[0]
        series: dict[str, list[tuple[float, float]]] = {}
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            for line in fh:
                step, cond, crash, comp = line.strip().split(",")
                series.setdefault(f"{label}:{cond}:crash", []).append(
                    (float(step), float(crash)))
        for lbl in sorted(series):
            report.training_curves.append((lbl, series[lbl]))
    if args.success:
        for row in _load_json(args.success):
            report.success_rows.append(row)
    if args.realism:
        for row in _load_json(args.realism):
            report.realism_rows.append(row)
    report.provenance = {"inputs": sorted((args.metrics or []) +
                                          (args.search_logs or []) +
                                          (args.curves or []))}
    written = emit_report(report, args.out)
    print(json.dumps({"written": written}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adversim",
                                description="Adversarial traffic scenario toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="generate a synthetic scenario corpus")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--templates", default=None,
                   help="comma list name=weight (default uniform)")
    g.add_argument("--split", default="train", choices=("train", "test"))
    g.set_defaults(func=cmd_gen_corpus)

    i = sub.add_parser("identify", help="rank attackers for one scenario")
    i.add_argument("--scenario", required=True)
    i.add_argument("--method", required=True,
                   choices=("random", "min_ttc", "kinetic_field", "program"))
    i.add_argument("--program-file", default=None)
    i.add_argument("--n-attackers", type=int, default=2)
    i.add_argument("--seed", type=int, default=0)
    i.set_defaults(func=cmd_identify)

    a = sub.add_parser("attack", help="attack every scenario in a corpus")
    a.add_argument("--set", required=True)
    a.add_argument("--method", required=True,
                   choices=("random", "min_ttc", "kinetic_field", "program"))
    a.add_argument("--program-file", default=None)
    a.add_argument("--n-attackers", type=int, default=2)
    a.add_argument("--agent", default="replay", choices=("replay", "policy"))
    a.add_argument("--ckpt", default=None)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_attack)

    s = sub.add_parser("search", help="evolve an identification program")
    s.add_argument("--config", default=None)
    s.add_argument("--set", required=True)
    s.add_argument("--client", default="mock", choices=("mock", "http"))
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_search)

    t = sub.add_parser("train", help="closed-loop adversarial training")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a trained policy")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--set", required=True)
    e.add_argument("--conditions", default="normal,one_attacker,two_attackers")
    e.add_argument("--method", default="kinetic_field",
                   choices=("random", "min_ttc", "kinetic_field", "program"))
    e.add_argument("--program-file", default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="emit report tables and charts")
    r.add_argument("--metrics", nargs="*", default=None,
                   help="eval metric JSON files")
    r.add_argument("--search-logs", nargs="*", default=None,
                   help="search logs.jsonl files")
    r.add_argument("--curves", nargs="*", default=None,
                   help="training curves.csv files")
    r.add_argument("--success", default=None, help="success-rate rows JSON")
    r.add_argument("--realism", default=None, help="realism rows JSON")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CLIENT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLIENT
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AdversimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
