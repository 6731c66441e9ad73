"""Command-line interface: ``vaarobust <command> ...``.

Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
Errors are written to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .attacks import (
    AnnealingConfig,
    AttackReport,
    DropModel,
    calibration_experiment,
    diversification_analysis,
    diversification_simulation,
    duplicate_question_attack,
    favorable_ordering,
    greedy_question_subset,
    list_centralization_analysis,
    method_manipulation,
    optimize_answers,
    question_correlation_matrix,
    question_order_experiment,
    tiebreak_impact,
    top_match_distribution,
    weight_scenario,
)
from .io import (
    CleaningConfig,
    DocumentError,
    ElectionValidationError,
    clean_voters,
    dumps_election,
    load_election,
)
from .matching import ALL_METHODS, MatchingError, as_method
from .metrics import MetricConfig, UndefinedMetricError, method_comparison
from .model import validate_election
from .ranking import (
    MitigationConfig,
    as_tiebreak,
    candidate_visibility,
    list_visibility,
    party_visibility,
    recommend,
)
from .synth import SynthConfig, generate_election


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(message)


# --------------------------------------------------------------------------
# output helpers


def _fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return None if math.isnan(float(x)) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Output:
    """Writes a primary file and its ``.meta.json`` sidecar."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.started = time.perf_counter()

    def meta(self, extra: dict | None = None) -> dict:
        a = self.args
        opts = {k: v for k, v in sorted(vars(a).items())
                if k not in ("out", "out_dir", "timing", "report", "func") and not callable(v)}
        meta = {
            "command": a.command,
            "tool_version": __version__,
            "seed": getattr(a, "seed", None),
            "method": getattr(a, "method", None),
            "config_sha256": hashlib.sha256(json.dumps(_jsonable(opts), sort_keys=True).encode()).hexdigest(),
            "options": _jsonable(opts),
        }
        if getattr(a, "input", None):
            meta["input_sha256"] = _sha256_file(a.input)
        if getattr(a, "config", None):
            meta["config_file_sha256"] = _sha256_file(a.config)
        if extra:
            meta.update(_jsonable(extra))
        if a.timing:
            meta["runtime_seconds"] = time.perf_counter() - self.started
        return meta

    def write(self, text: str, path: str | Path | None, extra: dict | None = None) -> None:
        if path is None:
            sys.stdout.write(text)
            return
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        sidecar = path.with_name(path.name + ".meta.json")
        sidecar.write_text(json.dumps(self.meta(extra), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# commands


def _require_seed(args: argparse.Namespace) -> None:
    if getattr(args, "seed", None) is None:
        name = f"{args.command} {args.name}" if args.command == "attack" else args.command
        raise UsageError(f"{name} is randomized and needs --seed")


def _policy(args: argparse.Namespace):
    tb = getattr(args, "tiebreak", "lexicographic")
    if tb == "seeded":
        _require_seed(args)
    return as_tiebreak(tb, getattr(args, "seed", None))


def cmd_synth(args) -> int:
    _require_seed(args)
    cfg = SynthConfig.load(args.config) if args.config else SynthConfig()
    cfg = SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    e = generate_election(cfg)
    Output(args).write(dumps_election(e), args.out, {"synth_config_sha256": cfg.digest()})
    return 0


def cmd_validate(args) -> int:
    try:
        e = load_election(args.input, validate=False)
    except DocumentError as exc:
        print(json.dumps({"valid": False, "schema_error": str(exc), "path": exc.path}, sort_keys=True))
        return 1
    violations = validate_election(e)
    print(json.dumps({"valid": not violations,
                      "violations": [{"entity": v.entity, "id": v.entity_id, "rule": v.rule} for v in violations]},
                     sort_keys=True))
    return 0 if not violations else 1


def cmd_clean(args) -> int:
    e = load_election(args.input, validate=False)
    cfg = CleaningConfig.load(args.config) if args.config else CleaningConfig()
    overrides = {
        "min_answered": args.min_answered,
        "window_start": args.window_start,
        "window_end": args.window_end,
        "max_consecutive_identical": args.max_run,
    }
    data = cfg.to_dict()
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_dedup:
        data["dedup"] = False
    cfg = CleaningConfig.from_dict(data)
    cleaned, report = clean_voters(e, cfg)
    out = Output(args)
    out.write(dumps_election(cleaned), args.out, {"cleaning": report.to_dict(), "cleaning_config": cfg.to_dict()})
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_match(args) -> int:
    e = load_election(args.input)
    policy = _policy(args)
    if policy.tag.value == "proportional":
        raise UsageError("proportional credit does not produce per-voter rankings")
    method = as_method(args.method)
    mit = MitigationConfig.parse(args.mitigations)
    rows = []
    for v in e.voters:
        if not len(e.candidate_rows(v.state)):
            continue
        cands, lists = recommend(v, e, method, policy, mit, args.k)
        if args.target == "candidate":
            ranking = cands
            top = ranking.k if args.top is None else args.top
        else:
            if lists is None:
                continue
            ranking = lists
            top = 1 if args.top is None else args.top
        entries = ranking.entries if top == 0 else ranking.entries[:top]
        for r, ent in enumerate(entries, 1):
            rows.append((v.id, v.state, ranking.kind, r, ent.id, ent.score, ent.distance, ent.flagged))
    text = _csv(["voter_id", "state", "kind", "rank", "entity_id", "score", "distance", "flagged"], rows)
    Output(args).write(text, args.out, {"mitigations": asdict(mit)})
    return 0


def cmd_visibility(args) -> int:
    e = load_election(args.input)
    policy = _policy(args)
    if args.target == "candidate":
        table = candidate_visibility(e, args.method, args.k, policy)
    elif args.target == "party":
        table = party_visibility(e, args.method, args.k, policy)
    else:
        table = list_visibility(e, args.method, args.k or 1, policy, score_mode=args.score_mode)
    extra = {"n_voters": table.n_voters, "n_excluded": table.n_excluded}
    Output(args).write(table.to_csv(), args.out, extra)
    return 0


# -- attacks


def _report_out(args, report: AttackReport, extra: dict | None = None) -> int:
    meta = report.sidecar()
    if extra:
        meta.update(extra)
    Output(args).write(report.to_csv(), args.out, meta)
    return 0


def atk_answer_optimization(args, e) -> int:
    _require_seed(args)
    cfg = AnnealingConfig(
        iterations=args.iterations, initial_temperature=args.temperature, cooling_factor=args.cooling,
        restarts=args.restarts, voter_subsample_fraction=args.subsample, seed=args.seed,
    )
    if args.state not in e.states:
        raise ValueError(f"unknown state {args.state!r}")
    profile, vis = optimize_answers(e, args.state, args.k, args.method, cfg)
    real = candidate_visibility(e, args.method, args.k)
    in_state = {c: v for c, v in real.values.items() if real.state_of[c] == args.state}
    best_id = max(sorted(in_state), key=lambda c: in_state[c]) if in_state else None
    best = in_state.get(best_id, 0.0) if best_id else 0.0
    report = AttackReport("answer-optimization", {"crafted": best}, {"crafted": vis},
                          {"state": args.state, "method": args.method, "seed": args.seed})
    return _report_out(args, report, {"crafted_answers": list(profile.answers), "best_real_candidate": best_id,
                                      "annealing": asdict(cfg)})


def atk_calibration(args, e) -> int:
    r = calibration_experiment(e, args.party, args.method, args.direction, args.k, _policy(args))
    return _report_out(args, r)


def atk_diversification(args, e) -> int:
    res = diversification_analysis(e, args.k, args.method, args.state, _policy(args))
    cols = ["party", "n_candidates", "vote_share", "candidates_per_point", "visibility", "visibility_ratio"]
    text = _csv(cols, [[r[c] for c in cols] for r in res.rows])
    Output(args).write(text, args.out, {"correlation": res.correlation, "correlation_undefined": res.undefined})
    return 0


def atk_diversification_sim(args, e) -> int:
    _require_seed(args)
    r = diversification_simulation(e, args.party, args.clones, args.noise, args.seed, args.k, args.method,
                                   _policy(args))
    return _report_out(args, r)


def atk_list_centralization(args, e) -> int:
    res = list_centralization_analysis(e, args.method, _policy(args), args.score_mode)
    cols = ["list", "state", "party", "size", "spread", "visibility"]
    text = _csv(cols, [[r[c] for c in cols] for r in res.rows])
    Output(args).write(text, args.out, {"correlation": res.correlation, "correlation_undefined": res.undefined})
    return 0


def _parse_mapping(text: str) -> dict[float, float]:
    out = {}
    for item in text.split(","):
        a, _, b = item.partition(":")
        out[float(a)] = float(b)
    return out


def atk_weights(args, e) -> int:
    mapping = _parse_mapping(args.mapping) if args.mapping else args.preset
    return _report_out(args, weight_scenario(e, args.method, mapping, args.k, _policy(args)))


def atk_similarity_score(args, e) -> int:
    h = top_match_distribution(e, args.method, args.bins, _policy(args))
    parties = sorted(h.by_party)
    rows = [[h.edges[i], h.edges[i + 1], h.overall[i]] + [h.by_party[p][i] for p in parties]
            for i in range(len(h.overall))]
    text = _csv(["bin_lo", "bin_hi", "overall"] + parties, rows)
    Output(args).write(text, args.out, {"n_voters": int(len(h.scores))})
    return 0


def atk_question_favoritism(args, e) -> int:
    g = greedy_question_subset(e, args.party, args.method, args.k, args.max_size, _policy(args))
    rows = [[i + 1, q, v, gain] for i, (q, v, gain) in enumerate(zip(g.order, g.visibility, g.gains))]
    text = _csv(["step", "question", "visibility", "rel_gain"], rows)
    Output(args).write(text, args.out, {"party": args.party, "baseline": g.baseline,
                                        "best_size": g.best_size, "best_gain": g.best_gain})
    return 0


def atk_question_correlation(args, e) -> int:
    r = question_correlation_matrix(e)
    ids = [q.id for q in e.questions]
    text = _csv(["question"] + ids, [[ids[i]] + list(r[i]) for i in range(len(ids))])
    Output(args).write(text, args.out, {"undefined_pairs": int(np.isnan(r).sum())})
    return 0


def atk_duplicate_question(args, e) -> int:
    return _report_out(args, duplicate_question_attack(e, args.question, args.copies, args.method, args.k,
                                                       _policy(args)))


def _ordering(spec: str, e, args) -> list[int]:
    idx = [q.index for q in e.questions]
    if spec == "identity":
        return idx
    if spec == "reverse":
        return idx[::-1]
    if spec.startswith("greedy:"):
        return favorable_ordering(e, spec.split(":", 1)[1], args.method, args.k, args.greedy_size)
    try:
        return [int(x) for x in spec.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse ordering {spec!r}") from exc


def atk_question_order(args, e) -> int:
    _require_seed(args)
    drop = DropModel(args.drop_intercept, args.drop_slope)
    order = _ordering(args.ordering, e, args)
    r = question_order_experiment(e, order, drop, args.trials, args.seed, args.method, args.k, _policy(args),
                                  args.baseline)
    return _report_out(args, r)


def atk_tiebreak(args, e) -> int:
    return _report_out(args, tiebreak_impact(e, args.method, args.k))


def atk_method(args, e) -> int:
    return _report_out(args, method_manipulation(e, args.method, args.baseline_method, args.k, _policy(args)))


ATTACKS = {
    "answer-optimization": atk_answer_optimization,
    "calibration": atk_calibration,
    "diversification": atk_diversification,
    "diversification-sim": atk_diversification_sim,
    "list-centralization": atk_list_centralization,
    "weights": atk_weights,
    "similarity-score": atk_similarity_score,
    "question-favoritism": atk_question_favoritism,
    "question-correlation": atk_question_correlation,
    "duplicate-question": atk_duplicate_question,
    "question-order": atk_question_order,
    "tiebreak": atk_tiebreak,
    "method": atk_method,
}

_NEEDS = {
    "calibration": ["party"],
    "diversification-sim": ["party"],
    "question-favoritism": ["party"],
    "answer-optimization": ["state"],
    "question-order": ["ordering"],
    "duplicate-question": ["question"],
}


def cmd_attack(args) -> int:
    for name in _NEEDS.get(args.name, []):
        if getattr(args, name) is None:
            raise UsageError(f"attack {args.name} needs --{name.replace('_', '-')}")
    e = load_election(args.input)
    return ATTACKS[args.name](args, e)


def cmd_metrics(args) -> int:
    e = load_election(args.input)
    methods = [as_method(m) for m in args.methods.split(",")] if args.methods else list(ALL_METHODS)
    parties = tuple(args.parties.split(",")) if args.parties else None
    cfg = MetricConfig(parties=parties, k=args.k, tiebreak=_policy(args))
    sc = method_comparison(e, methods, cfg, workers=args.workers)
    Output(args).write(sc.to_csv(), args.out, sc.markers())
    return 0


def cmd_report(args) -> int:
    _require_seed(args)
    e = load_election(args.input)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = Output(args)
    files = {}

    def emit(name: str, text: str, extra: dict | None = None):
        out.write(text, out_dir / name, extra)
        files[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()

    policy = _policy(args)
    emit("visibility_candidate.csv", candidate_visibility(e, args.method, args.k, policy).to_csv())
    emit("visibility_party.csv", party_visibility(e, args.method, args.k, policy).to_csv())
    if e.lists:
        emit("visibility_list.csv", list_visibility(e, args.method, 1, policy).to_csv())
    emit("tiebreak.csv", tiebreak_impact(e, args.method, args.k).to_csv())
    if any(w not in (0.0, 1.0) for v in e.voters for w in v.profile.weights):
        emit("weights_strong.csv", weight_scenario(e, args.method, "strong", args.k, policy).to_csv())
    if not args.skip_metrics:
        sc = method_comparison(e, ALL_METHODS, MetricConfig(k=args.k, tiebreak=policy))
        emit("scorecard.csv", sc.to_csv(), sc.markers())
    manifest = {"files": files, "seed": args.seed, "method": args.method}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


# --------------------------------------------------------------------------
# parser


def _method_arg(text: str) -> str:
    try:
        return str(as_method(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown method {text!r}") from None


def _common(p: argparse.ArgumentParser, *, seed: bool = True, method: bool = True, k: bool = True,
            tiebreak: bool = True) -> None:
    p.add_argument("input", help="election JSON document")
    p.add_argument("--out", help="output file (stdout when omitted)")
    if method:
        p.add_argument("--method", default="l2", type=_method_arg,
                       help="l2, l1, agreement, angular, mahalanobis, l1bonus, hybrid")
    if k:
        p.add_argument("--k", type=int, default=None, help="override the per-state seat count")
    if tiebreak:
        p.add_argument("--tiebreak", default="lexicographic", choices=["lexicographic", "seeded", "proportional"])
    if seed:
        p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vaarobust", description="Robustness analysis of questionnaire-based recommenders.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--timing", action="store_true", help="record runtime in metadata sidecars")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic election")
    p.add_argument("--config", help="YAML generator config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output election JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="check an election document")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("clean", help="apply the voter cleaning pipeline")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--config", help="YAML cleaning config")
    p.add_argument("--min-answered", type=int)
    p.add_argument("--window-start", type=int)
    p.add_argument("--window-end", type=int)
    p.add_argument("--max-run", type=int, help="longest allowed run of identical answers")
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--report", help="write the cleaning report JSON here too")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("match", help="per-voter rankings")
    _common(p)
    p.add_argument("--mitigations", default="", help="comma list: deal_breaker,party_cap,relative_normalization,"
                                                    "mean_vector_list_score")
    p.add_argument("--target", choices=["candidate", "list"], default="candidate")
    p.add_argument("--top", type=int, default=None, help="entries per voter (0 = all)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("visibility", help="visibility tables")
    _common(p)
    p.add_argument("--target", choices=["candidate", "party", "list"], default="candidate")
    p.add_argument("--score-mode", choices=["mean_of_scores", "score_of_mean"], default="mean_of_scores")
    p.set_defaults(func=cmd_visibility)

    p = sub.add_parser("attack", help="run one manipulation experiment")
    p.add_argument("name", choices=sorted(ATTACKS))
    _common(p)
    p.add_argument("--state")
    p.add_argument("--party")
    p.add_argument("--direction", choices=["moderate", "strong"], default="moderate")
    p.add_argument("--iterations", type=int, default=20_000)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--temperature", type=float, default=0.05)
    p.add_argument("--cooling", type=float, default=0.9995)
    p.add_argument("--subsample", type=float, default=1.0)
    p.add_argument("--clones", type=int, default=10)
    p.add_argument("--noise", type=int, default=1)
    p.add_argument("--score-mode", choices=["mean_of_scores", "score_of_mean"], default="mean_of_scores")
    p.add_argument("--preset", choices=["strong", "weak"], default="strong")
    p.add_argument("--mapping", help="explicit weight mapping, e.g. 0:0,0.5:0.1,1:1,2:10")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--max-size", type=int, default=None)
    p.add_argument("--question", type=int, help="1-based question index")
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--ordering", help="identity, reverse, greedy:PARTY or a comma list of question indices")
    p.add_argument("--greedy-size", type=int, default=None)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--baseline", choices=["complete", "same_drops"], default="complete")
    p.add_argument("--drop-intercept", type=float, default=0.96)
    p.add_argument("--drop-slope", type=float, default=0.0012)
    p.add_argument("--baseline-method", default="l2", type=_method_arg)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("metrics", help="method comparison scorecard")
    _common(p, method=False)
    p.add_argument("--methods", default="", help="comma list (default: all seven)")
    p.add_argument("--parties", default="", help="comma list of parties for BIA")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="bundle tables and metrics into a directory")
    p.add_argument("input")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", default="l2", type=_method_arg)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--tiebreak", default="lexicographic", choices=["lexicographic", "seeded", "proportional"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--skip-metrics", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}, sort_keys=True) + "\n")
    return code


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except (DocumentError, ElectionValidationError) as exc:
        return _fail("validation", str(exc), 1)
    except (MatchingError, UndefinedMetricError, ValueError, KeyError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
