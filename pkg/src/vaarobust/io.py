"""Election documents on disk and the voter cleaning pipeline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .model import (
    PRESET_SCALES,
    AnswerScale,
    Candidate,
    Election,
    Party,
    PartyList,
    Profile,
    Question,
    Violation,
    Voter,
    validate_election,
)

SCHEMA_VERSION = "1.0"

YOUTH_PARTIES = {
    "JUSO": "SP",
    "JG": "Green",
    "JGLP": "GLP",
    "JEVP": "EVP",
    "JM": "Centre",
    "JFS": "FDP",
    "JSVP": "SVP",
}


class DocumentError(ValueError):
    """The file is not a well-formed election document."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class ElectionValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        head = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"{len(violations)} validation error(s): {head}{more}")
        self.violations = violations


@lru_cache(maxsize=1)
def election_schema() -> dict:
    text = resources.files("vaarobust").joinpath("election.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _entity_hint(doc: Mapping[str, Any], path: list) -> str:
    if len(path) >= 2 and path[0] in ("voters", "candidates", "lists", "questions", "states", "parties"):
        try:
            ident = doc[path[0]][path[1]].get("id")
        except (IndexError, KeyError, AttributeError, TypeError):
            ident = None
        if ident is not None:
            return f" ({path[0][:-1]} {ident})"
    return ""


def _json_path(path: list) -> str:
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def check_document(doc: Any) -> None:
    """Raise DocumentError on the first schema or shape violation."""
    validator = jsonschema.Draft202012Validator(election_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        raise DocumentError(err.message + _entity_hint(doc, path), _json_path(path))
    nq = len(doc["questions"])
    for kind in ("candidates", "voters"):
        for i, ent in enumerate(doc.get(kind, [])):
            for arr in ("answers", "weights"):
                if arr in ent and len(ent[arr]) != nq:
                    raise DocumentError(
                        f"{len(ent[arr])} {arr} for {nq} questions ({kind[:-1]} {ent['id']})",
                        f"$.{kind}[{i}].{arr}",
                    )


def _scale(q: Mapping[str, Any]) -> AnswerScale:
    kind = q["kind"]
    if "allowed" in q:
        return AnswerScale(kind, tuple(q["allowed"]))
    if kind not in PRESET_SCALES:
        raise DocumentError(f"question {q['id']} of kind {kind!r} needs explicit allowed values")
    return PRESET_SCALES[kind]


def election_from_document(doc: Mapping[str, Any], validate: bool = True) -> Election:
    check_document(doc)
    questions = tuple(
        Question(i + 1, q["id"], _scale(q), q.get("text")) for i, q in enumerate(doc["questions"])
    )
    nq = len(questions)
    candidates = tuple(
        Candidate(c["id"], c.get("sort_key", c["id"]), c["state"], c["party"], c["list"],
                  Profile(tuple(c["answers"]), tuple(c.get("weights", [1.0] * nq))))
        for c in doc.get("candidates", [])
    )
    voters = tuple(
        Voter(v["id"], v["state"], Profile(tuple(v["answers"]), tuple(v["weights"])),
              v.get("preferred_party"), int(v.get("timestamp", 0)), v.get("election_id"))
        for v in doc.get("voters", [])
    )
    e = Election(
        questions=questions,
        states={s["id"]: int(s["seats"]) for s in doc["states"]},
        candidates=candidates,
        voters=voters,
        lists=tuple(PartyList(l["id"], l["state"], l["party"], tuple(l["members"])) for l in doc.get("lists", [])),
        weight_set=tuple(doc.get("weight_set", (0.0, 0.5, 1.0, 2.0))),
        parties=tuple(Party(p["id"], p.get("name"), p.get("vote_share"), p.get("youth_of"))
                      for p in doc.get("parties", [])),
    )
    if validate:
        violations = validate_election(e)
        if violations:
            raise ElectionValidationError(violations)
    return e


def _num(x: float | None) -> float | int | None:
    if x is None:
        return None
    return int(x) if float(x).is_integer() else float(x)


def election_to_document(e: Election) -> dict[str, Any]:
    def question(q: Question) -> dict[str, Any]:
        d = {"id": q.id, "kind": q.scale.kind, "allowed": [_num(a) for a in q.scale.allowed]}
        if q.text is not None:
            d["text"] = q.text
        return d

    def party(p: Party) -> dict[str, Any]:
        d = {"id": p.id}
        for k in ("name", "vote_share", "youth_of"):
            if getattr(p, k) is not None:
                d[k] = getattr(p, k)
        return d

    def voter(v: Voter) -> dict[str, Any]:
        d = {"id": v.id, "state": v.state,
             "answers": [_num(a) for a in v.profile.answers],
             "weights": [_num(w) for w in v.profile.weights],
             "timestamp": v.timestamp}
        if v.preferred_party is not None:
            d["preferred_party"] = v.preferred_party
        if v.election_id is not None:
            d["election_id"] = v.election_id
        return d

    def candidate(c: Candidate) -> dict[str, Any]:
        d = {"id": c.id, "sort_key": c.sort_key, "state": c.state, "party": c.party, "list": c.list,
             "answers": [_num(a) for a in c.profile.answers]}
        if any(w != 1.0 for w in c.profile.weights):
            d["weights"] = [_num(w) for w in c.profile.weights]
        return d

    return {
        "schema_version": SCHEMA_VERSION,
        "weight_set": [_num(w) for w in e.weight_set],
        "questions": [question(q) for q in e.questions],
        "states": [{"id": s, "seats": n} for s, n in e.states.items()],
        "parties": [party(p) for p in e.parties],
        "candidates": [candidate(c) for c in e.candidates],
        "voters": [voter(v) for v in e.voters],
        "lists": [{"id": l.id, "state": l.state, "party": l.party, "members": list(l.members)} for l in e.lists],
    }


def load_election(path: str | Path, validate: bool = True) -> Election:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc}") from exc
    return election_from_document(doc, validate)


def dumps_election(e: Election) -> str:
    return json.dumps(election_to_document(e), ensure_ascii=False, separators=(",", ":")) + "\n"


def save_election(e: Election, path: str | Path) -> None:
    Path(path).write_text(dumps_election(e), encoding="utf-8")


# --------------------------------------------------------------------------
# cleaning


@dataclass(frozen=True)
class CleaningConfig:
    min_answered: int = 15
    window_start: int | None = None
    window_end: int | None = None
    max_consecutive_identical: int = 14
    dedup: bool = True
    drop_corrupt: bool = True
    youth_map: Mapping[str, str] = field(default_factory=lambda: dict(YOUTH_PARTIES))

    def __post_init__(self) -> None:
        if self.min_answered < 1:
            raise ValueError("min_answered must be >= 1")
        if self.max_consecutive_identical < 1:
            raise ValueError("max_consecutive_identical must be >= 1")
        if self.window_start is not None and self.window_end is not None and self.window_end < self.window_start:
            raise ValueError("window_end precedes window_start")

    @property
    def windowed(self) -> bool:
        return self.window_start is not None or self.window_end is not None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CleaningConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown cleaning config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> CleaningConfig:
        import yaml

        return cls.from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {})

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["youth_map"] = dict(sorted(self.youth_map.items()))
        return d


@dataclass
class CleaningReport:
    n_input: int
    n_output: int
    dropped: dict[str, int]
    merged_preferences: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def longest_identical_run(profile: Profile) -> int:
    """Longest stretch of equal consecutive answers; a skipped question ends the stretch."""
    best = run = 0
    prev = None
    for a in profile.answers:
        if a is None:
            run, prev = 0, None
            continue
        run = run + 1 if a == prev else 1
        prev = a
        best = max(best, run)
    return best


def clean_voters(e: Election, cfg: CleaningConfig | None = None) -> tuple[Election, CleaningReport]:
    """Drop unusable voter records and merge youth wings into their main parties.

    Rules run in order: corrupt records, live window, too few answers,
    duplicates (latest timestamp, then most answers, then first in the file),
    straight-lining runs, youth merge.
    """
    cfg = cfg or CleaningConfig()
    voters = list(e.voters)
    dropped: dict[str, int] = {}

    def apply(rule: str, keep) -> None:
        nonlocal voters
        kept = [v for v in voters if keep(v)]
        dropped[rule] = len(voters) - len(kept)
        voters = kept

    if cfg.drop_corrupt and (cfg.dedup or cfg.windowed):
        apply("corrupt", lambda v: bool(v.election_id))
    else:
        dropped["corrupt"] = 0
    lo = cfg.window_start
    hi = cfg.window_end
    apply("window", lambda v: (lo is None or v.timestamp >= lo) and (hi is None or v.timestamp <= hi))
    apply("min_answered", lambda v: v.profile.n_answered >= cfg.min_answered)
    if cfg.dedup:
        best: dict[str, tuple[int, int, int]] = {}
        for pos, v in enumerate(voters):
            key = (v.timestamp, v.profile.n_answered, -pos)
            if v.id not in best or key > best[v.id]:
                best[v.id] = key
        keep_pos = {-k[2] for k in best.values()}
        kept = [v for pos, v in enumerate(voters) if pos in keep_pos]
        dropped["duplicate"] = len(voters) - len(kept)
        voters = kept
    else:
        dropped["duplicate"] = 0
    apply("identical_run", lambda v: longest_identical_run(v.profile) <= cfg.max_consecutive_identical)

    youth = dict(cfg.youth_map)
    youth.update({p.id: p.youth_of for p in e.parties if p.youth_of})
    merged = 0
    out = []
    for v in voters:
        target = youth.get(v.preferred_party) if v.preferred_party is not None else None
        if target is not None and target != v.preferred_party:
            v = replace(v, preferred_party=target)
            merged += 1
        out.append(v)
    report = CleaningReport(len(e.voters), len(out), dropped, merged)
    return e.replace(voters=tuple(out)), report

