"""Domain types for questionnaires, candidates, voters, lists and elections."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_WEIGHT_SET: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
DEFAULT_WEIGHT = 1.0

SCALE_KINDS = ("policy", "value", "budget", "custom")
TARGET_KINDS = ("candidate", "party", "list")


@dataclass(frozen=True)
class AnswerScale:
    """Allowed answers of one question, strictly ascending."""

    kind: str
    allowed: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in SCALE_KINDS:
            raise ValueError(f"unknown scale kind {self.kind!r}")
        allowed = tuple(float(a) for a in self.allowed)
        if len(allowed) < 2:
            raise ValueError("a scale needs at least two allowed answers")
        if any(b <= a for a, b in zip(allowed, allowed[1:])):
            raise ValueError(f"allowed answers must be strictly ascending: {allowed}")
        object.__setattr__(self, "allowed", allowed)

    @property
    def neutral(self) -> float:
        return (self.allowed[0] + self.allowed[-1]) / 2

    @property
    def size(self) -> int:
        return len(self.allowed)

    def __contains__(self, value: object) -> bool:
        return value in self.allowed

    def index(self, value: float) -> int:
        return self.allowed.index(float(value))


POLICY = AnswerScale("policy", (0, 25, 75, 100))
VALUE = AnswerScale("value", (0, 17, 33, 50, 67, 83, 100))
BUDGET = AnswerScale("budget", (0, 25, 50, 75, 100))
PRESET_SCALES = {"policy": POLICY, "value": VALUE, "budget": BUDGET}


@dataclass(frozen=True)
class Question:
    index: int
    id: str
    scale: AnswerScale
    text: str | None = None


def smartvote_questions(n_policy: int = 60, n_value: int = 7, n_budget: int = 8) -> tuple[Question, ...]:
    """The 75-question layout: policy items first, then value, then budget."""
    kinds = [POLICY] * n_policy + [VALUE] * n_value + [BUDGET] * n_budget
    return tuple(Question(i + 1, f"q{i + 1:02d}", scale) for i, scale in enumerate(kinds))


@dataclass(frozen=True)
class Profile:
    """Answers (None = skipped) and per-question weights.

    A skipped answer always carries weight 0; the constructor enforces it.
    """

    answers: tuple[float | None, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        answers = tuple(None if a is None else float(a) for a in self.answers)
        weights = tuple(float(w) for w in self.weights)
        if len(answers) != len(weights):
            raise ValueError(f"{len(answers)} answers but {len(weights)} weights")
        weights = tuple(0.0 if a is None else w for a, w in zip(answers, weights))
        object.__setattr__(self, "answers", answers)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def complete(cls, answers: Iterable[float], weight: float = DEFAULT_WEIGHT) -> Profile:
        answers = tuple(answers)
        return cls(answers, (weight,) * len(answers))

    def __len__(self) -> int:
        return len(self.answers)

    @property
    def n_answered(self) -> int:
        return sum(a is not None for a in self.answers)

    @property
    def is_complete(self) -> bool:
        return all(a is not None for a in self.answers)

    def answer_array(self) -> np.ndarray:
        return np.array([np.nan if a is None else a for a in self.answers], dtype=float)

    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)


@dataclass(frozen=True)
class Candidate:
    id: str
    sort_key: str
    state: str
    party: str
    list: str
    profile: Profile


@dataclass(frozen=True)
class Voter:
    id: str
    state: str
    profile: Profile
    preferred_party: str | None = None
    timestamp: int = 0
    election_id: str | None = None


@dataclass(frozen=True)
class PartyList:
    id: str
    state: str
    party: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class Party:
    id: str
    name: str | None = None
    vote_share: float | None = None
    youth_of: str | None = None


# cached array views that depend only on the voters / only on the questions
_VOTER_CACHES = ("voter_answers", "voter_weights", "voter_states")


@dataclass(frozen=True, eq=True)
class Election:
    """The universe every matching and attack operation runs over.

    Array views (``candidate_answers``, ``voter_answers`` ...) are computed
    lazily and carried over by :meth:`replace` when the voters are unchanged.
    """

    questions: tuple[Question, ...]
    states: Mapping[str, int]
    candidates: tuple[Candidate, ...] = ()
    voters: tuple[Voter, ...] = ()
    lists: tuple[PartyList, ...] = ()
    weight_set: tuple[float, ...] = DEFAULT_WEIGHT_SET
    parties: tuple[Party, ...] = ()

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "questions", tuple(self.questions))
        object.__setattr__(self, "states", dict(self.states))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "voters", tuple(self.voters))
        object.__setattr__(self, "lists", tuple(self.lists))
        object.__setattr__(self, "weight_set", tuple(float(w) for w in self.weight_set))
        object.__setattr__(self, "parties", tuple(self.parties))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Election):
            return NotImplemented
        return all(getattr(self, f.name) == getattr(other, f.name) for f in dataclasses.fields(self))

    def replace(self, **changes) -> Election:
        new = dataclasses.replace(self, **changes)
        if "voters" not in changes and "questions" not in changes:
            for name in _VOTER_CACHES:
                if name in self.__dict__:
                    new.__dict__[name] = self.__dict__[name]
        return new

    @property
    def n_questions(self) -> int:
        return len(self.questions)

    @property
    def scales(self) -> tuple[AnswerScale, ...]:
        return tuple(q.scale for q in self.questions)

    @property
    def party_vote_shares(self) -> dict[str, float] | None:
        shares = {p.id: p.vote_share for p in self.parties if p.vote_share is not None}
        return shares or None

    @property
    def party_ids(self) -> list[str]:
        """Parties in declaration order, then any undeclared party seen on a candidate."""
        seen = [p.id for p in self.parties]
        for c in self.candidates:
            if c.party not in seen:
                seen.append(c.party)
        return seen

    @cached_property
    def candidate_answers(self) -> np.ndarray:
        if not self.candidates:
            return np.zeros((0, self.n_questions))
        return np.array([c.profile.answer_array() for c in self.candidates], dtype=float)

    @cached_property
    def voter_answers(self) -> np.ndarray:
        if not self.voters:
            return np.zeros((0, self.n_questions))
        return np.array(
            [[np.nan if a is None else a for a in v.profile.answers] for v in self.voters], dtype=float
        )

    @cached_property
    def voter_weights(self) -> np.ndarray:
        if not self.voters:
            return np.zeros((0, self.n_questions))
        return np.array([v.profile.weights for v in self.voters], dtype=float)

    @cached_property
    def voter_states(self) -> np.ndarray:
        return np.array([v.state for v in self.voters], dtype=object)

    @cached_property
    def candidate_index(self) -> dict[str, int]:
        return {c.id: i for i, c in enumerate(self.candidates)}

    @cached_property
    def list_index(self) -> dict[str, int]:
        return {lst.id: i for i, lst in enumerate(self.lists)}

    def candidate_rows(self, state: str) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.candidates) if c.state == state], dtype=int)

    def voter_rows(self, state: str) -> np.ndarray:
        return np.flatnonzero(self.voter_states == state) if self.voters else np.zeros(0, dtype=int)

    def lists_in(self, state: str) -> list[PartyList]:
        return [lst for lst in self.lists if lst.state == state]

    def candidates_in(self, state: str) -> list[Candidate]:
        return [c for c in self.candidates if c.state == state]

    def with_candidates(self, candidates: Sequence[Candidate]) -> Election:
        return self.replace(candidates=tuple(candidates))


@dataclass(frozen=True)
class Violation:
    entity: str
    entity_id: str
    rule: str

    def __str__(self) -> str:
        return f"{self.entity} {self.entity_id}: {self.rule}"


def validate_election(e: Election) -> list[Violation]:
    """Check every structural invariant; an empty list means the election is valid."""
    out: list[Violation] = []
    nq = e.n_questions
    weights = set(e.weight_set)

    seen_idx: set[int] = set()
    for q in e.questions:
        if q.index in seen_idx:
            out.append(Violation("question", q.id, "duplicate question index"))
        seen_idx.add(q.index)
    if 0.0 not in weights:
        out.append(Violation("election", "weight_set", "weight_set must contain 0"))
    if DEFAULT_WEIGHT not in weights:
        out.append(Violation("election", "weight_set", "weight_set must contain the default weight 1"))
    for s, seats in e.states.items():
        if int(seats) < 1:
            out.append(Violation("state", s, "seat count must be positive"))

    declared_parties = {p.id for p in e.parties}
    list_ids = {lst.id: lst for lst in e.lists}
    cand_ids: dict[str, Candidate] = {}
    for c in e.candidates:
        if c.id in cand_ids:
            out.append(Violation("candidate", c.id, "duplicate candidate id"))
        cand_ids[c.id] = c
        if c.state not in e.states:
            out.append(Violation("candidate", c.id, "undeclared state"))
        if declared_parties and c.party not in declared_parties:
            out.append(Violation("candidate", c.id, "undeclared party"))
        if c.list not in list_ids:
            out.append(Violation("candidate", c.id, "list does not exist"))
        if len(c.profile) != nq:
            out.append(Violation("candidate", c.id, "answer count differs from question count"))
            continue
        if not c.profile.is_complete:
            out.append(Violation("candidate", c.id, "candidate must answer every question"))
        for q, a in zip(e.questions, c.profile.answers):
            if a is not None and a not in q.scale:
                out.append(Violation("candidate", c.id, f"answer not in allowed set ({q.id}={a:g})"))

    for v in e.voters:
        if v.state not in e.states:
            out.append(Violation("voter", v.id, "undeclared state"))
        if len(v.profile) != nq:
            out.append(Violation("voter", v.id, "answer count differs from question count"))
            continue
        if v.profile.n_answered == 0:
            out.append(Violation("voter", v.id, "no answered questions"))
        for q, a, w in zip(e.questions, v.profile.answers, v.profile.weights):
            if a is not None and a not in q.scale:
                out.append(Violation("voter", v.id, f"answer not in allowed set ({q.id}={a:g})"))
            if w not in weights:
                out.append(Violation("voter", v.id, f"weight not in weight_set ({q.id}={w:g})"))
            if a is None and w != 0:
                out.append(Violation("voter", v.id, f"unanswered question has nonzero weight ({q.id})"))

    placed: dict[str, str] = {}
    for lst in e.lists:
        if lst.state not in e.states:
            out.append(Violation("list", lst.id, "undeclared state"))
        if not lst.members:
            out.append(Violation("list", lst.id, "list is empty"))
        for m in lst.members:
            c = cand_ids.get(m)
            if c is None:
                out.append(Violation("list", lst.id, f"member {m} does not exist"))
                continue
            if c.state != lst.state:
                out.append(Violation("list", lst.id, f"member {m} is in another state"))
            if m in placed:
                out.append(Violation("candidate", m, "candidate appears on more than one list"))
            placed[m] = lst.id
            if c.list != lst.id:
                out.append(Violation("candidate", m, f"candidate list field does not match list {lst.id}"))
    for cid in cand_ids:
        if e.lists and cid not in placed:
            out.append(Violation("candidate", cid, "candidate appears on no list"))
    return out


def default_k(e: Election, state: str, target: str = "candidate", override: int | None = None) -> int:
    """Seats of the state for candidate and party targets, 1 for lists."""
    if state not in e.states:
        raise KeyError(f"unknown state {state!r}")
    if target not in TARGET_KINDS:
        raise ValueError(f"unknown target {target!r}")
    if override is not None:
        if override < 1:
            raise ValueError("k must be positive")
        return int(override)
    return 1 if target == "list" else int(e.states[state])
