"""Seeded synthetic elections with party-structured candidates and noisier voters.

Every entity draws from its own RNG sub-stream keyed on (seed, kind, index),
so a fixed config yields the same election regardless of generation order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .attacks import DropModel
from .model import (
    AnswerScale,
    Candidate,
    Election,
    Party,
    PartyList,
    Profile,
    Question,
    Voter,
    smartvote_questions,
)


@dataclass(frozen=True)
class StateSpec:
    name: str
    seats: int
    n_candidates: int
    n_voters: int


@dataclass(frozen=True)
class PartySpec:
    name: str
    vote_share: float
    position: tuple[float, ...]
    spread: float = 0.35
    youth_of: str | None = None


DEFAULT_STATES = (
    StateSpec("north", 12, 220, 4500),
    StateSpec("east", 8, 170, 3300),
    StateSpec("south", 5, 110, 2200),
)

DEFAULT_PARTIES = (
    PartySpec("SOC", 0.24, (-1.2, 0.4), 0.35),
    PartySpec("GRN", 0.14, (-0.9, -0.7), 0.35),
    PartySpec("CEN", 0.20, (0.1, 0.0), 0.40),
    PartySpec("LIB", 0.16, (0.8, -0.6), 0.40),
    PartySpec("CON", 0.26, (1.3, 0.7), 0.35),
)

_SYLLABLES = ("ba", "ber", "chi", "da", "dor", "fe", "gli", "hau", "ka", "ler", "mo", "nie",
              "ri", "sa", "ste", "tor", "vo", "wa", "zel", "zu")


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the generator; all randomness flows from ``seed``."""

    seed: int = 0
    states: tuple[StateSpec, ...] = DEFAULT_STATES
    parties: tuple[PartySpec, ...] = DEFAULT_PARTIES
    n_policy: int = 60
    n_value: int = 7
    n_budget: int = 8
    latent_dim: int = 2
    candidate_slope: float = 2.5
    voter_slope: float = 1.5
    offset_sd: float = 0.4
    candidate_noise: float = 1.0
    voter_spread: float = 1.6
    voter_noise: float = 1.2
    weight_probs: tuple[tuple[float, float], ...] = ((0.5, 0.06), (1.0, 0.84), (2.0, 0.10))
    drop: DropModel = field(default_factory=DropModel)
    apply_drop: bool = True
    drop_coherence: float = 0.3
    preferred_missing: float = 0.25
    preferred_noise: float = 0.15
    election_id: str = "synth"

    def __post_init__(self) -> None:
        shares = [p.vote_share for p in self.parties]
        if not self.parties:
            raise ValueError("at least one party is required")
        if any(s < 0 for s in shares) or abs(sum(shares) - 1.0) > 1e-9:
            raise ValueError(f"party vote shares must be non-negative and sum to 1 (got {sum(shares)!r})")
        if any(len(p.position) != self.latent_dim for p in self.parties):
            raise ValueError("party positions must match latent_dim")
        if any(p.spread < 0 for p in self.parties):
            raise ValueError("party spreads must be non-negative")
        if self.voter_spread < 1:
            raise ValueError("voter_spread must be >= 1")
        if not self.states:
            raise ValueError("at least one state is required")
        for s in self.states:
            if s.n_candidates < 1 or s.seats < 1 or s.n_voters < 0:
                raise ValueError(f"state {s.name!r} needs >= 1 candidate and >= 1 seat")
        probs = [p for _, p in self.weight_probs]
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("weight probabilities must sum to 1")
        for name in ("preferred_missing", "preferred_noise", "drop_coherence"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def n_questions(self) -> int:
        return self.n_policy + self.n_value + self.n_budget

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SynthConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        kw = dict(data)
        if "states" in kw:
            kw["states"] = tuple(StateSpec(**s) if isinstance(s, Mapping) else s for s in kw["states"])
        if "parties" in kw:
            kw["parties"] = tuple(
                PartySpec(**{**p, "position": tuple(p["position"])}) if isinstance(p, Mapping) else p
                for p in kw["parties"]
            )
        if "weight_probs" in kw:
            wp = kw["weight_probs"]
            items = wp.items() if isinstance(wp, Mapping) else wp
            kw["weight_probs"] = tuple((float(a), float(b)) for a, b in items)
        if "drop" in kw and isinstance(kw["drop"], Mapping):
            d = dict(kw["drop"])
            if d.get("table") is not None:
                d["table"] = tuple(d["table"])
            kw["drop"] = DropModel(**d)
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> SynthConfig:
        import yaml

        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls.from_dict(data)


def two_party_config(seed: int = 0, n_voters: int = 2000, n_candidates: int = 60) -> SynthConfig:
    """Two well-separated parties; voters sit close to their party."""
    return SynthConfig(
        seed=seed,
        states=(StateSpec("only", 6, n_candidates, n_voters),),
        parties=(
            PartySpec("LEFT", 0.5, (-1.5, 0.0), 0.25),
            PartySpec("RIGHT", 0.5, (1.5, 0.0), 0.25),
        ),
        voter_spread=1.0,
        voter_noise=0.6,
        preferred_missing=0.0,
        preferred_noise=0.0,
    )


def _stream(seed: int, kind: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), kind, index]))


def _allocate(n: int, shares: Sequence[float]) -> list[int]:
    raw = [n * s for s in shares]
    base = [int(math.floor(x)) for x in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[: n - sum(base)]:
        base[i] += 1
    return base


def _grid(scales: Sequence[AnswerScale]) -> np.ndarray:
    width = max(s.size for s in scales)
    g = np.full((len(scales), width), np.inf)
    for t, s in enumerate(scales):
        g[t, : s.size] = s.allowed
    return g


def _quantize(p: np.ndarray, grid: np.ndarray) -> list[float]:
    """Nearest allowed value to 100 * p, i.e. thresholds at midpoints."""
    j = np.argmin(np.abs(grid - 100.0 * p[:, None]), axis=1)
    return grid[np.arange(len(grid)), j].tolist()


def _name(rng: np.random.Generator) -> str:
    n = int(rng.integers(2, 4))
    return "".join(_SYLLABLES[int(i)] for i in rng.integers(len(_SYLLABLES), size=n)).capitalize()


def generate_election(cfg: SynthConfig | None = None) -> Election:
    cfg = cfg or SynthConfig()
    questions = smartvote_questions(cfg.n_policy, cfg.n_value, cfg.n_budget)
    scales = [q.scale for q in questions]
    nq = len(questions)
    layout = _stream(cfg.seed, 0, 0)
    L = layout.normal(size=(nq, cfg.latent_dim))
    L /= np.linalg.norm(L, axis=1, keepdims=True)
    b = layout.normal(0.0, cfg.offset_sd, size=nq)
    shares = [p.vote_share for p in cfg.parties]
    positions = [np.asarray(p.position, dtype=float) for p in cfg.parties]

    grid = _grid(scales)

    def answers(x: np.ndarray, noise: np.ndarray, slope: float) -> list[float]:
        z = slope * (L @ x + b) + noise
        return _quantize(1.0 / (1.0 + np.exp(-z)), grid)

    candidates: list[Candidate] = []
    lists: list[PartyList] = []
    j = 0
    for state in cfg.states:
        counts = _allocate(state.n_candidates, shares)
        for pi, (party, n) in enumerate(zip(cfg.parties, counts)):
            members = []
            for _ in range(n):
                rng = _stream(cfg.seed, 1, j)
                x = positions[pi] + party.spread * rng.normal(size=cfg.latent_dim)
                noise = cfg.candidate_noise * party.spread * rng.normal(size=nq)
                cid = f"c{j:05d}"
                members.append(cid)
                candidates.append(Candidate(cid, f"{_name(rng)} {cid}", state.name, party.name, "",
                                            Profile.complete(answers(x, noise, cfg.candidate_slope))))
                j += 1
            for li in range(0, len(members), state.seats):
                lid = f"{state.name}-{party.name}-{li // state.seats + 1}"
                chunk = tuple(members[li : li + state.seats])
                lists.append(PartyList(lid, state.name, party.name, chunk))
    list_of = {m: lst.id for lst in lists for m in lst.members}
    candidates = [Candidate(c.id, c.sort_key, c.state, c.party, list_of[c.id], c.profile) for c in candidates]

    weight_vals = np.array([w for w, _ in cfg.weight_probs])
    weight_p = np.array([p for _, p in cfg.weight_probs])
    rates = cfg.drop.rates(nq) if cfg.apply_drop else np.ones(nq)
    names = [p.name for p in cfg.parties]
    voters: list[Voter] = []
    i = 0
    for state in cfg.states:
        for _ in range(state.n_voters):
            rng = _stream(cfg.seed, 2, i)
            pi = int(rng.choice(len(cfg.parties), p=shares))
            party = cfg.parties[pi]
            x = positions[pi] + party.spread * cfg.voter_spread * rng.normal(size=cfg.latent_dim)
            ans: list[float | None] = answers(x, cfg.voter_noise * rng.normal(size=nq), cfg.voter_slope)
            w = rng.choice(weight_vals, size=nq, p=weight_p)
            # coherent voters reuse one uniform for every position, so they answer a
            # prefix of the questionnaire; the per-position rate stays f(t) either way
            u = rng.random(nq)
            if rng.random() < cfg.drop_coherence:
                u[:] = u[0]
            kept = u < rates
            if not kept.any():
                kept[int(rng.integers(nq))] = True
            ans = [a if k else None for a, k in zip(ans, kept)]
            weights = [float(x) if k else 0.0 for x, k in zip(w, kept)]
            u = rng.random(2)
            if u[0] < cfg.preferred_missing:
                pref = None
            elif u[1] < cfg.preferred_noise and len(names) > 1:
                others = [n for n in names if n != party.name]
                pref = others[int(rng.integers(len(others)))]
            else:
                pref = party.name
            voters.append(Voter(f"v{i:06d}", state.name, Profile(tuple(ans), tuple(weights)), pref,
                                i, cfg.election_id))
            i += 1

    return Election(
        questions=tuple(questions),
        states={s.name: s.seats for s in cfg.states},
        candidates=tuple(candidates),
        voters=tuple(voters),
        lists=tuple(lists),
        parties=tuple(Party(p.name, p.name, p.vote_share, p.youth_of) for p in cfg.parties),
    )


@dataclass
class ElectionSummary:
    states: list[dict[str, Any]]
    parties: list[dict[str, Any]]
    completeness: list[dict[str, Any]]
    answer_rates: list[float]
    mean_completeness: float | None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def describe_election(election: Election, bins: int = 10) -> ElectionSummary:
    """Per-state sizes, party shares, voter completeness and per-position answer rates."""
    states = []
    for s, seats in election.states.items():
        states.append({
            "state": s,
            "seats": seats,
            "n_candidates": int(len(election.candidate_rows(s))),
            "n_voters": int(len(election.voter_rows(s))),
            "n_lists": len(election.lists_in(s)),
        })
    n_c = len(election.candidates)
    shares = election.party_vote_shares or {}
    prefs = [v.preferred_party for v in election.voters if v.preferred_party is not None]
    parties = []
    for p in election.party_ids:
        n = sum(1 for c in election.candidates if c.party == p)
        parties.append({
            "party": p,
            "n_candidates": n,
            "candidate_share": n / n_c if n_c else 0.0,
            "vote_share": shares.get(p),
            "preferred_share": (prefs.count(p) / len(prefs)) if prefs else None,
        })
    if not election.voters:
        return ElectionSummary(states, parties, [], [], None)
    answered = ~np.isnan(election.voter_answers)
    frac = answered.mean(axis=1)
    counts, edges = np.histogram(frac, bins=bins, range=(0.0, 1.0))
    completeness = [
        {"lo": float(edges[i]), "hi": float(edges[i + 1]), "count": int(counts[i])} for i in range(bins)
    ]
    return ElectionSummary(states, parties, completeness, answered.mean(axis=0).tolist(), float(frac.mean()))
