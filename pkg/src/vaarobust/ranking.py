"""Rankings, k-visibility and recommendation-level mitigations."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .matching import (
    MatchingMethod,
    Method,
    PrecisionContext,
    as_method,
    build_precision_context,
    pairwise_distances,
    similarity_score,
)
from .model import Election, Profile, Voter, default_k

KEY_DECIMALS = 9


class TieBreak(str, enum.Enum):
    LEXICOGRAPHIC = "lexicographic"
    SEEDED = "seeded"
    PROPORTIONAL = "proportional"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class TieBreakPolicy:
    """How exact-distance ties are resolved.

    LEXICOGRAPHIC orders tied candidates by sort key (bytewise), SEEDED shuffles
    each tie class with a stream derived from (seed, voter id), PROPORTIONAL
    splits the remaining top-k slots equally over the boundary tie class and is
    only meaningful for visibility accounting.
    """

    tag: TieBreak = TieBreak.LEXICOGRAPHIC
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tag", TieBreak(self.tag))
        if self.tag is TieBreak.SEEDED and self.seed is None:
            raise ValueError("seeded tie-breaking needs a seed")


LEXICOGRAPHIC = TieBreakPolicy(TieBreak.LEXICOGRAPHIC)
PROPORTIONAL = TieBreakPolicy(TieBreak.PROPORTIONAL)


def seeded(seed: int) -> TieBreakPolicy:
    return TieBreakPolicy(TieBreak.SEEDED, seed)


def as_tiebreak(policy: TieBreakPolicy | TieBreak | str | None, seed: int | None = None) -> TieBreakPolicy:
    if policy is None:
        return LEXICOGRAPHIC
    if isinstance(policy, TieBreakPolicy):
        return policy
    return TieBreakPolicy(TieBreak(str(policy).lower()), seed)


def voter_stream(seed: int, voter_id: str) -> np.random.Generator:
    digest = hashlib.blake2b(voter_id.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "big")]))


def snap(d: np.ndarray) -> np.ndarray:
    """Comparison keys: distances rounded so algebraically equal values tie."""
    return np.round(d, KEY_DECIMALS)


@dataclass(frozen=True)
class RankedEntry:
    id: str
    score: float
    distance: float
    flagged: bool = False


@dataclass(frozen=True)
class Ranking:
    """Ordered recommendations of one voter.

    Entries are ordered by the matching method's distance; ``score`` is the
    displayed similarity (mean similarity for lists).
    """

    voter_id: str
    entries: tuple[RankedEntry, ...]
    k: int
    kind: str = "candidate"

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def top(self, k: int | None = None) -> list[str]:
        return self.ids[: self.k if k is None else k]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class MitigationConfig:
    deal_breaker: bool = False
    party_cap: bool = False
    relative_normalization: bool = False
    mean_vector_list_score: bool = False

    @classmethod
    def parse(cls, spec: str | Iterable[str] | None) -> MitigationConfig:
        if not spec:
            return cls()
        names = spec.split(",") if isinstance(spec, str) else list(spec)
        flags = {n.strip().replace("-", "_") for n in names if n.strip()}
        unknown = flags - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown mitigations: {sorted(unknown)}")
        return cls(**{f: True for f in flags})


# --------------------------------------------------------------------------
# batch engine


@dataclass
class StateBlock:
    """Distances of every included voter of a state to every candidate of that state."""

    state: str
    k: int
    cand_rows: np.ndarray
    voter_rows: np.ndarray
    distances: np.ndarray
    active: np.ndarray

    @property
    def keys(self) -> np.ndarray:
        return snap(self.distances)


def state_context(
    election: Election,
    state: str,
    method: MatchingMethod,
    candidate_answers: np.ndarray | None = None,
) -> PrecisionContext | None:
    """Precision context for Mahalanobis; per state unless the method asks for the global one.

    A pool with fewer than two candidates falls back to the identity precision.
    """
    if method.tag is not Method.MAHALANOBIS:
        return None
    C = election.candidate_answers if candidate_answers is None else candidate_answers
    if not method.global_covariance:
        C = C[election.candidate_rows(state)]
    if C.shape[0] < 2:
        q = election.n_questions
        return PrecisionContext(C, np.zeros((q, q)), np.eye(q), 1.0)
    return build_precision_context(C, method.ridge)


def match_state(
    election: Election,
    state: str,
    method: MatchingMethod | Method | str,
    *,
    k: int | None = None,
    candidate_answers: np.ndarray | None = None,
    voter_weights: np.ndarray | None = None,
    include: np.ndarray | None = None,
    ctx: PrecisionContext | None = None,
) -> StateBlock:
    """Evaluate one state.

    ``candidate_answers`` and ``voter_weights`` replace the election's full
    arrays (rows aligned with ``election.candidates`` / ``election.voters``);
    ``include`` is a boolean mask restricting the voters.
    """
    m = as_method(method)
    C_all = election.candidate_answers if candidate_answers is None else candidate_answers
    W_all = election.voter_weights if voter_weights is None else voter_weights
    cand_rows = election.candidate_rows(state)
    voter_rows = election.voter_rows(state)
    if include is not None:
        voter_rows = voter_rows[include[voter_rows]]
    if ctx is None:
        ctx = state_context(election, state, m, C_all)
    V = election.voter_answers[voter_rows]
    W = W_all[voter_rows]
    D = pairwise_distances(m, V, W, C_all[cand_rows], election.scales, ctx)
    active = ~np.isnan(D).all(axis=1) if D.shape[1] else (W > 0).any(axis=1)
    kk = default_k(election, state, "candidate", k)
    return StateBlock(state, kk, cand_rows, voter_rows, D, active)


def match_election(
    election: Election,
    method: MatchingMethod | Method | str,
    *,
    k: int | None = None,
    candidate_answers: np.ndarray | None = None,
    voter_weights: np.ndarray | None = None,
    include: np.ndarray | None = None,
    states: Iterable[str] | None = None,
) -> dict[str, StateBlock]:
    m = as_method(method)
    C_all = election.candidate_answers if candidate_answers is None else candidate_answers
    global_ctx = None
    if m.tag is Method.MAHALANOBIS and m.global_covariance:
        global_ctx = state_context(election, "", m, C_all)
    return {
        s: match_state(
            election, s, m, k=k, candidate_answers=C_all, voter_weights=voter_weights,
            include=include, ctx=global_ctx,
        )
        for s in (election.states if states is None else states)
    }


def sort_ranks(keys: Sequence[str]) -> np.ndarray:
    """Position of each key in bytewise (code point) order."""
    order = sorted(range(len(keys)), key=lambda i: (keys[i], i))
    rank = np.empty(len(keys), dtype=np.int64)
    rank[order] = np.arange(len(keys))
    return rank


def _seeded_priorities(voter_ids: Sequence[str], n: int, seed: int) -> np.ndarray:
    return np.array([voter_stream(seed, vid).permutation(n) for vid in voter_ids], dtype=np.int64).reshape(-1, n)


def topk_credit(
    keys: np.ndarray,
    k: int,
    policy: TieBreakPolicy,
    tie_rank: np.ndarray,
    voter_ids: Sequence[str] = (),
) -> np.ndarray:
    """Top-k membership credit of each (voter, entity); rows sum to min(k, n_entities)."""
    n_v, n_c = keys.shape
    credit = np.zeros((n_v, n_c))
    if n_c == 0 or n_v == 0:
        return credit
    if k >= n_c:
        credit[:] = 1.0
        return credit
    if policy.tag is TieBreak.PROPORTIONAL:
        tau = np.partition(keys, k - 1, axis=1)[:, k - 1][:, None]
        less = keys < tau
        eq = keys == tau
        share = (k - less.sum(axis=1)) / eq.sum(axis=1)
        return less + eq * share[:, None]
    if policy.tag is TieBreak.LEXICOGRAPHIC:
        secondary = np.broadcast_to(tie_rank, keys.shape)
    else:
        secondary = _seeded_priorities(voter_ids, n_c, policy.seed)
    order = np.lexsort((secondary, keys), axis=1)[:, :k]
    np.put_along_axis(credit, order, 1.0, axis=1)
    return credit


def block_credit(election: Election, block: StateBlock, policy: TieBreakPolicy, k: int | None = None) -> np.ndarray:
    kk = block.k if k is None else k
    cands = [election.candidates[i] for i in block.cand_rows]
    ranks = sort_ranks([c.sort_key for c in cands])
    ids = [election.voters[i].id for i in block.voter_rows[block.active]]
    out = np.zeros(block.distances.shape)
    out[block.active] = topk_credit(block.keys[block.active], kk, policy, ranks, ids)
    return out


@dataclass
class VisibilityTable:
    """k-visibility per entity.

    ``values`` maps entity id to visibility within its state; for parties it
    holds the national figure (mean over all included voters) and
    ``by_state`` the per-state fractions.
    """

    kind: str
    values: dict[str, float]
    state_of: dict[str, str]
    k: dict[str, int]
    by_state: dict[str, dict[str, float]] = field(default_factory=dict)
    n_voters: dict[str, int] = field(default_factory=dict)
    n_excluded: dict[str, int] = field(default_factory=dict)

    def __getitem__(self, entity: str) -> float:
        return self.values[entity]

    def rows(self) -> list[tuple[str, str, str, str, float]]:
        out = []
        if self.kind == "party":
            for state, vals in self.by_state.items():
                for ent, v in vals.items():
                    out.append((ent, state, self.kind, str(self.k[state]), v))
            for ent, v in self.values.items():
                out.append((ent, "ALL", self.kind, "", v))
        else:
            for ent, v in self.values.items():
                s = self.state_of[ent]
                out.append((ent, s, self.kind, str(self.k[s]), v))
        return out

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["entity_id", "state", "kind", "k", "visibility"])
        for ent, s, kind, k, v in self.rows():
            w.writerow([ent, s, kind, k, repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def candidate_visibility(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k_override: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    blocks: Mapping[str, StateBlock] | None = None,
) -> VisibilityTable:
    """Fraction of same-state voters whose top-k contains each candidate.

    Voters without any positively weighted question receive no recommendation
    and are left out of the denominator (counted in ``n_excluded``).
    """
    policy = as_tiebreak(tiebreak)
    if blocks is None:
        blocks = match_election(election, method, k=k_override)
    values, state_of, ks, nv, nx = {}, {}, {}, {}, {}
    for s, b in blocks.items():
        kk = b.k if k_override is None else k_override
        credit = block_credit(election, b, policy, kk)
        n_act = int(b.active.sum())
        vis = credit[b.active].sum(axis=0) / n_act if n_act else np.full(len(b.cand_rows), np.nan)
        for j, row in enumerate(b.cand_rows):
            cid = election.candidates[row].id
            values[cid] = float(vis[j])
            state_of[cid] = s
        ks[s], nv[s], nx[s] = kk, n_act, int((~b.active).sum())
    return VisibilityTable("candidate", values, state_of, ks, n_voters=nv, n_excluded=nx)


def party_shares_per_voter(election: Election, block: StateBlock, credit: np.ndarray, parties: Sequence[str]) -> np.ndarray:
    """(n_active, n_parties) fraction of each active voter's top-k held by each party."""
    onehot = np.zeros((len(block.cand_rows), len(parties)))
    pidx = {p: i for i, p in enumerate(parties)}
    for j, row in enumerate(block.cand_rows):
        onehot[j, pidx[election.candidates[row].party]] = 1.0
    c = credit[block.active]
    held = c @ onehot
    tot = c.sum(axis=1, keepdims=True)
    return np.divide(held, tot, out=np.zeros_like(held), where=tot > 0)


def party_visibility(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k_override: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    blocks: Mapping[str, StateBlock] | None = None,
) -> VisibilityTable:
    """Fraction of top-k slots held by each party, per state and nationally.

    The national figure averages the per-voter slot fractions over all
    included voters of all states.
    """
    policy = as_tiebreak(tiebreak)
    if blocks is None:
        blocks = match_election(election, method, k=k_override)
    parties = election.party_ids
    total = np.zeros(len(parties))
    n_total = 0
    by_state, ks, nv, nx = {}, {}, {}, {}
    for s, b in blocks.items():
        kk = b.k if k_override is None else k_override
        credit = block_credit(election, b, policy, kk)
        shares = party_shares_per_voter(election, b, credit, parties)
        present = {election.candidates[r].party for r in b.cand_rows}
        n_act = shares.shape[0]
        if n_act:
            mean = shares.mean(axis=0)
            by_state[s] = {p: float(mean[i]) for i, p in enumerate(parties) if p in present}
        else:
            by_state[s] = {p: math.nan for p in parties if p in present}
        total += shares.sum(axis=0)
        n_total += n_act
        ks[s], nv[s], nx[s] = kk, n_act, int((~b.active).sum())
    national = {p: (float(total[i] / n_total) if n_total else math.nan) for i, p in enumerate(parties)}
    return VisibilityTable("party", national, {}, ks, by_state=by_state, n_voters=nv, n_excluded=nx)


def list_membership(election: Election, state: str, cand_rows: np.ndarray):
    lists = election.lists_in(state)
    pos = {election.candidates[r].id: j for j, r in enumerate(cand_rows)}
    M = np.zeros((len(cand_rows), len(lists)))
    for li, lst in enumerate(lists):
        for m in lst.members:
            M[pos[m], li] = 1.0 / len(lst.members)
    return lists, M


def list_distances(
    election: Election,
    block: StateBlock,
    method: MatchingMethod | Method | str,
    score_mode: str = "mean_of_scores",
    candidate_answers: np.ndarray | None = None,
    voter_weights: np.ndarray | None = None,
):
    """(lists, distances) of every voter of the block to every list of its state.

    ``mean_of_scores`` averages member distances (for L2 this orders lists
    exactly like the mean of the displayed similarity scores);
    ``score_of_mean`` measures the distance to the members' mean answer vector.
    """
    lists, M = list_membership(election, block.state, block.cand_rows)
    if score_mode == "mean_of_scores":
        return lists, block.distances @ M
    if score_mode != "score_of_mean":
        raise ValueError(f"unknown list score mode {score_mode!r}")
    m = as_method(method)
    C_all = election.candidate_answers if candidate_answers is None else candidate_answers
    W_all = election.voter_weights if voter_weights is None else voter_weights
    means = M.T @ C_all[block.cand_rows]
    ctx = state_context(election, block.state, m, C_all)
    D = pairwise_distances(m, election.voter_answers[block.voter_rows], W_all[block.voter_rows],
                           means, election.scales, ctx)
    return lists, D


def list_visibility(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k: int = 1,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    score_mode: str = "mean_of_scores",
    blocks: Mapping[str, StateBlock] | None = None,
) -> VisibilityTable:
    policy = as_tiebreak(tiebreak)
    if blocks is None:
        blocks = match_election(election, method)
    values, state_of, ks, nv, nx = {}, {}, {}, {}, {}
    for s, b in blocks.items():
        lists, D = list_distances(election, b, method, score_mode)
        ranks = sort_ranks([lst.id for lst in lists])
        ids = [election.voters[i].id for i in b.voter_rows[b.active]]
        credit = topk_credit(snap(D[b.active]), k, policy, ranks, ids)
        n_act = int(b.active.sum())
        vis = credit.sum(axis=0) / n_act if n_act else np.full(len(lists), np.nan)
        for j, lst in enumerate(lists):
            values[lst.id] = float(vis[j])
            state_of[lst.id] = s
        ks[s], nv[s], nx[s] = k, n_act, int((~b.active).sum())
    return VisibilityTable("list", values, state_of, ks, n_voters=nv, n_excluded=nx)


# --------------------------------------------------------------------------
# single-voter rankings


def _voter_arrays(voter: Voter) -> tuple[np.ndarray, np.ndarray]:
    return voter.profile.answer_array()[None, :], voter.profile.weight_array()[None, :]


def _similarities(voter: Voter, C: np.ndarray) -> np.ndarray:
    V, W = _voter_arrays(voter)
    W = np.where(np.isnan(V), 0.0, W)
    denom = 100.0 * math.sqrt(float((W * W).sum()))
    if denom == 0:
        return np.full(C.shape[0], np.nan)
    d = np.sqrt((((np.nan_to_num(V) - C) * W) ** 2).sum(axis=1))
    return 100.0 * (1.0 - d / denom)


def _order(keys: np.ndarray, sort_rank: np.ndarray, policy: TieBreakPolicy, voter_id: str) -> np.ndarray:
    if policy.tag is TieBreak.PROPORTIONAL:
        raise ValueError("proportional credit does not produce a single ranking")
    n = len(keys)
    flagged = np.isnan(keys)
    k = np.where(flagged, np.inf, keys)
    if policy.tag is TieBreak.SEEDED:
        prio = voter_stream(policy.seed, voter_id).permutation(n)
        # flagged entries stay in sort-key order
        prio = np.where(flagged, n + sort_rank, prio)
    else:
        prio = sort_rank
    return np.lexsort((prio, k))


def rank_candidates(
    voter: Voter,
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    tiebreak: TieBreakPolicy | str | None = None,
    k: int | None = None,
) -> Ranking:
    """All candidates of the voter's state by ascending distance."""
    m = as_method(method)
    policy = as_tiebreak(tiebreak)
    rows = election.candidate_rows(voter.state)
    if len(rows) == 0:
        raise ValueError(f"state {voter.state!r} has no candidates")
    C = election.candidate_answers[rows]
    V, W = _voter_arrays(voter)
    ctx = state_context(election, voter.state, m)
    D = pairwise_distances(m, V, W, C, election.scales, ctx)[0]
    cands = [election.candidates[r] for r in rows]
    ranks = sort_ranks([c.sort_key for c in cands])
    order = _order(snap(D), ranks, policy, voter.id)
    sims = _similarities(voter, C)
    entries = tuple(
        RankedEntry(cands[j].id, float(sims[j]), float(D[j]), bool(np.isnan(D[j]))) for j in order
    )
    return Ranking(voter.id, entries, default_k(election, voter.state, "candidate", k))


def rank_lists(
    voter: Voter,
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    score_mode: str = "mean_of_scores",
    tiebreak: TieBreakPolicy | str | None = None,
) -> Ranking:
    """Lists of the voter's state; score is the mean member similarity or the similarity to the mean."""
    m = as_method(method)
    policy = as_tiebreak(tiebreak)
    rows = election.candidate_rows(voter.state)
    lists = election.lists_in(voter.state)
    if not lists:
        raise ValueError(f"state {voter.state!r} has no lists")
    V, W = _voter_arrays(voter)
    C = election.candidate_answers[rows]
    ctx = state_context(election, voter.state, m)
    block = StateBlock(voter.state, 1, rows, np.zeros(1, dtype=int),
                       pairwise_distances(m, V, W, C, election.scales, ctx), np.array([True]))
    _, M = list_membership(election, voter.state, rows)
    if score_mode == "mean_of_scores":
        D = (block.distances @ M)[0]
        scores = _similarities(voter, C) @ M
    else:
        means = M.T @ C
        D = pairwise_distances(m, V, W, means, election.scales, ctx)[0]
        scores = _similarities(voter, means)
    ranks = sort_ranks([lst.id for lst in lists])
    order = _order(snap(D), ranks, policy, voter.id)
    entries = tuple(
        RankedEntry(lists[j].id, float(scores[j]), float(D[j]), bool(np.isnan(D[j]))) for j in order
    )
    return Ranking(voter.id, entries, 1, kind="list")


def deal_breaker_rank(
    voter: Voter,
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    tiebreak: TieBreakPolicy | str | None = None,
    k: int | None = None,
) -> Ranking:
    """Rank by number of disagreements on infinitely weighted questions, then by distance.

    The secondary distance treats infinite weights as 1. Nobody is filtered out.
    """
    m = as_method(method)
    policy = as_tiebreak(tiebreak)
    answers = voter.profile.answer_array()
    weights = voter.profile.weight_array()
    hard = np.isinf(weights) & ~np.isnan(answers)
    base = Voter(voter.id, voter.state,
                 Profile(voter.profile.answers, tuple(np.where(np.isinf(weights), 1.0, weights))),
                 voter.preferred_party, voter.timestamp, voter.election_id)
    rows = election.candidate_rows(voter.state)
    C = election.candidate_answers[rows]
    V, W = _voter_arrays(base)
    ctx = state_context(election, voter.state, m)
    D = pairwise_distances(m, V, W, C, election.scales, ctx)[0]
    disagreements = (C[:, hard] != answers[hard]).sum(axis=1)
    cands = [election.candidates[r] for r in rows]
    ranks = sort_ranks([c.sort_key for c in cands])
    keys = snap(D)
    flagged = np.isnan(keys)
    if policy.tag is TieBreak.SEEDED:
        prio = voter_stream(policy.seed, voter.id).permutation(len(rows))
    elif policy.tag is TieBreak.PROPORTIONAL:
        raise ValueError("proportional credit does not produce a single ranking")
    else:
        prio = ranks
    order = np.lexsort((prio, np.where(flagged, np.inf, keys), disagreements))
    sims = _similarities(base, C)
    entries = tuple(RankedEntry(cands[j].id, float(sims[j]), float(D[j]), bool(flagged[j])) for j in order)
    return Ranking(voter.id, entries, default_k(election, voter.state, "candidate", k))


def largest_remainder(shares: Mapping[str, float], seats: int, capacity: Mapping[str, int]) -> dict[str, int]:
    """Apportion ``seats`` proportionally to ``shares`` with per-party capacity.

    Seats a party cannot fill cascade to the next-largest remainder.
    """
    parties = list(shares)
    total = sum(shares.values())
    if total <= 0:
        quotas = {p: seats / len(parties) for p in parties}
    else:
        quotas = {p: seats * shares[p] / total for p in parties}
    alloc = {p: min(int(math.floor(quotas[p] + 1e-12)), capacity[p]) for p in parties}
    order = sorted(parties, key=lambda p: (-(quotas[p] - math.floor(quotas[p] + 1e-12)), -shares[p], p))
    left = seats - sum(alloc.values())
    while left > 0:
        progressed = False
        for p in order:
            if left == 0:
                break
            if alloc[p] < capacity[p]:
                alloc[p] += 1
                left -= 1
                progressed = True
        if not progressed:
            break
    return alloc


def party_mean_similarity(voter: Voter, election: Election) -> dict[str, float]:
    """Similarity between the voter and each party's mean answers over the voter's state."""
    rows = election.candidate_rows(voter.state)
    by_party: dict[str, list[int]] = {}
    for r in rows:
        by_party.setdefault(election.candidates[r].party, []).append(r)
    out = {}
    for p, rs in by_party.items():
        mean = election.candidate_answers[rs].mean(axis=0)
        try:
            out[p] = similarity_score(voter.profile, Profile.complete(mean))
        except ValueError:
            out[p] = 0.0
    return out


def cap_party_topk(voter: Voter, ranking: Ranking, election: Election, k: int | None = None) -> Ranking:
    """Re-select the top-k so that party slots follow the voter's party-mean similarities."""
    kk = default_k(election, voter.state, "candidate", k)
    party_of = {c.id: c.party for c in election.candidates}
    members: dict[str, list[str]] = {}
    for cid in ranking.ids:
        members.setdefault(party_of[cid], []).append(cid)
    sims = party_mean_similarity(voter, election)
    shares = {p: max(sims.get(p, 0.0), 0.0) for p in members}
    alloc = largest_remainder(shares, min(kk, len(ranking)), {p: len(v) for p, v in members.items()})
    chosen = {cid for p, ids in members.items() for cid in ids[: alloc[p]]}
    head = [e for e in ranking.entries if e.id in chosen]
    tail = [e for e in ranking.entries if e.id not in chosen]
    return Ranking(ranking.voter_id, tuple(head + tail), kk, ranking.kind)


def relative_score_normalization(ranking: Ranking) -> Ranking:
    """Scale displayed scores so the best one reads 100."""
    scores = [e.score for e in ranking.entries if not math.isnan(e.score)]
    if not scores:
        return ranking
    top = max(scores)
    if top == 0:
        entries = tuple(replace(e, score=100.0 if not math.isnan(e.score) else e.score) for e in ranking.entries)
    else:
        entries = tuple(replace(e, score=e.score * 100.0 / top) for e in ranking.entries)
    return Ranking(ranking.voter_id, entries, ranking.k, ranking.kind)


def recommend(
    voter: Voter,
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    tiebreak: TieBreakPolicy | str | None = None,
    mitigations: MitigationConfig | None = None,
    k: int | None = None,
) -> tuple[Ranking, Ranking | None]:
    """Candidate ranking and list ranking of one voter with the chosen mitigations applied."""
    mit = mitigations or MitigationConfig()
    if mit.deal_breaker:
        cands = deal_breaker_rank(voter, election, method, tiebreak, k)
    else:
        cands = rank_candidates(voter, election, method, tiebreak, k)
    if mit.party_cap:
        cands = cap_party_topk(voter, cands, election, k)
    if mit.relative_normalization:
        cands = relative_score_normalization(cands)
    lists = None
    if election.lists_in(voter.state):
        mode = "score_of_mean" if mit.mean_vector_list_score else "mean_of_scores"
        lists = rank_lists(voter, election, method, mode, tiebreak)
    return cands, lists
