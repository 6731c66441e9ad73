"""Bias, calibration, answer-strength, inequality and accuracy metrics per matching method."""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .attacks import CalibrationDirection, calibrate_matrix, pearson_or_none, rematch
from .matching import ALL_METHODS, METHOD_LABELS, MatchingMethod, Method, as_method
from .model import AnswerScale, Election, Profile
from .ranking import (
    LEXICOGRAPHIC,
    StateBlock,
    TieBreakPolicy,
    as_tiebreak,
    block_credit,
    candidate_visibility,
    list_distances,
    match_election,
    party_visibility,
    snap,
    sort_ranks,
)


class UndefinedMetricError(ValueError):
    """The metric has no meaningful value on this input."""


# --------------------------------------------------------------------------
# scalar building blocks


def answer_strength(profile: Profile | Sequence[float], scales: Sequence[AnswerScale]) -> float:
    """Mean absolute deviation of the answers from each scale's neutral."""
    answers = profile.answers if isinstance(profile, Profile) else tuple(profile)
    if any(a is None or (isinstance(a, float) and math.isnan(a)) for a in answers):
        raise ValueError("answer strength needs a complete profile")
    if len(answers) != len(scales):
        raise ValueError("profile and scales differ in length")
    return math.fsum(abs(a - s.neutral) for a, s in zip(answers, scales)) / len(answers)


def expectation_normalized_visibility(visibility: float, n_candidates: int, seats: int) -> float:
    if seats < 1:
        raise ValueError("seats must be >= 1")
    return visibility * n_candidates / seats


def gini(values: Sequence[float]) -> float:
    """Population Gini coefficient, sum |x_i - x_j| / (2 n^2 mean)."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0 or (x < 0).any():
        raise UndefinedMetricError("gini needs non-negative values")
    total = math.fsum(x)
    if total <= 0:
        raise UndefinedMetricError("gini of all-zero values is undefined")
    n = x.size
    # sum_{i<j} (x_j - x_i) via the sorted-index identity
    i = np.arange(1, n + 1)
    pair_sum = math.fsum((2 * i - n - 1) * x)
    return float(pair_sum / (n * total))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    r = pearson_or_none(x, y)
    if r is None:
        raise UndefinedMetricError("correlation undefined (constant series or fewer than two points)")
    return r


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class MetricConfig:
    parties: tuple[str, ...] | None = None
    vote_shares: Mapping[str, float] | None = None
    k: int | None = None
    strong_weight: float | None = None
    tiebreak: TieBreakPolicy | str | None = None
    n_largest: int = 8

    def __post_init__(self) -> None:
        if self.parties is not None and not self.parties:
            raise ValueError("BIA party set must not be empty")
        if self.vote_shares is not None:
            if any(v < 0 for v in self.vote_shares.values()) or math.fsum(self.vote_shares.values()) > 1 + 1e-9:
                raise ValueError("CP weights must be non-negative and sum to at most 1")

    def bia_parties(self, election: Election) -> tuple[str, ...]:
        if self.parties is not None:
            return tuple(self.parties)
        shares = self.shares(election)
        if shares:
            ranked = sorted(shares, key=lambda p: (-shares[p], p))
            return tuple(ranked[: self.n_largest])
        return tuple(election.party_ids)

    def shares(self, election: Election) -> dict[str, float]:
        if self.vote_shares is not None:
            return dict(self.vote_shares)
        return dict(election.party_vote_shares or {})

    def strong(self, election: Election) -> float:
        return max(election.weight_set) if self.strong_weight is None else self.strong_weight


# --------------------------------------------------------------------------
# BIA


@dataclass
class BiaResult:
    bia1: float
    bia2: float
    bia2_party: str
    deviations: dict[str, float]
    medians: dict[str, float]
    excluded: list[str]


def bia(
    method: str,
    visibilities: Mapping[str, Mapping[str, float]],
    parties: Sequence[str],
) -> BiaResult:
    """Relative deviation of ``method``'s party visibilities from the median of the other methods.

    ``visibilities`` maps method name to party to visibility. Parties whose
    median is zero are excluded and reported.
    """
    others = [m for m in visibilities if m != method]
    if not others:
        raise UndefinedMetricError("no other methods to form a median")
    if not parties:
        raise ValueError("party set must not be empty")
    own = visibilities[method]
    devs, meds, excluded = {}, {}, []
    for p in parties:
        med = statistics.median(visibilities[m].get(p, 0.0) for m in others)
        meds[p] = med
        if med == 0 or math.isnan(med):
            excluded.append(p)
            continue
        devs[p] = (own.get(p, 0.0) - med) / med
    if not devs:
        raise UndefinedMetricError("every party has zero median visibility")
    # first party in the given order wins ties on |deviation|
    top = max(devs, key=lambda p: abs(devs[p]))
    return BiaResult(math.fsum(abs(d) for d in devs.values()) / len(devs), devs[top], top, devs, meds, excluded)


# --------------------------------------------------------------------------
# CP


@dataclass
class CalibrationPotential:
    value: float
    per_party: dict[str, float]
    excluded: list[str]


def calibration_potential(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    direction: CalibrationDirection | str = CalibrationDirection.MODERATE,
    cfg: MetricConfig | None = None,
    k: int | None = None,
    *,
    baseline_blocks: Mapping[str, StateBlock] | None = None,
) -> CalibrationPotential:
    """Vote-share-weighted mean relative visibility change when each party calibrates alone."""
    cfg = cfg or MetricConfig()
    m = as_method(method)
    k = cfg.k if k is None else k
    shares = cfg.shares(election)
    if not shares:
        raise UndefinedMetricError("calibration potential needs vote-share weights")
    policy = as_tiebreak(cfg.tiebreak)
    if baseline_blocks is None:
        baseline_blocks = match_election(election, m, k=k)
    base = party_visibility(election, m, k, policy, blocks=baseline_blocks).values
    fielded = {c.party for c in election.candidates}
    per_party, excluded = {}, []
    for p, w in shares.items():
        if p not in fielded or w <= 0:
            continue
        b = base.get(p, math.nan)
        if not b > 0:
            excluded.append(p)
            continue
        rows = np.array([i for i, c in enumerate(election.candidates) if c.party == p])
        C = calibrate_matrix(election.candidate_answers, rows, election.scales, direction)
        blocks = rematch(election, m, baseline_blocks, C, rows)
        after = party_visibility(election, m, k, policy, blocks=blocks).values[p]
        per_party[p] = (after - b) / b
    if not per_party:
        raise UndefinedMetricError("no party with positive baseline visibility and weight")
    total_w = math.fsum(shares[p] for p in per_party)
    value = math.fsum(shares[p] * r for p, r in per_party.items()) / total_w
    return CalibrationPotential(value, per_party, excluded)


# --------------------------------------------------------------------------
# ASC and GIN


def normalized_candidate_visibility(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    blocks: Mapping[str, StateBlock] | None = None,
) -> dict[str, float]:
    """Expectation-normalized visibility of every candidate in a state with voters."""
    table = candidate_visibility(election, method, k, tiebreak, blocks=blocks)
    n_c = {s: len(election.candidate_rows(s)) for s in election.states}
    return {
        cid: expectation_normalized_visibility(v, n_c[table.state_of[cid]], table.k[table.state_of[cid]])
        for cid, v in table.values.items()
        if not math.isnan(v)
    }


def asc(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    normalized: Mapping[str, float] | None = None,
) -> float:
    """Pearson correlation, pooled over states, between answer strength and normalized visibility."""
    if normalized is None:
        normalized = normalized_candidate_visibility(election, method, k, tiebreak)
    scales = election.scales
    idx = election.candidate_index
    ids = list(normalized)
    strength = [answer_strength(election.candidates[idx[c]].profile, scales) for c in ids]
    return pearson(strength, [normalized[c] for c in ids])


def gin(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    normalized: Mapping[str, float] | None = None,
) -> float:
    if normalized is None:
        normalized = normalized_candidate_visibility(election, method, k, tiebreak)
    return gini(list(normalized.values()))


# --------------------------------------------------------------------------
# accuracy


def _list_order(election: Election, block: StateBlock, method, policy: TieBreakPolicy):
    """(lists, positions): 0-based rank of every list for every active voter of the block."""
    lists, D = list_distances(election, block, method, "mean_of_scores")
    keys = snap(D[block.active])
    if policy.tag.value == "seeded":
        from .ranking import voter_stream

        ids = [election.voters[i].id for i in block.voter_rows[block.active]]
        secondary = np.array([voter_stream(policy.seed, v).permutation(len(lists)) for v in ids]).reshape(keys.shape)
    else:
        secondary = np.broadcast_to(sort_ranks([lst.id for lst in lists]), keys.shape)
    order = np.lexsort((secondary, keys), axis=1)
    pos = np.empty_like(order)
    np.put_along_axis(pos, order, np.arange(keys.shape[1])[None, :].repeat(keys.shape[0], axis=0), axis=1)
    return lists, pos


def _preferences(election: Election, block: StateBlock) -> list[str | None]:
    return [election.voters[i].preferred_party for i in block.voter_rows[block.active]]


@dataclass
class AccuracyResult:
    value: float
    n_voters: int
    n_excluded: int


def acc1(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    blocks: Mapping[str, StateBlock] | None = None,
) -> AccuracyResult:
    """Share of voters with a stated preference whose top list belongs to that party."""
    policy = as_tiebreak(tiebreak)
    if policy.tag.value == "proportional":
        policy = LEXICOGRAPHIC
    if blocks is None:
        blocks = match_election(election, method)
    hits, n, excluded = 0, 0, 0
    for b in blocks.values():
        lists = election.lists_in(b.state)
        prefs = _preferences(election, b)
        if not lists:
            excluded += sum(p is not None for p in prefs)
            continue
        lists, pos = _list_order(election, b, method, policy)
        for row, pref in enumerate(prefs):
            if pref is None:
                continue
            top = lists[int(np.argmin(pos[row]))]
            hits += top.party == pref
            n += 1
    if n == 0:
        raise UndefinedMetricError("no voter with a stated preferred party")
    return AccuracyResult(hits / n, n, excluded)


def acc2(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    blocks: Mapping[str, StateBlock] | None = None,
) -> AccuracyResult:
    """Mean normalized rank (rank - 1) / (lists - 1) of the preferred party's best list."""
    policy = as_tiebreak(tiebreak)
    if policy.tag.value == "proportional":
        policy = LEXICOGRAPHIC
    if blocks is None:
        blocks = match_election(election, method)
    ranks: list[float] = []
    excluded = 0
    for b in blocks.values():
        prefs = _preferences(election, b)
        lists = election.lists_in(b.state)
        if len(lists) < 2:
            excluded += sum(p is not None for p in prefs)
            continue
        lists, pos = _list_order(election, b, method, policy)
        party_cols: dict[str, np.ndarray] = {}
        for j, lst in enumerate(lists):
            party_cols.setdefault(lst.party, []).append(j)
        for row, pref in enumerate(prefs):
            if pref is None:
                continue
            cols = party_cols.get(pref)
            if not cols:
                excluded += 1
                continue
            best = int(pos[row, cols].min())
            ranks.append(best / (len(lists) - 1))
    if not ranks:
        raise UndefinedMetricError("no voter qualifies for ACC2")
    return AccuracyResult(math.fsum(ranks) / len(ranks), len(ranks), excluded)


def acc3(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    cfg: MetricConfig | None = None,
    *,
    blocks: Mapping[str, StateBlock] | None = None,
) -> float:
    """Share of (voter, top-k candidate, strongly weighted question) triples on opposite sides."""
    cfg = cfg or MetricConfig()
    policy = as_tiebreak(cfg.tiebreak)
    k = cfg.k if k is None else k
    if blocks is None:
        blocks = match_election(election, method, k=k)
    strong_w = cfg.strong(election)
    neutral = np.array([s.neutral for s in election.scales])
    opposite_total, triples_total = [], []
    for b in blocks.values():
        if not b.active.any() or len(b.cand_rows) == 0:
            continue
        credit = block_credit(election, b, policy, k)[b.active]
        rows = b.voter_rows[b.active]
        V = election.voter_answers[rows]
        S = ((election.voter_weights[rows] == strong_w) & ~np.isnan(V)).astype(float)
        sv = np.sign(np.nan_to_num(V - neutral))
        sc = np.sign(election.candidate_answers[b.cand_rows] - neutral)
        opp = (S * (sv > 0)) @ (sc < 0).T + (S * (sv < 0)) @ (sc > 0).T
        opposite_total.append(float((credit * opp).sum()))
        triples_total.append(float((credit.sum(axis=1) * S.sum(axis=1)).sum()))
    denom = math.fsum(triples_total)
    if denom == 0:
        raise UndefinedMetricError("no (voter, top-k candidate, strong question) triples")
    return math.fsum(opposite_total) / denom


# --------------------------------------------------------------------------
# method comparison

COLUMNS = ("BIA1", "BIA2", "BIA2_party", "CP_M", "CP_S", "ASC", "GIN", "ACC1", "ACC2", "ACC3")
# +1: higher is better, -1: lower is better, 0: closer to zero is better, None: informational
DIRECTIONS = {"BIA1": 0, "BIA2": 0, "CP_M": -1, "CP_S": -1, "ASC": 0, "GIN": None,
              "ACC1": 1, "ACC2": -1, "ACC3": -1}


@dataclass
class MethodScorecard:
    method: str
    values: dict[str, float | str | None] = field(default_factory=dict)
    flags: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, col: str):
        return self.values.get(col)


@dataclass
class Scorecard:
    rows: list[MethodScorecard]
    best: dict[str, list[str]]
    worst: dict[str, list[str]]

    def row(self, method: str) -> MethodScorecard:
        return next(r for r in self.rows if r.method == method)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("method",) + COLUMNS)
        for r in self.rows:
            cells = []
            for c in COLUMNS:
                v = r.values.get(c)
                if v is None or (isinstance(v, float) and math.isnan(v)):
                    cells.append("")
                elif isinstance(v, str):
                    cells.append(v)
                else:
                    cells.append(repr(float(v)))
            w.writerow([r.method] + cells)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def markers(self) -> dict:
        return {"best": self.best, "worst": self.worst,
                "flags": {r.method: r.flags for r in self.rows if r.flags}}


def _safe(fn, flags: dict[str, str], *cols: str):
    try:
        return fn()
    except UndefinedMetricError as exc:
        for c in cols:
            flags[c] = str(exc)
        return None


def _method_cells(election: Election, method: MatchingMethod, cfg: MetricConfig):
    """Every metric except BIA for one method, plus the national party visibilities."""
    k = cfg.k
    policy = as_tiebreak(cfg.tiebreak)
    blocks = match_election(election, method, k=k)
    flags: dict[str, str] = {}
    vals: dict[str, float | str | None] = {}
    pvis = party_visibility(election, method, k, policy, blocks=blocks).values
    for col, direction in (("CP_M", CalibrationDirection.MODERATE), ("CP_S", CalibrationDirection.STRONG)):
        cp = _safe(lambda: calibration_potential(election, method, direction, cfg, k, baseline_blocks=blocks),
                   flags, col)
        vals[col] = None if cp is None else cp.value
        if cp is not None and cp.excluded:
            flags[col] = "excluded parties: " + ",".join(cp.excluded)
    norm = normalized_candidate_visibility(election, method, k, policy, blocks=blocks)
    vals["ASC"] = _safe(lambda: asc(election, method, normalized=norm), flags, "ASC")
    vals["GIN"] = _safe(lambda: gin(election, method, normalized=norm), flags, "GIN")
    r1 = _safe(lambda: acc1(election, method, policy, blocks=blocks), flags, "ACC1")
    vals["ACC1"] = None if r1 is None else r1.value
    r2 = _safe(lambda: acc2(election, method, policy, blocks=blocks), flags, "ACC2")
    vals["ACC2"] = None if r2 is None else r2.value
    vals["ACC3"] = _safe(lambda: acc3(election, method, k, cfg, blocks=blocks), flags, "ACC3")
    return vals, flags, pvis


def _mark(rows: list[MethodScorecard]) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
    best, worst = {}, {}
    for col, d in DIRECTIONS.items():
        if d is None:
            continue
        scored = [(r.method, r.values.get(col)) for r in rows]
        scored = [(m, float(v)) for m, v in scored if isinstance(v, (int, float)) and not math.isnan(v)]
        if len(scored) < 2:
            continue
        key = {1: lambda v: -v, -1: lambda v: v, 0: abs}[d]
        lo = min(key(v) for _, v in scored)
        hi = max(key(v) for _, v in scored)
        if lo == hi:
            continue
        best[col] = [m for m, v in scored if key(v) == lo]
        worst[col] = [m for m, v in scored if key(v) == hi]
    return best, worst


def method_comparison(
    election: Election,
    methods: Sequence[MatchingMethod | Method | str] = ALL_METHODS,
    cfg: MetricConfig | None = None,
    workers: int = 1,
) -> Scorecard:
    """Every metric for every method; methods run concurrently when ``workers`` > 1."""
    cfg = cfg or MetricConfig()
    ms = [as_method(m) for m in methods]
    names = [str(m) for m in ms]
    if len(set(names)) != len(names):
        raise ValueError("duplicate methods in comparison")

    def one(m):
        return _method_cells(election, m, cfg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, ms))
    else:
        results = [one(m) for m in ms]
    party_vis = {name: res[2] for name, res in zip(names, results)}
    parties = cfg.bia_parties(election)
    rows = []
    for name, (vals, flags, _) in zip(names, results):
        vals = dict(vals)
        flags = dict(flags)
        b = _safe(lambda: bia(name, party_vis, parties), flags, "BIA1", "BIA2")
        vals["BIA1"] = None if b is None else b.bia1
        vals["BIA2"] = None if b is None else b.bia2
        vals["BIA2_party"] = None if b is None else b.bia2_party
        if b is not None and b.excluded:
            flags["BIA1"] = "excluded parties: " + ",".join(b.excluded)
        rows.append(MethodScorecard(name, {c: vals.get(c) for c in COLUMNS}, flags))
    best, worst = _mark(rows)
    return Scorecard(rows, best, worst)


def method_label(method: str) -> str:
    return METHOD_LABELS.get(Method(method), method) if method in Method._value2member_map_ else method
