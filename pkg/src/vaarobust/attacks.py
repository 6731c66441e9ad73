"""Manipulation strategies and the experiments that measure them."""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .matching import (
    ANGULAR_FALLBACK,
    MatchingMethod,
    Method,
    PrecisionContext,
    as_method,
    encode_answers,
    pairwise_distances,
    question_tables,
)
from .model import (
    AnswerScale,
    Candidate,
    Election,
    Party,
    PartyList,
    Profile,
    Question,
    Voter,
    default_k,
)
from .ranking import (
    LEXICOGRAPHIC,
    PROPORTIONAL,
    StateBlock,
    TieBreakPolicy,
    as_tiebreak,
    block_credit,
    candidate_visibility,
    list_visibility,
    match_election,
    match_state,
    party_visibility,
    snap,
    state_context,
)

CRAFTED_SORT_KEY = "\U0010ffff"


# --------------------------------------------------------------------------
# configuration and report types


@dataclass(frozen=True)
class AnnealingConfig:
    iterations: int = 20_000
    initial_temperature: float = 0.05
    cooling_factor: float = 0.9995
    restarts: int = 4
    voter_subsample_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.cooling_factor < 1:
            raise ValueError("cooling_factor must be in (0, 1)")
        if self.initial_temperature <= 0:
            raise ValueError("initial_temperature must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0 < self.voter_subsample_fraction <= 1:
            raise ValueError("voter_subsample_fraction must be in (0, 1]")


class CalibrationDirection(str, enum.Enum):
    MODERATE = "moderate"
    STRONG = "strong"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class DropModel:
    """Probability f(t) that the question shown at position t (1-based) is answered."""

    intercept: float = 0.96
    slope: float = 0.0012
    mode: str = "fitted_linear"
    table: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("fitted_linear", "custom"):
            raise ValueError(f"unknown drop model mode {self.mode!r}")
        if self.mode == "custom":
            if not self.table:
                raise ValueError("custom drop model needs a table")
            if any(not 0 <= x <= 1 for x in self.table):
                raise ValueError("answer rates must lie in [0, 1]")

    @classmethod
    def constant(cls, rate: float, n: int) -> DropModel:
        return cls(mode="custom", table=(float(rate),) * n)

    def rate(self, t: int) -> float:
        if self.mode == "custom":
            return float(self.table[t - 1])
        return self.intercept - t * self.slope

    def rates(self, n: int) -> np.ndarray:
        r = np.array([self.rate(t) for t in range(1, n + 1)])
        if ((r < 0) | (r > 1)).any():
            raise ValueError(f"drop model leaves [0, 1] within {n} positions")
        return r


@dataclass
class AttackReport:
    scenario: str
    baseline: dict[str, float]
    attacked: dict[str, float]
    metadata: dict = field(default_factory=dict)
    extra: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def relative_change(self) -> dict[str, float | None]:
        """(attacked - baseline) / baseline; None where the baseline is zero or undefined."""
        out: dict[str, float | None] = {}
        for ent, b in self.baseline.items():
            a = self.attacked.get(ent, math.nan)
            if "rel_change" in self.extra and ent in self.extra["rel_change"]:
                r = self.extra["rel_change"][ent]
                out[ent] = None if r is None or math.isnan(r) else r
            elif b is None or math.isnan(b) or b <= 0 or math.isnan(a):
                out[ent] = None
            else:
                out[ent] = (a - b) / b
        return out

    @property
    def undefined(self) -> list[str]:
        return [e for e, r in self.relative_change.items() if r is None]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "entity", "baseline", "attacked", "rel_change"])
        rel = self.relative_change
        for ent, b in self.baseline.items():
            a = self.attacked.get(ent, math.nan)
            r = rel[ent]
            w.writerow([self.scenario, ent, _fmt(b), _fmt(a), "" if r is None else repr(float(r))])
        return buf.getvalue()

    def sidecar(self) -> dict:
        meta = dict(self.metadata)
        meta["scenario"] = self.scenario
        meta["undefined"] = self.undefined
        for name, vals in self.extra.items():
            meta[name] = {k: (None if v is None or (isinstance(v, float) and math.isnan(v)) else v)
                          for k, v in vals.items()}
        return meta

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        sidecar = path.with_name(path.name + ".meta.json")
        sidecar.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def _method_meta(method) -> str:
    return as_method(method).tag.value


# --------------------------------------------------------------------------
# answer optimization (AO)


def _thresholds(keys: np.ndarray, k: int) -> np.ndarray:
    """Key of each voter's k-th best real candidate; +inf when fewer than k exist."""
    n_v, n_c = keys.shape
    if n_c < k:
        return np.full(n_v, np.inf)
    return np.partition(keys, k - 1, axis=1)[:, k - 1]


class _AdditiveScorer:
    """Running per-voter distance of a crafted profile under an additive table method."""

    def __init__(self, method: MatchingMethod, V, W, scales):
        tables = question_tables(method, scales)
        vidx = encode_answers(V, scales)
        W = np.where(vidx >= 0, W, 0.0)
        feat = W * W if method.tag is Method.L2 else W
        safe = np.maximum(vidx, 0)
        self.cost = [(feat[:, t][:, None] * T[safe[:, t]]).T.copy() for t, T in enumerate(tables)]
        self.sqrt = method.tag is Method.L2

    def init(self, idx):
        self.s = np.sum([self.cost[t][a] for t, a in enumerate(idx)], axis=0)

    def propose(self, t, old, new):
        return self.s + (self.cost[t][new] - self.cost[t][old])

    def keys(self, s):
        return snap(np.sqrt(np.maximum(s, 0.0)) if self.sqrt else s)

    def commit(self, s, t, old, new):
        self.s = s


class _AngularScorer:
    def __init__(self, V, W, scales):
        neutral = np.array([s.neutral for s in scales])
        W = np.where(np.isnan(V), 0.0, W)
        W2 = W * W
        dv = np.where(W > 0, np.nan_to_num(V - neutral), 0.0)
        self.nv = np.sqrt((W2 * dv * dv).sum(axis=1))
        self.dot_cost = []
        self.norm_cost = []
        for t, s in enumerate(scales):
            dev = np.asarray(s.allowed) - neutral[t]
            self.dot_cost.append(dev[:, None] * (W2[:, t] * dv[:, t])[None, :])
            self.norm_cost.append((dev * dev)[:, None] * W2[:, t][None, :])

    def init(self, idx):
        self.s = (
            np.sum([self.dot_cost[t][a] for t, a in enumerate(idx)], axis=0),
            np.sum([self.norm_cost[t][a] for t, a in enumerate(idx)], axis=0),
        )

    def propose(self, t, old, new):
        dot, nc = self.s
        return (dot + (self.dot_cost[t][new] - self.dot_cost[t][old]),
                nc + (self.norm_cost[t][new] - self.norm_cost[t][old]))

    def keys(self, s):
        dot, nc = s
        with np.errstate(divide="ignore", invalid="ignore"):
            cos = dot / (self.nv * np.sqrt(np.maximum(nc, 0.0)))
        d = np.arccos(np.clip(cos, -1.0, 1.0))
        d[~np.isfinite(cos)] = ANGULAR_FALLBACK
        return snap(d)

    def commit(self, s, t, old, new):
        self.s = s


class _MahalanobisScorer:
    """Keeps g = P z per voter, z = mask * (v - c), so a one-question move costs O(n_v * q)."""

    REFRESH = 512

    def __init__(self, V, W, scales, ctx: PrecisionContext):
        self.P = ctx.precision
        self.mask = (np.where(np.isnan(V), 0.0, W) > 0).astype(float)
        self.V0 = np.nan_to_num(V)
        self.values = [np.asarray(s.allowed) for s in scales]
        self.moves = 0

    def _exact(self, idx):
        c = np.array([self.values[t][a] for t, a in enumerate(idx)])
        z = self.mask * (self.V0 - c)
        g = z @ self.P
        return (z * g).sum(axis=1), g

    def init(self, idx):
        self.idx = np.array(idx)
        self.s = self._exact(self.idx)

    def propose(self, t, old, new):
        d2, g = self.s
        delta = self.values[t][new] - self.values[t][old]
        mt = self.mask[:, t]
        return d2 - 2 * mt * delta * g[:, t] + mt * delta * delta * self.P[t, t]

    def keys(self, s):
        d2 = s[0] if isinstance(s, tuple) else s
        return snap(np.sqrt(np.maximum(d2, 0.0)))

    def commit(self, d2, t, old, new):
        self.idx[t] = new
        self.moves += 1
        if self.moves % self.REFRESH == 0:
            self.s = self._exact(self.idx)
            return
        delta = self.values[t][new] - self.values[t][old]
        g = self.s[1] - np.outer(self.mask[:, t] * delta, self.P[t])
        self.s = (d2, g)


def _make_scorer(method: MatchingMethod, V, W, scales, ctx):
    if method.tag is Method.ANGULAR:
        return _AngularScorer(V, W, scales)
    if method.tag is Method.MAHALANOBIS:
        return _MahalanobisScorer(V, W, scales, ctx)
    return _AdditiveScorer(method, V, W, scales)


def _polish(scorer, tau, sizes, idx, cur, max_passes: int = 20):
    """Coordinate ascent: take any single-question change that strictly improves."""
    for _ in range(max_passes):
        improved = False
        for t in range(len(sizes)):
            for new in range(sizes[t]):
                old = idx[t]
                if new == old:
                    continue
                s = scorer.propose(t, old, new)
                val = float((scorer.keys(s) < tau).mean())
                if val > cur:
                    scorer.commit(s, t, old, new)
                    idx[t], cur, improved = new, val, True
        if not improved:
            break
    return idx, cur


def _anneal_once(scorer, tau, sizes, cfg: AnnealingConfig, rng: np.random.Generator, start=None):
    q = len(sizes)
    n = cfg.iterations
    idx = np.array([int(rng.integers(s)) for s in sizes]) if start is None else np.array(start)
    ts = rng.integers(q, size=n)
    news = (rng.random(n) * sizes[ts]).astype(np.int64)
    us = rng.random(n)
    scorer.init(idx)
    cur = float((scorer.keys(scorer.s) < tau).mean()) if len(tau) else 0.0
    best, best_idx = cur, idx.copy()
    temp = cfg.initial_temperature
    for it in range(n):
        t = ts[it]
        new = news[it]
        old = idx[t]
        if new != old and len(tau):
            s = scorer.propose(t, old, new)
            val = float((scorer.keys(s) < tau).mean())
            gain = val - cur
            if gain >= 0 or us[it] < math.exp(gain / temp):
                scorer.commit(s, t, old, new)
                idx[t] = new
                cur = val
                if cur > best:
                    best, best_idx = cur, idx.copy()
                    if best >= 1.0:
                        break
        temp *= cfg.cooling_factor
    scorer.init(best_idx)
    return _polish(scorer, tau, sizes, best_idx, best)


def _real_block(election: Election, state: str, k: int, method: MatchingMethod):
    ctx = state_context(election, state, method)
    block = match_state(election, state, method, k=k, ctx=ctx)
    V = election.voter_answers[block.voter_rows][block.active]
    W = election.voter_weights[block.voter_rows][block.active]
    tau = _thresholds(block.keys[block.active], k)
    return V, W, tau, ctx


def crafted_visibility(
    election: Election,
    state: str,
    profile: Profile | Sequence[float],
    k: int | None = None,
    method: MatchingMethod | Method | str = Method.L2,
) -> float:
    """Visibility of one extra candidate injected into ``state`` (it loses every tie)."""
    m = as_method(method)
    kk = default_k(election, state, "candidate", k)
    answers = profile.answers if isinstance(profile, Profile) else tuple(profile)
    V, W, tau, ctx = _real_block(election, state, kk, m)
    if len(tau) == 0:
        return 0.0
    c = np.array([answers], dtype=float)
    key = snap(pairwise_distances(m, V, W, c, election.scales, ctx))[:, 0]
    return float((key < tau).mean())


def _starting_points(election: Election, state: str, V: np.ndarray, scales, restarts: int) -> list:
    """First restart starts at the voters' per-question median, the second at the
    mean real candidate; the rest start at random."""
    grid = [np.asarray(s.allowed) for s in scales]
    out: list = []
    if len(V):
        with np.errstate(all="ignore"):
            med = np.nanmedian(np.where(np.isnan(V).all(axis=0), 50.0, V), axis=0)
        out.append([int(np.argmin(np.abs(g - x))) for g, x in zip(grid, med)])
    rows = election.candidate_rows(state)
    if len(rows):
        mean = election.candidate_answers[rows].mean(axis=0)
        out.append([int(np.argmin(np.abs(g - x))) for g, x in zip(grid, mean)])
    out = out[:restarts]
    return out + [None] * (restarts - len(out))


def optimize_answers(
    election: Election,
    state: str,
    k: int | None = None,
    method: MatchingMethod | Method | str = Method.L2,
    cfg: AnnealingConfig | None = None,
    workers: int = 1,
) -> tuple[Profile, float]:
    """Craft a candidate profile maximizing its k-visibility by simulated annealing.

    The move resamples one uniformly chosen question from its allowed set.
    Returns the best profile over all restarts and its visibility on the full
    voter set (even when the search ran on a voter subsample).
    """
    cfg = cfg or AnnealingConfig()
    m = as_method(method)
    kk = default_k(election, state, "candidate", k)
    scales = election.scales
    sizes = np.array([s.size for s in scales])
    V, W, tau, ctx = _real_block(election, state, kk, m)
    root = np.random.SeedSequence(cfg.seed)
    sub_seq, *restart_seqs = root.spawn(cfg.restarts + 1)
    if cfg.voter_subsample_fraction < 1 and len(tau):
        n_sub = max(1, int(round(cfg.voter_subsample_fraction * len(tau))))
        pick = np.sort(np.random.default_rng(sub_seq).choice(len(tau), n_sub, replace=False))
        V, W, tau = V[pick], W[pick], tau[pick]

    starts = _starting_points(election, state, V, scales, cfg.restarts)

    def run(i):
        scorer = _make_scorer(m, V, W, scales, ctx)
        return _anneal_once(scorer, tau, sizes, cfg, np.random.default_rng(restart_seqs[i]), starts[i])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(cfg.restarts)))
    else:
        results = [run(i) for i in range(cfg.restarts)]
    best_idx = None
    best_val = -1.0
    for idx, _ in results:
        answers = [scales[t].allowed[a] for t, a in enumerate(idx)]
        val = crafted_visibility(election, state, answers, kk, m)
        if val > best_val:
            best_val, best_idx = val, answers
    return Profile.complete(best_idx), best_val


def brute_force_optimal(
    election: Election,
    state: str,
    k: int | None = None,
    method: MatchingMethod | Method | str = Method.L2,
    limit: int = 1_000_000,
    chunk: int = 4096,
) -> tuple[Profile, float]:
    """Exhaustive search over every profile; ties go to the lexicographically smallest answers."""
    m = as_method(method)
    kk = default_k(election, state, "candidate", k)
    scales = election.scales
    total = math.prod(s.size for s in scales)
    if total > limit:
        raise ValueError(f"instance too large for exhaustive search ({total} profiles)")
    V, W, tau, ctx = _real_block(election, state, kk, m)
    best_val, best = -1.0, None
    it = itertools.product(*(s.allowed for s in scales))
    while True:
        batch = list(itertools.islice(it, chunk))
        if not batch:
            break
        P = np.array(batch, dtype=float)
        if len(tau):
            keys = snap(pairwise_distances(m, V, W, P, scales, ctx))
            vis = (keys < tau[:, None]).mean(axis=0)
        else:
            vis = np.zeros(len(batch))
        j = int(np.argmax(vis))
        if vis[j] > best_val:
            best_val, best = float(vis[j]), batch[j]
    return Profile.complete(best), best_val


def inject_candidate(
    election: Election,
    state: str,
    profile: Profile,
    cid: str = "crafted",
    party: str = "CRAFTED",
) -> Election:
    cand = Candidate(cid, CRAFTED_SORT_KEY, state, party, f"{cid}-list", profile)
    lists = election.lists + (PartyList(f"{cid}-list", state, party, (cid,)),)
    parties = election.parties
    if parties and party not in {p.id for p in parties}:
        parties = parties + (Party(party),)
    return election.replace(candidates=election.candidates + (cand,), lists=lists, parties=parties)


# --------------------------------------------------------------------------
# answer calibration (AC)


def _step(scale: AnswerScale, value: float, direction: CalibrationDirection) -> float:
    vals = scale.allowed
    n = scale.neutral
    if value == n or value not in scale:
        return value
    i = scale.index(value)
    side = 1 if value > n else -1
    if direction is CalibrationDirection.MODERATE:
        j = i - side
        if 0 <= j < len(vals) and (vals[j] - n) * side >= 0:
            return vals[j]
        return value
    j = i + side
    return vals[j] if 0 <= j < len(vals) else value


def calibrate_answers(
    profile: Profile,
    direction: CalibrationDirection | str,
    scales: Sequence[AnswerScale],
) -> Profile:
    """Move every answer one allowed step toward (moderate) or away from (strong) the neutral.

    A step never crosses the neutral; answers at the neutral are fixed points.
    """
    d = CalibrationDirection(direction)
    if not profile.is_complete:
        raise ValueError("calibration needs a complete profile")
    answers = tuple(_step(s, a, d) for s, a in zip(scales, profile.answers))
    return Profile(answers, profile.weights)


def calibration_maps(scales: Sequence[AnswerScale], direction: CalibrationDirection | str) -> list[dict[float, float]]:
    d = CalibrationDirection(direction)
    return [{a: _step(s, a, d) for s in [s] for a in s.allowed} for s in scales]


def calibrate_matrix(C: np.ndarray, rows: np.ndarray, scales: Sequence[AnswerScale],
                     direction: CalibrationDirection | str) -> np.ndarray:
    out = C.copy()
    for t, mp in enumerate(calibration_maps(scales, direction)):
        col = out[rows, t]
        new = col.copy()
        for a, b in mp.items():
            new[col == a] = b
        out[rows, t] = new
    return out


def calibrate_party(election: Election, party: str, direction: CalibrationDirection | str) -> Election:
    scales = election.scales
    cands = tuple(
        replace(c, profile=calibrate_answers(c.profile, direction, scales)) if c.party == party else c
        for c in election.candidates
    )
    return election.with_candidates(cands)


def rematch(
    election: Election,
    method: MatchingMethod | Method | str,
    baseline: Mapping[str, StateBlock],
    new_answers: np.ndarray,
    changed_rows: np.ndarray,
) -> dict[str, StateBlock]:
    """Blocks after replacing some candidates' answers; only changed columns are recomputed
    unless the method's context depends on the candidate pool."""
    m = as_method(method)
    changed = set(int(r) for r in changed_rows)
    out = {}
    for s, b in baseline.items():
        hit = np.array([j for j, r in enumerate(b.cand_rows) if int(r) in changed], dtype=int)
        if len(hit) == 0:
            out[s] = b
            continue
        if m.tag is Method.MAHALANOBIS:
            out[s] = match_state(election, s, m, k=b.k, candidate_answers=new_answers,
                                 include=_include_mask(election, b))
            continue
        D = b.distances.copy()
        V = election.voter_answers[b.voter_rows]
        W = election.voter_weights[b.voter_rows]
        D[:, hit] = pairwise_distances(m, V, W, new_answers[b.cand_rows[hit]], election.scales)
        out[s] = StateBlock(s, b.k, b.cand_rows, b.voter_rows, D, b.active)
    return out


def _include_mask(election: Election, block: StateBlock) -> np.ndarray:
    mask = np.zeros(len(election.voters), dtype=bool)
    mask[block.voter_rows] = True
    return mask


def calibration_experiment(
    election: Election,
    party: str,
    method: MatchingMethod | Method | str = Method.L2,
    direction: CalibrationDirection | str = CalibrationDirection.MODERATE,
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
    *,
    baseline_blocks: Mapping[str, StateBlock] | None = None,
) -> AttackReport:
    """Calibrate every candidate of ``party`` and compare national party visibilities."""
    if party not in {c.party for c in election.candidates}:
        raise ValueError(f"party {party!r} has no candidates")
    m = as_method(method)
    if baseline_blocks is None:
        baseline_blocks = match_election(election, m, k=k)
    base = party_visibility(election, m, k, tiebreak, blocks=baseline_blocks)
    rows = np.array([i for i, c in enumerate(election.candidates) if c.party == party])
    C = calibrate_matrix(election.candidate_answers, rows, election.scales, direction)
    blocks = rematch(election, m, baseline_blocks, C, rows)
    after = party_visibility(election, m, k, tiebreak, blocks=blocks)
    return AttackReport(
        "calibration",
        dict(base.values),
        dict(after.values),
        {"party": party, "direction": str(CalibrationDirection(direction)), "method": _method_meta(m), "k": k},
    )


# --------------------------------------------------------------------------
# diversification (DIV)


def pearson_or_none(x: Sequence[float], y: Sequence[float]) -> float | None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y = x[ok], y[ok]
    if len(x) < 2:
        return None
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx <= 1e-12 * max(1.0, float(np.abs(x).max())) or sy <= 1e-12 * max(1.0, float(np.abs(y).max())):
        return None
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


@dataclass
class CorrelationAnalysis:
    rows: list[dict]
    correlation: float | None

    @property
    def undefined(self) -> bool:
        return self.correlation is None


def diversification_analysis(
    election: Election,
    k: int | None = None,
    method: MatchingMethod | Method | str = Method.L2,
    state: str | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
) -> CorrelationAnalysis:
    """Candidates per vote-share point against visibility per vote share, per party."""
    shares = election.party_vote_shares
    if not shares:
        raise ValueError("election carries no party vote shares")
    vis = party_visibility(election, method, k, tiebreak,
                           blocks=match_election(election, method, k=k,
                                                 states=None if state is None else [state]))
    values = vis.values if state is None else vis.by_state[state]
    rows = []
    for p, share in shares.items():
        if share is None or share <= 0:
            continue
        n = sum(1 for c in election.candidates if c.party == p and (state is None or c.state == state))
        if n == 0:
            continue
        v = values.get(p, math.nan)
        rows.append({
            "party": p,
            "n_candidates": n,
            "vote_share": share,
            "candidates_per_point": n / (100.0 * share),
            "visibility": v,
            "visibility_ratio": v / share,
        })
    corr = pearson_or_none([r["candidates_per_point"] for r in rows], [r["visibility_ratio"] for r in rows])
    return CorrelationAnalysis(rows, corr)


def clone_candidates(
    election: Election,
    party: str,
    n_clones: int,
    noise_scale: int,
    seed: int,
) -> Election:
    """Add ``n_clones`` candidates around the party's per-question mean answers.

    Clones are dealt round-robin over the states where the party runs and sit
    on a new list there. Each clone answer is the state mean snapped to the
    grid, shifted by a uniform integer number of grid steps in
    [-noise_scale, noise_scale].
    """
    if n_clones < 0 or noise_scale < 0:
        raise ValueError("n_clones and noise_scale must be non-negative")
    scales = election.scales
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xD1]))
    states = [s for s in election.states if any(c.party == party and c.state == s for c in election.candidates)]
    if not states:
        raise ValueError(f"party {party!r} has no candidates")
    means = {}
    for s in states:
        rows = [i for i, c in enumerate(election.candidates) if c.party == party and c.state == s]
        means[s] = election.candidate_answers[rows].mean(axis=0)
    members: dict[str, list[str]] = {s: [] for s in states}
    new_cands = []
    for i in range(n_clones):
        state = states[i % len(states)]
        answers = []
        for t, sc in enumerate(scales):
            base = int(np.argmin(np.abs(np.asarray(sc.allowed) - means[state][t])))
            shift = int(rng.integers(-noise_scale, noise_scale + 1))
            answers.append(sc.allowed[min(max(base + shift, 0), sc.size - 1)])
        cid = f"{party}-clone-{i}"
        members[state].append(cid)
        new_cands.append(Candidate(cid, CRAFTED_SORT_KEY + f"{i:06d}", state, party, f"{party}-clones-{state}",
                                   Profile.complete(answers)))
    new_lists = tuple(PartyList(f"{party}-clones-{s}", s, party, tuple(m)) for s, m in members.items() if m)
    return election.replace(candidates=election.candidates + tuple(new_cands), lists=election.lists + new_lists)


def diversification_simulation(
    election: Election,
    party: str,
    n_clones: int,
    noise_scale: int = 1,
    seed: int = 0,
    k: int | None = None,
    method: MatchingMethod | Method | str = Method.L2,
    tiebreak: TieBreakPolicy | str | None = None,
) -> AttackReport:
    if party not in {c.party for c in election.candidates}:
        raise ValueError(f"party {party!r} has no candidates")
    base = party_visibility(election, method, k, tiebreak)
    cloned = clone_candidates(election, party, n_clones, noise_scale, seed)
    after = party_visibility(cloned, method, k, tiebreak)
    return AttackReport(
        "diversification",
        dict(base.values),
        dict(after.values),
        {"party": party, "n_clones": n_clones, "noise_scale": noise_scale, "seed": seed,
         "method": _method_meta(method), "k": k},
    )


# --------------------------------------------------------------------------
# list centralization (LC)


def list_spread(lst: PartyList, election: Election) -> float:
    """Mean over questions of the population standard deviation of member answers."""
    rows = [election.candidate_index[m] for m in lst.members]
    return float(election.candidate_answers[rows].std(axis=0).mean())


def list_centralization_analysis(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    tiebreak: TieBreakPolicy | str | None = None,
    score_mode: str = "mean_of_scores",
) -> CorrelationAnalysis:
    vis = list_visibility(election, method, 1, tiebreak, score_mode=score_mode)
    rows = [
        {"list": lst.id, "state": lst.state, "party": lst.party, "size": len(lst.members),
         "spread": list_spread(lst, election), "visibility": vis.values[lst.id]}
        for lst in election.lists
    ]
    corr = pearson_or_none([r["spread"] for r in rows], [r["visibility"] for r in rows])
    return CorrelationAnalysis(rows, corr)


# --------------------------------------------------------------------------
# weight selection (WS)

STRONG_WEIGHTS = {0.0: 0.0, 0.5: 0.1, 1.0: 1.0, 2.0: 10.0}
WEAK_WEIGHTS = {0.0: 0.0, 0.5: 0.9, 1.0: 1.0, 2.0: 10.0 / 9.0}
WEIGHT_PRESETS = {"strong": STRONG_WEIGHTS, "weak": WEAK_WEIGHTS}


def weight_scenario(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    alt_weights: Mapping[float, float] | str = "strong",
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
) -> AttackReport:
    """Party visibility with remapped weight values, among voters who changed any weight."""
    mapping = WEIGHT_PRESETS[alt_weights] if isinstance(alt_weights, str) else dict(alt_weights)
    mapping = {float(a): float(b) for a, b in mapping.items()}
    if mapping.get(0.0) != 0.0:
        raise ValueError("weight mapping must keep 0 at 0")
    if mapping.get(1.0) != 1.0:
        raise ValueError("weight mapping must keep the default weight 1")
    if len(set(mapping.values())) != len(mapping):
        raise ValueError("weight mapping must be bijective")
    W = election.voter_weights
    missing = set(np.unique(W).tolist()) - set(mapping)
    if missing:
        raise ValueError(f"weights without a mapping: {sorted(missing)}")
    include = ((W != 0) & (W != 1)).any(axis=1)
    W_alt = W.copy()
    for a, b in mapping.items():
        W_alt[W == a] = b
    base = party_visibility(election, method, k, tiebreak,
                            blocks=match_election(election, method, k=k, include=include))
    after = party_visibility(election, method, k, tiebreak,
                             blocks=match_election(election, method, k=k, include=include, voter_weights=W_alt))
    return AttackReport(
        "weights",
        dict(base.values),
        dict(after.values),
        {"mapping": {repr(a): b for a, b in sorted(mapping.items())}, "method": _method_meta(method),
         "k": k, "n_voters": int(include.sum())},
    )


# --------------------------------------------------------------------------
# similarity score (SS)


@dataclass
class TopMatchHistogram:
    edges: np.ndarray
    overall: np.ndarray
    by_party: dict[str, np.ndarray]
    scores: np.ndarray


def _top_choice(election: Election, block: StateBlock, policy: TieBreakPolicy) -> np.ndarray:
    credit = block_credit(election, block, policy, 1)
    return np.argmax(credit, axis=1)


def top_match_distribution(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    bins: int | Sequence[float] = 20,
    tiebreak: TieBreakPolicy | str | None = None,
) -> TopMatchHistogram:
    """Histogram of every voter's displayed similarity to their rank-1 candidate."""
    policy = as_tiebreak(tiebreak)
    if policy.tag.value == "proportional":
        policy = LEXICOGRAPHIC
    blocks = match_election(election, method)
    edges = np.linspace(0, 100, bins + 1) if isinstance(bins, int) else np.asarray(bins, dtype=float)
    parties = election.party_ids
    scores, tops = [], []
    for s, b in blocks.items():
        if len(b.cand_rows) == 0 or not b.active.any():
            continue
        top = _top_choice(election, b, policy)[b.active]
        rows = b.voter_rows[b.active]
        V = election.voter_answers[rows]
        W = np.where(np.isnan(V), 0.0, election.voter_weights[rows])
        C = election.candidate_answers[b.cand_rows[top]]
        d = np.sqrt((((np.nan_to_num(V) - C) * W) ** 2).sum(axis=1))
        sim = 100.0 * (1.0 - d / (100.0 * np.sqrt((W * W).sum(axis=1))))
        scores.append(sim)
        tops.extend(election.candidates[b.cand_rows[j]].party for j in top)
    scores_arr = np.concatenate(scores) if scores else np.zeros(0)
    overall, _ = np.histogram(scores_arr, bins=edges)
    tops_arr = np.array(tops, dtype=object)
    by_party = {p: np.histogram(scores_arr[tops_arr == p], bins=edges)[0] for p in parties}
    return TopMatchHistogram(edges, overall, by_party, scores_arr)


# --------------------------------------------------------------------------
# question favoritism (QF) and correlation (QC)


@dataclass
class GreedySubset:
    order: list[int]
    visibility: list[float]
    gains: list[float]
    baseline: float
    best_size: int
    best_gain: float


def _masked_visibility(election, party, method, k, tiebreak, mask: np.ndarray, include=None) -> float:
    W = election.voter_weights * mask[None, :]
    vis = party_visibility(election, method, k, tiebreak,
                           blocks=match_election(election, method, k=k, voter_weights=W, include=include))
    return vis.values.get(party, math.nan)


def greedy_question_subset(
    election: Election,
    party: str,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    max_size: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
) -> GreedySubset:
    """Forward greedy selection of the questions that most raise the party's visibility.

    Voters only keep their weights on the selected questions; gains are relative
    to the full questionnaire.
    """
    nq = election.n_questions
    size = nq if max_size is None else max_size
    if size > nq:
        raise ValueError("max_size exceeds the number of questions")
    baseline = party_visibility(election, method, k, tiebreak).values.get(party, math.nan)
    mask = np.zeros(nq)
    order, vis, gains = [], [], []
    for _ in range(size):
        best_t, best_v = None, -math.inf
        for t in range(nq):
            if mask[t]:
                continue
            mask[t] = 1.0
            v = _masked_visibility(election, party, method, k, tiebreak, mask)
            mask[t] = 0.0
            if not math.isnan(v) and v > best_v:
                best_t, best_v = t, v
        if best_t is None:
            break
        mask[best_t] = 1.0
        order.append(election.questions[best_t].index)
        vis.append(best_v)
        gains.append((best_v - baseline) / baseline if baseline > 0 else math.nan)
    best_i = int(np.nanargmax(vis)) if vis and not np.isnan(vis).all() else 0
    return GreedySubset(order, vis, gains, baseline, best_i + 1, gains[best_i] if gains else math.nan)


def question_correlation_matrix(voters: np.ndarray | Sequence[Voter] | Election) -> np.ndarray:
    """Absolute pairwise-complete Pearson correlations between questions.

    Pairs with fewer than two joint answers or a constant column are NaN.
    """
    if isinstance(voters, Election):
        X = voters.voter_answers
    elif isinstance(voters, np.ndarray):
        X = np.asarray(voters, dtype=float)
    else:
        X = np.array([v.profile.answer_array() for v in voters], dtype=float)
    M = (~np.isnan(X)).astype(float)
    X0 = np.nan_to_num(X)
    n = M.T @ M
    sx = X0.T @ M
    sxx = (X0 * X0).T @ M
    sxy = X0.T @ X0
    with np.errstate(divide="ignore", invalid="ignore"):
        cov = sxy - sx * sx.T / n
        var_x = sxx - sx * sx / n
        var_y = var_x.T
        r = cov / np.sqrt(var_x * var_y)
    scale = np.maximum(n, 1.0) * 1e-9 * max(1.0, float(np.nanmax(np.abs(X0))) ** 2)
    bad = (n < 2) | (var_x <= scale) | (var_y <= scale)
    r = np.clip(np.abs(r), 0.0, 1.0)
    r[bad] = np.nan
    diag = np.diag_indices_from(r)
    r[diag] = np.where(bad[diag], np.nan, 1.0)
    return r


def duplicate_questions(election: Election, question_index: int, copies: int) -> Election:
    """Append ``copies`` exact copies of a question (answers and weights) for everyone."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    pos = next(i for i, q in enumerate(election.questions) if q.index == question_index)
    q0 = election.questions[pos]
    nq = election.n_questions
    new_q = tuple(
        Question(nq + i + 1, f"{q0.id}#dup{i + 1}", q0.scale, q0.text) for i in range(copies)
    )

    def extend(p: Profile) -> Profile:
        return Profile(p.answers + (p.answers[pos],) * copies, p.weights + (p.weights[pos],) * copies)

    cands = tuple(replace(c, profile=extend(c.profile)) for c in election.candidates)
    voters = tuple(replace(v, profile=extend(v.profile)) for v in election.voters)
    return election.replace(questions=election.questions + new_q, candidates=cands, voters=voters)


def duplicate_question_attack(
    election: Election,
    question_index: int,
    copies: int = 1,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
) -> AttackReport:
    base = party_visibility(election, method, k, tiebreak)
    dup = duplicate_questions(election, question_index, copies)
    after = party_visibility(dup, method, k, tiebreak)
    return AttackReport(
        "duplicate-question",
        dict(base.values),
        dict(after.values),
        {"question": question_index, "copies": copies, "method": _method_meta(method), "k": k},
    )


# --------------------------------------------------------------------------
# question ordering (QO)


def favorable_ordering(
    election: Election,
    party: str,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    max_size: int | None = None,
) -> list[int]:
    """Greedy favorable questions first, the remaining ones in their original order."""
    picked = greedy_question_subset(election, party, method, k, max_size).order
    rest = [q.index for q in election.questions if q.index not in picked]
    return picked + rest


def question_order_experiment(
    election: Election,
    ordering: Sequence[int],
    drop: DropModel | None = None,
    trials: int = 10,
    seed: int = 0,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
    baseline: str = "complete",
) -> AttackReport:
    """Reorder the questionnaire, drop answers by position, and compare party visibility.

    Only voters who answered every question take part. ``ordering`` lists
    1-based question indices in presentation order. ``baseline`` is either
    ``"complete"`` (the voters' full answers) or ``"same_drops"`` (the original
    order under the same per-position drop draws).
    """
    drop = drop or DropModel()
    if trials < 1:
        raise ValueError("trials must be >= 1")
    nq = election.n_questions
    pos_of = {q.index: i for i, q in enumerate(election.questions)}
    order = [pos_of[int(t)] for t in ordering]
    if sorted(order) != list(range(nq)):
        raise ValueError("ordering must be a permutation of the question indices")
    if baseline not in ("complete", "same_drops"):
        raise ValueError(f"unknown baseline {baseline!r}")
    W = election.voter_weights
    complete = (W != 0).all(axis=1) & ~np.isnan(election.voter_answers).any(axis=1)
    if not complete.any():
        raise ValueError("no voter answered every question")
    rates = drop.rates(nq)
    order = np.array(order)
    parties = election.party_ids

    def vis(weights):
        blocks = match_election(election, method, k=k, voter_weights=weights, include=complete)
        return party_visibility(election, method, k, tiebreak, blocks=blocks), blocks

    full, _ = vis(W)
    base_vals = dict(full.values)
    attacked = {p: [] for p in parties}
    rel = {p: [] for p in parties}
    excluded = []
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), trial]))
        kept = rng.random((len(W), nq)) < rates[None, :]
        W_ord = W.copy()
        # question order[p] is shown at position p
        W_ord[:, order] = np.where(kept, W[:, order], 0.0)
        tab, blocks = vis(W_ord)
        excluded.append(sum(tab.n_excluded.values()))
        if baseline == "same_drops":
            W_same = np.where(kept, W, 0.0)
            ref = vis(W_same)[0].values
        else:
            ref = base_vals
        for p in parties:
            a = tab.values.get(p, math.nan)
            b = ref.get(p, math.nan)
            attacked[p].append(a)
            rel[p].append((a - b) / b if b > 0 and not math.isnan(a) else math.nan)
    mean_att = {p: float(np.mean(v)) for p, v in attacked.items()}
    mean_rel, std_rel = {}, {}
    for p, v in rel.items():
        arr = np.array(v)
        if np.isnan(arr).any():
            mean_rel[p], std_rel[p] = math.nan, math.nan
        else:
            mean_rel[p], std_rel[p] = float(arr.mean()), float(arr.std())
    return AttackReport(
        "question-order",
        base_vals,
        mean_att,
        {"ordering": [int(t) for t in ordering], "trials": trials, "seed": seed, "baseline": baseline,
         "method": _method_meta(method), "k": k, "n_voters": int(complete.sum()),
         "excluded_per_trial": excluded, "drop_model": asdict(drop)},
        extra={"rel_change": mean_rel, "rel_change_std": std_rel},
    )


# --------------------------------------------------------------------------
# tie-breaking (TB)


def tiebreak_impact(
    election: Election,
    method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
) -> AttackReport:
    """Candidate visibility under sort-key tie-breaking relative to proportional tie credit."""
    blocks = match_election(election, method, k=k)
    fair = candidate_visibility(election, method, k, PROPORTIONAL, blocks=blocks)
    lex = candidate_visibility(election, method, k, LEXICOGRAPHIC, blocks=blocks)
    return AttackReport("tiebreak", dict(fair.values), dict(lex.values),
                        {"method": _method_meta(method), "k": k})


# --------------------------------------------------------------------------
# matching-method choice (MM)


def method_manipulation(
    election: Election,
    method: MatchingMethod | Method | str,
    baseline_method: MatchingMethod | Method | str = Method.L2,
    k: int | None = None,
    tiebreak: TieBreakPolicy | str | None = None,
) -> AttackReport:
    """Party visibility under ``method`` relative to ``baseline_method``."""
    base = party_visibility(election, baseline_method, k, tiebreak)
    after = party_visibility(election, method, k, tiebreak)
    return AttackReport("method", dict(base.values), dict(after.values),
                        {"method": _method_meta(method), "baseline_method": _method_meta(baseline_method), "k": k})
