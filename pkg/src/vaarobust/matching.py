"""Distance functions, the normalized similarity score and their batch forms.

Two independent code paths live here. :func:`compute_distance` evaluates one
voter/candidate pair straight from the definitions and is the reference.
:func:`pairwise_distances` evaluates whole voter x candidate blocks through
table lookups and matrix products; the ranking layer only uses this one.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import AnswerScale, Profile


class Method(str, enum.Enum):
    L2 = "l2"
    L1 = "l1"
    AGREEMENT = "agreement"
    ANGULAR = "angular"
    MAHALANOBIS = "mahalanobis"
    L1_BONUS = "l1bonus"
    HYBRID = "hybrid"

    def __str__(self) -> str:
        return self.value


ALL_METHODS: tuple[Method, ...] = tuple(Method)
METHOD_LABELS = {
    Method.L2: "L2",
    Method.L1: "L1",
    Method.AGREEMENT: "Agreement Count",
    Method.ANGULAR: "Angular",
    Method.MAHALANOBIS: "Mahalanobis",
    Method.L1_BONUS: "L1 Bonus",
    Method.HYBRID: "Hybrid",
}

# order-equivalent to "worst angle of the voter plus one": every defined angle is <= pi
ANGULAR_FALLBACK = math.pi + 1.0


class MatchingError(ValueError):
    pass


class EmptyOverlapError(MatchingError):
    """No question carries a positive voter weight."""


class NeutralProfileError(MatchingError):
    """Angular distance with an all-neutral deviation vector."""


class MissingContextError(MatchingError):
    """Mahalanobis distance requested without a precision context."""


@dataclass(frozen=True)
class DistanceMatrix:
    """Answer-pair distance table on the five-point anchor grid."""

    anchors: tuple[float, ...]
    entries: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.anchors)
        arr = np.asarray(self.entries, dtype=float)
        if arr.shape != (n, n):
            raise ValueError(f"distance matrix must be {n}x{n}, got {arr.shape}")
        if not np.array_equal(arr, arr.T):
            raise ValueError("distance matrix must be symmetric")
        if (arr < 0).any():
            raise ValueError("distance matrix entries must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)

    def lookup(self, voter_answer: float, candidate_answer: float) -> float:
        i = self.anchors.index(float(voter_answer))
        j = self.anchors.index(float(candidate_answer))
        return self.entries[i][j]


ANCHORS = (0.0, 25.0, 50.0, 75.0, 100.0)

L1_BONUS_MATRIX = DistanceMatrix(
    ANCHORS,
    (
        (0, 125, 150, 175, 200),
        (125, 75, 125, 150, 175),
        (150, 125, 100, 125, 150),
        (175, 150, 125, 75, 125),
        (200, 175, 150, 125, 0),
    ),
)

HYBRID_MATRIX = DistanceMatrix(
    ANCHORS,
    (
        (0, 50, 100, 150, 200),
        (50, 37.5, 75, 112.5, 150),
        (100, 75, 50, 75, 100),
        (150, 112.5, 75, 37.5, 50),
        (200, 150, 100, 50, 0),
    ),
)


def load_matrix_csv(path: str | Path) -> DistanceMatrix:
    """Read a distance table; first row and first column hold the anchor values."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    anchors = tuple(float(x) for x in rows[0][1:])
    entries = []
    for r in rows[1:]:
        if float(r[0]) != anchors[len(entries)]:
            raise ValueError(f"row anchor {r[0]} out of order in {path}")
        entries.append(tuple(float(x) for x in r[1:]))
    return DistanceMatrix(anchors, tuple(entries))


def generalize_matrix(dm: DistanceMatrix, scale: AnswerScale) -> np.ndarray:
    """Lookup table indexed by (voter answer index, candidate answer index) on ``scale``.

    Each scale value is snapped to its nearest anchor (lower anchor on an exact
    tie), so grids that are subsets of the anchors reuse the table verbatim.
    """
    values = np.asarray(scale.allowed)
    if values.min() < 0 or values.max() > 100:
        raise ValueError(f"scale values outside [0, 100]: {scale.allowed}")
    anchors = np.asarray(dm.anchors)
    nearest = np.argmin(np.abs(values[:, None] - anchors[None, :]), axis=1)
    return dm.as_array()[np.ix_(nearest, nearest)]


@dataclass(frozen=True)
class MatchingMethod:
    """A distance function plus its parameters.

    ``ridge`` (Mahalanobis) defaults to 1e-6 * trace(Cov) / N_q when None;
    ``matrix`` overrides the built-in table of L1 Bonus / Hybrid.
    """

    tag: Method
    ridge: float | None = None
    matrix: DistanceMatrix | None = None
    global_covariance: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "tag", Method(self.tag))
        if self.ridge is not None and self.ridge <= 0:
            raise ValueError("ridge must be positive")

    @property
    def table(self) -> DistanceMatrix | None:
        if self.matrix is not None:
            return self.matrix
        if self.tag is Method.L1_BONUS:
            return L1_BONUS_MATRIX
        if self.tag is Method.HYBRID:
            return HYBRID_MATRIX
        return None

    def __str__(self) -> str:
        return self.tag.value


_ALIASES = {"agreementcount": "agreement", "ac": "agreement", "euclidean": "l2", "manhattan": "l1"}


def as_method(method: MatchingMethod | Method | str) -> MatchingMethod:
    if isinstance(method, MatchingMethod):
        return method
    if isinstance(method, Method):
        return MatchingMethod(method)
    key = str(method).lower().replace("_", "").replace("-", "").replace(" ", "")
    return MatchingMethod(Method(_ALIASES.get(key, key)))


@dataclass(frozen=True, eq=False)
class PrecisionContext:
    candidate_answers: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    ridge: float


def default_ridge(covariance: np.ndarray) -> float:
    ridge = 1e-6 * float(np.trace(covariance)) / covariance.shape[0]
    return ridge if ridge > 0 else 1e-6


def build_precision_context(candidates: np.ndarray, ridge: float | None = None) -> PrecisionContext:
    """Ridge-regularized inverse covariance of a candidate answer matrix (rows = candidates)."""
    C = np.asarray(candidates, dtype=float)
    if C.ndim != 2 or C.shape[0] < 2:
        raise ValueError("need at least two candidates to estimate a covariance")
    centered = C - C.mean(axis=0)
    cov = centered.T @ centered / (C.shape[0] - 1)
    eps = default_ridge(cov) if ridge is None else float(ridge)
    if eps <= 0:
        raise ValueError("ridge must be positive")
    reg = cov + eps * np.eye(cov.shape[0])
    # the regularized matrix is SPD, so a Cholesky solve is stable
    chol = np.linalg.cholesky(reg)
    inv_chol = np.linalg.solve(chol, np.eye(cov.shape[0]))
    precision = inv_chol.T @ inv_chol
    precision = (precision + precision.T) / 2
    return PrecisionContext(C, cov, precision, eps)


# --------------------------------------------------------------------------
# reference path: one pair, straight from the definitions


def _neutrals(n: int, scales: Sequence[AnswerScale] | None) -> list[float]:
    return [50.0] * n if scales is None else [s.neutral for s in scales]


def _table_entry(tag: MatchingMethod, scale: AnswerScale | None, v: float, c: float) -> float:
    dm = tag.table
    if scale is None:
        anchors = np.asarray(dm.anchors)
        i = int(np.argmin(np.abs(anchors - v)))
        j = int(np.argmin(np.abs(anchors - c)))
        return float(dm.entries[i][j])
    table = generalize_matrix(dm, scale)
    return float(table[scale.index(v), scale.index(c)])


def compute_distance(
    method: MatchingMethod | Method | str,
    voter: Profile,
    candidate: Profile,
    ctx: PrecisionContext | None = None,
    scales: Sequence[AnswerScale] | None = None,
) -> float:
    """Distance between a voter and a candidate; lower means more similar.

    Only questions with a positive voter weight participate. ``scales`` is
    needed for table lookups on non-anchor grids and for scale neutrals; without
    it answers are snapped to the anchor grid and the neutral is 50.
    """
    m = as_method(method)
    n = len(voter)
    if len(candidate) != n:
        raise ValueError("profiles cover different question sets")
    active = [
        t for t in range(n)
        if voter.weights[t] > 0 and voter.answers[t] is not None and candidate.answers[t] is not None
    ]
    if not active:
        raise EmptyOverlapError("no question with positive voter weight")
    v = voter.answers
    c = candidate.answers
    w = voter.weights
    tag = m.tag

    if tag is Method.L2:
        return math.sqrt(math.fsum((w[t] * (v[t] - c[t])) ** 2 for t in active))
    if tag is Method.L1:
        return math.fsum(w[t] * abs(v[t] - c[t]) for t in active)
    if tag is Method.AGREEMENT:
        return -math.fsum(w[t] for t in active if v[t] == c[t])
    if tag in (Method.L1_BONUS, Method.HYBRID):
        return math.fsum(
            w[t] * _table_entry(m, None if scales is None else scales[t], v[t], c[t]) for t in active
        )
    if tag is Method.ANGULAR:
        neutral = _neutrals(n, scales)
        vt = [w[t] * (v[t] - neutral[t]) for t in active]
        ct = [w[t] * (c[t] - neutral[t]) for t in active]
        nv = math.sqrt(math.fsum(x * x for x in vt))
        nc = math.sqrt(math.fsum(x * x for x in ct))
        if nv == 0 or nc == 0:
            raise NeutralProfileError("deviation vector is zero")
        cos = math.fsum(a * b for a, b in zip(vt, ct)) / (nv * nc)
        return math.acos(min(1.0, max(-1.0, cos)))
    if tag is Method.MAHALANOBIS:
        if ctx is None:
            raise MissingContextError("Mahalanobis distance needs a precision context")
        x = np.array([v[t] - c[t] for t in active])
        sub = ctx.precision[np.ix_(active, active)]
        return math.sqrt(max(0.0, float(x @ sub @ x)))
    raise ValueError(f"unsupported method {tag}")


def similarity_score(voter: Profile, candidate: Profile) -> float:
    """Normalized L2 similarity in [0, 100]: 100 = identical on every weighted question."""
    d = compute_distance(Method.L2, voter, candidate)
    w = voter.weights
    denom = 100.0 * math.sqrt(math.fsum(x * x for x in w))
    return 100.0 * (1.0 - d / denom)


# --------------------------------------------------------------------------
# batch path


def encode_answers(answers: np.ndarray, scales: Sequence[AnswerScale]) -> np.ndarray:
    """Index of each answer in its scale; -1 for missing or off-grid values."""
    A = np.asarray(answers, dtype=float)
    out = np.full(A.shape, -1, dtype=np.int64)
    for t, s in enumerate(scales):
        col = A[:, t]
        for i, a in enumerate(s.allowed):
            out[col == a, t] = i
    return out


def question_tables(method: MatchingMethod, scales: Sequence[AnswerScale]) -> list[np.ndarray]:
    """Per-question (voter answer, candidate answer) cost tables of additive methods."""
    tag = method.tag
    out = []
    for s in scales:
        vals = np.asarray(s.allowed)
        if tag is Method.L1:
            out.append(np.abs(vals[:, None] - vals[None, :]))
        elif tag is Method.L2:
            out.append((vals[:, None] - vals[None, :]) ** 2)
        elif tag is Method.AGREEMENT:
            out.append(-np.eye(len(vals)))
        elif tag in (Method.L1_BONUS, Method.HYBRID):
            out.append(generalize_matrix(method.table, s))
        else:
            raise ValueError(f"{tag} is not an additive table method")
    return out


ADDITIVE = (Method.L1, Method.L2, Method.AGREEMENT, Method.L1_BONUS, Method.HYBRID)


def _voter_features(method: MatchingMethod, W: np.ndarray) -> np.ndarray:
    return W * W if method.tag is Method.L2 else W


def _onehot_voters(vidx: np.ndarray, feat: np.ndarray, offsets: np.ndarray, total: int) -> np.ndarray:
    n = vidx.shape[0]
    X = np.zeros((n, total))
    ok = (vidx >= 0) & (feat != 0)
    rows, cols = np.nonzero(ok)
    X[rows, offsets[cols] + vidx[rows, cols]] = feat[rows, cols]
    return X


def _candidate_costs_onehot(tables, cidx: np.ndarray, offsets: np.ndarray, total: int) -> np.ndarray:
    Y = np.empty((total, cidx.shape[0]))
    for t, T in enumerate(tables):
        Y[offsets[t]:offsets[t] + T.shape[0], :] = T[:, cidx[:, t]]
    return Y


def _interp_costs(method: MatchingMethod, scale: AnswerScale, table: np.ndarray, c: np.ndarray) -> np.ndarray:
    """(A_t, n_c) costs of every allowed voter answer against possibly off-grid candidate values."""
    vals = np.asarray(scale.allowed)
    tag = method.tag
    if tag is Method.L1:
        return np.abs(vals[:, None] - c[None, :])
    if tag is Method.L2:
        return (vals[:, None] - c[None, :]) ** 2
    if tag is Method.AGREEMENT:
        return -(vals[:, None] == c[None, :]).astype(float)
    return np.stack([np.interp(c, vals, row) for row in table])


def _additive(method: MatchingMethod, V, W, C, scales) -> np.ndarray:
    tables = question_tables(method, scales)
    vidx = encode_answers(V, scales)
    feat = _voter_features(method, W)
    feat = np.where(vidx >= 0, feat, 0.0)
    cidx = encode_answers(C, scales)
    sizes = np.array([s.size for s in scales])
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    total = int(sizes.sum())
    X = _onehot_voters(vidx, feat, offsets, total)
    if (cidx >= 0).all():
        Y = _candidate_costs_onehot(tables, cidx, offsets, total)
    else:
        # off-grid candidates (e.g. list mean vectors): interpolate along the candidate axis
        Y = np.empty((total, C.shape[0]))
        for t, s in enumerate(scales):
            Y[offsets[t]:offsets[t] + s.size, :] = _interp_costs(method, s, tables[t], C[:, t])
    D = X @ Y
    if method.tag is Method.L2:
        D = np.sqrt(np.maximum(D, 0.0))
    return D


def _angular(V, W, C, scales) -> np.ndarray:
    neutral = np.array([s.neutral for s in scales])
    W2 = W * W
    dv = np.where(W > 0, np.nan_to_num(V - neutral), 0.0)
    dc = C - neutral
    dot = (W2 * dv) @ dc.T
    nv = np.sqrt((W2 * dv * dv).sum(axis=1))
    nc = np.sqrt(W2 @ (dc * dc).T)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = dot / (nv[:, None] * nc)
    D = np.arccos(np.clip(cos, -1.0, 1.0))
    D[~np.isfinite(cos)] = ANGULAR_FALLBACK
    return D


def _mahalanobis(V, W, C, ctx: PrecisionContext, chunk: int = 48) -> np.ndarray:
    P = ctx.precision
    mask = (W > 0).astype(float)
    V0 = np.nan_to_num(V)
    n_v, q = V.shape
    D = np.empty((n_v, C.shape[0]))
    for lo in range(0, n_v, chunk):
        hi = min(lo + chunk, n_v)
        Z = mask[lo:hi, None, :] * (V0[lo:hi, None, :] - C[None, :, :])
        Zf = Z.reshape(-1, q)
        d2 = np.einsum("ij,ij->i", Zf @ P, Zf).reshape(hi - lo, -1)
        D[lo:hi] = np.sqrt(np.maximum(d2, 0.0))
    return D


def pairwise_distances(
    method: MatchingMethod | Method | str,
    voter_answers: np.ndarray,
    voter_weights: np.ndarray,
    candidate_answers: np.ndarray,
    scales: Sequence[AnswerScale],
    ctx: PrecisionContext | None = None,
) -> np.ndarray:
    """Distance block (n_voters, n_candidates).

    Rows of voters with no positively weighted question are NaN (empty
    overlap). Angular neutral profiles get :data:`ANGULAR_FALLBACK`.
    Identical candidate rows are evaluated once, so they tie exactly.
    """
    m = as_method(method)
    V = np.asarray(voter_answers, dtype=float)
    W = np.asarray(voter_weights, dtype=float)
    C = np.asarray(candidate_answers, dtype=float)
    n_v, n_c = V.shape[0], C.shape[0]
    if n_v == 0 or n_c == 0:
        return np.zeros((n_v, n_c))
    W = np.where(np.isnan(V), 0.0, W)
    uniq, inverse = np.unique(C, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    tag = m.tag
    if tag in ADDITIVE:
        D = _additive(m, V, W, uniq, scales)
    elif tag is Method.ANGULAR:
        D = _angular(V, W, uniq, scales)
    elif tag is Method.MAHALANOBIS:
        if ctx is None:
            raise MissingContextError("Mahalanobis distance needs a precision context")
        D = _mahalanobis(V, W, uniq, ctx)
    else:
        raise ValueError(f"unsupported method {tag}")
    D = D[:, inverse]
    D[~(W > 0).any(axis=1)] = np.nan
    return D
