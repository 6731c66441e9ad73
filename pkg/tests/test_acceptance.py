"""End-to-end acceptance checks, one test per criterion."""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest

from conftest import build, cand, questions, voter
from vaarobust.attacks import (
    AnnealingConfig,
    DropModel,
    brute_force_optimal,
    calibration_experiment,
    duplicate_questions,
    optimize_answers,
    tiebreak_impact,
)
from vaarobust.cli import run_cli
from vaarobust.io import save_election
from vaarobust.matching import (
    ALL_METHODS,
    HYBRID_MATRIX,
    L1_BONUS_MATRIX,
    Method,
    compute_distance,
    pairwise_distances,
    similarity_score,
)
from vaarobust.metrics import acc2, acc3, bia, gini, method_comparison
from vaarobust.model import BUDGET, POLICY, VALUE, Profile
from vaarobust.ranking import PROPORTIONAL, candidate_visibility

ANCHORS = (0, 25, 50, 75, 100)
L1_BONUS_CELLS = (
    (0, 125, 150, 175, 200),
    (125, 75, 125, 150, 175),
    (150, 125, 100, 125, 150),
    (175, 150, 125, 75, 125),
    (200, 175, 150, 125, 0),
)
HYBRID_CELLS = (
    (0, 50, 100, 150, 200),
    (50, 37.5, 75, 112.5, 150),
    (100, 75, 50, 75, 100),
    (150, 112.5, 75, 37.5, 50),
    (200, 150, 100, 50, 0),
)


def test_1_matrix_fidelity(criterion):
    with criterion(1, "distance tables reproduced cell by cell"):
        start = time.perf_counter()
        for method, cells in ((Method.L1_BONUS, L1_BONUS_CELLS), (Method.HYBRID, HYBRID_CELLS)):
            for (i, v), (j, c) in itertools.product(enumerate(ANCHORS), repeat=2):
                got = compute_distance(method, Profile((v,), (1.0,)), Profile.complete((c,)), scales=[BUDGET])
                assert got == cells[i][j], (method, v, c)
        assert L1_BONUS_MATRIX.as_array().tolist() == [list(r) for r in L1_BONUS_CELLS]
        assert HYBRID_MATRIX.as_array().tolist() == [list(r) for r in HYBRID_CELLS]
        assert time.perf_counter() - start < 1.0


def test_2_similarity_arithmetic(criterion):
    with criterion(2, "similarity score examples and 0-100 bounds"):
        rng = np.random.default_rng(0)
        scales = (POLICY, VALUE, BUDGET)
        for _ in range(100_000):
            n = int(rng.integers(1, 9))
            sc = [scales[int(i)] for i in rng.integers(3, size=n)]
            ans = [sc[t].allowed[int(rng.integers(len(sc[t].allowed)))] for t in range(n)]
            w = [float(x) for x in rng.choice((0.0, 0.5, 1.0, 2.0), size=n)]
            w[int(rng.integers(n))] = 1.0
            c = [sc[t].allowed[int(rng.integers(len(sc[t].allowed)))] for t in range(n)]
            s = similarity_score(Profile(tuple(ans), tuple(w)), Profile.complete(tuple(c)))
            assert -1e-9 <= s <= 100 + 1e-9
        p = Profile((0, 25, 100), (2.0, 0.5, 1.0))
        assert similarity_score(p, Profile.complete(p.answers)) == pytest.approx(100, abs=1e-4)
        assert similarity_score(Profile((0, 100), (1, 1)), Profile.complete((100, 0))) == pytest.approx(0, abs=1e-4)
        hand = similarity_score(Profile((100, 50), (1, 2)), Profile.complete((75, 50)))
        assert hand == pytest.approx(100 * (1 - 25 / math.sqrt(100**2 + 200**2)), abs=1e-9)
        # stated literal; the expression above evaluates to 88.81966
        assert hand == pytest.approx(88.8194, abs=1e-4)


def tiny_instance(seed: int):
    rng = np.random.default_rng(seed)
    nq = int(rng.integers(1, 4))
    scales = [(POLICY, VALUE, BUDGET)[int(i)] for i in rng.integers(3, size=nq)]
    qs = tuple(q.__class__(q.index, q.id, s) for q, s in zip(questions(nq), scales))

    def draw():
        return tuple(s.allowed[int(rng.integers(len(s.allowed)))] for s in scales)

    n_c = int(rng.integers(1, 6))
    n_v = int(rng.integers(3, 16))
    cands = [cand(f"c{j}", draw(), "AB"[j % 2]) for j in range(n_c)]
    vs = []
    for i in range(n_v):
        a = list(draw())
        w = [float(x) for x in rng.choice((0.5, 1.0, 2.0), size=nq)]
        if nq > 1 and rng.random() < 0.3:
            t = int(rng.integers(nq))
            a[t], w[t] = None, 0.0
        vs.append(voter(f"v{i}", tuple(a), tuple(w)))
    return build(cands, vs, seats={"s": 1}, qs=qs)


def test_3_annealing_matches_brute_force(criterion):
    with criterion(3, "annealing reaches the brute-force optimum on tiny instances"):
        start = time.perf_counter()
        misses = []
        for seed in range(24):
            e = tiny_instance(seed)
            _, best = brute_force_optimal(e, "s", 1)
            _, got = optimize_answers(e, "s", 1, "l2", AnnealingConfig(seed=seed))
            if got != best:
                misses.append((seed, got, best))
        elapsed = time.perf_counter() - start
        assert not misses
        assert elapsed < 30, elapsed


def test_4_crafted_candidate_dominance(criterion, default_election):
    with criterion(4, "crafted candidate beats the best real candidate by 1.2x"):
        e = default_election
        state = "north"
        _, crafted = optimize_answers(e, state, None, "l2", AnnealingConfig(seed=0))
        real = candidate_visibility(e, "l2")
        best = max(v for c, v in real.values.items() if real.state_of[c] == state)
        assert crafted >= 1.2 * best, (crafted, best)


def test_5_calibration_direction(criterion, default_election):
    with criterion(5, "moderate calibration helps under L2, less under L1"):
        e = default_election
        gains = {}
        for method in ("l2", "l1"):
            gains[method] = {p: calibration_experiment(e, p, method, "moderate").relative_change[p]
                             for p in e.party_ids}
        assert len(gains["l2"]) == 5
        assert sum(g > 0 for g in gains["l2"].values()) >= 4, gains["l2"]
        assert np.mean(list(gains["l1"].values())) < np.mean(list(gains["l2"].values())), gains


def test_6_tie_fairness(criterion, default_election, small_election):
    with criterion(6, "proportional credit conserves tie mass; forced split gives +-100%"):
        tied = build([cand(f"c{j}", (25, 75) if j < 4 else (75, 25), "AB"[j % 2]) for j in range(7)],
                     [voter(f"v{i}", (0, 100) if i % 2 else (100, 0)) for i in range(11)], seats={"s": 3})
        for e in (default_election, small_election, tied):
            table = candidate_visibility(e, "l2", None, PROPORTIONAL)
            for state, seats in e.states.items():
                total = math.fsum(v for c, v in table.values.items() if table.state_of[c] == state)
                assert abs(total - seats) <= 1e-9, (state, total)
        forced = build([cand("z", (25, 75), sort_key="Zeta"), cand("a", (25, 75), sort_key="Alpha")],
                       [voter(f"v{i}", (0, 100)) for i in range(10)])
        r = tiebreak_impact(forced, k=1)
        assert r.baseline == {"z": 0.5, "a": 0.5}
        assert r.relative_change == {"a": 1.0, "z": -1.0}


def test_7_metric_degenerate_cases(criterion):
    with criterion(7, "metric degenerate cases"):
        vis = {"A": 0.3, "B": 0.5, "C": 0.2}
        assert bia("m1", {"m1": vis, "m2": dict(vis), "m3": dict(vis)}, list(vis)).bia1 == 0
        assert gini((2, 2, 2, 2)) == 0
        assert gini((0, 0, 0, 1)) == 0.75
        first = build([cand("a", (0, 0), "A"), cand("b", (100, 100), "B"), cand("c", (25, 75), "C")],
                      [voter("v0", (0, 25), pref="A"), voter("v1", (100, 75), pref="B"),
                       voter("v2", (25, 75), pref="C")])
        assert acc2(first).value == 0
        agree = build([cand("a", (0, 100))], [voter("v", (0, 75), (2, 2)), voter("w", (25, 100), (2, 1))])
        assert acc3(agree) == 0
        opposite = build([cand("a", (100, 0))], [voter("v", (0, 100), (2, 2)), voter("w", (25, 75), (2, 0.5))])
        assert acc3(opposite) == 1


def test_8_drop_model_rates(criterion, default_election):
    with criterion(8, "per-position answer rates follow the drop model"):
        drop = DropModel()
        assert drop.rate(75) == pytest.approx(0.87, abs=1e-12)
        e = default_election
        assert len(e.voters) == 10_000
        rates = (~np.isnan(e.voter_answers)).mean(axis=0)
        expected = drop.rates(e.n_questions)
        worst = float(np.abs(rates - expected).max())
        assert worst <= 0.02, worst


def test_9_duplicate_question_identity(criterion, default_election, small_election):
    with criterion(9, "duplicating a question reweights it exactly"):
        for e, q in ((small_election, 4), (default_election, 61)):
            dup = duplicate_questions(e, q, 1)
            V, W, C = e.voter_answers, e.voter_weights, e.candidate_answers
            col = q - 1
            W2 = W.copy()
            W2[:, col] *= 2
            a = pairwise_distances("l1", dup.voter_answers, dup.voter_weights, dup.candidate_answers, dup.scales)
            assert np.array_equal(a, pairwise_distances("l1", V, W2, C, e.scales))
            W2 = W.copy()
            W2[:, col] *= math.sqrt(2)
            a = pairwise_distances("l2", dup.voter_answers, dup.voter_weights, dup.candidate_answers, dup.scales)
            b = pairwise_distances("l2", V, W2, C, e.scales)
            finite = np.isfinite(b)
            assert np.array_equal(finite, np.isfinite(a))
            assert np.abs(a[finite] - b[finite]).max() <= 1e-9


def _outputs(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_10_cli_determinism(criterion, small_election, tmp_path):
    with criterion(10, "CLI reruns are byte-identical"):
        src = tmp_path / "e.json"
        save_election(small_election, src)
        commands = [
            ["synth", "--seed", "5", "--out", "{d}/synth.json"],
            ["match", src, "--tiebreak", "seeded", "--seed", "3", "--out", "{d}/match.csv"],
            ["visibility", src, "--target", "party", "--tiebreak", "seeded", "--seed", "3", "--out", "{d}/vis.csv"],
            ["attack", "answer-optimization", src, "--state", "a", "--seed", "7", "--iterations", "500",
             "--out", "{d}/ao.csv"],
            ["attack", "diversification-sim", src, "--party", "SOC", "--seed", "2", "--out", "{d}/div.csv"],
            ["attack", "question-order", src, "--ordering", "reverse", "--seed", "4", "--trials", "3",
             "--out", "{d}/qo.csv"],
            ["metrics", src, "--methods", "l2,l1,angular", "--out", "{d}/scorecard.csv"],
            ["report", src, "--seed", "1", "--skip-metrics", "--out-dir", "{d}/report"],
        ]
        runs = []
        for name in ("first", "second"):
            d = tmp_path / name
            d.mkdir()
            for cmd in commands:
                argv = [str(a).replace("{d}", str(d)) for a in cmd]
                assert run_cli(argv) == 0, argv
            runs.append(_outputs(d))
        assert runs[0].keys() == runs[1].keys() and len(runs[0]) >= 2 * len(commands)
        for key in runs[0]:
            assert runs[0][key] == runs[1][key], key


def test_11_method_comparison_performance(criterion, default_election):
    with criterion(11, "full method comparison under 120 s; parallel identical"):
        start = time.perf_counter()
        serial = method_comparison(default_election, ALL_METHODS)
        elapsed = time.perf_counter() - start
        parallel = method_comparison(default_election, ALL_METHODS, workers=4)
        assert serial.to_csv() == parallel.to_csv()
        assert elapsed < 120, elapsed
