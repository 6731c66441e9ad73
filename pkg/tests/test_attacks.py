from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import build, cand, questions, voter
from vaarobust.attacks import (
    AnnealingConfig,
    AttackReport,
    CalibrationDirection,
    DropModel,
    brute_force_optimal,
    calibrate_answers,
    calibrate_party,
    calibration_experiment,
    clone_candidates,
    crafted_visibility,
    diversification_analysis,
    diversification_simulation,
    duplicate_question_attack,
    duplicate_questions,
    favorable_ordering,
    greedy_question_subset,
    inject_candidate,
    list_centralization_analysis,
    list_spread,
    optimize_answers,
    question_correlation_matrix,
    question_order_experiment,
    tiebreak_impact,
    top_match_distribution,
    weight_scenario,
)
from vaarobust.matching import compute_distance, pairwise_distances
from vaarobust.model import BUDGET, POLICY, VALUE, Profile
from vaarobust.ranking import LEXICOGRAPHIC, PROPORTIONAL, candidate_visibility, party_visibility

MODERATE = CalibrationDirection.MODERATE
STRONG = CalibrationDirection.STRONG
FAST = AnnealingConfig(iterations=3000, restarts=3, seed=1)


def random_election(seed: int, nq: int = 4, n_c: int = 8, n_v: int = 40, parties: str = "AB", seats: int = 2,
                    weights=(0.5, 1.0, 2.0)):
    rng = np.random.default_rng(seed)
    allowed = POLICY.allowed
    cands = [cand(f"c{j}", tuple(rng.choice(allowed, nq)), parties[j % len(parties)]) for j in range(n_c)]
    vs = [voter(f"v{i}", tuple(rng.choice(allowed, nq)), tuple(rng.choice(weights, nq))) for i in range(n_v)]
    share = 1 / len(parties)
    return build(cands, vs, seats={"s": seats}, shares={p: share for p in parties})


class TestAnswerOptimization:
    def test_identical_voters(self):
        vs = [voter(f"v{i}", (0, 75, 25)) for i in range(6)]
        e = build([cand("r1", (100, 0, 100)), cand("r2", (75, 25, 75))], vs)
        profile, vis = optimize_answers(e, "s", 1, "l2", FAST)
        assert profile.answers == (0, 75, 25)
        assert vis == 1.0

    def test_split_voters_brute_force(self):
        vs = [voter(f"a{i}", (0,)) for i in range(7)] + [voter(f"b{i}", (100,)) for i in range(5)]
        e = build([cand("r1", (25,)), cand("r2", (75,))], vs)
        profile, vis = brute_force_optimal(e, "s", 1)
        assert profile.answers == (0,)
        assert vis == pytest.approx(7 / 12)

    def test_no_voters(self):
        e = build([cand("r1", (25, 75))], [])
        profile, vis = brute_force_optimal(e, "s", 1)
        assert profile.answers == (0, 0) and vis == 0.0

    def test_symmetric_two_questions(self):
        vs = [voter(f"a{i}", (0, 0)) for i in range(3)] + [voter(f"b{i}", (100, 100)) for i in range(3)]
        e = build([cand("r1", (25, 25)), cand("r2", (75, 75))], vs)
        profile, vis = brute_force_optimal(e, "s", 1)
        assert vis == 0.5 and profile.answers == (0, 0)

    @pytest.mark.parametrize("seed", range(3))
    def test_toy_matches_brute_force(self, seed):
        e = random_election(seed, nq=3, n_c=4, n_v=12, seats=1)
        _, best = brute_force_optimal(e, "s", 1)
        _, got = optimize_answers(e, "s", 1, "l2", FAST)
        assert got == best

    def test_crafted_loses_ties(self):
        e = build([cand("r1", (0, 25))], [voter("v", (0, 25))])
        assert crafted_visibility(e, "s", (0, 25), 1) == 0.0

    def test_injection_is_valid_and_consistent(self):
        from vaarobust.model import validate_election

        e = random_election(4)
        profile, vis = optimize_answers(e, "s", None, "l1", FAST)
        e2 = inject_candidate(e, "s", profile)
        assert validate_election(e2) == []
        assert candidate_visibility(e2, "l1")["crafted"] == pytest.approx(vis)

    def test_never_worse_than_its_starting_points(self):
        e = random_election(6, n_v=60)
        V = e.voter_answers
        med = [min(POLICY.allowed, key=lambda a: abs(a - m)) for m in np.nanmedian(V, axis=0)]
        _, vis = optimize_answers(e, "s", None, "l2", AnnealingConfig(iterations=50, restarts=2, seed=0))
        assert vis >= crafted_visibility(e, "s", med)

    def test_deterministic(self):
        e = random_election(8)
        cfg = AnnealingConfig(iterations=500, restarts=2, seed=5)
        assert optimize_answers(e, "s", None, "hybrid", cfg) == optimize_answers(e, "s", None, "hybrid", cfg)

    def test_parallel_restarts_match_serial(self):
        e = random_election(2)
        cfg = AnnealingConfig(iterations=400, restarts=3, seed=9)
        assert optimize_answers(e, "s", None, "l2", cfg, workers=3) == optimize_answers(e, "s", None, "l2", cfg)

    @pytest.mark.parametrize("method", ["angular", "mahalanobis", "agreement"])
    def test_other_methods_reach_brute_force(self, method):
        e = random_election(11, nq=3, n_c=5, n_v=15, seats=1)
        _, best = brute_force_optimal(e, "s", 1, method)
        _, got = optimize_answers(e, "s", 1, method, FAST)
        assert got == best

    @pytest.mark.parametrize("kwargs", [{"iterations": 0}, {"cooling_factor": 1.0}, {"restarts": 0},
                                        {"initial_temperature": 0}, {"voter_subsample_fraction": 0}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            AnnealingConfig(**kwargs)

    def test_brute_force_size_guard(self):
        e = random_election(0, nq=6)
        with pytest.raises(ValueError):
            brute_force_optimal(e, "s", limit=100)


class TestCalibration:
    @pytest.mark.parametrize("a,direction,expected", [
        (100, MODERATE, 75), (0, MODERATE, 25), (25, STRONG, 0), (75, STRONG, 100),
        (25, MODERATE, 25), (100, STRONG, 100),
    ])
    def test_policy_steps(self, a, direction, expected):
        assert calibrate_answers(Profile.complete((a,)), direction, [POLICY]).answers == (expected,)

    @pytest.mark.parametrize("direction", [MODERATE, STRONG])
    def test_value_neutral_is_fixed(self, direction):
        assert calibrate_answers(Profile.complete((50,)), direction, [VALUE]).answers == (50,)

    @pytest.mark.parametrize("a,direction,expected", [
        (83, MODERATE, 67), (67, MODERATE, 50), (67, STRONG, 83), (17, STRONG, 0), (75, MODERATE, 50),
    ])
    def test_multi_step_scales(self, a, direction, expected):
        scale = VALUE if a in VALUE else BUDGET
        assert calibrate_answers(Profile.complete((a,)), direction, [scale]).answers == (expected,)

    @given(st.sampled_from(POLICY.allowed))
    def test_round_trips_on_policy_scale(self, a):
        p = Profile.complete((a,))
        ms = calibrate_answers(calibrate_answers(p, STRONG, [POLICY]), MODERATE, [POLICY])
        sm = calibrate_answers(calibrate_answers(p, MODERATE, [POLICY]), STRONG, [POLICY])
        # poles come back through strong after moderate, inner answers through moderate after strong
        restored = sm if a in (0, 100) else ms
        assert restored.answers == (a,)

    def test_zero_baseline_is_undefined(self):
        cands = [cand("a", (0, 0), "A"), cand("b", (100, 100), "B")]
        e = build(cands, [voter("v", (100, 100))], shares={"A": .5, "B": .5})
        r = calibration_experiment(e, "A", "l2")
        assert r.relative_change["A"] is None and "A" in r.undefined

    def test_symmetric_calibration_changes_nothing(self):
        cands = [cand("a1", (0, 25), "A"), cand("a2", (100, 75), "A"),
                 cand("b1", (0, 25), "B"), cand("b2", (100, 75), "B")]
        e = build(cands, [voter(f"v{i}", (25 * (i % 2), 75)) for i in range(10)], seats={"s": 1})
        before = party_visibility(e, tiebreak=PROPORTIONAL).values
        both = calibrate_party(calibrate_party(e, "A", MODERATE), "B", MODERATE)
        after = party_visibility(both, tiebreak=PROPORTIONAL).values
        assert before == after == {"A": 0.5, "B": 0.5}

    def test_baseline_is_standalone_visibility(self):
        e = random_election(3)
        r = calibration_experiment(e, "A", "l1", STRONG)
        assert r.baseline == party_visibility(e, "l1").values

    @pytest.mark.parametrize("method", ["l2", "hybrid", "mahalanobis"])
    def test_incremental_rematch_agrees_with_full_recompute(self, method):
        e = random_election(7, n_v=50)
        r = calibration_experiment(e, "B", method, MODERATE)
        full = party_visibility(calibrate_party(e, "B", MODERATE), method).values
        assert r.attacked == pytest.approx(full, abs=1e-12)

    def test_unknown_party(self):
        with pytest.raises(ValueError):
            calibration_experiment(random_election(0), "Z")


class TestDiversification:
    def test_constant_candidates_per_share_is_undefined(self):
        cands = [cand("a1", (0, 0), "A"), cand("a2", (25, 0), "A"), cand("b1", (100, 100), "B"),
                 cand("b2", (75, 100), "B")]
        e = build(cands, [voter("v", (0, 0)), voter("w", (100, 75))], seats={"s": 2},
                  shares={"A": .5, "B": .5})
        res = diversification_analysis(e)
        assert res.undefined

    def test_duplicated_candidates_raise_ratio(self):
        cands = [cand(f"a{i}", (0, 0), "A") for i in range(6)] + [cand("b1", (100, 100), "B")]
        vs = [voter(f"v{i}", (0, 25) if i % 2 else (100, 75)) for i in range(20)]
        e = build(cands, vs, seats={"s": 2}, shares={"A": .5, "B": .5})
        rows = {r["party"]: r for r in diversification_analysis(e).rows}
        assert rows["A"]["visibility_ratio"] > 1
        assert rows["A"]["n_candidates"] == 6

    def test_symmetric_parties_equal_ratios(self):
        cands = [cand("a1", (0, 25), "A"), cand("b1", (0, 25), "B")]
        e = build(cands, [voter("v", (100, 100))], shares={"A": .5, "B": .5})
        rows = diversification_analysis(e, tiebreak=PROPORTIONAL).rows
        assert rows[0]["visibility_ratio"] == rows[1]["visibility_ratio"]

    def test_zero_clones(self):
        e = random_election(1)
        r = diversification_simulation(e, "A", 0)
        assert r.baseline == r.attacked

    def test_clones_of_top_candidate_never_hurt(self):
        cands = [cand("a1", (0, 0), "A"), cand("b1", (100, 100), "B"), cand("b2", (75, 75), "B")]
        vs = [voter(f"v{i}", (0, 25) if i % 3 else (100, 75)) for i in range(12)]
        e = build(cands, vs, seats={"s": 3}, shares={"A": .5, "B": .5})
        r = diversification_simulation(e, "A", 3, noise_scale=0, k=4)
        assert r.attacked["A"] >= r.baseline["A"]

    def test_clone_layout(self, small_election):
        e2 = clone_candidates(small_election, "CEN", 5, 1, seed=3)
        clones = [c for c in e2.candidates if c.id.startswith("CEN-clone-")]
        assert len(clones) == 5
        assert {c.state for c in clones} == {"a", "b"}
        from vaarobust.model import validate_election

        assert validate_election(e2) == []

    def test_simulation_matches_recount(self):
        e = random_election(5, n_v=30)
        r = diversification_simulation(e, "B", 4, 1, seed=2, tiebreak=LEXICOGRAPHIC)
        cloned = clone_candidates(e, "B", 4, 1, 2)
        counts = {"A": 0.0, "B": 0.0}
        k = e.states["s"]
        for v in cloned.voters:
            scored = sorted((round(compute_distance("l2", v.profile, c.profile), 9), c.sort_key, c.party)
                            for c in cloned.candidates)
            for _, _, p in scored[:k]:
                counts[p] += 1 / k
        assert r.attacked == pytest.approx({p: n / len(e.voters) for p, n in counts.items()})


class TestListCentralization:
    def test_spread_examples(self):
        cands = [cand("x", (25, 75), "X"), cand("y1", (0, 25), "Y"), cand("y2", (0, 25), "Y"),
                 cand("z1", (0, 0), "Z"), cand("z2", (100, 100), "Z")]
        e = build(cands, [])
        spread = {lst.id: list_spread(lst, e) for lst in e.lists}
        assert spread == {"s-X": 0.0, "s-Y": 0.0, "s-Z": 50.0}

    def test_rows_match_visibility(self):
        e = random_election(9, n_c=9, parties="ABC")
        res = list_centralization_analysis(e)
        vis = {lst.id: 0 for lst in e.lists}
        for v in e.voters:
            best = min(
                (round(np.mean([compute_distance("l2", v.profile, c.profile)
                                for c in e.candidates if c.id in lst.members]), 9), lst.id)
                for lst in e.lists
            )
            vis[best[1]] += 1
        assert {r["list"]: r["visibility"] for r in res.rows} == pytest.approx(
            {k: n / len(e.voters) for k, n in vis.items()})


class TestWeights:
    def test_identity_mapping(self):
        e = random_election(2)
        r = weight_scenario(e, "l2", {0: 0, 0.5: 0.5, 1: 1, 2: 2})
        assert all(x == 0 for x in r.relative_change.values() if x is not None)

    def test_default_weight_voters_are_excluded(self):
        e = random_election(2, n_v=20)
        plain = [voter(f"p{i}", (0, 25, 75, 100)) for i in range(5)]
        e2 = e.replace(voters=e.voters + tuple(plain))
        r = weight_scenario(e2, "l2", "strong")
        assert r.metadata["n_voters"] == weight_scenario(e, "l2", "strong").metadata["n_voters"]

    def test_strong_preset_matches_recount(self):
        e = random_election(12, n_v=25)
        r = weight_scenario(e, "l1", "strong")
        remap = {0.0: 0.0, 0.5: 0.1, 1.0: 1.0, 2.0: 10.0}
        counts = {"A": 0.0, "B": 0.0}
        n = 0
        k = e.states["s"]
        for v in e.voters:
            if all(w in (0, 1) for w in v.profile.weights):
                continue
            n += 1
            p = Profile(v.profile.answers, tuple(remap[w] for w in v.profile.weights))
            scored = sorted((round(compute_distance("l1", p, c.profile), 9), c.sort_key, c.party)
                            for c in e.candidates)
            for _, _, party in scored[:k]:
                counts[party] += 1 / k
        assert r.attacked == pytest.approx({p: c / n for p, c in counts.items()})

    @pytest.mark.parametrize("mapping", [{0: 0.1, 1: 1}, {0: 0, 1: 2}, {0: 0, 0.5: 1, 1: 1, 2: 2}])
    def test_invalid_mappings(self, mapping):
        with pytest.raises(ValueError):
            weight_scenario(random_election(0), "l2", mapping)


class TestSimilarityScore:
    def test_identical_voter_hits_top_bin(self):
        e = build([cand("a", (0, 25)), cand("b", (100, 100))], [voter("v", (0, 25))])
        h = top_match_distribution(e, bins=10)
        assert h.overall[-1] == 1 and h.scores[0] == pytest.approx(100)

    def test_identical_candidates_single_bin(self):
        e = build([cand(f"c{i}", (25, 75)) for i in range(3)],
                  [voter(f"v{i}", (25, 75)) for i in range(4)])
        h = top_match_distribution(e, bins=5)
        assert (h.overall > 0).sum() == 1

    def test_hand_count(self):
        e = build([cand("a", (0, 0), "A"), cand("b", (100, 100), "B")],
                  [voter("v1", (0, 0)), voter("v2", (0, 100)), voter("v3", (100, 75))])
        h = top_match_distribution(e, bins=[0, 50, 80, 100.0001])
        # v1 matches A exactly; v2 ties A and B at distance 100 (A wins on sort key); v3 is 25 from B
        denom = 100 * math.sqrt(2)
        expected = [100.0, 100 * (1 - 100 / denom), 100 * (1 - 25 / denom)]
        assert list(h.scores) == pytest.approx(expected)
        assert list(h.overall) == [1, 0, 2]
        assert list(h.by_party["A"]) == [1, 0, 1]
        assert list(h.by_party["B"]) == [0, 0, 1]


class TestQuestionFavoritism:
    def test_dominant_question_first(self):
        cands = [cand("a1", (0, 25, 75), "A"), cand("b1", (100, 25, 75), "B")]
        vs = [voter(f"v{i}", (0, 75 if i % 2 else 25, 100)) for i in range(6)]
        e = build(cands, vs)
        g = greedy_question_subset(e, "A", max_size=1)
        assert g.order == [1]

    def test_full_set_ends_at_baseline(self):
        e = random_election(4, nq=4)
        g = greedy_question_subset(e, "A")
        assert len(g.order) == 4 and sorted(g.order) == [1, 2, 3, 4]
        assert g.visibility[-1] == pytest.approx(g.baseline)

    def test_first_step_is_exhaustive_best(self):
        e = random_election(13, nq=5, n_v=50)
        g = greedy_question_subset(e, "B", max_size=2)
        single = []
        for t in range(5):
            W = np.zeros_like(e.voter_weights)
            W[:, t] = e.voter_weights[:, t]
            from vaarobust.ranking import match_election

            blocks = match_election(e, "l2", voter_weights=W)
            single.append(party_visibility(e, "l2", blocks=blocks).values["B"])
        best = max(x for x in single if not math.isnan(x))
        assert g.visibility[0] == best
        assert g.order[0] == 1 + single.index(best)

    def test_favorable_ordering_is_permutation(self):
        e = random_election(4, nq=4)
        assert sorted(favorable_ordering(e, "A", max_size=2)) == [1, 2, 3, 4]


class TestQuestionCorrelation:
    def test_self_and_negation(self):
        X = np.array([[0, 100], [25, 75], [75, 25], [100, 0], [25, 75]], dtype=float)
        r = question_correlation_matrix(X)
        assert r[0, 0] == 1.0 and r[0, 1] == pytest.approx(1.0)

    def test_independent_columns(self):
        rng = np.random.default_rng(0)
        X = rng.choice(POLICY.allowed, size=(10_000, 5)).astype(float)
        r = question_correlation_matrix(X)
        off = r[~np.eye(5, dtype=bool)]
        assert (off < 0.05).all()

    def test_pairwise_complete_and_undefined(self):
        X = np.array([[0, 50, np.nan], [25, 50, 0], [100, 50, 100], [75, 50, np.nan]])
        r = question_correlation_matrix(X)
        assert math.isnan(r[0, 1]) and math.isnan(r[1, 1])
        assert r[0, 2] == pytest.approx(1.0)


class TestDuplicateQuestion:
    def _arrays(self, e):
        return e.voter_answers, e.voter_weights, e.candidate_answers

    def test_l1_doubles_the_weight(self):
        e = random_election(3, n_v=30)
        dup = duplicate_questions(e, 2, 1)
        V, W, C = self._arrays(e)
        W2 = W.copy()
        W2[:, 1] *= 2
        a = pairwise_distances("l1", *self._arrays(dup)[:2], dup.candidate_answers, dup.scales)
        b = pairwise_distances("l1", V, W2, C, e.scales)
        assert np.array_equal(a, b)
        term = np.abs(V[:, 1:2] - C[None, :, 1][0]) * W[:, 1:2]
        assert np.array_equal(a, pairwise_distances("l1", V, W, C, e.scales) + term)

    def test_l2_scales_by_sqrt_two(self):
        e = random_election(4, n_v=30)
        dup = duplicate_questions(e, 3, 1)
        V, W, C = self._arrays(e)
        W2 = W.copy()
        W2[:, 2] *= math.sqrt(2)
        a = pairwise_distances("l2", dup.voter_answers, dup.voter_weights, dup.candidate_answers, dup.scales)
        b = pairwise_distances("l2", V, W2, C, e.scales)
        assert np.allclose(a, b, rtol=0, atol=1e-9)

    def test_zero_visibility_party_flagged(self):
        cands = [cand("a", (0, 0), "A"), cand("b", (100, 100), "B")]
        e = build(cands, [voter("v", (0, 25))])
        r = duplicate_question_attack(e, 1, 2)
        assert "B" in r.undefined


class TestQuestionOrder:
    def complete_election(self):
        e = random_election(14, nq=6, n_v=60)
        return e

    def test_drop_model_rate(self):
        assert DropModel().rate(75) == pytest.approx(0.87)
        assert DropModel().rate(75) == 0.96 - 75 * 0.0012

    def test_no_drops_no_change(self):
        e = self.complete_election()
        order = list(range(6, 0, -1))
        r = question_order_experiment(e, order, DropModel.constant(1.0, 6), trials=3, seed=0)
        assert all(v == 0 for v in r.extra["rel_change"].values())
        assert all(v == 0 for v in r.extra["rel_change_std"].values())

    def test_all_dropped_engages_empty_overlap(self):
        e = self.complete_election()
        r = question_order_experiment(e, list(range(1, 7)), DropModel.constant(0.0, 6), trials=2, seed=0)
        assert r.metadata["excluded_per_trial"] == [60, 60]
        assert all(math.isnan(v) for v in r.attacked.values())
        assert set(r.undefined) == {"A", "B"}

    def test_deterministic_and_seed_sensitive(self):
        e = self.complete_election()
        drop = DropModel(0.9, 0.1)
        a = question_order_experiment(e, [6, 5, 4, 3, 2, 1], drop, trials=4, seed=1)
        b = question_order_experiment(e, [6, 5, 4, 3, 2, 1], drop, trials=4, seed=1)
        c = question_order_experiment(e, [6, 5, 4, 3, 2, 1], drop, trials=4, seed=2)
        assert a.to_csv() == b.to_csv()
        assert a.to_csv() != c.to_csv()

    def test_bad_ordering(self):
        with pytest.raises(ValueError):
            question_order_experiment(self.complete_election(), [1, 1, 2, 3, 4, 5])

    def test_rates_outside_unit_interval(self):
        with pytest.raises(ValueError):
            DropModel(0.5, 0.1).rates(10)


class TestTieBreak:
    def test_no_ties(self):
        e = build([cand("a", (0, 0)), cand("b", (100, 100)), cand("c", (25, 75))],
                  [voter("v1", (0, 25)), voter("v2", (100, 75))])
        r = tiebreak_impact(e, k=1)
        assert all(x in (0, None) for x in r.relative_change.values())

    def test_forced_split(self):
        e = build([cand("z", (25, 75), sort_key="Zzz"), cand("a", (25, 75), sort_key="Aaa")],
                  [voter(f"v{i}", (0, 100)) for i in range(4)])
        r = tiebreak_impact(e, k=1)
        assert r.baseline == {"z": 0.5, "a": 0.5}
        assert r.relative_change == {"a": 1.0, "z": -1.0}

    def test_matches_recount(self):
        e = random_election(21, nq=2, n_c=6, n_v=30, seats=1)
        r = tiebreak_impact(e, k=1)
        fair = {c.id: 0.0 for c in e.candidates}
        lex = dict(fair)
        for v in e.voters:
            d = {c.id: round(compute_distance("l2", v.profile, c.profile), 9) for c in e.candidates}
            best = min(d.values())
            tied = sorted(c for c in d if d[c] == best)
            for c in tied:
                fair[c] += 1 / len(tied)
            lex[min(tied, key=lambda c: next(x.sort_key for x in e.candidates if x.id == c))] += 1
        n = len(e.voters)
        assert r.baseline == pytest.approx({c: x / n for c, x in fair.items()})
        assert r.attacked == pytest.approx({c: x / n for c, x in lex.items()})


class TestReport:
    def test_csv_and_sidecar(self, tmp_path):
        r = AttackReport("demo", {"A": 0.5, "B": 0.0}, {"A": 0.75, "B": 0.1}, {"seed": 3})
        r.write(tmp_path / "out.csv")
        lines = (tmp_path / "out.csv").read_text().splitlines()
        assert lines[0] == "scenario,entity,baseline,attacked,rel_change"
        assert lines[1] == "demo,A,0.5,0.75,0.5"
        assert lines[2] == "demo,B,0.0,0.1,"
        import json

        meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
        assert meta["undefined"] == ["B"] and meta["seed"] == 3


def test_every_experiment_is_deterministic():
    e = random_election(30, n_v=40)
    runs = [
        lambda: calibration_experiment(e, "A", "angular").to_csv(),
        lambda: diversification_simulation(e, "A", 3, 1, seed=4).to_csv(),
        lambda: weight_scenario(e, "hybrid", "weak").to_csv(),
        lambda: duplicate_question_attack(e, 1, 2, "l1").to_csv(),
        lambda: question_order_experiment(e, [4, 3, 2, 1], DropModel(0.9, 0.05), 3, 7).to_csv(),
    ]
    for run in runs:
        assert run() == run()


def test_correlation_matrix_accepts_elections():
    e = build([cand("a", (0, 0))], [voter("v1", (0, 25)), voter("v2", (100, 75)), voter("v3", (25, 25))],
              qs=questions(2))
    assert question_correlation_matrix(e).shape == (2, 2)
    assert question_correlation_matrix(list(e.voters)).shape == (2, 2)


def test_brute_force_is_exhaustive():
    e = random_election(17, nq=2, n_c=3, n_v=10, seats=1)
    best = max(crafted_visibility(e, "s", p, 1) for p in itertools.product(POLICY.allowed, repeat=2))
    assert brute_force_optimal(e, "s", 1)[1] == best
