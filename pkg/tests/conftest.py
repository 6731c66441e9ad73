from __future__ import annotations

import contextlib
import time
from collections.abc import Iterable, Sequence

import pytest

from vaarobust.model import POLICY, Candidate, Election, Party, PartyList, Profile, Question, Voter
from vaarobust.synth import SynthConfig, generate_election


def questions(n: int, scale=POLICY) -> tuple[Question, ...]:
    return tuple(Question(i + 1, f"q{i + 1}", scale) for i in range(n))


def cand(cid: str, answers: Sequence[float], party: str = "A", state: str = "s", sort_key: str | None = None):
    """Candidate spec consumed by :func:`build`."""
    return dict(id=cid, answers=tuple(answers), party=party, state=state, sort_key=sort_key or cid)


def voter(vid: str, answers: Sequence[float | None], weights: Sequence[float] | None = None,
          state: str = "s", pref: str | None = None, timestamp: int = 0, election_id: str | None = "e"):
    w = tuple(1.0 for _ in answers) if weights is None else tuple(weights)
    return Voter(vid, state, Profile(tuple(answers), w), pref, timestamp, election_id)


def build(
    candidates: Iterable[dict],
    voters: Iterable[Voter] = (),
    *,
    seats: dict[str, int] | None = None,
    qs: Sequence[Question] | None = None,
    lists: str = "party",
    shares: dict[str, float] | None = None,
) -> Election:
    """Small election; lists are one per (state, party) or one per candidate."""
    cands = list(candidates)
    nq = len(cands[0]["answers"]) if cands else len(qs or ())
    qs = tuple(qs) if qs is not None else questions(nq)
    states = seats or {s: 1 for s in dict.fromkeys(c["state"] for c in cands)}
    groups: dict[str, list[str]] = {}
    list_of = {}
    for c in cands:
        lid = f"{c['state']}-{c['party']}" if lists == "party" else f"L-{c['id']}"
        groups.setdefault(lid, []).append(c["id"])
        list_of[c["id"]] = lid
    cand_state = {c["id"]: c["state"] for c in cands}
    cand_party = {c["id"]: c["party"] for c in cands}
    out_lists = tuple(
        PartyList(lid, cand_state[m[0]], cand_party[m[0]], tuple(m)) for lid, m in groups.items()
    )
    parties = ()
    if shares is not None:
        parties = tuple(Party(p, p, s) for p, s in shares.items())
    return Election(
        questions=qs,
        states=states,
        candidates=tuple(
            Candidate(c["id"], c["sort_key"], c["state"], c["party"], list_of[c["id"]], Profile.complete(c["answers"]))
            for c in cands
        ),
        voters=tuple(voters),
        lists=out_lists,
        parties=parties,
    )


SMALL_STATES = (
    {"name": "a", "seats": 3, "n_candidates": 20, "n_voters": 300},
    {"name": "b", "seats": 2, "n_candidates": 12, "n_voters": 200},
)


def small_config(seed: int = 3, **overrides) -> SynthConfig:
    data = {"seed": seed, "states": SMALL_STATES, "n_policy": 10, "n_value": 3, "n_budget": 3}
    data.update(overrides)
    return SynthConfig.from_dict(data)


@pytest.fixture(scope="session")
def small_election() -> Election:
    return generate_election(small_config())


@pytest.fixture(scope="session")
def default_election() -> Election:
    return generate_election(SynthConfig())


# acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary
_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    results = request.config.stash.setdefault(_CRITERIA, {})

    @contextlib.contextmanager
    def record(number: int, title: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            results[number] = (title, "FAIL", f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}",
                               time.perf_counter() - start)
            raise
        results[number] = (title, "PASS", "", time.perf_counter() - start)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, status, detail, secs = results[n]
        line = f"criterion {n:2d} {status}  {title} ({secs:.2f}s)"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
