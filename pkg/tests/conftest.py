"""Shared builders for tests: tiny instances and seeded random generators."""

import numpy as np
import pytest

from matchboard.model import (
    AttributeBag,
    Case,
    CrossRef,
    Instance,
    Location,
    MODE_OUTCOME,
    MODE_PREFERENCE,
    ScoreMatrix,
    compatibility,
)

LANGS = ["ar", "en", "fr", "so", "uk"]


def make_case(cid, members=1, employable=0, languages=("en",), flags=(), levels=(),
              prefs=(), refusals=(), crossrefs=(), k=2):
    levels = tuple(levels) if levels else tuple([0.5] * k)
    return Case(
        id=cid, display_name=f"Case {cid}", member_count=members,
        employable_count=employable,
        attributes=AttributeBag(languages=frozenset(languages), nationality="xx",
                                flags=frozenset(flags), levels=levels),
        preference_ranks=tuple(prefs), refusals=frozenset(refusals),
        cross_refs=tuple(crossrefs))


def make_location(lid, cap_c=2, cap_r=6, languages=("en",), services=(), desired=(), k=2):
    desired = tuple(desired) if desired else tuple([0.5] * k)
    return Location(
        id=lid, display_name=f"Location {lid}", case_capacity=cap_c, member_capacity=cap_r,
        supported_languages=frozenset(languages), services=frozenset(services),
        desired_levels=desired)


def random_instance(rng: np.random.Generator, n_cases: int, n_locations: int,
                    mode: str = MODE_OUTCOME, k: int = 2, with_crossrefs: bool = True):
    """Instance whose compatibility mask is real; scores drawn uniformly."""
    loc_ids = [f"L{j}" for j in range(n_locations)]
    locations = [
        make_location(
            lid,
            cap_c=int(rng.integers(0, 4)),
            cap_r=int(rng.integers(0, 9)),
            languages=list(rng.choice(LANGS, size=int(rng.integers(1, 3)), replace=False)),
            desired=list(rng.uniform(0, 1, size=k)),
            k=k,
        ) for lid in loc_ids
    ]
    cases = []
    for i in range(n_cases):
        members = int(rng.integers(1, 5))
        ranked = list(rng.permutation(loc_ids))[: int(rng.integers(0, n_locations + 1))]
        rest = [l for l in loc_ids if l not in ranked]
        refusals = [l for l in rest if rng.random() < 0.2]
        crossrefs = []
        if with_crossrefs and i > 0 and rng.random() < 0.4:
            crossrefs.append(CrossRef(f"F{int(rng.integers(0, i))}", "case"))
        if with_crossrefs and rng.random() < 0.2:
            crossrefs.append(CrossRef(str(rng.choice(loc_ids)), "location"))
        cases.append(make_case(
            f"F{i}", members=members, employable=int(rng.integers(0, members + 1)),
            languages=list(rng.choice(LANGS, size=int(rng.integers(1, 3)), replace=False)),
            levels=list(rng.uniform(0, 1, size=k)),
            prefs=ranked, refusals=refusals, crossrefs=crossrefs, k=k))
    instance = Instance(cases=tuple(cases), locations=tuple(locations),
                        attribute_dimension=k, mode=mode)

    scores = rng.uniform(0.0, 1.5, size=(n_cases, n_locations))
    compat = np.zeros((n_cases, n_locations), dtype=bool)
    reasons = {}
    for i, c in enumerate(cases):
        for j, l in enumerate(locations):
            ok, why = compatibility(c, l, mode)
            compat[i, j] = ok
            if not ok:
                reasons[(c.id, l.id)] = why
    matrix = ScoreMatrix(case_ids=tuple(c.id for c in cases),
                         location_ids=tuple(loc_ids),
                         scores=scores, compatible=compat, reasons=reasons)
    return instance, matrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
