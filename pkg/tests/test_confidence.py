import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecbf import (AttributeDef, AttributeSchema, ConfidenceProfile,
                  default_schema, load_profile, save_profile)
from ecbf.confidence import close_window, conf_pair, conf_single, observe_packet, score_packet
from ecbf.errors import (CorruptDocument, EmptyProfile, SchemaMismatch,
                         UnknownPair, VersionMismatch)
from tests.oracles import brute_pair_score


def small_schema():
    return AttributeSchema((AttributeDef("ttl", "ttl"), AttributeDef("proto", "protocol"),
                            AttributeDef("tos", "tos")))


def random_vectors(rng, n, width=3, domain=4):
    return [tuple(rng.randrange(domain) for _ in range(width)) for _ in range(n)]


def profile_of(vectors, schema=None, **kw):
    p = ConfidenceProfile(schema or small_schema(), **kw)
    for v in vectors:
        p.observe(v)
    p.close_window()
    return p


# -- counting ----------------------------------------------------------------

def test_one_packet_counts():
    p = ConfidenceProfile(small_schema())
    observe_packet(p, (64, 6, 0))
    w = p.open_window
    assert w.n_total == 1
    assert all(d == {v: 1} for d, v in zip(w.singles, (64, 6, 0)))
    assert all(len(d) == 1 and list(d.values()) == [1] for d in w.pairs)


def test_two_identical_packets():
    p = ConfidenceProfile(small_schema())
    p.observe((64, 6, 0))
    p.observe((64, 6, 0))
    assert p.open_window.singles[0][64] == 2
    assert p.open_window.pairs[0][(64, 6)] == 2


def test_counts_match_brute_force_recount():
    rng = random.Random(11)
    vecs = random_vectors(rng, 10_000, domain=9)
    p = profile_of(vecs)
    assert p.n_total == 10_000
    for i in range(3):
        assert p.cumulative.singles[i] == Counter(v[i] for v in vecs)
        assert sum(p.cumulative.singles[i].values()) == 10_000
    for k, (r, s) in enumerate(p.schema.pairs):
        assert p.cumulative.pairs[k] == Counter((v[r], v[s]) for v in vecs)


def test_schema_mismatch():
    p = ConfidenceProfile(small_schema())
    with pytest.raises(SchemaMismatch):
        p.observe((1, 2))


# -- windows -----------------------------------------------------------------

def test_close_window_sums_and_decay():
    p = ConfidenceProfile(small_schema())
    for _ in range(5):
        p.observe((1, 1, 1))
    close_window(p)
    assert p.n_total == 5
    for _ in range(5):
        p.observe((1, 1, 1))
    p.close_window()
    assert p.n_total == 10 and p.windows_closed == 2

    d = ConfidenceProfile(small_schema(), decay=0.5)
    for _ in range(10):
        d.observe((1, 1, 1))
    d.close_window()
    for _ in range(4):
        d.observe((2, 2, 2))
    d.close_window()
    assert d.n_total == 9.0
    assert d.cumulative.singles[0] == {1: 5.0, 2: 4}


def test_time_window_boundary_triggers_close():
    p = ConfidenceProfile(small_schema(), window_seconds=10)
    p.observe((1, 1, 1), 0.0)
    p.observe((1, 1, 1), 9.99)
    assert p.windows_closed == 0
    p.observe((2, 2, 2), 10.0)
    assert p.windows_closed == 1 and p.n_total == 2
    assert p.open_window.n_total == 1


def test_packet_count_windows_without_timestamps():
    p = ConfidenceProfile(small_schema(), window_packets=3)
    for _ in range(7):
        p.observe((0, 0, 0))
    assert p.windows_closed == 2 and p.n_total == 6


def test_queries_ignore_open_window():
    p = ConfidenceProfile(small_schema())
    p.observe((1, 1, 1))
    with pytest.raises(EmptyProfile):
        p.conf_single(0, 1)
    p.close_window()
    p.observe((2, 2, 2))
    assert p.conf_single(0, 1) == 1.0
    assert p.conf_single(0, 2) == 0.0


# -- confidence queries --------------------------------------------------------

def test_conf_single_ratio():
    p = profile_of([(64, 6, 0), (64, 6, 0), (64, 17, 0), (128, 6, 0)])
    assert conf_single(p, 0, 64) == 0.75
    assert conf_single(p, 0, 99) == 0.0
    assert profile_of([(5, 5, 5)]).conf_single(2, 5) == 1.0


def test_conf_pair_ratio():
    p = profile_of([(64, 6, 0), (64, 6, 0), (64, 17, 0), (128, 17, 0)])
    assert conf_pair(p, 0, (64, 6)) == 0.5
    # individually common, never together
    assert p.conf_pair(0, (128, 6)) == 0.0
    with pytest.raises(UnknownPair):
        p.conf_pair(7, (1, 1))


def test_empty_profile_queries_raise():
    p = ConfidenceProfile(small_schema())
    for call in (lambda: p.conf_single(0, 1), lambda: p.conf_pair(0, (1, 1)),
                 lambda: p.score((1, 1, 1))):
        with pytest.raises(EmptyProfile):
            call()


@settings(max_examples=60)
@given(st.lists(st.tuples(*[st.integers(0, 3)] * 3), min_size=1, max_size=60),
       st.tuples(*[st.integers(0, 4)] * 3))
def test_invariants(vecs, query):
    p = profile_of(vecs)
    for i in range(3):
        total = sum(p.conf_single(i, v) for v in p.cumulative.singles[i])
        assert abs(total - 1) <= 1e-9
    for k, (r, s) in enumerate(p.schema.pairs):
        total = sum(p.conf_pair(k, key) for key in p.cumulative.pairs[k])
        assert abs(total - 1) <= 1e-9
        x, y = query[r], query[s]
        assert p.conf_pair(k, (x, y)) <= min(p.conf_single(r, x), p.conf_single(s, y))
    assert 0.0 <= p.score(query) <= 1.0


@settings(max_examples=30)
@given(st.lists(st.tuples(*[st.integers(0, 3)] * 3), min_size=1, max_size=40),
       st.randoms(use_true_random=False))
def test_permutation_invariance(vecs, rnd):
    shuffled = list(vecs)
    rnd.shuffle(shuffled)
    assert profile_of(vecs) == profile_of(shuffled)


# -- scoring -------------------------------------------------------------------

def test_score_of_sole_training_packet_is_one():
    assert profile_of([(3, 4, 5)]).score((3, 4, 5)) == 1.0


def test_score_with_no_shared_pairs_is_zero():
    p = profile_of([(1, 1, 1), (2, 2, 2)])
    assert score_packet(p, (1, 2, 9)) == 0.0


def test_score_matches_brute_force_oracle():
    rng = random.Random(2024)
    schema = default_schema()
    for _ in range(100):
        train = random_vectors(rng, rng.randint(1, 60), width=7, domain=3)
        p = profile_of(train, schema)
        q = train[rng.randrange(len(train))] if rng.random() < 0.5 else \
            random_vectors(rng, 1, 7, 3)[0]
        expected = brute_pair_score(train, q, schema.pairs)
        assert abs(p.score(q) - expected) <= 1e-12


def test_weighted_score_matches_oracle():
    rng = random.Random(5)
    weights = (0.0, 2.0, 0.5)
    schema = AttributeSchema(small_schema().attributes, weights=weights)
    train = random_vectors(rng, 50)
    p = profile_of(train, schema)
    for q in random_vectors(rng, 20):
        assert abs(p.score(q) - brute_pair_score(train, q, schema.pairs, weights)) <= 1e-12


def test_alternate_score_modes():
    p = profile_of([(1, 1, 1), (1, 1, 2)])
    assert p.score((1, 1, 1), "sum") == pytest.approx(1.0 + 0.5 + 0.5)
    assert p.score((1, 1, 1), "min") == 0.5
    with pytest.raises(ValueError):
        p.score((1, 1, 1), "median")


# -- persistence ----------------------------------------------------------------

def test_empty_roundtrip():
    p = ConfidenceProfile(default_schema())
    assert load_profile(save_profile(p)) == p


def test_large_roundtrip_field_by_field(profile42):
    q = load_profile(save_profile(profile42))
    assert q.schema == profile42.schema
    assert q.windows_closed == profile42.windows_closed and q.decay == profile42.decay
    assert q.cumulative.n_total == profile42.cumulative.n_total
    for a, b in zip(q.cumulative.singles + q.cumulative.pairs,
                    profile42.cumulative.singles + profile42.cumulative.pairs):
        assert a == b
    assert save_profile(q) == save_profile(profile42)


def test_decayed_roundtrip_is_exact():
    rng = random.Random(1)
    p = ConfidenceProfile(small_schema(), decay=0.3, window_packets=7)
    for v in random_vectors(rng, 100):
        p.observe(v)
    p.close_window()
    assert load_profile(save_profile(p)) == p


def test_document_errors():
    doc = save_profile(ConfidenceProfile(small_schema()))
    with pytest.raises(VersionMismatch):
        load_profile(doc.replace('"version": 1', '"version": 9'))
    with pytest.raises(CorruptDocument):
        load_profile("{not json")
    with pytest.raises(CorruptDocument):
        load_profile('{"version": 1, "schema": {}}')
