import random

import pytest

import gen
import oracles
from corefeval.align import EXACT, PARTIAL, align_mentions, matches, solve_alignment
from corefeval.conllu import parse_text
from corefeval.heads import mention_head
from corefeval.model import build_coref_layer


def two_sided(key_specs, resp_specs, n_words=10):
    """Build one skeleton and parse two annotations of it."""
    skel = gen.Skeleton("d", [gen.SentenceSpec([
        gen.NodeSpec(str(i), f"w{i}", f"l{i}", "NOUN", "_",
                     "0" if i == 1 else str(i - 1), "dep", "_", False)
        for i in range(1, n_words + 1)])])
    key = build_coref_layer(parse_text(gen.conllu_text(skel, [
        gen.MentionSpec(eid, pos, fields) for eid, pos, *rest in key_specs
        for fields in [rest[0] if rest else ()]]))[0])
    resp = build_coref_layer(parse_text(gen.conllu_text(skel, [
        gen.MentionSpec(eid, pos) for eid, pos in resp_specs]))[0])
    return key.sorted_mentions(), resp.sorted_mentions()


class TestMatchPredicate:
    # continuous key over positions {0,1,2}, head at position 1 (provided
    # head index 2); position 3 lies outside the key
    CONTINUOUS = [
        ((1,), True), ((0, 1), True), ((1, 2), True), ((0, 1, 2), True),
        ((0,), False), ((0, 2), False), ((2,), False), ((0, 1, 2, 3), False),
        ((1, 3), False), ((3,), False),
    ]

    @pytest.mark.parametrize("resp_positions,expected", CONTINUOUS)
    def test_continuous_partial_matching(self, resp_positions, expected):
        key_ms, resp_ms = two_sided(
            [("e1", (0, 1, 2), ("thing", "2"))], [("r1", resp_positions)])
        assert matches(key_ms[0], resp_ms[0], PARTIAL) is expected

    # discontinuous key {0, 1, 4} with head 1; 2, 3 fill the gap
    DISCONTINUOUS = [
        ((1,), True), ((1, 4), True), ((0, 1), True), ((0, 1, 4), True),
        ((0, 4), False), ((1, 2), False), ((0, 1, 2, 4), False), ((4,), False),
    ]

    @pytest.mark.parametrize("resp_positions,expected", DISCONTINUOUS)
    def test_discontinuous_partial_matching(self, resp_positions, expected):
        key_ms, resp_ms = two_sided(
            [("e1", (0, 1, 4), ("thing", "2"))], [("r1", resp_positions)])
        assert matches(key_ms[0], resp_ms[0], PARTIAL) is expected

    def test_exact_requires_equality(self):
        key_ms, resp_ms = two_sided([("e1", (0, 1, 2))],
                                    [("r1", (0, 1, 2)), ("r2", (0, 1))])
        by_span = {r.position_set: r for r in resp_ms}
        assert matches(key_ms[0], by_span[frozenset({0, 1, 2})], EXACT)
        assert not matches(key_ms[0], by_span[frozenset({0, 1})], EXACT)

    def test_subset_enumeration_against_predicate(self):
        # every nonempty subset of a 3-node key plus one outside node
        key_ms, _ = two_sided([("e1", (0, 2, 4), ("thing", "2"))], [])
        key = key_ms[0]
        head = mention_head(key).index
        for mask in range(1, 16):
            positions = tuple(p for bit, p in enumerate((0, 2, 4, 6))
                              if mask & (1 << bit))
            _, resp_ms = two_sided([], [("r1", positions)])
            expected = set(positions) <= {0, 2, 4} and head in positions
            assert matches(key, resp_ms[0], PARTIAL) is expected


class TestAlignment:
    def test_identical_lists_align_perfectly(self):
        specs = [("e1", (0, 1)), ("e1", (3,)), ("e2", (5, 6, 7))]
        key_ms, resp_ms = two_sided(specs, [(e, p) for e, p in specs])
        alignment = align_mentions(key_ms, resp_ms, EXACT)
        assert len(alignment.pairs) == 3
        for k, r in alignment.pairs:
            assert k.position_set == r.position_set

    def test_overlap_breaks_cardinality_ties(self):
        # key {a,b,c} head b; responses {b} and {a,b,c}: the full span wins
        key_ms, resp_ms = two_sided([("e1", (0, 1, 2), ("x", "2"))],
                                    [("r1", (1,)), ("r2", (0, 1, 2))])
        alignment = align_mentions(key_ms, resp_ms, PARTIAL)
        ((key, resp),) = alignment.pairs
        assert resp.position_set == frozenset({0, 1, 2})

    def test_documented_tie_break_on_nested_keys(self):
        # keys {a,b,c} head b and {b} head b; single response {b}: equal
        # overlap, the tighter key {b} wins
        key_ms, resp_ms = two_sided(
            [("e1", (0, 1, 2), ("x", "2")), ("e2", (1,))], [("r1", (1,))])
        alignment = align_mentions(key_ms, resp_ms, PARTIAL)
        ((key, _resp),) = alignment.pairs
        assert key.position_set == frozenset({1})

    def test_alignment_size_bounded(self, rng):
        for seed in range(25):
            key_ms, resp_ms = _random_pair(seed)
            for policy in (EXACT, PARTIAL):
                alignment = align_mentions(key_ms, resp_ms, policy)
                assert len(alignment.pairs) <= min(len(key_ms), len(resp_ms))

    def test_partial_cardinality_at_least_exact(self, rng):
        for seed in range(25):
            key_ms, resp_ms = _random_pair(seed)
            exact = align_mentions(key_ms, resp_ms, EXACT)
            partial = align_mentions(key_ms, resp_ms, PARTIAL)
            assert len(partial.pairs) >= len(exact.pairs)

    def test_exact_is_span_intersection_when_duplicate_free(self, rng):
        for seed in range(25):
            key_ms, resp_ms = _random_pair(seed)
            key_spans = [m.position_set for m in key_ms]
            resp_spans = [m.position_set for m in resp_ms]
            if len(set(key_spans)) < len(key_spans):
                continue
            if len(set(resp_spans)) < len(resp_spans):
                continue
            alignment = align_mentions(key_ms, resp_ms, EXACT)
            assert {k.position_set for k, _ in alignment.pairs} == \
                   set(key_spans) & set(resp_spans)

    def test_exhaustive_oracle_agreement(self):
        for seed in range(120):
            key_ms, resp_ms = _random_pair(seed, small=True)
            for policy in (EXACT, PARTIAL):
                edges = [(i, j) for i, k in enumerate(key_ms)
                         for j, r in enumerate(resp_ms) if matches(k, r, policy)]
                overlaps = {(i, j): len(key_ms[i].position_set
                                        & resp_ms[j].position_set)
                            for i, j in edges}
                sizes = [len(k.position_set) for k in key_ms]
                expected = oracles.exhaustive_alignment(edges, overlaps, sizes)
                got = solve_alignment(overlaps, sizes)
                assert got == expected, f"seed {seed} policy {policy}"

    def test_order_independence(self, rng):
        key_ms, resp_ms = _random_pair(7)
        pairs = align_mentions(key_ms, resp_ms, PARTIAL).pairs
        shuffled_keys = list(key_ms)
        shuffled_resps = list(resp_ms)
        random.Random(1).shuffle(shuffled_keys)
        random.Random(2).shuffle(shuffled_resps)
        pairs2 = align_mentions(shuffled_keys, shuffled_resps, PARTIAL).pairs
        as_sets = lambda ps: {(k.position_set, r.position_set) for k, r in ps}
        assert as_sets(pairs) == as_sets(pairs2)


def _random_pair(seed, small=False):
    sub = random.Random(seed)
    skel = gen.random_skeleton(sub, f"d{seed}", n_sentences=(1, 2),
                               n_words=(4, 7 if small else 9))
    key = gen.random_mentions(sub, skel, n_entities=(1, 3),
                              n_mentions=(1, 3 if small else 4))
    resp = gen.perturb_mentions(sub, key, skel)
    key_layer = build_coref_layer(parse_text(gen.conllu_text(skel, key))[0])
    resp_layer = build_coref_layer(parse_text(gen.conllu_text(skel, resp))[0])
    return key_layer.sorted_mentions(), resp_layer.sorted_mentions()
