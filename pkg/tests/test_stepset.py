import itertools

import pytest
from hypothesis import given, strategies as st

from octwalk import stepset as ss
from octwalk.countkernel import brute_force_walks

masks = st.integers(min_value=0, max_value=ss.FULL_MASK)


def test_decode_empty():
    assert ss.decode(0) == []


def test_decode_paper_diagram():
    m = ss.from_diagram("000100000 10100010 000000000")
    assert set(ss.decode(m)) == {(-1, 0, -1), (-1, -1, 0), (0, 1, 0), (1, -1, 0)}


def test_decode_second_diagram():
    m = ss.from_diagram("100000000 00001010 000010000")
    assert set(ss.decode(m)) == {(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)}


def test_block_order():
    # first nine bits have z = -1, ordered by (y, x)
    assert ss.STEPS[0] == (-1, -1, -1)
    assert ss.STEPS[1] == (0, -1, -1)
    assert ss.STEPS[3] == (-1, 0, -1)
    assert all(s[2] == 0 for s in ss.STEPS[9:17])
    assert all(s[2] == 1 for s in ss.STEPS[17:])
    assert len(set(ss.STEPS)) == 26 and (0, 0, 0) not in ss.STEPS


def test_out_of_range_mask():
    with pytest.raises(ss.InvalidMask):
        ss.decode(1 << 26)
    with pytest.raises(ss.InvalidMask):
        ss.decode(-1)
    with pytest.raises(ss.InvalidMask):
        ss.encode([(0, 0, 0)])


@given(masks)
def test_encode_decode_roundtrip(m):
    assert ss.encode(ss.decode(m)) == m
    assert ss.from_diagram(ss.to_diagram(m)) == m


def test_permutation_examples():
    x = ss.encode([(1, 0, 0)])
    assert ss.apply_permutation(x, (0, 1, 2)) == x
    assert ss.apply_permutation(x, (1, 0, 2)) == ss.encode([(0, 1, 0)])
    for p in range(6):
        assert ss.apply_permutation(ss.FULL_MASK, p) == ss.FULL_MASK


@given(masks, st.integers(0, 5))
def test_permutation_matches_definition(m, p):
    perm = ss.PERMUTATIONS[p]
    expected = ss.encode([(s[perm[0]], s[perm[1]], s[perm[2]]) for s in ss.decode(m)])
    assert ss.apply_permutation(m, p) == expected


def test_permutations_form_bijection():
    sample = list(range(0, 1 << 26, 99991))
    for p in range(6):
        assert len({ss.apply_permutation(m, p) for m in sample}) == len(sample)


def test_usable_closure_examples():
    m = ss.from_diagram("000100000 10100010 000000000")
    assert set(ss.decode(ss.usable_closure(m))) == {(-1, -1, 0), (0, 1, 0), (1, -1, 0)}
    x = ss.encode([(1, 0, 0)])
    assert ss.usable_closure(x) == x
    assert ss.usable_closure(ss.encode([(1, -1, 0), (-1, 1, 0)])) == 0


@given(st.integers(1, ss.FULL_MASK).filter(lambda m: ss.popcount(m) <= 7))
def test_closure_preserves_counts_and_is_idempotent(m):
    c = ss.usable_closure(m)
    assert ss.usable_closure(c) == c
    assert c & ~m == 0
    if c:
        assert brute_force_walks(m, 7) == brute_force_walks(c, 7)
    else:
        assert brute_force_walks(m, 7) == [1] + [0] * 7


@given(masks)
def test_canonical_form_invariance(m):
    c = ss.canonical_form(m)
    assert ss.canonical_form(c) == c
    for p in range(6):
        assert ss.canonical_form(ss.apply_permutation(m, p)) == c


def test_paper_pair_has_same_canonical_form():
    a = ss.from_diagram("000100000 10100010 000000000")
    b = ss.usable_closure(a)
    assert ss.canonical_form(a) == ss.canonical_form(b)
    assert ss.canonical_form(ss.FULL_MASK) == ss.FULL_MASK


def test_small_class_counts_by_brute_force():
    # direct orbit count over all masks of size <= 3, half-space models removed
    for k, expected in ((1, 0), (2, 0), (3, 73)):
        seen = set()
        for bits in itertools.combinations(range(26), k):
            m = sum(1 << b for b in bits)
            if ss.usable_closure(m) != m or ss.halfspace_reducible(m):
                continue
            seen.add(ss.canonical_form(m))
        assert len(seen) == expected
        assert len(ss.canonical_masks_of_size(k)) == expected


def test_halfspace_models_are_dropped():
    # z >= 0 forced for x and y: all steps have x >= mu z, y >= nu z
    m = ss.encode([(1, 1, 1), (0, 0, -1), (1, 0, 0)])
    assert ss.halfspace_reducible(m)
    assert not ss.halfspace_reducible(ss.encode([(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]))


def test_enumerate_classes_records():
    recs = list(ss.enumerate_classes(range(3, 5)))
    assert [r.size for r in recs].count(3) == 73
    assert [r.size for r in recs].count(4) == 979
    assert all(ss.is_canonical(r.id) for r in recs)
    assert all(r.filter_status is ss.FilterStatus.UNPROCESSED for r in recs)


def test_class_polynomial():
    c = ss.class_polynomial([1, 3, 7])
    assert c[1] == 1 and c[2] == 1 and c[3] == 1 and sum(c) == 3


def test_model_record_monotone():
    r = ss.ModelRecord(7, 3)
    r.advance(ss.FilterStatus.PROJECTIBLE)
    with pytest.raises(ValueError):
        r.advance(ss.FilterStatus.UNPROCESSED)
    assert ss.ModelRecord.from_line(r.to_line()) == r
