import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from octwalk import countkernel as ck
from octwalk.stepset import FULL_MASK, canonical_masks_of_size, encode, from_diagram

S_STAR = encode([(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
M_DAGGER = from_diagram("110111000 11100110 000110111")
P = 32749


@pytest.mark.parametrize("mask", [S_STAR, M_DAGGER])
@pytest.mark.parametrize("target", ["excursions", "all"])
def test_matches_oracles(mask, target):
    exact = ck.brute_force_walks(mask, 10, target)
    small = 10 if mask == S_STAR else 5
    assert ck.naive_walks(mask, small, target) == exact[: small + 1]
    for shards in (1, 4, 16):
        s = ck.count_layers(mask, 10, P, target, shards=shards)
        assert s.terms.tolist() == [a % P for a in exact]


def test_s_star_excursions():
    assert ck.brute_force_walks(S_STAR, 8, "excursions") == [1, 0, 0, 0, 6, 0, 0, 0, 288]


@pytest.mark.parametrize("mask", [S_STAR, M_DAGGER])
def test_partitions_bit_identical(mask):
    ref = ck.count_layers(mask, 60, 30011, "all", shards=1).to_bytes()
    for shards in (3, 4, 16):
        assert ck.count_layers(mask, 60, 30011, "all", shards=shards).to_bytes() == ref


@pytest.mark.parametrize("mask", [S_STAR, M_DAGGER])
def test_numpy_backend_and_unpruned_agree(mask):
    for target in ("all", "excursions"):
        a = ck.count_layers(mask, 24, 16411, target)
        b = ck.count_layers(mask, 24, 16411, target, backend="numpy")
        c = ck.count_layers(mask, 24, 16411, target, prune=False)
        assert a.terms.tolist() == b.terms.tolist() == c.terms.tolist()


def test_random_models_against_brute_force():
    rng = random.Random(11)
    models = [int(m) for m in rng.sample(list(canonical_masks_of_size(6)), 25)]
    for m in models:
        for target in ("all", "excursions"):
            exact = ck.brute_force_walks(m, 9, target)
            assert ck.count_layers(m, 9, 16381, target).terms.tolist() == [a % 16381 for a in exact]


def test_lattice_of_s_star():
    lat = ck.lattice_constraints(S_STAR)
    assert lat.k_modulus == 4
    # every reachable (i, j, k, n) lies in the lattice
    for i, j, k, n in [(0, 0, 0, 4), (1, 0, 0, 1), (1, 1, 1, 3), (2, 0, 1, 3)]:
        assert lat.contains(i, j, k, n)
    assert not lat.contains(0, 0, 0, 1)
    assert ck.lattice_constraints(M_DAGGER).k_modulus in (None, 1)


def _forward_layers(steps, N):
    layers = [{(0, 0, 0)}]
    for _ in range(N):
        layers.append({(x + a, y + b, z + c) for x, y, z in layers[-1] for a, b, c in steps if min(x + a, y + b, z + c) >= 0})
    return layers


def test_reachability_is_conservative():
    N = 8
    for mask in (S_STAR, M_DAGGER):
        steps = ck.decode(mask)
        fwd = _forward_layers(steps, N)
        # back[m]: octant points from which the origin is reachable in exactly m steps
        back = [{(0, 0, 0)}]
        for m in range(1, N + 1):
            prev = back[-1]
            back.append({(x - a, y - b, z - c) for x, y, z in prev for a, b, c in steps if min(x - a, y - b, z - c) >= 0})
        for target in ("all", "excursions"):
            reach = ck.reachability_predicate(mask, N, target)
            for n in range(N + 1):
                pts = fwd[n] if target == "all" else fwd[n] & back[N - n]
                assert all(reach(*pt, n) for pt in pts)


def test_series_file_roundtrip(tmp_path):
    s = ck.count_layers(S_STAR, 40, 16411, "excursions")
    f = tmp_path / "s.ow3s"
    s.save(f)
    t = ck.ModSeries.load(f)
    assert (t.mask, t.target, t.prime) == (S_STAR, ck.Target.EXCURSIONS, 16411)
    assert t.terms.tolist() == s.terms.tolist()
    with pytest.raises(ValueError):
        ck.ModSeries.from_bytes(b"XXXX" + s.to_bytes()[4:])


def test_argument_checks():
    with pytest.raises(ValueError):
        ck.count_layers(S_STAR, 5, 32768)
    with pytest.raises(ValueError):
        ck.count_layers(S_STAR, 5, 16383)  # composite
    with pytest.raises(ck.MemoryBudgetExceeded):
        ck.count_layers(FULL_MASK, 2000, P, memory_budget=1 << 20)
    assert ck.Target.parse("excursions") is ck.Target.EXCURSIONS
    assert ck.Target.parse("all") is ck.Target.ALL_ENDPOINTS


@settings(max_examples=25)
@given(st.integers(1, FULL_MASK).filter(lambda m: bin(m).count("1") <= 9), st.sampled_from(["all", "excursions"]))
def test_property_against_naive(mask, target):
    exact = ck.naive_walks(mask, 6, target)
    assert ck.count_layers(mask, 6, 16381, target).terms.tolist() == [a % 16381 for a in exact]
