import random
from math import comb

import pytest

from octwalk import guess as gs

P = 16381


def catalan(n):
    return [comb(2 * k, k) // (k + 1) for k in range(n)]


def test_powers_of_two():
    c = gs.guess_recurrence([pow(2, n, P) for n in range(60)], 4, 4, P)
    assert (c.order, c.degree) == (1, 0)
    assert c.coefficients == [[P - 2], [1]]


def test_catalan_recurrence():
    a = [x % P for x in catalan(200)]
    c = gs.guess_recurrence(a, 3, 3, P)
    assert (c.order, c.degree) == (1, 1)
    # (n+2) a_{n+1} - (4n+2) a_n, scaled to a monic top row
    assert c.coefficients == [[-2 % P, -4 % P], [2, 1]]
    assert not any(c.residuals(a))
    assert c.holdout >= 40


def test_catalan_recurrence_long():
    a = [x % P for x in catalan(500)]
    c = gs.guess_recurrence(a, 2, 2, P)
    assert (c.order, c.degree) == (1, 1)


def test_geometric_ode():
    c = gs.guess_ode([pow(2, n, P) for n in range(60)], 3, 3, P)
    assert (c.order, c.degree) == (1, 1)
    # (1 - 2t) F' - 2F = 0, normalised so the top row ends in 1
    inv = pow(-2, -1, P)
    assert c.coefficients == [[-2 * inv % P, 0], [1 * inv % P, 1]]


def test_catalan_ode():
    c = gs.guess_ode([x % P for x in catalan(200)], 3, 3, P)
    assert c is not None and c.order <= 2 and c.degree <= 3


def test_random_sequences_give_nothing():
    rng = random.Random(99)
    for _ in range(100):
        a = [rng.randrange(P) for _ in range(200)]
        assert gs.guess_recurrence(a, 3, 6, P) is None


def test_too_short_is_refused():
    with pytest.raises(gs.SeriesTooShort) as err:
        gs.guess_recurrence(list(range(50)), 20, 30, P)
    assert err.value.required == gs.required_length(20, 30)
    assert err.value.required > 50


def test_non_strict_scans_feasible_part():
    rng = random.Random(3)
    a = [rng.randrange(P) for _ in range(301)]
    assert gs.guess_recurrence(a, 20, 30, P, strict=False) is None
    budget = gs.effective_budget(301, 20, 30)
    assert all(gs.required_length(r, d) <= 301 for r, d in budget)


def test_nullspace():
    import numpy as np

    A = np.array([[1, 2, 3], [2, 4, 6]])
    basis = gs.nullspace_mod(A, P)
    assert basis.shape == (2, 3)
    assert not np.any(A @ basis.T % P)


def test_double_prime_support():
    a = catalan(120)
    c1 = gs.guess_recurrence([x % 16381 for x in a], 2, 2, 16381)
    c2 = gs.guess_recurrence([x % 16411 for x in a], 2, 2, 16411)
    assert gs.same_support(c1, c2)
    assert not gs.same_support(c1, None)


def test_report_json():
    import json

    obj = json.loads(gs.guess_report("0000001", "recurrence", 300, 20, 30, None))
    assert obj == {"model": "0000001", "kind": "recurrence", "budget": {"r": 20, "d": 30, "N": 300}, "found": False}
