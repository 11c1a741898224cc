"""Guessing P-recurrences and linear ODEs over a prime field.

An ansatz of order r and degree d has (r+1)(d+1) unknowns.  Its linear system
is fitted on a prefix of the available equations and every candidate must
then annihilate all equations, including a held-out tail of at least 20% of
the series.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HOLDOUT_FRACTION = 0.2


class SeriesTooShort(ValueError):
    def __init__(self, required: int, available: int):
        super().__init__(f"series has {available} terms, the requested budget needs {required}")
        self.required = required
        self.available = available


def nullspace_mod(A: np.ndarray, p: int) -> np.ndarray:
    """Basis (rows) of the right nullspace of A over F_p, p < 2^31."""
    A = np.array(A, dtype=np.int64) % p
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        k = r + nz[0]
        if k != r:
            A[[r, k]] = A[[k, r]]
        A[r] = A[r] * pow(int(A[r, c]), -1, p) % p
        col = A[:, c].copy()
        col[r] = 0
        hit = np.nonzero(col)[0]
        if hit.size:
            A[hit] = (A[hit] - np.outer(col[hit], A[r])) % p
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = np.zeros((len(free), cols), np.int64)
    for b, f in enumerate(free):
        basis[b, f] = 1
        for i, c in enumerate(pivots):
            basis[b, c] = (-A[i, f]) % p
    return basis


@dataclass
class RecurrenceCandidate:
    """sum_{i<=r} (sum_{j<=d} c[i][j] n^j) a_{n+i} = 0 mod p."""

    order: int
    degree: int
    coefficients: list[list[int]]
    prime: int
    holdout: int
    flags: list[str] = field(default_factory=list)

    def residuals(self, a: Sequence[int]) -> list[int]:
        return _recurrence_matrix(a, self.order, self.degree, self.prime) @ _flat(self.coefficients) % self.prime


@dataclass
class OdeCandidate:
    """sum_{i<=r} p_i(t) F^(i)(t) = 0 mod (p, t^(N-r+1)), p_i = sum_j c[i][j] t^j."""

    order: int
    degree: int
    coefficients: list[list[int]]
    prime: int
    holdout: int
    flags: list[str] = field(default_factory=list)


def _flat(c) -> np.ndarray:
    return np.array([x for row in c for x in row], dtype=np.int64)


def _recurrence_matrix(a: Sequence[int], r: int, d: int, p: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64) % p
    E = len(a) - r
    n = np.arange(E, dtype=np.int64)
    pw = np.ones((d + 1, E), np.int64)
    for j in range(1, d + 1):
        pw[j] = pw[j - 1] * n % p
    M = np.empty((E, (r + 1) * (d + 1)), np.int64)
    for i in range(r + 1):
        for j in range(d + 1):
            M[:, i * (d + 1) + j] = pw[j] * a[i : i + E] % p
    return M


def _ode_matrix(a: Sequence[int], r: int, d: int, p: int) -> np.ndarray:
    """Row n: coefficient of t^n in sum c_ij t^j F^(i), for n = 0..N-r."""
    a = [int(x) % p for x in a]
    N = len(a) - 1
    E = N - r + 1
    M = np.zeros((E, (r + 1) * (d + 1)), np.int64)
    for n in range(E):
        for i in range(r + 1):
            for j in range(d + 1):
                m = n - j
                if m < 0:
                    continue
                f = 1
                for t in range(m + 1, m + i + 1):
                    f = f * t % p
                M[n, i * (d + 1) + j] = f * a[m + i] % p
    return M


def _budget_pairs(r_max: int, d_max: int, r_min: int):
    pairs = [(r, d) for r in range(r_min, r_max + 1) for d in range(d_max + 1)]
    pairs.sort(key=lambda rd: ((rd[0] + 1) * (rd[1] + 1), rd[0], rd[1]))
    return pairs


def required_length(r: int, d: int) -> int:
    """Smallest L with (L - r) - ceil(0.2 L) >= (r+1)(d+1)."""
    L = 1
    while (L - r) - math.ceil(HOLDOUT_FRACTION * L) < (r + 1) * (d + 1):
        L += 1
    return L


def _feasible(L: int, r: int, d: int) -> bool:
    return L >= required_length(r, d)


def _search(a, r_max, d_max, p, build, r_min, strict):
    L = len(a)
    need = required_length(r_max, d_max)
    if L < need:
        if strict:
            raise SeriesTooShort(need, L)
    pairs = [rd for rd in _budget_pairs(r_max, d_max, r_min) if _feasible(L, *rd)]
    if not pairs:
        raise SeriesTooShort(required_length(r_min, 0), L)
    # a relation of a smaller ansatz is also one of any larger ansatz (padded
    # with zeros), so trivial nullspaces of the maximal systems settle the scan
    maximal = {}
    for r, d in pairs:
        if d >= maximal.get(r, -1):
            maximal[r] = d
    if all(len(nullspace_mod(build(a, r, d, p), p)) == 0 for r, d in maximal.items()):
        return None, pairs
    hold = math.ceil(HOLDOUT_FRACTION * L)
    for r, d in pairs:
        M = build(a, r, d, p)
        fit = M[: M.shape[0] - hold]
        for vec in nullspace_mod(fit, p):
            if not np.any(M @ vec % p):
                coeffs = vec.reshape(r + 1, d + 1)
                if not coeffs[r].any():
                    continue
                # scale so the leading coefficient of the top row is 1
                lead = int(coeffs[r][np.nonzero(coeffs[r])[0][-1]])
                coeffs = coeffs * pow(lead, -1, p) % p
                return (r, d, [[int(x) for x in row] for row in coeffs], hold), pairs
    return None, pairs


def guess_recurrence(
    a: Sequence[int], r_max: int, d_max: int, p: int, strict: bool = True
) -> RecurrenceCandidate | None:
    """First (by unknown count) recurrence that survives the holdout check."""
    found, _ = _search(list(a), r_max, d_max, p, _recurrence_matrix, 1, strict)
    if found is None:
        return None
    r, d, c, hold = found
    return RecurrenceCandidate(r, d, c, p, hold)


def guess_ode(a: Sequence[int], r_max: int, d_max: int, p: int, strict: bool = True) -> OdeCandidate | None:
    found, _ = _search(list(a), r_max, d_max, p, _ode_matrix, 1, strict)
    if found is None:
        return None
    r, d, c, hold = found
    return OdeCandidate(r, d, c, p, hold)


def effective_budget(length: int, r_max: int, d_max: int) -> list[tuple[int, int]]:
    """Maximal feasible (r, d) pairs for a series of this length."""
    out = []
    for r in range(1, r_max + 1):
        ds = [d for d in range(d_max + 1) if _feasible(length, r, d)]
        if ds:
            out.append((r, max(ds)))
    return out


def same_support(c1, c2) -> bool:
    """Recurrences found modulo two primes with identical order, degree and nonzero pattern."""
    if c1 is None or c2 is None:
        return False
    if (c1.order, c1.degree) != (c2.order, c2.degree):
        return False
    z1 = [[x != 0 for x in row] for row in c1.coefficients]
    z2 = [[x != 0 for x in row] for row in c2.coefficients]
    return z1 == z2


def guess_report(model: str, kind: str, N: int, r_max: int, d_max: int, cand) -> str:
    obj = {"model": model, "kind": kind, "budget": {"r": r_max, "d": d_max, "N": N}, "found": cand is not None}
    if cand is not None:
        obj.update(
            {
                "order": cand.order,
                "degree": cand.degree,
                "prime": cand.prime,
                "holdout": cand.holdout,
                "coefficients": cand.coefficients,
                "flags": cand.flags,
            }
        )
    return json.dumps(obj)
