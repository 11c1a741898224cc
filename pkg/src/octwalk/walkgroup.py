"""The group of a walk: birational involutions fixing the characteristic polynomial.

Group elements are words over the generators 0 = phi_x, 1 = phi_y, 2 = phi_z.
A word ``(g0, g1, ..., gk)`` denotes the point map ``phi_g0 o phi_g1 o ... o phi_gk``.
Elements are told apart by their images of a few random points over a prime
field (Schwartz-Zippel); two words are equal iff every image coincides.
"""

from __future__ import annotations

import enum
import itertools
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._accel import njit
from .stepset import STEPS_ARRAY, check_mask, decode

P61 = (1 << 61) - 1
P61_ALT = 2305843009213693921  # largest prime below 2^61 - 1
SCREEN_PRIME = (1 << 31) - 1

GENERATOR_NAMES = ("phi_x", "phi_y", "phi_z")

Point = tuple[int, int, int]


class MapUndefined(ValueError):
    """Some axis lacks steps in one direction, so phi for that axis is undefined."""


class EvaluationError(ArithmeticError):
    """A denominator vanished at an evaluation point."""


class SignUndefined(ValueError):
    pass


# -- characteristic polynomial and generators --------------------------------


@dataclass(frozen=True)
class CharPoly:
    """Slices of P_S: ``slices[axis][v]`` holds the exponent pairs of the other
    two variables over the steps whose ``axis`` component is ``v - 1``."""

    mask: int
    slices: tuple[tuple[frozenset, frozenset, frozenset], ...]

    @classmethod
    def of(cls, mask: int) -> "CharPoly":
        steps = decode(mask)
        per_axis = []
        for c in range(3):
            a, b = (i for i in range(3) if i != c)
            parts = [set(), set(), set()]
            for s in steps:
                parts[s[c] + 1].add((s[a], s[b]))
            per_axis.append(tuple(frozenset(p) for p in parts))
        return cls(mask, tuple(per_axis))

    def steps(self) -> set:
        out = set()
        for v, part in enumerate(self.slices[0]):
            for e1, e2 in part:
                out.add((v - 1, e1, e2))
        return out

    def evaluate(self, point: Point, p: int) -> int:
        inv = [pow(t, -1, p) for t in point]
        total = 0
        for s in self.steps():
            term = 1
            for t, ti, e in zip(point, inv, s):
                term = term * (t if e > 0 else ti if e < 0 else 1) % p
            total += term
        return total % p


def _laurent(support, u: int, ui: int, v: int, vi: int, p: int) -> int:
    total = 0
    for e1, e2 in support:
        t = u if e1 > 0 else ui if e1 < 0 else 1
        w = v if e2 > 0 else vi if e2 < 0 else 1
        total += t * w
    return total % p


@dataclass(frozen=True)
class RationalMap:
    """``phi_axis``: t_axis -> t_axis^-1 * A_minus(others) / A_plus(others)."""

    axis: int
    numerator_support: frozenset
    denominator_support: frozenset

    @property
    def others(self) -> tuple[int, int]:
        return tuple(i for i in range(3) if i != self.axis)

    def apply(self, point: Sequence[int], p: int) -> Point:
        c = self.axis
        a, b = self.others
        u, v = point[a], point[b]
        try:
            ui, vi, ti = pow(u, -1, p), pow(v, -1, p), pow(point[c], -1, p)
        except ValueError:
            raise EvaluationError("zero coordinate") from None
        num = _laurent(self.numerator_support, u, ui, v, vi, p)
        den = _laurent(self.denominator_support, u, ui, v, vi, p)
        if num == 0 or den == 0:
            raise EvaluationError(f"vanishing slice polynomial for {GENERATOR_NAMES[c]}")
        out = list(point)
        out[c] = ti * num * pow(den, -1, p) % p
        return tuple(out)

    def apply_symbolic(self, point: Sequence, one=1):
        """Same map over any field whose elements support + * / (e.g. sympy fractions)."""
        c = self.axis
        a, b = self.others
        u, v = point[a], point[b]

        def poly(support):
            total = 0 * one
            for e1, e2 in support:
                total += (u**e1 if e1 >= 0 else one / u**-e1) * (v**e2 if e2 >= 0 else one / v**-e2)
            return total

        out = list(point)
        out[c] = poly(self.numerator_support) / (point[c] * poly(self.denominator_support))
        return tuple(out)


def generator_maps(mask: int) -> tuple[RationalMap, RationalMap, RationalMap]:
    cp = CharPoly.of(check_mask(mask))
    maps = []
    for c in range(3):
        minus, _, plus = cp.slices[c]
        if not minus or not plus:
            raise MapUndefined(f"{GENERATOR_NAMES[c]} undefined: no steps with {'xyz'[c]} = {'-1' if not minus else '+1'}")
        maps.append(RationalMap(c, minus, plus))
    return tuple(maps)


def apply_word(maps, word: Sequence[int], point: Sequence[int], p: int) -> Point:
    pt = tuple(point)
    for g in reversed(word):
        pt = maps[g].apply(pt, p)
    return pt


def free_reduce(word: Sequence[int]) -> tuple[int, ...]:
    """Cancel adjacent equal letters (every generator is an involution)."""
    out: list[int] = []
    for g in word:
        if out and out[-1] == g:
            out.pop()
        else:
            out.append(g)
    return tuple(out)


# -- exploration ---------------------------------------------------------------


class GroupStatus(enum.Enum):
    FINITE = "Finite"
    PRESUMED_INFINITE = "PresumedInfinite"


@dataclass
class GroupResult:
    status: GroupStatus
    order: int | None
    elements: list[tuple[int, ...]]
    relators: list[tuple[int, ...]]
    fingerprints: list[tuple[Point, ...]]
    mask: int = 0
    seed: int = 0
    points: list[Point] = field(default_factory=list)
    prime: int = P61
    #: ``table[g][e]`` is the index of ``phi_g o element_e`` (finite groups only)
    table: list[list[int]] = field(default_factory=list)
    parent: list[int] = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return self.status is GroupStatus.FINITE

    def sign(self, index: int) -> int:
        return -1 if len(self.elements[index]) % 2 else 1


def _random_points(rng: random.Random, k: int, p: int) -> list[Point]:
    return [tuple(rng.randrange(2, p - 1) for _ in range(3)) for _ in range(k)]


def explore_group(
    mask: int,
    cap: int = 400,
    points: int = 3,
    seed: int = 0,
    retries: int = 8,
    verify_points: int = 3,
) -> GroupResult:
    """Breadth-first closure of the group generated by phi_x, phi_y, phi_z.

    Elements are keyed by their images of ``points`` random points modulo
    2^61 - 1; every key hit is re-checked on ``verify_points`` extra points.
    Stops with ``PresumedInfinite`` as soon as more than ``cap`` distinct
    elements have been found.
    """
    if cap < 2 or points < 3:
        raise ValueError("need cap >= 2 and at least 3 evaluation points")
    maps = generator_maps(mask)
    rng = random.Random(seed)
    p = P61
    for _ in range(retries):
        pts = _random_points(rng, points + verify_points, p)
        try:
            return _bfs(mask, maps, pts, points, cap, seed, p)
        except EvaluationError:
            continue
    raise EvaluationError(f"zero denominators at {retries} successive point sets for mask {mask:#09x}")


def _bfs(mask, maps, pts, k, cap, seed, p) -> GroupResult:
    identity = tuple(pts)
    images: list[tuple[Point, ...]] = [identity]
    words: list[tuple[int, ...]] = [()]
    parent = [-1]
    index = {identity[:k]: 0}
    table: list[list[int]] = [[], [], []]
    relators: set[tuple[int, ...]] = set()
    head = 0
    while head < len(images):
        e = head
        head += 1
        for g in range(3):
            img = tuple(maps[g].apply(pt, p) for pt in images[e])
            key = img[:k]
            h = index.get(key)
            if h is None:
                index[key] = len(images)
                table[g].append(len(images))
                images.append(img)
                words.append((g,) + words[e])
                parent.append(e)
                if len(images) > cap:
                    return GroupResult(
                        GroupStatus.PRESUMED_INFINITE, None, words, [], [], mask, seed, list(pts[:k]), p
                    )
            else:
                if images[h][k:] != img[k:]:
                    raise EvaluationError("fingerprint collision not confirmed on verification points")
                table[g].append(h)
                rel = tuple(reversed(words[h])) + (g,) + words[e]
                if len(rel) % 2:
                    raise SignUndefined(f"odd relator {rel} for mask {mask:#09x}")
                rel = free_reduce(rel)
                if rel:
                    relators.add(rel)
    # table[g] was filled in BFS order of e
    return GroupResult(
        GroupStatus.FINITE,
        len(images),
        words,
        sorted(relators, key=lambda r: (len(r), r)),
        [im[:k] for im in images],
        mask,
        seed,
        list(pts[:k]),
        p,
        table,
        parent,
    )


def shortest_relators(mask: int, max_length: int, points: int = 4, seed: int = 0) -> dict[int, list[tuple[int, ...]]]:
    """Freely reduced words of length <= ``max_length`` that act as the identity."""
    maps = generator_maps(mask)
    rng = random.Random(seed)
    pts = _random_points(rng, points, P61)
    found: dict[int, list[tuple[int, ...]]] = {}
    frontier: list[tuple[tuple[int, ...], tuple[Point, ...]]] = [((), tuple(pts))]
    for length in range(1, max_length + 1):
        nxt = []
        for word, imgs in frontier:
            for g in range(3):
                if word and word[0] == g:
                    continue
                new = tuple(maps[g].apply(pt, P61) for pt in imgs)
                w = (g,) + word
                if list(new) == pts:
                    found.setdefault(length, []).append(w)
                nxt.append((w, new))
        frontier = nxt
    return found


# -- numba screen ----------------------------------------------------------------


def _support_arrays(mask: int):
    """exps[c, side, i, 0:2] exponent pairs, counts[c, side]; side 0 = A_minus, 1 = A_plus."""
    exps = np.zeros((3, 2, 9, 2), np.int64)
    counts = np.zeros((3, 2), np.int64)
    cp = CharPoly.of(mask)
    for c in range(3):
        minus, _, plus = cp.slices[c]
        for side, part in enumerate((minus, plus)):
            for i, (e1, e2) in enumerate(sorted(part)):
                exps[c, side, i, 0] = e1
                exps[c, side, i, 1] = e2
            counts[c, side] = len(part)
    return exps, counts


@njit
def _mulmod31(a, b):
    return (a * b) % 2147483647


@njit
def _inv31(a):
    r = 1
    e = 2147483645
    base = a % 2147483647
    while e > 0:
        if e & 1:
            r = _mulmod31(r, base)
        base = _mulmod31(base, base)
        e >>= 1
    return r


@njit
def _slice_value(exps, counts, c, side, u, ui, v, vi):
    total = 0
    for i in range(counts[c, side]):
        e1 = exps[c, side, i, 0]
        e2 = exps[c, side, i, 1]
        t = u if e1 > 0 else (ui if e1 < 0 else 1)
        w = v if e2 > 0 else (vi if e2 < 0 else 1)
        total += _mulmod31(t, w)
    return total % 2147483647


@njit
def _screen_bfs(exps, counts, start, cap):
    """Count distinct images of one point (with inverses) under the group, up to cap+1.

    Returns the count, or -1 if a denominator vanished.
    """
    store = np.empty((cap + 2, 6), np.int64)
    size = 4096
    while size < 4 * (cap + 2):
        size *= 2
    slots = np.full(size, -1, np.int64)
    for j in range(6):
        store[0, j] = start[j]
    h0 = (start[0] * 1000003 + start[1] * 999983 + start[2]) % size
    slots[h0] = 0
    n = 1
    head = 0
    while head < n:
        for c in range(3):
            a = 1 if c == 0 else 0
            b = 1 if c == 2 else 2
            u = store[head, a]
            ui = store[head, a + 3]
            v = store[head, b]
            vi = store[head, b + 3]
            num = _slice_value(exps, counts, c, 0, u, ui, v, vi)
            den = _slice_value(exps, counts, c, 1, u, ui, v, vi)
            prod = _mulmod31(num, den)
            if prod == 0:
                return -1
            inv = _inv31(prod)
            t = store[head, c]
            ti = store[head, c + 3]
            new_t = _mulmod31(_mulmod31(_mulmod31(num, num), inv), ti)
            new_ti = _mulmod31(_mulmod31(_mulmod31(den, den), inv), t)
            x0 = store[head, 0]
            x1 = store[head, 1]
            x2 = store[head, 2]
            if c == 0:
                x0 = new_t
            elif c == 1:
                x1 = new_t
            else:
                x2 = new_t
            slot = (x0 * 1000003 + x1 * 999983 + x2) % size
            found = False
            while slots[slot] >= 0:
                k = slots[slot]
                if store[k, 0] == x0 and store[k, 1] == x1 and store[k, 2] == x2:
                    found = True
                    break
                slot = (slot + 1) % size
            if not found:
                for j in range(6):
                    store[n, j] = store[head, j]
                store[n, c] = new_t
                store[n, c + 3] = new_ti
                slots[slot] = n
                n += 1
                if n > cap:
                    return n
        head += 1
    return n


@njit
def _support_from_mask(mask, steps, exps, counts):
    counts[:, :] = 0
    for k in range(26):
        if (mask >> k) & 1:
            for c in range(3):
                side = -1
                if steps[k, c] == -1:
                    side = 0
                elif steps[k, c] == 1:
                    side = 1
                if side < 0:
                    continue
                a = 1 if c == 0 else 0
                b = 1 if c == 2 else 2
                i = counts[c, side]
                exps[c, side, i, 0] = steps[k, a]
                exps[c, side, i, 1] = steps[k, b]
                counts[c, side] = i + 1


@njit
def _screen_batch(masks, steps, starts, cap):
    """Screen many masks; ``starts`` holds retry points (rows of x, y, z, 1/x, 1/y, 1/z).

    Result per mask: capped orbit size, -1 if every start point failed, -2 if
    some generator is undefined.
    """
    out = np.empty(masks.shape[0], np.int64)
    exps = np.zeros((3, 2, 9, 2), np.int64)
    counts = np.zeros((3, 2), np.int64)
    for i in range(masks.shape[0]):
        _support_from_mask(masks[i], steps, exps, counts)
        bad = False
        for c in range(3):
            for side in range(2):
                if counts[c, side] == 0:
                    bad = True
        if bad:
            out[i] = -2
            continue
        r = -1
        for j in range(starts.shape[0]):
            r = _screen_bfs(exps, counts, starts[j], cap)
            if r >= 0:
                break
        out[i] = r
    return out


def screen_many(masks, cap: int = 400, seed: int = 0, retries: int = 8) -> np.ndarray:
    """Vectorised :func:`screen_order` (all masks share the same start points)."""
    rng = random.Random(seed)
    q = SCREEN_PRIME
    rows = []
    for _ in range(retries):
        pt = [rng.randrange(2, q - 1) for _ in range(3)]
        rows.append(pt + [pow(t, -1, q) for t in pt])
    starts = np.array(rows, dtype=np.int64)
    masks = np.ascontiguousarray(masks, dtype=np.int64)
    return _screen_batch(masks, STEPS_ARRAY, starts, cap)


def screen_order(mask: int, cap: int = 400, seed: int = 0, retries: int = 8) -> int:
    """Number of distinct images of one random point, capped at ``cap + 1``.

    Images are computed over GF(2^31 - 1).  A result above ``cap`` proves the
    group has more than ``cap`` elements; smaller results are only a hint.
    """
    exps, counts = _support_arrays(mask)
    if (counts == 0).any():
        raise MapUndefined(f"mask {mask:#09x} has an undefined generator")
    rng = random.Random(seed)
    q = SCREEN_PRIME
    for _ in range(retries):
        pt = [rng.randrange(2, q - 1) for _ in range(3)]
        start = np.array(pt + [pow(t, -1, q) for t in pt], dtype=np.int64)
        r = _screen_bfs(exps, counts, start, cap)
        if r >= 0:
            return int(r)
    raise EvaluationError(f"screen failed for mask {mask:#09x}")


# -- identification --------------------------------------------------------------


#: (order, abelian, element-order multiset) for the groups met in 3D
GROUP_INVARIANTS: dict[str, tuple[int, bool, dict[int, int]]] = {
    "Z2xZ2xZ2": (8, True, {1: 1, 2: 7}),
    "D12": (12, False, {1: 1, 2: 7, 3: 2, 6: 2}),
    "Z2xD8": (16, False, {1: 1, 2: 11, 4: 4}),
    "S4": (24, False, {1: 1, 2: 9, 3: 8, 4: 6}),
    "Z2xS4": (48, False, {1: 1, 2: 19, 3: 8, 4: 12, 6: 8}),
}


def compose(g: GroupResult, left: int, right: int) -> int:
    """Index of ``element_left o element_right``."""
    h = right
    for letter in reversed(g.elements[left]):
        h = g.table[letter][h]
    return h


def element_orders(g: GroupResult) -> list[int]:
    if not g.finite:
        raise ValueError("element orders need a finite group")
    orders = []
    for e in range(g.order):
        k, h = 1, e
        while h != 0:
            h = compose(g, e, h)
            k += 1
        orders.append(k)
    return orders


def is_abelian(g: GroupResult) -> bool:
    gens = [g.table[i][0] for i in range(3)]
    return all(compose(g, a, b) == compose(g, b, a) for a in gens for b in gens)


def group_invariants(g: GroupResult) -> tuple[int, bool, dict[int, int]]:
    return g.order, is_abelian(g), dict(sorted(Counter(element_orders(g)).items()))


def identify_group(g: GroupResult) -> str:
    if not g.finite:
        raise ValueError("only finite groups can be identified")
    inv = group_invariants(g)
    for name, ref in GROUP_INVARIANTS.items():
        if inv == ref:
            return name
    return f"Other({g.order})"


# -- orbit sum -------------------------------------------------------------------


@dataclass
class OrbitSumVerdict:
    is_zero: bool
    evaluation_evidence: list[tuple[int, Point, int]]


def _images_along_tree(g: GroupResult, maps, point: Point, p: int) -> list[Point]:
    imgs: list[Point] = [tuple(point)]
    for e in range(1, g.order):
        w = g.elements[e]
        imgs.append(maps[w[0]].apply(imgs[g.parent[e]], p))
    return imgs


def orbit_sum_zero(
    mask: int, g: GroupResult, primes: Sequence[int] = (P61, P61_ALT), points: int = 3, seed: int = 1
) -> OrbitSumVerdict:
    """Evaluate sum_g sgn(g) g(xyz) at random points modulo each prime."""
    if not g.finite:
        raise ValueError("orbit sum needs a finite group")
    if any(len(r) % 2 for r in g.relators):
        raise SignUndefined("odd-length relator")
    maps = generator_maps(mask)
    rng = random.Random(seed)
    evidence = []
    for p in primes:
        done = 0
        attempts = 0
        while done < points:
            attempts += 1
            if attempts > 10 * points:
                raise EvaluationError("could not find evaluation points without poles")
            pt = tuple(rng.randrange(2, p - 1) for _ in range(3))
            try:
                imgs = _images_along_tree(g, maps, pt, p)
            except EvaluationError:
                continue
            total = sum(g.sign(e) * im[0] * im[1] * im[2] for e, im in enumerate(imgs)) % p
            evidence.append((p, pt, total))
            done += 1
    return OrbitSumVerdict(all(v == 0 for _, _, v in evidence), evidence)


def orbit_sum_exact(mask: int, g: GroupResult):
    """The orbit sum as an exact rational function in x, y, z (sympy)."""
    if not g.finite or g.order > 48:
        raise ValueError("exact orbit sums are limited to finite groups of order <= 48")
    from sympy import QQ, field as sym_field

    K, x, y, z = sym_field("x,y,z", QQ)
    maps = generator_maps(mask)
    one = K.one
    imgs = [(x, y, z)]
    for e in range(1, g.order):
        w = g.elements[e]
        imgs.append(maps[w[0]].apply_symbolic(imgs[g.parent[e]], one))
    total = K.zero
    for e, (a, b, c) in enumerate(imgs):
        total += g.sign(e) * a * b * c
    return total


# -- serialisation ---------------------------------------------------------------


def group_json(g: GroupResult, name: str | None = None, orbit_zero: bool | None = None) -> str:
    obj = {
        "mask": f"{g.mask:07x}",
        "status": g.status.value,
        "order": g.order,
        "name": name,
        "relators": [list(r) for r in g.relators],
        "orbit_sum_zero": orbit_zero,
        "seed": g.seed,
    }
    return json.dumps(obj)
