"""Filters 2 and 3: projectible models and Hadamard decompositions."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._accel import njit
from .stepset import STEPS_ARRAY, Step, check_mask, decode

AXES = "xyz"


@dataclass(frozen=True)
class ProjectionCertificate:
    """``s[drop] >= lam[0]*s[a] + lam[1]*s[b]`` for all steps, with a < b the other axes."""

    dropped_coordinate: int
    multipliers: tuple[Fraction, Fraction]

    @property
    def kept(self) -> tuple[int, int]:
        return tuple(i for i in range(3) if i != self.dropped_coordinate)

    def holds_for(self, steps: list[Step]) -> bool:
        a, b = self.kept
        l1, l2 = self.multipliers
        if l1 < 0 or l2 < 0:
            return False
        c = self.dropped_coordinate
        return all(s[c] >= l1 * s[a] + l2 * s[b] for s in steps)

    def to_json(self) -> str:
        return json.dumps(
            {"drop": AXES[self.dropped_coordinate], "lambda": [_frac_str(x) for x in self.multipliers]}
        )

    @classmethod
    def from_json(cls, text: str) -> "ProjectionCertificate":
        obj = json.loads(text)
        return cls(AXES.index(obj["drop"]), tuple(Fraction(x) for x in obj["lambda"]))


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


class HadamardKind(enum.Enum):
    ONE_PLUS_TWO = 0  # P = U(c) + V(c) * W(a, b)
    TWO_PLUS_ONE = 1  # P = U(a, b) + V(a, b) * W(c)


@dataclass(frozen=True)
class HadamardDecomposition:
    """Supports of the factors.

    One-variable parts hold exponents of the distinguished coordinate, two-variable
    parts hold exponent pairs of the remaining coordinates (in increasing axis order).
    """

    kind: HadamardKind
    distinguished_coordinate: int
    U: frozenset
    V: frozenset
    W: frozenset

    def reassemble(self) -> set[Step]:
        """Steps of ``U + V*W``; raises if a coefficient would exceed one."""
        c = self.distinguished_coordinate
        a, b = (i for i in range(3) if i != c)
        out: list[Step] = []

        def put(e_c, e_a, e_b):
            s = [0, 0, 0]
            s[c], s[a], s[b] = e_c, e_a, e_b
            out.append(tuple(s))

        if self.kind is HadamardKind.ONE_PLUS_TWO:
            for e in self.U:
                put(e, 0, 0)
            for e in self.V:
                for ea, eb in self.W:
                    put(e, ea, eb)
        else:
            for ea, eb in self.U:
                put(0, ea, eb)
            for ea, eb in self.V:
                for e in self.W:
                    put(e, ea, eb)
        if len(set(out)) != len(out):
            raise ValueError("decomposition has a coefficient >= 2")
        if (0, 0, 0) in out:
            raise ValueError("decomposition produces the zero step")
        return set(out)


# -- kernels -----------------------------------------------------------------


@njit
def _projectible(mask, steps):
    rows = np.empty((28, 3), np.int64)
    for c in (2, 1, 0):
        a = 1 if c == 0 else 0
        b = 1 if c == 2 else 2
        m = 0
        nonneg = True
        for k in range(26):
            if (mask >> k) & 1:
                al = steps[k, a]
                be = steps[k, b]
                ga = steps[k, c]
                if ga < 0:
                    nonneg = False
                dup = False
                for r in range(m):
                    if rows[r, 0] == al and rows[r, 1] == be and rows[r, 2] == ga:
                        dup = True
                        break
                if not dup:
                    rows[m, 0] = al
                    rows[m, 1] = be
                    rows[m, 2] = ga
                    m += 1
        if nonneg:
            return c, 0, 0, 1
        # lambda >= 0 as two more half-planes
        rows[m, 0] = -1
        rows[m, 1] = 0
        rows[m, 2] = 0
        rows[m + 1, 0] = 0
        rows[m + 1, 1] = -1
        rows[m + 1, 2] = 0
        m += 2
        # exact vertex enumeration: lambda = (n1/d, n2/d)
        for i in range(m):
            for j in range(i + 1, m):
                d = rows[i, 0] * rows[j, 1] - rows[j, 0] * rows[i, 1]
                if d == 0:
                    continue
                n1 = rows[i, 2] * rows[j, 1] - rows[j, 2] * rows[i, 1]
                n2 = rows[i, 0] * rows[j, 2] - rows[j, 0] * rows[i, 2]
                if d < 0:
                    d = -d
                    n1 = -n1
                    n2 = -n2
                ok = True
                for r in range(m):
                    if rows[r, 0] * n1 + rows[r, 1] * n2 > rows[r, 2] * d:
                        ok = False
                        break
                if ok:
                    return c, n1, n2, d
    return -1, 0, 0, 0


@njit
def _slices(mask, steps, c):
    # 9-bit supports over the other two coordinates, per value of coordinate c
    a = 1 if c == 0 else 0
    b = 1 if c == 2 else 2
    t = np.zeros(3, np.int64)
    for k in range(26):
        if (mask >> k) & 1:
            pos = (steps[k, a] + 1) + 3 * (steps[k, b] + 1)
            t[steps[k, c] + 1] |= 1 << pos
    return t


CENTER = 1 << 4


@njit
def _hadamard(mask, steps):
    center = 16
    for c in (2, 1, 0):
        t = _slices(mask, steps, c)
        # U(x_c) + V(x_c) W(a, b)
        for vf in range(1, 8):
            for uf in range(8):
                if uf & 2:
                    continue
                first = 0
                while not (vf >> first) & 1:
                    first += 1
                w = t[first]
                if (uf >> first) & 1:
                    w &= ~center
                if w == 0 or w == center:
                    continue
                ok = True
                for i in range(3):
                    ui = (uf >> i) & 1
                    vi = (vf >> i) & 1
                    if ui and vi and (w & center):
                        ok = False
                        break
                    expect = 0
                    if ui:
                        expect |= center
                    if vi:
                        expect |= w
                    if t[i] != expect:
                        ok = False
                        break
                if ok:
                    return 0, c, uf, vf, w
        # U(a, b) + V(a, b) W(x_c)
        for wf in range(1, 8):
            if not (wf & 5):
                continue
            first = 0 if wf & 1 else 2
            v = t[first]
            if v == 0:
                continue
            ok = True
            for i in (0, 2):
                expect = v if (wf >> i) & 1 else 0
                if t[i] != expect:
                    ok = False
            if not ok:
                continue
            if wf & 2:
                if (t[1] & v) != v:
                    continue
                u = t[1] & ~v
            else:
                u = t[1]
            return 1, c, u, v, wf
    return -1, 0, 0, 0, 0


@njit
def _batch_filters(masks, steps):
    """Per mask: 0 = survives, 1 = projectible, 2 = Hadamard (not projectible)."""
    out = np.zeros(masks.shape[0], np.uint8)
    for i in range(masks.shape[0]):
        m = np.int64(masks[i])
        if _projectible(m, steps)[0] >= 0:
            out[i] = 1
        elif _hadamard(m, steps)[0] >= 0:
            out[i] = 2
    return out


# -- public API ----------------------------------------------------------------


def projectible(mask: int) -> ProjectionCertificate | None:
    c, n1, n2, d = _projectible(check_mask(mask), STEPS_ARRAY)
    if c < 0:
        return None
    return ProjectionCertificate(int(c), (Fraction(int(n1), int(d)), Fraction(int(n2), int(d))))


def _bits9(bits: int) -> frozenset:
    return frozenset((p % 3 - 1, p // 3 - 1) for p in range(9) if bits >> p & 1)


def _bits3(bits: int) -> frozenset:
    return frozenset(i - 1 for i in range(3) if bits >> i & 1)


def hadamard_decompose(mask: int) -> HadamardDecomposition | None:
    kind, c, u, v, w = _hadamard(check_mask(mask), STEPS_ARRAY)
    if kind < 0:
        return None
    if kind == 0:
        return HadamardDecomposition(HadamardKind.ONE_PLUS_TWO, int(c), _bits3(u), _bits3(v), _bits9(w))
    return HadamardDecomposition(HadamardKind.TWO_PLUS_ONE, int(c), _bits9(u), _bits9(v), _bits3(w))


def classify(masks: np.ndarray) -> np.ndarray:
    """Vectorised filters 2 and 3 (0 survivor, 1 projectible, 2 Hadamard)."""
    masks = np.ascontiguousarray(masks, dtype=np.int64)
    return _batch_filters(masks, STEPS_ARRAY)


def projected_steps(mask: int, cert: ProjectionCertificate) -> list[tuple[int, int]]:
    """Steps of the quarter-plane model on the kept coordinates (as a multiset)."""
    a, b = cert.kept
    return [(s[a], s[b]) for s in decode(mask)]
