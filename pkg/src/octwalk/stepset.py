"""Step sets in {-1,0,1}^3 minus the origin, encoded as 26-bit masks.

Bit ``i`` of a mask corresponds to ``STEPS[i]``.  Steps are ordered in three
blocks by z = -1, 0, +1; inside a block by y, then x (so the first step is
(-1,-1,-1) and the middle block skips (0,0,0)).  The same order is used by
the textual diagram ``"100000000 00001010 000010000"``: character ``i``
(ignoring blanks) is bit ``i``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._accel import njit

NBITS = 26
FULL_MASK = (1 << NBITS) - 1

Step = tuple[int, int, int]

STEPS: tuple[Step, ...] = tuple(
    (x, y, z)
    for z in (-1, 0, 1)
    for y in (-1, 0, 1)
    for x in (-1, 0, 1)
    if (x, y, z) != (0, 0, 0)
)
STEP_INDEX = {s: i for i, s in enumerate(STEPS)}
STEPS_ARRAY = np.array(STEPS, dtype=np.int64)

#: the six coordinate permutations; ``perm[i]`` is the source coordinate of
#: the new coordinate ``i``.  Index 0 is the identity.
PERMUTATIONS: tuple[tuple[int, int, int], ...] = tuple(itertools.permutations(range(3)))


class InvalidMask(ValueError):
    pass


class FilterStatus(enum.IntEnum):
    """Pipeline position of a model; later stages have larger values."""

    UNPROCESSED = 0
    ELIMINATED_UNUSED_DUPLICATE = 1
    PROJECTIBLE = 2
    HADAMARD = 3
    GROUP_LARGE = 4
    FINITE_GROUP_NONZERO_OS = 5
    FINITE_GROUP_ZERO_OS = 6
    ERROR = 7


STATUS_CODES = {
    FilterStatus.UNPROCESSED: "U",
    FilterStatus.ELIMINATED_UNUSED_DUPLICATE: "E",
    FilterStatus.PROJECTIBLE: "P",
    FilterStatus.HADAMARD: "H",
    FilterStatus.GROUP_LARGE: "G",
    FilterStatus.FINITE_GROUP_NONZERO_OS: "N",
    FilterStatus.FINITE_GROUP_ZERO_OS: "Z",
    FilterStatus.ERROR: "X",
}
STATUS_FROM_CODE = {v: k for k, v in STATUS_CODES.items()}


@dataclass
class ModelRecord:
    id: int
    size: int
    filter_status: FilterStatus = FilterStatus.UNPROCESSED
    group_info: dict | None = None
    notes: str = ""

    def advance(self, status: FilterStatus) -> None:
        if status < self.filter_status:
            raise ValueError(f"status may not move back from {self.filter_status.name} to {status.name}")
        self.filter_status = status

    def to_line(self) -> str:
        return f"{mask_hex(self.id)},{self.size},{STATUS_CODES[self.filter_status]}"

    @classmethod
    def from_line(cls, line: str) -> "ModelRecord":
        h, size, code = line.strip().split(",")[:3]
        return cls(int(h, 16), int(size), STATUS_FROM_CODE[code])


# -- encoding ----------------------------------------------------------------


def check_mask(mask: int) -> int:
    mask = int(mask)
    if not 0 <= mask <= FULL_MASK:
        raise InvalidMask(f"mask {mask:#x} is not a 26-bit value")
    return mask


def decode(mask: int) -> list[Step]:
    mask = check_mask(mask)
    return [STEPS[i] for i in range(NBITS) if mask >> i & 1]


def encode(steps: Iterable[Sequence[int]]) -> int:
    mask = 0
    for s in steps:
        key = tuple(int(c) for c in s)
        if key not in STEP_INDEX:
            raise InvalidMask(f"{key} is not a step of {{-1,0,1}}^3 minus the origin")
        mask |= 1 << STEP_INDEX[key]
    return mask


def from_diagram(diagram: str) -> int:
    bits = "".join(diagram.split())
    if len(bits) != NBITS or set(bits) - {"0", "1"}:
        raise InvalidMask(f"diagram must hold 26 binary digits, got {diagram!r}")
    return sum(1 << i for i, ch in enumerate(bits) if ch == "1")


def to_diagram(mask: int) -> str:
    mask = check_mask(mask)
    bits = "".join("1" if mask >> i & 1 else "0" for i in range(NBITS))
    return f"{bits[:9]} {bits[9:17]} {bits[17:]}"


def mask_hex(mask: int) -> str:
    return f"{check_mask(mask):07x}"


def popcount(mask: int) -> int:
    return bin(mask).count("1")


# -- coordinate permutations -------------------------------------------------


def _build_perm_bits() -> np.ndarray:
    table = np.zeros((6, NBITS), dtype=np.int64)
    for p, perm in enumerate(PERMUTATIONS):
        for i, s in enumerate(STEPS):
            table[p, i] = STEP_INDEX[(s[perm[0]], s[perm[1]], s[perm[2]])]
    return table


PERM_BITS = _build_perm_bits()


def _build_chunk_tables() -> np.ndarray:
    # four 7-bit chunks per mask; OR of the four lookups is the permuted mask
    tables = np.zeros((6, 4, 128), dtype=np.int64)
    for p in range(6):
        for c in range(4):
            for v in range(128):
                out = 0
                for b in range(7):
                    bit = 7 * c + b
                    if bit < NBITS and v >> b & 1:
                        out |= 1 << int(PERM_BITS[p, bit])
                tables[p, c, v] = out
    return tables


PERM_CHUNKS = _build_chunk_tables()


def apply_permutation(mask: int, perm: Sequence[int] | int) -> int:
    mask = check_mask(mask)
    p = perm if isinstance(perm, int) else PERMUTATIONS.index(tuple(perm))
    return _permute(mask, p, PERM_CHUNKS)


@njit
def _permute(mask, p, chunks):
    return (
        chunks[p, 0, mask & 127]
        | chunks[p, 1, (mask >> 7) & 127]
        | chunks[p, 2, (mask >> 14) & 127]
        | chunks[p, 3, (mask >> 21) & 127]
    )


@njit
def _is_perm_minimal(mask, chunks):
    for p in range(1, 6):
        if _permute(mask, p, chunks) < mask:
            return False
    return True


# -- unusable steps ----------------------------------------------------------


@njit
def _usable_in_box(mask, box, steps):
    """Steps applied somewhere along a BFS of octant positions in [0,box]^3."""
    nstep = 0
    idx = np.empty(26, np.int64)
    for b in range(26):
        if (mask >> b) & 1:
            idx[nstep] = b
            nstep += 1
    side = box + 1
    ncell = side * side * side
    seen = np.zeros(ncell, np.uint8)
    queue = np.empty(ncell, np.int64)
    queue[0] = 0
    seen[0] = 1
    head = 0
    tail = 1
    used = 0
    while head < tail:
        cell = queue[head]
        head += 1
        x = cell % side
        y = (cell // side) % side
        z = cell // (side * side)
        for t in range(nstep):
            b = idx[t]
            nx = x + steps[b, 0]
            ny = y + steps[b, 1]
            nz = z + steps[b, 2]
            if nx < 0 or ny < 0 or nz < 0:
                continue
            used |= 1 << b
            if nx > box or ny > box or nz > box:
                continue
            nc = nx + side * (ny + side * nz)
            if seen[nc] == 0:
                seen[nc] = 1
                queue[tail] = nc
                tail += 1
        if used == mask:
            break
    return used


@njit
def _closure(mask, steps):
    if mask == 0:
        return 0
    box = 4
    used = _usable_in_box(mask, box, steps)
    if used == mask:
        return mask
    while True:
        box *= 2
        nxt = _usable_in_box(mask, box, steps)
        if nxt == used:
            return used
        used = nxt


def usable_closure(mask: int) -> int:
    """Steps that occur in at least one octant walk from the origin."""
    return int(_closure(check_mask(mask), STEPS_ARRAY))


def canonical_form(mask: int) -> int:
    closed = usable_closure(mask)
    return min(int(_permute(closed, p, PERM_CHUNKS)) for p in range(6))


def is_canonical(mask: int) -> bool:
    mask = check_mask(mask)
    return mask != 0 and bool(_is_perm_minimal(mask, PERM_CHUNKS)) and usable_closure(mask) == mask


# -- half-space models -------------------------------------------------------


@njit
def _implied_by(mask, a, c, steps):
    # exists mu >= 0 with s_a >= mu * s_c for every step s
    lo = 0
    hi = 2
    for b in range(26):
        if (mask >> b) & 1:
            sa = steps[b, a]
            sc = steps[b, c]
            if sc > 0:
                if sa < hi:
                    hi = sa
            elif sc < 0:
                if -sa > lo:
                    lo = -sa
            elif sa < 0:
                return False
    return lo <= hi


@njit
def _halfspace(mask, steps):
    for c in range(3):
        a = (c + 1) % 3
        b = (c + 2) % 3
        if _implied_by(mask, a, c, steps) and _implied_by(mask, b, c, steps):
            return True
    return False


def halfspace_reducible(mask: int) -> bool:
    """True if two of the octant constraints follow from the third alone.

    Then every walk stays in the octant iff one coordinate stays nonnegative,
    so the model is a half-space model and is dropped together with the
    duplicates.  This also removes every model with at most two steps.
    """
    return bool(_halfspace(check_mask(mask), STEPS_ARRAY))


# -- enumeration -------------------------------------------------------------


@njit
def _canonical_in_range(lo, hi, steps, chunks, keep_halfspace):
    out = np.empty(hi - lo, np.uint32)
    n = 0
    for m in range(lo, hi):
        if m == 0:
            continue
        if not _is_perm_minimal(m, chunks):
            continue
        if _closure(m, steps) == m and (keep_halfspace or not _halfspace(m, steps)):
            out[n] = m
            n += 1
    return out[:n]


@njit
def _canonical_of_size(k, steps, chunks, keep_halfspace):
    # Gosper's hack over all 26-bit masks with k bits set
    out = np.empty(0, np.uint32)
    if k < 1 or k > 26:
        return out
    total = 1
    for i in range(k):
        total = total * (26 - i) // (i + 1)
    out = np.empty(total, np.uint32)
    n = 0
    m = (1 << k) - 1
    limit = 1 << 26
    while m < limit:
        if (
            _is_perm_minimal(m, chunks)
            and _closure(m, steps) == m
            and (keep_halfspace or not _halfspace(m, steps))
        ):
            out[n] = m
            n += 1
        c = m & -m
        r = m + c
        m = (((r ^ m) >> 2) // c) | r
    return out[:n]


def canonical_masks_of_size(k: int, keep_halfspace: bool = False) -> np.ndarray:
    """Sorted array of filter-1 masks with exactly ``k`` steps."""
    return np.sort(_canonical_of_size(k, STEPS_ARRAY, PERM_CHUNKS, keep_halfspace))


def canonical_masks_in_range(lo: int, hi: int, keep_halfspace: bool = False) -> np.ndarray:
    """Filter-1 masks ``m`` with ``lo <= m < hi`` in increasing order."""
    lo = max(0, int(lo))
    hi = min(int(hi), FULL_MASK + 1)
    if hi <= lo:
        return np.empty(0, np.uint32)
    return _canonical_in_range(lo, hi, STEPS_ARRAY, PERM_CHUNKS, keep_halfspace)


def enumerate_classes(
    size_filter: Iterable[int] | None = None, keep_halfspace: bool = False
) -> Iterator[ModelRecord]:
    """Yield one record per essentially different model, by size then mask.

    A model is emitted when it has no unusable step, is the smallest of its
    coordinate permutations, and is not half-space reducible.
    ``size_filter`` restricts the step counts (e.g. ``range(1, 7)``); by
    default all sizes 1..26 are scanned, which touches every 26-bit mask.
    """
    sizes = sorted(set(size_filter)) if size_filter is not None else range(1, NBITS + 1)
    for k in sizes:
        for m in canonical_masks_of_size(k, keep_halfspace):
            yield ModelRecord(int(m), k)


def class_polynomial(masks: Iterable[int]) -> list[int]:
    """Coefficients ``c[k]`` of sum u^|S| over the given masks (index 0..26)."""
    coeffs = [0] * (NBITS + 1)
    for m in masks:
        coeffs[popcount(int(m))] += 1
    return coeffs
