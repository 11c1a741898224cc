"""Modular walk counting by layered dynamic programming.

Layer ``n`` holds q(i, j, k, n) mod p, the number of octant walks of length n
ending at (i, j, k).  Cells are stored densely per (i, j) row, compressed along
k by the support lattice: for fixed (i, j, n) the admissible k form a
progression r + d*Z, so row entry t stands for k = r + d*t.  Every read of the
previous layer is then a contiguous slice with a small constant offset, which
keeps the inner loop vectorisable.
"""

from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import _accel
from ._accel import njit, prange
from .stepset import check_mask, decode

MAX_PRIME = 1 << 15
DEFAULT_MEMORY_BUDGET = int(os.environ.get("OCTWALK_MEMORY_BUDGET", str(2 << 30)))

SERIES_MAGIC = b"OW3S"
SERIES_VERSION = 1


class Target(enum.IntEnum):
    EXCURSIONS = 0
    ALL_ENDPOINTS = 1

    @classmethod
    def parse(cls, text: "str | Target") -> "Target":
        if isinstance(text, Target):
            return text
        key = text.strip().lower()
        if key in ("excursions", "exc", "0"):
            return cls.EXCURSIONS
        if key in ("all", "allendpoints", "all_endpoints", "1"):
            return cls.ALL_ENDPOINTS
        raise ValueError(f"unknown target {text!r}")


class MemoryBudgetExceeded(MemoryError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


# -- support lattice -------------------------------------------------------------


def _echelon(rows: list[list[int]]) -> list[list[int]]:
    """Integer row echelon form (Hermite normal form, positive pivots, reduced above)."""
    rows = [list(r) for r in rows if any(r)]
    basis: list[list[int]] = []
    ncols = len(rows[0]) if rows else 0
    col = 0
    while rows and col < ncols:
        live = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        if not live:
            col += 1
            continue
        # Euclid on column col
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            piv = live[0]
            nxt = [piv]
            for r in live[1:]:
                q = r[col] // piv[col]
                r = [a - q * b for a, b in zip(r, piv)]
                (nxt if r[col] != 0 else rest).append(r)
            live = nxt
        piv = live[0]
        if piv[col] < 0:
            piv = [-a for a in piv]
        basis.append(piv)
        rows = [r for r in rest if any(r)]
        col += 1
    # reduce entries above pivots
    for i, b in enumerate(basis):
        c = next(k for k, v in enumerate(b) if v)
        for h in range(i):
            q = basis[h][c] // b[c]
            basis[h] = [a - q * v for a, v in zip(basis[h], b)]
    return basis


@dataclass(frozen=True)
class SupportLattice:
    """Lattice spanned by (n, i, j, k) = (1, s) for s in S, coordinates ordered (n, i, j, k)."""

    basis: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, mask: int) -> "SupportLattice":
        gens = [[1, *s] for s in decode(check_mask(mask))]
        if not gens:
            return cls(())
        return cls(tuple(tuple(r) for r in _echelon(gens)))

    def pivots(self) -> list[int]:
        return [next(k for k, v in enumerate(b) if v) for b in self.basis]

    def _reduce(self, vec: Sequence[int], upto: int) -> list[int] | None:
        """Eliminate pivots in coordinates < upto; None if not integral there."""
        v = list(vec)
        for b, c in zip(self.basis, self.pivots()):
            if c >= upto:
                break
            if v[c] % b[c]:
                return None
            q = v[c] // b[c]
            v = [a - q * x for a, x in zip(v, b)]
        if any(v[:upto]):
            return None
        return v

    def contains(self, i: int, j: int, k: int, n: int) -> bool:
        v = self._reduce((n, i, j, k), 4)
        return v is not None

    @property
    def k_modulus(self) -> int:
        """d with (0,0,0,d) generating the k-fibre; 0 when k is fixed by (n, i, j)."""
        for b, c in zip(self.basis, self.pivots()):
            if c == 3:
                return b[3]
        return 0

    def k_residue(self, i: int, j: int, n: int) -> int | None:
        """r with {k : (i,j,k,n) in L} = r + d*Z (None if the row is empty)."""
        v = self._reduce((n, i, j, 0), 3)
        if v is None:
            return None
        d = self.k_modulus
        r = -v[3]
        return r % d if d else r

    def index_in_full(self) -> int:
        """Index [Z^4 : L] when L has full rank, else 0."""
        if len(self.basis) < 4:
            return 0
        out = 1
        for b, c in zip(self.basis, self.pivots()):
            out *= b[c]
        return out


def lattice_constraints(mask: int) -> SupportLattice:
    return SupportLattice.of(mask)


# -- reachability ------------------------------------------------------------------

#: nonnegative functionals on the octant used for pruning
FUNCTIONALS = ((1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1))


@dataclass(frozen=True)
class Reachability:
    """Conservative polytope: 0 <= f(v) <= min(n*up_f, (N-n)*down_f) for each functional f.

    ``down_f`` is only used for excursions (the walk must be able to come back).
    """

    up: tuple[int, ...]
    down: tuple[int, ...]
    horizon: int
    target: Target

    def bound(self, f: int, n: int) -> int:
        b = n * self.up[f]
        if self.target is Target.EXCURSIONS:
            b = min(b, (self.horizon - n) * self.down[f])
        return b

    def __call__(self, i: int, j: int, k: int, n: int) -> bool:
        if min(i, j, k) < 0 or n < 0 or n > self.horizon:
            return False
        for f, (a, b, c) in enumerate(FUNCTIONALS):
            if a * i + b * j + c * k > self.bound(f, n):
                return False
        return True

    def bounds_array(self) -> np.ndarray:
        """(N+1, len(FUNCTIONALS)) table of right-hand sides."""
        out = np.empty((self.horizon + 1, len(FUNCTIONALS)), np.int64)
        for n in range(self.horizon + 1):
            for f in range(len(FUNCTIONALS)):
                out[n, f] = self.bound(f, n)
        return out


def reachability_predicate(mask: int, N: int, target: "Target | str" = Target.ALL_ENDPOINTS) -> Reachability:
    if N < 0:
        raise ValueError("horizon must be nonnegative")
    steps = decode(check_mask(mask))
    up, down = [], []
    for f in FUNCTIONALS:
        vals = [sum(a * b for a, b in zip(f, s)) for s in steps] or [0]
        up.append(max(0, max(vals)))
        down.append(max(0, -min(vals)))
    return Reachability(tuple(up), tuple(down), N, Target.parse(target))


# -- numba kernel ------------------------------------------------------------------


@njit
def _addmod(a, b, p):
    s = a + b
    t = s - p
    return s if s < t else t


@njit
def _addmod_into(dst, src, p16):
    # branch-free min(a+b, a+b-p) in 16-bit lanes; slices keep indices
    # nonnegative so the loop vectorises
    for t in range(dst.shape[0]):
        u = np.uint16(dst[t] + src[t])
        w = np.uint16(u - p16)
        dst[t] = min(u, w)


@njit
def _row_kmax(bounds, n, i, j):
    km = bounds[n, 3]
    v = bounds[n, 4] - i
    if v < km:
        km = v
    v = bounds[n, 5] - j
    if v < km:
        km = v
    v = bounds[n, 6] - i - j
    if v < km:
        km = v
    return km


@njit
def _row_jmax(bounds, n, i):
    jm = bounds[n, 1]
    v = bounds[n, 2] - i
    if v < jm:
        jm = v
    return jm


@njit
def _update_rows(old, new, steps, resid, ok, bounds, n, p, i_lo, i_hi, d):
    """Compute rows i in [i_lo, i_hi) of layer n from layer n-1 (arrays are halo-padded)."""
    p16 = np.uint16(p)
    for i in range(i_lo, i_hi):
        jm = _row_jmax(bounds, n, i)
        for j in range(0, jm + 1):
            row = new[i + 1, j + 1]
            if not ok[n, i, j]:
                continue
            km = _row_kmax(bounds, n, i, j)
            if km < 0:
                continue
            r = resid[n, i, j]
            if km < r:
                continue
            tmax = (km - r) // d
            row[2 : tmax + 3] = 0
            for s in range(steps.shape[0]):
                pi = i - steps[s, 0]
                pj = j - steps[s, 1]
                if pi < 0 or pj < 0 or not ok[n - 1, pi, pj]:
                    continue
                src = old[pi + 1, pj + 1]
                o = (r - steps[s, 2] - resid[n - 1, pi, pj]) // d + 2
                _addmod_into(row[2 : tmax + 3], src[o : o + tmax + 1], p16)
    return 0


@njit(parallel=True)
def _update_layer(old, new, steps, resid, ok, bounds, n, p, cuts, d):
    for c in prange(cuts.shape[0] - 1):
        _update_rows(old, new, steps, resid, ok, bounds, n, p, cuts[c], cuts[c + 1], d)


@njit
def _layer_total(layer, p):
    total = 0
    for i in range(layer.shape[0]):
        for j in range(layer.shape[1]):
            s = 0
            for t in range(layer.shape[2]):
                s += layer[i, j, t]
            total = (total + s) % p
    return total


@njit
def _clear(buf, bounds, n):
    """Zero the region written for layer n (halo-padded indices)."""
    if n < 0:
        return
    bi = bounds[n, 0]
    for i in range(bi + 1):
        jm = _row_jmax(bounds, n, i)
        for j in range(jm + 1):
            buf[i + 1, j + 1, :] = 0


@njit
def _fill_residues(basis, piv, nb, N, extent, d, fixed, resid, ok):
    v = np.zeros(4, np.int64)
    for n in range(N + 1):
        top = min(n, extent)
        for i in range(top + 1):
            for j in range(top + 1):
                v[0] = n
                v[1] = i
                v[2] = j
                v[3] = 0
                good = True
                for h in range(nb):
                    c = piv[h]
                    if c >= 3:
                        break
                    if v[c] % basis[h, c] != 0:
                        good = False
                        break
                    q = v[c] // basis[h, c]
                    for e in range(4):
                        v[e] -= q * basis[h, e]
                if not good or v[0] != 0 or v[1] != 0 or v[2] != 0:
                    continue
                ok[n, i, j] = True
                if not fixed:
                    resid[n, i, j] = (-v[3]) % d


def _residue_tables(lat: SupportLattice, N: int, extent: int):
    d = lat.k_modulus or 1
    fixed = lat.k_modulus == 0
    resid = np.zeros((N + 1, extent + 1, extent + 1), np.int16)
    ok = np.zeros((N + 1, extent + 1, extent + 1), np.bool_)
    nb = len(lat.basis)
    basis = np.zeros((4, 4), np.int64)
    piv = np.zeros(4, np.int64)
    for h, (b, c) in enumerate(zip(lat.basis, lat.pivots())):
        basis[h] = b
        piv[h] = c
    _fill_residues(basis, piv, nb, N, extent, d, fixed, resid, ok)
    return resid, ok, d


@dataclass
class ModSeries:
    mask: int
    target: Target
    prime: int
    terms: np.ndarray

    def __post_init__(self):
        self.terms = np.asarray(self.terms, dtype=np.int64)

    @property
    def N(self) -> int:
        return len(self.terms) - 1

    def to_bytes(self) -> bytes:
        head = SERIES_MAGIC + struct.pack("<HIBHI", SERIES_VERSION, self.mask, int(self.target), self.prime, self.N)
        return head + self.terms.astype("<u2").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ModSeries":
        if blob[:4] != SERIES_MAGIC:
            raise ValueError("not a series file")
        version, mask, target, prime, N = struct.unpack_from("<HIBHI", blob, 4)
        if version != SERIES_VERSION:
            raise ValueError(f"unsupported series version {version}")
        off = 4 + struct.calcsize("<HIBHI")
        terms = np.frombuffer(blob, dtype="<u2", count=N + 1, offset=off).astype(np.int64)
        return cls(mask, Target(target), prime, terms)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ModSeries":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _check_args(mask: int, N: int, p: int):
    check_mask(mask)
    if not is_prime(p) or p >= MAX_PRIME:
        raise ValueError(f"modulus must be a prime below 2^15, got {p}")
    if N < 0:
        raise ValueError("horizon must be nonnegative")


def layer_bytes(mask: int, N: int, target="all") -> int:
    """Memory for the two layer buffers plus the residue tables."""
    reach = reachability_predicate(mask, N, target)
    b = reach.bounds_array()
    extent = int(b[:, :2].max(initial=0))
    d = SupportLattice.of(mask).k_modulus or 1
    kc = int(b[:, 3].max(initial=0)) // d + 1
    return 2 * (extent + 3) ** 2 * (kc + 4) * 2 + (N + 1) * (extent + 1) ** 2 * 3


def count_layers(
    mask: int,
    N: int,
    p: int,
    target: "Target | str" = Target.ALL_ENDPOINTS,
    shards: int = 1,
    prune: bool = True,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    backend: str | None = None,
) -> ModSeries:
    """Terms a_0..a_N of the counting series modulo p."""
    _check_args(mask, N, p)
    target = Target.parse(target)
    backend = backend or _accel.backend()
    need = layer_bytes(mask, N, target if prune else Target.ALL_ENDPOINTS)
    if need > memory_budget:
        raise MemoryBudgetExceeded(f"layers need {need} bytes, budget is {memory_budget}")
    if backend == "numpy":
        return _count_numpy(mask, N, p, target, prune)
    if not _accel.USE_NUMBA:
        raise RuntimeError("numba backend requested but numba is disabled")
    return _count_numba(mask, N, p, target, shards, prune)


def _count_numba(mask, N, p, target, shards, prune):
    steps = np.array(decode(mask), dtype=np.int64).reshape(-1, 3)
    reach = reachability_predicate(mask, N, target if prune else Target.ALL_ENDPOINTS)
    bounds = reach.bounds_array()
    extent = int(bounds[:, :2].max(initial=0))
    lat = SupportLattice.of(mask) if prune else SupportLattice(())
    if prune:
        resid, ok, d = _residue_tables(lat, N, extent)
    else:
        d = 1
        resid = np.zeros((N + 1, extent + 1, extent + 1), np.int16)
        ok = np.ones((N + 1, extent + 1, extent + 1), np.bool_)
    kc = int(bounds[:, 3].max(initial=0)) // d + 1
    shape = (extent + 3, extent + 3, kc + 4)
    bufs = [np.zeros(shape, np.uint16), np.zeros(shape, np.uint16)]
    terms = np.zeros(N + 1, np.int64)
    bufs[0][1, 1, 2] = 1
    terms[0] = 1 % p
    for n in range(1, N + 1):
        old, new = bufs[(n - 1) % 2], bufs[n % 2]
        _clear(new, bounds, n - 2)
        bi = int(bounds[n, 0])
        cuts = np.linspace(0, bi + 1, max(1, shards) + 1).round().astype(np.int64)
        _update_layer(old, new, steps, resid, ok, bounds, n, p, cuts, d)
        if target is Target.EXCURSIONS:
            hit = ok[n, 0, 0] and resid[n, 0, 0] == 0
            terms[n] = int(new[1, 1, 2]) if hit else 0
        else:
            terms[n] = _layer_total(new, p)
    return ModSeries(mask, target, p, terms)


def _count_numpy(mask, N, p, target, prune):
    """Plain numpy: full cube layers, one shifted-slice add per step."""
    steps = decode(mask)
    reach = reachability_predicate(mask, N, target if prune else Target.ALL_ENDPOINTS)
    ext = N + 2
    old = np.zeros((ext + 2,) * 3, np.uint16)
    old[1, 1, 1] = 1
    p16 = np.uint16(p)
    terms = [1 % p]
    if prune:
        ii, jj, kk = np.ogrid[0:ext, 0:ext, 0:ext]
    for n in range(1, N + 1):
        new = np.zeros_like(old)
        core = new[1:-1, 1:-1, 1:-1]
        for sx, sy, sz in steps:
            src = old[1 - sx : ext + 1 - sx, 1 - sy : ext + 1 - sy, 1 - sz : ext + 1 - sz]
            u = core + src
            np.minimum(u, u - p16, out=core)
        if prune:
            mask_arr = np.ones(core.shape, bool)
            for f, (a, b, c) in enumerate(FUNCTIONALS):
                mask_arr &= a * ii + b * jj + c * kk <= reach.bound(f, n)
            core[~mask_arr] = 0
        if target is Target.EXCURSIONS:
            terms.append(int(core[0, 0, 0]))
        else:
            terms.append(int(core.sum(dtype=np.int64) % p))
        old = new
    return ModSeries(mask, target, p, np.array(terms))


# -- oracles -----------------------------------------------------------------------


def brute_force_walks(mask: int, n_max: int, target: "Target | str" = Target.ALL_ENDPOINTS) -> list[int]:
    """Exact counts a_0..a_n_max by depth-first recursion over (position, steps left).

    The recursion is memoised on (position, remaining length); it enumerates
    the same walk tree as a plain DFS without revisiting identical subtrees.
    """
    steps = tuple(decode(check_mask(mask)))
    target = Target.parse(target)

    @lru_cache(maxsize=None)
    def walks(x: int, y: int, z: int, left: int) -> int:
        if left == 0:
            return 1 if target is Target.ALL_ENDPOINTS or (x, y, z) == (0, 0, 0) else 0
        if target is Target.EXCURSIONS and x + y + z > 3 * left:
            return 0
        total = 0
        for sx, sy, sz in steps:
            a, b, c = x + sx, y + sy, z + sz
            if a >= 0 and b >= 0 and c >= 0:
                total += walks(a, b, c, left - 1)
        return total

    return [walks(0, 0, 0, n) for n in range(n_max + 1)]


def naive_walks(mask: int, n_max: int, target: "Target | str" = Target.ALL_ENDPOINTS) -> list[int]:
    """Unmemoised walk enumeration (exponential; only for tiny n)."""
    steps = decode(check_mask(mask))
    target = Target.parse(target)
    counts = [0] * (n_max + 1)

    def dfs(x, y, z, n):
        if target is Target.ALL_ENDPOINTS or (x, y, z) == (0, 0, 0):
            counts[n] += 1
        if n == n_max:
            return
        for sx, sy, sz in steps:
            if x + sx >= 0 and y + sy >= 0 and z + sz >= 0:
                dfs(x + sx, y + sy, z + sz, n + 1)

    dfs(0, 0, 0, 0)
    return counts


def projected_walks(steps2d: Sequence[tuple[int, int]], n_max: int) -> list[int]:
    """All-endpoint quarter-plane walk counts for a step multiset."""
    layer = {(0, 0): 1}
    out = [1]
    for _ in range(n_max):
        nxt: dict = {}
        for (x, y), c in layer.items():
            for sx, sy in steps2d:
                if x + sx >= 0 and y + sy >= 0:
                    key = (x + sx, y + sy)
                    nxt[key] = nxt.get(key, 0) + c
        layer = nxt
        out.append(sum(layer.values()))
    return out
