"""Prime planning and Chinese remaindering of modular counting series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .countkernel import MAX_PRIME, ModSeries, Target, count_layers, is_prime
from .stepset import check_mask, decode, mask_hex

PRIME_FLOOR = 1 << 14

#: primes in (2^14, 2^15), largest first
PRIME_TABLE: tuple[int, ...] = tuple(p for p in range(MAX_PRIME - 1, PRIME_FLOOR, -1) if is_prime(p))


class InsufficientCapacity(ValueError):
    pass


class InconsistentResidues(ArithmeticError):
    pass


@dataclass(frozen=True)
class PrimePlan:
    primes: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.primes)) != len(self.primes):
            raise ValueError("primes must be distinct")
        for p in self.primes:
            if not (PRIME_FLOOR < p < MAX_PRIME and is_prime(p)):
                raise ValueError(f"{p} is not a prime in (2^14, 2^15)")

    @property
    def capacity(self) -> int:
        return math.prod(self.primes)


def prime_count(step_count: int, N: int) -> int:
    """ceil(N log|S| / (14 log 2)), at least one."""
    if step_count < 1 or N < 0:
        raise ValueError("need |S| >= 1 and N >= 0")
    if step_count == 1 or N == 0:
        return 1
    return max(1, math.ceil(N * math.log(step_count) / (14 * math.log(2))))


def select_primes(step_count: int, N: int) -> PrimePlan:
    m = prime_count(step_count, N)
    if m > len(PRIME_TABLE):
        raise InsufficientCapacity(f"{m} primes needed, only {len(PRIME_TABLE)} available below 2^15")
    plan = PrimePlan(PRIME_TABLE[:m])
    # every prime exceeds 2^14, so m of them exceed |S|^N by construction
    assert plan.capacity > step_count**N
    return plan


@dataclass
class ExactSeries:
    mask: int
    target: Target
    terms: list[int]
    primes: tuple[int, ...] = field(default_factory=tuple)

    @property
    def N(self) -> int:
        return len(self.terms) - 1

    def check_bounds(self) -> None:
        k = len(decode(self.mask))
        if self.terms and self.terms[0] != 1:
            raise ValueError("a_0 must be 1")
        for n, a in enumerate(self.terms):
            if a < 0 or a > k**n:
                raise ValueError(f"a_{n} = {a} outside [0, |S|^n]")

    def to_text(self) -> str:
        name = "excursions" if self.target is Target.EXCURSIONS else "all"
        lines = [
            f"# model {mask_hex(self.mask)}",
            f"# target {name}",
            f"# primes {' '.join(map(str, self.primes))}",
        ]
        lines += [f"{n}\t{a}" for n, a in enumerate(self.terms)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExactSeries":
        mask, target, primes, terms = 0, Target.ALL_ENDPOINTS, (), []
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(" ")
                if key == "model":
                    mask = int(val, 16)
                elif key == "target":
                    target = Target.parse(val)
                elif key == "primes":
                    primes = tuple(int(x) for x in val.split())
                continue
            n, a = line.split("\t")
            if int(n) != len(terms):
                raise ValueError(f"terms out of order at index {n}")
            terms.append(int(a))
        return cls(mask, target, terms, primes)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "ExactSeries":
        with open(path) as fh:
            return cls.from_text(fh.read())


class Garner:
    """Incremental CRT: feed residue vectors one prime at a time."""

    def __init__(self, length: int):
        self.values = [0] * length
        self.modulus = 1
        self.primes: list[int] = []

    def add(self, p: int, residues: Sequence[int]) -> None:
        if len(residues) != len(self.values):
            raise ValueError("length mismatch")
        if p in self.primes:
            raise ValueError(f"prime {p} already used")
        M = self.modulus
        inv = pow(M % p, -1, p)
        out = self.values
        for n, r in enumerate(residues):
            x = out[n]
            t = (int(r) - x) * inv % p
            out[n] = x + M * t
        self.modulus = M * p
        self.primes.append(p)


def crt_reconstruct(images: Iterable[ModSeries], bound: int | None = None) -> ExactSeries:
    """Exact terms from modular images over distinct primes.

    ``bound`` is an upper bound for every term (default |S|^N); the primes'
    product must exceed it.
    """
    images = list(images)
    if not images:
        raise ValueError("no images")
    first = images[0]
    for im in images[1:]:
        if (im.mask, im.target, len(im.terms)) != (first.mask, first.target, len(first.terms)):
            raise ValueError("images disagree on model, target or length")
    if bound is None:
        bound = len(decode(check_mask(first.mask))) ** first.N
    g = Garner(len(first.terms))
    for im in images:
        g.add(im.prime, im.terms)
    if g.modulus <= bound:
        k = len(decode(first.mask))
        raise InsufficientCapacity(
            f"product of {len(images)} primes does not exceed the term bound; "
            f"{prime_count(k, first.N)} primes are required"
        )
    # the lift is congruent to every residue by construction; a term beyond the
    # bound exposes a corrupted image (likely when the capacity has headroom)
    for n, a in enumerate(g.values):
        if a > bound:
            raise InconsistentResidues(f"term {n} reconstructs above the bound; some residue is wrong")
    return ExactSeries(first.mask, first.target, g.values, tuple(g.primes))


def exact_dp(mask: int, N: int, target: "Target | str" = Target.ALL_ENDPOINTS) -> list[int]:
    """Forward layer DP with Python integers (independent of the modular kernel)."""
    steps = decode(check_mask(mask))
    target = Target.parse(target)
    layer = {(0, 0, 0): 1}
    out = [1]
    for n in range(1, N + 1):
        nxt: dict = {}
        left = N - n
        for (x, y, z), c in layer.items():
            for sx, sy, sz in steps:
                a, b, d = x + sx, y + sy, z + sz
                if a < 0 or b < 0 or d < 0:
                    continue
                if target is Target.EXCURSIONS and a + b + d > 3 * left:
                    continue
                key = (a, b, d)
                nxt[key] = nxt.get(key, 0) + c
        layer = nxt
        if target is Target.EXCURSIONS:
            out.append(layer.get((0, 0, 0), 0))
        else:
            out.append(sum(layer.values()))
    return out


def exact_series(
    mask: int,
    N: int,
    target: "Target | str" = Target.ALL_ENDPOINTS,
    primes: Sequence[int] | None = None,
    shards: int = 1,
    progress=None,
) -> ExactSeries:
    """Run the modular kernel over a prime plan and reconstruct."""
    target = Target.parse(target)
    if primes is None:
        primes = select_primes(len(decode(mask)), N).primes
    images = []
    for p in primes:
        images.append(count_layers(mask, N, p, target, shards=shards))
        if progress:
            progress(p)
    return crt_reconstruct(images)
