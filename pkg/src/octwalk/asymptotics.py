"""Growth estimates from exact series: ratios, Richardson acceleration, constant recognition.

Counting sequences are assumed to behave like c(n) phi^n n^alpha where c(n) may
depend on n modulo a small period m.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
from mpmath import mp, mpf

PERIODS = (1, 2, 3, 4, 6)


class DegenerateSeries(ValueError):
    pass


class NoPowerLawFit(ValueError):
    pass


class PrecisionLoss(ArithmeticError):
    """Cancellation in an acceleration step ate the working precision."""


@dataclass
class RatioSequence:
    """u_n = a_n / a_{n-m}; ``values[n]`` is None where undefined."""

    period: int
    values: list
    precision: int

    def defined(self) -> list[int]:
        return [n for n, v in enumerate(self.values) if v is not None]

    def __getitem__(self, n: int):
        v = self.values[n]
        if v is None:
            raise KeyError(f"u_{n} undefined")
        return v


@dataclass
class AsymptoticEstimate:
    phi: mpf
    alpha: mpf
    period: int
    accuracy: mpf
    windows: tuple[int, int]
    order: int
    alpha_accuracy: mpf = mpf(0)
    flags: list[str] = field(default_factory=list)


@dataclass
class MinPolyCandidate:
    coefficients: tuple[int, ...]  # constant term first
    root: mpf
    residual: mpf
    height_bound: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __str__(self) -> str:
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coefficients[k]
            if c == 0:
                continue
            mon = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            coef = str(c) if (abs(c) != 1 or k == 0) else ("-" if c < 0 else "")
            if mon and coef not in ("", "-"):
                coef += "*"
            terms.append(f"{coef}{mon}")
        return " + ".join(terms).replace("+ -", "- ")


def working_digits(j: int, accuracy_digits: int = 20) -> int:
    return 10 + 2 * j + accuracy_digits


def ratio_sequence(a: Sequence[int], m: int = 1, digits: int = 50) -> RatioSequence:
    if m < 1:
        raise ValueError("period must be positive")
    with mp.workdps(digits):
        vals: list = [None] * len(a)
        for n in range(m, len(a)):
            if a[n - m] != 0:
                vals[n] = mpf(int(a[n])) / mpf(int(a[n - m]))
    late = vals[len(a) // 2 :]
    if not any(v is not None and v != 0 for v in late):
        raise DegenerateSeries("late ratios all vanish or are undefined")
    return RatioSequence(m, vals, digits)


def _binomial_terms(values: Sequence, n: int, j: int, step: int = 1):
    """Terms of sum_k (-1)^k C(j,k) (t-k)^j w_{t-k}, with t = index in units of ``step``."""
    out = []
    for k in range(j + 1):
        idx = n - k * step
        if idx < 0 or values[idx] is None:
            raise KeyError(f"value at {idx} undefined")
        t = mpf(n) / step - k
        out.append((-1) ** k * math.comb(j, k) * t**j * values[idx])
    return out


def richardson(u, n: int, j: int, step: int | None = None, min_digits: int = 10) -> mpf:
    """Binomial Richardson transform of order j at index n.

    Exact when u_n is a polynomial of degree <= j in 1/n.  With ``step`` > 1
    the transform runs over n, n-step, ..., n-j*step (used for periodic
    ratio sequences).  Raises :class:`PrecisionLoss` when fewer than
    ``min_digits`` significant digits survive the cancellation.
    """
    values = u.values if isinstance(u, RatioSequence) else u
    if step is None:
        step = u.period if isinstance(u, RatioSequence) and u.period > 1 else 1
    if j < 0:
        raise ValueError("order must be nonnegative")
    terms = _binomial_terms(values, n, j, step)
    total = mpmath.fsum(terms)
    mag = mpmath.fsum(abs(t) for t in terms)
    if total != 0 and mag > 0:
        lost = mpmath.log10(mag / abs(total))
        if mp.dps - lost < min_digits:
            raise PrecisionLoss(f"order {j} at n={n} loses {float(lost):.1f} of {mp.dps} digits")
    return total / math.factorial(j)


def richardson_doubling(u, n: int, i: int) -> mpf:
    """Accelerate u_n, u_{2n}, ..., u_{2^i n}; i=1 gives 2u_{2n} - u_n."""
    values = u.values if isinstance(u, RatioSequence) else u
    col = [values[n * 2**k] for k in range(i + 1)]
    if any(v is None for v in col):
        raise KeyError("undefined value in doubling window")
    for m in range(1, i + 1):
        f = mpf(2) ** m
        col = [(f * col[k + 1] - col[k]) / (f - 1) for k in range(len(col) - 1)]
    return col[0]


def _support_period(a: Sequence[int]) -> int:
    """Smallest g such that late nonzero terms sit on one residue class mod g."""
    late = [n for n in range(len(a) // 2, len(a)) if a[n] != 0]
    if len(late) < 2:
        raise DegenerateSeries("too few nonzero terms")
    g = 0
    for n in late[1:]:
        g = math.gcd(g, n - late[0])
    return g


def _acceleration_spread(a: Sequence[int], m: int, order: int, count: int) -> mpf | None:
    """Relative spread of order-``order`` accelerated m-step ratios over the last ``count`` indices."""
    N = len(a) - 1
    idx = [n for n in range(N - count + 1, N + 1) if a[n] != 0]
    if len(idx) < 2 or idx[-1] - order * m - m < 0:
        return None
    if any(a[n - k * m] == 0 for n in idx for k in range(1, order + 2)):
        return None
    vals = []
    for n in idx:
        window = {n - k * m: mpf(a[n - k * m]) / a[n - (k + 1) * m] for k in range(order + 1)}
        seq = [window.get(t) for t in range(n + 1)]
        vals.append(richardson(seq, n, order, step=m, min_digits=0))
    ref = max(abs(v) for v in vals)
    return (max(vals) - min(vals)) / ref if ref else None


def detect_period(a: Sequence[int], order: int = 4, slack: float = 10.0) -> int:
    """Period m in {1,2,3,4,6} for the ratios a_n/a_{n-m}.

    Candidates must be compatible with the support of the series.  For each,
    accelerated ratios at consecutive late indices are compared; hidden
    oscillations (a parity-dependent constant, say) show up as a large spread
    because acceleration amplifies them.  The smallest m whose spread is
    within ``slack`` of the best one wins.
    """
    g = _support_period(a)
    a = [int(x) for x in a]
    spreads = {}
    with mp.workdps(working_digits(order, 20)):
        for m in PERIODS:
            if m % g:
                continue
            s = _acceleration_spread(a, m, order, 12)
            if s is not None:
                spreads[m] = s
    if not spreads:
        raise NoPowerLawFit("no period in {1,2,3,4,6} gives usable ratios")
    best = min(spreads.values())
    # spreads below n^(-order/2) are already far smaller than any amplified oscillation
    floor = mpf(len(a)) ** (-mpf(order) / 2)
    for m in sorted(spreads):
        if spreads[m] <= max(slack * best, floor):
            return m
    raise NoPowerLawFit("no converging period")  # pragma: no cover


def _last_index(a: Sequence[int], end: int, m: int) -> int:
    n = end
    while n >= 0 and (a[n] == 0 or a[n - m] == 0):
        n -= 1
    return n


def estimate_growth(
    a: Sequence[int],
    order: int = 6,
    end: int | None = None,
    shift: int = 10,
    period: int | None = None,
    digits: int | None = None,
) -> AsymptoticEstimate:
    """phi and alpha from Richardson-accelerated ratios, windows ending at ``end`` and ``end - shift``."""
    a = [int(x) for x in a]
    usable = sum(1 for x in a if x)
    if usable < 64:
        raise ValueError(f"need at least 64 nonzero terms, have {usable}")
    if end is None:
        end = len(a) - 1
    m = period or detect_period(a[: end + 1], order)
    digits = digits or working_digits(order, 30)
    flags = []
    if m > 1:
        flags.append(f"period-{m}")
    with mp.workdps(digits):
        u = ratio_sequence(a, m, digits)
        n1 = _last_index(a, end, m)
        n2 = _last_index(a, n1 - max(shift, m), m)
        if n2 - order * m < m:
            raise ValueError("window too short for the requested order")
        lim1 = richardson(u, n1, order, step=m)
        lim2 = richardson(u, n2, order, step=m)
        if lim1 <= 0:
            raise NoPowerLawFit("accelerated ratio is not positive")
        phi = lim1 ** (mpf(1) / m)
        phi2 = lim2 ** (mpf(1) / m)
        # alpha: v_n = n (a_{n+m} - phi^m a_n) / (phi^m a_n m)
        pm = phi**m
        v = [None] * len(a)
        for n in range(len(a) - m):
            if a[n] != 0 and a[n + m] != 0:
                v[n] = n * (mpf(a[n + m]) - pm * a[n]) / (pm * a[n] * m)
        k1 = n1 - m
        k2 = n2 - m
        al1 = richardson(v, k1, order, step=m)
        al2 = richardson(v, k2, order, step=m)
    return AsymptoticEstimate(
        phi=phi,
        alpha=al1,
        period=m,
        accuracy=abs(phi - phi2),
        windows=(n1, n2),
        order=order,
        alpha_accuracy=abs(al1 - al2),
        flags=flags,
    )


# -- constant recognition ----------------------------------------------------------


def _primitive(coeffs: Sequence[int]) -> tuple[int, ...]:
    g = 0
    for c in coeffs:
        g = math.gcd(g, int(c))
    coeffs = [int(c) // g for c in coeffs] if g else list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if coeffs[-1] < 0:
        coeffs = [-c for c in coeffs]
    return tuple(coeffs)


def _nearest_root(coeffs: Sequence[int], x: mpf) -> mpf:
    roots = mpmath.polyroots(list(reversed([mpf(c) for c in coeffs])), maxsteps=200, extraprec=60)
    real = [mpmath.re(r) for r in roots if abs(mpmath.im(r)) < mpf(10) ** (-mp.dps // 2)]
    if not real:
        return mpf("nan")
    best = min(real, key=lambda r: abs(r - x))
    # polish with Newton on the exact polynomial
    f = lambda t: mpmath.polyval(list(reversed([mpf(c) for c in coeffs])), t)
    try:
        return mpmath.findroot(f, best)
    except (ValueError, ZeroDivisionError):
        return best


def _relation_lll(vec: Sequence[mpf], scale: int) -> list[int] | None:
    from sympy import Matrix, ZZ
    from sympy.polys.matrices import DomainMatrix

    d = len(vec)
    rows = []
    for i, v in enumerate(vec):
        row = [0] * d + [int(mpmath.nint(v * scale))]
        row[i] = 1
        rows.append(row)
    red = DomainMatrix.from_Matrix(Matrix(rows)).convert_to(ZZ).lll()
    best = min(red.to_Matrix().tolist(), key=lambda r: sum(x * x for x in r[:d]))
    rel = [int(x) for x in best[:d]]
    return rel if any(rel) else None


def recognize_constant(
    x,
    digits: int = 15,
    d_max: int = 4,
    H: int = 1000,
    method: str = "pslq",
    tolerance=None,
) -> MinPolyCandidate | None:
    """Lowest-degree integer polynomial of height <= H with a real root near x.

    ``digits`` is the working precision; the root must agree with x to within
    ``tolerance`` (default 10^(2 - digits)), which should reflect how many
    digits of x are actually trustworthy.
    """
    if digits < 15:
        raise ValueError("need at least 15 digits")
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    tol = mpf(tolerance) if tolerance is not None else mpf(10) ** (2 - digits)
    with mp.workdps(digits + 20):
        xv = mpf(x)
        for d in range(1, d_max + 1):
            powers = [xv**k for k in range(d + 1)]
            if method == "pslq":
                with mp.workdps(digits):
                    rel = mpmath.pslq(powers, tol=max(tol * 10, mpf(10) ** (4 - digits)), maxcoeff=H, maxsteps=10**5)
            elif method == "lll":
                scale = int(min(mpf(10) ** (digits - 2), 1 / (tol * 10)))
                rel = _relation_lll(powers, scale)
            else:
                raise ValueError(f"unknown method {method!r}")
            if rel is None or not any(rel[1:]):
                continue
            coeffs = _primitive(rel)
            if len(coeffs) - 1 < 1 or max(abs(c) for c in coeffs) > H:
                continue
            root = _nearest_root(coeffs, xv)
            if root != root or abs(root - xv) > tol:
                continue
            residual = abs(mpmath.polyval(list(reversed([mpf(c) for c in coeffs])), xv))
            return MinPolyCandidate(coeffs, root, residual, H)
    return None


# -- reporting -----------------------------------------------------------------------

CSV_FIELDS = ("model", "target", "m", "phi_estimate", "phi_minpoly", "alpha_estimate", "accuracy", "window", "flags")


def estimate_row(model: str, target: str, est: AsymptoticEstimate, minpoly: MinPolyCandidate | None) -> dict:
    return {
        "model": model,
        "target": target,
        "m": est.period,
        "phi_estimate": mpmath.nstr(est.phi, 20),
        "phi_minpoly": str(minpoly) if minpoly else "",
        "alpha_estimate": mpmath.nstr(est.alpha, 12),
        "accuracy": mpmath.nstr(est.accuracy, 3),
        "window": f"{est.windows[1]}-{est.windows[0]}",
        "flags": ";".join(est.flags),
    }


def estimates_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def compare_closed_forms(estimate, printed=None, claimed=None) -> list[tuple[str, str, str]]:
    """Table of (label, value, |value - estimate|) for candidate closed forms.

    ``printed`` is an externally published numeric estimate and ``claimed`` a
    mapping of label -> value for published closed forms; both are shown next
    to whatever the recogniser found, without choosing between them.
    """
    x = mpf(estimate)
    rows = [("estimate", mpmath.nstr(x, 20), "0")]
    if printed is not None:
        rows.append(("published estimate", mpmath.nstr(mpf(printed), 20), mpmath.nstr(abs(mpf(printed) - x), 3)))
    for label, val in (claimed or {}).items():
        rows.append((label, mpmath.nstr(mpf(val), 20), mpmath.nstr(abs(mpf(val) - x), 3)))
    return rows
