import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from octwalk import asymptotics as asy
from octwalk.exactify import exact_series
from octwalk.stepset import encode

S_STAR = encode([(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)])


def test_ratio_of_powers():
    u = asy.ratio_sequence([2**n for n in range(50)])
    assert all(u[n] == 2 for n in range(1, 50))
    with pytest.raises(asy.DegenerateSeries):
        asy.ratio_sequence([1] + [0] * 40)


def test_richardson_constant_and_first_order():
    with mp.workdps(40):
        assert asy.richardson([mpf(7)] * 30, 20, 5) == 7
        u = [None] + [1 + mpf(1) / n for n in range(1, 40)]
        for n in range(2, 40):
            assert abs(asy.richardson(u, n, 1) - 1) < mpf(10) ** -35
        for n in range(1, 39):
            assert abs((n + 1) * u[n + 1] - n * u[n] - 1) < mpf(10) ** -35


@settings(max_examples=40)
@given(
    st.integers(0, 7),
    st.lists(st.integers(-10**6, 10**6), min_size=8, max_size=8),
    st.integers(30, 200),
)
def test_richardson_exact_on_polynomials_in_inverse_n(j, coeffs, n):
    """Degree-<=j polynomials in 1/n are mapped to their constant term."""
    with mp.workdps(80):
        c = [mpf(x) for x in coeffs[: j + 1]]
        u = [None] + [sum(ck / mpf(k) ** i for i, ck in enumerate(c)) for k in range(1, n + 1)]
        assert abs(asy.richardson(u, n, j) - c[0]) < mpf(10) ** -40


def test_richardson_periodic_step():
    with mp.workdps(60):
        u = [None] * 4 + [3 + mpf(5) / n - mpf(2) / n**2 for n in range(4, 200)]
        # step 4: the expansion is in 1/t with t = n/4
        assert abs(asy.richardson(u, 196, 2, step=4) - 3) < mpf(10) ** -40


def test_richardson_refuses_noise():
    with mp.workdps(15):
        u = [None] + [mpf(1) + mpf(1) / n for n in range(1, 400)]
        with pytest.raises(asy.PrecisionLoss):
            asy.richardson(u, 399, 12, min_digits=10)


def test_doubling():
    with mp.workdps(50):
        u = [None] + [2 + mpf(3) / n for n in range(1, 100)]
        assert abs(asy.richardson_doubling(u, 10, 1) - 2) < mpf(10) ** -40
        v = [None] + [2 + mpf(3) / n + mpf(1) / n**2 for n in range(1, 100)]
        assert abs(asy.richardson_doubling(v, 10, 2) - 2) < mpf(10) ** -40


def test_pure_geometric():
    est = asy.estimate_growth([3**n for n in range(120)])
    assert est.period == 1
    assert abs(est.phi - 3) < mpf(10) ** -20 and abs(est.alpha) < mpf(10) ** -20


def _synthetic(n_terms=400, alpha=mpf(-3) / 2):
    with mp.workdps(200):
        return [1] + [int(mpf(2) ** n * mpf(n) ** alpha * mpf(10) ** 20) for n in range(1, n_terms)]


def test_synthetic_exponent():
    est = asy.estimate_growth(_synthetic())
    assert est.period == 1
    assert abs(est.phi - 2) < mpf(10) ** -6
    assert abs(est.alpha + 1.5) < 1e-3


def test_scaling_equivariance():
    a = _synthetic(200)
    e1 = asy.estimate_growth(a)
    e2 = asy.estimate_growth([7 * x for x in a])
    assert abs(e1.phi - e2.phi) < mpf(10) ** -25
    assert abs(e1.alpha - e2.alpha) < mpf(10) ** -20


def test_parity_dependent_constant():
    a = [(3 if n % 2 else 5) * 2**n * (n + 1) for n in range(200)]
    est = asy.estimate_growth(a)
    assert est.period == 2 and "period-2" in est.flags
    assert abs(est.phi - 2) < mpf(10) ** -10
    assert abs(est.alpha - 1) < mpf(10) ** -6


def test_s_star_excursions_period_four():
    a = exact_series(S_STAR, 280, "excursions").terms
    est = asy.estimate_growth(a)
    assert est.period == 4
    assert abs(est.phi - 4) < 1e-4
    assert est.accuracy < 1e-3


def test_too_short():
    with pytest.raises(ValueError):
        asy.estimate_growth([2**n for n in range(30)])


def test_recognize_simple_constants():
    assert asy.recognize_constant(mpf("0.5"), digits=20).coefficients == (-1, 2)
    with mp.workdps(40):
        c = asy.recognize_constant(mpmath.sqrt(2), digits=30)
    assert c.coefficients == (-2, 0, 1)
    assert abs(c.root**2 - 2) < mpf(10) ** -25
    assert str(c) == "x^2 - 2"


def test_recognize_lll_agrees():
    with mp.workdps(40):
        x = 6 * (1 + mpmath.sqrt(2))
        a = asy.recognize_constant(x, digits=30, method="lll")
        b = asy.recognize_constant(x, digits=30, method="pslq")
    assert a.coefficients == b.coefficients == (-36, -12, 1)


@settings(max_examples=25)
@given(st.integers(-30, 30), st.integers(-30, 30), st.integers(1, 5))
def test_recognize_quadratic_roots(b, c, a):
    # roots of a x^2 + b x + c when real and irrational
    disc = b * b - 4 * a * c
    if disc <= 0 or int(disc**0.5) ** 2 == disc:
        return
    with mp.workdps(60):
        x = (-b + mpmath.sqrt(disc)) / (2 * a)
        cand = asy.recognize_constant(x, digits=40, d_max=3)
    import math

    g = math.gcd(math.gcd(a, b), c)
    expected = (c // g, b // g, a // g)
    assert cand.coefficients == expected


def test_published_estimate_recognition():
    x = mpf("14.48528121823356265")
    cand = asy.recognize_constant(x, digits=20, d_max=2, tolerance=mpf(10) ** -6)
    assert cand.coefficients == (-36, -12, 1)
    # the published digits sit about 1.56e-7 below 6(1+sqrt 2), so nothing
    # of height <= 1000 matches them to 1e-9
    assert abs(cand.root - x) > mpf("1.5e-7")
    assert asy.recognize_constant(x, digits=20, d_max=2, tolerance=mpf(10) ** -9) is None


def test_csv_and_comparison():
    est = asy.estimate_growth([3**n for n in range(120)])
    row = asy.estimate_row("0000001", "all", est, asy.recognize_constant(est.phi, digits=20))
    text = asy.estimates_csv([row])
    assert text.splitlines()[0].split(",") == list(asy.CSV_FIELDS)
    assert "x - 3" in text
    rows = asy.compare_closed_forms(est.phi, printed="3.0001", claimed={"three": 3})
    assert [r[0] for r in rows] == ["estimate", "published estimate", "three"]
