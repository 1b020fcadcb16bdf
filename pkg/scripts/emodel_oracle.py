#!/usr/bin/env python3
"""Independent high-precision oracle for the E-model arithmetic.

Evaluates the delay-impairment curve and the R-to-MOS cubic with mpmath
(50 decimal digits) and exact rationals, with no imports from the package
under test.  The printed values are frozen into the test suite as expected
constants; rerun this script if the tables there ever need regeneration.
"""

from fractions import Fraction

import mpmath

mpmath.mp.dps = 50


def delay_impairment(ta_ms) -> mpmath.mpf:
    """Impairment caused by a one-way delay of ``ta_ms`` milliseconds."""
    ta = mpmath.mpf(ta_ms)
    if ta <= 100:
        return mpmath.mpf(0)
    x = mpmath.log(ta / 100) / mpmath.log(2)
    sixth = mpmath.mpf(1) / 6
    return 25 * ((1 + x**6) ** sixth - 3 * (1 + (x / 3) ** 6) ** sixth + 2)


def rating_to_mos(r) -> Fraction:
    """Map a transmission rating to MOS using exact rational arithmetic."""
    r = Fraction(r)
    if r <= 0:
        return Fraction(1)
    if r >= 100:
        return Fraction(9, 2)
    cubic = 1 + Fraction(35, 1000) * r + r * (r - 60) * (100 - r) * Fraction(7, 10**6)
    # The raw cubic dips slightly below 1 for small positive ratings; the
    # published scale bottoms out at 1.
    return max(cubic, Fraction(1))


def _mos_mp(r) -> mpmath.mpf:
    if r <= 0:
        return mpmath.mpf(1)
    if r >= 100:
        return mpmath.mpf("4.5")
    cubic = 1 + mpmath.mpf("0.035") * r + r * (r - 60) * (100 - r) * mpmath.mpf("7e-6")
    return max(cubic, mpmath.mpf(1))


def main() -> None:
    print("delay impairment curve:")
    for ta in (0, 50, 100, 101, 125, 200, 250, 500, 1000, 1500, 2000, 3000):
        print(f"  idd({ta:>5}) = {mpmath.nstr(delay_impairment(ta), 12)}")

    print("rating to MOS (exact rational, then float):")
    for r in (Fraction(0), Fraction(25), Fraction(50), Fraction(60), Fraction(70),
              Fraction(80), Fraction(90), Fraction(932, 10), Fraction(100)):
        mos = rating_to_mos(r)
        print(f"  mos({float(r):>6.1f}) = {float(mos):.12f}")

    print("end-to-end: MOS at a given one-way delay (defaults, no loss):")
    for d in (0, 25, 100, 500, 1000, 1425, 1925, 2000):
        print(f"  mos_at_delay({d:>5}) = {mpmath.nstr(_mos_mp(mpmath.mpf('93.2') - delay_impairment(d)), 12)}")


if __name__ == "__main__":
    main()
