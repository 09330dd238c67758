"""Polynomials, rational maps and Moebius transformations on the Riemann sphere.

Coefficient arrays are 1-D complex numpy arrays in ascending powers.  The
point at infinity is handled exclusively through the reciprocal chart
w = 1/z (conjugation by the inversion Moebius map), never through
large-magnitude surrogates, so fixed points and poles at infinity are exact.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegreeCapExceeded, NotOdd, RootFindingFailed

# Relative magnitude below which a trailing coefficient is treated as a
# genuine degree drop rather than rounding noise.
COEFF_DROP_TOL = 1e-12

# Two roots of numerator and denominator closer than this trigger
# common-factor deflation.
COPRIMALITY_TOL = 1e-8

DEGREE_CAP = 4096


# ---------------------------------------------------------------------------
# points on the sphere


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere: a finite complex value or infinity."""

    re: float = 0.0
    im: float = 0.0
    infinite: bool = False

    @staticmethod
    def finite(z) -> "SpherePoint":
        z = complex(z)
        return SpherePoint(z.real, z.imag, False)

    @staticmethod
    def infinity() -> "SpherePoint":
        return SpherePoint(0.0, 0.0, True)

    @staticmethod
    def of(value) -> "SpherePoint":
        if isinstance(value, SpherePoint):
            return value
        if value is None:
            return SpherePoint.infinity()
        z = complex(value)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return SpherePoint.infinity()
        return SpherePoint.finite(z)

    @property
    def value(self) -> complex:
        if self.infinite:
            raise ValueError("point at infinity has no finite value")
        return complex(self.re, self.im)

    def sort_key(self):
        if self.infinite:
            return (math.inf, 0.0)
        return (self.re, self.im)

    def __repr__(self):
        if self.infinite:
            return "SpherePoint(inf)"
        return f"SpherePoint({complex(self.re, self.im)})"


INF = SpherePoint.infinity()


def chordal_distance(p, q) -> float:
    """Chordal metric on the sphere; both arguments SpherePoint or complex/None."""
    p = SpherePoint.of(p)
    q = SpherePoint.of(q)
    if p.infinite and q.infinite:
        return 0.0
    if p.infinite or q.infinite:
        z = q.value if p.infinite else p.value
        return 2.0 / math.sqrt(1.0 + abs(z) ** 2)
    a, b = p.value, q.value
    return 2.0 * abs(a - b) / math.sqrt((1.0 + abs(a) ** 2) * (1.0 + abs(b) ** 2))


# ---------------------------------------------------------------------------
# polynomials


class Poly:
    """Dense complex polynomial, ascending coefficients, trailing noise trimmed."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        scale = np.max(np.abs(c))
        if scale == 0.0:
            c = np.zeros(1, dtype=complex)
        else:
            keep = np.nonzero(np.abs(c) > COEFF_DROP_TOL * scale)[0]
            c = c[: keep[-1] + 1] if keep.size else np.zeros(1, dtype=complex)
        self.coeffs = c

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, z):
        return polyval(self.coeffs, z)

    def deriv(self) -> "Poly":
        if self.degree == 0:
            return Poly([0.0])
        n = np.arange(1, len(self.coeffs))
        return Poly(self.coeffs[1:] * n)

    def __add__(self, other):
        a, b = self.coeffs, as_poly(other).coeffs
        n = max(len(a), len(b))
        out = np.zeros(n, dtype=complex)
        out[: len(a)] += a
        out[: len(b)] += b
        return Poly(out)

    def __sub__(self, other):
        return self + (as_poly(other) * Poly([-1.0]))

    def __mul__(self, other):
        b = as_poly(other)
        if self.is_zero or b.is_zero:
            return Poly([0.0])
        return Poly(np.convolve(self.coeffs, b.coeffs))

    __rmul__ = __mul__
    __radd__ = __add__

    def shift(self, p) -> "Poly":
        """Coefficients of w -> P(p + w), by Horner in the shifted basis."""
        p = complex(p)
        base = np.array([p, 1.0], dtype=complex)
        comp = np.array([self.coeffs[-1]], dtype=complex)
        for c in self.coeffs[-2::-1]:
            comp = np.convolve(comp, base)
            comp[0] += c
        return Poly(comp)

    def monic(self) -> "Poly":
        lead = self.coeffs[-1]
        if lead == 0:
            return Poly(self.coeffs)
        return Poly(self.coeffs / lead)

    def deflate(self, root) -> "Poly":
        """Divide out (z - root), discarding the remainder."""
        c = self.coeffs
        n = len(c) - 1
        out = np.zeros(n, dtype=complex)
        acc = c[n]
        for k in range(n - 1, -1, -1):
            out[k] = acc
            acc = c[k] + acc * root
        return Poly(out)

    def __repr__(self):
        return f"Poly({np.array2string(self.coeffs, precision=6)})"


def as_poly(obj) -> Poly:
    if isinstance(obj, Poly):
        return obj
    return Poly(obj)


def polyval(coeffs, z):
    """Horner evaluation; works for scalars and numpy arrays."""
    if np.isscalar(z) or isinstance(z, complex):
        z = complex(z)
        acc = 0.0 + 0.0j
        for c in coeffs[::-1]:
            acc = acc * z + complex(c)
        return acc
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc


# ---------------------------------------------------------------------------
# Moebius transformations


@dataclass(frozen=True)
class Moebius:
    """z -> (a z + b) / (c z + d) with |ad - bc| bounded away from zero."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        scale = max(abs(self.a), abs(self.b), abs(self.c), abs(self.d), 1e-300)
        if abs(det) <= 1e-12 * scale * scale:
            raise ValueError("degenerate Moebius transformation")

    @staticmethod
    def identity() -> "Moebius":
        return Moebius(1.0, 0.0, 0.0, 1.0)

    @staticmethod
    def inversion() -> "Moebius":
        return Moebius(0.0, 1.0, 1.0, 0.0)

    def normalized(self) -> "Moebius":
        det = self.a * self.d - self.b * self.c
        s = 1.0 / cmath.sqrt(det)
        return Moebius(self.a * s, self.b * s, self.c * s, self.d * s)

    def inverse(self) -> "Moebius":
        return Moebius(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "Moebius") -> "Moebius":
        """self after other: (self . other)(z) = self(other(z))."""
        return Moebius(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __call__(self, z) -> SpherePoint:
        z = SpherePoint.of(z)
        if z.infinite:
            if self.c == 0:
                return INF
            return SpherePoint.of(self.a / self.c)
        w = z.value
        den = self.c * w + self.d
        num = self.a * w + self.b
        if den == 0:
            return INF
        return SpherePoint.of(num / den)


# ---------------------------------------------------------------------------
# rational maps


class RationalMap:
    """Reduced ratio of two polynomials acting on the Riemann sphere."""

    __slots__ = ("num", "den")

    def __init__(self, num, den, reduce=True):
        num = as_poly(num)
        den = as_poly(den)
        if den.is_zero:
            from .errors import DivisionByZeroPolynomial

            raise DivisionByZeroPolynomial("denominator is identically zero")
        if reduce:
            num, den = _reduce_pair(num, den)
        num, den = _normalize_pair(num, den)
        self.num = num
        self.den = den

    @property
    def degree(self) -> int:
        return max(self.num.degree, self.den.degree)

    @property
    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __call__(self, z) -> SpherePoint:
        z = SpherePoint.of(z)
        if z.infinite:
            g = self.reciprocal_chart()
            img = _eval_finite(g.num, g.den, 0.0 + 0.0j)
            return _invert_point(img)
        return _eval_finite(self.num, self.den, z.value)

    def reciprocal_chart(self) -> "RationalMap":
        """Conjugate by z -> 1/z (so infinity becomes the origin)."""
        d = self.degree
        n = _pad(self.num.coeffs, d + 1)[::-1]
        m = _pad(self.den.coeffs, d + 1)[::-1]
        return RationalMap(m, n, reduce=True)

    def compose_inversion(self) -> "RationalMap":
        """The map f(1/w) as a rational map of w."""
        d = self.degree
        n = _pad(self.num.coeffs, d + 1)[::-1]
        m = _pad(self.den.coeffs, d + 1)[::-1]
        return RationalMap(n, m, reduce=True)

    def postcompose_inversion(self) -> "RationalMap":
        """The map 1/f(z)."""
        return RationalMap(self.den, self.num, reduce=False)

    def derivative_at(self, z: complex) -> complex:
        """f'(z) by the quotient rule, without building the derivative map."""
        n, dn = self.num, self.den
        nv = n(z)
        dv = dn(z)
        npv = n.deriv()(z)
        dpv = dn.deriv()(z)
        if dv == 0:
            return complex(math.inf, 0.0)
        return (npv * dv - nv * dpv) / (dv * dv)

    def __repr__(self):
        return f"RationalMap(num={self.num!r}, den={self.den!r})"


def _pad(c, n):
    out = np.zeros(n, dtype=complex)
    out[: len(c)] = c
    return out


def _eval_finite(num: Poly, den: Poly, z: complex) -> SpherePoint:
    nv = num(z)
    dv = den(z)
    if dv == 0:
        return INF
    w = nv / dv
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        return INF
    return SpherePoint.of(w)


def _invert_point(p: SpherePoint) -> SpherePoint:
    if p.infinite:
        return SpherePoint.finite(0.0)
    v = p.value
    if v == 0:
        return INF
    return SpherePoint.of(1.0 / v)


def _normalize_pair(num: Poly, den: Poly):
    """Scale so the denominator (or numerator) is monic; deterministic repr."""
    lead = den.coeffs[-1]
    if abs(lead) > 0:
        return Poly(num.coeffs / lead), Poly(den.coeffs / lead)
    lead = num.coeffs[-1]
    return Poly(num.coeffs / lead), Poly(den.coeffs / lead)


def _reduce_pair(num: Poly, den: Poly):
    """Deflate common roots (closer than the coprimality tolerance)."""
    if num.is_zero or num.degree == 0 or den.degree == 0:
        return num, den
    from .roots import all_roots

    try:
        rn = all_roots(num, 1e-12).roots
        rd = all_roots(den, 1e-12).roots
    except RootFindingFailed:
        return num, den
    used = np.zeros(len(rd), dtype=bool)
    scale = max(1.0, float(np.max(np.abs(rn))) if len(rn) else 1.0)
    for r in rn:
        if den.degree == 0 or num.degree == 0:
            break
        dist = np.abs(rd - r)
        dist[used] = np.inf
        j = int(np.argmin(dist)) if len(dist) else -1
        if j >= 0 and dist[j] < COPRIMALITY_TOL * scale:
            shared = 0.5 * (r + rd[j])
            used[j] = True
            num = num.deflate(shared)
            den = den.deflate(shared)
    return num, den


# ---------------------------------------------------------------------------
# map-level operations


def eval_map(f: RationalMap, z) -> SpherePoint:
    """Evaluate f at a sphere point (total for degree >= 1)."""
    return f(z)


def derivative(f: RationalMap) -> RationalMap:
    """Quotient-rule derivative, reduced to coprime form."""
    n, d = f.num, f.den
    w = n.deriv() * d - n * d.deriv()
    if w.is_zero:
        return RationalMap([0.0], [1.0], reduce=False)
    return RationalMap(w, d * d)


def compose(f: RationalMap, g: RationalMap, cap: int = DEGREE_CAP) -> RationalMap:
    """f(g(z)) as a reduced rational map; guards the degree cap."""
    if f.degree * max(g.degree, 1) > cap:
        raise DegreeCapExceeded(
            f"composition degree {f.degree * g.degree} exceeds cap {cap}"
        )
    df = f.degree
    ngc = g.num.coeffs
    dgc = g.den.coeffs
    # powers of numerator and denominator of g
    npow = [np.array([1.0 + 0.0j])]
    dpow = [np.array([1.0 + 0.0j])]
    for _ in range(df):
        npow.append(np.convolve(npow[-1], ngc))
        dpow.append(np.convolve(dpow[-1], dgc))
    fn = _pad(f.num.coeffs, df + 1)
    fd = _pad(f.den.coeffs, df + 1)
    deg_total = df * max(g.degree, 0)
    out_n = np.zeros(deg_total + 1, dtype=complex)
    out_d = np.zeros(deg_total + 1, dtype=complex)
    for i in range(df + 1):
        term = np.convolve(npow[i], dpow[df - i])
        out_n[: len(term)] += fn[i] * term
        out_d[: len(term)] += fd[i] * term
    return RationalMap(out_n, out_d)


def conjugate(f: RationalMap, m: Moebius) -> RationalMap:
    """m . f . m^{-1}; same degree, coprime."""
    mi = m.inverse()
    d = f.degree
    # f(m^{-1}(w)) via homogeneous substitution z = (a w + b)/(c w + d)
    lin_n = np.array([mi.b, mi.a], dtype=complex)
    lin_d = np.array([mi.d, mi.c], dtype=complex)
    npow = [np.array([1.0 + 0.0j])]
    dpow = [np.array([1.0 + 0.0j])]
    for _ in range(d):
        npow.append(np.convolve(npow[-1], lin_n))
        dpow.append(np.convolve(dpow[-1], lin_d))
    fn = _pad(f.num.coeffs, d + 1)
    fd = _pad(f.den.coeffs, d + 1)
    mid_n = np.zeros(d + 1, dtype=complex)
    mid_d = np.zeros(d + 1, dtype=complex)
    for i in range(d + 1):
        term = np.convolve(npow[i], dpow[d - i])
        mid_n[: len(term)] += fn[i] * term
        mid_d[: len(term)] += fd[i] * term
    out_n = m.a * mid_n + m.b * mid_d
    out_d = m.c * mid_n + m.d * mid_d
    return RationalMap(out_n, out_d)


def critical_points(f: RationalMap):
    """The 2d-2 critical points with multiplicity, infinity included when the
    Wronskian degree drops below 2d-2."""
    from .roots import all_roots

    d = f.degree
    if d < 2:
        raise ValueError("critical points require degree >= 2")
    w = f.num.deriv() * f.den - f.num * f.den.deriv()
    expected = 2 * d - 2
    pts = []
    if not w.is_zero and w.degree >= 1:
        rs = all_roots(w, 1e-12)
        scale = max(1.0, float(np.max(np.abs(w.coeffs))))
        for r, mult in zip(rs.roots, rs.multiplicities):
            if abs(w(r)) > 1e-9 * scale * max(1.0, abs(r)) ** w.degree:
                raise RootFindingFailed("critical point residual too large")
            pts.extend([SpherePoint.of(r)] * mult)
    finite_mult = w.degree if not w.is_zero else 0
    pts.extend([INF] * (expected - finite_mult))
    pts.sort(key=lambda p: p.sort_key())
    return pts


def even_part_lift(b: RationalMap) -> RationalMap:
    """For odd B, the map f with f(w^2) = B(w)^2 via coefficient rearrangement."""
    n, d = b.num, b.den
    scale = max(float(np.max(np.abs(n.coeffs))), float(np.max(np.abs(d.coeffs))))

    def parity(p: Poly):
        ev = float(np.sum(np.abs(p.coeffs[0::2])))
        od = float(np.sum(np.abs(p.coeffs[1::2])))
        if ev <= 1e-9 * scale:
            return -1
        if od <= 1e-9 * scale:
            return 1
        return 0

    pn, pd = parity(n), parity(d)
    if pn * pd != -1:
        raise NotOdd("map is not odd: B(-w) != -B(w)")
    n2 = n * n
    d2 = d * d
    for p2 in (n2, d2):
        odd_mass = float(np.sum(np.abs(p2.coeffs[1::2])))
        if odd_mass > 1e-9 * scale * scale:
            raise NotOdd("square of the map is not even")
    return RationalMap(n2.coeffs[0::2], d2.coeffs[0::2])
