"""Univariate real polynomials with exact derivatives and robust root isolation."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateDerivative

ROOT_TOL = 1e-12


def _strip(coeffs) -> tuple[float, ...]:
    cs = [float(c) for c in coeffs]
    while cs and cs[-1] == 0.0:
        cs.pop()
    return tuple(cs)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial stored as coefficients in ascending degree order.

    The zero polynomial is the empty coefficient tuple; otherwise the trailing
    coefficient is nonzero.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs=()):
        object.__setattr__(self, "coeffs", _strip(coeffs))

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        """Degree of the polynomial; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def __call__(self, x):
        """Horner evaluation; works on scalars and numpy arrays."""
        acc = x * 0.0  # inherits the input's shape
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self) -> "Polynomial":
        """Exact coefficient differentiation."""
        return Polynomial([k * c for k, c in enumerate(self.coeffs)][1:])

    def antiderivative(self) -> "Polynomial":
        """Antiderivative with zero constant term."""
        return Polynomial([0.0] + [c / (k + 1) for k, c in enumerate(self.coeffs)])

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0.0] * (n - len(other.coeffs))
        return Polynomial([x + y for x, y in zip(a, b)])

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if self.is_zero or other.is_zero:
            return Polynomial()
        out = [0.0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial([c * a for a in self.coeffs])

    def shift_linear(self, slope: float) -> "Polynomial":
        """Return self + slope * x."""
        cs = list(self.coeffs)
        while len(cs) < 2:
            cs.append(0.0)
        cs[1] += slope
        return Polynomial(cs)

    def is_coercive(self) -> bool:
        """Even degree >= 2 with positive leading coefficient."""
        return self.degree >= 2 and self.degree % 2 == 0 and self.coeffs[-1] > 0

    def cauchy_bound(self) -> float:
        """All real roots lie in [-B, B] with B = 1 + max |c_k / c_lead|."""
        lead = self.coeffs[-1]
        return 1.0 + max((abs(c / lead) for c in self.coeffs[:-1]), default=0.0)


def eval_component(p: Polynomial, x):
    """Evaluate a component polynomial at x (Horner)."""
    return p(x)


def derivative(p: Polynomial) -> Polynomial:
    return p.derivative()


def _bisect(p: Polynomial, lo: float, hi: float, s_lo: float) -> float:
    # p has opposite signs at lo and hi; p is monotone on [lo, hi].
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        v = p(mid)
        if v == 0.0:
            return mid
        if (v > 0.0) == (s_lo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) + 0.0  # +0.0 normalizes -0.0


def _eval_scale(p: Polynomial, x: float) -> float:
    # magnitude of the terms entering the Horner sum; calibrates "zero"
    return max(1.0, sum(abs(c) * abs(x) ** k for k, c in enumerate(p.coeffs)))


def real_roots(p: Polynomial, root_tol: float = ROOT_TOL) -> list[float]:
    """All real roots of p, ascending, multiple roots reported once.

    Between consecutive critical points of p the polynomial is monotone, so a
    sign change brackets exactly one root, refined by bisection.  Breakpoints
    where |p| falls below root_tol (relative to the evaluation magnitude) are
    sign-touching roots and are reported once; the snap keeps double roots from
    being either missed or double counted.
    """
    if p.is_zero:
        raise DegenerateDerivative("zero polynomial has no isolated roots")
    if p.degree == 0:
        return []
    if p.degree == 1:
        return [-p.coeffs[0] / p.coeffs[1]]

    bound = p.cauchy_bound()
    inner = [r for r in real_roots(p.derivative(), root_tol) if -bound < r < bound]
    nodes = [-bound] + sorted(inner) + [bound]

    signs = []
    for x in nodes:
        v = p(x)
        if abs(v) <= root_tol * _eval_scale(p, x):
            signs.append(0)
        else:
            signs.append(1 if v > 0 else -1)

    roots = [x for x, s in zip(nodes, signs) if s == 0]
    # strict sign changes between consecutive non-snapped nodes
    idx = [k for k, s in enumerate(signs) if s != 0]
    for a, b in zip(idx[:-1], idx[1:]):
        if signs[a] * signs[b] < 0:
            roots.append(_bisect(p, nodes[a], nodes[b], p(nodes[a])))

    roots.sort()
    # collapse numerically coincident reports (touch root next to its bracket)
    out: list[float] = []
    sep = 1e-9 * max(1.0, bound)
    for r in roots:
        if not out or r - out[-1] > sep:
            out.append(r)
    return out


def critical_points(p: Polynomial, root_tol: float = ROOT_TOL) -> list[float]:
    """Sorted real roots of p', i.e. the critical points of p."""
    if p.is_zero:
        raise DegenerateDerivative("zero polynomial")
    dp = p.derivative()
    if dp.is_zero:
        raise DegenerateDerivative("constant polynomial has no critical points")
    return real_roots(dp, root_tol)


def extreme_abs_on_interval(p: Polynomial, lo: float, hi: float) -> float:
    """max over [lo, hi] of |p|, evaluated at interval endpoints and p's extrema."""
    xs = [lo, hi]
    dp = p.derivative()
    if not dp.is_zero and dp.degree >= 1:
        xs += [r for r in real_roots(dp) if lo < r < hi]
    return max(abs(p(x)) for x in xs)


def horner_path(coeffs: tuple[float, ...], x: float) -> float:
    """Standalone Horner kernel used in tight loops."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def to_math_string(p: Polynomial) -> str:
    """Human-readable rendering, mostly for logs and error messages."""
    if p.is_zero:
        return "0"
    parts = []
    for k, c in enumerate(p.coeffs):
        if c == 0.0:
            continue
        if k == 0:
            parts.append(f"{c:g}")
        elif k == 1:
            parts.append(f"{c:g}*x")
        else:
            parts.append(f"{c:g}*x^{k}")
    return " + ".join(parts).replace("+ -", "- ")
