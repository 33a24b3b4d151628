"""Separable objectives, their critical points, Lipschitz constants and the
two-map linear splitting used throughout the examples."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .errors import (
    AssumptionA5Violated,
    ConfigError,
    DegenerateDerivative,
    EmptyCriticalSet,
    NonCoercive,
)
from .poly import ROOT_TOL, Polynomial, critical_points, extreme_abs_on_interval

A5_TOL = 1e-9


@dataclass(frozen=True)
class CriticalPointReport:
    """Critical points of every component, organized per dimension.

    roots[j][i] is the sorted root list of the derivative of component (j, i)
    (empty for zero components); per dimension, combined[j] is their union and
    span[j] = (min, max) of the union.
    """

    roots: tuple[tuple[tuple[float, ...], ...], ...]
    combined: tuple[tuple[float, ...], ...]
    span: tuple[tuple[float, float], ...]
    root_tol: float = ROOT_TOL


@dataclass(frozen=True)
class StepConfig:
    """Step size together with the admissibility bound eta < 1/K."""

    eta: float
    lipschitz_K: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.lipschitz_K <= 0:
            raise ValueError("Lipschitz constant must be positive")
        if self.eta >= self.eta_max:
            raise ValueError(
                f"eta={self.eta} is not below the admissible bound 1/K={self.eta_max}"
            )

    @property
    def eta_max(self) -> float:
        return 1.0 / self.lipschitz_K


@dataclass(frozen=True)
class SeparableObjective:
    """A family of separable summands; entry components[j][i] is the univariate
    polynomial of summand i in coordinate j (possibly the zero polynomial).

    Construction validates structure and coercivity.  The stronger
    inconsistent-optimization assumption is enforced lazily through
    check_inconsistent_optimization(), which the decomposition and dynamics
    entry points call; the diffusion surrogate deliberately does not need it.
    """

    components: tuple[tuple[Polynomial, ...], ...]
    root_tol: float = field(default=ROOT_TOL, compare=False)

    def __post_init__(self):
        comps = tuple(tuple(row) for row in self.components)
        object.__setattr__(self, "components", comps)
        if not comps or not comps[0]:
            raise ValueError("objective needs at least one dimension and one summand")
        n = len(comps[0])
        if any(len(row) != n for row in comps):
            raise ValueError("ragged component table")
        for j, row in enumerate(comps):
            if all(p.is_zero for p in row):
                raise EmptyCriticalSet(f"dimension {j} has no nonzero component")
            for p in row:
                if not p.is_zero and not p.is_coercive():
                    raise NonCoercive(
                        f"component in dimension {j} is not coercive: {p.coeffs}"
                    )
        for i in range(n):
            if all(comps[j][i].is_zero for j in range(len(comps))):
                raise ValueError(f"summand {i} is identically zero")

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return len(self.components[0])

    @cached_property
    def critical_report(self) -> CriticalPointReport:
        roots = []
        combined = []
        span = []
        for j, row in enumerate(self.components):
            per_comp = []
            for p in row:
                if p.is_zero:
                    per_comp.append(())
                    continue
                try:
                    per_comp.append(tuple(critical_points(p, self.root_tol)))
                except DegenerateDerivative as exc:
                    raise NonCoercive(f"component in dimension {j}: {exc}") from exc
            flat = sorted(r for rs in per_comp for r in rs)
            if not flat:
                raise EmptyCriticalSet(f"dimension {j} has no critical points")
            roots.append(tuple(per_comp))
            combined.append(tuple(flat))
            span.append((flat[0], flat[-1]))
        return CriticalPointReport(tuple(roots), tuple(combined), tuple(span), self.root_tol)

    def check_inconsistent_optimization(self) -> None:
        """Enforce the inconsistent-optimization assumption per dimension: at
        least two nonzero components, and no two distinct components sharing a
        derivative root within tolerance (numerical coincidences are rejected
        conservatively rather than guessed about)."""
        report = self.critical_report
        for j, row in enumerate(self.components):
            nonzero = sum(1 for p in row if not p.is_zero)
            if nonzero < 2:
                raise AssumptionA5Violated(
                    f"dimension {j} has fewer than two nonzero components"
                )
            per = report.roots[j]
            for i1 in range(len(row)):
                for i2 in range(i1 + 1, len(row)):
                    for r1 in per[i1]:
                        for r2 in per[i2]:
                            if abs(r1 - r2) <= A5_TOL:
                                raise AssumptionA5Violated(
                                    f"components {i1} and {i2} in dimension {j} "
                                    f"share a critical point near {r1!r}"
                                )

    def mean(self) -> tuple[Polynomial, ...]:
        """Per-dimension summand of the averaged objective F."""
        out = []
        for row in self.components:
            acc = Polynomial()
            for p in row:
                acc = acc + p
            out.append(acc.scale(1.0 / self.n))
        return tuple(out)


def lipschitz_constant(obj: SeparableObjective, intervals=None) -> float:
    """K = max over components of max |f''| on the per-dimension state interval.

    The maximum of a polynomial's |second derivative| over a closed interval is
    attained at an endpoint or at a root of the third derivative, so it is
    evaluated exactly.
    """
    if intervals is None:
        intervals = obj.critical_report.span
    best = 0.0
    for j, row in enumerate(obj.components):
        lo, hi = intervals[j]
        for p in row:
            if p.is_zero:
                continue
            best = max(best, extreme_abs_on_interval(p.derivative().derivative(), lo, hi))
    return best


def eta_bound(obj: SeparableObjective) -> float:
    """Largest admissible step size 1/K on the state space."""
    return 1.0 / lipschitz_constant(obj)


def step_config(obj: SeparableObjective, eta: float) -> StepConfig:
    return StepConfig(eta=eta, lipschitz_K=lipschitz_constant(obj))


def lambda_split(f_poly: Polynomial, lam: float) -> SeparableObjective:
    """Split a coercive univariate F into the pair F + lam*x, F - lam*x.

    The mean of the two components recovers F exactly; the SGD update becomes
    gradient descent on F plus a +-lam*eta random walk.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not f_poly.is_coercive():
        raise NonCoercive(f"objective is not coercive: {f_poly.coeffs}")
    f1 = f_poly.shift_linear(lam)
    f2 = f_poly.shift_linear(-lam)
    return SeparableObjective(components=((f1, f2),))


def double_well(lam: float) -> SeparableObjective:
    """The quartic double-well benchmark split with parameter lam."""
    return lambda_split(double_well_potential(), lam)


def double_well_potential() -> Polynomial:
    """F(x) = (1 - x^2)^2 / 4."""
    return Polynomial([0.25, 0.0, -0.5, 0.0, 0.25])


def eighth_order_potential() -> Polynomial:
    """Even eighth-order objective with local minima at +-1.35, local maxima at
    +-1 and its global minimum at 0.

    The quartic/sextic coefficients are solved from those critical-point
    constraints with the octic coefficient fixed at 0.78; the solved values are
    exactly c4 = 2.8431 and c6 = -2.9354.
    """
    c8 = 0.78
    c6 = -(8 * c8 * (1.35**4 - 1.0)) / (6 * (1.35**2 - 1.0))
    c4 = (-6 * c6 - 8 * c8) / 4.0
    return Polynomial([0.0, 0.0, 0.0, 0.0, c4, 0.0, c6, 0.0, c8])


def eighth_order(lam: float) -> SeparableObjective:
    return lambda_split(eighth_order_potential(), lam)


def bernoulli_pair() -> SeparableObjective:
    """f1 = (x-1)^2, f2 = (x+1)^2: the Bernoulli-convolution model."""
    f1 = Polynomial([1.0, -2.0, 1.0])
    f2 = Polynomial([1.0, 2.0, 1.0])
    return SeparableObjective(components=((f1, f2),))


def crossed_quadratics_2d() -> SeparableObjective:
    """f1 = x1^2 + (x2-1)^2, f2 = (x1-1)^2 + x2^2 on the unit square."""
    sq = Polynomial([0.0, 0.0, 1.0])
    sq_m1 = Polynomial([1.0, -2.0, 1.0])
    return SeparableObjective(components=((sq, sq_m1), (sq_m1, sq)))


def objective_from_config(cfg: dict) -> tuple[SeparableObjective, float]:
    """Build an objective and step size from the JSON-facing dict schema.

    Full form: {"dimension": d, "n": n, "components": [[[coeffs]*n]*d], "eta": h}.
    Shortcut:  {"objective": [coeffs], "lambda": lam, "eta": h} expands through
    lambda_split.
    """
    if "eta" not in cfg:
        raise ConfigError("config is missing 'eta'")
    eta = float(cfg["eta"])
    if "objective" in cfg:
        if "lambda" not in cfg:
            raise ConfigError("shortcut form needs 'lambda'")
        obj = lambda_split(Polynomial(cfg["objective"]), float(cfg["lambda"]))
        return obj, eta
    for key in ("dimension", "n", "components"):
        if key not in cfg:
            raise ConfigError(f"config is missing '{key}'")
    rows = cfg["components"]
    if len(rows) != int(cfg["dimension"]):
        raise ConfigError("components table does not match 'dimension'")
    comps = []
    for row in rows:
        if len(row) != int(cfg["n"]):
            raise ConfigError("components table does not match 'n'")
        comps.append(tuple(Polynomial(cs) for cs in row))
    return SeparableObjective(components=tuple(comps)), eta
