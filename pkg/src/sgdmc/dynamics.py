"""Gradient-step maps as a monotone iterated function system: path dynamics,
extremal envelopes, splitting certificates, escape paths and the sampler."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .absorbing import AbsorbingInterval, Decomposition, Rectangle, decompose
from .errors import NonTermination, NotFound, OutOfStateSpace
from .objective import SeparableObjective, lipschitz_constant
from .poly import Polynomial, horner_path

Path = tuple[int, ...]  # map indices, 1-based, applied left to right

ESCAPE_STEP_CAP = 10**6


@dataclass(frozen=True)
class MapFamily:
    """The maps x :-> x - eta * grad f_i(x), one per summand, acting
    coordinatewise.  For eta below 1/K every component map is strictly
    increasing on the state space, which the envelope and certificate
    machinery relies on."""

    obj: SeparableObjective
    eta: float
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.validate:
            self.obj.check_inconsistent_optimization()
            k_lip = lipschitz_constant(self.obj)
            if not 0 < self.eta < 1.0 / k_lip:
                raise ValueError(
                    f"eta={self.eta} outside (0, 1/K) with 1/K={1.0 / k_lip}"
                )

    @property
    def n(self) -> int:
        return self.obj.n

    @property
    def dimension(self) -> int:
        return self.obj.dimension

    @cached_property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        return self.obj.critical_report.span

    @cached_property
    def phi(self) -> tuple[tuple[Polynomial, ...], ...]:
        """phi[i-1][j] is the coordinate-j polynomial of map i."""
        out = []
        for i in range(self.n):
            row = []
            for j in range(self.dimension):
                p = self.obj.components[j][i]
                if p.is_zero:
                    row.append(Polynomial([0.0, 1.0]))
                    continue
                dp = p.derivative()
                coeffs = [-self.eta * c for c in dp.coeffs]
                while len(coeffs) < 2:
                    coeffs.append(0.0)
                coeffs[1] += 1.0
                row.append(Polynomial(coeffs))
            out.append(tuple(row))
        return tuple(out)

    def map_coord(self, i: int, j: int, s: float) -> float:
        """Coordinate-j image of scalar s under map i (1-based i)."""
        return self.phi[i - 1][j](s)


def _check_in_state_space(fam: MapFamily, x: np.ndarray, tol: float = 1e-12):
    for j, (lo, hi) in enumerate(fam.intervals):
        pad = tol * max(1.0, abs(lo), abs(hi))
        if x[j] < lo - pad or x[j] > hi + pad:
            raise OutOfStateSpace(f"coordinate {j}: {x[j]!r} outside [{lo}, {hi}]")


def apply_map(fam: MapFamily, i: int, x) -> np.ndarray:
    """One SGD step with summand i from point x (componentwise)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_in_state_space(fam, x)
    return np.array([fam.map_coord(i, j, x[j]) for j in range(fam.dimension)])


def apply_path(fam: MapFamily, path, x) -> np.ndarray:
    """Compose maps along the path, first index applied first."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_in_state_space(fam, x)
    for i in path:
        x = np.array([fam.map_coord(i, j, x[j]) for j in range(fam.dimension)])
    return x


def path_coord(fam: MapFamily, path, j: int, s: float) -> float:
    """Coordinate-j image of scalar s under the path (separability shortcut)."""
    for i in path:
        s = fam.map_coord(i, j, s)
    return s


def concat(p: Path, q: Path) -> Path:
    """Path doing q first, then p."""
    return tuple(q) + tuple(p)


def extremal_envelope(fam: MapFamily, j: int, x: float, ell: int, direction: str):
    """Values m_0 = x, m_{k+1} = min_i (or max_i) phi_i^{(j)}(m_k).

    Because all component maps are increasing, the greedy recursion equals the
    exact min/max over all n^k paths applied to x, so this is the extremal
    reachable point, not a heuristic.
    """
    vals, _ = _envelope_with_path(fam, j, x, ell, direction)
    return vals


def _envelope_with_path(fam: MapFamily, j: int, x: float, ell: int, direction: str):
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    pick = min if direction == "min" else max
    vals = [float(x)]
    path: list[int] = []
    cur = float(x)
    for _ in range(ell):
        best_i, best_v = 1, fam.map_coord(1, j, cur)
        for i in range(2, fam.n + 1):
            v = fam.map_coord(i, j, cur)
            if pick(v, best_v) == v and v != best_v:
                best_i, best_v = i, v
        cur = best_v
        vals.append(cur)
        path.append(best_i)
    return vals, tuple(path)


def _envelope_until(fam: MapFamily, j: int, x: float, target: float,
                    direction: str, max_len: int):
    """Greedy envelope run until the value passes the target (or budget ends).

    Returns (reached, values, path).  In the max direction the run stops once
    the value is >= target, in the min direction once <= target."""
    pick = min if direction == "min" else max
    vals = [float(x)]
    path: list[int] = []
    cur = float(x)
    done = (cur <= target) if direction == "min" else (cur >= target)
    while not done and len(path) < max_len:
        best_i, best_v = 1, fam.map_coord(1, j, cur)
        for i in range(2, fam.n + 1):
            v = fam.map_coord(i, j, cur)
            if pick(v, best_v) == v and v != best_v:
                best_i, best_v = i, v
        cur = best_v
        vals.append(cur)
        path.append(best_i)
        done = (cur <= target) if direction == "min" else (cur >= target)
    return done, vals, tuple(path)


@dataclass(frozen=True)
class SplittingCertificate:
    """Two equal-length paths driving a rectangle to opposite sides of a split
    point in the orthant order given by alpha (alpha[0] = +1)."""

    path_lo: Path
    path_hi: Path
    split_point: tuple[float, ...]
    alpha: tuple[int, ...]
    ell: int

    def __post_init__(self):
        if len(self.path_lo) != self.ell or len(self.path_hi) != self.ell:
            raise ValueError("certificate paths must both have length ell")
        if self.path_lo == self.path_hi:
            raise ValueError("certificate paths must be distinct")
        if self.alpha[0] != +1:
            raise ValueError("alpha is normalized to alpha[0] = +1")

    def contraction_factor(self, n: int) -> float:
        """Guaranteed geometric factor per ell steps."""
        return 1.0 - 1.0 / n**self.ell

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "ell": self.ell,
            "path_lo": list(self.path_lo),
            "path_hi": list(self.path_hi),
            "x0": list(self.split_point),
        }


def _alpha_corners(box, alpha):
    """(alpha-max corner, alpha-min corner) of the box."""
    hi = tuple(b[1] if a == +1 else b[0] for b, a in zip(box, alpha))
    lo = tuple(b[0] if a == +1 else b[1] for b, a in zip(box, alpha))
    return hi, lo


def verify_certificate(fam: MapFamily, box, cert: SplittingCertificate,
                       tol: float = 1e-9) -> bool:
    """Re-check the splitting inequalities at the alpha-extreme corners."""
    corner_hi, corner_lo = _alpha_corners(box, cert.alpha)
    img_lo = apply_path(fam, cert.path_lo, corner_hi)
    img_hi = apply_path(fam, cert.path_hi, corner_lo)
    for j, a in enumerate(cert.alpha):
        x0 = cert.split_point[j]
        if a == +1:
            ok = img_lo[j] <= x0 + tol and img_hi[j] >= x0 - tol
        else:
            ok = img_lo[j] >= x0 - tol and img_hi[j] <= x0 + tol
        if not ok:
            return False
    return True


def splitting_length_1d(fam: MapFamily, t: AbsorbingInterval, ell_max: int = 64) -> SplittingCertificate:
    """Smallest greedy path length at which the downward envelope from r meets
    the upward envelope from l; the two greedy index sequences are the
    certificate paths and the split point is the midpoint of the crossing."""
    j = t.dimension_index
    lo_vals, lo_path = _envelope_with_path(fam, j, t.r, ell_max, "min")
    hi_vals, hi_path = _envelope_with_path(fam, j, t.l, ell_max, "max")
    for ell in range(1, ell_max + 1):
        if lo_vals[ell] <= hi_vals[ell]:
            path_lo = lo_path[:ell]
            path_hi = hi_path[:ell]
            hi_end = hi_vals[ell]
            if path_lo == path_hi:
                swapped = _perturb_last(fam, j, path_hi, hi_vals[ell - 1], lo_vals[ell])
                if swapped is None:
                    raise NotFound(ell_max, {(+1,): 0.0})
                path_hi, hi_end = swapped
            x0 = 0.5 * (lo_vals[ell] + hi_end)
            return SplittingCertificate(
                path_lo=path_lo, path_hi=path_hi,
                split_point=(x0,), alpha=(+1,), ell=ell,
            )
    raise NotFound(ell_max, {(+1,): lo_vals[ell_max] - hi_vals[ell_max]})


def _perturb_last(fam: MapFamily, j: int, path: Path, prev_hi: float, lo_end: float):
    """Swap the final index of the upper path for an admissible alternative
    (one that still ends at or above the lower envelope); collapsed greedy
    sequences are the only case that needs this."""
    for i in range(1, fam.n + 1):
        if i == path[-1]:
            continue
        v = fam.map_coord(i, j, prev_hi)
        if v >= lo_end:
            return path[:-1] + (i,), v
    return None


def splitting_certificate_multi(fam: MapFamily, rect: Rectangle, ell_max: int = 64,
                                alphas=None) -> SplittingCertificate:
    """Search the orthant sign vectors (first sign fixed to +1) for a pair of
    paths splitting the rectangle.

    For each alpha, candidate paths grow dimension by dimension.  Dimension 0
    runs the one-dimensional envelope search.  Each later dimension c checks
    the split of coordinate c in the alpha_c order; while it fails, both paths
    are prefixed with greedy runs that pin coordinate c near opposite ends of
    its interval, with the squeeze margin eps = gap / (2 K0), K0 = (1+eta*K)^l
    bounding how much the existing paths can magnify an interval of width eps.
    Prefixing cannot break previously settled coordinates since the rectangle
    is positive invariant.
    """
    d = fam.dimension
    box = rect.box
    if alphas is None:
        alphas = [(+1,) + rest for rest in itertools.product((+1, -1), repeat=d - 1)]
    k_lip = lipschitz_constant(fam.obj)
    gaps: dict[tuple[int, ...], float] = {}

    base = _dim0_certificate(fam, box, ell_max)
    if base is None:
        lo_vals, _ = _envelope_with_path(fam, 0, box[0][1], ell_max, "min")
        hi_vals, _ = _envelope_with_path(fam, 0, box[0][0], ell_max, "max")
        raise NotFound(ell_max, {a: lo_vals[-1] - hi_vals[-1] for a in alphas})
    for alpha in alphas:
        cert = _extend_certificate(fam, box, base, alpha, ell_max, k_lip, gaps)
        if cert is not None and verify_certificate(fam, box, cert):
            return cert
    raise NotFound(ell_max, gaps)


def _dim0_certificate(fam: MapFamily, box, ell_max: int):
    lo_vals, lo_path = _envelope_with_path(fam, 0, box[0][1], ell_max, "min")
    hi_vals, hi_path = _envelope_with_path(fam, 0, box[0][0], ell_max, "max")
    for ell in range(1, ell_max + 1):
        if lo_vals[ell] <= hi_vals[ell]:
            mid = 0.5 * (lo_vals[ell] + hi_vals[ell])
            return list(lo_path[:ell]), list(hi_path[:ell]), mid
    return None


def _extend_certificate(fam: MapFamily, box, base, alpha, ell_max, k_lip, gaps):
    path_lo = list(base[0])
    path_hi = list(base[1])
    mids = [base[2]]
    for c in range(1, len(box)):
        lo_c, hi_c = box[c]
        sign = alpha[c]
        while True:
            if sign == +1:
                below = path_coord(fam, path_lo, c, hi_c)
                above = path_coord(fam, path_hi, c, lo_c)
            else:
                below = path_coord(fam, path_hi, c, hi_c)
                above = path_coord(fam, path_lo, c, lo_c)
            gap = below - above
            if gap <= 0:
                mids.append(0.5 * (below + above))
                break
            if len(path_lo) >= ell_max:
                gaps[tuple(alpha)] = gap
                return None
            k0 = (1.0 + fam.eta * k_lip) ** len(path_lo)
            eps = gap / (2.0 * k0)
            budget = ell_max - len(path_lo)
            _, _, q_up = _envelope_until(fam, c, lo_c, hi_c - eps, "max", budget)
            _, _, q_dn = _envelope_until(fam, c, hi_c, lo_c + eps, "min", budget)
            length = max(len(q_up), len(q_dn))
            if length == 0:
                gaps[tuple(alpha)] = gap
                return None
            # pad the shorter run by continuing its greedy recursion
            _, _, q_up = _envelope_until(fam, c, lo_c, float("inf"), "max", length)
            _, _, q_dn = _envelope_until(fam, c, hi_c, float("-inf"), "min", length)
            if sign == +1:
                path_hi = list(q_up) + path_hi
                path_lo = list(q_dn) + path_lo
            else:
                path_lo = list(q_up) + path_lo
                path_hi = list(q_dn) + path_hi
    ell = len(path_lo)
    p_lo, p_hi = tuple(path_lo), tuple(path_hi)
    if p_lo == p_hi:
        gaps[tuple(alpha)] = 0.0
        return None
    return SplittingCertificate(
        path_lo=p_lo, path_hi=p_hi,
        split_point=tuple(mids), alpha=tuple(alpha), ell=ell,
    )


@dataclass(frozen=True)
class EscapeReport:
    """Greedy escape paths and lengths over a grid of starting points."""

    ell_zero: int
    grid_shape: tuple[int, ...]
    lengths: np.ndarray
    paths: tuple[Path, ...]
    worst_start: tuple[float, ...]


def escape_path(fam: MapFamily, x, decomp: Decomposition) -> Path:
    """Greedy path driving x into the interior of the absorbing union.

    Coordinates are settled from the last dimension to the first; fixing a
    later coordinate first means the maps applied for earlier coordinates can
    no longer un-fix it (positive invariance of the per-dimension union).  For
    the active coordinate, a target interval reachable through an unbroken
    stretch of the right-moving (or left-moving) set is chosen once, and the
    map with the largest step toward it is applied until the interior is hit.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    _check_in_state_space(fam, x)
    if not decomp.left_right:
        raise ValueError("decomposition lacks left/right sets; use decompose()")
    path: list[int] = []
    for j in range(fam.dimension - 1, -1, -1):
        # closed membership counts as absorbed (boundary points never leave);
        # the walk itself targets the open interior
        if any(t.contains(x[j], closed=True) for t in decomp.per_dimension[j]):
            continue
        direction = _escape_direction(x[j], decomp.per_dimension[j],
                                      decomp.left_right[j], j)
        while not _inside_union(x[j], decomp.per_dimension[j]):
            best_i, best_step = 0, 0.0
            for i in range(1, fam.n + 1):
                step = direction * (fam.map_coord(i, j, x[j]) - x[j])
                if step > best_step:
                    best_i, best_step = i, step
            if best_i == 0:
                raise NonTermination(
                    f"no map makes progress at coordinate {j} = {x[j]!r}"
                )
            x = np.array([fam.map_coord(best_i, k, x[k]) for k in range(fam.dimension)])
            path.append(best_i)
            if len(path) > ESCAPE_STEP_CAP:
                raise NonTermination(f"escape exceeded {ESCAPE_STEP_CAP} steps")
    return tuple(path)


def _inside_union(s: float, ts: tuple[AbsorbingInterval, ...]) -> bool:
    return any(t.contains(s, closed=False) for t in ts)


def _escape_direction(s: float, ts, left_right, j: int) -> int:
    """+1 to walk right, -1 to walk left.

    Walking right toward T = [l, r] is viable when s sits in a component of the
    right-moving set that stretches past l (every point of [s, r) then moves
    right with positive probability).  Symmetrically for walking left.  Theory
    guarantees at least one direction is viable from every transient point; the
    nearer viable target wins ties.
    """
    left_set, right_set = left_right
    right_ts = [t for t in ts if t.l >= s]
    left_ts = [t for t in ts if t.r <= s]
    can_right = False
    if right_ts:
        target = right_ts[0]
        can_right = any(a < s < b and b > target.l for a, b in right_set.intervals)
    can_left = False
    if left_ts:
        target = left_ts[-1]
        can_left = any(a < s < b and a < target.r for a, b in left_set.intervals)
    if can_right and can_left:
        return +1 if right_ts[0].l - s <= s - left_ts[-1].r else -1
    if can_right:
        return +1
    if can_left:
        return -1
    raise NonTermination(f"coordinate {j}: no viable escape direction from {s!r}")


def uniform_escape_length(fam: MapFamily, decomp: Decomposition, grid_n: int = 100) -> EscapeReport:
    """Max greedy escape length over a grid of grid_n points per dimension;
    an upper estimate (for the greedy policy) of the uniform path length."""
    axes = [np.linspace(lo, hi, grid_n) for lo, hi in fam.intervals]
    shape = tuple(len(a) for a in axes)
    lengths = np.zeros(shape, dtype=int)
    paths: list[Path] = []
    worst = (0, tuple(float(a[0]) for a in axes))
    for idx in np.ndindex(*shape):
        pt = tuple(float(axes[j][idx[j]]) for j in range(fam.dimension))
        path = escape_path(fam, pt, decomp)
        paths.append(path)
        lengths[idx] = len(path)
        if len(path) > worst[0]:
            worst = (len(path), pt)
    return EscapeReport(
        ell_zero=int(lengths.max()),
        grid_shape=shape,
        lengths=lengths,
        paths=tuple(paths),
        worst_start=worst[1],
    )


@dataclass(frozen=True)
class SampleSummary:
    """Single-trajectory summary: per-dimension visit histograms on the state
    space, time spent per rectangle, and the final point."""

    steps: int
    seed: int
    bin_edges: tuple[np.ndarray, ...]
    histograms: tuple[np.ndarray, ...]
    rectangle_steps: dict[tuple[int, ...], int]
    final_point: tuple[float, ...]
    first_absorbed_step: int | None


def sgd_sample(fam: MapFamily, x0, steps: int, seed: int, grid_n: int = 100) -> SampleSummary:
    """Run the chain with uniform i.i.d. map choices (PCG64 stream) and record
    a visit histogram; asserts the absorbing property along the way."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    _check_in_state_space(fam, x0)
    d = fam.dimension
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.integers(1, fam.n + 1, size=steps)
    coeffs = [[fam.phi[i][j].coeffs for j in range(d)] for i in range(fam.n)]

    traj = np.empty((steps, d), dtype=float)
    x = [float(v) for v in x0]
    for k in range(steps):
        c = coeffs[draws[k] - 1]
        x = [horner_path(c[j], x[j]) for j in range(d)]
        traj[k] = x

    decomp = decompose(fam.obj, fam.eta)
    member = _membership_series(traj, decomp)
    rect_steps: dict[tuple[int, ...], int] = {}
    for m, rect in enumerate(decomp.rectangles):
        rect_steps[rect.index] = int(np.count_nonzero(member == m))
    absorbed = np.flatnonzero(member >= 0)
    first = int(absorbed[0]) if absorbed.size else None
    if absorbed.size:
        tail = member[first:]
        if np.any(tail != member[first]):
            k = first + int(np.argmax(tail != member[first]))
            raise AssertionError(f"absorbing property violated at step {k}")

    edges = tuple(np.linspace(lo, hi, grid_n + 1) for lo, hi in fam.intervals)
    hists = tuple(
        np.histogram(traj[:, j], bins=edges[j])[0] for j in range(d)
    )
    return SampleSummary(
        steps=steps,
        seed=seed,
        bin_edges=edges,
        histograms=hists,
        rectangle_steps=rect_steps,
        final_point=tuple(float(v) for v in traj[-1]),
        first_absorbed_step=first,
    )


def _membership_series(traj: np.ndarray, decomp: Decomposition) -> np.ndarray:
    """Rectangle index per step (-1 outside all rectangles), vectorized.

    Boxes are padded by a few ulps: orbits converging to a fixed point on a
    rectangle edge can round one ulp outside it, which is float drift, not a
    violated absorption property."""
    member = np.full(traj.shape[0], -1, dtype=int)
    for m, rect in enumerate(decomp.rectangles):
        mask = np.ones(traj.shape[0], dtype=bool)
        for j, (lo, hi) in enumerate(rect.box):
            pad = 1e-12 * max(1.0, abs(lo), abs(hi))
            mask &= (traj[:, j] >= lo - pad) & (traj[:, j] <= hi + pad)
        member[mask] = m
    return member
