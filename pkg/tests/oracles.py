"""Independent oracles used to pin expected values: closed-form cubic roots,
dense sign scans, exhaustive path enumeration and brute-force set distances.
Everything here deliberately avoids the package's own algorithms."""

from __future__ import annotations

import math

import numpy as np


def depressed_cubic_roots(p: float, q: float) -> list[float]:
    """Real roots of x^3 + p x + q by the trigonometric/Cardano formulas."""
    disc = -4 * p**3 - 27 * q**2
    if abs(p) < 1e-300:
        return [math.copysign(abs(q) ** (1 / 3), -q)]
    if disc > 0:
        # three real roots (requires p < 0)
        m = 2 * math.sqrt(-p / 3)
        theta = math.acos(min(1.0, max(-1.0, 3 * q / (p * m)))) / 3
        return sorted(m * math.cos(theta - 2 * math.pi * k / 3) for k in range(3))
    # one real root (Cardano)
    half_q = q / 2
    rad = math.sqrt(half_q**2 + (p / 3) ** 3)
    u = -half_q + rad
    v = -half_q - rad
    root = math.copysign(abs(u) ** (1 / 3), u) + math.copysign(abs(v) ** (1 / 3), v)
    return [root]


def double_well_roots(lam: float) -> list[float]:
    """Real critical points of the tilted double well: roots of x^3 - x - lam."""
    return depressed_cubic_roots(-1.0, -lam)


def double_well_x0(lam: float) -> float:
    return max(double_well_roots(lam))


def double_well_eta0(lam: float) -> float:
    x0 = double_well_x0(lam)
    return 1.0 / (3 * x0 * x0 - 1.0)


def sign_scan_sets(obj, j: int, lo: float, hi: float, n: int = 10_000):
    """Pointwise classification of a dense grid: in the left-moving set when
    some component derivative is positive, right-moving when negative."""
    xs = np.linspace(lo, hi, n)
    in_left = np.zeros(n, dtype=bool)
    in_right = np.zeros(n, dtype=bool)
    for p in obj.components[j]:
        if p.is_zero:
            continue
        vals = p.derivative()(xs)
        in_left |= vals > 0
        in_right |= vals < 0
    return xs, in_left, in_right


def brute_force_path_extremes(fam, j: int, x: float, ell: int):
    """Min and max over all n^k paths of the coordinate-j image, per step."""
    vals = np.array([float(x)])
    mins, maxs = [float(x)], [float(x)]
    for _ in range(ell):
        vals = np.concatenate([fam.phi[i][j](vals) for i in range(fam.n)])
        mins.append(float(vals.min()))
        maxs.append(float(vals.max()))
    return mins, maxs


def brute_force_anchored_distance(weights_a, weights_b, shape, alpha):
    """Sup over anchored orthant rectangles by direct mass summation."""
    wa = np.asarray(weights_a, dtype=float).reshape(shape)
    wb = np.asarray(weights_b, dtype=float).reshape(shape)
    best = 0.0
    ranges = [range(s + 1) for s in shape]
    import itertools

    for corner in itertools.product(*ranges):
        mask = np.ones(shape, dtype=bool)
        for axis, (c, a) in enumerate(zip(corner, alpha)):
            idx = np.arange(shape[axis])
            keep = idx < c if a == +1 else idx >= shape[axis] - c
            sl = [np.newaxis] * len(shape)
            sl[axis] = slice(None)
            mask &= keep[tuple(sl)]
        best = max(best, abs(wa[mask].sum() - wb[mask].sum()))
    return best
