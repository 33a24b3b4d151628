"""Distances between grid measures: the CDF sup metric, its orthant
generalization over anchored rectangles, discrete total variation, and the
composite transient-plus-absorbing metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch


def _check_same_grid(mu, nu):
    if mu.grid is not nu.grid and mu.grid != nu.grid:
        raise GridMismatch("measures live on different grids")


def d_F(mu, nu) -> float:
    """Sup distance of cumulative distributions on a shared 1-d grid."""
    _check_same_grid(mu, nu)
    if mu.grid.dimension != 1:
        raise GridMismatch("CDF metric is one-dimensional; use d_alpha_rect")
    return float(np.max(np.abs(np.cumsum(mu.weights) - np.cumsum(nu.weights))))


def d_alpha_rect(mu, nu, alpha) -> float:
    """Sup of |mu - nu| over grid-anchored orthant rectangles.

    The sets scanned are {y : alpha o y <= alpha o c} for cell-corner anchors
    c.  They form a subfamily of the monotone sublevel sets, so the value is a
    lower bound for the full orthant metric; in one dimension the two coincide
    and equal the CDF sup distance.
    """
    _check_same_grid(mu, nu)
    d = mu.grid.dimension
    if len(alpha) != d:
        raise GridMismatch(f"alpha has {len(alpha)} signs for a {d}-d grid")
    diff = (mu.weights - nu.weights).reshape(mu.grid.shape)
    for axis, a in enumerate(alpha):
        if a == -1:
            diff = np.flip(diff, axis=axis)
        diff = np.cumsum(diff, axis=axis)
    return float(np.max(np.abs(diff)))


def total_variation(mu, nu) -> float:
    """Discrete total variation: half the l1 distance of cell weights."""
    _check_same_grid(mu, nu)
    return 0.5 * float(np.sum(np.abs(mu.weights - nu.weights)))


@dataclass(frozen=True)
class MetricConfig:
    """Orthant signs per rectangle plus the decomposition-aware cell masks."""

    alphas: tuple[tuple[int, ...], ...]
    rectangle_cells: tuple[np.ndarray, ...]
    transient_cells: np.ndarray

    def __post_init__(self):
        for alpha in self.alphas:
            if alpha and alpha[0] != +1:
                raise ValueError("orthant signs are normalized to alpha[0] = +1")
        if len(self.alphas) != len(self.rectangle_cells):
            raise ValueError("one alpha per rectangle is required")


def metric_config(grid, decomp, alphas=None) -> MetricConfig:
    """Build the composite-metric configuration for a grid and decomposition.

    Without certificates the positive orthant is used for every rectangle; in
    one dimension the choice is immaterial.
    """
    labels = grid.classify(decomp)
    rect_cells = tuple(
        np.flatnonzero(labels == m) for m in range(len(decomp.rectangles))
    )
    if alphas is None:
        alphas = tuple((+1,) * grid.dimension for _ in decomp.rectangles)
    return MetricConfig(
        alphas=tuple(tuple(a) for a in alphas),
        rectangle_cells=rect_cells,
        transient_cells=np.flatnonzero(labels < 0),
    )


def d_tilde(mu, nu, config: MetricConfig) -> float:
    """Total variation of the transient restrictions plus the per-rectangle
    orthant distances of the absorbing restrictions."""
    _check_same_grid(mu, nu)
    total = _tv_on_cells(mu, nu, config.transient_cells)
    for cells, alpha in zip(config.rectangle_cells, config.alphas):
        total += _restricted_alpha(mu, nu, cells, alpha)
    return float(total)


def _tv_on_cells(mu, nu, cells) -> float:
    if cells.size == 0:
        return 0.0
    return 0.5 * float(np.sum(np.abs(mu.weights[cells] - nu.weights[cells])))


def _restricted_alpha(mu, nu, cells, alpha) -> float:
    if cells.size == 0:
        return 0.0
    diff = np.zeros_like(mu.weights)
    diff[cells] = mu.weights[cells] - nu.weights[cells]
    diff = diff.reshape(mu.grid.shape)
    for axis, a in enumerate(alpha):
        if a == -1:
            diff = np.flip(diff, axis=axis)
        diff = np.cumsum(diff, axis=axis)
    return float(np.max(np.abs(diff)))
