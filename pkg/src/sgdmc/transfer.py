"""Ulam discretization of the measure-evolution operator, invariant measures
per absorbing block, basin eigenfunctions of the dual operator, and mixture
limits with logged convergence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .absorbing import Decomposition
from .dynamics import MapFamily
from .errors import DimensionMismatch, GridMismatch, NoConvergence
from .metrics import MetricConfig, d_tilde, metric_config

DEFAULT_TOL_1D = 1e-10
DEFAULT_TOL_ND = 1e-8
DEFAULT_MAX_ITER = 10**6


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid over the state space; cells are flattened row-major."""

    edges: tuple[np.ndarray, ...]

    @classmethod
    def regular(cls, intervals, cells_per_dim) -> "Grid":
        if isinstance(cells_per_dim, int):
            cells_per_dim = [cells_per_dim] * len(intervals)
        edges = tuple(
            np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(intervals, cells_per_dim)
        )
        return cls(edges=edges)

    @property
    def dimension(self) -> int:
        return len(self.edges)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.edges)

    @property
    def ncells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def centers(self) -> tuple[np.ndarray, ...]:
        return tuple(0.5 * (e[:-1] + e[1:]) for e in self.edges)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(float(e[1] - e[0]) for e in self.edges)

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.shape == other.shape
            and all(np.array_equal(a, b) for a, b in zip(self.edges, other.edges))
        )

    def __eq__(self, other):
        return isinstance(other, Grid) and self.same_as(other)

    def classify(self, decomp: Decomposition) -> np.ndarray:
        """Rectangle label per flattened cell, -1 for transient cells.

        A cell belongs to a rectangle when it overlaps it with positive volume
        in every dimension, so boundary-straddling cells count as absorbing;
        this keeps the labeled absorbing blocks closed under the discrete
        dynamics (no flow back into the labeled transient cells).
        """
        per_dim = []
        for j, e in enumerate(self.edges):
            lab = np.full(len(e) - 1, -1, dtype=int)
            for t in decomp.per_dimension[j]:
                hit = np.flatnonzero((e[:-1] < t.r) & (e[1:] > t.l))
                if np.any(lab[hit] >= 0):
                    raise ValueError(
                        "grid too coarse: a cell overlaps two absorbing intervals"
                    )
                lab[hit] = t.index
            per_dim.append(lab)
        index_of = {rect.index: m for m, rect in enumerate(decomp.rectangles)}
        mesh = np.meshgrid(*per_dim, indexing="ij")
        flat = [g.ravel() for g in mesh]
        out = np.full(self.ncells, -1, dtype=int)
        valid = np.ones(self.ncells, dtype=bool)
        for f in flat:
            valid &= f >= 0
        combos = np.stack(flat, axis=1)
        for pos in np.flatnonzero(valid):
            out[pos] = index_of[tuple(int(v) for v in combos[pos])]
        return out


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative cell weights on a grid."""

    grid: Grid
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.grid.ncells,):
            raise DimensionMismatch(
                f"weights shape {w.shape} for grid with {self.grid.ncells} cells"
            )
        if np.any(w < -1e-15):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "weights", np.maximum(w, 0.0))

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def normalized(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.grid, self.weights / self.mass)

    def restricted(self, cells) -> "DiscreteMeasure":
        w = np.zeros_like(self.weights)
        w[cells] = self.weights[cells]
        return DiscreteMeasure(self.grid, w)

    @classmethod
    def uniform(cls, grid: Grid) -> "DiscreteMeasure":
        return cls(grid, np.full(grid.ncells, 1.0 / grid.ncells))

    @classmethod
    def point_mass(cls, grid: Grid, x) -> "DiscreteMeasure":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = []
        for j, e in enumerate(grid.edges):
            k = int(np.clip(np.searchsorted(e, x[j], side="right") - 1, 0, len(e) - 2))
            idx.append(k)
        w = np.zeros(grid.ncells)
        w[np.ravel_multi_index(tuple(idx), grid.shape)] = 1.0
        return cls(grid, w)


@dataclass(frozen=True)
class UlamOperator:
    """Row-stochastic cell-to-cell transition matrix of the one-step kernel."""

    matrix: sp.csr_matrix
    grid: Grid
    n_maps: int
    row_sum_error: float

    @property
    def ncells(self) -> int:
        return self.grid.ncells

    def coo_rows(self):
        """Yield (row, col, value) triples of the nonzero entries."""
        coo = self.matrix.tocoo()
        yield from zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())


def _overlap_row(lo: float, hi: float, edges: np.ndarray):
    """Fractions of the interval [lo, hi] falling into each grid cell."""
    a, b = edges[0], edges[-1]
    lo_c, hi_c = max(lo, a), min(hi, b)
    if hi_c <= lo_c:
        # fully clipped: deposit on the nearest boundary cell
        k = 0 if hi <= a else len(edges) - 2
        return np.array([k]), np.array([1.0])
    first = int(np.clip(np.searchsorted(edges, lo_c, side="right") - 1, 0, len(edges) - 2))
    last = int(np.clip(np.searchsorted(edges, hi_c, side="left") - 1, 0, len(edges) - 2))
    cols = np.arange(first, last + 1)
    cuts_lo = np.maximum(edges[cols], lo_c)
    cuts_hi = np.minimum(edges[cols + 1], hi_c)
    seg = np.maximum(cuts_hi - cuts_lo, 0.0)
    total = hi - lo
    fracs = seg / total
    clipped = total - (hi_c - lo_c)
    if clipped > 0:
        # mass shaved off by clipping re-enters at the boundary cell
        if lo < a:
            fracs[0] += (a - lo) / total
        if hi > b:
            fracs[-1] += (hi - b) / total
    return cols, fracs


def _map_factor_1d(fam: MapFamily, i: int, j: int, edges: np.ndarray) -> sp.csr_matrix:
    """One-dimensional cell-image transition factor for map i in dimension j."""
    img = np.array([fam.map_coord(i, j, float(e)) for e in edges])
    n = len(edges) - 1
    rows, cols, vals = [], [], []
    for k in range(n):
        lo, hi = img[k], img[k + 1]
        if hi < lo:
            lo, hi = hi, lo
        c, f = _overlap_row(lo, hi, edges)
        rows.extend([k] * len(c))
        cols.extend(c.tolist())
        vals.extend(f.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def ulam_assemble(fam: MapFamily, grid: Grid) -> UlamOperator:
    """Assemble the cell-transition matrix.

    Cell images under the separable monotone maps are rectangles obtained from
    the edge images per dimension; each image rectangle spreads its mass over
    target cells in proportion to overlap volume (exact for affine maps).
    """
    if grid.dimension != fam.dimension:
        raise DimensionMismatch("grid and map family dimensions differ")
    if grid.dimension > 2:
        raise ValueError(
            "dense cell grids are offered up to two dimensions; use trajectory "
            "histograms (sgd_sample) for higher-dimensional problems"
        )
    acc = None
    for i in range(1, fam.n + 1):
        factors = [_map_factor_1d(fam, i, j, grid.edges[j]) for j in range(grid.dimension)]
        full = factors[0]
        for f in factors[1:]:
            full = sp.kron(full, f, format="csr")
        acc = full if acc is None else acc + full
    matrix = (acc / fam.n).tocsr()
    err = float(np.max(np.abs(matrix.sum(axis=1) - 1.0)))
    return UlamOperator(matrix=matrix, grid=grid, n_maps=fam.n, row_sum_error=err)


def push_forward(op: UlamOperator, mu: DiscreteMeasure) -> DiscreteMeasure:
    """One application of the measure-evolution step."""
    if not op.grid.same_as(mu.grid):
        raise DimensionMismatch("operator and measure grids differ")
    return DiscreteMeasure(mu.grid, op.matrix.T @ mu.weights)


def block_leakage(op: UlamOperator, cells: np.ndarray) -> float:
    """Max mass a block row sends outside the block."""
    sub = op.matrix[cells][:, cells]
    inside = np.asarray(sub.sum(axis=1)).ravel()
    return float(np.max(1.0 - inside)) if cells.size else 0.0


@dataclass(frozen=True)
class InvariantResult:
    measure: DiscreteMeasure
    iterations: int
    residual: float
    leakage: float


def invariant_measure(op: UlamOperator, cells, tol: float | None = None,
                      max_iter: int = DEFAULT_MAX_ITER) -> InvariantResult:
    """Fixed probability vector of the restricted absorbing block by power
    iteration from the uniform start; the change between successive iterates is
    measured in the CDF sup metric (one dimension) or total variation."""
    cells = np.asarray(cells, dtype=int)
    if cells.size == 0:
        raise ValueError("empty cell block")
    one_d = op.grid.dimension == 1
    if tol is None:
        tol = DEFAULT_TOL_1D if one_d else DEFAULT_TOL_ND
    sub = sp.csr_matrix(op.matrix[cells][:, cells]).T
    leak = block_leakage(op, cells)
    w = np.full(cells.size, 1.0 / cells.size)
    residual = np.inf
    for it in range(1, max_iter + 1):
        w_next = sub @ w
        w_next /= w_next.sum()
        if one_d:
            residual = float(np.max(np.abs(np.cumsum(w_next) - np.cumsum(w))))
        else:
            residual = 0.5 * float(np.sum(np.abs(w_next - w)))
        w = w_next
        if residual < tol:
            full = np.zeros(op.grid.ncells)
            full[cells] = w
            return InvariantResult(
                measure=DiscreteMeasure(op.grid, full),
                iterations=it,
                residual=residual,
                leakage=leak,
            )
    raise NoConvergence(max_iter, residual)


def _interp_factor_1d(fam: MapFamily, i: int, j: int, centers: np.ndarray) -> sp.csr_matrix:
    """Linear-interpolation matrix W with (W g)(c) = g(phi_i^{(j)}(center_c))."""
    x = np.array([fam.map_coord(i, j, float(c)) for c in centers])
    n = len(centers)
    idx = np.clip(np.searchsorted(centers, x) - 1, 0, n - 2)
    left = centers[idx]
    right = centers[idx + 1]
    t = np.clip((x - left) / (right - left), 0.0, 1.0)
    rows = np.repeat(np.arange(n), 2)
    cols = np.empty(2 * n, dtype=int)
    vals = np.empty(2 * n)
    cols[0::2], cols[1::2] = idx, idx + 1
    vals[0::2], vals[1::2] = 1.0 - t, t
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def dual_operator(fam: MapFamily, grid: Grid) -> sp.csr_matrix:
    """Matrix of the function-side operator at cell centers: averaging the map
    images with multilinear interpolation for off-center evaluations."""
    acc = None
    for i in range(1, fam.n + 1):
        factors = [
            _interp_factor_1d(fam, i, j, grid.centers[j]) for j in range(grid.dimension)
        ]
        full = factors[0]
        for f in factors[1:]:
            full = sp.kron(full, f, format="csr")
        acc = full if acc is None else acc + full
    return (acc / fam.n).tocsr()


@dataclass(frozen=True)
class BasinFunctions:
    """Grid values of the absorption eigenfunctions, one row per rectangle."""

    grid: Grid
    values: np.ndarray
    iterations: int
    residual: float
    partition_defect: float


def basin_functions(fam: MapFamily, grid: Grid, decomp: Decomposition,
                    tol: float = 1e-11, max_iter: int = DEFAULT_MAX_ITER) -> BasinFunctions:
    """Iterate the exact dual operator from indicator-like seeds (1 on the
    rectangle's cells, 0 elsewhere) until the sup change drops below tol."""
    dual = dual_operator(fam, grid)
    labels = grid.classify(decomp)
    m_count = len(decomp.rectangles)
    g = np.zeros((m_count, grid.ncells))
    for m in range(m_count):
        g[m, labels == m] = 1.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        g_next = (dual @ g.T).T
        residual = float(np.max(np.abs(g_next - g)))
        g = g_next
        if residual < tol:
            defect = float(np.max(np.abs(g.sum(axis=0) - 1.0)))
            if defect > 1e-6:
                # cells wider than the smallest transient step let the
                # interpolated dynamics close a spurious loop; refine the grid
                logging.getLogger(__name__).warning(
                    "partition-of-unity defect %.2e suggests the grid is too "
                    "coarse for the transient dynamics", defect,
                )
            return BasinFunctions(
                grid=grid, values=g, iterations=it, residual=residual,
                partition_defect=defect,
            )
    raise NoConvergence(max_iter, residual)


def dual_residual(fam: MapFamily, basins: BasinFunctions) -> float:
    """Sup norm of one more dual application minus the basin values."""
    dual = dual_operator(fam, basins.grid)
    return float(np.max(np.abs((dual @ basins.values.T).T - basins.values)))


def mixture_coefficients(basins: BasinFunctions, mu0: DiscreteMeasure) -> np.ndarray:
    """Limit weights: integrals of each basin function against mu0."""
    if not basins.grid.same_as(mu0.grid):
        raise GridMismatch("basin functions and measure grids differ")
    return basins.values @ mu0.weights


def ulam_absorption(op: UlamOperator, decomp: Decomposition) -> BasinFunctions:
    """Absorption probabilities of the discrete chain itself, per rectangle.

    Solves (I - P_BB) g_B = P_{B,T_m} 1 on the transient cells; on absorbing
    cells the values are exact indicators.  These coefficients are the ones the
    discretized evolution actually converges to, which makes the logged
    distances in limit mixtures decay to zero rather than plateau at the
    discretization mismatch.
    """
    labels = op.grid.classify(decomp)
    b_cells = np.flatnonzero(labels < 0)
    m_count = len(decomp.rectangles)
    g = np.zeros((m_count, op.grid.ncells))
    for m in range(m_count):
        g[m, labels == m] = 1.0
    if b_cells.size:
        p_bb = sp.csc_matrix(op.matrix[b_cells][:, b_cells])
        lhs = sp.identity(b_cells.size, format="csc") - p_bb
        for m in range(m_count):
            t_cells = np.flatnonzero(labels == m)
            rhs = np.asarray(op.matrix[b_cells][:, t_cells].sum(axis=1)).ravel()
            g[m, b_cells] = spla.spsolve(lhs, rhs)
    defect = float(np.max(np.abs(g.sum(axis=0) - 1.0)))
    return BasinFunctions(
        grid=op.grid, values=g, iterations=0, residual=0.0, partition_defect=defect,
    )


@dataclass(frozen=True)
class LimitMixtureResult:
    mixture: DiscreteMeasure
    coefficients: np.ndarray
    invariants: tuple[InvariantResult, ...]
    decay_log: np.ndarray
    envelope_ratio: float
    config: MetricConfig = field(compare=False, repr=False, default=None)


def limit_mixture(op: UlamOperator, decomp: Decomposition, mu0: DiscreteMeasure,
                  k_max: int = 10**4, stop_below: float = 0.0,
                  tol: float | None = None) -> LimitMixtureResult:
    """Assemble the limiting mixture of the discrete chain and log the
    composite distance of the evolving measure to it, step by step."""
    labels = op.grid.classify(decomp)
    invariants = []
    for m in range(len(decomp.rectangles)):
        cells = np.flatnonzero(labels == m)
        invariants.append(invariant_measure(op, cells, tol=tol))
    basins = ulam_absorption(op, decomp)
    coeff = mixture_coefficients(basins, mu0)
    mix = np.zeros(op.grid.ncells)
    for c, inv in zip(coeff, invariants):
        mix += c * inv.measure.weights
    mu_star = DiscreteMeasure(op.grid, mix)
    config = metric_config(op.grid, decomp)
    log = []
    mu = mu0
    for _ in range(k_max):
        log.append(d_tilde(mu, mu_star, config))
        if log[-1] < stop_below:
            break
        mu = push_forward(op, mu)
    log = np.asarray(log)
    ratio = _fitted_envelope_ratio(log)
    return LimitMixtureResult(
        mixture=mu_star,
        coefficients=coeff,
        invariants=tuple(invariants),
        decay_log=log,
        envelope_ratio=ratio,
        config=config,
    )


def _fitted_envelope_ratio(log: np.ndarray) -> float:
    """Geometric ratio fitted to the decaying tail of the logged distances."""
    pos = log[log > 0]
    if pos.size < 4:
        return 0.0
    tail = pos[pos.size // 2:]
    k = np.arange(tail.size, dtype=float)
    slope = np.polyfit(k, np.log(tail), 1)[0]
    return float(np.exp(slope))
