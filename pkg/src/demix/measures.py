"""Discrete measures, grid densities, and the distances between them.

Value types
-----------
- ``DiscreteMeasure``: finitely many weighted atoms on the line.
- ``GridDensity``: density values on a uniform grid, integrated by the
  trapezoid rule.
- ``GridSpec``: lightweight description of such a grid.
- ``IntervalSet``: ordered disjoint union of bounded intervals.

Operations
----------
- ``wasserstein1``: exact 1-Wasserstein distance between discrete measures.
- ``wasserstein1_lp_oracle``: the same distance via the transport linear
  program, kept as an independent cross-check.
- ``l1_distance``: trapezoid L1 distance between densities on a shared grid.
- ``convolve_gaussian``: Gaussian blur of a discrete measure.
- ``density_mean``: first moment of a grid density.
- ``box_mixture_density``: exact grid representation of a mixture of
  uniform boxes (shared by the kernel and smoothing estimators).

All types are immutable after construction and all operations are pure, so
values may be shared freely across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, hstack, vstack

WEIGHT_TOL = 1e-12
GRID_NORM_TOL = 1e-3

_LP_ORACLE_MAX_ATOMS = 12


def _as_finite_1d(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``n_points`` values spanning ``[lo, hi]``."""

    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("grid endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError("grid requires lo < hi")
        if self.n_points < 2:
            raise ValueError("grid requires at least two points")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    def covers(self, lo: float, hi: float) -> bool:
        """Whether ``[lo, hi]`` lies inside the grid span."""
        return self.lo <= lo and hi <= self.hi


class GridDensity:
    """Nonnegative density values on a uniform grid.

    The ``normalized`` flag asserts that the trapezoid integral over
    ``[lo, hi]`` is 1 up to ``norm_tol``; constructing with the flag set
    validates that claim.
    """

    def __init__(self, lo, hi, values, *, normalized=False,
                 norm_tol=GRID_NORM_TOL):
        lo = float(lo)
        hi = float(hi)
        vals = _as_finite_1d(values, "values")
        if vals.size < 2:
            raise ValueError("values must hold at least two points")
        if not lo < hi:
            raise ValueError("density requires lo < hi")
        if np.any(vals < 0):
            raise ValueError("density values must be nonnegative")
        self._lo = lo
        self._hi = hi
        self._values = _frozen(vals)
        self._normalized = bool(normalized)
        if self._normalized:
            total = self.integral()
            if abs(total - 1.0) > norm_tol:
                raise ValueError(
                    f"flagged normalized but integrates to {total:.6g}"
                )

    @property
    def lo(self) -> float:
        return self._lo

    @property
    def hi(self) -> float:
        return self._hi

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_points(self) -> int:
        return self._values.size

    @property
    def spacing(self) -> float:
        return (self._hi - self._lo) / (self.n_points - 1)

    @property
    def normalized(self) -> bool:
        return self._normalized

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self._lo, self._hi, self.n_points)

    def spec(self) -> GridSpec:
        return GridSpec(self._lo, self._hi, self.n_points)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def integral(self) -> float:
        return float(np.trapezoid(self._values, dx=self.spacing))

    def same_grid(self, other: "GridDensity") -> bool:
        return (self._lo == other._lo and self._hi == other._hi
                and self.n_points == other.n_points)

    def to_json(self) -> str:
        return json.dumps(
            {"lo": self._lo, "hi": self._hi, "values": self._values.tolist()}
        )

    @classmethod
    def from_json(cls, text: str, *, normalized=False,
                  norm_tol=GRID_NORM_TOL) -> "GridDensity":
        obj = json.loads(text)
        return cls(obj["lo"], obj["hi"], obj["values"],
                   normalized=normalized, norm_tol=norm_tol)

    def __repr__(self):
        return (f"GridDensity(lo={self._lo:g}, hi={self._hi:g}, "
                f"n_points={self.n_points}, normalized={self._normalized})")


# ---------------------------------------------------------------------------
# discrete measures
# ---------------------------------------------------------------------------

class DiscreteMeasure:
    """Finite collection of weighted atoms on the line.

    Weights must be nonnegative with positive total.  Duplicate locations are
    permitted and merged by :meth:`normalize`, which also sorts atoms and
    rescales the total weight to exactly 1.
    """

    def __init__(self, locations, weights):
        locs = _as_finite_1d(locations, "locations")
        wts = _as_finite_1d(weights, "weights")
        if locs.size != wts.size:
            raise ValueError("locations and weights must have equal length")
        if np.any(wts < 0):
            raise ValueError("weights must be nonnegative")
        total = float(wts.sum())
        if total <= 0:
            raise ValueError("total weight must be positive")
        self._locations = _frozen(locs)
        self._weights = _frozen(wts)
        self._total = total

    @classmethod
    def point(cls, location: float) -> "DiscreteMeasure":
        """Unit point mass at ``location``."""
        return cls([location], [1.0])

    @property
    def locations(self) -> np.ndarray:
        return self._locations

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def n_atoms(self) -> int:
        return self._locations.size

    @property
    def total_weight(self) -> float:
        return self._total

    @property
    def is_normalized(self) -> bool:
        return abs(self._total - 1.0) <= WEIGHT_TOL

    def mean(self) -> float:
        return float(np.dot(self._locations, self._weights) / self._total)

    def support_bounds(self) -> tuple[float, float]:
        positive = self._weights > 0
        locs = self._locations[positive]
        return float(locs.min()), float(locs.max())

    def normalize(self) -> "DiscreteMeasure":
        """Canonical form: sorted atoms, duplicates merged, total weight 1."""
        locs, inverse = np.unique(self._locations, return_inverse=True)
        wts = np.zeros(locs.size)
        np.add.at(wts, inverse, self._weights)
        return DiscreteMeasure(locs, wts / wts.sum())

    def shift(self, offset: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self._locations + offset, self._weights)

    def mass_in(self, lo: float, hi: float) -> float:
        """Total weight of atoms in the half-open cell ``[lo, hi)``."""
        inside = (self._locations >= lo) & (self._locations < hi)
        return float(self._weights[inside].sum())

    def restrict(self, lo: float, hi: float) -> "DiscreteMeasure":
        """Conditional measure on ``[lo, hi)``, renormalized to mass 1."""
        inside = (self._locations >= lo) & (self._locations < hi)
        if not inside.any() or self._weights[inside].sum() <= 0:
            raise ValueError(f"no mass in [{lo:g}, {hi:g})")
        wts = self._weights[inside]
        return DiscreteMeasure(self._locations[inside], wts / wts.sum())

    def to_json(self) -> str:
        atoms = [[float(a), float(w)]
                 for a, w in zip(self._locations, self._weights)]
        return json.dumps({"atoms": atoms})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        atoms = json.loads(text)["atoms"]
        return cls([a[0] for a in atoms], [a[1] for a in atoms])

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        a, b = self.normalize(), other.normalize()
        return (a._locations.shape == b._locations.shape
                and bool(np.all(a._locations == b._locations))
                and bool(np.all(a._weights == b._weights)))

    def __hash__(self):
        canon = self.normalize()
        return hash((canon._locations.tobytes(), canon._weights.tobytes()))

    def __repr__(self):
        return f"DiscreteMeasure(n_atoms={self.n_atoms}, total={self._total:g})"


# ---------------------------------------------------------------------------
# interval sets
# ---------------------------------------------------------------------------

class IntervalSet:
    """Ordered disjoint union of bounded open-ended intervals ``(lo, hi)``."""

    def __init__(self, intervals):
        cleaned = []
        prev_hi = -math.inf
        for pair in intervals:
            lo, hi = float(pair[0]), float(pair[1])
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("interval endpoints must be finite")
            if not lo < hi:
                raise ValueError(f"interval requires lo < hi, got [{lo}, {hi}]")
            if lo < prev_hi:
                raise ValueError("intervals must be sorted and disjoint")
            cleaned.append((lo, hi))
            prev_hi = hi
        if not cleaned:
            raise ValueError("interval set must be nonempty")
        self._intervals = tuple(cleaned)

    @property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        return self._intervals

    @property
    def lo(self) -> float:
        return self._intervals[0][0]

    @property
    def hi(self) -> float:
        return self._intervals[-1][1]

    def __len__(self):
        return len(self._intervals)

    def contains(self, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self._intervals)

    def distance_to(self, x) -> np.ndarray:
        """Pointwise distance from ``x`` to the union of intervals."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dist = np.full(x.shape, np.inf)
        for lo, hi in self._intervals:
            gap = np.maximum.reduce([lo - x, x - hi, np.zeros_like(x)])
            dist = np.minimum(dist, gap)
        return dist

    def to_json(self) -> str:
        return json.dumps({"intervals": [list(p) for p in self._intervals]})

    @classmethod
    def from_json(cls, text: str) -> "IntervalSet":
        return cls(json.loads(text)["intervals"])

    @classmethod
    def merged(cls, interval_sets) -> "IntervalSet":
        """Union of several interval sets, overlapping pieces fused."""
        pieces = sorted(
            (p for s in interval_sets for p in s.intervals), key=lambda p: p[0]
        )
        fused: list[list[float]] = []
        for lo, hi in pieces:
            if fused and lo <= fused[-1][1]:
                fused[-1][1] = max(fused[-1][1], hi)
            else:
                fused.append([lo, hi])
        return cls(fused)

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self._intervals == other._intervals

    def __hash__(self):
        return hash(self._intervals)

    def __repr__(self):
        inner = ", ".join(f"[{lo:g}, {hi:g}]" for lo, hi in self._intervals)
        return f"IntervalSet({inner})"


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _require_normalized(m: DiscreteMeasure, name: str) -> DiscreteMeasure:
    if not m.is_normalized:
        raise ValueError(f"{name} must be normalized (total weight 1)")
    return m.normalize()


def wasserstein1(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Exact 1-Wasserstein distance between two normalized discrete measures.

    Computed as the area between the two cumulative distribution functions,
    which on the line equals the optimal transport cost with unit distance
    cost.  Exact for discrete measures, O(n log n).
    """
    a = _require_normalized(a, "a")
    b = _require_normalized(b, "b")
    locs = np.concatenate([a.locations, b.locations])
    signed = np.concatenate([a.weights, -b.weights])
    order = np.argsort(locs, kind="stable")
    locs = locs[order]
    cdf_gap = np.cumsum(signed[order])[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(locs)))


def wasserstein1_lp_oracle(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """1-Wasserstein distance via the transport linear program.

    Independent cross-check for :func:`wasserstein1`; limited to small inputs
    because the LP has ``n_a * n_b`` variables.
    """
    a = _require_normalized(a, "a")
    b = _require_normalized(b, "b")
    if a.n_atoms > _LP_ORACLE_MAX_ATOMS or b.n_atoms > _LP_ORACLE_MAX_ATOMS:
        raise ValueError(
            f"oracle accepts at most {_LP_ORACLE_MAX_ATOMS} atoms per measure"
        )
    na, nb = a.n_atoms, b.n_atoms
    cost = np.abs(a.locations[:, None] - b.locations[None, :]).ravel()
    # Row sums reproduce a's weights, column sums b's weights.
    rows = np.zeros((na, na * nb))
    for i in range(na):
        rows[i, i * nb:(i + 1) * nb] = 1.0
    cols = np.tile(np.eye(nb), (1, na))
    a_eq = np.vstack([rows, cols])
    b_eq = np.concatenate([a.weights, b.weights])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def l1_distance(a: GridDensity, b: GridDensity) -> float:
    """Trapezoid approximation of the L1 distance on a shared grid."""
    if not a.same_grid(b):
        raise ValueError("densities must share the same grid")
    return float(np.trapezoid(np.abs(a.values - b.values), dx=a.spacing))


def gaussian_blur_values(locations, weights, sigma: float,
                         points) -> np.ndarray:
    """Evaluate sum_i w_i * phi_sigma(points - a_i) at arbitrary points."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    locations = np.asarray(locations, dtype=float)
    weights = np.asarray(weights, dtype=float)
    points = np.asarray(points, dtype=float)
    values = np.zeros(points.shape)
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    # Chunked so finely discretized measures do not allocate a huge outer
    # product.
    step = max(1, int(2e6 / max(points.size, 1)))
    for start in range(0, locations.size, step):
        z = (points[None, :] - locations[start:start + step, None]) / sigma
        values += weights[start:start + step] @ (norm * np.exp(-0.5 * z * z))
    return values


def convolve_gaussian(g: DiscreteMeasure, sigma: float,
                      grid: GridSpec) -> GridDensity:
    """Density of ``g`` blurred by a centered Gaussian of scale ``sigma``.

    The output is flagged normalized when ``g`` is normalized and the grid
    spans every atom by at least six sigma on both sides.
    """
    values = gaussian_blur_values(g.locations, g.weights, sigma, grid.points())
    lo, hi = g.support_bounds()
    covered = g.is_normalized and grid.covers(lo - 6 * sigma, hi + 6 * sigma)
    return GridDensity(grid.lo, grid.hi, values, normalized=covered)


def density_mean(d: GridDensity) -> float:
    """First moment of a normalized grid density (trapezoid rule)."""
    if not d.normalized:
        raise ValueError("density_mean requires a normalized density")
    return float(np.trapezoid(d.grid * d.values, dx=d.spacing))


# ---------------------------------------------------------------------------
# box mixtures
# ---------------------------------------------------------------------------

def _box_mixture_cdf(points, locs_sorted, cum_weights, cum_weighted_locs,
                     half_width):
    """CDF of sum_i w_i * Uniform[a_i - h, a_i + h] at the given points."""
    points = np.asarray(points, dtype=float)
    i_lo = np.searchsorted(locs_sorted, points - half_width, side="right")
    i_hi = np.searchsorted(locs_sorted, points + half_width, side="left")
    full = cum_weights[i_lo]
    mid_w = cum_weights[i_hi] - cum_weights[i_lo]
    mid_wa = cum_weighted_locs[i_hi] - cum_weighted_locs[i_lo]
    partial = (mid_w * (points + half_width) - mid_wa) / (2.0 * half_width)
    return full + partial


def box_mixture_density(locations, weights, half_width: float,
                        grid: GridSpec) -> GridDensity:
    """Grid representation of a weighted mixture of uniform boxes.

    Each atom contributes a box of half-width ``half_width`` around its
    location.  Values are exact averages over the trapezoid quadrature cells,
    so the trapezoid integral recovers the mass inside the grid exactly; at
    grid points whose cell contains no box edge the average coincides with
    the pointwise density.
    """
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    locs = _as_finite_1d(locations, "locations")
    wts = _as_finite_1d(weights, "weights")
    if locs.size != wts.size:
        raise ValueError("locations and weights must have equal length")
    order = np.argsort(locs, kind="stable")
    locs = locs[order]
    wts = wts[order]
    cum_w = np.concatenate([[0.0], np.cumsum(wts)])
    cum_wa = np.concatenate([[0.0], np.cumsum(wts * locs)])

    points = grid.points()
    bounds = np.empty(grid.n_points + 1)
    bounds[0] = grid.lo
    bounds[-1] = grid.hi
    bounds[1:-1] = 0.5 * (points[:-1] + points[1:])
    cdf = _box_mixture_cdf(bounds, locs, cum_w, cum_wa, half_width)
    masses = np.diff(cdf)
    quad = np.full(grid.n_points, grid.spacing)
    quad[0] *= 0.5
    quad[-1] *= 0.5
    values = np.maximum(masses / quad, 0.0)
    total = float(wts.sum())
    covered = (abs(total - 1.0) <= WEIGHT_TOL
               and grid.covers(locs[0] - half_width, locs[-1] + half_width))
    return GridDensity(grid.lo, grid.hi, values, normalized=covered,
                       norm_tol=1e-9)


# Sparse helpers for the projection LP live here so mixfit stays free of
# scipy.sparse plumbing.

def weighted_l1_lp(design: np.ndarray, target: np.ndarray,
                   quad_weights: np.ndarray, tol: float = 1e-8,
                   maxiter: int = 5000):
    """Minimize ||design @ w - target||_{1,quad} over the simplex.

    Returns ``(w, objective, optimal)``.  The absolute residuals are lifted
    to auxiliary variables, giving a plain LP solved by HiGHS.
    """
    n_grid, n_atoms = design.shape
    a_sparse = csr_matrix(design)
    eye = csr_matrix((np.ones(n_grid), (range(n_grid), range(n_grid))),
                     shape=(n_grid, n_grid))
    a_ub = vstack([hstack([a_sparse, -eye]), hstack([-a_sparse, -eye])],
                  format="csr")
    b_ub = np.concatenate([target, -target])
    cost = np.concatenate([np.zeros(n_atoms), quad_weights])
    a_eq = csr_matrix(
        (np.ones(n_atoms), (np.zeros(n_atoms, dtype=int), range(n_atoms))),
        shape=(1, n_atoms + n_grid),
    )
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=(0, None), method="highs",
                  options={"maxiter": int(maxiter),
                           "primal_feasibility_tolerance": float(tol),
                           "dual_feasibility_tolerance": float(tol)})
    if res.x is None:
        return np.full(n_atoms, 1.0 / n_atoms), math.inf, False
    w = np.maximum(res.x[:n_atoms], 0.0)
    total = w.sum()
    if total > 0:
        w = w / total
    objective = float(quad_weights @ np.abs(design @ w - target))
    return w, objective, res.status == 0
