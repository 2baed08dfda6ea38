"""Mixed-regression estimation on top of the mixture pipeline.

The procedure has three steps.  A conditional density estimate at a point
of good separation feeds the project-smooth-denoise pipeline, which
recovers the weights and the (common) error density.  Then, at every point
of an x-grid, the regression values are read off a minimum-distance fit:
the vector theta minimizing the L¹ gap between the weighted, shifted error
densities and the local conditional density estimate.  Component labels
are positional throughout: position k carries the k-th smallest recovered
weight, its error density, and one regression curve.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyWindowError, InsufficientDataError
from .kde import BandwidthSchedule, BoundaryWarning, ConditionalKde
from .measures import GridDensity, GridSpec, l1_distance
from .mixfit import (
    DenoiseConfig,
    MixtureFit,
    ProjectionConfig,
    fit_mixture_from_density,
)
from .synth import Dataset, MixedRegressionModel

MAX_GRID_AXES = 3
X_GRID_POINTS = 101
SEP_MIN_WINDOW_FACTOR = 5


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MdeConfig:
    """Search box and refinement schedule for the minimum-distance step.

    The box bound ``B`` defaults to 1.1 times the largest absolute
    response when resolved by the fitting pipeline.  The solver sweeps a
    coarse grid of ``coarse_grid`` points per axis over [-B, B]^K, then
    runs ``refine_levels`` passes that shrink the box by 0.2 around the
    incumbent.  Full grid enumeration covers K <= 3 and returns the
    lexicographically smallest minimizer of the sampled grid; higher K
    requires ``mode="coordinate"``, a greedy axis-at-a-time search whose
    first level sweeps the full box on every axis.  Coordinate mode is a
    local method and carries no tie-break guarantee.
    """

    B: float | None = None
    coarse_grid: int = 61
    refine_levels: int = 3
    shrink: float = 0.2
    mode: str = "grid"

    def __post_init__(self):
        if self.B is not None and self.B <= 0:
            raise ValueError("B must be positive")
        if self.coarse_grid < 3:
            raise ValueError("coarse_grid must be at least 3")
        if self.refine_levels < 0:
            raise ValueError("refine_levels must be nonnegative")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if self.mode not in ("grid", "coordinate"):
            raise ValueError(f"unknown mde mode {self.mode!r}")

    def resolution(self) -> float:
        """Final per-axis grid spacing as a fraction of B."""
        half = self.shrink ** self.refine_levels
        return 2.0 * half / (self.coarse_grid - 1)


# ---------------------------------------------------------------------------
# result container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressionFit:
    """Estimated regression curves with their mixture fit.

    ``m_hat[k]`` evaluates the curve bound to the k-th sorted weight on
    ``x_grid``.  ``per_x_objective`` holds the residual of each per-x
    minimum-distance solve (NaN where the window was empty and the value
    was interpolated; those points are flagged in ``interpolated``).
    """

    x_grid: tuple
    m_hat: tuple
    mixture: MixtureFit
    per_x_objective: tuple
    x0_used: float
    interpolated: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.m_hat)
        n = len(self.x_grid)
        if k == 0 or any(len(m) != n for m in self.m_hat):
            raise ValueError("m_hat must hold one length-n curve per component")
        if len(self.per_x_objective) != n:
            raise ValueError("per_x_objective must match x_grid")
        if self.interpolated and len(self.interpolated) != n:
            raise ValueError("interpolated mask must match x_grid")

    @property
    def k(self) -> int:
        return len(self.m_hat)

    def lambdas_sorted(self) -> tuple:
        """Recovered weights in their positional (ascending) order."""
        return tuple(self.mixture.lambdas_hat)

    def to_json_obj(self) -> dict:
        return {
            "x_grid": list(self.x_grid),
            "m_hat": [list(m) for m in self.m_hat],
            "mixture": self.mixture.to_json_obj(),
            "per_x_objective": [
                None if math.isnan(v) else v for v in self.per_x_objective
            ],
            "x0_used": self.x0_used,
            "interpolated": [bool(v) for v in self.interpolated],
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RegressionFit":
        return cls(
            x_grid=tuple(obj["x_grid"]),
            m_hat=tuple(tuple(m) for m in obj["m_hat"]),
            mixture=MixtureFit.from_json_obj(obj["mixture"]),
            per_x_objective=tuple(
                math.nan if v is None else float(v)
                for v in obj["per_x_objective"]
            ),
            x0_used=obj["x0_used"],
            interpolated=tuple(bool(v) for v in obj.get("interpolated", [])),
            diagnostics=obj.get("diagnostics", {}),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["x", *(f"m{k + 1}" for k in range(self.k)), "residual"]
            )
            for i, x in enumerate(self.x_grid):
                writer.writerow([
                    repr(float(x)),
                    *(repr(float(m[i])) for m in self.m_hat),
                    repr(float(self.per_x_objective[i])),
                ])


# ---------------------------------------------------------------------------
# minimum-distance core
# ---------------------------------------------------------------------------

def _extended_target(p_hat: GridDensity, b_bound: float):
    """Pad the target grid by B on both sides so shifts lose no mass."""
    spacing = p_hat.spacing
    pad = int(math.ceil(b_bound / spacing)) + 1
    pts = np.concatenate([
        p_hat.lo + spacing * np.arange(-pad, 0),
        p_hat.grid,
        p_hat.hi + spacing * np.arange(1, pad + 1),
    ])
    target = np.concatenate([
        np.zeros(pad), p_hat.values, np.zeros(pad)
    ])
    quad = np.full(pts.size, spacing)
    quad[0] *= 0.5
    quad[-1] *= 0.5
    return pts, target, quad


def _shift_bank(pts: np.ndarray, f_hat: GridDensity, scale: float,
                offsets: np.ndarray) -> np.ndarray:
    """Rows of scale * f_hat(pts - offset), linearly interpolated."""
    bank = np.empty((offsets.size, pts.size))
    f_pts = f_hat.grid
    for i, off in enumerate(offsets):
        bank[i] = np.interp(pts - off, f_pts, f_hat.values,
                            left=0.0, right=0.0)
    return bank * scale


def _axis_candidates(center: float, half: float, b_bound: float,
                     count: int) -> np.ndarray:
    lo = max(center - half, -b_bound)
    hi = min(center + half, b_bound)
    return np.linspace(lo, hi, count)


def _sweep_full_grid(pts, target, quad, f_hats, lambdas, axes):
    """Exhaustive lexicographic sweep over the per-axis candidate lists.

    Returns the lexicographically smallest argmin and its objective.
    Candidates are enumerated with the last axis vectorized; earlier
    candidates win ties through a strict-improvement threshold.
    """
    k = len(axes)
    banks = [_shift_bank(pts, f_hats[j], lambdas[j], axes[j])
             for j in range(k)]
    best_obj = math.inf
    best_theta = None
    last_bank = banks[-1]
    for combo in itertools.product(*(range(a.size) for a in axes[:-1])):
        base = np.zeros(pts.size)
        for j, c in enumerate(combo):
            base = base + banks[j][c]
        objs = np.abs(base[None, :] + last_bank - target[None, :]) @ quad
        row_min = float(objs.min())
        tie = 1e-12 * (1.0 + abs(row_min))
        if best_theta is None \
                or row_min < best_obj - 1e-12 * (1.0 + abs(best_obj)):
            idx = int(np.flatnonzero(objs <= row_min + tie)[0])
            best_obj = float(objs[idx])
            best_theta = [axes[j][c] for j, c in enumerate(combo)]
            best_theta.append(axes[-1][idx])
    return np.array(best_theta), best_obj


def _sweep_coordinate(pts, target, quad, f_hats, lambdas, axes, theta):
    """One round of per-axis sweeps holding the other coordinates fixed."""
    k = len(axes)
    shifted = [
        _shift_bank(pts, f_hats[j], lambdas[j], np.array([theta[j]]))[0]
        for j in range(k)
    ]
    best_obj = float(
        np.abs(np.sum(shifted, axis=0) - target) @ quad
    )
    theta = np.array(theta, dtype=float)
    for j in range(k):
        bank = _shift_bank(pts, f_hats[j], lambdas[j], axes[j])
        others = [shifted[i] for i in range(k) if i != j]
        rest = np.sum(others, axis=0) if others else np.zeros(pts.size)
        objs = np.abs(rest[None, :] + bank - target[None, :]) @ quad
        row_min = float(objs.min())
        tie = 1e-12 * (1.0 + abs(row_min))
        idx = int(np.flatnonzero(objs <= row_min + tie)[0])
        if row_min < best_obj - 1e-12 * (1.0 + abs(best_obj)) or (
                abs(row_min - best_obj) <= tie and axes[j][idx] < theta[j]):
            best_obj = float(objs[idx])
            theta[j] = axes[j][idx]
            shifted[j] = bank[idx]
    return theta, best_obj


def _minimize_l1(p_hat: GridDensity, lambdas, f_hats, cfg: MdeConfig):
    """Shared minimum-distance solver over the box [-B, B]^K."""
    lambdas = np.asarray(lambdas, dtype=float)
    k = lambdas.size
    if k == 0 or np.any(lambdas < 0):
        raise ValueError("lambdas must be nonnegative")
    if abs(float(lambdas.sum()) - 1.0) > 1e-6:
        raise ValueError("lambdas must lie on the simplex")
    if len(f_hats) != k:
        raise ValueError("need one density per weight")
    for f in f_hats:
        if not f.normalized:
            raise ValueError("component densities must be flagged normalized")
    if cfg.B is None:
        raise ValueError("MdeConfig.B must be resolved before solving")
    if cfg.mode == "grid" and k > MAX_GRID_AXES:
        raise ValueError(
            f"full-grid enumeration supports K <= {MAX_GRID_AXES}; "
            f"use MdeConfig(mode='coordinate') for K = {k}"
        )
    pts, target, quad = _extended_target(p_hat, cfg.B)

    if cfg.mode == "grid":
        theta = None
        half = cfg.B
        centers = np.zeros(k)
        best_obj = math.inf
        for _level in range(cfg.refine_levels + 1):
            axes = [
                _axis_candidates(centers[j], half, cfg.B, cfg.coarse_grid)
                for j in range(k)
            ]
            cand_theta, cand_obj = _sweep_full_grid(
                pts, target, quad, f_hats, lambdas, axes
            )
            if cand_obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
                best_obj = cand_obj
                theta = cand_theta
            elif theta is None:
                best_obj = cand_obj
                theta = cand_theta
            centers = theta.copy()
            half *= cfg.shrink
        return tuple(float(v) for v in theta), float(best_obj)

    # Coordinate descent: full-box sweeps first so every axis sees the
    # whole range, then shrinking local refinement.
    theta = np.zeros(k)
    half = cfg.B
    best_obj = math.inf
    for level in range(cfg.refine_levels + 1):
        for _ in range(2):  # two passes per level so axes can interact
            axes = [
                _axis_candidates(0.0 if level == 0 else theta[j],
                                 half, cfg.B, cfg.coarse_grid)
                for j in range(k)
            ]
            theta, best_obj = _sweep_coordinate(
                pts, target, quad, f_hats, lambdas, axes, theta
            )
        half *= cfg.shrink
    return tuple(float(v) for v in theta), float(best_obj)


def mde_at_x(p_hat_x: GridDensity, lambdas, f_hat: GridDensity,
             cfg: MdeConfig):
    """Regression values at one x under the common-error-density model.

    Minimizes ``||sum_k lambda_k f_hat(. - theta_k) - p_hat_x||_1`` over
    the box; exact ties go to the lexicographically smallest theta.
    """
    k = len(tuple(lambdas))
    return _minimize_l1(p_hat_x, lambdas, [f_hat] * k, cfg)


def mde_general_at_x(p_hat_x: GridDensity, lambdas, f_hats,
                     cfg: MdeConfig):
    """Per-component-density variant of the minimum-distance step."""
    return _minimize_l1(p_hat_x, lambdas, list(f_hats), cfg)


# ---------------------------------------------------------------------------
# separation search
# ---------------------------------------------------------------------------

def find_separation_point(data: Dataset, k: int, window: float,
                          a: float | None = None, b: float | None = None,
                          n_grid: int = X_GRID_POINTS):
    """Locate the covariate where the response clusters separate most.

    For each grid point x the responses with covariate within ``window``
    are split into K groups by cutting the K - 1 largest sorted-value
    gaps; the separation score is the smallest distance between group
    midrange centers minus twice the largest group half-range.  Returns
    the argmax (smallest x on ties) and the full (x, score) profile;
    windows with fewer than 5 K points score minus infinity.
    """
    if k < 1:
        raise ValueError("K must be at least 1")
    if window <= 0:
        raise ValueError("window must be positive")
    a = float(data.x.min()) if a is None else float(a)
    b = float(data.x.max()) if b is None else float(b)
    if not a < b:
        raise ValueError("domain requires a < b")
    xs = np.linspace(a, b, n_grid)
    if k == 1:
        # Nothing to separate; every window scores infinity.
        profile = [(float(x), math.inf) for x in xs]
        return float(0.5 * (a + b)), profile

    order = np.argsort(data.x, kind="stable")
    x_sorted = data.x[order]
    y_sorted = data.y[order]
    min_count = SEP_MIN_WINDOW_FACTOR * k
    profile = []
    best_x, best_sep = None, -math.inf
    for x in xs:
        i = np.searchsorted(x_sorted, x - window, side="left")
        j = np.searchsorted(x_sorted, x + window, side="right")
        ys = np.sort(y_sorted[i:j])
        if ys.size < min_count:
            profile.append((float(x), -math.inf))
            continue
        gaps = np.diff(ys)
        cuts = np.sort(np.argsort(-gaps, kind="stable")[:k - 1])
        bounds = [0, *(c + 1 for c in cuts), ys.size]
        centers, half_ranges = [], []
        for lo_i, hi_i in zip(bounds[:-1], bounds[1:]):
            chunk = ys[lo_i:hi_i]
            centers.append(0.5 * (chunk[0] + chunk[-1]))
            half_ranges.append(0.5 * (chunk[-1] - chunk[0]))
        centers = np.array(centers)
        sep = float(np.diff(centers).min() - 2.0 * max(half_ranges))
        profile.append((float(x), sep))
        if sep > best_sep:
            best_sep = sep
            best_x = float(x)
    if best_x is None:
        raise InsufficientDataError(
            f"no window of half-width {window:g} holds {min_count} points"
        )
    return best_x, profile


# ---------------------------------------------------------------------------
# full regression pipeline
# ---------------------------------------------------------------------------

def fit_mixed_regression(data: Dataset, k: int, sigma: float,
                         x0: float | None = None,
                         a: float | None = None, b: float | None = None,
                         bandwidth: BandwidthSchedule | None = None,
                         proj_cfg: ProjectionConfig | None = None,
                         denoise: DenoiseConfig | None = None,
                         mde_cfg: MdeConfig | None = None,
                         n_x_grid: int = X_GRID_POINTS) -> RegressionFit:
    """Estimate the regression curves of a K-component mixed regression.

    The mixture is fitted to the conditional density at ``x0`` (found by
    the separation search when not supplied; clamped into the interior
    when it sits at the boundary).  The per-x regression values then come
    from minimum-distance solves against the pooled error density
    ``sum_k lambda_k f_k``; empty-window grid points are interpolated
    from their neighbors and flagged.
    """
    n = len(data)
    if k < 1:
        raise ValueError("K must be at least 1")
    if n < 50 * k:
        raise InsufficientDataError(
            f"need at least 50 K = {50 * k} samples, got {n}"
        )
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    bandwidth = bandwidth or BandwidthSchedule()
    kde = ConditionalKde(data, bandwidth, a=a, b=b)
    h = kde.h

    if x0 is None:
        x0, _ = find_separation_point(data, k, window=h, a=kde.a, b=kde.b)

    y_abs = float(np.abs(data.y).max())
    pad = max(6.0 * sigma, h)
    y_grid = GridSpec(float(data.y.min()) - pad,
                      float(data.y.max()) + pad, 2048)

    with warnings.catch_warnings():
        # Boundary x0 is legitimately clamped to x0 +- h.
        warnings.simplefilter("ignore", BoundaryWarning)
        x0_used = kde.clamp(x0)
        p_hat_x0 = kde.conditional_density_at(x0_used, y_grid)
    n_local = kde.window_count(x0_used)
    mixture = fit_mixture_from_density(
        p_hat_x0, k, sigma, cfg=proj_cfg, denoise=denoise, n_hint=n_local
    )

    # Pooled error density: the model asserts one common f, so average
    # the per-component recoveries by their weights.
    f_grid = mixture.f_hats[0].spec()
    pooled_vals = np.zeros(f_grid.n_points)
    for lam, f in zip(mixture.lambdas_hat, mixture.f_hats):
        pooled_vals += lam * f.values
    f_pooled = GridDensity(f_grid.lo, f_grid.hi, pooled_vals,
                           normalized=True)

    mde_cfg = mde_cfg or MdeConfig()
    if mde_cfg.B is None:
        mde_cfg = MdeConfig(B=1.1 * y_abs, coarse_grid=mde_cfg.coarse_grid,
                            refine_levels=mde_cfg.refine_levels,
                            shrink=mde_cfg.shrink, mode=mde_cfg.mode)

    lo_int, hi_int = kde.interior()
    xs = np.linspace(lo_int, hi_int, n_x_grid)
    thetas = np.full((n_x_grid, k), math.nan)
    objectives = np.full(n_x_grid, math.nan)
    failed = np.zeros(n_x_grid, dtype=bool)
    for i, x in enumerate(xs):
        try:
            p_hat_x = kde.conditional_density_at(float(x), y_grid)
        except EmptyWindowError:
            failed[i] = True
            continue
        theta, obj = mde_at_x(p_hat_x, mixture.lambdas_hat, f_pooled,
                              mde_cfg)
        thetas[i] = theta
        objectives[i] = obj
    if np.all(failed):
        raise EmptyWindowError(
            "every x-grid window was empty; bandwidth too small for n"
        )
    if np.any(failed):
        good = ~failed
        for j in range(k):
            thetas[failed, j] = np.interp(xs[failed], xs[good],
                                          thetas[good, j])

    diagnostics = {
        "h": h, "n": n, "B": mde_cfg.B, "n_local_x0": n_local,
        "mde_resolution": mde_cfg.resolution() * mde_cfg.B,
    }
    return RegressionFit(
        x_grid=tuple(float(v) for v in xs),
        m_hat=tuple(tuple(float(v) for v in thetas[:, j]) for j in range(k)),
        mixture=mixture,
        per_x_objective=tuple(float(v) for v in objectives),
        x0_used=float(x0_used),
        interpolated=tuple(bool(v) for v in failed),
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate_regression_fit(fit: RegressionFit,
                            truth: MixedRegressionModel) -> dict:
    """Error report for a fit against the generating model.

    Components are aligned by sorting both weight vectors ascending (the
    fit already is); the best-permutation curve error is also reported,
    as a diagnostic only, to separate label mistakes from value mistakes.
    When labels flip between grid points no single permutation fits the
    whole grid, so the pointwise-pairing error (best pairing chosen per x,
    then averaged) is reported as well.
    """
    if fit.k != truth.k:
        raise ValueError("fit and truth must have the same K")
    xs = np.asarray(fit.x_grid)
    if xs.min() < truth.a - 1e-9 or xs.max() > truth.b + 1e-9:
        raise ValueError("fit grid extends beyond the model domain")

    order = np.argsort(truth.lambdas, kind="stable")
    lam_true = np.asarray(truth.lambdas)[order]
    lam_err = float(np.max(np.abs(np.asarray(fit.lambdas_sorted())
                                  - lam_true)))

    true_curves = truth.curve_values(xs)[order]
    est_curves = np.asarray(fit.m_hat)
    diff = np.abs(est_curves - true_curves)
    m_l1 = np.trapezoid(diff, xs, axis=1)
    m_mean = diff.mean(axis=1)

    f_errs = []
    for f_hat in fit.mixture.f_hats:
        spec = f_hat.spec()
        vals = truth.g0.density_values(truth.sigma, spec.points())
        truth_dens = GridDensity(spec.lo, spec.hi, vals, normalized=True)
        f_errs.append(l1_distance(f_hat, truth_dens))

    best_perm = None
    best_perm_mean = math.inf
    best_perm_l1 = math.inf
    perm_maxes = []
    for perm in itertools.permutations(range(fit.k)):
        permuted = est_curves[list(perm)]
        d = np.abs(permuted - true_curves)
        perm_maxes.append(d.max(axis=0))
        mean_err = float(d.mean(axis=1).max())
        if mean_err < best_perm_mean:
            best_perm_mean = mean_err
            best_perm_l1 = float(np.trapezoid(d, xs, axis=1).max())
            best_perm = perm
    # Per-x pairing: labels may flip between grid points, so pick the best
    # permutation separately at each x before averaging.
    pointwise = float(np.min(np.stack(perm_maxes), axis=0).mean())

    return {
        "lambda_error_sorted": lam_err,
        "m_l1_errors": [float(v) for v in m_l1],
        "m_l1_max": float(m_l1.max()),
        "m_mean_abs_errors": [float(v) for v in m_mean],
        "m_mean_abs_max": float(m_mean.max()),
        "f_l1_errors": [float(v) for v in f_errs],
        "f_l1_max": float(max(f_errs)),
        "best_perm_m_mean_abs_max": best_perm_mean,
        "best_perm_m_l1_max": best_perm_l1,
        "best_perm": list(best_perm),
        "pointwise_pairing_m_mean": pointwise,
        "x0_used": fit.x0_used,
    }
