"""Continuous-domain constraints: regions of finite measure, polar and
box quadrature, the satisfaction-mass integral W, the continuous KL
objective, and total variation against the region's uniform density.

The continuous KL includes the additive constant -log A_phi so that
KL >= 0 and KL(rho || rho) = 0 hold; the constant does not affect
gradients or optimization trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import autodiff as ad


@dataclass
class Region:
    indicator: Callable[[np.ndarray], np.ndarray]  # (N, 2) points -> bool mask
    measure: float
    bbox: Tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    polar: Optional[Tuple[float, float, float, float]] = None  # r0, r1, th0, th1

    def __post_init__(self):
        if not (0 < self.measure < np.inf):
            raise ValueError("region measure must be finite and positive")


@dataclass
class QuadratureGrid:
    nodes: np.ndarray  # (N, 2) cartesian points
    weights: np.ndarray  # (N,), including any change-of-variables Jacobian

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if self.nodes.shape != (self.weights.size, 2):
            raise ValueError("nodes/weights shape mismatch")


def quarter_disc_region() -> Region:
    """First quadrant of the unit disc; area pi/4."""

    def indicator(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        x, y = pts[:, 0], pts[:, 1]
        return (x * x + y * y <= 1.0) & (x >= 0.0) & (y >= 0.0)

    return Region(
        indicator=indicator,
        measure=np.pi / 4.0,
        bbox=(0.0, 1.0, 0.0, 1.0),
        polar=(0.0, 1.0, 0.0, np.pi / 2.0),
    )


def polar_quadrature(
    nr: int,
    ntheta: int,
    rule: str = "midpoint",
    r_range: Tuple[float, float] = (0.0, 1.0),
    theta_range: Tuple[float, float] = (0.0, np.pi / 2.0),
) -> QuadratureGrid:
    """Tensor grid for integrals of the form int int g(r cos t, r sin t) r dt dr."""
    if nr < 2 or ntheta < 2:
        raise ValueError("need at least 2 nodes per axis")
    r0, r1 = r_range
    t0, t1 = theta_range
    if rule == "midpoint":
        r = r0 + (np.arange(nr) + 0.5) * (r1 - r0) / nr
        wr = np.full(nr, (r1 - r0) / nr)
        t = t0 + (np.arange(ntheta) + 0.5) * (t1 - t0) / ntheta
        wt = np.full(ntheta, (t1 - t0) / ntheta)
    elif rule == "gauss":
        xr, wr = np.polynomial.legendre.leggauss(nr)
        r = 0.5 * (r1 - r0) * (xr + 1.0) + r0
        wr = 0.5 * (r1 - r0) * wr
        xt, wt = np.polynomial.legendre.leggauss(ntheta)
        t = 0.5 * (t1 - t0) * (xt + 1.0) + t0
        wt = 0.5 * (t1 - t0) * wt
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    rr, tt = np.meshgrid(r, t, indexing="ij")
    ww = np.outer(wr, wt) * rr  # Jacobian r from the polar change of variables
    nodes = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
    return QuadratureGrid(nodes=nodes, weights=ww.ravel())


def w_integral(density_fn, grid: QuadratureGrid):
    """Quadrature approximation of the density mass on the region; the
    density callable maps the (N, 2) node array to N values (Node or
    ndarray), so the result is differentiable in the density parameters."""
    values = density_fn(grid.nodes)
    if isinstance(values, ad.Node):
        if not np.all(np.isfinite(values.value)):
            raise FloatingPointError("non-finite density at a quadrature node")
        return ad.sum(ad.mul(grid.weights, values))
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite density at a quadrature node")
    return float(np.sum(grid.weights * values))


def kl_continuous(region: Region, density_fn, grid: QuadratureGrid):
    """KL(rho_phi || f) = -log A_phi - (1/A_phi) * int_{M_phi} log f."""
    values = density_fn(grid.nodes)
    const = -np.log(region.measure)
    if isinstance(values, ad.Node):
        if np.any(values.value <= 0):
            raise FloatingPointError("density must be positive on the region")
        integral = ad.sum(ad.mul(grid.weights, ad.log(values)))
        return ad.add(const, ad.mul(-1.0 / region.measure, integral))
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise FloatingPointError("density must be positive on the region")
    return float(const - np.sum(grid.weights * np.log(values)) / region.measure)


def tv_continuous(region: Region, density_fn, grid: QuadratureGrid) -> float:
    """(1/2)( int_region |1/A - f| + (1 - int_region f) ); the off-region
    half is exact by complement because rho vanishes there (assumes f is
    normalized)."""
    values = np.asarray(density_fn(grid.nodes), dtype=np.float64)
    uniform = 1.0 / region.measure
    on_region = float(np.sum(grid.weights * np.abs(uniform - values)))
    mass_on = float(np.sum(grid.weights * values))
    return 0.5 * (on_region + (1.0 - mass_on))


def monte_carlo_integrate(fn, region: Region, n_samples: int, seed: int):
    """Uniform sampling over the bounding box, restricted to the region;
    returns (estimate, standard error). Verification oracle for quadrature."""
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    xmin, xmax, ymin, ymax = region.bbox
    pts = np.column_stack(
        [rng.uniform(xmin, xmax, n_samples), rng.uniform(ymin, ymax, n_samples)]
    )
    box_area = (xmax - xmin) * (ymax - ymin)
    inside = region.indicator(pts)
    values = np.where(inside, np.asarray(fn(pts), dtype=np.float64), 0.0)
    estimate = box_area * float(np.mean(values))
    stderr = box_area * float(np.std(values, ddof=1)) / np.sqrt(n_samples)
    return estimate, stderr


def region_from_inequalities(inequalities, bbox, n_measure_samples=1_000_000, seed=0):
    """Custom region from a bounding box plus callables g(pts) <= 0; the
    measure is Monte-Carlo estimated."""

    def indicator(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        mask = np.ones(len(pts), dtype=bool)
        for g in inequalities:
            mask &= np.asarray(g(pts)) <= 0
        return mask

    xmin, xmax, ymin, ymax = bbox
    rng = np.random.default_rng(seed)
    pts = np.column_stack(
        [rng.uniform(xmin, xmax, n_measure_samples), rng.uniform(ymin, ymax, n_measure_samples)]
    )
    measure = (xmax - xmin) * (ymax - ymin) * float(np.mean(indicator(pts)))
    return Region(indicator=indicator, measure=measure, bbox=tuple(bbox))
