"""Numerical evaluation of the asymptotic regret formulas.

The leading-order regret splits into bias, corruption, and variance terms,
each a surface integral over the decision boundary S = {eta = 1/2}.  This
module builds quadrature meshes on S, evaluates the per-point quantities
(b, t_{k,n}, ||Psi_dot||), assembles the decomposition for random and
adversarial corruption, and provides the optimal-k / convergence-rate
calculators.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq

from .corruption import CorruptionSpec, direction_second_moment
from .dataspace import DENSITY_CUTOFF, Model, as_point


class DegenerateBoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryMesh:
    points: np.ndarray  # (m, d) points on S
    weights: np.ndarray  # (m,) positive quadrature weights for dVol^{d-1}

    @property
    def size(self):
        return self.points.shape[0]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class TheoryReport:
    bias: float
    corruption: float
    variance: float
    t_max: float
    eps_knw: float
    B1: float

    @property
    def total(self) -> float:
        return self.bias + self.corruption + self.variance


@dataclass(frozen=True)
class GeneralRateParams:
    alpha: float  # smoothness exponent
    beta: float  # margin exponent
    A: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


# ---------------------------------------------------------------------------
# boundary meshes


def boundary_mesh(model: Model, resolution=32) -> BoundaryMesh:
    """Quadrature mesh of {eta = 1/2} intersected with the working support.

    Models with a hyperplane boundary (x . n = 0) are parametrized by the
    d-1 coordinates other than the largest-|n_j| one, which is solved for;
    one-dimensional models get the root of eta - 1/2.  Free coordinates are
    midpoint-sampled through the feature law's per-axis inverse CDF, so the
    quadrature density follows the feature density even on unbounded
    supports.  Points where the density falls below the support cutoff are
    dropped.
    """
    d = model.dimension
    lo, hi = model.support_box()

    if d == 1:
        x0 = _boundary_root_1d(model, float(lo[0]), float(hi[0]))
        return BoundaryMesh(np.array([[x0]]), np.array([1.0]))

    normal = model.boundary_normal()
    if normal is None:
        raise DegenerateBoundaryError(
            "only hyperplane boundaries are supported for d > 1")
    normal = np.asarray(normal, dtype=float)
    if np.allclose(normal, 0.0):
        raise DegenerateBoundaryError("boundary normal is zero (eta constant)")

    j = int(np.argmax(np.abs(normal)))
    free = [i for i in range(d) if i != j]

    # classify cells of a midpoint grid on the unit cube against the
    # constraint lo_j <= x_j(u) <= hi_j; x_j is separable and monotone per
    # axis, so per-cell extremes come from per-axis corner contributions
    ticks = np.arange(resolution + 1) / resolution
    contrib_lo, contrib_hi = [], []
    for i in free:
        x_t, _ = _axis_stretch(model, i, ticks, float(lo[i]), float(hi[i]))
        a = -(normal[i] / normal[j]) * x_t
        contrib_lo.append(np.minimum(a[:-1], a[1:]))
        contrib_hi.append(np.maximum(a[:-1], a[1:]))
    cell_min = np.stack(np.meshgrid(*contrib_lo, indexing="ij"), axis=0).sum(axis=0).ravel()
    cell_max = np.stack(np.meshgrid(*contrib_hi, indexing="ij"), axis=0).sum(axis=0).ravel()
    full = (cell_min >= lo[j]) & (cell_max <= hi[j])
    crossing = ~full & (cell_max > lo[j]) & (cell_min < hi[j])

    centers = (np.arange(resolution) + 0.5) / resolution
    U = np.stack(np.meshgrid(*([centers] * (d - 1)), indexing="ij"),
                 axis=-1).reshape(-1, d - 1)
    parts = [_eval_cells(model, normal, j, free, lo, hi, U[full],
                         1.0 / resolution, clip=False)]
    if np.any(crossing):
        # subdivide boundary cells so the O(h) clipping error drops with m
        m = 8 if d <= 3 else (4 if d == 4 else 2)
        sub = (np.arange(m) + 0.5) / m - 0.5
        offs = np.stack(np.meshgrid(*([sub] * (d - 1)), indexing="ij"),
                        axis=-1).reshape(-1, d - 1) / resolution
        Uc = (U[crossing][:, None, :] + offs[None, :, :]).reshape(-1, d - 1)
        parts.append(_eval_cells(model, normal, j, free, lo, hi, Uc,
                                 1.0 / (resolution * m), clip=True))
    P = np.concatenate([p for p, _ in parts])
    w = np.concatenate([w for _, w in parts])
    if P.shape[0] == 0:
        raise DegenerateBoundaryError("boundary does not intersect the support")
    dens = np.asarray(model.density(P), dtype=float)
    keep = dens >= DENSITY_CUTOFF * dens.max()
    return BoundaryMesh(P[keep], w[keep])


def _eval_cells(model, normal, j, free, lo, hi, U, h, clip):
    """Boundary points and weights for cube cells of side h centered at U."""
    d = normal.size
    xi = np.empty_like(U)
    # x_j = -(sum_{i != j} n_i x_i) / n_j; area element ||n|| / |n_j| d(xi)
    jac = np.full(U.shape[0], h ** (d - 1) * np.linalg.norm(normal) / abs(normal[j]))
    for c, i in enumerate(free):
        xi[:, c], dj = _axis_stretch(model, i, U[:, c], float(lo[i]), float(hi[i]))
        jac *= dj
    P = np.empty((U.shape[0], d))
    P[:, free] = xi
    P[:, j] = -(xi @ normal[free]) / normal[j]
    if clip:
        inside = (P[:, j] >= lo[j] - 1e-12) & (P[:, j] <= hi[j] + 1e-12)
        P, jac = P[inside], jac[inside]
    return P, jac


def _axis_stretch(model, axis, u, lo, hi):
    """Map unit-interval nodes to one free coordinate; returns (x, dx/du)."""
    law = getattr(model, "feature_law", None)
    if law is not None and law.name == "iid_exponential":
        # inverse CDF of Exp(mean): flattens the density decay exactly
        x = -law.mean * np.log1p(-u * (1.0 - DENSITY_CUTOFF))
        dj = law.mean * (1.0 - DENSITY_CUTOFF) / (1.0 - u * (1.0 - DENSITY_CUTOFF))
        return x, dj
    # bounded supports: plain affine map onto [lo, hi]
    return lo + (hi - lo) * u, np.full_like(u, hi - lo)


def _boundary_root_1d(model, lo, hi) -> float:
    f = lambda x: float(np.asarray(model.eta(np.array([x])))) - 0.5
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise DegenerateBoundaryError("eta - 1/2 does not change sign on the support")
    return float(brentq(f, lo, hi, xtol=1e-14))


# ---------------------------------------------------------------------------
# pointwise quantities


def b_term(model: Model, x) -> float:
    """The curvature/density drift scalar entering the bias term:
    b(x) = (1/(f(x) d)) * sum_j [ eta_grad_j f_grad_j + eta_hess_jj f / 2 ]."""
    x = as_point(x, model.dimension)
    f = float(np.asarray(model.density(x)))
    if f <= 0.0:
        raise ValueError("density must be positive at x")
    eg = np.asarray(model.eta_grad(x), dtype=float)
    fg = np.asarray(model.density_grad(x), dtype=float)
    hdiag = np.diagonal(np.asarray(model.eta_hess(x), dtype=float))
    return float((eg @ fg + 0.5 * f * hdiag.sum()) / (f * model.dimension))


def b_term_batch(model: Model, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = np.asarray(model.density(X), dtype=float)
    eg = np.asarray(model.eta_grad(X), dtype=float)
    fg = np.asarray(model.density_grad(X), dtype=float)
    h = np.asarray(model.eta_hess(X), dtype=float)
    htrace = np.trace(h, axis1=-2, axis2=-1)
    return ((eg * fg).sum(axis=1) + 0.5 * f * htrace) / (f * X.shape[1])


def unit_ball_volume(d) -> float:
    """a_d = 2^d Gamma(3/2)^d / Gamma(1 + d/2), the Euclidean unit-ball volume."""
    return float(2.0 ** d * math.gamma(1.5) ** d / math.gamma(1.0 + d / 2.0))


def t_kn(model: Model, x, k, n) -> float:
    """Leading-order expected squared distance to any of the k nearest
    neighbors: (k / (n a_d f(x)))^{2/d}."""
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    x = as_point(x, model.dimension)
    f = float(np.asarray(model.density(x)))
    if f <= 0.0:
        raise ValueError("density must be positive at x")
    d = model.dimension
    return float((k / (n * unit_ball_volume(d) * f)) ** (2.0 / d))


def t_kn_batch(model: Model, X, k, n) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = np.asarray(model.density(X), dtype=float)
    d = X.shape[1]
    return (k / (n * unit_ball_volume(d) * f)) ** (2.0 / d)


def psi_grad_norm(model: Model, x0) -> float:
    """||Psi_dot(x0)|| on the boundary, where Psi = f * (1 - 2 eta).

    On S the (1 - 2 eta) factor vanishes, leaving 2 f(x0) ||eta_grad(x0)||.
    """
    x0 = as_point(x0, model.dimension)
    e = float(np.asarray(model.eta(x0)))
    if abs(e - 0.5) > 1e-8:
        raise ValueError("x0 is not on the decision boundary")
    f = float(np.asarray(model.density(x0)))
    g = np.asarray(model.eta_grad(x0), dtype=float)
    return float(2.0 * f * np.sqrt((g ** 2).sum()))


def _psi_grad_norm_batch(model, X):
    f = np.asarray(model.density(X), dtype=float)
    g = np.asarray(model.eta_grad(X), dtype=float)
    return 2.0 * f * np.sqrt((g ** 2).sum(axis=1))


def _eta_grad_sqnorm_batch(model, X):
    g = np.asarray(model.eta_grad(X), dtype=float)
    return (g ** 2).sum(axis=1)


# ---------------------------------------------------------------------------
# regret decompositions


def variance_coefficient(model: Model, mesh: BoundaryMesh) -> float:
    """B1 = (1/2) Int_S ||Psi_dot|| / ||eta_grad||^2 dVol; variance = B1/(4k)."""
    psi = _psi_grad_norm_batch(model, mesh.points)
    g2 = _eta_grad_sqnorm_batch(model, mesh.points)
    return 0.5 * mesh.integrate(psi / g2)


def theoretical_regret(model: Model, k, n, spec: CorruptionSpec,
                       mesh: BoundaryMesh = None) -> TheoryReport:
    """Leading-order bias/corruption/variance decomposition for randomly
    perturbed test points (corruption zero when mode='none')."""
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    if mesh is None:
        mesh = boundary_mesh(model)
    P = mesh.points
    psi = _psi_grad_norm_batch(model, P)
    g2 = _eta_grad_sqnorm_batch(model, P)
    b = b_term_batch(model, P)
    t = t_kn_batch(model, P, k, n)

    bias = 0.5 * mesh.integrate(psi / g2 * (b * t) ** 2)
    B1 = 0.5 * mesh.integrate(psi / g2)
    variance = B1 / (4.0 * k)

    omega = spec.omega if spec.mode != "none" else 0.0
    if omega == 0.0:
        corruption = 0.0
    else:
        # E (delta^T eta_grad)^2 / ||eta_grad||^2 replaces omega^2/d for
        # general Lp noise; equal to omega^2/d for the p=2 sphere
        m2 = direction_second_moment(model.dimension, spec.norm_p, spec.geometry)
        corruption = 0.5 * omega ** 2 * m2 * mesh.integrate(psi)

    t_max = float(t.max())
    eps = max(math.log(k) / math.sqrt(k), t_max + omega) if k > 1 else t_max + omega
    return TheoryReport(bias=float(bias), corruption=float(corruption),
                        variance=float(variance), t_max=t_max,
                        eps_knw=float(eps), B1=float(B1))


def adversarial_theoretical_regret(model: Model, k, n, omega,
                                   mesh: BoundaryMesh = None) -> TheoryReport:
    """Decomposition under the white-box attack: corruption term carries
    2 omega^2 ||eta_grad||^2 in place of the random-noise moment (2d times
    the p=2 random corruption term)."""
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    if mesh is None:
        mesh = boundary_mesh(model)
    P = mesh.points
    psi = _psi_grad_norm_batch(model, P)
    g2 = _eta_grad_sqnorm_batch(model, P)
    b = b_term_batch(model, P)
    t = t_kn_batch(model, P, k, n)

    t_max = float(t.max())
    if omega > 0.0 and (1.0 / math.sqrt(k) >= omega or t_max >= omega):
        warnings.warn(
            "attack decomposition assumes 1/sqrt(k) and t_{k,n} << omega; "
            "the reported terms may not dominate the remainder", stacklevel=2)

    bias = 0.5 * mesh.integrate(psi / g2 * (b * t) ** 2)
    B1 = 0.5 * mesh.integrate(psi / g2)
    variance = B1 / (4.0 * k)
    corruption = omega ** 2 * mesh.integrate(psi)
    eps = max(math.log(k) / math.sqrt(k), t_max + omega) if k > 1 else t_max + omega
    return TheoryReport(bias=float(bias), corruption=float(corruption),
                        variance=float(variance), t_max=t_max,
                        eps_knw=float(eps), B1=float(B1))


# ---------------------------------------------------------------------------
# rate calculators


def general_rate_k(params: GeneralRateParams, n, d, omega) -> int:
    """k ~ n^{2a/(2a+d)} ^ (n^{2a/d} w^{-2ab})^{1/(2a/d+b+1)}, rounded."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    a, b = params.alpha, params.beta
    clean = n ** (2.0 * a / (2.0 * a + d))
    if omega == 0.0:
        k = clean
    else:
        noisy = (n ** (2.0 * a / d) * omega ** (-2.0 * a * b)) ** (
            1.0 / (2.0 * a / d + b + 1.0))
        k = min(clean, noisy)
    return max(1, min(int(round(k)), n))


def optimal_k(n, d, omega=0.0) -> int:
    """The regret-minimizing neighbor count, k ~ n^{4/(4+d)} clipped for
    large omega (the alpha=2, beta=1 case of the general formula)."""
    return general_rate_k(GeneralRateParams(2.0, 1.0), n, d, omega)


def general_rate(params: GeneralRateParams, n, d, omega) -> float:
    """Order of Regret(n, omega): omega^{a(b+1)} v n^{-a(b+1)/(2a+d)}
    (multiplicative constant 1)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    a, b = params.alpha, params.beta
    return float(max(omega ** (a * (b + 1.0)), n ** (-a * (b + 1.0) / (2.0 * a + d))))
